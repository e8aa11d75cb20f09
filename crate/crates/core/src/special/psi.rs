//! Digamma, trigamma and tetragamma via upward recurrence into the
//! asymptotic (Bernoulli-number) series region.

use crate::error::{Error, Result};

const ASYMPTOTIC_CUTOFF: f64 = 10.0;

fn check_domain(x: f64, name: &str) -> Result<()> {
    if !x.is_finite() || x <= 0.0 {
        return Err(Error::domain(alloc::format!("{name} requires x > 0, got {x}")));
    }
    Ok(())
}

/// Digamma function psi(x), absolute error below 1e-12 on [1e-3, 1e6].
pub fn digamma(x: f64) -> Result<f64> {
    check_domain(x, "digamma")?;
    let mut x = x;
    let mut acc = 0.0;
    while x < ASYMPTOTIC_CUTOFF {
        acc -= 1.0 / x;
        x += 1.0;
    }
    // psi(x) ~ ln x - 1/(2x) - sum B_{2k} / (2k x^{2k})
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let series = inv2
        * (1.0 / 12.0
            - inv2
                * (1.0 / 120.0
                    - inv2
                        * (1.0 / 252.0
                            - inv2 * (1.0 / 240.0 - inv2 * (1.0 / 132.0 - inv2 * 691.0 / 32760.0)))));
    Ok(acc + libm::log(x) - 0.5 * inv - series)
}

/// Trigamma function psi'(x), relative error below 1e-12 on [1e-3, 1e6].
pub fn trigamma(x: f64) -> Result<f64> {
    check_domain(x, "trigamma")?;
    let mut x = x;
    let mut acc = 0.0;
    while x < ASYMPTOTIC_CUTOFF {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    // psi'(x) ~ 1/x + 1/(2x^2) + sum B_{2k} / x^{2k+1}
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let series = inv
        * (1.0
            + inv * 0.5
            + inv2
                * (1.0 / 6.0
                    - inv2
                        * (1.0 / 30.0
                            - inv2
                                * (1.0 / 42.0
                                    - inv2
                                        * (1.0 / 30.0
                                            - inv2 * (5.0 / 66.0 - inv2 * 691.0 / 2730.0))))));
    Ok(acc + series)
}

/// Tetragamma function psi''(x); used as the Newton derivative when
/// inverting the trigamma function.
pub fn tetragamma(x: f64) -> Result<f64> {
    check_domain(x, "tetragamma")?;
    let mut x = x;
    let mut acc = 0.0;
    while x < ASYMPTOTIC_CUTOFF {
        acc -= 2.0 / (x * x * x);
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    // derivative of the trigamma asymptotic series
    let series = -inv2
        * (1.0
            + inv
            + inv2 * (0.5 - inv2 * (1.0 / 6.0 - inv2 * (1.0 / 6.0 - inv2 * 3.0 / 10.0))));
    Ok(acc + series)
}

/// Solves psi'(a) = y for a > 0 by Newton iteration with a monotone
/// bisection safeguard. psi' is strictly decreasing, so the root is unique.
pub fn inv_trigamma(y: f64) -> Result<f64> {
    if !y.is_finite() || y <= 0.0 {
        return Err(Error::domain(alloc::format!("inv_trigamma requires y > 0, got {y}")));
    }
    // psi'(a) ~ 1/a for large a, ~ 1/a^2 for small a
    let mut a = if y > 2.0 { 1.0 / libm::sqrt(y) } else { (1.0 + libm::sqrt(1.0 + 2.0 * y)) / (2.0 * y) };
    let mut lo = 0.0_f64;
    let mut hi = f64::INFINITY;
    for _ in 0..100 {
        let r = trigamma(a)? - y;
        if libm::fabs(r) <= 1e-13 * y.max(1e-300) + 1e-300 {
            return Ok(a);
        }
        if r > 0.0 {
            lo = lo.max(a); // psi'(a) too big -> a too small
        } else {
            hi = hi.min(a);
        }
        let step = -r / tetragamma(a)?;
        let mut next = a + step;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = if hi.is_finite() { 0.5 * (lo + hi) } else { a * 2.0 };
        }
        a = next;
    }
    // Newton stalls only in extreme tails; accept the bracket midpoint if tight.
    if hi.is_finite() && (hi - lo) <= 1e-9 * hi {
        return Ok(0.5 * (lo + hi));
    }
    Err(Error::numerical(alloc::format!("inv_trigamma failed to converge for y = {y}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    const EULER_GAMMA: f64 = 0.5772156649015329;

    #[test]
    fn digamma_reference_values() {
        assert!((digamma(1.0).unwrap() + EULER_GAMMA).abs() < 1e-13);
        // psi(1/2) = -gamma - 2 ln 2
        let want = -EULER_GAMMA - 2.0 * core::f64::consts::LN_2;
        assert!((digamma(0.5).unwrap() - want).abs() < 1e-13);
        assert!((digamma(0.5).unwrap() + 1.9635100260214235).abs() < 1e-12);
    }

    #[test]
    fn trigamma_reference_values() {
        let pi2_6 = core::f64::consts::PI * core::f64::consts::PI / 6.0;
        assert!((trigamma(1.0).unwrap() - pi2_6).abs() < 1e-13);
        assert!((trigamma(10.0).unwrap() - 0.10516633568168575).abs() < 1e-13);
    }

    #[test]
    fn recurrences_hold_on_log_grid() {
        let mut x = 1e-3;
        while x < 1e5 {
            let d = digamma(x + 1.0).unwrap() - digamma(x).unwrap();
            assert!(
                (d - 1.0 / x).abs() < 1e-12 * (1.0 / x).max(1.0),
                "digamma recurrence at {x}"
            );
            let t = trigamma(x).unwrap() - trigamma(x + 1.0).unwrap();
            assert!(
                (t - 1.0 / (x * x)).abs() < 1e-12 * (1.0 / (x * x)).max(1.0),
                "trigamma recurrence at {x}"
            );
            x *= 1.7;
        }
    }

    #[test]
    fn trigamma_strictly_decreasing() {
        let mut prev = f64::INFINITY;
        let mut x = 1e-3;
        while x < 1e5 {
            let t = trigamma(x).unwrap();
            assert!(t > 0.0 && t < prev);
            prev = t;
            x *= 1.3;
        }
    }

    #[test]
    fn inv_trigamma_round_trip() {
        for &a in &[1e-3, 0.1, 0.5, 1.0, 4.7, 33.0, 1e4] {
            let y = trigamma(a).unwrap();
            let back = inv_trigamma(y).unwrap();
            assert!((back - a).abs() < 1e-9 * a, "a={a} back={back}");
        }
    }

    #[test]
    fn domain_errors() {
        assert!(digamma(0.0).is_err());
        assert!(digamma(-1.0).is_err());
        assert!(digamma(f64::NAN).is_err());
        assert!(trigamma(0.0).is_err());
    }
}
