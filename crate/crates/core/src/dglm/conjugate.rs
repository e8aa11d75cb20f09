//! Variational-Bayes conjugate matching and the implied one-step
//! predictive distributions.
//!
//! Beta case: solve `psi(a) - psi(b) = f`, `psi'(a) + psi'(b) = q`.
//! Gamma case: solve `psi'(a) = q`, then `b = exp(psi(a) - f)`.

use alloc::vec::Vec;

use crate::dglm::moments::{ConjugateParams, Family, PredictorMoments};
use crate::error::{Error, Result};
use crate::special::{digamma, inv_trigamma, tetragamma, trigamma};

const NEWTON_MAX_ITERS: usize = 100;
const RESIDUAL_TOL: f64 = 1e-10;
const PARAM_CLIP: (f64, f64) = (1e-8, 1e12);

fn clip(x: f64) -> f64 {
    x.clamp(PARAM_CLIP.0, PARAM_CLIP.1)
}

/// Matches a Beta prior to logit-predictor moments by damped 2-D Newton
/// in log-parameters, falling back to a monotone 1-D bisection if the
/// Newton iteration fails to converge.
pub fn match_beta(pm: PredictorMoments) -> Result<ConjugateParams> {
    let (f, q) = (pm.f, pm.q);
    if !(q > 0.0) || !f.is_finite() {
        return Err(Error::domain(alloc::format!("match_beta requires q > 0, got (f={f}, q={q})")));
    }
    // logistic-moment asymptotics give a convergent start in both tails
    let ef = libm::exp(f.clamp(-700.0, 700.0));
    let mut a = clip((1.0 + ef) / q);
    let mut b = clip((1.0 + 1.0 / ef) / q);
    let mut r1 = digamma(a)? - digamma(b)? - f;
    let mut r2 = trigamma(a)? + trigamma(b)? - q;
    for _ in 0..NEWTON_MAX_ITERS {
        if libm::fabs(r1) <= RESIDUAL_TOL && libm::fabs(r2) <= RESIDUAL_TOL {
            return ConjugateParams::new(a, b, Family::Beta);
        }
        // Jacobian in (ln a, ln b)
        let j11 = a * trigamma(a)?;
        let j12 = -b * trigamma(b)?;
        let j21 = a * tetragamma(a)?;
        let j22 = b * tetragamma(b)?;
        let det = j11 * j22 - j12 * j21;
        if det == 0.0 || !det.is_finite() {
            break;
        }
        let da = -(j22 * r1 - j12 * r2) / det;
        let db = -(-j21 * r1 + j11 * r2) / det;
        // damped step: back off until the residual norm decreases
        let norm0 = r1 * r1 + r2 * r2;
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let na = clip(a * libm::exp(step * da));
            let nb = clip(b * libm::exp(step * db));
            let n1 = digamma(na)? - digamma(nb)? - f;
            let n2 = trigamma(na)? + trigamma(nb)? - q;
            if n1 * n1 + n2 * n2 < norm0 {
                a = na;
                b = nb;
                r1 = n1;
                r2 = n2;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if libm::fabs(r1) <= RESIDUAL_TOL && libm::fabs(r2) <= RESIDUAL_TOL {
        return ConjugateParams::new(a, b, Family::Beta);
    }
    match_beta_bisect(f, q)
}

/// Bisection fallback. For fixed `a`, `b(a)` solves the variance
/// equation exactly, and `psi(a) - psi(b(a)) - f` is strictly increasing
/// in `a`, so the root brackets cleanly.
fn match_beta_bisect(f: f64, q: f64) -> Result<ConjugateParams> {
    let a_floor = inv_trigamma(q)?; // below this, psi'(a) alone exceeds q
    let resid = |a: f64| -> Result<f64> {
        let rem = q - trigamma(a)?;
        let b = inv_trigamma(rem)?;
        Ok(digamma(a)? - digamma(b)? - f)
    };
    let mut lo = a_floor * (1.0 + 1e-9);
    if resid(lo)? > 0.0 {
        // root pinched against the floor; accept the boundary solve
        let b = inv_trigamma(q - trigamma(lo)?)?;
        return ConjugateParams::new(lo, b, Family::Beta);
    }
    let mut hi = lo;
    let mut bracketed = false;
    for _ in 0..200 {
        hi = a_floor + (hi - a_floor) * 2.0 + 1.0;
        if resid(hi)? > 0.0 {
            bracketed = true;
            break;
        }
        lo = hi;
    }
    if !bracketed {
        return Err(Error::numerical(alloc::format!(
            "match_beta failed to bracket for f={f}, q={q}, last a={hi}"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let r = resid(mid)?;
        if libm::fabs(r) <= RESIDUAL_TOL || (hi - lo) < 1e-14 * mid {
            let b = inv_trigamma(q - trigamma(mid)?)?;
            return ConjugateParams::new(mid, b, Family::Beta);
        }
        if r > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Err(Error::numerical(alloc::format!("match_beta bisection failed for f={f}, q={q}")))
}

/// Matches a Gamma prior to log-predictor moments.
pub fn match_gamma(pm: PredictorMoments) -> Result<ConjugateParams> {
    let (f, q) = (pm.f, pm.q);
    if !(q > 0.0) || !f.is_finite() {
        return Err(Error::domain(alloc::format!(
            "match_gamma requires q > 0, got (f={f}, q={q})"
        )));
    }
    let alpha = clip(inv_trigamma(q)?);
    let beta = libm::exp((digamma(alpha)? - f).clamp(-700.0, 700.0));
    ConjugateParams::new(alpha, clip(beta), Family::Gamma)
}

/// Posterior predictor moments `(g, p)` after observing `y`.
pub fn posterior_predictor_moments(cp: &ConjugateParams, y: f64) -> Result<PredictorMoments> {
    match cp.family {
        Family::Beta => {
            if y != 0.0 && y != 1.0 {
                return Err(Error::input(alloc::format!("binary observation must be 0 or 1, got {y}")));
            }
            let (a, b) = (cp.alpha + y, cp.beta + 1.0 - y);
            Ok(PredictorMoments { f: digamma(a)? - digamma(b)?, q: trigamma(a)? + trigamma(b)? })
        }
        Family::Gamma => {
            if !(y >= 0.0 && y.is_finite() && libm::floor(y) == y) {
                return Err(Error::input(alloc::format!(
                    "count observation must be a non-negative integer, got {y}"
                )));
            }
            let a = cp.alpha + y;
            Ok(PredictorMoments {
                f: digamma(a)? - libm::log(cp.beta + 1.0),
                q: trigamma(a)?,
            })
        }
    }
}

/// One-step Beta-Bernoulli predictive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaBernoulli {
    pub p_one: f64,
}

/// Beta-Bernoulli predictive implied by a Beta prior.
pub fn forecast_bernoulli(cp: &ConjugateParams) -> Result<BetaBernoulli> {
    if cp.family != Family::Beta {
        return Err(Error::config("forecast_bernoulli needs a Beta-family prior"));
    }
    Ok(BetaBernoulli { p_one: cp.alpha / (cp.alpha + cp.beta) })
}

impl BetaBernoulli {
    pub fn pmf(&self, z: u32) -> f64 {
        match z {
            0 => 1.0 - self.p_one,
            1 => self.p_one,
            _ => 0.0,
        }
    }
}

/// Negative binomial with size `r` and success probability `p`:
/// `pmf(x) = C(x + r - 1, x) p^r (1 - p)^x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NegBinomial {
    pub r: f64,
    pub p: f64,
}

/// Negative binomial predictive implied by a Gamma prior: size `alpha`,
/// success probability `beta / (1 + beta)`.
pub fn forecast_poisson(cp: &ConjugateParams) -> Result<NegBinomial> {
    if cp.family != Family::Gamma {
        return Err(Error::config("forecast_poisson needs a Gamma-family prior"));
    }
    Ok(NegBinomial { r: cp.alpha, p: cp.beta / (1.0 + cp.beta) })
}

impl NegBinomial {
    pub fn mean(&self) -> f64 {
        self.r * (1.0 - self.p) / self.p
    }

    pub fn variance(&self) -> f64 {
        self.r * (1.0 - self.p) / (self.p * self.p)
    }

    pub fn ln_pmf(&self, x: u32) -> f64 {
        let x = x as f64;
        libm::lgamma(x + self.r) - libm::lgamma(self.r) - libm::lgamma(x + 1.0)
            + self.r * libm::log(self.p)
            + x * libm::log1p(-self.p)
    }

    pub fn pmf(&self, x: u32) -> f64 {
        libm::exp(self.ln_pmf(x))
    }

    /// Probability masses `0..=upper` via the stable ratio recurrence.
    pub fn pmf_vec(&self, upper: u32) -> Vec<f64> {
        let mut out = Vec::with_capacity(upper as usize + 1);
        let mut v = libm::exp(self.r * libm::log(self.p));
        if v == 0.0 {
            // pmf(0) underflowed; fall back to log-space evaluation
            return (0..=upper).map(|x| self.pmf(x)).collect();
        }
        out.push(v);
        let q1 = 1.0 - self.p;
        for x in 0..upper {
            v *= q1 * (x as f64 + self.r) / (x as f64 + 1.0);
            out.push(v);
        }
        out
    }

    pub fn cdf(&self, x: u32) -> f64 {
        self.pmf_vec(x).iter().sum::<f64>().min(1.0)
    }

    /// Smallest `x` whose cdf reaches `level`; used for adaptive
    /// truncation of the support.
    pub fn quantile(&self, level: f64) -> u32 {
        let mut acc = 0.0;
        let mut v = libm::exp(self.r * libm::log(self.p));
        let q1 = 1.0 - self.p;
        let hard_cap = (self.mean() + 20.0 * libm::sqrt(self.variance()) + 50.0) as u32;
        let mut x = 0u32;
        loop {
            if v == 0.0 && acc == 0.0 {
                v = self.pmf(x);
            }
            acc += v;
            if acc >= level || x >= hard_cap.max(2) {
                return x;
            }
            v *= q1 * (x as f64 + self.r) / (x as f64 + 1.0);
            x += 1;
        }
    }
}
