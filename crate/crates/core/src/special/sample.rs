//! Seeded sampling from the distributions used in forward simulation.

use rand::Rng;
use rand_distr::Distribution;

use crate::error::{Error, Result};
use crate::special::RngStream;

/// Distributions drawn from during path simulation and synthetic data
/// generation. The negative binomial is parameterized so that
/// `pmf(x) = C(x + r - 1, x) p^r (1 - p)^x` for x = 0, 1, 2, ...
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Dist {
    Bernoulli { p: f64 },
    Beta { a: f64, b: f64 },
    /// Shape-rate parameterization.
    Gamma { shape: f64, rate: f64 },
    Poisson { mu: f64 },
    NegativeBinomial { r: f64, p: f64 },
    Normal { mean: f64, var: f64 },
    StudentT { df: f64, loc: f64, scale: f64 },
}

impl Dist {
    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Dist::Bernoulli { p } => (0.0..=1.0).contains(&p),
            Dist::Beta { a, b } => a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite(),
            Dist::Gamma { shape, rate } => shape > 0.0 && rate > 0.0,
            Dist::Poisson { mu } => mu >= 0.0 && mu.is_finite(),
            Dist::NegativeBinomial { r, p } => r > 0.0 && p > 0.0 && p <= 1.0,
            Dist::Normal { var, .. } => var >= 0.0 && var.is_finite(),
            Dist::StudentT { df, scale, .. } => df > 0.0 && scale >= 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::domain(alloc::format!("invalid distribution parameters: {self:?}")))
        }
    }

    /// Draws one value. Counts come back as non-negative integers stored
    /// in an f64.
    pub fn sample(&self, rng: &mut RngStream) -> Result<f64> {
        self.validate()?;
        let r = rng.inner();
        let v = match *self {
            Dist::Bernoulli { p } => {
                if r.random::<f64>() < p {
                    1.0
                } else {
                    0.0
                }
            }
            Dist::Beta { a, b } => rand_distr::Beta::new(a, b)
                .map_err(|e| Error::domain(alloc::format!("beta: {e}")))?
                .sample(r),
            Dist::Gamma { shape, rate } => rand_distr::Gamma::new(shape, 1.0 / rate)
                .map_err(|e| Error::domain(alloc::format!("gamma: {e}")))?
                .sample(r),
            Dist::Poisson { mu } => {
                if mu == 0.0 {
                    0.0
                } else {
                    rand_distr::Poisson::new(mu)
                        .map_err(|e| Error::domain(alloc::format!("poisson: {e}")))?
                        .sample(r)
                }
            }
            Dist::NegativeBinomial { r: shape, p } => {
                // Gamma-Poisson mixture: lambda ~ Ga(r, scale (1-p)/p), x ~ Po(lambda)
                if p == 1.0 {
                    0.0
                } else {
                    let lambda = rand_distr::Gamma::new(shape, (1.0 - p) / p)
                        .map_err(|e| Error::domain(alloc::format!("negative binomial: {e}")))?
                        .sample(r);
                    if lambda == 0.0 {
                        0.0
                    } else {
                        rand_distr::Poisson::new(lambda)
                            .map_err(|e| Error::domain(alloc::format!("negative binomial: {e}")))?
                            .sample(r)
                    }
                }
            }
            Dist::Normal { mean, var } => rand_distr::Normal::new(mean, libm::sqrt(var))
                .map_err(|e| Error::domain(alloc::format!("normal: {e}")))?
                .sample(r),
            Dist::StudentT { df, loc, scale } => {
                let t = rand_distr::StudentT::new(df)
                    .map_err(|e| Error::domain(alloc::format!("student-t: {e}")))?
                    .sample(r);
                loc + libm::sqrt(scale) * t
            }
        };
        Ok(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bernoulli_degenerate() {
        let mut rng = RngStream::new(0, 0);
        for _ in 0..50 {
            assert_eq!(Dist::Bernoulli { p: 1.0 }.sample(&mut rng).unwrap(), 1.0);
            assert_eq!(Dist::Bernoulli { p: 0.0 }.sample(&mut rng).unwrap(), 0.0);
        }
    }

    #[test]
    fn invalid_parameters_rejected() {
        let mut rng = RngStream::new(0, 0);
        assert!(Dist::Beta { a: -1.0, b: 1.0 }.sample(&mut rng).is_err());
        assert!(Dist::Gamma { shape: 0.0, rate: 1.0 }.sample(&mut rng).is_err());
        assert!(Dist::Bernoulli { p: 1.5 }.sample(&mut rng).is_err());
        assert!(Dist::Poisson { mu: -1.0 }.sample(&mut rng).is_err());
    }

    #[test]
    fn poisson_mean_concentrates() {
        let mut rng = RngStream::new(9, 1);
        let n = 200_000;
        let mut sum = 0.0;
        for _ in 0..n {
            sum += Dist::Poisson { mu: 3.0 }.sample(&mut rng).unwrap();
        }
        let mean = sum / n as f64;
        assert!((mean - 3.0).abs() < 0.02, "mean {mean}");
    }
}
