use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Mean vector and covariance of a state vector (prior or posterior).
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StateMoments {
    pub mean: Vec<f64>,
    pub cov: Matrix,
}

impl StateMoments {
    pub fn new(mean: Vec<f64>, cov: Matrix) -> Result<Self> {
        if mean.len() != cov.dim() {
            return Err(Error::input(alloc::format!(
                "mean length {} does not match covariance dimension {}",
                mean.len(),
                cov.dim()
            )));
        }
        let mut sm = StateMoments { mean, cov };
        sm.ensure_psd()?;
        Ok(sm)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Re-symmetrizes and verifies positive semi-definiteness within
    /// tolerance. Small violations (eigenvalues above `-1e-8 * trace`)
    /// are repaired by clipping the offending eigenvalues at zero;
    /// anything worse is a numerical error.
    pub fn ensure_psd(&mut self) -> Result<()> {
        self.cov.symmetrize();
        let n = self.cov.dim();
        let trace = self.cov.trace();
        if trace < 0.0 {
            return Err(Error::numerical("covariance with negative trace"));
        }
        let scale = trace.max(1e-300);
        for i in 0..n {
            if self.cov[(i, i)] < -1e-8 * scale {
                return Err(Error::numerical("covariance with negative diagonal"));
            }
        }
        // fast path: a Cholesky that tolerates semi-definite pivots
        if self.cov.cholesky(1e-10 * scale).is_ok() {
            return Ok(());
        }
        let (vals, vecs) = self.cov.sym_eigen();
        let min = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        if min < -1e-8 * scale {
            return Err(Error::numerical(alloc::format!(
                "covariance indefinite: min eigenvalue {min:e} vs trace {trace:e}"
            )));
        }
        let mut repaired = Matrix::zeros(n);
        for k in 0..n {
            let lam = vals[k].max(0.0);
            if lam == 0.0 {
                continue;
            }
            for i in 0..n {
                for j in 0..n {
                    repaired[(i, j)] += lam * vecs[(i, k)] * vecs[(j, k)];
                }
            }
        }
        repaired.symmetrize();
        self.cov = repaired;
        Ok(())
    }
}

/// Mean and variance of the linear predictor: prior `(f, q)` or
/// posterior `(g, p)`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PredictorMoments {
    pub f: f64,
    pub q: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Family {
    Beta,
    Gamma,
}

/// Conjugate prior hyper-parameters matched to predictor moments.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConjugateParams {
    pub alpha: f64,
    pub beta: f64,
    pub family: Family,
}

impl ConjugateParams {
    pub fn new(alpha: f64, beta: f64, family: Family) -> Result<Self> {
        if !(alpha > 0.0 && beta > 0.0 && alpha.is_finite() && beta.is_finite()) {
            return Err(Error::domain(alloc::format!(
                "conjugate parameters must be positive and finite, got ({alpha}, {beta})"
            )));
        }
        Ok(ConjugateParams { alpha, beta, family })
    }
}

/// Degrees of freedom and point estimate of the observational variance
/// in the volatility-discount normal DLM.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct VolatilityState {
    pub n: f64,
    pub s: f64,
}

impl VolatilityState {
    pub fn new(n: f64, s: f64) -> Result<Self> {
        if !(n > 0.0 && s > 0.0) {
            return Err(Error::domain(alloc::format!(
                "volatility state requires n > 0 and s > 0, got ({n}, {s})"
            )));
        }
        Ok(VolatilityState { n, s })
    }
}
