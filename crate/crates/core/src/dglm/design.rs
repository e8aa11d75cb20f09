use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::dglm::moments::StateMoments;
use crate::dglm::spec::{Block, ModelSpec};
use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Named covariate values for one time point.
pub type Covariates = BTreeMap<String, f64>;

/// Builds the design vector `F` and evolution matrix `G` for one time
/// step. `F` carries 1 for level entries, covariate values for regression
/// entries, the `(1, 0)` pattern per Fourier harmonic pair and 1 for a
/// random-effect entry. `G` is block-diagonal: identities for level and
/// regression, `[[1, 1], [0, 1]]` for a local linear trend, one 2x2
/// rotation per harmonic, and 0 for the random-effect entry.
pub fn build_design(spec: &ModelSpec, covariates: &Covariates) -> Result<(Vec<f64>, Matrix)> {
    let d = spec.dim();
    let mut f = vec![0.0; d];
    let mut g = Matrix::zeros(d);
    let mut o = 0;
    for block in &spec.blocks {
        match block {
            Block::Level => {
                f[o] = 1.0;
                g[(o, o)] = 1.0;
                o += 1;
            }
            Block::LocalLinearTrend => {
                f[o] = 1.0;
                g[(o, o)] = 1.0;
                g[(o, o + 1)] = 1.0;
                g[(o + 1, o + 1)] = 1.0;
                o += 2;
            }
            Block::Regression { predictors } => {
                for name in predictors {
                    let v = covariates.get(name).ok_or_else(|| {
                        Error::input(alloc::format!("missing covariate '{name}'"))
                    })?;
                    f[o] = *v;
                    g[(o, o)] = 1.0;
                    o += 1;
                }
            }
            Block::FourierSeasonal { period, harmonics } => {
                let p = *period as f64;
                for j in 1..=*harmonics {
                    let omega = core::f64::consts::TAU * j as f64 / p;
                    if *period % 2 == 0 && j == period / 2 {
                        // Nyquist harmonic: single alternating-sign element
                        f[o] = 1.0;
                        g[(o, o)] = libm::cos(omega);
                        o += 1;
                    } else {
                        let (c, s) = (libm::cos(omega), libm::sin(omega));
                        f[o] = 1.0;
                        g[(o, o)] = c;
                        g[(o, o + 1)] = s;
                        g[(o + 1, o)] = -s;
                        g[(o + 1, o + 1)] = c;
                        o += 2;
                    }
                }
            }
            Block::RandomEffect => {
                f[o] = 1.0;
                // no persistence: zero row and column keep the effect
                // uncorrelated with everything at evolution
                o += 1;
            }
        }
    }
    debug_assert_eq!(o, d);
    Ok((f, g))
}

/// Mean and variance of the seasonal factor `day_offset` steps ahead of
/// the current state, extracted from the first Fourier block.
pub fn seasonal_factor(
    state: &StateMoments,
    spec: &ModelSpec,
    day_offset: u32,
) -> Result<(f64, f64)> {
    let idx = spec
        .blocks
        .iter()
        .position(|b| matches!(b, Block::FourierSeasonal { .. }))
        .ok_or_else(|| Error::config("model has no Fourier seasonal block"))?;
    seasonal_factor_at(state, spec, idx, day_offset)
}

/// As [`seasonal_factor`], for the Fourier block at `block_index` (models
/// may carry more than one seasonal block, e.g. weekly plus yearly).
pub fn seasonal_factor_at(
    state: &StateMoments,
    spec: &ModelSpec,
    block_index: usize,
    day_offset: u32,
) -> Result<(f64, f64)> {
    let l = seasonal_functional(spec, block_index, day_offset)?;
    Ok((crate::linalg::dot(&l, &state.mean), state.cov.quad_form(&l)))
}

/// The linear functional `L` with `L'theta` equal to the seasonal effect
/// `day_offset` steps ahead: each harmonic pair contributes
/// `(cos(n w_j), sin(n w_j))`, the first row of its rotation raised to
/// the `n`-th power.
pub fn seasonal_functional(
    spec: &ModelSpec,
    block_index: usize,
    day_offset: u32,
) -> Result<Vec<f64>> {
    let offsets = spec.block_offsets();
    let block = spec
        .blocks
        .get(block_index)
        .ok_or_else(|| Error::config(alloc::format!("no block at index {block_index}")))?;
    let (period, harmonics) = match block {
        Block::FourierSeasonal { period, harmonics } => (*period, *harmonics),
        _ => {
            return Err(Error::config(alloc::format!(
                "block at index {block_index} is not a Fourier seasonal block"
            )))
        }
    };
    let mut l = vec![0.0; spec.dim()];
    let mut o = offsets[block_index];
    let n = day_offset as f64;
    for j in 1..=harmonics {
        let omega = core::f64::consts::TAU * j as f64 / period as f64;
        if period % 2 == 0 && j == period / 2 {
            l[o] = libm::cos(n * omega);
            o += 1;
        } else {
            l[o] = libm::cos(n * omega);
            l[o + 1] = libm::sin(n * omega);
            o += 2;
        }
    }
    Ok(l)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dglm::spec::Link;

    fn period7_spec() -> ModelSpec {
        ModelSpec::new(
            vec![Block::FourierSeasonal { period: 7, harmonics: 3 }],
            vec![1.0],
            Link::LogPoisson,
        )
        .unwrap()
    }

    #[test]
    fn harmonic_rotation_matches_trig() {
        let (f, g) = build_design(&period7_spec(), &Covariates::new()).unwrap();
        assert_eq!(f, vec![1.0, 0.0, 1.0, 0.0, 1.0, 0.0]);
        assert!((g[(0, 0)] - 0.6234898).abs() < 1e-7);
        assert!((g[(0, 1)] - 0.7818315).abs() < 1e-7);
        assert!((g[(1, 0)] + 0.7818315).abs() < 1e-7);
        assert!((g[(1, 1)] - 0.6234898).abs() < 1e-7);
    }

    #[test]
    fn full_cycle_rotation_is_identity() {
        // rotating 7 times with period-7 harmonics returns to the start
        let (_, g) = build_design(&period7_spec(), &Covariates::new()).unwrap();
        let mut acc = Matrix::identity(6);
        for _ in 0..7 {
            acc = g.matmul(&acc);
        }
        for i in 0..6 {
            for j in 0..6 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((acc[(i, j)] - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn level_plus_regression() {
        let spec = ModelSpec::new(
            vec![
                Block::Level,
                Block::Regression { predictors: vec!["log-price".into()] },
            ],
            vec![1.0, 1.0],
            Link::LogPoisson,
        )
        .unwrap();
        let mut cov = Covariates::new();
        cov.insert("log-price".into(), 0.3);
        let (f, g) = build_design(&spec, &cov).unwrap();
        assert_eq!(f, vec![1.0, 0.3]);
        assert_eq!(g, Matrix::identity(2));
    }

    #[test]
    fn missing_covariate_is_input_error() {
        let spec = ModelSpec::new(
            vec![Block::Regression { predictors: vec!["price".into()] }],
            vec![1.0],
            Link::LogPoisson,
        )
        .unwrap();
        assert!(build_design(&spec, &Covariates::new()).is_err());
    }

    #[test]
    fn seasonal_factors_sum_to_zero() {
        // constant-free Fourier representation: the 7 factors sum to 0
        let spec = period7_spec();
        let mean = vec![0.7, -0.2, 0.1, 0.4, -0.3, 0.05];
        let state = StateMoments::new(mean, Matrix::identity(6)).unwrap();
        let total: f64 = (0..7)
            .map(|d| seasonal_factor(&state, &spec, d).unwrap().0)
            .sum();
        assert!(total.abs() < 1e-12, "sum {total}");
    }
}
