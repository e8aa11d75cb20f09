//! State evolution with component discounting, linear-Bayes updating,
//! and the conditionally normal DLM step with volatility discounting.

use alloc::vec::Vec;

use crate::dglm::moments::{PredictorMoments, StateMoments, VolatilityState};
use crate::dglm::spec::{Block, ModelSpec};
use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};

/// The discount-implied evolution noise: for each block `j`,
/// `W_j = P_j (1 - delta_j) / delta_j` on the diagonal, zero elsewhere.
/// `p` is the post-rotation covariance `G C G'`. A `RandomEffect` block
/// contributes nothing here (its variance enters at the predictor level).
pub fn discount_innovation(spec: &ModelSpec, p: &Matrix) -> Result<Matrix> {
    let mut w = Matrix::zeros(p.dim());
    let offsets = spec.block_offsets();
    for (bi, block) in spec.blocks.iter().enumerate() {
        let delta = spec.discounts[bi];
        if !(delta > 0.0 && delta <= 1.0) {
            return Err(Error::config(alloc::format!("discount factor {delta} outside (0, 1]")));
        }
        if matches!(block, Block::RandomEffect) {
            continue;
        }
        let inflate = (1.0 - delta) / delta;
        if inflate == 0.0 {
            continue;
        }
        let (o, d) = (offsets[bi], block.dim());
        for i in o..o + d {
            for j in o..o + d {
                w[(i, j)] = p[(i, j)] * inflate;
            }
        }
    }
    Ok(w)
}

/// Evolves posterior moments one step: `a = G m`, `R = G C G' + W` with
/// the block-discount `W`. Equivalently, each diagonal block of `R` is
/// `P_j / delta_j` while off-diagonal blocks are copied from `P`
/// unchanged.
pub fn evolve(post: &StateMoments, spec: &ModelSpec, g: &Matrix) -> Result<StateMoments> {
    let a = g.matvec(&post.mean);
    let mut r = post.cov.sandwich(g);
    let w = discount_innovation(spec, &r)?;
    r.add_assign(&w);
    StateMoments::new(a, r)
}

/// Prior moments of the linear predictor: `f = F'a`, `q = F'RF`.
pub fn predictor_moments(prior: &StateMoments, f_vec: &[f64]) -> Result<PredictorMoments> {
    if f_vec.len() != prior.dim() {
        return Err(Error::input(alloc::format!(
            "design vector length {} vs state dimension {}",
            f_vec.len(),
            prior.dim()
        )));
    }
    let f = dot(f_vec, &prior.mean);
    let q = prior.cov.quad_form(f_vec);
    if !(q > 0.0) {
        return Err(Error::numerical(alloc::format!(
            "degenerate predictor variance q = {q}"
        )));
    }
    Ok(PredictorMoments { f, q })
}

/// Linear-Bayes posterior for the state given prior and posterior
/// predictor moments:
/// `m = a + RF (g - f)/q`, `C = R - RF F'R (1 - p/q)/q`.
pub fn linear_bayes_update(
    prior: &StateMoments,
    f_vec: &[f64],
    pm_prior: PredictorMoments,
    pm_post: PredictorMoments,
) -> Result<StateMoments> {
    let q = pm_prior.q;
    if !(q > 0.0) {
        return Err(Error::numerical("linear_bayes_update requires q > 0"));
    }
    let d = prior.dim();
    let rf = prior.cov.matvec(f_vec);
    let gain = (pm_post.f - pm_prior.f) / q;
    let shrink = (1.0 - pm_post.q / q) / q;
    let mut mean = Vec::with_capacity(d);
    for i in 0..d {
        mean.push(prior.mean[i] + rf[i] * gain);
    }
    let mut cov = prior.cov.clone();
    for i in 0..d {
        for j in 0..d {
            cov[(i, j)] -= rf[i] * rf[j] * shrink;
        }
    }
    StateMoments::new(mean, cov)
}

/// One-step Student-t forecast from the normal DLM.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StudentTForecast {
    pub df: f64,
    pub loc: f64,
    pub scale: f64,
}

/// One full step of the conditionally normal DLM with Beta-Gamma
/// volatility discounting: evolve, forecast `y ~ t(beta n, F'a, F'RF + s)`,
/// Kalman update, and the variance-discount recursion
/// `n <- beta n + 1`, `s <- s (beta n + e^2/q) / (beta n + 1)`.
#[allow(clippy::too_many_arguments)]
pub fn dlm_step(
    state: &StateMoments,
    vol: &VolatilityState,
    f_vec: &[f64],
    g: &Matrix,
    spec: &ModelSpec,
    vol_discount: f64,
    y: f64,
) -> Result<(StateMoments, VolatilityState, StudentTForecast)> {
    if !(vol_discount > 0.0 && vol_discount <= 1.0) {
        return Err(Error::config(alloc::format!(
            "volatility discount {vol_discount} outside (0, 1]"
        )));
    }
    if !y.is_finite() {
        return Err(Error::input("non-finite observation"));
    }
    let prior = evolve(state, spec, g)?;
    let f = dot(f_vec, &prior.mean);
    let q = prior.cov.quad_form(f_vec) + vol.s;
    if !(q > 0.0) {
        return Err(Error::numerical(alloc::format!("degenerate forecast variance q = {q}")));
    }
    let dn = vol_discount * vol.n;
    let forecast = StudentTForecast { df: dn, loc: f, scale: q };

    let e = y - f;
    let rf = prior.cov.matvec(f_vec);
    let n_new = dn + 1.0;
    let s_new = vol.s * (dn + e * e / q) / n_new;
    let d = prior.dim();
    let mut mean = Vec::with_capacity(d);
    for i in 0..d {
        mean.push(prior.mean[i] + rf[i] * e / q);
    }
    let rescale = s_new / vol.s;
    let mut cov = prior.cov.clone();
    for i in 0..d {
        for j in 0..d {
            cov[(i, j)] = (cov[(i, j)] - rf[i] * rf[j] / q) * rescale;
        }
    }
    Ok((
        StateMoments::new(mean, cov)?,
        VolatilityState::new(n_new, s_new)?,
        forecast,
    ))
}
