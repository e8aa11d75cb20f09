//! Multi-scale decouple/recouple: a normal DLM on the log aggregate
//! supplies Monte Carlo draws of a shared latent factor (typically a
//! seasonal effect); each series conditions on every draw in parallel,
//! and the per-draw posteriors recouple by likelihood-weighted mixture
//! collapse once the observation arrives.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::dcmm::{Dcmm, MixtureForecast, PathSamples};
use crate::dglm::{
    build_design, discount_innovation, dlm_step, seasonal_functional, Block, Covariates, Link,
    ModelSpec, StateMoments, StudentTForecast, VolatilityState,
};
use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};
use crate::special::{Dist, RngStream};

/// Normal DLM for the log aggregate with Beta-Gamma stochastic
/// volatility: the source of shared-factor draws.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AggregateModel {
    pub spec: ModelSpec,
    pub state: StateMoments,
    pub vol: VolatilityState,
    pub vol_discount: f64,
    /// Number of observations absorbed so far.
    pub t: usize,
}

impl AggregateModel {
    pub fn new(
        spec: ModelSpec,
        state: StateMoments,
        vol: VolatilityState,
        vol_discount: f64,
    ) -> Result<Self> {
        if spec.link != Link::IdentityNormal {
            return Err(Error::config("aggregate model must use the identity-normal link"));
        }
        if spec.dim() != state.dim() {
            return Err(Error::config(alloc::format!(
                "spec dimension {} does not match state dimension {}",
                spec.dim(),
                state.dim()
            )));
        }
        if !(vol_discount > 0.0 && vol_discount <= 1.0) {
            return Err(Error::config(alloc::format!(
                "volatility discount {vol_discount} outside (0, 1]"
            )));
        }
        Ok(AggregateModel { spec, state, vol, vol_discount, t: 0 })
    }

    /// Absorbs one log-aggregate observation and returns the one-step
    /// Student-t forecast that was in force before it.
    pub fn observe(&mut self, y: f64) -> Result<StudentTForecast> {
        let (f_vec, g) = build_design(&self.spec, &Covariates::new())?;
        let (state, vol, fc) =
            dlm_step(&self.state, &self.vol, &f_vec, &g, &self.spec, self.vol_discount, y)?;
        self.state = state;
        self.vol = vol;
        self.t += 1;
        Ok(fc)
    }

    /// Runs the filter over a whole series of log aggregates.
    pub fn fit(&mut self, ys: &[f64]) -> Result<Vec<StudentTForecast>> {
        let mut out = Vec::with_capacity(ys.len());
        for &y in ys {
            out.push(self.observe(y)?);
        }
        Ok(out)
    }

    /// Samples joint paths of the seasonal factor over lead times
    /// `1..=horizons`. Each path draws the state from its posterior
    /// (multivariate-t via a shared chi-square volatility draw), then
    /// propagates it forward with fresh discount-implied innovations.
    pub fn sample_factor_paths(
        &self,
        factor: &str,
        horizons: usize,
        n_paths: usize,
        rng: &mut RngStream,
    ) -> Result<FactorDraws> {
        if horizons == 0 || n_paths == 0 {
            return Err(Error::input("sample_factor_paths needs horizons > 0 and paths > 0"));
        }
        let block_index = self
            .spec
            .blocks
            .iter()
            .position(|b| matches!(b, Block::FourierSeasonal { .. }))
            .ok_or_else(|| Error::config("aggregate model has no Fourier seasonal block"))?;
        let d = self.spec.dim();
        let (_, g) = build_design(&self.spec, &Covariates::new())?;
        let l0 = seasonal_functional(&self.spec, block_index, 0)?;
        let scale = self.state.cov.trace().max(1e-300);
        let c_chol = self.state.cov.cholesky(1e-10 * scale)?;

        // deterministic forward covariances give the per-step innovation
        // covariance W_j and its Cholesky factor
        let mut w_chols = Vec::with_capacity(horizons);
        let mut c = self.state.cov.clone();
        for _ in 0..horizons {
            let p = c.sandwich(&g);
            let w = discount_innovation(&self.spec, &p)?;
            let wscale = w.trace().max(1e-300);
            w_chols.push(w.cholesky(1e-10 * wscale)?);
            let mut r = p;
            r.add_assign(&w);
            r.symmetrize();
            c = r;
        }

        let mut draws = Vec::with_capacity(n_paths);
        for s in 0..n_paths {
            let mut sub = rng.substream(s as u64);
            // shared volatility draw: u ~ chi2(n)/n, state and innovations
            // both scale with 1/sqrt(u)
            let u = Dist::Gamma { shape: self.vol.n / 2.0, rate: self.vol.n / 2.0 }
                .sample(&mut sub)?
                .max(1e-12);
            let sd_scale = 1.0 / libm::sqrt(u);
            let mut theta = self.state.mean.clone();
            let z = standard_normals(d, &mut sub)?;
            let cz = c_chol.matvec(&z);
            for i in 0..d {
                theta[i] += sd_scale * cz[i];
            }
            let mut path = Vec::with_capacity(horizons);
            for w_chol in &w_chols {
                let mut next = g.matvec(&theta);
                let z = standard_normals(d, &mut sub)?;
                let wz = w_chol.matvec(&z);
                for i in 0..d {
                    next[i] += sd_scale * wz[i];
                }
                theta = next;
                path.push(dot(&l0, &theta));
            }
            draws.push(path);
        }
        Ok(FactorDraws { factor: String::from(factor), origin: self.t, draws })
    }
}

/// Monte Carlo draws of a shared factor: `draws[s][h]` is the factor
/// value on path `s` at lead time `h + 1` after `origin`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FactorDraws {
    pub factor: String,
    pub origin: usize,
    pub draws: Vec<Vec<f64>>,
}

impl FactorDraws {
    pub fn n_paths(&self) -> usize {
        self.draws.len()
    }

    pub fn horizons(&self) -> usize {
        self.draws.first().map_or(0, Vec::len)
    }

    /// Degenerate draws carrying the given fixed path; useful when a
    /// factor is known rather than sampled.
    pub fn fixed(factor: &str, origin: usize, path: Vec<f64>) -> Self {
        FactorDraws { factor: String::from(factor), origin, draws: vec![path] }
    }
}

/// Equal-weight mixture of conditional predictives, one per factor draw.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureEnsemble {
    pub components: Vec<MixtureForecast>,
}

impl MixtureEnsemble {
    pub fn pmf(&self, y: u32) -> f64 {
        let s = self.components.len() as f64;
        self.components.iter().map(|c| c.pmf(y)).sum::<f64>() / s
    }

    pub fn cdf(&self, y: u32) -> f64 {
        let s = self.components.len() as f64;
        self.components.iter().map(|c| c.cdf(y)).sum::<f64>() / s
    }

    pub fn mean(&self) -> f64 {
        let s = self.components.len() as f64;
        self.components.iter().map(MixtureForecast::mean).sum::<f64>() / s
    }

    /// Probability masses `0..=upper`, where `upper` covers every
    /// component's adaptive truncation point.
    pub fn pmf_vec(&self) -> Vec<f64> {
        let upper = self
            .components
            .iter()
            .map(|c| 1 + c.positive.quantile(1.0 - 1e-10))
            .max()
            .unwrap_or(0);
        let s = self.components.len() as f64;
        let mut out = vec![0.0; upper as usize + 1];
        for c in &self.components {
            out[0] += (1.0 - c.p_nonzero) / s;
            for (x, v) in c.positive.pmf_vec(upper - 1).into_iter().enumerate() {
                out[x + 1] += c.p_nonzero * v / s;
            }
        }
        out
    }
}

/// Per-horizon predictive mixtures for one series, conditioning each
/// factor draw's marginal forecast on its own path. `draws[s][h]` is
/// injected as covariate `factor` at horizon `h + 1`.
pub fn multiscale_forecast(
    model: &Dcmm,
    draws: &FactorDraws,
    base_covariates: &[Covariates],
) -> Result<Vec<MixtureEnsemble>> {
    let k = base_covariates.len();
    if k > draws.horizons() {
        return Err(Error::input(alloc::format!(
            "{} horizons requested but factor draws cover {}",
            k,
            draws.horizons()
        )));
    }
    let mut per_horizon: Vec<Vec<MixtureForecast>> = vec![Vec::new(); k];
    for path in &draws.draws {
        let covs: Vec<Covariates> = base_covariates
            .iter()
            .zip(path)
            .map(|(base, &phi)| {
                let mut c = base.clone();
                c.insert(draws.factor.clone(), phi);
                c
            })
            .collect();
        for (h, fc) in model.forecast_marginal(&covs)?.into_iter().enumerate() {
            per_horizon[h].push(fc);
        }
    }
    Ok(per_horizon.into_iter().map(|components| MixtureEnsemble { components }).collect())
}

/// Joint path forecast under factor uncertainty: one simulated path per
/// factor draw, each conditioning on its own factor trajectory.
pub fn multiscale_forecast_path(
    model: &Dcmm,
    draws: &FactorDraws,
    base_covariates: &[Covariates],
    rng: &mut RngStream,
) -> Result<PathSamples> {
    let k = base_covariates.len();
    if k > draws.horizons() {
        return Err(Error::input(alloc::format!(
            "{} horizons requested but factor draws cover {}",
            k,
            draws.horizons()
        )));
    }
    let mut paths = Vec::with_capacity(draws.n_paths());
    for (s, path) in draws.draws.iter().enumerate() {
        let mut sub = rng.substream(s as u64);
        let mut m = model.clone();
        let mut ys = Vec::with_capacity(k);
        for (h, (base, &phi)) in base_covariates.iter().zip(path).take(k).enumerate() {
            let mut covs = base.clone();
            covs.insert(draws.factor.clone(), phi);
            let fc = m.forecast_one(&covs)?;
            let y = fc.sample(&mut sub)?;
            if h + 1 < k {
                // the update after the final step would never be read
                m.update(y, &covs)?;
            }
            ys.push(y);
        }
        paths.push(ys);
    }
    Ok(PathSamples { horizons: k, paths, stream_id: rng.stream_id() })
}

/// Outcome of a recoupled update: the collapsed posterior, the
/// normalized per-draw weights, and whether every conditional likelihood
/// underflowed (in which case the weights fell back to uniform).
#[derive(Debug, Clone, PartialEq)]
pub struct RecoupledUpdate {
    pub model: Dcmm,
    pub weights: Vec<f64>,
    pub degenerate_weights: bool,
}

/// Updates a series model on `y` under factor uncertainty: conditional
/// update per draw (factor value `factor_values[s]` injected as a
/// covariate), weights proportional to the conditional predictive mass
/// at `y`, then moment-collapse of the posterior mixture.
pub fn recoupled_update(
    model: &Dcmm,
    y: u32,
    factor: &str,
    factor_values: &[f64],
    base_covariates: &Covariates,
) -> Result<RecoupledUpdate> {
    if factor_values.is_empty() {
        return Err(Error::input("recoupled_update needs at least one factor draw"));
    }
    let s = factor_values.len();
    let mut posteriors = Vec::with_capacity(s);
    let mut log_w = Vec::with_capacity(s);
    for &phi in factor_values {
        let mut covs = base_covariates.clone();
        covs.insert(String::from(factor), phi);
        let (post, fc) = model.step(y, &covs)?;
        log_w.push(libm::log(fc.pmf(y).max(f64::MIN_POSITIVE)));
        posteriors.push(post);
    }
    let max = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut weights: Vec<f64> = log_w.iter().map(|&lw| libm::exp(lw - max)).collect();
    let total: f64 = weights.iter().sum();
    let degenerate = !(total > 0.0) || !max.is_finite();
    if degenerate {
        weights = vec![1.0 / s as f64; s];
    } else {
        for w in &mut weights {
            *w /= total;
        }
    }

    let binary = collapse(
        posteriors.iter().map(|p| &p.binary.state),
        &weights,
    )?;
    let positive = collapse(
        posteriors.iter().map(|p| &p.positive.state),
        &weights,
    )?;
    let mut collapsed = model.clone();
    collapsed.binary.state = binary;
    collapsed.positive.state = positive;
    Ok(RecoupledUpdate { model: collapsed, weights, degenerate_weights: degenerate })
}

/// Moment-matched collapse of a mixture of Gaussians:
/// `m = sum w_s m_s`, `C = sum w_s (C_s + (m_s - m)(m_s - m)')`.
fn collapse<'a, I>(states: I, weights: &[f64]) -> Result<StateMoments>
where
    I: Iterator<Item = &'a StateMoments> + Clone,
{
    let first = states
        .clone()
        .next()
        .ok_or_else(|| Error::input("collapse of an empty mixture"))?;
    let d = first.dim();
    let mut mean = vec![0.0; d];
    for (st, &w) in states.clone().zip(weights) {
        for i in 0..d {
            mean[i] += w * st.mean[i];
        }
    }
    let mut cov = Matrix::zeros(d);
    for (st, &w) in states.zip(weights) {
        for i in 0..d {
            let di = st.mean[i] - mean[i];
            for j in 0..d {
                cov[(i, j)] += w * (st.cov[(i, j)] + di * (st.mean[j] - mean[j]));
            }
        }
    }
    StateMoments::new(mean, cov)
}

/// Sums the per-series counts at each time and returns the log
/// aggregates. A zero total has no logarithm; it is replaced by
/// `ln(total + zero_offset)` and flagged.
pub fn aggregate_series(series: &[Vec<u32>], zero_offset: f64) -> Result<(Vec<f64>, bool)> {
    let t = series
        .first()
        .map(Vec::len)
        .ok_or_else(|| Error::input("aggregate_series needs at least one series"))?;
    if series.iter().any(|s| s.len() != t) {
        return Err(Error::input("aggregate_series needs equal-length series"));
    }
    if !(zero_offset > 0.0) {
        return Err(Error::config("zero_offset must be positive"));
    }
    let mut out = Vec::with_capacity(t);
    let mut flagged = false;
    for i in 0..t {
        let total: u64 = series.iter().map(|s| s[i] as u64).sum();
        if total == 0 {
            flagged = true;
            out.push(libm::log(zero_offset));
        } else {
            out.push(libm::log(total as f64));
        }
    }
    Ok((out, flagged))
}

fn standard_normals(n: usize, rng: &mut RngStream) -> Result<Vec<f64>> {
    let mut z = Vec::with_capacity(n);
    for _ in 0..n {
        z.push(Dist::Normal { mean: 0.0, var: 1.0 }.sample(rng)?);
    }
    Ok(z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dcmm::Component;

    fn level_component(link: Link, mean: f64, var: f64, delta: f64) -> Component {
        let spec = ModelSpec::new(vec![Block::Level], vec![delta], link).unwrap();
        let mut cov = Matrix::zeros(1);
        cov[(0, 0)] = var;
        Component::new(spec, StateMoments::new(vec![mean], cov).unwrap()).unwrap()
    }

    /// DCMM whose positive component regresses on a shared factor.
    fn factor_model(coeff_mean: f64, coeff_var: f64) -> Dcmm {
        let binary = level_component(Link::LogitBernoulli, 1.0, 0.2, 0.98);
        let spec = ModelSpec::new(
            vec![Block::Level, Block::Regression { predictors: vec!["phi".into()] }],
            vec![0.95, 1.0],
            Link::LogPoisson,
        )
        .unwrap();
        let mut cov = Matrix::zeros(2);
        cov[(0, 0)] = 0.1;
        cov[(1, 1)] = coeff_var;
        let state = StateMoments::new(vec![1.0, coeff_mean], cov).unwrap();
        Dcmm::new(binary, Component::new(spec, state).unwrap()).unwrap()
    }

    fn weekly_aggregate() -> AggregateModel {
        let spec = ModelSpec::new(
            vec![Block::Level, Block::FourierSeasonal { period: 7, harmonics: 2 }],
            vec![0.99, 0.995],
            Link::IdentityNormal,
        )
        .unwrap();
        let mut cov = Matrix::identity(5);
        cov.scale(0.5);
        let state = StateMoments::new(vec![3.0, 0.0, 0.0, 0.0, 0.0], cov).unwrap();
        AggregateModel::new(spec, state, VolatilityState::new(5.0, 0.05).unwrap(), 0.97)
            .unwrap()
    }

    #[test]
    fn aggregate_fit_tracks_level() {
        let mut agg = weekly_aggregate();
        // constant log-aggregate of 4.0: the filter should converge there
        let ys = vec![4.0; 80];
        agg.fit(&ys).unwrap();
        assert!((agg.state.mean[0] - 4.0).abs() < 0.05, "level {}", agg.state.mean[0]);
        assert!(agg.vol.s < 0.05); // residuals vanish, s shrinks
        assert_eq!(agg.t, 80);
    }

    #[test]
    fn aggregate_log_transform_flags_zero_totals() {
        let series = vec![vec![2, 0, 1], vec![1, 0, 0]];
        let (logs, flagged) = aggregate_series(&series, 0.5).unwrap();
        assert!(flagged);
        assert!((logs[0] - libm::log(3.0)).abs() < 1e-15);
        assert!((logs[1] - libm::log(0.5)).abs() < 1e-15);
        assert!((logs[2] - libm::log(1.0)).abs() < 1e-15);
        let (_, flagged) = aggregate_series(&vec![vec![1, 1]], 0.5).unwrap();
        assert!(!flagged);
    }

    #[test]
    fn factor_paths_are_reproducible_and_shaped() {
        let agg = weekly_aggregate();
        let a = agg
            .sample_factor_paths("phi", 4, 16, &mut RngStream::new(1, 2))
            .unwrap();
        let b = agg
            .sample_factor_paths("phi", 4, 16, &mut RngStream::new(1, 2))
            .unwrap();
        assert_eq!(a, b);
        assert_eq!(a.n_paths(), 16);
        assert_eq!(a.horizons(), 4);
        assert_eq!(a.origin, 0);
    }

    #[test]
    fn single_draw_recoupling_is_the_conditional_step() {
        let model = factor_model(0.5, 0.05);
        let draws = [0.3];
        let out = recoupled_update(&model, 3, "phi", &draws, &Covariates::new()).unwrap();
        assert_eq!(out.weights, vec![1.0]);
        assert!(!out.degenerate_weights);
        let mut covs = Covariates::new();
        covs.insert("phi".into(), 0.3);
        let (direct, _) = model.step(3, &covs).unwrap();
        for i in 0..2 {
            let a = out.model.positive.state.mean[i];
            let b = direct.positive.state.mean[i];
            assert!((a - b).abs() < 1e-12, "mean[{i}]: {a} vs {b}");
            for j in 0..2 {
                let a = out.model.positive.state.cov[(i, j)];
                let b = direct.positive.state.cov[(i, j)];
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn recoupling_matches_hand_collapse() {
        let model = factor_model(0.8, 0.02);
        let draws = [-0.4, 0.1, 0.5, 1.2];
        let y = 4u32;
        let out = recoupled_update(&model, y, "phi", &draws, &Covariates::new()).unwrap();

        // oracle: enumerate the conditional steps and collapse by hand
        let mut posts = Vec::new();
        let mut ws = Vec::new();
        for &phi in &draws {
            let mut covs = Covariates::new();
            covs.insert("phi".into(), phi);
            let (post, fc) = model.step(y, &covs).unwrap();
            ws.push(fc.pmf(y));
            posts.push(post.positive.state);
        }
        let total: f64 = ws.iter().sum();
        for w in &mut ws {
            *w /= total;
        }
        let mut mean = [0.0; 2];
        for (p, &w) in posts.iter().zip(&ws) {
            mean[0] += w * p.mean[0];
            mean[1] += w * p.mean[1];
        }
        let mut c00 = 0.0;
        for (p, &w) in posts.iter().zip(&ws) {
            let d0 = p.mean[0] - mean[0];
            c00 += w * (p.cov[(0, 0)] + d0 * d0);
        }

        let wsum: f64 = out.weights.iter().sum();
        assert!((wsum - 1.0).abs() < 1e-12);
        for (a, b) in out.weights.iter().zip(&ws) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!((out.model.positive.state.mean[0] - mean[0]).abs() < 1e-12);
        assert!((out.model.positive.state.mean[1] - mean[1]).abs() < 1e-12);
        assert!((out.model.positive.state.cov[(0, 0)] - c00).abs() < 1e-12);

        // collapsed covariance dominates the smallest conditional one:
        // the between-draw spread only adds variance
        let min_c00 = posts.iter().map(|p| p.cov[(0, 0)]).fold(f64::INFINITY, f64::min);
        assert!(out.model.positive.state.cov[(0, 0)] >= min_c00 - 1e-12);
    }

    #[test]
    fn identical_draws_collapse_to_the_conditional() {
        let model = factor_model(0.5, 0.05);
        let draws = [0.7; 6];
        let out = recoupled_update(&model, 2, "phi", &draws, &Covariates::new()).unwrap();
        let mut covs = Covariates::new();
        covs.insert("phi".into(), 0.7);
        let (direct, _) = model.step(2, &covs).unwrap();
        for i in 0..2 {
            assert!(
                (out.model.positive.state.mean[i] - direct.positive.state.mean[i]).abs() < 1e-12
            );
        }
        for &w in &out.weights {
            assert!((w - 1.0 / 6.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_loading_makes_recoupling_a_plain_update() {
        // coefficient pinned at exactly zero: the factor cannot matter
        let model = factor_model(0.0, 0.0);
        let draws = [-2.0, 0.0, 3.0];
        let out = recoupled_update(&model, 5, "phi", &draws, &Covariates::new()).unwrap();
        let mut covs = Covariates::new();
        covs.insert("phi".into(), 0.0);
        let (direct, _) = model.step(5, &covs).unwrap();
        for i in 0..2 {
            assert!(
                (out.model.positive.state.mean[i] - direct.positive.state.mean[i]).abs() < 1e-10
            );
            for j in 0..2 {
                let a = out.model.positive.state.cov[(i, j)];
                let b = direct.positive.state.cov[(i, j)];
                assert!((a - b).abs() < 1e-10);
            }
        }
        for &w in &out.weights {
            assert!((w - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn ensemble_mass_sums_to_one() {
        let model = factor_model(0.6, 0.03);
        let draws = FactorDraws {
            factor: "phi".into(),
            origin: 0,
            draws: vec![vec![0.1, -0.2], vec![0.4, 0.3], vec![-0.5, 0.8]],
        };
        let base = vec![Covariates::new(); 2];
        let per_h = multiscale_forecast(&model, &draws, &base).unwrap();
        assert_eq!(per_h.len(), 2);
        for ens in &per_h {
            assert_eq!(ens.components.len(), 3);
            let total: f64 = ens.pmf_vec().iter().sum();
            assert!((total - 1.0).abs() < 1e-9, "total {total}");
            let numeric: f64 = ens
                .pmf_vec()
                .iter()
                .enumerate()
                .map(|(y, p)| y as f64 * p)
                .sum();
            assert!((ens.mean() - numeric).abs() < 1e-6 * ens.mean());
        }
    }

    #[test]
    fn path_forecast_under_factor_uncertainty_is_reproducible() {
        let model = factor_model(0.5, 0.05);
        let draws = FactorDraws {
            factor: "phi".into(),
            origin: 0,
            draws: vec![vec![0.1, 0.2, 0.0]; 10],
        };
        let base = vec![Covariates::new(); 3];
        let a = multiscale_forecast_path(&model, &draws, &base, &mut RngStream::new(5, 3))
            .unwrap();
        let b = multiscale_forecast_path(&model, &draws, &base, &mut RngStream::new(5, 3))
            .unwrap();
        assert_eq!(a, b);
        assert_eq!(a.paths.len(), 10);
        assert_eq!(a.horizons, 3);
    }
}
