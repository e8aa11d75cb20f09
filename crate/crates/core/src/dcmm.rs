//! The dynamic count mixture model: a logit-Bernoulli DGLM for the
//! zero/non-zero outcome coupled with a log-linear shifted-Poisson DGLM
//! for the positive part, with optional random-effects over-dispersion.
//!
//! A zero count updates only the binary component; the positive
//! component treats it as missing data and carries its discount-inflated
//! prior forward unchanged.

use alloc::vec::Vec;

use crate::dglm::{
    build_design, evolve, forecast_bernoulli, forecast_poisson, linear_bayes_update, match_beta,
    match_gamma, posterior_predictor_moments, predictor_moments, Covariates, Link, ModelSpec,
    NegBinomial, PredictorMoments, StateMoments,
};
use crate::error::{Error, Result};
use crate::special::{Dist, RngStream};

/// One DGLM component: structure plus current posterior moments.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Component {
    pub spec: ModelSpec,
    pub state: StateMoments,
}

impl Component {
    pub fn new(spec: ModelSpec, state: StateMoments) -> Result<Self> {
        if spec.dim() != state.dim() {
            return Err(Error::config(alloc::format!(
                "spec dimension {} does not match state dimension {}",
                spec.dim(),
                state.dim()
            )));
        }
        Ok(Component { spec, state })
    }

    /// Evolves one step and returns the prior moments with the design
    /// vector for this time point.
    fn evolve_step(&self, covariates: &Covariates) -> Result<(StateMoments, Vec<f64>)> {
        let (f_vec, g) = build_design(&self.spec, covariates)?;
        let prior = evolve(&self.state, &self.spec, &g)?;
        Ok((prior, f_vec))
    }
}

/// Inflates predictor variance by the random-effects discount:
/// `q -> q / rho`. `rho = 1` is the plain DGLM.
pub fn apply_random_effect(pm: PredictorMoments, rho: f64) -> Result<PredictorMoments> {
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(Error::config(alloc::format!(
            "random-effects discount {rho} outside (0, 1]"
        )));
    }
    Ok(PredictorMoments { f: pm.f, q: pm.q / rho })
}

/// One-step-ahead predictive: `y = 0` with probability `1 - p_nonzero`,
/// otherwise `y = 1 + x` with `x` negative binomial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixtureForecast {
    pub p_nonzero: f64,
    pub positive: NegBinomial,
}

impl MixtureForecast {
    pub fn pmf(&self, y: u32) -> f64 {
        if y == 0 {
            1.0 - self.p_nonzero
        } else {
            self.p_nonzero * self.positive.pmf(y - 1)
        }
    }

    pub fn cdf(&self, y: u32) -> f64 {
        if y == 0 {
            1.0 - self.p_nonzero
        } else {
            (1.0 - self.p_nonzero + self.p_nonzero * self.positive.cdf(y - 1)).min(1.0)
        }
    }

    pub fn mean(&self) -> f64 {
        self.p_nonzero * (1.0 + self.positive.mean())
    }

    pub fn variance(&self) -> f64 {
        let m1 = 1.0 + self.positive.mean();
        let second = self.positive.variance() + m1 * m1;
        self.p_nonzero * second - (self.p_nonzero * m1) * (self.p_nonzero * m1)
    }

    /// Probability masses over `0..=upper` where `upper` covers all but
    /// `1e-10` of the positive-part mass.
    pub fn pmf_vec(&self) -> Vec<f64> {
        let upper = 1 + self.positive.quantile(1.0 - 1e-10);
        let mut out = Vec::with_capacity(upper as usize + 1);
        out.push(1.0 - self.p_nonzero);
        for v in self.positive.pmf_vec(upper - 1) {
            out.push(self.p_nonzero * v);
        }
        out
    }

    /// Smallest `y` with `cdf(y) >= level`.
    pub fn quantile(&self, level: f64) -> u32 {
        if 1.0 - self.p_nonzero >= level {
            return 0;
        }
        let rescaled = ((level - (1.0 - self.p_nonzero)) / self.p_nonzero).min(1.0);
        1 + self.positive.quantile(rescaled)
    }

    pub fn sample(&self, rng: &mut RngStream) -> Result<u32> {
        let z = Dist::Bernoulli { p: self.p_nonzero }.sample(rng)?;
        if z == 0.0 {
            return Ok(0);
        }
        let x = Dist::NegativeBinomial { r: self.positive.r, p: self.positive.p }.sample(rng)?;
        Ok(1 + x as u32)
    }
}

/// Monte Carlo forecast paths: `paths[s][h]` is the count sampled on
/// path `s` at horizon `h + 1`. `stream_id` records which RNG stream
/// produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSamples {
    pub horizons: usize,
    pub paths: Vec<Vec<u32>>,
    pub stream_id: u64,
}

impl PathSamples {
    /// All draws at one horizon (0-based), across paths.
    pub fn at_horizon(&self, h: usize) -> Vec<u32> {
        self.paths.iter().map(|p| p[h]).collect()
    }
}

/// The full count mixture model and its current posterior.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Dcmm {
    pub binary: Component,
    pub positive: Component,
}

impl Dcmm {
    pub fn new(binary: Component, positive: Component) -> Result<Self> {
        if binary.spec.link != Link::LogitBernoulli {
            return Err(Error::config("binary component must use the logit-Bernoulli link"));
        }
        if positive.spec.link != Link::LogPoisson {
            return Err(Error::config("positive component must use the log-Poisson link"));
        }
        Ok(Dcmm { binary, positive })
    }

    /// The random-effects discount of the positive component.
    pub fn rho(&self) -> f64 {
        self.positive.spec.re_discount
    }

    /// One-step-ahead predictive mixture at the given covariates,
    /// without moving the state.
    pub fn forecast_one(&self, covariates: &Covariates) -> Result<MixtureForecast> {
        let (b_prior, b_f) = self.binary.evolve_step(covariates)?;
        let (p_prior, p_f) = self.positive.evolve_step(covariates)?;
        mixture_from_priors(&b_prior, &b_f, &p_prior, &p_f, self.rho())
    }

    /// Advances the model one observation: forecast, then update. The
    /// returned forecast is the predictive in force *before* seeing `y`.
    pub fn step(&self, y: u32, covariates: &Covariates) -> Result<(Dcmm, MixtureForecast)> {
        let (b_prior, b_f) = self.binary.evolve_step(covariates)?;
        let (p_prior, p_f) = self.positive.evolve_step(covariates)?;
        let forecast = mixture_from_priors(&b_prior, &b_f, &p_prior, &p_f, self.rho())?;

        // binary component always sees z = 1{y > 0}
        let z = if y > 0 { 1.0 } else { 0.0 };
        let b_pm = predictor_moments(&b_prior, &b_f)?;
        let b_cp = match_beta(b_pm)?;
        let b_post_pm = posterior_predictor_moments(&b_cp, z)?;
        let b_state = linear_bayes_update(&b_prior, &b_f, b_pm, b_post_pm)?;

        // positive component sees x = y - 1 when y > 0, else the zero is
        // missing data and the evolved prior stands as the posterior
        let p_state = if y > 0 {
            let pm = apply_random_effect(predictor_moments(&p_prior, &p_f)?, self.rho())?;
            let cp = match_gamma(pm)?;
            let post_pm = posterior_predictor_moments(&cp, (y - 1) as f64)?;
            linear_bayes_update(&p_prior, &p_f, pm, post_pm)?
        } else {
            p_prior
        };

        let next = Dcmm {
            binary: Component { spec: self.binary.spec.clone(), state: b_state },
            positive: Component { spec: self.positive.spec.clone(), state: p_state },
        };
        Ok((next, forecast))
    }

    /// In-place variant of [`Dcmm::step`].
    pub fn update(&mut self, y: u32, covariates: &Covariates) -> Result<MixtureForecast> {
        let (next, forecast) = self.step(y, covariates)?;
        *self = next;
        Ok(forecast)
    }

    /// Advances past a missing observation: both components evolve and
    /// the discount-inflated priors stand in for the posteriors.
    pub fn step_missing(&self, covariates: &Covariates) -> Result<Dcmm> {
        let (b_prior, _) = self.binary.evolve_step(covariates)?;
        let (p_prior, _) = self.positive.evolve_step(covariates)?;
        Ok(Dcmm {
            binary: Component { spec: self.binary.spec.clone(), state: b_prior },
            positive: Component { spec: self.positive.spec.clone(), state: p_prior },
        })
    }

    /// Marginal predictive mixtures at horizons `1..=k` from repeated
    /// moment evolution (no data between steps, so each step adds the
    /// discount inflation).
    pub fn forecast_marginal(&self, covariates: &[Covariates]) -> Result<Vec<MixtureForecast>> {
        let mut b_state = self.binary.state.clone();
        let mut p_state = self.positive.state.clone();
        let mut out = Vec::with_capacity(covariates.len());
        for covs in covariates {
            let (b_f, b_g) = build_design(&self.binary.spec, covs)?;
            let (p_f, p_g) = build_design(&self.positive.spec, covs)?;
            b_state = evolve(&b_state, &self.binary.spec, &b_g)?;
            p_state = evolve(&p_state, &self.positive.spec, &p_g)?;
            out.push(mixture_from_priors(&b_state, &b_f, &p_state, &p_f, self.rho())?);
        }
        Ok(out)
    }

    /// Joint predictive over horizons `1..=k` by path simulation: on
    /// each path, sample an outcome, treat it as the next observation,
    /// update the path-local copy, and continue.
    pub fn forecast_path(
        &self,
        covariates: &[Covariates],
        n_paths: usize,
        rng: &mut RngStream,
    ) -> Result<PathSamples> {
        if n_paths == 0 {
            return Err(Error::input("forecast_path needs at least one path"));
        }
        let k = covariates.len();
        // the first-step predictive does not depend on the path, and the
        // update after the final step would never be read
        let first = match covariates.first() {
            Some(covs) => Some(self.forecast_one(covs)?),
            None => None,
        };
        let mut paths = Vec::with_capacity(n_paths);
        for s in 0..n_paths {
            let mut sub = rng.substream(s as u64);
            let mut path = Vec::with_capacity(k);
            if let Some(fc) = &first {
                let mut y = fc.sample(&mut sub)?;
                path.push(y);
                if k > 1 {
                    let mut model = self.clone();
                    for h in 1..k {
                        model.update(y, &covariates[h - 1])?;
                        let fc = model.forecast_one(&covariates[h])?;
                        y = fc.sample(&mut sub)?;
                        path.push(y);
                    }
                }
            }
            paths.push(path);
        }
        Ok(PathSamples { horizons: k, paths, stream_id: rng.stream_id() })
    }

    /// Draws one series of length `covariates.len()` from the joint
    /// prior predictive, returning the counts and the updated model.
    pub fn simulate_series(
        &self,
        covariates: &[Covariates],
        rng: &mut RngStream,
    ) -> Result<(Vec<u32>, Dcmm)> {
        let mut model = self.clone();
        let mut ys = Vec::with_capacity(covariates.len());
        for covs in covariates {
            let forecast = model.forecast_one(covs)?;
            let y = forecast.sample(rng)?;
            model.update(y, covs)?;
            ys.push(y);
        }
        Ok((ys, model))
    }
}

/// Builds the predictive mixture from the two evolved priors.
fn mixture_from_priors(
    b_prior: &StateMoments,
    b_f: &[f64],
    p_prior: &StateMoments,
    p_f: &[f64],
    rho: f64,
) -> Result<MixtureForecast> {
    let b_pm = predictor_moments(b_prior, b_f)?;
    let bern = forecast_bernoulli(&match_beta(b_pm)?)?;
    let p_pm = apply_random_effect(predictor_moments(p_prior, p_f)?, rho)?;
    let nb = forecast_poisson(&match_gamma(p_pm)?)?;
    Ok(MixtureForecast { p_nonzero: bern.p_one, positive: nb })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dglm::Block;
    use crate::linalg::Matrix;
    use alloc::vec;

    fn level_component(link: Link, mean: f64, var: f64, delta: f64) -> Component {
        let spec = ModelSpec::new(vec![Block::Level], vec![delta], link).unwrap();
        let mut cov = Matrix::zeros(1);
        cov[(0, 0)] = var;
        Component::new(spec, StateMoments::new(vec![mean], cov).unwrap()).unwrap()
    }

    fn small_model(rho: f64) -> Dcmm {
        let binary = level_component(Link::LogitBernoulli, 0.5, 0.2, 0.98);
        let positive = level_component(Link::LogPoisson, 1.0, 0.1, 0.95);
        let positive = Component {
            spec: positive.spec.with_re_discount(rho).unwrap(),
            state: positive.state,
        };
        Dcmm::new(binary, positive).unwrap()
    }

    #[test]
    fn mixture_mass_sums_to_one() {
        let fc = small_model(1.0).forecast_one(&Covariates::new()).unwrap();
        let total: f64 = fc.pmf_vec().iter().sum();
        assert!((total - 1.0).abs() < 1e-9, "total {total}");
    }

    #[test]
    fn mixture_mean_matches_enumeration() {
        let fc = small_model(0.7).forecast_one(&Covariates::new()).unwrap();
        let numeric: f64 = fc
            .pmf_vec()
            .iter()
            .enumerate()
            .map(|(y, p)| y as f64 * p)
            .sum();
        assert!((fc.mean() - numeric).abs() < 1e-7 * fc.mean());
        let numeric2: f64 = fc
            .pmf_vec()
            .iter()
            .enumerate()
            .map(|(y, p)| (y as f64 - fc.mean()).powi(2) * p)
            .sum();
        assert!((fc.variance() - numeric2).abs() < 1e-6 * fc.variance());
    }

    #[test]
    fn mixture_cdf_and_quantile_agree() {
        let fc = small_model(1.0).forecast_one(&Covariates::new()).unwrap();
        for level in [0.05, 0.5, 0.9, 0.99] {
            let q = fc.quantile(level);
            assert!(fc.cdf(q) >= level);
            if q > 0 {
                assert!(fc.cdf(q - 1) < level);
            }
        }
    }

    #[test]
    fn random_effect_inflates_forecast_variance() {
        let base = small_model(1.0).forecast_one(&Covariates::new()).unwrap();
        let wide = small_model(0.4).forecast_one(&Covariates::new()).unwrap();
        assert!(wide.variance() > base.variance());
        // the mixture mean moves only mildly through the matching
        assert!((wide.mean() - base.mean()).abs() < 0.25 * base.mean());
    }

    #[test]
    fn zero_count_is_missing_data_for_positive_component() {
        let model = small_model(1.0);
        let m0 = model.positive.state.mean[0];
        let c0 = model.positive.state.cov[(0, 0)];
        let (next, _) = model.step(0, &Covariates::new()).unwrap();
        // mean untouched, covariance carries exactly the discount inflation
        assert_eq!(next.positive.state.mean[0], m0);
        assert!((next.positive.state.cov[(0, 0)] - c0 / 0.95).abs() < 1e-12);
        // while the binary component tightened toward zero
        assert!(next.binary.state.mean[0] < model.binary.state.mean[0]);
    }

    #[test]
    fn positive_count_moves_both_components() {
        let model = small_model(1.0);
        let (next, _) = model.step(4, &Covariates::new()).unwrap();
        assert!(next.binary.state.mean[0] > model.binary.state.mean[0]);
        // e^1 ~ 2.7 so mean(y) ~ 3.7; y = 4 nudges the level up slightly
        assert!(next.positive.state.mean[0] > model.positive.state.mean[0]);
        assert!(next.positive.state.cov[(0, 0)] < model.positive.state.cov[(0, 0)] / 0.95);
    }

    #[test]
    fn marginal_and_path_forecasts_agree_at_step_one() {
        let model = small_model(1.0);
        let covs = vec![Covariates::new(); 3];
        let marginal = model.forecast_marginal(&covs).unwrap();
        let mut rng = RngStream::new(7, 1);
        let paths = model.forecast_path(&covs, 20_000, &mut rng).unwrap();
        let draws = paths.at_horizon(0);
        let zero_frac =
            draws.iter().filter(|&&y| y == 0).count() as f64 / draws.len() as f64;
        assert!(
            (zero_frac - marginal[0].pmf(0)).abs() < 0.015,
            "zero fraction {zero_frac} vs pmf(0) {}",
            marginal[0].pmf(0)
        );
        let mean = draws.iter().map(|&y| y as f64).sum::<f64>() / draws.len() as f64;
        assert!(
            (mean - marginal[0].mean()).abs() < 0.05 * marginal[0].mean(),
            "sample mean {mean} vs {}",
            marginal[0].mean()
        );
    }

    #[test]
    fn path_forecast_is_reproducible() {
        let model = small_model(0.8);
        let covs = vec![Covariates::new(); 5];
        let a = model
            .forecast_path(&covs, 50, &mut RngStream::new(3, 9))
            .unwrap();
        let b = model
            .forecast_path(&covs, 50, &mut RngStream::new(3, 9))
            .unwrap();
        assert_eq!(a, b);
        let c = model
            .forecast_path(&covs, 50, &mut RngStream::new(4, 9))
            .unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn mismatched_links_rejected() {
        let b = level_component(Link::LogPoisson, 0.0, 1.0, 1.0);
        let p = level_component(Link::LogPoisson, 0.0, 1.0, 1.0);
        assert!(Dcmm::new(b, p.clone()).is_err());
        let b2 = level_component(Link::LogitBernoulli, 0.0, 1.0, 1.0);
        let p2 = level_component(Link::LogitBernoulli, 0.0, 1.0, 1.0);
        assert!(Dcmm::new(b2.clone(), p2).is_err());
        assert!(Dcmm::new(b2, p).is_ok());
    }
}
