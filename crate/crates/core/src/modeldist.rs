//! Distributions over models.
//!
//! A [`ModelDistribution`] draws candidate models of the next return. Three
//! constructions are provided: a normal model whose drift is itself normal,
//! subsampling `n` outcomes from an estimated base law, and bootstrapping `n`
//! observed returns with replacement. Subsampled and bootstrapped models are
//! finite uniform measures ([`SubsampleMeasure`]).
//!
//! Two sizes are kept apart throughout: `n`, the number of outcomes inside one
//! model, and `m`, the number of models an outer measure is taken over.

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::gauss1d::{
    draw_estimate, estimate_with, oosp_from_actions, AversionKind, GaussianLabParams, McEstimate, VarianceConvention,
    VarianceMode,
};
use crate::mathkit::{Matrix, Rng};
use crate::risk::{self, check_positive, Measure, Sample};

/// Uniform measure over finitely many outcomes.
#[derive(Clone, Debug, PartialEq)]
pub struct SubsampleMeasure<T = f64> {
    outcomes: Vec<T>,
}

impl<T> SubsampleMeasure<T> {
    pub fn new(outcomes: Vec<T>) -> Result<Self> {
        if outcomes.is_empty() {
            return Err(Error::EmptySample);
        }
        Ok(Self { outcomes })
    }

    pub fn outcomes(&self) -> &[T] {
        &self.outcomes
    }

    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    pub fn into_outcomes(self) -> Vec<T> {
        self.outcomes
    }
}

impl SubsampleMeasure<f64> {
    pub fn mean(&self) -> f64 {
        self.outcomes.iter().sum::<f64>() / self.outcomes.len() as f64
    }
}

/// A law of scalar outcomes that can be sampled.
#[derive(Clone, Debug, PartialEq)]
pub enum BaseLaw {
    Dirac(f64),
    Normal { mean: f64, variance: f64 },
    /// Uniform over the given values, drawn with replacement.
    Empirical(Vec<f64>),
}

impl BaseLaw {
    fn validate(&self) -> Result<()> {
        match self {
            BaseLaw::Dirac(c) if !c.is_finite() => Err(Error::invalid("base", "non-finite atom")),
            BaseLaw::Normal { variance, .. } if !(*variance >= 0.0) => {
                Err(Error::invalid("base", "negative variance"))
            }
            BaseLaw::Empirical(v) if v.is_empty() => Err(Error::EmptySample),
            _ => Ok(()),
        }
    }

    pub fn draw(&self, rng: &mut Rng) -> f64 {
        match self {
            BaseLaw::Dirac(c) => *c,
            BaseLaw::Normal { mean, variance } => mean + variance.sqrt() * rng.normal(),
            BaseLaw::Empirical(v) => v[rng.below(v.len())],
        }
    }
}

/// A drawn model of the next return.
#[derive(Clone, Debug, PartialEq)]
pub enum Model {
    Normal { mean: f64, variance: f64 },
    Empirical(SubsampleMeasure),
}

impl Model {
    pub fn mean(&self) -> f64 {
        match self {
            Model::Normal { mean, .. } => *mean,
            Model::Empirical(s) => s.mean(),
        }
    }
}

/// A seeded sampler of models.
#[derive(Clone, Debug, PartialEq)]
pub enum ModelDistribution {
    /// `N(μ, σ̂²)` with `μ ~ N(μ̂, τ²)`.
    GaussianDrift { mu_hat: f64, tau2: f64, sigma2_hat: f64 },
    /// Uniform measure over `n` i.i.d. draws from `base`.
    Subsample { base: BaseLaw, n: usize },
    /// Uniform measure over `n` observed returns drawn with replacement.
    Bootstrap { observed: Vec<f64>, n: usize },
}

impl ModelDistribution {
    pub fn gaussian_drift(mu_hat: f64, tau2: f64, sigma2_hat: f64) -> Result<Self> {
        if !(tau2 >= 0.0) {
            return Err(Error::invalid("tau2", "must be nonnegative"));
        }
        check_positive("sigma2_hat", sigma2_hat)?;
        Ok(Self::GaussianDrift {
            mu_hat,
            tau2,
            sigma2_hat,
        })
    }

    pub fn subsample(base: BaseLaw, n: usize) -> Result<Self> {
        base.validate()?;
        check_size(n)?;
        Ok(Self::Subsample { base, n })
    }

    pub fn bootstrap(observed: Vec<f64>, n: usize) -> Result<Self> {
        if observed.is_empty() {
            return Err(Error::EmptySample);
        }
        check_size(n)?;
        Ok(Self::Bootstrap { observed, n })
    }

    pub fn sample_model(&self, rng: &mut Rng) -> Model {
        match self {
            ModelDistribution::GaussianDrift {
                mu_hat,
                tau2,
                sigma2_hat,
            } => Model::Normal {
                mean: mu_hat + tau2.sqrt() * rng.normal(),
                variance: *sigma2_hat,
            },
            ModelDistribution::Subsample { base, n } => {
                let v = (0..*n).map(|_| base.draw(rng)).collect();
                Model::Empirical(SubsampleMeasure { outcomes: v })
            }
            ModelDistribution::Bootstrap { observed, n } => {
                let v = (0..*n).map(|_| observed[rng.below(observed.len())]).collect();
                Model::Empirical(SubsampleMeasure { outcomes: v })
            }
        }
    }

    /// Draws `m` models, model `i` from stream `(seed, [stream, i])`.
    pub fn sample_models(&self, m: usize, seed: u64, stream: u64, exec: Execution) -> Vec<Model> {
        exec.map(m, |i| self.sample_model(&mut Rng::keyed(seed, &[stream, i as u64])))
    }
}

fn check_size(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::invalid("n", "subsample size must be positive"));
    }
    Ok(())
}

/// `count` paths of cumulative sums of `horizon` resampled increments.
pub fn bootstrap_paths(observed: &[f64], horizon: usize, count: usize, rng: &mut Rng) -> Result<Matrix> {
    if observed.is_empty() {
        return Err(Error::EmptySample);
    }
    if horizon == 0 {
        return Err(Error::invalid("horizon", "must be positive"));
    }
    let mut out = Matrix::zeros(count, horizon);
    for r in 0..count {
        let row = out.row_mut(r);
        let mut acc = 0.0;
        for v in row.iter_mut() {
            acc += observed[rng.below(observed.len())];
            *v = acc;
        }
    }
    Ok(out)
}

/// Objective of the position `a·R` under one model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InnerObjective {
    Mean,
    Entropic { lambda: f64 },
    MeanVariance { lambda: f64 },
}

impl InnerObjective {
    /// Normal models use the closed form; entropic and mean-variance agree
    /// there.
    pub fn evaluate(&self, model: &Model, action: f64) -> Result<f64> {
        match (self, model) {
            (InnerObjective::Mean, m) => Ok(action * m.mean()),
            (
                InnerObjective::Entropic { lambda } | InnerObjective::MeanVariance { lambda },
                Model::Normal { mean, variance },
            ) => Ok(action * mean - 0.5 * lambda * action * action * variance),
            (InnerObjective::Entropic { lambda }, Model::Empirical(s)) => {
                risk::entropic(&scaled(s, action)?, *lambda)
            }
            (InnerObjective::MeanVariance { lambda }, Model::Empirical(s)) => {
                risk::mean_variance(&scaled(s, action)?, *lambda)
            }
        }
    }
}

fn scaled(s: &SubsampleMeasure, action: f64) -> Result<Sample> {
    Sample::new(s.outcomes.iter().map(|r| action * r).collect())
}

/// Draws `m` models and applies `outer` to the model-wise inner objectives.
pub fn ua_objective(
    dist: &ModelDistribution,
    inner: InnerObjective,
    outer: Measure,
    action: f64,
    m: usize,
    rng: &mut Rng,
) -> Result<f64> {
    if m == 0 {
        return Err(Error::invalid("m", "need at least one model"));
    }
    let models: Vec<Model> = (0..m).map(|_| dist.sample_model(rng)).collect();
    ua_objective_on(&models, inner, outer, action)
}

/// Outer measure of the inner objectives on a fixed set of models.
pub fn ua_objective_on(models: &[Model], inner: InnerObjective, outer: Measure, action: f64) -> Result<f64> {
    let mut values = models
        .iter()
        .map(|m| inner.evaluate(m, action))
        .collect::<Result<Vec<_>>>()?;
    values.sort_by(f64::total_cmp);
    outer.evaluate(&Sample::new(values)?)
}

/// Outer aversion for [`ua_mean_variance_action`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OuterAversion {
    /// Mean-variance across models with aversion `λ'`; for normally
    /// distributed model drifts this equals the entropic measure.
    MeanVariance { lambda_prime: f64 },
    /// Lower-tail mean across models.
    Cvar { alpha: f64 },
}

/// Maximizer over `a` of the outer measure of `a·Mᵢ - (λ/2)a²σ²` across
/// models with drifts `Mᵢ` and common variance `σ²`.
///
/// For CVaR the objective is concave and piecewise quadratic: a long
/// position sees the lower tail mean `L` of the drifts, a short position the
/// upper tail mean `U`, so the optimum is `L/(λσ²)` when `L > 0`,
/// `U/(λσ²)` when `U < 0` and zero otherwise.
pub fn ua_mean_variance_action(
    drifts: &[f64],
    variance: f64,
    lambda: f64,
    outer: OuterAversion,
) -> Result<f64> {
    if drifts.is_empty() {
        return Err(Error::EmptySample);
    }
    check_positive("variance", variance)?;
    check_positive("lambda", lambda)?;
    let m = drifts.len() as f64;
    match outer {
        OuterAversion::MeanVariance { lambda_prime } => {
            if !(lambda_prime >= 0.0) {
                return Err(Error::invalid("lambda_prime", "must be nonnegative"));
            }
            let mean = drifts.iter().sum::<f64>() / m;
            let var = drifts.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / m;
            Ok(mean / (lambda * variance + lambda_prime * var))
        }
        OuterAversion::Cvar { alpha } => {
            let mut sorted = drifts.to_vec();
            sorted.sort_by(f64::total_cmp);
            let (lower, upper) = tail_means_sorted(&sorted, alpha)?;
            Ok(cvar_action_from_tails(lower, upper, variance, lambda))
        }
    }
}

/// Lower and upper α-tail means of ascending `sorted` values under the
/// uniform `⌈α·m⌉` rule.
pub fn tail_means_sorted(sorted: &[f64], alpha: f64) -> Result<(f64, f64)> {
    risk::check_alpha(alpha)?;
    if sorted.is_empty() {
        return Err(Error::EmptySample);
    }
    let k = risk::tail_count(sorted.len(), alpha);
    let lower = sorted[..k].iter().sum::<f64>() / k as f64;
    let upper = sorted[sorted.len() - k..].iter().sum::<f64>() / k as f64;
    Ok((lower, upper))
}

pub(crate) fn cvar_action_from_tails(lower: f64, upper: f64, variance: f64, lambda: f64) -> f64 {
    if lower > 0.0 {
        lower / (lambda * variance)
    } else if upper < 0.0 {
        upper / (lambda * variance)
    } else {
        0.0
    }
}

/// How the models of one dataset are built in [`subsample_oosp`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SubsampleScheme {
    /// Drifts `μ̂ + σ̂/√n·Z`, the exact law of the mean of `n` draws from
    /// `N(μ̂, σ̂²)`; `(μ̂, σ̂²)` drawn from their sampling law.
    Gaussian(VarianceMode),
    /// `N` returns are simulated, `(μ̂, σ̂²)` estimated from them (centered
    /// variance), and each drift is the mean of `n` returns resampled with
    /// replacement.
    Bootstrap,
}

/// Monte Carlo OOSP of the subsample-based uncertainty-aware strategies on
/// an aversion grid.
///
/// For each of `datasets` estimates, `models` drifts `M_i` define normal
/// models `N(M_i, σ̂²)`. The outer measure is CVaR for
/// [`AversionKind::Cvar`] and mean-variance for [`AversionKind::Entropic`]
/// (the entropic measure of the affine, hence normal, model-wise
/// objective). Every grid point reuses the same draws.
#[allow(clippy::too_many_arguments)]
pub fn subsample_oosp(
    p: &GaussianLabParams,
    kind: AversionKind,
    grid: &[f64],
    datasets: usize,
    models: usize,
    n: usize,
    scheme: SubsampleScheme,
    seed: u64,
    exec: Execution,
) -> Result<Vec<McEstimate>> {
    if datasets < 2 || models < 1 || n < 1 {
        return Err(Error::invalid("datasets", "need at least two datasets, one model and n >= 1"));
    }
    if scheme == SubsampleScheme::Bootstrap && p.n_obs < 2 {
        return Err(Error::invalid("n_obs", "bootstrap needs at least two observations"));
    }
    for &g in grid {
        match kind {
            AversionKind::Cvar => risk::check_alpha(g)?,
            AversionKind::Entropic if !(g >= 0.0) => {
                return Err(Error::invalid("lambda_prime", "must be nonnegative"));
            }
            AversionKind::Entropic => {}
        }
    }
    let per_dataset = exec.map(datasets, |d| {
        let mut rng = Rng::keyed(seed, &[TAG_SUBSAMPLE, d as u64]);
        let (sigma2_hat, mut drifts) = match scheme {
            SubsampleScheme::Gaussian(mode) => {
                let e = draw_estimate(p, mode, &mut rng);
                let scale = (e.sigma2_hat / n as f64).sqrt();
                let drifts = (0..models).map(|_| e.mu_hat + scale * rng.normal()).collect::<Vec<f64>>();
                (e.sigma2_hat, drifts)
            }
            SubsampleScheme::Bootstrap => {
                let sd = p.sigma2.sqrt();
                let returns: Vec<f64> = (0..p.n_obs).map(|_| p.mu + sd * rng.normal()).collect();
                let e = estimate_with(&returns, VarianceConvention::Centered).expect("n_obs >= 2");
                let drifts = (0..models)
                    .map(|_| (0..n).map(|_| returns[rng.below(returns.len())]).sum::<f64>() / n as f64)
                    .collect::<Vec<f64>>();
                (e.sigma2_hat, drifts)
            }
        };
        match kind {
            AversionKind::Cvar => {
                drifts.sort_by(f64::total_cmp);
                grid.iter()
                    .map(|&alpha| {
                        let (lo, hi) = tail_means_sorted(&drifts, alpha).expect("validated alpha");
                        cvar_action_from_tails(lo, hi, sigma2_hat, p.lambda)
                    })
                    .collect::<Vec<f64>>()
            }
            AversionKind::Entropic => {
                let m = models as f64;
                let mean = drifts.iter().sum::<f64>() / m;
                let var = drifts.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / m;
                grid.iter()
                    .map(|&lp| mean / (p.lambda * sigma2_hat + lp * var))
                    .collect()
            }
        }
    });
    (0..grid.len())
        .map(|g| {
            let actions: Vec<f64> = per_dataset.iter().map(|a| a[g]).collect();
            oosp_from_actions(p, &actions)
        })
        .collect()
}

const TAG_SUBSAMPLE: u64 = 0x5b5;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gauss1d::Strategy;

    #[test]
    fn subsample_oosp_tracks_closed_forms() {
        let p = GaussianLabParams::reference();
        let alphas = [0.1, 0.5, 1.0];
        let cvar = subsample_oosp(&p, AversionKind::Cvar, &alphas, 4000, 2000, 140, SubsampleScheme::Gaussian(VarianceMode::Fixed), 1, Execution::Parallel).unwrap();
        for (a, est) in alphas.iter().zip(&cvar) {
            let exact = Strategy::UaCvar { alpha: *a }.oosp(&p).unwrap();
            assert!(est.covers(exact, 4.0), "alpha {a}: {est:?} vs {exact}");
        }
        let lps = [0.0, 50.0, 500.0];
        let ent = subsample_oosp(&p, AversionKind::Entropic, &lps, 4000, 2000, 140, SubsampleScheme::Gaussian(VarianceMode::Fixed), 1, Execution::Parallel).unwrap();
        for (l, est) in lps.iter().zip(&ent) {
            let exact = Strategy::UaEntropic { lambda_prime: *l }.oosp(&p).unwrap();
            assert!(est.covers(exact, 4.0), "lambda' {l}: {est:?} vs {exact}");
        }
        // Bootstrapped drifts carry the estimation error of σ̂² as well; the
        // agreement is approximate.
        let boot = subsample_oosp(&p, AversionKind::Cvar, &alphas, 2000, 500, 140, SubsampleScheme::Bootstrap, 2, Execution::Parallel).unwrap();
        for (a, est) in alphas.iter().zip(&boot) {
            let exact = Strategy::UaCvar { alpha: *a }.oosp(&p).unwrap();
            assert!((est.value - exact).abs() < 5.0 * est.std_error + 0.1 * exact.abs(), "alpha {a}: {est:?} vs {exact}");
        }
        assert!(subsample_oosp(&p, AversionKind::Cvar, &[0.0], 10, 10, 10, SubsampleScheme::Bootstrap, 1, Execution::Sequential).is_err());
    }

    #[test]
    fn dirac_base_repeats_atom() {
        let d = ModelDistribution::subsample(BaseLaw::Dirac(2.5), 7).unwrap();
        match d.sample_model(&mut Rng::new(0, 0)) {
            Model::Empirical(s) => assert_eq!(s.outcomes(), &[2.5; 7]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn single_atom_bootstrap() {
        let d = ModelDistribution::bootstrap(vec![0.3], 3).unwrap();
        assert_eq!(
            d.sample_model(&mut Rng::new(4, 4)),
            Model::Empirical(SubsampleMeasure::new(vec![0.3; 3]).unwrap())
        );
        assert!(ModelDistribution::bootstrap(vec![], 3).is_err());
        assert!(ModelDistribution::bootstrap(vec![1.0], 0).is_err());
    }

    #[test]
    fn subsample_means_follow_clt() {
        let (mu, s2, n) = (0.01, 0.04, 30);
        let d = ModelDistribution::subsample(BaseLaw::Normal { mean: mu, variance: s2 }, n).unwrap();
        let means: Vec<f64> = d
            .sample_models(100_000, 5, 0, Execution::default())
            .iter()
            .map(Model::mean)
            .collect();
        let m = means.len() as f64;
        let avg = means.iter().sum::<f64>() / m;
        let var = means.iter().map(|x| (x - avg).powi(2)).sum::<f64>() / (m - 1.0);
        let target_var = s2 / n as f64;
        assert!((avg - mu).abs() < 3.0 * (target_var / m).sqrt(), "{avg}");
        // SE of a normal sample variance is var·sqrt(2/(m-1)).
        assert!((var - target_var).abs() < 3.0 * target_var * (2.0 / (m - 1.0)).sqrt(), "{var}");
    }

    #[test]
    fn sample_models_independent_of_execution() {
        let d = ModelDistribution::gaussian_drift(0.0, 1.0, 1.0).unwrap();
        let a = d.sample_models(500, 9, 1, Execution::Sequential);
        let b = d.sample_models(500, 9, 1, Execution::Parallel);
        assert_eq!(a, b);
    }

    #[test]
    fn zero_increments_give_zero_paths() {
        let p = bootstrap_paths(&[0.0; 5], 10, 4, &mut Rng::new(1, 1)).unwrap();
        assert!(p.as_slice().iter().all(|v| *v == 0.0));
        assert!(bootstrap_paths(&[1.0], 0, 4, &mut Rng::new(1, 1)).is_err());
        assert!(bootstrap_paths(&[], 3, 4, &mut Rng::new(1, 1)).is_err());
    }

    #[test]
    fn bootstrap_paths_deterministic() {
        let obs = [0.1, -0.2, 0.05];
        let a = bootstrap_paths(&obs, 20, 10, &mut Rng::new(2, 0)).unwrap();
        let b = bootstrap_paths(&obs, 20, 10, &mut Rng::new(2, 0)).unwrap();
        assert_eq!(a, b);
        // Rows are cumulative sums of observed increments.
        for r in 0..10 {
            let row = a.row(r);
            assert!(obs.contains(&row[0]));
            for t in 1..20 {
                let inc = row[t] - row[t - 1];
                assert!(obs.iter().any(|o| (o - inc).abs() < 1e-12));
            }
        }
    }

    #[test]
    fn m_one_is_inner_value() {
        let d = ModelDistribution::gaussian_drift(0.02, 0.01, 0.04).unwrap();
        let inner = InnerObjective::Entropic { lambda: 2.0 };
        let v = ua_objective(&d, inner, Measure::Cvar { alpha: 0.1 }, 1.5, 1, &mut Rng::new(3, 0)).unwrap();
        let model = d.sample_model(&mut Rng::new(3, 0));
        assert_eq!(v, inner.evaluate(&model, 1.5).unwrap());
    }

    #[test]
    fn expectation_of_means_is_pooled_mean() {
        let d = ModelDistribution::subsample(BaseLaw::Normal { mean: 0.1, variance: 1.0 }, 8).unwrap();
        let models: Vec<Model> = (0..50).map(|i| d.sample_model(&mut Rng::new(6, i))).collect();
        let v = ua_objective_on(&models, InnerObjective::Mean, Measure::Expectation, 2.0).unwrap();
        let pooled: Vec<f64> = models
            .iter()
            .flat_map(|m| match m {
                Model::Empirical(s) => s.outcomes().to_vec(),
                Model::Normal { .. } => unreachable!(),
            })
            .collect();
        let pooled_mean = 2.0 * pooled.iter().sum::<f64>() / pooled.len() as f64;
        assert!((v - pooled_mean).abs() < 1e-12);
    }

    #[test]
    fn regrouping_invariance_at_alpha_one() {
        // 480 outcomes split as 12×40 or 40×12: the expectation of model means
        // is the grand mean either way.
        let base = BaseLaw::Normal { mean: -0.3, variance: 2.0 };
        let mut rng = Rng::new(8, 0);
        let all: Vec<f64> = (0..480).map(|_| base.draw(&mut rng)).collect();
        let split = |n: usize| -> Vec<Model> {
            all.chunks(n)
                .map(|c| Model::Empirical(SubsampleMeasure::new(c.to_vec()).unwrap()))
                .collect()
        };
        let a = ua_objective_on(&split(40), InnerObjective::Mean, Measure::Cvar { alpha: 1.0 }, 1.0).unwrap();
        let b = ua_objective_on(&split(12), InnerObjective::Mean, Measure::Cvar { alpha: 1.0 }, 1.0).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn cvar_action_three_regimes() {
        let lam = 2.0;
        let var = 0.5;
        // All drifts positive: invest the lower tail mean.
        let a = ua_mean_variance_action(&[1.0, 2.0, 3.0, 4.0], var, lam, OuterAversion::Cvar { alpha: 0.5 }).unwrap();
        assert_eq!(a, 1.5 / (lam * var));
        let a = ua_mean_variance_action(&[-1.0, -2.0, -3.0, -4.0], var, lam, OuterAversion::Cvar { alpha: 0.5 }).unwrap();
        assert_eq!(a, -1.5 / (lam * var));
        let a = ua_mean_variance_action(&[-1.0, 2.0, 3.0, -4.0], var, lam, OuterAversion::Cvar { alpha: 0.5 }).unwrap();
        assert_eq!(a, 0.0);
    }

    #[test]
    fn cvar_action_maximizes_outer_cvar() {
        let drifts = [0.3, -0.1, 0.5, 0.9, 0.2, 0.05, 0.7];
        let (lam, var) = (1.5, 0.2);
        for alpha in [0.2, 0.5, 0.8, 1.0] {
            let got = ua_mean_variance_action(&drifts, var, lam, OuterAversion::Cvar { alpha }).unwrap();
            let models: Vec<Model> = drifts
                .iter()
                .map(|&d| Model::Normal { mean: d, variance: var })
                .collect();
            let obj = |a: f64| {
                ua_objective_on(&models, InnerObjective::MeanVariance { lambda: lam }, Measure::Cvar { alpha }, a)
                    .unwrap()
            };
            let best = (-3000..=3000)
                .map(|i| i as f64 * 1e-3)
                .max_by(|a, b| obj(*a).total_cmp(&obj(*b)))
                .unwrap();
            assert!((got - best).abs() <= 1e-3, "alpha {alpha}: {got} vs {best}");
        }
    }

    #[test]
    fn mean_variance_outer_matches_shrinkage() {
        // Drifts with mean μ̂ and population variance σ²/N reproduce x_N.
        let (mu_hat, s2, n, lam, lp) = (0.002, 0.0004, 100.0, 3.0, 150.0);
        let sd = (s2 / n as f64).sqrt();
        let drifts = [mu_hat - sd, mu_hat + sd];
        let got = ua_mean_variance_action(&drifts, s2, lam, OuterAversion::MeanVariance { lambda_prime: lp }).unwrap();
        let x = lam * n / (lam * n + lp);
        assert!((got - x * mu_hat / (lam * s2)).abs() < 1e-12);
    }
}
