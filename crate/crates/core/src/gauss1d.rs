//! One-dimensional Gaussian lab.
//!
//! Returns are i.i.d. `N(μ, σ²)`; the agent sees `N` of them, estimates
//! `(μ̂, σ̂²)` and invests `a` units in the next return under the entropic
//! (equivalently mean-variance) objective with risk aversion `λ`. Every
//! strategy here is linear or soft-thresholded in `μ̂`, so its out-of-sample
//! performance (OOSP, the objective under the true law averaged over the
//! estimation noise) has a closed form once `σ̂²` is replaced by `σ²`.

use crate::error::{Error, Result};
use crate::mathkit::{erfc, norm_cdf, norm_pdf, Rng};
use crate::risk::{check_positive, cvar_kappa};

/// Trading days per year used to convert annual figures to daily ones.
pub const STEPS_PER_YEAR: f64 = 255.0;

/// True law and agent of the lab.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianLabParams {
    /// Drift per step.
    pub mu: f64,
    /// Variance per step.
    pub sigma2: f64,
    /// Number of observed returns.
    pub n_obs: usize,
    /// Risk aversion.
    pub lambda: f64,
}

impl GaussianLabParams {
    pub fn new(mu: f64, sigma2: f64, n_obs: usize, lambda: f64) -> Result<Self> {
        if !mu.is_finite() {
            return Err(Error::invalid("mu", "must be finite"));
        }
        check_positive("sigma2", sigma2)?;
        check_positive("lambda", lambda)?;
        if n_obs < 2 {
            return Err(Error::invalid("n_obs", "need at least two observations"));
        }
        Ok(Self {
            mu,
            sigma2,
            n_obs,
            lambda,
        })
    }

    /// Daily parameters from an annual drift and volatility.
    pub fn from_annual(mu_annual: f64, vol_annual: f64, n_obs: usize, lambda: f64) -> Result<Self> {
        Self::new(
            mu_annual / STEPS_PER_YEAR,
            vol_annual * vol_annual / STEPS_PER_YEAR,
            n_obs,
            lambda,
        )
    }

    /// 20% annual drift and volatility, 140 observations, λ = 0.84.
    pub fn reference() -> Self {
        Self::from_annual(0.2, 0.2, 140, 0.84).expect("valid reference parameters")
    }

    fn n(&self) -> f64 {
        self.n_obs as f64
    }

    /// The estimate an agent with perfect data would make.
    pub fn exact_estimate(&self) -> EstimatedGaussian {
        EstimatedGaussian {
            mu_hat: self.mu,
            sigma2_hat: self.sigma2,
            n_obs: self.n_obs,
        }
    }
}

/// Estimated drift and variance from `n_obs` returns.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EstimatedGaussian {
    pub mu_hat: f64,
    pub sigma2_hat: f64,
    pub n_obs: usize,
}

impl EstimatedGaussian {
    pub fn new(mu_hat: f64, sigma2_hat: f64, n_obs: usize) -> Result<Self> {
        if !mu_hat.is_finite() {
            return Err(Error::invalid("mu_hat", "must be finite"));
        }
        check_positive("sigma2_hat", sigma2_hat)?;
        if n_obs < 1 {
            return Err(Error::invalid("n_obs", "must be positive"));
        }
        Ok(Self {
            mu_hat,
            sigma2_hat,
            n_obs,
        })
    }
}

/// How `σ̂²` is computed from the returns.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum VarianceConvention {
    /// `Σ x²/(N-1)`, not centered by the mean.
    #[default]
    Uncentered,
    /// The usual sample variance `Σ (x-μ̂)²/(N-1)`.
    Centered,
}

/// Estimates with the default (uncentered) variance convention.
pub fn estimate(returns: &[f64]) -> Result<EstimatedGaussian> {
    estimate_with(returns, VarianceConvention::Uncentered)
}

pub fn estimate_with(returns: &[f64], convention: VarianceConvention) -> Result<EstimatedGaussian> {
    if returns.len() < 2 {
        return Err(Error::invalid("returns", "need at least two returns"));
    }
    if returns.iter().any(|r| !r.is_finite()) {
        return Err(Error::invalid("returns", "contains a non-finite value"));
    }
    let n = returns.len() as f64;
    let mu_hat = returns.iter().sum::<f64>() / n;
    let centre = match convention {
        VarianceConvention::Uncentered => 0.0,
        VarianceConvention::Centered => mu_hat,
    };
    let ss: f64 = returns.iter().map(|r| (r - centre) * (r - centre)).sum();
    EstimatedGaussian::new(mu_hat, ss / (n - 1.0), returns.len())
}

pub fn oracle_action(p: &GaussianLabParams) -> f64 {
    p.mu / (p.lambda * p.sigma2)
}

pub fn plugin_action(e: &EstimatedGaussian, lambda: f64) -> f64 {
    e.mu_hat / (lambda * e.sigma2_hat)
}

/// `x_N = λN/(λN + λ')`, the factor by which entropic uncertainty aversion
/// shrinks the plug-in action.
pub fn shrinkage_factor(lambda: f64, n_obs: usize, lambda_prime: f64) -> Result<f64> {
    if !(lambda_prime >= 0.0) {
        return Err(Error::invalid("lambda_prime", "must be nonnegative"));
    }
    if lambda_prime.is_infinite() {
        return Ok(0.0);
    }
    let ln = lambda * n_obs as f64;
    Ok(ln / (ln + lambda_prime))
}

pub fn ua_entropic_action(e: &EstimatedGaussian, lambda: f64, lambda_prime: f64) -> Result<f64> {
    Ok(shrinkage_factor(lambda, e.n_obs, lambda_prime)? * plugin_action(e, lambda))
}

/// Plug-in action with `|μ̂|` soft-thresholded by `κ_α·sqrt(σ̂²/N)`.
pub fn ua_cvar_action(e: &EstimatedGaussian, lambda: f64, alpha: f64) -> Result<f64> {
    let threshold = cvar_kappa(alpha)? * (e.sigma2_hat / e.n_obs as f64).sqrt();
    let excess = e.mu_hat.abs() - threshold;
    if excess <= 0.0 {
        return Ok(0.0);
    }
    Ok(e.mu_hat.signum() * excess / (lambda * e.sigma2_hat))
}

/// Optimal action under the predictive law `N(μ̂, σ̂²(1 + 1/N))`.
pub fn mixture_action(e: &EstimatedGaussian, lambda: f64) -> f64 {
    let n = e.n_obs as f64;
    e.mu_hat * n / (lambda * e.sigma2_hat * (n + 1.0))
}

/// Plug-in action with the variance inflated by `τ²`.
pub fn var_adjusted_action(e: &EstimatedGaussian, lambda: f64, tau2: f64) -> Result<f64> {
    if !(tau2 >= 0.0) {
        return Err(Error::invalid("tau2", "must be nonnegative"));
    }
    if tau2.is_infinite() {
        return Ok(0.0);
    }
    Ok(e.mu_hat / (lambda * (e.sigma2_hat + tau2)))
}

/// OOSP of the action `x·μ̂`:
/// `xμ²(1 - λxσ²/2) - (λ/(2N))x²σ²(μ² + σ²)`.
pub fn oosp_scaled(p: &GaussianLabParams, x: f64) -> f64 {
    let GaussianLabParams { mu, sigma2, lambda, .. } = *p;
    let m2 = mu * mu;
    x * m2 * (1.0 - 0.5 * lambda * x * sigma2) - lambda / (2.0 * p.n()) * x * x * sigma2 * (m2 + sigma2)
}

/// `μ²/(2λσ²)`, the objective of the oracle action.
pub fn oosp_oracle(p: &GaussianLabParams) -> f64 {
    p.mu * p.mu / (2.0 * p.lambda * p.sigma2)
}

pub fn oosp_plugin(p: &GaussianLabParams) -> f64 {
    oosp_scaled(p, 1.0 / (p.lambda * p.sigma2))
}

/// Alternative closed forms for the mixture OOSP.
///
/// Only [`MixtureOospForm::Exact`] equals the expectation it describes; the
/// other two are kept so published curves that used them can be redrawn.
/// Both are positive at [`GaussianLabParams::reference`] where the exact value
/// is negative.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum MixtureOospForm {
    /// [`oosp_scaled`] at `x = N/((N+1)λσ²)`.
    #[default]
    Exact,
    /// `μ²N/(λσ²(N+1)) - N(μ²+σ²)/(2λσ²(N+1)²)`, dropping the variance
    /// penalty on the drift term.
    NoDriftPenalty,
    /// As `NoDriftPenalty` with the drift term multiplied by `(1 - λσ²/2)`.
    SmallFactor,
}

pub fn oosp_mixture(p: &GaussianLabParams) -> f64 {
    oosp_mixture_with(p, MixtureOospForm::Exact)
}

pub fn oosp_mixture_with(p: &GaussianLabParams, form: MixtureOospForm) -> f64 {
    let n = p.n();
    let ls = p.lambda * p.sigma2;
    let m2 = p.mu * p.mu;
    let drift = m2 * n / (ls * (n + 1.0));
    let noise = n * (m2 + p.sigma2) / (2.0 * ls * (n + 1.0) * (n + 1.0));
    match form {
        MixtureOospForm::Exact => oosp_scaled(p, n / ((n + 1.0) * ls)),
        MixtureOospForm::NoDriftPenalty => drift - noise,
        MixtureOospForm::SmallFactor => drift * (1.0 - 0.5 * ls) - noise,
    }
}

pub fn oosp_var_adjusted(p: &GaussianLabParams, tau2: f64) -> Result<f64> {
    if !(tau2 >= 0.0) {
        return Err(Error::invalid("tau2", "must be nonnegative"));
    }
    if tau2.is_infinite() {
        return Ok(0.0);
    }
    Ok(oosp_scaled(p, 1.0 / (p.lambda * (p.sigma2 + tau2))))
}

pub fn oosp_ua_entropic(p: &GaussianLabParams, lambda_prime: f64) -> Result<f64> {
    let x = shrinkage_factor(p.lambda, p.n_obs, lambda_prime)?;
    Ok(oosp_scaled(p, x / (p.lambda * p.sigma2)))
}

/// `oosp_ua_entropic - oosp_plugin`, evaluated in factored form so that its
/// sign is reliable near zero.
pub fn oosp_gain_ua_entropic(p: &GaussianLabParams, lambda_prime: f64) -> Result<f64> {
    let x = shrinkage_factor(p.lambda, p.n_obs, lambda_prime)?;
    let n = p.n();
    let m2 = p.mu * p.mu;
    let scaled = -m2 * (1.0 - x) * (n * (1.0 - x) - (1.0 + x)) + p.sigma2 * (1.0 - x) * (1.0 + x);
    Ok(scaled / (2.0 * n * p.lambda * p.sigma2))
}

/// Whether entropic uncertainty aversion `λ' > 0` strictly beats plug-in:
/// `μ²((N-1)λ' - 2Nλ)/(2Nλ + λ') < σ²`.
///
/// At `λ' = 0` the two strategies coincide and the answer is `false`.
pub fn improvement_condition(p: &GaussianLabParams, lambda_prime: f64) -> Result<bool> {
    if !(lambda_prime >= 0.0) {
        return Err(Error::invalid("lambda_prime", "must be nonnegative"));
    }
    if lambda_prime == 0.0 {
        return Ok(false);
    }
    let n = p.n();
    if lambda_prime.is_infinite() {
        // Limit of the left side is μ²(N-1).
        return Ok(p.mu * p.mu * (n - 1.0) < p.sigma2);
    }
    let lhs = p.mu * p.mu * ((n - 1.0) * lambda_prime - 2.0 * n * p.lambda)
        / (2.0 * n * p.lambda + lambda_prime);
    Ok(lhs < p.sigma2)
}

/// The `λ'` at which the improvement condition flips, if it flips at all.
///
/// Improvement holds exactly for `0 < λ' < boundary`; `None` means it holds
/// for every positive `λ'`.
pub fn improvement_boundary(p: &GaussianLabParams) -> Option<f64> {
    let n = p.n();
    let m2 = p.mu * p.mu;
    let denom = (n - 1.0) * m2 - p.sigma2;
    if denom <= 0.0 {
        return None;
    }
    Some(2.0 * n * p.lambda * (m2 + p.sigma2) / denom)
}

/// First two moments of `g = sign(μ̂)(|μ̂| - A·σ/√N)₊` for
/// `μ̂ ~ N(μ, σ²/N)`, returned as `(E[g], E[g²])`.
fn soft_threshold_moments(mu: f64, sigma: f64, n: f64, a: f64) -> (f64, f64) {
    let sn = n.sqrt();
    let lo = mu * sn - a * sigma;
    let hi = mu * sn + a * sigma;
    let r2 = std::f64::consts::SQRT_2 * sigma;
    let c = a * sigma / sn;
    let gauss = (2.0 / std::f64::consts::PI).sqrt() * sigma / sn;
    let e_lo = (-lo * lo / (2.0 * sigma * sigma)).exp();
    let e_hi = (-hi * hi / (2.0 * sigma * sigma)).exp();

    // 2μ + (μ-c)·erf(lo) - (μ+c)·erf(hi) + gauss·(e_lo - e_hi), with the
    // constant folded into erfc so that the tails keep full precision.
    let mean = 0.5
        * ((mu - c) * erfc(-lo / r2) + (mu + c) * erfc(hi / r2) + gauss * (e_lo - e_hi));

    let s2 = sigma * sigma;
    let two_n_second = ((a * a + 1.0) * s2 - 2.0 * a * mu * sn * sigma + mu * mu * n)
        * erfc(-lo / r2)
        + ((a * a + 1.0) * s2 + 2.0 * a * mu * sn * sigma + mu * mu * n) * erfc(hi / r2)
        - (2.0 / std::f64::consts::PI).sqrt() * sigma * (-lo * e_lo + hi * e_hi);
    (mean, two_n_second / (2.0 * n))
}

/// OOSP of [`ua_cvar_action`] with `σ̂² ≡ σ²`:
/// `μE[a] - (λ/2)((μ² + σ²)E[a²] - μ²E[a]²)`.
pub fn oosp_ua_cvar(p: &GaussianLabParams, alpha: f64) -> Result<f64> {
    let kappa = cvar_kappa(alpha)?;
    let sigma = p.sigma2.sqrt();
    let (g1, g2) = soft_threshold_moments(p.mu, sigma, p.n(), kappa);
    let scale = 1.0 / (p.lambda * p.sigma2);
    Ok(oosp_from_moments(p, g1 * scale, g2 * scale * scale))
}

/// Mean-variance of `a·ΔS` with random `a` independent of `ΔS ~ N(μ, σ²)`.
pub(crate) fn oosp_from_moments(p: &GaussianLabParams, ea: f64, ea2: f64) -> f64 {
    let m2 = p.mu * p.mu;
    p.mu * ea - 0.5 * p.lambda * ((m2 + p.sigma2) * ea2 - m2 * ea * ea)
}

/// `(E[g], E[g²])` via normal CDF/PDF; an independent route to the same
/// moments used by tests and as a fallback.
pub fn soft_threshold_moments_phi(mu: f64, sd: f64, c: f64) -> (f64, f64) {
    let d = (mu - c) / sd;
    let e = (-mu - c) / sd;
    let pos = (mu - c) * norm_cdf(d) + sd * norm_pdf(d);
    let neg = (-mu - c) * norm_cdf(e) + sd * norm_pdf(e);
    let pos2 = ((mu - c).powi(2) + sd * sd) * norm_cdf(d) + (mu - c) * sd * norm_pdf(d);
    let neg2 = ((-mu - c).powi(2) + sd * sd) * norm_cdf(e) + (-mu - c) * sd * norm_pdf(e);
    (pos - neg, pos2 + neg2)
}

/// A strategy of the lab, as a function of the estimate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Strategy {
    /// Uses the true parameters; ignores the estimate.
    Oracle,
    Plugin,
    Mixture,
    UaEntropic { lambda_prime: f64 },
    UaCvar { alpha: f64 },
    VarAdjusted { tau2: f64 },
}

impl Strategy {
    pub fn action(&self, p: &GaussianLabParams, e: &EstimatedGaussian) -> Result<f64> {
        match *self {
            Strategy::Oracle => Ok(oracle_action(p)),
            Strategy::Plugin => Ok(plugin_action(e, p.lambda)),
            Strategy::Mixture => Ok(mixture_action(e, p.lambda)),
            Strategy::UaEntropic { lambda_prime } => ua_entropic_action(e, p.lambda, lambda_prime),
            Strategy::UaCvar { alpha } => ua_cvar_action(e, p.lambda, alpha),
            Strategy::VarAdjusted { tau2 } => var_adjusted_action(e, p.lambda, tau2),
        }
    }

    /// Closed-form OOSP with `σ̂² ≡ σ²`.
    pub fn oosp(&self, p: &GaussianLabParams) -> Result<f64> {
        match *self {
            Strategy::Oracle => Ok(oosp_oracle(p)),
            Strategy::Plugin => Ok(oosp_plugin(p)),
            Strategy::Mixture => Ok(oosp_mixture(p)),
            Strategy::UaEntropic { lambda_prime } => oosp_ua_entropic(p, lambda_prime),
            Strategy::UaCvar { alpha } => oosp_ua_cvar(p, alpha),
            Strategy::VarAdjusted { tau2 } => oosp_var_adjusted(p, tau2),
        }
    }
}

/// How the Monte Carlo oracle draws `σ̂²`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum VarianceMode {
    /// `σ̂² = σ²`, as in the closed forms.
    #[default]
    Fixed,
    /// `σ̂² ~ σ²·χ²_{N-1}/(N-1)`, the law of the centered sample variance.
    Estimated,
}

/// A Monte Carlo estimate with its standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct McEstimate {
    pub value: f64,
    pub std_error: f64,
}

impl McEstimate {
    /// Whether `x` lies within `k` standard errors.
    pub fn covers(&self, x: f64, k: f64) -> bool {
        (self.value - x).abs() <= k * self.std_error
    }
}

/// OOSP from `(aᵢ)` drawn independently of the next return.
///
/// The standard error uses the influence function of
/// `μ·ā - (λ/2)((μ²+σ²)·mean(a²) - μ²ā²)`.
pub fn oosp_from_actions(p: &GaussianLabParams, actions: &[f64]) -> Result<McEstimate> {
    if actions.len() < 2 {
        return Err(Error::invalid("draws", "need at least two draws"));
    }
    let n = actions.len() as f64;
    let m2 = p.mu * p.mu;
    let k = 0.5 * p.lambda * (m2 + p.sigma2);
    let mean_a = actions.iter().sum::<f64>() / n;
    let f: Vec<f64> = actions.iter().map(|a| p.mu * a - k * a * a).collect();
    let mean_f = f.iter().sum::<f64>() / n;
    let value = mean_f + 0.5 * p.lambda * m2 * mean_a * mean_a;
    let psi: Vec<f64> = f
        .iter()
        .zip(actions)
        .map(|(fi, ai)| fi + p.lambda * m2 * mean_a * ai)
        .collect();
    let mean_psi = psi.iter().sum::<f64>() / n;
    let var = psi.iter().map(|v| (v - mean_psi).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(McEstimate {
        value,
        std_error: (var / n).sqrt(),
    })
}

/// Draws one estimate from the sampling law of `(μ̂, σ̂²)`.
pub fn draw_estimate(p: &GaussianLabParams, mode: VarianceMode, rng: &mut Rng) -> EstimatedGaussian {
    let n = p.n();
    let mu_hat = p.mu + (p.sigma2 / n).sqrt() * rng.normal();
    let sigma2_hat = match mode {
        VarianceMode::Fixed => p.sigma2,
        VarianceMode::Estimated => {
            let chi = rand_distr::ChiSquared::new(n - 1.0).expect("n_obs >= 2");
            p.sigma2 * rng.sample(&chi) / (n - 1.0)
        }
    };
    EstimatedGaussian {
        mu_hat,
        sigma2_hat,
        n_obs: p.n_obs,
    }
}

/// Monte Carlo OOSP of a strategy from `draws` independent estimates.
pub fn oosp_mc(
    p: &GaussianLabParams,
    strategy: Strategy,
    mode: VarianceMode,
    draws: usize,
    rng: &mut Rng,
) -> Result<McEstimate> {
    let mut actions = Vec::with_capacity(draws);
    for _ in 0..draws {
        let e = draw_estimate(p, mode, rng);
        actions.push(strategy.action(p, &e)?);
    }
    oosp_from_actions(p, &actions)
}

/// The exact maximizer `λ(1 + σ²/μ²)` of [`oosp_ua_entropic`] over `λ' ≥ 0`
/// (infinite when `μ = 0`).
pub fn optimal_lambda_prime(p: &GaussianLabParams) -> f64 {
    if p.mu == 0.0 {
        return f64::INFINITY;
    }
    p.lambda * (1.0 + p.sigma2 / (p.mu * p.mu))
}

/// Which uncertainty measure an aversion search is over.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AversionKind {
    Entropic,
    Cvar,
}

/// Number of points in the aversion grids.
pub const AVERSION_GRID_POINTS: usize = 400;

/// `λ'` grid: logarithmic from 1e-3 to 1e6.
pub fn lambda_prime_grid() -> Vec<f64> {
    log_grid(1e-3, 1e6, AVERSION_GRID_POINTS)
}

/// α grid: `i/400` for `i = 1..=400`.
pub fn alpha_grid() -> Vec<f64> {
    (1..=AVERSION_GRID_POINTS)
        .map(|i| i as f64 / AVERSION_GRID_POINTS as f64)
        .collect()
}

pub fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..points)
        .map(|i| (a + (b - a) * i as f64 / (points - 1) as f64).exp())
        .collect()
}

/// Best aversion on a grid and its OOSP.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AversionChoice {
    pub aversion: f64,
    pub oosp: f64,
    /// Position in the grid.
    pub index: usize,
}

/// Grid maximizer of the OOSP over `λ'` or `α`. Ties go to the least
/// robust point (smallest `λ'`, largest `α`).
pub fn optimal_aversion(p: &GaussianLabParams, kind: AversionKind) -> Result<AversionChoice> {
    let (grid, ascending_robustness) = match kind {
        AversionKind::Entropic => (lambda_prime_grid(), true),
        AversionKind::Cvar => (alpha_grid(), false),
    };
    let order: Vec<usize> = if ascending_robustness {
        (0..grid.len()).collect()
    } else {
        (0..grid.len()).rev().collect()
    };
    let mut best: Option<AversionChoice> = None;
    for i in order {
        let v = match kind {
            AversionKind::Entropic => oosp_ua_entropic(p, grid[i])?,
            AversionKind::Cvar => oosp_ua_cvar(p, grid[i])?,
        };
        if best.is_none_or(|b| v > b.oosp) {
            best = Some(AversionChoice {
                aversion: grid[i],
                oosp: v,
                index: i,
            });
        }
    }
    Ok(best.expect("nonempty grid"))
}
