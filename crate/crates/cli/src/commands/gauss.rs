//! One-period Gaussian lab subcommands.

use serde::{Deserialize, Serialize};

use uamark::gauss1d::{
    self, oosp_mixture, oosp_oracle, oosp_plugin, oosp_ua_cvar, oosp_ua_entropic, oosp_var_adjusted,
    optimal_aversion, optimal_lambda_prime, AversionKind, EstimatedGaussian, GaussianLabParams, VarianceMode,
    AVERSION_GRID_POINTS,
};
use uamark::modeldist::{subsample_oosp, SubsampleScheme};
use uamark::Execution;

use crate::config::{GridSpec, LabConfig, Scale};
use crate::error::CliError;
use crate::output::{num, Output, Table};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Strategies1dConfig {
    pub lab: LabConfig,
    /// Entropic aversion; defaults to the OOSP-optimal value.
    pub lambda_prime: Option<f64>,
    /// CVaR level; defaults to the OOSP-optimal grid value.
    pub alpha: Option<f64>,
    /// Estimated drifts; defaults to ±4 standard errors.
    pub mu_hat: Option<GridSpec>,
}

pub fn strategies_1d(cfg: &mut Strategies1dConfig, out: &mut Output) -> Result<(), CliError> {
    let p = cfg.lab.params()?;
    let lp = *cfg.lambda_prime.get_or_insert_with(|| optimal_lambda_prime(&p));
    let alpha = match cfg.alpha {
        Some(a) => a,
        None => *cfg.alpha.insert(optimal_aversion(&p, AversionKind::Cvar)?.aversion),
    };
    let se = (p.sigma2 / p.n_obs as f64).sqrt();
    let grid = cfg
        .mu_hat
        .get_or_insert_with(|| GridSpec::new(-4.0 * se, 4.0 * se, 201, Scale::Linear))
        .values("mu_hat")?;
    let oracle = gauss1d::oracle_action(&p);
    let mut t = Table::new(&["mu_hat", "plugin", "ua_entropic", "ua_cvar", "oracle"]);
    for mu_hat in grid {
        let e = EstimatedGaussian::new(mu_hat, p.sigma2, p.n_obs)?;
        t.push(vec![
            num(mu_hat),
            num(gauss1d::plugin_action(&e, p.lambda)),
            num(gauss1d::ua_entropic_action(&e, p.lambda, lp)?),
            num(gauss1d::ua_cvar_action(&e, p.lambda, alpha)?),
            num(oracle),
        ]);
    }
    out.csv("strategies_1d.csv", &t)?;
    out.plot(
        "strategies_1d.svg",
        "Actions against the estimated drift",
        &t,
        "mu_hat",
        &["plugin", "ua_entropic", "ua_cvar", "oracle"],
        false,
    )
}

fn default_lambda_prime_grid() -> GridSpec {
    GridSpec::new(1e-3, 1e6, AVERSION_GRID_POINTS, Scale::Log)
}

fn default_alpha_grid() -> GridSpec {
    let n = AVERSION_GRID_POINTS;
    GridSpec::new(1.0 / n as f64, 1.0, n, Scale::Linear)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OospFrontierConfig {
    pub lab: LabConfig,
    pub lambda_prime: GridSpec,
    pub alpha: GridSpec,
}

impl Default for OospFrontierConfig {
    fn default() -> Self {
        Self {
            lab: LabConfig::default(),
            lambda_prime: default_lambda_prime_grid(),
            alpha: default_alpha_grid(),
        }
    }
}

pub fn oosp_frontier(cfg: &mut OospFrontierConfig, out: &mut Output) -> Result<(), CliError> {
    let p = cfg.lab.params()?;
    let (oracle, plugin, mixture) = (oosp_oracle(&p), oosp_plugin(&p), oosp_mixture(&p));
    let mut t = Table::new(&["kind", "aversion", "oracle", "plugin", "mixture", "ua"]);
    let mut ent = Vec::new();
    for lp in cfg.lambda_prime.values("lambda_prime")? {
        let ua = oosp_ua_entropic(&p, lp)?;
        ent.push((lp, ua));
        t.push(vec!["entropic".into(), num(lp), num(oracle), num(plugin), num(mixture), num(ua)]);
    }
    let mut cvar = Vec::new();
    for a in cfg.alpha.values("alpha")? {
        let ua = oosp_ua_cvar(&p, a)?;
        cvar.push((a, ua));
        t.push(vec!["cvar".into(), num(a), num(oracle), num(plugin), num(mixture), num(ua)]);
    }
    out.csv("oosp_frontier.csv", &t)?;
    for (name, title, pts, log_x) in [
        ("oosp_entropic.svg", "OOSP against entropic aversion", &ent, true),
        ("oosp_cvar.svg", "OOSP against CVaR level", &cvar, false),
    ] {
        let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
        let flat = |v: f64| vec![v; xs.len()];
        out.plot_series(
            name,
            title,
            "aversion",
            &xs,
            &[
                ("uncertainty-aware".into(), pts.iter().map(|p| p.1).collect()),
                ("plug-in".into(), flat(plugin)),
                ("mixture".into(), flat(mixture)),
                ("oracle".into(), flat(oracle)),
            ],
            log_x,
        )?;
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sweep {
    Mu,
    Sigma,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimalAversionConfig {
    pub lab: LabConfig,
    /// Which true parameter is scaled by the factors.
    pub sweep: Sweep,
    pub factors: GridSpec,
}

impl Default for OptimalAversionConfig {
    fn default() -> Self {
        Self {
            lab: LabConfig::default(),
            sweep: Sweep::Mu,
            factors: GridSpec::new(0.05, 4.0, 40, Scale::Log),
        }
    }
}

pub fn optimal_aversion_cmd(cfg: &mut OptimalAversionConfig, out: &mut Output) -> Result<(), CliError> {
    let base = cfg.lab.params()?;
    let mut t = Table::new(&[
        "factor",
        "mu",
        "sigma2",
        "lambda_prime",
        "oosp_entropic",
        "lambda_prime_closed_form",
        "alpha",
        "oosp_cvar",
    ]);
    for f in cfg.factors.values("factors")? {
        let (mu, sigma2) = match cfg.sweep {
            Sweep::Mu => (base.mu * f, base.sigma2),
            Sweep::Sigma => (base.mu, base.sigma2 * f * f),
        };
        let p = GaussianLabParams::new(mu, sigma2, base.n_obs, base.lambda)?;
        let e = optimal_aversion(&p, AversionKind::Entropic)?;
        let c = optimal_aversion(&p, AversionKind::Cvar)?;
        t.push(vec![
            num(f),
            num(mu),
            num(sigma2),
            num(e.aversion),
            num(e.oosp),
            num(optimal_lambda_prime(&p)),
            num(c.aversion),
            num(c.oosp),
        ]);
    }
    out.csv("optimal_aversion.csv", &t)?;
    out.plot("optimal_lambda_prime.svg", "Optimal entropic aversion", &t, "factor", &["lambda_prime", "lambda_prime_closed_form"], true)?;
    out.plot("optimal_alpha.svg", "Optimal CVaR level", &t, "factor", &["alpha"], true)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeName {
    Gaussian,
    Bootstrap,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VarianceName {
    Fixed,
    Estimated,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BootstrapCompareConfig {
    pub lab: LabConfig,
    pub scheme: SchemeName,
    /// Law of the estimated variance under the gaussian scheme.
    pub variance: VarianceName,
    pub datasets: usize,
    pub models: usize,
    /// Outcomes per subsample; defaults to the lab's sample size.
    pub n: Option<usize>,
    pub lambda_prime: GridSpec,
    pub alpha: GridSpec,
    pub parallel: bool,
}

impl Default for BootstrapCompareConfig {
    fn default() -> Self {
        Self {
            lab: LabConfig::default(),
            scheme: SchemeName::Gaussian,
            variance: VarianceName::Fixed,
            datasets: 2000,
            models: 2000,
            n: None,
            lambda_prime: GridSpec::new(1e-1, 1e4, 16, Scale::Log),
            alpha: GridSpec::new(0.05, 1.0, 20, Scale::Linear),
            parallel: true,
        }
    }
}

pub fn exec_from(parallel: bool) -> Execution {
    if parallel {
        Execution::Parallel
    } else {
        Execution::Sequential
    }
}

pub fn bootstrap_compare(cfg: &mut BootstrapCompareConfig, out: &mut Output, seed: u64) -> Result<(), CliError> {
    let p = cfg.lab.params()?;
    let n = *cfg.n.get_or_insert(p.n_obs);
    let scheme = match (cfg.scheme, cfg.variance) {
        (SchemeName::Bootstrap, _) => SubsampleScheme::Bootstrap,
        (SchemeName::Gaussian, VarianceName::Fixed) => SubsampleScheme::Gaussian(VarianceMode::Fixed),
        (SchemeName::Gaussian, VarianceName::Estimated) => SubsampleScheme::Gaussian(VarianceMode::Estimated),
    };
    let mut t = Table::new(&["kind", "aversion", "analytic", "mc", "std_error", "z"]);
    let mut worst: f64 = 0.0;
    for (kind, name, grid) in [
        (AversionKind::Entropic, "entropic", cfg.lambda_prime.values("lambda_prime")?),
        (AversionKind::Cvar, "cvar", cfg.alpha.values("alpha")?),
    ] {
        let mc = subsample_oosp(&p, kind, &grid, cfg.datasets, cfg.models, n, scheme, seed, exec_from(cfg.parallel))?;
        for (g, est) in grid.iter().zip(&mc) {
            let analytic = match kind {
                AversionKind::Entropic => oosp_ua_entropic(&p, *g)?,
                AversionKind::Cvar => oosp_ua_cvar(&p, *g)?,
            };
            let z = if est.std_error > 0.0 { (est.value - analytic) / est.std_error } else { 0.0 };
            worst = worst.max(z.abs());
            t.push(vec![name.into(), num(*g), num(analytic), num(est.value), num(est.std_error), num(z)]);
        }
    }
    log::info!("largest |analytic - mc| in standard errors: {worst:.2}");
    out.csv("bootstrap_compare.csv", &t)?;
    for (name, kind, log_x) in [("bootstrap_entropic.svg", "entropic", true), ("bootstrap_cvar.svg", "cvar", false)] {
        let rows: Vec<&Vec<String>> = t.rows.iter().filter(|r| r[0] == kind).collect();
        let col = |j: usize| rows.iter().map(|r| r[j].parse().unwrap_or(f64::NAN)).collect::<Vec<f64>>();
        out.plot_series(
            name,
            &format!("Analytic and subsampled OOSP ({kind})"),
            "aversion",
            &col(1),
            &[("analytic".into(), col(2)), ("monte carlo".into(), col(3))],
            log_x,
        )?;
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VarAdjustConfig {
    pub lab: LabConfig,
    /// `τ²` in units of `σ²/N`.
    pub factors: GridSpec,
}

impl Default for VarAdjustConfig {
    fn default() -> Self {
        Self {
            lab: LabConfig::default(),
            factors: GridSpec::new(0.0, 20.0, 81, Scale::Linear),
        }
    }
}

pub fn var_adjust(cfg: &mut VarAdjustConfig, out: &mut Output) -> Result<(), CliError> {
    let p = cfg.lab.params()?;
    let unit = p.sigma2 / p.n_obs as f64;
    let (plugin, mixture) = (oosp_plugin(&p), oosp_mixture(&p));
    let mut t = Table::new(&["factor", "tau2", "oosp", "plugin", "mixture"]);
    for f in cfg.factors.values("factors")? {
        if f < 0.0 {
            return Err(CliError::Config("factors: must be nonnegative".into()));
        }
        let tau2 = f * unit;
        t.push(vec![num(f), num(tau2), num(oosp_var_adjusted(&p, tau2)?), num(plugin), num(mixture)]);
    }
    out.csv("var_adjust.csv", &t)?;
    out.plot("var_adjust.svg", "OOSP with a variance adjustment", &t, "factor", &["oosp", "plugin", "mixture"], false)
}
