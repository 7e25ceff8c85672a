//! Deep hedging of a cliquet under Heston parameter uncertainty.

use serde::{Deserialize, Serialize};

use uamark::cvarsgd::StepRule;
use uamark::hedgelab::{
    evaluate_on_test_distribution, paired_difference, train_oracle_mixture, train_plugin, train_ua, HedgeSpec,
    HestonParams, TestDistribution, TestEvaluation, TrainConfig, TrainedPolicy,
};
use uamark::nnpolicy::{Activation, Architecture, Mlp};

use crate::commands::gauss::exec_from;
use crate::error::CliError;
use crate::output::{num, Output, Table};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HestonConfig {
    pub kappa: f64,
    pub theta: f64,
    pub xi: f64,
    pub rho: f64,
    pub drift: f64,
    pub v0: f64,
    pub s0: f64,
}

impl Default for HestonConfig {
    fn default() -> Self {
        let p = HestonParams::table1();
        Self {
            kappa: p.kappa,
            theta: p.theta,
            xi: p.xi,
            rho: p.rho,
            drift: p.drift,
            v0: p.v0,
            s0: p.s0,
        }
    }
}

impl HestonConfig {
    fn params(&self) -> Result<HestonParams, CliError> {
        Ok(HestonParams::new(self.kappa, self.theta, self.xi, self.rho, self.drift, self.v0, self.s0)?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TestConfig {
    /// Log-scale dispersion of kappa, theta, xi and v0.
    pub log_sd: f64,
    /// Beta shapes for `(rho + 1)/0.5`.
    pub rho_beta: [f64; 2],
    pub require_feller: bool,
    pub models: usize,
    pub paths: usize,
}

impl Default for TestConfig {
    fn default() -> Self {
        Self {
            log_sd: 0.2,
            rho_beta: [4.0, 6.0],
            require_feller: false,
            models: 200,
            paths: 128,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HedgeConfig {
    /// Trading days to maturity.
    pub horizon: usize,
    /// Day of the strike reset.
    pub reset: usize,
    pub widths: Vec<usize>,
    pub activation: String,
    pub model: HestonConfig,
    pub test: TestConfig,
    pub steps: usize,
    pub eta: f64,
    /// Iterates at the end of training that are averaged into the policy.
    pub average_last: usize,
    /// Paths per step for plug-in training.
    pub batch: usize,
    /// Paths per model bundle for the uncertainty-aware and oracle runs.
    pub bundle: usize,
    /// Models per step; `models * bundle` should equal `batch`.
    pub models: usize,
    pub alphas: Vec<f64>,
    pub oracle: bool,
    pub parallel: bool,
}

impl Default for HedgeConfig {
    fn default() -> Self {
        Self {
            horizon: 120,
            reset: 40,
            widths: vec![3, 32, 32, 1],
            activation: Activation::Tanh.name().into(),
            model: HestonConfig::default(),
            test: TestConfig::default(),
            steps: 3000,
            eta: 0.01,
            average_last: 300,
            batch: 256,
            bundle: 16,
            models: 16,
            alphas: vec![0.1, 0.25, 0.5],
            oracle: true,
            parallel: true,
        }
    }
}

struct Run {
    name: String,
    alpha: Option<f64>,
    policy: Mlp,
    trained: Option<TrainedPolicy>,
}

pub fn hedge(cfg: &mut HedgeConfig, out: &mut Output, seed: u64) -> Result<(), CliError> {
    let activation = Activation::parse(&cfg.activation)
        .ok_or_else(|| CliError::Config(format!("activation: unknown activation `{}`", cfg.activation)))?;
    let arch = Architecture::new(cfg.widths.clone(), activation)?;
    let spec = HedgeSpec::new(cfg.horizon, cfg.reset, arch.clone())?;
    let base = cfg.model.params()?;
    let dist = TestDistribution {
        base,
        log_sd: cfg.test.log_sd,
        rho_beta: (cfg.test.rho_beta[0], cfg.test.rho_beta[1]),
        require_feller: cfg.test.require_feller,
    };
    if cfg.steps == 0 {
        return Err(CliError::Config("steps: must be positive".into()));
    }
    if cfg.models * cfg.bundle != cfg.batch {
        log::warn!(
            "models*bundle = {} differs from batch = {}; the runs do not share a path budget",
            cfg.models * cfg.bundle,
            cfg.batch
        );
    }
    let mut train_cfg = TrainConfig::new(cfg.steps, StepRule::Constant { eta: cfg.eta }, seed);
    train_cfg.exec = exec_from(cfg.parallel);
    if cfg.average_last == 0 || cfg.average_last > cfg.steps {
        return Err(CliError::Config("average_last: must be between 1 and steps".into()));
    }
    train_cfg.average_from = cfg.steps - cfg.average_last + 1;

    let mut runs = vec![Run {
        name: "zero".into(),
        alpha: None,
        policy: Mlp::zeros(arch.clone()),
        trained: None,
    }];
    let mut add = |name: String, alpha: Option<f64>, t: TrainedPolicy| {
        log::info!("trained {name}");
        runs.push(Run {
            name,
            alpha,
            policy: t.policy.clone(),
            trained: Some(t),
        });
    };
    add("plugin".into(), None, train_plugin(&spec, &base, cfg.batch, &train_cfg)?);
    for &alpha in &cfg.alphas {
        add(format!("ua_{alpha}"), Some(alpha), train_ua(&spec, &base, cfg.bundle, cfg.models, alpha, &train_cfg)?);
    }
    if cfg.oracle {
        add("oracle".into(), None, train_oracle_mixture(&spec, &dist, cfg.bundle, cfg.models, &train_cfg)?);
    }

    // Every policy is scored on the same test models and paths.
    let eval_seed = seed ^ 0x7e57;
    let evals: Vec<TestEvaluation> = runs
        .iter()
        .map(|r| {
            evaluate_on_test_distribution(
                &spec,
                &r.policy.params,
                &dist,
                cfg.test.models,
                cfg.test.paths,
                eval_seed,
                exec_from(cfg.parallel),
            )
        })
        .collect::<Result<_, _>>()?;
    let plugin = &evals[1];

    let mut summary = Table::new(&["policy", "alpha", "mean", "std", "diff_vs_plugin", "diff_std_error"]);
    let mut per_model = Table::new(&["policy", "alpha", "model", "kappa", "theta", "xi", "rho", "v0", "objective"]);
    let mut traces = Table::new(&["policy", "alpha", "step", "k", "retained_mean", "step_size", "param_norm"]);
    for (r, e) in runs.iter().zip(&evals) {
        let alpha = r.alpha.map_or(String::new(), num);
        let d = paired_difference(e, plugin)?;
        summary.push(vec![
            r.name.clone(),
            alpha.clone(),
            num(e.mean),
            num(e.std),
            num(d.value),
            num(d.std_error),
        ]);
        for (j, (p, o)) in e.models.iter().zip(&e.objectives).enumerate() {
            per_model.push(vec![
                r.name.clone(),
                alpha.clone(),
                j.to_string(),
                num(p.kappa),
                num(p.theta),
                num(p.xi),
                num(p.rho),
                num(p.v0),
                num(*o),
            ]);
        }
        if let Some(t) = &r.trained {
            for row in &t.trace.rows {
                traces.push(vec![
                    r.name.clone(),
                    alpha.clone(),
                    row.step.to_string(),
                    row.k.to_string(),
                    num(row.retained_mean),
                    num(row.step_size),
                    num(row.param_norm),
                ]);
            }
            let mut body = Vec::new();
            r.policy.write_csv(&mut body)?;
            out.text_with_provenance(&format!("policy_{}.csv", r.name), &body)?;
        }
    }
    out.csv("hedge_summary.csv", &summary)?;
    out.csv("hedge_models.csv", &per_model)?;
    out.csv("hedge_traces.csv", &traces)?;

    if out.svg_enabled() {
        let mut series = Vec::new();
        for r in runs.iter().filter(|r| r.trained.is_some()) {
            let rows: Vec<&Vec<String>> = traces.rows.iter().filter(|row| row[0] == r.name).collect();
            let ys: Vec<f64> = rows.iter().map(|row| -row[4].parse::<f64>().unwrap_or(f64::NAN)).collect();
            series.push((r.name.clone(), ys));
        }
        let xs: Vec<f64> = (1..=cfg.steps).map(|s| s as f64).collect();
        out.plot_series("hedge_traces.svg", "Mean retained P&L std during training", "step", &xs, &series, false)?;
    }
    Ok(())
}
