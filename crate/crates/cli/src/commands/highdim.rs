//! Analytic versus CVaR-SGD strategies in the multivariate lab.

use std::io::BufReader;

use serde::{Deserialize, Serialize};

use uamark::cvarsgd::{optimize_with, CvarSgdConfig, StepRule};
use uamark::gausshd::{distances, hd_shrinkage, hd_ua_cvar, synthetic_instance, HdDriftProblem, SyntheticInstance, SyntheticSpec};

use crate::commands::gauss::exec_from;
use crate::error::CliError;
use crate::output::{num, Output, Table};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HighdimConfig {
    pub dim: usize,
    pub n_obs: usize,
    pub lambda: f64,
    /// Instance CSV to load instead of generating one.
    pub instance: Option<String>,
    pub alphas: Vec<f64>,
    /// Models per step for the fixed-model variant.
    pub model_counts: Vec<usize>,
    /// Retained models per step for the fixed-memory variant, which draws
    /// `memory/α` models.
    pub memory: usize,
    pub steps: usize,
    /// Step size `η₀/√t`; `η₀` defaults to `10/(λ·tr Σ)`.
    pub eta0: Option<f64>,
    pub parallel: bool,
}

impl Default for HighdimConfig {
    fn default() -> Self {
        Self {
            dim: 50,
            n_obs: 30,
            lambda: 1.0,
            instance: None,
            alphas: vec![0.05, 0.1, 0.25, 0.5, 0.75, 1.0],
            model_counts: vec![50, 500],
            memory: 25,
            steps: 2000,
            eta0: None,
            parallel: true,
        }
    }
}

pub fn highdim(cfg: &mut HighdimConfig, out: &mut Output, seed: u64) -> Result<(), CliError> {
    let inst = match &cfg.instance {
        Some(path) => {
            let f = std::fs::File::open(path).map_err(|e| CliError::Config(format!("instance: {path}: {e}")))?;
            let inst = SyntheticInstance::read_csv(BufReader::new(f))?;
            cfg.dim = inst.params.dim();
            cfg.n_obs = inst.params.n_obs;
            cfg.lambda = inst.params.lambda;
            inst
        }
        None => {
            let mut spec = SyntheticSpec::new(cfg.dim, cfg.n_obs);
            spec.lambda = cfg.lambda;
            synthetic_instance(&spec, seed)?
        }
    };
    if cfg.steps < 2 {
        return Err(CliError::Config("steps: need at least 2".into()));
    }
    let mut body = Vec::new();
    inst.write_csv(&mut body)?;
    out.text_with_provenance("highdim_instance.csv", &body)?;

    let p = &inst.params;
    let trace: f64 = (0..p.dim()).map(|i| p.sigma.matrix()[(i, i)]).sum();
    let eta0 = *cfg.eta0.get_or_insert(10.0 / (p.lambda * trace));
    let problem = HdDriftProblem::new(p.clone());
    let mut runs: Vec<(&str, f64, usize)> = Vec::new();
    for &alpha in &cfg.alphas {
        for &m in &cfg.model_counts {
            runs.push(("fixed_models", alpha, m));
        }
        if alpha > 0.0 {
            runs.push(("fixed_memory", alpha, (cfg.memory as f64 / alpha).ceil() as usize));
        }
    }
    let mut t = Table::new(&[
        "variant",
        "alpha",
        "models",
        "expected_k",
        "abs_distance",
        "rel_distance",
        "shrinkage",
        "peak_gradients",
    ]);
    for (variant, alpha, m) in runs {
        let target = hd_ua_cvar(p, alpha)?;
        let mut sgd = CvarSgdConfig::new(m, alpha, cfg.steps, StepRule::InvSqrt { eta0 }, seed);
        sgd.exec = exec_from(cfg.parallel);
        sgd.average_from = cfg.steps / 2 + 1;
        let res = optimize_with(&problem, &sgd, &vec![0.0; p.dim()], |_, _, _| {})?;
        let (abs, rel) = distances(&res.average, &target);
        t.push(vec![
            variant.into(),
            num(alpha),
            m.to_string(),
            num(alpha * m as f64),
            num(abs),
            // Inside the zero-investment region only the absolute distance is meaningful.
            if target.iter().all(|v| *v == 0.0) { "NaN".into() } else { num(rel) },
            num(hd_shrinkage(p, alpha)?),
            res.peak_gradients.to_string(),
        ]);
    }
    out.csv("highdim.csv", &t)?;
    let alphas = t.column("alpha");
    let rel = t.column("rel_distance");
    let mut series = Vec::new();
    for variant in ["fixed_models", "fixed_memory"] {
        let label_rows: Vec<usize> = (0..t.rows.len()).filter(|&i| t.rows[i][0] == variant).collect();
        if variant == "fixed_models" {
            for &m in &cfg.model_counts {
                let rows: Vec<usize> = label_rows.iter().copied().filter(|&i| t.rows[i][2] == m.to_string()).collect();
                series.push((format!("m = {m}"), rows));
            }
        } else {
            series.push((format!("memory = {}", cfg.memory), label_rows));
        }
    }
    // One plot with a shared alpha axis: each series indexed by its own rows.
    for (name, rows) in &series {
        let xs: Vec<f64> = rows.iter().map(|&i| alphas[i]).collect();
        let ys: Vec<f64> = rows.iter().map(|&i| rel[i]).collect();
        out.plot_series(
            &format!("highdim_{}.svg", name.replace([' ', '='], "")),
            &format!("Relative distance to the analytic strategy ({name})"),
            "alpha",
            &xs,
            &[(name.clone(), ys)],
            false,
        )?;
    }
    Ok(())
}
