//! Deep hedging of a cliquet under Heston dynamics.
//!
//! A policy network maps the information at the start of each trading
//! period to a spot position held over the period. The training objective is
//! the standard deviation of the terminal profit and loss
//! `-C + Σ_t π(h_{t-1})·(S_t - S_{t-1})`, minimized under
//!
//! * the estimated (plug-in) Heston model,
//! * the lower-tail CVaR over small path bundles from that model, or
//! * a distribution of perturbed Heston models (the oracle mixture).
//!
//! Policies are compared on the perturbed test distribution.

use std::io::Write;

use rand_distr::Beta;

use crate::cvarsgd::{self, CvarSgdConfig, DifferentiableProblem, StepRule, TailConvention, Trace};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::gauss1d::{McEstimate, STEPS_PER_YEAR};
use crate::mathkit::Rng;
use crate::nnpolicy::{Architecture, Mlp};

/// Smoothing inside the square root of the P&L variance.
pub const STD_EPSILON: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HestonParams {
    pub kappa: f64,
    pub theta: f64,
    pub xi: f64,
    pub rho: f64,
    /// Annualized spot drift.
    pub drift: f64,
    pub v0: f64,
    pub s0: f64,
}

impl HestonParams {
    pub fn new(kappa: f64, theta: f64, xi: f64, rho: f64, drift: f64, v0: f64, s0: f64) -> Result<Self> {
        let p = Self {
            kappa,
            theta,
            xi,
            rho,
            drift,
            v0,
            s0,
        };
        p.validate()?;
        Ok(p)
    }

    /// The estimated model of the hedging study.
    pub fn table1() -> Self {
        Self {
            kappa: 1.0,
            theta: 0.03,
            xi: 0.2,
            rho: -0.8,
            drift: 0.0,
            v0: 0.03,
            s0: 100.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("kappa", self.kappa), ("theta", self.theta), ("xi", self.xi), ("v0", self.v0)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(name, "must be finite and non-negative"));
            }
        }
        if !(self.rho.abs() <= 1.0) {
            return Err(Error::invalid("rho", "must lie in [-1, 1]"));
        }
        if !self.drift.is_finite() {
            return Err(Error::invalid("drift", "must be finite"));
        }
        if !(self.s0 > 0.0 && self.s0.is_finite()) {
            return Err(Error::invalid("s0", "must be positive"));
        }
        Ok(())
    }

    /// `2κθ ≥ ξ²`.
    pub fn feller(&self) -> bool {
        2.0 * self.kappa * self.theta >= self.xi * self.xi
    }
}

/// Spot and variance paths, `count × (steps + 1)` row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Paths {
    pub count: usize,
    pub steps: usize,
    pub spot: Vec<f64>,
    pub variance: Vec<f64>,
}

impl Paths {
    pub fn spot_path(&self, i: usize) -> &[f64] {
        &self.spot[i * (self.steps + 1)..(i + 1) * (self.steps + 1)]
    }

    pub fn variance_path(&self, i: usize) -> &[f64] {
        &self.variance[i * (self.steps + 1)..(i + 1) * (self.steps + 1)]
    }
}

/// Full-truncation Euler for the variance, log-Euler for the spot, daily
/// grid `dt = 1/255`:
///
/// `v_{t+1} = v_t + κ(θ - v⁺)dt + ξ·sqrt(v⁺dt)·Z₂`,
/// `S_{t+1} = S_t·exp((drift - v⁺/2)dt + sqrt(v⁺dt)·Z₁)`,
/// with `corr(Z₁, Z₂) = ρ`.
pub fn simulate_heston(p: &HestonParams, steps: usize, count: usize, rng: &mut Rng) -> Result<Paths> {
    p.validate()?;
    if steps == 0 {
        return Err(Error::invalid("steps", "must be positive"));
    }
    let dt = 1.0 / STEPS_PER_YEAR;
    let rho_c = (1.0 - p.rho * p.rho).max(0.0).sqrt();
    let w = steps + 1;
    let mut spot = vec![0.0; count * w];
    let mut variance = vec![0.0; count * w];
    for i in 0..count {
        let s = &mut spot[i * w..(i + 1) * w];
        let v = &mut variance[i * w..(i + 1) * w];
        s[0] = p.s0;
        v[0] = p.v0;
        for t in 0..steps {
            let z1 = rng.normal();
            let z2 = p.rho * z1 + rho_c * rng.normal();
            let vp = v[t].max(0.0);
            let sd = (vp * dt).sqrt();
            s[t + 1] = s[t] * ((p.drift - 0.5 * vp) * dt + sd * z1).exp();
            v[t + 1] = v[t] + p.kappa * (p.theta - vp) * dt + p.xi * sd * z2;
        }
    }
    Ok(Paths {
        count,
        steps,
        spot,
        variance,
    })
}

/// `Σ_i max(S_{iR} - S_{(i-1)R}, 0)` over the reset dates.
pub fn cliquet_payoff(path: &[f64], reset: usize) -> Result<f64> {
    if reset == 0 || path.len() < 2 || (path.len() - 1) % reset != 0 {
        return Err(Error::invalid("path", "length - 1 must be a positive multiple of the reset period"));
    }
    Ok(path
        .iter()
        .step_by(reset)
        .collect::<Vec<_>>()
        .windows(2)
        .map(|w| (w[1] - w[0]).max(0.0))
        .sum())
}

/// Contract and policy shape.
#[derive(Clone, Debug, PartialEq)]
pub struct HedgeSpec {
    pub horizon: usize,
    pub reset: usize,
    pub arch: Architecture,
    /// Constant added to every P&L.
    pub cash: f64,
}

impl HedgeSpec {
    pub fn new(horizon: usize, reset: usize, arch: Architecture) -> Result<Self> {
        if reset == 0 || horizon == 0 || horizon % reset != 0 {
            return Err(Error::invalid("reset", "horizon must be a positive multiple of the reset period"));
        }
        if arch.input_dim() != 3 || arch.output_dim() != 1 {
            return Err(Error::invalid("arch", "policy maps 3 features to 1 position"));
        }
        Ok(Self {
            horizon,
            reset,
            arch,
            cash: 0.0,
        })
    }

    /// 120 steps, resets every 40, default policy network.
    pub fn cliquet_default() -> Self {
        Self::new(120, 40, Architecture::hedging_default()).expect("valid spec")
    }

    /// Features at time `t` for the position held over `(t, t+1]`:
    /// spot, last reset spot, both relative to `S_0`, and `t/T`.
    pub fn features(&self, path: &[f64], t: usize) -> [f64; 3] {
        let s0 = path[0];
        let last_reset = path[(t / self.reset) * self.reset];
        [path[t] / s0, last_reset / s0, t as f64 / self.horizon as f64]
    }

    fn check_paths(&self, paths: &Paths) -> Result<()> {
        if paths.steps != self.horizon {
            return Err(Error::DimensionMismatch {
                expected: self.horizon,
                actual: paths.steps,
            });
        }
        Ok(())
    }

    fn inputs(&self, paths: &Paths) -> Vec<f64> {
        let mut x = Vec::with_capacity(paths.count * self.horizon * 3);
        for i in 0..paths.count {
            let path = paths.spot_path(i);
            for t in 0..self.horizon {
                x.extend_from_slice(&self.features(path, t));
            }
        }
        x
    }

    /// Positions `π_{i,t}` over `(t, t+1]`, `count × horizon` row-major.
    pub fn positions(&self, paths: &Paths, params: &[f64]) -> Result<Vec<f64>> {
        self.check_paths(paths)?;
        Ok(self.arch.forward_batch(params, &self.inputs(paths))?.outputs().to_vec())
    }

    fn pnl_from_positions(&self, paths: &Paths, positions: &[f64]) -> Result<Vec<f64>> {
        (0..paths.count)
            .map(|i| {
                let s = paths.spot_path(i);
                let pos = &positions[i * self.horizon..(i + 1) * self.horizon];
                let gains: f64 = pos.iter().zip(s.windows(2)).map(|(p, w)| p * (w[1] - w[0])).sum();
                Ok(self.cash - cliquet_payoff(s, self.reset)? + gains)
            })
            .collect()
    }

    /// Terminal P&L per path.
    pub fn pnl(&self, paths: &Paths, params: &[f64]) -> Result<Vec<f64>> {
        let pos = self.positions(paths, params)?;
        self.pnl_from_positions(paths, &pos)
    }

    /// `sqrt(var + ε)` of the P&L with the population variance.
    pub fn pnl_std(&self, paths: &Paths, params: &[f64]) -> Result<f64> {
        Ok(smooth_std(&self.pnl(paths, params)?))
    }

    /// P&L standard deviation and its gradient in the policy parameters.
    pub fn pnl_std_gradient(&self, paths: &Paths, params: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.check_paths(paths)?;
        let trace = self.arch.forward_batch(params, &self.inputs(paths))?;
        let pnl = self.pnl_from_positions(paths, trace.outputs())?;
        let std = smooth_std(&pnl);
        let n = pnl.len() as f64;
        let mean = pnl.iter().sum::<f64>() / n;
        // d std / d π_{i,t} = (P_i - P̄)/(n·std) · ΔS_{i,t}.
        let mut adj = vec![0.0; paths.count * self.horizon];
        for i in 0..paths.count {
            let c = (pnl[i] - mean) / (n * std);
            let s = paths.spot_path(i);
            for t in 0..self.horizon {
                adj[i * self.horizon + t] = c * (s[t + 1] - s[t]);
            }
        }
        Ok((std, self.arch.backward(params, &trace, &adj)?))
    }
}

pub fn smooth_std(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (var + STD_EPSILON).sqrt()
}

/// Perturbed Heston models: `κ, θ, ξ, v₀` multiplied by independent
/// `exp(log_sd·Z)`, and `ρ = -1 + 0.5·Beta(a, b)` on `[-1, -0.5]`.
#[derive(Clone, Debug, PartialEq)]
pub struct TestDistribution {
    pub base: HestonParams,
    pub log_sd: f64,
    pub rho_beta: (f64, f64),
    /// Reject draws that violate the Feller condition.
    pub require_feller: bool,
}

impl TestDistribution {
    pub fn new(base: HestonParams) -> Self {
        Self {
            base,
            log_sd: 0.2,
            rho_beta: (4.0, 6.0),
            require_feller: false,
        }
    }

    /// The base model with probability one.
    pub fn dirac(base: HestonParams) -> Self {
        Self {
            base,
            log_sd: 0.0,
            rho_beta: (0.0, 0.0),
            require_feller: false,
        }
    }

    fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if !(self.log_sd >= 0.0 && self.log_sd.is_finite()) {
            return Err(Error::invalid("log_sd", "must be non-negative"));
        }
        let (a, b) = self.rho_beta;
        if !(a == 0.0 && b == 0.0) && !(a > 0.0 && b > 0.0) {
            return Err(Error::invalid("rho_beta", "shape parameters must be positive (or both 0 for a fixed rho)"));
        }
        Ok(())
    }

    /// One admissible draw and the number of rejected draws before it.
    pub fn draw(&self, rng: &mut Rng) -> Result<(HestonParams, usize)> {
        self.validate()?;
        let (a, b) = self.rho_beta;
        let beta = if a > 0.0 { Some(Beta::new(a, b).map_err(|e| Error::invalid("rho_beta", e.to_string()))?) } else { None };
        let mut rejections = 0;
        loop {
            let mut f = || (self.log_sd * rng.normal()).exp();
            let (fk, ft, fx, fv) = (f(), f(), f(), f());
            let rho = match &beta {
                Some(d) => -1.0 + 0.5 * rng.sample(d),
                None => self.base.rho,
            };
            let p = HestonParams {
                kappa: self.base.kappa * fk,
                theta: self.base.theta * ft,
                xi: self.base.xi * fx,
                v0: self.base.v0 * fv,
                rho,
                ..self.base
            };
            if p.validate().is_ok() && (!self.require_feller || p.feller()) {
                return Ok((p, rejections));
            }
            rejections += 1;
            if rejections > 10_000 {
                return Err(Error::invalid("test_distribution", "no admissible draw in 10000 attempts"));
            }
        }
    }
}

/// Where the training models come from.
#[derive(Clone, Debug, PartialEq)]
pub enum ScenarioSource {
    Fixed(HestonParams),
    Distribution(TestDistribution),
}

/// Hedging as a CVaR-SGD problem: each model is a bundle of paths and the
/// objective is minus the bundle's P&L standard deviation.
#[derive(Clone, Debug)]
pub struct HedgeProblem {
    pub spec: HedgeSpec,
    pub source: ScenarioSource,
    pub bundle: usize,
}

impl HedgeProblem {
    pub fn new(spec: HedgeSpec, source: ScenarioSource, bundle: usize) -> Result<Self> {
        if bundle < 2 {
            return Err(Error::invalid("bundle", "the standard deviation needs at least two paths"));
        }
        match &source {
            ScenarioSource::Fixed(p) => p.validate()?,
            ScenarioSource::Distribution(d) => d.validate()?,
        }
        Ok(Self { spec, source, bundle })
    }
}

impl DifferentiableProblem for HedgeProblem {
    type Model = Paths;

    fn dim(&self) -> usize {
        self.spec.arch.param_count()
    }

    fn sample_model(&self, rng: &mut Rng) -> Paths {
        let params = match &self.source {
            ScenarioSource::Fixed(p) => *p,
            ScenarioSource::Distribution(d) => d.draw(rng).expect("validated distribution").0,
        };
        simulate_heston(&params, self.spec.horizon, self.bundle, rng).expect("validated parameters")
    }

    fn evaluate(&self, params: &[f64], paths: &Paths) -> f64 {
        self.spec.pnl_std(paths, params).map_or(f64::NAN, |s| -s)
    }

    fn gradient(&self, params: &[f64], paths: &Paths) -> Vec<f64> {
        match self.spec.pnl_std_gradient(paths, params) {
            Ok((_, g)) => g.into_iter().map(|v| -v).collect(),
            Err(_) => vec![f64::NAN; self.dim()],
        }
    }

    fn value_and_gradient(&self, params: &[f64], paths: &Paths) -> (f64, Vec<f64>) {
        match self.spec.pnl_std_gradient(paths, params) {
            Ok((s, g)) => (-s, g.into_iter().map(|v| -v).collect()),
            Err(_) => (f64::NAN, vec![f64::NAN; self.dim()]),
        }
    }
}

/// Optimizer settings shared by the three training modes.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub steps: usize,
    pub rule: StepRule,
    pub seed: u64,
    /// Seed for the network initialization.
    pub init_seed: u64,
    pub exec: Execution,
    /// First iterate included in the returned average.
    pub average_from: usize,
}

impl TrainConfig {
    pub fn new(steps: usize, rule: StepRule, seed: u64) -> Self {
        Self {
            steps,
            rule,
            seed,
            init_seed: seed,
            exec: Execution::default(),
            average_from: steps / 2 + 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainedPolicy {
    /// Network at the averaged iterate.
    pub policy: Mlp,
    pub trace: Trace,
    pub clamp_count: usize,
    pub peak_gradients: usize,
}

/// Runs CVaR-SGD from the seeded initialization; `check_step` sees every
/// step's diagnostics.
pub fn train(
    problem: &HedgeProblem,
    m: usize,
    alpha: f64,
    cfg: &TrainConfig,
    mut check_step: impl FnMut(&cvarsgd::StepDiagnostics),
) -> Result<TrainedPolicy> {
    let sgd = CvarSgdConfig {
        m,
        alpha,
        steps: cfg.steps,
        rule: cfg.rule,
        seed: cfg.seed,
        tail: TailConvention::Lower,
        exec: cfg.exec,
        average_from: cfg.average_from.max(1),
    };
    let init = problem.spec.arch.init(cfg.init_seed);
    let out = cvarsgd::optimize_with(problem, &sgd, &init, |d, _, _| check_step(d))?;
    Ok(TrainedPolicy {
        policy: Mlp::new(problem.spec.arch.clone(), out.average)?,
        trace: out.trace,
        clamp_count: out.clamp_count,
        peak_gradients: out.peak_gradients,
    })
}

/// Minimizes the P&L standard deviation over one bundle of `batch` plug-in
/// paths per step.
pub fn train_plugin(spec: &HedgeSpec, params: &HestonParams, batch: usize, cfg: &TrainConfig) -> Result<TrainedPolicy> {
    let problem = HedgeProblem::new(spec.clone(), ScenarioSource::Fixed(*params), batch)?;
    train(&problem, 1, 1.0, cfg, |_| {})
}

/// Maximizes `CVaR_α` of minus the standard deviation over `m` bundles of `n`
/// plug-in paths per step.
pub fn train_ua(
    spec: &HedgeSpec,
    params: &HestonParams,
    n: usize,
    m: usize,
    alpha: f64,
    cfg: &TrainConfig,
) -> Result<TrainedPolicy> {
    let problem = HedgeProblem::new(spec.clone(), ScenarioSource::Fixed(*params), n)?;
    train(&problem, m, alpha, cfg, |_| {})
}

/// Minimizes the expected per-model standard deviation over `m` test
/// models per step, each with its own bundle of `n` paths.
pub fn train_oracle_mixture(
    spec: &HedgeSpec,
    dist: &TestDistribution,
    n: usize,
    m: usize,
    cfg: &TrainConfig,
) -> Result<TrainedPolicy> {
    let problem = HedgeProblem::new(spec.clone(), ScenarioSource::Distribution(dist.clone()), n)?;
    train(&problem, m, 1.0, cfg, |_| {})
}

/// Per-model objectives of a policy on the test distribution.
#[derive(Clone, Debug, PartialEq)]
pub struct TestEvaluation {
    pub models: Vec<HestonParams>,
    /// P&L standard deviation per model.
    pub objectives: Vec<f64>,
    pub mean: f64,
    /// Dispersion of the per-model objectives.
    pub std: f64,
    pub rejections: usize,
}

impl TestEvaluation {
    pub const HEADER: &'static str = "model,kappa,theta,xi,rho,v0,objective";

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{}", Self::HEADER)?;
        for (j, (p, o)) in self.models.iter().zip(&self.objectives).enumerate() {
            writeln!(w, "{j},{:e},{:e},{:e},{:e},{:e},{:e}", p.kappa, p.theta, p.xi, p.rho, p.v0, o)?;
        }
        Ok(())
    }
}

/// Mean and standard error of the per-model differences `a - b` of two
/// evaluations on the same scenarios.
pub fn paired_difference(a: &TestEvaluation, b: &TestEvaluation) -> Result<McEstimate> {
    if a.objectives.len() != b.objectives.len() || a.models != b.models {
        return Err(Error::invalid("evaluations", "must share the same test models"));
    }
    let d: Vec<f64> = a.objectives.iter().zip(&b.objectives).map(|(x, y)| x - y).collect();
    let n = d.len() as f64;
    let mean = d.iter().sum::<f64>() / n;
    let var = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(McEstimate {
        value: mean,
        std_error: (var / n).sqrt(),
    })
}

const TAG_TEST: u64 = 0x7e57;

/// Draws `models` parameter sets and scores the policy on `paths` fresh
/// paths under each. Model `j` uses the stream `(seed, j)`, so different
/// policies evaluated with the same seed see the same scenarios.
pub fn evaluate_on_test_distribution(
    spec: &HedgeSpec,
    policy: &[f64],
    dist: &TestDistribution,
    models: usize,
    paths: usize,
    seed: u64,
    exec: Execution,
) -> Result<TestEvaluation> {
    if models < 2 {
        return Err(Error::invalid("models", "need at least two test models"));
    }
    if paths < 2 {
        return Err(Error::invalid("paths", "need at least two paths per model"));
    }
    dist.validate()?;
    let results = exec.map(models, |j| -> Result<(HestonParams, usize, f64)> {
        let mut rng = Rng::keyed(seed, &[TAG_TEST, j as u64]);
        let (p, rej) = dist.draw(&mut rng)?;
        let sim = simulate_heston(&p, spec.horizon, paths, &mut rng)?;
        Ok((p, rej, spec.pnl_std(&sim, policy)?))
    });
    let mut out = TestEvaluation {
        models: Vec::with_capacity(models),
        objectives: Vec::with_capacity(models),
        mean: 0.0,
        std: 0.0,
        rejections: 0,
    };
    for r in results {
        let (p, rej, o) = r?;
        if !o.is_finite() {
            return Err(Error::NonFinite {
                what: "test objective",
                step: 0,
                model: out.models.len(),
                seed,
                stream: Rng::keyed(seed, &[TAG_TEST, out.models.len() as u64]).stream(),
            });
        }
        out.models.push(p);
        out.rejections += rej;
        out.objectives.push(o);
    }
    let n = models as f64;
    out.mean = out.objectives.iter().sum::<f64>() / n;
    out.std = (out.objectives.iter().map(|o| (o - out.mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    Ok(out)
}
