//! CVaR stochastic gradient ascent over a distribution of models.
//!
//! Each step samples `m` models, keeps the `k` lowest objective values
//! together with their gradients in a [`WorstSet`], and moves the parameters
//! along the mean retained gradient. With `E[k] = α·m` the mean retained
//! gradient is a stochastic (super-)gradient of the lower-tail mean
//! `CVaR_α` of the model-wise objective, so the iteration maximizes the
//! uncertainty-aware objective. Objectives are utilities: to minimize a loss,
//! return its negative.
//!
//! Gradients are computed lazily, only when a model enters the retained set,
//! so at most `k` gradients are alive at any time.
//!
//! Every random draw is keyed by `(seed, step, model index)`. The parallel
//! path evaluates objectives concurrently, merges per-chunk worst sets, then
//! computes the `k` retained gradients; it yields bit-identical iterates to
//! the sequential path.

use std::cmp::Ordering;
use std::io::Write;

use log::warn;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::mathkit::Rng;

const TAG_K: u64 = 0x6b;
const TAG_MODEL: u64 = 0x6d;

/// An objective `J(φ, model)` to be maximized, with its gradient in `φ`.
///
/// Both methods must be deterministic in `(params, model)`.
pub trait DifferentiableProblem: Sync {
    type Model: Send;

    fn dim(&self) -> usize;

    fn sample_model(&self, rng: &mut Rng) -> Self::Model;

    fn evaluate(&self, params: &[f64], model: &Self::Model) -> f64;

    fn gradient(&self, params: &[f64], model: &Self::Model) -> Vec<f64>;

    /// Both at once, used when every model is retained. Overrides must
    /// agree bitwise with `evaluate` and `gradient`.
    fn value_and_gradient(&self, params: &[f64], model: &Self::Model) -> (f64, Vec<f64>) {
        (self.evaluate(params, model), self.gradient(params, model))
    }
}

/// Analytic gradient next to central finite differences.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientCheck {
    pub analytic: Vec<f64>,
    pub numeric: Vec<f64>,
}

impl GradientCheck {
    /// Largest `|analytic - numeric| / max(|analytic|, |numeric|, floor)`.
    pub fn max_rel_error(&self, floor: f64) -> f64 {
        self.analytic
            .iter()
            .zip(&self.numeric)
            .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(floor))
            .fold(0.0, f64::max)
    }
}

/// Compares [`DifferentiableProblem::gradient`] with central differences of
/// step `h` on the given coordinates (all coordinates if `coords` is empty).
pub fn check_gradient<P: DifferentiableProblem>(
    problem: &P,
    params: &[f64],
    model: &P::Model,
    h: f64,
    coords: &[usize],
) -> GradientCheck {
    let full = problem.gradient(params, model);
    let coords: Vec<usize> = if coords.is_empty() {
        (0..params.len()).collect()
    } else {
        coords.to_vec()
    };
    let mut p = params.to_vec();
    let mut numeric = Vec::with_capacity(coords.len());
    for &c in &coords {
        let orig = p[c];
        p[c] = orig + h;
        let up = problem.evaluate(&p, model);
        p[c] = orig - h;
        let down = problem.evaluate(&p, model);
        p[c] = orig;
        numeric.push((up - down) / (2.0 * h));
    }
    GradientCheck {
        analytic: coords.iter().map(|&c| full[c]).collect(),
        numeric,
    }
}

/// Retained `(value, model index)` pair with its gradient, if computed.
#[derive(Clone, Debug, PartialEq)]
pub struct Retained {
    pub value: f64,
    pub index: usize,
    pub gradient: Option<Vec<f64>>,
}

fn key_cmp(a: (f64, usize), b: (f64, usize)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

/// The `k` smallest objective values seen so far.
///
/// Ordering is by value, then by model index, so among equal values the
/// earlier model is kept.
#[derive(Clone, Debug)]
pub struct WorstSet {
    capacity: usize,
    entries: Vec<Retained>,
    live_gradients: usize,
    peak_gradients: usize,
}

impl WorstSet {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "WorstSet capacity must be positive");
        Self {
            capacity,
            entries: Vec::with_capacity(capacity),
            live_gradients: 0,
            peak_gradients: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[Retained] {
        &self.entries
    }

    /// Most gradients held at once.
    pub fn peak_gradients(&self) -> usize {
        self.peak_gradients
    }

    fn max_pos(&self) -> usize {
        let mut best = 0;
        for i in 1..self.entries.len() {
            let a = (self.entries[i].value, self.entries[i].index);
            let b = (self.entries[best].value, self.entries[best].index);
            if key_cmp(a, b) == Ordering::Greater {
                best = i;
            }
        }
        best
    }

    /// Slot for a new entry, evicting the current maximum if full; `None` if
    /// the entry does not belong in the set.
    fn make_room(&mut self, value: f64, index: usize) -> Option<usize> {
        if self.entries.len() < self.capacity {
            self.entries.push(Retained {
                value,
                index,
                gradient: None,
            });
            return Some(self.entries.len() - 1);
        }
        let pos = self.max_pos();
        let max = &self.entries[pos];
        if key_cmp((value, index), (max.value, max.index)) != Ordering::Less {
            return None;
        }
        if self.entries[pos].gradient.take().is_some() {
            self.live_gradients -= 1;
        }
        self.entries[pos].value = value;
        self.entries[pos].index = index;
        Some(pos)
    }

    /// Offers a value, computing its gradient only if it is retained.
    /// Returns whether it was retained.
    pub fn offer(&mut self, value: f64, index: usize, gradient: impl FnOnce() -> Vec<f64>) -> bool {
        match self.make_room(value, index) {
            Some(pos) => {
                self.entries[pos].gradient = Some(gradient());
                self.live_gradients += 1;
                self.peak_gradients = self.peak_gradients.max(self.live_gradients);
                true
            }
            None => false,
        }
    }

    /// Offers a value without a gradient.
    pub fn offer_value(&mut self, value: f64, index: usize) -> bool {
        self.make_room(value, index).is_some()
    }

    /// Merges another gradient-free set into this one.
    pub fn merge(&mut self, other: WorstSet) {
        for e in other.entries {
            self.offer_value(e.value, e.index);
        }
    }

    /// Entries ordered by model index.
    pub fn into_index_order(mut self) -> Vec<Retained> {
        self.entries.sort_by_key(|e| e.index);
        self.entries
    }
}

/// Which tail fraction `k/m` targets.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum TailConvention {
    /// `E[k] = α·m`: `α = 1` is plain mini-batch ascent, small `α` the
    /// worst case.
    #[default]
    Lower,
    /// `E[k] = (1 - α)·m`.
    KeptFraction,
}

/// A drawn retained-set size.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct KDraw {
    pub k: usize,
    /// The raw draw fell outside `[1, m]`.
    pub clamped: bool,
}

/// `k = ⌊f·m⌋ + Bernoulli(frac(f·m))` with `f = α` (or `1 - α`), clamped to
/// `[1, m]`.
pub fn draw_k(m: usize, alpha: f64, tail: TailConvention, rng: &mut Rng) -> Result<KDraw> {
    if m == 0 {
        return Err(Error::invalid("m", "need at least one model per step"));
    }
    crate::risk::check_alpha(alpha)?;
    let f = match tail {
        TailConvention::Lower => alpha,
        TailConvention::KeptFraction => 1.0 - alpha,
    };
    let target = f * m as f64;
    let base = target.floor();
    let frac = target - base;
    let mut k = base as usize;
    if frac > 0.0 && rng.uniform() < frac {
        k += 1;
    }
    let clamped = k < 1 || k > m;
    Ok(KDraw {
        k: k.clamp(1, m),
        clamped,
    })
}

/// Step-size schedule.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StepRule {
    Constant { eta: f64 },
    /// `η_t = η₀/√t`.
    InvSqrt { eta0: f64 },
    /// `η_t = B/(ρ√t)` with projection onto the ball of radius `B`; `ρ`
    /// bounds the gradient norm.
    Theorem { radius: f64, lipschitz: f64 },
}

impl StepRule {
    pub fn step_size(&self, t: usize) -> f64 {
        let st = (t as f64).sqrt();
        match *self {
            StepRule::Constant { eta } => eta,
            StepRule::InvSqrt { eta0 } => eta0 / st,
            StepRule::Theorem { radius, lipschitz } => radius / (lipschitz * st),
        }
    }

    pub fn projection_radius(&self) -> Option<f64> {
        match *self {
            StepRule::Theorem { radius, .. } => Some(radius),
            _ => None,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            StepRule::Constant { eta } => eta > 0.0 && eta.is_finite(),
            StepRule::InvSqrt { eta0 } => eta0 > 0.0 && eta0.is_finite(),
            StepRule::Theorem { radius, lipschitz } => {
                radius > 0.0 && lipschitz > 0.0 && radius.is_finite() && lipschitz.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid("step_rule", "step-size constants must be positive and finite"))
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CvarSgdConfig {
    /// Models sampled per step.
    pub m: usize,
    pub alpha: f64,
    pub steps: usize,
    pub rule: StepRule,
    pub seed: u64,
    pub tail: TailConvention,
    pub exec: Execution,
    /// Iterates before this step are left out of the average.
    pub average_from: usize,
}

impl CvarSgdConfig {
    pub fn new(m: usize, alpha: f64, steps: usize, rule: StepRule, seed: u64) -> Self {
        Self {
            m,
            alpha,
            steps,
            rule,
            seed,
            tail: TailConvention::default(),
            exec: Execution::default(),
            average_from: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::invalid("m", "need at least one model per step"));
        }
        crate::risk::check_alpha(self.alpha)?;
        if self.steps == 0 {
            return Err(Error::invalid("steps", "need at least one step"));
        }
        if self.average_from == 0 || self.average_from > self.steps {
            return Err(Error::invalid("average_from", "must lie in 1..=steps"));
        }
        self.rule.validate()?;
        let expected_k = match self.tail {
            TailConvention::Lower => self.alpha * self.m as f64,
            TailConvention::KeptFraction => (1.0 - self.alpha) * self.m as f64,
        };
        if expected_k < 1.0 {
            warn!("expected retained count {expected_k:.3} < 1: k is clamped to 1 (worst-case regime)");
        }
        Ok(())
    }
}

/// What one step did.
#[derive(Clone, Debug, PartialEq)]
pub struct StepDiagnostics {
    pub step: usize,
    pub k: usize,
    pub k_clamped: bool,
    /// Retained model indices in ascending order.
    pub retained: Vec<usize>,
    pub retained_mean: f64,
    pub objective_mean: f64,
    pub objective_min: f64,
    pub objective_max: f64,
    /// Most gradients stored at once during the step.
    pub peak_gradients: usize,
    pub step_size: f64,
    /// Norm of the parameters after the update.
    pub param_norm: f64,
}

fn model_rng(seed: u64, t: usize, i: usize) -> Rng {
    Rng::keyed(seed, &[TAG_MODEL, t as u64, i as u64])
}

fn non_finite(what: &'static str, seed: u64, t: usize, i: usize) -> Error {
    Error::NonFinite {
        what,
        step: t,
        model: i,
        seed,
        stream: model_rng(seed, t, i).stream(),
    }
}

/// Mean retained gradient at `params` for step `t` (1-based), without
/// updating anything.
pub fn direction<P: DifferentiableProblem>(
    problem: &P,
    params: &[f64],
    config: &CvarSgdConfig,
    t: usize,
) -> Result<(Vec<f64>, StepDiagnostics)> {
    crate::error::check_dim(problem.dim(), params.len())?;
    let seed = config.seed;
    let kd = draw_k(config.m, config.alpha, config.tail, &mut Rng::keyed(seed, &[TAG_K, t as u64]))?;
    let k = kd.k;
    let (retained, peak, values) = match config.exec {
        Execution::Sequential => sequential_retain(problem, params, config, t, k)?,
        Execution::Parallel => parallel_retain(problem, params, config, t, k)?,
    };

    let dim = problem.dim();
    let mut dir = vec![0.0; dim];
    for r in &retained {
        let g = r.gradient.as_ref().expect("retained gradients are computed");
        if g.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: g.len(),
            });
        }
        if g.iter().any(|v| !v.is_finite()) {
            return Err(non_finite("gradient", seed, t, r.index));
        }
        for (d, gi) in dir.iter_mut().zip(g) {
            *d += gi;
        }
    }
    for d in &mut dir {
        *d /= k as f64;
    }
    let m = values.len() as f64;
    let diag = StepDiagnostics {
        step: t,
        k,
        k_clamped: kd.clamped,
        retained: retained.iter().map(|r| r.index).collect(),
        retained_mean: retained.iter().map(|r| r.value).sum::<f64>() / k as f64,
        objective_mean: values.iter().sum::<f64>() / m,
        objective_min: values.iter().copied().fold(f64::INFINITY, f64::min),
        objective_max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        peak_gradients: peak,
        step_size: config.rule.step_size(t),
        param_norm: norm(params),
    };
    Ok((dir, diag))
}

type Retention = (Vec<Retained>, usize, Vec<f64>);

/// One pass over the models, computing a gradient whenever a model enters
/// the set.
fn sequential_retain<P: DifferentiableProblem>(
    problem: &P,
    params: &[f64],
    config: &CvarSgdConfig,
    t: usize,
    k: usize,
) -> Result<Retention> {
    let mut set = WorstSet::new(k);
    let mut values = Vec::with_capacity(config.m);
    for i in 0..config.m {
        let model = problem.sample_model(&mut model_rng(config.seed, t, i));
        let (v, g) = if k == config.m {
            let (v, g) = problem.value_and_gradient(params, &model);
            (v, Some(g))
        } else {
            (problem.evaluate(params, &model), None)
        };
        if !v.is_finite() {
            return Err(non_finite("objective", config.seed, t, i));
        }
        values.push(v);
        set.offer(v, i, || g.unwrap_or_else(|| problem.gradient(params, &model)));
    }
    let peak = set.peak_gradients();
    Ok((set.into_index_order(), peak, values))
}

/// Objectives in parallel, per-chunk worst sets merged, then the `k`
/// retained gradients recomputed from their keyed model streams.
fn parallel_retain<P: DifferentiableProblem>(
    problem: &P,
    params: &[f64],
    config: &CvarSgdConfig,
    t: usize,
    k: usize,
) -> Result<Retention> {
    let m = config.m;
    let exec = config.exec;
    if k == m {
        let both = exec.map(m, |i| {
            let model = problem.sample_model(&mut model_rng(config.seed, t, i));
            problem.value_and_gradient(params, &model)
        });
        if let Some(i) = both.iter().position(|(v, _)| !v.is_finite()) {
            return Err(non_finite("objective", config.seed, t, i));
        }
        let values = both.iter().map(|(v, _)| *v).collect();
        let retained = both
            .into_iter()
            .enumerate()
            .map(|(index, (value, g))| Retained {
                value,
                index,
                gradient: Some(g),
            })
            .collect();
        return Ok((retained, m, values));
    }
    let values: Vec<f64> = exec.map(m, |i| {
        let model = problem.sample_model(&mut model_rng(config.seed, t, i));
        problem.evaluate(params, &model)
    });
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(non_finite("objective", config.seed, t, i));
    }
    let chunks = exec.workers().min(m / k).max(1);
    let per = m.div_ceil(chunks);
    let partial: Vec<WorstSet> = exec.map(chunks, |c| {
        let mut set = WorstSet::new(k);
        for i in c * per..((c + 1) * per).min(m) {
            set.offer_value(values[i], i);
        }
        set
    });
    let mut merged = WorstSet::new(k);
    for p in partial {
        merged.merge(p);
    }
    let mut retained = merged.into_index_order();
    let grads = exec.map(retained.len(), |j| {
        let i = retained[j].index;
        let model = problem.sample_model(&mut model_rng(config.seed, t, i));
        problem.gradient(params, &model)
    });
    for (r, g) in retained.iter_mut().zip(grads) {
        r.gradient = Some(g);
    }
    let peak = retained.len();
    Ok((retained, peak, values))
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn project(v: &mut [f64], radius: f64) {
    let n = norm(v);
    if n > radius {
        for x in v {
            *x *= radius / n;
        }
    }
}

/// One ascent step `φ ← φ + η_t·ĝ` (projected under the theorem rule).
pub fn step<P: DifferentiableProblem>(
    problem: &P,
    params: &[f64],
    config: &CvarSgdConfig,
    t: usize,
) -> Result<(Vec<f64>, StepDiagnostics)> {
    let (dir, mut diag) = direction(problem, params, config, t)?;
    let eta = config.rule.step_size(t);
    let mut next: Vec<f64> = params.iter().zip(&dir).map(|(p, d)| p + eta * d).collect();
    if let Some(r) = config.rule.projection_radius() {
        project(&mut next, r);
    }
    if next.iter().any(|v| !v.is_finite()) {
        return Err(non_finite("parameter", config.seed, t, 0));
    }
    diag.param_norm = norm(&next);
    Ok((next, diag))
}

/// One row of the optimization trace.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceRow {
    pub step: usize,
    pub k: usize,
    pub retained_mean: f64,
    pub step_size: f64,
    pub param_norm: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trace {
    pub rows: Vec<TraceRow>,
}

impl Trace {
    pub const HEADER: &'static str = "step,k,retained_mean,step_size,param_norm";

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{}", Self::HEADER)?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{:e},{:e},{:e}",
                r.step, r.k, r.retained_mean, r.step_size, r.param_norm
            )?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Optimized {
    /// Mean of the iterates `φ_s` for `s` in `average_from..=steps`.
    pub average: Vec<f64>,
    pub last: Vec<f64>,
    pub trace: Trace,
    /// Steps whose `k` draw was clamped.
    pub clamp_count: usize,
    /// Largest per-step gradient count.
    pub peak_gradients: usize,
}

/// Runs `config.steps` steps from `init`.
pub fn optimize<P: DifferentiableProblem>(problem: &P, config: &CvarSgdConfig, init: &[f64]) -> Result<Optimized> {
    optimize_with(problem, config, init, |_, _, _| {})
}

/// As [`optimize`], calling `observe(diagnostics, φ_t, running average)`
/// after every step.
pub fn optimize_with<P, F>(problem: &P, config: &CvarSgdConfig, init: &[f64], mut observe: F) -> Result<Optimized>
where
    P: DifferentiableProblem,
    F: FnMut(&StepDiagnostics, &[f64], &[f64]),
{
    config.validate()?;
    crate::error::check_dim(problem.dim(), init.len())?;
    let mut params = init.to_vec();
    if let Some(r) = config.rule.projection_radius() {
        project(&mut params, r);
    }
    let mut sum = vec![0.0; params.len()];
    let mut avg = params.clone();
    let mut trace = Trace::default();
    let mut clamp_count = 0;
    let mut peak = 0;
    for t in 1..=config.steps {
        let (next, diag) = step(problem, &params, config, t)?;
        params = next;
        if t >= config.average_from {
            let count = (t - config.average_from + 1) as f64;
            for ((s, a), p) in sum.iter_mut().zip(avg.iter_mut()).zip(&params) {
                *s += p;
                *a = *s / count;
            }
        }
        clamp_count += diag.k_clamped as usize;
        peak = peak.max(diag.peak_gradients);
        trace.rows.push(TraceRow {
            step: t,
            k: diag.k,
            retained_mean: diag.retained_mean,
            step_size: diag.step_size,
            param_norm: diag.param_norm,
        });
        observe(&diag, &params, &avg);
    }
    Ok(Optimized {
        average: avg,
        last: params,
        trace,
        clamp_count,
        peak_gradients: peak,
    })
}

/// Lower-tail mean `CVaR_α` of a finitely supported objective and its
/// super-gradient, with the boundary atom included fractionally:
/// `(1/α)·(Σ_{J_j below} p_j ∇J_j + (α - P(below))·∇J_boundary)`.
///
/// `atoms` are `(probability, value, gradient)`.
pub fn exact_cvar_and_gradient(atoms: &[(f64, f64, Vec<f64>)], alpha: f64) -> Result<(f64, Vec<f64>)> {
    crate::risk::check_alpha(alpha)?;
    if atoms.is_empty() {
        return Err(Error::EmptySample);
    }
    let dim = atoms[0].2.len();
    let mut order: Vec<usize> = (0..atoms.len()).collect();
    order.sort_by(|&a, &b| key_cmp((atoms[a].1, a), (atoms[b].1, b)));
    let mut taken = 0.0;
    let mut value = 0.0;
    let mut grad = vec![0.0; dim];
    for i in order {
        let (p, v, g) = &atoms[i];
        let w = p.min(alpha - taken);
        if w <= 0.0 {
            break;
        }
        taken += w;
        value += w * v;
        for (a, b) in grad.iter_mut().zip(g) {
            *a += w * b;
        }
    }
    for a in &mut grad {
        *a /= alpha;
    }
    Ok((value / alpha, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mathkit::Rng;

    /// `J(φ, b) = -c_b‖φ - b‖²` over finitely many `(p, c, b)` atoms.
    struct AtomQuadratic {
        atoms: Vec<(f64, f64, Vec<f64>)>,
    }

    impl DifferentiableProblem for AtomQuadratic {
        type Model = usize;
        fn dim(&self) -> usize {
            self.atoms[0].2.len()
        }
        fn sample_model(&self, rng: &mut Rng) -> usize {
            let u = rng.uniform();
            let mut acc = 0.0;
            for (i, a) in self.atoms.iter().enumerate() {
                acc += a.0;
                if u < acc {
                    return i;
                }
            }
            self.atoms.len() - 1
        }
        fn evaluate(&self, params: &[f64], &i: &usize) -> f64 {
            let (_, c, b) = &self.atoms[i];
            -c * params.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>()
        }
        fn gradient(&self, params: &[f64], &i: &usize) -> Vec<f64> {
            let (_, c, b) = &self.atoms[i];
            params.iter().zip(b).map(|(x, y)| -2.0 * c * (x - y)).collect()
        }
    }

    fn two_point() -> AtomQuadratic {
        AtomQuadratic {
            atoms: vec![(0.5, 1.0, vec![-1.0]), (0.5, 1.0, vec![1.0])],
        }
    }

    #[test]
    fn draw_k_examples() {
        let mut rng = Rng::new(1, 0);
        for _ in 0..100 {
            assert_eq!(draw_k(10, 1.0, TailConvention::Lower, &mut rng).unwrap().k, 10);
            assert_eq!(draw_k(10, 0.5, TailConvention::Lower, &mut rng).unwrap().k, 5);
        }
        let n = 100_000;
        let mut sum = 0.0;
        for _ in 0..n {
            let k = draw_k(10, 0.25, TailConvention::Lower, &mut rng).unwrap().k;
            assert!(k == 2 || k == 3);
            sum += k as f64;
        }
        // Bernoulli(0.5) standard error.
        let se = 0.5 / (n as f64).sqrt();
        assert!((sum / n as f64 - 2.5).abs() < 3.0 * se);
    }

    #[test]
    fn draw_k_clamps() {
        let mut rng = Rng::new(2, 0);
        let d = draw_k(10, 0.01, TailConvention::Lower, &mut rng).unwrap();
        assert_eq!(d.k, 1);
        assert!(d.clamped);
        let d = draw_k(10, 1.0, TailConvention::KeptFraction, &mut rng).unwrap();
        assert_eq!((d.k, d.clamped), (1, true));
        assert_eq!(draw_k(10, 0.3, TailConvention::KeptFraction, &mut rng).unwrap().k, 7);
    }

    #[test]
    fn worst_set_keeps_smallest() {
        let vals = [5.0, 1.0, 4.0, 1.0, 3.0, 9.0, 0.5];
        let mut set = WorstSet::new(3);
        for (i, v) in vals.iter().enumerate() {
            set.offer(*v, i, || vec![*v]);
            assert!(set.len() <= 3);
        }
        let kept: Vec<usize> = set.clone().into_index_order().iter().map(|r| r.index).collect();
        assert_eq!(kept, vec![1, 3, 6]);
        assert_eq!(set.peak_gradients(), 3);
    }

    #[test]
    fn worst_set_ties_prefer_earlier() {
        let mut set = WorstSet::new(2);
        for i in 0..5 {
            set.offer_value(1.0, i);
        }
        let kept: Vec<usize> = set.into_index_order().iter().map(|r| r.index).collect();
        assert_eq!(kept, vec![0, 1]);
    }

    fn permutations(n: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in permutations(n - 1) {
            for pos in 0..=p.len() {
                let mut q = p.clone();
                q.insert(pos, n - 1);
                out.push(q);
            }
        }
        out
    }

    #[test]
    fn worst_set_permutation_invariant() {
        for m in 1..=8usize {
            let vals: Vec<f64> = (0..m).map(|i| ((i * 5) % 4) as f64).collect();
            let perms = permutations(m);
            let step = (perms.len() / 500).max(1);
            for k in 1..=m {
                let mut reference: Option<Vec<f64>> = None;
                for perm in perms.iter().step_by(step) {
                    let mut set = WorstSet::new(k);
                    for &i in perm {
                        set.offer(vals[i], i, || vec![vals[i]]);
                    }
                    assert_eq!(set.peak_gradients(), k);
                    let mut kept: Vec<f64> = set.entries().iter().map(|e| e.value).collect();
                    kept.sort_by(f64::total_cmp);
                    match &reference {
                        None => reference = Some(kept),
                        Some(r) => assert_eq!(&kept, r),
                    }
                }
                let mut sorted = vals.clone();
                sorted.sort_by(f64::total_cmp);
                assert_eq!(reference.unwrap(), sorted[..k].to_vec());
            }
        }
    }

    #[test]
    fn exact_cvar_boundary_atom() {
        let atoms = vec![
            (0.2, 1.0, vec![1.0]),
            (0.5, 2.0, vec![2.0]),
            (0.3, 3.0, vec![3.0]),
        ];
        let (v, g) = exact_cvar_and_gradient(&atoms, 0.3).unwrap();
        assert!((v - (0.2 + 0.2) / 0.3).abs() < 1e-15);
        assert!((g[0] - (0.2 + 0.2) / 0.3).abs() < 1e-15);
        let (v, _) = exact_cvar_and_gradient(&atoms, 1.0).unwrap();
        assert!((v - 2.1).abs() < 1e-15);
    }

    #[test]
    fn single_model_is_plain_sgd() {
        let p = two_point();
        let cfg = CvarSgdConfig::new(1, 0.3, 5, StepRule::Constant { eta: 0.1 }, 4);
        let (next, diag) = step(&p, &[0.5], &cfg, 1).unwrap();
        assert_eq!(diag.k, 1);
        let model = p.sample_model(&mut model_rng(4, 1, 0));
        let g = p.gradient(&[0.5], &model);
        assert_eq!(next[0], 0.5 + 0.1 * g[0]);
    }

    #[test]
    fn alpha_one_equals_mean_gradient_sgd() {
        let p = AtomQuadratic {
            atoms: vec![
                (0.3, 1.0, vec![0.0, 1.0]),
                (0.3, 2.0, vec![1.0, -1.0]),
                (0.4, 0.5, vec![-2.0, 0.0]),
            ],
        };
        let cfg = CvarSgdConfig::new(7, 1.0, 30, StepRule::InvSqrt { eta0: 0.2 }, 77);
        let got = optimize(&p, &cfg, &[0.0, 0.0]).unwrap();
        // Plain mini-batch ascent on the same model streams.
        let mut params = vec![0.0, 0.0];
        let mut sum = vec![0.0, 0.0];
        for t in 1..=30 {
            let mut g = vec![0.0; 2];
            for i in 0..7 {
                let model = p.sample_model(&mut model_rng(77, t, i));
                for (a, b) in g.iter_mut().zip(p.gradient(&params, &model)) {
                    *a += b;
                }
            }
            let eta = 0.2 / (t as f64).sqrt();
            for (x, gi) in params.iter_mut().zip(&g) {
                *x += eta * (gi / 7.0);
            }
            for (s, x) in sum.iter_mut().zip(&params) {
                *s += x;
            }
        }
        assert_eq!(got.last, params);
        let avg: Vec<f64> = sum.iter().map(|s| s / 30.0).collect();
        assert_eq!(got.average, avg);
    }

    #[test]
    fn sequential_and_parallel_agree_bitwise() {
        let p = AtomQuadratic {
            atoms: vec![
                (0.25, 1.0, vec![0.0, 1.0, 2.0]),
                (0.25, 2.0, vec![1.0, -1.0, 0.0]),
                (0.5, 0.5, vec![-2.0, 0.0, 1.0]),
            ],
        };
        let mut cfg = CvarSgdConfig::new(64, 0.3, 50, StepRule::Constant { eta: 0.05 }, 5);
        cfg.exec = Execution::Sequential;
        let a = optimize(&p, &cfg, &[0.1, 0.2, 0.3]).unwrap();
        cfg.exec = Execution::Parallel;
        let b = optimize(&p, &cfg, &[0.1, 0.2, 0.3]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn peak_gradients_equal_k_every_step() {
        let p = two_point();
        let cfg = CvarSgdConfig::new(40, 0.37, 200, StepRule::Constant { eta: 0.01 }, 8);
        optimize_with(&p, &cfg, &[0.3], |d, _, _| {
            assert_eq!(d.peak_gradients, d.k);
            assert!(d.k <= (0.37f64 * 40.0).ceil() as usize + 1);
            assert_eq!(d.retained.len(), d.k);
        })
        .unwrap();
    }

    #[test]
    fn symmetric_problem_optimum_is_zero() {
        let p = two_point();
        for alpha in [0.1, 0.5, 1.0] {
            let cfg = CvarSgdConfig::new(32, alpha, 4000, StepRule::Theorem { radius: 2.0, lipschitz: 6.0 }, 3);
            let out = optimize(&p, &cfg, &[1.5]).unwrap();
            assert!(out.average[0].abs() < 0.05, "alpha {alpha}: {:?}", out.average);
        }
    }

    #[test]
    fn projection_keeps_iterates_in_ball() {
        let p = AtomQuadratic {
            atoms: vec![(1.0, 1.0, vec![10.0, 10.0])],
        };
        let cfg = CvarSgdConfig::new(4, 0.5, 100, StepRule::Theorem { radius: 1.0, lipschitz: 1.0 }, 1);
        optimize_with(&p, &cfg, &[0.0, 0.0], |d, x, _| {
            assert!(norm(x) <= 1.0 + 1e-12);
            assert!(d.param_norm <= 1.0 + 1e-12);
        })
        .unwrap();
    }

    struct Exploding;
    impl DifferentiableProblem for Exploding {
        type Model = f64;
        fn dim(&self) -> usize {
            1
        }
        fn sample_model(&self, rng: &mut Rng) -> f64 {
            rng.uniform()
        }
        fn evaluate(&self, _: &[f64], m: &f64) -> f64 {
            if *m > 0.9 {
                f64::NAN
            } else {
                *m
            }
        }
        fn gradient(&self, _: &[f64], _: &f64) -> Vec<f64> {
            vec![0.0]
        }
    }

    #[test]
    fn non_finite_objective_reports_stream() {
        let cfg = CvarSgdConfig::new(50, 0.5, 3, StepRule::Constant { eta: 0.1 }, 12);
        match optimize(&Exploding, &cfg, &[0.0]) {
            Err(Error::NonFinite { what, step, model, seed, stream }) => {
                assert_eq!((what, step, seed), ("objective", 1, 12));
                assert_eq!(stream, model_rng(12, step, model).stream());
                let v = Exploding.sample_model(&mut model_rng(12, step, model));
                assert!(v > 0.9);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn gradient_check_on_quadratic() {
        let p = AtomQuadratic {
            atoms: vec![(1.0, 1.5, vec![0.3, -0.7])],
        };
        let c = check_gradient(&p, &[0.1, 0.2], &0, 1e-5, &[]);
        assert!(c.max_rel_error(1e-8) < 1e-8);
    }

    #[test]
    fn trace_csv_layout() {
        let p = two_point();
        let cfg = CvarSgdConfig::new(4, 0.5, 3, StepRule::Constant { eta: 0.1 }, 1);
        let out = optimize(&p, &cfg, &[0.0]).unwrap();
        let mut buf = Vec::new();
        out.trace.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], Trace::HEADER);
        assert_eq!(lines.len(), 4);
        assert!(lines[1].starts_with("1,2,"));
    }

    #[test]
    fn config_validation() {
        let mut cfg = CvarSgdConfig::new(4, 0.5, 3, StepRule::Constant { eta: 0.1 }, 1);
        assert!(cfg.validate().is_ok());
        cfg.alpha = 0.0;
        assert!(cfg.validate().is_err());
        cfg.alpha = 0.5;
        cfg.rule = StepRule::Constant { eta: -1.0 };
        assert!(cfg.validate().is_err());
        cfg.rule = StepRule::Constant { eta: 1.0 };
        cfg.average_from = 4;
        assert!(cfg.validate().is_err());
    }
}
