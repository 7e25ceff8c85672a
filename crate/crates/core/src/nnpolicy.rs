//! Small feedforward networks with reverse-mode gradients.
//!
//! Parameters live in one flat vector so that they can be handed to the
//! optimizer directly. Layer `l` stores its `out × in` weight matrix in
//! row-major order followed by its `out` biases. Hidden layers apply the
//! activation, the output layer is linear.

use std::io::{BufRead, Write};

use crate::error::{check_dim, Error, Result};
use crate::mathkit::Rng;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Activation {
    #[default]
    Tanh,
    Softplus,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            // log(1 + e^z) without overflow.
            Activation::Softplus => z.max(0.0) + (-z.abs()).exp().ln_1p(),
        }
    }

    /// Derivative given the pre-activation `z` and output `h`.
    fn derivative(self, z: f64, h: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - h * h,
            Activation::Softplus => 1.0 / (1.0 + (-z).exp()),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Softplus => "softplus",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "tanh" => Some(Activation::Tanh),
            "softplus" => Some(Activation::Softplus),
            _ => None,
        }
    }
}

/// Layer widths and activation; the network shape without parameters.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Architecture {
    widths: Vec<usize>,
    activation: Activation,
}

impl Architecture {
    /// `widths` runs from the input to the output width.
    pub fn new(widths: Vec<usize>, activation: Activation) -> Result<Self> {
        if widths.len() < 2 {
            return Err(Error::invalid("widths", "need at least input and output widths"));
        }
        if widths.contains(&0) {
            return Err(Error::invalid("widths", "layer widths must be positive"));
        }
        Ok(Self { widths, activation })
    }

    /// The default hedging policy shape, `3 → 32 → 32 → 1` with tanh.
    pub fn hedging_default() -> Self {
        Self::new(vec![3, 32, 32, 1], Activation::Tanh).expect("valid widths")
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.widths.last().unwrap()
    }

    pub fn layers(&self) -> usize {
        self.widths.len() - 1
    }

    /// `Σ (w_i·w_{i+1} + w_{i+1})`.
    pub fn param_count(&self) -> usize {
        self.widths.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    fn offsets(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.layers() + 1);
        let mut off = 0;
        out.push(0);
        for w in self.widths.windows(2) {
            off += w[0] * w[1] + w[1];
            out.push(off);
        }
        out
    }

    /// Uniform on `±1/√fan_in` for weights and hidden biases; the output bias
    /// starts at zero.
    pub fn init(&self, seed: u64) -> Vec<f64> {
        let mut rng = Rng::new(seed, 0x1417);
        let mut params = Vec::with_capacity(self.param_count());
        let last = self.layers() - 1;
        for (l, w) in self.widths.windows(2).enumerate() {
            let bound = 1.0 / (w[0] as f64).sqrt();
            for _ in 0..w[0] * w[1] {
                params.push(bound * (2.0 * rng.uniform() - 1.0));
            }
            for _ in 0..w[1] {
                params.push(if l == last { 0.0 } else { bound * (2.0 * rng.uniform() - 1.0) });
            }
        }
        params
    }

    /// Splits a flat vector into per-layer `(weights, biases)`.
    pub fn unflatten(&self, params: &[f64]) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
        check_dim(self.param_count(), params.len())?;
        let off = self.offsets();
        Ok(self
            .widths
            .windows(2)
            .enumerate()
            .map(|(l, w)| {
                let s = &params[off[l]..off[l + 1]];
                (s[..w[0] * w[1]].to_vec(), s[w[0] * w[1]..].to_vec())
            })
            .collect())
    }

    pub fn flatten(&self, layers: &[(Vec<f64>, Vec<f64>)]) -> Result<Vec<f64>> {
        check_dim(self.layers(), layers.len())?;
        let mut out = Vec::with_capacity(self.param_count());
        for ((w, b), dims) in layers.iter().zip(self.widths.windows(2)) {
            check_dim(dims[0] * dims[1], w.len())?;
            check_dim(dims[1], b.len())?;
            out.extend_from_slice(w);
            out.extend_from_slice(b);
        }
        Ok(out)
    }

    /// Output for one input.
    pub fn forward(&self, params: &[f64], input: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.param_count(), params.len())?;
        check_dim(self.input_dim(), input.len())?;
        let off = self.offsets();
        let mut h = input.to_vec();
        for (l, w) in self.widths.windows(2).enumerate() {
            let layer = &params[off[l]..off[l + 1]];
            let (weights, biases) = layer.split_at(w[0] * w[1]);
            let hidden = l + 1 < self.layers();
            h = (0..w[1])
                .map(|o| {
                    let row = &weights[o * w[0]..(o + 1) * w[0]];
                    let z = biases[o] + row.iter().zip(&h).map(|(a, b)| a * b).sum::<f64>();
                    if hidden {
                        self.activation.apply(z)
                    } else {
                        z
                    }
                })
                .collect();
        }
        Ok(h)
    }

    /// Forward pass over `inputs` (row-major, `batch × input_dim`), keeping
    /// what [`Architecture::backward`] needs.
    pub fn forward_batch(&self, params: &[f64], inputs: &[f64]) -> Result<ForwardTrace> {
        check_dim(self.param_count(), params.len())?;
        let d = self.input_dim();
        if inputs.len() % d != 0 {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: inputs.len() % d,
            });
        }
        let batch = inputs.len() / d;
        let off = self.offsets();
        // acts[l] holds the inputs to layer l; pre[l] the hidden pre-activations.
        let mut acts = vec![inputs.to_vec()];
        let mut pre = Vec::with_capacity(self.layers());
        for (l, w) in self.widths.windows(2).enumerate() {
            let layer = &params[off[l]..off[l + 1]];
            let (weights, biases) = layer.split_at(w[0] * w[1]);
            let mut z = vec![0.0; batch * w[1]];
            // z = X·Wᵀ, then the bias on every row.
            gemm(batch, w[0], w[1], &acts[l], (w[0], 1), weights, (1, w[0]), 0.0, &mut z);
            for row in z.chunks_exact_mut(w[1]) {
                for (v, b) in row.iter_mut().zip(biases) {
                    *v += b;
                }
            }
            if l + 1 < self.layers() {
                let h = z.iter().map(|&v| self.activation.apply(v)).collect();
                pre.push(z);
                acts.push(h);
            } else {
                acts.push(z);
            }
        }
        Ok(ForwardTrace { batch, acts, pre })
    }

    /// Gradient of `Σ_s adjoint_s · output_s` in the parameters, where
    /// `adjoints` is `batch × output_dim` row-major.
    pub fn backward(&self, params: &[f64], trace: &ForwardTrace, adjoints: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.param_count(), params.len())?;
        check_dim(trace.batch * self.output_dim(), adjoints.len())?;
        if adjoints.iter().any(|a| !a.is_finite()) {
            return Err(Error::invalid("adjoints", "must be finite"));
        }
        let off = self.offsets();
        let mut grad = vec![0.0; self.param_count()];
        let mut delta = adjoints.to_vec();
        let batch = trace.batch;
        for l in (0..self.layers()).rev() {
            let (fan_in, fan_out) = (self.widths[l], self.widths[l + 1]);
            let layer = &params[off[l]..off[l + 1]];
            let weights = &layer[..fan_in * fan_out];
            let g = &mut grad[off[l]..off[l + 1]];
            let (gw, gb) = g.split_at_mut(fan_in * fan_out);
            // dW += δᵀ·X, db += column sums of δ.
            gemm(fan_out, batch, fan_in, &delta, (1, fan_out), &trace.acts[l], (fan_in, 1), 1.0, gw);
            for row in delta.chunks_exact(fan_out) {
                for (g, d) in gb.iter_mut().zip(row) {
                    *g += d;
                }
            }
            if l == 0 {
                break;
            }
            // Propagate to the previous layer's pre-activations.
            let z = &trace.pre[l - 1];
            let h = &trace.acts[l];
            let mut next = vec![0.0; batch * fan_in];
            gemm(batch, fan_out, fan_in, &delta, (fan_out, 1), weights, (fan_in, 1), 0.0, &mut next);
            for (i, n) in next.iter_mut().enumerate() {
                *n *= self.activation.derivative(z[i], h[i]);
            }
            delta = next;
        }
        Ok(grad)
    }

    /// Bound on the output's Lipschitz constant in the input: the product of
    /// the weight matrices' Frobenius norms (both activations are
    /// 1-Lipschitz).
    pub fn lipschitz_bound(&self, params: &[f64]) -> Result<f64> {
        Ok(self
            .unflatten(params)?
            .iter()
            .map(|(w, _)| w.iter().map(|x| x * x).sum::<f64>().sqrt())
            .product())
    }
}

/// `c = a·b + beta·c` for an `m×k` matrix `a` and a `k×n` matrix `b` given
/// by `(row, column)` strides; `c` is `m×n` row-major.
#[allow(clippy::too_many_arguments)]
fn gemm(m: usize, k: usize, n: usize, a: &[f64], sa: (usize, usize), b: &[f64], sb: (usize, usize), beta: f64, c: &mut [f64]) {
    let last = |rows: usize, cols: usize, s: (usize, usize)| (rows - 1) * s.0 + (cols - 1) * s.1;
    if m == 0 || k == 0 || n == 0 {
        if k == 0 {
            c.iter_mut().for_each(|v| *v *= beta);
        }
        return;
    }
    assert!(last(m, k, sa) < a.len() && last(k, n, sb) < b.len() && m * n <= c.len());
    // SAFETY: the assertion keeps every strided access inside the slices.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            sa.0 as isize,
            sa.1 as isize,
            b.as_ptr(),
            sb.0 as isize,
            sb.1 as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Intermediate values of a batched forward pass.
#[derive(Clone, Debug)]
pub struct ForwardTrace {
    batch: usize,
    acts: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
}

impl ForwardTrace {
    pub fn batch(&self) -> usize {
        self.batch
    }

    /// Network outputs, `batch × output_dim` row-major.
    pub fn outputs(&self) -> &[f64] {
        self.acts.last().unwrap()
    }
}

/// An architecture with its parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    pub arch: Architecture,
    pub params: Vec<f64>,
}

impl Mlp {
    pub fn new(arch: Architecture, params: Vec<f64>) -> Result<Self> {
        check_dim(arch.param_count(), params.len())?;
        Ok(Self { arch, params })
    }

    pub fn init(arch: Architecture, seed: u64) -> Self {
        let params = arch.init(seed);
        Self { arch, params }
    }

    pub fn zeros(arch: Architecture) -> Self {
        let params = vec![0.0; arch.param_count()];
        Self { arch, params }
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.arch.forward(&self.params, input)
    }

    /// Header `# mlp widths=3-32-32-1 activation=tanh`, then `index,value`
    /// rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let widths: Vec<String> = self.arch.widths.iter().map(|v| v.to_string()).collect();
        writeln!(w, "# mlp widths={} activation={}", widths.join("-"), self.arch.activation.name())?;
        writeln!(w, "index,value")?;
        for (i, p) in self.params.iter().enumerate() {
            // Debug formatting round-trips f64 exactly.
            writeln!(w, "{i},{p:?}")?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut arch = None;
        let mut params = Vec::new();
        for (ln, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            let err = |message: String| Error::Parse { line: ln + 1, message };
            if let Some(meta) = line.strip_prefix("# mlp") {
                let mut widths = None;
                let mut act = Activation::default();
                for kv in meta.split_whitespace() {
                    match kv.split_once('=') {
                        Some(("widths", v)) => {
                            widths = Some(
                                v.split('-')
                                    .map(|x| x.parse::<usize>().map_err(|e| err(e.to_string())))
                                    .collect::<Result<Vec<_>>>()?,
                            )
                        }
                        Some(("activation", v)) => {
                            act = Activation::parse(v).ok_or_else(|| err(format!("unknown activation {v:?}")))?
                        }
                        _ => return Err(err(format!("unexpected header field {kv:?}"))),
                    }
                }
                let widths = widths.ok_or_else(|| err("missing widths".into()))?;
                arch = Some(Architecture::new(widths, act)?);
                continue;
            }
            if line.is_empty() || line.starts_with('#') || line == "index,value" {
                continue;
            }
            let (idx, val) = line.split_once(',').ok_or_else(|| err("expected index,value".into()))?;
            let idx: usize = idx.trim().parse().map_err(|e: std::num::ParseIntError| err(e.to_string()))?;
            if idx != params.len() {
                return Err(err(format!("expected index {}, found {idx}", params.len())));
            }
            params.push(val.trim().parse().map_err(|e: std::num::ParseFloatError| err(e.to_string()))?);
        }
        let arch = arch.ok_or(Error::Parse {
            line: 0,
            message: "missing architecture header".into(),
        })?;
        Mlp::new(arch, params)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mathkit::Rng;
    use proptest::prelude::*;

    #[test]
    fn param_count_formula() {
        let a = Architecture::new(vec![3, 32, 32, 1], Activation::Tanh).unwrap();
        assert_eq!(a.param_count(), 3 * 32 + 32 + 32 * 32 + 32 + 32 + 1);
        assert_eq!(a.init(1).len(), a.param_count());
    }

    #[test]
    fn zero_params_give_zero_output() {
        let m = Mlp::zeros(Architecture::hedging_default());
        assert_eq!(m.forward(&[1.0, 0.9, 0.5]).unwrap(), vec![0.0]);
    }

    #[test]
    fn linear_layer_is_affine() {
        let a = Architecture::new(vec![3, 1], Activation::Tanh).unwrap();
        let out = a.forward(&[1.0, -2.0, 0.5, 0.25], &[2.0, 1.0, 4.0]).unwrap();
        assert_eq!(out, vec![2.0 - 2.0 + 2.0 + 0.25]);
    }

    #[test]
    fn init_is_seeded_and_bounded() {
        let a = Architecture::hedging_default();
        let p = a.init(5);
        assert_eq!(p, a.init(5));
        assert_ne!(p, a.init(6));
        assert_eq!(*p.last().unwrap(), 0.0);
        assert!(p[..3 * 32].iter().all(|w| w.abs() <= 1.0 / 3f64.sqrt()));
        let m = Mlp::init(a, 5);
        assert_eq!(m.forward(&[1.0, 1.0, 0.1]).unwrap(), m.forward(&[1.0, 1.0, 0.1]).unwrap());
    }

    #[test]
    fn dimension_errors() {
        let a = Architecture::hedging_default();
        let p = a.init(1);
        assert!(a.forward(&p, &[1.0, 2.0]).is_err());
        assert!(a.forward(&p[1..], &[1.0, 2.0, 3.0]).is_err());
        let t = a.forward_batch(&p, &[1.0, 2.0, 3.0]).unwrap();
        assert!(a.backward(&p, &t, &[1.0, 1.0]).is_err());
        assert!(a.backward(&p, &t, &[f64::NAN]).is_err());
    }

    #[test]
    fn linear_quadratic_gradient_exact() {
        // Loss Σ_s (wᵀx_s + b - y_s)²/2 has gradient Σ_s r_s·(x_s, 1).
        let a = Architecture::new(vec![2, 1], Activation::Tanh).unwrap();
        let p = vec![0.5, -1.5, 0.25];
        let xs = [1.0, 2.0, -0.5, 0.75, 3.0, 1.0];
        let ys = [0.1, -0.2, 0.3];
        let t = a.forward_batch(&p, &xs).unwrap();
        let r: Vec<f64> = t.outputs().iter().zip(&ys).map(|(o, y)| o - y).collect();
        let g = a.backward(&p, &t, &r).unwrap();
        let mut expect = [0.0; 3];
        for s in 0..3 {
            expect[0] += r[s] * xs[2 * s];
            expect[1] += r[s] * xs[2 * s + 1];
            expect[2] += r[s];
        }
        for i in 0..3 {
            assert!((g[i] - expect[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_adjoint_zero_gradient() {
        let a = Architecture::hedging_default();
        let p = a.init(2);
        let t = a.forward_batch(&p, &[1.0, 1.0, 0.0, 0.9, 1.1, 0.5]).unwrap();
        assert!(a.backward(&p, &t, &[0.0, 0.0]).unwrap().iter().all(|g| *g == 0.0));
    }

    /// Random smooth loss `Σ_s c_s·o_s + o_s²/2` on a batch.
    fn check_fd(arch: &Architecture, seed: u64) -> f64 {
        let mut rng = Rng::new(seed, 3);
        let p: Vec<f64> = arch.init(seed).iter().map(|v| v + 0.1 * rng.normal()).collect();
        let batch = 4;
        let xs: Vec<f64> = (0..batch * arch.input_dim()).map(|_| rng.normal()).collect();
        let cs: Vec<f64> = (0..batch).map(|_| rng.normal()).collect();
        let loss = |q: &[f64]| {
            let t = arch.forward_batch(q, &xs).unwrap();
            t.outputs().iter().zip(&cs).map(|(o, c)| c * o + 0.5 * o * o).sum::<f64>()
        };
        let t = arch.forward_batch(&p, &xs).unwrap();
        let adj: Vec<f64> = t.outputs().iter().zip(&cs).map(|(o, c)| c + o).collect();
        let g = arch.backward(&p, &t, &adj).unwrap();
        let h = 1e-5;
        let mut worst: f64 = 0.0;
        for _ in 0..50 {
            let i = rng.below(p.len());
            let mut q = p.clone();
            q[i] += h;
            let up = loss(&q);
            q[i] -= 2.0 * h;
            let down = loss(&q);
            let fd = (up - down) / (2.0 * h);
            worst = worst.max((fd - g[i]).abs() / fd.abs().max(g[i].abs()).max(1e-6));
        }
        worst
    }

    #[test]
    fn gradient_matches_differences_across_shapes() {
        for act in [Activation::Tanh, Activation::Softplus] {
            for widths in [vec![3, 1], vec![3, 8, 1], vec![3, 32, 32, 1], vec![2, 5, 7, 4, 1]] {
                let arch = Architecture::new(widths.clone(), act).unwrap();
                let err = check_fd(&arch, widths.len() as u64);
                assert!(err < 1e-4, "{act:?} {widths:?}: {err}");
            }
        }
    }

    #[test]
    fn softplus_is_stable() {
        assert_eq!(Activation::Softplus.apply(1000.0), 1000.0);
        assert!(Activation::Softplus.apply(-1000.0) >= 0.0);
        assert!((Activation::Softplus.apply(0.0) - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn csv_roundtrip() {
        let m = Mlp::init(Architecture::new(vec![3, 4, 1], Activation::Softplus).unwrap(), 9);
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("# mlp widths=3-4-1 activation=softplus"));
        assert_eq!(Mlp::read_csv(buf.as_slice()).unwrap(), m);
        assert!(Mlp::read_csv(&b"index,value\n0,1.0\n"[..]).is_err());
    }

    proptest! {
        #[test]
        fn flatten_roundtrip(seed in 0u64..10_000, h in 1usize..6) {
            let a = Architecture::new(vec![3, h, h + 1, 1], Activation::Tanh).unwrap();
            let mut rng = Rng::new(seed, 0);
            let p: Vec<f64> = (0..a.param_count()).map(|_| rng.normal()).collect();
            prop_assert_eq!(a.flatten(&a.unflatten(&p).unwrap()).unwrap(), p);
        }

        #[test]
        fn output_change_bounded_by_lipschitz(seed in 0u64..10_000) {
            let a = Architecture::new(vec![3, 8, 8, 1], Activation::Tanh).unwrap();
            let mut rng = Rng::new(seed, 1);
            let p: Vec<f64> = (0..a.param_count()).map(|_| rng.normal()).collect();
            let x: Vec<f64> = (0..3).map(|_| rng.normal()).collect();
            let y: Vec<f64> = (0..3).map(|_| rng.normal()).collect();
            let dist = x.iter().zip(&y).map(|(u, v)| (u - v).powi(2)).sum::<f64>().sqrt();
            let diff = (a.forward(&p, &x).unwrap()[0] - a.forward(&p, &y).unwrap()[0]).abs();
            prop_assert!(diff <= a.lipschitz_bound(&p).unwrap() * dist * (1.0 + 1e-12));
        }
    }
}
