//! Risk and uncertainty measures.
//!
//! All measures are *utilities*: larger is better. In particular
//! [`cvar_lower_mean`] returns the mean of the worst α-tail (not its
//! negation), so `α = 1` gives the plain expectation and `α → 0` the worst
//! case. The loss-style CVaR of a position is `-cvar_lower_mean`.

use crate::error::{check_dim, Error, Result};
use crate::mathkit::{norm_pdf, norm_quantile};

const WEIGHT_TOL: f64 = 1e-12;

/// Finite real outcomes with optional probability weights.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    values: Vec<f64>,
    weights: Option<Vec<f64>>,
}

impl Sample {
    /// Uniformly weighted sample.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptySample);
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("values", "sample contains a non-finite value"));
        }
        Ok(Self {
            values,
            weights: None,
        })
    }

    /// Weighted sample. Weights must be nonnegative and sum to one within 1e-12.
    pub fn weighted(values: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        check_dim(values.len(), weights.len())?;
        let mut s = Self::new(values)?;
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::invalid("weights", "weights must be finite and nonnegative"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_TOL {
            return Err(Error::invalid("weights", format!("weights sum to {total}, not 1")));
        }
        s.weights = Some(weights);
        Ok(s)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn weights(&self) -> Option<&[f64]> {
        self.weights.as_deref()
    }

    fn weight(&self, i: usize) -> f64 {
        match &self.weights {
            Some(w) => w[i],
            None => 1.0 / self.values.len() as f64,
        }
    }

    pub fn mean(&self) -> f64 {
        match &self.weights {
            Some(w) => self.values.iter().zip(w).map(|(x, w)| x * w).sum(),
            None => self.values.iter().sum::<f64>() / self.values.len() as f64,
        }
    }

    /// Population (weight-consistent) variance.
    pub fn variance(&self) -> f64 {
        let m = self.mean();
        (0..self.len())
            .map(|i| {
                let d = self.values[i] - m;
                self.weight(i) * d * d
            })
            .sum::<f64>()
            .max(0.0)
    }

    /// Indices sorted by ascending value, ties kept in input order.
    fn sorted_indices(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.sort_by(|&a, &b| self.values[a].total_cmp(&self.values[b]));
        idx
    }
}

/// The aversion parameters of an uncertainty-aware agent.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RiskAversion {
    /// Inner risk aversion.
    pub lambda: f64,
    /// Outer (entropic) uncertainty aversion.
    pub lambda_prime: f64,
    /// Outer CVaR level; 1 is the expectation.
    pub alpha: f64,
}

impl RiskAversion {
    pub fn new(lambda: f64, lambda_prime: f64, alpha: f64) -> Result<Self> {
        check_positive("lambda", lambda)?;
        if !(lambda_prime >= 0.0) {
            return Err(Error::invalid("lambda_prime", "must be nonnegative"));
        }
        check_alpha(alpha)?;
        Ok(Self {
            lambda,
            lambda_prime,
            alpha,
        })
    }
}

pub(crate) fn check_positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("must be positive and finite, got {v}")))
    }
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha <= 1.0 {
        Ok(())
    } else {
        Err(Error::invalid("alpha", format!("must lie in (0, 1], got {alpha}")))
    }
}

/// Entropic utility `-(1/λ) log Σ w_i exp(-λ x_i)`.
pub fn entropic(sample: &Sample, lambda: f64) -> Result<f64> {
    check_positive("lambda", lambda)?;
    let lo = sample.values.iter().copied().fold(f64::INFINITY, f64::min);
    let s: f64 = (0..sample.len())
        .map(|i| sample.weight(i) * (-lambda * (sample.values[i] - lo)).exp())
        .sum();
    Ok(lo - s.ln() / lambda)
}

/// `mean - (λ/2)·variance` with the population variance.
pub fn mean_variance(sample: &Sample, lambda: f64) -> Result<f64> {
    if !(lambda >= 0.0) {
        return Err(Error::invalid("lambda", "must be nonnegative"));
    }
    Ok(sample.mean() - 0.5 * lambda * sample.variance())
}

/// Lower γ-quantile: the smallest value whose cumulative weight reaches γ.
///
/// This is the raw quantile of the outcome, not a loss, so it is usually
/// negative for a risky position.
pub fn value_at_risk(sample: &Sample, gamma: f64) -> Result<f64> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::invalid("gamma", format!("must lie in (0, 1), got {gamma}")));
    }
    let idx = sample.sorted_indices();
    let mut cum = 0.0;
    for &i in &idx {
        cum += sample.weight(i);
        if cum >= gamma - WEIGHT_TOL {
            return Ok(sample.values[i]);
        }
    }
    Ok(sample.values[*idx.last().expect("nonempty")])
}

/// Mean of the worst α-tail.
///
/// Uniform samples average the `⌈α·n⌉` smallest values. Weighted samples
/// accumulate the smallest values up to total weight α and include the
/// boundary atom fractionally.
pub fn cvar_lower_mean(sample: &Sample, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    match &sample.weights {
        None => Ok(tail_mean_uniform(&sample.values, alpha)),
        Some(w) => {
            let idx = sample.sorted_indices();
            let mut taken = 0.0;
            let mut acc = 0.0;
            for &i in &idx {
                let take = w[i].min(alpha - taken);
                if take <= 0.0 {
                    break;
                }
                acc += take * sample.values[i];
                taken += take;
            }
            Ok(acc / taken)
        }
    }
}

/// Number of atoms averaged by the uniform tail rule.
pub fn tail_count(n: usize, alpha: f64) -> usize {
    ((alpha * n as f64 - 1e-9).ceil() as usize).clamp(1, n)
}

pub(crate) fn tail_mean_uniform(values: &[f64], alpha: f64) -> f64 {
    let k = tail_count(values.len(), alpha);
    let mut v = values.to_vec();
    if k < v.len() {
        v.select_nth_unstable_by(k - 1, f64::total_cmp);
    }
    v[..k].iter().sum::<f64>() / k as f64
}

/// `φ(Φ⁻¹(α))/α`, the standard normal tail constant; zero at α = 1.
pub fn cvar_kappa(alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if alpha == 1.0 {
        return Ok(0.0);
    }
    Ok(norm_pdf(norm_quantile(alpha)?) / alpha)
}

/// Lower-tail mean of `N(mean, sd²)`: `mean - κ_α·sd`.
pub fn cvar_normal(mean: f64, sd: f64, alpha: f64) -> Result<f64> {
    if !(sd >= 0.0) {
        return Err(Error::invalid("sd", "must be nonnegative"));
    }
    Ok(mean - cvar_kappa(alpha)? * sd)
}

/// An outer or inner measure applied to a finite sample.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Measure {
    Expectation,
    Entropic { lambda: f64 },
    MeanVariance { lambda: f64 },
    Cvar { alpha: f64 },
    /// The minimum.
    Worst,
}

impl Measure {
    pub fn evaluate(&self, sample: &Sample) -> Result<f64> {
        match *self {
            Measure::Expectation => Ok(sample.mean()),
            Measure::Entropic { lambda } => entropic(sample, lambda),
            Measure::MeanVariance { lambda } => mean_variance(sample, lambda),
            Measure::Cvar { alpha } => cvar_lower_mean(sample, alpha),
            Measure::Worst => Ok(sample.values.iter().copied().fold(f64::INFINITY, f64::min)),
        }
    }

    /// Uniformly weighted convenience form.
    pub fn evaluate_values(&self, values: &[f64]) -> Result<f64> {
        self.evaluate(&Sample::new(values.to_vec())?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn s(v: &[f64]) -> Sample {
        Sample::new(v.to_vec()).unwrap()
    }

    #[test]
    fn entropic_examples() {
        assert!((entropic(&s(&[3.0; 5]), 0.7).unwrap() - 3.0).abs() < 1e-14);
        let want = -((1.0 + (-1f64).exp()) / 2.0).ln();
        assert!((entropic(&s(&[0.0, 1.0]), 1.0).unwrap() - want).abs() < 1e-15);
        assert!((want - 0.379_885).abs() < 1e-6);
    }

    #[test]
    fn entropic_survives_extreme_exponents() {
        let v = entropic(&s(&[-1e4, 0.0, 1e4]), 10.0).unwrap();
        assert!(v.is_finite());
        assert!((v - (-1e4 + 3f64.ln() / 10.0)).abs() < 1e-9);
    }

    #[test]
    fn mean_variance_examples() {
        assert_eq!(mean_variance(&s(&[2.5; 4]), 3.0).unwrap(), 2.5);
        assert_eq!(mean_variance(&s(&[-1.0, 1.0]), 2.0).unwrap(), -1.0);
        assert_eq!(mean_variance(&s(&[1.0, 2.0, 6.0]), 0.0).unwrap(), 3.0);
    }

    #[test]
    fn var_examples() {
        let x = s(&[4.0, 2.0, 3.0, 1.0]);
        assert_eq!(value_at_risk(&x, 0.5).unwrap(), 2.0);
        assert_eq!(value_at_risk(&x, 1e-9).unwrap(), 1.0);
        assert_eq!(value_at_risk(&s(&[7.0; 3]), 0.3).unwrap(), 7.0);
        assert!(value_at_risk(&x, 1.0).is_err());
    }

    #[test]
    fn cvar_examples() {
        let x = s(&[3.0, 1.0, 4.0, 2.0]);
        assert_eq!(cvar_lower_mean(&x, 0.5).unwrap(), 1.5);
        assert_eq!(cvar_lower_mean(&x, 1.0).unwrap(), 2.5);
        assert_eq!(cvar_lower_mean(&x, 1e-9).unwrap(), 1.0);
        assert!(cvar_lower_mean(&x, 0.0).is_err());
    }

    #[test]
    fn weighted_cvar_includes_boundary_atom_fractionally() {
        let x = Sample::weighted(vec![1.0, 2.0, 3.0], vec![0.2, 0.5, 0.3]).unwrap();
        // 0.2 of atom 1 and 0.1 of atom 2
        let want = (0.2 * 1.0 + 0.1 * 2.0) / 0.3;
        assert!((cvar_lower_mean(&x, 0.3).unwrap() - want).abs() < 1e-15);
        assert!((cvar_lower_mean(&x, 1.0).unwrap() - x.mean()).abs() < 1e-15);
        assert_eq!(value_at_risk(&x, 0.3).unwrap(), 2.0);
    }

    #[test]
    fn weighted_validation() {
        assert!(Sample::weighted(vec![1.0, 2.0], vec![0.5, 0.4]).is_err());
        assert!(Sample::weighted(vec![1.0, 2.0], vec![1.5, -0.5]).is_err());
        assert!(Sample::weighted(vec![1.0], vec![0.5, 0.5]).is_err());
        assert!(Sample::new(vec![]).is_err());
        assert!(Sample::new(vec![f64::NAN]).is_err());
    }

    #[test]
    fn cvar_normal_examples() {
        assert_eq!(cvar_normal(1.3, 0.0, 0.2).unwrap(), 1.3);
        assert!((cvar_normal(0.0, 1.0, 0.5).unwrap() + 0.797_884_560_802_865_4).abs() < 1e-12);
        assert!((cvar_normal(0.0, 1.0, 0.15).unwrap() + 1.554_391_8).abs() < 1e-6);
        assert_eq!(cvar_kappa(1.0).unwrap(), 0.0);
    }

    #[test]
    fn cvar_normal_matches_sampled_tail() {
        // Tail mean of the quantile grid approximates the integral.
        let n = 200_000;
        let vals: Vec<f64> = (0..n)
            .map(|i| 0.5 + 2.0 * norm_quantile((i as f64 + 0.5) / n as f64).unwrap())
            .collect();
        for alpha in [0.05, 0.2, 0.5, 0.9] {
            let emp = cvar_lower_mean(&s(&vals), alpha).unwrap();
            let exact = cvar_normal(0.5, 2.0, alpha).unwrap();
            assert!((emp - exact).abs() < 2e-3, "alpha {alpha}: {emp} vs {exact}");
        }
    }

    #[test]
    fn exhaustive_tail_means() {
        for n in 1..=12usize {
            let vals: Vec<f64> = (0..n).map(|i| ((i * 7919) % 13) as f64 - 6.0).collect();
            let mut sorted = vals.clone();
            sorted.sort_by(f64::total_cmp);
            for j in 1..=n {
                let alpha = j as f64 / n as f64;
                let brute = sorted[..j].iter().sum::<f64>() / j as f64;
                assert_eq!(cvar_lower_mean(&s(&vals), alpha).unwrap(), brute, "n={n} j={j}");
            }
        }
    }

    #[test]
    fn measure_dispatch() {
        let x = s(&[1.0, 5.0, 3.0]);
        assert_eq!(Measure::Worst.evaluate(&x).unwrap(), 1.0);
        assert_eq!(Measure::Expectation.evaluate(&x).unwrap(), 3.0);
        assert_eq!(Measure::Cvar { alpha: 0.3 }.evaluate(&x).unwrap(), 1.0);
    }

    fn sample_strategy() -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-50.0f64..50.0, 1..40)
    }

    proptest! {
        #[test]
        fn translation(v in sample_strategy(), c in -100.0f64..100.0,
                       lambda in 0.01f64..3.0, alpha in 0.01f64..1.0) {
            let x = s(&v);
            let y = s(&v.iter().map(|a| a + c).collect::<Vec<_>>());
            prop_assert!((entropic(&y, lambda)? - entropic(&x, lambda)? - c).abs() < 1e-10);
            prop_assert!((mean_variance(&y, lambda)? - mean_variance(&x, lambda)? - c).abs() < 1e-10);
            prop_assert!((cvar_lower_mean(&y, alpha)? - cvar_lower_mean(&x, alpha)? - c).abs() < 1e-10);
        }

        #[test]
        fn monotone(v in sample_strategy(), bumps in proptest::collection::vec(0.0f64..5.0, 40),
                    lambda in 0.01f64..3.0, alpha in 0.01f64..1.0, gamma in 0.01f64..0.99) {
            let x = s(&v);
            let y = s(&v.iter().zip(&bumps).map(|(a, b)| a + b).collect::<Vec<_>>());
            prop_assert!(entropic(&y, lambda)? >= entropic(&x, lambda)? - 1e-12);
            prop_assert!(cvar_lower_mean(&y, alpha)? >= cvar_lower_mean(&x, alpha)? - 1e-12);
            prop_assert!(value_at_risk(&y, gamma)? >= value_at_risk(&x, gamma)?);
        }

        #[test]
        fn bounded_by_mean(v in sample_strategy(), lambda in 0.01f64..3.0, alpha in 0.01f64..1.0) {
            let x = s(&v);
            let m = x.mean();
            prop_assert!(entropic(&x, lambda)? <= m + 1e-10);
            prop_assert!(cvar_lower_mean(&x, alpha)? <= m + 1e-10);
            prop_assert!((cvar_lower_mean(&x, 1.0)? - m).abs() < 1e-10);
            prop_assert!((entropic(&x, 1e-9)? - m).abs() < 1e-5);
        }
    }
}
