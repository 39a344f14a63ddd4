//! Estimation-error and uniform-deviation bounds for the two-set estimator,
//! with Monte-Carlo empirical Rademacher complexity for norm-bounded linear
//! classes.
//!
//! With Lipschitz constant L, loss bound C, confidence term
//! C_δ = √(ln(2/δ)/2) and χ = α/√n + α′/√n′, the uniform deviation of the
//! corrected estimator over the class is at most
//!
//! ```text
//! 2L·α·R̂ₙ + 2L·α′·R̂′ₙ′ + C·C_δ·χ
//! ```
//!
//! with probability ≥ 1−δ, and the estimation error of the empirical
//! minimizer is at most twice that.
//!
//! Rademacher complexity is computed only for {x ↦ wᵀx : ‖w‖₂ ≤ c_w}, where
//! the exact identity R̂ₙ = (c_w/n)·E_σ‖Σᵢ σᵢxᵢ‖₂ reduces estimation to
//! averaging over random sign vectors. Other model classes report nothing
//! rather than a guess.

use crate::data::Matrix;
use crate::error::{Error, Result};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Default Monte-Carlo rounds: keeps estimator noise an order of magnitude
/// below the 10% tolerances used in tests.
pub const DEFAULT_MC_ROUNDS: usize = 2000;

/// Everything the bound formulas consume.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BoundInputs {
    pub l_ell: f64,
    pub c_ell: f64,
    pub alpha: f64,
    pub alpha_prime: f64,
    pub n: usize,
    pub n_prime: usize,
    pub delta: f64,
    pub rad_n: f64,
    pub rad_n_prime: f64,
}

impl BoundInputs {
    fn validate(&self) -> Result<()> {
        let positive = [
            ("l_ell", self.l_ell),
            ("c_ell", self.c_ell),
            ("alpha", self.alpha),
            ("alpha_prime", self.alpha_prime),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Domain(format!(
                    "{name} = {v} must be positive and finite"
                )));
            }
        }
        for (name, v) in [("rad_n", self.rad_n), ("rad_n_prime", self.rad_n_prime)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Domain(format!("{name} = {v} must be nonnegative")));
            }
        }
        if self.n == 0 || self.n_prime == 0 {
            return Err(Error::Domain("sample sizes must be at least 1".into()));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::Domain(format!(
                "delta = {} outside (0, 1)",
                self.delta
            )));
        }
        Ok(())
    }
}

/// χ = α/√n + α′/√n′, the rate quantity of the deviation term.
pub fn chi(n: usize, n_prime: usize, alpha: f64, alpha_prime: f64) -> f64 {
    alpha / (n as f64).sqrt() + alpha_prime / (n_prime as f64).sqrt()
}

/// C_δ = √(ln(2/δ)/2).
pub fn c_delta(delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Domain(format!("delta = {delta} outside (0, 1)")));
    }
    Ok(((2.0 / delta).ln() / 2.0).sqrt())
}

/// Monte-Carlo estimate of an empirical Rademacher complexity.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RademacherEstimate {
    pub value: f64,
    pub std_error: f64,
    pub rounds: usize,
}

/// Empirical Rademacher complexity of the c_w-norm-bounded linear class on
/// the given sample: (c_w/n)·E_σ‖Σᵢ σᵢxᵢ‖₂, averaged over `mc_rounds` sign
/// vectors with per-round seeded streams and order-independent compensated
/// summation.
pub fn empirical_rademacher_linear(
    features: &Matrix,
    c_w: f64,
    mc_rounds: usize,
    seed: u64,
) -> Result<RademacherEstimate> {
    if features.is_empty() {
        return Err(Error::EmptySample(
            "rademacher needs at least one row".into(),
        ));
    }
    if !(c_w > 0.0 && c_w.is_finite()) {
        return Err(Error::Domain(format!("c_w = {c_w} must be positive")));
    }
    if mc_rounds == 0 {
        return Err(Error::Config("mc_rounds must be at least 1".into()));
    }
    let n = features.nrows();
    let d = features.ncols();

    let round_values: Vec<f64> = (0..mc_rounds)
        .into_par_iter()
        .map(|round| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(round as u64);
            let mut acc = vec![0.0f64; d];
            for row in features.iter_rows() {
                let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                for (a, v) in acc.iter_mut().zip(row) {
                    *a += sign * v;
                }
            }
            let norm = acc.iter().map(|v| v * v).sum::<f64>().sqrt();
            c_w * norm / n as f64
        })
        .collect();

    let mean = kahan_sum(round_values.iter().copied()) / mc_rounds as f64;
    let var = kahan_sum(round_values.iter().map(|v| (v - mean) * (v - mean))) / mc_rounds as f64;
    Ok(RademacherEstimate {
        value: mean,
        std_error: (var / mc_rounds as f64).sqrt(),
        rounds: mc_rounds,
    })
}

fn kahan_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let y = v - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    sum
}

/// The three terms of the bounds, also printed by the CLI.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BoundDecomposition {
    pub complexity_term: f64,
    pub complexity_term_prime: f64,
    pub deviation_term: f64,
    pub total: f64,
}

fn decomposed(inputs: &BoundInputs, scale: f64) -> Result<BoundDecomposition> {
    inputs.validate()?;
    let complexity_term = 2.0 * scale * inputs.l_ell * inputs.alpha * inputs.rad_n;
    let complexity_term_prime =
        2.0 * scale * inputs.l_ell * inputs.alpha_prime * inputs.rad_n_prime;
    let deviation_term = scale
        * inputs.c_ell
        * c_delta(inputs.delta)?
        * chi(inputs.n, inputs.n_prime, inputs.alpha, inputs.alpha_prime);
    Ok(BoundDecomposition {
        complexity_term,
        complexity_term_prime,
        deviation_term,
        total: complexity_term + complexity_term_prime + deviation_term,
    })
}

/// Uniform-deviation bound: sup over the class of |R̂(g) − R(g)| is at most
/// 2L·α·R̂ₙ + 2L·α′·R̂′ₙ′ + C·C_δ·χ with probability ≥ 1−δ.
pub fn uniform_deviation_bound(inputs: &BoundInputs) -> Result<f64> {
    decomposed(inputs, 1.0).map(|d| d.total)
}

/// Estimation-error bound: R(ĝ) − R(g*) ≤ 4L·α·R̂ₙ + 4L·α′·R̂′ₙ′ + 2C·C_δ·χ
/// with probability ≥ 1−δ.
pub fn estimation_error_bound(inputs: &BoundInputs) -> Result<f64> {
    decomposed(inputs, 2.0).map(|d| d.total)
}

/// Term-by-term decomposition of the estimation-error bound.
pub fn estimation_error_decomposition(inputs: &BoundInputs) -> Result<BoundDecomposition> {
    decomposed(inputs, 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::StandardNormal;

    #[test]
    fn chi_reference_values() {
        assert!((chi(100, 100, 1.0, 1.0) - 0.2).abs() < 1e-15);
        assert!((chi(400, 100, 0.92, 1.32) - 0.178).abs() < 1e-15);
        // Quadrupling n halves the first term.
        let base = chi(100, 100, 1.0, 0.0);
        assert!((chi(400, 100, 1.0, 0.0) - base / 2.0).abs() < 1e-15);
    }

    #[test]
    fn c_delta_reference_values() {
        let e2 = 2.0 / std::f64::consts::E.powi(2);
        assert!((c_delta(e2).unwrap() - 1.0).abs() < 1e-12);
        assert!((c_delta(0.05).unwrap() - 1.3581).abs() < 1e-4);
        assert!(c_delta(2.0).is_err());
        assert!(c_delta(0.0).is_err());
    }

    #[test]
    fn rademacher_zero_features() {
        let m = Matrix::zeros(10, 3);
        let r = empirical_rademacher_linear(&m, 1.0, 50, 0).unwrap();
        assert_eq!(r.value, 0.0);
        assert_eq!(r.std_error, 0.0);
    }

    #[test]
    fn rademacher_single_sample_is_exact() {
        let m = Matrix::from_rows(&[vec![3.0, 4.0]]).unwrap();
        let r = empirical_rademacher_linear(&m, 1.0, 200, 1).unwrap();
        assert!((r.value - 5.0).abs() < 1e-12);
        assert!(r.std_error < 1e-12);
    }

    #[test]
    fn rademacher_gaussian_sample_matches_scaling_law() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let n = 1000;
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                (0..2)
                    .map(|_| rng.sample::<f64, _>(StandardNormal))
                    .collect()
            })
            .collect();
        let m = Matrix::from_rows(&rows).unwrap();
        let r = empirical_rademacher_linear(&m, 1.0, DEFAULT_MC_ROUNDS, 5).unwrap();
        // Σσᵢxᵢ is approximately N(0, nI₂), whose norm has mean √(πn/2);
        // that puts the complexity at √(π/2)/√n ≈ 0.886·√(d/n) for d = 2.
        let expected = (std::f64::consts::PI / 2.0).sqrt() / (n as f64).sqrt();
        assert!(
            (r.value - expected).abs() <= 0.1 * expected,
            "estimate {} vs chi-mean prediction {expected}",
            r.value
        );
        let scale = (2.0f64 / n as f64).sqrt();
        assert!(
            (r.value - scale).abs() <= 0.15 * scale,
            "√(d/n) scale check"
        );
        // Jensen cross-bound: E‖Σσx‖ ≤ √(Σ‖x‖²).
        let jensen = rows
            .iter()
            .map(|r| r.iter().map(|v| v * v).sum::<f64>())
            .sum::<f64>()
            .sqrt()
            / n as f64;
        assert!(r.value <= jensen + 3.0 * r.std_error);
        assert!(r.value >= 0.75 * jensen);
    }

    #[test]
    fn rademacher_is_deterministic_given_seed() {
        let m = Matrix::from_rows(&[vec![1.0, -2.0], vec![0.5, 0.25], vec![-1.5, 1.0]]).unwrap();
        let a = empirical_rademacher_linear(&m, 2.0, 300, 9).unwrap();
        let b = empirical_rademacher_linear(&m, 2.0, 300, 9).unwrap();
        assert_eq!(a.value, b.value);
        assert_eq!(a.std_error, b.std_error);
    }

    #[test]
    fn rademacher_input_validation() {
        let m = Matrix::zeros(0, 2);
        assert!(empirical_rademacher_linear(&m, 1.0, 10, 0).is_err());
        let m = Matrix::zeros(2, 2);
        assert!(empirical_rademacher_linear(&m, 0.0, 10, 0).is_err());
        assert!(empirical_rademacher_linear(&m, 1.0, 0, 0).is_err());
    }

    fn base_inputs() -> BoundInputs {
        BoundInputs {
            l_ell: 1.0,
            c_ell: 1.0,
            alpha: 1.0,
            alpha_prime: 1.0,
            n: 100,
            n_prime: 100,
            delta: 2.0 / std::f64::consts::E.powi(2),
            rad_n: 0.0,
            rad_n_prime: 0.0,
        }
    }

    #[test]
    fn bound_deviation_only_reference_value() {
        let b = estimation_error_bound(&base_inputs()).unwrap();
        assert!((b - 0.4).abs() < 1e-12);
        // The uniform-deviation form is exactly half.
        let u = uniform_deviation_bound(&base_inputs()).unwrap();
        assert!((u - 0.2).abs() < 1e-12);
    }

    #[test]
    fn bound_is_linear_in_the_cost_weights() {
        let mut inputs = base_inputs();
        inputs.rad_n = 0.05;
        inputs.rad_n_prime = 0.03;
        let b1 = estimation_error_bound(&inputs).unwrap();
        inputs.alpha *= 2.0;
        inputs.alpha_prime *= 2.0;
        let b2 = estimation_error_bound(&inputs).unwrap();
        assert!((b2 - 2.0 * b1).abs() < 1e-12);
    }

    #[test]
    fn bound_monotonicity() {
        let mut inputs = base_inputs();
        inputs.rad_n = 0.05;
        inputs.rad_n_prime = 0.05;
        let base = estimation_error_bound(&inputs).unwrap();
        // Decreasing in n (complexity terms held fixed here).
        let mut more_data = inputs;
        more_data.n = 400;
        more_data.n_prime = 400;
        assert!(estimation_error_bound(&more_data).unwrap() < base);
        // Increasing in 1/δ.
        let mut tighter = inputs;
        tighter.delta = 0.001;
        assert!(estimation_error_bound(&tighter).unwrap() > base);
        // Increasing in α.
        let mut heavier = inputs;
        heavier.alpha *= 3.0;
        assert!(estimation_error_bound(&heavier).unwrap() > base);
    }

    #[test]
    fn bound_rejects_invalid_inputs() {
        let mut inputs = base_inputs();
        inputs.delta = 1.5;
        assert!(estimation_error_bound(&inputs).is_err());
        let mut inputs = base_inputs();
        inputs.l_ell = f64::INFINITY;
        assert!(estimation_error_bound(&inputs).is_err());
        let mut inputs = base_inputs();
        inputs.n = 0;
        assert!(estimation_error_bound(&inputs).is_err());
    }

    #[test]
    fn decomposition_terms_sum_to_total() {
        let mut inputs = base_inputs();
        inputs.rad_n = 0.04;
        inputs.rad_n_prime = 0.02;
        let d = estimation_error_decomposition(&inputs).unwrap();
        assert!(
            (d.complexity_term + d.complexity_term_prime + d.deviation_term - d.total).abs()
                < 1e-15
        );
        assert!((d.total - estimation_error_bound(&inputs).unwrap()).abs() < 1e-15);
    }
}
