//! Backward-correction coefficients that make the classification risk
//! estimable from two unlabeled sets with different class priors.
//!
//! With test prior π and training priors θ > θ′, the risk
//! R(g) = π E₊[ℓ(g)] + (1−π) E₋[ℓ(−g)] can be rewritten as an expectation
//! over the two observable marginals using corrected losses
//! ℓ̄₊(z) = a·ℓ(z) + b·ℓ(−z) and ℓ̄₋(z) = c·ℓ(z) + d·ℓ(−z), where
//!
//! ```text
//! a =  (1−θ′)π/(θ−θ′)     b = −θ′(1−π)/(θ−θ′)
//! c =  θ(1−π)/(θ−θ′)      d = −(1−θ)π/(θ−θ′)
//! ```
//!
//! are the unique solution of the four-equation linear system
//!
//! ```text
//! aθ + dθ′ = π            bθ + cθ′ = 0
//! a(1−θ) + d(1−θ′) = 0    b(1−θ) + c(1−θ′) = 1−π.
//! ```
//!
//! For a symmetric loss (ℓ(z)+ℓ(−z)=1) the rewrite collapses to
//! cost-sensitive weights α = a−b, α′ = c−d and a constant offset.
//!
//! No such rewrite exists for a single unlabeled set:
//! [`single_set_witness`] produces the contradiction explicitly.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Tolerance for recognizing the PN/PU/SU special cases. Priors are
/// user-entered decimals; tighter would misfire.
const REDUCTION_TOL: f64 = 1e-9;

/// The three class priors (π, θ, θ′) that fully parameterize the problem.
///
/// The constructor enforces the canonical orientation θ > θ′ by swapping the
/// two training priors when necessary; `swapped()` reports whether the
/// caller's sets must be exchanged to match.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorTriple {
    pi: f64,
    theta: f64,
    theta_prime: f64,
    swapped: bool,
}

impl PriorTriple {
    pub fn new(pi: f64, theta: f64, theta_prime: f64) -> Result<Self> {
        if !pi.is_finite() || !theta.is_finite() || !theta_prime.is_finite() {
            return Err(Error::Domain("priors must be finite".into()));
        }
        if !(pi > 0.0 && pi < 1.0) {
            return Err(Error::SingleClass(format!(
                "test prior pi = {pi} leaves a single class"
            )));
        }
        if !(0.0..=1.0).contains(&theta) || !(0.0..=1.0).contains(&theta_prime) {
            return Err(Error::Domain(format!(
                "training priors ({theta}, {theta_prime}) outside [0, 1]"
            )));
        }
        if theta == theta_prime {
            return Err(Error::DegeneratePriors(format!(
                "theta = theta' = {theta}; the two marginals coincide"
            )));
        }
        let swapped = theta < theta_prime;
        let (theta, theta_prime) = if swapped {
            (theta_prime, theta)
        } else {
            (theta, theta_prime)
        };
        Ok(Self {
            pi,
            theta,
            theta_prime,
            swapped,
        })
    }

    pub fn pi(&self) -> f64 {
        self.pi
    }

    /// Prior of the first (higher-prior) training marginal after orientation.
    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Prior of the second (lower-prior) training marginal after orientation.
    pub fn theta_prime(&self) -> f64 {
        self.theta_prime
    }

    /// True when the constructor exchanged the two training priors; callers
    /// holding per-set data must exchange the sets accordingly.
    pub fn swapped(&self) -> bool {
        self.swapped
    }

    fn gap(&self) -> f64 {
        self.theta - self.theta_prime
    }
}

/// The (a, b, c, d) of the corrected losses ℓ̄₊ and ℓ̄₋.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrectionCoefficients {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl CorrectionCoefficients {
    /// Residuals of the four-equation linear system at the given priors.
    pub fn system_residuals(&self, priors: &PriorTriple) -> [f64; 4] {
        let (pi, th, tp) = (priors.pi, priors.theta, priors.theta_prime);
        [
            self.a * th + self.d * tp - pi,
            self.b * th + self.c * tp,
            self.a * (1.0 - th) + self.d * (1.0 - tp),
            self.b * (1.0 - th) + self.c * (1.0 - tp) - (1.0 - pi),
        ]
    }
}

/// Cost-sensitive weights of the simplified estimator for symmetric losses:
/// α = a − b, α′ = c − d, and the subtracted constant −(b + d).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostWeights {
    pub alpha: f64,
    pub alpha_prime: f64,
    pub offset: f64,
}

/// The constants forced by the two constant probe classifiers on a single
/// unlabeled set, and the training prior they would require.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InfeasibilityWitness {
    /// Forced by g ≡ −∞: a = π.
    pub a: f64,
    /// Forced by g ≡ +∞: b = 1 − π.
    pub b: f64,
    /// θ = π/(2π−1) demanded by the separating probe; `None` at π = ½.
    pub theta_required: Option<f64>,
}

impl InfeasibilityWitness {
    /// True when the required θ is a valid prior — never, which is the point.
    pub fn feasible(&self) -> bool {
        matches!(self.theta_required, Some(t) if (0.0..=1.0).contains(&t))
    }
}

/// Which known problem the prior triple reduces to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reduction {
    /// θ = 1, θ′ = 0: supervised positive-negative learning.
    Pn,
    /// θ = 1, θ′ = π: positive-unlabeled learning.
    Pu,
    /// {θ, θ′} = {π, π²/(2π²−2π+1)}: similar-unlabeled learning.
    Su,
    General,
}

/// Closed-form correction coefficients for the given priors.
pub fn correction_coefficients(priors: &PriorTriple) -> CorrectionCoefficients {
    let (pi, th, tp) = (priors.pi, priors.theta, priors.theta_prime);
    let gap = priors.gap();
    CorrectionCoefficients {
        a: (1.0 - tp) * pi / gap,
        b: -tp * (1.0 - pi) / gap,
        c: th * (1.0 - pi) / gap,
        d: -(1.0 - th) * pi / gap,
    }
}

/// Cost-sensitive weights of the simplified symmetric-loss estimator.
pub fn cost_weights(priors: &PriorTriple) -> CostWeights {
    let (pi, th, tp) = (priors.pi, priors.theta, priors.theta_prime);
    let gap = priors.gap();
    CostWeights {
        alpha: (tp + pi - 2.0 * tp * pi) / gap,
        alpha_prime: (th + pi - 2.0 * th * pi) / gap,
        offset: (tp * (1.0 - pi) + (1.0 - th) * pi) / gap,
    }
}

/// Classify the priors as one of the known special cases.
pub fn classify_reduction(priors: &PriorTriple) -> Reduction {
    let close = |x: f64, y: f64| (x - y).abs() <= REDUCTION_TOL;
    let (pi, th, tp) = (priors.pi, priors.theta, priors.theta_prime);
    if close(th, 1.0) && close(tp, 0.0) {
        return Reduction::Pn;
    }
    if close(th, 1.0) && close(tp, pi) {
        return Reduction::Pu;
    }
    // The SU pair is {π, π²/(2π²−2π+1)}; compare after sorting since the
    // canonical orientation may have swapped it.
    let partner = pi * pi / (2.0 * pi * pi - 2.0 * pi + 1.0);
    let (hi, lo) = if pi >= partner {
        (pi, partner)
    } else {
        (partner, pi)
    };
    if close(th, hi) && close(tp, lo) {
        return Reduction::Su;
    }
    Reduction::General
}

/// Run the single-set impossibility argument at test prior π.
///
/// The two constant probes pin a = π and b = 1−π, and the separating probe
/// then demands θ = π/(2π−1), which is undefined at π = ½ and lies outside
/// [0, 1] everywhere else. Applies to the zero-one loss and bounded losses
/// with ℓ(+∞) < ℓ(−∞); see [`crate::losses::supports_single_set_witness`].
pub fn single_set_witness(pi: f64) -> Result<InfeasibilityWitness> {
    if !(pi > 0.0 && pi < 1.0) {
        return Err(Error::SingleClass(format!(
            "pi = {pi}: just a single class, not binary classification"
        )));
    }
    let denom = 2.0 * pi - 1.0;
    let theta_required = if denom.abs() < 1e-12 {
        None
    } else {
        Some(pi / denom)
    };
    Ok(InfeasibilityWitness {
        a: pi,
        b: 1.0 - pi,
        theta_required,
    })
}

/// Backward-correction weights of the class-conditional-noise baseline,
/// which takes the higher-prior set as noisy positives (flip rate
/// ρ₊ = 1−θ) and the lower-prior set as noisy negatives (ρ₋ = θ′).
///
/// Unlike [`correction_coefficients`], these ignore π and the covariate
/// shift between the training and test marginals; the baseline exists to
/// show that this matters.
pub fn ccn_backward_coefficients(priors: &PriorTriple) -> Result<CorrectionCoefficients> {
    let (th, tp) = (priors.theta, priors.theta_prime);
    let rho_pos = 1.0 - th;
    let rho_neg = tp;
    let denom = 1.0 - rho_pos - rho_neg; // = θ − θ′
    if denom <= 0.0 {
        return Err(Error::DegeneratePriors(format!(
            "noise rates sum to {} ≥ 1",
            rho_pos + rho_neg
        )));
    }
    Ok(CorrectionCoefficients {
        a: (1.0 - rho_neg) / denom,
        b: -rho_pos / denom,
        c: (1.0 - rho_pos) / denom,
        d: -rho_neg / denom,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn triple(pi: f64, th: f64, tp: f64) -> PriorTriple {
        PriorTriple::new(pi, th, tp).unwrap()
    }

    #[test]
    fn constructor_swaps_to_canonical_orientation() {
        let p = triple(0.3, 0.4, 0.9);
        assert!(p.swapped());
        assert_eq!(p.theta(), 0.9);
        assert_eq!(p.theta_prime(), 0.4);
        assert!(!triple(0.3, 0.9, 0.4).swapped());
    }

    #[test]
    fn constructor_rejects_invalid_priors() {
        assert!(matches!(
            PriorTriple::new(0.0, 0.9, 0.4),
            Err(Error::SingleClass(_))
        ));
        assert!(matches!(
            PriorTriple::new(1.0, 0.9, 0.4),
            Err(Error::SingleClass(_))
        ));
        assert!(matches!(
            PriorTriple::new(0.3, 0.6, 0.6),
            Err(Error::DegeneratePriors(_))
        ));
        assert!(PriorTriple::new(0.3, 1.2, 0.4).is_err());
    }

    #[test]
    fn coefficients_match_hand_elimination() {
        // Direct elimination of the four-equation system at (0.3, 0.9, 0.4).
        let c = correction_coefficients(&triple(0.3, 0.9, 0.4));
        assert!((c.a - 0.36).abs() < 1e-12);
        assert!((c.b + 0.56).abs() < 1e-12);
        assert!((c.c - 1.26).abs() < 1e-12);
        assert!((c.d + 0.06).abs() < 1e-12);
        for r in c.system_residuals(&triple(0.3, 0.9, 0.4)) {
            assert!(r.abs() <= 1e-12);
        }
    }

    #[test]
    fn supervised_case_recovers_plain_weights() {
        for pi in [0.1, 0.3, 0.5, 0.9] {
            let c = correction_coefficients(&triple(pi, 1.0, 0.0));
            assert_eq!(c.a, pi);
            assert_eq!(c.b, 0.0);
            assert_eq!(c.c, 1.0 - pi);
            assert_eq!(c.d, 0.0);
        }
    }

    #[test]
    fn positive_unlabeled_case() {
        let pi = 0.3;
        let c = correction_coefficients(&triple(pi, 1.0, pi));
        assert!((c.a - pi).abs() < 1e-12);
        assert!((c.b + pi).abs() < 1e-12);
        assert!((c.c - 1.0).abs() < 1e-12);
        assert_eq!(c.d, 0.0);
    }

    #[test]
    fn random_triples_satisfy_the_linear_system() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10_000 {
            let pi = rng.random_range(0.01..0.99);
            let th: f64 = rng.random_range(0.0..=1.0);
            let tp: f64 = rng.random_range(0.0..=1.0);
            if (th - tp).abs() < 1e-3 {
                continue;
            }
            let p = triple(pi, th, tp);
            let c = correction_coefficients(&p);
            for r in c.system_residuals(&p) {
                assert!(r.abs() <= 1e-12, "residual {r} at ({pi}, {th}, {tp})");
            }
            // Sign pattern under canonical orientation.
            assert!(c.a > 0.0);
            assert!(c.c > 0.0);
            assert!(c.b <= 0.0);
            assert!(c.d <= 0.0);
        }
    }

    #[test]
    fn cost_weights_match_coefficient_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10_000 {
            let pi = rng.random_range(0.01..0.99);
            let th: f64 = rng.random_range(0.0..=1.0);
            let tp: f64 = rng.random_range(0.0..=1.0);
            if (th - tp).abs() < 1e-3 {
                continue;
            }
            let p = triple(pi, th, tp);
            let c = correction_coefficients(&p);
            let w = cost_weights(&p);
            assert!((w.alpha - (c.a - c.b)).abs() <= 1e-12);
            assert!((w.alpha_prime - (c.c - c.d)).abs() <= 1e-12);
            assert!((w.offset + (c.b + c.d)).abs() <= 1e-12);
        }
    }

    #[test]
    fn cost_weights_reference_values() {
        let w = cost_weights(&triple(0.3, 0.9, 0.4));
        assert!((w.alpha - 0.92).abs() < 1e-12);
        assert!((w.alpha_prime - 1.32).abs() < 1e-12);
        assert!((w.offset - 0.62).abs() < 1e-12);

        let w = cost_weights(&triple(0.5, 1.0, 0.0));
        assert!((w.alpha - 0.5).abs() < 1e-12);
        assert!((w.alpha_prime - 0.5).abs() < 1e-12);
        assert!(w.offset.abs() < 1e-12);

        let w = cost_weights(&triple(0.5, 0.9, 0.1));
        assert!((w.alpha - 0.625).abs() < 1e-12);
        assert!((w.alpha_prime - 0.625).abs() < 1e-12);
        assert!((w.offset - 0.125).abs() < 1e-12);
    }

    #[test]
    fn alpha_scales_inversely_with_the_prior_gap() {
        // α(θ−θ′) equals the affine numerator θ′+π−2θ′π identically.
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..1000 {
            let pi = rng.random_range(0.01..0.99);
            let th: f64 = rng.random_range(0.5..1.0);
            let tp: f64 = rng.random_range(0.0..0.49);
            let p = triple(pi, th, tp);
            let w = cost_weights(&p);
            let gap = th - tp;
            assert!((w.alpha * gap - (tp + pi - 2.0 * tp * pi)).abs() <= 1e-12);
            assert!((w.alpha_prime * gap - (th + pi - 2.0 * th * pi)).abs() <= 1e-12);
        }
    }

    #[test]
    fn reduction_classification() {
        assert_eq!(classify_reduction(&triple(0.3, 1.0, 0.0)), Reduction::Pn);
        assert_eq!(classify_reduction(&triple(0.3, 1.0, 0.3)), Reduction::Pu);
        assert_eq!(
            classify_reduction(&triple(0.3, 0.9, 0.4)),
            Reduction::General
        );

        // SU pair at π = 0.4: partner = 0.16/0.52, below π, no swap needed.
        let partner = 0.16 / 0.52;
        assert_eq!(
            classify_reduction(&triple(0.4, 0.4, partner)),
            Reduction::Su
        );
        // Same pair entered in the other order exercises the canonical swap.
        let p = triple(0.4, partner, 0.4);
        assert!(p.swapped());
        assert_eq!(classify_reduction(&p), Reduction::Su);

        // At π = 0.8 the partner exceeds π, so the swap happens upstream.
        let pi = 0.8;
        let partner = pi * pi / (2.0 * pi * pi - 2.0 * pi + 1.0);
        assert!(partner > pi);
        let p = triple(pi, pi, partner);
        assert!(p.swapped());
        assert_eq!(classify_reduction(&p), Reduction::Su);
    }

    #[test]
    fn pn_reduction_composes_with_coefficients() {
        let p = triple(0.25, 1.0, 0.0);
        assert_eq!(classify_reduction(&p), Reduction::Pn);
        let c = correction_coefficients(&p);
        assert_eq!((c.a, c.b, c.c, c.d), (0.25, 0.0, 0.75, 0.0));
    }

    #[test]
    fn witness_is_infeasible_on_the_whole_grid() {
        for i in 1..=99 {
            let pi = i as f64 / 100.0;
            let w = single_set_witness(pi).unwrap();
            assert_eq!(w.a, pi);
            assert_eq!(w.b, 1.0 - pi);
            assert!(!w.feasible(), "witness claims feasibility at pi={pi}");
            match w.theta_required {
                None => assert_eq!(pi, 0.5),
                Some(t) => assert!(!(0.0..=1.0).contains(&t)),
            }
        }
        assert_eq!(single_set_witness(0.25).unwrap().theta_required, Some(-0.5));
        assert_eq!(single_set_witness(0.75).unwrap().theta_required, Some(1.5));
        assert!(single_set_witness(0.0).is_err());
        assert!(single_set_witness(1.0).is_err());
    }

    #[test]
    fn ccn_weights_reference_values() {
        let c = ccn_backward_coefficients(&triple(0.5, 1.0, 0.0)).unwrap();
        assert_eq!((c.a, c.b, c.c, c.d), (1.0, 0.0, 1.0, 0.0));

        let c = ccn_backward_coefficients(&triple(0.3, 0.9, 0.4)).unwrap();
        assert!((c.a - 1.2).abs() < 1e-12);
        assert!((c.b + 0.2).abs() < 1e-12);
        assert!((c.c - 1.8).abs() < 1e-12);
        assert!((c.d + 0.8).abs() < 1e-12);

        let c = ccn_backward_coefficients(&triple(0.3, 0.6, 0.4)).unwrap();
        assert!((c.a - 3.0).abs() < 1e-12);
        assert!((c.b + 2.0).abs() < 1e-12);
    }

    #[test]
    fn ccn_correction_cancels_label_noise_in_expectation() {
        // For each clean label, the flip-rate-weighted average of the
        // corrected losses equals the clean loss. Checked pointwise on a
        // margin grid, then by Monte-Carlo over simulated flips.
        use crate::losses::{loss_value, LossKind, LossSpec};
        let loss = LossSpec::new(LossKind::Sigmoid);
        let p = triple(0.3, 0.9, 0.4);
        let c = ccn_backward_coefficients(&p).unwrap();
        let rho_pos = 1.0 - p.theta();
        let rho_neg = p.theta_prime();

        let corrected_pos =
            |z: f64| c.a * loss_value(&loss, z).unwrap() + c.b * loss_value(&loss, -z).unwrap();
        let corrected_neg =
            |z: f64| c.c * loss_value(&loss, -z).unwrap() + c.d * loss_value(&loss, z).unwrap();

        let mut z = -4.0;
        while z <= 4.0 {
            // Clean positive, score z: observed as noisy-pos w.p. 1−ρ₊.
            let avg = (1.0 - rho_pos) * corrected_pos(z) + rho_pos * corrected_neg(z);
            assert!((avg - loss_value(&loss, z).unwrap()).abs() < 1e-12);
            // Clean negative, score z: observed as noisy-neg w.p. 1−ρ₋.
            let avg = (1.0 - rho_neg) * corrected_neg(z) + rho_neg * corrected_pos(z);
            assert!((avg - loss_value(&loss, -z).unwrap()).abs() < 1e-12);
            z += 0.23;
        }

        // Monte-Carlo under the sampling model: flip labels, average the
        // corrected loss, compare to the clean risk within 3 standard errors.
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let trials = 200_000;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        let mut clean = 0.0;
        for _ in 0..trials {
            let y_pos = rng.random_bool(0.5);
            let z: f64 = rng.random_range(-3.0..3.0);
            let margin = if y_pos { z } else { -z };
            clean += loss_value(&loss, margin).unwrap();
            let flipped = rng.random_bool(if y_pos { rho_pos } else { rho_neg });
            let observed_pos = y_pos != flipped;
            let v = if observed_pos {
                corrected_pos(z)
            } else {
                corrected_neg(z)
            };
            sum += v;
            sumsq += v * v;
        }
        let mean = sum / trials as f64;
        let clean_mean = clean / trials as f64;
        let var = (sumsq / trials as f64 - mean * mean).max(0.0);
        let se = (var / trials as f64).sqrt();
        assert!(
            (mean - clean_mean).abs() <= 3.0 * se.max(1e-6),
            "corrected {mean} vs clean {clean_mean} (se {se})"
        );
    }
}
