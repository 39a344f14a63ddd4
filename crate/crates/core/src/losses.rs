//! Margin losses ℓ(z), their derivatives, and the constants the risk
//! estimators and generalization bounds consume.
//!
//! Four losses are supported:
//!
//! * zero-one   ℓ(z) = (1 − sign z)/2 with sign(0) = 0, so ℓ(0) = ½
//! * sigmoid    ℓ(z) = 1/(1 + eᶻ)
//! * logistic   ℓ(z) = ln(1 + e⁻ᶻ)
//! * ramp       ℓ(z) = max(0, min(1, (1 − z)/2))
//!
//! Zero-one, sigmoid and ramp satisfy the symmetric condition
//! ℓ(z) + ℓ(−z) = 1; logistic does not.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    ZeroOne,
    Sigmoid,
    Logistic,
    Ramp,
}

impl LossKind {
    pub fn name(self) -> &'static str {
        match self {
            LossKind::ZeroOne => "zero-one",
            LossKind::Sigmoid => "sigmoid",
            LossKind::Logistic => "logistic",
            LossKind::Ramp => "ramp",
        }
    }
}

/// A loss together with the properties the estimators check before use.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossSpec {
    pub kind: LossKind,
    /// False for zero-one everywhere and for ramp at its kinks; ramp still
    /// supports subgradient training (see [`loss_derivative`]).
    pub differentiable: bool,
    /// True exactly when ℓ(z) + ℓ(−z) = 1 holds identically.
    pub symmetric: bool,
}

impl LossSpec {
    pub fn new(kind: LossKind) -> Self {
        let (differentiable, symmetric) = match kind {
            LossKind::ZeroOne => (false, true),
            LossKind::Sigmoid => (true, true),
            LossKind::Logistic => (true, false),
            LossKind::Ramp => (false, true),
        };
        Self {
            kind,
            differentiable,
            symmetric,
        }
    }

    /// Parse the loss names accepted in config files and CLI flags.
    pub fn from_name(name: &str) -> Result<Self> {
        let kind = match name {
            "zero-one" | "zero_one" | "01" => LossKind::ZeroOne,
            "sigmoid" => LossKind::Sigmoid,
            "logistic" => LossKind::Logistic,
            "ramp" => LossKind::Ramp,
            other => {
                return Err(Error::Config(format!("unknown loss \"{other}\"")));
            }
        };
        Ok(Self::new(kind))
    }

    /// True when the loss admits a training gradient: smooth losses, and ramp
    /// via the documented subgradient convention.
    pub fn trainable(&self) -> bool {
        self.kind != LossKind::ZeroOne
    }
}

/// sup and Lipschitz constant of ℓ on the bounded-score interval [−c_g, c_g].
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LossConstants {
    /// sup of ℓ over |z| ≤ c_g.
    pub c_ell: f64,
    /// Lipschitz constant of ℓ over |z| ≤ c_g; +∞ for zero-one.
    pub l_ell: f64,
    /// The score bound defining the interval.
    pub c_g: f64,
}

impl LossConstants {
    /// Whether these constants can feed the generalization-bound formulas.
    pub fn usable_for_bounds(&self) -> bool {
        self.c_ell.is_finite() && self.l_ell.is_finite()
    }
}

fn sign(z: f64) -> f64 {
    if z > 0.0 {
        1.0
    } else if z < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Numerically stable ln(1 + eˣ).
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Evaluate ℓ(z).
pub fn loss_value(spec: &LossSpec, z: f64) -> Result<f64> {
    if !z.is_finite() {
        return Err(Error::Domain(format!("margin {z} is not finite")));
    }
    Ok(match spec.kind {
        LossKind::ZeroOne => (1.0 - sign(z)) / 2.0,
        LossKind::Sigmoid => 1.0 / (1.0 + z.exp()),
        LossKind::Logistic => softplus(-z),
        LossKind::Ramp => (0.5 * (1.0 - z)).clamp(0.0, 1.0),
    })
}

/// Evaluate ℓ′(z).
///
/// Zero-one has no usable derivative. Ramp uses the flat-side subgradient 0
/// at its kinks z = ±1, which keeps training steps bounded.
pub fn loss_derivative(spec: &LossSpec, z: f64) -> Result<f64> {
    if !z.is_finite() {
        return Err(Error::Domain(format!("margin {z} is not finite")));
    }
    match spec.kind {
        LossKind::ZeroOne => Err(Error::UnsupportedLoss(
            "zero-one loss has no training gradient".into(),
        )),
        LossKind::Sigmoid => {
            // ℓ′(z) = −eᶻ/(1+eᶻ)² = −s(1−s) with s = 1/(1+eᶻ)
            let s = 1.0 / (1.0 + z.exp());
            Ok(-s * (1.0 - s))
        }
        LossKind::Logistic => Ok(-1.0 / (1.0 + z.exp())),
        LossKind::Ramp => Ok(if z > -1.0 && z < 1.0 { -0.5 } else { 0.0 }),
    }
}

/// The fixed grid [−10, 10] stepped by 0.01 used by symmetry checks.
pub fn canonical_grid() -> Vec<f64> {
    (0..=2000).map(|i| -10.0 + 0.01 * i as f64).collect()
}

/// True iff |ℓ(z) + ℓ(−z) − 1| ≤ 1e−12 on every grid point.
pub fn check_symmetry(spec: &LossSpec, grid: &[f64]) -> bool {
    grid.iter().all(|&z| {
        let fwd = loss_value(spec, z).unwrap_or(f64::NAN);
        let rev = loss_value(spec, -z).unwrap_or(f64::NAN);
        (fwd + rev - 1.0).abs() <= 1e-12
    })
}

/// Constants of ℓ on [−c_g, c_g]: both the sup and the Lipschitz constant
/// are attained in closed form for every supported loss.
pub fn loss_constants(spec: &LossSpec, c_g: f64) -> Result<LossConstants> {
    if !(c_g > 0.0 && c_g.is_finite()) {
        return Err(Error::Domain(format!("score bound c_g {c_g} must be > 0")));
    }
    let (c_ell, l_ell) = match spec.kind {
        LossKind::ZeroOne => (1.0, f64::INFINITY),
        // ℓ decreasing, so sup at z = −c_g; |ℓ′| peaks at 0 with value ¼.
        LossKind::Sigmoid => (1.0 / (1.0 + (-c_g).exp()), 0.25),
        // sup at z = −c_g; |ℓ′| = 1/(1+eᶻ) increasing toward −c_g.
        LossKind::Logistic => (softplus(c_g), 1.0 / (1.0 + (-c_g).exp())),
        LossKind::Ramp => ((0.5 * (1.0 + c_g)).min(1.0), 0.5),
    };
    Ok(LossConstants { c_ell, l_ell, c_g })
}

/// Whether the single-set impossibility witness applies to this loss: it
/// covers zero-one and bounded losses with ℓ(+∞) < ℓ(−∞) < ∞, which rules
/// out the unbounded logistic loss.
pub fn supports_single_set_witness(spec: &LossSpec) -> bool {
    match spec.kind {
        LossKind::ZeroOne | LossKind::Sigmoid | LossKind::Ramp => true,
        LossKind::Logistic => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(kind: LossKind) -> LossSpec {
        LossSpec::new(kind)
    }

    #[test]
    fn values_at_reference_points() {
        assert_eq!(loss_value(&spec(LossKind::Sigmoid), 0.0).unwrap(), 0.5);
        assert_eq!(loss_value(&spec(LossKind::ZeroOne), 0.0).unwrap(), 0.5);
        let log0 = loss_value(&spec(LossKind::Logistic), 0.0).unwrap();
        assert!((log0 - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(loss_value(&spec(LossKind::Ramp), -3.0).unwrap(), 1.0);
        assert_eq!(loss_value(&spec(LossKind::Ramp), 3.0).unwrap(), 0.0);
    }

    #[test]
    fn derivatives_at_reference_points() {
        assert_eq!(
            loss_derivative(&spec(LossKind::Sigmoid), 0.0).unwrap(),
            -0.25
        );
        assert_eq!(
            loss_derivative(&spec(LossKind::Logistic), 0.0).unwrap(),
            -0.5
        );
        assert!(matches!(
            loss_derivative(&spec(LossKind::ZeroOne), 1.0),
            Err(Error::UnsupportedLoss(_))
        ));
        // Kinks take the flat-side value.
        assert_eq!(loss_derivative(&spec(LossKind::Ramp), 1.0).unwrap(), 0.0);
        assert_eq!(loss_derivative(&spec(LossKind::Ramp), -1.0).unwrap(), 0.0);
        assert_eq!(loss_derivative(&spec(LossKind::Ramp), 0.0).unwrap(), -0.5);
    }

    #[test]
    fn non_finite_margin_is_domain_error() {
        assert!(loss_value(&spec(LossKind::Sigmoid), f64::NAN).is_err());
        assert!(loss_value(&spec(LossKind::Sigmoid), f64::INFINITY).is_err());
    }

    #[test]
    fn symmetry_flags_agree_with_grid_check() {
        let grid = canonical_grid();
        for kind in [
            LossKind::ZeroOne,
            LossKind::Sigmoid,
            LossKind::Logistic,
            LossKind::Ramp,
        ] {
            let s = spec(kind);
            assert_eq!(
                check_symmetry(&s, &grid),
                s.symmetric,
                "symmetry flag mismatch for {:?}",
                kind
            );
        }
    }

    #[test]
    fn derivative_matches_finite_differences() {
        // Central differences with step 1e-6, relative error ≤ 1e-6. The
        // absolute floor covers the FD cancellation noise ~ε/h ≈ 1e-10,
        // which dominates where |ℓ′| itself is ~1e-5 (sigmoid near ±10).
        let h = 1e-6;
        for kind in [LossKind::Sigmoid, LossKind::Logistic] {
            let s = spec(kind);
            let mut z = -10.0;
            while z <= 10.0 {
                let analytic = loss_derivative(&s, z).unwrap();
                let fd =
                    (loss_value(&s, z + h).unwrap() - loss_value(&s, z - h).unwrap()) / (2.0 * h);
                let tol = (1e-6 * analytic.abs()).max(5e-10);
                assert!(
                    (analytic - fd).abs() <= tol,
                    "{kind:?} at z={z}: {analytic} vs {fd}"
                );
                z += 0.37;
            }
        }
    }

    #[test]
    fn losses_nonnegative_and_nonincreasing_on_grid() {
        let grid = canonical_grid();
        for kind in [
            LossKind::ZeroOne,
            LossKind::Sigmoid,
            LossKind::Logistic,
            LossKind::Ramp,
        ] {
            let s = spec(kind);
            let mut prev = f64::INFINITY;
            for &z in &grid {
                let v = loss_value(&s, z).unwrap();
                assert!(v >= 0.0);
                assert!(v <= prev + 1e-15, "{kind:?} increases at z={z}");
                prev = v;
            }
        }
    }

    // Grid-maximization oracle for the closed-form constants.
    fn grid_constants(s: &LossSpec, c_g: f64) -> (f64, f64) {
        let n = 100_000;
        let mut max_v: f64 = 0.0;
        let mut max_d: f64 = 0.0;
        for i in 0..=n {
            let z = -c_g + 2.0 * c_g * i as f64 / n as f64;
            max_v = max_v.max(loss_value(s, z).unwrap());
            if let Ok(d) = loss_derivative(s, z) {
                max_d = max_d.max(d.abs());
            }
        }
        (max_v, max_d)
    }

    #[test]
    fn constants_match_grid_oracle() {
        let s = spec(LossKind::Sigmoid);
        let c = loss_constants(&s, 10.0).unwrap();
        let (gv, gd) = grid_constants(&s, 10.0);
        assert!((c.c_ell - gv).abs() < 1e-9);
        assert!((c.l_ell - gd).abs() < 1e-7);
        assert!((c.c_ell - 0.99995).abs() < 1e-4);
        assert_eq!(c.l_ell, 0.25);

        let s = spec(LossKind::Logistic);
        let c = loss_constants(&s, 5.0).unwrap();
        let (gv, gd) = grid_constants(&s, 5.0);
        assert!((c.c_ell - gv).abs() < 1e-9);
        assert!((c.l_ell - gd).abs() < 1e-7);
        assert!((c.c_ell - 5.00672).abs() < 1e-4);
        assert!((c.l_ell - 0.99331).abs() < 1e-4);

        let c = loss_constants(&spec(LossKind::ZeroOne), 3.0).unwrap();
        assert_eq!(c.c_ell, 1.0);
        assert!(c.l_ell.is_infinite());
        assert!(!c.usable_for_bounds());

        let c = loss_constants(&spec(LossKind::Ramp), 0.5).unwrap();
        assert_eq!(c.c_ell, 0.75);
        assert_eq!(c.l_ell, 0.5);
    }

    #[test]
    fn constants_reject_bad_bound() {
        assert!(loss_constants(&spec(LossKind::Sigmoid), 0.0).is_err());
        assert!(loss_constants(&spec(LossKind::Sigmoid), -1.0).is_err());
    }

    #[test]
    fn loss_names_parse() {
        assert_eq!(
            LossSpec::from_name("sigmoid").unwrap().kind,
            LossKind::Sigmoid
        );
        assert_eq!(
            LossSpec::from_name("zero-one").unwrap().kind,
            LossKind::ZeroOne
        );
        assert!(LossSpec::from_name("hinge").is_err());
    }

    #[test]
    fn witness_family_excludes_logistic() {
        assert!(supports_single_set_witness(&spec(LossKind::Sigmoid)));
        assert!(supports_single_set_witness(&spec(LossKind::ZeroOne)));
        assert!(!supports_single_set_witness(&spec(LossKind::Logistic)));
    }
}
