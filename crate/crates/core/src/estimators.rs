//! Empirical and exact risk evaluation.
//!
//! The central estimator evaluates the two-set rewrite
//!
//! ```text
//! R̂(g) = (1/n) Σᵢ [a·ℓ(g(xᵢ)) + b·ℓ(−g(xᵢ))]
//!      + (1/n′) Σⱼ [d·ℓ(g(x′ⱼ)) + c·ℓ(−g(x′ⱼ))]
//! ```
//!
//! which is unbiased for the test risk R(g) but, because b, d ≤ 0, may be
//! negative on a finite sample. Values are reported as-is, never clipped.
//!
//! For linear scorers on a two-Gaussian mixture the exact risk is available:
//! the score is Gaussian within each class, so the zero-one risk is a normal
//! CDF and smooth losses reduce to 1-D quadrature.

use crate::data::{GaussianMixtureSpec, LabeledSet, Matrix, UnlabeledSet};
use crate::error::{Error, Result};
use crate::losses::{loss_value, LossKind, LossSpec};
use crate::models::{LinearModel, Model};
use crate::rewrite::{correction_coefficients, cost_weights, PriorTriple};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    Pn,
    Uu,
    UuSym,
    Pu,
    Balanced,
    ZeroOneError,
}

/// A risk value with the estimator that produced it and the sample sizes it
/// consumed. Two-set estimators fill both counts; single-set ones use `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskEstimate {
    pub kind: EstimatorKind,
    pub value: f64,
    pub n: usize,
    pub n_prime: usize,
}

fn finite_or_err(value: f64, what: &str) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::Numerical(format!("{what} came out {value}")))
    }
}

fn mean_loss(model: &Model, rows: &Matrix, negate: bool, loss: &LossSpec) -> Result<f64> {
    let mut sum = 0.0;
    for x in rows.iter_rows() {
        let s = model.forward(x)?;
        sum += loss_value(loss, if negate { -s } else { s })?;
    }
    Ok(sum / rows.nrows() as f64)
}

/// Supervised estimator (π/n)Σℓ(g(xᵢ)) + ((1−π)/n′)Σℓ(−g(x′ⱼ)).
pub fn empirical_risk_pn(
    model: &Model,
    pos: &Matrix,
    neg: &Matrix,
    pi: f64,
    loss: &LossSpec,
) -> Result<RiskEstimate> {
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::EmptySample("PN estimator needs both classes".into()));
    }
    if !(pi > 0.0 && pi < 1.0) {
        return Err(Error::SingleClass(format!("pi = {pi}")));
    }
    let value =
        pi * mean_loss(model, pos, false, loss)? + (1.0 - pi) * mean_loss(model, neg, true, loss)?;
    Ok(RiskEstimate {
        kind: EstimatorKind::Pn,
        value: finite_or_err(value, "PN risk")?,
        n: pos.nrows(),
        n_prime: neg.nrows(),
    })
}

/// Orient a pair of unlabeled sets so the first has the higher declared
/// prior, matching the canonical orientation of [`PriorTriple`].
pub fn orient_pair<'a>(
    u1: &'a UnlabeledSet,
    u2: &'a UnlabeledSet,
) -> (&'a UnlabeledSet, &'a UnlabeledSet) {
    if u1.declared_prior >= u2.declared_prior {
        (u1, u2)
    } else {
        (u2, u1)
    }
}

/// Two-set backward-corrected empirical risk with explicit weights:
/// (1/n)Σ[a·ℓ(g)+b·ℓ(−g)] over `hi` plus (1/n′)Σ[d·ℓ(g)+c·ℓ(−g)] over `lo`.
pub fn corrected_empirical_risk(
    model: &Model,
    hi: &Matrix,
    lo: &Matrix,
    k: &crate::rewrite::CorrectionCoefficients,
    loss: &LossSpec,
) -> Result<f64> {
    if hi.is_empty() || lo.is_empty() {
        return Err(Error::EmptySample("corrected risk needs both sets".into()));
    }
    let value = k.a * mean_loss(model, hi, false, loss)?
        + k.b * mean_loss(model, hi, true, loss)?
        + k.d * mean_loss(model, lo, false, loss)?
        + k.c * mean_loss(model, lo, true, loss)?;
    finite_or_err(value, "corrected risk")
}

/// Unbiased two-set estimator with backward-corrected losses.
///
/// The sets are matched to the priors by their declared priors, so callers
/// may pass them in either order.
pub fn empirical_risk_uu(
    model: &Model,
    u1: &UnlabeledSet,
    u2: &UnlabeledSet,
    priors: &PriorTriple,
    loss: &LossSpec,
) -> Result<RiskEstimate> {
    let (hi, lo) = orient_pair(u1, u2);
    let k = correction_coefficients(priors);
    let value = corrected_empirical_risk(model, &hi.features, &lo.features, &k, loss)?;
    Ok(RiskEstimate {
        kind: EstimatorKind::Uu,
        value,
        n: hi.len(),
        n_prime: lo.len(),
    })
}

/// Simplified cost-sensitive estimator for symmetric losses:
/// (α/n)Σℓ(g(xᵢ)) + (α′/n′)Σℓ(−g(x′ⱼ)) − offset.
pub fn empirical_risk_uu_sym(
    model: &Model,
    u1: &UnlabeledSet,
    u2: &UnlabeledSet,
    priors: &PriorTriple,
    loss: &LossSpec,
) -> Result<RiskEstimate> {
    if !loss.symmetric {
        return Err(Error::NonSymmetricLoss(format!(
            "{} does not satisfy ℓ(z)+ℓ(−z)=1",
            loss.kind.name()
        )));
    }
    let (hi, lo) = orient_pair(u1, u2);
    if hi.is_empty() || lo.is_empty() {
        return Err(Error::EmptySample("UU estimator needs both sets".into()));
    }
    let w = cost_weights(priors);
    let value = w.alpha * mean_loss(model, &hi.features, false, loss)?
        + w.alpha_prime * mean_loss(model, &lo.features, true, loss)?
        - w.offset;
    Ok(RiskEstimate {
        kind: EstimatorKind::UuSym,
        value: finite_or_err(value, "UU-sym risk")?,
        n: hi.len(),
        n_prime: lo.len(),
    })
}

/// Balanced risk ½·mean ℓ(g(x)) over P + ½·mean ℓ(−g(x)) over N.
pub fn empirical_balanced_risk(
    model: &Model,
    pos: &Matrix,
    neg: &Matrix,
    loss: &LossSpec,
) -> Result<RiskEstimate> {
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::EmptySample(
            "balanced risk needs both classes".into(),
        ));
    }
    let value =
        0.5 * mean_loss(model, pos, false, loss)? + 0.5 * mean_loss(model, neg, true, loss)?;
    Ok(RiskEstimate {
        kind: EstimatorKind::Balanced,
        value: finite_or_err(value, "balanced risk")?,
        n: pos.nrows(),
        n_prime: neg.nrows(),
    })
}

/// Fraction of test points with y·g(x) ≤ 0, counting g(x) = 0 as half an
/// error.
pub fn zero_one_test_error(model: &Model, test: &LabeledSet) -> Result<RiskEstimate> {
    if test.is_empty() {
        return Err(Error::EmptySample("empty test set".into()));
    }
    let mut errors = 0.0;
    for (x, &y) in test.features.iter_rows().zip(&test.labels) {
        let s = model.forward(x)?;
        if !s.is_finite() {
            return Err(Error::Numerical(format!("non-finite score {s}")));
        }
        let margin = y * s;
        if margin < 0.0 {
            errors += 1.0;
        } else if margin == 0.0 {
            errors += 0.5;
        }
    }
    Ok(RiskEstimate {
        kind: EstimatorKind::ZeroOneError,
        value: errors / test.len() as f64,
        n: test.len(),
        n_prime: 0,
    })
}

/// The in-class optimal linear scorer for an isotropic two-Gaussian mixture:
/// the posterior log-ratio w = (μ₊−μ₋)/σ², b = ln(π/(1−π)) + (‖μ₋‖²−‖μ₊‖²)/(2σ²).
pub fn bayes_linear_scorer(spec: &GaussianMixtureSpec) -> LinearModel {
    let s2 = spec.sigma * spec.sigma;
    let weights: Vec<f64> = spec
        .mean_pos
        .iter()
        .zip(&spec.mean_neg)
        .map(|(p, n)| (p - n) / s2)
        .collect();
    let sq = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>();
    let bias =
        (spec.pi / (1.0 - spec.pi)).ln() + (sq(&spec.mean_neg) - sq(&spec.mean_pos)) / (2.0 * s2);
    LinearModel::new(weights, bias).expect("finite mixture parameters")
}

/// Exact risk R(g) of a linear scorer under the mixture: the score wᵀX+b is
/// N(wᵀμ_c + b, σ²‖w‖²) within class c, so the zero-one risk is a normal CDF
/// in closed form and smooth losses use adaptive quadrature to 1e−10.
pub fn true_risk_gaussian(
    model: &Model,
    spec: &GaussianMixtureSpec,
    loss: &LossSpec,
) -> Result<f64> {
    let lin = match model {
        Model::Linear(m) => m,
        Model::Mlp(_) => {
            return Err(Error::UnsupportedModel(
                "exact risk oracle covers linear scorers only".into(),
            ));
        }
    };
    if lin.weights().len() != spec.dim() {
        return Err(Error::Shape {
            expected: spec.dim(),
            got: lin.weights().len(),
        });
    }
    let dot = |m: &[f64]| -> f64 {
        lin.weights().iter().zip(m).map(|(w, v)| w * v).sum::<f64>() + lin.bias()
    };
    let mean_pos = dot(&spec.mean_pos);
    let mean_neg = dot(&spec.mean_neg);
    let sd = spec.sigma * lin.weight_norm();
    let pi = spec.pi;

    if sd == 0.0 {
        // Constant scorer: the score is deterministically the bias.
        let b = lin.bias();
        return Ok(pi * loss_value(loss, b)? + (1.0 - pi) * loss_value(loss, -b)?);
    }

    let value = match loss.kind {
        LossKind::ZeroOne => {
            pi * normal_cdf(-mean_pos / sd) + (1.0 - pi) * normal_cdf(mean_neg / sd)
        }
        _ => {
            let pos = gaussian_expected_loss(loss, mean_pos, sd, false)?;
            let neg = gaussian_expected_loss(loss, mean_neg, sd, true)?;
            pi * pos + (1.0 - pi) * neg
        }
    };
    finite_or_err(value, "exact risk")
}

/// Standard normal CDF.
fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// E[ℓ(±S)] for S ~ N(mean, sd²), integrated over mean ± 10 sd.
fn gaussian_expected_loss(loss: &LossSpec, mean: f64, sd: f64, negate: bool) -> Result<f64> {
    let norm = 1.0 / (sd * (2.0 * std::f64::consts::PI).sqrt());
    let f = |t: f64| -> f64 {
        let u = (t - mean) / sd;
        let l = loss_value(loss, if negate { -t } else { t }).unwrap_or(f64::NAN);
        l * norm * (-0.5 * u * u).exp()
    };
    let value = adaptive_gk15(&f, mean - 10.0 * sd, mean + 10.0 * sd, 1e-10, 0);
    finite_or_err(value, "quadrature")
}

// Gauss–Kronrod 7-15 nodes and weights on [−1, 1], written at reference
// precision.
#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gk15(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut resk = WGK[7] * fc;
    let mut resg = WG[3] * fc;
    for j in 0..7 {
        let x = h * XGK[j];
        let fsum = f(c - x) + f(c + x);
        resk += WGK[j] * fsum;
        if j % 2 == 1 {
            resg += WG[j / 2] * fsum;
        }
    }
    (resk * h, ((resk - resg) * h).abs())
}

fn adaptive_gk15(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let (integral, err) = gk15(f, a, b);
    if err <= tol || depth >= 60 || (b - a).abs() < 1e-14 {
        return integral;
    }
    let mid = 0.5 * (a + b);
    adaptive_gk15(f, a, mid, 0.5 * tol, depth + 1) + adaptive_gk15(f, mid, b, 0.5 * tol, depth + 1)
}
