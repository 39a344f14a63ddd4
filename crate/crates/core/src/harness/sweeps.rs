//! Grid sweeps over the prior gap, prior misspecification, and sample size,
//! plus the multi-method baseline comparison.
//!
//! Every sweep runs the same seed list at every grid point, so comparisons
//! across points are paired. Failures at individual points (e.g. a grid
//! value colliding with θ) are reported per point and leave the rest of the
//! sweep intact.

use crate::data::GaussianMixtureSpec;
use crate::error::{Error, Result};
use crate::estimators::{bayes_linear_scorer, true_risk_gaussian};
use crate::harness::config::{ExperimentConfig, Method};
use crate::harness::runner::{
    derive_seed, run_experiment, run_experiment_with, ExperimentResult, RunOptions,
};
use crate::losses::{LossKind, LossSpec};
use crate::models::{Model, ModelKind};
use serde::{Deserialize, Serialize};
use serde_json::json;
use std::io::Write;
use std::path::Path;

const TAG_REFERENCE: u64 = 42;

/// One grid point: its parameters and either a result or an error message.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepPoint {
    pub params: serde_json::Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<ExperimentResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl SweepPoint {
    fn ok(params: serde_json::Value, result: ExperimentResult) -> Self {
        Self {
            params,
            result: Some(result),
            error: None,
        }
    }

    fn failed(params: serde_json::Value, err: &Error) -> Self {
        Self {
            params,
            result: None,
            error: Some(err.to_string()),
        }
    }
}

/// Fix θ and move θ′ across the grid; one result per grid value.
pub fn sweep_closeness(base: &ExperimentConfig, grid: &[f64]) -> Vec<SweepPoint> {
    grid.iter()
        .map(|&theta_prime| {
            let params = json!({ "theta_prime": theta_prime });
            let mut cfg = base.clone();
            cfg.data.theta_prime = theta_prime;
            match run_experiment(&cfg) {
                Ok(result) => SweepPoint::ok(params, result),
                Err(e) => SweepPoint::failed(params, &e),
            }
        })
        .collect()
}

/// Generate data with the true (θ, θ′) but train each arm with the
/// perturbed (εθ, ε′θ′).
pub fn sweep_robustness(base: &ExperimentConfig, pairs: &[(f64, f64)]) -> Vec<SweepPoint> {
    pairs
        .iter()
        .map(|&(eps, eps_prime)| {
            let params = json!({ "eps": eps, "eps_prime": eps_prime });
            let options = RunOptions {
                perturb: Some((eps, eps_prime)),
            };
            match run_experiment_with(base, options) {
                Ok(result) => SweepPoint::ok(params, result),
                Err(e) => SweepPoint::failed(params, &e),
            }
        })
        .collect()
}

/// The risk level excess risk is measured against in the size sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReferenceRisk {
    /// "analytic_bayes" for linear scorers on a mixture (exact, the optimal
    /// linear scorer is the posterior log-ratio); "longrun_100x" otherwise
    /// (the same method trained on a 100×-larger sample — an approximation).
    pub kind: String,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SizeSweepResult {
    pub reference: ReferenceRisk,
    pub points: Vec<SweepPoint>,
}

fn analytic_reference(mix: &GaussianMixtureSpec) -> Result<ReferenceRisk> {
    let bayes = Model::Linear(bayes_linear_scorer(mix));
    let value = true_risk_gaussian(&bayes, mix, &LossSpec::new(LossKind::ZeroOne))?;
    Ok(ReferenceRisk {
        kind: "analytic_bayes".into(),
        value,
    })
}

fn longrun_reference(base: &ExperimentConfig, max_n: usize) -> Result<ReferenceRisk> {
    let mut cfg = base.clone();
    cfg.data.n = max_n.saturating_mul(100);
    cfg.data.n_prime = cfg.data.n;
    cfg.seeds = vec![derive_seed(base.seeds[0], TAG_REFERENCE)];
    let result = run_experiment(&cfg)?;
    Ok(ReferenceRisk {
        kind: "longrun_100x".into(),
        value: result.mean_error,
    })
}

/// Vary n with n′ = n; each point also records the mean excess zero-one
/// risk over the reference.
pub fn sweep_sizes(base: &ExperimentConfig, n_grid: &[usize]) -> Result<SizeSweepResult> {
    if n_grid.is_empty() {
        return Err(Error::Config("empty n grid".into()));
    }
    if n_grid.contains(&0) {
        return Err(Error::Config("n = 0 in size grid".into()));
    }
    let max_n = *n_grid.iter().max().unwrap();
    let reference = match (&base.data.mixture, base.model.kind) {
        (Some(mix), ModelKind::Linear) => analytic_reference(mix)?,
        _ => longrun_reference(base, max_n)?,
    };

    let points = n_grid
        .iter()
        .map(|&n| {
            let mut cfg = base.clone();
            cfg.data.n = n;
            cfg.data.n_prime = n;
            match run_experiment(&cfg) {
                Ok(result) => {
                    // For linear scorers on a mixture the exact risk of every
                    // trained model is available, which keeps the excess free
                    // of test-sampling noise (it is far smaller than that
                    // noise at large n). Otherwise fall back to the test
                    // error.
                    let mean_risk = match (&base.data.mixture, base.model.kind) {
                        (Some(mix), ModelKind::Linear) => {
                            let zero_one = LossSpec::new(LossKind::ZeroOne);
                            let risks: Result<Vec<f64>> = result
                                .models
                                .iter()
                                .map(|m| true_risk_gaussian(m, mix, &zero_one))
                                .collect();
                            match risks {
                                Ok(r) => r.iter().sum::<f64>() / r.len() as f64,
                                Err(e) => return SweepPoint::failed(json!({ "n": n }), &e),
                            }
                        }
                        _ => result.mean_error,
                    };
                    let excess = mean_risk - reference.value;
                    SweepPoint::ok(
                        json!({ "n": n, "excess": excess, "mean_true_risk": mean_risk }),
                        result,
                    )
                }
                Err(e) => SweepPoint::failed(json!({ "n": n }), &e),
            }
        })
        .collect();
    Ok(SizeSweepResult { reference, points })
}

/// Run several methods on the same config and seeds.
pub fn run_baselines(base: &ExperimentConfig, methods: &[Method]) -> Vec<SweepPoint> {
    methods
        .iter()
        .map(|&method| {
            let params = json!({ "method": method.name() });
            let mut cfg = base.clone();
            cfg.method = method;
            match run_experiment(&cfg) {
                Ok(result) => SweepPoint::ok(params, result),
                Err(e) => SweepPoint::failed(params, &e),
            }
        })
        .collect()
}

/// The methods compared in the baseline run.
pub const DEFAULT_BASELINES: [Method; 4] =
    [Method::Uu, Method::UuBiased, Method::Ccn, Method::OraclePn];

fn point_stats(p: &SweepPoint) -> (String, String, String) {
    match &p.result {
        Some(r) => (
            r.mean_error.to_string(),
            r.std_dev.to_string(),
            String::new(),
        ),
        None => (
            String::new(),
            String::new(),
            p.error.clone().unwrap_or_default(),
        ),
    }
}

/// Plot-ready summary CSV. The leading columns are the sweep parameters.
pub fn write_sweep_summary(path: &Path, param_names: &[&str], points: &[SweepPoint]) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(
        out,
        "{},mean_error,std_dev,n_seeds,error",
        param_names.join(",")
    )?;
    for p in points {
        let mut cells: Vec<String> = param_names
            .iter()
            .map(|name| {
                p.params
                    .get(name)
                    .map(|v| {
                        v.as_str()
                            .map(str::to_string)
                            .unwrap_or_else(|| v.to_string())
                    })
                    .unwrap_or_default()
            })
            .collect();
        let (mean, std, err) = point_stats(p);
        let seeds = p
            .result
            .as_ref()
            .map(|r| r.per_seed.len().to_string())
            .unwrap_or_default();
        cells.extend([mean, std, seeds, err]);
        writeln!(out, "{}", cells.join(","))?;
    }
    Ok(())
}

/// Summary for the size sweep, including the excess column and reference.
pub fn write_sizes_summary(path: &Path, sweep: &SizeSweepResult) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(
        out,
        "n,mean_error,std_dev,n_seeds,excess,reference_kind,reference_value,error"
    )?;
    for p in &sweep.points {
        let n = p.params.get("n").map(|v| v.to_string()).unwrap_or_default();
        let excess = p
            .params
            .get("excess")
            .map(|v| v.to_string())
            .unwrap_or_default();
        let (mean, std, err) = point_stats(p);
        let seeds = p
            .result
            .as_ref()
            .map(|r| r.per_seed.len().to_string())
            .unwrap_or_default();
        writeln!(
            out,
            "{n},{mean},{std},{seeds},{excess},{},{},{err}",
            sweep.reference.kind, sweep.reference.value
        )?;
    }
    Ok(())
}
