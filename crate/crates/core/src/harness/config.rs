//! JSON experiment configuration: schema types, parsing, and validation.
//!
//! A run is fully determined by (config, seed). Example:
//!
//! ```json
//! {
//!   "data": {
//!     "mixture": {"mean_pos": [1, 1], "mean_neg": [-1, -1], "sigma": 1.0, "pi": 0.3},
//!     "theta": 0.9, "theta_prime": 0.4,
//!     "n": 2000, "n_prime": 1000, "n_test": 10000
//!   },
//!   "method": "uu",
//!   "model": {"kind": "linear"},
//!   "train": {"optimizer": "sgd", "initial_lr": 0.01, "batch_size": 128,
//!             "epochs": 500, "loss": "sigmoid"},
//!   "seeds": [0, 1, 2, 3, 4, 5, 6, 7, 8, 9]
//! }
//! ```

use crate::data::GaussianMixtureSpec;
use crate::error::{Error, Result};
use crate::losses::LossSpec;
use crate::models::{init_model, Model, ModelKind};
use crate::optim::{EstimatorChoice, OptimizerKind, TrainConfig};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Corrected two-set estimator with the true priors.
    Uu,
    /// Supervised training that pretends U₁/U₂ are clean P/N data.
    UuBiased,
    /// Balanced-error variant: the corrected estimator with π fixed to ½.
    BerFc,
    /// Class-conditional-noise backward correction.
    Ccn,
    /// Supervised learning from fully labeled data of the same total size.
    OraclePn,
    /// Supervised learning from a 10% labeled subsample.
    SmallPn,
    /// Supervised learning from a 10% subsample taken after re-weighting the
    /// pool to prior θ, trained unaware of the shift.
    SmallPnPriorShift,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Uu => "uu",
            Method::UuBiased => "uu_biased",
            Method::BerFc => "ber_fc",
            Method::Ccn => "ccn",
            Method::OraclePn => "oracle_pn",
            Method::SmallPn => "small_pn",
            Method::SmallPnPriorShift => "small_pn_prior_shift",
        }
    }

    /// Methods that train on labeled data.
    pub fn needs_labels(self) -> bool {
        matches!(
            self,
            Method::OraclePn | Method::SmallPn | Method::SmallPnPriorShift
        )
    }
}

/// Where the datasets come from: a synthetic mixture or CSV files.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DataConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mixture: Option<GaussianMixtureSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<CsvDataConfig>,
    pub theta: f64,
    pub theta_prime: f64,
    pub n: usize,
    pub n_prime: usize,
    #[serde(default = "default_n_test")]
    pub n_test: usize,
    /// Size of the optional unlabeled validation pair (mixture data only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validation_n: Option<usize>,
}

fn default_n_test() -> usize {
    10_000
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CsvDataConfig {
    /// Labeled pool the unlabeled pair is drawn from.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pool: Option<PathBuf>,
    /// Pre-built unlabeled sets (features only); mutually exclusive with
    /// `pool`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u1: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u2: Option<PathBuf>,
    /// Labeled test data.
    pub test: PathBuf,
    /// Test-distribution class prior (the mixture block carries its own).
    pub pi: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelConfig {
    #[serde(default = "default_model_kind")]
    pub kind: ModelKind,
    #[serde(default = "default_hidden")]
    pub hidden: Vec<usize>,
}

fn default_model_kind() -> ModelKind {
    ModelKind::Linear
}

fn default_hidden() -> Vec<usize> {
    vec![64, 64, 64]
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            kind: default_model_kind(),
            hidden: default_hidden(),
        }
    }
}

impl ModelConfig {
    pub fn build(&self, input_dim: usize, seed: u64) -> Result<Model> {
        match self.kind {
            ModelKind::Linear => init_model(ModelKind::Linear, &[input_dim], seed),
            ModelKind::Mlp => {
                let mut dims = Vec::with_capacity(self.hidden.len() + 2);
                dims.push(input_dim);
                dims.extend_from_slice(&self.hidden);
                dims.push(1);
                init_model(ModelKind::Mlp, &dims, seed)
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainBlock {
    #[serde(default = "default_optimizer")]
    pub optimizer: OptimizerKind,
    #[serde(default = "default_lr")]
    pub initial_lr: f64,
    #[serde(default)]
    pub decay: f64,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default)]
    pub weight_decay: f64,
    #[serde(default = "default_loss")]
    pub loss: String,
    #[serde(default = "default_estimator")]
    pub estimator: EstimatorChoice,
    /// Record the test zero-one error every epoch (slower; the final error
    /// is always reported).
    #[serde(default)]
    pub track_test_curve: bool,
}

fn default_optimizer() -> OptimizerKind {
    OptimizerKind::Sgd
}
fn default_lr() -> f64 {
    0.01
}
fn default_batch() -> usize {
    128
}
fn default_epochs() -> usize {
    500
}
fn default_loss() -> String {
    "sigmoid".into()
}
fn default_estimator() -> EstimatorChoice {
    EstimatorChoice::Uu
}

impl TrainBlock {
    pub fn loss_spec(&self) -> Result<LossSpec> {
        LossSpec::from_name(&self.loss)
    }

    pub fn to_train_config(&self, seed: u64) -> Result<TrainConfig> {
        Ok(TrainConfig {
            optimizer: self.optimizer,
            initial_lr: self.initial_lr,
            decay: self.decay,
            batch_size: self.batch_size,
            epochs: self.epochs,
            weight_decay: self.weight_decay,
            seed,
            loss: self.loss_spec()?,
            estimator: self.estimator,
        })
    }
}

/// Grids for the sweep subcommands.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SweepBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_prime_grid: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_pairs: Option<Vec<(f64, f64)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_grid: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub data: DataConfig,
    pub method: Method,
    #[serde(default)]
    pub model: ModelConfig,
    pub train: TrainBlock,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepBlock>,
    pub seeds: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// The test-distribution prior.
    pub fn pi(&self) -> f64 {
        match (&self.data.mixture, &self.data.csv) {
            (Some(m), _) => m.pi,
            (None, Some(c)) => c.pi,
            (None, None) => f64::NAN, // rejected by validate()
        }
    }

    pub fn validate(&self) -> Result<()> {
        match (&self.data.mixture, &self.data.csv) {
            (Some(_), Some(_)) => {
                return Err(Error::Config(
                    "data block must name either a mixture or csv files, not both".into(),
                ));
            }
            (None, None) => {
                return Err(Error::Config(
                    "data block needs a mixture or csv files".into(),
                ));
            }
            (None, Some(csv)) => {
                let direct = csv.u1.is_some() || csv.u2.is_some();
                if direct && (csv.u1.is_none() || csv.u2.is_none() || csv.pool.is_some()) {
                    return Err(Error::Config(
                        "csv data needs either a pool or both u1 and u2".into(),
                    ));
                }
                if !direct && csv.pool.is_none() {
                    return Err(Error::Config(
                        "csv data needs either a pool or both u1 and u2".into(),
                    ));
                }
                if direct && self.method.needs_labels() {
                    return Err(Error::Config(format!(
                        "method {} needs labeled training data, but the config provides only unlabeled sets",
                        self.method.name()
                    )));
                }
                if !(csv.pi > 0.0 && csv.pi < 1.0) {
                    return Err(Error::SingleClass(format!("pi = {}", csv.pi)));
                }
            }
            (Some(_), None) => {}
        }
        for t in [self.data.theta, self.data.theta_prime] {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::Config(format!("training prior {t} outside [0, 1]")));
            }
        }
        if self.data.theta == self.data.theta_prime {
            return Err(Error::DegeneratePriors(format!(
                "theta = theta' = {}",
                self.data.theta
            )));
        }
        if self.data.n == 0 || self.data.n_prime == 0 || self.data.n_test == 0 {
            return Err(Error::Config("sample sizes must be positive".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        self.train.to_train_config(0)?.validate_for_harness()?;
        Ok(())
    }
}

impl TrainConfig {
    // Reuses the optimizer checks at config-load time, before any run.
    pub(crate) fn validate_for_harness(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if !(self.initial_lr > 0.0 && self.initial_lr.is_finite()) {
            return Err(Error::Config(format!("initial_lr {}", self.initial_lr)));
        }
        if !self.loss.trainable() {
            return Err(Error::UnsupportedLoss(
                "zero-one loss cannot drive training".into(),
            ));
        }
        if self.estimator == EstimatorChoice::UuSym && !self.loss.symmetric {
            return Err(Error::NonSymmetricLoss(format!(
                "estimator uu_sym needs a symmetric loss, got {}",
                self.loss.kind.name()
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
pub(crate) fn mixture_config_for_tests(method: Method) -> ExperimentConfig {
    ExperimentConfig {
        data: DataConfig {
            mixture: Some(
                GaussianMixtureSpec::new(vec![1.0, 1.0], vec![-1.0, -1.0], 1.0, 0.3).unwrap(),
            ),
            csv: None,
            theta: 0.9,
            theta_prime: 0.4,
            n: 200,
            n_prime: 100,
            n_test: 500,
            validation_n: None,
        },
        method,
        model: ModelConfig::default(),
        train: TrainBlock {
            optimizer: OptimizerKind::Sgd,
            initial_lr: 0.01,
            decay: 0.0,
            batch_size: 64,
            epochs: 5,
            weight_decay: 0.0,
            loss: "sigmoid".into(),
            estimator: EstimatorChoice::Uu,
            track_test_curve: false,
        },
        sweep: None,
        seeds: vec![0, 1],
        output: None,
    }
}
