//! Per-seed execution of a configured method and aggregation over seeds.
//!
//! Every run is a pure function of (config, seed): data, model
//! initialization, and minibatch order all derive their streams from the
//! seed, so methods and sweep arms sharing a seed see identical data.

use crate::data::{LabeledSet, Matrix, UnlabeledSet};
use crate::datagen::{
    load_csv, make_u_pair, perturb_priors, sample_mixture, sample_u_set, subsample_to_prior,
    CsvData, SamplePlan,
};
use crate::error::{Error, Result};
use crate::estimators::zero_one_test_error;
use crate::harness::config::{ExperimentConfig, Method};
use crate::models::Model;
use crate::optim::{train, train_with_coefficients, EstimatorChoice, TrainHistory};
use crate::rewrite::{ccn_backward_coefficients, PriorTriple};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::Path;

// Stream tags for deriving independent seeds from one run seed.
const TAG_U1: u64 = 1;
const TAG_U2: u64 = 2;
const TAG_TEST: u64 = 3;
const TAG_POOL: u64 = 4;
const TAG_INIT: u64 = 5;
const TAG_TRAIN: u64 = 6;
const TAG_SUBSAMPLE: u64 = 7;
const TAG_VAL1: u64 = 8;
const TAG_VAL2: u64 = 9;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Independent deterministic stream for (seed, purpose).
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    splitmix64(seed ^ splitmix64(tag))
}

/// Per-run overrides threaded through by the sweeps.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Train with perturbed priors (εθ, ε′θ′) while the data keeps coming
    /// from the true ones.
    pub perturb: Option<(f64, f64)>,
}

/// Everything one seed's run consumes.
struct RunData {
    u1: UnlabeledSet,
    u2: UnlabeledSet,
    test: LabeledSet,
    /// Labeled pool for the supervised baselines.
    pool: Option<LabeledSet>,
    val: Option<(UnlabeledSet, UnlabeledSet)>,
}

fn assemble(config: &ExperimentConfig, seed: u64) -> Result<RunData> {
    let d = &config.data;
    if let Some(mix) = &d.mixture {
        let theta_mix = mix.clone();
        let u1 = sample_u_set(&theta_mix, d.theta, d.n, derive_seed(seed, TAG_U1))?;
        let u2 = sample_u_set(
            &theta_mix,
            d.theta_prime,
            d.n_prime,
            derive_seed(seed, TAG_U2),
        )?;
        let test = sample_mixture(mix, d.n_test, derive_seed(seed, TAG_TEST))?;
        let pool = if config.method.needs_labels() {
            Some(sample_mixture(
                mix,
                d.n + d.n_prime,
                derive_seed(seed, TAG_POOL),
            )?)
        } else {
            None
        };
        let val = match d.validation_n {
            Some(v) => Some((
                sample_u_set(mix, d.theta, v, derive_seed(seed, TAG_VAL1))?,
                sample_u_set(mix, d.theta_prime, v, derive_seed(seed, TAG_VAL2))?,
            )),
            None => None,
        };
        return Ok(RunData {
            u1,
            u2,
            test,
            pool,
            val,
        });
    }

    let csv = d.csv.as_ref().expect("validated config has csv data");
    let test = match load_csv(&csv.test)? {
        CsvData::Labeled(t) => t,
        CsvData::Features(_) => {
            return Err(Error::Config(format!(
                "test file {} has no label column",
                csv.test.display()
            )));
        }
    };
    if let Some(pool_path) = &csv.pool {
        let pool = match load_csv(pool_path)? {
            CsvData::Labeled(p) => p,
            CsvData::Features(_) => {
                return Err(Error::Config(format!(
                    "pool file {} has no label column",
                    pool_path.display()
                )));
            }
        };
        let (pos, neg) = pool.split_by_class();
        let plan = SamplePlan {
            n: d.n,
            n_prime: d.n_prime,
            theta: d.theta,
            theta_prime: d.theta_prime,
            seed: derive_seed(seed, TAG_U1),
        };
        let (u1, u2) = make_u_pair(&pos, &neg, &plan)?;
        Ok(RunData {
            u1,
            u2,
            test,
            pool: Some(pool),
            val: None,
        })
    } else {
        let load_features = |path: &Path, prior: f64| -> Result<UnlabeledSet> {
            match load_csv(path)? {
                CsvData::Features(m) => UnlabeledSet::new(m, prior),
                CsvData::Labeled(l) => UnlabeledSet::new(l.features, prior),
            }
        };
        let u1 = load_features(csv.u1.as_ref().unwrap(), d.theta)?;
        let u2 = load_features(csv.u2.as_ref().unwrap(), d.theta_prime)?;
        Ok(RunData {
            u1,
            u2,
            test,
            pool: None,
            val: None,
        })
    }
}

/// Rebuild the unlabeled pair and labeled test set exactly as a training run
/// at this seed would see them (used by the eval and bound subcommands).
pub fn load_run_data(
    config: &ExperimentConfig,
    seed: u64,
) -> Result<(UnlabeledSet, UnlabeledSet, LabeledSet)> {
    let data = assemble(config, seed)?;
    Ok((data.u1, data.u2, data.test))
}

/// A seeded random subset of exactly `k` rows (original order preserved).
fn seeded_subset(set: &LabeledSet, k: usize, seed: u64) -> LabeledSet {
    let k = k.min(set.len()).max(1);
    let mut idx: Vec<usize> = (0..set.len()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut keep = idx[..k].to_vec();
    keep.sort_unstable();
    set.select(&keep)
}

fn train_pn_style(
    model: Model,
    pos: Matrix,
    neg: Matrix,
    pi_weight: f64,
    tc: &crate::optim::TrainConfig,
    test: Option<&LabeledSet>,
) -> Result<(Model, TrainHistory)> {
    let u_pos = UnlabeledSet::new(pos, 1.0)?;
    let u_neg = UnlabeledSet::new(neg, 0.0)?;
    let priors = PriorTriple::new(pi_weight, 1.0, 0.0)?;
    train(model, &u_pos, &u_neg, &priors, tc, None, test)
}

/// Outcome of one (config, seed) run.
#[derive(Debug, Clone)]
pub struct SeedRun {
    pub summary: SeedSummary,
    pub history: TrainHistory,
    pub model: Model,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeedSummary {
    pub seed: u64,
    pub test_error: f64,
    pub final_train_risk: Option<f64>,
    pub negative_risk_epochs: usize,
    pub negative_batches: usize,
}

pub fn run_method(config: &ExperimentConfig, seed: u64) -> Result<SeedRun> {
    run_method_with(config, seed, RunOptions::default())
}

/// Run one seed of the configured method. All methods share the data, model,
/// optimizer, and seed discipline, so differences isolate the estimator.
pub fn run_method_with(
    config: &ExperimentConfig,
    seed: u64,
    options: RunOptions,
) -> Result<SeedRun> {
    let data = assemble(config, seed)?;
    let pi = config.pi();
    let true_priors = PriorTriple::new(pi, config.data.theta, config.data.theta_prime)?;
    let train_priors = match options.perturb {
        Some((eps, eps_prime)) => perturb_priors(&true_priors, eps, eps_prime)?,
        None => true_priors,
    };
    let mut tc = config.train.to_train_config(derive_seed(seed, TAG_TRAIN))?;
    let input_dim = data.u1.features.ncols();
    let model0 = config.model.build(input_dim, derive_seed(seed, TAG_INIT))?;
    let test_curve = if config.train.track_test_curve {
        Some(&data.test)
    } else {
        None
    };

    let (model, history) = match config.method {
        Method::Uu => {
            let val = data.val.as_ref().map(|(a, b)| (a, b));
            train(
                model0,
                &data.u1,
                &data.u2,
                &train_priors,
                &tc,
                val,
                test_curve,
            )?
        }
        Method::BerFc => {
            let ber_priors =
                PriorTriple::new(0.5, train_priors.theta(), train_priors.theta_prime())?;
            let val = data.val.as_ref().map(|(a, b)| (a, b));
            train(
                model0,
                &data.u1,
                &data.u2,
                &ber_priors,
                &tc,
                val,
                test_curve,
            )?
        }
        Method::UuBiased => train_pn_style(
            model0,
            data.u1.features.clone(),
            data.u2.features.clone(),
            pi,
            &tc,
            test_curve,
        )?,
        Method::Ccn => {
            let coeffs = ccn_backward_coefficients(&train_priors)?;
            // The noise-corrected objective has no simplified form here.
            tc.estimator = EstimatorChoice::Uu;
            train_with_coefficients(model0, &data.u1, &data.u2, &coeffs, &tc, test_curve)?
        }
        Method::OraclePn => {
            let pool = data.pool.as_ref().expect("labeled method has a pool");
            let sized = seeded_subset(
                pool,
                config.data.n + config.data.n_prime,
                derive_seed(seed, TAG_SUBSAMPLE),
            );
            let (pos, neg) = sized.split_by_class();
            train_pn_style(model0, pos, neg, pi, &tc, test_curve)?
        }
        Method::SmallPn => {
            let pool = data.pool.as_ref().expect("labeled method has a pool");
            let k = ((pool.len() as f64) * 0.1).floor() as usize;
            let small = seeded_subset(pool, k, derive_seed(seed, TAG_SUBSAMPLE));
            let (pos, neg) = small.split_by_class();
            train_pn_style(model0, pos, neg, pi, &tc, test_curve)?
        }
        Method::SmallPnPriorShift => {
            let pool = data.pool.as_ref().expect("labeled method has a pool");
            let shifted =
                subsample_to_prior(pool, config.data.theta, derive_seed(seed, TAG_SUBSAMPLE))?;
            let k = ((shifted.len() as f64) * 0.1).floor() as usize;
            let small = seeded_subset(&shifted, k, derive_seed(seed, TAG_SUBSAMPLE ^ 0xff));
            // Trained unaware of the shift: plain ERM, i.e. class weights at
            // the subset's own empirical prior.
            let pi_hat = small.pos_fraction();
            let (pos, neg) = small.split_by_class();
            train_pn_style(model0, pos, neg, pi_hat, &tc, test_curve)?
        }
    };

    let test_error = zero_one_test_error(&model, &data.test)?.value;
    Ok(SeedRun {
        summary: SeedSummary {
            seed,
            test_error,
            final_train_risk: history.epochs.last().map(|e| e.train_risk),
            negative_risk_epochs: history.negative_risk_epochs,
            negative_batches: history.negative_batches,
        },
        history,
        model,
    })
}

/// Aggregate over the configured seeds: per-seed summaries, mean and sample
/// standard deviation of the final test errors, per-epoch histories, the
/// config echo, and wall-clock time.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub method: Method,
    pub config: ExperimentConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<(f64, f64)>,
    pub per_seed: Vec<SeedSummary>,
    pub mean_error: f64,
    pub std_dev: f64,
    pub wall_clock_secs: f64,
    #[serde(skip)]
    pub histories: Vec<TrainHistory>,
    #[serde(skip)]
    pub models: Vec<Model>,
}

impl ExperimentResult {
    /// JSON with the wall-clock field zeroed; byte-identical across re-runs
    /// of the same config.
    pub fn canonical_json(&self) -> String {
        let mut value = serde_json::to_value(self).expect("result serializes");
        zero_wall_clock(&mut value);
        serde_json::to_string_pretty(&value).expect("result serializes")
    }
}

/// Recursively zero every `wall_clock_secs` field.
pub fn zero_wall_clock(value: &mut serde_json::Value) {
    match value {
        serde_json::Value::Object(map) => {
            for (k, v) in map.iter_mut() {
                if k == "wall_clock_secs" {
                    *v = serde_json::Value::from(0.0);
                } else {
                    zero_wall_clock(v);
                }
            }
        }
        serde_json::Value::Array(items) => {
            for v in items {
                zero_wall_clock(v);
            }
        }
        _ => {}
    }
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    run_experiment_with(config, RunOptions::default())
}

pub fn run_experiment_with(
    config: &ExperimentConfig,
    options: RunOptions,
) -> Result<ExperimentResult> {
    config.validate()?;
    let start = std::time::Instant::now();
    let runs: Vec<Result<SeedRun>> = config
        .seeds
        .par_iter()
        .map(|&seed| run_method_with(config, seed, options))
        .collect();
    let mut per_seed = Vec::with_capacity(runs.len());
    let mut histories = Vec::with_capacity(runs.len());
    let mut models = Vec::with_capacity(runs.len());
    for run in runs {
        let run = run?;
        per_seed.push(run.summary);
        histories.push(run.history);
        models.push(run.model);
    }
    let (mean_error, std_dev) = mean_and_std(per_seed.iter().map(|s| s.test_error));
    Ok(ExperimentResult {
        method: config.method,
        config: config.clone(),
        perturbation: options.perturb,
        per_seed,
        mean_error,
        std_dev,
        wall_clock_secs: start.elapsed().as_secs_f64(),
        histories,
        models,
    })
}

/// Mean and sample standard deviation (n−1 denominator; 0 for a single
/// value).
pub fn mean_and_std(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let v: Vec<f64> = values.collect();
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    if v.len() == 1 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (v.len() - 1) as f64;
    (mean, var.sqrt())
}

/// Write `result.json` plus one history CSV per seed into `dir`.
pub fn write_experiment_outputs(dir: &Path, result: &ExperimentResult) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let json = serde_json::to_string_pretty(result)?;
    std::fs::write(dir.join("result.json"), json + "\n")?;
    for (summary, history) in result.per_seed.iter().zip(&result.histories) {
        let name = if result.per_seed.len() == 1 {
            "history.csv".to_string()
        } else {
            format!("history_seed{}.csv", summary.seed)
        };
        let mut file = std::io::BufWriter::new(std::fs::File::create(dir.join(name))?);
        history.write_csv(&mut file)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::mixture_config_for_tests;

    #[test]
    fn seed_derivation_is_stable_and_spread() {
        let a = derive_seed(7, TAG_U1);
        assert_eq!(a, derive_seed(7, TAG_U1));
        assert_ne!(a, derive_seed(7, TAG_U2));
        assert_ne!(a, derive_seed(8, TAG_U1));
    }

    #[test]
    fn uu_run_produces_finite_summary() {
        let cfg = mixture_config_for_tests(Method::Uu);
        let run = run_method(&cfg, 0).unwrap();
        assert!(run.summary.test_error.is_finite());
        assert!((0.0..=1.0).contains(&run.summary.test_error));
        assert_eq!(run.history.epochs.len(), cfg.train.epochs);
        assert!(run.summary.final_train_risk.unwrap().is_finite());
    }

    #[test]
    fn all_methods_run_on_mixture_data() {
        for method in [
            Method::Uu,
            Method::UuBiased,
            Method::BerFc,
            Method::Ccn,
            Method::OraclePn,
            Method::SmallPn,
            Method::SmallPnPriorShift,
        ] {
            let cfg = mixture_config_for_tests(method);
            let run = run_method(&cfg, 1).unwrap_or_else(|e| panic!("{method:?}: {e}"));
            assert!(run.summary.test_error.is_finite(), "{method:?}");
        }
    }

    #[test]
    fn ber_fc_equals_uu_when_pi_is_half() {
        let mut cfg = mixture_config_for_tests(Method::Uu);
        if let Some(mix) = cfg.data.mixture.as_mut() {
            mix.pi = 0.5;
        }
        let uu = run_method(&cfg, 3).unwrap();
        cfg.method = Method::BerFc;
        let ber = run_method(&cfg, 3).unwrap();
        assert_eq!(uu.summary.test_error, ber.summary.test_error);
        assert_eq!(uu.history, ber.history);
        assert_eq!(uu.model.params(), ber.model.params());
    }

    #[test]
    fn methods_share_data_at_a_seed() {
        // The UU and CCN arms must see identical unlabeled pairs.
        let cfg = mixture_config_for_tests(Method::Uu);
        let a = assemble(&cfg, 5).unwrap();
        let mut cfg2 = cfg.clone();
        cfg2.method = Method::Ccn;
        let b = assemble(&cfg2, 5).unwrap();
        assert_eq!(a.u1.features, b.u1.features);
        assert_eq!(a.u2.features, b.u2.features);
        assert_eq!(a.test.features, b.test.features);
    }

    #[test]
    fn experiment_aggregation_and_determinism() {
        let mut cfg = mixture_config_for_tests(Method::Uu);
        cfg.seeds = vec![0, 1, 2];
        let r1 = run_experiment(&cfg).unwrap();
        let r2 = run_experiment(&cfg).unwrap();
        assert_eq!(r1.per_seed, r2.per_seed);
        assert_eq!(r1.canonical_json(), r2.canonical_json());
        assert_eq!(r1.per_seed.len(), 3);
        let (mean, std) = mean_and_std(r1.per_seed.iter().map(|s| s.test_error));
        assert_eq!(mean, r1.mean_error);
        assert_eq!(std, r1.std_dev);
        assert!(r1.wall_clock_secs > 0.0);
    }

    #[test]
    fn perturbed_run_changes_training_but_not_data() {
        let mut cfg = mixture_config_for_tests(Method::Uu);
        cfg.data.theta = 0.7;
        cfg.data.theta_prime = 0.3;
        let plain = run_method(&cfg, 2).unwrap();
        let shifted = run_method_with(
            &cfg,
            2,
            RunOptions {
                perturb: Some((1.1, 0.9)),
            },
        )
        .unwrap();
        assert_ne!(plain.model.params(), shifted.model.params());
        let identity = run_method_with(
            &cfg,
            2,
            RunOptions {
                perturb: Some((1.0, 1.0)),
            },
        )
        .unwrap();
        assert_eq!(plain.model.params(), identity.model.params());
    }

    #[test]
    fn outputs_written_to_directory() {
        let mut cfg = mixture_config_for_tests(Method::Uu);
        cfg.seeds = vec![4, 9];
        let result = run_experiment(&cfg).unwrap();
        let dir = std::env::temp_dir().join("uu_learn_runner_test");
        let _ = std::fs::remove_dir_all(&dir);
        write_experiment_outputs(&dir, &result).unwrap();
        assert!(dir.join("result.json").exists());
        assert!(dir.join("history_seed4.csv").exists());
        assert!(dir.join("history_seed9.csv").exists());
        let text = std::fs::read_to_string(dir.join("result.json")).unwrap();
        let value: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(value["method"], "uu");
        assert!(value["per_seed"].as_array().unwrap().len() == 2);
    }
}
