//! Command-line driver for training binary classifiers from two unlabeled
//! sets with different class priors, plus the experiment harness around it.
//!
//! Exit codes: 0 success, 2 configuration error, 3 aborted training run,
//! 1 anything else.

use clap::{Parser, Subcommand};
use serde_json::json;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use uu_learn::bounds::{
    c_delta, chi, empirical_rademacher_linear, estimation_error_decomposition, BoundInputs,
    DEFAULT_MC_ROUNDS,
};
use uu_learn::datagen::{sample_mixture, sample_u_set, save_features_csv, save_labeled_csv};
use uu_learn::error::Error;
use uu_learn::estimators::{empirical_risk_uu, empirical_risk_uu_sym, zero_one_test_error};
use uu_learn::harness::{
    derive_seed, load_run_data, run_baselines, run_experiment, sweep_closeness, sweep_robustness,
    sweep_sizes, write_experiment_outputs, write_sizes_summary, write_sweep_summary,
    ExperimentConfig, Method, SweepPoint, DEFAULT_BASELINES,
};
use uu_learn::losses::{loss_constants, supports_single_set_witness};
use uu_learn::models::Model;
use uu_learn::rewrite::{
    ccn_backward_coefficients, classify_reduction, correction_coefficients, cost_weights,
    single_set_witness, PriorTriple,
};

#[derive(Parser)]
#[command(
    name = "uulearn",
    about = "Binary classification from two unlabeled sets with known class priors",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the configured mixture datasets as CSV (u1.csv, u2.csv, test.csv).
    Gen {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Seed for the generated data; defaults to the first config seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train the configured method over the configured seeds.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Run a single seed instead of the config's seed list.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a saved model on the configured data and print risk estimates.
    Eval {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        model: PathBuf,
        /// Seed used to regenerate the evaluation data.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Print the correction coefficients, cost weights, special-case
    /// classification, and the single-set infeasibility witness.
    RewriteCheck {
        #[arg(long)]
        pi: f64,
        #[arg(long)]
        theta: f64,
        #[arg(long = "theta-prime")]
        theta_prime: f64,
        /// Loss the witness applies to (bounded losses only).
        #[arg(long, default_value = "sigmoid")]
        loss: String,
    },
    /// Print the estimation-error bound decomposition for the configured data.
    Bound {
        #[arg(long)]
        config: PathBuf,
        /// Norm cap of the linear class (bias included via augmentation).
        #[arg(long, default_value_t = 5.0)]
        c_w: f64,
        #[arg(long, default_value_t = 0.05)]
        delta: f64,
        /// Score bound for the loss constants.
        #[arg(long, default_value_t = 10.0)]
        c_g: f64,
        #[arg(long, default_value_t = DEFAULT_MC_ROUNDS)]
        mc_rounds: usize,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Fix θ and sweep θ′ over the configured grid.
    SweepCloseness {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train with perturbed priors (εθ, ε′θ′) over the configured pairs.
    SweepRobustness {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sweep the sample size n (with n′ = n) over the configured grid.
    SweepSizes {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the baseline method comparison on one config.
    Baselines {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Comma-separated method list; defaults to uu,uu_biased,ccn,oracle_pn.
        #[arg(long)]
        methods: Option<String>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_)
        | Error::Parse { .. }
        | Error::DegeneratePriors(_)
        | Error::SingleClass(_)
        | Error::UnsupportedLoss(_)
        | Error::NonSymmetricLoss(_)
        | Error::Domain(_)
        | Error::Json(_) => 2,
        Error::AbortedRun { .. } => 3,
        _ => 1,
    }
}

fn parse_methods(arg: Option<&str>) -> Result<Vec<Method>, Error> {
    let Some(arg) = arg else {
        return Ok(DEFAULT_BASELINES.to_vec());
    };
    arg.split(',')
        .map(|name| match name.trim() {
            "uu" => Ok(Method::Uu),
            "uu_biased" => Ok(Method::UuBiased),
            "ber_fc" => Ok(Method::BerFc),
            "ccn" => Ok(Method::Ccn),
            "oracle_pn" => Ok(Method::OraclePn),
            "small_pn" => Ok(Method::SmallPn),
            "small_pn_prior_shift" => Ok(Method::SmallPnPriorShift),
            other => Err(Error::Config(format!("unknown method \"{other}\""))),
        })
        .collect()
}

fn print_json(value: &serde_json::Value) -> Result<(), Error> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn write_sweep_outputs(
    out: Option<&Path>,
    points: &[SweepPoint],
    param_names: &[&str],
    label_of: impl Fn(&SweepPoint, usize) -> String,
) -> Result<(), Error> {
    let Some(out) = out else { return Ok(()) };
    std::fs::create_dir_all(out)?;
    write_sweep_summary(&out.join("summary.csv"), param_names, points)?;
    for (i, point) in points.iter().enumerate() {
        if let Some(result) = &point.result {
            write_experiment_outputs(&out.join(label_of(point, i)), result)?;
        }
    }
    Ok(())
}

fn dispatch(command: Command) -> Result<(), Error> {
    match command {
        Command::Gen { config, out, seed } => {
            let cfg = ExperimentConfig::from_file(&config)?;
            let Some(mix) = cfg.data.mixture.clone() else {
                return Err(Error::Config("gen needs a mixture data block".into()));
            };
            let seed = seed.unwrap_or(cfg.seeds[0]);
            std::fs::create_dir_all(&out)?;
            let u1 = sample_u_set(&mix, cfg.data.theta, cfg.data.n, derive_seed(seed, 1))?;
            let u2 = sample_u_set(
                &mix,
                cfg.data.theta_prime,
                cfg.data.n_prime,
                derive_seed(seed, 2),
            )?;
            let test = sample_mixture(&mix, cfg.data.n_test, derive_seed(seed, 3))?;
            save_features_csv(&out.join("u1.csv"), &u1.features)?;
            save_features_csv(&out.join("u2.csv"), &u2.features)?;
            save_labeled_csv(&out.join("test.csv"), &test)?;
            print_json(&json!({
                "out": out,
                "seed": seed,
                "u1": {"path": "u1.csv", "n": u1.len(), "declared_prior": u1.declared_prior},
                "u2": {"path": "u2.csv", "n": u2.len(), "declared_prior": u2.declared_prior},
                "test": {"path": "test.csv", "n": test.len(), "pi": mix.pi},
            }))
        }
        Command::Train { config, seed, out } => {
            let mut cfg = ExperimentConfig::from_file(&config)?;
            if let Some(seed) = seed {
                cfg.seeds = vec![seed];
            }
            let result = run_experiment(&cfg)?;
            let out = out.or(cfg.output.clone());
            if let Some(dir) = &out {
                write_experiment_outputs(dir, &result)?;
                for (summary, model) in result.per_seed.iter().zip(&result.models) {
                    let name = if result.per_seed.len() == 1 {
                        "model.json".to_string()
                    } else {
                        format!("model_seed{}.json", summary.seed)
                    };
                    model.save_json(&dir.join(name), Some(summary.seed))?;
                }
            }
            print_json(&serde_json::to_value(&result)?)
        }
        Command::Eval {
            config,
            model,
            seed,
        } => {
            let cfg = ExperimentConfig::from_file(&config)?;
            let model = Model::load_json(&model)?;
            let seed = seed.unwrap_or(cfg.seeds[0]);
            let loss = cfg.train.loss_spec()?;
            let priors = PriorTriple::new(cfg.pi(), cfg.data.theta, cfg.data.theta_prime)?;
            let (u1, u2, test) = load_run_data(&cfg, seed)?;
            let mut report = json!({
                "uu": empirical_risk_uu(&model, &u1, &u2, &priors, &loss)?,
                "test_zero_one": zero_one_test_error(&model, &test)?,
            });
            if loss.symmetric {
                report["uu_sym"] =
                    serde_json::to_value(empirical_risk_uu_sym(&model, &u1, &u2, &priors, &loss)?)?;
            }
            print_json(&report)
        }
        Command::RewriteCheck {
            pi,
            theta,
            theta_prime,
            loss,
        } => {
            let priors = PriorTriple::new(pi, theta, theta_prime)?;
            let coeffs = correction_coefficients(&priors);
            let weights = cost_weights(&priors);
            let loss = uu_learn::losses::LossSpec::from_name(&loss)?;
            let witness = single_set_witness(pi)?;
            print_json(&json!({
                "priors": {
                    "pi": priors.pi(),
                    "theta": priors.theta(),
                    "theta_prime": priors.theta_prime(),
                    "swapped": priors.swapped(),
                },
                "coefficients": coeffs,
                "system_residuals": coeffs.system_residuals(&priors),
                "cost_weights": weights,
                "reduction": classify_reduction(&priors),
                "ccn_coefficients": ccn_backward_coefficients(&priors)?,
                "single_set_witness": {
                    "applies_to_loss": supports_single_set_witness(&loss),
                    "a": witness.a,
                    "b": witness.b,
                    "theta_required": witness.theta_required,
                    "feasible": witness.feasible(),
                },
            }))
        }
        Command::Bound {
            config,
            c_w,
            delta,
            c_g,
            mc_rounds,
            seed,
        } => {
            let cfg = ExperimentConfig::from_file(&config)?;
            let seed = seed.unwrap_or(cfg.seeds[0]);
            let priors = PriorTriple::new(cfg.pi(), cfg.data.theta, cfg.data.theta_prime)?;
            let weights = cost_weights(&priors);
            let loss = cfg.train.loss_spec()?;
            let constants = loss_constants(&loss, c_g)?;
            if !constants.usable_for_bounds() {
                return Err(Error::UnsupportedLoss(format!(
                    "{} has no finite Lipschitz constant",
                    loss.kind.name()
                )));
            }
            let (u1, u2, _) = load_run_data(&cfg, seed)?;
            // Bias handled by augmenting a constant-1 feature; the norm cap
            // c_w then covers (w, b) jointly.
            let rad_n = empirical_rademacher_linear(
                &u1.features.augment_ones(),
                c_w,
                mc_rounds,
                derive_seed(seed, 21),
            )?;
            let rad_np = empirical_rademacher_linear(
                &u2.features.augment_ones(),
                c_w,
                mc_rounds,
                derive_seed(seed, 22),
            )?;
            let inputs = BoundInputs {
                l_ell: constants.l_ell,
                c_ell: constants.c_ell,
                alpha: weights.alpha,
                alpha_prime: weights.alpha_prime,
                n: u1.len(),
                n_prime: u2.len(),
                delta,
                rad_n: rad_n.value,
                rad_n_prime: rad_np.value,
            };
            let decomposition = estimation_error_decomposition(&inputs)?;
            print_json(&json!({
                "inputs": inputs,
                "rademacher": {"u1": rad_n, "u2": rad_np},
                "chi": chi(u1.len(), u2.len(), weights.alpha, weights.alpha_prime),
                "c_delta": c_delta(delta)?,
                "decomposition": decomposition,
                "uniform_deviation_bound": decomposition.total / 2.0,
            }))
        }
        Command::SweepCloseness { config, out } => {
            let cfg = ExperimentConfig::from_file(&config)?;
            let grid = cfg
                .sweep
                .as_ref()
                .and_then(|s| s.theta_prime_grid.clone())
                .ok_or_else(|| Error::Config("config.sweep.theta_prime_grid is required".into()))?;
            let points = sweep_closeness(&cfg, &grid);
            let out = out.or(cfg.output.clone());
            write_sweep_outputs(out.as_deref(), &points, &["theta_prime"], |p, i| {
                format!(
                    "theta_prime_{}",
                    p.params["theta_prime"].as_f64().unwrap_or(i as f64)
                )
            })?;
            print_json(&serde_json::to_value(&points)?)
        }
        Command::SweepRobustness { config, out } => {
            let cfg = ExperimentConfig::from_file(&config)?;
            let pairs = cfg
                .sweep
                .as_ref()
                .and_then(|s| s.eps_pairs.clone())
                .ok_or_else(|| Error::Config("config.sweep.eps_pairs is required".into()))?;
            let points = sweep_robustness(&cfg, &pairs);
            let out = out.or(cfg.output.clone());
            write_sweep_outputs(out.as_deref(), &points, &["eps", "eps_prime"], |p, i| {
                format!(
                    "eps_{}_{}",
                    p.params["eps"].as_f64().unwrap_or(i as f64),
                    p.params["eps_prime"].as_f64().unwrap_or(0.0)
                )
            })?;
            print_json(&serde_json::to_value(&points)?)
        }
        Command::SweepSizes { config, out } => {
            let cfg = ExperimentConfig::from_file(&config)?;
            let grid = cfg
                .sweep
                .as_ref()
                .and_then(|s| s.n_grid.clone())
                .ok_or_else(|| Error::Config("config.sweep.n_grid is required".into()))?;
            let sweep = sweep_sizes(&cfg, &grid)?;
            if let Some(out) = out.or(cfg.output.clone()) {
                std::fs::create_dir_all(&out)?;
                write_sizes_summary(&out.join("summary.csv"), &sweep)?;
                for point in &sweep.points {
                    if let Some(result) = &point.result {
                        let n = point.params["n"].as_u64().unwrap_or(0);
                        write_experiment_outputs(&out.join(format!("n_{n}")), result)?;
                    }
                }
            }
            print_json(&serde_json::to_value(&sweep)?)
        }
        Command::Baselines {
            config,
            out,
            methods,
        } => {
            let cfg = ExperimentConfig::from_file(&config)?;
            let methods = parse_methods(methods.as_deref())?;
            let points = run_baselines(&cfg, &methods);
            let out = out.or(cfg.output.clone());
            write_sweep_outputs(out.as_deref(), &points, &["method"], |p, i| {
                p.params["method"]
                    .as_str()
                    .map(str::to_string)
                    .unwrap_or_else(|| format!("method_{i}"))
            })?;
            print_json(&serde_json::to_value(&points)?)
        }
    }
}
