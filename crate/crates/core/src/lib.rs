//! Training arbitrary binary classifiers from two unlabeled datasets with
//! different known class priors, by empirical risk minimization.
//!
//! Given samples from two mixtures of the same class-conditionals with
//! priors θ ≠ θ′, and the test prior π, the test risk of any scorer can be
//! rewritten — and therefore estimated without labels — through
//! backward-corrected losses ([`rewrite`]). The same is provably impossible
//! with a single unlabeled set ([`rewrite::single_set_witness`]).
//!
//! The crate provides:
//!
//! * [`losses`] — margin losses, derivatives, and their constants;
//! * [`rewrite`] — correction coefficients, cost-sensitive weights, special
//!   cases, and the single-set infeasibility witness;
//! * [`models`] — linear and MLP scorers with analytic gradients;
//! * [`estimators`] — empirical risks, the zero-one test error, and an exact
//!   risk oracle for linear scorers on Gaussian mixtures;
//! * [`optim`] — seeded minibatch SGD/Adam on the corrected objective, with
//!   unlabeled-validation model selection;
//! * [`datagen`] — mixture sampling, unlabeled-pair construction, prior
//!   subsampling/perturbation, and CSV I/O;
//! * [`bounds`] — estimation-error and uniform-deviation bounds with
//!   Monte-Carlo Rademacher complexity for linear classes;
//! * [`harness`] — the experiment driver behind the `uulearn` CLI.

pub mod bounds;
pub mod data;
pub mod datagen;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod losses;
pub mod models;
pub mod optim;
pub mod rewrite;

pub use data::{GaussianMixtureSpec, LabeledSet, Matrix, UnlabeledSet};
pub use error::{Error, Result};
pub use rewrite::PriorTriple;
