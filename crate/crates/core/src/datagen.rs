//! Synthetic data generation and dataset plumbing: Gaussian-mixture sampling,
//! building unlabeled pairs from labeled pools, class-prior subsampling and
//! perturbation, and CSV I/O.
//!
//! Every generator is a pure function of its inputs and a seed.

use crate::data::{GaussianMixtureSpec, LabeledSet, Matrix, UnlabeledSet};
use crate::error::{Error, Result};
use crate::rewrite::PriorTriple;
use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};
use std::path::Path;

/// Sizes, priors, and seed for building one unlabeled pair.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SamplePlan {
    pub n: usize,
    pub n_prime: usize,
    pub theta: f64,
    pub theta_prime: f64,
    pub seed: u64,
}

impl SamplePlan {
    fn validate(&self) -> Result<()> {
        if self.n == 0 || self.n_prime == 0 {
            return Err(Error::Config("sample sizes must be positive".into()));
        }
        for t in [self.theta, self.theta_prime] {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::Domain(format!("prior {t} outside [0, 1]")));
            }
        }
        if self.theta == self.theta_prime {
            return Err(Error::DegeneratePriors(format!(
                "theta = theta' = {}",
                self.theta
            )));
        }
        Ok(())
    }
}

/// Draw n labeled points: labels from a π-coin, features from the matching
/// Gaussian component.
pub fn sample_mixture(spec: &GaussianMixtureSpec, n: usize, seed: u64) -> Result<LabeledSet> {
    if n == 0 {
        return Err(Error::Config("cannot sample 0 points".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = spec.dim();
    let mut data = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let positive = rng.random_bool(spec.pi);
        let mean = if positive {
            &spec.mean_pos
        } else {
            &spec.mean_neg
        };
        for &m in mean {
            let z: f64 = rng.sample(StandardNormal);
            data.push(m + spec.sigma * z);
        }
        labels.push(if positive { 1.0 } else { -1.0 });
    }
    LabeledSet::new(Matrix::new(n, d, data)?, labels)
}

/// Draw an unlabeled set directly from the mixture marginal with the given
/// class prior; labels are discarded at the source.
pub fn sample_u_set(
    spec: &GaussianMixtureSpec,
    prior: f64,
    n: usize,
    seed: u64,
) -> Result<UnlabeledSet> {
    if !(0.0..=1.0).contains(&prior) {
        return Err(Error::Domain(format!("prior {prior} outside [0, 1]")));
    }
    let marginal = GaussianMixtureSpec {
        mean_pos: spec.mean_pos.clone(),
        mean_neg: spec.mean_neg.clone(),
        sigma: spec.sigma,
        pi: prior.clamp(1e-12, 1.0 - 1e-12), // sample_mixture needs an open prior
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = spec.dim();
    let mut data = Vec::with_capacity(n * d);
    for _ in 0..n {
        let positive = rng.random_bool(prior);
        let mean = if positive {
            &marginal.mean_pos
        } else {
            &marginal.mean_neg
        };
        for &m in mean {
            let z: f64 = rng.sample(StandardNormal);
            data.push(m + spec.sigma * z);
        }
    }
    let mut set = UnlabeledSet::new(Matrix::new(n, d, data)?, prior)?;
    set.origin_seed = Some(seed);
    Ok(set)
}

/// Cursor over a shuffled pool, reshuffling when exhausted and remembering
/// that recycling happened.
struct PoolCursor<'a> {
    pool: &'a Matrix,
    order: Vec<usize>,
    next: usize,
    recycled: bool,
}

impl<'a> PoolCursor<'a> {
    fn new(pool: &'a Matrix, rng: &mut ChaCha8Rng) -> Self {
        let mut order: Vec<usize> = (0..pool.nrows()).collect();
        order.shuffle(rng);
        Self {
            pool,
            order,
            next: 0,
            recycled: false,
        }
    }

    fn draw(&mut self, rng: &mut ChaCha8Rng, what: &str) -> Result<(&'a [f64], bool)> {
        if self.pool.is_empty() {
            return Err(Error::DataExhausted(format!("{what} pool is empty")));
        }
        if self.next >= self.order.len() {
            self.order.shuffle(rng);
            self.next = 0;
            self.recycled = true;
        }
        let row = self.pool.row(self.order[self.next]);
        self.next += 1;
        Ok((row, self.recycled))
    }
}

/// Build the two unlabeled sets from labeled pools: each point of the first
/// set comes from the positive pool with probability θ (an i.i.d. coin per
/// point), likewise with θ′ for the second set. Points are drawn without
/// replacement until a pool runs dry, after which that pool reshuffles and
/// recycles; sets touched by recycling carry `with_replacement = true`.
pub fn make_u_pair(
    pos_pool: &Matrix,
    neg_pool: &Matrix,
    plan: &SamplePlan,
) -> Result<(UnlabeledSet, UnlabeledSet)> {
    plan.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    let mut pos = PoolCursor::new(pos_pool, &mut rng);
    let mut neg = PoolCursor::new(neg_pool, &mut rng);

    let build = |n: usize,
                 theta: f64,
                 rng: &mut ChaCha8Rng,
                 pos: &mut PoolCursor,
                 neg: &mut PoolCursor|
     -> Result<UnlabeledSet> {
        let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n);
        let mut replaced = false;
        for _ in 0..n {
            let (row, recycled) = if rng.random_bool(theta) {
                pos.draw(rng, "positive")?
            } else {
                neg.draw(rng, "negative")?
            };
            replaced |= recycled;
            rows.push(row.to_vec());
        }
        let mut set = UnlabeledSet::new(Matrix::from_rows(&rows)?, theta)?;
        set.origin_seed = Some(plan.seed);
        set.with_replacement = replaced;
        Ok(set)
    };

    let u1 = build(plan.n, plan.theta, &mut rng, &mut pos, &mut neg)?;
    let u2 = build(plan.n_prime, plan.theta_prime, &mut rng, &mut pos, &mut neg)?;
    Ok((u1, u2))
}

/// Largest subset of `data` whose positive fraction matches `pi` within one
/// sample (|p − π·T| ≤ 1 with p = round(π·T)). Rows are chosen by a seeded
/// shuffle per class and returned in original order.
pub fn subsample_to_prior(data: &LabeledSet, pi: f64, seed: u64) -> Result<LabeledSet> {
    if data.n_pos() == 0 || data.n_neg() == 0 {
        return Err(Error::SingleClass(
            "subsampling needs both classes present".into(),
        ));
    }
    if !(0.0 < pi && pi < 1.0) {
        return Err(Error::SingleClass(format!("target prior pi = {pi}")));
    }
    let n_pos = data.n_pos();
    let n_neg = data.n_neg();

    let mut chosen = None;
    for total in (1..=n_pos + n_neg).rev() {
        let p = (pi * total as f64).round() as usize;
        if p <= n_pos && total - p <= n_neg {
            chosen = Some((total, p));
            break;
        }
    }
    let (total, keep_pos) = chosen.expect("total = 1 is always feasible");
    let keep_neg = total - keep_pos;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pos_idx: Vec<usize> = (0..data.len()).filter(|&i| data.labels[i] == 1.0).collect();
    let mut neg_idx: Vec<usize> = (0..data.len())
        .filter(|&i| data.labels[i] == -1.0)
        .collect();
    pos_idx.shuffle(&mut rng);
    neg_idx.shuffle(&mut rng);
    let mut keep: Vec<usize> = pos_idx[..keep_pos]
        .iter()
        .chain(neg_idx[..keep_neg].iter())
        .copied()
        .collect();
    keep.sort_unstable();
    Ok(data.select(&keep))
}

/// Scale the training priors to (εθ, ε′θ′) for training-time use while data
/// keeps being generated from (θ, θ′). Out-of-range or colliding perturbed
/// values are refused rather than clamped.
pub fn perturb_priors(priors: &PriorTriple, eps: f64, eps_prime: f64) -> Result<PriorTriple> {
    let theta = eps * priors.theta();
    let theta_prime = eps_prime * priors.theta_prime();
    for t in [theta, theta_prime] {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::DegeneratePriors(format!(
                "perturbed prior {t} outside [0, 1]"
            )));
        }
    }
    PriorTriple::new(priors.pi(), theta, theta_prime)
}

/// Result of loading a CSV: a labeled set when the header ends in `label`,
/// otherwise the bare feature matrix (the declared prior is supplied by the
/// caller).
#[derive(Debug, Clone)]
pub enum CsvData {
    Labeled(LabeledSet),
    Features(Matrix),
}

fn header_dim(header: &str) -> Option<(usize, bool)> {
    let cells: Vec<&str> = header.split(',').collect();
    let labeled = cells.last() == Some(&"label");
    let feats = if labeled {
        &cells[..cells.len() - 1]
    } else {
        &cells[..]
    };
    if feats.is_empty() {
        return None;
    }
    for (i, c) in feats.iter().enumerate() {
        if *c != format!("f{}", i + 1) {
            return None;
        }
    }
    Some((feats.len(), labeled))
}

/// Load `f1,…,fd[,label]` CSV. Errors carry the offending 1-based line.
pub fn load_csv(path: &Path) -> Result<CsvData> {
    let file = std::fs::File::open(path)?;
    let reader = std::io::BufReader::new(file);
    let mut lines = reader.lines().enumerate();

    let (_, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        msg: "empty file, expected header f1,…,fd[,label]".into(),
    })?;
    let (dim, labeled) = header_dim(&header?).ok_or(Error::Parse {
        line: 1,
        msg: "expected header f1,…,fd[,label]".into(),
    })?;

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut labels: Vec<f64> = Vec::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        let line = line?;
        let cells: Vec<&str> = line.split(',').collect();
        let expected = dim + usize::from(labeled);
        if cells.len() != expected {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("expected {expected} cells, got {}", cells.len()),
            });
        }
        let mut row = Vec::with_capacity(dim);
        for cell in &cells[..dim] {
            let v: f64 = cell.trim().parse().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("non-numeric cell \"{cell}\""),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("non-finite value {v}"),
                });
            }
            row.push(v);
        }
        if labeled {
            let y: f64 = cells[dim].trim().parse().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("non-numeric label \"{}\"", cells[dim]),
            })?;
            if y != 1.0 && y != -1.0 {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("label {y} is not +1 or -1"),
                });
            }
            labels.push(y);
        }
        rows.push(row);
    }
    let matrix = Matrix::from_rows(&rows)?;
    if labeled {
        Ok(CsvData::Labeled(LabeledSet::new(matrix, labels)?))
    } else {
        Ok(CsvData::Features(matrix))
    }
}

fn write_rows(out: &mut impl Write, m: &Matrix, labels: Option<&[f64]>) -> std::io::Result<()> {
    for (i, row) in m.iter_rows().enumerate() {
        let mut first = true;
        for v in row {
            if !first {
                write!(out, ",")?;
            }
            write!(out, "{v}")?;
            first = false;
        }
        if let Some(ls) = labels {
            write!(out, ",{}", ls[i])?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Write a labeled set as `f1,…,fd,label`; floats round-trip exactly.
pub fn save_labeled_csv(path: &Path, set: &LabeledSet) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for i in 1..=set.features.ncols() {
        write!(out, "f{i},")?;
    }
    writeln!(out, "label")?;
    write_rows(&mut out, &set.features, Some(&set.labels))?;
    Ok(())
}

/// Write bare features as `f1,…,fd`.
pub fn save_features_csv(path: &Path, m: &Matrix) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    let header: Vec<String> = (1..=m.ncols()).map(|i| format!("f{i}")).collect();
    writeln!(out, "{}", header.join(","))?;
    write_rows(&mut out, m, None)?;
    Ok(())
}
