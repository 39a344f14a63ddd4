//! Dataset containers: a minimal row-major matrix, labeled and unlabeled
//! sample sets, and the Gaussian-mixture specification used by the synthetic
//! benchmark and the exact risk oracle.

use crate::error::{Error, Result};

/// Dense row-major matrix of f64 features.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape {
                expected: rows * cols,
                got: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let ncols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * ncols);
        for r in rows {
            if r.len() != ncols {
                return Err(Error::Shape {
                    expected: ncols,
                    got: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols: ncols,
            data,
        })
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.cols.max(1))
    }

    /// Rows selected by index, in the given order.
    pub fn select_rows(&self, idx: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Matrix {
            rows: idx.len(),
            cols: self.cols,
            data,
        }
    }

    /// Same rows with a constant-1 column appended (bias augmentation).
    pub fn augment_ones(&self) -> Matrix {
        let mut data = Vec::with_capacity(self.rows * (self.cols + 1));
        for r in self.iter_rows() {
            data.extend_from_slice(r);
            data.push(1.0);
        }
        Matrix {
            rows: self.rows,
            cols: self.cols + 1,
            data,
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// A sample of feature vectors drawn from one of the two training marginals,
/// tagged with the class prior of that marginal.
#[derive(Debug, Clone)]
pub struct UnlabeledSet {
    pub features: Matrix,
    pub declared_prior: f64,
    pub origin_seed: Option<u64>,
    /// Set when the generator had to fall back to sampling with replacement.
    pub with_replacement: bool,
}

impl UnlabeledSet {
    pub fn new(features: Matrix, declared_prior: f64) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::EmptySample("unlabeled set must have n ≥ 1".into()));
        }
        if !features.all_finite() {
            return Err(Error::Domain("unlabeled features must be finite".into()));
        }
        if !(0.0..=1.0).contains(&declared_prior) {
            return Err(Error::Domain(format!(
                "declared prior {declared_prior} outside [0, 1]"
            )));
        }
        Ok(Self {
            features,
            declared_prior,
            origin_seed: None,
            with_replacement: false,
        })
    }

    pub fn len(&self) -> usize {
        self.features.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }
}

/// Feature matrix with ±1 labels.
#[derive(Debug, Clone)]
pub struct LabeledSet {
    pub features: Matrix,
    pub labels: Vec<f64>,
    n_pos: usize,
    n_neg: usize,
}

impl LabeledSet {
    pub fn new(features: Matrix, labels: Vec<f64>) -> Result<Self> {
        if labels.len() != features.nrows() {
            return Err(Error::Shape {
                expected: features.nrows(),
                got: labels.len(),
            });
        }
        if !features.all_finite() {
            return Err(Error::Domain("labeled features must be finite".into()));
        }
        let mut n_pos = 0;
        let mut n_neg = 0;
        for &y in &labels {
            if y == 1.0 {
                n_pos += 1;
            } else if y == -1.0 {
                n_neg += 1;
            } else {
                return Err(Error::Domain(format!("label {y} is not +1 or -1")));
            }
        }
        Ok(Self {
            features,
            labels,
            n_pos,
            n_neg,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_pos(&self) -> usize {
        self.n_pos
    }

    pub fn n_neg(&self) -> usize {
        self.n_neg
    }

    /// Empirical positive-class fraction.
    pub fn pos_fraction(&self) -> f64 {
        self.n_pos as f64 / self.labels.len() as f64
    }

    /// Split into (positive rows, negative rows), preserving order.
    pub fn split_by_class(&self) -> (Matrix, Matrix) {
        let pos_idx: Vec<usize> = (0..self.len()).filter(|&i| self.labels[i] == 1.0).collect();
        let neg_idx: Vec<usize> = (0..self.len())
            .filter(|&i| self.labels[i] == -1.0)
            .collect();
        (
            self.features.select_rows(&pos_idx),
            self.features.select_rows(&neg_idx),
        )
    }

    /// Subset by row index, in the given order.
    pub fn select(&self, idx: &[usize]) -> LabeledSet {
        let labels: Vec<f64> = idx.iter().map(|&i| self.labels[i]).collect();
        let n_pos = labels.iter().filter(|&&y| y == 1.0).count();
        LabeledSet {
            features: self.features.select_rows(idx),
            n_pos,
            n_neg: labels.len() - n_pos,
            labels,
        }
    }
}

/// Two-component Gaussian mixture with shared isotropic covariance σ²I and
/// test-time positive-class prior π.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct GaussianMixtureSpec {
    pub mean_pos: Vec<f64>,
    pub mean_neg: Vec<f64>,
    pub sigma: f64,
    pub pi: f64,
}

impl GaussianMixtureSpec {
    pub fn new(mean_pos: Vec<f64>, mean_neg: Vec<f64>, sigma: f64, pi: f64) -> Result<Self> {
        if mean_pos.len() != mean_neg.len() || mean_pos.is_empty() {
            return Err(Error::Shape {
                expected: mean_pos.len(),
                got: mean_neg.len(),
            });
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::Domain(format!("sigma {sigma} must be positive")));
        }
        if !(pi > 0.0 && pi < 1.0) {
            return Err(Error::SingleClass(format!("pi {pi} must lie in (0, 1)")));
        }
        Ok(Self {
            mean_pos,
            mean_neg,
            sigma,
            pi,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean_pos.len()
    }
}
