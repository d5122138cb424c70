//! Datasets, ordinal threshold models and their prediction rule.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::KernelSpec;

/// Feature matrix with 1-based ordinal labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Array2<f64>,
    labels: Vec<usize>,
    k: usize,
}

impl Dataset {
    /// Validates that every label lies in `1..=k` and every feature is finite.
    ///
    /// `k = 1` is accepted so that single-class files can be loaded and
    /// reported; fitting rejects them as degenerate.
    pub fn new(features: Array2<f64>, labels: Vec<usize>, k: usize) -> Result<Self> {
        let (n, p) = features.dim();
        if n == 0 {
            return Err(Error::InvalidDataset("no samples".into()));
        }
        if p == 0 {
            return Err(Error::InvalidDataset("no features".into()));
        }
        if labels.len() != n {
            return Err(Error::dim("label vector", n, labels.len()));
        }
        if k == 0 {
            return Err(Error::InvalidDataset("class count must be positive".into()));
        }
        if let Some(&label) = labels.iter().find(|&&y| y < 1 || y > k) {
            return Err(Error::LabelOutOfRange { label, k });
        }
        if let Some(((i, j), _)) = features.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidDataset(format!(
                "non-finite feature at row {i}, column {j}"
            )));
        }
        let features = features.as_standard_layout().into_owned();
        Ok(Self {
            features,
            labels,
            k,
        })
    }

    /// Builds from row slices; `k` is taken as the largest label (at least 2).
    pub fn from_rows(rows: &[Vec<f64>], labels: Vec<usize>) -> Result<Self> {
        let p = rows.first().map_or(0, Vec::len);
        let mut flat = Vec::with_capacity(rows.len() * p);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != p {
                return Err(Error::InvalidDataset(format!(
                    "row {i} has {} features, expected {p}",
                    r.len()
                )));
            }
            flat.extend_from_slice(r);
        }
        let features = Array2::from_shape_vec((rows.len(), p), flat)
            .map_err(|e| Error::InvalidDataset(e.to_string()))?;
        let k = labels.iter().copied().max().unwrap_or(0).max(2);
        Self::new(features, labels, k)
    }

    pub fn n(&self) -> usize {
        self.features.nrows()
    }

    pub fn p(&self) -> usize {
        self.features.ncols()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Feature row `i` as a contiguous slice.
    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        self.features
            .row(i)
            .to_slice()
            .expect("dataset features are stored row-major")
    }

    /// Number of samples in each class, indexed by `label − 1`.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.k];
        for &y in &self.labels {
            counts[y - 1] += 1;
        }
        counts
    }

    /// Number of distinct labels actually present.
    pub fn classes_present(&self) -> usize {
        self.class_counts().iter().filter(|&&c| c > 0).count()
    }

    /// Rows at `indices`, keeping the class count.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select(Axis(0), indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            k: self.k,
        }
    }

    /// Same labels with a replacement feature matrix of equal row count.
    pub fn with_features(&self, features: Array2<f64>) -> Result<Dataset> {
        Dataset::new(features, self.labels.clone(), self.k)
    }
}

/// Model family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// One shared weight vector, nondecreasing thresholds.
    Ol,
    /// Independent weight vector per threshold.
    Gol,
    /// Per-threshold weights tied by a deviation penalty.
    CoGol,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Ol, Mode::Gol, Mode::CoGol];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Ol => "ol",
            Mode::Gol => "gol",
            Mode::CoGol => "cogol",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ol" => Ok(Mode::Ol),
            "gol" => Ok(Mode::Gol),
            "cogol" => Ok(Mode::CoGol),
            other => Err(Error::InvalidParameter(format!(
                "unknown mode `{other}` (expected ol, gol or cogol)"
            ))),
        }
    }
}

/// Regularization strengths: `alpha` on `Σ‖w_j‖²`, `beta` on
/// `Σ‖w_j − w_{j−1}‖²`. `beta = ∞` means the rows are tied structurally.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltySpec {
    pub alpha: f64,
    pub beta: f64,
}

impl PenaltySpec {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "alpha must be finite and nonnegative, got {alpha}"
            )));
        }
        if !(beta >= 0.0) || beta.is_nan() {
            return Err(Error::InvalidParameter(format!(
                "beta must be nonnegative, got {beta}"
            )));
        }
        Ok(Self { alpha, beta })
    }

    /// Infinite deviation strength, i.e. the OL limit.
    pub fn tied(alpha: f64) -> Result<Self> {
        Self::new(alpha, f64::INFINITY)
    }

    pub fn is_tied(&self) -> bool {
        self.beta == f64::INFINITY
    }
}

/// Threshold model with `k − 1` weight rows and thresholds.
///
/// For kernel models the weight rows are dual coefficients over the support
/// points stored in `kernel`.
#[derive(Debug, Clone, PartialEq)]
pub struct OrdinalModel {
    weights: Array2<f64>,
    thresholds: Array1<f64>,
    mode: Mode,
    kernel: Option<KernelSpec>,
}

impl OrdinalModel {
    pub fn new(
        mode: Mode,
        weights: Array2<f64>,
        thresholds: Array1<f64>,
        kernel: Option<KernelSpec>,
    ) -> Result<Self> {
        let rows = weights.nrows();
        if rows == 0 {
            return Err(Error::InvalidModel(
                "model needs at least one threshold".into(),
            ));
        }
        if thresholds.len() != rows {
            return Err(Error::dim("threshold vector", rows, thresholds.len()));
        }
        if weights
            .iter()
            .chain(thresholds.iter())
            .any(|v| !v.is_finite())
        {
            return Err(Error::InvalidModel("non-finite parameter".into()));
        }
        if let Some(spec) = &kernel {
            if spec.support_points().nrows() != weights.ncols() {
                return Err(Error::dim(
                    "dual coefficient columns",
                    spec.support_points().nrows(),
                    weights.ncols(),
                ));
            }
        }
        if mode == Mode::Ol {
            let first = weights.row(0);
            if weights.rows().into_iter().any(|r| r != first) {
                return Err(Error::InvalidModel(
                    "OL model requires identical weight rows".into(),
                ));
            }
            if thresholds.windows(2).into_iter().any(|w| w[0] > w[1]) {
                return Err(Error::InvalidModel(
                    "OL model requires nondecreasing thresholds".into(),
                ));
            }
        }
        Ok(Self {
            weights: weights.as_standard_layout().into_owned(),
            thresholds,
            mode,
            kernel,
        })
    }

    /// Linear OL model from a shared weight vector.
    pub fn parallel(w: &[f64], thresholds: &[f64]) -> Result<Self> {
        let rows = thresholds.len();
        let weights = Array2::from_shape_fn((rows, w.len()), |(_, c)| w[c]);
        Self::new(Mode::Ol, weights, Array1::from(thresholds.to_vec()), None)
    }

    /// Linear model with independent rows (row-major `(k − 1) × p`).
    pub fn generalized(mode: Mode, weights: Array2<f64>, thresholds: &[f64]) -> Result<Self> {
        Self::new(mode, weights, Array1::from(thresholds.to_vec()), None)
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// Number of classes.
    pub fn k(&self) -> usize {
        self.thresholds.len() + 1
    }

    /// Input feature dimension.
    pub fn p(&self) -> usize {
        match &self.kernel {
            Some(spec) => spec.support_points().ncols(),
            None => self.weights.ncols(),
        }
    }

    pub fn weights(&self) -> &Array2<f64> {
        &self.weights
    }

    pub fn thresholds(&self) -> &Array1<f64> {
        &self.thresholds
    }

    pub fn kernel(&self) -> Option<&KernelSpec> {
        self.kernel.as_ref()
    }

    #[inline]
    pub(crate) fn weight_row(&self, j: usize) -> &[f64] {
        self.weights.row(j).to_slice().expect("row-major weights")
    }

    /// `g_j(x) = θ_j − w_j·x`, or `θ_j − a_j·κ(x)` for kernel models.
    pub fn decision_values(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.p() {
            return Err(Error::dim("feature vector", self.p(), x.len()));
        }
        let mut out = vec![0.0; self.thresholds.len()];
        match &self.kernel {
            Some(spec) => {
                let column = spec.column(x);
                self.linear_decision(&column, &mut out);
            }
            None => self.linear_decision(x, &mut out),
        }
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite decision value".into()));
        }
        Ok(out)
    }

    #[inline]
    pub(crate) fn linear_decision(&self, z: &[f64], out: &mut [f64]) {
        for (j, g) in out.iter_mut().enumerate() {
            *g = self.thresholds[j] - dot(self.weight_row(j), z);
        }
    }

    /// `1 + #{j : g_j(x) < 0}`.
    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        Ok(predict_from_decision(&self.decision_values(x)?))
    }

    /// Predictions for every row of `data`.
    pub fn predict_dataset(&self, data: &Dataset) -> Result<Vec<usize>> {
        if data.p() != self.p() {
            return Err(Error::dim("dataset features", self.p(), data.p()));
        }
        let preds = crate::par::map_chunks(data.n(), |range| {
            range
                .map(|i| self.predict(data.row(i)))
                .collect::<Result<Vec<_>>>()
        });
        let mut out = Vec::with_capacity(data.n());
        for part in preds {
            out.extend(part?);
        }
        Ok(out)
    }
}

/// Prediction rule on raw decision values: count of strictly negative
/// entries plus one. Non-monotone vectors are accepted.
pub fn predict_from_decision(g: &[f64]) -> usize {
    1 + g.iter().filter(|&&v| v < 0.0).count()
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
