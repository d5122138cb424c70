//! Kernelized OL / GOL / coGOL through per-threshold representer expansions.
//!
//! Each weight row is `w_j = Σ_i a_{ji} φ(x_i)` over the training points, so
//! `g_j(x) = θ_j − a_j·κ(x)`, the L2 penalty becomes `a_jᵀ K a_j` and the
//! deviation penalty `(a_j − a_{j−1})ᵀ K (a_j − a_{j−1})`.
//!
//! Fitting factors `K = V Λ Vᵀ` and solves the equivalent primal problem on
//! the empirical feature map `Z = V Λ^{1/2}` (where `Zᵀ Z = Λ` and
//! `‖Λ^{1/2} Vᵀ a‖² = aᵀ K a`), then maps back with `a = V Λ^{−1/2} w`.

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{dot, Dataset, Mode, OrdinalModel, PenaltySpec};
use crate::optimizer::{fit_design, FitReport, FitSpec};
use crate::par;

/// Diagonal jitter added to the Gram matrix before factorization.
pub const GRAM_JITTER: f64 = 1e-10;
/// Eigen-directions below this fraction of the largest eigenvalue carry no
/// usable signal and are dropped from the feature map.
const EIGEN_CUTOFF: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Linear,
    Rbf,
}

/// Kernel choice plus the points anchoring the dual representation.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSpec {
    kind: KernelKind,
    gamma: f64,
    support_points: Array2<f64>,
}

impl KernelSpec {
    pub fn linear(support_points: Array2<f64>) -> Result<Self> {
        Self::new(KernelKind::Linear, 0.0, support_points)
    }

    pub fn rbf(gamma: f64, support_points: Array2<f64>) -> Result<Self> {
        Self::new(KernelKind::Rbf, gamma, support_points)
    }

    /// `gamma` is ignored (stored as 0) for the linear kernel.
    pub fn new(kind: KernelKind, gamma: f64, support_points: Array2<f64>) -> Result<Self> {
        if kind == KernelKind::Rbf && !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "RBF gamma must be positive and finite, got {gamma}"
            )));
        }
        if support_points.nrows() == 0 || support_points.ncols() == 0 {
            return Err(Error::InvalidParameter("empty support set".into()));
        }
        if support_points.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite support point".into()));
        }
        let gamma = if kind == KernelKind::Linear {
            0.0
        } else {
            gamma
        };
        Ok(Self {
            kind,
            gamma,
            support_points: support_points.as_standard_layout().into_owned(),
        })
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn support_points(&self) -> &Array2<f64> {
        &self.support_points
    }

    fn support_row(&self, i: usize) -> &[f64] {
        self.support_points.row(i).to_slice().expect("row-major")
    }

    #[inline]
    fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match self.kind {
            KernelKind::Linear => dot(a, b),
            KernelKind::Rbf => (-self.gamma * sq_dist(a, b)).exp(),
        }
    }

    /// `κ(x) = [k(s_i, x)]_i` against every support point.
    pub fn column(&self, x: &[f64]) -> Vec<f64> {
        (0..self.support_points.nrows())
            .map(|i| self.eval(self.support_row(i), x))
            .collect()
    }

    /// Kernel matrix between the rows of `x` and the support points.
    pub fn cross_gram(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        match self.kind {
            KernelKind::Rbf => rbf_gram(x, &self.support_points, self.gamma),
            KernelKind::Linear => linear_gram(x, &self.support_points),
        }
    }
}

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn gram_with<F>(x: &Array2<f64>, y: &Array2<f64>, f: F) -> Result<Array2<f64>>
where
    F: Fn(&[f64], &[f64]) -> f64 + Sync + Send,
{
    if x.ncols() != y.ncols() {
        return Err(Error::dim("kernel feature dimension", x.ncols(), y.ncols()));
    }
    let x = x.as_standard_layout();
    let y = y.as_standard_layout();
    let (a, b) = (x.nrows(), y.nrows());
    let rows = par::map_indexed(a, |i| {
        let xi = x.row(i);
        let xi = xi.as_slice().expect("standard layout");
        (0..b)
            .map(|j| f(xi, y.row(j).as_slice().expect("standard layout")))
            .collect::<Vec<_>>()
    });
    Ok(Array2::from_shape_vec((a, b), rows.concat()).expect("shape"))
}

/// `K_ij = exp(−γ ‖x_i − y_j‖²)`.
pub fn rbf_gram(x: &Array2<f64>, y: &Array2<f64>, gamma: f64) -> Result<Array2<f64>> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "RBF gamma must be positive, got {gamma}"
        )));
    }
    gram_with(x, y, |a, b| (-gamma * sq_dist(a, b)).exp())
}

/// `K_ij = x_i · y_j`.
pub fn linear_gram(x: &Array2<f64>, y: &Array2<f64>) -> Result<Array2<f64>> {
    gram_with(x, y, dot)
}

/// Log-uniform search interval for the RBF bandwidth:
/// `[0.01 / (2τ₀²), 100 / (2τ₀²)]` where `τ₀` is the nearest-rank
/// `1/k`-quantile of the pairwise Euclidean distances.
pub fn gamma_range(x: &Array2<f64>, k: usize) -> Result<(f64, f64)> {
    let n = x.nrows();
    if n < 2 {
        return Err(Error::InvalidParameter(
            "gamma range needs at least two points".into(),
        ));
    }
    if k == 0 {
        return Err(Error::InvalidParameter(
            "class count must be positive".into(),
        ));
    }
    let x = x.as_standard_layout();
    let mut dists = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        let xi = x.row(i);
        for j in (i + 1)..n {
            let s: f64 = xi
                .iter()
                .zip(x.row(j))
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            dists.push(s.sqrt());
        }
    }
    dists.sort_by(f64::total_cmp);
    // Nearest rank: ⌈N/k⌉ (1-based).
    let rank = dists.len().div_ceil(k).max(1);
    let tau = dists[rank - 1];
    if !(tau > 0.0) {
        return Err(Error::DegenerateGeometry(
            "quantile of pairwise distances is zero (coincident points)".into(),
        ));
    }
    let base = 2.0 * tau * tau;
    Ok((0.01 / base, 100.0 / base))
}

/// `aᵀ K a`.
pub fn rkhs_norm_sq(a: &[f64], gram: &Array2<f64>) -> f64 {
    let m = a.len();
    let mut total = 0.0;
    for i in 0..m {
        let row = gram.row(i);
        let ki: f64 = row.iter().zip(a).map(|(k, v)| k * v).sum();
        total += a[i] * ki;
    }
    total
}

/// Dual form of the regularized all-thresholds objective. `coeffs` is
/// `(k − 1) × m`; `gram` is the training Gram matrix (`m = n`).
pub fn dual_objective(
    coeffs: &Array2<f64>,
    thresholds: &[f64],
    gram: &Array2<f64>,
    labels: &[usize],
    pen: &PenaltySpec,
) -> Result<f64> {
    let rows = coeffs.nrows();
    let n = labels.len();
    if gram.dim() != (n, n) {
        return Err(Error::dim("gram matrix", n, gram.nrows()));
    }
    if coeffs.ncols() != n {
        return Err(Error::dim("dual coefficient columns", n, coeffs.ncols()));
    }
    if thresholds.len() != rows {
        return Err(Error::dim("threshold vector", rows, thresholds.len()));
    }
    let mut data = 0.0;
    let mut g = vec![0.0; rows];
    for i in 0..n {
        let ki = gram.row(i);
        for (j, gj) in g.iter_mut().enumerate() {
            *gj = thresholds[j]
                - coeffs
                    .row(j)
                    .iter()
                    .zip(ki)
                    .map(|(a, b)| a * b)
                    .sum::<f64>();
        }
        data += crate::loss::all_thresholds_loss(&g, labels[i], rows + 1)?;
    }
    let mut l2 = 0.0;
    for j in 0..rows {
        l2 += rkhs_norm_sq(coeffs.row(j).as_slice().expect("row-major"), gram);
    }
    let mut dev = 0.0;
    if pen.beta > 0.0 && rows > 1 {
        if pen.is_tied() {
            return Err(Error::InvalidParameter(
                "dual objective needs a finite beta".into(),
            ));
        }
        for j in 1..rows {
            let delta: Vec<f64> = coeffs
                .row(j)
                .iter()
                .zip(coeffs.row(j - 1))
                .map(|(a, b)| a - b)
                .collect();
            dev += rkhs_norm_sq(&delta, gram);
        }
    }
    let value = data / n as f64 + pen.alpha * l2 + pen.beta * dev;
    if !value.is_finite() {
        return Err(Error::Numerical("non-finite dual objective".into()));
    }
    Ok(value)
}

/// Fitted kernel model: dual coefficients over the training points.
#[derive(Debug, Clone, PartialEq)]
pub struct DualModel {
    model: OrdinalModel,
}

impl DualModel {
    pub fn new(
        mode: Mode,
        dual_coeffs: Array2<f64>,
        thresholds: Array1<f64>,
        spec: KernelSpec,
    ) -> Result<Self> {
        Ok(Self {
            model: OrdinalModel::new(mode, dual_coeffs, thresholds, Some(spec))?,
        })
    }

    pub fn dual_coeffs(&self) -> &Array2<f64> {
        self.model.weights()
    }

    pub fn thresholds(&self) -> &Array1<f64> {
        self.model.thresholds()
    }

    pub fn spec(&self) -> &KernelSpec {
        self.model.kernel().expect("dual model carries a kernel")
    }

    pub fn mode(&self) -> Mode {
        self.model.mode()
    }

    pub fn decision_values(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.model.decision_values(x)
    }

    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        self.model.predict(x)
    }

    pub fn predict_dataset(&self, data: &Dataset) -> Result<Vec<usize>> {
        self.model.predict_dataset(data)
    }

    pub fn as_model(&self) -> &OrdinalModel {
        &self.model
    }

    pub fn into_model(self) -> OrdinalModel {
        self.model
    }
}

impl TryFrom<OrdinalModel> for DualModel {
    type Error = Error;

    fn try_from(model: OrdinalModel) -> Result<Self> {
        if model.kernel().is_none() {
            return Err(Error::InvalidModel("model has no kernel attachment".into()));
        }
        Ok(Self { model })
    }
}

/// Empirical feature map of a PSD Gram matrix.
struct FeatureMap {
    /// Retained eigenvectors (columns), `n × r`.
    vectors: DMatrix<f64>,
    /// Matching eigenvalues.
    values: Vec<f64>,
}

impl FeatureMap {
    fn new(gram: &Array2<f64>, jitter: f64) -> Result<Self> {
        let n = gram.nrows();
        let mut k = DMatrix::from_fn(n, n, |i, j| 0.5 * (gram[(i, j)] + gram[(j, i)]));
        for i in 0..n {
            k[(i, i)] += jitter;
        }
        let eig = SymmetricEigen::new(k);
        let top = eig.eigenvalues.iter().fold(0.0_f64, |m, &v| m.max(v));
        if !(top > 0.0) || !top.is_finite() {
            return Err(Error::Numerical(
                "Gram matrix has no positive spectrum".into(),
            ));
        }
        let keep: Vec<usize> = (0..n)
            .filter(|&c| eig.eigenvalues[c] > EIGEN_CUTOFF * top)
            .collect();
        let vectors = DMatrix::from_fn(n, keep.len(), |i, c| eig.eigenvectors[(i, keep[c])]);
        let values = keep.iter().map(|&c| eig.eigenvalues[c]).collect();
        Ok(Self { vectors, values })
    }

    /// `Z = V Λ^{1/2}` for the training points.
    fn design(&self) -> Array2<f64> {
        let (n, r) = self.vectors.shape();
        Array2::from_shape_fn((n, r), |(i, c)| {
            self.vectors[(i, c)] * self.values[c].sqrt()
        })
    }

    /// `a = V Λ^{−1/2} w` for each weight row.
    fn to_dual(&self, weights: &Array2<f64>) -> Array2<f64> {
        let (n, r) = self.vectors.shape();
        let rows = weights.nrows();
        let mut out = Array2::zeros((rows, n));
        for j in 0..rows {
            for c in 0..r {
                let scale = weights[(j, c)] / self.values[c].sqrt();
                for i in 0..n {
                    out[(j, i)] += self.vectors[(i, c)] * scale;
                }
            }
        }
        out
    }
}

/// Fit a kernel model whose support points are exactly the training rows.
pub fn fit_kernel(
    data: &Dataset,
    spec: &FitSpec,
    kspec: &KernelSpec,
) -> Result<(DualModel, FitReport)> {
    if kspec.support_points() != data.features() {
        return Err(Error::InvalidParameter(
            "kernel support points must be the training features".into(),
        ));
    }
    let gram = kspec.cross_gram(data.features())?;
    if gram.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite Gram matrix".into()));
    }
    let map = FeatureMap::new(&gram, GRAM_JITTER)?;
    let (weights, thresholds, mut report) =
        fit_design(&map.design(), data.labels(), data.k(), spec)?;
    report.kernel_jitter = Some(GRAM_JITTER);
    let mut coeffs = map.to_dual(&weights);
    if spec.mode == Mode::Ol {
        // Identical primal rows map to identical dual rows; copy to make the
        // tie exact in floating point.
        let first = coeffs.row(0).to_owned();
        for mut row in coeffs.rows_mut() {
            row.assign(&first);
        }
    }
    let model = DualModel::new(spec.mode, coeffs, thresholds, kspec.clone())?;
    Ok((model, report))
}
