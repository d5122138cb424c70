//! Full-batch descent with Armijo backtracking for OL, GOL and coGOL fits.
//!
//! Search directions are gradients scaled by a fixed positive-definite
//! metric: the data term's curvature bound (`σ' ≤ 1/4`) plus the exact
//! Hessian of the L2 and deviation penalties. The deviation penalty at large
//! β is extremely stiff; folding it into the metric keeps unit steps
//! admissible for every β, so the β → ∞ limit is reached smoothly.
//!
//! OL ties all weight rows to a single vector and keeps thresholds ordered
//! through [`theta_parametrization`].

use std::fmt;
use std::time::Instant;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss::{sigmoid, softplus};
use crate::model::{Dataset, Mode, OrdinalModel, PenaltySpec};
use crate::objective::Problem;

/// Armijo sufficient-decrease constant.
pub const ARMIJO_C: f64 = 1e-4;
const MAX_HALVINGS: usize = 60;
const INIT_JITTER: f64 = 1e-3;
/// Lower clamp on softplus slopes when mapping threshold steps back to the
/// raw parametrization.
const MIN_GAP_SLOPE: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSpec {
    pub mode: Mode,
    pub pen: PenaltySpec,
    pub max_iters: usize,
    /// Tolerance on the gradient ∞-norm.
    pub grad_tol: f64,
    pub seed: u64,
    /// Keep one [`TraceRecord`] per accepted step.
    #[serde(default)]
    pub trace: bool,
}

impl FitSpec {
    pub fn new(mode: Mode, pen: PenaltySpec) -> Self {
        Self {
            mode,
            pen,
            max_iters: 5000,
            grad_tol: 1e-6,
            seed: 0,
            trace: false,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_trace(mut self, trace: bool) -> Self {
        self.trace = trace;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter(
                "max_iters must be at least 1".into(),
            ));
        }
        if !(self.grad_tol > 0.0) {
            return Err(Error::InvalidParameter("grad_tol must be positive".into()));
        }
        PenaltySpec::new(self.pen.alpha, self.pen.beta)?;
        if self.mode == Mode::CoGol && self.pen.is_tied() {
            return Err(Error::InvalidParameter(
                "coGOL needs a finite beta; use OL for the tied limit".into(),
            ));
        }
        Ok(())
    }

    /// Penalty actually optimized: GOL drops the deviation term, OL ties rows.
    pub fn effective_penalty(&self) -> PenaltySpec {
        match self.mode {
            Mode::Ol => PenaltySpec {
                alpha: self.pen.alpha,
                beta: f64::INFINITY,
            },
            Mode::Gol => PenaltySpec {
                alpha: self.pen.alpha,
                beta: 0.0,
            },
            Mode::CoGol => self.pen,
        }
    }
}

/// One accepted optimizer step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iteration: usize,
    pub objective: f64,
    pub grad_norm: f64,
    pub step_size: f64,
}

impl TraceRecord {
    pub const HEADER: &'static str = "iteration\tobjective\tgrad_norm\tstep_size";
}

impl fmt::Display for TraceRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}\t{:.17e}\t{:.6e}\t{:.6e}",
            self.iteration, self.objective, self.grad_norm, self.step_size
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub final_objective: f64,
    pub iterations: usize,
    pub converged: bool,
    pub grad_norm: f64,
    /// Seconds.
    pub wall_time: f64,
    /// Diagonal jitter added to the Gram matrix (kernel fits only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel_jitter: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub trace: Vec<TraceRecord>,
}

/// Monotone thresholds from unconstrained parameters:
/// `θ_1 = raw_1`, `θ_j = θ_{j−1} + softplus(raw_j)`.
pub fn theta_parametrization(raw: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(raw.len());
    let mut acc = 0.0;
    for (j, &r) in raw.iter().enumerate() {
        acc = if j == 0 { r } else { acc + softplus(r) };
        out.push(acc);
    }
    out
}

/// Fit a linear OL, GOL or coGOL model.
pub fn fit(data: &Dataset, spec: &FitSpec) -> Result<(OrdinalModel, FitReport)> {
    let (weights, thresholds, report) = fit_design(data.features(), data.labels(), data.k(), spec)?;
    let model = OrdinalModel::new(spec.mode, weights, thresholds, None)?;
    Ok((model, report))
}

pub(crate) fn check_labels(labels: &[usize], k: usize) -> Result<()> {
    if k < 2 {
        return Err(Error::DegenerateLabels(
            labels.first().copied().unwrap_or(1),
        ));
    }
    let first = labels[0];
    if labels.iter().all(|&y| y == first) {
        return Err(Error::DegenerateLabels(first));
    }
    Ok(())
}

/// Fit on an arbitrary design matrix (raw features or an empirical kernel
/// map). Returns `(k − 1) × dim` weights and thresholds.
pub(crate) fn fit_design(
    features: &Array2<f64>,
    labels: &[usize],
    k: usize,
    spec: &FitSpec,
) -> Result<(Array2<f64>, Array1<f64>, FitReport)> {
    spec.validate()?;
    check_labels(labels, k)?;
    let start = Instant::now();
    let pen = spec.effective_penalty();
    let rows = k - 1;
    let problem = Problem::new(features, labels, rows, &pen);
    let dim = features.ncols();

    let layout: Box<dyn Layout> = if pen.is_tied() {
        Box::new(Tied::new(&problem))
    } else {
        Box::new(Untied::new(&problem)?)
    };

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut x: Vec<f64> = (0..layout.len())
        .map(|_| rng.gen_range(-INIT_JITTER..=INIT_JITTER))
        .collect();

    let mut work = Workspace::new(rows, dim);
    let mut grad = vec![0.0; x.len()];
    let mut f = layout.value_grad(&problem, &x, &mut work, &mut grad);
    if !f.is_finite() || grad.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteObjective { iteration: 0 });
    }

    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    let mut grad_norm = inf_norm(&grad);
    let mut dir = vec![0.0; x.len()];
    let mut trial = vec![0.0; x.len()];
    let mut trial_grad = vec![0.0; x.len()];

    while iterations < spec.max_iters {
        if grad_norm <= spec.grad_tol {
            converged = true;
            break;
        }
        layout.direction(&x, &grad, &mut dir);
        let mut slope: f64 = grad.iter().zip(&dir).map(|(g, d)| g * d).sum();
        if !(slope < 0.0) {
            for (d, g) in dir.iter_mut().zip(&grad) {
                *d = -g;
            }
            slope = -grad.iter().map(|g| g * g).sum::<f64>();
        }

        let mut step = 1.0;
        let mut accepted = false;
        for attempt in 0..MAX_HALVINGS {
            for ((t, xv), d) in trial.iter_mut().zip(&x).zip(&dir) {
                *t = xv + step * d;
            }
            // The first (usually accepted) trial also yields the gradient.
            let f_new = if attempt == 0 {
                layout.value_grad(&problem, &trial, &mut work, &mut trial_grad)
            } else {
                layout.value(&problem, &trial, &mut work)
            };
            if f_new.is_finite() && f_new <= f + ARMIJO_C * step * slope {
                if attempt > 0 {
                    layout.value_grad(&problem, &trial, &mut work, &mut trial_grad);
                }
                std::mem::swap(&mut x, &mut trial);
                std::mem::swap(&mut grad, &mut trial_grad);
                f = f_new;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            // No representable decrease along the direction: stalled at
            // floating-point resolution.
            break;
        }
        iterations += 1;
        if grad.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteObjective {
                iteration: iterations,
            });
        }
        grad_norm = inf_norm(&grad);
        if spec.trace {
            trace.push(TraceRecord {
                iteration: iterations,
                objective: f,
                grad_norm,
                step_size: step,
            });
        }
    }
    if !converged && grad_norm <= spec.grad_tol {
        converged = true;
    }

    let (weights, thresholds) = layout.unpack(&x);
    let report = FitReport {
        final_objective: f,
        iterations,
        converged,
        grad_norm,
        wall_time: start.elapsed().as_secs_f64(),
        kernel_jitter: None,
        trace,
    };
    Ok((weights, thresholds, report))
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// Scratch buffers for expanding packed parameters into full rows.
struct Workspace {
    w: Vec<f64>,
    theta: Vec<f64>,
    gw: Vec<f64>,
    gt: Vec<f64>,
}

impl Workspace {
    fn new(rows: usize, dim: usize) -> Self {
        Self {
            w: vec![0.0; rows * dim],
            theta: vec![0.0; rows],
            gw: vec![0.0; rows * dim],
            gt: vec![0.0; rows],
        }
    }
}

/// Packing of model parameters into the optimizer's flat vector.
trait Layout {
    fn len(&self) -> usize;
    fn value(&self, problem: &Problem, x: &[f64], work: &mut Workspace) -> f64;
    fn value_grad(
        &self,
        problem: &Problem,
        x: &[f64],
        work: &mut Workspace,
        grad: &mut [f64],
    ) -> f64;
    /// Writes the preconditioned descent direction `−P⁻¹ grad`.
    fn direction(&self, x: &[f64], grad: &[f64], dir: &mut [f64]);
    fn unpack(&self, x: &[f64]) -> (Array2<f64>, Array1<f64>);
}

/// Mean of `x xᵀ` and of `x` over the design rows.
fn second_moments(features: &Array2<f64>) -> (DMatrix<f64>, DVector<f64>) {
    let (n, d) = features.dim();
    let mut s = DMatrix::zeros(d, d);
    let mut m = DVector::zeros(d);
    for row in features.rows() {
        for a in 0..d {
            m[a] += row[a];
            for b in 0..=a {
                s[(a, b)] += row[a] * row[b];
            }
        }
    }
    for a in 0..d {
        for b in 0..a {
            s[(b, a)] = s[(a, b)];
        }
    }
    (s / n as f64, m / n as f64)
}

fn ridge(mat: &DMatrix<f64>) -> f64 {
    let scale = mat.diagonal().iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    1e-12 * scale
}

fn cholesky(mut mat: DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    let eps = ridge(&mat);
    for i in 0..mat.nrows() {
        mat[(i, i)] += eps;
    }
    Cholesky::new(mat)
        .ok_or_else(|| Error::Numerical("preconditioner is not positive definite".into()))
}

/// Independent rows: `x = [W (rows × dim, row-major), θ (rows)]`.
struct Untied {
    rows: usize,
    dim: usize,
    /// Eigenvectors of the penalty coupling `2αI + 2βL` (columns).
    basis: DMatrix<f64>,
    /// One factorized `(dim + 1)` block per coupling eigenvalue.
    blocks: Vec<Cholesky<f64, Dyn>>,
}

impl Untied {
    fn new(problem: &Problem) -> Result<Self> {
        let rows = problem.rows();
        let dim = problem.dim();
        let (s, m) = second_moments(problem.features());
        let q = dim + 1;
        // Curvature bound of one threshold's logistic term in (w_j, θ_j):
        // (1/4)·E[z zᵀ] with z = (−x, 1).
        let mut base = DMatrix::zeros(q, q);
        for a in 0..dim {
            for b in 0..dim {
                base[(a, b)] = 0.25 * s[(a, b)];
            }
            base[(a, dim)] = -0.25 * m[a];
            base[(dim, a)] = -0.25 * m[a];
        }
        base[(dim, dim)] = 0.25;

        let mut coupling = DMatrix::zeros(rows, rows);
        for j in 0..rows {
            coupling[(j, j)] = 2.0 * problem.alpha();
        }
        let beta = problem.beta();
        for j in 1..rows {
            coupling[(j - 1, j - 1)] += 2.0 * beta;
            coupling[(j, j)] += 2.0 * beta;
            coupling[(j - 1, j)] -= 2.0 * beta;
            coupling[(j, j - 1)] -= 2.0 * beta;
        }
        let eig = SymmetricEigen::new(coupling);
        let mut blocks = Vec::with_capacity(rows);
        for &lambda in eig.eigenvalues.iter() {
            let mut block = base.clone();
            for a in 0..dim {
                block[(a, a)] += lambda.max(0.0);
            }
            blocks.push(cholesky(block)?);
        }
        Ok(Self {
            rows,
            dim,
            basis: eig.eigenvectors,
            blocks,
        })
    }
}

impl Layout for Untied {
    fn len(&self) -> usize {
        self.rows * (self.dim + 1)
    }

    fn value(&self, problem: &Problem, x: &[f64], _work: &mut Workspace) -> f64 {
        let (w, theta) = x.split_at(self.rows * self.dim);
        problem.value(w, theta)
    }

    fn value_grad(
        &self,
        problem: &Problem,
        x: &[f64],
        _work: &mut Workspace,
        grad: &mut [f64],
    ) -> f64 {
        let (w, theta) = x.split_at(self.rows * self.dim);
        let (gw, gt) = grad.split_at_mut(self.rows * self.dim);
        problem.value_grad(w, theta, gw, gt)
    }

    fn direction(&self, _x: &[f64], grad: &[f64], dir: &mut [f64]) {
        let (rows, dim) = (self.rows, self.dim);
        let q = dim + 1;
        let mut g = DMatrix::zeros(rows, q);
        for j in 0..rows {
            for c in 0..dim {
                g[(j, c)] = grad[j * dim + c];
            }
            g[(j, dim)] = grad[rows * dim + j];
        }
        let rotated = self.basis.transpose() * g;
        let mut solved = DMatrix::zeros(rows, q);
        for (e, block) in self.blocks.iter().enumerate() {
            let rhs = rotated.row(e).transpose();
            let sol = block.solve(&rhs);
            solved.row_mut(e).copy_from(&sol.transpose());
        }
        let back = &self.basis * solved;
        for j in 0..rows {
            for c in 0..dim {
                dir[j * dim + c] = -back[(j, c)];
            }
            dir[rows * dim + j] = -back[(j, dim)];
        }
    }

    fn unpack(&self, x: &[f64]) -> (Array2<f64>, Array1<f64>) {
        let (w, theta) = x.split_at(self.rows * self.dim);
        (
            Array2::from_shape_vec((self.rows, self.dim), w.to_vec()).expect("shape"),
            Array1::from(theta.to_vec()),
        )
    }
}

/// Shared weight vector with monotone thresholds: `x = [w (dim), raw (rows)]`.
struct Tied {
    rows: usize,
    dim: usize,
    metric: Cholesky<f64, Dyn>,
}

impl Tied {
    fn new(problem: &Problem) -> Self {
        let rows = problem.rows();
        let dim = problem.dim();
        let (s, m) = second_moments(problem.features());
        let q = dim + rows;
        let r = rows as f64;
        let mut h = DMatrix::zeros(q, q);
        for a in 0..dim {
            for b in 0..dim {
                h[(a, b)] = 0.25 * r * s[(a, b)];
            }
            h[(a, a)] += 2.0 * problem.alpha() * r;
            for j in 0..rows {
                h[(a, dim + j)] = -0.25 * m[a];
                h[(dim + j, a)] = -0.25 * m[a];
            }
        }
        for j in 0..rows {
            h[(dim + j, dim + j)] = 0.25;
        }
        // The threshold block alone is positive definite and the Schur
        // complement is r/4·Cov(x) + 2αr·I ⪰ 0, so the ridge suffices.
        let metric = cholesky(h).expect("tied metric is positive definite after ridge");
        Self { rows, dim, metric }
    }

    fn expand(&self, x: &[f64], work: &mut Workspace) {
        let (w, raw) = x.split_at(self.dim);
        for j in 0..self.rows {
            work.w[j * self.dim..(j + 1) * self.dim].copy_from_slice(w);
        }
        let theta = theta_parametrization(raw);
        work.theta.copy_from_slice(&theta);
    }
}

impl Layout for Tied {
    fn len(&self) -> usize {
        self.dim + self.rows
    }

    fn value(&self, problem: &Problem, x: &[f64], work: &mut Workspace) -> f64 {
        self.expand(x, work);
        problem.value(&work.w, &work.theta)
    }

    fn value_grad(
        &self,
        problem: &Problem,
        x: &[f64],
        work: &mut Workspace,
        grad: &mut [f64],
    ) -> f64 {
        self.expand(x, work);
        let value = problem.value_grad(&work.w, &work.theta, &mut work.gw, &mut work.gt);
        let (gw, graw) = grad.split_at_mut(self.dim);
        gw.fill(0.0);
        for j in 0..self.rows {
            for (a, b) in gw
                .iter_mut()
                .zip(&work.gw[j * self.dim..(j + 1) * self.dim])
            {
                *a += b;
            }
        }
        // Chain rule through the cumulative softplus: ∂θ_j/∂raw_1 = 1 and
        // ∂θ_j/∂raw_i = σ(raw_i) for 2 ≤ i ≤ j.
        let raw = &x[self.dim..];
        let mut tail = 0.0;
        for i in (0..self.rows).rev() {
            tail += work.gt[i];
            graw[i] = if i == 0 { tail } else { sigmoid(raw[i]) * tail };
        }
        value
    }

    fn direction(&self, x: &[f64], grad: &[f64], dir: &mut [f64]) {
        // Step computed in (w, θ) coordinates under the curvature metric, then
        // pulled back through a slope-clamped Jacobian J_c of the threshold map:
        // d = −J_c⁻¹ H⁻¹ J_c⁻ᵀ g, a positive-definite scaling of g.
        let (dim, rows) = (self.dim, self.rows);
        let raw = &x[dim..];
        let slopes: Vec<f64> = (0..rows)
            .map(|i| {
                if i == 0 {
                    1.0
                } else {
                    sigmoid(raw[i]).max(MIN_GAP_SLOPE)
                }
            })
            .collect();
        let mut v = DVector::zeros(dim + rows);
        for a in 0..dim {
            v[a] = grad[a];
        }
        // Solve J_cᵀ u = g_raw. J_c[j][i] = slope_i for i ≤ j (slope_0 = 1),
        // so (J_cᵀ u)_i = slope_i · Σ_{j≥i} u_j.
        let mut next_tail = 0.0;
        for i in (0..rows).rev() {
            let tail = grad[dim + i] / slopes[i];
            v[dim + i] = tail - next_tail;
            next_tail = tail;
        }
        let step = self.metric.solve(&v);
        for a in 0..dim {
            dir[a] = -step[a];
        }
        // Solve J_c Δraw = Δθ: Δθ_j − Δθ_{j−1} = slope_j Δraw_j.
        let mut prev = 0.0;
        for j in 0..rows {
            let dtheta = step[dim + j];
            dir[dim + j] = -(dtheta - prev) / slopes[j];
            prev = dtheta;
        }
    }

    fn unpack(&self, x: &[f64]) -> (Array2<f64>, Array1<f64>) {
        let (w, raw) = x.split_at(self.dim);
        (
            Array2::from_shape_fn((self.rows, self.dim), |(_, c)| w[c]),
            Array1::from(theta_parametrization(raw)),
        )
    }
}
