//! The regularized all-thresholds objective and its analytic gradient.
//!
//! ```text
//! J(W, θ) = (1/n) Σ_i ℓ_AT(y_i, θ − W x_i) + α Σ_j ‖w_j‖² + β Σ_{j≥2} ‖w_j − w_{j−1}‖²
//! ```
//!
//! The penalties are added once to the mean data loss. Sample accumulation is
//! chunked (see [`crate::par`]) so results do not depend on the thread count.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::model::{dot, Dataset, OrdinalModel, PenaltySpec};
use crate::par;

/// Gradient of the objective with respect to every weight row and threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub weights: Array2<f64>,
    pub thresholds: Array1<f64>,
}

impl Gradient {
    pub fn inf_norm(&self) -> f64 {
        self.weights
            .iter()
            .chain(self.thresholds.iter())
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

/// Evaluate the objective for a linear model.
pub fn cogol_objective(model: &OrdinalModel, data: &Dataset, pen: &PenaltySpec) -> Result<f64> {
    let problem = Problem::for_model(model, data, pen)?;
    let value = problem.value(
        model.weights().as_slice().expect("row-major"),
        model.thresholds().as_slice().expect("contiguous"),
    );
    if !value.is_finite() {
        return Err(Error::Numerical("non-finite objective".into()));
    }
    Ok(value)
}

/// Analytic gradient of [`cogol_objective`], treating every weight row as a
/// free parameter (the gradient for a tied OL model is the row sum).
pub fn cogol_gradient(model: &OrdinalModel, data: &Dataset, pen: &PenaltySpec) -> Result<Gradient> {
    let problem = Problem::for_model(model, data, pen)?;
    let rows = model.k() - 1;
    let mut gw = vec![0.0; rows * data.p()];
    let mut gt = vec![0.0; rows];
    let value = problem.value_grad(
        model.weights().as_slice().expect("row-major"),
        model.thresholds().as_slice().expect("contiguous"),
        &mut gw,
        &mut gt,
    );
    if !value.is_finite() || gw.iter().chain(&gt).any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite gradient".into()));
    }
    Ok(Gradient {
        weights: Array2::from_shape_vec((rows, data.p()), gw).expect("shape"),
        thresholds: Array1::from(gt),
    })
}

/// Objective over a fixed design matrix. `features` may be the raw inputs or
/// an empirical kernel map; weights are row-major `rows × dim`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Problem<'a> {
    features: &'a Array2<f64>,
    labels: &'a [usize],
    rows: usize,
    alpha: f64,
    /// Zero when the rows are tied structurally.
    beta: f64,
}

impl<'a> Problem<'a> {
    pub(crate) fn new(
        features: &'a Array2<f64>,
        labels: &'a [usize],
        rows: usize,
        pen: &PenaltySpec,
    ) -> Self {
        Self {
            features,
            labels,
            rows,
            alpha: pen.alpha,
            beta: if pen.is_tied() { 0.0 } else { pen.beta },
        }
    }

    fn for_model(model: &OrdinalModel, data: &'a Dataset, pen: &PenaltySpec) -> Result<Self> {
        if model.kernel().is_some() {
            return Err(Error::InvalidModel(
                "kernel models are evaluated through their dual objective".into(),
            ));
        }
        if model.p() != data.p() {
            return Err(Error::dim("dataset features", model.p(), data.p()));
        }
        if model.k() != data.k() {
            return Err(Error::dim("class count", model.k(), data.k()));
        }
        if pen.is_tied() {
            let first = model.weights().row(0);
            if model.weights().rows().into_iter().any(|r| r != first) {
                return Err(Error::InvalidParameter(
                    "infinite beta requires tied weight rows".into(),
                ));
            }
        }
        Ok(Self::new(
            data.features(),
            data.labels(),
            model.k() - 1,
            pen,
        ))
    }

    pub(crate) fn n(&self) -> usize {
        self.labels.len()
    }

    pub(crate) fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub(crate) fn rows(&self) -> usize {
        self.rows
    }

    pub(crate) fn features(&self) -> &'a Array2<f64> {
        self.features
    }

    pub(crate) fn alpha(&self) -> f64 {
        self.alpha
    }

    pub(crate) fn beta(&self) -> f64 {
        self.beta
    }

    fn row(&self, i: usize) -> &'a [f64] {
        self.features.row(i).to_slice().expect("row-major features")
    }

    pub(crate) fn value(&self, w: &[f64], theta: &[f64]) -> f64 {
        let d = self.dim();
        let parts = par::map_chunks(self.n(), |range| {
            let mut acc = 0.0;
            for i in range {
                let x = self.row(i);
                let y = self.labels[i];
                for j in 0..self.rows {
                    let g = theta[j] - dot(&w[j * d..(j + 1) * d], x);
                    // j is 0-based: thresholds below the label are j + 1 < y.
                    let t = if j + 1 < y { -g } else { g };
                    acc += (-t).max(0.0) + (-t.abs()).exp().ln_1p();
                }
            }
            acc
        });
        parts.iter().sum::<f64>() / self.n() as f64 + self.penalty(w)
    }

    /// Value and gradient; `gw`/`gt` are overwritten.
    pub(crate) fn value_grad(
        &self,
        w: &[f64],
        theta: &[f64],
        gw: &mut [f64],
        gt: &mut [f64],
    ) -> f64 {
        let d = self.dim();
        let rows = self.rows;
        let parts = par::map_chunks(self.n(), |range| {
            let mut acc = 0.0;
            let mut pw = vec![0.0; rows * d];
            let mut pt = vec![0.0; rows];
            for i in range {
                let x = self.row(i);
                let y = self.labels[i];
                for j in 0..rows {
                    let g = theta[j] - dot(&w[j * d..(j + 1) * d], x);
                    let (t, sign) = if j + 1 < y { (-g, -1.0) } else { (g, 1.0) };
                    let e = (-t.abs()).exp();
                    acc += (-t).max(0.0) + e.ln_1p();
                    // dφ(t)/dt = −σ(−t)
                    let s = if t >= 0.0 {
                        e / (1.0 + e)
                    } else {
                        1.0 / (1.0 + e)
                    };
                    let c = -sign * s;
                    pt[j] += c;
                    for (gwj, &xv) in pw[j * d..(j + 1) * d].iter_mut().zip(x) {
                        *gwj -= c * xv;
                    }
                }
            }
            (acc, pw, pt)
        });
        let inv_n = 1.0 / self.n() as f64;
        gw.fill(0.0);
        gt.fill(0.0);
        let mut value = 0.0;
        for (acc, pw, pt) in parts {
            value += acc;
            for (a, b) in gw.iter_mut().zip(&pw) {
                *a += b;
            }
            for (a, b) in gt.iter_mut().zip(&pt) {
                *a += b;
            }
        }
        gw.iter_mut().for_each(|v| *v *= inv_n);
        gt.iter_mut().for_each(|v| *v *= inv_n);
        self.penalty_grad(w, gw);
        value * inv_n + self.penalty(w)
    }

    pub(crate) fn penalty(&self, w: &[f64]) -> f64 {
        let d = self.dim();
        let l2: f64 = w.iter().map(|v| v * v).sum();
        let mut dev = 0.0;
        if self.beta > 0.0 {
            for j in 1..self.rows {
                let (prev, cur) = (&w[(j - 1) * d..j * d], &w[j * d..(j + 1) * d]);
                dev += prev
                    .iter()
                    .zip(cur)
                    .map(|(a, b)| (b - a) * (b - a))
                    .sum::<f64>();
            }
        }
        self.alpha * l2 + self.beta * dev
    }

    fn penalty_grad(&self, w: &[f64], gw: &mut [f64]) {
        let d = self.dim();
        for (g, v) in gw.iter_mut().zip(w) {
            *g += 2.0 * self.alpha * v;
        }
        if self.beta > 0.0 {
            for j in 1..self.rows {
                for c in 0..d {
                    let delta = w[j * d + c] - w[(j - 1) * d + c];
                    gw[j * d + c] += 2.0 * self.beta * delta;
                    gw[(j - 1) * d + c] -= 2.0 * self.beta * delta;
                }
            }
        }
    }
}
