//! Threshold surrogate losses on decision values `g_j = θ_j − w_j·x`.
//!
//! All losses take 1-based class labels `y ∈ 1..=k` and a slice of `k − 1`
//! decision values.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which threshold surrogate to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LossKind {
    AllThresholds,
    ImmediateThreshold,
    CumulativeLogit,
}

impl LossKind {
    pub fn eval(self, g: &[f64], y: usize, k: usize) -> Result<f64> {
        match self {
            LossKind::AllThresholds => all_thresholds_loss(g, y, k),
            LossKind::ImmediateThreshold => immediate_threshold_loss(g, y, k),
            LossKind::CumulativeLogit => cumulative_logit_nll(g, y, k),
        }
    }
}

/// Logistic surrogate `log(1 + e^{−t})`, overflow safe.
#[inline]
pub fn logistic(t: f64) -> f64 {
    (-t).max(0.0) + (-t.abs()).exp().ln_1p()
}

/// Sigmoid `1 / (1 + e^{−t})`, overflow safe.
#[inline]
pub fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^t)`.
#[inline]
pub fn softplus(t: f64) -> f64 {
    logistic(-t)
}

fn check(g: &[f64], y: usize, k: usize) -> Result<()> {
    if k < 2 {
        return Err(Error::InvalidParameter(format!("class count {k} < 2")));
    }
    if g.len() != k - 1 {
        return Err(Error::dim("decision values", k - 1, g.len()));
    }
    if y < 1 || y > k {
        return Err(Error::LabelOutOfRange { label: y, k });
    }
    Ok(())
}

/// `Σ_{j<y} φ(−g_j) + Σ_{j≥y} φ(g_j)`.
pub fn all_thresholds_loss(g: &[f64], y: usize, k: usize) -> Result<f64> {
    check(g, y, k)?;
    Ok(all_thresholds_unchecked(g, y))
}

#[inline]
pub(crate) fn all_thresholds_unchecked(g: &[f64], y: usize) -> f64 {
    let (below, above) = g.split_at(y - 1);
    below.iter().map(|&v| logistic(-v)).sum::<f64>()
        + above.iter().map(|&v| logistic(v)).sum::<f64>()
}

/// `φ(−g_{y−1}) + φ(g_y)`, dropping the term whose threshold does not exist
/// (`j = 0` for `y = 1`, `j = k` for `y = k`).
pub fn immediate_threshold_loss(g: &[f64], y: usize, k: usize) -> Result<f64> {
    check(g, y, k)?;
    let lower = if y > 1 { logistic(-g[y - 2]) } else { 0.0 };
    let upper = if y < k { logistic(g[y - 1]) } else { 0.0 };
    Ok(lower + upper)
}

/// Negative log-likelihood of the cumulative logit model,
/// `−log(σ(g_y) − σ(g_{y−1}))` with `σ(g_0) = 0`, `σ(g_k) = 1`.
///
/// Fails when the class probability is not positive, which happens when the
/// decision values decrease across the two thresholds bracketing `y`.
pub fn cumulative_logit_nll(g: &[f64], y: usize, k: usize) -> Result<f64> {
    check(g, y, k)?;
    // The edge classes reduce to a single log-sigmoid, evaluated stably.
    if y == 1 {
        return Ok(logistic(g[0]));
    }
    if y == k {
        return Ok(logistic(-g[k - 2]));
    }
    let (lo, hi) = (g[y - 2], g[y - 1]);
    if !(lo < hi) {
        return Err(Error::NonPositiveProbability {
            y,
            prob: sigmoid(hi) - sigmoid(lo),
        });
    }
    // σ(b) − σ(a) = σ(b)·σ(−a)·(1 − e^{a−b}); stays accurate when both
    // sigmoids saturate.
    let log_prob = -logistic(hi) - logistic(-lo) + (-(lo - hi).exp_m1()).ln();
    Ok(-log_prob)
}

fn extended_label(y: usize, j: usize) -> f64 {
    // ỹ_j = [[y > j]] with 1-based threshold index j.
    if y > j {
        1.0
    } else {
        0.0
    }
}

fn binary_cross_entropy(logit: f64, target: f64) -> f64 {
    // −[t·log σ(h) + (1 − t)·log(1 − σ(h))]; log σ(h) = −log(1 + e^{−h}).
    let log_p = -((-logit).max(0.0) + (-logit.abs()).exp().ln_1p());
    let log_1mp = -(logit.max(0.0) + (-logit.abs()).exp().ln_1p());
    -(target * log_p + (1.0 - target) * log_1mp)
}

/// CORAL head loss: binary cross-entropy over extended labels with a shared
/// weight vector, `h_j = θ_j + w·x`.
pub fn coral_loss_form(theta: &[f64], w: &[f64], x: &[f64], y: usize) -> Result<f64> {
    let k = theta.len() + 1;
    check(theta, y, k)?;
    if w.len() != x.len() {
        return Err(Error::dim("coral weight/feature", w.len(), x.len()));
    }
    let score: f64 = w.iter().zip(x).map(|(a, b)| a * b).sum();
    Ok(theta
        .iter()
        .enumerate()
        .map(|(i, &t)| binary_cross_entropy(t + score, extended_label(y, i + 1)))
        .sum())
}

/// OR-CNN head loss: independent binary outputs `h̃_j = θ_j + w_j·x`.
/// `weights` is row-major `(k − 1) × p`.
pub fn orcnn_loss_form(theta: &[f64], weights: &[f64], x: &[f64], y: usize) -> Result<f64> {
    let k = theta.len() + 1;
    check(theta, y, k)?;
    let p = x.len();
    if weights.len() != (k - 1) * p {
        return Err(Error::dim(
            "or-cnn weight matrix",
            (k - 1) * p,
            weights.len(),
        ));
    }
    Ok(theta
        .iter()
        .zip(weights.chunks_exact(p.max(1)))
        .enumerate()
        .map(|(i, (&t, row))| {
            let h = t + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
            binary_cross_entropy(h, extended_label(y, i + 1))
        })
        .sum())
}
