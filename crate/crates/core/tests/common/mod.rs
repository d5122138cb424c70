//! Independent reference implementations used as test oracles. Nothing here
//! calls into the library's numerical code.

#![allow(dead_code)]

use ndarray::Array2;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `log(1 + e^{−t})`, straightforwardly; callers keep |t| moderate.
pub fn phi(t: f64) -> f64 {
    (-t).exp().ln_1p()
}

pub fn sigma(t: f64) -> f64 {
    1.0 / (1.0 + (-t).exp())
}

/// All-thresholds loss with 1-based `y`: `Σ_{j<y} φ(−g_j) + Σ_{j≥y} φ(g_j)`.
pub fn at_loss(g: &[f64], y: usize) -> f64 {
    g.iter()
        .enumerate()
        .map(|(j0, &gj)| if j0 + 1 < y { phi(-gj) } else { phi(gj) })
        .sum()
}

/// Binary cross-entropy over extended labels `ỹ_j = [[y > j]]` of logits `h`.
pub fn bce(h: &[f64], y: usize) -> f64 {
    h.iter()
        .enumerate()
        .map(|(j0, &hj)| {
            let target = if y > j0 + 1 { 1.0 } else { 0.0 };
            let s = sigma(hj);
            -(target * s.ln() + (1.0 - target) * (1.0 - s).ln())
        })
        .sum()
}

pub fn predict(g: &[f64]) -> usize {
    1 + g.iter().filter(|&&v| v < 0.0).count()
}

/// Regularized objective written out term by term.
pub fn objective(
    w: &Array2<f64>,
    theta: &[f64],
    x: &Array2<f64>,
    y: &[usize],
    alpha: f64,
    beta: f64,
) -> f64 {
    let n = x.nrows();
    let mut data = 0.0;
    for i in 0..n {
        let g: Vec<f64> = (0..w.nrows())
            .map(|j| theta[j] - w.row(j).dot(&x.row(i)))
            .collect();
        data += at_loss(&g, y[i]);
    }
    let l2: f64 = w.iter().map(|v| v * v).sum();
    let mut dev = 0.0;
    for j in 1..w.nrows() {
        dev += (&w.row(j) - &w.row(j - 1)).mapv(|v| v * v).sum();
    }
    data / n as f64 + alpha * l2 + beta * dev
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
pub fn jacobi_eigenvalues(a: &Array2<f64>) -> Vec<f64> {
    let n = a.nrows();
    let mut m = a.clone();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)] * m[(i, j)])
            .sum();
        let scale: f64 = m.iter().map(|v| v * v).sum::<f64>().max(f64::MIN_POSITIVE);
        if off <= 1e-30 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
            }
        }
    }
    (0..n).map(|i| m[(i, i)]).collect()
}

/// Two-sided signed-rank p-value by enumerating all `2^n` sign patterns of
/// the mid-ranked non-zero differences.
pub fn wilcoxon_brute(a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(x, y)| x - y)
        .filter(|v| *v != 0.0)
        .collect();
    let n = d.len();
    if n == 0 {
        return 1.0;
    }
    let abs: Vec<f64> = d.iter().map(|v| v.abs()).collect();
    let ranks: Vec<f64> = abs
        .iter()
        .map(|&v| {
            let below = abs.iter().filter(|&&u| u < v).count() as f64;
            let equal = abs.iter().filter(|&&u| u == v).count() as f64;
            below + (equal + 1.0) / 2.0
        })
        .collect();
    let observed: f64 = d
        .iter()
        .zip(&ranks)
        .filter(|(v, _)| **v > 0.0)
        .map(|(_, r)| r)
        .sum();
    let (mut lo, mut hi) = (0u64, 0u64);
    for mask in 0u64..(1 << n) {
        let w: f64 = (0..n)
            .filter(|i| mask >> i & 1 == 1)
            .map(|i| ranks[i])
            .sum();
        if w <= observed + 1e-9 {
            lo += 1;
        }
        if w >= observed - 1e-9 {
            hi += 1;
        }
    }
    (2.0 * lo.min(hi) as f64 / (1u64 << n) as f64).min(1.0)
}

pub fn uniform_vec<R: Rng>(rng: &mut R, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-scale..scale)).collect()
}

pub fn uniform_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize, scale: f64) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-scale..scale))
}
