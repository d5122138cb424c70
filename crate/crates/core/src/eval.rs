//! Prediction metrics and the Wilcoxon signed-rank comparison.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

/// Largest effective sample size evaluated with the exact null distribution.
pub const EXACT_CUTOFF: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mae: f64,
    pub mse: f64,
    pub accuracy: f64,
    pub n: usize,
}

pub fn evaluate(preds: &[usize], labels: &[usize]) -> Result<EvalReport> {
    if preds.len() != labels.len() {
        return Err(Error::dim("prediction vector", labels.len(), preds.len()));
    }
    if preds.is_empty() {
        return Err(Error::InvalidParameter(
            "cannot evaluate an empty set".into(),
        ));
    }
    let n = preds.len();
    let (mut abs, mut sq, mut hits) = (0.0, 0.0, 0usize);
    for (&p, &y) in preds.iter().zip(labels) {
        let d = p.abs_diff(y) as f64;
        abs += d;
        sq += d * d;
        hits += usize::from(p == y);
    }
    let nf = n as f64;
    Ok(EvalReport {
        mae: abs / nf,
        mse: sq / nf,
        accuracy: hits as f64 / nf,
        n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WilcoxonMethod {
    Exact,
    Normal,
    /// Every paired difference was zero.
    Degenerate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    /// `min(W+, W−)`.
    pub statistic: f64,
    /// Rank sum of the positive differences `a − b`.
    pub w_plus: f64,
    /// Pairs left after dropping zero differences.
    pub n_effective: usize,
    /// Two-sided p-value.
    pub p_value: f64,
    pub method: WilcoxonMethod,
}

impl WilcoxonResult {
    pub fn is_degenerate(&self) -> bool {
        self.method == WilcoxonMethod::Degenerate
    }

    /// `+1` when `a` tends to exceed `b`, `−1` when below, `0` when balanced.
    pub fn direction(&self) -> i8 {
        let n = self.n_effective as f64;
        let mid = n * (n + 1.0) / 4.0;
        if self.w_plus > mid {
            1
        } else if self.w_plus < mid {
            -1
        } else {
            0
        }
    }
}

/// Mid-ranks of `values` (1-based), ties sharing the average rank.
fn mid_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            ranks[o] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Paired two-sided Wilcoxon signed-rank test on `a − b`.
///
/// Zero differences are dropped before ranking; ties get mid-ranks. Up to
/// [`EXACT_CUTOFF`] pairs the p-value comes from the exact distribution of
/// `W+` over all `2^n` sign assignments; above it, a normal approximation
/// with tie and continuity corrections.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<WilcoxonResult> {
    wilcoxon_with(a, b, None)
}

/// [`wilcoxon_signed_rank`] forced onto the exact null distribution.
pub fn wilcoxon_exact(a: &[f64], b: &[f64]) -> Result<WilcoxonResult> {
    wilcoxon_with(a, b, Some(WilcoxonMethod::Exact))
}

/// [`wilcoxon_signed_rank`] forced onto the normal approximation.
pub fn wilcoxon_normal(a: &[f64], b: &[f64]) -> Result<WilcoxonResult> {
    wilcoxon_with(a, b, Some(WilcoxonMethod::Normal))
}

fn wilcoxon_with(a: &[f64], b: &[f64], force: Option<WilcoxonMethod>) -> Result<WilcoxonResult> {
    if a.len() != b.len() {
        return Err(Error::dim("paired samples", a.len(), b.len()));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("non-finite paired value".into()));
    }
    let diffs: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(x, y)| x - y)
        .filter(|&d| d != 0.0)
        .collect();
    let n = diffs.len();
    if n == 0 {
        return Ok(WilcoxonResult {
            statistic: 0.0,
            w_plus: 0.0,
            n_effective: 0,
            p_value: 1.0,
            method: WilcoxonMethod::Degenerate,
        });
    }
    let abs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let ranks = mid_ranks(&abs);
    let w_plus: f64 = diffs
        .iter()
        .zip(&ranks)
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, r)| r)
        .sum();
    let total = (n * (n + 1)) as f64 / 2.0;
    let statistic = w_plus.min(total - w_plus);

    let method = match force {
        Some(m) => m,
        None if n <= EXACT_CUTOFF => WilcoxonMethod::Exact,
        None => WilcoxonMethod::Normal,
    };
    let p_value = match method {
        WilcoxonMethod::Normal => normal_p(&abs, &ranks, w_plus),
        _ => exact_p(&ranks, w_plus),
    };
    Ok(WilcoxonResult {
        statistic,
        w_plus,
        n_effective: n,
        p_value: p_value.clamp(f64::MIN_POSITIVE, 1.0),
        method,
    })
}

fn exact_p(ranks: &[f64], w_plus: f64) -> f64 {
    // Mid-ranks are multiples of 1/2, so doubled ranks are integers and the
    // null distribution of 2·W+ is a subset-sum count.
    let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
    let max: usize = doubled.iter().sum();
    let mut counts = vec![0u64; max + 1];
    counts[0] = 1;
    let mut reach = 0;
    for &r in &doubled {
        for s in (0..=reach).rev() {
            if counts[s] > 0 {
                counts[s + r] += counts[s];
            }
        }
        reach += r;
    }
    let observed = (2.0 * w_plus).round() as usize;
    let all = 2f64.powi(ranks.len() as i32);
    let lower: u64 = counts[..=observed].iter().sum();
    let upper: u64 = counts[observed..].iter().sum();
    (2.0 * lower.min(upper) as f64 / all).min(1.0)
}

fn normal_p(abs: &[f64], ranks: &[f64], w_plus: f64) -> f64 {
    let n = ranks.len() as f64;
    let mean = n * (n + 1.0) / 4.0;
    let mut var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0;
    // Tie correction Σ(t³ − t)/48 over groups of equal |d|.
    let mut sorted = abs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        var -= (t * t * t - t) / 48.0;
        i = j + 1;
    }
    if !(var > 0.0) {
        return 1.0;
    }
    let z = ((w_plus - mean).abs() - 0.5).max(0.0) / var.sqrt();
    erfc(z / std::f64::consts::SQRT_2).min(1.0)
}

/// One line of a model-comparison report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub model: String,
    pub dataset: String,
    pub metric: String,
    pub mean: f64,
    /// Wilcoxon p-value against the baseline model (absent for the baseline).
    pub p_vs_baseline: Option<f64>,
}

pub fn comparison_csv(rows: &[ComparisonRow]) -> String {
    let mut out = String::from("model,dataset,metric,mean,p_vs_baseline\n");
    for r in rows {
        let p = r
            .p_vs_baseline
            .map(|p| format!("{p:.6e}"))
            .unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{:.6},{}",
            r.model, r.dataset, r.metric, r.mean, p
        );
    }
    out
}

/// Aligned text table: one row per (dataset, model), one column per metric.
pub fn comparison_table(rows: &[ComparisonRow]) -> String {
    let mut metrics: Vec<&str> = Vec::new();
    let mut keys: Vec<(&str, &str)> = Vec::new();
    for r in rows {
        if !metrics.contains(&r.metric.as_str()) {
            metrics.push(&r.metric);
        }
        let key = (r.dataset.as_str(), r.model.as_str());
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    let dw = keys.iter().map(|k| k.0.len()).max().unwrap_or(0).max(7);
    let mw = keys.iter().map(|k| k.1.len()).max().unwrap_or(0).max(5);
    let mut out = format!("{:<dw$}  {:<mw$}", "dataset", "model");
    for m in &metrics {
        let _ = write!(out, "  {:>10}  {:>9}", m, "p");
    }
    out.push('\n');
    for (d, m) in keys {
        let _ = write!(out, "{d:<dw$}  {m:<mw$}");
        for metric in &metrics {
            let cell = rows
                .iter()
                .find(|r| r.dataset == d && r.model == m && r.metric == *metric);
            match cell {
                Some(r) => {
                    let p = r
                        .p_vs_baseline
                        .map(|p| format!("{p:.3e}"))
                        .unwrap_or_else(|| "-".into());
                    let _ = write!(out, "  {:>10.4}  {:>9}", r.mean, p);
                }
                None => {
                    let _ = write!(out, "  {:>10}  {:>9}", "", "");
                }
            }
        }
        out.push('\n');
    }
    out
}

/// Parse a CSV written by [`comparison_csv`].
pub fn read_comparison_csv(path: impl AsRef<Path>) -> Result<Vec<ComparisonRow>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_comparison_csv(&text).map_err(|message| Error::Parse {
        path: path.to_path_buf(),
        message,
    })
}

fn parse_comparison_csv(text: &str) -> std::result::Result<Vec<ComparisonRow>, String> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, h)) if h.trim() == "model,dataset,metric,mean,p_vs_baseline" => {}
        _ => return Err("expected header model,dataset,metric,mean,p_vs_baseline".into()),
    }
    lines
        .map(|(i, line)| {
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            if f.len() != 5 {
                return Err(format!(
                    "line {}: expected 5 fields, got {}",
                    i + 1,
                    f.len()
                ));
            }
            let num = |s: &str, what: &str| {
                s.parse::<f64>()
                    .map_err(|_| format!("line {}: bad {what} {s:?}", i + 1))
            };
            Ok(ComparisonRow {
                model: f[0].to_string(),
                dataset: f[1].to_string(),
                metric: f[2].to_string(),
                mean: num(f[3], "mean")?,
                p_vs_baseline: if f[4].is_empty() {
                    None
                } else {
                    Some(num(f[4], "p")?)
                },
            })
        })
        .collect()
}

/// Paired per-dataset comparison of two result sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedComparison {
    pub metric: String,
    pub datasets: Vec<String>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub test: WilcoxonResult,
}

/// Pair the `metric` means of `a` and `b` by dataset and run the signed-rank
/// test on `a − b`. Each side may carry one model per dataset, or be narrowed
/// to one with `model_a` / `model_b`.
pub fn paired_comparison(
    a: &[ComparisonRow],
    b: &[ComparisonRow],
    metric: &str,
    model_a: Option<&str>,
    model_b: Option<&str>,
) -> Result<PairedComparison> {
    fn keyed(
        rows: &[ComparisonRow],
        metric: &str,
        model: Option<&str>,
        side: &str,
    ) -> Result<BTreeMap<String, f64>> {
        let mut out = BTreeMap::new();
        for r in rows {
            if r.metric != metric || model.is_some_and(|m| m != r.model) {
                continue;
            }
            if out.insert(r.dataset.clone(), r.mean).is_some() {
                return Err(Error::InvalidParameter(format!(
                    "{side}: several {metric} rows for dataset {:?}; select a model",
                    r.dataset
                )));
            }
        }
        Ok(out)
    }
    let ka = keyed(a, metric, model_a, "A")?;
    let kb = keyed(b, metric, model_b, "B")?;
    let only_a: Vec<&String> = ka.keys().filter(|k| !kb.contains_key(*k)).collect();
    let only_b: Vec<&String> = kb.keys().filter(|k| !ka.contains_key(*k)).collect();
    if !only_a.is_empty() || !only_b.is_empty() {
        return Err(Error::InvalidParameter(format!(
            "dataset keys do not align; only in A: {only_a:?}; only in B: {only_b:?}"
        )));
    }
    if ka.is_empty() {
        return Err(Error::InvalidParameter(format!(
            "no {metric} rows to compare"
        )));
    }
    let datasets: Vec<String> = ka.keys().cloned().collect();
    let va: Vec<f64> = ka.values().copied().collect();
    let vb: Vec<f64> = datasets.iter().map(|d| kb[d]).collect();
    let test = wilcoxon_signed_rank(&va, &vb)?;
    Ok(PairedComparison {
        metric: metric.to_string(),
        datasets,
        a: va,
        b: vb,
        test,
    })
}
