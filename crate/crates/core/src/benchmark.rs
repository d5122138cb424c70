//! Replicated train/test protocol: split, standardize, tune, refit, score.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::data::{derive_seed, make_synthetic, Fold, Scaler, SplitPlan, SyntheticSpec};
use crate::error::{Error, Result};
use crate::eval::{evaluate, wilcoxon_signed_rank, ComparisonRow, EvalReport};
use crate::kernel::KernelKind;
use crate::model::{Dataset, Mode};
use crate::par;
use crate::tuning::{fit_params, tune, Params, SearchSpace, TuneConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Mae,
    Mse,
    Accuracy,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Mae, Metric::Mse, Metric::Accuracy];

    pub fn name(&self) -> &'static str {
        match self {
            Metric::Mae => "mae",
            Metric::Mse => "mse",
            Metric::Accuracy => "accuracy",
        }
    }

    pub fn of(&self, r: &EvalReport) -> f64 {
        match self {
            Metric::Mae => r.mae,
            Metric::Mse => r.mse,
            Metric::Accuracy => r.accuracy,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub modes: Vec<Mode>,
    pub replications: usize,
    pub seed: u64,
    pub train_fraction: f64,
    pub folds: usize,
    pub space: SearchSpace,
    pub kernel: Option<KernelKind>,
    pub max_iters: usize,
    pub grad_tol: f64,
}

impl BenchmarkConfig {
    pub fn new(seed: u64) -> Self {
        Self {
            modes: Mode::ALL.to_vec(),
            replications: 30,
            seed,
            train_fraction: 0.75,
            folds: 3,
            space: SearchSpace::linear(),
            kernel: None,
            max_iters: 5000,
            grad_tol: 1e-6,
        }
    }

    fn tune_config(&self, mode: Mode, seed: u64) -> TuneConfig {
        TuneConfig {
            mode,
            space: self.space.clone(),
            folds: self.folds,
            seed,
            kernel: self.kernel,
            max_iters: self.max_iters,
            grad_tol: self.grad_tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitResult {
    pub rep: usize,
    pub mode: Mode,
    pub params: Params,
    pub cv_mae: f64,
    pub test: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetResult {
    pub dataset: String,
    /// Replication-major, modes in configuration order.
    pub splits: Vec<SplitResult>,
}

/// Fails unless every CV fold, mapped back through `train_idx`, stays inside
/// the training rows and never reaches a test row.
pub fn audit_folds(train_idx: &[usize], test_idx: &[usize], folds: &[Fold]) -> Result<()> {
    let mut is_test = vec![false; train_idx.iter().chain(test_idx).max().map_or(0, |m| m + 1)];
    for &i in test_idx {
        is_test[i] = true;
    }
    for (f, fold) in folds.iter().enumerate() {
        for &local in fold.train.iter().chain(&fold.valid) {
            let global = *train_idx.get(local).ok_or_else(|| {
                Error::Numerical(format!("fold {f} index {local} outside the training split"))
            })?;
            if is_test[global] {
                return Err(Error::Numerical(format!(
                    "fold {f} touches test row {global}"
                )));
            }
        }
    }
    Ok(())
}

/// One replication: split, standardize on the training part, tune each mode
/// on the training part only, refit, and score on the held-out part.
pub fn run_replication(
    data: &Dataset,
    config: &BenchmarkConfig,
    rep: usize,
) -> Result<Vec<SplitResult>> {
    let split_seed = derive_seed(config.seed, rep as u64);
    let parts = SplitPlan::train_test(config.train_fraction, split_seed)?.split(data);
    let (train_idx, test_idx) = (&parts[0], &parts[1]);
    let scaler = Scaler::fit(&data.subset(train_idx));
    let train = scaler.transform(&data.subset(train_idx))?;
    let test = scaler.transform(&data.subset(test_idx))?;
    let tune_seed = derive_seed(split_seed, 1);

    config
        .modes
        .iter()
        .map(|&mode| {
            let tc = config.tune_config(mode, tune_seed);
            let tuned = tune(&train, &tc)?;
            audit_folds(train_idx, test_idx, &tuned.folds)?;
            let model = fit_params(&train, &tc, &tuned.best)?;
            let preds = model.predict_dataset(&test)?;
            Ok(SplitResult {
                rep,
                mode,
                params: tuned.best,
                cv_mae: tuned.trials[tuned.best_index].cv_mae,
                test: evaluate(&preds, test.labels())?,
            })
        })
        .collect()
}

/// Run every replication for one dataset. Replications run concurrently and
/// are collected in index order.
pub fn run_benchmark(
    name: &str,
    data: &Dataset,
    config: &BenchmarkConfig,
) -> Result<DatasetResult> {
    let reps = par::map_indexed(config.replications, |rep| {
        run_replication(data, config, rep)
    });
    collect(name, config, reps)
}

/// Like [`run_benchmark`], but every replication draws a fresh dataset from
/// `spec` (its seed derived from `spec.seed` and the replication index), so
/// replications are independent samples of the generating regime.
pub fn run_synthetic_benchmark(
    spec: &SyntheticSpec,
    config: &BenchmarkConfig,
) -> Result<DatasetResult> {
    spec.validate()?;
    let reps = par::map_indexed(config.replications, |rep| {
        let mut s = *spec;
        s.seed = derive_seed(spec.seed, rep as u64);
        run_replication(&make_synthetic(&s)?.data, config, rep)
    });
    collect(spec.kind.name(), config, reps)
}

fn collect(
    name: &str,
    config: &BenchmarkConfig,
    reps: Vec<Result<Vec<SplitResult>>>,
) -> Result<DatasetResult> {
    if config.modes.is_empty() || reps.is_empty() {
        return Err(Error::InvalidParameter(
            "benchmark needs at least one mode and one replication".into(),
        ));
    }
    let mut splits = Vec::with_capacity(reps.len() * config.modes.len());
    for r in reps {
        splits.extend(r?);
    }
    Ok(DatasetResult {
        dataset: name.to_string(),
        splits,
    })
}

impl DatasetResult {
    /// Per-replication values of `metric` for `mode`, in replication order.
    pub fn values(&self, mode: Mode, metric: Metric) -> Vec<f64> {
        self.splits
            .iter()
            .filter(|s| s.mode == mode)
            .map(|s| metric.of(&s.test))
            .collect()
    }

    pub fn mean(&self, mode: Mode, metric: Metric) -> f64 {
        let v = self.values(mode, metric);
        v.iter().sum::<f64>() / v.len() as f64
    }

    pub fn modes(&self) -> Vec<Mode> {
        let mut out = Vec::new();
        for s in &self.splits {
            if !out.contains(&s.mode) {
                out.push(s.mode);
            }
        }
        out
    }

    /// Mean of every metric per mode, with the paired Wilcoxon p-value of
    /// each non-baseline mode against `baseline`.
    pub fn summary(&self, baseline: Mode) -> Result<Vec<ComparisonRow>> {
        let mut rows = Vec::new();
        for mode in self.modes() {
            for metric in Metric::ALL {
                let p = if mode == baseline {
                    None
                } else {
                    let base = self.values(baseline, metric);
                    if base.is_empty() {
                        None
                    } else {
                        Some(wilcoxon_signed_rank(&self.values(mode, metric), &base)?.p_value)
                    }
                };
                rows.push(ComparisonRow {
                    model: mode.to_string(),
                    dataset: self.dataset.clone(),
                    metric: metric.name().to_string(),
                    mean: self.mean(mode, metric),
                    p_vs_baseline: p,
                });
            }
        }
        Ok(rows)
    }

    /// `dataset,rep,mode,alpha,beta,gamma,cv_mae,mae,mse,accuracy` rows.
    pub fn raw_csv(&self, with_header: bool) -> String {
        let mut out = String::new();
        if with_header {
            out.push_str(RAW_HEADER);
            out.push('\n');
        }
        for s in &self.splits {
            let gamma = s.params.gamma.map(|g| g.to_string()).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                self.dataset,
                s.rep,
                s.mode,
                s.params.alpha,
                s.params.beta,
                gamma,
                s.cv_mae,
                s.test.mae,
                s.test.mse,
                s.test.accuracy
            );
        }
        out
    }
}

pub const RAW_HEADER: &str = "dataset,rep,mode,alpha,beta,gamma,cv_mae,mae,mse,accuracy";
