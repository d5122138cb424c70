//! Seeded random search over log-uniform hyperparameter boxes, scored by
//! stratified k-fold validation MAE.

use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{derive_seed, rng, stratified_kfold, Fold, Scaler};
use crate::error::{Error, Result};
use crate::eval::{evaluate, EvalReport};
use crate::kernel::{fit_kernel, gamma_range, KernelKind, KernelSpec};
use crate::model::{Dataset, Mode, OrdinalModel, PenaltySpec};
use crate::optimizer::{fit, FitSpec};
use crate::par;

const FOLD_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub alpha_range: (f64, f64),
    pub beta_range: (f64, f64),
    /// RBF bandwidth interval; derived from the data when absent.
    pub gamma_range: Option<(f64, f64)>,
    pub trials: usize,
}

impl Default for SearchSpace {
    fn default() -> Self {
        Self::linear()
    }
}

impl SearchSpace {
    pub fn linear() -> Self {
        Self {
            alpha_range: (1e-6, 10.0),
            beta_range: (1e-6, 10.0),
            gamma_range: None,
            trials: 30,
        }
    }

    pub fn kernel() -> Self {
        Self {
            trials: 40,
            ..Self::linear()
        }
    }

    pub fn with_trials(mut self, trials: usize) -> Self {
        self.trials = trials;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let check = |name: &str, (lo, hi): (f64, f64)| {
            if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "{name} range must satisfy 0 < lo ≤ hi < ∞, got [{lo}, {hi}]"
                )));
            }
            Ok(())
        };
        check("alpha", self.alpha_range)?;
        check("beta", self.beta_range)?;
        if let Some(g) = self.gamma_range {
            check("gamma", g)?;
        }
        if self.trials == 0 {
            return Err(Error::InvalidParameter("trials must be at least 1".into()));
        }
        Ok(())
    }
}

fn log_uniform<R: Rng>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        return lo;
    }
    (lo.ln() + rng.gen::<f64>() * (hi.ln() - lo.ln())).exp()
}

/// Hyperparameters of one candidate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub alpha: f64,
    /// `0` for GOL, `∞` for OL.
    pub beta: f64,
    pub gamma: Option<f64>,
}

impl Params {
    pub fn penalty(&self) -> PenaltySpec {
        PenaltySpec {
            alpha: self.alpha,
            beta: self.beta,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TrialStatus {
    Ok,
    Failed(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub index: usize,
    pub params: Params,
    pub cv_mae: f64,
    pub cv_mse: f64,
    pub cv_acc: f64,
    pub status: TrialStatus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuneConfig {
    pub mode: Mode,
    pub space: SearchSpace,
    pub folds: usize,
    pub seed: u64,
    /// `None` fits linear models in the primal.
    pub kernel: Option<KernelKind>,
    pub max_iters: usize,
    pub grad_tol: f64,
}

impl TuneConfig {
    pub fn new(mode: Mode, space: SearchSpace, seed: u64) -> Self {
        Self {
            mode,
            space,
            folds: 3,
            seed,
            kernel: None,
            max_iters: 5000,
            grad_tol: 1e-6,
        }
    }

    pub fn fit_spec(&self, params: &Params) -> FitSpec {
        let mut spec = FitSpec::new(self.mode, params.penalty()).with_seed(self.seed);
        spec.max_iters = self.max_iters;
        spec.grad_tol = self.grad_tol;
        spec
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuneResult {
    pub best: Params,
    pub best_index: usize,
    pub trials: Vec<Trial>,
    /// Folds used for every trial, indexing into the tuning dataset.
    pub folds: Vec<Fold>,
}

/// Sample the candidate for `trial`. Every trial draws α, β and γ in that
/// order from its own stream, so trial `i` is the same whatever the mode.
pub fn sample_params(config: &TuneConfig, gamma_box: Option<(f64, f64)>, trial: usize) -> Params {
    let mut r = rng(derive_seed(config.seed, trial as u64));
    let alpha = log_uniform(&mut r, config.space.alpha_range);
    let beta = log_uniform(&mut r, config.space.beta_range);
    let gamma = gamma_box.map(|g| log_uniform(&mut r, g));
    let beta = match config.mode {
        Mode::Ol => f64::INFINITY,
        Mode::Gol => 0.0,
        Mode::CoGol => beta,
    };
    Params { alpha, beta, gamma }
}

/// Fit one candidate on `train` (standardized internally by the caller's
/// convention) and return a predictor.
pub fn fit_params(train: &Dataset, config: &TuneConfig, params: &Params) -> Result<OrdinalModel> {
    let spec = config.fit_spec(params);
    match config.kernel {
        None => fit(train, &spec).map(|(m, _)| m),
        Some(kind) => {
            let gamma = params.gamma.unwrap_or(0.0);
            let kspec = KernelSpec::new(kind, gamma, train.features().clone())?;
            fit_kernel(train, &spec, &kspec).map(|(m, _)| m.into_model())
        }
    }
}

fn cross_validate(
    data: &Dataset,
    folds: &[Fold],
    config: &TuneConfig,
    params: &Params,
) -> Result<EvalReport> {
    let mut reports = Vec::with_capacity(folds.len());
    for fold in folds {
        let train = data.subset(&fold.train);
        let valid = data.subset(&fold.valid);
        let scaler = Scaler::fit(&train);
        let (train, valid) = (scaler.transform(&train)?, scaler.transform(&valid)?);
        let model = fit_params(&train, config, params)?;
        let preds = model.predict_dataset(&valid)?;
        reports.push(evaluate(&preds, valid.labels())?);
    }
    let f = reports.len() as f64;
    Ok(EvalReport {
        mae: reports.iter().map(|r| r.mae).sum::<f64>() / f,
        mse: reports.iter().map(|r| r.mse).sum::<f64>() / f,
        accuracy: reports.iter().map(|r| r.accuracy).sum::<f64>() / f,
        n: reports.iter().map(|r| r.n).sum(),
    })
}

/// Random search with stratified k-fold CV. The winner has the lowest mean
/// validation MAE; ties go to the larger β, then the earlier trial.
pub fn tune(data: &Dataset, config: &TuneConfig) -> Result<TuneResult> {
    config.space.validate()?;
    let folds = stratified_kfold(data, config.folds, derive_seed(config.seed, FOLD_STREAM))?;
    let gamma_box = match config.kernel {
        Some(KernelKind::Rbf) => Some(match config.space.gamma_range {
            Some(g) => g,
            None => gamma_range(data.features(), data.k())?,
        }),
        _ => None,
    };

    let trials = par::map_indexed(config.space.trials, |index| {
        let params = sample_params(config, gamma_box, index);
        match cross_validate(data, &folds, config, &params) {
            Ok(r) => Trial {
                index,
                params,
                cv_mae: r.mae,
                cv_mse: r.mse,
                cv_acc: r.accuracy,
                status: TrialStatus::Ok,
            },
            Err(e) => Trial {
                index,
                params,
                cv_mae: f64::INFINITY,
                cv_mse: f64::INFINITY,
                cv_acc: 0.0,
                status: TrialStatus::Failed(e.to_string()),
            },
        }
    });

    let best_index = trials
        .iter()
        .min_by(|a, b| {
            a.cv_mae
                .total_cmp(&b.cv_mae)
                .then(b.params.beta.total_cmp(&a.params.beta))
                .then(a.index.cmp(&b.index))
        })
        .map(|t| t.index)
        .expect("at least one trial");
    Ok(TuneResult {
        best: trials[best_index].params,
        best_index,
        trials,
        folds,
    })
}

/// `trial,alpha,beta,gamma,cv_mae,cv_mse,cv_acc,status` rows.
pub fn trial_table_csv(trials: &[Trial]) -> String {
    let mut out = String::from("trial,alpha,beta,gamma,cv_mae,cv_mse,cv_acc,status\n");
    for t in trials {
        let gamma = t.params.gamma.map(|g| g.to_string()).unwrap_or_default();
        let status = match &t.status {
            TrialStatus::Ok => "ok".to_string(),
            TrialStatus::Failed(msg) => format!("failed: {}", msg.replace([',', '\n'], ";")),
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            t.index, t.params.alpha, t.params.beta, gamma, t.cv_mae, t.cv_mse, t.cv_acc, status
        );
    }
    out
}
