//! Ordinal regression with continuously generalized ordinal logit models.
//!
//! Three model families share one objective: OL ties every threshold to a
//! single weight vector, GOL gives each threshold its own, and coGOL sits
//! between them with a penalty on the difference between neighbouring
//! weight vectors. All are fitted with the all-thresholds logistic loss,
//! linearly or through an RBF kernel.

pub mod benchmark;
pub mod data;
pub mod error;
pub mod eval;
pub mod kernel;
pub mod loss;
pub mod model;
pub mod objective;
pub mod optimizer;
pub mod par;
pub mod serialize;
pub mod tuning;

pub use data::{load_csv, make_synthetic, SplitPlan, SyntheticKind, SyntheticSpec};
pub use error::{Error, Result};
pub use eval::{evaluate, wilcoxon_signed_rank, EvalReport, WilcoxonMethod, WilcoxonResult};
pub use kernel::{fit_kernel, DualModel, KernelKind, KernelSpec};
pub use loss::{all_thresholds_loss, LossKind};
pub use model::{Dataset, Mode, OrdinalModel, PenaltySpec};
pub use objective::{cogol_gradient, cogol_objective, Gradient};
pub use optimizer::{fit, FitReport, FitSpec};
pub use tuning::{tune, SearchSpace, TuneConfig};
