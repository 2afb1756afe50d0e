//! Deep structural causal models: residual-logit mechanisms for categorical
//! and ordinal variables, assembled along a DAG and trained jointly.

mod fit;
mod mechanism;
mod model;

pub use fit::{fit, EpochRecord, FitConfig, FitOutcome};
pub use fit::loss_and_gradient;
pub(crate) use mechanism::{encode_row, parent_features};
pub use mechanism::{argmax, Feature, Mechanism, MechanismKind, ParentInfo, ParentValue, PROB_FLOOR};
pub use model::{aic, CurvePoint, LogLikelihood, Prediction, Propagation, Scm};
