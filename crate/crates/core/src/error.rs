use thiserror::Error;

use crate::expr::{EvalError, ParseError};
use crate::jets::JetError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Jet(#[from] JetError),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("degenerate contact structure at x = {x:?}: omega has rank < {rank_required}")]
    DegenerateContact { x: Vec<f64>, rank_required: usize },
    #[error("fundamental tensor not positive definite at x = {x:?}, v = {v:?} (smallest eigenvalue {min_eigenvalue:e})")]
    MetricDegenerate { x: Vec<f64>, v: Vec<f64>, min_eigenvalue: f64 },
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("oracle inapplicable: {0}")]
    OracleInapplicable(String),
    #[error("curve is not admissible: defect {defect:e} at t = {t}")]
    InadmissibleCurve { t: f64, defect: f64 },
    #[error("transport broke down at t = {t}: {reason}")]
    TransportBreakdown { t: f64, reason: String },
}
