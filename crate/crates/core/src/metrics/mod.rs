//! Estimation: least squares with Driscoll–Kraay errors, AUC, the
//! fundamentals index, pass-through regressions, local projections and
//! event studies.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

pub mod auc;
pub mod crisis;
pub mod event_study;
pub mod index;
pub mod linalg;
pub mod lp;
pub mod ols;
pub mod passthrough;
pub mod quantile;

pub use auc::{auc, auc_counts, AucCounts};
pub use index::{fundamentals_index, IndexConfig, IndexRow};
pub use ols::{fit_ols_dk, Design, FitOptions, FitResult};

#[derive(Debug, Clone, PartialEq, thiserror::Error, Serialize, Deserialize)]
pub enum MetricsError {
    #[error("rank deficient design: {0:?}")]
    RankDeficient(Vec<String>),
    #[error("{n} observations for {k} regressors")]
    InsufficientData { n: usize, k: usize },
    #[error("non-finite value in {0}")]
    NonFiniteInput(String),
    #[error("{0}")]
    Shape(String),
    #[error("fixed-effect absorption did not converge in {0} sweeps")]
    NotConverged(usize),
    #[error("only one outcome class present")]
    OneClassOnly,
    #[error("missing series {0}")]
    MissingSeries(String),
    #[error("no runs in decile {0}")]
    EmptyDecile(usize),
    #[error("{distinct} distinct values cannot fill {bins} bins")]
    DecileDegeneracy { bins: usize, distinct: usize },
    #[error("no rows of event type {0}")]
    EmptyEventType(String),
    #[error("horizon {h} has only {n} observations")]
    HorizonUnderpopulated { h: i32, n: usize },
}
