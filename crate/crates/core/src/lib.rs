//! Support vector proliferation (SVP): detection of the event that every
//! training sample is a support vector of the hard-margin SVM, and Monte
//! Carlo tools for locating the phase transition in `(n, d)`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod experiment;
pub mod linalg;
pub mod sampling;
pub mod solvers;
pub mod svp;

pub use experiment::{CellId, CellSummary, GridConfig, Norm};
pub use sampling::{Dataset, DistributionKind};
pub use svp::{detect_svp_l2, SvpVerdict};
