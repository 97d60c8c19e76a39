//! Targeted source detection: a joint regression and nonnegative dictionary
//! model over sample-by-analyte chemistry data, with spatial and temporal
//! graph smoothing of the source coefficients, fit by block ADMM.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, the command line
//! and parallel search live in the `tsdst` companion crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod baselines;
pub mod data;
pub mod error;
pub mod eval;
pub mod graph;
pub mod linalg;
pub mod model;
pub mod objective;
pub mod params;
pub mod solver;
pub mod synth;

pub use data::{preprocess, ChemDataset, DatasetParts, FittedScaling, PreprocessSpec, RawTable};
pub use error::{Error, Result};
pub use graph::GraphLaplacian;
pub use linalg::Mat;
pub use model::{encode, predict, Encoding, Factorization};
pub use objective::{objective, objective_terms, ObjectiveTerms};
pub use params::{GraphParams, Hyperparams};
pub use solver::{fit, fit_matrices, FitReport, FitStatus};
