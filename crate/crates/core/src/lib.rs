#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod correlation;
pub mod distributions;
pub mod error;
pub mod exec;
pub mod factor_model;
pub mod format;
pub mod fwer_analytics;
pub mod procedures;
pub mod quadrature;
pub mod roots;
pub mod simulation;
pub mod special;
pub mod tables;

pub use correlation::CorrelationMatrix;
pub use distributions::{DistributionSpec, StandardizedDistribution};
pub use error::{Error, ErrorKind, Result};
pub use exec::Execution;
pub use factor_model::{EquicorrelatedModel, MarginalLaw, ModelSpec, NullConfiguration};
pub use procedures::{CutoffVector, Procedure, RejectionAccount};
