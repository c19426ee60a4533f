//! Identification of squared total effects in linear structural equation
//! models when the treatment or response is latent but surrogate variables
//! are observed.
//!
//! The crate provides:
//!
//! - path diagrams with directed and bidirected edges, moralization, and
//!   d-separation ([`graph`]);
//! - labeled covariance algebra: conditioning, regression coefficients,
//!   concentration matrices ([`cov`]);
//! - graphical identifiability criteria with machine-checkable
//!   certificates ([`criteria`]);
//! - recovery of the latent factor loading from the observed concentration
//!   matrix and the four squared-total-effect strategies ([`identify`]);
//! - ground-truth simulation: exact implied covariances, seeded Gaussian
//!   sampling, and path-product oracles ([`sim`]);
//! - a line-oriented graph format and covariance JSON documents ([`dsl`]);
//! - built-in worked examples ([`fixtures`]).
//!
//! The conventions throughout: all variables have unit variance (inputs to
//! identification must be correlation-like matrices), and the latent
//! variable's unit variance fixes the scale of the recovered effect.

pub mod cli;
pub mod cov;
pub mod criteria;
pub mod dsl;
pub mod error;
pub mod fixtures;
pub mod graph;
pub mod identify;
pub mod sim;

pub use cov::LabeledCovariance;
pub use criteria::{
    CriterionCertificate, DoubleRoleAssignment, LatentRole, RoleAssignment, RoleSpec, Strategy,
};
pub use error::{CovError, GraphError, IdentifyError, SemError};
pub use graph::{Observability, PathDiagram, VertexId};
pub use identify::{identify_tau_sq, IdentificationResult, Settings};
pub use sim::LinearSEM;
