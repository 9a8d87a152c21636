//! Grid numerics for m-subharmonic functions on domains in ℂⁿ (n ≤ 3):
//! discrete complex Hessians and their symmetric functions, the filtration
//! `psh = sh_n ⊂ … ⊂ sh_1`, relative extremal functions of condensers,
//! capacities, and checkers for the quantitative statements about them.

pub mod analysis;
pub mod capacity;
pub mod checks;
pub mod config;
pub mod corpus;
pub mod envelope;
pub mod error;
pub mod grid;
pub mod hessian;
pub mod mshg;
mod multigrid;

pub use analysis::{classify_msh, MshReport, Slack};
pub use capacity::{condenser_capacity, outer_capacity, polarity_indicator, CapacityResult, CondenserSpec};
pub use checks::CheckOutcome;
pub use config::ExperimentConfig;
pub use envelope::{solve_pmeasure, EnvelopeConfig, PMeasureResult};
pub use error::{MshError, Result};
pub use grid::{build_domain, DomainSpec, GridDomain, GridFunction, NodeClass, NodeMask, SetSpec};
pub use hessian::{complex_hessian, hessian_density, mixed_hessian_density, HermitianMatrix, MeasureField};
