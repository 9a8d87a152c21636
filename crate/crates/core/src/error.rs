use thiserror::Error;

/// Errors raised by the grid numerics.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum MshError {
    #[error("complex dimension {0} is outside 1..=3")]
    Dimension(usize),
    #[error("resolution {0} is below the minimum of 9 nodes per axis")]
    Resolution(usize),
    #[error("invalid geometry: {0}")]
    Geometry(String),
    #[error("domain has no interior node")]
    EmptyInterior,
    #[error("interior nodes are not edge-connected ({components} components)")]
    Disconnected { components: usize },
    #[error("function is not finite at node {node}")]
    NonFinite { node: usize },
    #[error("stencil of node {node} touches an outside node")]
    StencilOutside { node: usize },
    #[error("order {order} is outside {lo}..={hi}")]
    Order { order: usize, lo: usize, hi: usize },
    #[error("inputs live on different grids")]
    DomainMismatch,
    #[error("mollification radius {delta} is smaller than the spacing {h}")]
    MollifierRadius { delta: f64, h: f64 },
    #[error("slice level is not aligned with the lattice")]
    NotGridAligned,
    #[error("eigenvalue iteration did not converge within {sweeps} sweeps")]
    NoConvergence { sweeps: usize },
    #[error("mask violates clearance: node {node} is within 2h of the boundary or not interior")]
    Clearance { node: usize },
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("malformed grid file: {0}")]
    Format(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for MshError {
    fn from(e: std::io::Error) -> Self {
        MshError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, MshError>;
