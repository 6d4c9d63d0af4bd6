use thiserror::Error;

use crate::network::Topology;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("grid with N={n} is too small (need N >= {required})")]
    GridTooSmall { n: usize, required: usize },

    #[error("grid function contains a non-finite value at node {node}")]
    NonFinite { node: usize },

    #[error("curve {curve} is not regular at node {node}: |γ_x| = {speed:.3e} < {threshold:.3e}")]
    Irregular {
        curve: usize,
        node: usize,
        speed: f64,
        threshold: f64,
    },

    #[error("expected a {expected:?} network, found {found:?}")]
    WrongTopology { expected: Topology, found: Topology },

    #[error("curves have mismatched grids ({0})")]
    GridMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("perturbation violates the junction matching: {0}")]
    InvalidPerturbation(String),

    #[error("network is not admissible: {0}")]
    Inadmissible(String),

    #[error("reparametrization failed: {0}")]
    Reparametrization(String),

    #[error("linear compatibility violated: residual {residual:.3e} > {tolerance:.3e}")]
    Compatibility { residual: f64, tolerance: f64 },

    #[error("matrix is numerically singular (pivot {pivot:.3e} at row {row})")]
    Singular { row: usize, pivot: f64 },

    #[error("unknown scenario '{0}'")]
    UnknownScenario(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}
