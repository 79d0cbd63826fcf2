use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("lattice dimension must be at least 1")]
    ZeroDimension,
    #[error("unknown vertex {0}")]
    UnknownVertex(usize),
    #[error("invalid graph: {0}")]
    InvalidGraph(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("parity violation at vertex {vertex}: {endpoints} link endpoints")]
    Parity { vertex: usize, endpoints: u64 },
    #[error("dangling endpoint on edge {edge}, copy {copy}, side {side}")]
    DanglingEndpoint { edge: usize, copy: usize, side: usize },
    #[error("graph has no boundary")]
    NoBoundary,
    #[error("instance too large: {what} = {value} exceeds guard {limit}")]
    GuardExceeded {
        what: &'static str,
        value: u64,
        limit: u64,
    },
    #[error("invalid bound certificate: {0}")]
    InvalidCertificate(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("series did not converge: {0}")]
    NotConverged(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
