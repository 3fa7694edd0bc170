use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid user-facing input: mesh parameters, descriptors, config files.
    #[error("configuration error: {0}")]
    Config(String),

    /// A documented precondition of an operation was not met by the caller.
    #[error("contract violation: {0}")]
    Contract(String),

    /// The mesh violates `a^2 tau^2 <= (1 - eps0^2/2) h^2`.
    #[error("unstable mesh: a^2 tau^2 = {lhs:.6e} > (1 - eps0^2/2) h^2 = {rhs:.6e} (N = {n}, M = {m})")]
    Unstable { lhs: f64, rhs: f64, n: usize, m: usize },

    /// The sharpness frequency does not fit on the mesh.
    #[error("mesh too coarse: k_h = {k_h} exceeds N - 1 = {max_k}; need N >= {min_n}")]
    MeshTooCoarse { k_h: usize, max_k: usize, min_n: usize },

    #[error("numerical integration failed on cell {cell}: {reason}")]
    Quadrature { cell: usize, reason: String },

    /// A mathematical invariant that should hold by construction was violated.
    #[error("internal invariant failure: {0}")]
    Invariant(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// True for errors caused by a mesh that cannot host the requested run
    /// (instability or insufficient resolution).
    pub fn is_mesh_violation(&self) -> bool {
        matches!(self, Error::Unstable { .. } | Error::MeshTooCoarse { .. })
    }
}
