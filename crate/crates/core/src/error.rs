use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown mode `{0}`")]
    UnknownMode(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not square ({rows}x{cols})")]
    NonSquare { rows: usize, cols: usize },

    #[error("index {index} out of range for basis of size {size}")]
    IndexOutOfRange { index: usize, size: usize },

    #[error("quadrature did not converge: entries moved by {delta:.3e} after node doubling")]
    QuadratureNotConverged { delta: f64 },

    #[error("under-resolved clock: width {omega} below resolution {resolution}")]
    UnderResolvedClock { omega: f64, resolution: f64 },

    #[error("clock window [{lo}, {hi}] does not cover requested time {t}")]
    ClockWindowExceeded { lo: f64, hi: f64, t: f64 },

    #[error("under-resolved eta mode: state leakage {leakage:.3e}")]
    UnderResolvedEta { leakage: f64 },

    #[error("time dependence is not separable; a Galerkin clock needs sum_k lambda_k(t) M_k")]
    NonSeparable,

    #[error("generator is not Hermitian (anti-Hermitian part {defect:.3e}); enable the eta mode")]
    NonHermitianGenerator { defect: f64 },

    #[error("Krylov propagation did not converge (residual {residual:.3e})")]
    KrylovNotConverged { residual: f64 },

    #[error("dense eigen-propagation requires a Hermitian matrix (defect {defect:.3e})")]
    NotHermitian { defect: f64 },

    #[error("matrix of dimension {dim} exceeds the dense cap {cap}")]
    TooLargeForDense { dim: usize, cap: usize },

    #[error("density matrix is not positive semidefinite (min eigenvalue {min_eig:.3e})")]
    NonPsd { min_eig: f64 },

    #[error("recovery failed: success probability {probability:.3e}")]
    RecoveryFailure { probability: f64 },

    #[error("measurement outcome has zero probability")]
    ZeroProbability,

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("config error at `{path}`: {msg}")]
    Config { path: String, msg: String },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}

/// Attach a pipeline stage name to an error.
pub trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| Error::Stage {
            stage,
            source: Box::new(e),
        })
    }
}
