use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("operands live on different grids")]
    GridMismatch,
    #[error("clipped spectral mass fraction {fraction:.3e} exceeds threshold {threshold:.3e}")]
    ClippingExceeded { fraction: f64, threshold: f64 },
    #[error("dense factorization needs {cells} cells but the cap is {cap}")]
    DenseTooLarge { cells: usize, cap: usize },
    #[error("circulant embedding requires a translation-invariant kernel")]
    NotStationary,
    #[error("kernel perturbation returned a non-finite value at offset ({0}, {1})")]
    NonFiniteKernel(f64, f64),
    #[error("gamma = {0} is outside [0, 2)")]
    GammaOutOfRange(f64),
    #[error("gamma = {gamma} is not below sqrt(2) and the sets overlap: second moment is infinite")]
    L2PhaseViolation { gamma: f64 },
    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),
    #[error("kernel inequality K_A <= K_B + C violated by {excess:.3e}")]
    KernelInequalityViolated { excess: f64 },
    #[error("moment order q = {q} outside [1, {max})")]
    MomentOutOfRange { q: f64, max: f64 },
    #[error("winding requires a closed polyline")]
    OpenPath,
    #[error("cannot split {vertices} vertices into {pieces} pieces without interpolation")]
    TooManyPieces { pieces: usize, vertices: usize },
    #[error("path leaves the grid window (needs a margin of at least one cell)")]
    GridTooSmall,
    #[error("dyadic depth {0} is too small (need at least 3)")]
    DepthTooSmall(u32),
    #[error("ensemble of size {got} is too small (need at least {need})")]
    InsufficientEnsemble { got: usize, need: usize },
    #[error("no samples")]
    EmptySamples,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },
    #[error("reports were produced by different configurations")]
    ConfigHashMismatch,
    #[error("malformed data: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
