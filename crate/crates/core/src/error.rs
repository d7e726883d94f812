use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("point {point:?} lies outside the domain on axis {axis}")]
    OutOfDomain { point: Vec<f64>, axis: usize },

    #[error("cell index {index} out of range (q = {len})")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("flow `{0}` has no shear splitting; integrate the tau-map and use matching instead")]
    UnsupportedSplitting(&'static str),

    #[error("numerical blow-up: {0}")]
    NumericalBlowup(String),

    #[error("shear on axis {axis} would move cell {cell} across the non-periodic seam")]
    SeamViolation { axis: usize, cell: usize },

    #[error("operands are defined on different partitions")]
    PartitionMismatch,

    #[error("maximum matching is not perfect: {unmatched} cells unmatched (increase samples per cell or refine the partition)")]
    NoPerfectMatching { unmatched: usize },

    #[error("band [{a}, {b}) is not inside [-{bandwidth}, {bandwidth})")]
    BandOutOfRange { a: f64, b: f64, bandwidth: f64 },

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("invalid config: {0}")]
    ConfigInvalid(String),

    #[error("corrupt permutation cache: {0}")]
    CorruptCache(String),

    #[error("permutation cache integrity failure: {0}")]
    IntegrityFailure(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code used by the command-line driver.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::ConfigInvalid(_) | Error::InvalidArgument(_) | Error::BandOutOfRange { .. } => 2,
            Error::Io(_) => 1,
            _ => 3,
        }
    }
}
