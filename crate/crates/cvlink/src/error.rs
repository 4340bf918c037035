use thiserror::Error;

/// Crate-wide error type. Numerical guard failures carry the measured value
/// and the limit that rejected it so callers can report the margin.
#[derive(Debug, Error)]
pub enum Error {
    #[error("grid size must be a power of two >= 8, got {0}")]
    BadGridSize(usize),
    #[error("grid extent must be positive and finite, got {0}")]
    BadExtent(f64),
    #[error("mode count must be 1..=4, got {0}")]
    BadModeCount(usize),
    #[error("mode index {index} out of range for {modes}-mode state")]
    BadModeIndex { index: usize, modes: usize },
    #[error("grids do not match: {0}")]
    GridMismatch(&'static str),
    #[error("derivative order must be 1 or 2, got {0}")]
    BadDerivativeOrder(u32),
    #[error("rotation modes must be distinct")]
    DegenerateRotation,
    #[error("state has zero norm")]
    ZeroNorm,
    #[error("non-finite amplitude encountered")]
    NonFiniteAmplitude,
    #[error("operator has no terms")]
    EmptyOperator,
    #[error("operator is not Hermitian")]
    NotHermitian,
    #[error("regularization must satisfy Re a > 0, got {0}")]
    BadRegularization(f64),
    #[error("state does not fit the grid: norm deficit {deficit:.3e} exceeds {limit:.3e}")]
    SupportEscapesGrid { deficit: f64, limit: f64 },
    #[error("coherent amplitude too large for the grid: |alpha|^2 = {0}")]
    CoherentTooLarge(f64),
    #[error("empty node list")]
    EmptyNodes,
    #[error("lambda nodes must be strictly increasing with uniform spacing")]
    BadNodes,
    #[error("weight vector length {got} does not match node count {want}")]
    WeightLength { got: usize, want: usize },
    #[error("offset parameter must be finite, got {0}")]
    BadOffset(f64),
    #[error("dilation factor must be positive and finite, got {0}")]
    BadDilation(f64),
    #[error("speed parameter must satisfy |beta| < 1, got {0}")]
    BadSpeed(f64),
    #[error("loss amplitude must lie in [0, 1), got {0}")]
    BadLossAmplitude(f64),
    #[error("perturbative loss expansion is out of regime for kappa = {0}")]
    LossOutOfRegime(f64),
    #[error("number-basis truncation error {weight:.3e} exceeds {limit:.3e} (state too energetic for cutoff)")]
    TruncationExceeded { weight: f64, limit: f64 },
    #[error("angular window residual {residual:.3e} exceeds {limit:.3e} (window too small)")]
    ExcessiveResidual { residual: f64, limit: f64 },
    #[error("sample count must be positive")]
    NoSamples,
    #[error("beta is unidentifiable from a single-node prior")]
    DegeneratePrior,
    #[error("config error: {0}")]
    Config(String),
    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
    #[error("malformed state file: {0}")]
    BadStateFile(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Wraps an error with the pipeline stage that produced it.
    pub fn at_stage(self, stage: &'static str) -> Error {
        Error::Stage { stage, source: Box::new(self) }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
