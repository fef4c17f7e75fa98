use thiserror::Error;

/// Everything that can go wrong across the crate.
///
/// Numerical soft failures inside samplers (a proposal leaving the support,
/// a natural parameter leaving its admissible interval) are *not* errors:
/// they are handled as zero posterior mass by the callers that expect them.
/// This enum covers structural problems only — bad configuration, shape
/// mismatches, data that fails validation, and algorithms that genuinely
/// did not converge.
#[derive(Debug, Error)]
pub enum Error {
    /// A scalar natural parameter fell outside the family's admissible interval.
    #[error("natural parameter θ = {value} lies outside the admissible interval [{lo}, {hi}]")]
    ThetaOutOfDomain { value: f64, lo: f64, hi: f64 },

    /// A component of a linear predictor fell outside the admissible interval.
    #[error("row {row}: natural parameter θ = {value} lies outside the admissible interval [{lo}, {hi}]")]
    ThetaOutOfDomainAtRow {
        row: usize,
        value: f64,
        lo: f64,
        hi: f64,
    },

    /// Invalid family specification (bad scale, unbounded Poisson interval, …).
    #[error("invalid family: {0}")]
    InvalidFamily(String),

    /// Invalid configuration value outside the family itself.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// Two objects that must agree in length/shape do not.
    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    /// A response or design entry failed validation; `row` is zero-based.
    #[error("data validation failed at row {row}: {message}")]
    DataValidation { row: usize, message: String },

    /// An input that must be finite was not.
    #[error("non-finite input in {what}")]
    NonFinite { what: &'static str },

    /// Power iteration did not reach the requested tolerance.
    #[error("spectral norm power iteration did not converge within {iters} iterations")]
    PowerIterationDiverged { iters: usize },

    /// The subset enumeration would exceed the exhaustive-search budget.
    #[error("subset enumeration needs {subsets} candidates, above the budget of {budget}")]
    EnumerationBudget { subsets: u128, budget: u64 },

    /// No per-subset optimization converged, so there is no oracle value.
    #[error("no subset optimization converged; oracle value undefined")]
    AllSubsetsFailed,

    /// The prior gradient was requested on or outside the truncation boundary.
    #[error("prior gradient undefined at ‖β‖₂ = {norm} with truncation radius {radius}")]
    BoundaryGradient { norm: f64, radius: f64 },

    /// Rejection sampling against the truncation ball used up its attempt budget.
    #[error("prior sampling exhausted {attempts} rejection attempts against the truncation ball")]
    PriorSamplingExhausted { attempts: usize },

    /// An operation that needs at least one retained draw got an empty chain.
    #[error("chain holds no retained draws")]
    EmptyChain,

    /// Every post-burn-in proposal was rejected; the step size is far too large.
    #[error("all post-burn-in proposals rejected at step size {step_size}; decrease the step size")]
    AllRejected { step_size: f64 },

    /// The chain could not be started from the requested initial state.
    #[error("bad chain initialization: {0}")]
    BadInit(String),

    /// The target density vanished on every grid node.
    #[error("posterior mass is zero on every grid node; grid does not cover the support")]
    DegenerateSupport,

    /// Grid evaluation was requested above the node budget.
    #[error("grid holds {nodes} nodes, above the budget of {budget}")]
    GridTooLarge { nodes: u128, budget: u64 },

    /// Grid posteriors are only tabulated in low dimension.
    #[error("grid posterior supports at most {max} dimensions, got {got}")]
    GridDimension { got: usize, max: usize },

    /// A study needs more cells than the configuration produces.
    #[error("study needs at least {need} cells, configuration produces {got}")]
    InsufficientCells { got: usize, need: usize },

    /// A study needs more replications per cell than configured.
    #[error("study needs at least {need} replications per cell, got {got}")]
    InsufficientReplications { got: usize, need: usize },

    /// Newton iteration failed where convergence is required (fit/MLE paths).
    #[error("Newton iteration for {what} did not converge within {iters} iterations")]
    NewtonDiverged { what: &'static str, iters: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    /// A delimited numeric file failed to parse; `line` is one-based.
    #[error("{path}:{line}: {message}")]
    CsvParse {
        path: String,
        line: usize,
        message: String,
    },

    /// The run configuration file failed to parse.
    #[error("failed to parse config {path}: {message}")]
    ConfigParse { path: String, message: String },
}

impl Error {
    /// True when the error reports a natural parameter leaving its interval.
    /// Samplers map this case to zero posterior mass instead of failing.
    pub fn is_theta_domain(&self) -> bool {
        matches!(
            self,
            Error::ThetaOutOfDomain { .. } | Error::ThetaOutOfDomainAtRow { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
