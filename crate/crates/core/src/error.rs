//! Error type shared by every module in the crate.

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// All failure modes of the library surface.
///
/// Variants carry enough context (file, row/column, dimension names) for a
/// CLI to print an actionable message without re-deriving state.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Underlying I/O failure while reading or writing an artifact. The
    /// cause is attached as `source` (not repeated in the message) so
    /// chain-printing reporters show it exactly once.
    #[error("i/o error on {path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// CSV structure problems (ragged rows, missing header, ...).
    #[error("malformed csv in {path}: {detail}")]
    MalformedCsv { path: String, detail: String },

    /// An empty cell where a number (or id) was required. Rows and columns
    /// are reported 1-based as a user would count them; data rows start
    /// after the header.
    #[error("missing value at ({row}, {column}) in {path}")]
    MissingValue {
        path: String,
        row: usize,
        column: String,
    },

    /// A cell failed to parse as a finite number.
    /// Rows and columns are reported 1-based as a user would count them.
    #[error("non-numeric value '{value}' at ({row}, {column}) in {path}")]
    BadCell {
        path: String,
        row: usize,
        column: String,
        value: String,
    },

    /// Column-role mapping problems: unknown names, duplicates, no outcome.
    #[error("invalid column roles: {0}")]
    BadRoles(String),

    /// Shape or invariant violations in user-supplied matrices or configs.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The covariate design [1, C] is numerically rank deficient.
    #[error("covariate design is rank deficient (column {0} is collinear)")]
    RankDeficientCovariates(usize),

    /// Zero-variance column encountered where scaling was requested.
    #[error("column '{0}' has zero variance; disable scaling or drop it")]
    ZeroVariance(String),

    /// Penalty weights outside their admissible ranges.
    #[error("invalid penalty weights: {0}")]
    BadWeights(String),

    /// The objective became non-finite during optimization.
    #[error("objective became non-finite at iteration {iteration}")]
    NonFiniteObjective { iteration: usize },

    /// A linear system that must be solvable was singular.
    #[error("singular system in {context}; {hint}")]
    SingularSystem {
        context: &'static str,
        hint: &'static str,
    },

    /// BIC is undefined because the least-squares loss is not positive.
    #[error("least-squares loss is {loss}; the literal BIC needs a positive loss — use the Gaussian variant")]
    NonPositiveLoss { loss: f64 },

    /// Simulation spec that rounds to zero planted paths.
    #[error("sparsity {sparsity} with q={q}, p={p} rounds to zero planted paths")]
    InfeasibleSparsity { sparsity: f64, q: usize, p: usize },

    /// Every replicate of a simulation run failed.
    #[error("all {0} simulation replicates failed")]
    AllReplicatesFailed(usize),

    /// Serialization round-trip failures.
    #[error("serialization error: {0}")]
    Serde(String),
}

impl Error {
    /// Attach a path to an `std::io::Error`.
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serde(e.to_string())
    }
}
