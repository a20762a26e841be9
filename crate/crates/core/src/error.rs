use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

/// Crate-wide error type. Variants are grouped by the stage that raises them;
/// the CLI maps config/validation errors to exit code 1 and everything else to 2.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    // dataset loading and validation
    #[error("label column '{0}' not found in header")]
    MissingLabelColumn(String),
    #[error("non-numeric cell at row {row}, column {col}")]
    NonNumericCell { row: usize, col: usize },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("label column is constant; both classes are required")]
    ConstantLabel,
    #[error("label value {0} is not 0 or 1")]
    InvalidLabel(f64),
    #[error("class {class} has {count} samples, fewer than the {required} required")]
    TooFewSamplesPerClass {
        class: u8,
        count: usize,
        required: usize,
    },
    #[error("row {row} has {got} fields, expected {expected}")]
    RaggedRow {
        row: usize,
        got: usize,
        expected: usize,
    },

    // generators
    #[error("smote requires at least {required} rows in class {class}, found {found}")]
    TooFewNeighbors {
        class: u8,
        required: usize,
        found: usize,
    },
    #[error("training split is missing class {0}")]
    DegenerateClass(u8),

    // fidelity metrics
    #[error("real and synthetic schemas differ: {0}")]
    SchemaMismatch(String),
    #[error("operation requires at least {required} features, found {found}")]
    TooFewFeatures { required: usize, found: usize },
    #[error("feature '{0}' is not binary")]
    NonBinaryFeature(String),
    #[error("operation requires at least {required} rows, found {found}")]
    TooFewRows { required: usize, found: usize },

    // supermetric
    #[error("weights invalid: {0}")]
    InvalidWeights(String),
    #[error("weight fitting requires at least {required} runs, found {found}")]
    TooFewRuns { required: usize, found: usize },
    #[error("insufficient variation: {0}")]
    InsufficientVariation(String),

    // utility
    #[error("auc is undefined with a single class")]
    SingleClass,
    #[error("length mismatch: {0}")]
    LengthMismatch(String),

    // analysis
    #[error("no defined correlation cells for {0}")]
    NoDefinedCells(String),
    #[error("operation requires at least {required} defined cells, found {found}")]
    TooFewCells { required: usize, found: usize },
    #[error("robustness requires at least {required} generator families, found {found}")]
    TooFewFamilies { required: usize, found: usize },

    // reporting
    #[error("heatmap table is empty")]
    EmptyTable,
    #[error("boxplot summaries are empty")]
    EmptySummaries,
    #[error("invalid config: {0}")]
    ConfigInvalid(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("run directory invalid: {0}")]
    RunTreeInvalid(String),
    #[error("dataset '{0}' not found")]
    UnknownDataset(String),

    // io plumbing
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors that indicate bad user input (config, CLI arguments,
    /// malformed input files) rather than a failure during execution.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::ConfigInvalid(_)
                | Error::InvalidParameter(_)
                | Error::MissingLabelColumn(_)
                | Error::NonNumericCell { .. }
                | Error::RaggedRow { .. }
                | Error::EmptyDataset
                | Error::ConstantLabel
                | Error::InvalidLabel(_)
                | Error::UnknownDataset(_)
                | Error::RunTreeInvalid(_)
        )
    }
}
