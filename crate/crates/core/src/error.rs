use chrono::NaiveDate;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("line {line}: unparseable timestamp `{value}`")]
    UnparseableTimestamp { line: usize, value: String },

    #[error("non-hourly resolution: {0}")]
    NonHourlyResolution(String),

    #[error("line {line}: invalid value `{value}` in column `{column}`")]
    InvalidValue {
        line: usize,
        column: String,
        value: String,
    },

    #[error("negative generation {value} in `{series}` on {date} hour {hour}")]
    NegativeGeneration {
        series: &'static str,
        date: NaiveDate,
        hour: u8,
        value: f64,
    },

    #[error("`{series}` on {date} hour {hour}: missing value without observations on both sides")]
    GapAtBoundary {
        series: &'static str,
        date: NaiveDate,
        hour: u8,
    },

    #[error("invalid panel: {0}")]
    InvalidPanel(String),

    #[error("invalid synthetic process: {0}")]
    InvalidDgp(String),

    #[error("insufficient history: {0}")]
    InsufficientHistory(String),

    #[error("degenerate design: {0}")]
    DegenerateDesign(String),

    #[error("too few rows: {rows} rows for {cols} regressors")]
    TooFewRows { rows: usize, cols: usize },

    #[error("shape mismatch: expected {expected} values, got {got}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("quantile regression solver failed: {0}")]
    SolverFailure(String),

    #[error("alpha {0} does not put both interval ends on the percentile grid")]
    UnsupportedAlpha(f64),

    #[error("empty ensemble")]
    EmptyEnsemble,

    #[error("misaligned inputs: {0}")]
    Misaligned(String),

    #[error("config: {0}")]
    Config(String),

    #[error("split {split}: {source}")]
    InSplit {
        split: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{date} hour {hour}, {context}: {source}")]
    AtTarget {
        date: NaiveDate,
        hour: u8,
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn in_split(self, split: usize) -> Self {
        Error::InSplit {
            split,
            source: Box::new(self),
        }
    }

    pub(crate) fn at_target(self, date: NaiveDate, hour: u8, context: impl Into<String>) -> Self {
        Error::AtTarget {
            date,
            hour,
            context: context.into(),
            source: Box::new(self),
        }
    }
}
