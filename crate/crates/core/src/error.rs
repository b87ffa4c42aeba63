use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    /// Header of an input or artifact file does not match its documented schema.
    #[error("schema mismatch in {file}: missing [{}], unexpected [{}]", missing.join(","), unexpected.join(","))]
    Schema {
        file: String,
        missing: Vec<String>,
        unexpected: Vec<String>,
    },

    #[error("{file}:{line}: {message}")]
    Malformed { file: String, line: u64, message: String },

    #[error("duplicate firm-year key (firm_id={firm_id}, year={year})")]
    DuplicateKey { firm_id: String, year: i32 },

    #[error("no deflator for naics2={naics2}, year={year}")]
    MissingDeflator { naics2: u16, year: i32 },

    #[error("no labor cost per capita for year {0}")]
    MissingLaborCost(i32),

    #[error("rank-deficient design: {0}")]
    RankDeficient(String),

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("need at least 2 clusters, found {0}")]
    TooFewClusters(usize),

    #[error("no usable observations: {0}")]
    NoObservations(String),

    #[error("unknown column `{0}`")]
    UnknownColumn(String),

    #[error("unknown specification id `{0}`")]
    UnknownSpec(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{stage} stage required: missing artifact {artifact}")]
    MissingStage { stage: String, artifact: String },

    #[error("missing input file {}", .0.display())]
    MissingInput(PathBuf),

    #[error("infeasible generator configuration: {0}")]
    Infeasible(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
