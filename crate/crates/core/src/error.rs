use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("unknown {kind} label `{label}`; valid labels: {valid}")]
    Lookup {
        kind: &'static str,
        label: String,
        valid: String,
    },

    #[error("schema error: missing columns {0:?}")]
    MissingColumns(Vec<String>),

    #[error("empty dataset")]
    EmptyDataset,

    #[error("invalid value: {0}")]
    InvalidValue(String),

    #[error("degenerate design: column `{0}` is constant")]
    ConstantColumn(String),

    #[error("singular design: rank-deficient columns {0:?}")]
    SingularDesign(Vec<String>),

    #[error("degrees of freedom: n = {n} must exceed k + 1 = {}", k + 1)]
    DegreesOfFreedom { n: usize, k: usize },

    #[error("zero variance: {0}")]
    ZeroVariance(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("{name}: {source}")]
    Candidate {
        name: String,
        #[source]
        source: Box<Error>,
    },

    #[error("{step}: {source}")]
    Step {
        step: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn at(self, step: &'static str) -> Self {
        match self {
            // keep the innermost step name
            e @ Error::Step { .. } => e,
            e => Error::Step {
                step,
                source: Box::new(e),
            },
        }
    }

    pub fn step(&self) -> Option<&'static str> {
        match self {
            Error::Step { step, .. } => Some(step),
            _ => None,
        }
    }
}

pub(crate) trait StepExt<T> {
    fn at(self, step: &'static str) -> Result<T>;
}

impl<T> StepExt<T> for Result<T> {
    fn at(self, step: &'static str) -> Result<T> {
        self.map_err(|e| e.at(step))
    }
}
