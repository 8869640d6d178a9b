use alloc::string::String;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got} ({what})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("{what} = {value} is outside {domain}")]
    OutOfDomain {
        what: &'static str,
        value: f64,
        domain: &'static str,
    },
    #[error("empty dataset")]
    EmptyDataset,
    #[error("training diverged: {0}")]
    Diverged(String),
    #[error("non-finite loss component `{0}`")]
    NonFiniteLoss(&'static str),
    #[error("invalid feature index {index} (feature count {count})")]
    InvalidFeature { index: usize, count: usize },
    #[error("degenerate edit: target change {0:e} is below 1e-6")]
    DegenerateEdit(f64),
    #[error("architecture mismatch: expected `{expected}`, got `{got}`")]
    Architecture { expected: String, got: String },
    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = core::result::Result<T, Error>;
