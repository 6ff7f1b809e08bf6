use crate::classifier::ClassifierError;
use crate::imaging::ImagingError;
use crate::partition::PartitionError;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
    #[error(transparent)]
    Imaging(#[from] ImagingError),
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("objective is undefined on an empty mask")]
    EmptyMask,
    #[error("overlap is undefined for two empty pixel sets")]
    BothEmpty,
    #[error("pixel set is not sufficient for label {0}")]
    Insufficient(i64),
    #[error("oracle grid is invalid: {0}")]
    InvalidGrid(String),
    #[error("worker pool: {0}")]
    Pool(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
