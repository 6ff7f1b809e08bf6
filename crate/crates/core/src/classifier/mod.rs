//! The black-box boundary.
//!
//! Every provider answers one question: what is the top label for this image?
//! Sufficiency everywhere in the crate means top-label equality; confidence is
//! carried along for reporting only.

mod external;
pub mod synthetic;

use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::imaging::Image;

pub use external::{ExternalClassifier, DEFAULT_TIMEOUT};

/// Class identifier reported by a provider.
pub type Label = i64;

/// Top prediction of a classifier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub label: Label,
    /// In `[0, 1]`.
    pub confidence: f64,
}

impl Verdict {
    pub fn new(label: Label, confidence: f64) -> Self {
        Self { label, confidence }
    }
}

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum ClassifierError {
    #[error("classifier provider failed: {0}")]
    ProviderFailure(String),
    #[error("classifier rejected a {got:?} image (expects {expected:?})")]
    DimensionRejected {
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error("failed to spawn classifier process: {0}")]
    Spawn(String),
    #[error("classifier protocol violation: {0}")]
    ProtocolViolation(String),
    #[error("classifier did not answer within {0:?}")]
    Timeout(Duration),
    #[error("patches {0} and {1} overlap")]
    OverlappingPatches(usize, usize),
    #[error("invalid classifier configuration: {0}")]
    InvalidConfig(String),
}

/// A classification provider. Implementations must be deterministic: the same
/// image always yields the same verdict.
pub trait Classify: Send + Sync {
    fn classify(&self, image: &Image) -> Result<Verdict, ClassifierError>;

    /// Optional batching hook; the default classifies one image at a time.
    fn classify_many(&self, images: &[Image]) -> Result<Vec<Verdict>, ClassifierError> {
        images.iter().map(|img| self.classify(img)).collect()
    }

    fn describe(&self) -> String {
        "classifier".to_owned()
    }
}

/// Shared reference to a provider plus a monotone count of classifications.
///
/// Clones share the provider and the counter.
#[derive(Clone)]
pub struct ClassifierHandle {
    provider: Arc<dyn Classify>,
    calls: Arc<AtomicU64>,
}

impl ClassifierHandle {
    pub fn new(provider: impl Classify + 'static) -> Self {
        Self::from_arc(Arc::new(provider))
    }

    pub fn from_arc(provider: Arc<dyn Classify>) -> Self {
        Self {
            provider,
            calls: Arc::new(AtomicU64::new(0)),
        }
    }

    pub fn classify(&self, image: &Image) -> Result<Verdict, ClassifierError> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.provider.classify(image)
    }

    pub fn classify_many(&self, images: &[Image]) -> Result<Vec<Verdict>, ClassifierError> {
        self.calls.fetch_add(images.len() as u64, Ordering::Relaxed);
        self.provider.classify_many(images)
    }

    /// Number of images classified through this handle (and its clones) so far.
    pub fn call_count(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }

    pub fn describe(&self) -> String {
        self.provider.describe()
    }
}

impl fmt::Debug for ClassifierHandle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ClassifierHandle")
            .field("provider", &self.provider.describe())
            .field("calls", &self.call_count())
            .finish()
    }
}

/// Spawns `command` through `sh -c` and speaks the NDJSON protocol with it.
pub fn make_external_classifier(command: &str, timeout: Duration) -> Result<ClassifierHandle, ClassifierError> {
    Ok(ClassifierHandle::new(ExternalClassifier::spawn(command, timeout)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn call_count_is_shared_and_monotone() {
        let h = synthetic::constant(3);
        let img = Image::filled(2, 2, [0, 0, 0]);
        let h2 = h.clone();
        assert_eq!(h.call_count(), 0);
        h.classify(&img).unwrap();
        h2.classify(&img).unwrap();
        h.classify_many(&[img.clone(), img.clone(), img]).unwrap();
        assert_eq!(h.call_count(), 5);
        assert_eq!(h2.call_count(), 5);
    }
}
