//! Causal, responsibility-based explanations for black-box image classifiers.
//!
//! A run ranks superpixels by their degree of causal responsibility for the
//! classifier's label, then searches the resulting saliency landscape for
//! several small, mostly disjoint pixel sets that each reproduce the label on
//! their own.
//!
//! The numeric core is generic over [`Scalar`]; `f64` is the working type and
//! [`Rational`] gives exact arithmetic for cross-checks.

pub mod classifier;
pub mod error;
pub mod explanation;
pub mod floodlight;
pub mod imaging;
pub mod oracle;
pub mod partition;
pub mod pipeline;
pub mod responsibility;
pub mod rng;
pub mod scalar;

pub use classifier::{ClassifierError, ClassifierHandle, Classify, Label, Verdict};
pub use error::{Error, Result};
pub use explanation::{Explanation, Provenance};
pub use imaging::{apply_mask, Image, MaskingColour, PixelSet};
pub use partition::{PartitionKind, PartitionStrategy};
pub use pipeline::{rex, Mode, RexConfig, RexOutcome};
pub use responsibility::SaliencyLandscape;
pub use scalar::{Rational, Scalar};

pub type Landscape = SaliencyLandscape<f64>;
pub type Landscape32 = SaliencyLandscape<f32>;
pub type ExactLandscape = SaliencyLandscape<Rational>;
pub type Outcome = RexOutcome<f64>;
