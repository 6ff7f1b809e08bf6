//! Analytic classifiers with known ground truth.
//!
//! All of these are pure functions of pixel values, which makes them usable as
//! exact references for the causal machinery.

use std::time::Duration;

use super::{ClassifierError, ClassifierHandle, Classify, Label, Verdict};
use crate::imaging::{Image, PixelSet, Rgb};

/// Always returns the same verdict.
#[derive(Debug, Clone, Copy)]
pub struct Constant {
    pub verdict: Verdict,
}

impl Classify for Constant {
    fn classify(&self, _image: &Image) -> Result<Verdict, ClassifierError> {
        Ok(self.verdict)
    }

    fn describe(&self) -> String {
        format!("constant:{}", self.verdict.label)
    }
}

pub fn constant(label: Label) -> ClassifierHandle {
    ClassifierHandle::new(Constant {
        verdict: Verdict::new(label, 1.0),
    })
}

/// Label 1 iff at least `threshold` pixels are exactly `green`, else 0.
#[derive(Debug, Clone, Copy)]
pub struct GreenCount {
    pub threshold: usize,
    pub green: Rgb,
}

impl Classify for GreenCount {
    fn classify(&self, image: &Image) -> Result<Verdict, ClassifierError> {
        let count = image.pixels().iter().filter(|&&p| p == self.green).count();
        Ok(Verdict::new(Label::from(count >= self.threshold), 1.0))
    }

    fn describe(&self) -> String {
        format!("green-count:{}", self.threshold)
    }
}

pub const GREEN: Rgb = [0, 255, 0];

pub fn green_count(threshold: usize, green: Rgb) -> ClassifierHandle {
    ClassifierHandle::new(GreenCount { threshold, green })
}

fn check_patches(patches: &[PixelSet], reference: &Image) -> Result<(), ClassifierError> {
    for (i, p) in patches.iter().enumerate() {
        if p.dims() != reference.dims() {
            return Err(ClassifierError::InvalidConfig(format!(
                "patch {i} is {:?} but the reference image is {:?}",
                p.dims(),
                reference.dims()
            )));
        }
        if p.is_empty() {
            return Err(ClassifierError::InvalidConfig(format!("patch {i} is empty")));
        }
    }
    for i in 0..patches.len() {
        for j in i + 1..patches.len() {
            if !patches[i].is_disjoint(&patches[j]) {
                return Err(ClassifierError::OverlappingPatches(i, j));
            }
        }
    }
    Ok(())
}

fn intact(image: &Image, reference: &Image, region: &PixelSet) -> bool {
    let (a, b) = (image.pixels(), reference.pixels());
    region.indices().all(|i| a[i] == b[i])
}

/// Label 1 iff at least one patch is intact (every pixel equal to the reference).
#[derive(Debug, Clone)]
pub struct PatchOr {
    patches: Vec<PixelSet>,
    reference: Image,
}

impl PatchOr {
    pub fn new(patches: Vec<PixelSet>, reference: Image) -> Result<Self, ClassifierError> {
        check_patches(&patches, &reference)?;
        Ok(Self { patches, reference })
    }

    pub fn patches(&self) -> &[PixelSet] {
        &self.patches
    }
}

impl Classify for PatchOr {
    fn classify(&self, image: &Image) -> Result<Verdict, ClassifierError> {
        if image.dims() != self.reference.dims() {
            return Err(ClassifierError::DimensionRejected {
                expected: self.reference.dims(),
                got: image.dims(),
            });
        }
        let hit = self.patches.iter().any(|p| intact(image, &self.reference, p));
        Ok(Verdict::new(Label::from(hit), 1.0))
    }

    fn describe(&self) -> String {
        format!("patch-or:{}", self.patches.len())
    }
}

pub fn patch_or(patches: Vec<PixelSet>, reference: Image) -> Result<ClassifierHandle, ClassifierError> {
    Ok(ClassifierHandle::new(PatchOr::new(patches, reference)?))
}

/// Label 1 iff at least `threshold` of the patches are intact.
///
/// Monotone in the kept pixels; `threshold = 1` is [`PatchOr`], `threshold = len`
/// requires every patch.
#[derive(Debug, Clone)]
pub struct PatchThreshold {
    patches: Vec<PixelSet>,
    reference: Image,
    threshold: usize,
}

impl PatchThreshold {
    pub fn new(patches: Vec<PixelSet>, reference: Image, threshold: usize) -> Result<Self, ClassifierError> {
        check_patches(&patches, &reference)?;
        Ok(Self {
            patches,
            reference,
            threshold,
        })
    }
}

impl Classify for PatchThreshold {
    fn classify(&self, image: &Image) -> Result<Verdict, ClassifierError> {
        if image.dims() != self.reference.dims() {
            return Err(ClassifierError::DimensionRejected {
                expected: self.reference.dims(),
                got: image.dims(),
            });
        }
        let n = self
            .patches
            .iter()
            .filter(|p| intact(image, &self.reference, p))
            .count();
        Ok(Verdict::new(Label::from(n >= self.threshold), 1.0))
    }

    fn describe(&self) -> String {
        format!("patch-threshold:{}/{}", self.threshold, self.patches.len())
    }
}

/// Arbitrary boolean function of which cells are intact.
///
/// `table[m]` is the label when exactly the cells whose bits are set in `m`
/// are intact. Covers every classifier that only looks at cell integrity.
#[derive(Debug, Clone)]
pub struct CellTable {
    cells: Vec<PixelSet>,
    reference: Image,
    table: Vec<Label>,
}

impl CellTable {
    pub fn new(cells: Vec<PixelSet>, reference: Image, table: Vec<Label>) -> Result<Self, ClassifierError> {
        if cells.len() > 20 {
            return Err(ClassifierError::InvalidConfig(format!(
                "{} cells exceed the 20-cell table limit",
                cells.len()
            )));
        }
        if table.len() != 1 << cells.len() {
            return Err(ClassifierError::InvalidConfig(format!(
                "table has {} entries, expected {}",
                table.len(),
                1usize << cells.len()
            )));
        }
        check_patches(&cells, &reference)?;
        Ok(Self {
            cells,
            reference,
            table,
        })
    }
}

impl Classify for CellTable {
    fn classify(&self, image: &Image) -> Result<Verdict, ClassifierError> {
        if image.dims() != self.reference.dims() {
            return Err(ClassifierError::DimensionRejected {
                expected: self.reference.dims(),
                got: image.dims(),
            });
        }
        let mask = self
            .cells
            .iter()
            .enumerate()
            .filter(|(_, c)| intact(image, &self.reference, c))
            .fold(0usize, |m, (i, _)| m | 1 << i);
        Ok(Verdict::new(self.table[mask], 1.0))
    }

    fn describe(&self) -> String {
        format!("cell-table:{}", self.cells.len())
    }
}

/// Wraps a closure as a provider.
pub struct FnClassifier<F>(pub F);

impl<F> Classify for FnClassifier<F>
where
    F: Fn(&Image) -> Verdict + Send + Sync,
{
    fn classify(&self, image: &Image) -> Result<Verdict, ClassifierError> {
        Ok((self.0)(image))
    }

    fn describe(&self) -> String {
        "fn".to_owned()
    }
}

pub fn from_fn(f: impl Fn(&Image) -> Verdict + Send + Sync + 'static) -> ClassifierHandle {
    ClassifierHandle::new(FnClassifier(f))
}

/// Adds a fixed sleep before delegating, emulating model latency.
pub struct Delayed<C> {
    pub inner: C,
    pub latency: Duration,
}

impl<C: Classify> Classify for Delayed<C> {
    fn classify(&self, image: &Image) -> Result<Verdict, ClassifierError> {
        std::thread::sleep(self.latency);
        self.inner.classify(image)
    }

    fn describe(&self) -> String {
        format!("{} (+{:?})", self.inner.describe(), self.latency)
    }
}
