//! Candidate post-processing: drain minimization and overlap-bounded extraction.

use serde::{Deserialize, Serialize};

use crate::classifier::{ClassifierHandle, Label};
use crate::error::{Error, Result};
use crate::imaging::{apply_mask, Image, MaskingColour, PixelSet};
use crate::responsibility::SaliencyLandscape;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Floodlight,
    Recursive,
    /// The fully masked image already keeps the label.
    Degenerate,
}

/// Where an explanation came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub method: Method,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub floodlight: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub depth: Option<usize>,
}

impl Provenance {
    pub fn floodlight(index: usize, seed: u64, radius: f64) -> Self {
        Self {
            method: Method::Floodlight,
            floodlight: Some(index),
            seed: Some(seed),
            radius: Some(radius),
            depth: None,
        }
    }

    pub fn recursive(depth: usize) -> Self {
        Self {
            method: Method::Recursive,
            floodlight: None,
            seed: None,
            radius: None,
            depth: Some(depth),
        }
    }

    pub fn degenerate() -> Self {
        Self {
            method: Method::Degenerate,
            floodlight: None,
            seed: None,
            radius: None,
            depth: None,
        }
    }
}

/// A pixel set that, with everything else masked, keeps the original label.
#[derive(Debug, Clone, PartialEq)]
pub struct Explanation {
    pub pixels: PixelSet,
    pub label: Label,
    pub confidence: f64,
    pub source: Provenance,
}

impl Explanation {
    /// Classifies `image` masked down to `pixels` and returns the explanation if
    /// the label is kept, [`Error::Insufficient`] otherwise.
    pub fn certify(
        image: &Image,
        classifier: &ClassifierHandle,
        label: Label,
        colour: MaskingColour,
        pixels: PixelSet,
        source: Provenance,
    ) -> Result<Self> {
        let verdict = classifier.classify(&apply_mask(image, &pixels, colour)?)?;
        if verdict.label != label {
            return Err(Error::Insufficient(label));
        }
        Ok(Self {
            pixels,
            label,
            confidence: verdict.confidence,
            source,
        })
    }

    pub fn size(&self) -> usize {
        self.pixels.len()
    }

    pub fn size_fraction(&self) -> f64 {
        self.pixels.len() as f64 / self.pixels.capacity() as f64
    }
}

/// Sørensen–Dice coefficient `2|a∩b| / (|a|+|b|)`.
pub fn sdc(a: &PixelSet, b: &PixelSet) -> Result<f64> {
    let total = a.len() + b.len();
    if total == 0 {
        return Err(Error::BothEmpty);
    }
    Ok(2.0 * a.intersection_len(b) as f64 / total as f64)
}

/// Levels present in `region`, highest first. Each level is the smallest value of
/// a run of values that are equal to machine precision.
fn descending_levels<T: Scalar>(landscape: &SaliencyLandscape<T>, region: &PixelSet) -> Vec<T> {
    let mut values: Vec<T> = region.indices().map(|i| landscape.at_index(i)).collect();
    values.sort_by(|a, b| b.partial_cmp(a).expect("landscape values are comparable"));
    let mut levels: Vec<T> = Vec::new();
    let mut run_head: Option<T> = None;
    for v in values {
        match run_head {
            Some(head) if head.same_level(v) => *levels.last_mut().expect("run started") = v,
            _ => {
                run_head = Some(v);
                levels.push(v);
            }
        }
    }
    levels
}

/// Shrinks a sufficient explanation to the highest "water level" of the
/// landscape that still keeps the label.
///
/// Only pixels of the explanation are considered. Levels are searched by
/// bisection, so the result is the smallest passing prefix of levels whenever
/// sufficiency is monotone in the level. The full explanation is the fallback.
pub fn drain<T: Scalar>(
    image: &Image,
    explanation: &Explanation,
    label: Label,
    classifier: &ClassifierHandle,
    landscape: &SaliencyLandscape<T>,
    colour: MaskingColour,
) -> Result<Explanation> {
    let region = &explanation.pixels;
    let levels = descending_levels(landscape, region);
    if levels.len() <= 1 {
        return Ok(explanation.clone());
    }
    // the last level reproduces the whole region, which is known to pass
    let (mut lo, mut hi) = (0, levels.len() - 1);
    let mut best: Option<(PixelSet, f64)> = None;
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        let candidate = landscape.at_or_above(region, levels[mid]);
        let verdict = classifier.classify(&apply_mask(image, &candidate, colour)?)?;
        if verdict.label == label {
            hi = mid;
            best = Some((candidate, verdict.confidence));
        } else {
            lo = mid + 1;
        }
    }
    Ok(match best {
        Some((pixels, confidence)) if hi < levels.len() - 1 => Explanation {
            pixels,
            label,
            confidence,
            source: explanation.source.clone(),
        },
        _ => explanation.clone(),
    })
}

/// Pairwise overlap above `delta`: entry `(i, j)` is the SDC when it exceeds
/// `delta`, else 0; the diagonal is 0.
#[derive(Debug, Clone, PartialEq)]
pub struct OverlapMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl OverlapMatrix {
    pub fn new(sets: &[&PixelSet], delta: f64) -> Self {
        let n = sets.len();
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let s = sdc(sets[i], sets[j]).unwrap_or(1.0);
                let v = if s > delta { s } else { 0.0 };
                entries[i * n + j] = v;
                entries[j * n + i] = v;
            }
        }
        Self { n, entries }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    /// Column sum of `j` restricted to the rows in `alive`.
    fn column_sum(&self, j: usize, alive: &[usize]) -> f64 {
        alive.iter().map(|&i| self.get(i, j)).sum()
    }
}

/// Greedy selection of candidates whose pairwise SDC is at most `delta`.
///
/// Identical candidates are collapsed first. Then, repeatedly, every
/// candidate whose overlap column sums to zero is admitted, and the candidate
/// with the largest total overlap is discarded (ties: more pixels first, then
/// lower index). Output keeps candidate order.
pub fn extract(candidates: Vec<Explanation>, delta: f64) -> Vec<Explanation> {
    let mut unique: Vec<Explanation> = Vec::with_capacity(candidates.len());
    for c in candidates {
        if !unique.iter().any(|u| u.pixels == c.pixels) {
            unique.push(c);
        }
    }
    let sets: Vec<&PixelSet> = unique.iter().map(|e| &e.pixels).collect();
    let m = OverlapMatrix::new(&sets, delta);
    let mut alive: Vec<usize> = (0..unique.len()).collect();
    let mut admitted: Vec<usize> = Vec::new();
    loop {
        let (free, rest): (Vec<usize>, Vec<usize>) =
            alive.iter().partition(|&&j| m.column_sum(j, &alive) == 0.0);
        admitted.extend(free);
        alive = rest;
        if alive.is_empty() {
            break;
        }
        let worst = *alive
            .iter()
            .max_by(|&&a, &&b| {
                let (sa, sb) = (m.column_sum(a, &alive), m.column_sum(b, &alive));
                sa.total_cmp(&sb)
                    .then_with(|| unique[a].size().cmp(&unique[b].size()))
                    .then_with(|| b.cmp(&a))
            })
            .expect("alive is nonempty");
        alive.retain(|&j| j != worst);
    }
    admitted.sort_unstable();
    let mut slots: Vec<Option<Explanation>> = unique.into_iter().map(Some).collect();
    admitted.into_iter().filter_map(|i| slots[i].take()).collect()
}
