//! End-to-end explanation runs: rank, search, drain, extract.

use std::collections::HashSet;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::{ClassifierHandle, Label, Verdict};
use crate::error::{Error, Result};
use crate::explanation::{drain, extract, Explanation, Provenance};
use crate::floodlight::{floodlight_search, SearchParams};
use crate::imaging::{apply_mask, Image, MaskingColour, PixelSet};
use crate::oracle::minimal_sufficient_masks;
use crate::partition::{rasterize, PartitionError, PartitionStrategy, Rect, Region};
use crate::responsibility::{
    default_min_side, pool, rank, Exploration, RefinementContext, RankParams, RefineParams, RefineStats, SaliencyLandscape,
    DEFAULT_MAX_DEPTH,
};
use crate::rng::{self, TAG_FLOODLIGHT, TAG_RECURSIVE};
use crate::scalar::Scalar;

/// Above this many explanations a run is unusual enough to log.
pub const USUAL_EXPLANATION_LIMIT: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Floodlight,
    Recursive,
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "floodlight" => Ok(Mode::Floodlight),
            "recursive" => Ok(Mode::Recursive),
            other => Err(Error::InvalidConfig(format!("unknown mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RexConfig {
    pub iterations: usize,
    pub floodlights: usize,
    pub max_explanations: usize,
    /// Largest admissible pairwise overlap (Sørensen–Dice) between explanations.
    pub delta: f64,
    pub colour: MaskingColour,
    pub strategy: PartitionStrategy,
    /// `None` picks the per-image defaults of [`SearchParams::for_image`].
    pub search: Option<SearchParams>,
    pub seed: u64,
    /// `None` picks [`default_min_side`].
    pub min_side: Option<usize>,
    pub max_depth: usize,
    pub exploration: Exploration,
    pub context: RefinementContext,
    pub mode: Mode,
    /// Worker threads; results do not depend on this value.
    #[serde(skip)]
    pub workers: usize,
}

impl Default for RexConfig {
    fn default() -> Self {
        Self {
            iterations: 20,
            floodlights: 10,
            max_explanations: 10,
            delta: 0.0,
            colour: MaskingColour::default(),
            strategy: PartitionStrategy::default(),
            search: None,
            seed: 0,
            min_side: None,
            max_depth: DEFAULT_MAX_DEPTH,
            exploration: Exploration::default(),
            context: RefinementContext::default(),
            mode: Mode::default(),
            workers: 1,
        }
    }
}

impl RexConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("iterations", self.iterations),
            ("floodlights", self.floodlights),
            ("max_explanations", self.max_explanations),
            ("max_depth", self.max_depth),
        ] {
            if v == 0 {
                return Err(Error::InvalidConfig(format!("{name} must be at least 1")));
            }
        }
        if !(0.0..=1.0).contains(&self.delta) {
            return Err(Error::InvalidConfig(format!("delta must lie in [0, 1], got {}", self.delta)));
        }
        if let Some(s) = &self.search {
            s.validate()?;
        }
        Ok(())
    }

    pub fn search_for(&self, width: usize, height: usize) -> SearchParams {
        self.search.unwrap_or_else(|| SearchParams::for_image(width, height))
    }

    pub fn refine_for(&self, width: usize, height: usize) -> RefineParams {
        RefineParams {
            strategy: self.strategy,
            colour: self.colour,
            min_side: self.min_side.unwrap_or_else(|| default_min_side(width, height)),
            max_depth: self.max_depth,
            exploration: self.exploration,
            context: self.context,
        }
    }

    pub fn rank_for(&self, width: usize, height: usize) -> RankParams {
        RankParams {
            iterations: self.iterations,
            seed: self.seed,
            refine: self.refine_for(width, height),
            workers: self.workers,
        }
    }
}

/// Classifier calls per stage; `total` equals the handle's counter delta.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Budget {
    pub original: u64,
    pub rank: u64,
    pub search: u64,
    pub drain: u64,
    pub recursive: u64,
    pub emission: u64,
    pub total: u64,
    pub per_iteration: Vec<RefineStats>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StageTimings {
    pub rank: Duration,
    pub search: Duration,
    pub drain: Duration,
    pub recursive: Duration,
    pub extract: Duration,
    pub emission: Duration,
}

#[derive(Debug, Clone)]
pub struct RexOutcome<T> {
    pub verdict: Verdict,
    pub explanations: Vec<Explanation>,
    pub landscape: SaliencyLandscape<T>,
    pub budget: Budget,
    pub timings: StageTimings,
    /// Searches that found a sufficient floodlight.
    pub successful_searches: usize,
}

/// Runs `f(0..n)` on `workers` threads and returns the results in index order.
fn fan_out<U: Send>(workers: usize, n: usize, f: impl Fn(usize) -> U + Sync + Send) -> Result<Vec<U>> {
    if workers <= 1 {
        return Ok((0..n).map(f).collect());
    }
    Ok(pool(workers)?.install(|| (0..n).into_par_iter().map(&f).collect()))
}

/// Measures the classifier calls and wall-clock of a stage.
fn stage<U>(classifier: &ClassifierHandle, f: impl FnOnce() -> Result<U>) -> Result<(U, u64, Duration)> {
    let (before, start) = (classifier.call_count(), Instant::now());
    let out = f()?;
    Ok((out, classifier.call_count() - before, start.elapsed()))
}

/// Finds up to `max_explanations` sufficient, pairwise low-overlap pixel sets
/// for the label the classifier gives `image`.
pub fn rex<T: Scalar>(image: &Image, classifier: &ClassifierHandle, config: &RexConfig) -> Result<RexOutcome<T>> {
    config.validate()?;
    let (w, h) = image.dims();
    let start_calls = classifier.call_count();
    let verdict = classifier.classify(image)?;
    let label = verdict.label;
    let mut budget = Budget {
        original: 1,
        ..Budget::default()
    };
    let mut timings = StageTimings::default();

    let (ranked, calls, t) = stage(classifier, || rank::<T>(image, classifier, label, &config.rank_for(w, h)))?;
    budget.rank = calls;
    budget.per_iteration = ranked.iterations.clone();
    timings.rank = t;
    let landscape = ranked.landscape;

    let mut successful_searches = 0;
    let candidates = if ranked.masked_keeps_label {
        vec![degenerate(image, label)]
    } else {
        match config.mode {
            Mode::Floodlight => {
                let search = config.search_for(w, h);
                search.validate()?;
                let (hits, calls, t) = stage(classifier, || {
                    fan_out(config.workers, config.floodlights, |i| {
                        let seed = rng::derive_seed(config.seed, &[TAG_FLOODLIGHT, i as u64]);
                        let mut rng = rng::Stream::seed_from_u64(seed);
                        floodlight_search(image, classifier, label, &landscape, &search, config.colour, &mut rng)
                            .map(|hit| {
                                hit.map(|h| Explanation {
                                    pixels: h.pixels,
                                    label,
                                    confidence: h.verdict.confidence,
                                    source: Provenance::floodlight(i, seed, h.floodlight.radius),
                                })
                            })
                    })?
                    .into_iter()
                    .collect::<Result<Vec<_>>>()
                })?;
                budget.search = calls;
                timings.search = t;
                let found: Vec<Explanation> = hits.into_iter().flatten().collect();
                successful_searches = found.len();

                let (drained, calls, t) = stage(classifier, || {
                    fan_out(config.workers, found.len(), |i| {
                        drain(image, &found[i], label, classifier, &landscape, config.colour)
                    })?
                    .into_iter()
                    .collect::<Result<Vec<_>>>()
                })?;
                budget.drain = calls;
                timings.drain = t;
                drained
            }
            Mode::Recursive => {
                let (found, calls, t) = stage(classifier, || {
                    minimal_subset_candidates(image, classifier, label, config)
                })?;
                budget.recursive = calls;
                timings.recursive = t;
                found
            }
        }
    };

    let t = Instant::now();
    let mut selected = extract(candidates, config.delta);
    selected.truncate(config.max_explanations);
    timings.extract = t.elapsed();

    let (explanations, calls, t) = stage(classifier, || emit(image, classifier, label, config.colour, selected))?;
    budget.emission = calls;
    timings.emission = t;
    budget.total = classifier.call_count() - start_calls;
    if explanations.len() > USUAL_EXPLANATION_LIMIT {
        log::warn!(
            "{} explanations found; more than {USUAL_EXPLANATION_LIMIT} is unusual",
            explanations.len()
        );
    }
    Ok(RexOutcome {
        verdict,
        explanations,
        landscape,
        budget,
        timings,
        successful_searches,
    })
}

fn degenerate(image: &Image, label: Label) -> Explanation {
    let (w, h) = image.dims();
    Explanation {
        pixels: PixelSet::empty(w, h),
        label,
        confidence: 0.0,
        source: Provenance::degenerate(),
    }
}

/// Re-classifies every selection; anything that no longer keeps the label is dropped.
fn emit(
    image: &Image,
    classifier: &ClassifierHandle,
    label: Label,
    colour: MaskingColour,
    selected: Vec<Explanation>,
) -> Result<Vec<Explanation>> {
    let mut out = Vec::with_capacity(selected.len());
    for e in selected {
        match Explanation::certify(image, classifier, label, colour, e.pixels, e.source) {
            Ok(e) => out.push(e),
            Err(Error::Insufficient(_)) => log::warn!("dropping an explanation that failed re-certification"),
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

struct Recursion<'a, R> {
    image: &'a Image,
    classifier: &'a ClassifierHandle,
    label: Label,
    strategy: PartitionStrategy,
    refine: RefineParams,
    rng: R,
    visited: HashSet<PixelSet>,
    found: Vec<Explanation>,
}

impl<R: Rng> Recursion<'_, R> {
    fn emit(&mut self, pixels: PixelSet, confidence: f64, depth: usize) {
        self.found.push(Explanation {
            pixels,
            label: self.label,
            confidence,
            source: Provenance::recursive(depth),
        });
    }

    /// `pixels` is known to keep the label.
    fn visit(&mut self, region: Region, pixels: PixelSet, confidence: f64, depth: usize) -> Result<()> {
        if !self.visited.insert(pixels.clone()) {
            return Ok(());
        }
        if depth >= self.refine.max_depth || region.min_side() < self.refine.min_side as f64 {
            self.emit(pixels, confidence, depth);
            return Ok(());
        }
        let regions = match self.strategy.split(&region, &mut self.rng) {
            Ok(r) => r,
            Err(PartitionError::RegionTooSmall(..) | PartitionError::DegenerateQuad) => {
                self.emit(pixels, confidence, depth);
                return Ok(());
            }
            Err(e) => return Err(e.into()),
        };
        let (w, h) = self.image.dims();
        let parts: Vec<PixelSet> = regions
            .iter()
            .map(|r| rasterize(r, w, h).intersection(&pixels))
            .collect();
        let keep = |m: usize| {
            let mut s = PixelSet::empty(w, h);
            for (i, p) in parts.iter().enumerate() {
                if m >> i & 1 == 1 {
                    s.union_with(p);
                }
            }
            s
        };
        // the empty subset is known insufficient, the full one sufficient
        let images = (1..15)
            .map(|m| apply_mask(self.image, &keep(m), self.refine.colour))
            .collect::<Result<Vec<_>, _>>()?;
        let verdicts = self.classifier.classify_many(&images)?;
        let mut sufficient = [false; 16];
        let mut conf = [confidence; 16];
        for (m, v) in (1..15).zip(&verdicts) {
            sufficient[m] = v.label == self.label;
            conf[m] = v.confidence;
        }
        sufficient[15] = true;
        let minimal = minimal_sufficient_masks(&sufficient, 4);
        for m in minimal {
            let m = m as usize;
            let union = keep(m);
            if union == pixels {
                self.emit(pixels.clone(), confidence, depth);
                continue;
            }
            let child = if m.count_ones() == 1 {
                regions[m.trailing_zeros() as usize]
            } else {
                let (x0, y0, x1, y1) = union.bounding_box().expect("a sufficient proper subset is nonempty");
                self.strategy.bounding_region(Rect::new(x0, y0, x1, y1))
            };
            self.visit(child, union, conf[m], depth + 1)?;
        }
        Ok(())
    }
}

fn minimal_subset_candidates(
    image: &Image,
    classifier: &ClassifierHandle,
    label: Label,
    config: &RexConfig,
) -> Result<Vec<Explanation>> {
    let (w, h) = image.dims();
    let masked = classifier.classify(&apply_mask(image, &PixelSet::empty(w, h), config.colour)?)?;
    if masked.label == label {
        let mut e = degenerate(image, label);
        e.confidence = masked.confidence;
        return Ok(vec![e]);
    }
    let mut rec = Recursion {
        image,
        classifier,
        label,
        strategy: config.strategy,
        refine: config.refine_for(w, h),
        rng: rng::stream(config.seed, &[TAG_RECURSIVE]),
        visited: HashSet::new(),
        found: Vec::new(),
    };
    let confidence = classifier.classify(image)?.confidence;
    rec.visit(config.strategy.root_region(w, h), PixelSet::full(w, h), confidence, 0)?;
    Ok(rec.found)
}

/// Explanations from recursively descending into the minimal label-keeping
/// subsets of each four-way partition, filtered through [`extract`].
pub fn recursive_multiple_explanations(
    image: &Image,
    classifier: &ClassifierHandle,
    label: Label,
    config: &RexConfig,
) -> Result<Vec<Explanation>> {
    config.validate()?;
    Ok(extract(minimal_subset_candidates(image, classifier, label, config)?, config.delta))
}

/// Drops cells one at a time, in order, whenever the rest still keeps the label.
pub fn super_explanation_shrink(
    image: &Image,
    classifier: &ClassifierHandle,
    label: Label,
    partition: &[PixelSet],
    colour: MaskingColour,
) -> Result<PixelSet> {
    let (w, h) = image.dims();
    let mut keep = partition
        .iter()
        .fold(PixelSet::empty(w, h), |acc, c| acc.union(c));
    for cell in partition {
        let candidate = keep.difference(cell);
        if classifier.classify(&apply_mask(image, &candidate, colour)?)?.label == label {
            keep = candidate;
        }
    }
    Ok(keep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::synthetic;

    fn reference(w: usize, h: usize) -> Image {
        Image::from_fn(w, h, |x, y| [(x * 3) as u8, (y * 5) as u8, 77])
    }

    #[test]
    fn config_validation() {
        assert!(RexConfig::default().validate().is_ok());
        let bad = RexConfig {
            delta: 1.5,
            ..RexConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = RexConfig {
            floodlights: 0,
            ..RexConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn shrink_examples() {
        let img = reference(8, 8);
        let cells: Vec<PixelSet> = (0..4)
            .map(|i| PixelSet::rect(8, 8, (i % 2) * 4, (i / 2) * 4, (i % 2) * 4 + 3, (i / 2) * 4 + 3))
            .collect();
        let colour = MaskingColour::default();
        let c = synthetic::constant(3);
        assert!(super_explanation_shrink(&img, &c, 3, &cells, colour).unwrap().is_empty());
        let all = synthetic::PatchThreshold::new(cells.clone(), img.clone(), 4).unwrap();
        let all = ClassifierHandle::new(all);
        assert_eq!(super_explanation_shrink(&img, &all, 1, &cells, colour).unwrap(), PixelSet::full(8, 8));
        let one = synthetic::patch_or(vec![PixelSet::rect(8, 8, 5, 1, 6, 2)], img.clone()).unwrap();
        assert_eq!(super_explanation_shrink(&img, &one, 1, &cells, colour).unwrap(), cells[1]);
    }

    #[test]
    fn budget_matches_counter() {
        let img = reference(32, 32);
        let c = synthetic::patch_or(vec![PixelSet::rect(32, 32, 4, 4, 9, 9)], img.clone()).unwrap();
        for mode in [Mode::Floodlight, Mode::Recursive] {
            let before = c.call_count();
            let out = rex::<f64>(&img, &c, &RexConfig { mode, seed: 3, ..RexConfig::default() }).unwrap();
            let b = &out.budget;
            assert_eq!(b.total, c.call_count() - before);
            assert_eq!(b.total, b.original + b.rank + b.search + b.drain + b.recursive + b.emission);
            assert!(!out.explanations.is_empty());
        }
    }

    #[test]
    fn constant_classifier_gives_the_empty_explanation() {
        let img = reference(16, 16);
        let c = synthetic::constant(2);
        for mode in [Mode::Floodlight, Mode::Recursive] {
            let out = rex::<f64>(&img, &c, &RexConfig { mode, ..RexConfig::default() }).unwrap();
            assert_eq!(out.explanations.len(), 1);
            assert!(out.explanations[0].pixels.is_empty());
            assert_eq!(out.explanations[0].source, Provenance::degenerate());
        }
    }
}
