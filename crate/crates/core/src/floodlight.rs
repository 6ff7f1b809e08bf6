//! Floodlight search: a circular window that climbs the saliency landscape
//! until the pixels it lights are enough to reproduce the label.

use std::f64::consts::TAU;

use rand::distributions::WeightedIndex;
use rand::prelude::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::classifier::{ClassifierHandle, Label, Verdict};
use crate::error::{Error, Result};
use crate::imaging::{apply_mask, Image, MaskingColour, PixelSet};
use crate::partition::Point;
use crate::responsibility::SaliencyLandscape;
use crate::scalar::Scalar;

/// Weight floor so zero-saliency pixels can still seed a search.
pub const INIT_EPSILON: f64 = 1e-6;
/// Probability of accepting a neighbour with a lower objective.
pub const DOWNHILL_ACCEPTANCE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Floodlight {
    pub center: Point,
    pub radius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchParams {
    /// Neighbour steps `n`.
    pub steps: usize,
    /// Radius expansions per step `p`.
    pub expansions: usize,
    /// Radius multiplier per expansion `q` (> 1).
    pub expansion_coeff: f64,
    /// Initial radius `r`, in pixels.
    pub radius: f64,
}

impl SearchParams {
    /// `r = min(width, height) / 8`, `p = 4`, `q = 1.4`, `n = 40`.
    pub fn for_image(width: usize, height: usize) -> Self {
        Self {
            steps: 40,
            expansions: 4,
            expansion_coeff: 1.4,
            radius: width.min(height) as f64 / 8.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 || self.expansions == 0 {
            return Err(Error::InvalidConfig("steps and expansions must be at least 1".into()));
        }
        if self.expansion_coeff.is_nan() || self.expansion_coeff <= 1.0 {
            return Err(Error::InvalidConfig(format!(
                "expansion coefficient must exceed 1, got {}",
                self.expansion_coeff
            )));
        }
        if self.radius.is_nan() || self.radius <= 0.0 {
            return Err(Error::InvalidConfig(format!("radius must be positive, got {}", self.radius)));
        }
        Ok(())
    }
}

/// Pixels whose centres lie within `radius` of the floodlight centre.
pub fn floodlight_mask(f: &Floodlight, width: usize, height: usize) -> PixelSet {
    let r2 = f.radius * f.radius;
    let lo = |c: f64| (c - f.radius - 1.0).floor().max(0.0) as usize;
    let hi = |c: f64, n: usize| ((c + f.radius + 1.0).ceil().max(0.0) as usize).min(n);
    let mut set = PixelSet::empty(width, height);
    for y in lo(f.center.y).min(height)..hi(f.center.y, height) {
        for x in lo(f.center.x).min(width)..hi(f.center.x, width) {
            let dx = x as f64 + 0.5 - f.center.x;
            let dy = y as f64 + 0.5 - f.center.y;
            if dx * dx + dy * dy <= r2 {
                set.insert(x, y);
            }
        }
    }
    set
}

/// Mean landscape value over `mask`.
pub fn objective<T: Scalar>(landscape: &SaliencyLandscape<T>, mask: &PixelSet) -> Result<T> {
    let n = mask.len();
    if n == 0 {
        return Err(Error::EmptyMask);
    }
    let sum = mask
        .indices()
        .fold(T::zero(), |acc, i| acc + landscape.at_index(i));
    Ok(sum / T::from_count(n))
}

/// A successful search.
#[derive(Debug, Clone)]
pub struct SearchHit {
    pub pixels: PixelSet,
    pub verdict: Verdict,
    /// The floodlight at the moment of success.
    pub floodlight: Floodlight,
    pub steps_taken: usize,
}

fn initial_center<T: Scalar, R: Rng>(landscape: &SaliencyLandscape<T>, rng: &mut R) -> Point {
    let weights = landscape.values().iter().map(|v| v.to_f64().max(0.0) + INIT_EPSILON);
    let dist = WeightedIndex::new(weights).expect("positive weights");
    let i = dist.sample(rng);
    let w = landscape.width();
    Point::new((i % w) as f64 + 0.5, (i / w) as f64 + 0.5)
}

/// Uniform (by area) on the annulus `[r/2, 3r/2]` around `center`, clipped to the image.
fn neighbour<R: Rng>(center: Point, r: f64, width: usize, height: usize, rng: &mut R) -> Point {
    let (inner, outer) = (0.5 * r, 1.5 * r);
    let d = (rng.gen::<f64>() * (outer * outer - inner * inner) + inner * inner).sqrt();
    let theta = rng.gen::<f64>() * TAU;
    Point::new(
        (center.x + d * theta.cos()).clamp(0.0, width as f64),
        (center.y + d * theta.sin()).clamp(0.0, height as f64),
    )
}

/// Stochastic hill climb for a sufficient floodlight.
///
/// Each step tests the floodlight at radii `r, r·q, …, r·q^(p-1)`; the first
/// lit region that keeps `label` is returned. Otherwise the radius resets and
/// the centre moves to a neighbour, accepted when its objective does not drop
/// (or with probability [`DOWNHILL_ACCEPTANCE`]). Costs at most `n·p`
/// classifications; `None` when every step fails.
#[allow(clippy::too_many_arguments)]
pub fn floodlight_search<T: Scalar, R: Rng>(
    image: &Image,
    classifier: &ClassifierHandle,
    label: Label,
    landscape: &SaliencyLandscape<T>,
    params: &SearchParams,
    colour: MaskingColour,
    rng: &mut R,
) -> Result<Option<SearchHit>> {
    params.validate()?;
    let (w, h) = image.dims();
    let r = params.radius;
    let mut center = initial_center(landscape, rng);
    let mut current = objective(landscape, &floodlight_mask(&Floodlight { center, radius: r }, w, h)).ok();

    for step in 0..params.steps {
        let mut radius = r;
        for _ in 0..params.expansions {
            let f = Floodlight { center, radius };
            let mask = floodlight_mask(&f, w, h);
            let verdict = classifier.classify(&apply_mask(image, &mask, colour)?)?;
            if verdict.label == label {
                return Ok(Some(SearchHit {
                    pixels: mask,
                    verdict,
                    floodlight: f,
                    steps_taken: step,
                }));
            }
            radius *= params.expansion_coeff;
        }
        let proposal = neighbour(center, r, w, h, rng);
        let Ok(score) = objective(landscape, &floodlight_mask(&Floodlight { center: proposal, radius: r }, w, h))
        else {
            // a floodlight between pixel centres lights nothing; stay put
            continue;
        };
        let uphill = current.is_none_or(|c| score >= c);
        if uphill || rng.gen::<f64>() < DOWNHILL_ACCEPTANCE {
            center = proposal;
            current = Some(score);
        }
    }
    Ok(None)
}
