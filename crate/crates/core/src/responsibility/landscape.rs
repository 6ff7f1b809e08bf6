use std::fmt::Write as _;

use crate::imaging::{Image, PixelSet};
use crate::scalar::Scalar;

/// Per-pixel responsibility averaged over ranking iterations.
///
/// Values stay in `[0, 1]`: each iteration contributes a product of
/// responsibilities and the landscape is their arithmetic mean.
#[derive(Debug, Clone, PartialEq)]
pub struct SaliencyLandscape<T> {
    width: usize,
    height: usize,
    values: Vec<T>,
    iterations: usize,
}

impl<T: Scalar> SaliencyLandscape<T> {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            values: vec![T::zero(); width * height],
            iterations: 0,
        }
    }

    /// Builds a landscape from row-major values. Panics on a length mismatch.
    pub fn from_values(width: usize, height: usize, values: Vec<T>, iterations: usize) -> Self {
        assert_eq!(values.len(), width * height, "landscape size mismatch");
        Self {
            width,
            height,
            values,
            iterations,
        }
    }

    /// Arithmetic mean of per-iteration maps, summed in the order given.
    pub fn mean_of(width: usize, height: usize, maps: &[Vec<T>]) -> Self {
        let mut sum = vec![T::zero(); width * height];
        for map in maps {
            for (acc, &v) in sum.iter_mut().zip(map) {
                *acc = *acc + v;
            }
        }
        let n = T::from_count(maps.len().max(1));
        Self {
            width,
            height,
            values: sum.into_iter().map(|v| v / n).collect(),
            iterations: maps.len(),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    #[inline]
    pub fn at_index(&self, i: usize) -> T {
        self.values[i]
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> T {
        self.values[y * self.width + x]
    }

    pub fn max(&self) -> T {
        self.values
            .iter()
            .copied()
            .fold(T::zero(), |m, v| if v > m { v } else { m })
    }

    /// Index of a maximal pixel; ties go to the one nearest the centroid of all
    /// maximal pixels, then to the lowest index.
    pub fn argmax(&self) -> usize {
        let top = self.max();
        let w = self.width;
        let tied: Vec<usize> = (0..self.values.len()).filter(|&i| self.values[i] == top).collect();
        let n = tied.len() as f64;
        let cx = tied.iter().map(|&i| (i % w) as f64).sum::<f64>() / n;
        let cy = tied.iter().map(|&i| (i / w) as f64).sum::<f64>() / n;
        let dist = |i: usize| ((i % w) as f64 - cx).powi(2) + ((i / w) as f64 - cy).powi(2);
        tied.into_iter()
            .min_by(|&a, &b| dist(a).total_cmp(&dist(b)).then(a.cmp(&b)))
            .unwrap_or(0)
    }

    /// Pixels of `within` whose value is at least `level`.
    pub fn at_or_above(&self, within: &PixelSet, level: T) -> PixelSet {
        PixelSet::from_indices(
            self.width,
            self.height,
            within.indices().filter(|&i| self.values[i] >= level),
        )
    }

    /// `height` lines of `width` comma-separated decimals.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for row in self.values.chunks(self.width) {
            for (i, v) in row.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write!(out, "{}", v.to_f64()).expect("writing to a string");
            }
            out.push('\n');
        }
        out
    }

    /// Grayscale rendering scaled by `255 / max`; an all-zero landscape is black.
    pub fn to_heatmap(&self) -> Image {
        let max = self.max().to_f64();
        Image::from_fn(self.width, self.height, |x, y| {
            let g = if max > 0.0 {
                (self.at(x, y).to_f64() / max * 255.0).round().clamp(0.0, 255.0) as u8
            } else {
                0
            };
            [g, g, g]
        })
    }
}
