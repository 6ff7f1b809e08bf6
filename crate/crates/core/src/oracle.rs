//! Brute-force ground truth over small cell grids.
//!
//! Every subset of cells is classified once (`2^n` calls, memoized per masking
//! colour), after which minimal sufficient subsets and exact responsibilities
//! are read off the table.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use rayon::prelude::*;

use crate::classifier::{ClassifierHandle, Label};
use crate::error::{Error, Result};
use crate::imaging::{apply_mask, Image, MaskingColour, PixelSet};
use crate::scalar::Scalar;

pub const MAX_CELLS: usize = 20;

/// Cells are addressed by bitmask: bit `i` stands for cell `i`.
pub type CellMask = u32;

/// A tiling of an image into at most [`MAX_CELLS`] cells, with the classifier
/// and label under study.
pub struct CellGrid {
    cells: Vec<PixelSet>,
    image: Image,
    classifier: ClassifierHandle,
    label: Label,
    /// keeps[m]: the image with only the cells of `m` unmasked has `label`
    memo: Mutex<HashMap<MaskingColour, Arc<Vec<bool>>>>,
}

/// `cols × rows` rectangular cells, split as evenly as possible, row-major.
pub fn uniform_cells(width: usize, height: usize, cols: usize, rows: usize) -> Vec<PixelSet> {
    assert!(cols >= 1 && rows >= 1 && cols <= width && rows <= height);
    let edge = |i: usize, n: usize, len: usize| i * len / n;
    (0..rows)
        .flat_map(|r| (0..cols).map(move |c| (c, r)))
        .map(|(c, r)| {
            PixelSet::rect(
                width,
                height,
                edge(c, cols, width),
                edge(r, rows, height),
                edge(c + 1, cols, width) - 1,
                edge(r + 1, rows, height) - 1,
            )
        })
        .collect()
}

impl CellGrid {
    pub fn new(cells: Vec<PixelSet>, image: Image, classifier: ClassifierHandle, label: Label) -> Result<Self> {
        let n = cells.len();
        if n == 0 || n > MAX_CELLS {
            return Err(Error::InvalidGrid(format!("{n} cells; expected 1..={MAX_CELLS}")));
        }
        let (w, h) = image.dims();
        let mut union = PixelSet::empty(w, h);
        for (i, c) in cells.iter().enumerate() {
            if c.dims() != (w, h) {
                return Err(Error::InvalidGrid(format!("cell {i} has dimensions {:?}", c.dims())));
            }
            if !union.is_disjoint(c) {
                return Err(Error::InvalidGrid(format!("cell {i} overlaps an earlier cell")));
            }
            union.union_with(c);
        }
        if union.len() != w * h {
            return Err(Error::InvalidGrid("cells do not cover the image".into()));
        }
        Ok(Self {
            cells,
            image,
            classifier,
            label,
            memo: Mutex::new(HashMap::new()),
        })
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn cells(&self) -> &[PixelSet] {
        &self.cells
    }

    pub fn label(&self) -> Label {
        self.label
    }

    pub fn full_mask(&self) -> CellMask {
        ((1u64 << self.len()) - 1) as CellMask
    }

    /// Union of the cells in `mask`.
    pub fn pixels(&self, mask: CellMask) -> PixelSet {
        let (w, h) = self.image.dims();
        let mut s = PixelSet::empty(w, h);
        for (i, c) in self.cells.iter().enumerate() {
            if mask >> i & 1 == 1 {
                s.union_with(c);
            }
        }
        s
    }

    /// Sufficiency of every kept-cell subset, classified once per colour.
    pub fn sufficiency_table(&self, colour: MaskingColour) -> Result<Arc<Vec<bool>>> {
        if let Some(t) = self.memo.lock().expect("memo lock").get(&colour) {
            return Ok(t.clone());
        }
        let table: Vec<bool> = (0..=self.full_mask())
            .into_par_iter()
            .map(|m| {
                let masked = apply_mask(&self.image, &self.pixels(m), colour)?;
                Ok(self.classifier.classify(&masked)?.label == self.label)
            })
            .collect::<Result<_>>()?;
        let table = Arc::new(table);
        self.memo
            .lock()
            .expect("memo lock")
            .entry(colour)
            .or_insert_with(|| table.clone());
        Ok(table)
    }
}

/// Sufficient masks with no sufficient proper submask, ordered by size then value.
pub fn minimal_sufficient_masks(sufficient: &[bool], n: usize) -> Vec<CellMask> {
    let full = 1usize << n;
    debug_assert_eq!(sufficient.len(), full);
    // below[m]: some proper submask of m is sufficient
    let mut below = vec![false; full];
    for m in 1..full {
        below[m] = (0..n)
            .filter(|j| m >> j & 1 == 1)
            .any(|j| sufficient[m & !(1 << j)] || below[m & !(1 << j)]);
    }
    let mut out: Vec<CellMask> = (0..full)
        .filter(|&m| sufficient[m] && !below[m])
        .map(|m| m as CellMask)
        .collect();
    out.sort_by_key(|&m| (m.count_ones(), m));
    out
}

/// Every minimal sufficient subset of cells. The result is an antichain.
pub fn enumerate_exact_explanations(grid: &CellGrid, colour: MaskingColour) -> Result<Vec<CellMask>> {
    let table = grid.sufficiency_table(colour)?;
    if !table[grid.full_mask() as usize] {
        return Err(Error::Insufficient(grid.label()));
    }
    Ok(minimal_sufficient_masks(&table, grid.len()))
}

/// Iterates over all submasks of `m`, `m` itself included.
fn submasks(m: CellMask) -> impl Iterator<Item = CellMask> {
    let mut next = Some(m);
    std::iter::from_fn(move || {
        let s = next?;
        next = if s == 0 { None } else { Some((s - 1) & m) };
        Some(s)
    })
}

/// Responsibility of cell `i` by exhaustive witness search.
///
/// A witness is a set of other cells such that masking any part of it keeps
/// the label while masking it together with cell `i` does not. Checking every
/// part of every witness makes this `O(3^n)`.
pub fn exact_responsibility<T: Scalar>(grid: &CellGrid, i: usize, colour: MaskingColour) -> Result<T> {
    let n = grid.len();
    if i >= n {
        return Err(Error::InvalidGrid(format!("cell {i} out of range for {n} cells")));
    }
    let table = grid.sufficiency_table(colour)?;
    let full = grid.full_mask();
    let preserves = |masked: CellMask| table[(full & !masked) as usize];
    let me: CellMask = 1 << i;
    let others = full & !me;
    let best = submasks(others)
        .filter(|&w| !preserves(w | me))
        .filter(|&w| submasks(w).all(preserves))
        .map(|w| w.count_ones() as usize)
        .min();
    Ok(best.map_or_else(T::zero, T::responsibility))
}

/// Largest possible number of minimal sufficient subsets of `n` cells, `C(n, ⌊n/2⌋)`.
pub fn sperner_bound(n: usize) -> u64 {
    let k = n / 2;
    (0..k).fold(1u64, |acc, j| acc * (n - j) as u64 / (j + 1) as u64)
}
