use std::fmt;

/// A subset of pixel coordinates aligned to a `width × height` raster.
///
/// Coordinates are `(column, row)` with the origin at the top-left; the
/// linear index of `(x, y)` is `y * width + x`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct PixelSet {
    width: usize,
    height: usize,
    words: Vec<u64>,
}

impl PixelSet {
    pub fn empty(width: usize, height: usize) -> Self {
        let n = width * height;
        Self {
            width,
            height,
            words: vec![0; n.div_ceil(64)],
        }
    }

    pub fn full(width: usize, height: usize) -> Self {
        let mut set = Self::empty(width, height);
        set.words.iter_mut().for_each(|w| *w = !0);
        set.clear_tail();
        set
    }

    /// Builds a set from a membership predicate over `(x, y)`.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut set = Self::empty(width, height);
        for y in 0..height {
            for x in 0..width {
                if f(x, y) {
                    set.insert_index(y * width + x);
                }
            }
        }
        set
    }

    /// All pixels of the inclusive rectangle `[x0, x1] × [y0, y1]`, clipped to bounds.
    pub fn rect(width: usize, height: usize, x0: usize, y0: usize, x1: usize, y1: usize) -> Self {
        Self::from_fn(width, height, |x, y| x >= x0 && x <= x1 && y >= y0 && y <= y1)
    }

    pub fn from_indices(width: usize, height: usize, indices: impl IntoIterator<Item = usize>) -> Self {
        let mut set = Self::empty(width, height);
        for i in indices {
            set.insert_index(i);
        }
        set
    }

    fn clear_tail(&mut self) {
        let n = self.width * self.height;
        let rem = n % 64;
        if rem != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << rem) - 1;
            }
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    /// Total number of coordinates the set is indexed over.
    #[inline]
    pub fn capacity(&self) -> usize {
        self.width * self.height
    }

    #[inline]
    pub fn contains_index(&self, i: usize) -> bool {
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    #[inline]
    pub fn contains(&self, x: usize, y: usize) -> bool {
        x < self.width && y < self.height && self.contains_index(y * self.width + x)
    }

    #[inline]
    pub fn insert_index(&mut self, i: usize) {
        assert!(i < self.capacity(), "pixel index {i} out of bounds");
        self.words[i / 64] |= 1 << (i % 64);
    }

    #[inline]
    pub fn insert(&mut self, x: usize, y: usize) {
        assert!(x < self.width && y < self.height, "pixel ({x}, {y}) out of bounds");
        self.insert_index(y * self.width + x);
    }

    #[inline]
    pub fn remove_index(&mut self, i: usize) {
        self.words[i / 64] &= !(1 << (i % 64));
    }

    /// Cardinality.
    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn same_dims(&self, other: &PixelSet) -> bool {
        self.dims() == other.dims()
    }

    fn zip_with(&self, other: &PixelSet, f: impl Fn(u64, u64) -> u64) -> PixelSet {
        assert!(self.same_dims(other), "pixel set dimensions differ");
        let words = self
            .words
            .iter()
            .zip(&other.words)
            .map(|(&a, &b)| f(a, b))
            .collect();
        PixelSet {
            width: self.width,
            height: self.height,
            words,
        }
    }

    pub fn union(&self, other: &PixelSet) -> PixelSet {
        self.zip_with(other, |a, b| a | b)
    }

    pub fn intersection(&self, other: &PixelSet) -> PixelSet {
        self.zip_with(other, |a, b| a & b)
    }

    pub fn difference(&self, other: &PixelSet) -> PixelSet {
        self.zip_with(other, |a, b| a & !b)
    }

    pub fn complement(&self) -> PixelSet {
        let mut out = PixelSet {
            width: self.width,
            height: self.height,
            words: self.words.iter().map(|w| !w).collect(),
        };
        out.clear_tail();
        out
    }

    pub fn union_with(&mut self, other: &PixelSet) {
        assert!(self.same_dims(other), "pixel set dimensions differ");
        self.words.iter_mut().zip(&other.words).for_each(|(a, b)| *a |= b);
    }

    pub fn intersection_len(&self, other: &PixelSet) -> usize {
        assert!(self.same_dims(other), "pixel set dimensions differ");
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones() as usize)
            .sum()
    }

    pub fn is_disjoint(&self, other: &PixelSet) -> bool {
        self.intersection_len(other) == 0
    }

    pub fn is_subset(&self, other: &PixelSet) -> bool {
        assert!(self.same_dims(other), "pixel set dimensions differ");
        self.words.iter().zip(&other.words).all(|(a, b)| a & !b == 0)
    }

    /// Linear indices of members in ascending order.
    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut bits = w;
            std::iter::from_fn(move || {
                if bits == 0 {
                    return None;
                }
                let tz = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                Some(wi * 64 + tz)
            })
        })
    }

    /// Member coordinates `(x, y)` in row-major order.
    pub fn coords(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let w = self.width;
        self.indices().map(move |i| (i % w, i / w))
    }

    /// Inclusive bounding box `(x0, y0, x1, y1)`, or `None` when empty.
    pub fn bounding_box(&self) -> Option<(usize, usize, usize, usize)> {
        let mut bb: Option<(usize, usize, usize, usize)> = None;
        for (x, y) in self.coords() {
            bb = Some(match bb {
                None => (x, y, x, y),
                Some((x0, y0, x1, y1)) => (x0.min(x), y0.min(y), x1.max(x), y1.max(y)),
            });
        }
        bb
    }
}

impl fmt::Debug for PixelSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PixelSet({}x{}, {} px", self.width, self.height, self.len())?;
        if self.capacity() <= 64 {
            write!(f, ", {:?}", self.indices().collect::<Vec<_>>())?;
        }
        write!(f, ")")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn full_and_empty_cardinality() {
        assert_eq!(PixelSet::full(7, 13).len(), 91);
        assert_eq!(PixelSet::empty(7, 13).len(), 0);
        assert_eq!(PixelSet::full(8, 8).complement().len(), 0);
        assert_eq!(PixelSet::empty(5, 5).complement().len(), 25);
    }

    #[test]
    fn rect_and_bbox() {
        let s = PixelSet::rect(4, 4, 0, 0, 1, 1);
        assert_eq!(s.len(), 4);
        assert_eq!(s.bounding_box(), Some((0, 0, 1, 1)));
        assert_eq!(PixelSet::empty(3, 3).bounding_box(), None);
    }

    proptest! {
        #[test]
        fn set_algebra(w in 1usize..20, h in 1usize..20, a in any::<u64>(), b in any::<u64>()) {
            let sa = PixelSet::from_fn(w, h, |x, y| (a >> ((x * 7 + y * 3) % 64)) & 1 == 1);
            let sb = PixelSet::from_fn(w, h, |x, y| (b >> ((x * 5 + y * 11) % 64)) & 1 == 1);
            let inter = sa.intersection(&sb);
            prop_assert_eq!(sa.union(&sb).len() + inter.len(), sa.len() + sb.len());
            prop_assert_eq!(inter.len(), sa.intersection_len(&sb));
            prop_assert!(inter.is_subset(&sa));
            prop_assert_eq!(sa.difference(&sb).union(&inter), sa.clone());
            prop_assert_eq!(sa.complement().len(), w * h - sa.len());
            let rebuilt = PixelSet::from_indices(w, h, sa.indices());
            prop_assert_eq!(rebuilt, sa);
        }
    }
}
