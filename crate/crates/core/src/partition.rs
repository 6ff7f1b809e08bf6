//! Randomized four-way partitioning of image regions.
//!
//! Two strategies: axis-aligned grid splits whose split points follow a
//! betabinomial law, and diagonal splits of convex quadrilaterals. Quads are
//! rasterized by pixel centre with a top-left fill rule, so the rasterized
//! children of a region are disjoint and cover the parent's pixels exactly.

use rand::Rng;
use rand_distr::{Beta, Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::imaging::PixelSet;

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum PartitionError {
    #[error("region {0}x{1} is too small to split into four")]
    RegionTooSmall(usize, usize),
    #[error("quadrilateral is degenerate or not convex/counter-clockwise")]
    DegenerateQuad,
    #[error("betabinomial parameters must be positive (alpha={0}, beta={1})")]
    InvalidShape(f64, f64),
    #[error("{0:?} strategy cannot split this region kind")]
    StrategyMismatch(PartitionKind),
}

/// Inclusive pixel bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rect {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl Rect {
    pub fn new(x0: usize, y0: usize, x1: usize, y1: usize) -> Self {
        assert!(x0 <= x1 && y0 <= y1, "empty rect ({x0},{y0})-({x1},{y1})");
        Self { x0, y0, x1, y1 }
    }

    pub fn full(width: usize, height: usize) -> Self {
        Self::new(0, 0, width - 1, height - 1)
    }

    pub fn width(&self) -> usize {
        self.x1 - self.x0 + 1
    }

    pub fn height(&self) -> usize {
        self.y1 - self.y0 + 1
    }

    pub fn area(&self) -> usize {
        self.width() * self.height()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    fn lerp(self, other: Point, t: f64) -> Point {
        Point::new(self.x + t * (other.x - self.x), self.y + t * (other.y - self.y))
    }
}

impl From<Point> for robust::Coord<f64> {
    fn from(p: Point) -> Self {
        robust::Coord { x: p.x, y: p.y }
    }
}

/// Exact sign of the orientation of `(a, b, c)`: positive when counter-clockwise.
#[inline]
fn orient(a: Point, b: Point, c: Point) -> f64 {
    robust::orient2d(a.into(), b.into(), c.into())
}

/// Convex quadrilateral with vertices in counter-clockwise order (positive
/// shoelace area in `(x, y)` coordinates).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quad {
    pub vertices: [Point; 4],
}

/// Quads below this area (in pixel²) are not split further.
pub const MIN_QUAD_AREA: f64 = 1e-6;

impl Quad {
    pub fn new(vertices: [Point; 4]) -> Self {
        Self { vertices }
    }

    /// The quad spanning a whole `width × height` image.
    pub fn full(width: usize, height: usize) -> Self {
        let (w, h) = (width as f64, height as f64);
        Self::new([
            Point::new(0.0, 0.0),
            Point::new(w, 0.0),
            Point::new(w, h),
            Point::new(0.0, h),
        ])
    }

    /// Signed shoelace area; positive for counter-clockwise vertex order.
    pub fn signed_area(&self) -> f64 {
        let v = &self.vertices;
        (0..4)
            .map(|i| {
                let (a, b) = (v[i], v[(i + 1) % 4]);
                a.x * b.y - b.x * a.y
            })
            .sum::<f64>()
            / 2.0
    }

    /// Strictly convex with counter-clockwise winding.
    pub fn is_convex_ccw(&self) -> bool {
        let v = &self.vertices;
        (0..4).all(|i| orient(v[i], v[(i + 1) % 4], v[(i + 2) % 4]) > 0.0)
    }

    pub fn bounds(&self) -> (f64, f64, f64, f64) {
        self.vertices.iter().fold(
            (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
            |(x0, y0, x1, y1), p| (x0.min(p.x), y0.min(p.y), x1.max(p.x), y1.max(p.y)),
        )
    }

    /// Point-in-quad test with the top-left fill rule for boundary points.
    ///
    /// Equivalent to testing the point nudged by an infinitesimal `(ε, ε²)`, so
    /// every point of the plane belongs to exactly one quad of an exact tiling.
    pub fn contains(&self, p: Point) -> bool {
        let v = &self.vertices;
        (0..4).all(|i| {
            let (a, b) = (v[i], v[(i + 1) % 4]);
            let o = orient(a, b, p);
            if o != 0.0 {
                return o > 0.0;
            }
            b.y < a.y || (b.y == a.y && b.x > a.x)
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Region {
    Rect(Rect),
    Quad(Quad),
}

impl Region {
    /// Shorter side of the region's extent, in pixels.
    pub fn min_side(&self) -> f64 {
        match self {
            Region::Rect(r) => r.width().min(r.height()) as f64,
            Region::Quad(q) => {
                let (x0, y0, x1, y1) = q.bounds();
                (x1 - x0).min(y1 - y0)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PartitionKind {
    Grid,
    Diagonal,
}

impl std::str::FromStr for PartitionKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "grid" => Ok(Self::Grid),
            "diagonal" => Ok(Self::Diagonal),
            other => Err(format!("unknown partition strategy {other:?} (grid|diagonal)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartitionStrategy {
    pub kind: PartitionKind,
    pub alpha: f64,
    pub beta: f64,
}

impl Default for PartitionStrategy {
    fn default() -> Self {
        Self {
            kind: PartitionKind::Grid,
            alpha: 1.1,
            beta: 1.1,
        }
    }
}

impl PartitionStrategy {
    pub fn diagonal() -> Self {
        Self {
            kind: PartitionKind::Diagonal,
            ..Self::default()
        }
    }

    /// The region covering a whole image under this strategy.
    pub fn root_region(&self, width: usize, height: usize) -> Region {
        match self.kind {
            PartitionKind::Grid => Region::Rect(Rect::full(width, height)),
            PartitionKind::Diagonal => Region::Quad(Quad::full(width, height)),
        }
    }

    /// The region of this strategy's shape spanning the inclusive pixel box.
    pub fn bounding_region(&self, rect: Rect) -> Region {
        match self.kind {
            PartitionKind::Grid => Region::Rect(rect),
            PartitionKind::Diagonal => {
                let (x0, y0) = (rect.x0 as f64, rect.y0 as f64);
                let (x1, y1) = ((rect.x1 + 1) as f64, (rect.y1 + 1) as f64);
                Region::Quad(Quad::new([
                    Point::new(x0, y0),
                    Point::new(x1, y0),
                    Point::new(x1, y1),
                    Point::new(x0, y1),
                ]))
            }
        }
    }

    pub fn split<R: Rng + ?Sized>(&self, region: &Region, rng: &mut R) -> Result<[Region; 4], PartitionError> {
        match (self.kind, region) {
            (PartitionKind::Grid, Region::Rect(r)) => {
                Ok(sample_grid_partition(r, rng, self.alpha, self.beta)?.map(Region::Rect))
            }
            (PartitionKind::Diagonal, Region::Quad(q)) => Ok(diagonal_partition(q, rng)?.map(Region::Quad)),
            (kind, _) => Err(PartitionError::StrategyMismatch(kind)),
        }
    }
}

/// Draws from BetaBinomial(`n`, `alpha`, `beta`) as a Beta-mixed binomial.
pub fn sample_beta_binomial<R: Rng + ?Sized>(
    n: u64,
    alpha: f64,
    beta: f64,
    rng: &mut R,
) -> Result<u64, PartitionError> {
    // NaN-safe: reject anything that is not strictly positive
    if !(alpha > 0.0 && beta > 0.0) {
        return Err(PartitionError::InvalidShape(alpha, beta));
    }
    if n == 0 {
        return Ok(0);
    }
    let p = Beta::new(alpha, beta)
        .map_err(|_| PartitionError::InvalidShape(alpha, beta))?
        .sample(rng);
    Ok(Binomial::new(n, p.clamp(0.0, 1.0)).expect("p in [0, 1]").sample(rng))
}

/// Splits a rectangle at one interior column and one interior row.
///
/// The split offsets lie in `1..len` so no child is empty. Children are
/// returned as top-left, top-right, bottom-left, bottom-right.
pub fn sample_grid_partition<R: Rng + ?Sized>(
    region: &Rect,
    rng: &mut R,
    alpha: f64,
    beta: f64,
) -> Result<[Rect; 4], PartitionError> {
    let (w, h) = (region.width(), region.height());
    if w < 2 || h < 2 {
        return Err(PartitionError::RegionTooSmall(w, h));
    }
    let c = 1 + sample_beta_binomial(w as u64 - 2, alpha, beta, rng)? as usize;
    let r = 1 + sample_beta_binomial(h as u64 - 2, alpha, beta, rng)? as usize;
    let (xm, ym) = (region.x0 + c, region.y0 + r);
    Ok([
        Rect::new(region.x0, region.y0, xm - 1, ym - 1),
        Rect::new(xm, region.y0, region.x1, ym - 1),
        Rect::new(region.x0, ym, xm - 1, region.y1),
        Rect::new(xm, ym, region.x1, region.y1),
    ])
}

fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let t: f64 = rng.gen();
        if t > 0.0 {
            return t;
        }
    }
}

fn segment_intersection(a: Point, b: Point, c: Point, d: Point) -> Option<Point> {
    let (rx, ry) = (b.x - a.x, b.y - a.y);
    let (sx, sy) = (d.x - c.x, d.y - c.y);
    let denom = rx * sy - ry * sx;
    if denom == 0.0 {
        return None;
    }
    let t = ((c.x - a.x) * sy - (c.y - a.y) * sx) / denom;
    Some(a.lerp(b, t))
}

/// Splits a convex quad into four convex quads.
///
/// One point is drawn uniformly inside each edge; the centre is where the
/// segments joining opposite edge points cross. Child `i` consists of parent
/// vertex `i`, its two adjacent edge points and the centre.
pub fn diagonal_partition<R: Rng + ?Sized>(quad: &Quad, rng: &mut R) -> Result<[Quad; 4], PartitionError> {
    if quad.signed_area() < MIN_QUAD_AREA || !quad.is_convex_ccw() {
        return Err(PartitionError::DegenerateQuad);
    }
    let v = quad.vertices;
    let mid: [Point; 4] = std::array::from_fn(|i| v[i].lerp(v[(i + 1) % 4], open_unit(rng)));
    let center = segment_intersection(mid[0], mid[2], mid[3], mid[1]).ok_or(PartitionError::DegenerateQuad)?;
    let children = [
        Quad::new([v[0], mid[0], center, mid[3]]),
        Quad::new([mid[0], v[1], mid[1], center]),
        Quad::new([center, mid[1], v[2], mid[2]]),
        Quad::new([mid[3], center, mid[2], v[3]]),
    ];
    // rounding in the centre can flatten a sliver child
    if children.iter().any(|c| !c.is_convex_ccw()) {
        return Err(PartitionError::DegenerateQuad);
    }
    Ok(children)
}

/// Pixels of a region on a `width × height` raster.
///
/// Rects contribute their pixels; quads contribute the pixels whose centres
/// `(col + 0.5, row + 0.5)` they contain under the top-left rule.
pub fn rasterize(region: &Region, width: usize, height: usize) -> PixelSet {
    match region {
        Region::Rect(r) => PixelSet::rect(width, height, r.x0, r.y0, r.x1, r.y1),
        Region::Quad(q) => {
            let mut set = PixelSet::empty(width, height);
            let (bx0, by0, bx1, by1) = q.bounds();
            let clamp = |v: f64, hi: usize| (v.max(0.0) as usize).min(hi);
            let (x0, x1) = (clamp(bx0.floor() - 1.0, width), clamp(bx1.ceil() + 1.0, width));
            let (y0, y1) = (clamp(by0.floor() - 1.0, height), clamp(by1.ceil() + 1.0, height));
            for y in y0..y1 {
                for x in x0..x1 {
                    if q.contains(Point::new(x as f64 + 0.5, y as f64 + 0.5)) {
                        set.insert(x, y);
                    }
                }
            }
            set
        }
    }
}
