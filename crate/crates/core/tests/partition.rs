use explain_core::imaging::PixelSet;
use explain_core::partition::{
    diagonal_partition, rasterize, sample_grid_partition, PartitionStrategy, Point, Quad, Rect, Region,
};
use explain_core::rng::stream;
use rand::Rng;

/// 0.99 quantile of the chi-square distribution with 98 degrees of freedom.
const CHI2_98_Q99: f64 = 133.475_672_322_982_98;

/// Betabinomial pmf over `0..=n` via `p(0) = Π (β+j)/(α+β+j)` and the
/// successive ratio `p(k+1)/p(k) = (n-k)(k+α) / ((k+1)(n-k-1+β))`.
fn beta_binomial_pmf(n: usize, alpha: f64, beta: f64) -> Vec<f64> {
    let mut p0 = 1.0;
    for j in 0..n {
        p0 *= (beta + j as f64) / (alpha + beta + j as f64);
    }
    let mut pmf = vec![p0];
    for k in 0..n {
        let (kf, nf) = (k as f64, n as f64);
        let next = pmf[k] * (nf - kf) * (kf + alpha) / ((kf + 1.0) * (nf - kf - 1.0 + beta));
        pmf.push(next);
    }
    pmf
}

#[test]
fn pmf_oracle_is_normalised() {
    for n in [0, 1, 5, 98] {
        let total: f64 = beta_binomial_pmf(n, 1.1, 1.1).iter().sum();
        assert!((total - 1.0).abs() < 1e-12, "n={n}: {total}");
    }
    // α = β = 1 is uniform
    assert!(beta_binomial_pmf(9, 1.0, 1.0).iter().all(|p| (p - 0.1).abs() < 1e-12));
}

#[test]
fn split_columns_follow_beta_binomial() {
    let region = Rect::new(0, 0, 99, 1);
    let draws = 100_000;
    let mut counts = vec![0u64; 99];
    let mut rng = stream(2024, &[1]);
    for _ in 0..draws {
        let [tl, ..] = sample_grid_partition(&region, &mut rng, 1.1, 1.1).unwrap();
        // first column of the right-hand children, in 1..=99
        counts[tl.x1 + 1 - 1] += 1;
    }
    let pmf = beta_binomial_pmf(98, 1.1, 1.1);
    let chi2: f64 = counts
        .iter()
        .zip(&pmf)
        .map(|(&o, &p)| {
            let e = p * draws as f64;
            (o as f64 - e).powi(2) / e
        })
        .sum();
    assert!(chi2 < CHI2_98_Q99, "chi2 = {chi2}");
}

#[test]
fn two_by_two_split_is_forced() {
    let mut rng = stream(0, &[]);
    for _ in 0..20 {
        let kids = sample_grid_partition(&Rect::new(3, 4, 4, 5), &mut rng, 1.1, 1.1).unwrap();
        assert!(kids.iter().all(|r| r.area() == 1));
    }
}

fn tiles(parent: &PixelSet, kids: &[PixelSet]) -> bool {
    let mut union = PixelSet::empty(parent.dims().0, parent.dims().1);
    for (i, k) in kids.iter().enumerate() {
        if kids[..i].iter().any(|o| !o.is_disjoint(k)) {
            return false;
        }
        union.union_with(k);
    }
    &union == parent
}

#[test]
fn grid_children_tile_random_rects() {
    let mut rng = stream(7, &[]);
    let (w, h) = (40, 30);
    for _ in 0..1000 {
        let x0 = rng.gen_range(0..w - 1);
        let y0 = rng.gen_range(0..h - 1);
        let rect = Rect::new(x0, y0, rng.gen_range(x0 + 1..w), rng.gen_range(y0 + 1..h));
        let kids = sample_grid_partition(&rect, &mut rng, 1.1, 1.1).unwrap();
        let parent = rasterize(&Region::Rect(rect), w, h);
        let kids: Vec<PixelSet> = kids.iter().map(|r| rasterize(&Region::Rect(*r), w, h)).collect();
        assert!(tiles(&parent, &kids));
        assert!(kids.iter().all(|k| !k.is_empty() && k.len() < parent.len()));
    }
}

fn random_convex_quad<R: Rng>(rng: &mut R, w: f64, h: f64) -> Quad {
    loop {
        // one point per side of the bounding box keeps the winding consistent
        let q = Quad::new([
            Point::new(rng.gen_range(0.0..w * 0.5), rng.gen_range(0.0..h * 0.3)),
            Point::new(rng.gen_range(w * 0.7..w), rng.gen_range(0.0..h * 0.5)),
            Point::new(rng.gen_range(w * 0.5..w), rng.gen_range(h * 0.7..h)),
            Point::new(rng.gen_range(0.0..w * 0.3), rng.gen_range(h * 0.5..h)),
        ]);
        let q = if q.signed_area() < 0.0 {
            let [a, b, c, d] = q.vertices;
            Quad::new([a, d, c, b])
        } else {
            q
        };
        if q.is_convex_ccw() {
            return q;
        }
    }
}

#[test]
fn diagonal_children_are_convex_and_conserve_area() {
    let mut rng = stream(11, &[]);
    for i in 0..10_000 {
        let parent = if i % 2 == 0 {
            Quad::full(64, 48)
        } else {
            random_convex_quad(&mut rng, 64.0, 48.0)
        };
        let kids = diagonal_partition(&parent, &mut rng).unwrap();
        assert!(kids.iter().all(Quad::is_convex_ccw), "draw {i}: {kids:?}");
        let sum: f64 = kids.iter().map(Quad::signed_area).sum();
        let area = parent.signed_area();
        assert!((sum - area).abs() <= 1e-9 * area, "draw {i}: {sum} vs {area}");
    }
}

#[test]
fn diagonal_children_tile_rasterized_parent() {
    let mut rng = stream(12, &[]);
    let (w, h) = (32, 32);
    for _ in 0..1000 {
        let parent = random_convex_quad(&mut rng, w as f64, h as f64);
        let kids = diagonal_partition(&parent, &mut rng).unwrap();
        let parent_px = rasterize(&Region::Quad(parent), w, h);
        let kid_px: Vec<PixelSet> = kids.iter().map(|q| rasterize(&Region::Quad(*q), w, h)).collect();
        assert!(tiles(&parent_px, &kid_px));
    }
}

#[test]
fn midpoint_split_of_a_square_gives_quadrants() {
    let sq = Quad::full(2, 2);
    let mids = [Point::new(1.0, 0.0), Point::new(2.0, 1.0), Point::new(1.0, 2.0), Point::new(0.0, 1.0)];
    let centre = Point::new(1.0, 1.0);
    // child i: vertex i, the edge point after it, the centre, the edge point before it
    for i in 0..4 {
        let child = Quad::new([sq.vertices[i], mids[i], centre, mids[(i + 3) % 4]]);
        assert!(child.is_convex_ccw());
        assert_eq!(child.signed_area(), 1.0);
    }
}

#[test]
fn strategies_are_reproducible() {
    for strategy in [PartitionStrategy::default(), PartitionStrategy::diagonal()] {
        let root = strategy.root_region(50, 40);
        let a = strategy.split(&root, &mut stream(5, &[9])).unwrap();
        let b = strategy.split(&root, &mut stream(5, &[9])).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn degenerate_sliver_rasterizes_to_nothing() {
    let sliver = Quad::new([
        Point::new(0.1, 0.1),
        Point::new(0.4, 0.1),
        Point::new(0.4, 0.2),
        Point::new(0.1, 0.2),
    ]);
    assert!(rasterize(&Region::Quad(sliver), 4, 4).is_empty());
}
