//! Causal responsibility of superpixels and the ranking that turns it into a
//! saliency landscape.
//!
//! A part is a cause of the label when some witness set of sibling parts can be
//! masked (together with every subset of it) without changing the label, while
//! additionally masking the part does change it. Its responsibility is
//! `1/(k+1)` for the smallest such witness of `k` parts, and `0` when no witness
//! exists.

mod landscape;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::classifier::{ClassifierHandle, Label};
use crate::error::{Error, Result};
use crate::imaging::{apply_mask, Image, MaskingColour, PixelSet};
use crate::partition::{rasterize, PartitionError, PartitionStrategy, Region};
use crate::rng::{self, TAG_RANK};
use crate::scalar::Scalar;

pub use landscape::SaliencyLandscape;

/// Verdict-preservation table over all subsets of `parts` masked on top of
/// `context_mask`. Bit `i` of the index means part `i` is masked.
fn preservation_table(
    image: &Image,
    classifier: &ClassifierHandle,
    label: Label,
    parts: &[PixelSet],
    context_mask: &PixelSet,
    colour: MaskingColour,
) -> Result<Vec<bool>> {
    let k = parts.len();
    // the empty masking is the precondition itself, so it is not re-queried
    let images = (1..1usize << k)
        .map(|m| {
            let mut masked = context_mask.clone();
            for (i, p) in parts.iter().enumerate() {
                if m >> i & 1 == 1 {
                    masked.union_with(p);
                }
            }
            apply_mask(image, &masked.complement(), colour)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let verdicts = classifier.classify_many(&images)?;
    Ok(std::iter::once(true)
        .chain(verdicts.iter().map(|v| v.label == label))
        .collect())
}

/// Smallest witness of each part (as a bitmask over `parts`), lowest mask first
/// among equal sizes; `None` when the part is not a cause.
fn minimal_witnesses(
    image: &Image,
    classifier: &ClassifierHandle,
    label: Label,
    parts: &[PixelSet],
    context_mask: &PixelSet,
    colour: MaskingColour,
) -> Result<Vec<Option<usize>>> {
    let k = parts.len();
    if k > 8 {
        return Err(Error::InvalidConfig(format!("{k} parts exceed the supported maximum of 8")));
    }
    let preserves = preservation_table(image, classifier, label, parts, context_mask, colour)?;
    let full = (1usize << k) - 1;
    // every_subset_preserves[m]: masking any subset of m keeps the label
    let mut every_subset_preserves = vec![false; 1 << k];
    for m in 0..=full {
        every_subset_preserves[m] = preserves[m]
            && (0..k)
                .filter(|j| m >> j & 1 == 1)
                .all(|j| every_subset_preserves[m & !(1 << j)]);
    }
    Ok((0..k)
        .map(|i| {
            let others = full & !(1 << i);
            (0..=full)
                .filter(|&w| w & others == w)
                .filter(|&w| every_subset_preserves[w] && !preserves[w | 1 << i])
                .min_by_key(|&w| (w.count_ones(), w))
        })
        .collect())
}

/// Responsibility of each part for `label`, with `context_mask` held masked.
///
/// Costs at most `2^k - 1` classifications for `k` parts. Parts must be pairwise
/// disjoint and disjoint from the context.
pub fn responsibility_of_parts<T: Scalar>(
    image: &Image,
    classifier: &ClassifierHandle,
    label: Label,
    parts: &[PixelSet],
    context_mask: &PixelSet,
    colour: MaskingColour,
) -> Result<Vec<T>> {
    Ok(minimal_witnesses(image, classifier, label, parts, context_mask, colour)?
        .into_iter()
        .map(|w| w.map_or_else(T::zero, |w| T::responsibility(w.count_ones() as usize)))
        .collect())
}

/// What stays masked while the children of a node are scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RefinementContext {
    /// The parent's context plus the child's minimal witness, so the child is
    /// refined under the contingency that made it a cause.
    #[default]
    Witness,
    /// Nothing outside the node is masked.
    Untouched,
}

impl std::str::FromStr for RefinementContext {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "witness" => Ok(Self::Witness),
            "untouched" => Ok(Self::Untouched),
            other => Err(Error::InvalidConfig(format!("unknown refinement context {other:?}"))),
        }
    }
}

/// Which positive-responsibility children are refined further.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Exploration {
    #[default]
    AllPositive,
    /// Only the children of maximal responsibility.
    TopOnly,
}

/// A node of the partition-refinement tree.
#[derive(Debug, Clone)]
pub struct RefinementNode<T> {
    pub region: Region,
    pub pixels: PixelSet,
    pub local_responsibility: T,
    pub depth: usize,
    /// Pixels held masked while this node's children were scored.
    pub context: PixelSet,
    /// Either empty or exactly four children tiling `pixels`.
    pub children: Vec<RefinementNode<T>>,
}

impl<T: Scalar> RefinementNode<T> {
    pub fn root(region: Region, width: usize, height: usize, responsibility: T) -> Self {
        Self {
            pixels: rasterize(&region, width, height),
            region,
            local_responsibility: responsibility,
            depth: 0,
            context: PixelSet::empty(width, height),
            children: Vec::new(),
        }
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    /// Number of nodes that were split into children.
    pub fn refined_count(&self) -> usize {
        if self.is_leaf() {
            0
        } else {
            1 + self.children.iter().map(Self::refined_count).sum::<usize>()
        }
    }

    pub fn leaves(&self) -> Vec<&RefinementNode<T>> {
        let mut out = Vec::new();
        let mut stack = vec![self];
        while let Some(n) = stack.pop() {
            if n.is_leaf() {
                out.push(n);
            } else {
                stack.extend(n.children.iter().rev());
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct RefineParams {
    pub strategy: PartitionStrategy,
    pub colour: MaskingColour,
    /// Children whose shorter side is below this many pixels are not split.
    pub min_side: usize,
    pub max_depth: usize,
    pub exploration: Exploration,
    pub context: RefinementContext,
}

pub const DEFAULT_MAX_DEPTH: usize = 10;

/// `max(1, ⌈min(width, height) / 10⌉)`.
pub fn default_min_side(width: usize, height: usize) -> usize {
    width.min(height).div_ceil(10).max(1)
}

impl RefineParams {
    pub fn for_image(width: usize, height: usize) -> Self {
        Self {
            strategy: PartitionStrategy::default(),
            colour: MaskingColour::default(),
            min_side: default_min_side(width, height),
            max_depth: DEFAULT_MAX_DEPTH,
            exploration: Exploration::AllPositive,
            context: RefinementContext::default(),
        }
    }
}

/// Classifier budget of one refinement pass.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct RefineStats {
    pub refined_nodes: usize,
    pub calls: u64,
}

struct Refiner<'a, R> {
    image: &'a Image,
    classifier: &'a ClassifierHandle,
    label: Label,
    params: &'a RefineParams,
    rng: &'a mut R,
    stats: RefineStats,
}

impl<R: Rng> Refiner<'_, R> {
    fn refine<T: Scalar>(&mut self, node: &mut RefinementNode<T>) -> Result<()> {
        if node.depth >= self.params.max_depth {
            return Ok(());
        }
        let regions = match self.params.strategy.split(&node.region, self.rng) {
            Ok(r) => r,
            Err(PartitionError::RegionTooSmall(..) | PartitionError::DegenerateQuad) => return Ok(()),
            Err(e) => return Err(e.into()),
        };
        let (w, h) = self.image.dims();
        let parts: Vec<PixelSet> = regions
            .iter()
            .map(|r| rasterize(r, w, h).intersection(&node.pixels))
            .collect();
        let witnesses = minimal_witnesses(
            self.image,
            self.classifier,
            self.label,
            &parts,
            &node.context,
            self.params.colour,
        )?;
        let resp: Vec<T> = witnesses
            .iter()
            .map(|w| w.map_or_else(T::zero, |w| T::responsibility(w.count_ones() as usize)))
            .collect();
        self.stats.refined_nodes += 1;
        // counted locally: the shared handle counter also sees concurrent iterations
        self.stats.calls += (1u64 << parts.len()) - 1;

        // children that cannot tell their pixels apart carry no information,
        // so the node is kept as a leaf with its own responsibility
        if resp.iter().all(|&r| r == resp[0]) {
            return Ok(());
        }
        let top = resp.iter().copied().fold(T::zero(), |m, r| if r > m { r } else { m });
        let child_context = |witness: Option<usize>| {
            let mut c = node.context.clone();
            if let (RefinementContext::Witness, Some(m)) = (self.params.context, witness) {
                for (j, p) in parts.iter().enumerate() {
                    if m >> j & 1 == 1 {
                        c.union_with(p);
                    }
                }
            }
            c
        };
        let contexts: Vec<PixelSet> = witnesses.iter().map(|&w| child_context(w)).collect();
        node.children = regions
            .into_iter()
            .zip(parts)
            .zip(resp.iter().zip(contexts))
            .map(|((region, pixels), (&r, context))| RefinementNode {
                region,
                pixels,
                local_responsibility: r,
                depth: node.depth + 1,
                context,
                children: Vec::new(),
            })
            .collect();
        for child in &mut node.children {
            let r = child.local_responsibility;
            let explore = match self.params.exploration {
                Exploration::AllPositive => r > T::zero(),
                Exploration::TopOnly => r > T::zero() && r == top,
            };
            if explore && child.region.min_side() >= self.params.min_side as f64 {
                self.refine(child)?;
            }
        }
        Ok(())
    }
}

/// Recursively partitions `node`, computing sibling responsibilities at each level.
pub fn refine<T: Scalar, R: Rng>(
    image: &Image,
    classifier: &ClassifierHandle,
    label: Label,
    mut node: RefinementNode<T>,
    params: &RefineParams,
    rng: &mut R,
) -> Result<(RefinementNode<T>, RefineStats)> {
    let mut refiner = Refiner {
        image,
        classifier,
        label,
        params,
        rng,
        stats: RefineStats::default(),
    };
    if node.local_responsibility > T::zero() {
        refiner.refine(&mut node)?;
    }
    Ok((node, refiner.stats))
}

/// One ranking pass: each pixel gets the product of responsibilities along the
/// path from the root to the leaf that contains it.
pub fn iteration_map<T: Scalar>(root: &RefinementNode<T>, width: usize, height: usize) -> Vec<T> {
    let mut out = vec![T::zero(); width * height];
    let mut stack = vec![(root, root.local_responsibility)];
    while let Some((node, product)) = stack.pop() {
        if node.is_leaf() {
            for i in node.pixels.indices() {
                out[i] = product;
            }
        } else {
            for child in &node.children {
                stack.push((child, product * child.local_responsibility));
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct RankParams {
    pub iterations: usize,
    pub seed: u64,
    pub refine: RefineParams,
    /// Worker threads; results do not depend on this value.
    pub workers: usize,
}

impl RankParams {
    pub fn for_image(width: usize, height: usize) -> Self {
        Self {
            iterations: 20,
            seed: 0,
            refine: RefineParams::for_image(width, height),
            workers: 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RankOutcome<T> {
    pub landscape: SaliencyLandscape<T>,
    /// Budget of each iteration, in iteration order.
    pub iterations: Vec<RefineStats>,
    /// Classifications spent outside the iterations (the whole-image masking probe).
    pub setup_calls: u64,
    /// Whether the fully masked image keeps the label.
    pub masked_keeps_label: bool,
}

impl<T> RankOutcome<T> {
    pub fn total_calls(&self) -> u64 {
        self.setup_calls + self.iterations.iter().map(|s| s.calls).sum::<u64>()
    }
}

pub(crate) fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Pool(e.to_string()))
}

/// Averages `iterations` randomized refinement passes into a saliency landscape.
///
/// The root is a counterfactual cause (responsibility 1) when masking the whole
/// image changes the label, and irrelevant otherwise, in which case every pass
/// is identically zero.
pub fn rank<T: Scalar>(
    image: &Image,
    classifier: &ClassifierHandle,
    label: Label,
    params: &RankParams,
) -> Result<RankOutcome<T>> {
    if params.iterations == 0 {
        return Err(Error::InvalidConfig("iterations must be at least 1".into()));
    }
    let (w, h) = image.dims();
    let masked = apply_mask(image, &PixelSet::empty(w, h), params.refine.colour)?;
    let masked_keeps_label = classifier.classify(&masked)?.label == label;
    let root_resp = if masked_keeps_label { T::zero() } else { T::one() };
    let root_region = params.refine.strategy.root_region(w, h);

    let run = |i: usize| -> Result<(Vec<T>, RefineStats)> {
        let mut rng = rng::stream(params.seed, &[TAG_RANK, i as u64]);
        let root = RefinementNode::root(root_region, w, h, root_resp);
        let (tree, stats) = refine(image, classifier, label, root, &params.refine, &mut rng)?;
        debug_assert!(stats.calls <= 16 * stats.refined_nodes as u64);
        Ok((iteration_map(&tree, w, h), stats))
    };
    let results: Vec<Result<(Vec<T>, RefineStats)>> = if params.workers <= 1 {
        (0..params.iterations).map(run).collect()
    } else {
        pool(params.workers)?.install(|| (0..params.iterations).into_par_iter().map(run).collect())
    };
    let mut maps = Vec::with_capacity(params.iterations);
    let mut stats = Vec::with_capacity(params.iterations);
    for r in results {
        let (m, s) = r?;
        maps.push(m);
        stats.push(s);
    }
    Ok(RankOutcome {
        landscape: SaliencyLandscape::mean_of(w, h, &maps),
        iterations: stats,
        setup_calls: 1,
        masked_keeps_label,
    })
}
