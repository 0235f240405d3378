//! Eight-way bounding volume hierarchy over Bézier patches.

use nalgebra::Point3;

use crate::error::{Error, Result};
use crate::kdop::{overlap_unchecked, patch_bounds, support_heights, DirectionSet, KDopBounds};
use crate::patch::RationalBezierPatch;

pub const DEFAULT_MAX_LEAF: usize = 4;

#[derive(Debug, Clone)]
pub enum BvhContent {
    Children(Vec<usize>),
    Leaf(Vec<usize>),
}

#[derive(Debug, Clone)]
pub struct BvhNode {
    pub bounds: KDopBounds,
    pub content: BvhContent,
}

/// Immutable hierarchy; nodes live in an arena with the root at index 0.
#[derive(Debug, Clone)]
pub struct Bvh {
    dirs: DirectionSet,
    nodes: Vec<BvhNode>,
    patch_bounds: Vec<KDopBounds>,
}

/// Summary numbers for reporting.
#[derive(Debug, Clone, PartialEq)]
pub struct BvhStats {
    pub nodes: usize,
    pub leaves: usize,
    pub depth: usize,
    /// `leaf_histogram[n]` counts leaves holding `n` patches.
    pub leaf_histogram: Vec<usize>,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Builds the tree by splitting about the median patch centroid on each axis.
pub fn build_bvh(patches: &[RationalBezierPatch], dirs: &DirectionSet, max_leaf: usize) -> Result<Bvh> {
    if patches.is_empty() {
        return Err(Error::InvalidArgument("cannot build a hierarchy over zero patches".into()));
    }
    let max_leaf = max_leaf.max(1);
    let patch_bounds: Vec<KDopBounds> = patches.iter().map(|p| patch_bounds(p, dirs)).collect();
    let centroids: Vec<Point3<f64>> = patches.iter().map(|p| p.centroid()).collect();
    let mut bvh = Bvh { dirs: dirs.clone(), nodes: Vec::new(), patch_bounds };
    let ids: Vec<usize> = (0..patches.len()).collect();
    bvh.build_node(ids, &centroids, max_leaf);
    Ok(bvh)
}

impl Bvh {
    fn build_node(&mut self, ids: Vec<usize>, centroids: &[Point3<f64>], max_leaf: usize) -> usize {
        let bounds = ids[1..].iter().fold(self.patch_bounds[ids[0]].clone(), |b, &i| b.union(&self.patch_bounds[i]));
        let me = self.nodes.len();
        self.nodes.push(BvhNode { bounds, content: BvhContent::Leaf(Vec::new()) });
        if ids.len() <= max_leaf {
            self.nodes[me].content = BvhContent::Leaf(ids);
            return me;
        }
        let split: Vec<f64> = (0..3).map(|a| median(ids.iter().map(|&i| centroids[i][a]).collect())).collect();
        let mut octants: [Vec<usize>; 8] = Default::default();
        for &i in &ids {
            let c = centroids[i];
            let o = (0..3).fold(0, |o, a| o | (((c[a] > split[a]) as usize) << a));
            octants[o].push(i);
        }
        if octants.iter().any(|o| o.len() == ids.len()) {
            self.nodes[me].content = BvhContent::Leaf(ids);
            return me;
        }
        let mut children = Vec::new();
        for o in octants.into_iter().filter(|o| !o.is_empty()) {
            children.push(self.build_node(o, centroids, max_leaf));
        }
        self.nodes[me].content = BvhContent::Children(children);
        me
    }

    pub fn root(&self) -> &BvhNode {
        &self.nodes[0]
    }

    pub fn nodes(&self) -> &[BvhNode] {
        &self.nodes
    }

    pub fn directions(&self) -> &DirectionSet {
        &self.dirs
    }

    pub fn patch_bounds(&self) -> &[KDopBounds] {
        &self.patch_bounds
    }

    /// Patches whose k-dop overlaps the k-dop of the segment `[a, b]`, in ascending id order.
    pub fn query_segment(&self, a: Point3<f64>, b: Point3<f64>) -> Vec<usize> {
        let seg = support_heights(&[a, b], &self.dirs).expect("two points");
        self.query_bounds(&seg)
    }

    /// Patches whose k-dop overlaps `query`, in ascending id order.
    pub fn query_bounds(&self, query: &KDopBounds) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![0usize];
        while let Some(n) = stack.pop() {
            let node = &self.nodes[n];
            if !overlap_unchecked(&node.bounds, query) {
                continue;
            }
            match &node.content {
                BvhContent::Children(c) => stack.extend(c.iter().copied()),
                BvhContent::Leaf(ids) => {
                    out.extend(ids.iter().copied().filter(|&i| overlap_unchecked(&self.patch_bounds[i], query)))
                }
            }
        }
        out.sort_unstable();
        out
    }

    pub fn stats(&self) -> BvhStats {
        let mut leaves = 0;
        let mut depth = 0;
        let mut hist = Vec::new();
        let mut stack = vec![(0usize, 1usize)];
        while let Some((n, d)) = stack.pop() {
            depth = depth.max(d);
            match &self.nodes[n].content {
                BvhContent::Children(c) => stack.extend(c.iter().map(|&i| (i, d + 1))),
                BvhContent::Leaf(ids) => {
                    leaves += 1;
                    if hist.len() <= ids.len() {
                        hist.resize(ids.len() + 1, 0);
                    }
                    hist[ids.len()] += 1;
                }
            }
        }
        BvhStats { nodes: self.nodes.len(), leaves, depth, leaf_histogram: hist }
    }
}
