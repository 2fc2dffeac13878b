//! Nearest-patch search under squared Euclidean distance.
//!
//! [`ExactIndex`] always returns the true minimiser, breaking ties by the
//! lowest grid index. It prunes with the bound
//! `|p - q|^2 >= dim * (mean(p) - mean(q))^2`, which needs no tuning and is
//! tight on the smooth or periodic textures typical of backgrounds.
//!
//! [`KdForest`] is a randomized k-d forest with a checked-leaves budget
//! for large indices where approximate answers are acceptable.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::patches::PatchGrid;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub dist2: f64,
}

pub trait NearestPatch: Sync {
    fn nearest(&self, query: &[f32]) -> Neighbor;
}

#[inline]
pub fn dist2(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = (x - y) as f64;
            d * d
        })
        .sum()
}

/// Squared distance, abandoning early once it exceeds `bound`.
#[inline]
fn dist2_bounded(a: &[f32], b: &[f32], bound: f64) -> f64 {
    let mut acc = 0.0;
    for (ca, cb) in a.chunks(16).zip(b.chunks(16)) {
        for (&x, &y) in ca.iter().zip(cb) {
            let d = (x - y) as f64;
            acc += d * d;
        }
        if acc > bound {
            return acc;
        }
    }
    acc
}

fn mean(v: &[f32]) -> f64 {
    v.iter().map(|&x| x as f64).sum::<f64>() / v.len() as f64
}

#[inline]
fn better(d: f64, i: usize, best: &Neighbor) -> bool {
    d < best.dist2 || (d == best.dist2 && i < best.index)
}

pub struct ExactIndex<'a> {
    grid: &'a PatchGrid,
    /// Patch indices sorted by patch mean.
    order: Vec<usize>,
    means: Vec<f64>,
}

impl<'a> ExactIndex<'a> {
    pub fn new(grid: &'a PatchGrid) -> Self {
        assert!(!grid.is_empty(), "cannot index an empty patch grid");
        let mut pairs: Vec<(f64, usize)> = (0..grid.len()).map(|i| (mean(grid.patch(i)), i)).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        Self {
            grid,
            order: pairs.iter().map(|p| p.1).collect(),
            means: pairs.iter().map(|p| p.0).collect(),
        }
    }

    /// Nearest patch comparing only the components where `valid` is true.
    /// Brute force; used when parts of the query are unknown.
    pub fn nearest_masked(&self, query: &[f32], valid: &[bool]) -> Neighbor {
        let mut best = Neighbor {
            index: usize::MAX,
            dist2: f64::INFINITY,
        };
        for i in 0..self.grid.len() {
            let p = self.grid.patch(i);
            let mut acc = 0.0;
            for k in 0..query.len() {
                if valid[k] {
                    let d = (query[k] - p[k]) as f64;
                    acc += d * d;
                    if acc > best.dist2 {
                        break;
                    }
                }
            }
            if better(acc, i, &best) {
                best = Neighbor { index: i, dist2: acc };
            }
        }
        best
    }
}

impl NearestPatch for ExactIndex<'_> {
    fn nearest(&self, query: &[f32]) -> Neighbor {
        let dim = query.len() as f64;
        let qm = mean(query);
        let start = self.means.partition_point(|&m| m < qm);
        let mut best = Neighbor {
            index: usize::MAX,
            dist2: f64::INFINITY,
        };
        let bound_exceeded = |m: f64, best: &Neighbor| {
            let lb = dim * (qm - m) * (qm - m);
            lb > best.dist2 * (1.0 + 1e-9) + 1e-12
        };
        let (mut lo, mut hi) = (start, start);
        let (mut lo_open, mut hi_open) = (lo > 0, hi < self.order.len());
        while lo_open || hi_open {
            if hi_open {
                if bound_exceeded(self.means[hi], &best) {
                    hi_open = false;
                } else {
                    let i = self.order[hi];
                    let d = dist2_bounded(query, self.grid.patch(i), best.dist2);
                    if better(d, i, &best) {
                        best = Neighbor { index: i, dist2: d };
                    }
                    hi += 1;
                    hi_open = hi < self.order.len();
                }
            }
            if lo_open {
                if bound_exceeded(self.means[lo - 1], &best) {
                    lo_open = false;
                } else {
                    lo -= 1;
                    let i = self.order[lo];
                    let d = dist2_bounded(query, self.grid.patch(i), best.dist2);
                    if better(d, i, &best) {
                        best = Neighbor { index: i, dist2: d };
                    }
                    lo_open = lo > 0;
                }
            }
        }
        best
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForestParams {
    pub trees: usize,
    /// Maximum number of patches compared per query.
    pub checks: usize,
    pub leaf_size: usize,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            trees: 4,
            checks: 512,
            leaf_size: 8,
            seed: 0x5eed,
        }
    }
}

enum Node {
    Split {
        dim: usize,
        value: f32,
        left: usize,
        right: usize,
    },
    Leaf {
        start: usize,
        end: usize,
    },
}

struct Tree {
    nodes: Vec<Node>,
    /// Patch indices, permuted so every leaf owns a contiguous slice.
    items: Vec<usize>,
}

/// Number of highest-variance dimensions a split is drawn from.
const SPLIT_CANDIDATES: usize = 5;
/// Points sampled to estimate per-dimension variance at a node.
const VARIANCE_SAMPLE: usize = 128;

impl Tree {
    fn build(grid: &PatchGrid, leaf_size: usize, rng: &mut ChaCha8Rng) -> Tree {
        let mut tree = Tree {
            nodes: Vec::new(),
            items: (0..grid.len()).collect(),
        };
        tree.build_node(grid, 0, grid.len(), leaf_size, rng);
        tree
    }

    fn build_node(
        &mut self,
        grid: &PatchGrid,
        start: usize,
        end: usize,
        leaf_size: usize,
        rng: &mut ChaCha8Rng,
    ) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { start, end });
        if end - start <= leaf_size {
            return id;
        }
        let dim = grid.dim();
        let step = ((end - start) / VARIANCE_SAMPLE).max(1);
        let sample: Vec<usize> = (start..end).step_by(step).map(|k| self.items[k]).collect();
        let n = sample.len() as f64;
        let mut mean = vec![0.0f64; dim];
        let mut sq = vec![0.0f64; dim];
        for &i in &sample {
            for (k, &v) in grid.patch(i).iter().enumerate() {
                mean[k] += v as f64;
                sq[k] += (v as f64) * (v as f64);
            }
        }
        let mut ranked: Vec<(f64, usize)> = (0..dim)
            .map(|k| {
                let m = mean[k] / n;
                (sq[k] / n - m * m, k)
            })
            .collect();
        ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        let top: Vec<usize> = ranked.iter().take(SPLIT_CANDIDATES).map(|r| r.1).collect();
        let split_dim = *top.choose(rng).unwrap();
        let value = (mean[split_dim] / n) as f32;

        let slice = &mut self.items[start..end];
        let mut mid = 0;
        for j in 0..slice.len() {
            if grid.patch(slice[j])[split_dim] < value {
                slice.swap(j, mid);
                mid += 1;
            }
        }
        if mid == 0 || mid == slice.len() {
            return id;
        }
        let left = self.build_node(grid, start, start + mid, leaf_size, rng);
        let right = self.build_node(grid, start + mid, end, leaf_size, rng);
        self.nodes[id] = Node::Split {
            dim: split_dim,
            value,
            left,
            right,
        };
        id
    }
}

#[derive(PartialEq)]
struct Branch {
    priority: f64,
    tree: usize,
    node: usize,
}

impl Eq for Branch {}

impl Ord for Branch {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on priority
        other
            .priority
            .total_cmp(&self.priority)
            .then(other.tree.cmp(&self.tree))
            .then(other.node.cmp(&self.node))
    }
}

impl PartialOrd for Branch {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

pub struct KdForest<'a> {
    grid: &'a PatchGrid,
    trees: Vec<Tree>,
    checks: usize,
}

impl<'a> KdForest<'a> {
    pub fn new(grid: &'a PatchGrid, params: &ForestParams) -> Self {
        assert!(!grid.is_empty(), "cannot index an empty patch grid");
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let trees = (0..params.trees.max(1))
            .map(|_| Tree::build(grid, params.leaf_size.max(1), &mut rng))
            .collect();
        Self {
            grid,
            trees,
            checks: params.checks.max(1),
        }
    }

    fn descend(
        &self,
        query: &[f32],
        tree: usize,
        mut node: usize,
        heap: &mut BinaryHeap<Branch>,
        seen: &mut [bool],
        best: &mut Neighbor,
        checked: &mut usize,
    ) {
        let t = &self.trees[tree];
        loop {
            match t.nodes[node] {
                Node::Split {
                    dim,
                    value,
                    left,
                    right,
                } => {
                    let diff = (query[dim] - value) as f64;
                    let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                    heap.push(Branch {
                        priority: diff * diff,
                        tree,
                        node: far,
                    });
                    node = near;
                }
                Node::Leaf { start, end } => {
                    for &i in &t.items[start..end] {
                        if seen[i] {
                            continue;
                        }
                        seen[i] = true;
                        *checked += 1;
                        let d = dist2_bounded(query, self.grid.patch(i), best.dist2);
                        if better(d, i, best) {
                            *best = Neighbor { index: i, dist2: d };
                        }
                    }
                    return;
                }
            }
        }
    }
}

impl NearestPatch for KdForest<'_> {
    fn nearest(&self, query: &[f32]) -> Neighbor {
        let mut best = Neighbor {
            index: usize::MAX,
            dist2: f64::INFINITY,
        };
        let mut seen = vec![false; self.grid.len()];
        let mut heap = BinaryHeap::new();
        let mut checked = 0usize;
        for t in 0..self.trees.len() {
            self.descend(query, t, 0, &mut heap, &mut seen, &mut best, &mut checked);
        }
        while checked < self.checks {
            let Some(b) = heap.pop() else { break };
            if b.priority > best.dist2 {
                break;
            }
            self.descend(query, b.tree, b.node, &mut heap, &mut seen, &mut best, &mut checked);
        }
        best
    }
}
