//! Exact nearest-neighbour search over a [`FeatureMatrix`].
//!
//! Two interchangeable backends answer the same queries: a k-d tree and a
//! brute-force scan. Both share the distance kernel and the candidate
//! ordering (distance, then reference index), so their answers are
//! identical, not merely close.

mod kdtree;

use std::ops::Range;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::{euclidean_within, FeatureMatrix};

pub use kdtree::{KdTree, DEFAULT_LEAF_SIZE};

/// Below this many reference points `Backend::Auto` scans instead of building a tree.
pub const AUTO_BRUTE_THRESHOLD: usize = 512;

/// Above this dimension `Backend::Auto` scans: axis-aligned boxes stop pruning
/// once there are fewer leaves than coordinate splits would need.
pub const AUTO_TREE_MAX_DIM: usize = 12;

/// Queries handled together by one worker.
pub const QUERY_BLOCK: usize = 64;
const TILE_BYTES: usize = 256 * 1024;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Backend {
    #[default]
    Auto,
    Tree,
    Brute,
}

impl Backend {
    pub fn as_str(self) -> &'static str {
        match self {
            Backend::Auto => "auto",
            Backend::Tree => "tree",
            Backend::Brute => "brute",
        }
    }
}

impl FromStr for Backend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(Backend::Auto),
            "tree" => Ok(Backend::Tree),
            "brute" => Ok(Backend::Brute),
            other => Err(Error::InvalidConfig(format!(
                "unknown backend '{other}' (valid: auto, tree, brute)"
            ))),
        }
    }
}

/// Per-query k nearest neighbours, sorted by (distance, index).
#[derive(Clone, Debug, PartialEq)]
pub struct KnnTable {
    k: usize,
    distances: Vec<f64>,
    indices: Vec<usize>,
}

impl KnnTable {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n_queries(&self) -> usize {
        self.distances.len() / self.k
    }

    pub fn distances(&self, q: usize) -> &[f64] {
        &self.distances[q * self.k..(q + 1) * self.k]
    }

    pub fn indices(&self, q: usize) -> &[usize] {
        &self.indices[q * self.k..(q + 1) * self.k]
    }

    /// Distance from query `q` to its `j`-th nearest neighbour (1-based).
    pub fn nth_distance(&self, q: usize, j: usize) -> f64 {
        assert!(j >= 1 && j <= self.k, "neighbour rank {j} outside 1..={}", self.k);
        self.distances[q * self.k + j - 1]
    }

    /// Distances to the `j`-th nearest neighbour for every query.
    pub fn nth_distances(&self, j: usize) -> Vec<f64> {
        (0..self.n_queries()).map(|q| self.nth_distance(q, j)).collect()
    }

    /// Distances to the k-th (last) neighbour for every query.
    pub fn kth_distances(&self) -> Vec<f64> {
        self.nth_distances(self.k)
    }
}

/// Reference points within a closed ball, ascending by index.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Within {
    pub indices: Vec<usize>,
    pub distances: Vec<f64>,
}

impl Within {
    pub fn count(&self) -> usize {
        self.indices.len()
    }
}

/// Bounded best-k list ordered by (distance, index).
#[derive(Debug)]
pub(crate) struct Candidates {
    k: usize,
    items: Vec<(f64, usize)>,
}

impl Candidates {
    pub(crate) fn new(k: usize) -> Self {
        Candidates {
            k,
            items: Vec::with_capacity(k + 1),
        }
    }

    /// Current pruning radius: infinite until k candidates are held.
    #[inline]
    pub(crate) fn bound(&self) -> f64 {
        if self.items.len() < self.k {
            f64::INFINITY
        } else {
            self.items[self.k - 1].0
        }
    }

    #[inline]
    pub(crate) fn offer(&mut self, dist: f64, index: usize) {
        let key = (dist, index);
        if self.items.len() == self.k {
            let worst = self.items[self.k - 1];
            if !less(key, worst) {
                return;
            }
            self.items.pop();
        }
        let pos = self.items.partition_point(|&c| less(c, key));
        self.items.insert(pos, key);
    }

    pub(crate) fn into_items(self) -> Vec<(f64, usize)> {
        self.items
    }
}

#[inline]
fn less(a: (f64, usize), b: (f64, usize)) -> bool {
    a.0 < b.0 || (a.0 == b.0 && a.1 < b.1)
}

#[derive(Debug)]
enum Engine {
    Brute,
    Tree(KdTree),
}

/// Immutable exact neighbour index borrowing its reference points.
#[derive(Debug)]
pub struct NeighborIndex<'a> {
    points: &'a FeatureMatrix,
    engine: Engine,
}

impl<'a> NeighborIndex<'a> {
    pub fn build(points: &'a FeatureMatrix, backend: Backend) -> Self {
        let use_tree = match backend {
            Backend::Tree => true,
            Backend::Brute => false,
            Backend::Auto => points.n() >= AUTO_BRUTE_THRESHOLD && points.dim() <= AUTO_TREE_MAX_DIM,
        };
        let engine = if use_tree {
            Engine::Tree(KdTree::build(points, DEFAULT_LEAF_SIZE))
        } else {
            Engine::Brute
        };
        NeighborIndex { points, engine }
    }

    pub fn points(&self) -> &'a FeatureMatrix {
        self.points
    }

    pub fn len(&self) -> usize {
        self.points.n()
    }

    pub fn is_empty(&self) -> bool {
        self.points.n() == 0
    }

    /// The backend actually in use (`Auto` resolved).
    pub fn backend(&self) -> Backend {
        match self.engine {
            Engine::Brute => Backend::Brute,
            Engine::Tree(_) => Backend::Tree,
        }
    }

    /// k nearest reference points of a single vector, optionally skipping one index.
    pub fn knn_one(&self, query: &[f64], k: usize, skip: Option<usize>) -> Vec<(f64, usize)> {
        let mut cands = Candidates::new(k);
        match &self.engine {
            Engine::Brute => {
                for (i, p) in self.points.rows().enumerate() {
                    if Some(i) == skip {
                        continue;
                    }
                    if let Some(d) = euclidean_within(query, p, cands.bound()) {
                        cands.offer(d, i);
                    }
                }
            }
            Engine::Tree(tree) => tree.knn(self.points, query, skip, &mut cands),
        }
        cands.into_items()
    }

    /// k nearest neighbours of each query row.
    ///
    /// With `exclude_self`, `queries` must be the indexed set itself and each
    /// row's own index is never reported as its neighbour.
    pub fn knn_distances(&self, queries: &FeatureMatrix, k: usize, exclude_self: bool) -> Result<KnnTable> {
        if queries.dim() != self.points.dim() {
            return Err(Error::DimensionMismatch {
                left: self.points.dim(),
                right: queries.dim(),
            });
        }
        let n = self.points.n();
        if exclude_self {
            if !(std::ptr::eq(queries, self.points) || queries == self.points) {
                return Err(Error::InvalidConfig(
                    "exclude_self requires the queries to be the indexed set".into(),
                ));
            }
            if k == 0 || k >= n {
                return Err(Error::k_range(k, n, "k-NN with self excluded"));
            }
        } else if k == 0 || k > n {
            return Err(Error::k_range(k, n + 1, "k-NN query"));
        }

        let nq = queries.n();
        let blocks: Vec<Vec<Vec<(f64, usize)>>> = (0..nq.div_ceil(QUERY_BLOCK))
            .into_par_iter()
            .map(|b| {
                let rows = b * QUERY_BLOCK..((b + 1) * QUERY_BLOCK).min(nq);
                self.knn_block(queries, rows, k, exclude_self)
            })
            .collect();
        let mut distances = Vec::with_capacity(nq * k);
        let mut indices = Vec::with_capacity(nq * k);
        for row in blocks.into_iter().flatten() {
            debug_assert_eq!(row.len(), k);
            for (d, i) in row {
                distances.push(d);
                indices.push(i);
            }
        }
        Ok(KnnTable { k, distances, indices })
    }

    /// k-NN lists for a contiguous block of query rows. The brute backend
    /// walks the reference set in cache-sized tiles shared by the block.
    fn knn_block(&self, queries: &FeatureMatrix, rows: Range<usize>, k: usize, exclude_self: bool) -> Vec<Vec<(f64, usize)>> {
        let Engine::Brute = self.engine else {
            return rows
                .map(|q| self.knn_one(queries.row(q), k, exclude_self.then_some(q)))
                .collect();
        };
        let mut cands: Vec<Candidates> = rows.clone().map(|_| Candidates::new(k)).collect();
        let tile = self.tile_rows();
        let n = self.points.n();
        for t0 in (0..n).step_by(tile) {
            let t1 = (t0 + tile).min(n);
            for (q, c) in rows.clone().zip(cands.iter_mut()) {
                let query = queries.row(q);
                for i in t0..t1 {
                    if exclude_self && i == q {
                        continue;
                    }
                    if let Some(d) = euclidean_within(query, self.points.row(i), c.bound()) {
                        c.offer(d, i);
                    }
                }
            }
        }
        cands.into_iter().map(Candidates::into_items).collect()
    }

    /// Closed-ball members for a contiguous block of centres, one list per
    /// centre, each in unspecified order.
    pub fn within_block(&self, centers: &FeatureMatrix, rows: Range<usize>, radii: &[f64]) -> Vec<Vec<(usize, f64)>> {
        let mut found: Vec<Vec<(usize, f64)>> = rows.clone().map(|_| Vec::new()).collect();
        match &self.engine {
            Engine::Tree(_) => {
                for (c, list) in rows.zip(found.iter_mut()) {
                    self.for_each_within(centers.row(c), radii[c], |i, d| list.push((i, d)));
                }
            }
            Engine::Brute => {
                let tile = self.tile_rows();
                let n = self.points.n();
                for t0 in (0..n).step_by(tile) {
                    let t1 = (t0 + tile).min(n);
                    for (c, list) in rows.clone().zip(found.iter_mut()) {
                        let radius = radii[c];
                        if !(radius >= 0.0) {
                            continue;
                        }
                        let center = centers.row(c);
                        for i in t0..t1 {
                            if let Some(d) = euclidean_within(center, self.points.row(i), radius) {
                                list.push((i, d));
                            }
                        }
                    }
                }
            }
        }
        found
    }

    /// Reference rows per brute-force tile: about 256 KiB of coordinates.
    fn tile_rows(&self) -> usize {
        (TILE_BYTES / (8 * self.points.dim())).max(8)
    }

    /// Self-excluded k-NN over the indexed set.
    pub fn knn_self(&self, k: usize) -> Result<KnnTable> {
        self.knn_distances(self.points, k, true)
    }

    /// Reference points `p` with `distance(p, center) <= radius`.
    pub fn count_within(&self, center: &[f64], radius: f64) -> Within {
        let mut hits: Vec<(usize, f64)> = Vec::new();
        self.for_each_within(center, radius, |i, d| hits.push((i, d)));
        hits.sort_unstable_by_key(|h| h.0);
        let (indices, distances) = hits.into_iter().unzip();
        Within { indices, distances }
    }

    /// Visits every reference point inside the closed ball, in unspecified order.
    pub fn for_each_within<F: FnMut(usize, f64)>(&self, center: &[f64], radius: f64, mut visit: F) {
        if !(radius >= 0.0) {
            return;
        }
        match &self.engine {
            Engine::Brute => {
                for (i, p) in self.points.rows().enumerate() {
                    if let Some(d) = euclidean_within(center, p, radius) {
                        visit(i, d);
                    }
                }
            }
            Engine::Tree(tree) => tree.within(self.points, center, radius, &mut visit),
        }
    }
}
