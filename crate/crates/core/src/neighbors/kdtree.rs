use crate::matrix::{euclidean_within, FeatureMatrix};

use super::Candidates;

pub const DEFAULT_LEAF_SIZE: usize = 32;

/// Box lower bounds are inflated by this relative slack before pruning, so a
/// node is only skipped when every point in it is certainly farther away.
const PRUNE_SLACK: f64 = 1e-9;

#[inline]
fn beyond(box_sq: f64, radius: f64) -> bool {
    let r = radius * (1.0 + PRUNE_SLACK);
    box_sq > r * r
}

#[derive(Debug, Clone, Copy)]
struct Node {
    start: usize,
    end: usize,
    /// Child node ids; `None` for leaves.
    children: Option<(usize, usize)>,
}

/// Axis-aligned k-d tree over row indices. Points are not copied; queries
/// receive the matrix the tree was built from.
#[derive(Debug)]
pub struct KdTree {
    dim: usize,
    order: Vec<usize>,
    nodes: Vec<Node>,
    /// `2 * dim` values per node: lower corner then upper corner.
    bounds: Vec<f64>,
}

impl KdTree {
    pub fn build(points: &FeatureMatrix, leaf_size: usize) -> Self {
        let leaf_size = leaf_size.max(1);
        let mut tree = KdTree {
            dim: points.dim(),
            order: (0..points.n()).collect(),
            nodes: Vec::new(),
            bounds: Vec::new(),
        };
        tree.build_node(points, 0, points.n(), leaf_size);
        tree
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    fn build_node(&mut self, points: &FeatureMatrix, start: usize, end: usize, leaf_size: usize) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node {
            start,
            end,
            children: None,
        });

        let d = self.dim;
        let mut lo = vec![f64::INFINITY; d];
        let mut hi = vec![f64::NEG_INFINITY; d];
        for &i in &self.order[start..end] {
            for (t, &x) in points.row(i).iter().enumerate() {
                lo[t] = lo[t].min(x);
                hi[t] = hi[t].max(x);
            }
        }
        let (split_dim, spread) = (0..d)
            .map(|t| (t, hi[t] - lo[t]))
            .fold((0, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best });
        self.bounds.extend_from_slice(&lo);
        self.bounds.extend_from_slice(&hi);

        if end - start <= leaf_size || spread <= 0.0 {
            return id;
        }

        let mid = start + (end - start) / 2;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            points.row(a)[split_dim]
                .total_cmp(&points.row(b)[split_dim])
                .then(a.cmp(&b))
        });
        let left = self.build_node(points, start, mid, leaf_size);
        let right = self.build_node(points, mid, end, leaf_size);
        self.nodes[id].children = Some((left, right));
        id
    }

    /// Squared distance from `q` to the bounding box of `node`.
    #[inline]
    fn box_dist_sq(&self, node: usize, q: &[f64]) -> f64 {
        let base = node * 2 * self.dim;
        let lo = &self.bounds[base..base + self.dim];
        let hi = &self.bounds[base + self.dim..base + 2 * self.dim];
        let mut acc = 0.0;
        for t in 0..self.dim {
            let x = q[t];
            let gap = if x < lo[t] {
                lo[t] - x
            } else if x > hi[t] {
                x - hi[t]
            } else {
                0.0
            };
            acc += gap * gap;
        }
        acc
    }

    #[inline]
    fn pruned(&self, node: usize, q: &[f64], radius: f64) -> bool {
        !radius.is_infinite() && beyond(self.box_dist_sq(node, q), radius)
    }

    pub(crate) fn knn(&self, points: &FeatureMatrix, q: &[f64], skip: Option<usize>, cands: &mut Candidates) {
        self.knn_node(0, points, q, skip, cands);
    }

    fn knn_node(&self, node: usize, points: &FeatureMatrix, q: &[f64], skip: Option<usize>, cands: &mut Candidates) {
        let Node { start, end, children } = self.nodes[node];
        match children {
            None => {
                for &i in &self.order[start..end] {
                    if Some(i) == skip {
                        continue;
                    }
                    if let Some(d) = euclidean_within(q, points.row(i), cands.bound()) {
                        cands.offer(d, i);
                    }
                }
            }
            Some((left, right)) => {
                let dl = self.box_dist_sq(left, q);
                let dr = self.box_dist_sq(right, q);
                let (first, second) = if dr < dl { (right, left) } else { (left, right) };
                let (d1, d2) = if dr < dl { (dr, dl) } else { (dl, dr) };
                for (child, box_sq) in [(first, d1), (second, d2)] {
                    if !beyond(box_sq, cands.bound()) {
                        self.knn_node(child, points, q, skip, cands);
                    }
                }
            }
        }
    }

    pub(crate) fn within<F: FnMut(usize, f64)>(&self, points: &FeatureMatrix, q: &[f64], radius: f64, visit: &mut F) {
        if !self.pruned(0, q, radius) {
            self.within_node(0, points, q, radius, visit);
        }
    }

    fn within_node<F: FnMut(usize, f64)>(&self, node: usize, points: &FeatureMatrix, q: &[f64], radius: f64, visit: &mut F) {
        let Node { start, end, children } = self.nodes[node];
        match children {
            None => {
                for &i in &self.order[start..end] {
                    if let Some(d) = euclidean_within(q, points.row(i), radius) {
                        visit(i, d);
                    }
                }
            }
            Some((left, right)) => {
                for child in [left, right] {
                    if !self.pruned(child, q, radius) {
                        self.within_node(child, points, q, radius, visit);
                    }
                }
            }
        }
    }
}
