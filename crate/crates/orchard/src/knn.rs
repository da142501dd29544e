//! Exact nearest-neighbor queries over a static point set (kd-tree).

use nalgebra::Point3;

use crate::error::{OrchardError, Result};

/// Balanced kd-tree over a fixed point set. Queries are exact; ties are
/// broken by the lowest point index.
pub struct KdTree {
    points: Vec<Point3<f64>>,
    // Implicit tree: nodes[i] is a point index; children at 2i+1 / 2i+2 style
    // layout is wasteful for median splits, so store explicit node records.
    nodes: Vec<Node>,
    root: Option<usize>,
}

struct Node {
    point: usize,
    axis: usize,
    left: Option<usize>,
    right: Option<usize>,
}

impl KdTree {
    pub fn build(points: &[Point3<f64>]) -> Self {
        let mut idx: Vec<usize> = (0..points.len()).collect();
        let mut nodes = Vec::with_capacity(points.len());
        let root = Self::build_rec(points, &mut idx[..], 0, &mut nodes);
        Self {
            points: points.to_vec(),
            nodes,
            root,
        }
    }

    fn build_rec(
        points: &[Point3<f64>],
        idx: &mut [usize],
        depth: usize,
        nodes: &mut Vec<Node>,
    ) -> Option<usize> {
        if idx.is_empty() {
            return None;
        }
        let axis = depth % 3;
        let mid = idx.len() / 2;
        idx.select_nth_unstable_by(mid, |&a, &b| {
            points[a][axis]
                .partial_cmp(&points[b][axis])
                .unwrap()
                .then(a.cmp(&b))
        });
        let point = idx[mid];
        let node_id = nodes.len();
        nodes.push(Node {
            point,
            axis,
            left: None,
            right: None,
        });
        let (lo, rest) = idx.split_at_mut(mid);
        let hi = &mut rest[1..];
        let left = Self::build_rec(points, lo, depth + 1, nodes);
        let right = Self::build_rec(points, hi, depth + 1, nodes);
        nodes[node_id].left = left;
        nodes[node_id].right = right;
        Some(node_id)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Exact nearest neighbor: (point index, distance).
    pub fn nearest(&self, query: &Point3<f64>) -> Result<(usize, f64)> {
        let root = self.root.ok_or(OrchardError::EmptyInput("nearest_point"))?;
        let mut best = (usize::MAX, f64::INFINITY);
        self.search(root, query, &mut best);
        Ok((best.0, best.1.sqrt()))
    }

    fn search(&self, node_id: usize, query: &Point3<f64>, best: &mut (usize, f64)) {
        let node = &self.nodes[node_id];
        let p = &self.points[node.point];
        let d2 = (p - query).norm_squared();
        if d2 < best.1 || (d2 == best.1 && node.point < best.0) {
            *best = (node.point, d2);
        }
        let diff = query[node.axis] - p[node.axis];
        let (near, far) = if diff < 0.0 {
            (node.left, node.right)
        } else {
            (node.right, node.left)
        };
        if let Some(n) = near {
            self.search(n, query, best);
        }
        if let Some(f) = far {
            // Must also descend the far side on exact ties so that the
            // lowest-index tie-break is honored.
            if diff * diff <= best.1 {
                self.search(f, query, best);
            }
        }
    }

    /// Indices of the k nearest points, closest first.
    pub fn k_nearest(&self, query: &Point3<f64>, k: usize) -> Vec<(usize, f64)> {
        if k == 0 || self.points.is_empty() {
            return Vec::new();
        }
        // Bounded max-heap on (distance^2, index).
        let mut heap: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
        fn worst(heap: &[(f64, usize)]) -> f64 {
            heap.iter().map(|e| e.0).fold(f64::NEG_INFINITY, f64::max)
        }
        fn push(heap: &mut Vec<(f64, usize)>, k: usize, item: (f64, usize)) {
            heap.push(item);
            if heap.len() > k {
                let (wi, _) = heap
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                    .map(|(i, v)| (i, *v))
                    .unwrap();
                heap.swap_remove(wi);
            }
        }
        fn search(
            tree: &KdTree,
            node_id: usize,
            query: &Point3<f64>,
            k: usize,
            heap: &mut Vec<(f64, usize)>,
        ) {
            let node = &tree.nodes[node_id];
            let p = &tree.points[node.point];
            push(heap, k, ((p - query).norm_squared(), node.point));
            let diff = query[node.axis] - p[node.axis];
            let (near, far) = if diff < 0.0 {
                (node.left, node.right)
            } else {
                (node.right, node.left)
            };
            if let Some(n) = near {
                search(tree, n, query, k, heap);
            }
            if let Some(f) = far {
                if heap.len() < k || diff * diff <= worst(heap) {
                    search(tree, f, query, k, heap);
                }
            }
        }
        search(self, self.root.unwrap(), query, k, &mut heap);
        heap.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        heap.into_iter().map(|(d2, i)| (i, d2.sqrt())).collect()
    }
}

/// Exact nearest neighbor over a raw point slice, building a throwaway index.
pub fn nearest_point(points: &[Point3<f64>], query: &Point3<f64>) -> Result<(usize, f64)> {
    if points.is_empty() {
        return Err(OrchardError::EmptyInput("nearest_point"));
    }
    KdTree::build(points).nearest(query)
}
