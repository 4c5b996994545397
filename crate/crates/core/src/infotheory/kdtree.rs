//! Exact k-d tree for k-nearest-neighbor queries in any runtime dimension.
//!
//! Points are stored row-major; leaves hold small buckets. Queries return
//! exact k-th neighbor distances (Euclidean), excluding the query point by
//! index (coincident points at other indices do count as neighbors).

use std::collections::BinaryHeap;

const BUCKET: usize = 16;

enum Node {
    /// Left child is the next node in `nodes`; `right` is an index.
    Split {
        dim: usize,
        value: f64,
        right: usize,
    },
    /// Range into `perm`.
    Leaf { start: usize, end: usize },
}

pub struct KdTree {
    dims: usize,
    /// n x dims, row-major.
    points: Vec<f64>,
    perm: Vec<usize>,
    nodes: Vec<Node>,
}

impl KdTree {
    pub fn build(points: Vec<f64>, n: usize, dims: usize) -> KdTree {
        assert_eq!(points.len(), n * dims);
        assert!(dims >= 1);
        let mut tree = KdTree {
            dims,
            points,
            perm: (0..n).collect(),
            nodes: Vec::new(),
        };
        if n > 0 {
            tree.split_range(0, n);
        }
        tree
    }

    fn coord(&self, point: usize, dim: usize) -> f64 {
        self.points[point * self.dims + dim]
    }

    fn split_range(&mut self, start: usize, end: usize) {
        if end - start <= BUCKET {
            self.nodes.push(Node::Leaf { start, end });
            return;
        }
        // Split on the dimension with the largest spread.
        let mut best_dim = 0;
        let mut best_spread = -1.0;
        for dim in 0..self.dims {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for &p in &self.perm[start..end] {
                let v = self.coord(p, dim);
                lo = lo.min(v);
                hi = hi.max(v);
            }
            if hi - lo > best_spread {
                best_spread = hi - lo;
                best_dim = dim;
            }
        }
        if best_spread <= 0.0 {
            // All bucket points identical: no split can make progress.
            self.nodes.push(Node::Leaf { start, end });
            return;
        }
        let mid = (start + end) / 2;
        let (dims, points) = (self.dims, &self.points);
        self.perm[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            points[a * dims + best_dim]
                .total_cmp(&points[b * dims + best_dim])
        });
        let split_value = self.coord(self.perm[mid], best_dim);

        let node_idx = self.nodes.len();
        self.nodes.push(Node::Split {
            dim: best_dim,
            value: split_value,
            right: usize::MAX,
        });
        self.split_range(start, mid);
        let right_idx = self.nodes.len();
        let Node::Split { right, .. } = &mut self.nodes[node_idx] else {
            unreachable!()
        };
        *right = right_idx;
        self.split_range(mid, end);
    }

    /// Euclidean distance from point `query` to its `k`-th nearest neighbor
    /// among all other points. Returns `None` when fewer than `k` other
    /// points exist.
    pub fn kth_neighbor_distance(&self, query: usize, k: usize) -> Option<f64> {
        let n = self.perm.len();
        if k == 0 || n <= k {
            return None;
        }
        // Max-heap of the k closest squared distances seen so far.
        let mut heap: BinaryHeap<OrdF64> = BinaryHeap::with_capacity(k + 1);
        self.search(0, query, k, &mut heap);
        debug_assert_eq!(heap.len(), k);
        heap.peek().map(|d| d.0.sqrt())
    }

    fn search(&self, node: usize, query: usize, k: usize, heap: &mut BinaryHeap<OrdF64>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &p in &self.perm[start..end] {
                    if p == query {
                        continue;
                    }
                    let mut d2 = 0.0;
                    for dim in 0..self.dims {
                        let diff = self.coord(p, dim) - self.coord(query, dim);
                        d2 += diff * diff;
                    }
                    if heap.len() < k {
                        heap.push(OrdF64(d2));
                    } else if d2 < heap.peek().unwrap().0 {
                        heap.push(OrdF64(d2));
                        heap.pop();
                    }
                }
            }
            Node::Split { dim, value, right } => {
                let q = self.coord(query, dim);
                let (near, far) = if q <= value {
                    (node + 1, right)
                } else {
                    (right, node + 1)
                };
                self.search(near, query, k, heap);
                let margin = q - value;
                let cross = margin * margin;
                if heap.len() < k || cross < heap.peek().unwrap().0 {
                    self.search(far, query, k, heap);
                }
            }
        }
    }
}

/// Total order on finite f64 (distances are never NaN here).
#[derive(PartialEq)]
struct OrdF64(f64);

impl Eq for OrdF64 {}

impl PartialOrd for OrdF64 {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OrdF64 {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;

    fn brute_kth(points: &[f64], n: usize, d: usize, query: usize, k: usize) -> f64 {
        let mut dists: Vec<f64> = (0..n)
            .filter(|&j| j != query)
            .map(|j| {
                (0..d)
                    .map(|t| (points[j * d + t] - points[query * d + t]).powi(2))
                    .sum::<f64>()
                    .sqrt()
            })
            .collect();
        dists.sort_by(f64::total_cmp);
        dists[k - 1]
    }

    #[test]
    fn matches_brute_force_across_dims() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for &d in &[1usize, 2, 3, 7] {
            let n = 300;
            let points: Vec<f64> = (0..n * d).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let tree = KdTree::build(points.clone(), n, d);
            for query in (0..n).step_by(17) {
                for k in [1, 3, 5] {
                    let got = tree.kth_neighbor_distance(query, k).unwrap();
                    let want = brute_kth(&points, n, d, query, k);
                    assert!(
                        (got - want).abs() < 1e-12,
                        "d={} q={} k={}: {} vs {}",
                        d,
                        query,
                        k,
                        got,
                        want
                    );
                }
            }
        }
    }

    #[test]
    fn duplicates_count_as_neighbors() {
        // Three coincident points: each one's nearest neighbor distance is 0.
        let points = vec![1.0, 1.0, 1.0, 5.0];
        let tree = KdTree::build(points, 4, 1);
        assert_eq!(tree.kth_neighbor_distance(0, 1), Some(0.0));
        assert_eq!(tree.kth_neighbor_distance(0, 2), Some(0.0));
        assert_eq!(tree.kth_neighbor_distance(0, 3), Some(4.0));
    }

    #[test]
    fn too_few_points_is_none() {
        let tree = KdTree::build(vec![0.0, 1.0], 2, 1);
        assert_eq!(tree.kth_neighbor_distance(0, 2), None);
    }
}
