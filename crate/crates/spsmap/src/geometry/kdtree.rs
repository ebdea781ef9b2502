use nalgebra::Vector3;
use std::cmp::Ordering;
use std::collections::BinaryHeap;

/// Static 3D kd-tree over a borrowed point slice. Queries return indices
/// into the original slice; ties in distance break toward the lower index.
pub struct KdTree {
    // node layout: median split, recursing over index ranges
    indices: Vec<usize>,
    nodes: Vec<Node>,
    root: Option<usize>,
}

struct Node {
    index: usize,
    axis: usize,
    left: Option<usize>,
    right: Option<usize>,
}

#[derive(PartialEq)]
struct Candidate {
    dist2: f64,
    index: usize,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist2
            .partial_cmp(&other.dist2)
            .unwrap()
            .then(self.index.cmp(&other.index))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl KdTree {
    pub fn build(points: &[Vector3<f64>]) -> Self {
        let mut indices: Vec<usize> = (0..points.len()).collect();
        let mut nodes = Vec::with_capacity(points.len());
        let n = points.len();
        let root = Self::build_range(points, &mut indices, 0, n, 0, &mut nodes);
        Self {
            indices,
            nodes,
            root,
        }
    }

    fn build_range(
        points: &[Vector3<f64>],
        indices: &mut [usize],
        lo: usize,
        hi: usize,
        depth: usize,
        nodes: &mut Vec<Node>,
    ) -> Option<usize> {
        if lo >= hi {
            return None;
        }
        let axis = depth % 3;
        let mid = (lo + hi) / 2;
        indices[lo..hi].select_nth_unstable_by(mid - lo, |&a, &b| {
            points[a][axis]
                .partial_cmp(&points[b][axis])
                .unwrap()
                .then(a.cmp(&b))
        });
        let index = indices[mid];
        let slot = nodes.len();
        nodes.push(Node {
            index,
            axis,
            left: None,
            right: None,
        });
        let left = Self::build_range(points, indices, lo, mid, depth + 1, nodes);
        let right = Self::build_range(points, indices, mid + 1, hi, depth + 1, nodes);
        nodes[slot].left = left;
        nodes[slot].right = right;
        Some(slot)
    }

    /// Indices of the `k` nearest points to `query`, closest first.
    pub fn knn(&self, points: &[Vector3<f64>], query: &Vector3<f64>, k: usize) -> Vec<usize> {
        let k = k.min(self.indices.len());
        if k == 0 {
            return Vec::new();
        }
        let mut heap: BinaryHeap<Candidate> = BinaryHeap::with_capacity(k + 1);
        if let Some(root) = self.root {
            self.search(points, root, query, k, &mut heap);
        }
        let mut out: Vec<Candidate> = heap.into_vec();
        out.sort();
        out.into_iter().map(|c| c.index).collect()
    }

    fn search(
        &self,
        points: &[Vector3<f64>],
        node_id: usize,
        query: &Vector3<f64>,
        k: usize,
        heap: &mut BinaryHeap<Candidate>,
    ) {
        let node = &self.nodes[node_id];
        let p = &points[node.index];
        let dist2 = (p - query).norm_squared();
        let cand = Candidate {
            dist2,
            index: node.index,
        };
        if heap.len() < k {
            heap.push(cand);
        } else if cand < *heap.peek().unwrap() {
            heap.pop();
            heap.push(cand);
        }

        let delta = query[node.axis] - p[node.axis];
        let (near, far) = if delta <= 0.0 {
            (node.left, node.right)
        } else {
            (node.right, node.left)
        };
        if let Some(n) = near {
            self.search(points, n, query, k, heap);
        }
        let worst = heap.peek().unwrap().dist2;
        if let Some(f) = far {
            if heap.len() < k || delta * delta <= worst {
                self.search(points, f, query, k, heap);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn brute_knn(points: &[Vector3<f64>], query: &Vector3<f64>, k: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..points.len()).collect();
        idx.sort_by(|&a, &b| {
            let da = (points[a] - query).norm_squared();
            let db = (points[b] - query).norm_squared();
            da.partial_cmp(&db).unwrap().then(a.cmp(&b))
        });
        idx.truncate(k);
        idx
    }

    #[test]
    fn matches_brute_force_on_random_sets() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let points: Vec<Vector3<f64>> = (0..1000)
            .map(|_| Vector3::new(rng.gen(), rng.gen(), rng.gen()))
            .collect();
        let tree = KdTree::build(&points);
        for _ in 0..50 {
            let q = Vector3::new(rng.gen(), rng.gen(), rng.gen());
            assert_eq!(tree.knn(&points, &q, 10), brute_knn(&points, &q, 10));
        }
    }

    #[test]
    fn handles_duplicate_points_with_index_tiebreak() {
        let points = vec![Vector3::zeros(); 5];
        let tree = KdTree::build(&points);
        assert_eq!(tree.knn(&points, &Vector3::zeros(), 3), vec![0, 1, 2]);
    }
}
