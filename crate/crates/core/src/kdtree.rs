//! Static kd-tree over a [`PointCloud`] used to accelerate nearest-neighbour
//! queries. Squared distances are computed with the same kernel as the
//! brute-force path and pruning only discards points that are strictly
//! farther than the current best, so results are bitwise identical to it.

use crate::geometry::{squared_distance, PointCloud};

const LEAF_SIZE: usize = 8;

struct Node {
    lo: usize,
    hi: usize,
    /// Index into `order` of the splitting point; `None` for leaves.
    pivot: Option<usize>,
    axis: usize,
    children: [Option<usize>; 2],
}

pub(crate) struct KdTree<'a> {
    cloud: &'a PointCloud,
    order: Vec<usize>,
    nodes: Vec<Node>,
    /// Per node: `dim` lower corners followed by `dim` upper corners.
    boxes: Vec<f64>,
}

impl<'a> KdTree<'a> {
    pub(crate) fn build(cloud: &'a PointCloud) -> Self {
        let mut tree = Self {
            cloud,
            order: (0..cloud.len()).collect(),
            nodes: Vec::new(),
            boxes: Vec::new(),
        };
        tree.split(0, cloud.len(), 0);
        tree
    }

    fn split(&mut self, lo: usize, hi: usize, depth: usize) -> usize {
        let dim = self.cloud.dim();
        let id = self.nodes.len();
        let mut lower = vec![f64::INFINITY; dim];
        let mut upper = vec![f64::NEG_INFINITY; dim];
        for &i in &self.order[lo..hi] {
            for (k, &x) in self.cloud.point(i).iter().enumerate() {
                lower[k] = lower[k].min(x);
                upper[k] = upper[k].max(x);
            }
        }
        self.boxes.extend_from_slice(&lower);
        self.boxes.extend_from_slice(&upper);
        let axis = depth % dim;
        self.nodes.push(Node {
            lo,
            hi,
            pivot: None,
            axis,
            children: [None, None],
        });
        if hi - lo <= LEAF_SIZE {
            return id;
        }
        let mid = lo + (hi - lo) / 2;
        let cloud = self.cloud;
        self.order[lo..hi].select_nth_unstable_by(mid - lo, |&a, &b| {
            cloud.point(a)[axis].total_cmp(&cloud.point(b)[axis])
        });
        let left = self.split(lo, mid, depth + 1);
        let right = (mid + 1 < hi).then(|| self.split(mid + 1, hi, depth + 1));
        let node = &mut self.nodes[id];
        node.pivot = Some(mid);
        node.children = [Some(left), right];
        id
    }

    /// Lower bound on the squared distance from `query` to any point in the
    /// node, computed so that it never exceeds the kernel's value for any of
    /// those points.
    fn box_distance(&self, node: usize, query: &[f64]) -> f64 {
        let dim = query.len();
        let b = &self.boxes[2 * dim * node..2 * dim * (node + 1)];
        let (lower, upper) = b.split_at(dim);
        query
            .iter()
            .zip(lower.iter().zip(upper))
            .map(|(&q, (&l, &u))| {
                let gap = if q < l {
                    l - q
                } else if q > u {
                    q - u
                } else {
                    0.0
                };
                gap * gap
            })
            .sum()
    }

    /// Smallest squared distance from `query` to the tree if it is below
    /// `bound`; otherwise some value `>= bound` (possibly `bound` itself).
    pub(crate) fn nearest_squared_below(&self, query: &[f64], bound: f64) -> f64 {
        let mut best = bound;
        self.search(0, query, &mut best);
        best
    }

    pub(crate) fn nearest_squared(&self, query: &[f64]) -> f64 {
        self.nearest_squared_below(query, f64::INFINITY)
    }

    fn search(&self, id: usize, query: &[f64], best: &mut f64) {
        if self.box_distance(id, query) > *best {
            return;
        }
        let node = &self.nodes[id];
        let Some(mid) = node.pivot else {
            for &idx in &self.order[node.lo..node.hi] {
                let d = squared_distance(query, self.cloud.point(idx));
                if d < *best {
                    *best = d;
                }
            }
            return;
        };
        let pivot = self.cloud.point(self.order[mid]);
        let d = squared_distance(query, pivot);
        if d < *best {
            *best = d;
        }
        let [left, right] = node.children;
        let (near, far) = if query[node.axis] <= pivot[node.axis] {
            (left, right)
        } else {
            (right, left)
        };
        if let Some(n) = near {
            self.search(n, query, best);
        }
        if let Some(f) = far {
            self.search(f, query, best);
        }
    }
}
