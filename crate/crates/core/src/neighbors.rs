//! Exact and (1+ε)-approximate k-nearest-neighbor search.
//!
//! A [`NeighborIndex`] is a kd-tree over the rows of an encoded matrix.
//! Queries return the `k` nearest rows under Euclidean distance, sorted by
//! non-decreasing distance with exact ties broken by lower row index. With
//! `epsilon > 0` the search prunes any subtree whose best possible distance,
//! inflated by `(1+ε)`, cannot beat the current k-th candidate; every returned
//! distance is then at most `(1+ε)` times the exact distance of the same rank.
//!
//! Free functions [`build_index`] and [`knn_query`] mirror the two methods.

use thiserror::Error;

use crate::dataset::EncodedMatrix;

#[derive(Debug, Error)]
pub enum NeighborError {
    #[error("empty matrix: cannot index {n} rows x {m} columns")]
    EmptyMatrix { n: usize, m: usize },
    #[error("approximation factor epsilon must be finite and >= 0, got {0}")]
    InvalidEpsilon(f64),
    #[error("k = {k} out of range: must be between 1 and {limit}")]
    KOutOfRange { k: usize, limit: usize },
    #[error("query has {got} coordinates, index expects {expected}")]
    DimensionMismatch { got: usize, expected: usize },
    #[error("query contains a non-finite coordinate")]
    NonFiniteQuery,
}

/// One query result: original row index and Euclidean distance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Neighbor {
    pub row: usize,
    pub distance: f64,
}

const LEAF_SIZE: usize = 24;

enum Node {
    Split {
        dim: u32,
        value: f64,
        left: u32,
        right: u32,
    },
    Leaf {
        start: u32,
        end: u32,
    },
}

/// kd-tree over the rows of an encoded matrix.
pub struct NeighborIndex {
    n: usize,
    m: usize,
    epsilon: f64,
    /// (1+ε)² — pruning works on squared distances.
    eps_factor2: f64,
    nodes: Vec<Node>,
    /// Points reordered leaf-contiguously, row-major.
    pts: Vec<f64>,
    /// Position in `pts` → original row index.
    rows: Vec<u32>,
}

impl NeighborIndex {
    /// Builds an index over the rows of `space`.
    pub fn build(space: &EncodedMatrix, epsilon: f64) -> Result<Self, NeighborError> {
        let (n, m) = (space.n(), space.m());
        if n == 0 || m == 0 {
            return Err(NeighborError::EmptyMatrix { n, m });
        }
        if !epsilon.is_finite() || epsilon < 0.0 {
            return Err(NeighborError::InvalidEpsilon(epsilon));
        }
        let values = space.values();
        let mut order: Vec<u32> = (0..n as u32).collect();
        let mut index = NeighborIndex {
            n,
            m,
            epsilon,
            eps_factor2: (1.0 + epsilon) * (1.0 + epsilon),
            nodes: Vec::with_capacity(2 * n / LEAF_SIZE + 1),
            pts: Vec::with_capacity(n * m),
            rows: Vec::with_capacity(n),
        };
        index.build_node(values, &mut order);
        Ok(index)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    fn build_node(&mut self, values: &[f64], order: &mut [u32]) -> u32 {
        let m = self.m;
        let len = order.len();
        let coord = |row: u32, dim: usize| values[row as usize * m + dim];

        let mut split = None;
        if len > LEAF_SIZE {
            // Split on the widest dimension; identical points make a leaf.
            let mut best_dim = 0usize;
            let mut best_spread = 0.0f64;
            for dim in 0..m {
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                for &row in order.iter() {
                    let v = coord(row, dim);
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
                let spread = hi - lo;
                if spread > best_spread {
                    best_spread = spread;
                    best_dim = dim;
                }
            }
            if best_spread > 0.0 {
                split = Some(best_dim);
            }
        }

        match split {
            None => {
                let start = self.rows.len() as u32;
                for &row in order.iter() {
                    self.rows.push(row);
                    let base = row as usize * m;
                    self.pts.extend_from_slice(&values[base..base + m]);
                }
                let node = Node::Leaf {
                    start,
                    end: self.rows.len() as u32,
                };
                self.nodes.push(node);
                (self.nodes.len() - 1) as u32
            }
            Some(dim) => {
                let mid = len / 2;
                order.select_nth_unstable_by(mid, |&a, &b| {
                    coord(a, dim)
                        .total_cmp(&coord(b, dim))
                        .then_with(|| a.cmp(&b))
                });
                let value = coord(order[mid], dim);
                let here = self.nodes.len() as u32;
                self.nodes.push(Node::Leaf { start: 0, end: 0 }); // placeholder
                let (lo, hi) = order.split_at_mut(mid);
                let left = self.build_node(values, lo);
                let right = self.build_node(values, hi);
                self.nodes[here as usize] = Node::Split {
                    dim: dim as u32,
                    value,
                    left,
                    right,
                };
                here
            }
        }
    }

    /// Returns the `k` nearest rows to `query`, sorted by non-decreasing
    /// distance, exact ties by lower row index.
    ///
    /// With `exclude_self` the single lowest-index row at distance exactly
    /// zero is removed from consideration (use this when the query is itself a
    /// data row); `k` is then limited to `n − 1`.
    pub fn knn(
        &self,
        query: &[f64],
        k: usize,
        exclude_self: bool,
    ) -> Result<Vec<Neighbor>, NeighborError> {
        if query.len() != self.m {
            return Err(NeighborError::DimensionMismatch {
                got: query.len(),
                expected: self.m,
            });
        }
        if query.iter().any(|v| !v.is_finite()) {
            return Err(NeighborError::NonFiniteQuery);
        }
        let limit = self.n - usize::from(exclude_self);
        if k == 0 || k > limit {
            return Err(NeighborError::KOutOfRange { k, limit });
        }

        let target = k + usize::from(exclude_self);
        let mut heap = CandidateHeap::with_capacity(target);
        let mut offsets = vec![0.0f64; self.m];
        self.search(0, query, &mut heap, &mut offsets, 0.0);

        let mut found = heap.into_sorted();
        if exclude_self {
            if let Some(pos) = found.iter().position(|c| c.0 == 0.0) {
                // Sorted by (distance, row): the first zero has the lowest row.
                found.remove(pos);
            }
        }
        found.truncate(k);
        Ok(found
            .into_iter()
            .map(|(d2, row)| Neighbor {
                row: row as usize,
                distance: d2.sqrt(),
            })
            .collect())
    }

    fn search(
        &self,
        node: u32,
        query: &[f64],
        heap: &mut CandidateHeap,
        offsets: &mut [f64],
        bound2: f64,
    ) {
        match &self.nodes[node as usize] {
            Node::Leaf { start, end } => {
                let m = self.m;
                let slice = &self.pts[*start as usize * m..*end as usize * m];
                for (i, p) in slice.chunks_exact(m).enumerate() {
                    let row = self.rows[*start as usize + i];
                    let cap = heap.cap_d2();
                    if let Some(d2) = dist2_capped(query, p, cap) {
                        heap.offer(d2, row);
                    }
                }
            }
            Node::Split {
                dim,
                value,
                left,
                right,
            } => {
                let dim = *dim as usize;
                let diff = query[dim] - value;
                let (near, far) = if diff <= 0.0 {
                    (*left, *right)
                } else {
                    (*right, *left)
                };
                self.search(near, query, heap, offsets, bound2);
                let old = offsets[dim];
                let far_bound2 = bound2 - old + diff * diff;
                if !heap.prunes(far_bound2 * self.eps_factor2) {
                    offsets[dim] = diff * diff;
                    self.search(far, query, heap, offsets, far_bound2);
                    offsets[dim] = old;
                }
            }
        }
    }
}

/// Exact k nearest among `rows` only, by direct scan — same ordering and
/// tie-break contract as [`NeighborIndex::knn`]. Covers filtered queries that
/// a precomputed neighbor list cannot resolve.
pub fn brute_knn_rows(
    space: &EncodedMatrix,
    query: &[f64],
    k: usize,
    rows: &[u32],
) -> Result<Vec<Neighbor>, NeighborError> {
    if query.len() != space.m() {
        return Err(NeighborError::DimensionMismatch {
            got: query.len(),
            expected: space.m(),
        });
    }
    if query.iter().any(|v| !v.is_finite()) {
        return Err(NeighborError::NonFiniteQuery);
    }
    if k == 0 || k > rows.len() {
        return Err(NeighborError::KOutOfRange {
            k,
            limit: rows.len(),
        });
    }
    let mut heap = CandidateHeap::with_capacity(k);
    for &row in rows {
        let cap = heap.cap_d2();
        if let Some(d2) = dist2_capped(query, space.point(row as usize), cap) {
            heap.offer(d2, row);
        }
    }
    Ok(heap
        .into_sorted()
        .into_iter()
        .map(|(d2, row)| Neighbor {
            row: row as usize,
            distance: d2.sqrt(),
        })
        .collect())
}

/// Squared distance with early exit once the partial sum exceeds `cap`.
/// Equality with `cap` continues: a tie can still win by row index.
#[inline]
fn dist2_capped(a: &[f64], b: &[f64], cap: f64) -> Option<f64> {
    let m = a.len();
    let mut acc = 0.0f64;
    let mut i = 0;
    while i + 4 <= m {
        let d0 = a[i] - b[i];
        let d1 = a[i + 1] - b[i + 1];
        let d2 = a[i + 2] - b[i + 2];
        let d3 = a[i + 3] - b[i + 3];
        acc += d0 * d0 + d1 * d1 + d2 * d2 + d3 * d3;
        if acc > cap {
            return None;
        }
        i += 4;
    }
    while i < m {
        let d = a[i] - b[i];
        acc += d * d;
        i += 1;
    }
    if acc > cap {
        None
    } else {
        Some(acc)
    }
}

/// Fixed-capacity max-heap of (squared distance, row) candidates, worst first.
/// "Worse" is lexicographically larger (d², row), which implements the
/// lower-row-index tie-break.
struct CandidateHeap {
    cap: usize,
    items: Vec<(f64, u32)>,
}

impl CandidateHeap {
    fn with_capacity(cap: usize) -> Self {
        CandidateHeap {
            cap,
            items: Vec::with_capacity(cap),
        }
    }

    #[inline]
    fn full(&self) -> bool {
        self.items.len() == self.cap
    }

    /// Early-exit cap for distance evaluation: the worst kept d² once full.
    #[inline]
    fn cap_d2(&self) -> f64 {
        if self.full() {
            self.items[0].0
        } else {
            f64::INFINITY
        }
    }

    /// True when a subtree with best possible squared distance `bound2`
    /// (already ε-inflated) cannot contain a better candidate.
    #[inline]
    fn prunes(&self, bound2: f64) -> bool {
        self.full() && bound2 > self.items[0].0
    }

    #[inline]
    fn offer(&mut self, d2: f64, row: u32) {
        if !self.full() {
            self.items.push((d2, row));
            self.sift_up(self.items.len() - 1);
        } else {
            let worst = self.items[0];
            if (d2, row) < worst {
                self.items[0] = (d2, row);
                self.sift_down();
            }
        }
    }

    fn sift_up(&mut self, mut at: usize) {
        while at > 0 {
            let parent = (at - 1) / 2;
            if self.items[at] > self.items[parent] {
                self.items.swap(at, parent);
                at = parent;
            } else {
                break;
            }
        }
    }

    fn sift_down(&mut self) {
        let len = self.items.len();
        let mut at = 0;
        loop {
            let l = 2 * at + 1;
            let r = l + 1;
            let mut largest = at;
            if l < len && self.items[l] > self.items[largest] {
                largest = l;
            }
            if r < len && self.items[r] > self.items[largest] {
                largest = r;
            }
            if largest == at {
                break;
            }
            self.items.swap(at, largest);
            at = largest;
        }
    }

    fn into_sorted(self) -> Vec<(f64, u32)> {
        let mut items = self.items;
        items.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
        items
    }
}

/// Builds a [`NeighborIndex`] over the rows of `space`.
pub fn build_index(space: &EncodedMatrix, epsilon: f64) -> Result<NeighborIndex, NeighborError> {
    NeighborIndex::build(space, epsilon)
}

/// Queries `index` for the `k` nearest rows to `query`.
pub fn knn_query(
    index: &NeighborIndex,
    query: &[f64],
    k: usize,
    exclude_self: bool,
) -> Result<Vec<Neighbor>, NeighborError> {
    index.knn(query, k, exclude_self)
}
