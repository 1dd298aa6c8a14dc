//! Balanced kd-tree over point positions.
//!
//! The tree is built once by recursive median splits (widest-extent axis,
//! ties on coordinates broken by point index) and is immutable afterwards,
//! so it can be shared freely across threads. Queries return exactly
//! `min(k, N-1)` neighbors in nondecreasing distance order, excluding the
//! query point itself when an exclusion index is given.

use crate::error::{Error, Result};
use crate::geometry::Vec3;

/// One neighbor hit: squared distance plus the point index.
///
/// Ordering is by `(dist_sq, index)` so equidistant results are stable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub dist_sq: f64,
    pub index: usize,
}

impl Neighbor {
    #[inline]
    fn key(&self) -> (f64, usize) {
        (self.dist_sq, self.index)
    }

    #[inline]
    fn less(&self, other: &Neighbor) -> bool {
        let (da, ia) = self.key();
        let (db, ib) = other.key();
        da.total_cmp(&db).then(ia.cmp(&ib)).is_lt()
    }
}

#[derive(Debug, Clone, Copy)]
enum Node {
    /// Interior split: axis, coordinate, index of the right child node.
    /// The left child is the node immediately after this one.
    Split {
        axis: u8,
        coord: f64,
        right: u32,
    },
    /// Contiguous run of point slots in `order`.
    Leaf {
        start: u32,
        end: u32,
    },
}

/// Immutable spatial index over a fixed set of positions.
pub struct SpatialIndex {
    positions: Vec<Vec3>,
    order: Vec<u32>,
    nodes: Vec<Node>,
}

const LEAF_SIZE: usize = 16;

impl SpatialIndex {
    /// Build an index over `positions`. Errors on empty or non-finite input.
    pub fn build(positions: &[Vec3]) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::EmptyCloud);
        }
        if let Some(row) = positions.iter().position(|p| !p.is_finite()) {
            return Err(Error::NonFiniteCoordinate { row });
        }
        let mut order: Vec<u32> = (0..positions.len() as u32).collect();
        let mut nodes = Vec::new();
        build_node(positions, &mut order, 0, positions.len(), &mut nodes);
        Ok(SpatialIndex {
            positions: positions.to_vec(),
            order,
            nodes,
        })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn position(&self, index: usize) -> Vec3 {
        self.positions[index]
    }

    /// K nearest neighbors of the cloud point `index`, never including the
    /// point itself. Returns `min(k, N-1)` hits sorted by distance.
    pub fn knn_of_point(&self, index: usize, k: usize) -> Vec<Neighbor> {
        self.knn(self.positions[index], k, Some(index))
    }

    /// K nearest neighbors of an arbitrary query position. `exclude` drops
    /// one point index from consideration.
    pub fn knn(&self, query: Vec3, k: usize, exclude: Option<usize>) -> Vec<Neighbor> {
        let capacity = match exclude {
            Some(_) => k.min(self.len().saturating_sub(1)),
            None => k.min(self.len()),
        };
        if capacity == 0 {
            return Vec::new();
        }
        let mut heap = BoundedHeap::new(capacity);
        self.search(0, query, exclude, &mut heap);
        heap.into_sorted()
    }

    fn search(&self, node: usize, query: Vec3, exclude: Option<usize>, heap: &mut BoundedHeap) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &idx in &self.order[start as usize..end as usize] {
                    let idx = idx as usize;
                    if exclude == Some(idx) {
                        continue;
                    }
                    let d2 = (self.positions[idx] - query).norm_squared();
                    heap.offer(Neighbor {
                        dist_sq: d2,
                        index: idx,
                    });
                }
            }
            Node::Split { axis, coord, right } => {
                let delta = query.component(axis as usize) - coord;
                let (near, far) = if delta <= 0.0 {
                    (node + 1, right as usize)
                } else {
                    (right as usize, node + 1)
                };
                self.search(near, query, exclude, heap);
                if !heap.full() || delta * delta <= heap.worst_dist() {
                    self.search(far, query, exclude, heap);
                }
            }
        }
    }
}

fn build_node(
    positions: &[Vec3],
    order: &mut [u32],
    start: usize,
    end: usize,
    nodes: &mut Vec<Node>,
) -> usize {
    let id = nodes.len();
    let slice = &mut order[start..end];
    if slice.len() <= LEAF_SIZE {
        nodes.push(Node::Leaf {
            start: start as u32,
            end: end as u32,
        });
        return id;
    }

    let mut lo = Vec3::splat(f64::INFINITY);
    let mut hi = Vec3::splat(f64::NEG_INFINITY);
    for &i in slice.iter() {
        let p = positions[i as usize];
        lo = lo.min_by_component(p);
        hi = hi.max_by_component(p);
    }
    let extent = hi - lo;
    let axis = if extent.x >= extent.y && extent.x >= extent.z {
        0u8
    } else if extent.y >= extent.z {
        1
    } else {
        2
    };

    let mid = slice.len() / 2;
    slice.select_nth_unstable_by(mid, |&a, &b| {
        positions[a as usize]
            .component(axis as usize)
            .total_cmp(&positions[b as usize].component(axis as usize))
            .then(a.cmp(&b))
    });
    let coord = positions[slice[mid] as usize].component(axis as usize);

    nodes.push(Node::Split {
        axis,
        coord,
        right: 0,
    });
    build_node(positions, order, start, start + mid, nodes);
    let right = build_node(positions, order, start + mid, end, nodes);
    if let Node::Split { right: slot, .. } = &mut nodes[id] {
        *slot = right as u32;
    }
    id
}

/// Fixed-capacity max-heap keeping the k best neighbors seen so far.
struct BoundedHeap {
    items: Vec<Neighbor>,
    capacity: usize,
}

impl BoundedHeap {
    fn new(capacity: usize) -> Self {
        BoundedHeap {
            items: Vec::with_capacity(capacity),
            capacity,
        }
    }

    fn full(&self) -> bool {
        self.items.len() == self.capacity
    }

    fn worst_dist(&self) -> f64 {
        self.items[0].dist_sq
    }

    fn offer(&mut self, n: Neighbor) {
        if self.items.len() < self.capacity {
            self.items.push(n);
            self.sift_up(self.items.len() - 1);
        } else if n.less(&self.items[0]) {
            self.items[0] = n;
            self.sift_down(0);
        }
    }

    fn sift_up(&mut self, mut i: usize) {
        while i > 0 {
            let parent = (i - 1) / 2;
            if self.items[parent].less(&self.items[i]) {
                self.items.swap(parent, i);
                i = parent;
            } else {
                break;
            }
        }
    }

    fn sift_down(&mut self, mut i: usize) {
        loop {
            let l = 2 * i + 1;
            let r = 2 * i + 2;
            let mut largest = i;
            if l < self.items.len() && self.items[largest].less(&self.items[l]) {
                largest = l;
            }
            if r < self.items.len() && self.items[largest].less(&self.items[r]) {
                largest = r;
            }
            if largest == i {
                break;
            }
            self.items.swap(i, largest);
            i = largest;
        }
    }

    fn into_sorted(self) -> Vec<Neighbor> {
        let mut v = self.items;
        v.sort_by(|a, b| a.dist_sq.total_cmp(&b.dist_sq).then(a.index.cmp(&b.index)));
        v
    }
}
