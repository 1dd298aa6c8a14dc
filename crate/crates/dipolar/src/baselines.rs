//! Minimum-spanning-tree orientation propagation, the classic baseline the
//! evaluation harness compares against.
//!
//! A k-NN graph is built with edge weight `1 - |n_i . n_j|`, disconnected
//! components are bridged through their nearest point pair, and one seed
//! orientation spreads along the MST, flipping children that disagree with
//! their parent.

use rayon::prelude::*;

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::geometry::SpatialIndex;

/// Statistics of one MST orientation run.
#[derive(Debug, Clone, Copy, Default)]
pub struct HoppeOutcome {
    pub flips: usize,
    pub components_bridged: usize,
}

struct UnionFind {
    parent: Vec<u32>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n as u32).collect(),
        }
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let grand = self.parent[self.parent[x as usize] as usize];
            self.parent[x as usize] = grand;
            x = grand;
        }
        x
    }

    fn union(&mut self, a: u32, b: u32) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        // Root at the smaller index for deterministic component ids.
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        self.parent[hi as usize] = lo;
        true
    }
}

/// Orient the cloud by Hoppe-style MST propagation. The seed is the point
/// with maximal z, forced toward +z.
pub fn hoppe_orient(
    cloud: &mut PointCloud,
    index: &SpatialIndex,
    k: usize,
) -> Result<HoppeOutcome> {
    if !cloud.has_normals() {
        return Err(Error::MissingNormals);
    }
    let n = cloud.len();
    let mut outcome = HoppeOutcome::default();
    if n == 1 {
        if cloud.normals[0].z < 0.0 {
            cloud.flip_normal(0);
            outcome.flips = 1;
        }
        return Ok(outcome);
    }

    // Symmetrized k-NN edges; weight favors aligned (or anti-aligned) pairs.
    let neighbor_lists: Vec<Vec<u32>> = (0..n)
        .into_par_iter()
        .map(|i| {
            index
                .knn_of_point(i, k)
                .into_iter()
                .map(|h| h.index as u32)
                .collect()
        })
        .collect();
    let mut edges: Vec<(f64, u32, u32)> = Vec::with_capacity(n * k);
    for (i, list) in neighbor_lists.iter().enumerate() {
        for &j in list {
            let (a, b) = if (i as u32) < j { (i as u32, j) } else { (j, i as u32) };
            let w = 1.0 - cloud.normals[a as usize].dot(cloud.normals[b as usize]).abs();
            edges.push((w, a, b));
        }
    }
    edges.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    edges.dedup_by_key(|e| (e.1, e.2));

    // Bridge disconnected components through their mutually nearest pair.
    let mut components = UnionFind::new(n);
    for &(_, a, b) in &edges {
        components.union(a, b);
    }
    loop {
        let roots: Vec<u32> = (0..n as u32).map(|i| components.find(i)).collect();
        let mut distinct: Vec<u32> = roots.clone();
        distinct.sort_unstable();
        distinct.dedup();
        if distinct.len() <= 1 {
            break;
        }
        // Smallest component first, ties by root id.
        let smallest = *distinct
            .iter()
            .min_by_key(|&&r| {
                (
                    roots.iter().filter(|&&x| x == r).count(),
                    r,
                )
            })
            .unwrap();
        let inside: Vec<u32> = (0..n as u32).filter(|&i| roots[i as usize] == smallest).collect();
        let best = inside
            .par_iter()
            .map(|&i| {
                let mut best = (f64::INFINITY, u32::MAX, u32::MAX);
                for j in 0..n as u32 {
                    if roots[j as usize] == smallest {
                        continue;
                    }
                    let d = (cloud.positions[i as usize] - cloud.positions[j as usize])
                        .norm_squared();
                    if d < best.0 || (d == best.0 && (i, j) < (best.1, best.2)) {
                        best = (d, i, j);
                    }
                }
                best
            })
            .reduce(
                || (f64::INFINITY, u32::MAX, u32::MAX),
                |a, b| {
                    if b.0 < a.0 || (b.0 == a.0 && (b.1, b.2) < (a.1, a.2)) {
                        b
                    } else {
                        a
                    }
                },
            );
        let (_, a, b) = best;
        let w = 1.0 - cloud.normals[a as usize].dot(cloud.normals[b as usize]).abs();
        edges.push((w, a.min(b), a.max(b)));
        components.union(a, b);
        outcome.components_bridged += 1;
    }

    // Kruskal MST over the weighted edges.
    edges.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    let mut forest = UnionFind::new(n);
    let mut adjacency: Vec<Vec<u32>> = vec![Vec::new(); n];
    for &(_, a, b) in &edges {
        if forest.union(a, b) {
            adjacency[a as usize].push(b);
            adjacency[b as usize].push(a);
        }
    }
    for list in &mut adjacency {
        list.sort_unstable();
    }

    // Root at max z, forced toward +z, then BFS flip propagation.
    let root = (0..n)
        .max_by(|&a, &b| {
            cloud.positions[a]
                .z
                .total_cmp(&cloud.positions[b].z)
                .then(b.cmp(&a))
        })
        .unwrap();
    if cloud.normals[root].z < 0.0 {
        cloud.flip_normal(root);
        outcome.flips += 1;
    }

    let mut visited = vec![false; n];
    let mut queue = std::collections::VecDeque::new();
    visited[root] = true;
    queue.push_back(root as u32);
    while let Some(parent) = queue.pop_front() {
        for &child in &adjacency[parent as usize] {
            if visited[child as usize] {
                continue;
            }
            visited[child as usize] = true;
            if cloud.normals[parent as usize].dot(cloud.normals[child as usize]) < 0.0 {
                cloud.flip_normal(child as usize);
                outcome.flips += 1;
            }
            queue.push_back(child);
        }
    }
    Ok(outcome)
}
