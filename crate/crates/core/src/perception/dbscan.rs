//! Density-based clustering on a uniform grid of `eps`-sized cells.

use std::collections::{HashMap, VecDeque};

use crate::num::Real;
use crate::scene::Vec3;

use super::PerceptionError;

/// Cluster assignment for every input point.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Clustering {
    /// Cluster index per point, `None` for noise.
    pub labels: Vec<Option<usize>>,
    /// Point indices per cluster, ascending. Clusters are numbered in the
    /// order of their lowest-index core point.
    pub clusters: Vec<Vec<usize>>,
    pub noise: Vec<usize>,
}

impl Clustering {
    /// Index of the largest cluster, ties going to the lower index.
    pub fn largest(&self) -> Option<usize> {
        let mut best: Option<usize> = None;
        for (i, c) in self.clusters.iter().enumerate() {
            if best.map_or(true, |b| c.len() > self.clusters[b].len()) {
                best = Some(i);
            }
        }
        best
    }
}

struct Grid<'a, T: Real> {
    points: &'a [Vec3<T>],
    eps: T,
    cells: HashMap<[i64; 3], Vec<usize>>,
}

impl<'a, T: Real> Grid<'a, T> {
    fn new(points: &'a [Vec3<T>], eps: T) -> Self {
        let mut cells: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            cells.entry(Self::cell(p, eps)).or_default().push(i);
        }
        Self { points, eps, cells }
    }

    fn cell(p: &Vec3<T>, eps: T) -> [i64; 3] {
        let f = |x: T| (x / eps).floor().to_i64().unwrap_or(0);
        [f(p.x), f(p.y), f(p.z)]
    }

    /// All points within `eps` of point `i`, itself included, ascending.
    fn neighbors(&self, i: usize, out: &mut Vec<usize>) {
        out.clear();
        let p = self.points[i];
        let c = Self::cell(&p, self.eps);
        let eps2 = self.eps * self.eps;
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(bucket) = self.cells.get(&[c[0] + dx, c[1] + dy, c[2] + dz]) {
                        out.extend(bucket.iter().copied().filter(|&j| (self.points[j] - p).norm_squared() <= eps2));
                    }
                }
            }
        }
        out.sort_unstable();
    }
}

/// DBSCAN. A point is core when its closed `eps`-ball holds at least
/// `min_pts` points, itself included. Border points join the first cluster
/// that reaches them.
pub fn dbscan<T: Real>(points: &[Vec3<T>], eps: T, min_pts: usize) -> Result<Clustering, PerceptionError> {
    if !(eps > T::zero() && eps.is_finite()) {
        return Err(PerceptionError::InvalidParams("dbscan eps must be positive".into()));
    }
    if min_pts < 1 {
        return Err(PerceptionError::InvalidParams("dbscan min_pts must be at least 1".into()));
    }
    if points.iter().any(|p| !p.is_finite()) {
        return Err(PerceptionError::NonFinite);
    }
    let grid = Grid::new(points, eps);
    let n = points.len();
    let mut labels: Vec<Option<usize>> = vec![None; n];
    let mut visited = vec![false; n];
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    let mut nbrs = Vec::new();
    let mut queue = VecDeque::new();
    for i in 0..n {
        if visited[i] {
            continue;
        }
        grid.neighbors(i, &mut nbrs);
        if nbrs.len() < min_pts {
            continue;
        }
        // `i` is the lowest-index core point not yet in a cluster.
        let id = clusters.len();
        let mut members = Vec::new();
        visited[i] = true;
        labels[i] = Some(id);
        members.push(i);
        queue.clear();
        queue.extend(nbrs.iter().copied());
        while let Some(j) = queue.pop_front() {
            if labels[j].is_none() {
                labels[j] = Some(id);
                members.push(j);
            }
            if visited[j] || labels[j] != Some(id) {
                continue;
            }
            visited[j] = true;
            grid.neighbors(j, &mut nbrs);
            if nbrs.len() >= min_pts {
                queue.extend(nbrs.iter().copied().filter(|&k| !visited[k]));
            }
        }
        members.sort_unstable();
        clusters.push(members);
    }
    let noise = (0..n).filter(|&i| labels[i].is_none()).collect();
    Ok(Clustering { labels, clusters, noise })
}
