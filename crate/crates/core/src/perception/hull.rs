//! Incremental 3D convex hull, only as much as hidden point removal needs:
//! the set of input points that end up as hull vertices.

use std::collections::HashSet;

use crate::num::Real;
use crate::scene::Vec3;

#[derive(Debug, Clone, Copy)]
struct Face<T: Real> {
    v: [usize; 3],
    normal: Vec3<T>,
    offset: T,
    alive: bool,
}

impl<T: Real> Face<T> {
    fn new(points: &[Vec3<T>], a: usize, b: usize, c: usize) -> Self {
        let n = (points[b] - points[a]).cross(points[c] - points[a]);
        let normal = n.normalized().unwrap_or(n);
        Self { v: [a, b, c], normal, offset: -normal.dot(points[a]), alive: true }
    }

    fn distance(&self, p: Vec3<T>) -> T {
        self.normal.dot(p) + self.offset
    }
}

/// Indices of points that are vertices of the convex hull of `points`.
///
/// Returns `None` when the points do not span a 3D volume (all coincident,
/// collinear or coplanar within tolerance).
pub fn hull_vertices<T: Real>(points: &[Vec3<T>]) -> Option<Vec<usize>> {
    if points.len() < 4 {
        return None;
    }
    let scale = points
        .iter()
        .fold(Vec3::zero(), |m: Vec3<T>, p| m.max_with(p.abs()));
    let eps = T::lit(3.0) * T::epsilon() * (scale.x + scale.y + scale.z) * T::lit(16.0);

    let simplex = initial_simplex(points, eps)?;
    let [a, b, c, d] = simplex;
    let mut faces: Vec<Face<T>> = Vec::new();
    let centroid = (points[a] + points[b] + points[c] + points[d]) / T::lit(4.0);
    for (i, j, k) in [(a, b, c), (a, b, d), (a, c, d), (b, c, d)] {
        let mut f = Face::new(points, i, j, k);
        if f.distance(centroid) > T::zero() {
            f = Face::new(points, i, k, j);
        }
        faces.push(f);
    }

    let mut visible = Vec::new();
    let mut edges: HashSet<(usize, usize)> = HashSet::new();
    for (idx, &p) in points.iter().enumerate() {
        if simplex.contains(&idx) {
            continue;
        }
        visible.clear();
        for (fi, f) in faces.iter().enumerate() {
            if f.alive && f.distance(p) > eps {
                visible.push(fi);
            }
        }
        if visible.is_empty() {
            continue;
        }
        edges.clear();
        for &fi in &visible {
            let [x, y, z] = faces[fi].v;
            edges.insert((x, y));
            edges.insert((y, z));
            edges.insert((z, x));
            faces[fi].alive = false;
        }
        let mut horizon: Vec<(usize, usize)> =
            edges.iter().copied().filter(|&(u, w)| !edges.contains(&(w, u))).collect();
        horizon.sort_unstable();
        for (u, w) in horizon {
            faces.push(Face::new(points, u, w, idx));
        }
        if faces.len() > 64 && faces.iter().filter(|f| f.alive).count() * 2 < faces.len() {
            faces.retain(|f| f.alive);
        }
    }

    let mut verts: Vec<usize> = faces.iter().filter(|f| f.alive).flat_map(|f| f.v).collect();
    verts.sort_unstable();
    verts.dedup();
    Some(verts)
}

fn initial_simplex<T: Real>(points: &[Vec3<T>], eps: T) -> Option<[usize; 4]> {
    // Farthest pair among the axis extremes.
    let mut extremes = Vec::with_capacity(6);
    for axis in 0..3 {
        let cmp = |i: &usize, j: &usize| {
            points[*i][axis].partial_cmp(&points[*j][axis]).unwrap_or(std::cmp::Ordering::Equal)
        };
        extremes.push((0..points.len()).min_by(cmp).unwrap());
        extremes.push((0..points.len()).max_by(cmp).unwrap());
    }
    let mut best = (T::zero(), 0, 0);
    for &i in &extremes {
        for &j in &extremes {
            let d = points[i].distance(points[j]);
            if d > best.0 {
                best = (d, i, j);
            }
        }
    }
    let (span, a, b) = best;
    if span <= eps {
        return None;
    }
    let dir = (points[b] - points[a]) / span;
    let line_dist = |p: Vec3<T>| {
        let v = p - points[a];
        (v - dir * v.dot(dir)).norm()
    };
    let c = farthest(points, line_dist)?;
    if line_dist(points[c]) <= eps {
        return None;
    }
    let n = (points[b] - points[a]).cross(points[c] - points[a]).normalized()?;
    let plane_dist = |p: Vec3<T>| (p - points[a]).dot(n).abs();
    let d = farthest(points, plane_dist)?;
    if plane_dist(points[d]) <= eps {
        return None;
    }
    Some([a, b, c, d])
}

fn farthest<T: Real>(points: &[Vec3<T>], f: impl Fn(Vec3<T>) -> T) -> Option<usize> {
    let mut best: Option<(T, usize)> = None;
    for (i, p) in points.iter().enumerate() {
        let d = f(*p);
        if best.map_or(true, |(bd, _)| d > bd) {
            best = Some((d, i));
        }
    }
    best.map(|(_, i)| i)
}
