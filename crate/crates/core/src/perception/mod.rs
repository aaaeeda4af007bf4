//! 3D box segmentation: back-project a 2D detection into a frustum, keep the
//! visible points inside it, cluster them and box the largest cluster.

mod dbscan;
mod hull;
mod io;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::num::Real;
use crate::scene::{Box3, PhysicalEntity, Vec3};

pub use dbscan::{dbscan, Clustering};
pub use hull::hull_vertices;
pub use io::{load_camera, load_detections, parse_ply, parse_xyz, read_point_cloud, CloudFormat};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PerceptionError {
    #[error("invalid camera: {0}")]
    InvalidCamera(String),
    #[error("invalid detection `{label}`: {reason}")]
    InvalidDetection { label: String, reason: String },
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
    #[error("point cloud contains a non-finite coordinate")]
    NonFinite,
    #[error("every point coincides with the viewpoint")]
    AllAtViewpoint,
    #[error("{source_name}: line {line}: {message}")]
    Parse { source_name: String, line: usize, message: String },
}

/// Pinhole camera with a rigid camera-to-world pose. Camera axes follow the
/// image convention: +x right, +y down, +z along the optical axis.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraModel<T = f64> {
    fx: T,
    fy: T,
    cx: T,
    cy: T,
    width: T,
    height: T,
    rotation: [[T; 3]; 3],
    translation: Vec3<T>,
}

impl<T: Real> CameraModel<T> {
    /// `pose` is a row-major 4x4 camera-to-world matrix.
    pub fn new(fx: T, fy: T, cx: T, cy: T, width: T, height: T, pose: [[T; 4]; 4]) -> Result<Self, PerceptionError> {
        let bad = |m: &str| Err(PerceptionError::InvalidCamera(m.to_string()));
        if !(fx > T::zero() && fy > T::zero() && fx.is_finite() && fy.is_finite()) {
            return bad("focal lengths must be positive");
        }
        if !(width > T::zero() && height > T::zero() && cx.is_finite() && cy.is_finite()) {
            return bad("image size must be positive");
        }
        if pose.iter().flatten().any(|v| !v.is_finite()) {
            return bad("pose has a non-finite entry");
        }
        let tol = T::lit(1e-6);
        let rotation = [
            [pose[0][0], pose[0][1], pose[0][2]],
            [pose[1][0], pose[1][1], pose[1][2]],
            [pose[2][0], pose[2][1], pose[2][2]],
        ];
        for i in 0..3 {
            for j in 0..3 {
                let dot = (0..3).fold(T::zero(), |acc, k| acc + rotation[k][i] * rotation[k][j]);
                let expect = if i == j { T::one() } else { T::zero() };
                if (dot - expect).abs() > tol {
                    return bad("pose rotation is not orthonormal");
                }
            }
        }
        let col = |j: usize| Vec3::new(rotation[0][j], rotation[1][j], rotation[2][j]);
        if col(0).cross(col(1)).dot(col(2)) < T::zero() {
            return bad("pose rotation is a reflection");
        }
        let bottom = pose[3];
        if bottom[0].abs() > tol || bottom[1].abs() > tol || bottom[2].abs() > tol || (bottom[3] - T::one()).abs() > tol {
            return bad("pose bottom row must be [0, 0, 0, 1]");
        }
        Ok(Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
            rotation,
            translation: Vec3::new(pose[0][3], pose[1][3], pose[2][3]),
        })
    }

    pub fn width(&self) -> T {
        self.width
    }

    pub fn height(&self) -> T {
        self.height
    }

    /// Camera center in world coordinates.
    pub fn center(&self) -> Vec3<T> {
        self.translation
    }

    /// Rotates a camera-frame direction into the world frame.
    pub fn rotate(&self, v: Vec3<T>) -> Vec3<T> {
        let r = &self.rotation;
        Vec3::new(
            r[0][0] * v.x + r[0][1] * v.y + r[0][2] * v.z,
            r[1][0] * v.x + r[1][1] * v.y + r[1][2] * v.z,
            r[2][0] * v.x + r[2][1] * v.y + r[2][2] * v.z,
        )
    }

    pub fn to_world(&self, p: Vec3<T>) -> Vec3<T> {
        self.rotate(p) + self.translation
    }

    pub fn to_camera(&self, p: Vec3<T>) -> Vec3<T> {
        let d = p - self.translation;
        let r = &self.rotation;
        Vec3::new(
            r[0][0] * d.x + r[1][0] * d.y + r[2][0] * d.z,
            r[0][1] * d.x + r[1][1] * d.y + r[2][1] * d.z,
            r[0][2] * d.x + r[1][2] * d.y + r[2][2] * d.z,
        )
    }

    /// World point at camera depth `z` along pixel `(u, v)`.
    pub fn back_project(&self, u: T, v: T, z: T) -> Vec3<T> {
        self.to_world(Vec3::new((u - self.cx) / self.fx * z, (v - self.cy) / self.fy * z, z))
    }

    /// Pixel coordinates and depth of a world point.
    pub fn project(&self, p: Vec3<T>) -> (T, T, T) {
        let c = self.to_camera(p);
        (self.fx * c.x / c.z + self.cx, self.fy * c.y / c.z + self.cy, c.z)
    }
}

/// Axis-aligned pixel rectangle `[xmin, ymin, xmax, ymax]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct PixelRect<T = f64>(pub [T; 4]);

#[derive(Debug, Clone, PartialEq)]
pub struct Detection2D<T = f64> {
    label: String,
    confidence: T,
    rect: PixelRect<T>,
}

impl<T: Real> Detection2D<T> {
    pub fn new(label: impl Into<String>, confidence: T, rect: PixelRect<T>) -> Self {
        Self { label: label.into(), confidence, rect }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn confidence(&self) -> T {
        self.confidence
    }

    pub fn rect(&self) -> PixelRect<T> {
        self.rect
    }

    /// Checks the confidence range and that the rectangle is non-empty and
    /// lies inside the image.
    pub fn validate(&self, cam: &CameraModel<T>) -> Result<(), PerceptionError> {
        let bad = |reason: &str| {
            Err(PerceptionError::InvalidDetection { label: self.label.clone(), reason: reason.to_string() })
        };
        if !(self.confidence >= T::zero() && self.confidence <= T::one()) {
            return bad("confidence outside [0, 1]");
        }
        let [x0, y0, x1, y1] = self.rect.0;
        if !(x0 < x1 && y0 < y1) {
            return bad("empty rectangle");
        }
        if x0 < T::zero() || y0 < T::zero() || x1 > cam.width || y1 > cam.height {
            return bad("rectangle outside the image");
        }
        Ok(())
    }
}

/// Plane `normal · p + offset = 0`; positive side is inside.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plane<T = f64> {
    pub normal: Vec3<T>,
    pub offset: T,
}

impl<T: Real> Plane<T> {
    pub fn signed_distance(&self, p: Vec3<T>) -> T {
        self.normal.dot(p) + self.offset
    }
}

/// Left, right, top, bottom, near, far planes, all facing inward.
#[derive(Debug, Clone, PartialEq)]
pub struct Frustum<T = f64> {
    pub planes: [Plane<T>; 6],
    /// Centroid of the eight corners.
    pub centroid: Vec3<T>,
}

impl<T: Real> Frustum<T> {
    /// Smallest signed distance to any plane; non-negative means inside.
    pub fn signed_distance(&self, p: Vec3<T>) -> T {
        self.planes.iter().map(|pl| pl.signed_distance(p)).fold(T::infinity(), T::min)
    }

    pub fn contains(&self, p: Vec3<T>) -> bool {
        self.signed_distance(p) >= T::zero()
    }
}

pub fn frustum_from_detection<T: Real>(
    cam: &CameraModel<T>,
    det: &Detection2D<T>,
    near: T,
    far: T,
) -> Result<Frustum<T>, PerceptionError> {
    if !(near > T::zero() && near < far && far.is_finite()) {
        return Err(PerceptionError::InvalidParams("need 0 < near < far".into()));
    }
    det.validate(cam)?;
    let [x0, y0, x1, y1] = det.rect.0;
    let a = |u: T| (u - cam.cx) / cam.fx;
    let b = |v: T| (v - cam.cy) / cam.fy;
    // Camera-frame planes through the optical center, then near/far.
    let local = [
        (Vec3::new(T::one(), T::zero(), -a(x0)), T::zero()),
        (Vec3::new(-T::one(), T::zero(), a(x1)), T::zero()),
        (Vec3::new(T::zero(), T::one(), -b(y0)), T::zero()),
        (Vec3::new(T::zero(), -T::one(), b(y1)), T::zero()),
        (Vec3::new(T::zero(), T::zero(), T::one()), -near),
        (Vec3::new(T::zero(), T::zero(), -T::one()), far),
    ];
    let planes = local.map(|(n, d)| {
        let len = n.norm();
        let nw = cam.rotate(n / len);
        Plane { normal: nw, offset: d / len - nw.dot(cam.translation) }
    });
    let mut centroid = Vec3::zero();
    for z in [near, far] {
        for (u, v) in [(x0, y0), (x1, y0), (x0, y1), (x1, y1)] {
            centroid = centroid + cam.back_project(u, v, z);
        }
    }
    Ok(Frustum { planes, centroid: centroid / T::lit(8.0) })
}

/// Points with non-negative signed distance to every frustum plane, in input order.
pub fn points_in_frustum<T: Real>(cloud: &[Vec3<T>], frustum: &Frustum<T>) -> Vec<Vec3<T>> {
    cloud.iter().copied().filter(|p| frustum.contains(*p)).collect()
}

/// Default flipping-sphere factor: `R = 100 · max range`.
pub const DEFAULT_HPR_GAMMA: f64 = 100.0;

/// Indices of the points visible from `viewpoint`, ascending.
///
/// Each point is reflected through a sphere of radius `R = gamma · max‖p − viewpoint‖`
/// centered at the viewpoint; a point is visible when its reflection is a vertex of
/// the convex hull of the reflections plus the viewpoint. Points at the viewpoint
/// are never visible. When the hull is degenerate every other point counts as visible.
pub fn hidden_point_removal<T: Real>(cloud: &[Vec3<T>], viewpoint: Vec3<T>, gamma: T) -> Result<Vec<usize>, PerceptionError> {
    if !(gamma > T::zero() && gamma.is_finite()) {
        return Err(PerceptionError::InvalidParams("gamma must be positive".into()));
    }
    if cloud.iter().any(|p| !p.is_finite()) || !viewpoint.is_finite() {
        return Err(PerceptionError::NonFinite);
    }
    let rel: Vec<Vec3<T>> = cloud.iter().map(|p| *p - viewpoint).collect();
    let max_range = rel.iter().map(|p| p.norm()).fold(T::zero(), T::max);
    if cloud.is_empty() {
        return Ok(Vec::new());
    }
    if max_range <= T::zero() {
        return Err(PerceptionError::AllAtViewpoint);
    }
    let radius = gamma * max_range;
    let mut flipped = Vec::with_capacity(rel.len() + 1);
    let mut source = Vec::with_capacity(rel.len());
    for (i, p) in rel.iter().enumerate() {
        let r = p.norm();
        if r > T::zero() {
            flipped.push(*p + *p * (T::lit(2.0) * (radius - r) / r));
            source.push(i);
        }
    }
    let origin = flipped.len();
    flipped.push(Vec3::zero());
    match hull_vertices(&flipped) {
        Some(verts) => Ok(verts.into_iter().filter(|&k| k != origin).map(|k| source[k]).collect()),
        None => Ok(source),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentParams<T = f64> {
    pub near: T,
    pub far: T,
    pub gamma: T,
    pub eps: T,
    pub min_pts: usize,
    /// Lower bound on each box half extent, so flat clusters still give a valid box.
    pub min_half_extent: T,
}

impl<T: Real> Default for SegmentParams<T> {
    fn default() -> Self {
        Self {
            near: T::lit(0.2),
            far: T::lit(10.0),
            gamma: T::lit(DEFAULT_HPR_GAMMA),
            eps: T::lit(0.1),
            min_pts: 10,
            min_half_extent: T::lit(0.005),
        }
    }
}

/// A labeled box recovered from one detection; ratings are not known yet.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxCandidate<T = f64> {
    pub label: String,
    pub bbox: Box3<T>,
    /// Points of the chosen cluster.
    pub support: usize,
}

/// Axis-aligned bounds of `points`, padded to `min_half` per axis.
pub fn bounding_box<T: Real>(points: &[Vec3<T>], min_half: T) -> Option<Box3<T>> {
    let first = *points.first()?;
    let (lo, hi) = points.iter().fold((first, first), |(lo, hi), p| (lo.min_with(*p), hi.max_with(*p)));
    let center = (lo + hi) / T::lit(2.0);
    let half = ((hi - lo) / T::lit(2.0)).max_with(Vec3::splat(min_half));
    Box3::new(center, half).ok()
}

/// Frustum selection, hidden point removal, clustering and boxing of the
/// largest cluster. `Ok(None)` means nothing usable was found.
pub fn segment_box<T: Real>(
    cloud: &[Vec3<T>],
    cam: &CameraModel<T>,
    det: &Detection2D<T>,
    params: &SegmentParams<T>,
) -> Result<Option<BoxCandidate<T>>, PerceptionError> {
    if !(params.min_half_extent > T::zero()) {
        return Err(PerceptionError::InvalidParams("min_half_extent must be positive".into()));
    }
    let frustum = frustum_from_detection(cam, det, params.near, params.far)?;
    let inside = points_in_frustum(cloud, &frustum);
    if inside.is_empty() {
        return Ok(None);
    }
    let visible: Vec<Vec3<T>> = match hidden_point_removal(&inside, cam.center(), params.gamma) {
        Ok(idx) => idx.into_iter().map(|i| inside[i]).collect(),
        Err(PerceptionError::AllAtViewpoint) => return Ok(None),
        Err(e) => return Err(e),
    };
    let clustering = dbscan(&visible, params.eps, params.min_pts)?;
    let Some(best) = clustering.largest() else {
        return Ok(None);
    };
    let members: Vec<Vec3<T>> = clustering.clusters[best].iter().map(|&i| visible[i]).collect();
    let bbox = bounding_box(&members, params.min_half_extent).expect("cluster is non-empty");
    Ok(Some(BoxCandidate { label: det.label.clone(), bbox, support: members.len() }))
}

/// Default IoU at which a new box replaces an existing same-label box.
pub const DEFAULT_MERGE_IOU: f64 = 0.5;

/// Replaces the best-overlapping same-label entity (keeping its id and ratings)
/// when its IoU reaches `iou_threshold`, otherwise appends a new entity with
/// neutral ratings and id `<label>-<k>`. Other same-label entities that would
/// still overlap the new box at or above the threshold are dropped.
pub fn merge_detection<T: Real>(
    entities: &[PhysicalEntity<T>],
    candidate: &BoxCandidate<T>,
    iou_threshold: T,
) -> Vec<PhysicalEntity<T>> {
    let same = |e: &PhysicalEntity<T>| e.label() == candidate.label;
    let mut best: Option<(T, usize)> = None;
    for (i, e) in entities.iter().enumerate() {
        if !same(e) {
            continue;
        }
        let iou = e.bbox().iou(&candidate.bbox);
        if iou >= iou_threshold && best.map_or(true, |(b, _)| iou > b) {
            best = Some((iou, i));
        }
    }
    match best {
        Some((_, keep)) => entities
            .iter()
            .enumerate()
            .filter_map(|(i, e)| {
                if i == keep {
                    Some(e.clone().with_box(candidate.bbox))
                } else if same(e) && e.bbox().iou(&candidate.bbox) >= iou_threshold {
                    None
                } else {
                    Some(e.clone())
                }
            })
            .collect(),
        None => {
            let mut out = entities.to_vec();
            let mut k = 1;
            let id = loop {
                let id = format!("{}-{}", candidate.label, k);
                if !entities.iter().any(|e| e.id() == id) {
                    break id;
                }
                k += 1;
            };
            let half = T::lit(0.5);
            out.push(
                PhysicalEntity::new(id, candidate.label.clone(), candidate.bbox, half, half)
                    .expect("neutral ratings are in range"),
            );
            out
        }
    }
}
