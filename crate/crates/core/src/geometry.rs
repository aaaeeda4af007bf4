//! Ray grids over billboarded elements and ray/box intersection.
//!
//! Each element is rasterized into an `n × n` grid of sample points; one ray
//! is cast from the user's eye through every sample. The entry point of every
//! entity box along a ray forms the hit set `H(r)` consumed by the overlay and
//! interaction suitability terms.

use thiserror::Error;

use crate::num::Real;
use crate::scene::{Box3, Scene, UiElement, UserPose, Vec3};

/// Default number of samples per grid axis (25 rays per element).
pub const DEFAULT_GRID_N: usize = 5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("grid resolution must be at least 1")]
    EmptyGrid,
    #[error("element `{0}` has a degenerate size")]
    DegenerateElement(String),
    #[error("element `{0}` is positioned at the user's eye")]
    ElementAtEye(String),
    #[error("ray direction is not unit length")]
    NotUnit,
}

/// How far rays travel past the element sample point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RayExtent {
    /// Rays continue through the element, so boxes the element covers from
    /// the user's view are hit.
    #[default]
    Unbounded,
    /// Rays stop at the sample point; only boxes in front of or containing
    /// the element are hit.
    ClipAtElement,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray<T = f64> {
    origin: Vec3<T>,
    dir: Vec3<T>,
}

impl<T: Real> Ray<T> {
    pub fn new(origin: Vec3<T>, dir: Vec3<T>) -> Result<Self, GeometryError> {
        if !dir.is_finite() || (dir.norm() - T::one()).abs().as_f64() > T::UNIT_TOLERANCE {
            return Err(GeometryError::NotUnit);
        }
        Ok(Self { origin, dir })
    }

    /// Ray from `origin` through `target` together with the parameter at
    /// which it reaches the target; `None` when the two coincide.
    pub fn towards(origin: Vec3<T>, target: Vec3<T>) -> Option<(Self, T)> {
        let d = target - origin;
        let len = d.norm();
        if !(len > T::zero()) {
            return None;
        }
        Some((Self { origin, dir: d / len }, len))
    }

    pub fn origin(&self) -> Vec3<T> {
        self.origin
    }

    pub fn dir(&self) -> Vec3<T> {
        self.dir
    }

    pub fn at(&self, t: T) -> Vec3<T> {
        self.origin + self.dir * t
    }
}

/// Intersection of a ray with one box surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceHit<T = f64> {
    pub point: Vec3<T>,
    pub t: T,
    /// `‖h − c_b‖ / (0.5·d_b)`, in `[0, 1]` for surface points.
    pub d_h: T,
}

/// A surface hit attributed to a scene entity.
#[derive(Debug, Clone, PartialEq)]
pub struct Hit<T = f64> {
    pub point: Vec3<T>,
    pub entity_id: String,
    pub d_h: T,
    pub t: T,
}

/// Normalized distance of a surface point from the box center.
pub fn normalized_hit_distance<T: Real>(point: Vec3<T>, bbox: &Box3<T>) -> T {
    let half_diag = bbox.half_extents().norm();
    ((point - bbox.center()).norm() / half_diag).min(T::one())
}

/// Slab test returning the nearest surface crossing in front of the origin.
///
/// When the origin lies inside the box the exit point is returned. The
/// coordinate of the crossed face is snapped exactly onto the face plane.
pub fn ray_box_entry<T: Real>(ray: &Ray<T>, bbox: &Box3<T>) -> Option<SurfaceHit<T>> {
    let eps = T::lit(T::PARALLEL_EPSILON);
    let lo = bbox.min();
    let hi = bbox.max();
    let mut t_near = T::neg_infinity();
    let mut t_far = T::infinity();
    let mut near_face = (0usize, T::zero());
    let mut far_face = (0usize, T::zero());
    for axis in 0..3 {
        let o = ray.origin[axis];
        let d = ray.dir[axis];
        if d.abs() < eps {
            if o < lo[axis] || o > hi[axis] {
                return None;
            }
            continue;
        }
        let (t0, t1, f0, f1) = if d > T::zero() {
            ((lo[axis] - o) / d, (hi[axis] - o) / d, lo[axis], hi[axis])
        } else {
            ((hi[axis] - o) / d, (lo[axis] - o) / d, hi[axis], lo[axis])
        };
        if t0 > t_near {
            t_near = t0;
            near_face = (axis, f0);
        }
        if t1 < t_far {
            t_far = t1;
            far_face = (axis, f1);
        }
    }
    let slack = eps * t_near.abs().max(T::one());
    if t_near > t_far + slack || t_far <= T::zero() {
        return None;
    }
    let (t, (axis, face)) = if t_near > T::zero() {
        (t_near, near_face)
    } else {
        (t_far, far_face)
    };
    let point = ray.at(t).with_axis(axis, face);
    Some(SurfaceHit { point, t, d_h: normalized_hit_distance(point, bbox) })
}

/// Orthonormal frame of an element that faces the user's eye.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementFrame<T = f64> {
    pub center: Vec3<T>,
    /// Unit normal pointing from the element towards the eye.
    pub normal: Vec3<T>,
    pub right: Vec3<T>,
    pub up: Vec3<T>,
    pub half_width: T,
    pub half_height: T,
}

impl<T: Real> ElementFrame<T> {
    pub fn billboard(
        user: &UserPose<T>,
        element: &UiElement<T>,
        position: Vec3<T>,
    ) -> Result<Self, GeometryError> {
        let normal = (user.eye() - position)
            .normalized()
            .ok_or_else(|| GeometryError::ElementAtEye(element.id().to_string()))?;
        let across = user.up().cross(normal);
        let right = if across.norm().as_f64() > 1e-6 {
            across / across.norm()
        } else {
            // element straight above or below the eye
            user.right()
        };
        let up = normal.cross(right);
        let half = T::lit(0.5);
        let (hw, hh) = (element.width() * half, element.height() * half);
        if !(hw > T::zero() && hh > T::zero()) {
            return Err(GeometryError::DegenerateElement(element.id().to_string()));
        }
        Ok(Self { center: position, normal, right, up, half_width: hw, half_height: hh })
    }

    /// Sample points of an `n × n` grid, row by row from the bottom-left.
    pub fn grid(&self, grid_n: usize) -> Result<Vec<Vec3<T>>, GeometryError> {
        if grid_n == 0 {
            return Err(GeometryError::EmptyGrid);
        }
        if grid_n == 1 {
            return Ok(vec![self.center]);
        }
        let steps = T::lit((grid_n - 1) as f64);
        let two = T::lit(2.0);
        let mut out = Vec::with_capacity(grid_n * grid_n);
        for j in 0..grid_n {
            let v = -self.half_height + two * self.half_height * T::lit(j as f64) / steps;
            for i in 0..grid_n {
                let u = -self.half_width + two * self.half_width * T::lit(i as f64) / steps;
                out.push(self.center + self.right * u + self.up * v);
            }
        }
        Ok(out)
    }

    /// Parameter at which `ray` crosses this rectangle (edges inclusive).
    pub fn intersect(&self, ray: &Ray<T>) -> Option<T> {
        let denom = ray.dir().dot(self.normal);
        if denom.abs() < T::lit(T::PARALLEL_EPSILON) {
            return None;
        }
        let t = (self.center - ray.origin()).dot(self.normal) / denom;
        if !(t > T::zero()) {
            return None;
        }
        let local = ray.at(t) - self.center;
        let tol = T::lit(T::UNIT_TOLERANCE);
        let inside = local.dot(self.right).abs() <= self.half_width + tol
            && local.dot(self.up).abs() <= self.half_height + tol;
        inside.then_some(t)
    }
}

/// Sample points of an element's billboarded rectangle.
pub fn rasterize_element<T: Real>(
    element: &UiElement<T>,
    position: Vec3<T>,
    user: &UserPose<T>,
    grid_n: usize,
) -> Result<Vec<Vec3<T>>, GeometryError> {
    ElementFrame::billboard(user, element, position)?.grid(grid_n)
}

/// Per-ray hit lists of one element, plus rays that could not be cast.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct HitSet<T = f64> {
    pub rays: Vec<Vec<Hit<T>>>,
    /// Indices of rays whose sample point coincides with the eye.
    pub skipped: Vec<usize>,
}

impl<T: Real> HitSet<T> {
    pub fn total_hits(&self) -> usize {
        self.rays.iter().map(Vec::len).sum()
    }
}

/// Walks every (ray, entity) hit of an element's ray grid without allocating
/// per-hit records. Returns the indices of skipped rays.
pub(crate) fn trace_element<T: Real>(
    scene: &Scene<T>,
    element: &UiElement<T>,
    position: Vec3<T>,
    grid_n: usize,
    extent: RayExtent,
    mut visit: impl FnMut(usize, usize, &SurfaceHit<T>),
) -> Result<Vec<usize>, GeometryError> {
    let eye = scene.user().eye();
    let samples = rasterize_element(element, position, scene.user(), grid_n)?;
    let mut skipped = Vec::new();
    for (r, sample) in samples.into_iter().enumerate() {
        let Some((ray, t_sample)) = Ray::towards(eye, sample) else {
            skipped.push(r);
            continue;
        };
        let limit = match extent {
            RayExtent::Unbounded => T::infinity(),
            RayExtent::ClipAtElement => t_sample * (T::one() + T::lit(T::PARALLEL_EPSILON)),
        };
        for (k, entity) in scene.entities().iter().enumerate() {
            if let Some(hit) = ray_box_entry(&ray, entity.bbox()) {
                if hit.t <= limit {
                    visit(r, k, &hit);
                }
            }
        }
    }
    Ok(skipped)
}

/// Hit sets `H(r)` for every ray of the element's grid, each sorted by `t`
/// (ties by entity id).
pub fn collect_hits<T: Real>(
    scene: &Scene<T>,
    element: &UiElement<T>,
    position: Vec3<T>,
    grid_n: usize,
    extent: RayExtent,
) -> Result<HitSet<T>, GeometryError> {
    let mut rays: Vec<Vec<Hit<T>>> = vec![Vec::new(); grid_n * grid_n];
    let skipped = trace_element(scene, element, position, grid_n, extent, |r, k, h| {
        rays[r].push(Hit {
            point: h.point,
            entity_id: scene.entities()[k].id().to_string(),
            d_h: h.d_h,
            t: h.t,
        });
    })?;
    for hits in &mut rays {
        hits.sort_by(|a, b| {
            a.t.partial_cmp(&b.t)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then_with(|| a.entity_id.cmp(&b.entity_id))
        });
    }
    Ok(HitSet { rays, skipped })
}
