//! World model consumed by the optimizer: the user's pose, rated physical
//! entities and the virtual UI elements to place.
//!
//! World frame is right-handed, y-up, in meters. Ratings are stored already
//! normalized to `[0, 1]`; raw 1–5 scores only exist at the reasoning boundary.

mod format;
mod vec3;

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::num::Real;

pub use format::{
    load_entities, load_layout, load_scene, save_entities, save_layout, save_scene, BoxRecord,
    EntityRecord,
};
pub use vec3::Vec3;

pub(crate) use format::{parse_json, to_pretty};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SceneError {
    #[error("rating score {0} is outside 1..=5")]
    ScoreOutOfRange(i64),
    #[error("{what} is not finite")]
    NonFinite { what: String },
    #[error("{what} is not unit length")]
    NotUnit { what: String },
    #[error("user forward and up vectors are not orthogonal")]
    NotOrthogonal,
    #[error("{what} must be positive on every axis")]
    NonPositiveExtent { what: String },
    #[error("entity `{id}`: {field} = {value} is outside [0, 1]")]
    RatingOutOfRange { id: String, field: &'static str, value: f64 },
    #[error("entity `{id}`: {field} is missing")]
    MissingRating { id: String, field: &'static str },
    #[error("element `{id}`: width and height must be positive")]
    NonPositiveSize { id: String },
    #[error("element `{id}`: interaction_frequency = {value} is outside [0, 1]")]
    FrequencyOutOfRange { id: String, value: f64 },
    #[error("ids must be non-empty")]
    EmptyId,
    #[error("duplicate id `{0}`")]
    DuplicateId(String),
    #[error("layout has no position for element `{0}`")]
    MissingPosition(String),
    #[error("layout references unknown element `{0}`")]
    UnknownElement(String),
    #[error("parse error at `{path}` (line {line}, column {column}): {message}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
}

/// Maps a 5-point suitability score onto `[0, 1]` via `(score - 1) / 4`.
pub fn normalize_rating<T: Real>(score: i64) -> Result<T, SceneError> {
    if !(1..=5).contains(&score) {
        return Err(SceneError::ScoreOutOfRange(score));
    }
    Ok(T::lit((score - 1) as f64 / 4.0))
}

fn check_finite<T: Real>(v: Vec3<T>, what: &str) -> Result<(), SceneError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(SceneError::NonFinite { what: what.to_string() })
    }
}

fn check_unit<T: Real>(v: Vec3<T>, what: &str) -> Result<(), SceneError> {
    check_finite(v, what)?;
    if (v.norm() - T::one()).abs().as_f64() > T::UNIT_TOLERANCE {
        return Err(SceneError::NotUnit { what: what.to_string() });
    }
    Ok(())
}

/// Eye position and viewing direction of the user.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UserPose<T = f64> {
    eye: Vec3<T>,
    forward: Vec3<T>,
    up: Vec3<T>,
}

impl<T: Real> UserPose<T> {
    pub fn new(eye: Vec3<T>, forward: Vec3<T>, up: Vec3<T>) -> Result<Self, SceneError> {
        check_finite(eye, "user eye")?;
        check_unit(forward, "user forward")?;
        check_unit(up, "user up")?;
        if forward.dot(up).abs().as_f64() > T::UNIT_TOLERANCE {
            return Err(SceneError::NotOrthogonal);
        }
        Ok(Self { eye, forward, up })
    }

    /// Builds a pose from an arbitrary forward direction and an up hint,
    /// normalizing and orthogonalizing both.
    pub fn looking(eye: Vec3<T>, forward: Vec3<T>, up_hint: Vec3<T>) -> Result<Self, SceneError> {
        let f = forward
            .normalized()
            .ok_or_else(|| SceneError::NotUnit { what: "user forward".into() })?;
        let right = f
            .cross(up_hint)
            .normalized()
            .ok_or(SceneError::NotOrthogonal)?;
        let up = right.cross(f);
        Self::new(eye, f, up)
    }

    pub fn eye(&self) -> Vec3<T> {
        self.eye
    }

    pub fn forward(&self) -> Vec3<T> {
        self.forward
    }

    pub fn up(&self) -> Vec3<T> {
        self.up
    }

    /// The user's right-hand direction, `forward × up`.
    pub fn right(&self) -> Vec3<T> {
        self.forward.cross(self.up)
    }

    pub fn translated(&self, offset: Vec3<T>) -> Self {
        Self { eye: self.eye + offset, ..*self }
    }
}

/// Axis-aligned box given by its center and per-axis half extents.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Box3<T = f64> {
    center: Vec3<T>,
    half_extents: Vec3<T>,
}

impl<T: Real> Box3<T> {
    pub fn new(center: Vec3<T>, half_extents: Vec3<T>) -> Result<Self, SceneError> {
        check_finite(center, "box center")?;
        check_finite(half_extents, "box half_extents")?;
        if half_extents.min_component() <= T::zero() {
            return Err(SceneError::NonPositiveExtent { what: "box half_extents".into() });
        }
        Ok(Self { center, half_extents })
    }

    pub fn from_min_max(min: Vec3<T>, max: Vec3<T>) -> Result<Self, SceneError> {
        let half = T::lit(0.5);
        Self::new((min + max) * half, (max - min) * half)
    }

    pub fn center(&self) -> Vec3<T> {
        self.center
    }

    pub fn half_extents(&self) -> Vec3<T> {
        self.half_extents
    }

    pub fn min(&self) -> Vec3<T> {
        self.center - self.half_extents
    }

    pub fn max(&self) -> Vec3<T> {
        self.center + self.half_extents
    }

    /// Length of the box diagonal, `d_b`.
    pub fn diagonal(&self) -> T {
        self.half_extents.norm() * T::lit(2.0)
    }

    pub fn volume(&self) -> T {
        let s = self.half_extents * T::lit(2.0);
        s.x * s.y * s.z
    }

    pub fn contains(&self, p: Vec3<T>) -> bool {
        let d = (p - self.center).abs();
        d.x <= self.half_extents.x && d.y <= self.half_extents.y && d.z <= self.half_extents.z
    }

    /// Volume of the intersection with `other`, zero when disjoint.
    pub fn intersection_volume(&self, other: &Self) -> T {
        let lo = self.min().max_with(other.min());
        let hi = self.max().min_with(other.max());
        let d = (hi - lo).max_with(Vec3::zero());
        d.x * d.y * d.z
    }

    /// Axis-aligned intersection over union.
    pub fn iou(&self, other: &Self) -> T {
        let inter = self.intersection_volume(other);
        let union = self.volume() + other.volume() - inter;
        if union <= T::zero() {
            return T::zero();
        }
        inter / union
    }

    pub fn translated(&self, offset: Vec3<T>) -> Self {
        Self { center: self.center + offset, ..*self }
    }
}

/// A labeled physical object with its overlay (`o_b`) and interaction (`i_b`)
/// suitability ratings.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalEntity<T = f64> {
    pub(crate) id: String,
    pub(crate) label: String,
    pub(crate) bbox: Box3<T>,
    pub(crate) overlay_rating: T,
    pub(crate) interaction_rating: T,
}

fn check_rating<T: Real>(id: &str, field: &'static str, value: T) -> Result<(), SceneError> {
    if !(value >= T::zero() && value <= T::one()) {
        return Err(SceneError::RatingOutOfRange {
            id: id.to_string(),
            field,
            value: value.as_f64(),
        });
    }
    Ok(())
}

impl<T: Real> PhysicalEntity<T> {
    pub fn new(
        id: impl Into<String>,
        label: impl Into<String>,
        bbox: Box3<T>,
        overlay_rating: T,
        interaction_rating: T,
    ) -> Result<Self, SceneError> {
        let id = id.into();
        if id.is_empty() {
            return Err(SceneError::EmptyId);
        }
        check_rating(&id, "overlay_rating", overlay_rating)?;
        check_rating(&id, "interaction_rating", interaction_rating)?;
        Ok(Self { id, label: label.into(), bbox, overlay_rating, interaction_rating })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn bbox(&self) -> &Box3<T> {
        &self.bbox
    }

    pub fn overlay_rating(&self) -> T {
        self.overlay_rating
    }

    pub fn interaction_rating(&self) -> T {
        self.interaction_rating
    }

    pub fn with_overlay_rating(mut self, value: T) -> Result<Self, SceneError> {
        check_rating(&self.id, "overlay_rating", value)?;
        self.overlay_rating = value;
        Ok(self)
    }

    pub fn with_interaction_rating(mut self, value: T) -> Result<Self, SceneError> {
        check_rating(&self.id, "interaction_rating", value)?;
        self.interaction_rating = value;
        Ok(self)
    }

    pub fn with_box(mut self, bbox: Box3<T>) -> Self {
        self.bbox = bbox;
        self
    }
}

/// A rectangular virtual widget with a physical size and an interaction
/// frequency `f_v`.
#[derive(Debug, Clone, PartialEq)]
pub struct UiElement<T = f64> {
    id: String,
    name: String,
    width: T,
    height: T,
    interaction_frequency: T,
}

impl<T: Real> UiElement<T> {
    pub fn new(
        id: impl Into<String>,
        name: impl Into<String>,
        width: T,
        height: T,
        interaction_frequency: T,
    ) -> Result<Self, SceneError> {
        let id = id.into();
        if id.is_empty() {
            return Err(SceneError::EmptyId);
        }
        if !(width > T::zero() && height > T::zero() && width.is_finite() && height.is_finite()) {
            return Err(SceneError::NonPositiveSize { id });
        }
        let f = interaction_frequency;
        if !(f >= T::zero() && f <= T::one()) {
            return Err(SceneError::FrequencyOutOfRange { id, value: f.as_f64() });
        }
        Ok(Self { id, name: name.into(), width, height, interaction_frequency })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn width(&self) -> T {
        self.width
    }

    pub fn height(&self) -> T {
        self.height
    }

    pub fn interaction_frequency(&self) -> T {
        self.interaction_frequency
    }
}

/// The optimizer's input world.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene<T = f64> {
    user: UserPose<T>,
    entities: Vec<PhysicalEntity<T>>,
    elements: Vec<UiElement<T>>,
}

impl<T: Real> Scene<T> {
    /// Validates that ids are unique across entities and elements.
    pub fn new(
        user: UserPose<T>,
        entities: Vec<PhysicalEntity<T>>,
        elements: Vec<UiElement<T>>,
    ) -> Result<Self, SceneError> {
        let mut seen = BTreeSet::new();
        let ids = entities.iter().map(|e| e.id()).chain(elements.iter().map(|e| e.id()));
        for id in ids {
            if !seen.insert(id) {
                return Err(SceneError::DuplicateId(id.to_string()));
            }
        }
        Ok(Self { user, entities, elements })
    }

    pub fn user(&self) -> &UserPose<T> {
        &self.user
    }

    pub fn entities(&self) -> &[PhysicalEntity<T>] {
        &self.entities
    }

    pub fn elements(&self) -> &[UiElement<T>] {
        &self.elements
    }

    pub fn entity(&self, id: &str) -> Option<&PhysicalEntity<T>> {
        self.entities.iter().find(|e| e.id() == id)
    }

    pub fn element(&self, id: &str) -> Option<&UiElement<T>> {
        self.elements.iter().find(|e| e.id() == id)
    }

    pub fn element_index(&self, id: &str) -> Option<usize> {
        self.elements.iter().position(|e| e.id() == id)
    }

    /// Returns a copy with the entity list replaced.
    pub fn with_entities(&self, entities: Vec<PhysicalEntity<T>>) -> Result<Self, SceneError> {
        Self::new(self.user, entities, self.elements.clone())
    }

    /// Rigidly translates the user and every entity.
    pub fn translated(&self, offset: Vec3<T>) -> Self {
        Self {
            user: self.user.translated(offset),
            entities: self
                .entities
                .iter()
                .map(|e| e.clone().with_box(e.bbox.translated(offset)))
                .collect(),
            elements: self.elements.clone(),
        }
    }
}

/// One 3D position per element; elements always face the user's eye.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout<T = f64> {
    positions: BTreeMap<String, Vec3<T>>,
}

impl<T: Real> Layout<T> {
    pub fn new(positions: BTreeMap<String, Vec3<T>>) -> Result<Self, SceneError> {
        for (id, p) in &positions {
            check_finite(*p, &format!("position of `{id}`"))?;
        }
        Ok(Self { positions })
    }

    /// Builds a layout from positions listed in scene element order.
    pub fn from_ordered(scene: &Scene<T>, positions: &[Vec3<T>]) -> Result<Self, SceneError> {
        let mut map = BTreeMap::new();
        for (i, el) in scene.elements().iter().enumerate() {
            let p = positions
                .get(i)
                .copied()
                .ok_or_else(|| SceneError::MissingPosition(el.id().to_string()))?;
            map.insert(el.id().to_string(), p);
        }
        Self::new(map)
    }

    /// Checks that this layout places exactly the scene's elements.
    pub fn validate_for(&self, scene: &Scene<T>) -> Result<(), SceneError> {
        for el in scene.elements() {
            if !self.positions.contains_key(el.id()) {
                return Err(SceneError::MissingPosition(el.id().to_string()));
            }
        }
        for id in self.positions.keys() {
            if scene.element(id).is_none() {
                return Err(SceneError::UnknownElement(id.clone()));
            }
        }
        Ok(())
    }

    /// Positions in scene element order.
    pub fn ordered(&self, scene: &Scene<T>) -> Result<Vec<Vec3<T>>, SceneError> {
        self.validate_for(scene)?;
        Ok(scene.elements().iter().map(|e| self.positions[e.id()]).collect())
    }

    pub fn position(&self, id: &str) -> Option<Vec3<T>> {
        self.positions.get(id).copied()
    }

    pub fn positions(&self) -> &BTreeMap<String, Vec3<T>> {
        &self.positions
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn translated(&self, offset: Vec3<T>) -> Self {
        Self {
            positions: self.positions.iter().map(|(k, p)| (k.clone(), *p + offset)).collect(),
        }
    }
}
