//! JSON documents for scenes, entity lists and layouts.
//!
//! Floats are written in shortest round-trip form, so `load(save(x)) == x`
//! bit for bit. Output is pretty-printed with a trailing newline and keys in
//! a fixed order; layouts are sorted by element id.

use std::collections::BTreeMap;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{Box3, Layout, PhysicalEntity, Scene, SceneError, UiElement, UserPose, Vec3};
use crate::num::Real;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "T: Real")]
struct UserDoc<T> {
    eye: Vec3<T>,
    forward: Vec3<T>,
    up: Vec3<T>,
}

/// An entity as stored in an entities file, where ratings may still be unset
/// (freshly segmented boxes carry `null` ratings until the reasoning step).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "T: Real")]
pub struct EntityRecord<T = f64> {
    pub id: String,
    pub label: String,
    #[serde(rename = "box")]
    pub bbox: BoxRecord<T>,
    pub overlay_rating: Option<T>,
    pub interaction_rating: Option<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "T: Real")]
pub struct BoxRecord<T = f64> {
    pub center: Vec3<T>,
    pub half_extents: Vec3<T>,
}

impl<T: Real> From<&Box3<T>> for BoxRecord<T> {
    fn from(b: &Box3<T>) -> Self {
        Self { center: b.center(), half_extents: b.half_extents() }
    }
}

impl<T: Real> EntityRecord<T> {
    pub fn from_entity(e: &PhysicalEntity<T>) -> Self {
        Self {
            id: e.id().to_string(),
            label: e.label().to_string(),
            bbox: BoxRecord::from(e.bbox()),
            overlay_rating: Some(e.overlay_rating()),
            interaction_rating: Some(e.interaction_rating()),
        }
    }

    pub fn to_box(&self) -> Result<Box3<T>, SceneError> {
        Box3::new(self.bbox.center, self.bbox.half_extents).map_err(|e| match e {
            SceneError::NonFinite { .. } => SceneError::NonFinite {
                what: format!("box of entity `{}`", self.id),
            },
            SceneError::NonPositiveExtent { .. } => SceneError::NonPositiveExtent {
                what: format!("box of entity `{}`", self.id),
            },
            other => other,
        })
    }

    /// Converts to a rated entity; unset ratings are an error.
    pub fn to_entity(&self) -> Result<PhysicalEntity<T>, SceneError> {
        let o = self.overlay_rating.ok_or_else(|| SceneError::MissingRating {
            id: self.id.clone(),
            field: "overlay_rating",
        })?;
        let i = self.interaction_rating.ok_or_else(|| SceneError::MissingRating {
            id: self.id.clone(),
            field: "interaction_rating",
        })?;
        PhysicalEntity::new(self.id.clone(), self.label.clone(), self.to_box()?, o, i)
    }

    /// Converts to a rated entity, substituting `neutral` for unset ratings.
    pub fn to_entity_or(&self, neutral: T) -> Result<PhysicalEntity<T>, SceneError> {
        PhysicalEntity::new(
            self.id.clone(),
            self.label.clone(),
            self.to_box()?,
            self.overlay_rating.unwrap_or(neutral),
            self.interaction_rating.unwrap_or(neutral),
        )
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "T: Real")]
struct EntityDoc<T> {
    id: String,
    label: String,
    #[serde(rename = "box")]
    bbox: BoxRecord<T>,
    overlay_rating: T,
    interaction_rating: T,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "T: Real")]
struct ElementDoc<T> {
    id: String,
    name: String,
    width: T,
    height: T,
    interaction_frequency: T,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "T: Real")]
struct SceneDoc<T> {
    user: UserDoc<T>,
    #[serde(default = "Vec::new")]
    entities: Vec<EntityDoc<T>>,
    #[serde(default = "Vec::new")]
    elements: Vec<ElementDoc<T>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "T: Real")]
struct EntitiesDoc<T> {
    entities: Vec<EntityRecord<T>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "T: Real")]
struct LayoutEntry<T> {
    element_id: String,
    position: Vec3<T>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "T: Real")]
struct LayoutDoc<T> {
    layouts: Vec<LayoutEntry<T>>,
}

pub(crate) fn parse_json<D: DeserializeOwned>(text: &str) -> Result<D, SceneError> {
    let mut de = serde_json::Deserializer::from_str(text);
    let value = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        SceneError::Parse {
            path,
            line: inner.line(),
            column: inner.column(),
            message: inner.to_string(),
        }
    })?;
    de.end().map_err(|e| SceneError::Parse {
        path: ".".into(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    Ok(value)
}

pub(crate) fn to_pretty<S: Serialize>(doc: &S) -> String {
    let mut out = serde_json::to_string_pretty(doc).expect("documents serialize");
    out.push('\n');
    out
}

/// Parses and validates a scene document.
pub fn load_scene<T: Real>(text: &str) -> Result<Scene<T>, SceneError> {
    let doc: SceneDoc<T> = parse_json(text)?;
    let user = UserPose::new(doc.user.eye, doc.user.forward, doc.user.up)?;
    let entities = doc
        .entities
        .into_iter()
        .map(|e| {
            EntityRecord {
                id: e.id,
                label: e.label,
                bbox: e.bbox,
                overlay_rating: Some(e.overlay_rating),
                interaction_rating: Some(e.interaction_rating),
            }
            .to_entity()
        })
        .collect::<Result<Vec<_>, _>>()?;
    let elements = doc
        .elements
        .into_iter()
        .map(|e| UiElement::new(e.id, e.name, e.width, e.height, e.interaction_frequency))
        .collect::<Result<Vec<_>, _>>()?;
    Scene::new(user, entities, elements)
}

pub fn save_scene<T: Real>(scene: &Scene<T>) -> String {
    let u = scene.user();
    let doc = SceneDoc {
        user: UserDoc { eye: u.eye(), forward: u.forward(), up: u.up() },
        entities: scene
            .entities()
            .iter()
            .map(|e| EntityDoc {
                id: e.id().to_string(),
                label: e.label().to_string(),
                bbox: BoxRecord::from(e.bbox()),
                overlay_rating: e.overlay_rating(),
                interaction_rating: e.interaction_rating(),
            })
            .collect(),
        elements: scene
            .elements()
            .iter()
            .map(|e| ElementDoc {
                id: e.id().to_string(),
                name: e.name().to_string(),
                width: e.width(),
                height: e.height(),
                interaction_frequency: e.interaction_frequency(),
            })
            .collect(),
    };
    to_pretty(&doc)
}

/// Parses an entities file; ids must be unique and boxes valid, ratings may be null.
pub fn load_entities<T: Real>(text: &str) -> Result<Vec<EntityRecord<T>>, SceneError> {
    let doc: EntitiesDoc<T> = parse_json(text)?;
    let mut seen = std::collections::BTreeSet::new();
    for e in &doc.entities {
        if e.id.is_empty() {
            return Err(SceneError::EmptyId);
        }
        if !seen.insert(e.id.as_str()) {
            return Err(SceneError::DuplicateId(e.id.clone()));
        }
        e.to_box()?;
        for (field, r) in [("overlay_rating", e.overlay_rating), ("interaction_rating", e.interaction_rating)] {
            if let Some(r) = r {
                if !(r >= T::zero() && r <= T::one()) {
                    return Err(SceneError::RatingOutOfRange { id: e.id.clone(), field, value: r.as_f64() });
                }
            }
        }
    }
    Ok(doc.entities)
}

pub fn save_entities<T: Real>(entities: &[EntityRecord<T>]) -> String {
    to_pretty(&EntitiesDoc { entities: entities.to_vec() })
}

/// Serializes a layout that covers exactly the scene's elements.
pub fn save_layout<T: Real>(layout: &Layout<T>, scene: &Scene<T>) -> Result<String, SceneError> {
    layout.validate_for(scene)?;
    let doc = LayoutDoc {
        layouts: layout
            .positions()
            .iter()
            .map(|(id, p)| LayoutEntry { element_id: id.clone(), position: *p })
            .collect(),
    };
    Ok(to_pretty(&doc))
}

pub fn load_layout<T: Real>(text: &str, scene: &Scene<T>) -> Result<Layout<T>, SceneError> {
    let doc: LayoutDoc<T> = parse_json(text)?;
    let mut map = BTreeMap::new();
    for entry in doc.layouts {
        if map.insert(entry.element_id.clone(), entry.position).is_some() {
            return Err(SceneError::DuplicateId(entry.element_id));
        }
    }
    let layout = Layout::new(map)?;
    layout.validate_for(scene)?;
    Ok(layout)
}
