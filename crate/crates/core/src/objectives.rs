//! Cost terms and the weighted layout objective `Q = Σ_v Σ_o w·c`.
//!
//! Two terms score how UI elements relate to rated physical entities
//! ([`overlay_cost`], [`interaction_cost`]); five AUIT-style terms score the
//! element placement relative to the user and to each other.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::ser::SerializeMap;
use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

use crate::geometry::{trace_element, ElementFrame, GeometryError, Ray, RayExtent, DEFAULT_GRID_N};
use crate::num::Real;
use crate::scene::{Layout, Scene, SceneError, UiElement, UserPose, Vec3};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ObjectiveError {
    #[error("unknown objective term `{0}`")]
    UnknownTerm(String),
    #[error("weight for `{term}` must be finite and non-negative, got {value}")]
    InvalidWeight { term: String, value: f64 },
    #[error("at least one weight must be positive")]
    AllZero,
    #[error("weight override for unknown element `{0}`")]
    UnknownElement(String),
    #[error("invalid objective parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Scene(#[from] SceneError),
}

/// The objective terms, in their canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Term {
    Occlusion,
    LookTowards,
    Distance,
    FieldOfView,
    ConstantViewSize,
    OverlaySuitability,
    InteractionSuitability,
}

impl Term {
    pub const ALL: [Term; 7] = [
        Term::Occlusion,
        Term::LookTowards,
        Term::Distance,
        Term::FieldOfView,
        Term::ConstantViewSize,
        Term::OverlaySuitability,
        Term::InteractionSuitability,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Term::Occlusion => "occlusion",
            Term::LookTowards => "look_towards",
            Term::Distance => "distance",
            Term::FieldOfView => "field_of_view",
            Term::ConstantViewSize => "constant_view_size",
            Term::OverlaySuitability => "overlay_suitability",
            Term::InteractionSuitability => "interaction_suitability",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Term {
    type Err = ObjectiveError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Term::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| ObjectiveError::UnknownTerm(s.to_string()))
    }
}

/// One value per term, indexed by [`Term`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TermValues<T = f64>([T; 7]);

impl<T: Real> Default for TermValues<T> {
    fn default() -> Self {
        Self([T::zero(); 7])
    }
}

impl<T: Real> TermValues<T> {
    pub fn get(&self, term: Term) -> T {
        self.0[term.index()]
    }

    pub fn set(&mut self, term: Term, value: T) {
        self.0[term.index()] = value;
    }

    pub fn iter(&self) -> impl Iterator<Item = (Term, T)> + '_ {
        Term::ALL.into_iter().map(move |t| (t, self.get(t)))
    }
}

/// Serializes in canonical term order, keeping only non-zero entries when
/// `sparse` is set.
struct OrderedTerms<'a, T> {
    values: &'a TermValues<T>,
    sparse: bool,
}

impl<T: Real> Serialize for OrderedTerms<'_, T> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let entries: Vec<_> = self
            .values
            .iter()
            .filter(|(_, v)| !self.sparse || *v != T::zero())
            .collect();
        let mut map = s.serialize_map(Some(entries.len()))?;
        for (t, v) in entries {
            map.serialize_entry(t.name(), &v)?;
        }
        map.end()
    }
}

fn check_weight<T: Real>(term: Term, w: T) -> Result<(), ObjectiveError> {
    if !(w >= T::zero()) || !w.is_finite() {
        return Err(ObjectiveError::InvalidWeight { term: term.name().into(), value: w.as_f64() });
    }
    Ok(())
}

/// Global per-term weights with optional per-element overrides (`w_ij`).
#[derive(Debug, Clone, PartialEq)]
pub struct WeightConfig<T = f64> {
    global: TermValues<T>,
    overrides: BTreeMap<String, BTreeMap<Term, T>>,
}

impl<T: Real> WeightConfig<T> {
    /// Weights must be finite and non-negative. Unlisted terms are zero.
    pub fn new(weights: impl IntoIterator<Item = (Term, T)>) -> Result<Self, ObjectiveError> {
        let mut global = TermValues::default();
        for (t, w) in weights {
            check_weight(t, w)?;
            global.set(t, w);
        }
        Ok(Self { global, overrides: BTreeMap::new() })
    }

    /// The flat objective: every weight zero.
    pub fn zero() -> Self {
        Self { global: TermValues::default(), overrides: BTreeMap::new() }
    }

    pub fn with_override(mut self, element_id: impl Into<String>, term: Term, w: T) -> Result<Self, ObjectiveError> {
        check_weight(term, w)?;
        self.overrides.entry(element_id.into()).or_default().insert(term, w);
        Ok(self)
    }

    pub fn global(&self) -> &TermValues<T> {
        &self.global
    }

    pub fn overrides(&self) -> &BTreeMap<String, BTreeMap<Term, T>> {
        &self.overrides
    }

    pub fn weight(&self, element_id: &str, term: Term) -> T {
        self.overrides
            .get(element_id)
            .and_then(|o| o.get(&term))
            .copied()
            .unwrap_or_else(|| self.global.get(term))
    }

    /// Weights resolved for one element.
    pub fn for_element(&self, element_id: &str) -> TermValues<T> {
        let mut out = self.global;
        if let Some(o) = self.overrides.get(element_id) {
            for (t, w) in o {
                out.set(*t, *w);
            }
        }
        out
    }

    pub fn has_positive(&self) -> bool {
        self.global.iter().any(|(_, w)| w > T::zero())
            || self.overrides.values().flat_map(|o| o.values()).any(|w| *w > T::zero())
    }

    pub fn scaled(&self, factor: T) -> Self {
        let mut global = self.global;
        for t in Term::ALL {
            global.set(t, global.get(t) * factor);
        }
        let overrides = self
            .overrides
            .iter()
            .map(|(k, o)| (k.clone(), o.iter().map(|(t, w)| (*t, *w * factor)).collect()))
            .collect();
        Self { global, overrides }
    }

    /// Checks that every override names an element of the scene.
    pub fn validate_for(&self, scene: &Scene<T>) -> Result<(), ObjectiveError> {
        for id in self.overrides.keys() {
            if scene.element(id).is_none() {
                return Err(ObjectiveError::UnknownElement(id.clone()));
            }
        }
        Ok(())
    }

    /// Parses a weights document:
    /// `{"weights": {"occlusion": 0.3, ...}, "overrides": {"el": {...}}}`.
    /// At least one weight must be positive.
    pub fn from_json(text: &str) -> Result<Self, ObjectiveError> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Doc {
            weights: BTreeMap<String, f64>,
            #[serde(default)]
            overrides: BTreeMap<String, BTreeMap<String, f64>>,
        }
        let doc: Doc = crate::scene::parse_json(text)?;
        let mut cfg = Self::new(
            doc.weights
                .iter()
                .map(|(k, v)| Ok((k.parse::<Term>()?, T::lit(*v))))
                .collect::<Result<Vec<_>, ObjectiveError>>()?,
        )?;
        for (el, terms) in doc.overrides {
            for (k, v) in terms {
                cfg = cfg.with_override(el.clone(), k.parse()?, T::lit(v))?;
            }
        }
        if !cfg.has_positive() {
            return Err(ObjectiveError::AllZero);
        }
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Doc<'a, T: Real> {
            weights: OrderedTerms<'a, T>,
            #[serde(skip_serializing_if = "BTreeMap::is_empty")]
            overrides: BTreeMap<&'a str, BTreeMap<&'static str, T>>,
        }
        let doc = Doc {
            weights: OrderedTerms { values: &self.global, sparse: true },
            overrides: self
                .overrides
                .iter()
                .map(|(k, o)| (k.as_str(), o.iter().map(|(t, w)| (t.name(), *w)).collect()))
                .collect(),
        };
        crate::scene::to_pretty(&doc)
    }
}

/// Shape parameters of the AUIT-style terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct AuitParams<T = f64> {
    /// Preferred distance range from the eye, meters.
    pub d_min: T,
    pub d_max: T,
    /// Field-of-view half angle, radians.
    pub half_angle: T,
    /// Distance at which the element has its intended apparent size.
    pub reference_distance: T,
}

impl<T: Real> Default for AuitParams<T> {
    fn default() -> Self {
        Self {
            d_min: T::lit(0.3),
            d_max: T::lit(0.7),
            half_angle: T::lit(45f64.to_radians()),
            reference_distance: T::lit(0.5),
        }
    }
}

impl<T: Real> AuitParams<T> {
    pub fn validate(&self) -> Result<(), ObjectiveError> {
        let ok = self.d_min > T::zero()
            && self.d_max >= self.d_min
            && self.half_angle > T::zero()
            && self.reference_distance > T::zero();
        if ok {
            Ok(())
        } else {
            Err(ObjectiveError::InvalidParams(format!("{self:?}")))
        }
    }
}

/// Everything needed to evaluate `Q` for a scene.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveConfig<T = f64> {
    pub weights: WeightConfig<T>,
    pub params: AuitParams<T>,
    pub grid_n: usize,
    pub extent: RayExtent,
}

impl<T: Real> ObjectiveConfig<T> {
    pub fn new(weights: WeightConfig<T>) -> Self {
        Self { weights, params: AuitParams::default(), grid_n: DEFAULT_GRID_N, extent: RayExtent::default() }
    }

    pub fn with_grid(mut self, grid_n: usize) -> Self {
        self.grid_n = grid_n;
        self
    }
}

/// `p_b`: penalty for overlaying a box rated `o_b`; boxes above 0.5 are free.
pub fn overlay_penalty<T: Real>(o_b: T) -> T {
    let half = T::lit(0.5);
    if o_b <= half {
        half - o_b
    } else {
        T::zero()
    }
}

fn falloff<T: Real>(d_h: T) -> T {
    (T::lit(-5.0) * d_h).exp()
}

/// `Σ_r Σ_{h∈H(r)} p_b·e^(−5·d_h)` over the element's ray grid.
pub fn overlay_cost<T: Real>(
    scene: &Scene<T>,
    element: &UiElement<T>,
    position: Vec3<T>,
    grid_n: usize,
    extent: RayExtent,
) -> Result<T, GeometryError> {
    let penalties: Vec<T> = scene.entities().iter().map(|e| overlay_penalty(e.overlay_rating())).collect();
    let mut sum = T::zero();
    trace_element(scene, element, position, grid_n, extent, |_, k, hit| {
        sum = sum + penalties[k] * falloff(hit.d_h);
    })?;
    Ok(sum)
}

/// `Σ_r Σ_{h∈H(r)} f_v·(0.5 − i_b)·e^(−5·d_h)`; negative over boxes that
/// are good to interact with.
pub fn interaction_cost<T: Real>(
    scene: &Scene<T>,
    element: &UiElement<T>,
    position: Vec3<T>,
    grid_n: usize,
    extent: RayExtent,
) -> Result<T, GeometryError> {
    let f_v = element.interaction_frequency();
    if f_v == T::zero() {
        return Ok(T::zero());
    }
    let half = T::lit(0.5);
    let factors: Vec<T> = scene.entities().iter().map(|e| half - e.interaction_rating()).collect();
    let mut sum = T::zero();
    trace_element(scene, element, position, grid_n, extent, |_, k, hit| {
        sum = sum + f_v * factors[k] * falloff(hit.d_h);
    })?;
    Ok(sum)
}

/// Angle between the user's forward vector and the eye→element direction.
fn view_angle<T: Real>(user: &UserPose<T>, position: Vec3<T>) -> T {
    match (position - user.eye()).normalized() {
        Some(dir) => dir.dot(user.forward()).max(-T::one()).min(T::one()).acos(),
        None => T::zero(),
    }
}

/// `(1 − cos θ) / 2`.
pub fn look_towards_cost<T: Real>(user: &UserPose<T>, position: Vec3<T>) -> T {
    match (position - user.eye()).normalized() {
        Some(dir) => (T::one() - dir.dot(user.forward())) * T::lit(0.5),
        None => T::zero(),
    }
}

/// Zero inside `[d_min, d_max]`, `((d − bound)/bound)²` outside.
pub fn distance_cost<T: Real>(user: &UserPose<T>, position: Vec3<T>, d_min: T, d_max: T) -> T {
    let d = position.distance(user.eye());
    let rel = if d < d_min {
        (d - d_min) / d_min
    } else if d > d_max {
        (d - d_max) / d_max
    } else {
        return T::zero();
    };
    rel * rel
}

/// Zero within `half_angle` of forward, `((θ − half)/half)²` beyond.
pub fn fov_cost<T: Real>(user: &UserPose<T>, position: Vec3<T>, half_angle: T) -> T {
    let theta = view_angle(user, position);
    if theta <= half_angle {
        return T::zero();
    }
    let rel = (theta - half_angle) / half_angle;
    rel * rel
}

/// `(1 − reference_distance / d)²`.
pub fn view_size_cost<T: Real>(user: &UserPose<T>, position: Vec3<T>, reference_distance: T) -> T {
    let d = position.distance(user.eye());
    let rel = T::one() - reference_distance / d;
    rel * rel
}

/// Fraction of element `index`'s rays that pass through another element's
/// rectangle before reaching it, summed over the other elements.
pub fn occlusion_cost<T: Real>(
    scene: &Scene<T>,
    positions: &[Vec3<T>],
    index: usize,
    grid_n: usize,
) -> Result<T, GeometryError> {
    let user = scene.user();
    let frames = scene
        .elements()
        .iter()
        .zip(positions)
        .map(|(el, p)| ElementFrame::billboard(user, el, *p))
        .collect::<Result<Vec<_>, _>>()?;
    occlusion_from_frames(user, &frames, index, grid_n)
}

fn occlusion_from_frames<T: Real>(
    user: &UserPose<T>,
    frames: &[ElementFrame<T>],
    index: usize,
    grid_n: usize,
) -> Result<T, GeometryError> {
    if frames.len() < 2 {
        return Ok(T::zero());
    }
    let rays: Vec<(Ray<T>, T)> = frames[index]
        .grid(grid_n)?
        .into_iter()
        .filter_map(|s| Ray::towards(user.eye(), s))
        .collect();
    if rays.is_empty() {
        return Ok(T::zero());
    }
    let n = T::lit(rays.len() as f64);
    let margin = T::one() - T::lit(1e3 * T::PARALLEL_EPSILON);
    let mut total = T::zero();
    for (j, other) in frames.iter().enumerate() {
        if j == index {
            continue;
        }
        let blocked = rays
            .iter()
            .filter(|(ray, t_sample)| other.intersect(ray).is_some_and(|t| t < *t_sample * margin))
            .count();
        total = total + T::lit(blocked as f64) / n;
    }
    Ok(total)
}

/// Per-term costs of one element and its weighted subtotal.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementCost<T = f64> {
    pub element_id: String,
    pub costs: TermValues<T>,
    pub weights: TermValues<T>,
    pub weighted_total: T,
}

/// Per-element, per-term costs `c_ij` and the total `Q`.
#[derive(Debug, Clone, PartialEq)]
pub struct CostReport<T = f64> {
    pub elements: Vec<ElementCost<T>>,
    pub total: T,
}

impl<T: Real> CostReport<T> {
    pub fn element(&self, id: &str) -> Option<&ElementCost<T>> {
        self.elements.iter().find(|e| e.element_id == id)
    }

    /// Unweighted sum of one term over all elements.
    pub fn term_total(&self, term: Term) -> T {
        self.elements.iter().fold(T::zero(), |acc, e| acc + e.costs.get(term))
    }

    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct El<'a, T: Real> {
            element_id: &'a str,
            costs: OrderedTerms<'a, T>,
            weighted_total: T,
        }
        #[derive(Serialize)]
        struct Doc<'a, T: Real> {
            total: T,
            elements: Vec<El<'a, T>>,
        }
        let doc = Doc {
            total: self.total,
            elements: self
                .elements
                .iter()
                .map(|e| El {
                    element_id: &e.element_id,
                    costs: OrderedTerms { values: &e.costs, sparse: false },
                    weighted_total: e.weighted_total,
                })
                .collect(),
        };
        crate::scene::to_pretty(&doc)
    }
}

/// Evaluates every term for every element. With `skip_unweighted`, terms whose
/// weight is zero are left at zero without being computed.
pub(crate) fn evaluate<T: Real>(
    scene: &Scene<T>,
    positions: &[Vec3<T>],
    config: &ObjectiveConfig<T>,
    skip_unweighted: bool,
) -> Result<CostReport<T>, ObjectiveError> {
    let user = scene.user();
    let p = &config.params;
    let frames = scene
        .elements()
        .iter()
        .zip(positions)
        .map(|(el, pos)| ElementFrame::billboard(user, el, *pos))
        .collect::<Result<Vec<_>, _>>()?;
    let mut elements = Vec::with_capacity(positions.len());
    let mut total = T::zero();
    for (i, el) in scene.elements().iter().enumerate() {
        let pos = positions[i];
        let weights = config.weights.for_element(el.id());
        let mut costs = TermValues::default();
        for term in Term::ALL {
            if skip_unweighted && weights.get(term) == T::zero() {
                continue;
            }
            let c = match term {
                Term::Occlusion => occlusion_from_frames(user, &frames, i, config.grid_n)?,
                Term::LookTowards => look_towards_cost(user, pos),
                Term::Distance => distance_cost(user, pos, p.d_min, p.d_max),
                Term::FieldOfView => fov_cost(user, pos, p.half_angle),
                Term::ConstantViewSize => view_size_cost(user, pos, p.reference_distance),
                Term::OverlaySuitability => overlay_cost(scene, el, pos, config.grid_n, config.extent)?,
                Term::InteractionSuitability => {
                    interaction_cost(scene, el, pos, config.grid_n, config.extent)?
                }
            };
            costs.set(term, c);
        }
        let weighted_total = costs
            .iter()
            .filter(|(t, _)| weights.get(*t) != T::zero())
            .fold(T::zero(), |acc, (t, c)| acc + weights.get(t) * c);
        total = total + weighted_total;
        elements.push(ElementCost { element_id: el.id().to_string(), costs, weights, weighted_total });
    }
    Ok(CostReport { elements, total })
}

/// Full cost report `Q` for a layout.
pub fn total_objective<T: Real>(
    scene: &Scene<T>,
    layout: &Layout<T>,
    config: &ObjectiveConfig<T>,
) -> Result<CostReport<T>, ObjectiveError> {
    config.weights.validate_for(scene)?;
    config.params.validate()?;
    let positions = layout.ordered(scene)?;
    evaluate(scene, &positions, config, false)
}
