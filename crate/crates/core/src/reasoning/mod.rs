//! Rating elicitation from a vision-language model: prompt assembly, response
//! parsing, aggregation over model instances, and mapping onto entities.

mod parse;
mod prompt;
mod provider;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scene::{normalize_rating, PhysicalEntity, SceneError};

pub use parse::{classify_reason, parse_response, render_responses, ParseOutcome};
pub use prompt::{build_context_prompt, build_query_prompt, context_text, few_shot_block, MONITOR_REFINEMENT, RESPONSE_FORMAT};
pub use provider::{
    run_instances, HttpConfig, HttpProvider, MockFixture, MockProvider, ProviderError, ProviderRequest, RatingProvider,
    ENV_API_KEY, ENV_ENDPOINT,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReasoningError {
    #[error("invalid query: {0}")]
    InvalidQuery(String),
    #[error("no well-formed rating line in response ({} diagnostics)", diagnostics.len())]
    NoRatings { diagnostics: Vec<String> },
    #[error("no instance returned ratings")]
    NoInstances,
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Scene(#[from] SceneError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RatingMode {
    Overlay,
    Interaction,
}

impl RatingMode {
    pub fn name(self) -> &'static str {
        match self {
            RatingMode::Overlay => "overlay",
            RatingMode::Interaction => "interaction",
        }
    }
}

impl std::str::FromStr for RatingMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "overlay" => Ok(RatingMode::Overlay),
            "interaction" => Ok(RatingMode::Interaction),
            other => Err(format!("unknown rating mode `{other}` (expected overlay or interaction)")),
        }
    }
}

/// Placement factor named as the primary reason. Declaration order is the
/// tie-break order for modal categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReasonCategory {
    Functionality,
    Aesthetics,
    Social,
    HealthSafety,
    Other,
    Unclassified,
}

impl ReasonCategory {
    pub const ALL: [ReasonCategory; 6] = [
        ReasonCategory::Functionality,
        ReasonCategory::Aesthetics,
        ReasonCategory::Social,
        ReasonCategory::HealthSafety,
        ReasonCategory::Other,
        ReasonCategory::Unclassified,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ReasonCategory::Functionality => "functionality",
            ReasonCategory::Aesthetics => "aesthetics",
            ReasonCategory::Social => "social",
            ReasonCategory::HealthSafety => "health_safety",
            ReasonCategory::Other => "other",
            ReasonCategory::Unclassified => "unclassified",
        }
    }

    /// Parses the names above plus a few spellings seen in survey exports.
    pub fn parse(s: &str) -> Option<Self> {
        let k = s.trim().to_ascii_lowercase().replace(['&', '-', ' '], "_");
        Some(match k.as_str() {
            "functionality" | "functional" | "f" => ReasonCategory::Functionality,
            "aesthetics" | "aesthetic" | "a" => ReasonCategory::Aesthetics,
            "social" | "social_acceptability" | "s" => ReasonCategory::Social,
            "health_safety" | "health___safety" | "health__safety" | "health" | "safety" | "h" => {
                ReasonCategory::HealthSafety
            }
            "other" | "o" => ReasonCategory::Other,
            "unclassified" | "" => ReasonCategory::Unclassified,
            _ => return None,
        })
    }
}

/// Highlighted area of the image being rated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AreaAnnotation {
    pub index: u32,
    /// Pixel rectangle `[xmin, ymin, xmax, ymax]`.
    #[serde(rename = "box")]
    pub box2d: [f64; 4],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entity_id: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AreaStats {
    pub median: f64,
    pub sd: f64,
}

/// A previously rated image with per-area survey statistics, area 1 first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FewShotExample {
    pub image: String,
    pub areas: Vec<AreaStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatingQuery {
    pub mode: RatingMode,
    pub image: String,
    pub areas: Vec<AreaAnnotation>,
    #[serde(default)]
    pub few_shot: Vec<FewShotExample>,
    #[serde(default)]
    pub monitor_refinement: bool,
}

impl RatingQuery {
    pub fn validate(&self) -> Result<(), ReasoningError> {
        let bad = |m: String| Err(ReasoningError::InvalidQuery(m));
        if self.areas.is_empty() {
            return bad("at least one area is required".into());
        }
        let mut idx: Vec<u32> = self.areas.iter().map(|a| a.index).collect();
        idx.sort_unstable();
        if idx.iter().enumerate().any(|(i, &k)| k as usize != i + 1) {
            return bad("area indices must be unique and run 1..n".into());
        }
        for a in &self.areas {
            let [x0, y0, x1, y1] = a.box2d;
            if !(x0 < x1 && y0 < y1) {
                return bad(format!("area {} has an empty rectangle", a.index));
            }
        }
        for ex in &self.few_shot {
            if ex.areas.is_empty() {
                return bad(format!("few-shot example `{}` has no areas", ex.image));
            }
            for s in &ex.areas {
                if !(1.0..=5.0).contains(&s.median) || !(s.sd >= 0.0 && s.sd.is_finite()) {
                    return bad(format!("few-shot example `{}` has median outside 1..5 or negative sd", ex.image));
                }
            }
        }
        Ok(())
    }

    /// Provider request for one model instance.
    pub fn request(&self, seed: u64) -> ProviderRequest {
        ProviderRequest {
            context: build_context_prompt(self),
            prompt: build_query_prompt(self.mode),
            image: self.image.clone(),
            attachments: self.few_shot.iter().map(|e| e.image.clone()).collect(),
            mode: self.mode,
            seed,
        }
    }
}

/// One parsed answer line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatingResponse {
    pub area: u32,
    pub score: u8,
    pub reason: String,
    pub category: ReasonCategory,
}

/// Per-area aggregate over model instances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AreaAggregate {
    pub area: u32,
    pub median: f64,
    /// Population standard deviation.
    pub sd: f64,
    pub category_mode: ReasonCategory,
    pub n: usize,
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { (v[m - 1] + v[m]) / 2.0 })
}

pub fn population_sd(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    Some((values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt())
}

/// Most frequent category, ties resolved by declaration order.
pub fn category_mode(categories: &[ReasonCategory]) -> Option<ReasonCategory> {
    let mut counts: BTreeMap<ReasonCategory, usize> = BTreeMap::new();
    for c in categories {
        *counts.entry(*c).or_default() += 1;
    }
    let mut best: Option<(ReasonCategory, usize)> = None;
    for (c, n) in counts {
        if best.map_or(true, |(_, b)| n > b) {
            best = Some((c, n));
        }
    }
    best.map(|(c, _)| c)
}

/// Median, SD and modal reason per area across instances, ascending by area.
/// Areas an instance skipped simply contribute nothing for that instance.
pub fn aggregate_ratings(instances: &[Vec<RatingResponse>]) -> Vec<AreaAggregate> {
    let mut per_area: BTreeMap<u32, (Vec<f64>, Vec<ReasonCategory>)> = BTreeMap::new();
    for inst in instances {
        for r in inst {
            let e = per_area.entry(r.area).or_default();
            e.0.push(f64::from(r.score));
            e.1.push(r.category);
        }
    }
    per_area
        .into_iter()
        .map(|(area, (scores, cats))| AreaAggregate {
            area,
            median: median(&scores).expect("non-empty"),
            sd: population_sd(&scores).expect("non-empty"),
            category_mode: category_mode(&cats).expect("non-empty"),
            n: scores.len(),
        })
        .collect()
}

/// Rounds a median to an integer score, halves going up.
pub fn round_median(median: f64) -> i64 {
    ((median + 0.5).floor() as i64).clamp(1, 5)
}

/// Outcome of writing aggregates onto entities.
#[derive(Debug, Clone, PartialEq)]
pub struct EntityUpdate {
    pub entities: Vec<PhysicalEntity>,
    /// Areas without a link or linked to an unknown entity.
    pub unlinked: Vec<String>,
}

/// Sets the mode's rating on each linked entity to the normalized, rounded median.
pub fn ratings_to_entity(
    aggregates: &[AreaAggregate],
    links: &BTreeMap<u32, String>,
    mode: RatingMode,
    entities: &[PhysicalEntity],
) -> Result<EntityUpdate, ReasoningError> {
    let mut out = entities.to_vec();
    let mut unlinked = Vec::new();
    for agg in aggregates {
        let Some(id) = links.get(&agg.area) else {
            unlinked.push(format!("area {} has no linked entity", agg.area));
            continue;
        };
        let Some(slot) = out.iter_mut().find(|e| e.id() == id) else {
            unlinked.push(format!("area {} links unknown entity `{id}`", agg.area));
            continue;
        };
        let value = normalize_rating::<f64>(round_median(agg.median))?;
        let updated = match mode {
            RatingMode::Overlay => slot.clone().with_overlay_rating(value)?,
            RatingMode::Interaction => slot.clone().with_interaction_rating(value)?,
        };
        *slot = updated;
    }
    Ok(EntityUpdate { entities: out, unlinked })
}

/// Ratings file body: `{"mode": .., "areas": [..]}` with a trailing newline.
pub fn ratings_to_json(mode: RatingMode, aggregates: &[AreaAggregate]) -> String {
    #[derive(Serialize)]
    struct Doc<'a> {
        mode: RatingMode,
        areas: &'a [AreaAggregate],
    }
    let mut s = serde_json::to_string_pretty(&Doc { mode, areas: aggregates }).expect("serializable");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{Box3, Vec3};

    fn resp(area: u32, score: u8, category: ReasonCategory) -> RatingResponse {
        RatingResponse { area, score, reason: String::new(), category }
    }

    #[test]
    fn single_instance_aggregate() {
        let a = aggregate_ratings(&[vec![resp(1, 3, ReasonCategory::Other)]]);
        assert_eq!(a[0].median, 3.0);
        assert_eq!(a[0].sd, 0.0);
    }

    #[test]
    fn skewed_scores() {
        let a = aggregate_ratings(&[
            vec![resp(1, 1, ReasonCategory::Social)],
            vec![resp(1, 1, ReasonCategory::Social)],
            vec![resp(1, 5, ReasonCategory::Other)],
        ]);
        assert_eq!(a[0].median, 1.0);
        assert!((a[0].sd - (32.0f64 / 9.0).sqrt()).abs() < 1e-12);
        assert_eq!(a[0].category_mode, ReasonCategory::Social);
        assert_eq!(a[0].n, 3);
    }

    #[test]
    fn even_median_and_mode_tie_break() {
        assert_eq!(median(&[2.0, 3.0]), Some(2.5));
        assert_eq!(
            category_mode(&[ReasonCategory::Other, ReasonCategory::Aesthetics, ReasonCategory::Social, ReasonCategory::Aesthetics, ReasonCategory::Social]),
            Some(ReasonCategory::Aesthetics)
        );
        assert_eq!(category_mode(&[]), None);
    }

    #[test]
    fn median_rounding() {
        assert_eq!(round_median(2.5), 3);
        assert_eq!(round_median(2.49), 2);
        assert_eq!(round_median(5.0), 5);
        assert_eq!(round_median(1.0), 1);
    }

    #[test]
    fn entity_update() {
        let b = Box3::new(Vec3::zero(), Vec3::splat(0.5)).unwrap();
        let es = vec![PhysicalEntity::new("desk", "desk", b, 0.5, 0.5).unwrap()];
        let aggs = vec![
            AreaAggregate { area: 1, median: 5.0, sd: 0.0, category_mode: ReasonCategory::Other, n: 1 },
            AreaAggregate { area: 2, median: 2.5, sd: 0.5, category_mode: ReasonCategory::Other, n: 2 },
        ];
        let links = BTreeMap::from([(1, "desk".to_string())]);
        let up = ratings_to_entity(&aggs, &links, RatingMode::Overlay, &es).unwrap();
        assert_eq!(up.entities[0].overlay_rating(), 1.0);
        assert_eq!(up.entities[0].interaction_rating(), 0.5);
        assert_eq!(up.unlinked.len(), 1);
        let links = BTreeMap::from([(2, "desk".to_string())]);
        let up = ratings_to_entity(&aggs, &links, RatingMode::Interaction, &es).unwrap();
        assert_eq!(up.entities[0].interaction_rating(), 0.5);
        let up = ratings_to_entity(&aggs[..0], &links, RatingMode::Interaction, &es).unwrap();
        assert_eq!(up.entities, es);
    }

    #[test]
    fn query_validation() {
        let mut q = RatingQuery {
            mode: RatingMode::Overlay,
            image: "i".into(),
            areas: vec![AreaAnnotation { index: 1, box2d: [0.0, 0.0, 1.0, 1.0], entity_id: None }],
            few_shot: vec![],
            monitor_refinement: false,
        };
        assert!(q.validate().is_ok());
        q.areas.push(AreaAnnotation { index: 3, box2d: [0.0, 0.0, 1.0, 1.0], entity_id: None });
        assert!(q.validate().is_err());
        q.areas.clear();
        assert!(q.validate().is_err());
    }

    #[test]
    fn category_names_round_trip() {
        for c in ReasonCategory::ALL {
            assert_eq!(ReasonCategory::parse(c.name()), Some(c));
        }
        assert_eq!(ReasonCategory::parse("Health & Safety"), Some(ReasonCategory::HealthSafety));
        assert_eq!(ReasonCategory::parse("bogus"), None);
    }
}
