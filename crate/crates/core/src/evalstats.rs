//! Rater-population comparison: Mann-Whitney U, per-rater divergence counts,
//! a bootstrap test over those counts, and agreement of modal reasons.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::reasoning::{category_mode, median, RatingMode, ReasonCategory};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("both samples must be non-empty")]
    EmptySample,
    #[error("iterations must be at least 1")]
    NoIterations,
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("line {line}: {message}")]
    Row { line: u64, message: String },
    #[error("rating matrix is not rectangular: {0}")]
    NotRectangular(String),
    #[error("no raters in population {0}")]
    EmptyPopulation(&'static str),
    #[error("csv: {0}")]
    Csv(String),
}

/// Combined sample size up to which p-values are computed exactly.
pub const EXACT_MAX_N: usize = 12;

/// Significance level for a single cell's divergence test.
pub const DIVERGENCE_ALPHA: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PMethod {
    Auto,
    Exact,
    Normal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MannWhitney {
    pub u_a: f64,
    pub u_b: f64,
    /// Two-sided p-value.
    pub p: f64,
    pub exact: bool,
}

/// Midranks (1-based) of the pooled sample.
fn midranks(pooled: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..pooled.len()).collect();
    order.sort_by(|&i, &j| pooled[i].total_cmp(&pooled[j]));
    let mut ranks = vec![0.0; pooled.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && pooled[order[j + 1]] == pooled[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for k in i..=j {
            ranks[order[k]] = r;
        }
        i = j + 1;
    }
    ranks
}

pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Result<MannWhitney, EvalError> {
    mann_whitney_u_with(a, b, PMethod::Auto)
}

/// U statistics with midranks for ties. `Auto` is exact up to
/// [`EXACT_MAX_N`] pooled observations, normal approximation with tie and
/// continuity correction above.
pub fn mann_whitney_u_with(a: &[f64], b: &[f64], method: PMethod) -> Result<MannWhitney, EvalError> {
    if a.is_empty() || b.is_empty() {
        return Err(EvalError::EmptySample);
    }
    let (na, nb) = (a.len(), b.len());
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = midranks(&pooled);
    let ra: f64 = ranks[..na].iter().sum();
    let u_a = ra - (na * (na + 1)) as f64 / 2.0;
    let u_b = (na * nb) as f64 - u_a;
    let exact = match method {
        PMethod::Auto => na + nb <= EXACT_MAX_N,
        PMethod::Exact => true,
        PMethod::Normal => false,
    };
    let p = if exact { exact_p(&ranks, na, u_a) } else { normal_p(&pooled, na, nb, u_a) };
    Ok(MannWhitney { u_a, u_b, p, exact })
}

/// P(|U - mu| >= |u_obs - mu|) over all equally likely assignments of the
/// pooled midranks to group a. Works on doubled ranks so sums stay integral.
fn exact_p(ranks: &[f64], na: usize, u_obs: f64) -> f64 {
    let doubled: Vec<usize> = ranks.iter().map(|r| (r * 2.0).round() as usize).collect();
    let max_sum: usize = doubled.iter().sum();
    // counts[k][s]: subsets of size k with doubled rank sum s.
    let mut counts = vec![vec![0f64; max_sum + 1]; na + 1];
    counts[0][0] = 1.0;
    for &r in &doubled {
        for k in (1..=na).rev() {
            for s in (r..=max_sum).rev() {
                let add = counts[k - 1][s - r];
                if add != 0.0 {
                    counts[k][s] += add;
                }
            }
        }
    }
    let nb = ranks.len() - na;
    let offset = (na * (na + 1)) as i64; // 2 * na(na+1)/2
    let two_mu = (na * nb) as i64;
    let obs = ((2.0 * u_obs).round() as i64 - two_mu).abs();
    let total: f64 = counts[na].iter().sum();
    let extreme: f64 = counts[na]
        .iter()
        .enumerate()
        .filter(|(s, _)| ((*s as i64 - offset) - two_mu).abs() >= obs)
        .map(|(_, c)| c)
        .sum();
    (extreme / total).min(1.0)
}

fn normal_p(pooled: &[f64], na: usize, nb: usize, u_a: f64) -> f64 {
    let n = (na + nb) as f64;
    let mut tie_counts: HashMap<u64, usize> = HashMap::new();
    for x in pooled {
        *tie_counts.entry(x.to_bits()).or_default() += 1;
    }
    let ties: f64 = tie_counts.values().map(|&t| (t * t * t - t) as f64).sum();
    let var = (na * nb) as f64 / 12.0 * ((n + 1.0) - ties / (n * (n - 1.0)));
    if var <= 0.0 {
        return 1.0;
    }
    let mu = (na * nb) as f64 / 2.0;
    let z = ((u_a - mu).abs() - 0.5).max(0.0) / var.sqrt();
    let normal = Normal::standard();
    (2.0 * (1.0 - normal.cdf(z))).min(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Population {
    Participant,
    Vlm,
}

impl Population {
    pub fn name(self) -> &'static str {
        match self {
            Population::Participant => "participant",
            Population::Vlm => "vlm",
        }
    }
}

/// One CSV row.
#[derive(Debug, Clone, PartialEq)]
pub struct RatingRecord {
    pub rater_id: String,
    pub population: Population,
    pub scenario: String,
    pub area: u32,
    pub score: u8,
    pub category: Option<ReasonCategory>,
    pub question: RatingMode,
}

pub type Cell = (String, u32);

/// Raters x cells score matrix for one question.
#[derive(Debug, Clone, PartialEq)]
pub struct RatingMatrix {
    pub raters: Vec<(String, Population)>,
    pub cells: Vec<Cell>,
    /// `scores[r][c]`
    pub scores: Vec<Vec<u8>>,
    pub categories: Vec<Vec<Option<ReasonCategory>>>,
}

impl RatingMatrix {
    /// Builds the matrix for `question`; raters keep first-appearance order,
    /// cells are sorted by (scenario, area). Every rater must rate every cell once.
    pub fn from_records(records: &[RatingRecord], question: RatingMode) -> Result<Self, EvalError> {
        let rows: Vec<&RatingRecord> = records.iter().filter(|r| r.question == question).collect();
        let mut raters: Vec<(String, Population)> = Vec::new();
        let mut rater_index: HashMap<&str, usize> = HashMap::new();
        let cells: Vec<Cell> =
            rows.iter().map(|r| (r.scenario.clone(), r.area)).collect::<BTreeSet<_>>().into_iter().collect();
        let cell_index: HashMap<&Cell, usize> = cells.iter().enumerate().map(|(i, c)| (c, i)).collect();
        let mut scores: Vec<Vec<Option<u8>>> = Vec::new();
        let mut categories: Vec<Vec<Option<ReasonCategory>>> = Vec::new();
        for r in &rows {
            let ri = match rater_index.get(r.rater_id.as_str()) {
                Some(&i) => {
                    if raters[i].1 != r.population {
                        return Err(EvalError::NotRectangular(format!("rater `{}` appears in two populations", r.rater_id)));
                    }
                    i
                }
                None => {
                    raters.push((r.rater_id.clone(), r.population));
                    scores.push(vec![None; cells.len()]);
                    categories.push(vec![None; cells.len()]);
                    rater_index.insert(r.rater_id.as_str(), raters.len() - 1);
                    raters.len() - 1
                }
            };
            let ci = cell_index[&(r.scenario.clone(), r.area)];
            if scores[ri][ci].replace(r.score).is_some() {
                return Err(EvalError::NotRectangular(format!(
                    "rater `{}` rated scenario `{}` area {} twice",
                    r.rater_id, r.scenario, r.area
                )));
            }
            categories[ri][ci] = r.category;
        }
        let scores = scores
            .into_iter()
            .enumerate()
            .map(|(ri, row)| {
                row.into_iter()
                    .enumerate()
                    .map(|(ci, s)| {
                        s.ok_or_else(|| {
                            EvalError::NotRectangular(format!(
                                "rater `{}` has no score for scenario `{}` area {}",
                                raters[ri].0, cells[ci].0, cells[ci].1
                            ))
                        })
                    })
                    .collect::<Result<Vec<u8>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { raters, cells, scores, categories })
    }

    fn members(&self, population: Population) -> Vec<usize> {
        (0..self.raters.len()).filter(|&r| self.raters[r].1 == population).collect()
    }

    /// Per-cell median score and modal category of one population.
    pub fn population_summary(&self, population: Population) -> Vec<(Option<f64>, Option<ReasonCategory>)> {
        let members = self.members(population);
        (0..self.cells.len())
            .map(|c| {
                let s: Vec<f64> = members.iter().map(|&r| f64::from(self.scores[r][c])).collect();
                let cats: Vec<ReasonCategory> = members.iter().filter_map(|&r| self.categories[r][c]).collect();
                (median(&s), category_mode(&cats))
            })
            .collect()
    }
}

/// Cells where `rater` differs significantly from the participants
/// (excluding the rater itself when it is one of them).
pub fn divergence_profile(matrix: &RatingMatrix, rater: usize) -> Result<usize, EvalError> {
    let reference: Vec<usize> = matrix
        .members(Population::Participant)
        .into_iter()
        .filter(|&r| r != rater)
        .collect();
    if reference.is_empty() {
        return Ok(0);
    }
    let mut count = 0;
    for c in 0..matrix.cells.len() {
        let a = [f64::from(matrix.scores[rater][c])];
        let b: Vec<f64> = reference.iter().map(|&r| f64::from(matrix.scores[r][c])).collect();
        if mann_whitney_u(&a, &b)?.p < DIVERGENCE_ALPHA {
            count += 1;
        }
    }
    Ok(count)
}

/// Divergence count per rater, in matrix order.
pub fn divergence_counts(matrix: &RatingMatrix) -> Result<Vec<usize>, EvalError> {
    (0..matrix.raters.len()).into_par_iter().map(|r| divergence_profile(matrix, r)).collect()
}

/// Share of random (VLM, participant) pairs in which the VLM rater diverges
/// more often; equal counts score one half.
pub fn bootstrap_population_test(matrix: &RatingMatrix, iterations: usize, seed: u64) -> Result<f64, EvalError> {
    let counts = divergence_counts(matrix)?;
    bootstrap_from_counts(matrix, &counts, iterations, seed)
}

pub fn bootstrap_from_counts(
    matrix: &RatingMatrix,
    counts: &[usize],
    iterations: usize,
    seed: u64,
) -> Result<f64, EvalError> {
    if iterations == 0 {
        return Err(EvalError::NoIterations);
    }
    let pick = |pop: Population| -> Result<Vec<usize>, EvalError> {
        let mut v: Vec<usize> = matrix.members(pop).into_iter().map(|r| counts[r]).collect();
        if v.is_empty() {
            return Err(EvalError::EmptyPopulation(pop.name()));
        }
        // Sorting makes the draw depend only on the multiset of counts.
        v.sort_unstable();
        Ok(v)
    };
    let vlm = pick(Population::Vlm)?;
    let ptp = pick(Population::Participant)?;
    let halves: u64 = (0..iterations as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i);
            let v = vlm[rng.random_range(0..vlm.len())];
            let p = ptp[rng.random_range(0..ptp.len())];
            match v.cmp(&p) {
                std::cmp::Ordering::Greater => 2,
                std::cmp::Ordering::Equal => 1,
                std::cmp::Ordering::Less => 0,
            }
        })
        .sum();
    Ok(halves as f64 / (2.0 * iterations as f64))
}

/// Fraction of masked cells where both groups have the same modal category.
/// `None` when no cell is masked.
pub fn mode_agreement(
    a: &[Option<ReasonCategory>],
    b: &[Option<ReasonCategory>],
    mask: &[bool],
) -> Option<f64> {
    let mut total = 0usize;
    let mut equal = 0usize;
    for ((x, y), m) in a.iter().zip(b).zip(mask) {
        if *m {
            total += 1;
            if x.is_some() && x == y {
                equal += 1;
            }
        }
    }
    (total > 0).then(|| equal as f64 / total as f64)
}

const REQUIRED: [&str; 5] = ["rater_id", "population", "scenario", "area", "score"];

/// Reads rating rows. Required columns: rater_id, population, scenario,
/// area, score; optional: category, question (defaults to overlay).
pub fn read_ratings_csv(text: &str) -> Result<Vec<RatingRecord>, EvalError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| EvalError::Csv(e.to_string()))?.clone();
    let col = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
    let mut idx = BTreeMap::new();
    for name in REQUIRED {
        idx.insert(name, col(name).ok_or_else(|| EvalError::MissingColumn(name.to_string()))?);
    }
    let category_col = col("category");
    let question_col = col("question");
    let mut out = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| EvalError::Csv(e.to_string()))?;
        let line = row.position().map_or(0, |p| p.line());
        let err = |message: String| EvalError::Row { line, message };
        let get = |name: &str| row.get(idx[name]).unwrap_or("");
        let population = match get("population").to_ascii_lowercase().as_str() {
            "participant" => Population::Participant,
            "vlm" => Population::Vlm,
            other => return Err(err(format!("unknown population `{other}`"))),
        };
        let area: u32 = get("area").parse().map_err(|_| err(format!("bad area `{}`", get("area"))))?;
        let score: u8 = match get("score").parse() {
            Ok(s) if (1..=5).contains(&s) => s,
            _ => return Err(err(format!("score `{}` outside 1..5", get("score")))),
        };
        let category = match category_col.and_then(|c| row.get(c)).filter(|s| !s.is_empty()) {
            Some(s) => Some(ReasonCategory::parse(s).ok_or_else(|| err(format!("unknown category `{s}`")))?),
            None => None,
        };
        let question = match question_col.and_then(|c| row.get(c)).filter(|s| !s.is_empty()) {
            Some(s) => s.to_ascii_lowercase().parse().map_err(err)?,
            None => RatingMode::Overlay,
        };
        let rater_id = get("rater_id").to_string();
        if rater_id.is_empty() {
            return Err(err("empty rater_id".into()));
        }
        out.push(RatingRecord { rater_id, population, scenario: get("scenario").to_string(), area, score, category, question });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RaterDivergence {
    pub rater_id: String,
    pub population: Population,
    pub overlay: Option<usize>,
    pub interaction: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisReport {
    pub p_overlay: Option<f64>,
    pub p_interaction: Option<f64>,
    /// Over cells where both populations' median is below 3, pooled across questions.
    pub mode_agreement: Option<f64>,
    pub divergence: Vec<RaterDivergence>,
}

impl AnalysisReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("serializable");
        s.push('\n');
        s
    }
}

/// Runs the whole comparison for every question present in `records`.
pub fn analyze(records: &[RatingRecord], iterations: usize, seed: u64) -> Result<AnalysisReport, EvalError> {
    if iterations == 0 {
        return Err(EvalError::NoIterations);
    }
    let mut p = BTreeMap::new();
    let mut divergence: Vec<RaterDivergence> = Vec::new();
    let mut cats_a = Vec::new();
    let mut cats_b = Vec::new();
    let mut mask = Vec::new();
    for question in [RatingMode::Overlay, RatingMode::Interaction] {
        if !records.iter().any(|r| r.question == question) {
            continue;
        }
        let m = RatingMatrix::from_records(records, question)?;
        let counts = divergence_counts(&m)?;
        p.insert(question, bootstrap_from_counts(&m, &counts, iterations, seed)?);
        for (r, (id, pop)) in m.raters.iter().enumerate() {
            let entry = match divergence.iter_mut().find(|d| &d.rater_id == id) {
                Some(e) => e,
                None => {
                    divergence.push(RaterDivergence { rater_id: id.clone(), population: *pop, overlay: None, interaction: None });
                    divergence.last_mut().unwrap()
                }
            };
            match question {
                RatingMode::Overlay => entry.overlay = Some(counts[r]),
                RatingMode::Interaction => entry.interaction = Some(counts[r]),
            }
        }
        let ptp = m.population_summary(Population::Participant);
        let vlm = m.population_summary(Population::Vlm);
        for (x, y) in ptp.into_iter().zip(vlm) {
            mask.push(matches!((x.0, y.0), (Some(a), Some(b)) if a < 3.0 && b < 3.0));
            cats_a.push(x.1);
            cats_b.push(y.1);
        }
    }
    Ok(AnalysisReport {
        p_overlay: p.get(&RatingMode::Overlay).copied(),
        p_interaction: p.get(&RatingMode::Interaction).copied(),
        mode_agreement: mode_agreement(&cats_a, &cats_b, &mask),
        divergence,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn disjoint_pairs() {
        let r = mann_whitney_u(&[1.0, 2.0], &[3.0, 4.0]).unwrap();
        assert_eq!(r.u_a, 0.0);
        assert!((r.p - 1.0 / 3.0).abs() < 1e-12);
        assert!(r.exact);
    }

    #[test]
    fn identical_samples_are_centered() {
        let a = [1.0, 3.0, 3.0, 5.0];
        let r = mann_whitney_u(&a, &a).unwrap();
        assert_eq!(r.u_a, 8.0);
        assert_eq!(r.p, 1.0);
        let big: Vec<f64> = (0..10).map(|i| f64::from(i % 5 + 1)).collect();
        let r = mann_whitney_u(&big, &big).unwrap();
        assert_eq!(r.u_a, 50.0);
        assert!(!r.exact);
        assert_eq!(r.p, 1.0);
    }

    #[test]
    fn singletons() {
        let r = mann_whitney_u(&[1.0], &[5.0]).unwrap();
        assert_eq!((r.u_a, r.u_b), (0.0, 1.0));
        assert_eq!(r.p, 1.0);
        assert_eq!(mann_whitney_u(&[], &[1.0]), Err(EvalError::EmptySample));
    }

    #[test]
    fn all_tied_normal_branch() {
        let a = vec![3.0; 10];
        assert_eq!(mann_whitney_u_with(&a, &a, PMethod::Normal).unwrap().p, 1.0);
    }

    fn shuffled_split(seed: u64) -> (Vec<f64>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut v: Vec<f64> = (1..=12).map(f64::from).collect();
        rand::seq::SliceRandom::shuffle(v.as_mut_slice(), &mut rng);
        (v[..6].to_vec(), v[6..].to_vec())
    }

    #[test]
    fn exact_and_normal_agree_on_six_plus_six() {
        for seed in 0..200 {
            let (a, b) = shuffled_split(seed);
            let e = mann_whitney_u_with(&a, &b, PMethod::Exact).unwrap().p;
            let n = mann_whitney_u_with(&a, &b, PMethod::Normal).unwrap().p;
            assert!((e - n).abs() <= 0.02, "seed {seed}: exact {e} normal {n}");
        }
    }

    proptest! {
        #[test]
        fn u_sums_to_product(a in prop::collection::vec(1u8..=5, 1..20), b in prop::collection::vec(1u8..=5, 1..20)) {
            let fa: Vec<f64> = a.iter().map(|&x| f64::from(x)).collect();
            let fb: Vec<f64> = b.iter().map(|&x| f64::from(x)).collect();
            let r = mann_whitney_u(&fa, &fb).unwrap();
            prop_assert_eq!(r.u_a + r.u_b, (a.len() * b.len()) as f64);
            prop_assert!((0.0..=1.0).contains(&r.p));
            let swapped = mann_whitney_u(&fb, &fa).unwrap();
            prop_assert_eq!(swapped.u_a, r.u_b);
            prop_assert!((swapped.p - r.p).abs() < 1e-12);
        }
    }

    fn record(rater: &str, pop: Population, scenario: &str, area: u32, score: u8) -> RatingRecord {
        RatingRecord {
            rater_id: rater.into(),
            population: pop,
            scenario: scenario.into(),
            area,
            score,
            category: None,
            question: RatingMode::Overlay,
        }
    }

    #[test]
    fn consensus_rater_never_diverges() {
        let mut recs = Vec::new();
        for r in 0..20 {
            for a in 1..=10 {
                recs.push(record(&format!("p{r}"), Population::Participant, "s", a, 2));
            }
        }
        for a in 1..=10 {
            recs.push(record("v", Population::Vlm, "s", a, 2));
        }
        let m = RatingMatrix::from_records(&recs, RatingMode::Overlay).unwrap();
        assert_eq!(divergence_profile(&m, 20).unwrap(), 0);
        assert_eq!(divergence_profile(&m, 0).unwrap(), 0);
    }

    #[test]
    fn extreme_rater_diverges_everywhere() {
        let mut recs = Vec::new();
        for r in 0..19 {
            for a in 1..=10 {
                recs.push(record(&format!("p{r}"), Population::Participant, "s", a, 1));
            }
        }
        for a in 1..=10 {
            recs.push(record("odd", Population::Participant, "s", a, 5));
        }
        let m = RatingMatrix::from_records(&recs, RatingMode::Overlay).unwrap();
        assert_eq!(divergence_profile(&m, 19).unwrap(), 10);
    }

    #[test]
    fn tiny_matrix_cannot_diverge() {
        let recs = vec![
            record("a", Population::Participant, "s", 1, 1),
            record("b", Population::Participant, "s", 1, 5),
            record("c", Population::Participant, "s", 1, 5),
            record("v", Population::Vlm, "s", 1, 1),
        ];
        let m = RatingMatrix::from_records(&recs, RatingMode::Overlay).unwrap();
        for r in 0..4 {
            assert_eq!(divergence_profile(&m, r).unwrap(), 0);
        }
    }

    #[test]
    fn matrix_must_be_rectangular() {
        let recs = vec![
            record("a", Population::Participant, "s", 1, 1),
            record("a", Population::Participant, "s", 2, 1),
            record("b", Population::Participant, "s", 1, 5),
        ];
        assert!(matches!(RatingMatrix::from_records(&recs, RatingMode::Overlay), Err(EvalError::NotRectangular(_))));
    }

    #[test]
    fn bootstrap_rejects_zero_iterations() {
        let recs = vec![record("a", Population::Participant, "s", 1, 1), record("v", Population::Vlm, "s", 1, 1)];
        let m = RatingMatrix::from_records(&recs, RatingMode::Overlay).unwrap();
        assert_eq!(bootstrap_population_test(&m, 0, 1), Err(EvalError::NoIterations));
        assert_eq!(bootstrap_population_test(&m, 10, 1).unwrap(), 0.5);
    }

    #[test]
    fn mode_agreement_extremes() {
        let a = vec![Some(ReasonCategory::Social); 4];
        let b = vec![Some(ReasonCategory::Other); 4];
        let mask = vec![true, true, false, true];
        assert_eq!(mode_agreement(&a, &a, &mask), Some(1.0));
        assert_eq!(mode_agreement(&a, &b, &mask), Some(0.0));
        assert_eq!(mode_agreement(&a, &b, &[false; 4]), None);
    }

    #[test]
    fn csv_schema() {
        let ok = "rater_id,population,scenario,area,score,category,question\np1,participant,lab,1,2,social,interaction\nv1,VLM,lab,1,4,,\n";
        let recs = read_ratings_csv(ok).unwrap();
        assert_eq!(recs[0].category, Some(ReasonCategory::Social));
        assert_eq!(recs[0].question, RatingMode::Interaction);
        assert_eq!(recs[1].population, Population::Vlm);
        assert_eq!(recs[1].question, RatingMode::Overlay);
        assert_eq!(
            read_ratings_csv("rater_id,population,scenario,area\np,participant,s,1\n"),
            Err(EvalError::MissingColumn("score".into()))
        );
        assert!(matches!(
            read_ratings_csv("rater_id,population,scenario,area,score\np,participant,s,1,7\n"),
            Err(EvalError::Row { line: 2, .. })
        ));
    }
}
