//! Layout search: multi-restart simulated annealing over element positions,
//! plus an exhaustive lattice search used as an oracle on small instances.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::num::Real;
use crate::objectives::{evaluate, CostReport, ObjectiveConfig, ObjectiveError};
use crate::scene::{Box3, Layout, Scene, SceneError, UserPose, Vec3};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("no feasible candidate position inside the search bounds")]
    InfeasibleBounds,
    #[error("lattice search needs {needed} evaluations per sweep, cap is {cap}")]
    CapExceeded { needed: usize, cap: usize },
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
    #[error(transparent)]
    Scene(#[from] SceneError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig<T = f64> {
    pub seed: u64,
    pub restarts: usize,
    pub iterations: usize,
    pub initial_temperature: T,
    /// Geometric cooling factor applied every iteration.
    pub cooling: T,
    /// Standard deviation of the per-axis Gaussian step, meters.
    pub sigma: T,
    /// Search region; defaults to [`default_bounds`] around the user.
    pub bounds: Option<Box3<T>>,
    /// Starting layout for the first restart (re-optimization warm start).
    pub warm_start: Option<Layout<T>>,
    /// Weight of the squared displacement from `warm_start` added to `Q`
    /// during the search. Zero disables it.
    pub displacement_weight: T,
    /// Run a final compass search from the best annealed layout.
    pub polish: bool,
    /// Reject positions whose center lies strictly inside an entity box.
    pub solid_entities: bool,
}

impl<T: Real> Default for SolverConfig<T> {
    fn default() -> Self {
        Self {
            seed: 0,
            restarts: 8,
            iterations: 2000,
            initial_temperature: T::one(),
            cooling: T::lit(0.995),
            sigma: T::lit(0.15),
            bounds: None,
            warm_start: None,
            displacement_weight: T::zero(),
            polish: true,
            solid_entities: true,
        }
    }
}

impl<T: Real> SolverConfig<T> {
    pub fn validate(&self) -> Result<(), SolverError> {
        let bad = |m: &str| Err(SolverError::InvalidConfig(m.to_string()));
        if self.restarts < 1 {
            return bad("restarts must be at least 1");
        }
        if self.iterations < 1 {
            return bad("iterations must be at least 1");
        }
        if !(self.sigma > T::zero() && self.sigma.is_finite()) {
            return bad("sigma must be positive");
        }
        if !(self.initial_temperature > T::zero()) {
            return bad("initial temperature must be positive");
        }
        if !(self.cooling > T::zero() && self.cooling <= T::one()) {
            return bad("cooling must lie in (0, 1]");
        }
        if !(self.displacement_weight >= T::zero()) {
            return bad("displacement weight must be non-negative");
        }
        Ok(())
    }
}

/// A 2 m cube whose near face touches the eye, centered on the view axis.
pub fn default_bounds<T: Real>(user: &UserPose<T>) -> Box3<T> {
    Box3::new(user.eye() + user.forward(), Vec3::splat(T::one())).expect("unit half extents")
}

/// Best-so-far objective value after an iteration of one restart.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(bound = "T: Real")]
pub struct TracePoint<T = f64> {
    pub restart: usize,
    pub iteration: usize,
    pub best: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution<T = f64> {
    pub layout: Layout<T>,
    pub report: CostReport<T>,
    pub trace: Vec<TracePoint<T>>,
    /// Index of the restart that produced `layout`.
    pub best_restart: usize,
    /// Best objective (including any displacement penalty) per restart.
    pub restart_best: Vec<T>,
}

impl<T: Real> Solution<T> {
    /// The trace as JSON lines.
    pub fn trace_jsonl(&self) -> String {
        let mut out = String::new();
        for p in &self.trace {
            out.push_str(&serde_json::to_string(p).expect("trace serializes"));
            out.push('\n');
        }
        out
    }
}

fn clamp_into<T: Real>(p: Vec3<T>, b: &Box3<T>) -> Vec3<T> {
    p.max_with(b.min()).min_with(b.max())
}

struct Problem<'a, T: Real> {
    scene: &'a Scene<T>,
    objective: &'a ObjectiveConfig<T>,
    anchor: Option<Vec<Vec3<T>>>,
    displacement_weight: T,
    solid: bool,
}

fn strictly_inside<T: Real>(b: &Box3<T>, p: Vec3<T>) -> bool {
    let d = (p - b.center()).abs();
    let h = b.half_extents();
    d.x < h.x && d.y < h.y && d.z < h.z
}

impl<T: Real> Problem<'_, T> {
    fn value(&self, positions: &[Vec3<T>]) -> T {
        if self.solid
            && positions.iter().any(|p| self.scene.entities().iter().any(|e| strictly_inside(e.bbox(), *p)))
        {
            return T::infinity();
        }
        let Ok(report) = evaluate(self.scene, positions, self.objective, true) else {
            return T::infinity();
        };
        let mut q = report.total;
        if let Some(anchor) = &self.anchor {
            if self.displacement_weight > T::zero() {
                let disp = positions
                    .iter()
                    .zip(anchor)
                    .fold(T::zero(), |acc, (p, a)| acc + (*p - *a).norm_squared());
                q = q + self.displacement_weight * disp;
            }
        }
        if q.is_nan() {
            T::infinity()
        } else {
            q
        }
    }
}

fn restart_rng(seed: u64, restart: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ (restart as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn default_start<T: Real>(scene: &Scene<T>, bounds: &Box3<T>) -> Vec<Vec3<T>> {
    let user = scene.user();
    let n = scene.elements().len();
    let ahead = user.eye() + user.forward() * T::lit(0.5);
    (0..n)
        .map(|i| {
            let offset = T::lit(0.35 * (i as f64 - (n as f64 - 1.0) / 2.0));
            clamp_into(ahead + user.right() * offset, bounds)
        })
        .collect()
}

fn uniform_in<T: Real>(rng: &mut ChaCha8Rng, b: &Box3<T>) -> Vec3<T> {
    let (lo, hi) = (b.min(), b.max());
    let mut u = || T::lit(rng.random::<f64>());
    let (a, c, d) = (u(), u(), u());
    Vec3::new(lo.x + (hi.x - lo.x) * a, lo.y + (hi.y - lo.y) * c, lo.z + (hi.z - lo.z) * d)
}

struct RestartOutcome<T: Real> {
    best: Vec<Vec3<T>>,
    best_q: T,
    trace: Vec<TracePoint<T>>,
}

fn anneal<T: Real>(
    problem: &Problem<'_, T>,
    config: &SolverConfig<T>,
    bounds: &Box3<T>,
    restart: usize,
    start: Option<Vec<Vec3<T>>>,
) -> Result<RestartOutcome<T>, SolverError> {
    let mut rng = restart_rng(config.seed, restart);
    let n = problem.scene.elements().len();
    let mut current = start.unwrap_or_else(|| (0..n).map(|_| uniform_in(&mut rng, bounds)).collect());
    let mut cur_q = problem.value(&current);
    let mut tries = 0;
    while !cur_q.is_finite() {
        tries += 1;
        if tries > 100 {
            return Err(SolverError::InfeasibleBounds);
        }
        current = (0..n).map(|_| uniform_in(&mut rng, bounds)).collect();
        cur_q = problem.value(&current);
    }
    let mut best = current.clone();
    let mut best_q = cur_q;
    let mut trace = Vec::with_capacity(config.iterations + 1);
    trace.push(TracePoint { restart, iteration: 0, best: best_q });
    let mut temperature = config.initial_temperature;
    for it in 1..=config.iterations {
        let k = rng.random_range(0..n);
        let mut step = || config.sigma * T::lit(rng.sample::<f64, _>(StandardNormal));
        let delta = Vec3::new(step(), step(), step());
        let mut candidate = current.clone();
        candidate[k] = clamp_into(candidate[k] + delta, bounds);
        let q = problem.value(&candidate);
        if q.is_finite() {
            let accept = q <= cur_q || {
                let p = (-(q - cur_q) / temperature).exp();
                T::lit(rng.random::<f64>()) < p
            };
            if accept {
                current = candidate;
                cur_q = q;
                if cur_q < best_q {
                    best_q = cur_q;
                    best = current.clone();
                }
            }
        }
        temperature = temperature * config.cooling;
        trace.push(TracePoint { restart, iteration: it, best: best_q });
    }
    if config.polish {
        let mut it = config.iterations;
        let mut step = config.sigma * T::lit(0.5);
        let min_step = T::lit(1e-4);
        while step > min_step {
            let mut improved = false;
            for k in 0..n {
                for axis in 0..3 {
                    for sign in [T::one(), -T::one()] {
                        let mut candidate = best.clone();
                        let moved = candidate[k].with_axis(axis, candidate[k][axis] + sign * step);
                        candidate[k] = clamp_into(moved, bounds);
                        let q = problem.value(&candidate);
                        if q < best_q {
                            best_q = q;
                            best = candidate;
                            improved = true;
                        }
                    }
                }
            }
            it += 1;
            trace.push(TracePoint { restart, iteration: it, best: best_q });
            if !improved {
                step = step * T::lit(0.5);
            }
        }
    }
    Ok(RestartOutcome { best, best_q, trace })
}

/// Minimizes `Q` over element positions.
///
/// Restarts run in parallel with RNG streams derived from `(seed, restart)`;
/// the lowest objective wins, ties going to the lower restart index, so the
/// result is bit-identical for identical inputs.
pub fn optimize<T: Real>(
    scene: &Scene<T>,
    objective: &ObjectiveConfig<T>,
    config: &SolverConfig<T>,
) -> Result<Solution<T>, SolverError> {
    config.validate()?;
    objective.weights.validate_for(scene)?;
    objective.params.validate()?;
    let bounds = config.bounds.unwrap_or_else(|| default_bounds(scene.user()));
    let warm = match &config.warm_start {
        Some(layout) => Some(layout.ordered(scene)?.into_iter().map(|p| clamp_into(p, &bounds)).collect::<Vec<_>>()),
        None => None,
    };
    let problem = Problem {
        scene,
        objective,
        anchor: warm.clone(),
        displacement_weight: config.displacement_weight,
        solid: config.solid_entities,
    };
    if scene.elements().is_empty() {
        let layout = Layout::from_ordered(scene, &[])?;
        let report = evaluate(scene, &[], objective, false)?;
        return Ok(Solution {
            layout,
            report,
            trace: vec![TracePoint { restart: 0, iteration: 0, best: T::zero() }],
            best_restart: 0,
            restart_best: vec![T::zero()],
        });
    }
    let first = warm.unwrap_or_else(|| default_start(scene, &bounds));
    let outcomes = (0..config.restarts)
        .into_par_iter()
        .map(|r| {
            let start = (r == 0).then(|| first.clone());
            anneal(&problem, config, &bounds, r, start)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut best_restart = 0;
    for (r, o) in outcomes.iter().enumerate() {
        if o.best_q < outcomes[best_restart].best_q {
            best_restart = r;
        }
    }
    let restart_best = outcomes.iter().map(|o| o.best_q).collect();
    let best = &outcomes[best_restart].best;
    let layout = Layout::from_ordered(scene, best)?;
    let report = evaluate(scene, best, objective, false)?;
    let trace = outcomes.into_iter().flat_map(|o| o.trace).collect();
    Ok(Solution { layout, report, trace, best_restart, restart_best })
}

/// Result of the lattice search.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeOptimum<T = f64> {
    pub layout: Layout<T>,
    pub value: T,
    /// True when every lattice combination was evaluated (single element);
    /// otherwise the result is a coordinate-wise fixpoint.
    pub exhaustive: bool,
    pub evaluations: usize,
}

/// Lattice points covering `bounds` with the given spacing, centered in the box.
pub fn lattice<T: Real>(bounds: &Box3<T>, spacing: T) -> Vec<Vec3<T>> {
    let axis_points = |axis: usize| -> Vec<T> {
        let extent = bounds.half_extents()[axis] * T::lit(2.0);
        let count = (extent / spacing).floor().to_usize().unwrap_or(0) + 1;
        let start = bounds.center()[axis] - spacing * T::lit((count - 1) as f64) * T::lit(0.5);
        (0..count).map(|i| start + spacing * T::lit(i as f64)).collect()
    };
    let (xs, ys, zs) = (axis_points(0), axis_points(1), axis_points(2));
    let mut out = Vec::with_capacity(xs.len() * ys.len() * zs.len());
    for &x in &xs {
        for &y in &ys {
            for &z in &zs {
                out.push(Vec3::new(x, y, z));
            }
        }
    }
    out
}

/// Default evaluation cap for [`brute_force`].
pub const DEFAULT_LATTICE_CAP: usize = 1_000_000;

/// Minimum of `Q` over a position lattice: exhaustive for one element,
/// coordinate sweeps iterated to a fixpoint for several.
pub fn brute_force<T: Real>(
    scene: &Scene<T>,
    objective: &ObjectiveConfig<T>,
    bounds: &Box3<T>,
    spacing: T,
    cap: usize,
    solid_entities: bool,
) -> Result<LatticeOptimum<T>, SolverError> {
    if !(spacing > T::zero()) {
        return Err(SolverError::InvalidConfig("lattice spacing must be positive".into()));
    }
    objective.weights.validate_for(scene)?;
    objective.params.validate()?;
    let points = lattice(bounds, spacing);
    let n = scene.elements().len();
    let needed = points.len().saturating_mul(n.max(1));
    if needed > cap {
        return Err(SolverError::CapExceeded { needed, cap });
    }
    let problem = Problem { scene, objective, anchor: None, displacement_weight: T::zero(), solid: solid_entities };
    if n == 0 {
        return Ok(LatticeOptimum {
            layout: Layout::from_ordered(scene, &[])?,
            value: T::zero(),
            exhaustive: true,
            evaluations: 0,
        });
    }
    let nearest = |p: Vec3<T>| -> Vec3<T> {
        *points
            .iter()
            .min_by(|a, b| {
                a.distance(p).partial_cmp(&b.distance(p)).unwrap_or(std::cmp::Ordering::Equal)
            })
            .expect("lattice is never empty")
    };
    let mut current: Vec<Vec3<T>> = default_start(scene, bounds).into_iter().map(nearest).collect();
    let mut best_q = problem.value(&current);
    let mut evaluations = 1;
    for _pass in 0..100 {
        let mut changed = false;
        for k in 0..n {
            let values: Vec<T> = points
                .par_iter()
                .map(|p| {
                    let mut candidate = current.clone();
                    candidate[k] = *p;
                    problem.value(&candidate)
                })
                .collect();
            evaluations += values.len();
            for (p, q) in points.iter().zip(values) {
                if q < best_q {
                    best_q = q;
                    current[k] = *p;
                    changed = true;
                }
            }
        }
        if !changed || n == 1 {
            break;
        }
    }
    if !best_q.is_finite() {
        return Err(SolverError::InfeasibleBounds);
    }
    Ok(LatticeOptimum {
        layout: Layout::from_ordered(scene, &current)?,
        value: best_q,
        exhaustive: n == 1,
        evaluations,
    })
}
