//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any fails.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use mrlayout::evalstats::{bootstrap_population_test, mann_whitney_u_with, mode_agreement, PMethod, Population, RatingMatrix, RatingRecord};
use mrlayout::geometry::{collect_hits, RayExtent};
use mrlayout::objectives::{interaction_cost, overlay_cost, ObjectiveConfig, Term, WeightConfig};
use mrlayout::perception::{
    dbscan, hidden_point_removal, segment_box, CameraModel, Detection2D, PixelRect, SegmentParams,
};
use mrlayout::presets::Preset;
use mrlayout::reasoning::{
    aggregate_ratings, build_context_prompt, classify_reason, parse_response, ratings_to_json, render_responses,
    run_instances, AreaAnnotation, AreaStats, FewShotExample, MockFixture, MockProvider, RatingMode, RatingQuery,
    RatingResponse, ReasonCategory, MONITOR_REFINEMENT,
};
use mrlayout::scene::{load_scene, Box3, PhysicalEntity, Scene, UiElement, UserPose, Vec3};
use mrlayout::solver::{brute_force, default_bounds, optimize, SolverConfig, DEFAULT_LATTICE_CAP};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn v(x: f64, y: f64, z: f64) -> Vec3 {
    Vec3::new(x, y, z)
}

// ---------------------------------------------------------------------------
// 1-3: the suitability terms against hand evaluation

struct RayCase {
    eye: Vec3,
    center: Vec3,
    half: Vec3,
    /// Entry point on the face looking at the eye.
    entry: Vec3,
    o_b: f64,
    i_b: f64,
    f_v: f64,
}

impl RayCase {
    fn scene(&self) -> Scene {
        let dir = self.entry - self.eye;
        let up = if dir.x.abs() < 1e-9 && dir.z.abs() < 1e-9 { v(1.0, 0.0, 0.0) } else { v(0.0, 1.0, 0.0) };
        let user = UserPose::looking(self.eye, dir, up).unwrap();
        let b = Box3::new(self.center, self.half).unwrap();
        let e = PhysicalEntity::new("b", "b", b, self.o_b, self.i_b).unwrap();
        let el = UiElement::new("w", "w", 0.2, 0.1, self.f_v).unwrap();
        Scene::new(user, vec![e], vec![el]).unwrap()
    }

    /// Element center halfway to the box, so the single ray runs eye -> entry.
    fn position(&self) -> Vec3 {
        self.eye + (self.entry - self.eye) * 0.5
    }

    fn d_h(&self) -> f64 {
        let r = self.entry - self.center;
        let h = self.half;
        (r.x * r.x + r.y * r.y + r.z * r.z).sqrt() / (h.x * h.x + h.y * h.y + h.z * h.z).sqrt()
    }

    fn hand_overlay(&self) -> f64 {
        let p = if self.o_b <= 0.5 { 0.5 - self.o_b } else { 0.0 };
        p * (-5.0 * self.d_h()).exp()
    }

    fn hand_interaction(&self) -> f64 {
        self.f_v * (0.5 - self.i_b) * (-5.0 * self.d_h()).exp()
    }
}

fn ray_cases() -> Vec<RayCase> {
    let unit = v(0.5, 0.5, 0.5);
    let c = |eye, center, half, entry, o_b, i_b, f_v| RayCase { eye, center, half, entry, o_b, i_b, f_v };
    vec![
        // Face center of the unit cube.
        c(v(-5.0, 0.0, 0.0), Vec3::zero(), unit, v(-0.5, 0.0, 0.0), 0.2, 1.0, 1.0),
        // Exact corner.
        c(v(-5.0, -5.0, -5.0), Vec3::zero(), unit, v(-0.5, -0.5, -0.5), 0.0, 0.0, 1.0),
        // Off-center face point.
        c(v(-5.0, 0.0, 0.0), Vec3::zero(), unit, v(-0.5, 0.2, -0.3), 0.1, 0.8, 0.5),
        // Edge midpoint.
        c(v(2.0, 0.0, 0.0), v(0.0, 0.0, -2.0), unit, v(0.5, 0.0, -1.5), 0.4, 0.6, 0.75),
        // Elongated box, top face seen from above.
        c(v(0.0, 3.0, 0.0), v(1.0, 2.0, -3.0), v(0.4, 0.1, 0.8), v(1.1, 2.1, -2.5), 0.3, 0.9, 1.0),
        // Suitable box: both branches at zero.
        c(v(0.0, 1.2, 0.0), v(0.0, 1.2, -2.0), v(0.6, 0.4, 0.05), v(0.1, 1.3, -1.95), 0.5, 0.5, 1.0),
        c(v(0.0, 1.2, 0.0), v(0.0, 1.2, -2.0), v(0.6, 0.4, 0.05), v(-0.3, 1.0, -1.95), 1.0, 0.2, 0.0),
        // Thin slab face near its rim.
        c(v(0.3, 1.5, 0.5), v(0.0, 0.7, -0.5), v(0.7, 0.02, 0.4), v(0.65, 0.72, -0.85), 0.05, 0.95, 0.25),
        // Large wall, shallow angle.
        c(v(0.0, 1.6, 0.0), v(2.0, 1.5, -1.0), v(0.05, 1.5, 3.0), v(1.95, 1.1, -2.2), 0.45, 0.0, 1.0),
        // Face center of a non-cubic box from below.
        c(v(0.2, -1.0, 0.1), v(0.2, 1.0, 0.1), v(0.3, 0.25, 0.35), v(0.2, 0.75, 0.1), 0.0, 1.0, 0.6),
    ]
}

fn criterion_1() -> Check {
    let mut worst: f64 = 0.0;
    for (k, case) in ray_cases().iter().enumerate() {
        let s = case.scene();
        let el = &s.elements()[0];
        for extent in [RayExtent::Unbounded, RayExtent::ClipAtElement] {
            // The element sits before the box, so clipping only matters when it is disabled.
            let ov = overlay_cost(&s, el, case.position(), 1, extent).unwrap();
            let it = interaction_cost(&s, el, case.position(), 1, extent).unwrap();
            let (eo, ei) = match extent {
                RayExtent::Unbounded => (case.hand_overlay(), case.hand_interaction()),
                RayExtent::ClipAtElement => (0.0, 0.0),
            };
            worst = worst.max((ov - eo).abs()).max((it - ei).abs());
            ensure((ov - eo).abs() < 1e-9 && (it - ei).abs() < 1e-9, || {
                format!("case {k} ({extent:?}): overlay {ov} vs {eo}, interaction {it} vs {ei}")
            })?;
        }
    }
    let cases = ray_cases();
    let face = cases[0].hand_overlay();
    // The reference figure is quoted to four significant digits.
    ensure((face - 0.01672).abs() < 1e-5, || format!("face-center value {face}"))?;
    ensure((cases[1].d_h() - 1.0).abs() < 1e-12, || "corner d_h is not 1".into())?;
    let corner_factor = (-5.0 * cases[1].d_h()).exp();
    ensure((corner_factor - 0.006738).abs() < 5e-7, || format!("corner falloff {corner_factor}"))?;
    Ok(format!("10 cases, max abs error {worst:.1e}"))
}

fn criterion_2() -> Check {
    let base = &ray_cases()[0];
    let mut last = f64::INFINITY;
    let mut values = Vec::new();
    for step in 0..=10 {
        let o_b = step as f64 / 10.0;
        let case = RayCase { o_b, eye: base.eye, center: base.center, half: base.half, entry: base.entry, i_b: 0.5, f_v: 1.0 };
        let s = case.scene();
        let mut total = 0.0;
        // Single ray and a full 5x5 grid.
        for grid in [1, 5] {
            total += overlay_cost(&s, &s.elements()[0], case.position(), grid, RayExtent::Unbounded).unwrap();
        }
        ensure(total <= last, || format!("overlay cost rose at o_b = {o_b}"))?;
        if step >= 5 {
            ensure(total == 0.0, || format!("overlay cost {total} at o_b = {o_b}"))?;
        } else {
            ensure(total > 0.0, || format!("overlay cost zero at o_b = {o_b}"))?;
        }
        last = total;
        values.push(total);
    }
    Ok(format!("cost at o_b=0: {:.5}, zero from o_b=0.5", values[0]))
}

fn criterion_3() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let user = UserPose::new(v(0.0, 1.2, 0.0), v(0.0, 0.0, -1.0), v(0.0, 1.0, 0.0)).unwrap();
    let mut negatives = 0;
    for trial in 0..50 {
        let n = rng.random_range(1..=4);
        let mut ents = Vec::new();
        for k in 0..n {
            let b = Box3::new(
                v(rng.random_range(-0.4..0.4), rng.random_range(0.8..1.6), rng.random_range(-3.0..-1.0)),
                v(rng.random_range(0.2..0.6), rng.random_range(0.2..0.6), rng.random_range(0.05..0.3)),
            )
            .unwrap();
            ents.push(PhysicalEntity::new(format!("b{k}"), "b", b, 0.5, rng.random_range(0.51..=1.0)).unwrap());
        }
        let f_v = rng.random_range(0.05..=1.0);
        let el = UiElement::new("w", "w", 0.3, 0.2, f_v).unwrap();
        let s = Scene::new(user, ents.clone(), vec![el]).unwrap();
        let pos = v(rng.random_range(-0.1..0.1), rng.random_range(1.1..1.3), -0.5);
        let hits = collect_hits(&s, &s.elements()[0], pos, 5, RayExtent::Unbounded).unwrap();
        let c = interaction_cost(&s, &s.elements()[0], pos, 5, RayExtent::Unbounded).unwrap();
        if hits.total_hits() > 0 {
            ensure(c < 0.0, || format!("trial {trial}: cost {c} with {} hits", hits.total_hits()))?;
            negatives += 1;
        } else {
            ensure(c == 0.0, || format!("trial {trial}: cost {c} without hits"))?;
        }
        let neutral: Vec<PhysicalEntity> =
            ents.into_iter().map(|e| e.with_interaction_rating(0.5).unwrap()).collect();
        let s = s.with_entities(neutral).unwrap();
        let c = interaction_cost(&s, &s.elements()[0], pos, 5, RayExtent::Unbounded).unwrap();
        ensure(c == 0.0, || format!("trial {trial}: cost {c} at i_b = 0.5"))?;
    }
    ensure(negatives >= 25, || format!("only {negatives} trials hit a box"))?;
    Ok(format!("{negatives}/50 hitting trials negative, all zero at i_b = 0.5"))
}

// ---------------------------------------------------------------------------
// 4: solver against the lattice oracle

fn random_scene(rng: &mut ChaCha8Rng) -> Scene {
    let user = UserPose::new(v(0.0, 1.2, 0.0), v(0.0, 0.0, -1.0), v(0.0, 1.0, 0.0)).unwrap();
    let n = rng.random_range(1..=5);
    let ents = (0..n)
        .map(|k| {
            let b = Box3::new(
                v(rng.random_range(-0.8..0.8), rng.random_range(0.4..2.0), rng.random_range(-1.9..-0.6)),
                v(rng.random_range(0.05..0.5), rng.random_range(0.05..0.5), rng.random_range(0.05..0.5)),
            )
            .unwrap();
            let o = rng.random_range(0..=4) as f64 / 4.0;
            let i = rng.random_range(0..=4) as f64 / 4.0;
            PhysicalEntity::new(format!("e{k}"), "thing", b, o, i).unwrap()
        })
        .collect();
    let el = UiElement::new("w", "w", rng.random_range(0.1..0.4), rng.random_range(0.1..0.3), rng.random_range(0.0..=1.0))
        .unwrap();
    Scene::new(user, ents, vec![el]).unwrap()
}

fn criterion_4() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let objective = ObjectiveConfig::new(Preset::SituationAdapt.weights());
    let mut worst_gap = f64::NEG_INFINITY;
    for k in 0..20 {
        let s = random_scene(&mut rng);
        let bounds = default_bounds(s.user());
        let oracle = brute_force(&s, &objective, &bounds, 0.05, DEFAULT_LATTICE_CAP, true).map_err(|e| e.to_string())?;
        let sol = optimize(&s, &objective, &SolverConfig { seed: k, ..SolverConfig::default() }).map_err(|e| e.to_string())?;
        let (q, q_star) = (sol.report.total, oracle.value);
        let gap = (q - q_star) / q_star.abs().max(1e-12);
        worst_gap = worst_gap.max(gap);
        ensure(q <= q_star + 0.01 * q_star.abs() + 1e-12, || format!("scene {k}: solver {q} vs lattice {q_star}"))?;
    }
    Ok(format!("20 scenes, worst relative gap {:+.4}%", 100.0 * worst_gap))
}

// ---------------------------------------------------------------------------
// 5: lecture scenario

fn criterion_5() -> Check {
    let text = std::fs::read_to_string(fixtures().join("lecture/scene.json")).map_err(|e| e.to_string())?;
    let s: Scene = load_scene(&text).map_err(|e| e.to_string())?;
    let config = SolverConfig::default();

    let objective = ObjectiveConfig::new(Preset::SituationAdapt.weights());
    let sol = optimize(&s, &objective, &config).map_err(|e| e.to_string())?;
    let overlay = sol.report.term_total(Term::OverlaySuitability);
    ensure(overlay < 0.001, || format!("situation-adapt overlay cost {overlay}"))?;
    let desk = s.entity("desk").ok_or("fixture has no desk")?.bbox();
    let kb = sol.layout.position("keyboard").ok_or("no keyboard")?;
    let above = kb.y - desk.max().y;
    ensure((0.0..=0.1).contains(&above), || format!("keyboard {above:.3} m from the desk top"))?;
    let over = kb.x >= desk.min().x && kb.x <= desk.max().x && kb.z >= desk.min().z && kb.z <= desk.max().z;
    ensure(over, || format!("keyboard at ({:.3}, {:.3}) is not over the desk", kb.x, kb.z))?;

    let objective = ObjectiveConfig::new(Preset::UserCentric.weights());
    let sol = optimize(&s, &objective, &config).map_err(|e| e.to_string())?;
    let mut offenders = Vec::new();
    for el in s.elements() {
        let p = sol.layout.position(el.id()).unwrap();
        let hits = collect_hits(&s, el, p, objective.grid_n, objective.extent).map_err(|e| e.to_string())?;
        if hits.rays.iter().flatten().any(|h| h.entity_id == "monitor" || h.entity_id == "person") {
            offenders.push(el.id().to_string());
        }
    }
    ensure(!offenders.is_empty(), || "user-centric layout avoids monitor and person".into())?;
    Ok(format!(
        "overlay {overlay:.2e}, keyboard {:.3} m above desk; user-centric covers monitor/person with {}",
        above,
        offenders.join(", ")
    ))
}

// ---------------------------------------------------------------------------
// 6: presets

fn criterion_6() -> Check {
    use Term::*;
    let expected: [(Preset, [f64; 7]); 3] = [
        (Preset::UserCentric, [0.3, 0.1, 0.15, 0.3, 0.15, 0.0, 0.0]),
        (Preset::SurfaceAdapt, [0.2, 0.1, 0.1, 0.2, 0.1, 0.0, 0.3]),
        (Preset::SituationAdapt, [0.2, 0.05, 0.1, 0.2, 0.1, 0.15, 0.2]),
    ];
    let order = [Occlusion, LookTowards, Distance, FieldOfView, ConstantViewSize, OverlaySuitability, InteractionSuitability];
    for (preset, ws) in expected {
        let got: WeightConfig = preset.weights();
        for (t, w) in order.iter().zip(ws) {
            ensure(got.global().get(*t).to_bits() == w.to_bits(), || format!("{preset} {t}: {} vs {w}", got.global().get(*t)))?;
        }
        let mut body = String::from("{\n  \"weights\": {\n");
        let lines: Vec<String> =
            order.iter().zip(ws).filter(|(_, w)| *w != 0.0).map(|(t, w)| format!("    \"{}\": {w}", t.name())).collect();
        body.push_str(&lines.join(",\n"));
        body.push_str("\n  }\n}\n");
        ensure(preset.json() == body, || format!("{preset} file differs:\n{}\nexpected:\n{body}", preset.json()))?;
        let shipped = std::fs::read_to_string(
            Path::new(env!("CARGO_MANIFEST_DIR")).join(format!("../core/presets/{}.json", preset.name())),
        )
        .map_err(|e| e.to_string())?;
        ensure(shipped == body, || format!("{preset}: shipped file differs"))?;
    }
    Ok("3 presets byte-identical".into())
}

// ---------------------------------------------------------------------------
// 7: perception

fn look_at(eye: Vec3, target: Vec3) -> [[f64; 4]; 4] {
    let z = (target - eye).normalized().unwrap();
    let x = z.cross(v(0.0, -1.0, 0.0)).normalized().unwrap();
    let y = z.cross(x);
    [[x.x, y.x, z.x, eye.x], [x.y, y.y, z.y, eye.y], [x.z, y.z, z.z, eye.z], [0.0, 0.0, 0.0, 1.0]]
}

fn on_surface(rng: &mut ChaCha8Rng, b: &Box3) -> Vec3 {
    let h = b.half_extents();
    let w = [h.y * h.z, h.x * h.z, h.x * h.y];
    let mut pick = rng.random::<f64>() * (w[0] + w[1] + w[2]);
    let mut axis = 0;
    while axis < 2 && pick > w[axis] {
        pick -= w[axis];
        axis += 1;
    }
    let mut u = [0.0; 3];
    for (k, slot) in u.iter_mut().enumerate() {
        *slot = if k == axis { if rng.random::<bool>() { 1.0 } else { -1.0 } } else { rng.random_range(-1.0..1.0) };
    }
    b.center() + v(u[0] * h.x, u[1] * h.y, u[2] * h.z)
}

fn reference_dbscan(points: &[Vec3], eps: f64, min_pts: usize) -> Vec<Option<usize>> {
    let n = points.len();
    let region = |i: usize| -> Vec<usize> { (0..n).filter(|&j| (points[j] - points[i]).norm_squared() <= eps * eps).collect() };
    let mut visited = vec![false; n];
    let mut label: Vec<Option<usize>> = vec![None; n];
    let mut next = 0;
    for p in 0..n {
        if visited[p] {
            continue;
        }
        visited[p] = true;
        let mut seeds = region(p);
        if seeds.len() < min_pts {
            continue;
        }
        let c = next;
        next += 1;
        label[p] = Some(c);
        let mut k = 0;
        while k < seeds.len() {
            let q = seeds[k];
            k += 1;
            if !visited[q] {
                visited[q] = true;
                let nq = region(q);
                if nq.len() >= min_pts {
                    seeds.extend(nq);
                }
            }
            if label[q].is_none() {
                label[q] = Some(c);
            }
        }
    }
    label
}

/// Points of a unit sphere whose outward normal makes cos >= `min_cos` with +z.
fn sphere_count(sphere: &[Vec3], c: Vec3, min_cos: f64) -> usize {
    sphere.iter().filter(|p| (**p - c).z > min_cos).count()
}

fn criterion_7() -> Check {
    let mut worst_err: f64 = 0.0;
    let mut worst_iou: f64 = 1.0;
    for seed in 0..10 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let center = v(rng.random_range(-0.5..0.5), rng.random_range(0.5..1.0), rng.random_range(-3.0..-2.0));
        let half = v(rng.random_range(0.15..0.3), rng.random_range(0.1..0.25), rng.random_range(0.15..0.3));
        let truth = Box3::new(center, half).unwrap();
        let mut cloud: Vec<Vec3> = (0..500).map(|_| on_surface(&mut rng, &truth)).collect();
        for _ in 0..50 {
            cloud.push(center + v(rng.random_range(-3.0..3.0), rng.random_range(-2.0..2.0), rng.random_range(-3.0..3.0)));
        }
        let eye = center + v(-1.1, 1.0, 1.4);
        let cam = CameraModel::new(525.0, 525.0, 320.0, 240.0, 640.0, 480.0, look_at(eye, center)).unwrap();
        let mut r = [f64::MAX, f64::MAX, f64::MIN, f64::MIN];
        for i in 0..8 {
            let s = |bit: usize| if i & bit == 0 { -1.0 } else { 1.0 };
            let (u, w, _) = cam.project(center + v(s(1) * half.x, s(2) * half.y, s(4) * half.z));
            r = [r[0].min(u), r[1].min(w), r[2].max(u), r[3].max(w)];
        }
        let rect = PixelRect([(r[0] - 6.0).max(0.0), (r[1] - 6.0).max(0.0), (r[2] + 6.0).min(640.0), (r[3] + 6.0).min(480.0)]);
        let det = Detection2D::new("box", 0.8, rect);
        let cand = segment_box(&cloud, &cam, &det, &SegmentParams::default())
            .map_err(|e| e.to_string())?
            .ok_or_else(|| format!("seed {seed}: nothing segmented"))?;
        let err = cand.bbox.center().distance(center);
        let iou = cand.bbox.iou(&truth);
        worst_err = worst_err.max(err);
        worst_iou = worst_iou.min(iou);
        ensure(err < 0.05 && iou >= 0.7, || format!("seed {seed}: center error {err:.4}, IoU {iou:.3}"))?;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for trial in 0..40 {
        let n = rng.random_range(1..=200);
        // A few blobs plus background so every label kind shows up.
        let blobs: Vec<Vec3> = (0..3).map(|_| v(rng.random_range(0.0..2.0), rng.random_range(0.0..2.0), rng.random_range(0.0..2.0))).collect();
        let pts: Vec<Vec3> = (0..n)
            .map(|_| {
                if rng.random::<f64>() < 0.7 {
                    let b = blobs[rng.random_range(0..3)];
                    b + v(rng.random_range(-0.15..0.15), rng.random_range(-0.15..0.15), rng.random_range(-0.15..0.15))
                } else {
                    v(rng.random_range(0.0..2.0), rng.random_range(0.0..2.0), rng.random_range(0.0..2.0))
                }
            })
            .collect();
        let eps = rng.random_range(0.05..0.2);
        let min_pts = rng.random_range(1..=8);
        let got = dbscan(&pts, eps, min_pts).map_err(|e| e.to_string())?;
        let want = reference_dbscan(&pts, eps, min_pts);
        ensure(got.labels == want, || format!("dbscan trial {trial} (n={n}, eps={eps:.3}, min_pts={min_pts}) differs"))?;
    }

    let n = 4000;
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    let (c, radius) = (v(0.3, -0.2, -4.0), 1.0);
    let sphere: Vec<Vec3> = (0..n)
        .map(|i| {
            let y = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let r = (1.0 - y * y).sqrt();
            let th = golden * i as f64;
            c + v(r * th.cos(), r * th.sin(), y) * radius
        })
        .collect();
    let hemisphere = sphere_count(&sphere, c, 0.0);
    let mut report = Vec::new();
    // Far away the visible cap approaches the near hemisphere; close up it
    // shrinks to the tangent cone's cap, cos >= r/d.
    for dist in [50.0, 4.0] {
        let viewpoint = c + v(0.0, 0.0, dist);
        let seen = hidden_point_removal(&sphere, viewpoint, 100.0).map_err(|e| e.to_string())?.len();
        let cap = sphere_count(&sphere, c, radius / dist);
        for (name, want) in [("cap", cap), ("hemisphere", hemisphere)] {
            if name == "hemisphere" && dist < 10.0 {
                continue;
            }
            let rel = (seen as f64 - want as f64).abs() / want as f64;
            ensure(rel <= 0.05, || format!("HPR at d={dist} sees {seen}, analytic {name} {want}"))?;
        }
        report.push(format!("d={dist}: {seen}/{cap}"));
    }
    Ok(format!(
        "segment worst center error {worst_err:.4} m, IoU {worst_iou:.3}; dbscan 40/40; HPR visible/analytic {} (hemisphere {hemisphere})",
        report.join(", ")
    ))
}

// ---------------------------------------------------------------------------
// 8: reasoning protocol

fn golden(name: &str) -> Result<String, String> {
    std::fs::read_to_string(fixtures().join("golden").join(name)).map_err(|e| format!("{name}: {e}"))
}

fn rating_query(mode: RatingMode, few_shot: Vec<FewShotExample>, refine: bool) -> RatingQuery {
    RatingQuery {
        mode,
        image: "scene-7.png".into(),
        areas: (1..=3).map(|i| AreaAnnotation { index: i, box2d: [10.0 * i as f64, 5.0, 10.0 * i as f64 + 8.0, 40.0], entity_id: None }).collect(),
        few_shot,
        monitor_refinement: refine,
    }
}

fn criterion_8() -> Check {
    let example = FewShotExample {
        image: "survey-1.png".into(),
        areas: vec![AreaStats { median: 2.0, sd: 1.74 }, AreaStats { median: 1.0, sd: 1.52 }, AreaStats { median: 4.0, sd: 1.78 }],
    };
    let with_all = build_context_prompt(&rating_query(RatingMode::Interaction, vec![example], true));
    let want = golden("context_interaction_fewshot_refined.txt")?;
    ensure(with_all + "\n" == want, || "interaction context differs from golden".into())?;
    let overlay = build_context_prompt(&rating_query(RatingMode::Overlay, vec![], false));
    ensure(overlay.clone() + "\n" == golden("context_overlay.txt")?, || "overlay context differs from golden".into())?;
    ensure(want.contains("area 1: median 2.0, standard deviation 1.74"), || "few-shot format".into())?;
    ensure(!overlay.contains(MONITOR_REFINEMENT), || "refinement present without flag".into())?;

    let reasons = ["functionality, blocks the screen", "aesthetics", "Social acceptability", "health & safety: hot drink", "other", "too cluttered", ""];
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for set in 0..100 {
        let n = rng.random_range(1..=9);
        let rs: Vec<RatingResponse> = (1..=n)
            .map(|area| {
                let reason = reasons[rng.random_range(0..reasons.len())].to_string();
                RatingResponse { area, score: rng.random_range(1..=5), category: classify_reason(&reason), reason }
            })
            .collect();
        let back = parse_response(&render_responses(&rs)).map_err(|e| e.to_string())?;
        ensure(back.responses == rs && back.diagnostics.is_empty(), || format!("round trip failed on set {set}"))?;
    }

    let query = rating_query(RatingMode::Overlay, vec![], true);
    let fixtures: Vec<MockFixture> = (0..42u64)
        .map(|seed| {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            let text: String = (1..=3)
                .map(|a| format!("Area {a}: {}, {}\n", r.random_range(1..=5), reasons[r.random_range(0..reasons.len())]))
                .collect();
            MockFixture { image: query.image.clone(), mode: query.mode, seed, text }
        })
        .collect();
    let run = || -> Result<String, String> {
        let provider = MockProvider::new(fixtures.clone());
        let requests: Vec<_> = (0..42).map(|s| query.request(s)).collect();
        let answers = run_instances(&provider, &requests, 8).map_err(|e| e.to_string())?;
        let parsed = answers
            .into_iter()
            .map(|a| a.map_err(|e| e.to_string()).and_then(|t| parse_response(&t).map_err(|e| e.to_string())).map(|o| o.responses))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(ratings_to_json(query.mode, &aggregate_ratings(&parsed)))
    };
    let (a, b) = (run()?, run()?);
    ensure(a == b, || "mock pipeline output differs between runs".into())?;
    // Independent median of area 1.
    let mut scores: Vec<f64> = fixtures.iter().map(|f| parse_response(&f.text).unwrap().responses[0].score as f64).collect();
    scores.sort_by(f64::total_cmp);
    let median = (scores[20] + scores[21]) / 2.0;
    let doc: serde_json::Value = serde_json::from_str(&a).map_err(|e| e.to_string())?;
    let got = doc["areas"][0]["median"].as_f64();
    ensure(got == Some(median), || format!("area 1 median {got:?}, expected {median}"))?;
    Ok("golden prompts match; 100 round trips; 42-instance mock run deterministic".into())
}

// ---------------------------------------------------------------------------
// 9: statistics

fn enumerated_p(all: &[f64], m: usize, u_obs: f64) -> f64 {
    let n_all = all.len();
    let mu = (m * (n_all - m)) as f64 / 2.0;
    let (mut hits, mut total) = (0u64, 0u64);
    for mask in 0u32..(1 << n_all) {
        if mask.count_ones() as usize != m {
            continue;
        }
        let mut u = 0.0;
        for i in 0..n_all {
            if mask & (1 << i) == 0 {
                continue;
            }
            for j in 0..n_all {
                if mask & (1 << j) != 0 {
                    continue;
                }
                u += if all[i] > all[j] { 1.0 } else if all[i] == all[j] { 0.5 } else { 0.0 };
            }
        }
        total += 1;
        if (u - mu).abs() >= (u_obs - mu).abs() - 1e-9 {
            hits += 1;
        }
    }
    hits as f64 / total as f64
}

fn record(rater: &str, population: Population, cell: usize, score: u8, category: Option<ReasonCategory>) -> RatingRecord {
    RatingRecord {
        rater_id: rater.into(),
        population,
        scenario: format!("s{}", cell / 4),
        area: (cell % 4) as u32 + 1,
        score,
        category,
        question: RatingMode::Overlay,
    }
}

fn criterion_9() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut checked = 0;
    for n_all in 2..=10usize {
        for _ in 0..2 {
            let all: Vec<f64> = (0..n_all).map(|_| rng.random_range(1..=5) as f64).collect();
            for mask in 1u32..((1 << n_all) - 1) {
                let a: Vec<f64> = (0..n_all).filter(|i| mask & (1 << i) != 0).map(|i| all[i]).collect();
                let b: Vec<f64> = (0..n_all).filter(|i| mask & (1 << i) == 0).map(|i| all[i]).collect();
                let got = mann_whitney_u_with(&a, &b, PMethod::Exact).map_err(|e| e.to_string())?;
                ensure(got.exact, || "exact flag not set".into())?;
                let want = enumerated_p(&all, a.len(), got.u_a);
                ensure((got.p - want).abs() < 1e-12, || format!("a={a:?} b={b:?}: p {} vs enumeration {want}", got.p))?;
                checked += 1;
            }
        }
    }

    let mut records = Vec::new();
    for r in 0..12 {
        let scores: Vec<u8> = (0..24).map(|_| rng.random_range(1..=5)).collect();
        for (cell, &s) in scores.iter().enumerate() {
            records.push(record(&format!("p{r}"), Population::Participant, cell, s, None));
            records.push(record(&format!("v{r}"), Population::Vlm, cell, s, None));
        }
    }
    let matrix = RatingMatrix::from_records(&records, RatingMode::Overlay).map_err(|e| e.to_string())?;
    let p = bootstrap_population_test(&matrix, 2000, 42).map_err(|e| e.to_string())?;
    ensure((0.45..=0.55).contains(&p), || format!("cloned populations give p = {p}"))?;

    let cats = [ReasonCategory::Functionality, ReasonCategory::Aesthetics, ReasonCategory::Social, ReasonCategory::HealthSafety, ReasonCategory::Other];
    let mut draw = || Some(cats[rng.random_range(0..5)]);
    let a: Vec<_> = (0..10_000).map(|_| draw()).collect();
    let b: Vec<_> = (0..10_000).map(|_| draw()).collect();
    let agree = mode_agreement(&a, &b, &vec![true; 10_000]).ok_or("empty mask")?;
    ensure((0.18..=0.22).contains(&agree), || format!("chance agreement {agree}"))?;
    Ok(format!("{checked} exact splits match enumeration; bootstrap p = {p:.3}; chance agreement {agree:.3}"))
}

// ---------------------------------------------------------------------------
// 10: end-to-end determinism through the binary

fn pipeline(dir: &Path) -> Result<BTreeMap<String, Vec<u8>>, String> {
    let bin = env!("CARGO_BIN_EXE_mrlayout");
    let fx = fixtures().join("pipeline");
    let f = |name: &str| fx.join(name).display().to_string();
    let o = |name: &str| dir.join(name).display().to_string();
    let steps: Vec<Vec<String>> = vec![
        vec!["segment".into(), f("cloud.xyz"), f("camera.json"), f("detections.json"), "--out".into(), o("entities.json")],
        vec![
            "rate".into(), "lecture.png".into(), f("areas.json"), "--mode".into(), "overlay".into(), "--instances".into(), "5".into(),
            "--fixtures".into(), f("mock_responses.json"), "--entities".into(), o("entities.json"), "--entities-out".into(),
            o("entities_overlay.json"), "--out".into(), o("ratings_overlay.json"),
        ],
        vec![
            "rate".into(), "lecture.png".into(), f("areas.json"), "--mode".into(), "interaction".into(), "--instances".into(), "5".into(),
            "--fixtures".into(), f("mock_responses.json"), "--entities".into(), o("entities_overlay.json"), "--entities-out".into(),
            o("entities_rated.json"), "--out".into(), o("ratings_interaction.json"),
        ],
        vec![
            "optimize".into(), f("scene.json"), "--entities".into(), o("entities_rated.json"), "--preset".into(), "situation-adapt".into(),
            "--seed".into(), "11".into(), "--out".into(), o("layout.json"), "--report".into(), o("report.json"), "--trace".into(), o("trace.jsonl"),
        ],
        vec![
            "render".into(), f("scene.json"), o("layout.json"), "--entities".into(), o("entities_rated.json"), "--view".into(), "camera".into(),
            "--out".into(), o("layout.svg"),
        ],
    ];
    for args in &steps {
        let out = Command::new(bin).args(args).output().map_err(|e| e.to_string())?;
        ensure(out.status.success(), || format!("`{}` failed: {}", args[0], String::from_utf8_lossy(&out.stderr)))?;
    }
    let mut files = BTreeMap::new();
    for entry in std::fs::read_dir(dir).map_err(|e| e.to_string())? {
        let path = entry.map_err(|e| e.to_string())?.path();
        files.insert(path.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&path).map_err(|e| e.to_string())?);
    }
    Ok(files)
}

fn criterion_10() -> Check {
    let (a, b) = (tempfile::tempdir().map_err(|e| e.to_string())?, tempfile::tempdir().map_err(|e| e.to_string())?);
    let (fa, fb) = (pipeline(a.path())?, pipeline(b.path())?);
    ensure(fa.len() == 9, || format!("expected 9 outputs, got {:?}", fa.keys().collect::<Vec<_>>()))?;
    for (name, bytes) in &fa {
        ensure(fb.get(name) == Some(bytes), || format!("{name} differs between runs"))?;
    }
    let ents = String::from_utf8_lossy(&fa["entities.json"]).into_owned();
    ensure(ents.contains("\"tv-1\"") && ents.contains("\"desk-1\"") && ents.contains("\"person-1\""), || "segmentation lost an entity".into())?;
    Ok(format!("{} files byte-identical across two runs", fa.len()))
}

fn main() {
    let criteria: [(u32, &str, Duration, fn() -> Check); 10] = [
        (1, "closed-form term equivalence", Duration::from_secs(1), criterion_1),
        (2, "overlay penalty branches", Duration::from_secs(1), criterion_2),
        (3, "interaction sign", Duration::from_secs(1), criterion_3),
        (4, "solver vs lattice oracle", Duration::from_secs(60), criterion_4),
        (5, "situation awareness on the lecture scene", Duration::from_secs(10), criterion_5),
        (6, "preset golden values", Duration::from_secs(1), criterion_6),
        (7, "perception oracles", Duration::from_secs(30), criterion_7),
        (8, "reasoning protocol", Duration::from_secs(5), criterion_8),
        (9, "statistics", Duration::from_secs(30), criterion_9),
        (10, "end-to-end determinism", Duration::from_secs(120), criterion_10),
    ];
    let mut failed = 0;
    for (n, name, limit, f) in criteria {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        let took = start.elapsed();
        let outcome = match outcome {
            Ok(detail) if took > limit => Err(format!("{detail}; took {took:.2?}, limit {limit:?}")),
            other => other,
        };
        match outcome {
            Ok(detail) => println!("criterion {n:>2} PASS  {name}: {detail} ({took:.2?})"),
            Err(why) => {
                failed += 1;
                println!("criterion {n:>2} FAIL  {name}: {why} ({took:.2?})");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}
