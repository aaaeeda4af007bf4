use mrlayout::geometry::{collect_hits, RayExtent};
use mrlayout::objectives::{total_objective, interaction_cost, overlay_cost, ObjectiveConfig, Term, WeightConfig};
use mrlayout::scene::{load_scene, save_scene, Box3, Layout, PhysicalEntity, Scene, UiElement, UserPose, Vec3};
use proptest::prelude::*;

// Coordinates on a 1/64 m grid keep translations by whole meters exact.
fn q(i: i32) -> f64 {
    i as f64 / 64.0
}

fn coord(lo: i32, hi: i32) -> impl Strategy<Value = f64> {
    (lo..hi).prop_map(q)
}

fn entity(k: usize) -> impl Strategy<Value = PhysicalEntity> {
    (coord(-64, 64), coord(0, 128), coord(-192, -32), coord(4, 40), coord(4, 40), coord(4, 40), 0u8..=10, 0u8..=10).prop_map(
        move |(x, y, z, hx, hy, hz, o, i)| {
            let b = Box3::new(Vec3::new(x, y, z), Vec3::new(hx, hy, hz)).unwrap();
            PhysicalEntity::new(format!("e{k}"), "thing", b, o as f64 / 10.0, i as f64 / 10.0).unwrap()
        },
    )
}

fn element(k: usize) -> impl Strategy<Value = UiElement> {
    (coord(8, 32), coord(8, 24), 0u8..=4)
        .prop_map(move |(w, h, f)| UiElement::new(format!("w{k}"), "panel", w, h, f as f64 / 4.0).unwrap())
}

fn position() -> impl Strategy<Value = Vec3> {
    (coord(-48, 48), coord(32, 112), coord(-96, -16)).prop_map(|(x, y, z)| Vec3::new(x, y, z))
}

fn user() -> UserPose {
    UserPose::new(Vec3::new(0.0, 1.25, 0.0), Vec3::new(0.0, 0.0, -1.0), Vec3::new(0.0, 1.0, 0.0)).unwrap()
}

fn scene_and_layout() -> impl Strategy<Value = (Scene, Layout)> {
    let entities = (0usize..5).prop_flat_map(|n| (0..n).map(entity).collect::<Vec<_>>());
    let elements = (1usize..4).prop_flat_map(|n| ((0..n).map(element).collect::<Vec<_>>(), prop::collection::vec(position(), n)));
    (entities, elements).prop_map(|(ents, (els, pos))| {
        let s = Scene::new(user(), ents, els).unwrap();
        let l = Layout::from_ordered(&s, &pos).unwrap();
        (s, l)
    })
}

fn weights() -> impl Strategy<Value = WeightConfig> {
    prop::collection::vec(0u8..=10, 7).prop_filter_map("at least one positive weight", |ws| {
        WeightConfig::new(Term::ALL.into_iter().zip(ws.into_iter().map(|w| w as f64 / 10.0))).ok()
    })
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn scene_json_round_trip((s, _) in scene_and_layout()) {
        let text = save_scene(&s);
        let back: Scene = load_scene(&text).unwrap();
        prop_assert_eq!(&back, &s);
        prop_assert_eq!(save_scene(&back), text);
    }

    #[test]
    fn hits_lie_on_box_surfaces((s, l) in scene_and_layout()) {
        for el in s.elements() {
            let hits = collect_hits(&s, el, l.position(el.id()).unwrap(), 5, RayExtent::ClipAtElement).unwrap();
            for h in hits.rays.iter().flatten() {
                let b = s.entity(&h.entity_id).unwrap().bbox();
                let gap = (h.point - b.center()).abs() - b.half_extents();
                let worst = gap.x.max(gap.y).max(gap.z);
                prop_assert!(worst.abs() < 1e-7, "off surface by {}", worst);
                prop_assert!(h.d_h > 0.0 && h.d_h <= 1.0 + 1e-12);
            }
        }
    }

    #[test]
    fn hits_ignore_entity_order((s, l) in scene_and_layout(), seed in any::<u64>()) {
        let mut ents = s.entities().to_vec();
        let n = ents.len();
        for i in (1..n).rev() {
            ents.swap(i, (seed as usize).wrapping_mul(i + 7) % (i + 1));
        }
        let shuffled = s.with_entities(ents).unwrap();
        for el in s.elements() {
            let p = l.position(el.id()).unwrap();
            let a = collect_hits(&s, el, p, 4, RayExtent::ClipAtElement).unwrap();
            let b = collect_hits(&shuffled, el, p, 4, RayExtent::ClipAtElement).unwrap();
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn terms_survive_translation((s, l) in scene_and_layout(), w in weights(), dx in -20i32..20, dy in -20i32..20, dz in -20i32..20) {
        let offset = Vec3::new(dx as f64, dy as f64, dz as f64);
        let obj = ObjectiveConfig::new(w);
        let a = total_objective(&s, &l, &obj).unwrap();
        let b = total_objective(&s.translated(offset), &l.translated(offset), &obj).unwrap();
        for (ea, eb) in a.elements.iter().zip(&b.elements) {
            for t in Term::ALL {
                prop_assert!(close(ea.costs.get(t), eb.costs.get(t)), "{}: {} vs {}", t, ea.costs.get(t), eb.costs.get(t));
            }
        }
        prop_assert!(close(a.total, b.total));
    }

    #[test]
    fn objective_is_linear_in_weights((s, l) in scene_and_layout(), w in weights(), k in 1u8..5) {
        let k = k as f64;
        let a = total_objective(&s, &l, &ObjectiveConfig::new(w.clone())).unwrap();
        let b = total_objective(&s, &l, &ObjectiveConfig::new(w.scaled(k))).unwrap();
        prop_assert!(close(b.total, k * a.total));
        let parts: f64 = a.elements.iter().map(|e| e.weighted_total).sum();
        prop_assert!((parts - a.total).abs() < 1e-9);
        for e in &a.elements {
            let manual: f64 = Term::ALL.iter().map(|t| e.weights.get(*t) * e.costs.get(*t)).sum();
            prop_assert!((manual - e.weighted_total).abs() < 1e-9);
        }
    }

    #[test]
    fn overlay_never_increases_with_rating((s, l) in scene_and_layout(), pick in any::<prop::sample::Index>()) {
        prop_assume!(!s.entities().is_empty());
        let k = pick.index(s.entities().len());
        let el = &s.elements()[0];
        let p = l.position(el.id()).unwrap();
        let mut last = f64::INFINITY;
        for step in 0..=10 {
            let mut ents = s.entities().to_vec();
            ents[k] = ents[k].clone().with_overlay_rating(step as f64 / 10.0).unwrap();
            let c = overlay_cost(&s.with_entities(ents).unwrap(), el, p, 5, RayExtent::ClipAtElement).unwrap();
            prop_assert!(c >= 0.0);
            prop_assert!(c <= last + 1e-15);
            last = c;
        }
    }

    #[test]
    fn interaction_monotone_and_linear_in_frequency((s, l) in scene_and_layout(), pick in any::<prop::sample::Index>()) {
        prop_assume!(!s.entities().is_empty());
        let k = pick.index(s.entities().len());
        let el = &s.elements()[0];
        let p = l.position(el.id()).unwrap();
        let mut last = f64::INFINITY;
        for step in 0..=10 {
            let mut ents = s.entities().to_vec();
            ents[k] = ents[k].clone().with_interaction_rating(step as f64 / 10.0).unwrap();
            let c = interaction_cost(&s.with_entities(ents).unwrap(), el, p, 5, RayExtent::ClipAtElement).unwrap();
            prop_assert!(c <= last + 1e-15);
            last = c;
        }
        let unit = UiElement::new(el.id(), el.name(), el.width(), el.height(), 1.0).unwrap();
        let half = UiElement::new(el.id(), el.name(), el.width(), el.height(), 0.5).unwrap();
        let cu = interaction_cost(&s, &unit, p, 5, RayExtent::ClipAtElement).unwrap();
        let ch = interaction_cost(&s, &half, p, 5, RayExtent::ClipAtElement).unwrap();
        prop_assert!(close(ch, 0.5 * cu));
    }
}
