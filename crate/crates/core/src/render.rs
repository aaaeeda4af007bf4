//! Static SVG views of a scene and layout.

use std::fmt::Write as _;

use crate::geometry::ElementFrame;
use crate::num::Real;
use crate::scene::{Layout, Scene, SceneError, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum View {
    /// Looking down the y axis onto the x-z plane.
    Top,
    /// Perspective from the user's eye.
    Camera,
}

impl std::str::FromStr for View {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "top" => Ok(View::Top),
            "camera" => Ok(View::Camera),
            other => Err(format!("unknown view `{other}` (expected top or camera)")),
        }
    }
}

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 600.0;
const MARGIN: f64 = 40.0;
/// Focal length of the camera view, in view-plane units per unit depth.
const FOCAL: f64 = 1.0;
const NEAR: f64 = 0.05;

/// Red for unsuitable, green for suitable.
pub fn rating_color(o: f64) -> String {
    let o = o.clamp(0.0, 1.0);
    format!("#{:02x}{:02x}40", (255.0 * (1.0 - o)).round() as u8, (255.0 * o).round() as u8)
}

struct Shape {
    points: Vec<(f64, f64)>,
    style: String,
    label: String,
}

fn d(v: Vec3<impl Real>) -> [f64; 3] {
    [v.x.as_f64(), v.y.as_f64(), v.z.as_f64()]
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn box_corners(center: [f64; 3], half: [f64; 3]) -> Vec<[f64; 3]> {
    (0..8)
        .map(|i| {
            let s = |bit: usize| if i & bit == 0 { -1.0 } else { 1.0 };
            [center[0] + s(1) * half[0], center[1] + s(2) * half[1], center[2] + s(4) * half[2]]
        })
        .collect()
}

/// Axis-aligned rectangle around projected points (as a 4-point polygon).
fn rect_of(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let (mut x0, mut y0, mut x1, mut y1) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
    for &(x, y) in points {
        x0 = x0.min(x);
        y0 = y0.min(y);
        x1 = x1.max(x);
        y1 = y1.max(y);
    }
    vec![(x0, y0), (x1, y0), (x1, y1), (x0, y1)]
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Renders entity boxes colored by overlay rating, element rectangles and
/// the user. Output is byte-identical for identical inputs.
pub fn render_svg<T: Real>(scene: &Scene<T>, layout: Option<&Layout<T>>, view: View) -> Result<String, SceneError> {
    let user = scene.user();
    let eye = d(user.eye());
    let (fw, up, right) = (d(user.forward()), d(user.up()), d(user.right()));
    // View-plane coordinates with y growing upwards; flipped when emitted.
    let project = |p: [f64; 3]| -> Option<(f64, f64)> {
        match view {
            View::Top => Some((p[0], -p[2])),
            View::Camera => {
                let r = sub(p, eye);
                let z = dot(r, fw);
                (z > NEAR).then(|| (FOCAL * dot(r, right) / z, FOCAL * dot(r, up) / z))
            }
        }
    };

    let mut shapes = Vec::new();
    for e in scene.entities() {
        let corners = box_corners(d(e.bbox().center()), d(e.bbox().half_extents()));
        let pts: Vec<(f64, f64)> = corners.into_iter().filter_map(project).collect();
        if pts.is_empty() {
            continue;
        }
        shapes.push(Shape {
            points: rect_of(&pts),
            style: format!(
                "fill=\"{}\" fill-opacity=\"0.45\" stroke=\"#333333\" stroke-width=\"1\"",
                rating_color(e.overlay_rating().as_f64())
            ),
            label: e.id().to_string(),
        });
    }
    if let Some(layout) = layout {
        layout.validate_for(scene)?;
        for el in scene.elements() {
            let pos = layout.position(el.id()).expect("validated");
            let Ok(f) = ElementFrame::billboard(user, el, pos) else { continue };
            let (c, r, u) = (d(f.center), d(f.right), d(f.up));
            let (hw, hh) = (f.half_width.as_f64(), f.half_height.as_f64());
            let corner = |sx: f64, sy: f64| {
                [c[0] + sx * hw * r[0] + sy * hh * u[0], c[1] + sx * hw * r[1] + sy * hh * u[1], c[2] + sx * hw * r[2] + sy * hh * u[2]]
            };
            let quad = [corner(-1.0, -1.0), corner(1.0, -1.0), corner(1.0, 1.0), corner(-1.0, 1.0)];
            let pts: Vec<(f64, f64)> = quad.into_iter().filter_map(project).collect();
            if pts.len() < 4 {
                continue;
            }
            let pts = if view == View::Top { rect_of(&pts) } else { pts };
            shapes.push(Shape {
                points: pts,
                style: "fill=\"none\" stroke=\"#1f4fd1\" stroke-width=\"2\"".into(),
                label: el.id().to_string(),
            });
        }
    }

    // Fit everything plus the user into the canvas.
    let user_pt = match view {
        View::Top => (eye[0], -eye[2]),
        View::Camera => (0.0, 0.0),
    };
    let (mut x0, mut y0, mut x1, mut y1) = (user_pt.0 - 0.5, user_pt.1 - 0.5, user_pt.0 + 0.5, user_pt.1 + 0.5);
    for s in &shapes {
        for &(x, y) in &s.points {
            x0 = x0.min(x);
            y0 = y0.min(y);
            x1 = x1.max(x);
            y1 = y1.max(y);
        }
    }
    if view == View::Camera {
        // Keep extreme off-axis projections from squashing the view.
        x0 = x0.max(-4.0);
        x1 = x1.min(4.0);
        y0 = y0.max(-4.0);
        y1 = y1.min(4.0);
    }
    let scale = ((WIDTH - 2.0 * MARGIN) / (x1 - x0)).min((HEIGHT - 2.0 * MARGIN) / (y1 - y0));
    let to_px = |(x, y): (f64, f64)| (MARGIN + (x - x0) * scale, HEIGHT - MARGIN - (y - y0) * scale);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">"
    );
    let _ = writeln!(svg, "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>");
    for s in &shapes {
        let pts: Vec<String> = s
            .points
            .iter()
            .map(|p| {
                let (x, y) = to_px(*p);
                format!("{x:.3},{y:.3}")
            })
            .collect();
        let _ = writeln!(svg, "<polygon points=\"{}\" {}><title>{}</title></polygon>", pts.join(" "), s.style, escape(&s.label));
        let (lx, ly) = to_px(s.points[0]);
        let _ = writeln!(svg, "<text x=\"{lx:.3}\" y=\"{:.3}\" font-size=\"11\" font-family=\"sans-serif\">{}</text>", ly - 3.0, escape(&s.label));
    }
    let (ux, uy) = to_px(user_pt);
    match view {
        View::Top => {
            let dir = (fw[0], -fw[2]);
            let len = (dir.0 * dir.0 + dir.1 * dir.1).sqrt();
            let (dx, dy) = if len > 1e-9 { (dir.0 / len * 30.0, -dir.1 / len * 30.0) } else { (0.0, 0.0) };
            let _ = writeln!(svg, "<g id=\"user\"><circle cx=\"{ux:.3}\" cy=\"{uy:.3}\" r=\"8\" fill=\"#000000\"/><line x1=\"{ux:.3}\" y1=\"{uy:.3}\" x2=\"{:.3}\" y2=\"{:.3}\" stroke=\"#000000\" stroke-width=\"2\"/></g>", ux + dx, uy + dy);
        }
        View::Camera => {
            let _ = writeln!(svg, "<g id=\"user\"><line x1=\"{:.3}\" y1=\"{uy:.3}\" x2=\"{:.3}\" y2=\"{uy:.3}\" stroke=\"#000000\"/><line x1=\"{ux:.3}\" y1=\"{:.3}\" x2=\"{ux:.3}\" y2=\"{:.3}\" stroke=\"#000000\"/></g>", ux - 8.0, ux + 8.0, uy - 8.0, uy + 8.0);
        }
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}
