//! Point cloud, camera and detection file readers.

use std::path::Path;

use serde::Deserialize;

use crate::num::Real;
use crate::scene::Vec3;

use super::{CameraModel, Detection2D, PerceptionError, PixelRect};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CloudFormat {
    Xyz,
    Ply,
}

impl CloudFormat {
    /// `.ply` files are PLY, anything else is whitespace-separated XYZ.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("ply") => CloudFormat::Ply,
            _ => CloudFormat::Xyz,
        }
    }
}

fn parse_err(source: &str, line: usize, message: impl Into<String>) -> PerceptionError {
    PerceptionError::Parse { source_name: source.to_string(), line, message: message.into() }
}

fn coord<T: Real>(tok: &str, source: &str, line: usize) -> Result<T, PerceptionError> {
    let v: f64 = tok.parse().map_err(|_| parse_err(source, line, format!("`{tok}` is not a number")))?;
    if !v.is_finite() {
        return Err(parse_err(source, line, "non-finite coordinate"));
    }
    Ok(T::lit(v))
}

/// One point per line as `x y z`; blank lines and `#` comments are skipped.
/// Extra columns (colors, normals) are ignored.
pub fn parse_xyz<T: Real>(text: &str, source: &str) -> Result<Vec<Vec3<T>>, PerceptionError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let toks: Vec<&str> = line.split(|c: char| c.is_whitespace() || c == ',').filter(|t| !t.is_empty()).collect();
        if toks.len() < 3 {
            return Err(parse_err(source, i + 1, format!("expected 3 coordinates, found {}", toks.len())));
        }
        out.push(Vec3::new(coord(toks[0], source, i + 1)?, coord(toks[1], source, i + 1)?, coord(toks[2], source, i + 1)?));
    }
    Ok(out)
}

/// ASCII PLY 1.0 with `x`, `y`, `z` vertex properties. Elements other than
/// `vertex` are skipped.
pub fn parse_ply<T: Real>(text: &str, source: &str) -> Result<Vec<Vec3<T>>, PerceptionError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, l)) if l.trim() == "ply" => {}
        _ => return Err(parse_err(source, 1, "missing `ply` magic line")),
    }
    // (name, count, property names)
    let mut elements: Vec<(String, usize, Vec<String>)> = Vec::new();
    let mut header_done = false;
    for (i, raw) in lines.by_ref() {
        let toks: Vec<&str> = raw.split_whitespace().collect();
        match toks.as_slice() {
            [] => {}
            ["format", fmt, ver] => {
                if *fmt != "ascii" || *ver != "1.0" {
                    return Err(parse_err(source, i + 1, format!("unsupported format `{fmt} {ver}`")));
                }
            }
            ["comment", ..] | ["obj_info", ..] => {}
            ["element", name, count] => {
                let count = count.parse().map_err(|_| parse_err(source, i + 1, "bad element count"))?;
                elements.push((name.to_string(), count, Vec::new()));
            }
            ["property", "list", _, _, name] | ["property", _, name] => match elements.last_mut() {
                Some(e) => e.2.push(name.to_string()),
                None => return Err(parse_err(source, i + 1, "property before element")),
            },
            ["end_header"] => {
                header_done = true;
                break;
            }
            _ => return Err(parse_err(source, i + 1, format!("unexpected header line `{}`", raw.trim()))),
        }
    }
    if !header_done {
        return Err(parse_err(source, text.lines().count().max(1), "missing end_header"));
    }
    let mut out = Vec::new();
    for (name, count, props) in &elements {
        let is_vertex = name == "vertex";
        let idx = |p: &str| props.iter().position(|q| q == p);
        let axes = if is_vertex {
            match (idx("x"), idx("y"), idx("z")) {
                (Some(x), Some(y), Some(z)) => Some([x, y, z]),
                _ => return Err(parse_err(source, 1, "vertex element lacks x/y/z")),
            }
        } else {
            None
        };
        let mut seen = 0;
        while seen < *count {
            let Some((i, raw)) = lines.next() else {
                return Err(parse_err(source, text.lines().count(), format!("expected {count} `{name}` rows, found {seen}")));
            };
            let toks: Vec<&str> = raw.split_whitespace().collect();
            if toks.is_empty() {
                continue;
            }
            seen += 1;
            if let Some([x, y, z]) = axes {
                if toks.len() < props.len() {
                    return Err(parse_err(source, i + 1, format!("expected {} values, found {}", props.len(), toks.len())));
                }
                out.push(Vec3::new(coord(toks[x], source, i + 1)?, coord(toks[y], source, i + 1)?, coord(toks[z], source, i + 1)?));
            }
        }
    }
    Ok(out)
}

pub fn read_point_cloud<T: Real>(path: &Path) -> Result<Vec<Vec3<T>>, PerceptionError> {
    let name = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| parse_err(&name, 0, e.to_string()))?;
    match CloudFormat::from_path(path) {
        CloudFormat::Ply => parse_ply(&text, &name),
        CloudFormat::Xyz => parse_xyz(&text, &name),
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum PoseDoc {
    Nested([[f64; 4]; 4]),
    Flat([f64; 16]),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CameraDoc {
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
    width: f64,
    height: f64,
    pose: PoseDoc,
}

fn json_err(source: &str, e: serde_json::Error) -> PerceptionError {
    parse_err(source, e.line(), e.to_string())
}

/// `{fx, fy, cx, cy, width, height, pose}` with `pose` a row-major 4x4
/// camera-to-world matrix (nested rows or 16 numbers).
pub fn load_camera<T: Real>(text: &str, source: &str) -> Result<CameraModel<T>, PerceptionError> {
    let doc: CameraDoc = serde_json::from_str(text).map_err(|e| json_err(source, e))?;
    let m = match doc.pose {
        PoseDoc::Nested(m) => m,
        PoseDoc::Flat(f) => std::array::from_fn(|r| std::array::from_fn(|c| f[r * 4 + c])),
    };
    let pose = m.map(|row| row.map(T::lit));
    let l = T::lit;
    CameraModel::new(l(doc.fx), l(doc.fy), l(doc.cx), l(doc.cy), l(doc.width), l(doc.height), pose)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DetectionDoc {
    label: String,
    confidence: f64,
    #[serde(rename = "box")]
    rect: [f64; 4],
}

/// JSON list of `{label, confidence, box: [xmin, ymin, xmax, ymax]}`.
pub fn load_detections<T: Real>(text: &str, source: &str) -> Result<Vec<Detection2D<T>>, PerceptionError> {
    let docs: Vec<DetectionDoc> = serde_json::from_str(text).map_err(|e| json_err(source, e))?;
    Ok(docs
        .into_iter()
        .map(|d| Detection2D::new(d.label, T::lit(d.confidence), PixelRect(d.rect.map(T::lit))))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn xyz_with_comments() {
        let pts: Vec<Vec3> = parse_xyz("# header\n1 2 3\n\n4.5 -1 0 255 0 0\n", "c.xyz").unwrap();
        assert_eq!(pts, vec![Vec3::new(1.0, 2.0, 3.0), Vec3::new(4.5, -1.0, 0.0)]);
    }

    #[test]
    fn xyz_reports_line() {
        let err = parse_xyz::<f64>("1 2 3\n1 2\n", "c.xyz").unwrap_err();
        assert!(matches!(err, PerceptionError::Parse { line: 2, .. }));
        let err = parse_xyz::<f64>("1 2 3\n0 0 0\n1 x 3\n", "c.xyz").unwrap_err();
        assert!(err.to_string().contains("line 3"));
        assert!(parse_xyz::<f64>("nan 0 0", "c").is_err());
    }

    #[test]
    fn ply_ascii() {
        let text = "ply\nformat ascii 1.0\ncomment made by hand\nelement vertex 2\nproperty float y\nproperty float x\nproperty float z\nproperty uchar red\nelement face 1\nproperty list uchar int vertex_indices\nend_header\n1 2 3 9\n4 5 6 9\n3 0 1 1\n";
        let pts: Vec<Vec3> = parse_ply(text, "c.ply").unwrap();
        assert_eq!(pts, vec![Vec3::new(2.0, 1.0, 3.0), Vec3::new(5.0, 4.0, 6.0)]);
    }

    #[test]
    fn ply_errors() {
        assert!(parse_ply::<f64>("ply\nformat binary_little_endian 1.0\nend_header\n", "c").is_err());
        let short = "ply\nformat ascii 1.0\nelement vertex 3\nproperty float x\nproperty float y\nproperty float z\nend_header\n0 0 0\n";
        assert!(parse_ply::<f64>(short, "c").is_err());
        assert!(parse_ply::<f64>("xyz\n", "c").is_err());
    }

    #[test]
    fn camera_and_detections() {
        let cam: CameraModel = load_camera(
            r#"{"fx": 500, "fy": 500, "cx": 320, "cy": 240, "width": 640, "height": 480,
                "pose": [1,0,0,0, 0,1,0,0, 0,0,1,0, 0,0,0,1]}"#,
            "cam.json",
        )
        .unwrap();
        assert_eq!(cam.center(), Vec3::zero());
        let dets: Vec<Detection2D> =
            load_detections(r#"[{"label": "cup", "confidence": 0.8, "box": [1, 2, 30, 40]}]"#, "d.json").unwrap();
        assert_eq!(dets[0].label(), "cup");
        assert_eq!(dets[0].rect().0, [1.0, 2.0, 30.0, 40.0]);
        assert!(load_detections::<f64>("[]", "d").unwrap().is_empty());
        let err = load_detections::<f64>("[\n{\"label\": 3}]", "d").unwrap_err();
        assert!(matches!(err, PerceptionError::Parse { line: 2, .. }));
    }
}
