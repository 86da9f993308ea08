//! Query-string view requests and the viewing zone they must stay inside.

use std::collections::HashMap;

use hmlfc::renderer::{Camera, LfGeometry};
use serde::{Deserialize, Serialize};

pub const MAX_RESOLUTION: usize = 1024;
/// Open interval of accepted fields of view, degrees.
pub const FOV_RANGE: (f64, f64) = (1.0, 120.0);
const ANGLE_LIMIT_DEG: f64 = 45.0;
const EPS: f64 = 1e-9;

/// A request parameter that failed validation.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{field}: {message}")]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

fn field_error(field: &str, message: impl Into<String>) -> FieldError {
    FieldError { field: field.into(), message: message.into() }
}

/// Closed ranges a pose may take. Positions are in scene units, angles in
/// degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViewZone {
    pub x: [f64; 2],
    pub y: [f64; 2],
    pub z: [f64; 2],
    pub yaw: [f64; 2],
    pub pitch: [f64; 2],
}

impl ViewZone {
    /// The camera rectangle in `x, y`, from one focal distance behind the
    /// camera plane to half way towards the image plane in `z`.
    pub fn for_geometry(g: &LfGeometry) -> Self {
        let (ex, ey) = g.camera_extent();
        ViewZone {
            x: [-ex, ex],
            y: [-ey, ey],
            z: [-g.focal_distance, 0.5 * g.focal_distance],
            yaw: [-ANGLE_LIMIT_DEG, ANGLE_LIMIT_DEG],
            pitch: [-ANGLE_LIMIT_DEG, ANGLE_LIMIT_DEG],
        }
    }

    pub fn center(&self) -> Pose {
        let mid = |r: [f64; 2]| (r[0] + r[1]) / 2.0;
        Pose { x: mid(self.x), y: mid(self.y), z: 0.0f64.clamp(self.z[0], self.z[1]), yaw: 0.0, pitch: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    /// Degrees, positive turns towards `+x`.
    pub yaw: f64,
    /// Degrees, positive tilts towards `+y`.
    pub pitch: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quality {
    Full,
    /// Renders at half resolution and scales up by pixel repetition.
    Preview,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViewRequest {
    pub pose: Pose,
    pub fov: f64,
    pub width: usize,
    pub height: usize,
    pub quality: Quality,
}

/// Defaults for omitted parameters.
#[derive(Debug, Clone, Copy)]
pub struct RequestDefaults {
    pub pose: Pose,
    pub fov: f64,
    pub width: usize,
    pub height: usize,
}

const KEYS: [&str; 9] = ["x", "y", "z", "yaw", "pitch", "fov", "w", "h", "quality"];

fn number(q: &HashMap<String, String>, key: &str, default: f64) -> Result<f64, FieldError> {
    match q.get(key) {
        None => Ok(default),
        Some(v) => match v.trim().parse::<f64>() {
            Ok(x) if x.is_finite() => Ok(x),
            _ => Err(field_error(key, format!("expected a finite number, got {v:?}"))),
        },
    }
}

fn in_range(key: &str, v: f64, r: [f64; 2]) -> Result<f64, FieldError> {
    if v < r[0] - EPS || v > r[1] + EPS {
        return Err(field_error(key, format!("{v} outside [{}, {}]", r[0], r[1])));
    }
    Ok(v)
}

fn size(q: &HashMap<String, String>, key: &str, default: usize) -> Result<usize, FieldError> {
    let v = match q.get(key) {
        None => default,
        Some(v) => v.trim().parse::<usize>().map_err(|_| field_error(key, format!("expected a positive integer, got {v:?}")))?,
    };
    if v == 0 || v > MAX_RESOLUTION {
        return Err(field_error(key, format!("{v} outside 1..={MAX_RESOLUTION}")));
    }
    Ok(v)
}

impl ViewRequest {
    pub fn parse(q: &HashMap<String, String>, defaults: &RequestDefaults, zone: &ViewZone) -> Result<Self, FieldError> {
        let mut unknown: Vec<&String> = q.keys().filter(|k| !KEYS.contains(&k.as_str())).collect();
        unknown.sort();
        if let Some(k) = unknown.first() {
            return Err(field_error(k, "unknown parameter"));
        }
        let d = defaults.pose;
        let pose = Pose {
            x: in_range("x", number(q, "x", d.x)?, zone.x)?,
            y: in_range("y", number(q, "y", d.y)?, zone.y)?,
            z: in_range("z", number(q, "z", d.z)?, zone.z)?,
            yaw: in_range("yaw", number(q, "yaw", d.yaw)?, zone.yaw)?,
            pitch: in_range("pitch", number(q, "pitch", d.pitch)?, zone.pitch)?,
        };
        let fov = number(q, "fov", defaults.fov)?;
        if !(fov > FOV_RANGE.0 && fov < FOV_RANGE.1) {
            return Err(field_error("fov", format!("{fov} outside ({}, {})", FOV_RANGE.0, FOV_RANGE.1)));
        }
        let quality = match q.get("quality").map(|s| s.trim()) {
            None | Some("full") => Quality::Full,
            Some("preview") => Quality::Preview,
            Some(v) => return Err(field_error("quality", format!("expected full or preview, got {v:?}"))),
        };
        Ok(ViewRequest {
            pose,
            fov,
            width: size(q, "w", defaults.width)?,
            height: size(q, "h", defaults.height)?,
            quality,
        })
    }

    /// The camera for a render of `width × height` pixels.
    pub fn camera(&self, width: usize, height: usize) -> Camera {
        let p = self.pose;
        Camera {
            position: [p.x, p.y, p.z],
            yaw: p.yaw.to_radians(),
            pitch: p.pitch.to_radians(),
            fov: self.fov,
            width,
            height,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup() -> (RequestDefaults, ViewZone) {
        let g = LfGeometry::default_for(4, 4, 32, 24);
        let zone = ViewZone::for_geometry(&g);
        (RequestDefaults { pose: zone.center(), fov: g.matched_fov_degrees(), width: 32, height: 24 }, zone)
    }

    fn query(pairs: &[(&str, &str)]) -> HashMap<String, String> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn empty_query_takes_defaults() {
        let (d, zone) = setup();
        let r = ViewRequest::parse(&HashMap::new(), &d, &zone).unwrap();
        assert_eq!((r.pose, r.fov, r.width, r.height, r.quality), (d.pose, d.fov, 32, 24, Quality::Full));
    }

    #[test]
    fn errors_name_the_field() {
        let (d, zone) = setup();
        let cases = [
            (vec![("fov", "0")], "fov"),
            (vec![("fov", "120")], "fov"),
            (vec![("fov", "abc")], "fov"),
            (vec![("w", "1025")], "w"),
            (vec![("h", "0")], "h"),
            (vec![("h", "-3")], "h"),
            (vec![("x", "1")], "x"),
            (vec![("z", "NaN")], "z"),
            (vec![("yaw", "46")], "yaw"),
            (vec![("quality", "best")], "quality"),
            (vec![("zoom", "2")], "zoom"),
        ];
        for (pairs, field) in cases {
            let err = ViewRequest::parse(&query(&pairs), &d, &zone).unwrap_err();
            assert_eq!(err.field, field, "{pairs:?}");
        }
    }

    #[test]
    fn zone_edges_are_accepted() {
        let (d, zone) = setup();
        let x = zone.x[1].to_string();
        let r = ViewRequest::parse(&query(&[("x", &x), ("pitch", "-45"), ("w", "1024"), ("quality", "preview")]), &d, &zone).unwrap();
        assert_eq!((r.width, r.quality), (1024, Quality::Preview));
        let cam = r.camera(10, 5);
        assert!((cam.pitch + std::f64::consts::FRAC_PI_4).abs() < 1e-12);
        assert_eq!((cam.width, cam.height), (10, 5));
    }
}
