//! Directory ingestion and export.
//!
//! Default layout: a flat directory of `out_<t>_<s>.png` (or `.ppm`, binary
//! P6) files; the grid size is inferred from the largest indices present. A
//! `manifest.json` in the directory overrides the convention:
//!
//! ```json
//! { "grid_s": 2, "grid_t": 1,
//!   "views": [ { "s": 0, "t": 0, "file": "left.png" },
//!              { "s": 1, "t": 0, "file": "right.png" } ] }
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use image::{ColorType, ImageFormat, RgbImage};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::LightField;

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("no light-field images found in {0}")]
    Empty(PathBuf),
    #[error("bad manifest: {0}")]
    Manifest(String),
    #[error("missing image for view ({s},{t})")]
    Missing { s: usize, t: usize },
    #[error("view ({s},{t}) is {got:?}, expected {expected:?}")]
    DimensionMismatch { s: usize, t: usize, expected: (u32, u32), got: (u32, u32) },
    #[error("view ({s},{t}) has unsupported pixel format {format}; need 8-bit RGB")]
    UnsupportedFormat { s: usize, t: usize, format: String },
    #[error("view ({s},{t}) could not be decoded: {message}")]
    Decode { s: usize, t: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestView {
    pub s: usize,
    pub t: usize,
    pub file: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub grid_s: usize,
    pub grid_t: usize,
    pub views: Vec<ManifestView>,
}

fn parse_default_name(name: &str) -> Option<(usize, usize)> {
    let stem = name.strip_prefix("out_")?;
    let (stem, ext) = stem.rsplit_once('.')?;
    if !matches!(ext.to_ascii_lowercase().as_str(), "png" | "ppm") {
        return None;
    }
    let (t, s) = stem.split_once('_')?;
    Some((s.parse().ok()?, t.parse().ok()?))
}

fn scan_directory(dir: &Path) -> Result<Manifest, LoadError> {
    let io_err = |source| LoadError::Io { path: dir.to_path_buf(), source };
    let mut found = BTreeMap::new();
    for entry in std::fs::read_dir(dir).map_err(io_err)? {
        let entry = entry.map_err(io_err)?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if let Some(st) = parse_default_name(&name) {
            found.insert(st, name);
        }
    }
    if found.is_empty() {
        return Err(LoadError::Empty(dir.to_path_buf()));
    }
    let grid_s = found.keys().map(|k| k.0).max().unwrap_or(0) + 1;
    let grid_t = found.keys().map(|k| k.1).max().unwrap_or(0) + 1;
    let views = found.into_iter().map(|((s, t), file)| ManifestView { s, t, file }).collect();
    Ok(Manifest { grid_s, grid_t, views })
}

fn read_manifest(path: &Path) -> Result<Manifest, LoadError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| LoadError::Io { path: path.to_path_buf(), source })?;
    let m: Manifest =
        serde_json::from_str(&text).map_err(|e| LoadError::Manifest(e.to_string()))?;
    if m.grid_s == 0 || m.grid_t == 0 {
        return Err(LoadError::Manifest("grid dimensions must be at least 1".into()));
    }
    if let Some(v) = m.views.iter().find(|v| v.s >= m.grid_s || v.t >= m.grid_t) {
        return Err(LoadError::Manifest(format!("view ({},{}) lies outside the grid", v.s, v.t)));
    }
    Ok(m)
}

fn load_view(path: &Path, s: usize, t: usize) -> Result<RgbImage, LoadError> {
    let reader = image::ImageReader::open(path)
        .map_err(|source| LoadError::Io { path: path.to_path_buf(), source })?
        .with_guessed_format()
        .map_err(|source| LoadError::Io { path: path.to_path_buf(), source })?;
    let img = reader.decode().map_err(|e| LoadError::Decode { s, t, message: e.to_string() })?;
    match img.color() {
        ColorType::Rgb8 => Ok(img.into_rgb8()),
        other => Err(LoadError::UnsupportedFormat { s, t, format: format!("{other:?}") }),
    }
}

/// Loads every view of a light-field directory.
pub fn load_light_field(dir: &Path) -> Result<LightField, LoadError> {
    let manifest_path = dir.join(MANIFEST_NAME);
    let manifest = if manifest_path.is_file() {
        read_manifest(&manifest_path)?
    } else {
        scan_directory(dir)?
    };
    let mut files: Vec<Option<&str>> = vec![None; manifest.grid_s * manifest.grid_t];
    for v in &manifest.views {
        files[v.t * manifest.grid_s + v.s] = Some(&v.file);
    }
    for t in 0..manifest.grid_t {
        for s in 0..manifest.grid_s {
            if files[t * manifest.grid_s + s].is_none() {
                return Err(LoadError::Missing { s, t });
            }
        }
    }
    let images = files
        .par_iter()
        .enumerate()
        .map(|(i, f)| {
            let (s, t) = (i % manifest.grid_s, i / manifest.grid_s);
            let path = dir.join(f.expect("checked above"));
            if !path.is_file() {
                return Err(LoadError::Missing { s, t });
            }
            load_view(&path, s, t)
        })
        .collect::<Result<Vec<_>, _>>()?;

    let expected = images[0].dimensions();
    for (i, img) in images.iter().enumerate() {
        if img.dimensions() != expected {
            return Err(LoadError::DimensionMismatch {
                s: i % manifest.grid_s,
                t: i / manifest.grid_s,
                expected,
                got: img.dimensions(),
            });
        }
    }
    let (w, h) = (expected.0 as usize, expected.1 as usize);
    let views: Vec<Vec<u8>> = images.into_iter().map(RgbImage::into_raw).collect();
    Ok(LightField::from_rgb_views(manifest.grid_s, manifest.grid_t, w, h, &views))
}

/// Output file name of view `(s, t)` under the default layout.
pub fn view_file_name(s: usize, t: usize) -> String {
    format!("out_{t:02}_{s:02}.png")
}

/// Writes every view as `out_<t>_<s>.png`.
pub fn save_light_field(field: &LightField, dir: &Path) -> Result<(), LoadError> {
    std::fs::create_dir_all(dir)
        .map_err(|source| LoadError::Io { path: dir.to_path_buf(), source })?;
    let jobs: Vec<(usize, usize)> = (0..field.grid_t())
        .flat_map(|t| (0..field.grid_s()).map(move |s| (s, t)))
        .collect();
    jobs.par_iter().try_for_each(|&(s, t)| {
        let path = dir.join(view_file_name(s, t));
        let img = RgbImage::from_raw(field.width() as u32, field.height() as u32, field.view_rgb(s, t))
            .expect("buffer sized from the field");
        img.save_with_format(&path, ImageFormat::Png).map_err(|e| LoadError::Io {
            path: path.clone(),
            source: std::io::Error::other(e.to_string()),
        })
    })
}
