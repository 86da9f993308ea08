//! Procedural light fields: textured planes at fixed depths seen from a
//! regular camera grid, using the geometry conventions of the renderer.
//!
//! With the image plane at distance 1 and pitch `1/width`, a point at depth
//! `d` moves by `baseline · (1 - 1/d)` pixels per camera step.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::lfcore::LightField;
use crate::renderer::LfGeometry;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SceneKind {
    /// Smooth value-noise background with several textured quads in front.
    TexturedQuads,
    /// One checkerboard plane in front of a plain background.
    Checkerboard,
    /// Pixel-scale random texture over the whole background.
    NoiseDetail,
    /// Textured background on the zero-parallax plane, identical in every
    /// view, with textured quads in front that shift between views.
    SharedBackground,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticScene {
    pub kind: SceneKind,
    pub grid_s: usize,
    pub grid_t: usize,
    pub width: usize,
    pub height: usize,
    /// Parallax in pixels per camera step of a point at infinite depth.
    pub baseline: f64,
    pub seed: u64,
}

impl SyntheticScene {
    pub fn new(kind: SceneKind, grid: usize, size: usize, baseline: f64, seed: u64) -> Self {
        SyntheticScene { kind, grid_s: grid, grid_t: grid, width: size, height: size, baseline, seed }
    }

    pub fn geometry(&self) -> LfGeometry {
        let pitch = 1.0 / self.width as f64;
        LfGeometry {
            grid_s: self.grid_s,
            grid_t: self.grid_t,
            width: self.width,
            height: self.height,
            camera_spacing: self.baseline * pitch,
            focal_distance: 1.0,
            pixel_pitch: pitch,
        }
    }

    /// Pixel shift between neighbouring views of a point at `depth`.
    pub fn disparity(&self, depth: f64) -> f64 {
        self.baseline * (1.0 - 1.0 / depth)
    }
}

#[derive(Debug, Clone, Copy)]
enum Pattern {
    Noise { cell: f64, detail: f64 },
    Checker { cell: f64 },
    Flat,
}

#[derive(Debug, Clone, Copy)]
struct Texture {
    pattern: Pattern,
    seed: u64,
    a: [f64; 3],
    b: [f64; 3],
}

/// Axis-aligned rectangle parallel to the image plane, nearest wins.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Quad {
    depth: f64,
    /// World-space extent at its depth.
    x0: f64,
    y0: f64,
    x1: f64,
    y1: f64,
    texture: Texture,
}

fn lattice(seed: u64, i: i64, j: i64) -> f64 {
    let mut h = seed ^ (i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (j as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    h ^= h >> 33;
    h = h.wrapping_mul(0xFF51_AFD7_ED55_8CCD);
    h ^= h >> 33;
    (h >> 11) as f64 / (1u64 << 53) as f64
}

fn value_noise(seed: u64, x: f64, y: f64) -> f64 {
    let (fx, fy) = (x.floor(), y.floor());
    let (i, j) = (fx as i64, fy as i64);
    let smooth = |t: f64| t * t * (3.0 - 2.0 * t);
    let (u, v) = (smooth(x - fx), smooth(y - fy));
    let a = lattice(seed, i, j) * (1.0 - u) + lattice(seed, i + 1, j) * u;
    let b = lattice(seed, i, j + 1) * (1.0 - u) + lattice(seed, i + 1, j + 1) * u;
    a * (1.0 - v) + b * v
}

impl Texture {
    fn eval(&self, x: f64, y: f64) -> [u8; 3] {
        let k = match self.pattern {
            Pattern::Flat => 0.5,
            Pattern::Checker { cell } => (((x / cell).floor() + (y / cell).floor()) as i64).rem_euclid(2) as f64,
            Pattern::Noise { cell, detail } => {
                let base = value_noise(self.seed, x / cell, y / cell);
                let fine = value_noise(self.seed ^ 0x5555, x / cell * 4.0, y / cell * 4.0);
                ((1.0 - detail) * base + detail * fine).clamp(0.0, 1.0)
            }
        };
        [0, 1, 2].map(|c| (self.a[c] * (1.0 - k) + self.b[c] * k).round().clamp(0.0, 255.0) as u8)
    }
}

fn random_color(rng: &mut ChaCha8Rng) -> [f64; 3] {
    [rng.gen_range(20.0..235.0), rng.gen_range(20.0..235.0), rng.gen_range(20.0..235.0)]
}

pub(crate) fn scene_quads(scene: &SyntheticScene) -> Vec<Quad> {
    let mut rng = ChaCha8Rng::seed_from_u64(scene.seed);
    let px = 1.0 / scene.width as f64;
    let bg_depth = 8.0;
    let far = 1e3;
    let mut quads = Vec::new();
    let tex = |rng: &mut ChaCha8Rng, pattern| Texture { pattern, seed: rng.gen(), a: random_color(rng), b: random_color(rng) };
    match scene.kind {
        SceneKind::TexturedQuads => {
            let n = 4;
            for _ in 0..n {
                let depth = rng.gen_range(1.5..4.0);
                let (w, h) = (rng.gen_range(0.2..0.45), rng.gen_range(0.2..0.45));
                let (cx, cy) = (rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3));
                let cell = rng.gen_range(5.0..10.0) * px * depth;
                let texture = tex(&mut rng, Pattern::Noise { cell, detail: 0.25 });
                quads.push(Quad {
                    depth,
                    x0: (cx - w / 2.0) * depth,
                    y0: (cy - h / 2.0) * depth,
                    x1: (cx + w / 2.0) * depth,
                    y1: (cy + h / 2.0) * depth,
                    texture,
                });
            }
            let texture = tex(&mut rng, Pattern::Noise { cell: 12.0 * px * bg_depth, detail: 0.2 });
            quads.push(Quad { depth: bg_depth, x0: -far, y0: -far, x1: far, y1: far, texture });
        }
        SceneKind::Checkerboard => {
            let depth = 2.0;
            let texture = tex(&mut rng, Pattern::Checker { cell: 6.0 * px * depth });
            quads.push(Quad { depth, x0: -0.3 * depth, y0: -0.3 * depth, x1: 0.3 * depth, y1: 0.3 * depth, texture });
            let texture = tex(&mut rng, Pattern::Flat);
            quads.push(Quad { depth: bg_depth, x0: -far, y0: -far, x1: far, y1: far, texture });
        }
        SceneKind::SharedBackground => {
            for _ in 0..4 {
                let depth = rng.gen_range(0.6..0.9);
                let (w, h) = (rng.gen_range(0.15..0.35), rng.gen_range(0.15..0.35));
                let (cx, cy) = (rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3));
                let cell = rng.gen_range(5.0..10.0) * px * depth;
                let texture = tex(&mut rng, Pattern::Noise { cell, detail: 0.25 });
                quads.push(Quad {
                    depth,
                    x0: (cx - w / 2.0) * depth,
                    y0: (cy - h / 2.0) * depth,
                    x1: (cx + w / 2.0) * depth,
                    y1: (cy + h / 2.0) * depth,
                    texture,
                });
            }
            let texture = tex(&mut rng, Pattern::Noise { cell: 8.0 * px, detail: 0.25 });
            quads.push(Quad { depth: 1.0, x0: -far, y0: -far, x1: far, y1: far, texture });
        }
        SceneKind::NoiseDetail => {
            let texture = tex(&mut rng, Pattern::Noise { cell: 1.5 * px * bg_depth, detail: 0.6 });
            quads.push(Quad { depth: bg_depth, x0: -far, y0: -far, x1: far, y1: far, texture });
        }
    }
    quads.sort_by(|a, b| a.depth.total_cmp(&b.depth));
    quads
}

pub fn generate_synthetic(scene: &SyntheticScene) -> LightField {
    let g = scene.geometry();
    let quads = scene_quads(scene);
    let (w, h) = (scene.width, scene.height);
    let views: Vec<Vec<u8>> = (0..scene.grid_s * scene.grid_t)
        .into_par_iter()
        .map(|i| {
            let [u, v, _] = g.camera_position(i % scene.grid_s, i / scene.grid_s);
            let mut rgb = Vec::with_capacity(w * h * 3);
            for y in 0..h {
                let sy = (y as f64 + 0.5 - h as f64 / 2.0) * g.pixel_pitch;
                for x in 0..w {
                    let sx = (x as f64 + 0.5 - w as f64 / 2.0) * g.pixel_pitch;
                    let px = quads
                        .iter()
                        .find_map(|q| {
                            let (wx, wy) = (u + (sx - u) * q.depth, v + (sy - v) * q.depth);
                            (wx >= q.x0 && wx < q.x1 && wy >= q.y0 && wy < q.y1).then(|| q.texture.eval(wx, wy))
                        })
                        .unwrap_or([0, 0, 0]);
                    rgb.extend(px);
                }
            }
            rgb
        })
        .collect();
    LightField::from_rgb_views(scene.grid_s, scene.grid_t, w, h, &views)
}
