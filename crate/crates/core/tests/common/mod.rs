#![allow(dead_code)]

use hmlfc::harness::{generate_synthetic, SceneKind, SyntheticScene};
use hmlfc::LightField;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Uniform random RGB views.
pub fn noise_field(gs: usize, gt: usize, w: usize, h: usize, seed: u64) -> LightField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let views: Vec<Vec<u8>> = (0..gs * gt).map(|_| (0..w * h * 3).map(|_| rng.gen()).collect()).collect();
    LightField::from_rgb_views(gs, gt, w, h, &views)
}

pub fn scene(kind: SceneKind, grid: usize, size: usize, baseline: f64, seed: u64) -> LightField {
    generate_synthetic(&SyntheticScene::new(kind, grid, size, baseline, seed))
}

pub fn quads(grid: usize, size: usize, seed: u64) -> LightField {
    scene(SceneKind::TexturedQuads, grid, size, 2.0, seed)
}
