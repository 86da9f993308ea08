//! Novel-view rendering by two-plane ray lookup.
//!
//! Cameras of the light field sit on the plane `z = 0`, spaced
//! `camera_spacing` apart and centred on the origin; camera `(s, t)` is at
//! `((s - (S-1)/2)·spacing, (t - (T-1)/2)·spacing, 0)`. All views share one
//! image rectangle on the plane `z = focal_distance`, centred on the z axis,
//! with pixel `(x, y)` at `((x + ½ - W/2)·pitch, (y + ½ - H/2)·pitch)`.
//! `+x` is right and `+y` is down in both planes.
//!
//! A rendered pixel casts one ray, intersects both planes and blends the 16
//! nearest samples (2×2 cameras × 2×2 pixels). Rays that leave either
//! rectangle or run parallel to the planes paint [`BACKGROUND`].

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering::Relaxed};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::blocks::BlockGrid;
use crate::decoder::DecoderState;
use crate::lfcore::LightField;

pub const BACKGROUND: [u8; 3] = [0, 0, 0];

#[derive(Debug, thiserror::Error)]
pub enum GeometryError {
    #[error("reading geometry {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("parsing geometry {path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("geometry {0}")]
    Invalid(String),
}

/// Where the geometry of `stream` is looked up: `<stream>.geometry.json`.
pub fn sidecar_path(stream: &Path) -> PathBuf {
    let mut name = stream.as_os_str().to_owned();
    name.push(".geometry.json");
    PathBuf::from(name)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LfGeometry {
    pub grid_s: usize,
    pub grid_t: usize,
    pub width: usize,
    pub height: usize,
    pub camera_spacing: f64,
    pub focal_distance: f64,
    pub pixel_pitch: f64,
}

impl LfGeometry {
    /// Default geometry: focal plane at distance 1, image one unit wide and
    /// one pixel of parallax per camera step for points at infinity.
    pub fn default_for(grid_s: usize, grid_t: usize, width: usize, height: usize) -> Self {
        let pitch = 1.0 / width as f64;
        LfGeometry { grid_s, grid_t, width, height, camera_spacing: pitch, focal_distance: 1.0, pixel_pitch: pitch }
    }

    pub fn read_json(path: &Path) -> Result<Self, GeometryError> {
        let text = std::fs::read_to_string(path).map_err(|source| GeometryError::Io { path: path.into(), source })?;
        let g: LfGeometry =
            serde_json::from_str(&text).map_err(|source| GeometryError::Json { path: path.into(), source })?;
        g.validate().map_err(GeometryError::Invalid)?;
        Ok(g)
    }

    pub fn write_json(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self).expect("plain struct") + "\n")
    }

    /// The sidecar geometry of `stream` if one exists, else the default.
    /// Fails if the sidecar disagrees with the stream's `shape`.
    pub fn for_stream(stream: &Path, shape: (usize, usize, usize, usize)) -> Result<Self, GeometryError> {
        let (gs, gt, w, h) = shape;
        let side = sidecar_path(stream);
        if !side.exists() {
            return Ok(Self::default_for(gs, gt, w, h));
        }
        let g = Self::read_json(&side)?;
        if (g.grid_s, g.grid_t, g.width, g.height) != shape {
            return Err(GeometryError::Invalid(format!(
                "{} is for a {}x{} grid of {}x{} views, stream has {gs}x{gt} of {w}x{h}",
                side.display(),
                g.grid_s,
                g.grid_t,
                g.width,
                g.height
            )));
        }
        Ok(g)
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.camera_spacing > 0.0 && self.focal_distance > 0.0 && self.pixel_pitch > 0.0) {
            return Err("spacing, focal distance and pitch must be positive".into());
        }
        if self.grid_s == 0 || self.grid_t == 0 || self.width == 0 || self.height == 0 {
            return Err("empty light field".into());
        }
        Ok(())
    }

    pub fn camera_position(&self, s: usize, t: usize) -> [f64; 3] {
        [
            (s as f64 - (self.grid_s as f64 - 1.0) / 2.0) * self.camera_spacing,
            (t as f64 - (self.grid_t as f64 - 1.0) / 2.0) * self.camera_spacing,
            0.0,
        ]
    }

    /// Horizontal field of view that maps a `width`-pixel render from a
    /// grid camera onto the image rectangle pixel for pixel.
    pub fn matched_fov_degrees(&self) -> f64 {
        2.0 * (self.width as f64 * self.pixel_pitch / 2.0 / self.focal_distance).atan().to_degrees()
    }

    /// Half extents of the camera rectangle in scene units.
    pub fn camera_extent(&self) -> (f64, f64) {
        (
            (self.grid_s as f64 - 1.0) / 2.0 * self.camera_spacing,
            (self.grid_t as f64 - 1.0) / 2.0 * self.camera_spacing,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ray {
    pub origin: [f64; 3],
    pub dir: [f64; 3],
}

/// Continuous light-field coordinates: camera indices `(s, t)` and pixel
/// coordinates `(x, y)` with pixel centres at integers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LfCoord {
    pub s: f64,
    pub t: f64,
    pub x: f64,
    pub y: f64,
}

pub fn ray_to_lf(ray: &Ray, g: &LfGeometry) -> Option<LfCoord> {
    let dz = ray.dir[2];
    if dz.abs() < 1e-12 {
        return None;
    }
    let at = |z: f64| {
        let l = (z - ray.origin[2]) / dz;
        (ray.origin[0] + l * ray.dir[0], ray.origin[1] + l * ray.dir[1])
    };
    let (u, v) = at(0.0);
    let (sx, sy) = at(g.focal_distance);
    let s = u / g.camera_spacing + (g.grid_s as f64 - 1.0) / 2.0;
    let t = v / g.camera_spacing + (g.grid_t as f64 - 1.0) / 2.0;
    let x = sx / g.pixel_pitch + g.width as f64 / 2.0 - 0.5;
    let y = sy / g.pixel_pitch + g.height as f64 / 2.0 - 0.5;
    let eps = 1e-9;
    let inside = |c: f64, lo: f64, hi: f64| c >= lo - eps && c <= hi + eps;
    (inside(s, 0.0, g.grid_s as f64 - 1.0)
        && inside(t, 0.0, g.grid_t as f64 - 1.0)
        && inside(x, -0.5, g.width as f64 - 0.5)
        && inside(y, -0.5, g.height as f64 - 0.5))
    .then_some(LfCoord { s, t, x, y })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub position: [f64; 3],
    /// Rotation about the vertical axis, radians; positive turns toward `+x`.
    pub yaw: f64,
    /// Rotation about the horizontal axis, radians; positive tilts toward `+y`.
    pub pitch: f64,
    /// Horizontal field of view in degrees.
    pub fov: f64,
    pub width: usize,
    pub height: usize,
}

impl Camera {
    /// Orthonormal `(right, down, forward)` basis.
    pub fn basis(&self) -> [[f64; 3]; 3] {
        let (sy, cy) = self.yaw.sin_cos();
        let (sp, cp) = self.pitch.sin_cos();
        let forward = [sy * cp, sp, cy * cp];
        let right = [cy, 0.0, -sy];
        let down = [
            forward[1] * right[2] - forward[2] * right[1],
            forward[2] * right[0] - forward[0] * right[2],
            forward[0] * right[1] - forward[1] * right[0],
        ];
        [right, down, forward]
    }

    /// Ray through the centre of pixel `(i, j)`.
    pub fn ray(&self, i: usize, j: usize) -> Ray {
        let [r, d, f] = self.basis();
        let half = self.width as f64 / 2.0;
        let k = (self.fov.to_radians() / 2.0).tan() / half;
        let a = (i as f64 + 0.5 - half) * k;
        let b = (j as f64 + 0.5 - self.height as f64 / 2.0) * k;
        Ray { origin: self.position, dir: [0, 1, 2].map(|c| f[c] + a * r[c] + b * d[c]) }
    }
}

/// Per-thread pixel access to a light field.
pub trait PixelFetch {
    fn pixel(&mut self, s: usize, t: usize, x: usize, y: usize) -> [u8; 3];
}

/// Anything that can hand out pixel fetchers to render workers.
pub trait PixelSource: Sync {
    type Fetch<'a>: PixelFetch
    where
        Self: 'a;
    fn fetcher(&self) -> Self::Fetch<'_>;
    /// `(grid_s, grid_t, width, height)`.
    fn shape(&self) -> (usize, usize, usize, usize);
}

pub struct DenseFetch<'a>(&'a LightField);

impl PixelFetch for DenseFetch<'_> {
    #[inline]
    fn pixel(&mut self, s: usize, t: usize, x: usize, y: usize) -> [u8; 3] {
        self.0.pixel(s, t, x, y)
    }
}

impl PixelSource for LightField {
    type Fetch<'a> = DenseFetch<'a>;
    fn fetcher(&self) -> DenseFetch<'_> {
        DenseFetch(self)
    }
    fn shape(&self) -> (usize, usize, usize, usize) {
        (self.grid_s(), self.grid_t(), self.width(), self.height())
    }
}

const CACHE_BITS: u32 = 12;

/// Direct-mapped cache of decoded RGB blocks, one per render worker.
pub struct BlockCacheFetch<'a> {
    state: &'a DecoderState,
    grid: BlockGrid,
    keys: Vec<u64>,
    tiles: Vec<[u8; 3]>,
    tile_len: usize,
    misses: Option<&'a AtomicU64>,
}

impl<'a> BlockCacheFetch<'a> {
    pub fn new(state: &'a DecoderState) -> Self {
        let (w, h) = state.view_dims();
        let bs = state.params().block_size;
        let n = 1usize << CACHE_BITS;
        BlockCacheFetch {
            state,
            grid: BlockGrid::new(w, h, bs),
            keys: vec![u64::MAX; n],
            tiles: vec![[0; 3]; n * bs * bs],
            tile_len: bs * bs,
            misses: None,
        }
    }

    /// Adds every block decode to `misses`.
    pub fn counted(state: &'a DecoderState, misses: &'a AtomicU64) -> Self {
        BlockCacheFetch { misses: Some(misses), ..Self::new(state) }
    }
}

impl PixelFetch for BlockCacheFetch<'_> {
    #[inline]
    fn pixel(&mut self, s: usize, t: usize, x: usize, y: usize) -> [u8; 3] {
        let bs = self.grid.block_size;
        let (bx, by) = (x / bs, y / bs);
        let key = (s as u64) << 48 | (t as u64) << 32 | (bx as u64) << 16 | by as u64;
        let slot = (key.wrapping_mul(0x9E37_79B9_7F4A_7C15) >> (64 - CACHE_BITS)) as usize;
        let tile = &mut self.tiles[slot * self.tile_len..][..self.tile_len];
        if self.keys[slot] != key {
            self.state.decode_rgb_block((s, t), (bx, by), tile);
            self.keys[slot] = key;
            if let Some(m) = self.misses {
                m.fetch_add(1, Relaxed);
            }
        }
        tile[(y - by * bs) * bs + (x - bx * bs)]
    }
}

impl PixelSource for DecoderState {
    type Fetch<'a> = BlockCacheFetch<'a>;
    fn fetcher(&self) -> BlockCacheFetch<'_> {
        BlockCacheFetch::new(self)
    }
    fn shape(&self) -> (usize, usize, usize, usize) {
        let (gs, gt) = self.grid();
        let (w, h) = self.view_dims();
        (gs, gt, w, h)
    }
}

/// A stream source that counts the block decodes of the renders it feeds.
pub struct CountingSource<'a> {
    pub state: &'a DecoderState,
    pub blocks: AtomicU64,
}

impl<'a> CountingSource<'a> {
    pub fn new(state: &'a DecoderState) -> Self {
        CountingSource { state, blocks: AtomicU64::new(0) }
    }
}

impl PixelSource for CountingSource<'_> {
    type Fetch<'b> = BlockCacheFetch<'b> where Self: 'b;
    fn fetcher(&self) -> BlockCacheFetch<'_> {
        BlockCacheFetch::counted(self.state, &self.blocks)
    }
    fn shape(&self) -> (usize, usize, usize, usize) {
        self.state.shape()
    }
}

/// Quadrilinear blend of the 16 samples around `c`, with edge clamping.
pub fn sample_lf<F: PixelFetch>(fetch: &mut F, shape: (usize, usize, usize, usize), c: LfCoord) -> [u8; 3] {
    let (gs, gt, w, h) = shape;
    let split = |v: f64, n: usize| {
        let v = v.clamp(0.0, (n - 1) as f64);
        let i0 = (v.floor() as usize).min(n - 1);
        let i1 = (i0 + 1).min(n - 1);
        (i0, i1, v - i0 as f64)
    };
    let (s0, s1, fs) = split(c.s, gs);
    let (t0, t1, ft) = split(c.t, gt);
    let (x0, x1, fx) = split(c.x, w);
    let (y0, y1, fy) = split(c.y, h);
    let mut acc = [0f64; 3];
    for (t, wt) in [(t0, 1.0 - ft), (t1, ft)] {
        for (s, ws) in [(s0, 1.0 - fs), (s1, fs)] {
            for (y, wy) in [(y0, 1.0 - fy), (y1, fy)] {
                for (x, wx) in [(x0, 1.0 - fx), (x1, fx)] {
                    let wgt = wt * ws * wy * wx;
                    if wgt == 0.0 {
                        continue;
                    }
                    let p = fetch.pixel(s, t, x, y);
                    for k in 0..3 {
                        acc[k] += wgt * p[k] as f64;
                    }
                }
            }
        }
    }
    acc.map(|v| (v + 0.5).floor().clamp(0.0, 255.0) as u8)
}

/// Renders `camera` into interleaved RGB8 rows using the current rayon pool.
pub fn render<P: PixelSource>(source: &P, camera: &Camera, geometry: &LfGeometry) -> Vec<u8> {
    let shape = source.shape();
    let mut out = vec![0u8; camera.width * camera.height * 3];
    out.par_chunks_mut(camera.width * 3).enumerate().for_each_init(
        || source.fetcher(),
        |fetch, (j, row)| {
            for i in 0..camera.width {
                let px = match ray_to_lf(&camera.ray(i, j), geometry) {
                    Some(c) => sample_lf(fetch, shape, c),
                    None => BACKGROUND,
                };
                row[3 * i..3 * i + 3].copy_from_slice(&px);
            }
        },
    );
    out
}

/// [`render`] on a dedicated pool of `threads` workers.
pub fn render_with_threads<P: PixelSource>(source: &P, camera: &Camera, geometry: &LfGeometry, threads: usize) -> Vec<u8> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .expect("thread pool")
        .install(|| render(source, camera, geometry))
}
