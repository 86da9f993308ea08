//! Light-field data model and the pixel-plane utilities shared by the codec.
//!
//! A [`LightField`] is an `grid_s × grid_t` array of camera views, each
//! `width × height` pixels with three 8-bit channels. Internally every
//! channel is held as a [`PlaneGrid`]: one signed-integer [`Plane`] per
//! camera, indexed row-major with `t` outer and `s` inner
//! (`index = t * grid_s + s`).
//!
//! All integer division in the codec that can see negative values floors
//! toward negative infinity (see [`floor_half`]).

mod color;
mod io;
mod metrics;

pub use color::{
    forward_color, inverse_color, rgb_to_ycocg, subsample_chroma, upsample_chroma,
    ycocg_to_rgb, ChromaSubsampling, ColorConfig, ColorTransform, CHROMA_RANGE,
};
pub(crate) use color::ycocg_to_rgb_saturating;
pub use io::{load_light_field, save_light_field, view_file_name, LoadError, Manifest, ManifestView};
pub use metrics::{mse_to_psnr, psnr, psnr_planes, ShapeMismatch};

use serde::{Deserialize, Serialize};

/// Inclusive bounds declared for the samples of a plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ValueRange {
    pub min: i32,
    pub max: i32,
}

impl ValueRange {
    pub const U8: ValueRange = ValueRange { min: 0, max: 255 };

    pub fn new(min: i32, max: i32) -> Self {
        assert!(min <= max, "empty value range [{min}, {max}]");
        ValueRange { min, max }
    }

    /// Symmetric range `[-r, r]`.
    pub fn symmetric(r: i32) -> Self {
        ValueRange::new(-r, r)
    }

    /// `max - min`, the quantity residual ranges are derived from.
    pub fn width(&self) -> i32 {
        self.max - self.min
    }

    pub fn contains(&self, v: i32) -> bool {
        v >= self.min && v <= self.max
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PlaneError {
    #[error("sample count {got} does not match {width}x{height}")]
    Length { width: usize, height: usize, got: usize },
    #[error("sample {value} at index {index} outside declared range [{min}, {max}]")]
    OutOfRange { index: usize, value: i32, min: i32, max: i32 },
}

/// A single-channel image of signed integer samples, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Plane {
    width: usize,
    height: usize,
    samples: Vec<i32>,
    range: ValueRange,
}

impl Plane {
    pub fn new(
        width: usize,
        height: usize,
        samples: Vec<i32>,
        range: ValueRange,
    ) -> Result<Self, PlaneError> {
        if samples.len() != width * height {
            return Err(PlaneError::Length { width, height, got: samples.len() });
        }
        if let Some((index, &value)) =
            samples.iter().enumerate().find(|(_, v)| !range.contains(**v))
        {
            return Err(PlaneError::OutOfRange { index, value, min: range.min, max: range.max });
        }
        Ok(Plane { width, height, samples, range })
    }

    pub fn filled(width: usize, height: usize, value: i32, range: ValueRange) -> Self {
        assert!(range.contains(value));
        Plane { width, height, samples: vec![value; width * height], range }
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        range: ValueRange,
        mut f: impl FnMut(usize, usize) -> i32,
    ) -> Result<Self, PlaneError> {
        let mut samples = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                samples.push(f(x, y));
            }
        }
        Plane::new(width, height, samples, range)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn range(&self) -> ValueRange {
        self.range
    }

    pub fn samples(&self) -> &[i32] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<i32> {
        self.samples
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> i32 {
        self.samples[y * self.width + x]
    }

    /// Reads with zero extension outside the plane.
    #[inline]
    pub fn get_or_zero(&self, x: isize, y: isize) -> i32 {
        if x < 0 || y < 0 || x >= self.width as isize || y >= self.height as isize {
            0
        } else {
            self.samples[y as usize * self.width + x as usize]
        }
    }

    pub fn same_shape(&self, other: &Plane) -> bool {
        self.width == other.width && self.height == other.height
    }

    /// Observed `(min, max)` of the samples, `None` for an empty plane.
    pub fn observed_range(&self) -> Option<(i32, i32)> {
        let min = *self.samples.iter().min()?;
        let max = *self.samples.iter().max()?;
        Some((min, max))
    }
}

/// One channel of a light field: a `grid_s × grid_t` array of planes with a
/// common shape.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlaneGrid {
    grid_s: usize,
    grid_t: usize,
    planes: Vec<Plane>,
}

impl PlaneGrid {
    /// `planes` are ordered `t` outer, `s` inner.
    pub fn new(grid_s: usize, grid_t: usize, planes: Vec<Plane>) -> Self {
        assert!(grid_s >= 1 && grid_t >= 1, "empty camera grid");
        assert_eq!(planes.len(), grid_s * grid_t, "plane count does not match grid");
        assert!(
            planes.windows(2).all(|w| w[0].same_shape(&w[1])),
            "planes of a grid must share one shape"
        );
        PlaneGrid { grid_s, grid_t, planes }
    }

    pub fn grid_s(&self) -> usize {
        self.grid_s
    }

    pub fn grid_t(&self) -> usize {
        self.grid_t
    }

    pub fn plane_width(&self) -> usize {
        self.planes[0].width()
    }

    pub fn plane_height(&self) -> usize {
        self.planes[0].height()
    }

    pub fn plane(&self, s: usize, t: usize) -> &Plane {
        assert!(s < self.grid_s && t < self.grid_t, "view ({s},{t}) out of grid");
        &self.planes[t * self.grid_s + s]
    }

    pub fn planes(&self) -> &[Plane] {
        &self.planes
    }

    pub fn into_planes(self) -> Vec<Plane> {
        self.planes
    }
}

/// A two-plane parameterized light field of 8-bit RGB views.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LightField {
    grid_s: usize,
    grid_t: usize,
    width: usize,
    height: usize,
    bit_depth: u8,
    channels: Vec<PlaneGrid>,
}

impl LightField {
    pub const CHANNELS: usize = 3;

    /// Builds a field from three channel grids of `[0,255]` samples.
    pub fn from_channels(channels: Vec<PlaneGrid>) -> Self {
        assert_eq!(channels.len(), Self::CHANNELS);
        let (gs, gt) = (channels[0].grid_s(), channels[0].grid_t());
        let (w, h) = (channels[0].plane_width(), channels[0].plane_height());
        for c in &channels {
            assert!(c.grid_s() == gs && c.grid_t() == gt, "channel grids differ");
            assert!(c.plane_width() == w && c.plane_height() == h, "channel planes differ");
        }
        LightField { grid_s: gs, grid_t: gt, width: w, height: h, bit_depth: 8, channels }
    }

    /// Builds a field from interleaved RGB8 views ordered `t` outer, `s` inner.
    pub fn from_rgb_views(
        grid_s: usize,
        grid_t: usize,
        width: usize,
        height: usize,
        views: &[Vec<u8>],
    ) -> Self {
        assert_eq!(views.len(), grid_s * grid_t);
        let mut channels: Vec<Vec<Plane>> = (0..3).map(|_| Vec::with_capacity(views.len())).collect();
        for view in views {
            assert_eq!(view.len(), width * height * 3, "view buffer has the wrong size");
            for (c, planes) in channels.iter_mut().enumerate() {
                let samples = view.iter().skip(c).step_by(3).map(|&v| v as i32).collect();
                planes.push(Plane { width, height, samples, range: ValueRange::U8 });
            }
        }
        LightField::from_channels(
            channels.into_iter().map(|p| PlaneGrid::new(grid_s, grid_t, p)).collect(),
        )
    }

    pub fn grid_s(&self) -> usize {
        self.grid_s
    }

    pub fn grid_t(&self) -> usize {
        self.grid_t
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bit_depth(&self) -> u8 {
        self.bit_depth
    }

    pub fn channels(&self) -> &[PlaneGrid] {
        &self.channels
    }

    pub fn channel(&self, c: usize) -> &PlaneGrid {
        &self.channels[c]
    }

    pub fn into_channels(self) -> Vec<PlaneGrid> {
        self.channels
    }

    pub fn plane(&self, c: usize, s: usize, t: usize) -> &Plane {
        self.channels[c].plane(s, t)
    }

    pub fn view_count(&self) -> usize {
        self.grid_s * self.grid_t
    }

    /// Total pixels over all views, the denominator of bits-per-pixel.
    pub fn pixel_count(&self) -> u64 {
        (self.grid_s * self.grid_t * self.width * self.height) as u64
    }

    #[inline]
    pub fn pixel(&self, s: usize, t: usize, x: usize, y: usize) -> [u8; 3] {
        let idx = t * self.grid_s + s;
        let off = y * self.width + x;
        [0, 1, 2].map(|c| self.channels[c].planes[idx].samples[off] as u8)
    }

    /// Interleaved RGB8 buffer of one view.
    pub fn view_rgb(&self, s: usize, t: usize) -> Vec<u8> {
        let planes = [0, 1, 2].map(|c| self.plane(c, s, t).samples());
        let mut out = Vec::with_capacity(self.width * self.height * 3);
        for i in 0..self.width * self.height {
            for p in &planes {
                out.push(p[i] as u8);
            }
        }
        out
    }
}

/// `floor(v / 2)` for any sign.
#[inline]
pub fn floor_half(v: i32) -> i32 {
    v >> 1
}

/// `num / den` rounded half away from zero; `den` must be positive.
#[inline]
pub fn div_round_half_away(num: i64, den: i64) -> i64 {
    debug_assert!(den > 0);
    let q = (num.abs() * 2 + den) / (2 * den);
    if num < 0 {
        -q
    } else {
        q
    }
}
