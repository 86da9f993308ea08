use serde::{Deserialize, Serialize};

use super::{div_round_half_away, floor_half, LightField, Plane, PlaneGrid, ValueRange};

/// Chroma samples of YCoCg-R span one extra bit.
pub const CHROMA_RANGE: ValueRange = ValueRange { min: -255, max: 255 };

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ColorTransform {
    Identity,
    #[default]
    YcocgR,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ChromaSubsampling {
    #[default]
    None,
    Half,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct ColorConfig {
    pub transform: ColorTransform,
    pub chroma_subsample: ChromaSubsampling,
}

impl ColorConfig {
    pub fn new(transform: ColorTransform, chroma_subsample: ChromaSubsampling) -> Self {
        assert!(
            !(transform == ColorTransform::Identity && chroma_subsample != ChromaSubsampling::None),
            "chroma subsampling requires the YCoCg-R transform"
        );
        ColorConfig { transform, chroma_subsample }
    }

    pub fn is_lossless(&self) -> bool {
        self.chroma_subsample == ChromaSubsampling::None
    }

    /// Declared sample range of channel `c` after the forward transform.
    pub fn channel_range(&self, c: usize) -> ValueRange {
        match (self.transform, c) {
            (ColorTransform::YcocgR, 1 | 2) => CHROMA_RANGE,
            _ => ValueRange::U8,
        }
    }

    pub fn channel_is_subsampled(&self, c: usize) -> bool {
        c > 0 && self.chroma_subsample == ChromaSubsampling::Half
    }
}

/// Forward YCoCg-R lifting.
#[inline]
pub fn rgb_to_ycocg(r: i32, g: i32, b: i32) -> (i32, i32, i32) {
    let co = r - b;
    let t = b + floor_half(co);
    let cg = g - t;
    let y = t + floor_half(cg);
    (y, co, cg)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("({y}, {co}, {cg}) is not a YCoCg-R image of an 8-bit RGB triple")]
pub struct InvalidYcocg {
    pub y: i32,
    pub co: i32,
    pub cg: i32,
}

#[inline]
fn lift_back(y: i32, co: i32, cg: i32) -> (i32, i32, i32) {
    let t = y - floor_half(cg);
    let g = cg + t;
    let b = t - floor_half(co);
    let r = b + co;
    (r, g, b)
}

/// Exact inverse of [`rgb_to_ycocg`]; rejects triples outside its image.
pub fn ycocg_to_rgb(y: i32, co: i32, cg: i32) -> Result<(u8, u8, u8), InvalidYcocg> {
    let bad = InvalidYcocg { y, co, cg };
    if !ValueRange::U8.contains(y) || !CHROMA_RANGE.contains(co) || !CHROMA_RANGE.contains(cg) {
        return Err(bad);
    }
    let (r, g, b) = lift_back(y, co, cg);
    if [r, g, b].iter().all(|v| ValueRange::U8.contains(*v)) {
        Ok((r as u8, g as u8, b as u8))
    } else {
        Err(bad)
    }
}

/// Inverse transform for lossy reconstructions: inputs and outputs are
/// clamped to their nominal ranges.
#[inline]
pub(crate) fn ycocg_to_rgb_saturating(y: i32, co: i32, cg: i32) -> [u8; 3] {
    let (r, g, b) = lift_back(
        y.clamp(0, 255),
        co.clamp(CHROMA_RANGE.min, CHROMA_RANGE.max),
        cg.clamp(CHROMA_RANGE.min, CHROMA_RANGE.max),
    );
    [r.clamp(0, 255) as u8, g.clamp(0, 255) as u8, b.clamp(0, 255) as u8]
}

/// 2×2 box average, rounded half away from zero. Edge cells of odd-sized
/// planes average the samples they cover.
pub fn subsample_chroma(plane: &Plane) -> Plane {
    let (w, h) = (plane.width(), plane.height());
    let (hw, hh) = (w.div_ceil(2), h.div_ceil(2));
    let mut out = Vec::with_capacity(hw * hh);
    for y in 0..hh {
        for x in 0..hw {
            let mut sum = 0i64;
            let mut n = 0i64;
            for yy in 2 * y..(2 * y + 2).min(h) {
                for xx in 2 * x..(2 * x + 2).min(w) {
                    sum += plane.get(xx, yy) as i64;
                    n += 1;
                }
            }
            out.push(div_round_half_away(sum, n) as i32);
        }
    }
    Plane::new(hw, hh, out, plane.range()).expect("box mean stays inside the input range")
}

/// Nearest-neighbour replication back to `width × height`.
pub fn upsample_chroma(plane: &Plane, width: usize, height: usize) -> Plane {
    assert!(plane.width() == width.div_ceil(2) && plane.height() == height.div_ceil(2));
    Plane::from_fn(width, height, plane.range(), |x, y| plane.get(x / 2, y / 2))
        .expect("replication preserves the range")
}

/// Splits a light field into the codec's channel grids.
pub fn forward_color(field: &LightField, cfg: ColorConfig) -> Vec<PlaneGrid> {
    let (gs, gt) = (field.grid_s(), field.grid_t());
    if cfg.transform == ColorTransform::Identity {
        return field.channels().to_vec();
    }
    let mut channels: Vec<Vec<Plane>> = (0..3).map(|_| Vec::with_capacity(field.view_count())).collect();
    for t in 0..gt {
        for s in 0..gs {
            let [r, g, b] = [0, 1, 2].map(|c| field.plane(c, s, t).samples());
            let n = r.len();
            let (mut ys, mut cos, mut cgs) =
                (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
            for i in 0..n {
                let (y, co, cg) = rgb_to_ycocg(r[i], g[i], b[i]);
                ys.push(y);
                cos.push(co);
                cgs.push(cg);
            }
            let (w, h) = (field.width(), field.height());
            let planes = [
                Plane::new(w, h, ys, ValueRange::U8),
                Plane::new(w, h, cos, CHROMA_RANGE),
                Plane::new(w, h, cgs, CHROMA_RANGE),
            ];
            for (c, plane) in planes.into_iter().enumerate() {
                let plane = plane.expect("YCoCg-R of 8-bit input stays in range");
                channels[c].push(if cfg.channel_is_subsampled(c) {
                    subsample_chroma(&plane)
                } else {
                    plane
                });
            }
        }
    }
    channels.into_iter().map(|p| PlaneGrid::new(gs, gt, p)).collect()
}

/// Reassembles 8-bit RGB views from decoded channel grids, upsampling chroma
/// and inverting the transform. Out-of-range reconstructions saturate.
pub fn inverse_color(
    channels: &[PlaneGrid],
    cfg: ColorConfig,
    width: usize,
    height: usize,
) -> LightField {
    assert_eq!(channels.len(), 3);
    let (gs, gt) = (channels[0].grid_s(), channels[0].grid_t());
    let mut views = Vec::with_capacity(gs * gt);
    for t in 0..gt {
        for s in 0..gs {
            let planes: Vec<Plane> = (0..3)
                .map(|c| {
                    let p = channels[c].plane(s, t);
                    if cfg.channel_is_subsampled(c) {
                        upsample_chroma(p, width, height)
                    } else {
                        p.clone()
                    }
                })
                .collect();
            let mut rgb = Vec::with_capacity(width * height * 3);
            for i in 0..width * height {
                let (a, b, c) =
                    (planes[0].samples()[i], planes[1].samples()[i], planes[2].samples()[i]);
                match cfg.transform {
                    ColorTransform::YcocgR => rgb.extend(ycocg_to_rgb_saturating(a, b, c)),
                    ColorTransform::Identity => {
                        rgb.extend([a, b, c].map(|v| v.clamp(0, 255) as u8))
                    }
                }
            }
            views.push(rgb);
        }
    }
    LightField::from_rgb_views(gs, gt, width, height, &views)
}
