//! Rate-distortion measurement: parameter sweeps, matched-quality codec
//! comparisons and the synthetic scenes they run on.

pub mod mc_only;
pub mod synthetic;

pub use synthetic::{generate_synthetic, SceneKind, SyntheticScene};

use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::container::{analyze, bpp, Analysis, EncodeParams};
use crate::decoder::{DecodeStats, DecoderState};
use crate::lfcore::{load_light_field, psnr, LightField};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Hmlfc,
    /// Hierarchy only, motion stage disabled.
    RlfcOnly,
    /// Single-level reference/predictive coding, see [`mc_only`].
    McOnly,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Hmlfc, Variant::RlfcOnly, Variant::McOnly];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Hmlfc => "hmlfc",
            Variant::RlfcOnly => "rlfc_only",
            Variant::McOnly => "mc_only",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dataset {
    Synthetic(SyntheticScene),
    Directory(PathBuf),
}

impl Dataset {
    pub fn load(&self) -> Result<LightField, String> {
        match self {
            Dataset::Synthetic(scene) => Ok(generate_synthetic(scene)),
            Dataset::Directory(dir) => load_light_field(dir).map_err(|e| e.to_string()),
        }
    }

    pub fn id(&self) -> String {
        match self {
            Dataset::Synthetic(s) => format!("synthetic-{:?}-{}x{}x{}x{}-b{}-s{}", s.kind, s.grid_s, s.grid_t, s.width, s.height, s.baseline, s.seed).to_lowercase(),
            Dataset::Directory(d) => d.display().to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub dataset: Dataset,
    pub variants: Vec<Variant>,
    pub heights: Vec<usize>,
    pub block_sizes: Vec<usize>,
    pub taus: Vec<u32>,
    pub windows: Vec<usize>,
    /// Settings not swept (color, policy, codec); axis fields are ignored.
    #[serde(default)]
    pub base: EncodeParams,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<(), String> {
        for (name, empty) in [
            ("variants", self.variants.is_empty()),
            ("heights", self.heights.is_empty()),
            ("block_sizes", self.block_sizes.is_empty()),
            ("taus", self.taus.is_empty()),
            ("windows", self.windows.is_empty()),
        ] {
            if empty {
                return Err(format!("sweep axis `{name}` is empty"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RdPoint {
    pub variant: Variant,
    pub height: usize,
    pub block_size: usize,
    pub window: usize,
    pub tau: u32,
    pub bytes: usize,
    pub bpp: f64,
    /// dB; `None` for a perfect reconstruction (infinite PSNR) or a failure.
    pub psnr: Option<f64>,
    pub encode_seconds: f64,
    pub decode_seconds: f64,
    pub stats: Option<DecodeStats>,
    pub error: Option<String>,
}

impl RdPoint {
    pub fn psnr_db(&self) -> f64 {
        self.psnr.unwrap_or(f64::INFINITY)
    }
}

fn finite(p: f64) -> Option<f64> {
    p.is_finite().then_some(p)
}

/// Structural encoder state of one variant, shared by every threshold.
pub enum Prepared {
    Container(Box<Analysis>),
    McOnly(Box<mc_only::McOnlyAnalysis>),
}

pub fn variant_params(variant: Variant, params: &EncodeParams) -> EncodeParams {
    match variant {
        Variant::RlfcOnly => EncodeParams { motion: false, ..*params },
        _ => *params,
    }
}

pub fn prepare(field: &LightField, variant: Variant, params: &EncodeParams) -> Result<(Prepared, f64), String> {
    let start = Instant::now();
    let p = variant_params(variant, params);
    let prepared = match variant {
        Variant::McOnly => {
            p.validate().map_err(|e| e.to_string())?;
            Prepared::McOnly(Box::new(mc_only::analyze(field, &p)))
        }
        _ => Prepared::Container(Box::new(analyze(field, &p).map_err(|e| e.to_string())?)),
    };
    Ok((prepared, start.elapsed().as_secs_f64()))
}

/// Encodes at `tau` (both thresholds), decodes and measures.
pub fn measure(field: &LightField, prepared: &Prepared, variant: Variant, params: &EncodeParams, tau: u32, analysis_seconds: f64) -> RdPoint {
    let mut point = RdPoint {
        variant,
        height: params.tree_height,
        block_size: params.block_size,
        window: params.window,
        tau,
        bytes: 0,
        bpp: 0.0,
        psnr: None,
        encode_seconds: 0.0,
        decode_seconds: 0.0,
        stats: None,
        error: None,
    };
    let start = Instant::now();
    let result: Result<(), String> = (|| {
        match prepared {
            Prepared::Container(a) => {
                let bytes = a.encode(tau, tau).map_err(|e| e.to_string())?;
                point.encode_seconds = analysis_seconds + start.elapsed().as_secs_f64();
                point.bytes = bytes.len();
                let t = Instant::now();
                let state = DecoderState::open(bytes).map_err(|e| e.to_string())?;
                let decoded = state.decode_full().map_err(|e| e.to_string())?;
                point.decode_seconds = t.elapsed().as_secs_f64();
                point.stats = Some(state.stats());
                point.psnr = finite(psnr(field, &decoded).map_err(|e| e.to_string())?);
            }
            Prepared::McOnly(a) => {
                let (bytes, decoded) = a.encode_decode(tau);
                point.encode_seconds = analysis_seconds + start.elapsed().as_secs_f64();
                point.bytes = bytes;
                point.psnr = finite(psnr(field, &decoded).map_err(|e| e.to_string())?);
            }
        }
        Ok(())
    })();
    point.bpp = bpp(point.bytes, field.pixel_count());
    point.error = result.err();
    point
}

/// Every grid point of `spec`, ordered by `(variant, height, block, window,
/// tau)`. Failures are recorded in the point and the sweep continues.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<RdPoint>, String> {
    spec.validate()?;
    let field = spec.dataset.load()?;
    let mut points = Vec::new();
    for &variant in &spec.variants {
        for &height in &spec.heights {
            for &block_size in &spec.block_sizes {
                for &window in &spec.windows {
                    let params = EncodeParams { tree_height: height, block_size, window, ..spec.base };
                    match prepare(&field, variant, &params) {
                        Ok((prepared, secs)) => {
                            for &tau in &spec.taus {
                                points.push(measure(&field, &prepared, variant, &params, tau, secs));
                            }
                        }
                        Err(e) => {
                            for &tau in &spec.taus {
                                points.push(RdPoint {
                                    variant,
                                    height,
                                    block_size,
                                    window,
                                    tau,
                                    bytes: 0,
                                    bpp: 0.0,
                                    psnr: None,
                                    encode_seconds: 0.0,
                                    decode_seconds: 0.0,
                                    stats: None,
                                    error: Some(e.clone()),
                                });
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(points)
}

pub const CSV_HEADER: &str =
    "variant,height,block_size,window,tau,bytes,bpp,psnr_db,encode_s,decode_s,blocks_decoded,payload_bytes_read,cache_bytes,error";

pub fn write_csv<W: Write>(points: &[RdPoint], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for p in points {
        let s = p.stats.unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{},{},{:.6},{},{:.4},{:.4},{},{},{},{}",
            p.variant.name(),
            p.height,
            p.block_size,
            p.window,
            p.tau,
            p.bytes,
            p.bpp,
            p.psnr.map_or("inf".to_string(), |v| format!("{v:.4}")),
            p.encode_seconds,
            p.decode_seconds,
            s.blocks_decoded,
            s.payload_bytes_read,
            s.cache_bytes,
            p.error.as_deref().unwrap_or("").replace(',', ";"),
        )?;
    }
    Ok(())
}

/// Points grouped into one series per variant, each sorted by bpp.
pub fn plot_json(points: &[RdPoint]) -> serde_json::Value {
    let mut series: BTreeMap<&str, Vec<&RdPoint>> = BTreeMap::new();
    for p in points.iter().filter(|p| p.error.is_none()) {
        series.entry(p.variant.name()).or_default().push(p);
    }
    for v in series.values_mut() {
        v.sort_by(|a, b| a.bpp.total_cmp(&b.bpp));
    }
    serde_json::json!({ "points": points, "series": series })
}

/// Result of tuning one variant onto a PSNR target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchedPoint {
    pub point: RdPoint,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub target_psnr: f64,
    pub band: f64,
    pub results: Vec<MatchedPoint>,
}

impl Comparison {
    pub fn get(&self, v: Variant) -> Option<&MatchedPoint> {
        self.results.iter().find(|m| m.point.variant == v)
    }

    /// `bpp(v) / bpp(hmlfc)`.
    pub fn ratio(&self, v: Variant) -> Option<f64> {
        Some(self.get(v)?.point.bpp / self.get(Variant::Hmlfc)?.point.bpp)
    }
}

pub const DEFAULT_BAND_DB: f64 = 0.75;
pub const TAU_CEILING: u32 = 1 << 16;

/// Bisects the shared threshold of one variant so its PSNR lands as close
/// to `target` as the integer thresholds allow.
pub fn tune_to_psnr(field: &LightField, variant: Variant, params: &EncodeParams, target: f64, band: f64) -> Result<MatchedPoint, String> {
    let (prepared, secs) = prepare(field, variant, params)?;
    let eval = |tau| measure(field, &prepared, variant, params, tau, secs);
    let mut best = eval(0);
    if let Some(e) = &best.error {
        return Err(e.clone());
    }
    let closer = |a: &RdPoint, b: &RdPoint| (a.psnr_db() - target).abs() < (b.psnr_db() - target).abs();
    if best.psnr_db() < target {
        let converged = (best.psnr_db() - target).abs() <= band;
        return Ok(MatchedPoint { point: best, converged });
    }
    let (mut lo, mut hi) = (0u32, TAU_CEILING);
    let top = eval(hi);
    if top.psnr_db() >= target {
        let converged = (top.psnr_db() - target).abs() <= band;
        return Ok(MatchedPoint { point: top, converged });
    }
    if closer(&top, &best) {
        best = top;
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        let p = eval(mid);
        let above = p.psnr_db() >= target;
        if closer(&p, &best) || ((p.psnr_db() - target).abs() == (best.psnr_db() - target).abs() && p.bpp < best.bpp) {
            best = p;
        }
        if above {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let converged = (best.psnr_db() - target).abs() <= band;
    Ok(MatchedPoint { point: best, converged })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Psnr,
    Bpp,
}

/// Operating point where `axis` equals `target`, interpolated linearly
/// between the two adjacent integer thresholds that bracket it. Returns
/// `(bpp, psnr)`.
pub fn interpolate_at(field: &LightField, variant: Variant, params: &EncodeParams, axis: Axis, target: f64) -> Result<(f64, f64), String> {
    let (prepared, secs) = prepare(field, variant, params)?;
    let eval = |tau| {
        let p = measure(field, &prepared, variant, params, tau, secs);
        match p.error {
            Some(e) => Err(e),
            None => Ok(p),
        }
    };
    let key = |p: &RdPoint| match axis {
        Axis::Psnr => p.psnr_db(),
        Axis::Bpp => p.bpp,
    };
    let (mut lo, mut hi) = (0u32, TAU_CEILING);
    let (mut a, mut b) = (eval(lo)?, eval(hi)?);
    if key(&a) < target || key(&b) >= target {
        return Err(format!("target {target} outside [{}, {}]", key(&b), key(&a)));
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        let p = eval(mid)?;
        if key(&p) >= target {
            lo = mid;
            a = p;
        } else {
            hi = mid;
            b = p;
        }
    }
    if !a.psnr_db().is_finite() {
        return Ok((b.bpp, b.psnr_db()));
    }
    let f = (key(&a) - target) / (key(&a) - key(&b));
    Ok((a.bpp + f * (b.bpp - a.bpp), a.psnr_db() + f * (b.psnr_db() - a.psnr_db())))
}

/// Rate at exactly `target` dB.
pub fn rate_at_psnr(field: &LightField, variant: Variant, params: &EncodeParams, target: f64) -> Result<f64, String> {
    interpolate_at(field, variant, params, Axis::Psnr, target).map(|(bpp, _)| bpp)
}

/// Quality at exactly `target` bpp.
pub fn psnr_at_rate(field: &LightField, variant: Variant, params: &EncodeParams, target: f64) -> Result<f64, String> {
    interpolate_at(field, variant, params, Axis::Bpp, target).map(|(_, psnr)| psnr)
}

/// Tunes every variant onto `target` dB and reports their rates.
pub fn compare_codecs(field: &LightField, params: &EncodeParams, variants: &[Variant], target: f64, band: f64) -> Result<Comparison, String> {
    let results = variants
        .iter()
        .map(|&v| tune_to_psnr(field, v, params, target, band))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Comparison { target_psnr: target, band, results })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SyntheticScene {
        SyntheticScene::new(SceneKind::TexturedQuads, 4, 32, 1.5, 11)
    }

    #[test]
    fn single_point_sweep_equals_direct_measurement() {
        let spec = SweepSpec {
            dataset: Dataset::Synthetic(small()),
            variants: vec![Variant::Hmlfc],
            heights: vec![2],
            block_sizes: vec![4],
            taus: vec![40],
            windows: vec![2],
            base: EncodeParams::default(),
        };
        let points = run_sweep(&spec).unwrap();
        assert_eq!(points.len(), 1);
        let field = generate_synthetic(&small());
        let params = EncodeParams { tree_height: 2, window: 2, ..EncodeParams::default() }.with_tau(40);
        let bytes = crate::container::encode(&field, &params).unwrap();
        let decoded = DecoderState::open(bytes.clone()).unwrap().decode_full().unwrap();
        assert_eq!(points[0].bytes, bytes.len());
        assert_eq!(points[0].psnr, finite(psnr(&field, &decoded).unwrap()));
        let mut csv = Vec::new();
        write_csv(&points, &mut csv).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 2);
    }

    #[test]
    fn empty_axis_is_rejected() {
        let spec = SweepSpec {
            dataset: Dataset::Synthetic(small()),
            variants: vec![],
            heights: vec![2],
            block_sizes: vec![4],
            taus: vec![0],
            windows: vec![0],
            base: EncodeParams::default(),
        };
        assert!(run_sweep(&spec).unwrap_err().contains("variants"));
    }

    #[test]
    fn failing_points_are_recorded() {
        let spec = SweepSpec {
            dataset: Dataset::Synthetic(small()),
            variants: vec![Variant::Hmlfc],
            heights: vec![5, 2],
            block_sizes: vec![4],
            taus: vec![10],
            windows: vec![1],
            base: EncodeParams::default(),
        };
        let points = run_sweep(&spec).unwrap();
        assert!(points[0].error.is_some());
        assert!(points[1].error.is_none());
    }

    #[test]
    fn identical_views_compare_near_one() {
        let scene = SyntheticScene { baseline: 0.0, ..small() };
        let field = generate_synthetic(&scene);
        let params = EncodeParams { tree_height: 2, window: 2, ..EncodeParams::default() };
        let cmp = compare_codecs(&field, &params, &[Variant::Hmlfc, Variant::RlfcOnly], 60.0, DEFAULT_BAND_DB).unwrap();
        let r = cmp.ratio(Variant::RlfcOnly).unwrap();
        assert!((0.8..1.25).contains(&r), "ratio {r}");
    }

    #[test]
    fn interpolation_hits_target_between_thresholds() {
        let field = generate_synthetic(&small());
        let params = EncodeParams { tree_height: 2, window: 2, ..EncodeParams::default() };
        let (bpp, psnr) = interpolate_at(&field, Variant::Hmlfc, &params, Axis::Psnr, 38.0).unwrap();
        assert!((psnr - 38.0).abs() < 1e-9);
        let back = psnr_at_rate(&field, Variant::Hmlfc, &params, bpp).unwrap();
        assert!((back - 38.0).abs() < 1.0, "{back}");
        assert!(rate_at_psnr(&field, Variant::Hmlfc, &params, 1.0).is_err());
    }
}
