//! HTTP service rendering novel views from a compressed light-field stream.
//!
//! Routes: `GET /api/meta`, `GET /api/view`, `GET /api/stats`, and static
//! viewer assets at `/`. See `docs/api.md` for the schemas.

pub mod request;

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering::Relaxed};
use std::sync::Arc;
use std::time::Instant;

use axum::extract::{Query, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{Html, IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use hmlfc::container::EncodeParams;
use hmlfc::renderer::{render, CountingSource, GeometryError, LfGeometry};
use hmlfc::{DecodeError, DecoderState};
use serde::{Deserialize, Serialize};
use tower_http::services::ServeDir;

pub use request::{FieldError, Pose, Quality, RequestDefaults, ViewRequest, ViewZone, MAX_RESOLUTION};

const INDEX_HTML: &str = include_str!("../assets/index.html");

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("reading {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Decode(#[from] DecodeError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("binding {addr}: {source}")]
    Bind { addr: SocketAddr, source: std::io::Error },
    #[error("serving: {0}")]
    Serve(std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridDims {
    pub s: usize,
    pub t: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageDims {
    pub width: usize,
    pub height: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    pub format_version: u16,
    pub grid: GridDims,
    pub image: ImageDims,
    pub geometry: LfGeometry,
    pub params: EncodeParams,
    pub stream_bytes: usize,
    pub bpp: f64,
    pub zone: ViewZone,
    pub default_pose: Pose,
    pub default_fov: f64,
    pub fov_range: [f64; 2],
    pub max_resolution: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SessionStats {
    pub frames_served: u64,
    pub total_render_ms: f64,
    pub mean_render_ms: f64,
    pub last_render_ms: f64,
    /// RGB blocks decoded over all frames; cache hits inside a frame are
    /// not counted.
    pub blocks_decoded: u64,
    pub blocks_per_frame: f64,
    pub last_frame_blocks: u64,
    /// Size of the decoder's resident reference data.
    pub cache_bytes: u64,
    pub payload_bytes_read: u64,
}

#[derive(Default)]
struct Counters {
    frames: AtomicU64,
    render_ns: AtomicU64,
    blocks: AtomicU64,
    last_ns: AtomicU64,
    last_blocks: AtomicU64,
}

/// One rendered frame.
pub struct Frame {
    pub rgb: Vec<u8>,
    pub width: usize,
    pub height: usize,
    pub render_ms: f64,
    pub blocks: u64,
}

pub struct ViewService {
    state: DecoderState,
    geometry: LfGeometry,
    zone: ViewZone,
    counters: Counters,
}

impl ViewService {
    pub fn new(state: DecoderState, geometry: LfGeometry) -> Result<Self, ServiceError> {
        geometry.validate().map_err(GeometryError::Invalid)?;
        let (gs, gt) = state.grid();
        let (w, h) = state.view_dims();
        if (geometry.grid_s, geometry.grid_t, geometry.width, geometry.height) != (gs, gt, w, h) {
            return Err(GeometryError::Invalid(format!("does not match the {gs}x{gt} grid of {w}x{h} views")).into());
        }
        Ok(ViewService { zone: ViewZone::for_geometry(&geometry), state, geometry, counters: Counters::default() })
    }

    /// Opens a stream file with its sidecar geometry, or the default one.
    pub fn open(path: &Path) -> Result<Self, ServiceError> {
        let bytes = std::fs::read(path).map_err(|source| ServiceError::Read { path: path.into(), source })?;
        let state = DecoderState::open(bytes)?;
        let (gs, gt) = state.grid();
        let (w, h) = state.view_dims();
        let geometry = LfGeometry::for_stream(path, (gs, gt, w, h))?;
        Self::new(state, geometry)
    }

    pub fn state(&self) -> &DecoderState {
        &self.state
    }

    pub fn geometry(&self) -> &LfGeometry {
        &self.geometry
    }

    pub fn zone(&self) -> &ViewZone {
        &self.zone
    }

    pub fn defaults(&self) -> RequestDefaults {
        let (w, h) = self.state.view_dims();
        RequestDefaults {
            pose: self.zone.center(),
            fov: self.geometry.matched_fov_degrees(),
            width: w.min(MAX_RESOLUTION),
            height: h.min(MAX_RESOLUTION),
        }
    }

    pub fn meta(&self) -> Meta {
        let (s, t) = self.state.grid();
        let (width, height) = self.state.view_dims();
        let d = self.defaults();
        Meta {
            format_version: self.state.header().version,
            grid: GridDims { s, t },
            image: ImageDims { width, height },
            geometry: self.geometry,
            params: *self.state.params(),
            stream_bytes: self.state.stream_len(),
            bpp: self.state.bpp(),
            zone: self.zone,
            default_pose: d.pose,
            default_fov: d.fov,
            fov_range: [request::FOV_RANGE.0, request::FOV_RANGE.1],
            max_resolution: MAX_RESOLUTION,
        }
    }

    pub fn stats(&self) -> SessionStats {
        let c = &self.counters;
        let frames = c.frames.load(Relaxed);
        let total_ms = c.render_ns.load(Relaxed) as f64 / 1e6;
        let blocks = c.blocks.load(Relaxed);
        let per = |v: f64| if frames == 0 { 0.0 } else { v / frames as f64 };
        let decoder = self.state.stats();
        SessionStats {
            frames_served: frames,
            total_render_ms: total_ms,
            mean_render_ms: per(total_ms),
            last_render_ms: c.last_ns.load(Relaxed) as f64 / 1e6,
            blocks_decoded: blocks,
            blocks_per_frame: per(blocks as f64),
            last_frame_blocks: c.last_blocks.load(Relaxed),
            cache_bytes: decoder.cache_bytes,
            payload_bytes_read: decoder.payload_bytes_read,
        }
    }

    /// Renders a validated request; blocking and CPU bound.
    pub fn render_view(&self, req: &ViewRequest) -> Frame {
        let start = Instant::now();
        let source = CountingSource::new(&self.state);
        let rgb = match req.quality {
            Quality::Full => render(&source, &req.camera(req.width, req.height), &self.geometry),
            Quality::Preview => {
                let (w, h) = (req.width.div_ceil(2), req.height.div_ceil(2));
                upscale2(&render(&source, &req.camera(w, h), &self.geometry), w, req.width, req.height)
            }
        };
        let elapsed = start.elapsed();
        let blocks = source.blocks.into_inner();
        let c = &self.counters;
        let ns = elapsed.as_nanos() as u64;
        c.frames.fetch_add(1, Relaxed);
        c.render_ns.fetch_add(ns, Relaxed);
        c.blocks.fetch_add(blocks, Relaxed);
        c.last_ns.store(ns, Relaxed);
        c.last_blocks.store(blocks, Relaxed);
        Frame { rgb, width: req.width, height: req.height, render_ms: elapsed.as_secs_f64() * 1e3, blocks }
    }
}

/// Pixel-repeats a `src_w`-wide RGB image up to `w × h`.
fn upscale2(src: &[u8], src_w: usize, w: usize, h: usize) -> Vec<u8> {
    let mut out = Vec::with_capacity(w * h * 3);
    for y in 0..h {
        let row = &src[(y / 2) * src_w * 3..];
        for x in 0..w {
            out.extend_from_slice(&row[(x / 2) * 3..(x / 2) * 3 + 3]);
        }
    }
    out
}

pub fn encode_png(rgb: &[u8], width: usize, height: usize) -> Vec<u8> {
    use image::ImageEncoder;
    let mut out = Vec::new();
    image::codecs::png::PngEncoder::new(&mut out)
        .write_image(rgb, width as u32, height as u32, image::ExtendedColorType::Rgb8)
        .expect("in-memory PNG encode of a well-formed buffer");
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiError {
    pub error: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
}

fn bad_request(e: FieldError) -> Response {
    let body = ApiError { error: e.to_string(), field: Some(e.field) };
    (StatusCode::BAD_REQUEST, Json(body)).into_response()
}

async fn meta(State(svc): State<Arc<ViewService>>) -> Json<Meta> {
    Json(svc.meta())
}

async fn stats(State(svc): State<Arc<ViewService>>) -> Json<SessionStats> {
    Json(svc.stats())
}

async fn view(State(svc): State<Arc<ViewService>>, Query(q): Query<HashMap<String, String>>) -> Response {
    let req = match ViewRequest::parse(&q, &svc.defaults(), svc.zone()) {
        Ok(r) => r,
        Err(e) => return bad_request(e),
    };
    let job = tokio::task::spawn_blocking(move || {
        let frame = svc.render_view(&req);
        let png = encode_png(&frame.rgb, frame.width, frame.height);
        (frame, png)
    });
    let (frame, png) = match job.await {
        Ok(v) => v,
        Err(e) => {
            tracing::error!("render task failed: {e}");
            let body = ApiError { error: "render failed".into(), field: None };
            return (StatusCode::INTERNAL_SERVER_ERROR, Json(body)).into_response();
        }
    };
    let mut resp = png.into_response();
    let h = resp.headers_mut();
    h.insert(header::CONTENT_TYPE, HeaderValue::from_static("image/png"));
    h.insert(header::CACHE_CONTROL, HeaderValue::from_static("no-store"));
    h.insert("x-render-ms", HeaderValue::from_str(&format!("{:.3}", frame.render_ms)).expect("ascii"));
    h.insert("x-blocks-decoded", HeaderValue::from(frame.blocks));
    resp
}

async fn index() -> Html<&'static str> {
    Html(INDEX_HTML)
}

/// The service routes. Static files come from `assets` when given,
/// otherwise a built-in page is served at `/`.
pub fn router(service: Arc<ViewService>, assets: Option<&Path>) -> Router {
    let api = Router::new()
        .route("/api/meta", get(meta))
        .route("/api/view", get(view))
        .route("/api/stats", get(stats))
        .with_state(service);
    match assets {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api.route("/", get(index)),
    }
}

/// Binds `addr` and serves until the process ends.
pub async fn serve(service: Arc<ViewService>, addr: SocketAddr, assets: Option<&Path>) -> Result<(), ServiceError> {
    let listener = tokio::net::TcpListener::bind(addr).await.map_err(|source| ServiceError::Bind { addr, source })?;
    let local = listener.local_addr().map_err(ServiceError::Serve)?;
    tracing::info!("serving on http://{local}");
    axum::serve(listener, router(service, assets)).await.map_err(ServiceError::Serve)
}
