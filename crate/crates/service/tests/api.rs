use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use hmlfc::harness::{generate_synthetic, SceneKind, SyntheticScene};
use hmlfc::renderer::{sidecar_path, LfGeometry};
use hmlfc::{encode, DecoderState, EncodeParams};
use hmlfc_service::{router, serve, ApiError, Meta, ServiceError, SessionStats, ViewService};
use http_body_util::BodyExt;
use tower::ServiceExt;

fn service() -> Arc<ViewService> {
    let scene = SyntheticScene::new(SceneKind::TexturedQuads, 4, 24, 1.5, 3);
    let field = generate_synthetic(&scene);
    let params = EncodeParams { tree_height: 2, window: 2, ..EncodeParams::default() };
    let state = DecoderState::open(encode(&field, &params).unwrap()).unwrap();
    Arc::new(ViewService::new(state, scene.geometry()).unwrap())
}

struct Reply {
    status: StatusCode,
    headers: axum::http::HeaderMap,
    body: Vec<u8>,
}

async fn get(app: &Router, uri: &str) -> Reply {
    let resp = app.clone().oneshot(Request::get(uri).body(Body::empty()).unwrap()).await.unwrap();
    let (parts, body) = resp.into_parts();
    Reply { status: parts.status, headers: parts.headers, body: body.collect().await.unwrap().to_bytes().to_vec() }
}

fn decode_png(bytes: &[u8]) -> (u32, u32, Vec<u8>) {
    let img = image::load_from_memory_with_format(bytes, image::ImageFormat::Png).unwrap().to_rgb8();
    (img.width(), img.height(), img.into_raw())
}

#[tokio::test]
async fn meta_describes_the_stream() {
    let svc = service();
    let app = router(svc.clone(), None);
    let r = get(&app, "/api/meta").await;
    assert_eq!(r.status, StatusCode::OK);
    let meta: Meta = serde_json::from_slice(&r.body).unwrap();
    assert_eq!((meta.grid.s, meta.grid.t, meta.image.width, meta.image.height), (4, 4, 24, 24));
    assert_eq!(meta.geometry, *svc.geometry());
    assert_eq!(meta.params, *svc.state().params());
    assert_eq!(meta.stream_bytes, svc.state().stream_len());
    assert_eq!(meta.max_resolution, 1024);
    let z = meta.zone;
    assert!(z.x[0] < z.x[1] && z.y[0] < z.y[1] && z.z[0] < 0.0 && z.z[1] > 0.0);
}

/// A pinhole at grid camera `(s, t)` looking down the axis sees the shared
/// image rectangle shifted by the camera offset; with one pixel of spacing
/// that shift is whole pixels, so the render is the decoded view moved by
/// `(s - 2, t - 2)` with background where the ray leaves the image.
#[tokio::test]
async fn grid_viewpoint_reproduces_the_decoded_view() {
    let scene = SyntheticScene::new(SceneKind::TexturedQuads, 5, 24, 1.0, 4);
    let params = EncodeParams { tree_height: 2, window: 2, ..EncodeParams::default() };
    let state = DecoderState::open(encode(&generate_synthetic(&scene), &params).unwrap()).unwrap();
    let svc = Arc::new(ViewService::new(state, scene.geometry()).unwrap());
    let app = router(svc.clone(), None);
    let g = *svc.geometry();
    for (s, t) in [(2, 2), (0, 0), (4, 1), (3, 4)] {
        let [x, y, _] = g.camera_position(s, t);
        let r = get(&app, &format!("/api/view?x={x}&y={y}&fov={}", g.matched_fov_degrees())).await;
        assert_eq!(r.status, StatusCode::OK);
        assert_eq!(r.headers["content-type"], "image/png");
        let ms: f64 = r.headers["x-render-ms"].to_str().unwrap().parse().unwrap();
        assert!(ms >= 0.0);
        let (w, h, rgb) = decode_png(&r.body);
        assert_eq!((w, h), (24, 24));
        let view = svc.state().decode_view(s, t).unwrap();
        let (dx, dy) = (s as i64 - 2, t as i64 - 2);
        for j in 0..24i64 {
            for i in 0..24i64 {
                let (sx, sy) = (i + dx, j + dy);
                let got = &rgb[((j * 24 + i) * 3) as usize..][..3];
                let want = if (0..24).contains(&sx) && (0..24).contains(&sy) {
                    &view[((sy * 24 + sx) * 3) as usize..][..3]
                } else {
                    &[0u8, 0, 0][..]
                };
                assert_eq!(got, want, "camera ({s},{t}) pixel ({i},{j})");
            }
        }
    }
}

#[tokio::test]
async fn bad_parameters_are_rejected_with_the_field_name() {
    let app = router(service(), None);
    for (query, field) in [
        ("fov=0", "fov"),
        ("fov=120", "fov"),
        ("w=1025", "w"),
        ("h=abc", "h"),
        ("x=5", "x"),
        ("yaw=90", "yaw"),
        ("quality=max", "quality"),
        ("bogus=1", "bogus"),
    ] {
        let r = get(&app, &format!("/api/view?{query}")).await;
        assert_eq!(r.status, StatusCode::BAD_REQUEST, "{query}");
        let err: ApiError = serde_json::from_slice(&r.body).unwrap();
        assert_eq!(err.field.as_deref(), Some(field), "{query}");
        assert!(err.error.starts_with(field));
    }
}

#[tokio::test]
async fn identical_requests_give_identical_bytes_and_sizes_follow_the_request() {
    let app = router(service(), None);
    let uri = "/api/view?x=0.01&y=-0.02&z=-0.3&yaw=4&pitch=-2&fov=40&w=33&h=21";
    let a = get(&app, uri).await;
    let b = get(&app, uri).await;
    assert_eq!(a.status, StatusCode::OK);
    assert_eq!(a.body, b.body);
    assert_eq!(decode_png(&a.body).0, 33);
    let p = get(&app, &format!("{uri}&quality=preview")).await;
    let (w, h, rgb) = decode_png(&p.body);
    assert_eq!((w, h), (33, 21));
    // Pixel repetition: each 2x2 cell holds one colour.
    assert_eq!(rgb[..3], rgb[3..6]);
    assert_eq!(rgb[..3], rgb[33 * 3..33 * 3 + 3]);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_requests_match_serial_ones() {
    let app = router(service(), None);
    let uris: Vec<String> = (0..12)
        .map(|i| format!("/api/view?x={}&yaw={}&z={}&fov={}&w=40&h=30", (i as f64 - 6.0) * 0.004, i as f64 - 6.0, -0.05 * i as f64, 20 + 3 * i))
        .collect();
    let mut serial = Vec::new();
    for u in &uris {
        serial.push(get(&app, u).await.body);
    }
    let handles: Vec<_> = uris
        .iter()
        .map(|u| {
            let (app, u) = (app.clone(), u.clone());
            tokio::spawn(async move { get(&app, &u).await })
        })
        .collect();
    for (h, want) in handles.into_iter().zip(&serial) {
        let r = h.await.unwrap();
        assert_eq!(r.status, StatusCode::OK);
        assert_eq!(&r.body, want);
    }
}

#[tokio::test]
async fn stats_count_frames_and_blocks() {
    let app = router(service(), None);
    let s0: SessionStats = serde_json::from_slice(&get(&app, "/api/stats").await.body).unwrap();
    assert_eq!((s0.frames_served, s0.blocks_decoded, s0.mean_render_ms), (0, 0, 0.0));
    let mut prev = s0;
    for i in 0..3 {
        let r = get(&app, &format!("/api/view?w=20&h=20&yaw={i}")).await;
        let blocks: u64 = r.headers["x-blocks-decoded"].to_str().unwrap().parse().unwrap();
        let s: SessionStats = serde_json::from_slice(&get(&app, "/api/stats").await.body).unwrap();
        assert_eq!(s.frames_served, prev.frames_served + 1);
        assert_eq!(s.blocks_decoded, prev.blocks_decoded + blocks);
        assert_eq!(s.last_frame_blocks, blocks);
        assert!(blocks > 0 && s.total_render_ms >= prev.total_render_ms && s.payload_bytes_read >= prev.payload_bytes_read);
        prev = s;
    }
    assert!((prev.blocks_per_frame - prev.blocks_decoded as f64 / 3.0).abs() < 1e-9);
    // A rejected request is not a frame.
    get(&app, "/api/view?fov=0").await;
    let s: SessionStats = serde_json::from_slice(&get(&app, "/api/stats").await.body).unwrap();
    assert_eq!(s.frames_served, 3);
}

#[tokio::test]
async fn static_assets_are_served_at_root() {
    let builtin = get(&router(service(), None), "/").await;
    assert_eq!(builtin.status, StatusCode::OK);
    assert!(String::from_utf8(builtin.body).unwrap().contains("/api/view"));

    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("index.html"), "<p>custom</p>").unwrap();
    std::fs::write(dir.path().join("app.js"), "let a = 1;").unwrap();
    let app = router(service(), Some(dir.path()));
    assert_eq!(get(&app, "/").await.body, b"<p>custom</p>");
    assert_eq!(get(&app, "/app.js").await.body, b"let a = 1;");
    assert_eq!(get(&app, "/missing.css").await.status, StatusCode::NOT_FOUND);
    assert_eq!(get(&app, "/api/meta").await.status, StatusCode::OK);
}

#[test]
fn open_uses_the_sidecar_geometry() {
    let dir = tempfile::tempdir().unwrap();
    let scene = SyntheticScene::new(SceneKind::Checkerboard, 2, 16, 1.0, 1);
    let path = dir.path().join("s.hmlfc");
    std::fs::write(&path, encode(&generate_synthetic(&scene), &EncodeParams { tree_height: 1, ..EncodeParams::default() }).unwrap()).unwrap();
    assert_eq!(*ViewService::open(&path).unwrap().geometry(), LfGeometry::default_for(2, 2, 16, 16));
    scene.geometry().write_json(&sidecar_path(&path)).unwrap();
    assert_eq!(*ViewService::open(&path).unwrap().geometry(), scene.geometry());
    LfGeometry::default_for(2, 2, 16, 8).write_json(&sidecar_path(&path)).unwrap();
    assert!(matches!(ViewService::open(&path), Err(ServiceError::Geometry(_))));
    std::fs::write(&path, b"not a stream").unwrap();
    assert!(matches!(ViewService::open(&path), Err(ServiceError::Decode(_))));
    assert!(matches!(ViewService::open(&dir.path().join("absent")), Err(ServiceError::Read { .. })));
}

#[tokio::test]
async fn serve_reports_bind_failures() {
    let taken = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = taken.local_addr().unwrap();
    assert!(matches!(serve(service(), addr, None).await, Err(ServiceError::Bind { .. })));
}
