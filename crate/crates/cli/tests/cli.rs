use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream};
use std::path::Path;
use std::process::{Command, Output, Stdio};
use std::time::{Duration, Instant};

fn hmlfc(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hmlfc")).args(args).current_dir(cwd).env("RUST_BACKTRACE", "0").output().unwrap()
}

fn ok(args: &[&str], cwd: &Path) -> String {
    let out = hmlfc(args, cwd);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn rgb(path: &Path) -> (u32, u32, Vec<u8>) {
    let img = image::open(path).unwrap().to_rgb8();
    (img.width(), img.height(), img.into_raw())
}

/// Synthesises a 4x4 field of 16x16 views and encodes it with `extra` flags.
fn setup(dir: &Path, extra: &[&str]) {
    ok(&["synth", "-o", "lf", "--grid", "4", "--size", "16", "--baseline", "1", "--seed", "5"], dir);
    let mut args = vec!["encode", "lf", "-o", "s.hmlfc", "--height", "2", "--window", "2"];
    args.extend_from_slice(extra);
    ok(&args, dir);
}

#[test]
fn lossless_encode_decodes_to_the_input_views() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    setup(d, &["--tau-ref", "0", "--tau-res", "0"]);
    assert_eq!(std::fs::read(d.join("lf/geometry.json")).unwrap(), std::fs::read(d.join("s.hmlfc.geometry.json")).unwrap());
    ok(&["decode", "s.hmlfc", "-o", "out"], d);
    for t in 0..4 {
        for s in 0..4 {
            let name = format!("out_{t:02}_{s:02}.png");
            assert_eq!(rgb(&d.join("lf").join(&name)), rgb(&d.join("out").join(&name)), "{name}");
        }
    }
    ok(&["decode", "s.hmlfc", "-o", "one", "--view", "3,1"], d);
    let files: Vec<_> = std::fs::read_dir(d.join("one")).unwrap().collect();
    assert_eq!(files.len(), 1);
    assert_eq!(rgb(&d.join("one/out_01_03.png")), rgb(&d.join("lf/out_01_03.png")));
    assert!(!hmlfc(&["decode", "s.hmlfc", "-o", "bad", "--view", "4,0"], d).status.success());
}

#[test]
fn info_and_stats_describe_the_stream() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    setup(d, &["--tau-ref", "20", "--tau-res", "20"]);
    let len = std::fs::metadata(d.join("s.hmlfc")).unwrap().len();
    let info: serde_json::Value = serde_json::from_str(&ok(&["info", "s.hmlfc", "--json"], d)).unwrap();
    assert_eq!(info["stream_bytes"], len);
    assert_eq!(info["grid"], serde_json::json!([4, 4]));
    assert_eq!(info["params"]["tree_height"], 2);
    let channels = info["channels"].as_array().unwrap();
    assert_eq!(channels.len(), 3);
    let mut end = info["header_bytes"].as_u64().unwrap();
    for ch in channels {
        assert_eq!(ch["offset"].as_u64().unwrap(), end);
        let areas: u64 = ch["areas"].as_object().unwrap().values().map(|v| v.as_u64().unwrap()).sum();
        assert!(areas <= ch["bytes"].as_u64().unwrap());
        end += ch["bytes"].as_u64().unwrap();
    }
    assert_eq!(end, len);
    assert!(ok(&["info", "s.hmlfc"], d).contains("format version 1"));

    let stats: serde_json::Value = serde_json::from_str(&ok(&["stats", "s.hmlfc", "--json"], d)).unwrap();
    // 3 channels x 16 views x 4x4 blocks of 4 pixels.
    assert_eq!(stats["access"]["blocks"], 768);
    let levels = stats["levels"].as_array().unwrap();
    assert_eq!(levels.len(), 6);
    for l in levels {
        let slots = if l["level"] == 0 { 16 } else { 4 };
        assert_eq!(l["slots"], slots);
        assert_eq!(l["blocks"], slots * 16);
        assert!(l["significant_blocks"].as_u64().unwrap() <= l["blocks"].as_u64().unwrap());
    }
}

#[test]
fn render_follows_the_request_and_names_bad_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    setup(d, &[]);
    ok(&["render", "s.hmlfc", "--pose", "0.01,-0.01,-0.2,5,-3", "--fov", "40", "--res", "48x32", "-o", "a.png"], d);
    ok(&["render", "s.hmlfc", "--pose", "0.01,-0.01,-0.2,5,-3", "--fov", "40", "--res", "48x32", "-o", "b.png", "--threads", "3"], d);
    let a = rgb(&d.join("a.png"));
    assert_eq!((a.0, a.1), (48, 32));
    assert_eq!(a, rgb(&d.join("b.png")));
    ok(&["render", "s.hmlfc", "-o", "c.png"], d);
    assert_eq!(rgb(&d.join("c.png")).0, 16);
    for (args, flag) in [
        (vec!["--pose", "5,0,0,0,0"], "--pose"),
        (vec!["--pose", "0,0,0"], "--pose"),
        (vec!["--fov", "170"], "--fov"),
        (vec!["--res", "2000x10"], "--res"),
    ] {
        let mut full = vec!["render", "s.hmlfc", "-o", "x.png"];
        full.extend(args);
        let out = hmlfc(&full, d);
        assert!(!out.status.success());
        assert!(String::from_utf8_lossy(&out.stderr).contains(flag), "{full:?}");
    }
}

#[test]
fn encode_rejects_bad_settings() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(&["synth", "-o", "lf", "--grid", "2", "--size", "8"], d);
    for extra in [&["--chroma-subsample", "--color", "identity"][..], &["--block", "0"], &["--height", "3"]] {
        let mut args = vec!["encode", "lf", "-o", "s.hmlfc"];
        args.extend_from_slice(extra);
        assert!(!hmlfc(&args, d).status.success(), "{extra:?}");
    }
    assert!(!hmlfc(&["encode", "missing", "-o", "s.hmlfc"], d).status.success());
    assert!(!hmlfc(&["info", "lf/geometry.json"], d).status.success());
}

#[test]
fn bench_writes_csv_plot_and_gnuplot_data() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let spec = serde_json::json!({
        "dataset": {"synthetic": {"kind": "textured_quads", "grid_s": 2, "grid_t": 2, "width": 16, "height": 16, "baseline": 1.0, "seed": 1}},
        "variants": ["hmlfc", "rlfc_only"],
        "heights": [1],
        "block_sizes": [4],
        "taus": [0, 40],
        "windows": [2],
    });
    std::fs::write(d.join("spec.json"), spec.to_string()).unwrap();
    ok(&["bench", "--spec", "spec.json", "-o", "res", "--gnuplot"], d);
    let csv = std::fs::read_to_string(d.join("res/sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 4);
    assert!(csv.starts_with(hmlfc::harness::CSV_HEADER));
    let plot: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("res/plot.json")).unwrap()).unwrap();
    assert!(plot.is_object() || plot.is_array());
    let dat = std::fs::read_to_string(d.join("res/sweep.dat")).unwrap();
    assert_eq!(dat.split("\n\n\n").count(), 2);
    assert_eq!(dat.lines().filter(|l| !l.is_empty() && !l.starts_with('#')).count(), 4);
    std::fs::write(d.join("bad.json"), "{}").unwrap();
    assert!(!hmlfc(&["bench", "--spec", "bad.json", "-o", "res2"], d).status.success());
}

fn http_get(addr: &str, path: &str) -> Option<String> {
    let mut s = TcpStream::connect(addr).ok()?;
    s.set_read_timeout(Some(Duration::from_secs(10))).ok()?;
    write!(s, "GET {path} HTTP/1.1\r\nHost: {addr}\r\nConnection: close\r\n\r\n").ok()?;
    let mut buf = Vec::new();
    s.read_to_end(&mut buf).ok()?;
    Some(String::from_utf8_lossy(&buf).into_owned())
}

#[test]
fn serve_answers_meta_requests() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    setup(d, &[]);
    let addr = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().to_string();
    let mut child = Command::new(env!("CARGO_BIN_EXE_hmlfc"))
        .args(["serve", "s.hmlfc", "--addr", &addr])
        .current_dir(d)
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let start = Instant::now();
    let reply = loop {
        if let Some(r) = http_get(&addr, "/api/meta") {
            break Some(r);
        }
        if start.elapsed() > Duration::from_secs(20) {
            break None;
        }
        std::thread::sleep(Duration::from_millis(50));
    };
    let page = http_get(&addr, "/");
    child.kill().unwrap();
    child.wait().unwrap();
    let reply = reply.expect("server did not come up");
    assert!(reply.starts_with("HTTP/1.1 200"), "{reply}");
    assert!(reply.contains("\"format_version\":1"));
    assert!(page.unwrap().contains("/api/view"));
}
