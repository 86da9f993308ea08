mod report;

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use hmlfc::harness::{generate_synthetic, plot_json, run_sweep, write_csv, SceneKind, SweepSpec, SyntheticScene};
use hmlfc::lfcore::{
    load_light_field, save_light_field, view_file_name, ChromaSubsampling, ColorConfig, ColorTransform,
};
use hmlfc::motion::ReferenceChoice;
use hmlfc::container::RkvCodec;
use hmlfc::renderer::{render_with_threads, sidecar_path, LfGeometry};
use hmlfc::{encode, DecoderState, EncodeParams, MvPolicy};
use hmlfc_service::{encode_png, RequestDefaults, ViewRequest, ViewService};

/// Geometry file looked up inside a view directory.
const DIR_GEOMETRY: &str = "geometry.json";

#[derive(Parser)]
#[command(name = "hmlfc", version, about = "Hierarchical motion-compensated light field codec")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic light field as a view directory.
    Synth(SynthArgs),
    /// Compress a directory of views.
    Encode(EncodeArgs),
    /// Print the header and section sizes of a stream.
    Info(InfoArgs),
    /// Decode a stream to a directory of PNG views.
    Decode(DecodeArgs),
    /// Per-level coding statistics and the cost of a full random-access pass.
    Stats(InfoArgs),
    /// Render a novel view.
    Render(RenderArgs),
    /// Run a parameter sweep and write CSV and plot data.
    Bench(BenchArgs),
    /// Serve the HTTP view API for a stream.
    Serve(ServeArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Quads,
    Checker,
    Noise,
    Shared,
}

impl From<Kind> for SceneKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Quads => SceneKind::TexturedQuads,
            Kind::Checker => SceneKind::Checkerboard,
            Kind::Noise => SceneKind::NoiseDetail,
            Kind::Shared => SceneKind::SharedBackground,
        }
    }
}

#[derive(Args)]
struct SynthArgs {
    #[arg(short, long)]
    output: PathBuf,
    #[arg(long, value_enum, default_value_t = Kind::Quads)]
    kind: Kind,
    /// Cameras per side.
    #[arg(long, default_value_t = 8)]
    grid: usize,
    /// View width and height in pixels.
    #[arg(long, default_value_t = 128)]
    size: usize,
    /// Parallax in pixels per camera step at infinite depth.
    #[arg(long, default_value_t = 2.0)]
    baseline: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    All,
    DropInsignificant,
    Adaptive,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReferenceArg {
    TopLeft,
    Center,
}

#[derive(Clone, Copy, ValueEnum)]
enum ColorArg {
    Ycocg,
    Identity,
}

#[derive(Clone, Copy, ValueEnum)]
enum CodecArg {
    Png,
    Raw,
}

#[derive(Args)]
struct EncodeArgs {
    /// Directory of views.
    input: PathBuf,
    #[arg(short, long)]
    output: PathBuf,
    #[arg(long, default_value_t = 3)]
    height: usize,
    #[arg(long, default_value_t = 4)]
    block: usize,
    #[arg(long, default_value_t = 16)]
    window: usize,
    #[arg(long, default_value_t = 75)]
    tau_ref: u32,
    #[arg(long, default_value_t = 75)]
    tau_res: u32,
    /// Store chroma at half resolution (lossy).
    #[arg(long)]
    chroma_subsample: bool,
    #[arg(long, value_enum, default_value_t = ColorArg::Ycocg)]
    color: ColorArg,
    #[arg(long, value_enum, default_value_t = PolicyArg::Adaptive)]
    mv_policy: PolicyArg,
    /// Predict from thresholded references instead of the originals.
    #[arg(long)]
    closed_loop: bool,
    /// Disable the motion stage.
    #[arg(long)]
    no_motion: bool,
    /// Search the subtractive mode only.
    #[arg(long)]
    no_phase_shift: bool,
    #[arg(long, value_enum, default_value_t = ReferenceArg::TopLeft)]
    reference: ReferenceArg,
    #[arg(long, value_enum, default_value_t = CodecArg::Png)]
    rkv_codec: CodecArg,
    /// Geometry JSON to store beside the stream; defaults to the input
    /// directory's geometry.json when present.
    #[arg(long)]
    geometry: Option<PathBuf>,
}

impl EncodeArgs {
    fn params(&self) -> Result<EncodeParams> {
        if self.chroma_subsample && matches!(self.color, ColorArg::Identity) {
            bail!("--chroma-subsample needs --color ycocg");
        }
        let transform = match self.color {
            ColorArg::Ycocg => ColorTransform::YcocgR,
            ColorArg::Identity => ColorTransform::Identity,
        };
        let chroma = if self.chroma_subsample { ChromaSubsampling::Half } else { ChromaSubsampling::None };
        let p = EncodeParams {
            tree_height: self.height,
            block_size: self.block,
            window: self.window,
            tau_ref: self.tau_ref,
            tau_res: self.tau_res,
            color: ColorConfig::new(transform, chroma),
            reference: match self.reference {
                ReferenceArg::TopLeft => ReferenceChoice::TopLeft,
                ReferenceArg::Center => ReferenceChoice::Center,
            },
            mv_policy: match self.mv_policy {
                PolicyArg::All => MvPolicy::All,
                PolicyArg::DropInsignificant => MvPolicy::DropInsignificant,
                PolicyArg::Adaptive => MvPolicy::Adaptive,
            },
            motion: !self.no_motion,
            phase_shift: !self.no_phase_shift,
            closed_loop: self.closed_loop,
            rkv_codec: match self.rkv_codec {
                CodecArg::Png => RkvCodec::Png,
                CodecArg::Raw => RkvCodec::Raw,
            },
        };
        p.validate()?;
        Ok(p)
    }
}

#[derive(Args)]
struct InfoArgs {
    stream: PathBuf,
    /// Print JSON instead of text.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct DecodeArgs {
    stream: PathBuf,
    #[arg(short, long)]
    output: PathBuf,
    /// Decode only view `s,t`.
    #[arg(long, value_parser = parse_pair)]
    view: Option<(usize, usize)>,
}

#[derive(Args)]
struct RenderArgs {
    stream: PathBuf,
    /// `x,y,z,yaw,pitch`: position in scene units, angles in degrees.
    #[arg(long, allow_hyphen_values = true)]
    pose: Option<String>,
    /// Horizontal field of view in degrees; defaults to the one that maps
    /// a grid camera's view pixel for pixel.
    #[arg(long)]
    fov: Option<f64>,
    /// `WIDTHxHEIGHT`; defaults to the view size.
    #[arg(long, value_parser = parse_res)]
    res: Option<(usize, usize)>,
    #[arg(short, long)]
    output: PathBuf,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

#[derive(Args)]
struct BenchArgs {
    /// Sweep description (JSON).
    #[arg(long)]
    spec: PathBuf,
    #[arg(short, long)]
    output: PathBuf,
    /// Also write whitespace-separated data for gnuplot.
    #[arg(long)]
    gnuplot: bool,
}

#[derive(Args)]
struct ServeArgs {
    stream: PathBuf,
    #[arg(long, default_value = "127.0.0.1:8080")]
    addr: SocketAddr,
    /// Directory of viewer assets served at `/`; a built-in page otherwise.
    #[arg(long)]
    assets: Option<PathBuf>,
}

fn parse_pair(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once(',').ok_or("expected s,t")?;
    Ok((a.trim().parse().map_err(|_| "bad s")?, b.trim().parse().map_err(|_| "bad t")?))
}

fn parse_res(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once(['x', 'X']).ok_or("expected WIDTHxHEIGHT")?;
    Ok((a.trim().parse().map_err(|_| "bad width")?, b.trim().parse().map_err(|_| "bad height")?))
}

fn open_stream(path: &Path) -> Result<DecoderState> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    DecoderState::open(bytes).with_context(|| format!("opening {}", path.display()))
}

fn synth(a: SynthArgs) -> Result<()> {
    let scene = SyntheticScene::new(a.kind.into(), a.grid, a.size, a.baseline, a.seed);
    let field = generate_synthetic(&scene);
    save_light_field(&field, &a.output)?;
    scene.geometry().write_json(&a.output.join(DIR_GEOMETRY))?;
    println!("wrote {}x{} views of {}x{} to {}", a.grid, a.grid, a.size, a.size, a.output.display());
    Ok(())
}

fn encode_cmd(a: EncodeArgs) -> Result<()> {
    let params = a.params()?;
    let field = load_light_field(&a.input).with_context(|| format!("loading {}", a.input.display()))?;
    let start = Instant::now();
    let bytes = encode(&field, &params)?;
    let secs = start.elapsed().as_secs_f64();
    std::fs::write(&a.output, &bytes).with_context(|| format!("writing {}", a.output.display()))?;
    let geometry_src = a.geometry.clone().or_else(|| Some(a.input.join(DIR_GEOMETRY)).filter(|p| p.exists()));
    if let Some(src) = geometry_src {
        let g = LfGeometry::read_json(&src)?;
        if (g.grid_s, g.grid_t, g.width, g.height) != (field.grid_s(), field.grid_t(), field.width(), field.height()) {
            bail!("{} does not describe this light field", src.display());
        }
        g.write_json(&sidecar_path(&a.output))?;
    }
    println!(
        "{} bytes, {:.4} bpp, {:.2} s for {}x{} views of {}x{}",
        bytes.len(),
        bytes.len() as f64 * 8.0 / field.pixel_count() as f64,
        secs,
        field.grid_s(),
        field.grid_t(),
        field.width(),
        field.height()
    );
    Ok(())
}

fn decode_cmd(a: DecodeArgs) -> Result<()> {
    let state = open_stream(&a.stream)?;
    match a.view {
        Some((s, t)) => {
            let (gs, gt) = state.grid();
            if s >= gs || t >= gt {
                bail!("view {s},{t} outside the {gs}x{gt} grid");
            }
            let (w, h) = state.view_dims();
            std::fs::create_dir_all(&a.output)?;
            let path = a.output.join(view_file_name(s, t));
            image::save_buffer(&path, &state.decode_view(s, t)?, w as u32, h as u32, image::ExtendedColorType::Rgb8)
                .with_context(|| format!("writing {}", path.display()))?;
            println!("wrote {}", path.display());
        }
        None => {
            save_light_field(&state.decode_full()?, &a.output)?;
            println!("wrote {} views to {}", state.grid().0 * state.grid().1, a.output.display());
        }
    }
    Ok(())
}

/// Flag names for request fields in error messages.
fn flag_of(field: &str) -> &str {
    match field {
        "x" | "y" | "z" | "yaw" | "pitch" => "--pose",
        "w" | "h" => "--res",
        "fov" => "--fov",
        other => other,
    }
}

fn render_cmd(a: RenderArgs) -> Result<()> {
    let service = ViewService::open(&a.stream)?;
    let mut q: HashMap<String, String> = HashMap::new();
    if let Some(pose) = &a.pose {
        let parts: Vec<&str> = pose.split(',').collect();
        if parts.len() != 5 {
            bail!("--pose: expected x,y,z,yaw,pitch");
        }
        for (k, v) in ["x", "y", "z", "yaw", "pitch"].iter().zip(parts) {
            q.insert(k.to_string(), v.to_string());
        }
    }
    if let Some(f) = a.fov {
        q.insert("fov".into(), f.to_string());
    }
    if let Some((w, h)) = a.res {
        q.insert("w".into(), w.to_string());
        q.insert("h".into(), h.to_string());
    }
    let defaults: RequestDefaults = service.defaults();
    let req = ViewRequest::parse(&q, &defaults, service.zone()).map_err(|e| anyhow::anyhow!("{}: {e}", flag_of(&e.field)))?;
    let threads = if a.threads == 0 { std::thread::available_parallelism().map_or(1, |n| n.get()) } else { a.threads };
    let start = Instant::now();
    let rgb = render_with_threads(service.state(), &req.camera(req.width, req.height), service.geometry(), threads);
    let ms = start.elapsed().as_secs_f64() * 1e3;
    std::fs::write(&a.output, encode_png(&rgb, req.width, req.height)).with_context(|| format!("writing {}", a.output.display()))?;
    println!("{}x{} in {ms:.1} ms on {threads} thread(s)", req.width, req.height);
    Ok(())
}

fn bench_cmd(a: BenchArgs) -> Result<()> {
    let text = std::fs::read_to_string(&a.spec).with_context(|| format!("reading {}", a.spec.display()))?;
    let spec: SweepSpec = serde_json::from_str(&text).with_context(|| format!("parsing {}", a.spec.display()))?;
    let points = run_sweep(&spec).map_err(anyhow::Error::msg)?;
    std::fs::create_dir_all(&a.output)?;
    let csv = a.output.join("sweep.csv");
    write_csv(&points, std::io::BufWriter::new(std::fs::File::create(&csv)?))?;
    std::fs::write(a.output.join("plot.json"), serde_json::to_string_pretty(&plot_json(&points))? + "\n")?;
    if a.gnuplot {
        std::fs::write(a.output.join("sweep.dat"), report::gnuplot(&points))?;
    }
    let failed = points.iter().filter(|p| p.error.is_some()).count();
    println!("{} points ({failed} failed) written to {}", points.len(), a.output.display());
    Ok(())
}

fn serve_cmd(a: ServeArgs) -> Result<()> {
    tracing_subscriber::fmt().init();
    let service = Arc::new(ViewService::open(&a.stream)?);
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    rt.block_on(hmlfc_service::serve(service, a.addr, a.assets.as_deref()))?;
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Synth(a) => synth(a),
        Command::Encode(a) => encode_cmd(a),
        Command::Info(a) => {
            let state = open_stream(&a.stream)?;
            report::info(&state, a.json)
        }
        Command::Decode(a) => decode_cmd(a),
        Command::Stats(a) => {
            let state = open_stream(&a.stream)?;
            report::stats(&state, a.json)
        }
        Command::Render(a) => render_cmd(a),
        Command::Bench(a) => bench_cmd(a),
        Command::Serve(a) => serve_cmd(a),
    }
}
