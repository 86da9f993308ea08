//! Text and JSON reports for `info`, `stats` and `bench --gnuplot`.

use std::fmt::Write as _;
use std::time::Instant;

use anyhow::Result;
use hmlfc::decoder::DecodeStats;
use hmlfc::harness::RdPoint;
use hmlfc::DecoderState;
use serde::Serialize;

const AREA_NAMES: [&str; 6] = ["rkv", "directory", "significance", "motion_bitmap", "payload", "motion_vectors"];

#[derive(Serialize)]
struct ChannelInfo {
    offset: usize,
    bytes: usize,
    areas: serde_json::Map<String, serde_json::Value>,
}

#[derive(Serialize)]
struct Info<'a> {
    version: u16,
    grid: (usize, usize),
    image: (usize, usize),
    params: &'a hmlfc::EncodeParams,
    header_bytes: usize,
    stream_bytes: usize,
    bpp: f64,
    channels: Vec<ChannelInfo>,
}

pub fn info(state: &DecoderState, json: bool) -> Result<()> {
    let h = state.header();
    let channels: Vec<ChannelInfo> = h
        .channels
        .iter()
        .enumerate()
        .map(|(c, &(offset, bytes))| ChannelInfo {
            offset,
            bytes,
            areas: AREA_NAMES.iter().zip(state.channel(c).area_sizes).map(|(k, v)| (k.to_string(), v.into())).collect(),
        })
        .collect();
    let info = Info {
        version: h.version,
        grid: (h.grid_s, h.grid_t),
        image: (h.width, h.height),
        params: state.params(),
        header_bytes: h.encoded_len(),
        stream_bytes: state.stream_len(),
        bpp: state.bpp(),
        channels,
    };
    if json {
        println!("{}", serde_json::to_string_pretty(&info)?);
        return Ok(());
    }
    let p = state.params();
    println!("format version {}", info.version);
    println!("grid {}x{}, views {}x{}", h.grid_s, h.grid_t, h.width, h.height);
    println!(
        "height {} block {} window {} tau_ref {} tau_res {} color {:?} mv {:?} motion {} phase {} closed_loop {}",
        p.tree_height, p.block_size, p.window, p.tau_ref, p.tau_res, p.color, p.mv_policy, p.motion, p.phase_shift, p.closed_loop
    );
    println!("{} bytes ({} header), {:.4} bpp", info.stream_bytes, info.header_bytes, info.bpp);
    for (c, ch) in info.channels.iter().enumerate() {
        let areas: Vec<String> = AREA_NAMES.iter().map(|k| format!("{k} {}", ch.areas[*k])).collect();
        println!("channel {c}: {} bytes at {}: {}", ch.bytes, ch.offset, areas.join(", "));
    }
    Ok(())
}

#[derive(Serialize, Default, Clone)]
struct LevelStats {
    channel: usize,
    level: usize,
    slots: usize,
    blocks: usize,
    significant_blocks: usize,
    motion_records: usize,
    payload_bytes: usize,
    motion_bytes: usize,
}

#[derive(Serialize)]
struct AccessStats {
    blocks: u64,
    seconds: f64,
    micros_per_block: f64,
    decoder: DecodeStats,
}

#[derive(Serialize)]
struct Stats {
    levels: Vec<LevelStats>,
    access: AccessStats,
}

fn level_stats(state: &DecoderState) -> Vec<LevelStats> {
    let mut out = Vec::new();
    for c in 0..state.header().channels.len() {
        let ch = state.channel(c);
        let per_slot = ch.layout.blocks.blocks_x() * ch.layout.blocks.blocks_y();
        let mut levels = vec![LevelStats::default(); ch.layout.height()];
        for (i, l) in levels.iter_mut().enumerate() {
            l.channel = c;
            l.level = i;
        }
        for slot in &ch.slots {
            let l = &mut levels[slot.info.level];
            l.slots += 1;
            l.blocks += per_slot;
            if let Some(p) = &slot.payload {
                l.significant_blocks += p.sig.count_ones();
                l.payload_bytes += p.bytes.len();
            }
            if let Some(m) = &slot.motion {
                l.motion_records += m.count;
                l.motion_bytes += m.bytes.len();
            }
        }
        out.extend(levels);
    }
    out
}

/// Decodes every block of every view once, from a cold cache.
fn access_pass(state: &DecoderState) -> AccessStats {
    state.reset_stats();
    let (gs, gt) = state.grid();
    let mut buf = vec![0i32; state.params().block_size * state.params().block_size];
    let start = Instant::now();
    for c in 0..state.header().channels.len() {
        let grid = state.channel(c).layout.blocks;
        for t in 0..gt {
            for s in 0..gs {
                for by in 0..grid.blocks_y() {
                    for bx in 0..grid.blocks_x() {
                        state.decode_block_into((s, t), (bx, by), c, &mut buf);
                    }
                }
            }
        }
    }
    let seconds = start.elapsed().as_secs_f64();
    let decoder = state.stats();
    let blocks = decoder.blocks_decoded;
    AccessStats { blocks, seconds, micros_per_block: seconds * 1e6 / blocks.max(1) as f64, decoder }
}

pub fn stats(state: &DecoderState, json: bool) -> Result<()> {
    let stats = Stats { levels: level_stats(state), access: access_pass(state) };
    if json {
        println!("{}", serde_json::to_string_pretty(&stats)?);
        return Ok(());
    }
    println!("channel level slots blocks significant motion_records payload_bytes motion_bytes");
    for l in &stats.levels {
        println!(
            "{:>7} {:>5} {:>5} {:>6} {:>11} {:>14} {:>13} {:>12}",
            l.channel, l.level, l.slots, l.blocks, l.significant_blocks, l.motion_records, l.payload_bytes, l.motion_bytes
        );
    }
    let a = &stats.access;
    println!(
        "random access: {} blocks in {:.3} s ({:.2} us/block), {} payload reads, {} payload bytes, {} cache bytes",
        a.blocks, a.seconds, a.micros_per_block, a.decoder.payload_reads, a.decoder.payload_bytes_read, a.decoder.cache_bytes
    );
    Ok(())
}

/// One data block per variant and configuration, separated by two blank
/// lines so gnuplot can address them with `index`.
pub fn gnuplot(points: &[RdPoint]) -> String {
    type Key = (String, usize, usize, usize);
    let mut groups: Vec<(Key, Vec<&RdPoint>)> = Vec::new();
    for p in points.iter().filter(|p| p.error.is_none()) {
        let key = (p.variant.name().to_string(), p.height, p.block_size, p.window);
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, v)) => v.push(p),
            None => groups.push((key, vec![p])),
        }
    }
    let mut out = String::new();
    for (i, ((variant, height, block, window), mut pts)) in groups.into_iter().enumerate() {
        if i > 0 {
            out.push_str("\n\n");
        }
        pts.sort_by(|a, b| a.bpp.total_cmp(&b.bpp));
        let _ = writeln!(out, "# {variant} height={height} block={block} window={window}");
        let _ = writeln!(out, "# bpp psnr_db tau");
        for p in pts {
            let psnr = p.psnr.map_or("inf".to_string(), |v| format!("{v:.4}"));
            let _ = writeln!(out, "{:.6} {psnr} {}", p.bpp, p.tau);
        }
    }
    out
}
