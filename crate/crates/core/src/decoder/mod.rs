//! Random-access block decoding.
//!
//! Opening a stream parses the directory, decodes the top-level RKVs into
//! dense planes and materializes every reference SRV that predictive blocks
//! point at as a [`SparseImage`]. After that the state is immutable; any
//! block of any view is reconstructed by walking from its top RKV down the
//! tree and adding one SRV block per level, re-applying motion compensation
//! where a block carries a record.

mod sparse;

pub use sparse::SparseImage;

use std::sync::atomic::{AtomicU64, Ordering::Relaxed};

use rayon::prelude::*;
use serde::Serialize;

use crate::blocks::BlockRect;
use crate::container::{decode_rkv, parse, ChannelIndex, EncodeParams, Header, ParseError, SlotEntry, StreamIndex};
use crate::lfcore::{inverse_color, ColorTransform, LightField, Plane, PlaneGrid, ValueRange};
use crate::lfcore::ycocg_to_rgb_saturating;

#[derive(Debug, thiserror::Error)]
pub enum DecodeError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("top RKV {index} of channel {channel}: {message}")]
    Rkv { channel: usize, index: usize, message: String },
    #[error("{what} {value} out of range (limit {limit})")]
    OutOfRange { what: &'static str, value: usize, limit: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, serde::Deserialize)]
pub struct DecodeStats {
    pub blocks_decoded: u64,
    pub payload_reads: u64,
    pub payload_bytes_read: u64,
    pub cache_bytes: u64,
}

#[derive(Default)]
struct Counters {
    blocks: AtomicU64,
    reads: AtomicU64,
    bytes: AtomicU64,
}

pub struct DecoderState {
    bytes: Vec<u8>,
    index: StreamIndex,
    /// `[channel][top rkv]`, dense.
    top: Vec<Vec<Plane>>,
    /// `[channel][slot]`, present for reference SRVs used by motion records.
    cache: Vec<Vec<Option<SparseImage>>>,
    cache_bytes: u64,
    counters: Counters,
}

impl std::fmt::Debug for DecoderState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DecoderState")
            .field("stream_bytes", &self.bytes.len())
            .field("header", &self.index.header)
            .field("cache_bytes", &self.cache_bytes)
            .finish()
    }
}

impl DecoderState {
    pub fn open(bytes: Vec<u8>) -> Result<DecoderState, DecodeError> {
        let index = parse(&bytes)?;
        let codec = index.header.params.rkv_codec;
        let mut top = Vec::with_capacity(index.channels.len());
        for (c, ch) in index.channels.iter().enumerate() {
            let planes = ch
                .rkvs
                .iter()
                .enumerate()
                .map(|(i, r)| {
                    decode_rkv(codec, &bytes[r.clone()], ch.layout.plane_width, ch.layout.plane_height, ch.range)
                        .map_err(|message| DecodeError::Rkv { channel: c, index: i, message })
                })
                .collect::<Result<Vec<_>, _>>()?;
            top.push(planes);
        }
        let mut state = DecoderState { bytes, index, top, cache: Vec::new(), cache_bytes: 0, counters: Counters::default() };
        let cache: Vec<Vec<Option<SparseImage>>> = (0..state.index.channels.len())
            .map(|c| {
                let ch = &state.index.channels[c];
                let mut wanted = vec![false; ch.slots.len()];
                for s in ch.slots.iter().filter(|s| s.motion.is_some()) {
                    wanted[s.info.reference_slot.expect("parser checked")] = true;
                }
                (0..ch.slots.len())
                    .into_par_iter()
                    .map(|i| wanted[i].then(|| SparseImage::from_plane(&state.decode_slot_plane(c, i))))
                    .collect()
            })
            .collect();
        state.cache_bytes = cache.iter().flatten().flatten().map(|s| s.heap_bytes() as u64).sum();
        state.cache = cache;
        state.reset_stats();
        Ok(state)
    }

    pub fn header(&self) -> &Header {
        &self.index.header
    }

    pub fn params(&self) -> &EncodeParams {
        &self.index.header.params
    }

    pub fn index(&self) -> &StreamIndex {
        &self.index
    }

    pub fn stream_len(&self) -> usize {
        self.bytes.len()
    }

    pub fn bpp(&self) -> f64 {
        crate::container::bpp(self.bytes.len(), self.header().pixel_count())
    }

    pub fn grid(&self) -> (usize, usize) {
        (self.header().grid_s, self.header().grid_t)
    }

    pub fn view_dims(&self) -> (usize, usize) {
        (self.header().width, self.header().height)
    }

    pub fn channel(&self, c: usize) -> &ChannelIndex {
        &self.index.channels[c]
    }

    pub fn stats(&self) -> DecodeStats {
        DecodeStats {
            blocks_decoded: self.counters.blocks.load(Relaxed),
            payload_reads: self.counters.reads.load(Relaxed),
            payload_bytes_read: self.counters.bytes.load(Relaxed),
            cache_bytes: self.cache_bytes,
        }
    }

    pub fn reset_stats(&self) {
        self.counters.blocks.store(0, Relaxed);
        self.counters.reads.store(0, Relaxed);
        self.counters.bytes.store(0, Relaxed);
    }

    /// The SRV stored in one slot, thresholded, without motion.
    fn decode_slot_plane(&self, c: usize, slot: usize) -> Plane {
        let ch = &self.index.channels[c];
        let grid = ch.layout.blocks;
        let mut out = vec![0i32; grid.width * grid.height];
        let mut buf = Vec::new();
        let entry = &ch.slots[slot];
        for i in 0..grid.count() {
            let rect = grid.rect_at(i);
            buf.clear();
            buf.resize(rect.len(), 0);
            self.add_payload(ch, entry, i, rect, &mut buf, false);
            scatter(&buf, rect, grid.width, &mut out);
        }
        let r = 2 * ch.range.width();
        Plane::new(grid.width, grid.height, out, ValueRange::symmetric(r)).expect("stored SRV range")
    }

    #[inline]
    fn add_payload(&self, ch: &ChannelIndex, entry: &SlotEntry, index: usize, rect: BlockRect, out: &mut [i32], count: bool) {
        let Some(p) = &entry.payload else { return };
        let Some(off) = p.block_offset(&ch.layout.blocks, index) else { return };
        let view = p.view(&self.bytes);
        for (k, o) in out.iter_mut().enumerate() {
            *o += view.decode_at(off + k).expect("offset within payload") as i32 + p.min;
        }
        if count {
            let (a, b) = p.layout.bit_span(off, rect.len());
            self.counters.reads.fetch_add(1, Relaxed);
            self.counters.bytes.fetch_add(b.div_ceil(8) - a / 8, Relaxed);
        }
    }

    /// Adds the SRV block of `slot` to `out`.
    #[inline]
    fn add_srv_block(&self, c: usize, slot: usize, index: usize, rect: BlockRect, out: &mut [i32]) {
        let ch = &self.index.channels[c];
        if let Some(sp) = &self.cache[c][slot] {
            for row in 0..rect.h {
                sp.add_run((rect.y + row) as isize, rect.x as isize, 1, &mut out[row * rect.w..][..rect.w]);
            }
            return;
        }
        let entry = &ch.slots[slot];
        self.add_payload(ch, entry, index, rect, out, true);
        let (Some(ri), Some(m)) = (entry.record_of(index), entry.motion.as_ref()) else { return };
        let rec = m.record(&self.bytes, ri);
        self.counters.bytes.fetch_add(m.record_span(ri) as u64, Relaxed);
        let reference = self.cache[c][entry.info.reference_slot.expect("predictive slot")]
            .as_ref()
            .expect("references of motion slots are cached");
        let sign = rec.mode.sign();
        for row in 0..rect.h {
            let y = (rect.y + row) as isize + rec.dy as isize;
            let x = rect.x as isize + rec.dx as isize;
            reference.add_run(y, x, sign, &mut out[row * rect.w..][..rect.w]);
        }
    }

    fn check_block(&self, c: usize, s: usize, t: usize, bx: usize, by: usize) -> Result<BlockRect, DecodeError> {
        let (gs, gt) = self.grid();
        let check = |what, value, limit| {
            if value >= limit {
                Err(DecodeError::OutOfRange { what, value, limit })
            } else {
                Ok(())
            }
        };
        check("channel", c, self.index.channels.len())?;
        check("view s", s, gs)?;
        check("view t", t, gt)?;
        let grid = self.index.channels[c].layout.blocks;
        check("block x", bx, grid.blocks_x())?;
        check("block y", by, grid.blocks_y())?;
        Ok(grid.rect(bx, by))
    }

    /// Samples of block `(bx, by)` of view `(s, t)` in channel `c`,
    /// row-major over the block rectangle, before clamping and inverse
    /// colour transform.
    pub fn decode_block(&self, view: (usize, usize), block: (usize, usize), c: usize) -> Result<Vec<i32>, DecodeError> {
        let rect = self.check_block(c, view.0, view.1, block.0, block.1)?;
        let mut out = vec![0; rect.len()];
        self.decode_block_into(view, block, c, &mut out);
        Ok(out)
    }

    /// Unchecked variant writing into `out` (at least `block_size²` long);
    /// returns the block rectangle.
    pub fn decode_block_into(&self, (s, t): (usize, usize), (bx, by): (usize, usize), c: usize, out: &mut [i32]) -> BlockRect {
        let ch = &self.index.channels[c];
        let layout = &ch.layout;
        let grid = layout.blocks;
        let rect = grid.rect(bx, by);
        let index = grid.index(bx, by);
        let out = &mut out[..rect.len()];
        let h = layout.height();
        let (ts, tt) = (s >> h, t >> h);
        let top = &self.top[c][tt * layout.top_dims.0 + ts];
        for row in 0..rect.h {
            out[row * rect.w..][..rect.w]
                .copy_from_slice(&top.samples()[(rect.y + row) * grid.width + rect.x..][..rect.w]);
        }
        for level in 0..h {
            let slot = layout.slot(level, s >> level, t >> level);
            self.add_srv_block(c, slot, index, rect, out);
        }
        self.counters.blocks.fetch_add(1, Relaxed);
        rect
    }

    /// One channel plane of view `(s, t)`, clamped to the channel range.
    pub fn decode_plane(&self, c: usize, s: usize, t: usize) -> Result<Plane, DecodeError> {
        self.check_block(c, s, t, 0, 0)?;
        let ch = &self.index.channels[c];
        let grid = ch.layout.blocks;
        let mut out = vec![0i32; grid.width * grid.height];
        let mut buf = vec![0i32; grid.block_size * grid.block_size];
        for by in 0..grid.blocks_y() {
            for bx in 0..grid.blocks_x() {
                let rect = self.decode_block_into((s, t), (bx, by), c, &mut buf);
                scatter(&buf[..rect.len()], rect, grid.width, &mut out);
            }
        }
        let range = ch.range;
        out.iter_mut().for_each(|v| *v = (*v).clamp(range.min, range.max));
        Ok(Plane::new(grid.width, grid.height, out, range).expect("clamped"))
    }

    fn to_rgb(&self, channels: Vec<PlaneGrid>) -> LightField {
        let (w, h) = self.view_dims();
        inverse_color(&channels, self.params().color, w, h)
    }

    /// Interleaved RGB8 pixels of view `(s, t)`.
    pub fn decode_view(&self, s: usize, t: usize) -> Result<Vec<u8>, DecodeError> {
        let channels = (0..self.index.channels.len())
            .map(|c| Ok(PlaneGrid::new(1, 1, vec![self.decode_plane(c, s, t)?])))
            .collect::<Result<Vec<_>, DecodeError>>()?;
        Ok(self.to_rgb(channels).view_rgb(0, 0))
    }

    pub fn decode_full(&self) -> Result<LightField, DecodeError> {
        let (gs, gt) = self.grid();
        let channels = (0..self.index.channels.len())
            .map(|c| {
                let planes = (0..gs * gt)
                    .into_par_iter()
                    .map(|i| self.decode_plane(c, i % gs, i / gs))
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(PlaneGrid::new(gs, gt, planes))
            })
            .collect::<Result<Vec<_>, DecodeError>>()?;
        Ok(self.to_rgb(channels))
    }

    /// Fills `out` (`block_size²` pixels, row stride `block_size` even for
    /// shortened edge blocks) with the RGB pixels of luma block `(bx, by)`
    /// of view `(s, t)`; returns the block rectangle.
    pub fn decode_rgb_block(&self, (s, t): (usize, usize), (bx, by): (usize, usize), out: &mut [[u8; 3]]) -> BlockRect {
        let bs = self.params().block_size;
        let mut y = [0i32; 256];
        let mut co = [0i32; 256];
        let mut cg = [0i32; 256];
        let rect = self.decode_block_into((s, t), (bx, by), 0, &mut y);
        let color = self.params().color;
        let half = color.channel_is_subsampled(1);
        let (cbx, cby) = if half { (bx / 2, by / 2) } else { (bx, by) };
        let crect = self.decode_block_into((s, t), (cbx, cby), 1, &mut co);
        self.decode_block_into((s, t), (cbx, cby), 2, &mut cg);
        let ranges = [0, 1, 2].map(|c| self.index.channels[c].range);
        for row in 0..rect.h {
            for col in 0..rect.w {
                let (cx, cy) = if half {
                    ((rect.x + col) / 2 - crect.x, (rect.y + row) / 2 - crect.y)
                } else {
                    (col, row)
                };
                let ci = cy * crect.w + cx;
                let v = [y[row * rect.w + col], co[ci], cg[ci]];
                let v = [0, 1, 2].map(|c| v[c].clamp(ranges[c].min, ranges[c].max));
                out[row * bs + col] = match color.transform {
                    ColorTransform::YcocgR => ycocg_to_rgb_saturating(v[0], v[1], v[2]),
                    ColorTransform::Identity => v.map(|x| x as u8),
                };
            }
        }
        rect
    }
}

fn scatter(block: &[i32], rect: BlockRect, width: usize, out: &mut [i32]) {
    for (row, chunk) in block.chunks_exact(rect.w).enumerate() {
        out[(rect.y + row) * width + rect.x..][..rect.w].copy_from_slice(chunk);
    }
}
