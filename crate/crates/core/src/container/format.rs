//! Byte layout of the `.hmlfc` stream: header, per-channel sections and the
//! in-memory index built when a stream is opened.

use std::ops::Range;

use byteorder::{ByteOrder, LittleEndian as LE};

use super::bitmap::RankBitmap;
use super::rkv::RkvCodec;
use super::{EncodeParams, MvPolicy, ParseError};
use crate::bise::{self, BiseView, Layout};
use crate::blocks::BlockGrid;
use crate::hierarchy::{cluster_planes, clustered_dims};
use crate::lfcore::{ChromaSubsampling, ColorConfig, ColorTransform, ValueRange};
use crate::motion::{cluster_roles, BlockMatch, Mode, ReferenceChoice};

pub const MAGIC: [u8; 4] = *b"HMLF";
pub const FORMAT_VERSION: u16 = 1;
/// Header bytes before the channel table.
pub const HEADER_FIXED_LEN: usize = 36;
const CHANNEL_TABLE_ENTRY: usize = 8;
const SECTION_LENGTHS: usize = 6;

const FLAG_YCOCG: u16 = 1;
const FLAG_CHROMA_HALF: u16 = 1 << 1;
const FLAG_MOTION: u16 = 1 << 2;
const FLAG_PHASE: u16 = 1 << 3;
const FLAG_CLOSED_LOOP: u16 = 1 << 4;
const KNOWN_FLAGS: u16 = (1 << 5) - 1;

const SLOT_HAS_PAYLOAD: u8 = 1;
const SLOT_HAS_MOTION: u8 = 1 << 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Header {
    pub version: u16,
    pub grid_s: usize,
    pub grid_t: usize,
    pub width: usize,
    pub height: usize,
    pub params: EncodeParams,
    /// `(offset, length)` of each channel section, absolute.
    pub channels: Vec<(usize, usize)>,
}

impl Header {
    pub fn encoded_len(&self) -> usize {
        HEADER_FIXED_LEN + CHANNEL_TABLE_ENTRY * self.channels.len()
    }

    pub fn pixel_count(&self) -> u64 {
        (self.grid_s * self.grid_t * self.width * self.height) as u64
    }

    pub(crate) fn write(&self, out: &mut Vec<u8>) {
        let p = &self.params;
        let mut flags = 0u16;
        if p.color.transform == ColorTransform::YcocgR {
            flags |= FLAG_YCOCG;
        }
        if p.color.chroma_subsample == ChromaSubsampling::Half {
            flags |= FLAG_CHROMA_HALF;
        }
        if p.motion {
            flags |= FLAG_MOTION;
        }
        if p.closed_loop {
            flags |= FLAG_CLOSED_LOOP;
        }
        if p.phase_shift {
            flags |= FLAG_PHASE;
        }
        let mut h = [0u8; HEADER_FIXED_LEN];
        h[0..4].copy_from_slice(&MAGIC);
        LE::write_u16(&mut h[4..], self.version);
        LE::write_u16(&mut h[6..], flags);
        LE::write_u16(&mut h[8..], self.grid_s as u16);
        LE::write_u16(&mut h[10..], self.grid_t as u16);
        LE::write_u32(&mut h[12..], self.width as u32);
        LE::write_u32(&mut h[16..], self.height as u32);
        h[20] = p.tree_height as u8;
        h[21] = p.block_size as u8;
        h[22] = p.window as u8;
        h[23] = match p.reference {
            ReferenceChoice::TopLeft => 0,
            ReferenceChoice::Center => 1,
        };
        h[24] = p.mv_policy.to_byte();
        h[25] = p.rkv_codec.id();
        h[26] = self.channels.len() as u8;
        LE::write_u32(&mut h[28..], p.tau_ref);
        LE::write_u32(&mut h[32..], p.tau_res);
        out.extend_from_slice(&h);
        for &(off, len) in &self.channels {
            out.extend_from_slice(&(off as u32).to_le_bytes());
            out.extend_from_slice(&(len as u32).to_le_bytes());
        }
    }
}

fn need(bytes: &[u8], n: usize) -> Result<(), ParseError> {
    if bytes.len() < n {
        Err(ParseError::Truncated { need: n, have: bytes.len() })
    } else {
        Ok(())
    }
}

fn corrupt<T>(msg: impl Into<String>) -> Result<T, ParseError> {
    Err(ParseError::Corrupt(msg.into()))
}

/// Parses the fixed header and channel table.
pub fn parse_header(bytes: &[u8]) -> Result<Header, ParseError> {
    need(bytes, 4)?;
    if bytes[0..4] != MAGIC {
        return Err(ParseError::Magic(bytes[0..4].try_into().expect("four bytes")));
    }
    need(bytes, 6)?;
    let version = LE::read_u16(&bytes[4..]);
    if version != FORMAT_VERSION {
        return Err(ParseError::Version { found: version, expected: FORMAT_VERSION });
    }
    need(bytes, HEADER_FIXED_LEN)?;
    let h = &bytes[..HEADER_FIXED_LEN];
    let flags = LE::read_u16(&h[6..]);
    if flags & !KNOWN_FLAGS != 0 {
        return corrupt(format!("unknown header flags {flags:#06x}"));
    }
    let transform = if flags & FLAG_YCOCG != 0 { ColorTransform::YcocgR } else { ColorTransform::Identity };
    let chroma = if flags & FLAG_CHROMA_HALF != 0 { ChromaSubsampling::Half } else { ChromaSubsampling::None };
    if transform == ColorTransform::Identity && chroma == ChromaSubsampling::Half {
        return corrupt("chroma subsampling without YCoCg-R");
    }
    let reference = match h[23] {
        0 => ReferenceChoice::TopLeft,
        1 => ReferenceChoice::Center,
        r => return corrupt(format!("reference choice {r}")),
    };
    let mv_policy = MvPolicy::from_byte(h[24]).ok_or_else(|| ParseError::Corrupt(format!("mv policy {}", h[24])))?;
    let rkv_codec = RkvCodec::from_id(h[25]).ok_or_else(|| ParseError::Corrupt(format!("rkv codec {}", h[25])))?;
    let params = EncodeParams {
        tree_height: h[20] as usize,
        block_size: h[21] as usize,
        window: h[22] as usize,
        tau_ref: LE::read_u32(&h[28..]),
        tau_res: LE::read_u32(&h[32..]),
        color: ColorConfig { transform, chroma_subsample: chroma },
        reference,
        mv_policy,
        motion: flags & FLAG_MOTION != 0,
        phase_shift: flags & FLAG_PHASE != 0,
        closed_loop: flags & FLAG_CLOSED_LOOP != 0,
        rkv_codec,
    };
    params.validate().map_err(|e| ParseError::Corrupt(e.to_string()))?;
    let n_channels = h[26] as usize;
    if n_channels != 3 {
        return corrupt(format!("{n_channels} channels"));
    }
    let table_end = HEADER_FIXED_LEN + CHANNEL_TABLE_ENTRY * n_channels;
    need(bytes, table_end)?;
    let channels = (0..n_channels)
        .map(|c| {
            let e = &bytes[HEADER_FIXED_LEN + c * CHANNEL_TABLE_ENTRY..];
            (LE::read_u32(e) as usize, LE::read_u32(&e[4..]) as usize)
        })
        .collect();
    let header = Header {
        version,
        grid_s: LE::read_u16(&h[8..]) as usize,
        grid_t: LE::read_u16(&h[10..]) as usize,
        width: LE::read_u32(&h[12..]) as usize,
        height: LE::read_u32(&h[16..]) as usize,
        params,
        channels,
    };
    if header.grid_s == 0 || header.grid_t == 0 || header.width == 0 || header.height == 0 {
        return corrupt("empty light field");
    }
    let max = crate::hierarchy::max_height(header.grid_s, header.grid_t);
    if params.tree_height > max {
        return corrupt(format!("tree height {} exceeds {max}", params.tree_height));
    }
    Ok(header)
}

/// Position of one SRV in the stream's breadth-first slot order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SlotInfo {
    pub level: usize,
    pub s: usize,
    pub t: usize,
    pub cluster: usize,
    pub member: usize,
    /// Slot of the cluster's reference SRV, for predictive members.
    pub reference_slot: Option<usize>,
}

/// Slot order and block geometry of one channel, derived from the header.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChannelLayout {
    pub plane_width: usize,
    pub plane_height: usize,
    /// Input grid dimensions of each level, bottom first.
    pub level_dims: Vec<(usize, usize)>,
    pub top_dims: (usize, usize),
    pub slots: Vec<SlotInfo>,
    pub blocks: BlockGrid,
    lookup: Vec<Vec<usize>>,
}

impl ChannelLayout {
    pub fn height(&self) -> usize {
        self.level_dims.len()
    }

    /// Slot of the SRV at `(s, t)` of level `level`'s input grid.
    #[inline]
    pub fn slot(&self, level: usize, s: usize, t: usize) -> usize {
        self.lookup[level][t * self.level_dims[level].0 + s]
    }
}

/// Slots run from the top level down; within a level clusters follow tile
/// order and members follow slot order, so the children of each parent are
/// contiguous.
pub fn channel_layout(
    grid: (usize, usize),
    tree_height: usize,
    plane_dims: (usize, usize),
    block_size: usize,
    reference: ReferenceChoice,
    motion: bool,
) -> ChannelLayout {
    let mut level_dims = vec![grid];
    for _ in 1..tree_height {
        let (s, t) = *level_dims.last().expect("non-empty");
        level_dims.push(clustered_dims(s, t));
    }
    let (ls, lt) = *level_dims.last().expect("height >= 1");
    let top_dims = clustered_dims(ls, lt);
    let mut slots = Vec::new();
    let mut lookup: Vec<Vec<usize>> = level_dims.iter().map(|&(s, t)| vec![usize::MAX; s * t]).collect();
    for level in (0..tree_height).rev() {
        let (gs, gt) = level_dims[level];
        for (ci, tile) in cluster_planes(gs, gt).iter().enumerate() {
            let members: Vec<(usize, usize)> = tile.members().collect();
            let roles = cluster_roles(members.len(), reference);
            let base = slots.len();
            for (mi, &(s, t)) in members.iter().enumerate() {
                let reference_slot = (motion && mi != roles.reference).then_some(base + roles.reference);
                lookup[level][t * gs + s] = slots.len();
                slots.push(SlotInfo { level, s, t, cluster: ci, member: mi, reference_slot });
            }
        }
    }
    ChannelLayout {
        plane_width: plane_dims.0,
        plane_height: plane_dims.1,
        level_dims,
        top_dims,
        slots,
        blocks: BlockGrid::new(plane_dims.0, plane_dims.1, block_size),
        lookup,
    }
}

/// Plane dimensions of channel `c`.
pub(crate) fn channel_plane_dims(color: ColorConfig, c: usize, width: usize, height: usize) -> (usize, usize) {
    if color.channel_is_subsampled(c) {
        (width.div_ceil(2), height.div_ceil(2))
    } else {
        (width, height)
    }
}

/// Motion data of one predictive slot as produced by the encoder.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct SlotMotion {
    /// Per-block record flags; only written under [`MvPolicy::Adaptive`].
    pub bitmap: Option<Vec<bool>>,
    pub records: Vec<BlockMatch>,
}

/// One slot as produced by the encoder.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub(crate) struct SlotData {
    /// Per-block significance; empty when nothing is significant.
    pub sig: Vec<bool>,
    /// Samples of the significant blocks, block order, row-major inside.
    pub values: Vec<i32>,
    pub motion: Option<SlotMotion>,
}

fn mode_index(m: Mode) -> u32 {
    match m {
        Mode::Subtractive => 0,
        Mode::Additive => 1,
    }
}

/// Record value ranges: `(min_dx, nx, min_dy, ny, mode_code)`. Mode code 0
/// means all subtractive, 1 all additive, 2 mixed.
fn record_ranges(records: &[BlockMatch]) -> (i32, u32, i32, u32, u8) {
    let (mut x0, mut x1, mut y0, mut y1) = (i32::MAX, i32::MIN, i32::MAX, i32::MIN);
    let (mut sub, mut add) = (false, false);
    for r in records {
        x0 = x0.min(r.dx);
        x1 = x1.max(r.dx);
        y0 = y0.min(r.dy);
        y1 = y1.max(r.dy);
        match r.mode {
            Mode::Subtractive => sub = true,
            Mode::Additive => add = true,
        }
    }
    let mode_code = match (sub, add) {
        (true, true) => 2,
        (false, true) => 1,
        _ => 0,
    };
    (x0, (x1 - x0 + 1) as u32, y0, (y1 - y0 + 1) as u32, mode_code)
}

/// Serializes one channel section.
pub(crate) fn write_channel_section(rkvs: &[Vec<u8>], slots: &[SlotData], policy: MvPolicy) -> Result<Vec<u8>, String> {
    let (mut rkv, mut dir, mut sig, mut mbits, mut payload, mut mv) =
        (Vec::new(), Vec::new(), Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for r in rkvs {
        rkv.extend_from_slice(&(r.len() as u32).to_le_bytes());
        rkv.extend_from_slice(r);
    }
    for slot in slots {
        let has_payload = slot.sig.iter().any(|&b| b);
        let motion = slot.motion.as_ref().filter(|m| !m.records.is_empty());
        let mut flags = 0;
        if has_payload {
            flags |= SLOT_HAS_PAYLOAD;
        }
        if motion.is_some() {
            flags |= SLOT_HAS_MOTION;
        }
        dir.push(flags);
        if has_payload {
            let lo = *slot.values.iter().min().expect("significant blocks have samples");
            let hi = *slot.values.iter().max().expect("significant blocks have samples");
            let n = (hi - lo + 1) as u32;
            let lo16 = i16::try_from(lo).map_err(|_| format!("payload minimum {lo} exceeds i16"))?;
            let n16 = u16::try_from(n).map_err(|_| format!("payload range {n} exceeds u16"))?;
            dir.extend_from_slice(&lo16.to_le_bytes());
            dir.extend_from_slice(&n16.to_le_bytes());
            sig.extend(RankBitmap::from_bits(&slot.sig).to_bytes());
            let shifted: Vec<u32> = slot.values.iter().map(|&v| (v - lo) as u32).collect();
            payload.extend(bise::encode(&shifted, n).map_err(|e| e.to_string())?.payload());
        }
        if let Some(m) = motion {
            let (x0, nx, y0, ny, mode_code) = record_ranges(&m.records);
            dir.extend_from_slice(&[x0 as i8 as u8, nx as u8, y0 as i8 as u8, ny as u8, mode_code]);
            if policy == MvPolicy::Adaptive {
                let bits = m.bitmap.as_ref().ok_or("adaptive policy needs a motion bitmap")?;
                mbits.extend(RankBitmap::from_bits(bits).to_bytes());
            }
            let n_mode = if mode_code == 2 { 2 } else { 1 };
            let packed: Vec<u32> = m
                .records
                .iter()
                .map(|r| {
                    let mi = if n_mode == 2 { mode_index(r.mode) } else { 0 };
                    (mi * ny + (r.dy - y0) as u32) * nx + (r.dx - x0) as u32
                })
                .collect();
            payload_append(&mut mv, &packed, n_mode * nx * ny)?;
        }
    }
    let mut out = Vec::new();
    for area in [&rkv, &dir, &sig, &mbits, &payload, &mv] {
        out.extend_from_slice(&(area.len() as u32).to_le_bytes());
    }
    for area in [rkv, dir, sig, mbits, payload, mv] {
        out.extend(area);
    }
    Ok(out)
}

fn payload_append(out: &mut Vec<u8>, values: &[u32], n: u32) -> Result<(), String> {
    out.extend(bise::encode(values, n).map_err(|e| e.to_string())?.payload());
    Ok(())
}

/// Location and value mapping of a slot's stored blocks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PayloadEntry {
    pub sig: RankBitmap,
    /// Stored value `v` decodes to `v + min`.
    pub min: i32,
    pub layout: Layout,
    pub count: usize,
    /// Absolute byte range of the BISE payload.
    pub bytes: Range<usize>,
    /// Stored samples before each block row.
    row_offsets: Vec<u32>,
}

impl PayloadEntry {
    /// Sample offset of block `index` within the payload, if significant.
    #[inline]
    pub fn block_offset(&self, grid: &BlockGrid, index: usize) -> Option<usize> {
        if !self.sig.get(index) {
            return None;
        }
        let bx_n = grid.blocks_x();
        let by = index / bx_n;
        let row_h = grid.block_size.min(grid.height - by * grid.block_size);
        let before_in_row = self.sig.rank(index) - self.sig.rank(by * bx_n);
        Some(self.row_offsets[by] as usize + before_in_row * grid.block_size * row_h)
    }

    pub fn view<'a>(&self, stream: &'a [u8]) -> BiseView<'a> {
        BiseView::new(&stream[self.bytes.clone()], self.layout, self.count).expect("validated at parse")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RecordIndex {
    /// One record per block.
    Dense,
    /// Records for significant blocks only.
    Significant,
    Bitmap(RankBitmap),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MotionEntry {
    pub index: RecordIndex,
    pub min_dx: i32,
    pub nx: u32,
    pub min_dy: i32,
    pub ny: u32,
    pub mode_code: u8,
    pub layout: Layout,
    pub count: usize,
    pub bytes: Range<usize>,
}

impl MotionEntry {
    /// Unpacks record `i`.
    #[inline]
    pub fn record(&self, stream: &[u8], i: usize) -> BlockMatch {
        let view = BiseView::new(&stream[self.bytes.clone()], self.layout, self.count).expect("validated at parse");
        let v = view.decode_at(i).expect("record index in range");
        let dx = (v % self.nx) as i32 + self.min_dx;
        let rest = v / self.nx;
        let dy = (rest % self.ny) as i32 + self.min_dy;
        let mode = match (self.mode_code, rest / self.ny) {
            (1, _) | (2, 1) => Mode::Additive,
            _ => Mode::Subtractive,
        };
        BlockMatch { mode, dx, dy, cost: 0 }
    }

    /// Bytes touched when reading record `i`.
    pub fn record_span(&self, i: usize) -> usize {
        let (a, b) = self.layout.bit_span(i, 1);
        (b.div_ceil(8) - a / 8) as usize
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlotEntry {
    pub info: SlotInfo,
    pub payload: Option<PayloadEntry>,
    pub motion: Option<MotionEntry>,
}

impl SlotEntry {
    /// Motion record slot of block `index`, if it has one.
    #[inline]
    pub fn record_of(&self, index: usize) -> Option<usize> {
        let m = self.motion.as_ref()?;
        match &m.index {
            RecordIndex::Dense => Some(index),
            RecordIndex::Significant => {
                let p = self.payload.as_ref()?;
                p.sig.get(index).then(|| p.sig.rank(index))
            }
            RecordIndex::Bitmap(b) => b.get(index).then(|| b.rank(index)),
        }
    }
}

/// Index of one parsed channel section.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChannelIndex {
    pub layout: ChannelLayout,
    pub range: ValueRange,
    /// Absolute byte ranges of the top RKV payloads, row-major.
    pub rkvs: Vec<Range<usize>>,
    pub slots: Vec<SlotEntry>,
    /// Byte lengths of the rkv, directory, significance, motion bitmap,
    /// payload and motion-vector areas.
    pub area_sizes: [usize; SECTION_LENGTHS],
}

#[derive(Debug, Clone, PartialEq)]
pub struct StreamIndex {
    pub header: Header,
    pub channels: Vec<ChannelIndex>,
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    end: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ParseError> {
        if self.pos + n > self.end {
            return Err(ParseError::Truncated { need: self.pos + n, have: self.end });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
}

/// Parses the header and builds the full directory index.
pub fn parse(bytes: &[u8]) -> Result<StreamIndex, ParseError> {
    let header = parse_header(bytes)?;
    let p = header.params;
    let mut channels = Vec::with_capacity(header.channels.len());
    let mut expected_start = header.encoded_len();
    for (c, &(off, len)) in header.channels.iter().enumerate() {
        if off != expected_start {
            return corrupt(format!("channel {c} starts at {off}, expected {expected_start}"));
        }
        need(bytes, off + len)?;
        expected_start = off + len;
        let dims = channel_plane_dims(p.color, c, header.width, header.height);
        let layout =
            channel_layout((header.grid_s, header.grid_t), p.tree_height, dims, p.block_size, p.reference, p.motion);
        channels.push(parse_channel(bytes, off, len, layout, p, p.color.channel_range(c))?);
    }
    if expected_start != bytes.len() {
        return corrupt(format!("{} trailing bytes", bytes.len() - expected_start));
    }
    Ok(StreamIndex { header, channels })
}

fn parse_channel(
    bytes: &[u8],
    off: usize,
    len: usize,
    layout: ChannelLayout,
    p: EncodeParams,
    range: ValueRange,
) -> Result<ChannelIndex, ParseError> {
    let mut cur = Cursor { bytes, pos: off, end: off + len };
    let lens = cur.take(4 * SECTION_LENGTHS)?;
    let mut area_sizes = [0usize; SECTION_LENGTHS];
    for (i, a) in area_sizes.iter_mut().enumerate() {
        *a = LE::read_u32(&lens[4 * i..]) as usize;
    }
    if area_sizes.iter().sum::<usize>() + 4 * SECTION_LENGTHS != len {
        return corrupt("channel area lengths do not add up");
    }
    let mut starts = [0usize; SECTION_LENGTHS];
    let mut acc = cur.pos;
    for i in 0..SECTION_LENGTHS {
        starts[i] = acc;
        acc += area_sizes[i];
    }
    let area = |i: usize| Cursor { bytes, pos: starts[i], end: starts[i] + area_sizes[i] };
    let (mut rkv, mut dir, mut sig, mut mbits, mut payload, mut mv) = (area(0), area(1), area(2), area(3), area(4), area(5));

    let mut rkvs = Vec::new();
    for _ in 0..layout.top_dims.0 * layout.top_dims.1 {
        let n = LE::read_u32(rkv.take(4)?) as usize;
        let start = rkv.pos;
        rkv.take(n)?;
        rkvs.push(start..start + n);
    }

    let grid = layout.blocks;
    let n_blocks = grid.count();
    let bitmap_bytes = n_blocks.div_ceil(8);
    let mut slots = Vec::with_capacity(layout.slots.len());
    for &info in &layout.slots {
        let flags = dir.take(1)?[0];
        if flags & !(SLOT_HAS_PAYLOAD | SLOT_HAS_MOTION) != 0 {
            return corrupt(format!("slot flags {flags:#x}"));
        }
        let payload_entry = if flags & SLOT_HAS_PAYLOAD != 0 {
            let d = dir.take(4)?;
            let min = LE::read_i16(d) as i32;
            let n = LE::read_u16(&d[2..]) as u32;
            let layout = Layout::for_range(n).map_err(|e| ParseError::Corrupt(e.to_string()))?;
            let bm = RankBitmap::from_bytes(sig.take(bitmap_bytes)?, n_blocks);
            let mut row_offsets = Vec::with_capacity(grid.blocks_y());
            let mut count = 0usize;
            for by in 0..grid.blocks_y() {
                row_offsets.push(count as u32);
                for bx in 0..grid.blocks_x() {
                    if bm.get(grid.index(bx, by)) {
                        count += grid.rect(bx, by).len();
                    }
                }
            }
            let nbytes = layout.payload_bytes(count);
            let start = payload.pos;
            payload.take(nbytes)?;
            Some(PayloadEntry { sig: bm, min, layout, count, bytes: start..start + nbytes, row_offsets })
        } else {
            None
        };
        let motion_entry = if flags & SLOT_HAS_MOTION != 0 {
            if info.reference_slot.is_none() {
                return corrupt("motion data on a non-predictive slot");
            }
            let d = dir.take(5)?;
            let (min_dx, nx, min_dy, ny, mode_code) = (d[0] as i8 as i32, d[1] as u32, d[2] as i8 as i32, d[3] as u32, d[4]);
            if nx == 0 || ny == 0 || mode_code > 2 {
                return corrupt("motion ranges");
            }
            let (index, count) = match p.mv_policy {
                MvPolicy::All => (RecordIndex::Dense, n_blocks),
                MvPolicy::DropInsignificant => {
                    let c = payload_entry.as_ref().map_or(0, |pe| pe.sig.count_ones());
                    (RecordIndex::Significant, c)
                }
                MvPolicy::Adaptive => {
                    let bm = RankBitmap::from_bytes(mbits.take(bitmap_bytes)?, n_blocks);
                    let c = bm.count_ones();
                    (RecordIndex::Bitmap(bm), c)
                }
            };
            let n_mode = if mode_code == 2 { 2 } else { 1 };
            let layout = Layout::for_range(n_mode * nx * ny).map_err(|e| ParseError::Corrupt(e.to_string()))?;
            let nbytes = layout.payload_bytes(count);
            let start = mv.pos;
            mv.take(nbytes)?;
            Some(MotionEntry { index, min_dx, nx, min_dy, ny, mode_code, layout, count, bytes: start..start + nbytes })
        } else {
            None
        };
        slots.push(SlotEntry { info, payload: payload_entry, motion: motion_entry });
    }
    for (name, c) in [("rkv", &rkv), ("directory", &dir), ("significance", &sig), ("motion bitmap", &mbits), ("payload", &payload), ("motion vector", &mv)] {
        if c.pos != c.end {
            return corrupt(format!("{} unused bytes in the {name} area", c.end - c.pos));
        }
    }
    Ok(ChannelIndex { layout, range, rkvs, slots, area_sizes })
}
