//! Phase-shifted block motion compensation over the SRV clusters of a level.
//!
//! Each block `P` of a predictive SRV is matched against every integer
//! offset `(dx, dy) ∈ [-W, W]²` of the cluster's reference SRV `R` under two
//! costs,
//!
//! ```text
//! Δ− = Σ |P − R(dx,dy)|      (subtractive)
//! Δ+ = Σ |P + R(dx,dy)|      (additive, for sign-inverted regions)
//! ```
//!
//! and the overall minimum wins. The block is then replaced by `P − R` or
//! `P + R` at the winning offset. Reference samples outside the plane read
//! as zero.
//!
//! Ties resolve in this order: lower cost, subtractive before additive,
//! then the lexicographically smaller `(dy, dx)`.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::blocks::{BlockGrid, BlockRect};
use crate::hierarchy::{Level, SrvCluster};
use crate::lfcore::{Plane, ValueRange};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Subtractive,
    Additive,
}

impl Mode {
    /// Sign applied to the reference block when predicting.
    #[inline]
    pub fn sign(self) -> i32 {
        match self {
            Mode::Subtractive => 1,
            Mode::Additive => -1,
        }
    }
}

/// Winning match of one predictive block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BlockMatch {
    pub mode: Mode,
    pub dx: i32,
    pub dy: i32,
    /// `Δ` at the winner.
    pub cost: u64,
}

impl BlockMatch {
    pub const ZERO: BlockMatch = BlockMatch { mode: Mode::Subtractive, dx: 0, dy: 0, cost: 0 };
}

/// A stored motion record: the match plus where it applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MotionRecord {
    pub mode: Mode,
    pub dx: i32,
    pub dy: i32,
    pub block_index: (usize, usize),
    /// Cluster index of the reference SRV within the level.
    pub ref_id: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceChoice {
    /// First member in slot order (the tile's top-left view).
    #[default]
    TopLeft,
    /// Member at position `len / 2` in slot order.
    Center,
}

impl ReferenceChoice {
    pub fn pick(self, members: usize) -> usize {
        assert!(members > 0, "empty cluster");
        match self {
            ReferenceChoice::TopLeft => 0,
            ReferenceChoice::Center => members / 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct McConfig {
    pub block_size: usize,
    pub window: usize,
    pub reference: ReferenceChoice,
    /// Disabling restricts the search to the subtractive mode.
    pub phase_shift: bool,
}

impl McConfig {
    pub const BLOCK_SIZES: [usize; 4] = [2, 4, 8, 16];

    pub fn new(block_size: usize, window: usize) -> Self {
        assert!(Self::BLOCK_SIZES.contains(&block_size), "block size must be 2, 4, 8 or 16");
        McConfig { block_size, window, reference: ReferenceChoice::TopLeft, phase_shift: true }
    }
}

/// Role assignment inside one SRV cluster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterRoles {
    pub reference: usize,
    pub predictive: Vec<usize>,
}

pub fn select_references(level: &Level, choice: ReferenceChoice) -> Vec<ClusterRoles> {
    level.clusters.iter().map(|c| cluster_roles(c.members.len(), choice)).collect()
}

pub fn cluster_roles(members: usize, choice: ReferenceChoice) -> ClusterRoles {
    let reference = choice.pick(members);
    ClusterRoles { reference, predictive: (0..members).filter(|&m| m != reference).collect() }
}

/// Reference samples under `rect` shifted by `(dx, dy)`, zero-extended.
fn reference_block(reference: &Plane, rect: BlockRect, dx: i32, dy: i32, out: &mut Vec<i32>) {
    out.clear();
    let (x0, y0) = (rect.x as isize + dx as isize, rect.y as isize + dy as isize);
    let (w, h) = (reference.width() as isize, reference.height() as isize);
    if x0 >= 0 && y0 >= 0 && x0 + rect.w as isize <= w && y0 + rect.h as isize <= h {
        for yy in 0..rect.h {
            let start = (y0 as usize + yy) * reference.width() + x0 as usize;
            out.extend_from_slice(&reference.samples()[start..start + rect.w]);
        }
    } else {
        for yy in 0..rect.h as isize {
            for xx in 0..rect.w as isize {
                out.push(reference.get_or_zero(x0 + xx, y0 + yy));
            }
        }
    }
}

/// `(Δ−, Δ+)` of the block under `rect` against the reference at `(x, y)`.
pub fn block_residuals(pred: &Plane, reference: &Plane, rect: BlockRect, x: i32, y: i32) -> (u64, u64) {
    let mut rb = Vec::with_capacity(rect.len());
    reference_block(reference, rect, x, y, &mut rb);
    let pb = crate::blocks::extract_block(pred, rect);
    pb.iter().zip(&rb).fold((0, 0), |(m, p), (&a, &b)| {
        (m + (a - b).unsigned_abs() as u64, p + (a + b).unsigned_abs() as u64)
    })
}

/// Candidate offsets: `(0, 0)` first for a tight early bound, then the
/// rest in `(dy, dx)` order.
pub fn search_order(window: usize) -> Vec<(i32, i32)> {
    let w = window as i32;
    std::iter::once((0, 0))
        .chain((-w..=w).flat_map(|dy| (-w..=w).map(move |dx| (dx, dy))).filter(|&o| o != (0, 0)))
        .collect()
}

/// Whether `(cost, dx, dy)` beats the incumbent under the tie-break.
#[inline]
fn improves(best: Option<(u64, i32, i32)>, cost: u64, dx: i32, dy: i32) -> bool {
    best.is_none_or(|(c, bx, by)| (cost, dy, dx) < (c, by, bx))
}

/// Reusable search state for one worker.
pub struct BlockSearcher {
    order: Vec<(i32, i32)>,
    phase_shift: bool,
    pred: Vec<i32>,
    refb: Vec<i32>,
}

impl BlockSearcher {
    pub fn new(cfg: &McConfig) -> Self {
        BlockSearcher {
            order: search_order(cfg.window),
            phase_shift: cfg.phase_shift,
            pred: Vec::new(),
            refb: Vec::new(),
        }
    }

    /// Exhaustive window search for the block under `rect`.
    pub fn search(&mut self, pred: &Plane, reference: &Plane, rect: BlockRect) -> BlockMatch {
        self.pred.clear();
        for y in rect.y..rect.y + rect.h {
            self.pred.extend_from_slice(&pred.samples()[y * pred.width() + rect.x..][..rect.w]);
        }
        let mut best_sub: Option<(u64, i32, i32)> = None;
        let mut best_add: Option<(u64, i32, i32)> = None;
        let mut refb = std::mem::take(&mut self.refb);
        for &(dx, dy) in &self.order {
            let bound_sub = best_sub.map_or(u64::MAX, |b| b.0);
            let bound_add = best_add.map_or(u64::MAX, |b| b.0);
            if let Some((0, bx, by)) = best_sub {
                // Nothing later can beat a zero cost at a smaller offset.
                if (dy, dx) > (by, bx) {
                    break;
                }
            }
            reference_block(reference, rect, dx, dy, &mut refb);
            let (mut sub, mut add) = (0u64, 0u64);
            let (mut sub_alive, mut add_alive) = (true, self.phase_shift);
            for (prow, rrow) in self.pred.chunks_exact(rect.w).zip(refb.chunks_exact(rect.w)) {
                if sub_alive {
                    sub += prow.iter().zip(rrow).map(|(a, b)| (a - b).unsigned_abs() as u64).sum::<u64>();
                    sub_alive = sub <= bound_sub;
                }
                if add_alive {
                    add += prow.iter().zip(rrow).map(|(a, b)| (a + b).unsigned_abs() as u64).sum::<u64>();
                    add_alive = add <= bound_add;
                }
                if !sub_alive && !add_alive {
                    break;
                }
            }
            if sub_alive && improves(best_sub, sub, dx, dy) {
                best_sub = Some((sub, dx, dy));
            }
            if add_alive && improves(best_add, add, dx, dy) {
                best_add = Some((add, dx, dy));
            }
        }
        self.refb = refb;
        let (sc, sx, sy) = best_sub.expect("window contains (0,0)");
        match best_add {
            Some((ac, ax, ay)) if ac < sc => {
                BlockMatch { mode: Mode::Additive, dx: ax, dy: ay, cost: ac }
            }
            _ => BlockMatch { mode: Mode::Subtractive, dx: sx, dy: sy, cost: sc },
        }
    }
}

/// Searches one block and returns the match with its residual.
pub fn search_block(
    pred: &Plane,
    reference: &Plane,
    rect: BlockRect,
    cfg: &McConfig,
) -> (BlockMatch, Vec<i32>) {
    let m = BlockSearcher::new(cfg).search(pred, reference, rect);
    let residual = residual_block(pred, reference, rect, &m);
    (m, residual)
}

/// `P − R` (subtractive) or `P + R` (additive) at the match offset.
pub fn residual_block(pred: &Plane, reference: &Plane, rect: BlockRect, m: &BlockMatch) -> Vec<i32> {
    let mut rb = Vec::with_capacity(rect.len());
    reference_block(reference, rect, m.dx, m.dy, &mut rb);
    let pb = crate::blocks::extract_block(pred, rect);
    let sign = m.mode.sign();
    pb.iter().zip(&rb).map(|(&p, &r)| p - sign * r).collect()
}

/// Inverse of [`residual_block`]: `residual + R` or `residual − R`.
pub fn recompensate_block(residual: &[i32], m: &BlockMatch, reference: &Plane, rect: BlockRect) -> Vec<i32> {
    let mut rb = Vec::with_capacity(rect.len());
    reference_block(reference, rect, m.dx, m.dy, &mut rb);
    let sign = m.mode.sign();
    residual.iter().zip(&rb).map(|(&d, &r)| d + sign * r).collect()
}

/// Per-block matches of one predictive plane against its reference,
/// row-major over the block grid.
pub fn estimate_plane(pred: &Plane, reference: &Plane, cfg: &McConfig) -> Vec<BlockMatch> {
    assert!(pred.same_shape(reference));
    let grid = BlockGrid::for_plane(pred, cfg.block_size);
    let rows: Vec<Vec<BlockMatch>> = (0..grid.blocks_y())
        .into_par_iter()
        .map_init(
            || BlockSearcher::new(cfg),
            |searcher, by| {
                (0..grid.blocks_x()).map(|bx| searcher.search(pred, reference, grid.rect(bx, by))).collect()
            },
        )
        .collect();
    rows.into_iter().flatten().collect()
}

fn residual_range(pred: &Plane, reference: &Plane) -> ValueRange {
    ValueRange::symmetric(pred.range().max.abs().max(pred.range().min.abs())
        + reference.range().max.abs().max(reference.range().min.abs()))
}

/// Replacement step: the residual plane for `matches`.
pub fn apply_plane(pred: &Plane, reference: &Plane, matches: &[BlockMatch], block_size: usize) -> Plane {
    let grid = BlockGrid::for_plane(pred, block_size);
    assert_eq!(matches.len(), grid.count());
    let mut out = vec![0i32; pred.samples().len()];
    for (i, m) in matches.iter().enumerate() {
        let rect = grid.rect_at(i);
        let res = residual_block(pred, reference, rect, m);
        for (row, chunk) in res.chunks_exact(rect.w).enumerate() {
            let start = (rect.y + row) * pred.width() + rect.x;
            out[start..start + rect.w].copy_from_slice(chunk);
        }
    }
    Plane::new(pred.width(), pred.height(), out, residual_range(pred, reference)).expect("bounded residual")
}

/// Inverse of [`apply_plane`].
pub fn recompensate_plane(residual: &Plane, reference: &Plane, matches: &[BlockMatch], block_size: usize, range: ValueRange) -> Plane {
    let grid = BlockGrid::for_plane(residual, block_size);
    let mut out = vec![0i32; residual.samples().len()];
    for (i, m) in matches.iter().enumerate() {
        let rect = grid.rect_at(i);
        let res = crate::blocks::extract_block(residual, rect);
        let block = recompensate_block(&res, m, reference, rect);
        for (row, chunk) in block.chunks_exact(rect.w).enumerate() {
            let start = (rect.y + row) * residual.width() + rect.x;
            out[start..start + rect.w].copy_from_slice(chunk);
        }
    }
    Plane::new(residual.width(), residual.height(), out, range).expect("reconstruction within the original range")
}

/// Motion search results for one level, tau independent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LevelMotion {
    pub roles: Vec<ClusterRoles>,
    /// `matches[cluster][member]`: block matches for predictive members,
    /// empty for the reference.
    pub matches: Vec<Vec<Vec<BlockMatch>>>,
}

impl LevelMotion {
    /// Motion records of one predictive member.
    pub fn records(&self, cluster: usize, member: usize, grid: BlockGrid) -> Vec<MotionRecord> {
        self.matches[cluster][member]
            .iter()
            .enumerate()
            .map(|(i, m)| MotionRecord {
                mode: m.mode,
                dx: m.dx,
                dy: m.dy,
                block_index: (i % grid.blocks_x(), i / grid.blocks_x()),
                ref_id: cluster,
            })
            .collect()
    }
}

pub fn estimate_level(level: &Level, cfg: &McConfig) -> LevelMotion {
    let roles = select_references(level, cfg.reference);
    let matches = level
        .clusters
        .iter()
        .zip(&roles)
        .map(|(c, r)| estimate_cluster(c, r, cfg))
        .collect();
    LevelMotion { roles, matches }
}

fn estimate_cluster(cluster: &SrvCluster, roles: &ClusterRoles, cfg: &McConfig) -> Vec<Vec<BlockMatch>> {
    let reference = &cluster.members[roles.reference].plane;
    cluster
        .members
        .iter()
        .enumerate()
        .map(|(i, m)| if i == roles.reference { Vec::new() } else { estimate_plane(&m.plane, reference, cfg) })
        .collect()
}

/// A motion-compensated SRV.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum McPlane {
    Reference(Plane),
    Residual { plane: Plane, matches: Vec<BlockMatch> },
}

impl McPlane {
    pub fn plane(&self) -> &Plane {
        match self {
            McPlane::Reference(p) | McPlane::Residual { plane: p, .. } => p,
        }
    }
}

/// A level after the replacement step; same cluster structure as the input.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct McLevel {
    pub block_size: usize,
    /// `clusters[c][m]` mirrors `Level::clusters[c].members[m]`.
    pub clusters: Vec<Vec<McPlane>>,
    /// Declared ranges of the original SRVs, for inversion.
    ranges: Vec<Vec<ValueRange>>,
}

/// Replacement step with residuals taken against `references[cluster]`
/// (the level's own reference SRVs, or their reconstructions).
pub fn apply_level(level: &Level, motion: &LevelMotion, references: &[&Plane], block_size: usize) -> McLevel {
    let clusters: Vec<Vec<McPlane>> = level
        .clusters
        .par_iter()
        .enumerate()
        .map(|(ci, c)| {
            let roles = &motion.roles[ci];
            c.members
                .iter()
                .enumerate()
                .map(|(mi, m)| {
                    if mi == roles.reference {
                        McPlane::Reference(m.plane.clone())
                    } else {
                        let matches = motion.matches[ci][mi].clone();
                        let plane = apply_plane(&m.plane, references[ci], &matches, block_size);
                        McPlane::Residual { plane, matches }
                    }
                })
                .collect()
        })
        .collect();
    let ranges = level.clusters.iter().map(|c| c.members.iter().map(|m| m.plane.range()).collect()).collect();
    McLevel { block_size, clusters, ranges }
}

/// Search plus replacement against the level's own references.
pub fn compensate_level(level: &Level, cfg: &McConfig) -> McLevel {
    let motion = estimate_level(level, cfg);
    let refs: Vec<&Plane> =
        level.clusters.iter().zip(&motion.roles).map(|(c, r)| &c.members[r.reference].plane).collect();
    apply_level(level, &motion, &refs, cfg.block_size)
}

impl McLevel {
    /// Undoes the replacement step: `recompensate(compensate(level))`
    /// returns every SRV of `level`, in cluster/member order.
    pub fn recompensate(&self) -> Vec<Vec<Plane>> {
        self.clusters
            .iter()
            .zip(&self.ranges)
            .map(|(members, ranges)| {
                let reference = members
                    .iter()
                    .find_map(|m| match m {
                        McPlane::Reference(p) => Some(p),
                        _ => None,
                    })
                    .expect("each cluster has a reference");
                members
                    .iter()
                    .zip(ranges)
                    .map(|(m, &range)| match m {
                        McPlane::Reference(p) => p.clone(),
                        McPlane::Residual { plane, matches } => {
                            recompensate_plane(plane, reference, matches, self.block_size, range)
                        }
                    })
                    .collect()
            })
            .collect()
    }
}

/// Debug dump, one row per predictive block:
/// `level,cluster,member,block,mode,dx,dy,delta`.
pub fn write_motion_csv<W: Write>(levels: &[LevelMotion], mut out: W) -> std::io::Result<()> {
    writeln!(out, "level,cluster,member,block,mode,dx,dy,delta")?;
    for (l, lm) in levels.iter().enumerate() {
        for (c, members) in lm.matches.iter().enumerate() {
            for (m, matches) in members.iter().enumerate() {
                for (b, bm) in matches.iter().enumerate() {
                    let mode = match bm.mode {
                        Mode::Subtractive => "sub",
                        Mode::Additive => "add",
                    };
                    writeln!(out, "{l},{c},{m},{b},{mode},{},{},{}", bm.dx, bm.dy, bm.cost)?;
                }
            }
        }
    }
    Ok(())
}
