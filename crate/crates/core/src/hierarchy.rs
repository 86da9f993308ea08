//! Representative key view (RKV) / sparse residual view (SRV) hierarchy.
//!
//! Each level tiles its input grid of planes into 2×2 clusters. A cluster's
//! RKV is the per-pixel mean of its members and each member's SRV is the
//! exact difference `member - rkv`. The RKVs of one level are the inputs of
//! the next. Odd grid dimensions replicate the last row/column into the
//! padded tile; replicated slots take part in the mean but never produce an
//! SRV.
//!
//! A leaf plane is recovered exactly as the top RKV above it plus the SRVs
//! on the path down:
//! `plane(s,t) = top(s>>h, t>>h) + Σ_L srv_L(s>>L, t>>L)`.

use std::path::Path;

use image::{GrayImage, Luma};
use rayon::prelude::*;

use crate::lfcore::{div_round_half_away, Plane, PlaneGrid, ValueRange};

/// Cluster edge length along both grid axes.
pub const CLUSTER_FACTOR: usize = 2;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum HierarchyError {
    #[error("tree height {height} outside 1..={max} for a {grid_s}x{grid_t} grid")]
    Height { height: usize, max: usize, grid_s: usize, grid_t: usize },
    #[error("cluster members have different shapes")]
    ShapeMismatch,
    #[error("weight vector has {got} entries for {members} members")]
    Weights { got: usize, members: usize },
}

/// One slot of a 2×2 tile.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TileSlot {
    /// Position the slot occupies in the tile (may lie past the grid edge).
    pub virtual_pos: (usize, usize),
    /// Grid position whose plane fills the slot.
    pub source: (usize, usize),
    pub padded: bool,
}

/// A 2×2 tile of grid positions, addressed by its position in the next level.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterTile {
    pub cs: usize,
    pub ct: usize,
    pub slots: Vec<TileSlot>,
}

impl ClusterTile {
    /// Real (non-padded) members, in slot order.
    pub fn members(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.slots.iter().filter(|s| !s.padded).map(|s| s.source)
    }
}

/// Dimensions of the clustered grid above a `grid_s × grid_t` grid.
pub fn clustered_dims(grid_s: usize, grid_t: usize) -> (usize, usize) {
    (grid_s.div_ceil(CLUSTER_FACTOR), grid_t.div_ceil(CLUSTER_FACTOR))
}

/// Tiles a `grid_s × grid_t` grid into non-overlapping 2×2 clusters, row-major
/// by cluster, slots row-major (`t` outer) within a cluster.
pub fn cluster_planes(grid_s: usize, grid_t: usize) -> Vec<ClusterTile> {
    let (cs_n, ct_n) = clustered_dims(grid_s, grid_t);
    let mut tiles = Vec::with_capacity(cs_n * ct_n);
    for ct in 0..ct_n {
        for cs in 0..cs_n {
            let mut slots = Vec::with_capacity(CLUSTER_FACTOR * CLUSTER_FACTOR);
            for dt in 0..CLUSTER_FACTOR {
                for ds in 0..CLUSTER_FACTOR {
                    let (s, t) = (cs * CLUSTER_FACTOR + ds, ct * CLUSTER_FACTOR + dt);
                    let source = (s.min(grid_s - 1), t.min(grid_t - 1));
                    slots.push(TileSlot { virtual_pos: (s, t), source, padded: source != (s, t) });
                }
            }
            tiles.push(ClusterTile { cs, ct, slots });
        }
    }
    tiles
}

/// Per-pixel integer-weighted mean, rounded half away from zero.
pub fn compute_rkv_weighted(members: &[&Plane], weights: &[u32]) -> Result<Plane, HierarchyError> {
    if weights.len() != members.len() {
        return Err(HierarchyError::Weights { got: weights.len(), members: members.len() });
    }
    let first = members.first().ok_or(HierarchyError::Weights { got: 0, members: 0 })?;
    if members.iter().any(|m| !m.same_shape(first)) {
        return Err(HierarchyError::ShapeMismatch);
    }
    let total: i64 = weights.iter().map(|&w| w as i64).sum();
    assert!(total > 0, "weights must not all be zero");
    let mut acc = vec![0i64; first.samples().len()];
    for (m, &w) in members.iter().zip(weights) {
        for (a, &v) in acc.iter_mut().zip(m.samples()) {
            *a += v as i64 * w as i64;
        }
    }
    let range = ValueRange::new(
        members.iter().map(|m| m.range().min).min().unwrap_or(0),
        members.iter().map(|m| m.range().max).max().unwrap_or(0),
    );
    let samples = acc.into_iter().map(|a| div_round_half_away(a, total) as i32).collect();
    Ok(Plane::new(first.width(), first.height(), samples, range).expect("mean stays in range"))
}

/// Uniform mean of the cluster members.
pub fn compute_rkv(members: &[&Plane]) -> Result<Plane, HierarchyError> {
    compute_rkv_weighted(members, &vec![1; members.len()])
}

/// `member - rkv`, declared over `[-R, R]` with `R` the member range width.
pub fn compute_srv(member: &Plane, rkv: &Plane) -> Plane {
    assert!(member.same_shape(rkv));
    let r = member.range().width().max(rkv.range().width());
    let samples = member.samples().iter().zip(rkv.samples()).map(|(a, b)| a - b).collect();
    Plane::new(member.width(), member.height(), samples, ValueRange::symmetric(r))
        .expect("difference of two in-range samples")
}

/// One SRV with the grid position (in its level's input grid) it encodes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SrvMember {
    pub s: usize,
    pub t: usize,
    pub plane: Plane,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SrvCluster {
    /// Position of the owning RKV in the level's RKV grid.
    pub parent: (usize, usize),
    pub members: Vec<SrvMember>,
}

pub fn compute_srvs(tile: &ClusterTile, planes: &PlaneGrid, rkv: &Plane) -> SrvCluster {
    let members = tile
        .members()
        .map(|(s, t)| SrvMember { s, t, plane: compute_srv(planes.plane(s, t), rkv) })
        .collect();
    SrvCluster { parent: (tile.cs, tile.ct), members }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Level {
    /// Dimensions of the grid this level clusters.
    pub input_dims: (usize, usize),
    /// RKV grid, `clustered_dims(input_dims)`, row-major.
    pub rkvs: PlaneGrid,
    pub clusters: Vec<SrvCluster>,
    /// `(cluster, member)` for each input position, row-major.
    lookup: Vec<(usize, usize)>,
}

impl Level {
    pub fn build(inputs: &PlaneGrid) -> Level {
        let (gs, gt) = (inputs.grid_s(), inputs.grid_t());
        let tiles = cluster_planes(gs, gt);
        let built: Vec<(Plane, SrvCluster)> = tiles
            .par_iter()
            .map(|tile| {
                let slot_planes: Vec<&Plane> =
                    tile.slots.iter().map(|sl| inputs.plane(sl.source.0, sl.source.1)).collect();
                let rkv = compute_rkv(&slot_planes).expect("grid planes share a shape");
                let srvs = compute_srvs(tile, inputs, &rkv);
                (rkv, srvs)
            })
            .collect();
        let (rkvs, clusters): (Vec<_>, Vec<_>) = built.into_iter().unzip();
        let (rs, rt) = clustered_dims(gs, gt);
        let mut lookup = vec![(0, 0); gs * gt];
        for (ci, c) in clusters.iter().enumerate() {
            for (mi, m) in c.members.iter().enumerate() {
                lookup[m.t * gs + m.s] = (ci, mi);
            }
        }
        Level { input_dims: (gs, gt), rkvs: PlaneGrid::new(rs, rt, rkvs), clusters, lookup }
    }

    /// SRV of input position `(s, t)`.
    pub fn srv(&self, s: usize, t: usize) -> &Plane {
        let (c, m) = self.lookup[t * self.input_dims.0 + s];
        &self.clusters[c].members[m].plane
    }

    pub fn cluster_of(&self, s: usize, t: usize) -> (usize, usize) {
        self.lookup[t * self.input_dims.0 + s]
    }

    pub fn srv_count(&self) -> usize {
        self.lookup.len()
    }
}

/// Largest admissible tree height for a grid.
pub fn max_height(grid_s: usize, grid_t: usize) -> usize {
    grid_s.min(grid_t).max(1).ilog2() as usize
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HierarchyTree {
    leaf_dims: (usize, usize),
    levels: Vec<Level>,
}

impl HierarchyTree {
    pub fn height(&self) -> usize {
        self.levels.len()
    }

    /// Levels ordered bottom (0) to top.
    pub fn levels(&self) -> &[Level] {
        &self.levels
    }

    pub fn top_rkvs(&self) -> &PlaneGrid {
        &self.levels.last().expect("height >= 1").rkvs
    }

    pub fn leaf_dims(&self) -> (usize, usize) {
        self.leaf_dims
    }

    /// Exact leaf reconstruction from the top RKV and the SRV path.
    pub fn reconstruct(&self, s: usize, t: usize) -> Plane {
        let h = self.height();
        let top = self.top_rkvs().plane(s >> h, t >> h);
        let mut acc: Vec<i32> = top.samples().to_vec();
        for (l, level) in self.levels.iter().enumerate() {
            let srv = level.srv(s >> l, t >> l);
            for (a, v) in acc.iter_mut().zip(srv.samples()) {
                *a += v;
            }
        }
        let range = self.levels[0].rkvs.planes()[0].range();
        Plane::new(top.width(), top.height(), acc, range).expect("exact reconstruction")
    }
}

/// Builds the hierarchy of one channel bottom-up.
pub fn build_tree(grid: &PlaneGrid, height: usize) -> Result<HierarchyTree, HierarchyError> {
    let (gs, gt) = (grid.grid_s(), grid.grid_t());
    let max = max_height(gs, gt);
    if height < 1 || height > max {
        return Err(HierarchyError::Height { height, max, grid_s: gs, grid_t: gt });
    }
    let mut levels: Vec<Level> = Vec::with_capacity(height);
    for l in 0..height {
        let level = Level::build(if l == 0 { grid } else { &levels[l - 1].rkvs });
        levels.push(level);
    }
    Ok(HierarchyTree { leaf_dims: (gs, gt), levels })
}

fn to_gray(plane: &Plane, bias: i32, span: i32) -> GrayImage {
    let span = span.max(1) as i64;
    GrayImage::from_fn(plane.width() as u32, plane.height() as u32, |x, y| {
        let v = (plane.get(x as usize, y as usize) + bias) as i64;
        Luma([(v * 255 / span).clamp(0, 255) as u8])
    })
}

/// Writes every RKV and SRV of a tree as 8-bit grayscale PNGs. SRVs are
/// shifted by `+R` and scaled from `[0, 2R]` for display.
pub fn dump_tree(tree: &HierarchyTree, dir: &Path) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    let save = |img: GrayImage, name: String| {
        img.save(dir.join(name)).map_err(|e| std::io::Error::other(e.to_string()))
    };
    for (l, level) in tree.levels().iter().enumerate() {
        for (i, rkv) in level.rkvs.planes().iter().enumerate() {
            let (s, t) = (i % level.rkvs.grid_s(), i / level.rkvs.grid_s());
            let r = rkv.range();
            save(to_gray(rkv, -r.min, r.width()), format!("level{l}_rkv_{t:02}_{s:02}.png"))?;
        }
        for c in &level.clusters {
            for m in &c.members {
                let r = m.plane.range().max;
                save(to_gray(&m.plane, r, 2 * r), format!("level{l}_srv_{:02}_{:02}.png", m.t, m.s))?;
            }
        }
    }
    Ok(())
}
