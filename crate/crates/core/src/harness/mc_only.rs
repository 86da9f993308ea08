//! Single-level reference/predictive stand-in codec for comparisons.
//!
//! Views on a `SUBGRID × SUBGRID` lattice are references and are stored
//! losslessly with the RKV codec; every other view is predicted block by
//! block from the reference of its tile (subtractive mode only) and its
//! residual is thresholded and BISE coded like an SRV. The byte count
//! mirrors what a container for this scheme would hold: images, bitmaps,
//! payload ranges, payloads and one motion record per predictive block.

use rayon::prelude::*;

use crate::bise;
use crate::blocks::{block_energy, BlockGrid};
use crate::container::{encode_rkv, EncodeParams, HEADER_FIXED_LEN};
use crate::lfcore::{forward_color, inverse_color, LightField, Plane, PlaneGrid};
use crate::motion::{estimate_plane, recompensate_block, residual_block, BlockMatch, McConfig, ReferenceChoice};

pub const SUBGRID: usize = 4;

/// Motion search results, reusable across thresholds.
pub struct McOnlyAnalysis {
    params: EncodeParams,
    grids: Vec<PlaneGrid>,
    /// `[channel][view]`, empty for references.
    matches: Vec<Vec<Vec<BlockMatch>>>,
    width: usize,
    height: usize,
}

fn reference_of(s: usize, t: usize) -> (usize, usize) {
    (s - s % SUBGRID, t - t % SUBGRID)
}

pub fn analyze(field: &LightField, params: &EncodeParams) -> McOnlyAnalysis {
    let cfg = McConfig { block_size: params.block_size, window: params.window, reference: ReferenceChoice::TopLeft, phase_shift: false };
    let grids = forward_color(field, params.color);
    let gs = field.grid_s();
    let matches = grids
        .iter()
        .map(|g| {
            (0..g.planes().len())
                .into_par_iter()
                .map(|i| {
                    let (s, t) = (i % gs, i / gs);
                    let (rs, rt) = reference_of(s, t);
                    if (rs, rt) == (s, t) {
                        Vec::new()
                    } else {
                        estimate_plane(g.plane(s, t), g.plane(rs, rt), &cfg)
                    }
                })
                .collect()
        })
        .collect();
    McOnlyAnalysis { params: *params, grids, matches, width: field.width(), height: field.height() }
}

impl McOnlyAnalysis {
    /// Stream size in bytes and the reconstructed field at threshold `tau`.
    pub fn encode_decode(&self, tau: u32) -> (usize, LightField) {
        let mut bytes = HEADER_FIXED_LEN;
        let mut out_grids = Vec::with_capacity(self.grids.len());
        for (c, g) in self.grids.iter().enumerate() {
            let gs = g.grid_s();
            let results: Vec<(usize, Plane)> = (0..g.planes().len())
                .into_par_iter()
                .map(|i| {
                    let (s, t) = (i % gs, i / gs);
                    let (rs, rt) = reference_of(s, t);
                    let plane = g.plane(s, t);
                    if (rs, rt) == (s, t) {
                        let png = encode_rkv(self.params.rkv_codec, plane).expect("rkv codec");
                        (png.len() + 4, plane.clone())
                    } else {
                        predict_plane(plane, g.plane(rs, rt), &self.matches[c][i], self.params.block_size, tau)
                    }
                })
                .collect();
            let mut planes = Vec::with_capacity(results.len());
            for (n, p) in results {
                bytes += n;
                planes.push(p);
            }
            out_grids.push(PlaneGrid::new(gs, g.grid_t(), planes));
        }
        (bytes, inverse_color(&out_grids, self.params.color, self.width, self.height))
    }
}

/// Returns the coded size and the reconstruction of one predictive view.
fn predict_plane(pred: &Plane, reference: &Plane, matches: &[BlockMatch], block_size: usize, tau: u32) -> (usize, Plane) {
    let grid = BlockGrid::for_plane(pred, block_size);
    let mut values = Vec::new();
    let mut recon = vec![0i32; pred.samples().len()];
    let mut any = false;
    for (i, m) in matches.iter().enumerate() {
        let rect = grid.rect_at(i);
        let residual = residual_block(pred, reference, rect, m);
        let keep = block_energy(&residual) >= tau as u64;
        let stored: Vec<i32> = if keep { residual.clone() } else { vec![0; rect.len()] };
        let block = recompensate_block(&stored, m, reference, rect);
        for (row, chunk) in block.chunks_exact(rect.w).enumerate() {
            recon[(rect.y + row) * pred.width() + rect.x..][..rect.w].copy_from_slice(chunk);
        }
        if keep {
            any = true;
            values.extend(residual);
        }
    }
    // Bitmap, payload range, payload, then the motion records.
    let mut bytes = 1 + grid.count().div_ceil(8);
    if any {
        let lo = *values.iter().min().expect("non-empty");
        let hi = *values.iter().max().expect("non-empty");
        let shifted: Vec<u32> = values.iter().map(|&v| (v - lo) as u32).collect();
        bytes += 4 + bise::encode(&shifted, (hi - lo + 1) as u32).expect("in range").payload().len();
    }
    let (x0, x1) = matches.iter().fold((i32::MAX, i32::MIN), |(a, b), m| (a.min(m.dx), b.max(m.dx)));
    let (y0, y1) = matches.iter().fold((i32::MAX, i32::MIN), |(a, b), m| (a.min(m.dy), b.max(m.dy)));
    let (nx, ny) = ((x1 - x0 + 1) as u32, (y1 - y0 + 1) as u32);
    let packed: Vec<u32> = matches.iter().map(|m| (m.dy - y0) as u32 * nx + (m.dx - x0) as u32).collect();
    bytes += 4 + bise::encode(&packed, nx * ny).expect("in range").payload().len();
    let range = pred.range();
    let recon = recon.into_iter().map(|v| v.clamp(range.min, range.max)).collect();
    (bytes, Plane::new(pred.width(), pred.height(), recon, range).expect("clamped"))
}
