use rayon::prelude::*;

use super::format::{channel_layout, channel_plane_dims, write_channel_section, ChannelLayout, Header, SlotData, SlotMotion};
use super::rkv::encode_rkv;
use super::{threshold_blocks, EncodeError, EncodeParams, MvPolicy, FORMAT_VERSION};
use crate::blocks::{block_energy, extract_block};
use crate::hierarchy::{build_tree, HierarchyTree};
use crate::lfcore::{forward_color, LightField, Plane};
use crate::motion::{estimate_level, residual_block, LevelMotion, McConfig};

struct ChannelAnalysis {
    tree: HierarchyTree,
    /// Per level, bottom first; `None` with the motion stage disabled.
    motion: Vec<Option<LevelMotion>>,
    layout: ChannelLayout,
}

/// Trees and motion searches of a light field. Depends only on the
/// structural parameters, so one analysis serves any thresholds.
pub struct Analysis {
    params: EncodeParams,
    grid: (usize, usize),
    dims: (usize, usize),
    channels: Vec<ChannelAnalysis>,
}

pub fn analyze(field: &LightField, params: &EncodeParams) -> Result<Analysis, EncodeError> {
    params.validate()?;
    if field.grid_s() > u16::MAX as usize || field.grid_t() > u16::MAX as usize {
        return Err(EncodeError::TooLarge(format!("{}x{} grid", field.grid_s(), field.grid_t())));
    }
    if field.width() > u32::MAX as usize || field.height() > u32::MAX as usize {
        return Err(EncodeError::TooLarge(format!("{}x{} views", field.width(), field.height())));
    }
    let mc = McConfig {
        block_size: params.block_size,
        window: params.window,
        reference: params.reference,
        phase_shift: params.phase_shift,
    };
    let grids = forward_color(field, params.color);
    let mut channels = Vec::with_capacity(grids.len());
    for (c, grid) in grids.iter().enumerate() {
        let tree = build_tree(grid, params.tree_height)?;
        let motion = tree.levels().iter().map(|l| params.motion.then(|| estimate_level(l, &mc))).collect();
        let dims = channel_plane_dims(params.color, c, field.width(), field.height());
        let layout = channel_layout(
            (field.grid_s(), field.grid_t()),
            params.tree_height,
            dims,
            params.block_size,
            params.reference,
            params.motion,
        );
        channels.push(ChannelAnalysis { tree, motion, layout });
    }
    Ok(Analysis { params: *params, grid: (field.grid_s(), field.grid_t()), dims: (field.width(), field.height()), channels })
}

/// Analyzes and encodes in one step.
pub fn encode(field: &LightField, params: &EncodeParams) -> Result<Vec<u8>, EncodeError> {
    analyze(field, params)?.encode_with(params)
}

impl Analysis {
    pub fn params(&self) -> &EncodeParams {
        &self.params
    }

    pub fn encode(&self, tau_ref: u32, tau_res: u32) -> Result<Vec<u8>, EncodeError> {
        self.encode_with(&EncodeParams { tau_ref, tau_res, ..self.params })
    }

    /// Encodes with `params`, which may differ from the analysis only in
    /// the thresholds, motion-record policy, loop mode and RKV codec.
    pub fn encode_with(&self, params: &EncodeParams) -> Result<Vec<u8>, EncodeError> {
        let structural = EncodeParams {
            tau_ref: self.params.tau_ref,
            tau_res: self.params.tau_res,
            mv_policy: self.params.mv_policy,
            closed_loop: self.params.closed_loop,
            rkv_codec: self.params.rkv_codec,
            ..*params
        };
        if structural != self.params {
            return Err(EncodeError::AnalysisMismatch);
        }
        let sections = self
            .channels
            .iter()
            .map(|ch| encode_channel(ch, params))
            .collect::<Result<Vec<_>, _>>()?;
        let mut header = Header {
            version: FORMAT_VERSION,
            grid_s: self.grid.0,
            grid_t: self.grid.1,
            width: self.dims.0,
            height: self.dims.1,
            params: *params,
            channels: Vec::new(),
        };
        let mut offset = super::HEADER_FIXED_LEN + 8 * sections.len();
        for s in &sections {
            header.channels.push((offset, s.len()));
            offset += s.len();
        }
        if offset > u32::MAX as usize {
            return Err(EncodeError::TooLarge(format!("{offset} byte stream")));
        }
        let mut out = Vec::with_capacity(offset);
        header.write(&mut out);
        for s in sections {
            out.extend(s);
        }
        Ok(out)
    }
}

fn encode_channel(ch: &ChannelAnalysis, params: &EncodeParams) -> Result<Vec<u8>, EncodeError> {
    let layout = &ch.layout;
    let levels = ch.tree.levels();
    let srv = |i: usize| {
        let info = layout.slots[i];
        &levels[info.level].clusters[info.cluster].members[info.member].plane
    };
    let thresholded: Vec<Option<(Vec<bool>, Plane)>> = (0..layout.slots.len())
        .into_par_iter()
        .map(|i| {
            (layout.slots[i].reference_slot.is_none()).then(|| {
                let (map, plane) = threshold_blocks(srv(i), params.tau_ref, params.block_size);
                (map.bits, plane)
            })
        })
        .collect();
    let slots: Vec<SlotData> = (0..layout.slots.len())
        .into_par_iter()
        .map(|i| {
            let info = layout.slots[i];
            match info.reference_slot {
                None => {
                    let (sig, plane) = thresholded[i].as_ref().expect("reference slot");
                    let values = significant_values(plane, sig, layout);
                    let sig = if sig.iter().any(|&b| b) { sig.clone() } else { Vec::new() };
                    SlotData { sig, values, motion: None }
                }
                Some(r) => {
                    let reference = if params.closed_loop {
                        &thresholded[r].as_ref().expect("reference slot").1
                    } else {
                        srv(r)
                    };
                    let matches = &ch.motion[info.level].as_ref().expect("motion enabled").matches[info.cluster]
                        [info.member];
                    encode_predictive(srv(i), reference, matches, layout, params)
                }
            }
        })
        .collect();
    let rkvs = ch
        .tree
        .top_rkvs()
        .planes()
        .iter()
        .map(|p| encode_rkv(params.rkv_codec, p))
        .collect::<Result<Vec<_>, _>>()
        .map_err(EncodeError::Rkv)?;
    write_channel_section(&rkvs, &slots, params.mv_policy).map_err(EncodeError::TooLarge)
}

fn significant_values(plane: &Plane, sig: &[bool], layout: &ChannelLayout) -> Vec<i32> {
    let mut out = Vec::new();
    for (i, _) in sig.iter().enumerate().filter(|(_, &s)| s) {
        out.extend(extract_block(plane, layout.blocks.rect_at(i)));
    }
    out
}

fn encode_predictive(
    pred: &Plane,
    reference: &Plane,
    matches: &[crate::motion::BlockMatch],
    layout: &ChannelLayout,
    params: &EncodeParams,
) -> SlotData {
    let tau = params.tau_res as u64;
    let n = layout.blocks.count();
    let mut sig = vec![false; n];
    let mut values = Vec::new();
    let mut records = Vec::new();
    let mut bitmap = vec![false; n];
    for (i, m) in matches.iter().enumerate() {
        let rect = layout.blocks.rect_at(i);
        let residual = residual_block(pred, reference, rect, m);
        let e_res = block_energy(&residual);
        match params.mv_policy {
            MvPolicy::All => {
                records.push(*m);
                if e_res >= tau {
                    sig[i] = true;
                    values.extend(residual);
                }
            }
            MvPolicy::DropInsignificant => {
                if e_res >= tau {
                    sig[i] = true;
                    records.push(*m);
                    values.extend(residual);
                }
            }
            MvPolicy::Adaptive => {
                let block = extract_block(pred, rect);
                let e_srv = block_energy(&block);
                if e_srv < tau {
                    continue;
                }
                if e_res < e_srv {
                    bitmap[i] = true;
                    records.push(*m);
                    if e_res >= tau {
                        sig[i] = true;
                        values.extend(residual);
                    }
                } else {
                    sig[i] = true;
                    values.extend(block);
                }
            }
        }
    }
    if !sig.iter().any(|&b| b) {
        sig.clear();
    }
    let motion = Some(SlotMotion {
        bitmap: (params.mv_policy == MvPolicy::Adaptive).then_some(bitmap),
        records,
    });
    SlotData { sig, values, motion }
}
