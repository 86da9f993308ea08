//! Thresholding, linearization and serialization of the motion-compensated
//! hierarchy into the random-access `.hmlfc` stream.
//!
//! The byte layout is described in `docs/format.md`. Encoding runs in two
//! phases: [`analyze`] builds the trees and motion searches, which depend
//! only on the structural parameters, and [`Analysis::encode`] thresholds
//! and serializes for a given pair of thresholds. Sweeps over `tau` reuse
//! one analysis.

mod bitmap;
mod encode;
mod format;
mod rkv;

pub use bitmap::RankBitmap;
pub use encode::{analyze, encode, Analysis};
pub use format::{
    channel_layout, parse, parse_header, ChannelIndex, ChannelLayout, Header, MotionEntry, PayloadEntry,
    SlotEntry, SlotInfo, StreamIndex, FORMAT_VERSION, HEADER_FIXED_LEN, MAGIC,
};
pub use rkv::{decode_rkv, encode_rkv, RkvCodec};

use serde::{Deserialize, Serialize};

use crate::blocks::{block_energy, extract_block, BlockGrid};
use crate::hierarchy::HierarchyError;
use crate::lfcore::{ColorConfig, Plane};
use crate::motion::ReferenceChoice;

/// Which predictive blocks carry a motion record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MvPolicy {
    /// Every predictive block; insignificant residuals decode as pure
    /// prediction.
    All,
    /// Only blocks whose residual is significant; the rest decode as zero.
    DropInsignificant,
    /// Per block: zero if the SRV itself is below `tau_res`, otherwise a
    /// record only when the residual has less energy than the SRV.
    #[default]
    Adaptive,
}

impl MvPolicy {
    pub fn to_byte(self) -> u8 {
        match self {
            MvPolicy::All => 0,
            MvPolicy::DropInsignificant => 1,
            MvPolicy::Adaptive => 2,
        }
    }

    pub fn from_byte(b: u8) -> Option<Self> {
        match b {
            0 => Some(MvPolicy::All),
            1 => Some(MvPolicy::DropInsignificant),
            2 => Some(MvPolicy::Adaptive),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct EncodeParams {
    pub tree_height: usize,
    pub block_size: usize,
    pub window: usize,
    pub tau_ref: u32,
    pub tau_res: u32,
    pub color: ColorConfig,
    pub reference: ReferenceChoice,
    pub mv_policy: MvPolicy,
    /// `false` stores every SRV directly (hierarchy only, no motion stage).
    pub motion: bool,
    pub phase_shift: bool,
    /// Predictive residuals are taken against the thresholded reference
    /// the decoder will see, instead of the original one. Removes drift
    /// but makes the stream size depend on `tau_ref` non-monotonically.
    pub closed_loop: bool,
    pub rkv_codec: RkvCodec,
}

impl Default for EncodeParams {
    fn default() -> Self {
        EncodeParams {
            tree_height: 3,
            block_size: 4,
            window: 16,
            tau_ref: 75,
            tau_res: 75,
            color: ColorConfig::default(),
            reference: ReferenceChoice::TopLeft,
            mv_policy: MvPolicy::default(),
            motion: true,
            phase_shift: true,
            closed_loop: false,
            rkv_codec: RkvCodec::Png,
        }
    }
}

impl EncodeParams {
    pub fn lossless() -> Self {
        EncodeParams { tau_ref: 0, tau_res: 0, ..Default::default() }
    }

    pub fn with_tau(self, tau: u32) -> Self {
        EncodeParams { tau_ref: tau, tau_res: tau, ..self }
    }

    /// Checks everything that can be checked without the light field.
    pub fn validate(&self) -> Result<(), EncodeError> {
        if !crate::motion::McConfig::BLOCK_SIZES.contains(&self.block_size) {
            return Err(EncodeError::Param(format!("block size {} not in {{2,4,8,16}}", self.block_size)));
        }
        if self.window > 127 {
            return Err(EncodeError::Param(format!("window {} exceeds 127", self.window)));
        }
        if self.tree_height == 0 {
            return Err(EncodeError::Param("tree height must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum EncodeError {
    #[error("invalid parameter: {0}")]
    Param(String),
    #[error(transparent)]
    Hierarchy(#[from] HierarchyError),
    #[error("light field too large for the container: {0}")]
    TooLarge(String),
    #[error("rkv codec: {0}")]
    Rkv(String),
    #[error("analysis was built with different structural parameters")]
    AnalysisMismatch,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("stream truncated: need {need} bytes, have {have}")]
    Truncated { need: usize, have: usize },
    #[error("bad magic {0:02x?}")]
    Magic([u8; 4]),
    #[error("unsupported format version {found}, expected {expected}")]
    Version { found: u16, expected: u16 },
    #[error("corrupt stream: {0}")]
    Corrupt(String),
}

/// One bit per block of a plane, row-major over the block grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignificanceMap {
    pub grid: BlockGrid,
    pub bits: Vec<bool>,
}

impl SignificanceMap {
    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        self.count() == 0
    }
}

/// Marks blocks with `Σ|v| ≥ tau` significant and zeroes the rest. Returns
/// the map and the thresholded plane.
pub fn threshold_blocks(plane: &Plane, tau: u32, block_size: usize) -> (SignificanceMap, Plane) {
    let grid = BlockGrid::for_plane(plane, block_size);
    let mut out = plane.samples().to_vec();
    let bits = (0..grid.count())
        .map(|i| {
            let rect = grid.rect_at(i);
            let keep = block_energy(&extract_block(plane, rect)) >= tau as u64;
            if !keep {
                for y in rect.y..rect.y + rect.h {
                    out[y * plane.width() + rect.x..][..rect.w].fill(0);
                }
            }
            keep
        })
        .collect();
    let thresholded = Plane::new(plane.width(), plane.height(), out, plane.range()).expect("zeroing stays in range");
    (SignificanceMap { grid, bits }, thresholded)
}

/// Bits per pixel of a stream of `bytes` bytes for a field of `pixels` pixels.
pub fn bpp(bytes: usize, pixels: u64) -> f64 {
    bytes as f64 * 8.0 / pixels as f64
}
