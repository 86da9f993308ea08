//! Hierarchical, motion-compensated light-field compression with random
//! access decoding and novel-view rendering.

pub mod bise;
pub mod blocks;
pub mod container;
pub mod decoder;
pub mod hierarchy;
pub mod harness;
pub mod lfcore;
pub mod motion;
pub mod renderer;

pub use container::{encode, EncodeParams, MvPolicy};
pub use decoder::{DecodeError, DecoderState};
pub use lfcore::{LightField, Plane, PlaneGrid, ValueRange};
