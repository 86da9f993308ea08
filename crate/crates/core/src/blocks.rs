//! Non-overlapping block tiling of a plane. Edge blocks are shortened when
//! the block size does not divide the plane.

use crate::lfcore::Plane;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BlockRect {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

impl BlockRect {
    pub fn len(&self) -> usize {
        self.w * self.h
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BlockGrid {
    pub width: usize,
    pub height: usize,
    pub block_size: usize,
}

impl BlockGrid {
    pub fn new(width: usize, height: usize, block_size: usize) -> Self {
        assert!(block_size > 0);
        BlockGrid { width, height, block_size }
    }

    pub fn for_plane(plane: &Plane, block_size: usize) -> Self {
        BlockGrid::new(plane.width(), plane.height(), block_size)
    }

    pub fn blocks_x(&self) -> usize {
        self.width.div_ceil(self.block_size)
    }

    pub fn blocks_y(&self) -> usize {
        self.height.div_ceil(self.block_size)
    }

    pub fn count(&self) -> usize {
        self.blocks_x() * self.blocks_y()
    }

    pub fn index(&self, bx: usize, by: usize) -> usize {
        by * self.blocks_x() + bx
    }

    pub fn rect(&self, bx: usize, by: usize) -> BlockRect {
        let (x, y) = (bx * self.block_size, by * self.block_size);
        debug_assert!(x < self.width && y < self.height);
        BlockRect {
            x,
            y,
            w: self.block_size.min(self.width - x),
            h: self.block_size.min(self.height - y),
        }
    }

    pub fn rect_at(&self, index: usize) -> BlockRect {
        self.rect(index % self.blocks_x(), index / self.blocks_x())
    }

    /// Block containing pixel `(x, y)`.
    pub fn block_of(&self, x: usize, y: usize) -> (usize, usize) {
        (x / self.block_size, y / self.block_size)
    }
}

/// Copies the samples of `rect` out of `plane`, row-major.
pub fn extract_block(plane: &Plane, rect: BlockRect) -> Vec<i32> {
    let mut out = Vec::with_capacity(rect.len());
    for y in rect.y..rect.y + rect.h {
        let row = &plane.samples()[y * plane.width()..][rect.x..rect.x + rect.w];
        out.extend_from_slice(row);
    }
    out
}

/// `Σ |v|` over a block.
pub fn block_energy(samples: &[i32]) -> u64 {
    samples.iter().map(|v| v.unsigned_abs() as u64).sum()
}
