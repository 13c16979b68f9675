use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_len, invalid, Result};
use crate::model::Signal;

#[derive(Debug, Clone, PartialEq)]
pub enum BlockFill {
    /// Fresh uniform `[0, 1]` values.
    Random,
    /// Row-major `height × width` patch pasted as-is.
    Patch(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub height: usize,
    pub width: usize,
    pub fill: BlockFill,
}

/// Deterministic textured patch with values in `[0, 1]`, a stand-in for a
/// real occluding image.
pub fn synthetic_patch(height: usize, width: usize) -> Vec<f64> {
    let mut v = Vec::with_capacity(height * width);
    for i in 0..height {
        for j in 0..width {
            let (y, x) = (i as f64, j as f64);
            v.push(0.5 + 0.25 * (0.9 * y).sin() * (1.7 * x).cos() + 0.25 * ((0.31 * (x + 2.0 * y)).sin()));
        }
    }
    v
}

/// Overwrites a seeded-random rectangle of the row-major `rows × cols` grid.
pub fn occlusion_block(signal: &Signal, rows: usize, cols: usize, block: &Block, seed: u64) -> Result<Signal> {
    check_len(rows * cols, signal.len())?;
    if block.height > rows || block.width > cols {
        return Err(invalid(
            "block",
            format!("{}x{} block does not fit a {rows}x{cols} grid", block.height, block.width),
        ));
    }
    if let BlockFill::Patch(p) = &block.fill {
        check_len(block.height * block.width, p.len())?;
    }
    let mut out = signal.as_vector().clone();
    if block.height == 0 || block.width == 0 {
        return Signal::from_vector(out);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let top = rng.random_range(0..=rows - block.height);
    let left = rng.random_range(0..=cols - block.width);
    for i in 0..block.height {
        for j in 0..block.width {
            let v = match &block.fill {
                BlockFill::Random => rng.random::<f64>(),
                BlockFill::Patch(p) => p[i * block.width + j],
            };
            out[(top + i) * cols + left + j] = v;
        }
    }
    Signal::from_vector(out)
}
