use super::{LightField, Plane};

const PEAK: f64 = 255.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("shape mismatch: {left:?} vs {right:?}")]
pub struct ShapeMismatch {
    pub left: (usize, usize, usize, usize),
    pub right: (usize, usize, usize, usize),
}

/// `10 log10(255² / mse)`, `+inf` for a perfect match.
pub fn mse_to_psnr(mse: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (PEAK * PEAK / mse).log10()
    }
}

fn sq_err(a: &[i32], b: &[i32]) -> u64 {
    a.iter().zip(b).map(|(&x, &y)| ((x - y) as i64).pow(2) as u64).sum()
}

pub fn psnr_planes(a: &Plane, b: &Plane) -> Result<f64, ShapeMismatch> {
    if !a.same_shape(b) {
        return Err(ShapeMismatch {
            left: (1, 1, a.width(), a.height()),
            right: (1, 1, b.width(), b.height()),
        });
    }
    let n = a.samples().len() as f64;
    Ok(mse_to_psnr(sq_err(a.samples(), b.samples()) as f64 / n))
}

/// PSNR over every sample of every channel of every view.
pub fn psnr(a: &LightField, b: &LightField) -> Result<f64, ShapeMismatch> {
    let shape = |f: &LightField| (f.grid_s(), f.grid_t(), f.width(), f.height());
    if shape(a) != shape(b) {
        return Err(ShapeMismatch { left: shape(a), right: shape(b) });
    }
    let mut total = 0u64;
    let mut count = 0u64;
    for (ca, cb) in a.channels().iter().zip(b.channels()) {
        for (pa, pb) in ca.planes().iter().zip(cb.planes()) {
            total += sq_err(pa.samples(), pb.samples());
            count += pa.samples().len() as u64;
        }
    }
    Ok(mse_to_psnr(total as f64 / count as f64))
}
