use std::f64::consts::PI;

use super::luma::{luma_grid, LumaGrid};
use super::{hellinger, Part};
use crate::imgscan::PixelBuffer;

pub const ORIENTATION_BINS: usize = 8;
/// 2×2 spatial cells plus one global cell.
pub const EDGE_CELLS: usize = 5;
pub const EDGE_DIM: usize = ORIENTATION_BINS * EDGE_CELLS;

/// Unsigned orientation in `[0, π)` mapped to one of eight equal bins.
fn orientation_bin(gx: f64, gy: f64) -> usize {
    let mut theta = gy.atan2(gx);
    if theta < 0.0 {
        theta += PI;
    }
    if theta >= PI {
        theta -= PI;
    }
    ((theta / (PI / ORIENTATION_BINS as f64)) as usize).min(ORIENTATION_BINS - 1)
}

/// Magnitude-weighted orientation histograms before normalization.
/// Gradients are central differences with replicated borders. Layout is
/// `cell * 8 + bin`, with cells 0..4 the quadrants in row-major order and
/// cell 4 the whole image.
pub fn edge_histogram_raw(luma: &LumaGrid) -> [f64; EDGE_DIM] {
    let (w, h) = (luma.width, luma.height);
    let mut hist = [0.0; EDGE_DIM];
    for y in 0..h {
        let (up, down) = (y.saturating_sub(1), (y + 1).min(h - 1));
        let cy = y * 2 / h;
        for x in 0..w {
            let (left, right) = (x.saturating_sub(1), (x + 1).min(w - 1));
            let gx = (luma.at(right, y) - luma.at(left, y)) / 2.0;
            let gy = (luma.at(x, down) - luma.at(x, up)) / 2.0;
            let mag = (gx * gx + gy * gy).sqrt();
            if mag == 0.0 {
                continue;
            }
            let bin = orientation_bin(gx, gy);
            let cell = cy * 2 + x * 2 / w;
            hist[cell * ORIENTATION_BINS + bin] += mag;
            hist[4 * ORIENTATION_BINS + bin] += mag;
        }
    }
    hist
}

pub(crate) fn edge_histogram_from_luma(luma: &LumaGrid) -> Part {
    hellinger(edge_histogram_raw(luma).to_vec())
}

pub fn edge_histogram(pixels: &PixelBuffer) -> Part {
    edge_histogram_from_luma(&luma_grid(pixels))
}
