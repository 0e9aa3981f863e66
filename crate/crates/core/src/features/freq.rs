use std::f64::consts::PI;
use std::sync::OnceLock;

use super::luma::{luma_grid, resample_area, LumaGrid};
use super::Part;
use crate::imgscan::PixelBuffer;

pub const DCT_SIZE: usize = 32;
pub const FREQ_DIM: usize = 21;

fn dct_matrix() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let n = DCT_SIZE as f64;
        let mut m = vec![0.0; DCT_SIZE * DCT_SIZE];
        for k in 0..DCT_SIZE {
            let alpha = if k == 0 { (1.0 / n).sqrt() } else { (2.0 / n).sqrt() };
            for x in 0..DCT_SIZE {
                m[k * DCT_SIZE + x] = alpha * (PI * (2 * x + 1) as f64 * k as f64 / (2.0 * n)).cos();
            }
        }
        m
    })
}

/// Orthonormal 2-D DCT-II of a 32×32 row-major block, computed separably.
/// Output index is `v * 32 + u` where `u` is the horizontal frequency.
pub fn dct2_32(block: &[f64]) -> Vec<f64> {
    assert_eq!(block.len(), DCT_SIZE * DCT_SIZE);
    let d = dct_matrix();
    let n = DCT_SIZE;
    // Rows: tmp[y][u] = Σ_x d[u][x] · block[y][x]
    let mut tmp = vec![0.0; n * n];
    for y in 0..n {
        let row = &block[y * n..(y + 1) * n];
        for u in 0..n {
            let basis = &d[u * n..(u + 1) * n];
            tmp[y * n + u] = basis.iter().zip(row).map(|(a, b)| a * b).sum();
        }
    }
    // Columns: out[v][u] = Σ_y d[v][y] · tmp[y][u]
    let mut out = vec![0.0; n * n];
    for v in 0..n {
        let basis = &d[v * n..(v + 1) * n];
        for u in 0..n {
            out[v * n + u] = (0..n).map(|y| basis[y] * tmp[y * n + u]).sum();
        }
    }
    out
}

/// `(v, u)` pairs of the first [`FREQ_DIM`] AC coefficients in JPEG zigzag
/// order. These are the full triangle `u + v ≤ 5` without DC (20 entries)
/// followed by the first entry of the next diagonal.
pub fn zigzag_ac_indices() -> Vec<(usize, usize)> {
    let mut order = Vec::new();
    'outer: for s in 0.. {
        let diag: Vec<(usize, usize)> = if s % 2 == 1 {
            (0..=s).map(|row| (row, s - row)).collect()
        } else {
            (0..=s).map(|row| (s - row, row)).collect()
        };
        for rc in diag {
            if rc != (0, 0) {
                order.push(rc);
            }
            if order.len() == FREQ_DIM {
                break 'outer;
            }
        }
    }
    order
}

/// Selected DCT magnitudes of an already 32×32 luma block, log1p-mapped
/// and L2-normalized.
pub fn frequency_features_from_block(block: &[f64]) -> Part {
    let coeffs = dct2_32(block);
    let raw: Vec<f64> = zigzag_ac_indices()
        .into_iter()
        .map(|(v, u)| coeffs[v * DCT_SIZE + u].abs().ln_1p())
        .collect();
    Part::normalized(raw)
}

pub fn frequency_features_from_luma(luma: &LumaGrid) -> Part {
    let small = resample_area(luma, DCT_SIZE, DCT_SIZE);
    frequency_features_from_block(&small.data)
}

pub fn frequency_features(pixels: &PixelBuffer) -> Part {
    frequency_features_from_luma(&luma_grid(pixels))
}
