use crate::imgscan::PixelBuffer;

/// Row-major luma plane with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LumaGrid {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl LumaGrid {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), width * height);
        LumaGrid { width, height, data }
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }
}

/// Rec. 601 luma.
pub fn luma_grid(pixels: &PixelBuffer) -> LumaGrid {
    let data = pixels
        .pixels()
        .map(|p| (0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64) / 255.0)
        .collect();
    LumaGrid::new(pixels.width() as usize, pixels.height() as usize, data)
}

/// `weights[t][s]`: share of source sample `s` in target cell `t`, where
/// target cell `t` spans `[t·n/m, (t+1)·n/m)` in source coordinates.
fn axis_weights(src: usize, dst: usize) -> Vec<Vec<(usize, f64)>> {
    let step = src as f64 / dst as f64;
    (0..dst)
        .map(|t| {
            let lo = t as f64 * step;
            let hi = (t + 1) as f64 * step;
            let first = lo.floor() as usize;
            let last = (hi.ceil() as usize).min(src);
            (first..last)
                .filter_map(|s| {
                    let overlap = (hi.min(s as f64 + 1.0) - lo.max(s as f64)).max(0.0);
                    (overlap > 0.0).then_some((s, overlap / step))
                })
                .collect()
        })
        .collect()
}

/// Area-averaging resample to `width × height`; works for both shrinking
/// and enlarging.
pub fn resample_area(src: &LumaGrid, width: usize, height: usize) -> LumaGrid {
    let wx = axis_weights(src.width, width);
    let wy = axis_weights(src.height, height);

    // Horizontal pass: src.height × width.
    let mut tmp = vec![0.0; src.height * width];
    for y in 0..src.height {
        let row = &src.data[y * src.width..(y + 1) * src.width];
        for (tx, weights) in wx.iter().enumerate() {
            tmp[y * width + tx] = weights.iter().map(|&(s, w)| w * row[s]).sum();
        }
    }
    let mut out = vec![0.0; width * height];
    for (ty, weights) in wy.iter().enumerate() {
        for tx in 0..width {
            out[ty * width + tx] = weights.iter().map(|&(s, w)| w * tmp[s * width + tx]).sum();
        }
    }
    LumaGrid::new(width, height, out)
}
