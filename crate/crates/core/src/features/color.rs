use super::{hellinger, Part};
use crate::imgscan::PixelBuffer;

pub const HUE_BINS: usize = 6;
pub const SAT_BINS: usize = 3;
pub const VAL_BINS: usize = 3;
pub const COLOR_DIM: usize = HUE_BINS * SAT_BINS * VAL_BINS;

/// Hue in degrees `[0, 360)`, saturation and value in `[0, 1]`.
/// Achromatic pixels get hue 0.
pub fn rgb_to_hsv(r: u8, g: u8, b: u8) -> (f64, f64, f64) {
    let (r, g, b) = (r as f64 / 255.0, g as f64 / 255.0, b as f64 / 255.0);
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let v = max;
    let s = if max > 0.0 { delta / max } else { 0.0 };
    let h = if delta == 0.0 {
        0.0
    } else if max == r {
        60.0 * ((g - b) / delta).rem_euclid(6.0)
    } else if max == g {
        60.0 * ((b - r) / delta + 2.0)
    } else {
        60.0 * ((r - g) / delta + 4.0)
    };
    (h.rem_euclid(360.0), s, v)
}

#[inline]
fn bin_index(hue_bin: usize, sat_bin: usize, val_bin: usize) -> usize {
    (hue_bin * SAT_BINS + sat_bin) * VAL_BINS + val_bin
}

/// Pixel-count histogram normalized to unit mass. Hue bin centers sit at
/// multiples of 60°, and each pixel's unit mass is split linearly between
/// the two nearest hue centers. Saturation and value use hard thirds.
pub fn color_histogram_masses(pixels: &PixelBuffer) -> [f64; COLOR_DIM] {
    let mut hist = [0.0; COLOR_DIM];
    for p in pixels.pixels() {
        let (h, s, v) = rgb_to_hsv(p[0], p[1], p[2]);
        let sb = ((s * SAT_BINS as f64) as usize).min(SAT_BINS - 1);
        let vb = ((v * VAL_BINS as f64) as usize).min(VAL_BINS - 1);
        let x = h / (360.0 / HUE_BINS as f64);
        let lo = x.floor();
        let frac = x - lo;
        let lo = (lo as usize) % HUE_BINS;
        let hi = (lo + 1) % HUE_BINS;
        hist[bin_index(lo, sb, vb)] += 1.0 - frac;
        if frac > 0.0 {
            hist[bin_index(hi, sb, vb)] += frac;
        }
    }
    let n = (pixels.width() as f64) * (pixels.height() as f64);
    if n > 0.0 {
        hist.iter_mut().for_each(|h| *h /= n);
    }
    hist
}

pub fn color_histogram(pixels: &PixelBuffer) -> Part {
    hellinger(color_histogram_masses(pixels).to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::{Rgb, RgbImage};

    #[test]
    fn hsv_primaries() {
        assert_eq!(rgb_to_hsv(255, 0, 0), (0.0, 1.0, 1.0));
        assert_eq!(rgb_to_hsv(0, 255, 0), (120.0, 1.0, 1.0));
        assert_eq!(rgb_to_hsv(0, 0, 255), (240.0, 1.0, 1.0));
        assert_eq!(rgb_to_hsv(0, 0, 0), (0.0, 0.0, 0.0));
        let (h, _, _) = rgb_to_hsv(255, 0, 128);
        assert!(h > 300.0 && h < 360.0);
    }

    #[test]
    fn pure_red_single_bin() {
        let img = RgbImage::from_pixel(8, 8, Rgb([255, 0, 0]));
        let m = color_histogram_masses(&img);
        let idx = bin_index(0, 2, 2);
        assert_eq!(m[idx], 1.0);
        assert_eq!(m.iter().filter(|v| **v > 0.0).count(), 1);
        let part = color_histogram(&img);
        assert!((part.values[idx] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn red_blue_halves() {
        let img = RgbImage::from_fn(10, 6, |x, _| if x < 5 { Rgb([255, 0, 0]) } else { Rgb([0, 0, 255]) });
        let m = color_histogram_masses(&img);
        let nonzero: Vec<_> = m.iter().enumerate().filter(|(_, v)| **v > 0.0).collect();
        assert_eq!(nonzero.len(), 2);
        assert_eq!(m[bin_index(0, 2, 2)], 0.5);
        assert_eq!(m[bin_index(4, 2, 2)], 0.5);
    }

    #[test]
    fn black_collapses_to_lowest_value() {
        let img = RgbImage::from_pixel(5, 5, Rgb([0, 0, 0]));
        let m = color_histogram_masses(&img);
        let low_value: f64 = (0..HUE_BINS)
            .flat_map(|h| (0..SAT_BINS).map(move |s| bin_index(h, s, 0)))
            .map(|i| m[i])
            .sum();
        assert_eq!(low_value, 1.0);
    }

    #[test]
    fn hue_between_centers_splits() {
        // Pure yellow sits at 60°, exactly on a center; orange (30°) halves.
        let img = RgbImage::from_pixel(2, 2, Rgb([255, 128, 0]));
        let m = color_histogram_masses(&img);
        let a = m[bin_index(0, 2, 2)];
        let b = m[bin_index(1, 2, 2)];
        assert!((a + b - 1.0).abs() < 1e-12);
        assert!(a > 0.4 && b > 0.4);
    }
}
