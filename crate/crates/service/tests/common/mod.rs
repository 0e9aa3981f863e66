#![allow(dead_code)]

use std::path::{Path, PathBuf};

use image::{Rgb, RgbImage};

/// Writes `n` small PNGs with distinct hues and returns their paths.
pub fn write_images(dir: &Path, n: usize, size: u32) -> Vec<PathBuf> {
    std::fs::create_dir_all(dir).unwrap();
    (0..n)
        .map(|i| {
            let hue = i as f64 / n.max(1) as f64 * 360.0;
            let img = RgbImage::from_fn(size, size, |x, y| {
                let s = 0.6 + 0.4 * x as f64 / size as f64;
                let v = 0.5 + 0.5 * y as f64 / size as f64;
                hsv(hue, s, v)
            });
            let path = dir.join(format!("img_{i:04}.png"));
            img.save(&path).unwrap();
            path
        })
        .collect()
}

fn hsv(h: f64, s: f64, v: f64) -> Rgb<u8> {
    let c = v * s;
    let hp = (h % 360.0) / 60.0;
    let x = c * (1.0 - (hp % 2.0 - 1.0).abs());
    let (r, g, b) = match hp as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    let q = |t: f64| ((t + m) * 255.0).round() as u8;
    Rgb([q(r), q(g), q(b)])
}
