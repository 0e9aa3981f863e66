//! Independent reference implementations and fixtures shared by the
//! integration tests. Nothing here calls into the code paths it checks.
#![allow(dead_code)]

use std::f64::consts::PI;
use std::path::Path;

use gridsort_core::features::{Descriptor, Part};
use image::{Rgb, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Prints one verdict line and fails the test on a miss.
pub fn verdict(criterion: &str, ok: bool, detail: impl AsRef<str>) {
    let mut v = Verdicts::default();
    v.check(criterion, ok, detail);
    v.finish();
}

/// Collects several verdict lines; fails on `finish` if any missed.
#[derive(Default)]
pub struct Verdicts {
    failed: Vec<String>,
}

impl Verdicts {
    pub fn check(&mut self, criterion: &str, ok: bool, detail: impl AsRef<str>) {
        let tag = if ok { "PASS" } else { "FAIL" };
        println!("[{tag}] {criterion}: {}", detail.as_ref());
        if !ok {
            self.failed.push(format!("{criterion}: {}", detail.as_ref()));
        }
    }

    pub fn info(&mut self, what: &str, detail: impl AsRef<str>) {
        println!("[INFO] {what}: {}", detail.as_ref());
    }

    pub fn finish(self) {
        assert!(self.failed.is_empty(), "failed criteria: {:#?}", self.failed);
    }
}

pub fn random_image(rng: &mut ChaCha8Rng, w: u32, h: u32) -> RgbImage {
    RgbImage::from_fn(w, h, |_, _| Rgb([rng.random(), rng.random(), rng.random()]))
}

pub fn random_unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..dim).map(|_| gaussian(rng)).collect();
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

pub fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller.
    let u1: f64 = rng.random_range(f64::EPSILON..1.0);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
}

pub fn random_descriptor(rng: &mut ChaCha8Rng, with_embed: bool) -> Descriptor {
    Descriptor {
        color: Part::from_values(random_unit(rng, 54), false),
        edge: Part::from_values(random_unit(rng, 40), false),
        freq: Part::from_values(random_unit(rng, 21), false),
        embed: with_embed.then(|| Part::from_values(random_unit(rng, 64), false)),
    }
}

/// Fully saturated color at `hue` degrees with a horizontal brightness
/// ramp, so every descriptor part carries signal.
pub fn hue_image(hue: f64, size: u32) -> RgbImage {
    RgbImage::from_fn(size, size, |x, y| {
        let v = 0.55 + 0.45 * (x as f64 / (size - 1) as f64);
        let s = 0.7 + 0.3 * (y as f64 / (size - 1) as f64);
        let (r, g, b) = hsv_to_rgb(hue, s, v);
        Rgb([r, g, b])
    })
}

pub fn hsv_to_rgb(h: f64, s: f64, v: f64) -> (u8, u8, u8) {
    let c = v * s;
    let hp = (h.rem_euclid(360.0)) / 60.0;
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
    (q(r), q(g), q(b))
}

pub fn write_png(path: &Path, img: &RgbImage) {
    std::fs::create_dir_all(path.parent().unwrap()).unwrap();
    img.save(path).unwrap();
}

// ---------------------------------------------------------------------------
// Feature oracles
// ---------------------------------------------------------------------------

fn hellinger_oracle(hist: &[f64]) -> Vec<f64> {
    let total: f64 = hist.iter().sum();
    if total <= 1e-9 {
        return vec![0.0; hist.len()];
    }
    let roots: Vec<f64> = hist.iter().map(|h| (h / total).sqrt()).collect();
    let n = roots.iter().map(|x| x * x).sum::<f64>().sqrt();
    roots.into_iter().map(|x| x / n).collect()
}

/// HSV via the hexcone sector of the largest channel.
fn hsv_oracle(p: &Rgb<u8>) -> (f64, f64, f64) {
    let c = [p[0] as f64 / 255.0, p[1] as f64 / 255.0, p[2] as f64 / 255.0];
    let (imax, max) = c.iter().enumerate().fold(
        (0, f64::MIN),
        |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) },
    );
    let min = c.iter().cloned().fold(f64::MAX, f64::min);
    let chroma = max - min;
    let hue = if chroma == 0.0 {
        0.0
    } else {
        let sector = match imax {
            0 => (c[1] - c[2]) / chroma,
            1 => 2.0 + (c[2] - c[0]) / chroma,
            _ => 4.0 + (c[0] - c[1]) / chroma,
        };
        let deg = 60.0 * sector;
        if deg < 0.0 {
            deg + 360.0
        } else {
            deg
        }
    };
    let sat = if max == 0.0 { 0.0 } else { chroma / max };
    (hue, sat, max)
}

/// Unit-mass 6×3×3 histogram, linear hue split between centers at k·60°.
pub fn color_masses_oracle(img: &RgbImage) -> Vec<f64> {
    let mut hist = vec![0.0; 54];
    let n = (img.width() * img.height()) as f64;
    for p in img.pixels() {
        let (h, s, v) = hsv_oracle(p);
        let sb = if s >= 2.0 / 3.0 {
            2
        } else if s >= 1.0 / 3.0 {
            1
        } else {
            0
        };
        let vb = if v >= 2.0 / 3.0 {
            2
        } else if v >= 1.0 / 3.0 {
            1
        } else {
            0
        };
        for k in 0..6 {
            // Circular distance to bin center, in bin widths.
            let mut d = (h - 60.0 * k as f64).abs();
            if d > 180.0 {
                d = 360.0 - d;
            }
            let w = (1.0 - d / 60.0).max(0.0);
            hist[(k * 3 + sb) * 3 + vb] += w / n;
        }
    }
    hist
}

pub fn color_oracle(img: &RgbImage) -> Vec<f64> {
    hellinger_oracle(&color_masses_oracle(img))
}

pub fn luma_oracle(img: &RgbImage) -> Vec<Vec<f64>> {
    (0..img.height())
        .map(|y| {
            (0..img.width())
                .map(|x| {
                    let p = img.get_pixel(x, y);
                    (0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64) / 255.0
                })
                .collect()
        })
        .collect()
}

/// Per-pixel accumulation over an explicitly border-padded luma plane.
pub fn edge_raw_oracle(img: &RgbImage) -> Vec<f64> {
    let luma = luma_oracle(img);
    let (h, w) = (luma.len() as i64, luma[0].len() as i64);
    let at = |x: i64, y: i64| luma[y.clamp(0, h - 1) as usize][x.clamp(0, w - 1) as usize];
    let mut hist = vec![0.0; 40];
    for y in 0..h {
        for x in 0..w {
            let gx = (at(x + 1, y) - at(x - 1, y)) * 0.5;
            let gy = (at(x, y + 1) - at(x, y - 1)) * 0.5;
            let mag = gx.hypot(gy);
            if mag == 0.0 {
                continue;
            }
            let mut angle = gy.atan2(gx).rem_euclid(2.0 * PI);
            if angle >= PI {
                angle -= PI;
            }
            let bin = ((angle * 8.0 / PI).floor() as usize).min(7);
            let quadrant_row = if 2 * y < h { 0 } else { 1 };
            let quadrant_col = if 2 * x < w { 0 } else { 1 };
            hist[(quadrant_row * 2 + quadrant_col) * 8 + bin] += mag;
            hist[32 + bin] += mag;
        }
    }
    hist
}

pub fn edge_oracle(img: &RgbImage) -> Vec<f64> {
    hellinger_oracle(&edge_raw_oracle(img))
}

/// Area resample by explicit overlap of every source pixel with every
/// target cell.
pub fn resample_oracle(src: &[Vec<f64>], tw: usize, th: usize) -> Vec<Vec<f64>> {
    let (sh, sw) = (src.len(), src[0].len());
    let (cw, ch) = (sw as f64 / tw as f64, sh as f64 / th as f64);
    let overlap = |a0: f64, a1: f64, b0: f64, b1: f64| (a1.min(b1) - a0.max(b0)).max(0.0);
    (0..th)
        .map(|ty| {
            (0..tw)
                .map(|tx| {
                    let (x0, x1) = (tx as f64 * cw, (tx + 1) as f64 * cw);
                    let (y0, y1) = (ty as f64 * ch, (ty + 1) as f64 * ch);
                    let mut acc = 0.0;
                    for (sy, row) in src.iter().enumerate() {
                        let oy = overlap(y0, y1, sy as f64, sy as f64 + 1.0);
                        if oy == 0.0 {
                            continue;
                        }
                        for (sx, v) in row.iter().enumerate() {
                            acc += v * oy * overlap(x0, x1, sx as f64, sx as f64 + 1.0);
                        }
                    }
                    acc / (cw * ch)
                })
                .collect()
        })
        .collect()
}

/// Direct O(N⁴) orthonormal DCT-II; `out[v][u]`, `u` horizontal.
pub fn dct_oracle(block: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = block.len();
    let alpha = |k: usize| {
        if k == 0 {
            (1.0 / n as f64).sqrt()
        } else {
            (2.0 / n as f64).sqrt()
        }
    };
    (0..n)
        .map(|v| {
            (0..n)
                .map(|u| {
                    let mut s = 0.0;
                    for (y, row) in block.iter().enumerate() {
                        for (x, val) in row.iter().enumerate() {
                            s += val
                                * (PI * (2 * x + 1) as f64 * u as f64 / (2 * n) as f64).cos()
                                * (PI * (2 * y + 1) as f64 * v as f64 / (2 * n) as f64).cos();
                        }
                    }
                    alpha(u) * alpha(v) * s
                })
                .collect()
        })
        .collect()
}

/// First 21 AC coefficients along the JPEG zigzag, as `(v, u)`.
pub fn zigzag_oracle() -> Vec<(usize, usize)> {
    // Sort by diagonal, then alternate direction per diagonal.
    let mut all: Vec<(usize, usize)> = (0..8).flat_map(|v| (0..8).map(move |u| (v, u))).collect();
    all.sort_by_key(|&(v, u)| {
        let s = v + u;
        (s, if s % 2 == 1 { v } else { u })
    });
    all.into_iter().skip(1).take(21).collect()
}

pub fn freq_oracle(img: &RgbImage) -> Vec<f64> {
    let small = resample_oracle(&luma_oracle(img), 32, 32);
    let coeffs = dct_oracle(&small);
    let raw: Vec<f64> = zigzag_oracle()
        .into_iter()
        .map(|(v, u)| (1.0 + coeffs[v][u].abs()).ln())
        .collect();
    let n = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n <= 1e-9 {
        return vec![0.0; raw.len()];
    }
    raw.into_iter().map(|x| x / n).collect()
}

// ---------------------------------------------------------------------------
// Linear algebra oracle
// ---------------------------------------------------------------------------

/// Cyclic Jacobi eigenvalues of a symmetric matrix, descending.
#[allow(clippy::needless_range_loop)]
pub fn jacobi_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
    let n = a.len();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off < 1e-22 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    eig.sort_by(|x, y| y.total_cmp(x));
    eig
}

pub fn sample_covariance(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let (k, d) = (rows.len(), rows[0].len());
    let mean: Vec<f64> = (0..d)
        .map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / k as f64)
        .collect();
    let mut cov = vec![vec![0.0; d]; d];
    for r in rows {
        for i in 0..d {
            let di = r[i] - mean[i];
            for j in 0..d {
                cov[i][j] += di * (r[j] - mean[j]);
            }
        }
    }
    for row in cov.iter_mut() {
        for v in row.iter_mut() {
            *v /= (k - 1) as f64;
        }
    }
    cov
}

// ---------------------------------------------------------------------------
// Layout and ranking oracles
// ---------------------------------------------------------------------------

pub fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Mean neighbor distance of items placed in scanline order `order` on an
/// `n`-column grid.
pub fn sortedness_oracle(order: &[usize], n: usize, f: &[Vec<f64>]) -> f64 {
    let k = order.len();
    let mut total = 0.0;
    let mut pairs = 0;
    for p in 0..k {
        let (r, c) = (p / n, p % n);
        if c + 1 < n && p + 1 < k {
            total += euclid(&f[order[p]], &f[order[p + 1]]);
            pairs += 1;
        }
        if p + n < k {
            total += euclid(&f[order[p]], &f[order[p + n]]);
            pairs += 1;
        }
        let _ = r;
    }
    if pairs == 0 {
        0.0
    } else {
        total / pairs as f64
    }
}

/// Minimum sortedness over all permutations (Heap's algorithm).
pub fn exhaustive_best(k: usize, n: usize, f: &[Vec<f64>]) -> f64 {
    let mut perm: Vec<usize> = (0..k).collect();
    let mut best = sortedness_oracle(&perm, n, f);
    let mut c = vec![0usize; k];
    let mut i = 0;
    while i < k {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            best = best.min(sortedness_oracle(&perm, n, f));
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    best
}

/// Brute-force min-over-queries ranking on precombined vectors.
pub fn rank_oracle(vectors: &[(String, Vec<f64>)], queries: &[usize]) -> Vec<(String, f64)> {
    let mut out = Vec::new();
    for (id, v) in vectors {
        let mut best = f64::INFINITY;
        for &q in queries {
            let d = euclid(v, &vectors[q].1);
            if d < best {
                best = d;
            }
        }
        out.push((id.clone(), best));
    }
    out.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then_with(|| a.0.cmp(&b.0)));
    out
}
