use super::shape::Shape;
use super::GridLayout;

/// Mean feature over the `(2r+1)²` window around `position`, each sample
/// resolved through the constant-continuation clamp. Direct enumeration.
pub fn neighborhood_mean<V: AsRef<[f64]>>(
    layout: &GridLayout,
    features: &[V],
    position: (usize, usize),
    radius: usize,
) -> Vec<f64> {
    let shape = layout.shape();
    assert!(shape.is_valid(position.0, position.1), "position outside the shape");
    assert!(radius >= 1);
    let dim = features[0].as_ref().len();
    let mut acc = vec![0.0; dim];
    let r = radius as i64;
    for dr in -r..=r {
        for dc in -r..=r {
            let (row, col) = shape.clamp(position.0 as i64 + dr, position.1 as i64 + dc);
            let item = layout.item_at(row, col).expect("clamped cell is occupied");
            for (a, v) in acc.iter_mut().zip(features[item].as_ref()) {
                *a += v;
            }
        }
    }
    let count = ((2 * radius + 1) * (2 * radius + 1)) as f64;
    acc.iter_mut().for_each(|a| *a /= count);
    acc
}

/// Neighborhood means for every occupied cell, in scanline order.
pub fn neighborhood_means<V: AsRef<[f64]>>(layout: &GridLayout, features: &[V], radius: usize) -> Vec<Vec<f64>> {
    let dim = features.first().map_or(0, |f| f.as_ref().len());
    let mut flat = Vec::with_capacity(features.len() * dim);
    for f in features {
        flat.extend_from_slice(f.as_ref());
    }
    let order = layout.order();
    means_flat(&layout.shape(), &order, &flat, dim, radius)
        .chunks_exact(dim.max(1))
        .map(<[f64]>::to_vec)
        .collect()
}

/// Adds `scale · src` into `dst`.
#[inline]
fn axpy(dst: &mut [f64], scale: f64, src: &[f64]) {
    if scale == 0.0 {
        return;
    }
    for (d, s) in dst.iter_mut().zip(src) {
        *d += scale * s;
    }
}

/// Sum over the clamped window `[center − r, center + r]` on a line of
/// `width` samples. `prefix` has `width + 1` rows of `dim` values (exclusive
/// prefix sums) and `sample(i)` returns row `i` of the line.
fn window_sum<'a>(
    out: &mut [f64],
    prefix: &[f64],
    sample: impl Fn(usize) -> &'a [f64],
    dim: usize,
    width: usize,
    center: usize,
    radius: usize,
) {
    let lo = center as i64 - radius as i64;
    let hi = center as i64 + radius as i64;
    let last = width as i64 - 1;
    let below = (-lo).max(0);
    let above = (hi - (lo - 1).max(last)).max(0);
    let a = lo.max(0);
    let b = hi.min(last);
    axpy(out, below as f64, sample(0));
    axpy(out, above as f64, sample(last as usize));
    if a <= b {
        let (a, b) = (a as usize, b as usize + 1);
        let upper = &prefix[b * dim..(b + 1) * dim];
        let lower = &prefix[a * dim..(a + 1) * dim];
        for ((o, u), l) in out.iter_mut().zip(upper).zip(lower) {
            *o += u - l;
        }
    }
}

/// Separable clamped box filter over the occupied shape. `order[p]` is the
/// item at scanline position `p`; output is `len × dim`, scanline order.
pub(crate) fn means_flat(shape: &Shape, order: &[usize], features: &[f64], dim: usize, radius: usize) -> Vec<f64> {
    let (rows, cols) = (shape.rows, shape.columns);
    if shape.len == 0 || dim == 0 {
        return Vec::new();
    }
    let feat = |p: usize| &features[order[p] * dim..(order[p] + 1) * dim];

    // Horizontal window sums for every (row, query column), including query
    // columns past the end of the last row.
    let mut horizontal = vec![0.0; rows * cols * dim];
    let mut prefix = vec![0.0; (cols + 1) * dim];
    for r in 0..rows {
        let width = shape.row_width(r);
        let base = r * cols;
        for x in 0..width {
            let (done, rest) = prefix.split_at_mut((x + 1) * dim);
            let prev = &done[x * dim..];
            let f = feat(base + x);
            for ((dst, p), v) in rest[..dim].iter_mut().zip(prev).zip(f) {
                *dst = p + v;
            }
        }
        for c in 0..cols {
            let out = &mut horizontal[(base + c) * dim..(base + c + 1) * dim];
            window_sum(out, &prefix, |i| feat(base + i), dim, width, c, radius);
        }
    }

    // Vertical window over the horizontal sums, per column.
    let window = (2 * radius + 1) as f64;
    let norm = 1.0 / (window * window);
    let mut means = vec![0.0; shape.len * dim];
    let mut col_prefix = vec![0.0; (rows + 1) * dim];
    let mut acc = vec![0.0; dim];
    for c in 0..cols {
        let column = |r: usize| &horizontal[(r * cols + c) * dim..(r * cols + c + 1) * dim];
        for r in 0..rows {
            let (done, rest) = col_prefix.split_at_mut((r + 1) * dim);
            let prev = &done[r * dim..];
            for ((dst, p), v) in rest[..dim].iter_mut().zip(prev).zip(column(r)) {
                *dst = p + v;
            }
        }
        for r in 0..rows {
            let p = r * cols + c;
            if p >= shape.len {
                continue;
            }
            acc.iter_mut().for_each(|a| *a = 0.0);
            window_sum(&mut acc, &col_prefix, column, dim, rows, r, radius);
            for (m, a) in means[p * dim..(p + 1) * dim].iter_mut().zip(&acc) {
                *m = a * norm;
            }
        }
    }
    means
}
