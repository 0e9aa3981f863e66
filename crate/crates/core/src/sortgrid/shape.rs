/// The first `k` scanline positions of an `n`-column grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Shape {
    pub len: usize,
    pub columns: usize,
    pub rows: usize,
    /// Occupied cells in the last row (1..=columns when len > 0).
    pub last_row_len: usize,
}

impl Shape {
    pub fn new(len: usize, columns: usize) -> Self {
        assert!(columns >= 1, "grid needs at least one column");
        let rows = len.div_ceil(columns);
        let last_row_len = if len == 0 { 0 } else { len - (rows - 1) * columns };
        Shape {
            len,
            columns,
            rows,
            last_row_len,
        }
    }

    #[inline]
    pub fn is_valid(&self, row: usize, col: usize) -> bool {
        col < self.columns && row * self.columns + col < self.len
    }

    #[inline]
    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.columns + col
    }

    #[inline]
    pub fn position(&self, index: usize) -> (usize, usize) {
        (index / self.columns, index % self.columns)
    }

    /// Occupied width of `row`.
    #[inline]
    pub fn row_width(&self, row: usize) -> usize {
        if row + 1 == self.rows {
            self.last_row_len
        } else {
            self.columns
        }
    }

    /// Nearest valid cell: clamp row, clamp column, then pull positions in
    /// the empty tail of the last row back to its last occupied column.
    pub fn clamp(&self, row: i64, col: i64) -> (usize, usize) {
        assert!(self.len > 0, "cannot clamp into an empty shape");
        let r = row.clamp(0, self.rows as i64 - 1) as usize;
        let c = col.clamp(0, self.columns as i64 - 1) as usize;
        (r, c.min(self.row_width(r) - 1))
    }
}

/// Positions of the first `k` cells in scanline order on a `ceil(k/n)`-row grid.
pub fn valid_shape(k: usize, n: usize) -> Vec<(usize, usize)> {
    let shape = Shape::new(k, n);
    (0..k).map(|i| shape.position(i)).collect()
}

/// Constant-continuation border: maps any position to the nearest cell of
/// the scanline-filled shape.
pub fn clamp_to_shape(position: (i64, i64), k: usize, n: usize) -> (usize, usize) {
    Shape::new(k, n).clamp(position.0, position.1)
}
