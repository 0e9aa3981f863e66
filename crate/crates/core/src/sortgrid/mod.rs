//! Hole-free, duplicate-free grid arrangement of feature vectors.
//!
//! Items fill the first `K` positions of an `N`-column grid in scanline
//! order. The self-sorting map in [`ssm`] only ever permutes items among
//! those positions, and samples neighborhoods through [`clamp_to_shape`]
//! so the ragged last row behaves like a constant-continuation border.

mod neighborhood;
mod shape;
mod ssm;

use serde::{Deserialize, Serialize};

use crate::features::l2;

pub use neighborhood::{neighborhood_mean, neighborhood_means};
pub use shape::{clamp_to_shape, valid_shape, Shape};
pub use ssm::{ssm_sort, ssm_sort_descriptors, ssm_sort_observed, SortConfig, SortEvent};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LayoutError {
    #[error("expected {expected} cells for {rows}×{columns}, found {found}")]
    CellCount {
        expected: usize,
        rows: usize,
        columns: usize,
        found: usize,
    },
    #[error("row count {rows} does not match ceil({len}/{columns})")]
    RowCount { rows: usize, len: usize, columns: usize },
    #[error("cell {0} inside the shape is empty")]
    Hole(usize),
    #[error("cell {0} in the tail is occupied")]
    TailOccupied(usize),
    #[error("item {0} appears more than once")]
    Duplicate(usize),
    #[error("item {0} is out of range")]
    OutOfRange(usize),
}

/// `cells[r * columns + c]` holds an item index, or `None` in the tail of
/// the last row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridLayout {
    pub columns: usize,
    pub rows: usize,
    #[serde(rename = "count")]
    pub len: usize,
    pub cells: Vec<Option<usize>>,
}

impl GridLayout {
    /// Items in input order along the scanline.
    pub fn scanline(len: usize, columns: usize) -> Self {
        Self::from_order(&(0..len).collect::<Vec<_>>(), columns)
    }

    /// `order[i]` is the item placed at scanline position `i`.
    pub fn from_order(order: &[usize], columns: usize) -> Self {
        let shape = Shape::new(order.len(), columns);
        let mut cells: Vec<Option<usize>> = order.iter().copied().map(Some).collect();
        cells.resize(shape.rows * columns, None);
        GridLayout {
            columns,
            rows: shape.rows,
            len: order.len(),
            cells,
        }
    }

    pub fn shape(&self) -> Shape {
        Shape::new(self.len, self.columns)
    }

    /// Item indices in scanline order, without the empty tail.
    pub fn order(&self) -> Vec<usize> {
        self.cells.iter().flatten().copied().collect()
    }

    #[inline]
    pub fn item_at(&self, row: usize, col: usize) -> Option<usize> {
        self.cells.get(row * self.columns + col).copied().flatten()
    }

    /// Bijection onto `0..len` with empties only at scanline index ≥ len.
    pub fn validate(&self) -> Result<(), LayoutError> {
        if self.columns == 0 || self.rows != self.len.div_ceil(self.columns) {
            return Err(LayoutError::RowCount {
                rows: self.rows,
                len: self.len,
                columns: self.columns,
            });
        }
        let expected = self.rows * self.columns;
        if self.cells.len() != expected {
            return Err(LayoutError::CellCount {
                expected,
                rows: self.rows,
                columns: self.columns,
                found: self.cells.len(),
            });
        }
        let mut seen = vec![false; self.len];
        for (i, cell) in self.cells.iter().enumerate() {
            match (*cell, i < self.len) {
                (None, true) => return Err(LayoutError::Hole(i)),
                (Some(_), false) => return Err(LayoutError::TailOccupied(i)),
                (Some(item), true) => {
                    if item >= self.len {
                        return Err(LayoutError::OutOfRange(item));
                    }
                    if std::mem::replace(&mut seen[item], true) {
                        return Err(LayoutError::Duplicate(item));
                    }
                }
                (None, false) => {}
            }
        }
        Ok(())
    }
}

/// Mean L2 distance over horizontally and vertically adjacent occupied
/// cells. Zero when there are no such pairs.
pub fn sortedness<V: AsRef<[f64]>>(layout: &GridLayout, features: &[V]) -> f64 {
    let mut total = 0.0;
    let mut pairs = 0usize;
    for r in 0..layout.rows {
        for c in 0..layout.columns {
            let Some(a) = layout.item_at(r, c) else { continue };
            let fa = features[a].as_ref();
            if c + 1 < layout.columns {
                if let Some(b) = layout.item_at(r, c + 1) {
                    total += l2(fa, features[b].as_ref());
                    pairs += 1;
                }
            }
            if r + 1 < layout.rows {
                if let Some(b) = layout.item_at(r + 1, c) {
                    total += l2(fa, features[b].as_ref());
                    pairs += 1;
                }
            }
        }
    }
    if pairs == 0 {
        0.0
    } else {
        total / pairs as f64
    }
}
