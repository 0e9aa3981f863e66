use std::sync::OnceLock;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::neighborhood::means_flat;
use super::shape::Shape;
use super::{sortedness, GridLayout};
use crate::features::{combine, l2_sq, Descriptor, WeightProfile};

#[derive(Debug, Clone, PartialEq)]
pub struct SortConfig {
    pub seed: u64,
    /// Shuffle the initial scanline placement with `seed`.
    pub shuffle: bool,
    pub passes_per_stage: usize,
    /// Neighborhood radius as a fraction of the block offset (min 1).
    pub neighborhood_radius_factor: f64,
    pub profile: WeightProfile,
}

impl Default for SortConfig {
    fn default() -> Self {
        SortConfig {
            seed: 0,
            shuffle: false,
            passes_per_stage: 4,
            neighborhood_radius_factor: 1.0,
            profile: WeightProfile::sort(),
        }
    }
}

/// Progress notifications from [`ssm_sort_observed`].
#[derive(Debug, Clone, PartialEq)]
pub enum SortEvent {
    /// A non-identity permutation was applied to a swap group. Costs are
    /// the group's summed squared distance to its frozen targets.
    SwapApplied {
        block: usize,
        pass: usize,
        cost_before: f64,
        cost_after: f64,
    },
    /// Frozen-target objective over all cells at the start and end of a pass.
    PassEnd {
        block: usize,
        pass: usize,
        applied: usize,
        objective_before: f64,
        objective_after: f64,
    },
    StageEnd {
        block: usize,
        sortedness: f64,
    },
}

/// All permutations of `0..n` (n ≤ 4) in lexicographic order; the
/// identity comes first.
fn permutations(n: usize) -> &'static [Vec<usize>] {
    static TABLES: OnceLock<Vec<Vec<Vec<usize>>>> = OnceLock::new();
    let tables = TABLES.get_or_init(|| {
        (0..=4)
            .map(|n| {
                let mut out = Vec::new();
                let mut current: Vec<usize> = (0..n).collect();
                loop {
                    out.push(current.clone());
                    // Next lexicographic permutation.
                    let Some(i) = (1..n).rev().find(|&i| current[i - 1] < current[i]) else {
                        break;
                    };
                    let j = (i..n).rev().find(|&j| current[j] > current[i - 1]).unwrap();
                    current.swap(i - 1, j);
                    current[i..].reverse();
                }
                out
            })
            .collect()
    });
    &tables[n]
}

fn largest_power_of_two_below(n: usize) -> usize {
    if n <= 1 {
        return 0;
    }
    let mut b = 1;
    while b * 2 < n {
        b *= 2;
    }
    b
}

struct Grid<'a> {
    shape: Shape,
    features: &'a [f64],
    dim: usize,
    /// Item at each scanline position.
    order: Vec<usize>,
}

impl Grid<'_> {
    fn feature(&self, item: usize) -> &[f64] {
        &self.features[item * self.dim..(item + 1) * self.dim]
    }

    fn objective(&self, targets: &[f64]) -> f64 {
        self.order
            .iter()
            .enumerate()
            .map(|(p, &item)| l2_sq(self.feature(item), &targets[p * self.dim..(p + 1) * self.dim]))
            .sum()
    }

    fn layout(&self) -> GridLayout {
        GridLayout::from_order(&self.order, self.shape.columns)
    }
}

/// Sorts `features` onto an `columns`-wide grid.
pub fn ssm_sort<V: AsRef<[f64]>>(features: &[V], columns: usize, config: &SortConfig) -> GridLayout {
    ssm_sort_observed(features, columns, config, |_| {})
}

/// Combines descriptors with the configured profile, then sorts.
pub fn ssm_sort_descriptors(descriptors: &[Descriptor], columns: usize, config: &SortConfig) -> GridLayout {
    let combined: Vec<Vec<f64>> = descriptors.iter().map(|d| combine(d, &config.profile)).collect();
    ssm_sort(&combined, columns, config)
}

/// Hierarchical swap-based sort. Each stage uses block offset `b` (largest
/// power of two below `max(columns, rows)`, halving down to 1); each pass
/// freezes per-cell targets (clamped neighborhood means) and, for every
/// occupied cell, applies the best permutation of the swap group
/// `{(r,c), (r,c+b), (r+b,c), (r+b,c+b)}` restricted to occupied cells.
/// The layout with the lowest [`sortedness`] seen after any stage,
/// including the initial placement, is returned.
pub fn ssm_sort_observed<V: AsRef<[f64]>>(
    features: &[V],
    columns: usize,
    config: &SortConfig,
    mut observer: impl FnMut(&SortEvent),
) -> GridLayout {
    assert!(columns >= 1, "grid needs at least one column");
    assert!(config.passes_per_stage >= 1);
    let len = features.len();
    if len == 0 {
        return GridLayout::scanline(0, columns);
    }
    let dim = features[0].as_ref().len();
    let mut flat = Vec::with_capacity(len * dim);
    for f in features {
        assert_eq!(f.as_ref().len(), dim, "features must share one dimension");
        flat.extend_from_slice(f.as_ref());
    }

    let shape = Shape::new(len, columns);
    let mut order: Vec<usize> = (0..len).collect();
    if config.shuffle {
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(config.seed));
    }
    let mut grid = Grid {
        shape,
        features: &flat,
        dim,
        order,
    };

    let mut best = grid.layout();
    let mut best_score = sortedness(&best, features);

    let mut block = largest_power_of_two_below(shape.columns.max(shape.rows));
    while block >= 1 {
        let radius = ((block as f64 * config.neighborhood_radius_factor).round() as usize).max(1);
        for pass in 0..config.passes_per_stage {
            let applied = run_pass(&mut grid, block, pass, radius, &mut observer);
            debug_assert!(grid.layout().validate().is_ok());
            if applied == 0 {
                break;
            }
        }
        let layout = grid.layout();
        let score = sortedness(&layout, features);
        observer(&SortEvent::StageEnd {
            block,
            sortedness: score,
        });
        if score < best_score {
            best_score = score;
            best = layout;
        }
        block /= 2;
    }
    best
}

fn run_pass(
    grid: &mut Grid<'_>,
    block: usize,
    pass: usize,
    radius: usize,
    observer: &mut impl FnMut(&SortEvent),
) -> usize {
    let shape = grid.shape;
    let dim = grid.dim;
    let targets = means_flat(&shape, &grid.order, grid.features, dim, radius);
    let objective_before = grid.objective(&targets);
    let target = |p: usize| &targets[p * dim..(p + 1) * dim];

    let mut applied = 0;
    let mut cells = [0usize; 4];
    let mut cost = [[0.0f64; 4]; 4];
    for anchor in 0..shape.len {
        let (r, c) = shape.position(anchor);
        let mut g = 0;
        for (dr, dc) in [(0, 0), (0, block), (block, 0), (block, block)] {
            if shape.is_valid(r + dr, c + dc) {
                cells[g] = shape.index(r + dr, c + dc);
                g += 1;
            }
        }
        if g < 2 {
            continue;
        }
        // cost[i][j]: occupant of cells[i] placed at cells[j].
        for i in 0..g {
            let f = grid.feature(grid.order[cells[i]]);
            for j in 0..g {
                cost[i][j] = l2_sq(f, target(cells[j]));
            }
        }
        let perms = permutations(g);
        let mut best_idx = 0;
        let mut best_cost = f64::INFINITY;
        for (idx, perm) in perms.iter().enumerate() {
            // perm[j] = index of the occupant moved to cells[j].
            let total: f64 = (0..g).map(|j| cost[perm[j]][j]).sum();
            if total < best_cost {
                best_cost = total;
                best_idx = idx;
            }
        }
        if best_idx == 0 {
            continue;
        }
        let identity_cost: f64 = (0..g).map(|j| cost[j][j]).sum();
        let occupants: Vec<usize> = cells[..g].iter().map(|&p| grid.order[p]).collect();
        for (j, &src) in perms[best_idx].iter().enumerate() {
            grid.order[cells[j]] = occupants[src];
        }
        applied += 1;
        observer(&SortEvent::SwapApplied {
            block,
            pass,
            cost_before: identity_cost,
            cost_after: best_cost,
        });
    }
    observer(&SortEvent::PassEnd {
        block,
        pass,
        applied,
        objective_before,
        objective_after: grid.objective(&targets),
    });
    applied
}
