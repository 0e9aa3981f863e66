//! Per-image visual descriptors.
//!
//! A [`Descriptor`] holds up to four L2-normalized parts in a fixed order:
//! an HSV color histogram, a spatial edge-orientation histogram, low-order
//! DCT magnitudes, and an optional 64-dimensional compressed embedding.
//! Parts are combined into one vector with per-part weights so that plain
//! L2 distance on the result equals the weighted per-part distance.

mod color;
mod edge;
pub mod embedfile;
mod freq;
mod luma;
mod projection;
mod weights;

use serde::{Deserialize, Serialize};

use crate::imgscan::PixelBuffer;

pub use color::{color_histogram, color_histogram_masses, rgb_to_hsv, COLOR_DIM};
pub use edge::{edge_histogram, edge_histogram_raw, EDGE_DIM, ORIENTATION_BINS};
pub use freq::{
    dct2_32, frequency_features, frequency_features_from_block, frequency_features_from_luma, zigzag_ac_indices,
    DCT_SIZE, FREQ_DIM,
};
pub use luma::{luma_grid, resample_area, LumaGrid};
pub use projection::{fit_projection, project, project_raw, ProjectionModel, EMBED_DIM};
pub use weights::{average_precision, combine, evaluate_map, mean_average_precision, Purpose, WeightProfile};

/// Raw norms at or below this are treated as an all-zero (degenerate) part.
pub const DEGENERATE_EPS: f64 = 1e-9;

pub const COMBINED_DIM: usize = COLOR_DIM + EDGE_DIM + FREQ_DIM + EMBED_DIM;

#[derive(Debug, thiserror::Error)]
pub enum FeatureError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("all rows are identical; no principal directions exist")]
    DegenerateData,
    #[error("need at least {needed} samples, got {got}")]
    InsufficientSamples { needed: usize, got: usize },
    #[error("need at least two labels with two members each")]
    InsufficientLabels,
    #[error("invalid weight profile: {0}")]
    InvalidWeights(String),
    #[error("embedding file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PartKind {
    Color,
    Edge,
    Freq,
    Embed,
}

impl PartKind {
    pub const ALL: [PartKind; 4] = [PartKind::Color, PartKind::Edge, PartKind::Freq, PartKind::Embed];

    pub fn dim(self) -> usize {
        match self {
            PartKind::Color => COLOR_DIM,
            PartKind::Edge => EDGE_DIM,
            PartKind::Freq => FREQ_DIM,
            PartKind::Embed => EMBED_DIM,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PartKind::Color => "color",
            PartKind::Edge => "edge",
            PartKind::Freq => "freq",
            PartKind::Embed => "embed",
        }
    }

    /// Offset of this part inside a combined vector.
    pub fn offset(self) -> usize {
        PartKind::ALL.iter().take_while(|k| **k != self).map(|k| k.dim()).sum()
    }
}

/// One unit-norm feature part, or all zeros when flagged degenerate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Part {
    pub values: Vec<f64>,
    pub degenerate: bool,
}

impl Part {
    /// L2-normalizes `raw`; vectors with norm at most [`DEGENERATE_EPS`]
    /// become all-zero degenerate parts.
    pub fn normalized(mut raw: Vec<f64>) -> Part {
        let norm = l2_norm(&raw);
        if norm <= DEGENERATE_EPS || !norm.is_finite() {
            raw.iter_mut().for_each(|v| *v = 0.0);
            return Part {
                values: raw,
                degenerate: true,
            };
        }
        raw.iter_mut().for_each(|v| *v /= norm);
        Part {
            values: raw,
            degenerate: false,
        }
    }

    /// Wraps values that are already normalized (e.g. dequantized).
    pub fn from_values(values: Vec<f64>, degenerate: bool) -> Part {
        Part { values, degenerate }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

/// Maps a non-negative histogram to the Hellinger embedding: L1-normalize,
/// take component-wise square roots, then L2-normalize.
pub(crate) fn hellinger(hist: Vec<f64>) -> Part {
    let total: f64 = hist.iter().sum();
    if total <= DEGENERATE_EPS {
        return Part::normalized(vec![0.0; hist.len()]);
    }
    Part::normalized(hist.into_iter().map(|h| (h / total).sqrt()).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Descriptor {
    pub color: Part,
    pub edge: Part,
    pub freq: Part,
    pub embed: Option<Part>,
}

impl Descriptor {
    pub fn part(&self, kind: PartKind) -> Option<&Part> {
        match kind {
            PartKind::Color => Some(&self.color),
            PartKind::Edge => Some(&self.edge),
            PartKind::Freq => Some(&self.freq),
            PartKind::Embed => self.embed.as_ref(),
        }
    }

    /// Present parts in fixed order.
    pub fn parts(&self) -> impl Iterator<Item = (PartKind, &Part)> {
        PartKind::ALL
            .into_iter()
            .filter_map(move |k| self.part(k).map(|p| (k, p)))
    }

    pub fn has_embed(&self) -> bool {
        self.embed.is_some()
    }
}

/// Computes the hand-crafted parts of the descriptor. The embedding part is
/// attached separately from ingested embeddings.
pub fn describe(pixels: &PixelBuffer) -> Descriptor {
    let luma = luma_grid(pixels);
    Descriptor {
        color: color_histogram(pixels),
        edge: edge::edge_histogram_from_luma(&luma),
        freq: freq::frequency_features_from_luma(&luma),
        embed: None,
    }
}

pub fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn l2_sq(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn l2(a: &[f64], b: &[f64]) -> f64 {
    l2_sq(a, b).sqrt()
}
