use std::collections::HashMap;
use std::hash::Hash;

use serde::{Deserialize, Serialize};

use super::{l2, Descriptor, FeatureError, PartKind, COMBINED_DIM};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Purpose {
    Search,
    Sort,
}

/// Non-negative per-part weights. Combination uses the normalized weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightProfile {
    pub embed: f64,
    pub color: f64,
    pub edge: f64,
    pub freq: f64,
    pub purpose: Purpose,
}

impl WeightProfile {
    /// Content-heavy weighting for similarity search.
    pub fn search() -> Self {
        WeightProfile {
            embed: 0.70,
            color: 0.15,
            edge: 0.10,
            freq: 0.05,
            purpose: Purpose::Search,
        }
    }

    /// Color-heavier weighting for thumbnail-scale arrangement.
    pub fn sort() -> Self {
        WeightProfile {
            embed: 0.40,
            color: 0.40,
            edge: 0.10,
            freq: 0.10,
            purpose: Purpose::Sort,
        }
    }

    pub fn weight(&self, kind: PartKind) -> f64 {
        match kind {
            PartKind::Color => self.color,
            PartKind::Edge => self.edge,
            PartKind::Freq => self.freq,
            PartKind::Embed => self.embed,
        }
    }

    pub fn validate(&self) -> Result<(), FeatureError> {
        let all = [self.embed, self.color, self.edge, self.freq];
        if all.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(FeatureError::InvalidWeights(
                "weights must be finite and non-negative".into(),
            ));
        }
        if all.iter().sum::<f64>() <= 0.0 {
            return Err(FeatureError::InvalidWeights("weights sum to zero".into()));
        }
        Ok(())
    }

    pub fn normalized(&self) -> Self {
        let total = self.embed + self.color + self.edge + self.freq;
        if total <= 0.0 {
            return *self;
        }
        WeightProfile {
            embed: self.embed / total,
            color: self.color / total,
            edge: self.edge / total,
            freq: self.freq / total,
            purpose: self.purpose,
        }
    }

    /// Effective normalized weights in part order. Without an embedding its
    /// share is redistributed proportionally over the other parts.
    pub fn effective(&self, has_embed: bool) -> [f64; 4] {
        let n = self.normalized();
        if has_embed {
            return [n.color, n.edge, n.freq, n.embed];
        }
        let rest = n.color + n.edge + n.freq;
        if rest <= 0.0 {
            return [0.0; 4];
        }
        [n.color / rest, n.edge / rest, n.freq / rest, 0.0]
    }
}

/// Concatenates `√w_p · part_p` in part order; absent parts are zero-filled.
pub fn combine(descriptor: &Descriptor, profile: &WeightProfile) -> Vec<f64> {
    let weights = profile.effective(descriptor.has_embed());
    let mut out = Vec::with_capacity(COMBINED_DIM);
    for (kind, w) in PartKind::ALL.into_iter().zip(weights) {
        match descriptor.part(kind) {
            Some(part) => {
                debug_assert_eq!(part.dim(), kind.dim());
                let s = w.sqrt();
                out.extend(part.values.iter().map(|v| s * v));
            }
            None => out.extend(std::iter::repeat_n(0.0, kind.dim())),
        }
    }
    out
}

/// Average precision of one ranked list of relevance flags.
pub fn average_precision(relevant: &[bool]) -> f64 {
    let total = relevant.iter().filter(|r| **r).count();
    if total == 0 {
        return 0.0;
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (k, &rel) in relevant.iter().enumerate() {
        if rel {
            hits += 1;
            sum += hits as f64 / (k + 1) as f64;
        }
    }
    sum / total as f64
}

fn check_labels<L: Eq + Hash>(labels: &[L]) -> Result<(), FeatureError> {
    let mut counts: HashMap<&L, usize> = HashMap::new();
    for l in labels {
        *counts.entry(l).or_default() += 1;
    }
    if counts.len() < 2 || counts.values().any(|&c| c < 2) {
        return Err(FeatureError::InsufficientLabels);
    }
    Ok(())
}

/// Leave-one-out mAP over a full distance matrix. Each item ranks all other
/// items by ascending distance (ties by index); relevance is label equality.
pub fn mean_average_precision<L: Eq + Hash>(distances: &[Vec<f64>], labels: &[L]) -> Result<f64, FeatureError> {
    check_labels(labels)?;
    let n = labels.len();
    let mut total = 0.0;
    for q in 0..n {
        let mut others: Vec<usize> = (0..n).filter(|&i| i != q).collect();
        others.sort_by(|&a, &b| distances[q][a].total_cmp(&distances[q][b]).then(a.cmp(&b)));
        let relevant: Vec<bool> = others.iter().map(|&i| labels[i] == labels[q]).collect();
        total += average_precision(&relevant);
    }
    Ok(total / n as f64)
}

/// Retrieval quality of a weight profile on a labeled corpus.
pub fn evaluate_map<L: Eq + Hash>(
    descriptors: &[Descriptor],
    labels: &[L],
    profile: &WeightProfile,
) -> Result<f64, FeatureError> {
    if descriptors.len() != labels.len() {
        return Err(FeatureError::DimensionMismatch {
            expected: descriptors.len(),
            got: labels.len(),
        });
    }
    check_labels(labels)?;
    let combined: Vec<Vec<f64>> = descriptors.iter().map(|d| combine(d, profile)).collect();
    let distances: Vec<Vec<f64>> = combined
        .iter()
        .map(|a| combined.iter().map(|b| l2(a, b)).collect())
        .collect();
    mean_average_precision(&distances, labels)
}
