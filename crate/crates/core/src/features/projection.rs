use std::io::{self, Read, Write};

use nalgebra::{DMatrix, SymmetricEigen};

use super::{FeatureError, Part};

pub const EMBED_DIM: usize = 64;

const MODEL_MAGIC: &[u8; 4] = b"GSPM";
const MODEL_VERSION: u16 = 1;

/// Linear compression fitted by principal component analysis.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionModel {
    pub input_dim: usize,
    pub output_dim: usize,
    pub mean: Vec<f64>,
    /// `output_dim` orthonormal rows of length `input_dim`.
    pub basis: Vec<Vec<f64>>,
    /// Variance along each basis row, non-increasing.
    pub explained_variance: Vec<f64>,
}

/// Fits mean and the top principal directions of the sample covariance.
/// Output dimension is 64, or `input_dim` when that is smaller.
pub fn fit_projection(embeddings: &[Vec<f64>]) -> Result<ProjectionModel, FeatureError> {
    let k = embeddings.len();
    if k < 2 {
        return Err(FeatureError::InsufficientSamples { needed: 2, got: k });
    }
    let dim = embeddings[0].len();
    if let Some(bad) = embeddings.iter().find(|e| e.len() != dim) {
        return Err(FeatureError::DimensionMismatch {
            expected: dim,
            got: bad.len(),
        });
    }
    if dim == 0 || embeddings.iter().all(|e| e == &embeddings[0]) {
        return Err(FeatureError::DegenerateData);
    }

    let mut mean = vec![0.0; dim];
    for e in embeddings {
        for (m, v) in mean.iter_mut().zip(e) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= k as f64);

    let centered = DMatrix::from_fn(k, dim, |r, c| embeddings[r][c] - mean[c]);
    let cov = (centered.transpose() * &centered) / (k as f64 - 1.0);
    let eig = SymmetricEigen::new(cov);

    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));

    let output_dim = EMBED_DIM.min(dim);
    let mut basis = Vec::with_capacity(output_dim);
    let mut explained_variance = Vec::with_capacity(output_dim);
    for &i in order.iter().take(output_dim) {
        let mut row: Vec<f64> = eig.eigenvectors.column(i).iter().copied().collect();
        // Sign convention: largest-magnitude component positive.
        let pivot = row
            .iter()
            .copied()
            .fold(0.0f64, |acc, v| if v.abs() > acc.abs() { v } else { acc });
        if pivot < 0.0 {
            row.iter_mut().for_each(|v| *v = -*v);
        }
        basis.push(row);
        explained_variance.push(eig.eigenvalues[i].max(0.0));
    }

    Ok(ProjectionModel {
        input_dim: dim,
        output_dim,
        mean,
        basis,
        explained_variance,
    })
}

/// `basis · (embedding − mean)` without normalization.
pub fn project_raw(model: &ProjectionModel, embedding: &[f64]) -> Result<Vec<f64>, FeatureError> {
    if embedding.len() != model.input_dim {
        return Err(FeatureError::DimensionMismatch {
            expected: model.input_dim,
            got: embedding.len(),
        });
    }
    Ok(model
        .basis
        .iter()
        .map(|row| {
            row.iter()
                .zip(embedding.iter().zip(&model.mean))
                .map(|(b, (e, m))| b * (e - m))
                .sum()
        })
        .collect())
}

/// Projected, L2-normalized embedding part. Models with fewer than 64
/// outputs are zero-padded so the part dimension stays fixed.
pub fn project(model: &ProjectionModel, embedding: &[f64]) -> Result<Part, FeatureError> {
    let mut raw = project_raw(model, embedding)?;
    raw.resize(EMBED_DIM, 0.0);
    Ok(Part::normalized(raw))
}

impl ProjectionModel {
    pub fn write_to(&self, mut w: impl Write) -> io::Result<()> {
        w.write_all(MODEL_MAGIC)?;
        w.write_all(&MODEL_VERSION.to_le_bytes())?;
        w.write_all(&(self.input_dim as u32).to_le_bytes())?;
        w.write_all(&(self.output_dim as u32).to_le_bytes())?;
        for v in self
            .mean
            .iter()
            .chain(self.basis.iter().flatten())
            .chain(&self.explained_variance)
        {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self, FeatureError> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MODEL_MAGIC {
            return Err(FeatureError::Format("bad projection model magic".into()));
        }
        let mut b2 = [0u8; 2];
        r.read_exact(&mut b2)?;
        if u16::from_le_bytes(b2) != MODEL_VERSION {
            return Err(FeatureError::Format("unsupported projection model version".into()));
        }
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b4)?;
        let input_dim = u32::from_le_bytes(b4) as usize;
        r.read_exact(&mut b4)?;
        let output_dim = u32::from_le_bytes(b4) as usize;
        if output_dim > input_dim || output_dim > EMBED_DIM {
            return Err(FeatureError::Format("inconsistent projection dimensions".into()));
        }
        let mut read_vec = |n: usize| -> io::Result<Vec<f64>> {
            let mut out = Vec::with_capacity(n);
            let mut b8 = [0u8; 8];
            for _ in 0..n {
                r.read_exact(&mut b8)?;
                out.push(f64::from_le_bytes(b8));
            }
            Ok(out)
        };
        let mean = read_vec(input_dim)?;
        let basis = (0..output_dim)
            .map(|_| read_vec(input_dim))
            .collect::<io::Result<Vec<_>>>()?;
        let explained_variance = read_vec(output_dim)?;
        Ok(ProjectionModel {
            input_dim,
            output_dim,
            mean,
            basis,
            explained_variance,
        })
    }
}
