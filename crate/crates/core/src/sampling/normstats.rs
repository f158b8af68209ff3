//! Componentwise normalization statistics computed on the training split.

use ndarray::Array2;

use super::{Dataset, DEFAULT_EPS_D};
use crate::error::{Error, Result};

/// Componentwise mean and biased variance plus the stabilizer epsilon.
#[derive(Debug, Clone, PartialEq)]
pub struct NormStats {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
    pub epsilon: f64,
}

impl NormStats {
    pub fn from_columns(data: &Array2<f64>, epsilon: f64) -> Self {
        let n = data.nrows() as f64;
        let mut mean = vec![0.0; data.ncols()];
        let mut var = vec![0.0; data.ncols()];
        for (j, col) in data.columns().into_iter().enumerate() {
            let mu = col.sum() / n;
            mean[j] = mu;
            var[j] = col.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / n;
        }
        Self { mean, var, epsilon }
    }

    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }
}

/// Statistics for inputs and outputs of a training split.
pub fn compute_norm_stats(train: &Dataset) -> Result<(NormStats, NormStats)> {
    if train.n_samples() == 0 {
        return Err(Error::InvalidParam("training split is empty".into()));
    }
    Ok((
        NormStats::from_columns(&train.x, DEFAULT_EPS_D),
        NormStats::from_columns(&train.y, DEFAULT_EPS_D),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

/// Componentwise (eta - mu)/sqrt(V + eps) or its exact algebraic inverse.
pub fn normalize(data: &Array2<f64>, stats: &NormStats, direction: Direction) -> Result<Array2<f64>> {
    if data.ncols() != stats.len() {
        return Err(Error::ShapeMismatch(format!(
            "matrix has {} columns but stats cover {}",
            data.ncols(),
            stats.len()
        )));
    }
    let mut out = data.clone();
    for (j, mut col) in out.columns_mut().into_iter().enumerate() {
        let sd = (stats.var[j] + stats.epsilon).sqrt();
        match direction {
            Direction::Forward => col.mapv_inplace(|v| (v - stats.mean[j]) / sd),
            Direction::Inverse => col.mapv_inplace(|v| v * sd + stats.mean[j]),
        }
    }
    Ok(out)
}
