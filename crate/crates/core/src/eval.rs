//! Test-set metrics, end-to-end prediction through the normalization layer,
//! and report files.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Model, Phase};
use crate::sampling::{normalize, Direction, NormStats};

/// Summary of a model's accuracy on one split.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub case: String,
    pub model: String,
    /// Mean squared error in normalized space.
    pub mse: f64,
    pub mean_rel_err_pct: f64,
    pub n_test: usize,
    #[serde(skip)]
    pub per_sample_rel_err_pct: Vec<f64>,
}

/// Mean over samples of the squared error norm, in evaluation phase.
/// Requires finalized batch-norm statistics.
pub fn mse_metric(model: &mut Model, x: &Array2<f64>, y: &Array2<f64>) -> Result<f64> {
    if model.has_unfinalized_bn() {
        return Err(Error::BnNotFinalized);
    }
    if x.nrows() == 0 {
        return Err(Error::InvalidParam("empty evaluation set".into()));
    }
    let pred = model.forward(x, Phase::Eval)?;
    if pred.dim() != y.dim() {
        return Err(Error::ShapeMismatch(format!(
            "predictions {:?} vs targets {:?}",
            pred.dim(),
            y.dim()
        )));
    }
    Ok((&pred - y).mapv(|r| r * r).sum() / x.nrows() as f64)
}

/// Norm of the error relative to the norm of the reference, in percent.
pub fn relative_error(y: &[f64], y_hat: &[f64]) -> Result<f64> {
    if y.len() != y_hat.len() {
        return Err(Error::ShapeMismatch(format!(
            "vectors of length {} and {}",
            y.len(),
            y_hat.len()
        )));
    }
    let ref_norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    if ref_norm == 0.0 {
        return Err(Error::InvalidParam(
            "relative error undefined for a zero reference vector".into(),
        ));
    }
    let err_norm = y
        .iter()
        .zip(y_hat.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    Ok(100.0 * err_norm / ref_norm)
}

/// Maps raw load series to physical response predictions: normalize with the
/// training statistics, evaluate, denormalize.
pub fn predict(
    model: &mut Model,
    x_raw: &Array2<f64>,
    x_stats: &NormStats,
    y_stats: &NormStats,
) -> Result<Array2<f64>> {
    if model.has_unfinalized_bn() {
        return Err(Error::BnNotFinalized);
    }
    let x_norm = normalize(x_raw, x_stats, Direction::Forward)?;
    let pred_norm = model.forward(&x_norm, Phase::Eval)?;
    if pred_norm.ncols() != y_stats.len() {
        return Err(Error::ShapeMismatch(format!(
            "model outputs {} components, statistics cover {}",
            pred_norm.ncols(),
            y_stats.len()
        )));
    }
    normalize(&pred_norm, y_stats, Direction::Inverse)
}

/// Runs the full evaluation on raw (unnormalized) test data.
pub fn evaluate(
    model: &mut Model,
    x_raw: &Array2<f64>,
    y_raw: &Array2<f64>,
    x_stats: &NormStats,
    y_stats: &NormStats,
    case: &str,
    model_name: &str,
) -> Result<EvalReport> {
    let x_norm = normalize(x_raw, x_stats, Direction::Forward)?;
    let y_norm = normalize(y_raw, y_stats, Direction::Forward)?;
    let mse = mse_metric(model, &x_norm, &y_norm)?;
    let pred = predict(model, x_raw, x_stats, y_stats)?;
    let mut per_sample = Vec::with_capacity(y_raw.nrows());
    for (truth, guess) in y_raw.outer_iter().zip(pred.outer_iter()) {
        per_sample.push(relative_error(
            truth.as_slice().expect("standard layout"),
            guess.as_slice().expect("standard layout"),
        )?);
    }
    let mean = per_sample.iter().sum::<f64>() / per_sample.len() as f64;
    Ok(EvalReport {
        case: case.to_string(),
        model: model_name.to_string(),
        mse,
        mean_rel_err_pct: mean,
        n_test: y_raw.nrows(),
        per_sample_rel_err_pct: per_sample,
    })
}

impl EvalReport {
    pub fn write_json(&self, path: &Path) -> Result<()> {
        let file = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(file, self)?;
        Ok(())
    }

    pub fn write_per_sample_csv(&self, path: &Path) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        writeln!(out, "sample_id,rel_err_pct")?;
        for (i, e) in self.per_sample_rel_err_pct.iter().enumerate() {
            writeln!(out, "{i},{e:.6}")?;
        }
        Ok(())
    }
}

/// One predicted trace next to its reference, on the observation grid.
pub fn write_prediction_csv(
    path: &Path,
    times: &[f64],
    y_true: &[f64],
    y_pred: &[f64],
) -> Result<()> {
    if times.len() != y_true.len() || times.len() != y_pred.len() {
        return Err(Error::ShapeMismatch(
            "time, reference, and prediction columns differ in length".into(),
        ));
    }
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "t,y_true,y_pred")?;
    for i in 0..times.len() {
        writeln!(out, "{:.6},{:.12e},{:.12e}", times[i], y_true[i], y_pred[i])?;
    }
    Ok(())
}
