//! Magnitude-threshold sparsity analysis of trained dense layers, masked
//! layer construction with weight transfer, convolution-enriched templates,
//! network growth, and the two-phase trainer that accompanies it.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Activation, FcLayer, Layer, LayerSpec, Model};
use crate::train::{train_with_state, AdamState, DataPair, History, TrainConfig};
use crate::util::{LeReader, LeWriter};

pub const DEFAULT_MASK_RATIO: f64 = 0.05;
pub const DEFAULT_CONV_CHANNELS: usize = 16;

/// Survival count on one diagonal of a weight matrix; offset is i - j.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiagonalCount {
    pub offset: i64,
    pub surviving: usize,
}

/// Summary of a magnitude-threshold pass over a weight matrix.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SparsityReport {
    pub threshold: f64,
    pub nnz: usize,
    /// Fraction of surviving entries on or below the main diagonal.
    pub lower_fraction: f64,
    /// 99th percentile of surviving sub-diagonal offsets.
    pub band_width: usize,
    pub histogram: Vec<DiagonalCount>,
}

/// Structured connectivity patterns fitted from a sparsity report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StructuredMaskKind {
    LowerTriangular,
    BandedLower { band_width: usize },
}

impl SparsityReport {
    /// Picks a structured pattern covering the observed survivors: the full
    /// lower triangle when survivors are essentially lower-triangular and
    /// span most of it, otherwise a band at the 99th-percentile offset.
    pub fn fitted_structure(&self, n: usize) -> StructuredMaskKind {
        let max_offset = self
            .histogram
            .iter()
            .filter(|d| d.surviving > 0)
            .map(|d| d.offset)
            .max()
            .unwrap_or(0);
        if self.lower_fraction >= 0.99 && max_offset as f64 >= 0.9 * n as f64 {
            StructuredMaskKind::LowerTriangular
        } else {
            StructuredMaskKind::BandedLower {
                band_width: self.band_width.min(n.saturating_sub(1)),
            }
        }
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let file = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(file, self)?;
        Ok(())
    }
}

/// Keeps entries whose magnitude is at least `ratio` times the largest
/// magnitude in the matrix (ties kept).
pub fn sparsity_mask(w: &Array2<f64>, ratio: f64) -> Result<(Array2<f64>, SparsityReport)> {
    if w.is_empty() {
        return Err(Error::InvalidParam("empty weight matrix".into()));
    }
    let max_abs = w.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if max_abs == 0.0 {
        return Err(Error::InvalidParam(
            "all-zero weight matrix: relative threshold undefined".into(),
        ));
    }
    let threshold = ratio * max_abs;
    let (rows, cols) = w.dim();
    let mut mask = Array2::zeros((rows, cols));
    let mut nnz = 0usize;
    let mut lower = 0usize;
    let mut counts: std::collections::BTreeMap<i64, usize> = std::collections::BTreeMap::new();
    let mut offsets: Vec<i64> = Vec::new();
    for i in 0..rows {
        for j in 0..cols {
            if w[[i, j]].abs() >= threshold {
                mask[[i, j]] = 1.0;
                nnz += 1;
                let off = i as i64 - j as i64;
                if off >= 0 {
                    lower += 1;
                }
                *counts.entry(off).or_insert(0) += 1;
                offsets.push(off);
            }
        }
    }
    offsets.sort_unstable();
    let idx = ((0.99 * offsets.len() as f64).ceil() as usize).saturating_sub(1);
    let band_width = offsets[idx].max(0) as usize;
    let report = SparsityReport {
        threshold,
        nnz,
        lower_fraction: lower as f64 / nnz as f64,
        band_width,
        histogram: counts
            .into_iter()
            .map(|(offset, surviving)| DiagonalCount { offset, surviving })
            .collect(),
    };
    Ok((mask, report))
}

/// Builds an n-by-n 0/1 mask for a structured connectivity pattern.
pub fn structured_mask(kind: StructuredMaskKind, n: usize) -> Result<Array2<f64>> {
    if n == 0 {
        return Err(Error::InvalidParam("mask size must be positive".into()));
    }
    let band = match kind {
        StructuredMaskKind::LowerTriangular => n - 1,
        StructuredMaskKind::BandedLower { band_width } => {
            if band_width >= n {
                return Err(Error::InvalidParam(format!(
                    "band width {band_width} must be below the matrix size {n}"
                )));
            }
            band_width
        }
    };
    let mut mask = Array2::zeros((n, n));
    for i in 0..n {
        for j in i.saturating_sub(band)..=i {
            mask[[i, j]] = 1.0;
        }
    }
    Ok(mask)
}

/// Number of entries a structured mask keeps.
pub fn structured_mask_count(kind: StructuredMaskKind, n: usize) -> usize {
    match kind {
        StructuredMaskKind::LowerTriangular => n * (n + 1) / 2,
        StructuredMaskKind::BandedLower { band_width } => {
            (0..n).map(|i| i.min(band_width) + 1).sum()
        }
    }
}

/// Masks a trained dense layer: surviving weights and all biases carry over,
/// masked entries are zeroed and stay frozen.
pub fn build_sc_from_fc(fc: &FcLayer, mask: Array2<f64>) -> Result<FcLayer> {
    if mask.dim() != fc.w.dim() {
        return Err(Error::ShapeMismatch(format!(
            "mask shape {:?} does not match weights {:?}",
            mask.dim(),
            fc.w.dim()
        )));
    }
    let mut sc = FcLayer::new(fc.n_in(), fc.n_out(), None, fc.activation);
    sc.w = &fc.w * &mask;
    sc.b = fc.b.clone();
    sc.mask = Some(mask);
    Ok(sc)
}

fn conv_stack_specs(n: usize, n_l: usize, n_c: usize) -> Vec<LayerSpec> {
    let mut specs = vec![LayerSpec::Conv1d {
        filter: 2,
        c_in: 1,
        c_out: n_c,
        activation: Activation::Relu,
    }];
    for _ in 1..n_l {
        specs.push(LayerSpec::Bn {
            n_h: n,
            param_mode: crate::nn::BnParamMode::PerHeight,
            epsilon: crate::nn::DEFAULT_BN_EPSILON,
        });
        specs.push(LayerSpec::Conv1d {
            filter: 2,
            c_in: n_c,
            c_out: n_c,
            activation: Activation::Relu,
        });
    }
    specs.push(LayerSpec::Bn {
        n_h: n,
        param_mode: crate::nn::BnParamMode::PerHeight,
        epsilon: crate::nn::DEFAULT_BN_EPSILON,
    });
    specs.push(LayerSpec::Conv1d {
        filter: 1,
        c_in: n_c,
        c_out: 1,
        activation: Activation::Linear,
    });
    specs
}

/// Convolution stack feeding a masked linear output layer; the masked layer
/// can be initialized from a trained dense layer's surviving parameters.
pub fn build_sparse_template(
    n: usize,
    n_l: usize,
    n_c: usize,
    sc_mask: Array2<f64>,
    transfer: Option<(&Array2<f64>, &Array1<f64>)>,
    seed: u64,
) -> Result<Model> {
    if n_l == 0 {
        return Err(Error::InvalidParam(
            "the template needs at least one convolution block".into(),
        ));
    }
    let mut specs = conv_stack_specs(n, n_l, n_c);
    specs.push(LayerSpec::Sc {
        n_in: n,
        n_out: n,
        activation: Activation::Linear,
    });
    let mut model = Model::from_specs(&specs, seed)?;
    let sc_idx = model.layers.len() - 1;
    model.apply_mask(sc_idx, sc_mask)?;
    if let Some((w, b)) = transfer {
        match &mut model.layers[sc_idx] {
            Layer::Fc(l) => {
                if w.dim() != l.w.dim() || b.len() != l.b.len() {
                    return Err(Error::ShapeMismatch(
                        "transferred parameters do not match the masked layer".into(),
                    ));
                }
                l.w = w * l.mask.as_ref().expect("mask just applied");
                l.b = b.clone();
            }
            _ => unreachable!("last template layer is the masked one"),
        }
    }
    Ok(model)
}

/// Convolution stack feeding a dense head; with zero convolution blocks this
/// degenerates to the pure dense model.
pub fn build_conv_dense_template(
    n: usize,
    n_l: usize,
    n_c: usize,
    n_fc_remaining: usize,
    seed: u64,
) -> Result<Model> {
    if n_fc_remaining == 0 {
        return Err(Error::InvalidParam(
            "the dense head needs at least one layer".into(),
        ));
    }
    let mut specs = if n_l == 0 {
        Vec::new()
    } else {
        conv_stack_specs(n, n_l, n_c)
    };
    for _ in 1..n_fc_remaining {
        specs.push(LayerSpec::Fc {
            n_in: n,
            n_out: n,
            activation: Activation::Relu,
        });
    }
    specs.push(LayerSpec::Fc {
        n_in: n,
        n_out: n,
        activation: Activation::Linear,
    });
    Model::from_specs(&specs, seed)
}

/// Epoch budget and channel width for one growth step.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GrowthPlan {
    pub n_c: usize,
    /// Epochs with all pre-existing parameters frozen.
    pub phase1_epochs: usize,
    /// Epochs with everything trainable.
    pub phase2_epochs: usize,
}

/// Inserts a CONV + BN pair immediately after the first batch-norm layer,
/// leaving every existing parameter value untouched. Returns the name
/// prefixes of the newly inserted layers (positions shift for layers after
/// the insertion point, so parameter names must be re-derived afterwards).
pub fn insert_bn_conv(model: &mut Model, n_c: usize, seed: u64) -> Result<Vec<String>> {
    let bn_idx = model
        .layers
        .iter()
        .position(|l| matches!(l, Layer::Bn(_)))
        .ok_or_else(|| {
            Error::InvalidParam("growth needs a model with a batch-norm layer".into())
        })?;
    let n_h = match &model.layers[bn_idx] {
        Layer::Bn(bn) => bn.n_h(),
        _ => unreachable!(),
    };
    let mut conv = Layer::Conv(crate::nn::ConvLayer::new(2, n_c, n_c, Activation::Relu));
    crate::nn::init_layer(&mut conv, seed, bn_idx + 1);
    let mut bn = Layer::Bn(crate::nn::BnLayer::new(
        n_h,
        crate::nn::BnParamMode::PerHeight,
        crate::nn::DEFAULT_BN_EPSILON,
    ));
    crate::nn::init_layer(&mut bn, seed, bn_idx + 2);
    model.layers.insert(bn_idx + 1, bn);
    model.layers.insert(bn_idx + 1, conv);
    Ok(vec![
        format!("layer{:02}.", bn_idx + 1),
        format!("layer{:02}.", bn_idx + 2),
    ])
}

/// Trains the newly inserted layers alone, then fine-tunes everything with
/// the optimizer state carried over.
pub fn two_phase_train(
    model: &mut Model,
    new_layer_prefixes: &[String],
    train_set: DataPair,
    val_set: DataPair,
    cfg: &TrainConfig,
    plan: &GrowthPlan,
) -> Result<History> {
    if new_layer_prefixes.is_empty() {
        return Err(Error::InvalidParam("no new layers to train".into()));
    }
    let mut old_params: Vec<String> = Vec::new();
    model.visit_params(&mut |p| {
        if !new_layer_prefixes.iter().any(|pre| p.name.starts_with(pre.as_str())) {
            old_params.push(p.name.clone());
        }
    });
    let mut state = AdamState::default();
    let phase1 = TrainConfig {
        epochs: plan.phase1_epochs,
        frozen_params: old_params,
        ..cfg.clone()
    };
    let mut history = train_with_state(
        model,
        DataPair {
            x: train_set.x,
            y: train_set.y,
        },
        DataPair {
            x: val_set.x,
            y: val_set.y,
        },
        &phase1,
        &mut state,
    )?;
    let phase2 = TrainConfig {
        epochs: plan.phase2_epochs,
        frozen_params: Vec::new(),
        ..cfg.clone()
    };
    let tail = train_with_state(model, train_set, val_set, &phase2, &mut state)?;
    history.train_loss.extend(tail.train_loss);
    history.val_loss.extend(tail.val_loss);
    Ok(history)
}

const MASK_MAGIC: &[u8; 4] = b"NMK1";

/// Writes a 0/1 mask row-major, bit-packed, little-endian framed.
pub fn write_mask(mask: &Array2<f64>, path: &Path) -> Result<()> {
    let mut w = LeWriter::new(BufWriter::new(File::create(path)?));
    w.magic(MASK_MAGIC)?;
    let (rows, cols) = mask.dim();
    w.u64(rows as u64)?;
    w.u64(cols as u64)?;
    let mut packed = vec![0u8; (rows * cols + 7) / 8];
    for (bit, v) in mask.iter().enumerate() {
        if *v != 0.0 {
            packed[bit / 8] |= 1 << (bit % 8);
        }
    }
    w.bytes(&packed)?;
    Ok(())
}

pub fn read_mask(path: &Path) -> Result<Array2<f64>> {
    let mut r = LeReader::new(BufReader::new(File::open(path)?));
    r.magic(MASK_MAGIC)?;
    let rows = r.u64()? as usize;
    let cols = r.u64()? as usize;
    let packed = r.bytes((rows * cols + 7) / 8, "mask bits")?;
    let mut mask = Array2::zeros((rows, cols));
    for (bit, v) in mask.iter_mut().enumerate() {
        if packed[bit / 8] & (1 << (bit % 8)) != 0 {
            *v = 1.0;
        }
    }
    Ok(mask)
}
