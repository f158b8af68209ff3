//! Run configuration: a JSON document covering the dataspace, the physical
//! system, the model template, training hyperparameters, and output paths.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampling::ResponseKind;
use crate::sparsify::StructuredMaskKind;
use crate::train::TrainConfig;

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub dataspace: DataspaceConfig,
    pub system: SystemConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub paths: PathsConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataspaceConfig {
    /// Published case number, 1 through 7.
    pub case: u32,
    pub response: ResponseKind,
    /// Optional split-size overrides; the full published sizes apply when
    /// absent.
    pub n_train: Option<usize>,
    pub n_val: Option<usize>,
    pub n_test: Option<usize>,
    /// Optional frequency sub-range [lo, hi] in rad/s.
    pub freq_range: Option<(f64, f64)>,
}

impl Default for DataspaceConfig {
    fn default() -> Self {
        DataspaceConfig {
            case: 1,
            response: ResponseKind::Displacement,
            n_train: None,
            n_val: None,
            n_test: None,
            freq_range: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    /// Cubic spring coefficient as a multiple of the (story) stiffness;
    /// 0 keeps the system linear.
    pub cubic_ratio: f64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        SystemConfig { cubic_ratio: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateKind {
    /// Fully-connected layers only.
    Dense,
    /// Convolution stack feeding a masked linear layer.
    Sparse,
    /// Convolution stack feeding a dense head.
    ConvDense,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub template: TemplateKind,
    /// Convolution blocks in the stack.
    pub n_l: usize,
    /// Filters per convolution block.
    pub n_c: usize,
    /// Fully-connected layers (the dense template and the conv-dense head).
    pub n_fc: usize,
    /// Mask structure for the sparse template when no mask file is given.
    pub structure: Option<StructuredMaskKind>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            template: TemplateKind::Dense,
            n_l: 1,
            n_c: 16,
            n_fc: 1,
            structure: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    /// Directory receiving datasets and normalization statistics.
    pub data_dir: PathBuf,
    pub checkpoint: PathBuf,
    pub history: PathBuf,
    pub report: PathBuf,
    pub mask: PathBuf,
    pub sparsity_report: PathBuf,
    pub prediction: PathBuf,
}

impl Default for PathsConfig {
    fn default() -> Self {
        PathsConfig {
            data_dir: PathBuf::from("out/data"),
            checkpoint: PathBuf::from("out/model.nck"),
            history: PathBuf::from("out/history.csv"),
            report: PathBuf::from("out/report.json"),
            mask: PathBuf::from("out/mask.nmk"),
            sparsity_report: PathBuf::from("out/sparsity.json"),
            prediction: PathBuf::from("out/prediction.csv"),
        }
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=7).contains(&self.dataspace.case) {
            return Err(Error::Config(format!(
                "case {} is not one of 1..=7",
                self.dataspace.case
            )));
        }
        if ![0.0, 0.25, 0.5, 0.75, 1.0].contains(&self.system.cubic_ratio) {
            return Err(Error::Config(format!(
                "cubic ratio {} is not in {{0, 0.25, 0.5, 0.75, 1}}",
                self.system.cubic_ratio
            )));
        }
        self.train.validate().map_err(|e| match e {
            Error::InvalidParam(msg) => Error::Config(msg),
            other => other,
        })
    }

    /// Model description JSON sits next to the checkpoint.
    pub fn model_spec_path(&self) -> PathBuf {
        self.paths.checkpoint.with_extension("json")
    }

    pub fn dataset_path(&self, split: crate::sampling::Split) -> PathBuf {
        self.paths
            .data_dir
            .join(format!("case{}_{}.nds", self.dataspace.case, split.name()))
    }

    pub fn stats_path(&self, which: &str) -> PathBuf {
        self.paths
            .data_dir
            .join(format!("case{}_{which}.nst", self.dataspace.case))
    }
}
