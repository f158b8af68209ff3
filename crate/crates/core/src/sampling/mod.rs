//! Dataspace definitions, Latin-hypercube load sampling, dataset generation
//! backed by the exact solvers, normalization and dataset persistence.

mod dataset;
mod io;
mod lhs;
mod normstats;

pub use dataset::{draw_load_params, generate_dataset, solve_response, Dataset, DatasetMeta, Split};
pub use io::{read_dataset, read_norm_stats, write_dataset, write_norm_stats, write_sample_csv};
pub use lhs::lhs_sample;
pub use normstats::{compute_norm_stats, normalize, Direction, NormStats};

use serde::{Deserialize, Serialize};

use crate::dynamics::{MdofParams, SdofParams, TimeGrid};
use crate::error::{Error, Result};

pub const DEFAULT_EPS_D: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CaseId {
    Case1,
    Case2,
    Case3,
    Case4,
    Case5,
    Case6,
    Case7,
}

impl CaseId {
    pub fn from_number(n: u32) -> Result<Self> {
        Ok(match n {
            1 => CaseId::Case1,
            2 => CaseId::Case2,
            3 => CaseId::Case3,
            4 => CaseId::Case4,
            5 => CaseId::Case5,
            6 => CaseId::Case6,
            7 => CaseId::Case7,
            _ => return Err(Error::InvalidParam(format!("unknown case number {n}"))),
        })
    }

    pub fn number(&self) -> u32 {
        match self {
            CaseId::Case1 => 1,
            CaseId::Case2 => 2,
            CaseId::Case3 => 3,
            CaseId::Case4 => 4,
            CaseId::Case5 => 5,
            CaseId::Case6 => 6,
            CaseId::Case7 => 7,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseKind {
    Displacement,
    Acceleration,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SystemKind {
    Sdof(SdofParams),
    Mdof(MdofParams),
}

/// One input dataspace: load-parameter ranges, the system driven by the
/// sampled loads, the observation grid and the nominal split sizes.
#[derive(Debug, Clone)]
pub struct Dataspace {
    pub case: CaseId,
    pub n_terms: usize,
    pub amp_range: (f64, f64),
    pub freq_range: (f64, f64),
    pub phase_range: (f64, f64),
    pub grid: TimeGrid,
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    pub system: SystemKind,
    pub response: ResponseKind,
    /// 1-based observed dof for MDOF systems (the study uses 6).
    pub response_dof: usize,
}

impl Dataspace {
    /// The published dataspace table. Nonlinear cases (5 and 7) take the
    /// cubic coefficient as `cubic_ratio` times the (story) stiffness;
    /// linear cases ignore it.
    pub fn standard(case: CaseId, response: ResponseKind, cubic_ratio: f64) -> Result<Self> {
        let two_pi = 2.0 * std::f64::consts::PI;
        let short = TimeGrid::new(5.0, 0.05, 0.001)?;
        let long = TimeGrid::new(20.0, 0.1, 0.001)?;
        let base = |n_terms, amp_hi, freq_hi: f64, grid, n_train, system| Dataspace {
            case,
            n_terms,
            amp_range: (0.0, amp_hi),
            freq_range: (0.0, freq_hi),
            phase_range: (0.0, two_pi),
            grid,
            n_train,
            n_val: 5000,
            n_test: 5000,
            system,
            response,
            response_dof: 6,
        };
        let lin_sdof = SystemKind::Sdof(SdofParams::reference(0.0));
        let space = match case {
            CaseId::Case1 => base(5, 10.0, 6.0 * std::f64::consts::PI, short, 1 << 18, lin_sdof),
            CaseId::Case2 => base(25, 10.0, 6.0 * std::f64::consts::PI, short, 1 << 18, lin_sdof),
            CaseId::Case3 => base(5, 10.0, 6.0 * std::f64::consts::PI, long, 1 << 18, lin_sdof),
            CaseId::Case4 => base(25, 10.0, 6.0 * std::f64::consts::PI, long, 1 << 18, lin_sdof),
            CaseId::Case5 => base(
                25,
                20.0,
                6.0 * std::f64::consts::PI,
                long,
                1 << 20,
                SystemKind::Sdof(SdofParams::reference(cubic_ratio)),
            ),
            CaseId::Case6 => base(
                25,
                4.0,
                20.0 * std::f64::consts::PI,
                long,
                1 << 20,
                SystemKind::Mdof(MdofParams::reference(0.0)),
            ),
            CaseId::Case7 => base(
                25,
                4.0,
                10.0 * std::f64::consts::PI,
                long,
                1 << 20,
                SystemKind::Mdof(MdofParams::reference(cubic_ratio)),
            ),
        };
        Ok(space)
    }

    /// Restricts the frequency range; used for the three Case-6 sub-ranges
    /// [0, 10 pi], [10 pi, 15 pi] and [15 pi, 20 pi].
    pub fn with_freq_range(mut self, lo: f64, hi: f64) -> Result<Self> {
        if !(lo <= hi) || lo < 0.0 {
            return Err(Error::InvalidParam(format!(
                "invalid frequency range [{lo}, {hi}]"
            )));
        }
        self.freq_range = (lo, hi);
        Ok(self)
    }

    /// Number of sampled dimensions, 3 per harmonic term.
    pub fn n_dims(&self) -> usize {
        3 * self.n_terms
    }

    pub fn nominal_size(&self, split: Split) -> usize {
        match split {
            Split::Train => self.n_train,
            Split::Val => self.n_val,
            Split::Test => self.n_test,
        }
    }

    pub fn is_nonlinear(&self) -> bool {
        match &self.system {
            SystemKind::Sdof(p) => p.cubic_coeff != 0.0,
            SystemKind::Mdof(p) => p.cubic_coeff != 0.0,
        }
    }
}
