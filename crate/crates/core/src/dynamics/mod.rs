//! Exact reference solvers for the harmonic-loaded dynamical systems:
//! closed-form linear SDOF/MDOF solutions and an implicit Newmark
//! time integrator for the nonlinear (cubic-spring) variants.

mod eigen;
mod mdof;
mod newmark;
mod sdof;

pub use eigen::{jacobi_eig_sym, ModalBasis};
pub use mdof::{
    assemble_mdof, mass_diagonal, mdof_internal_force, mdof_linear_response, MdofSystem,
};
pub use newmark::{newmark_integrate, DynamicSystem, NewmarkResult};
pub use sdof::{sdof_linear_response, SdofAnalyticCoeffs, SdofSystem};

use crate::error::{Error, Result};

pub const NDOF_MDOF: usize = 6;

/// One sampled harmonic load realization: p(t) = sum_i a_i sin(w_i t + phi_i).
/// For MDOF cases the amplitudes are ground-acceleration amplitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicLoad {
    amplitudes: Vec<f64>,
    frequencies: Vec<f64>,
    phases: Vec<f64>,
}

impl HarmonicLoad {
    pub fn new(amplitudes: Vec<f64>, frequencies: Vec<f64>, phases: Vec<f64>) -> Result<Self> {
        let n = amplitudes.len();
        if frequencies.len() != n || phases.len() != n {
            return Err(Error::ShapeMismatch(format!(
                "harmonic load arrays must share one length, got {}/{}/{}",
                n,
                frequencies.len(),
                phases.len()
            )));
        }
        if amplitudes.iter().any(|a| !a.is_finite() || *a < 0.0) {
            return Err(Error::InvalidParam("amplitudes must be >= 0".into()));
        }
        if frequencies.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidParam("frequencies must be >= 0".into()));
        }
        if phases
            .iter()
            .any(|p| !p.is_finite() || *p < 0.0 || *p >= 2.0 * std::f64::consts::PI)
        {
            return Err(Error::InvalidParam("phases must lie in [0, 2 pi)".into()));
        }
        Ok(Self {
            amplitudes,
            frequencies,
            phases,
        })
    }

    pub fn n_terms(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[f64] {
        &self.amplitudes
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    /// Evaluates the load at time `t`.
    pub fn eval(&self, t: f64) -> f64 {
        let mut s = 0.0;
        for i in 0..self.amplitudes.len() {
            s += self.amplitudes[i] * (self.frequencies[i] * t + self.phases[i]).sin();
        }
        s
    }

    /// Samples the load on the observation grid.
    pub fn sample(&self, grid: &TimeGrid) -> Vec<f64> {
        (0..grid.n_points())
            .map(|k| self.eval(k as f64 * grid.obs_step))
            .collect()
    }
}

/// SDOF system parameters; `cubic_coeff = 0` selects the linear system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdofParams {
    pub mass: f64,
    pub damping: f64,
    pub stiffness: f64,
    pub cubic_coeff: f64,
}

impl SdofParams {
    pub fn new(mass: f64, damping: f64, stiffness: f64, cubic_coeff: f64) -> Result<Self> {
        if mass <= 0.0 || stiffness <= 0.0 {
            return Err(Error::InvalidParam("mass and stiffness must be > 0".into()));
        }
        if damping < 0.0 || cubic_coeff < 0.0 {
            return Err(Error::InvalidParam(
                "damping and cubic coefficient must be >= 0".into(),
            ));
        }
        Ok(Self {
            mass,
            damping,
            stiffness,
            cubic_coeff,
        })
    }

    /// The m = 13.5 kg, T_n = 0.5 s, xi = 0.02 reference system.
    pub fn reference(cubic_ratio: f64) -> Self {
        let mass = 13.5;
        let omega_n = 4.0 * std::f64::consts::PI; // 2 pi / 0.5 s
        let xi = 0.02;
        let stiffness = mass * omega_n * omega_n;
        Self {
            mass,
            damping: 2.0 * mass * omega_n * xi,
            stiffness,
            cubic_coeff: cubic_ratio * stiffness,
        }
    }

    pub fn natural_freq(&self) -> f64 {
        (self.stiffness / self.mass).sqrt()
    }

    pub fn damping_ratio(&self) -> f64 {
        self.damping / (2.0 * self.mass * self.natural_freq())
    }

    pub fn is_underdamped(&self) -> bool {
        self.damping * self.damping < 4.0 * self.mass * self.stiffness
    }
}

/// Six-story shear frame parameters (three distinct story masses, two
/// stories each, stacked bottom to top).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MdofParams {
    pub story_masses: [f64; 3],
    pub youngs_modulus: f64,
    pub moment_of_inertia: f64,
    pub story_height: f64,
    pub damping_ratio: f64,
    pub cubic_coeff: f64,
}

impl MdofParams {
    pub fn new(
        story_masses: [f64; 3],
        youngs_modulus: f64,
        moment_of_inertia: f64,
        story_height: f64,
        damping_ratio: f64,
        cubic_coeff: f64,
    ) -> Result<Self> {
        let positive = story_masses.iter().all(|m| *m > 0.0)
            && youngs_modulus > 0.0
            && moment_of_inertia > 0.0
            && story_height > 0.0
            && damping_ratio > 0.0;
        if !positive {
            return Err(Error::InvalidParam(
                "all MDOF physical parameters must be > 0".into(),
            ));
        }
        if cubic_coeff < 0.0 {
            return Err(Error::InvalidParam("cubic coefficient must be >= 0".into()));
        }
        Ok(Self {
            story_masses,
            youngs_modulus,
            moment_of_inertia,
            story_height,
            damping_ratio,
            cubic_coeff,
        })
    }

    /// The six-story frame of the reference study; `cubic_ratio` scales the
    /// story stiffness into the cubic coefficient (0 -> linear).
    pub fn reference(cubic_ratio: f64) -> Self {
        let mut p = Self {
            story_masses: [14000.0, 12000.0, 10000.0],
            youngs_modulus: 2.0e11,
            moment_of_inertia: 4.2e-4,
            story_height: 3.5,
            damping_ratio: 0.02,
            cubic_coeff: 0.0,
        };
        p.cubic_coeff = cubic_ratio * p.story_stiffness();
        p
    }

    /// Story shear stiffness k = 24 E I / H^3.
    pub fn story_stiffness(&self) -> f64 {
        24.0 * self.youngs_modulus * self.moment_of_inertia / self.story_height.powi(3)
    }
}

/// Uniform observation grid plus the finer integration substep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub duration: f64,
    pub obs_step: f64,
    pub fine_step: f64,
}

impl TimeGrid {
    pub fn new(duration: f64, obs_step: f64, fine_step: f64) -> Result<Self> {
        if duration <= 0.0 || obs_step <= 0.0 || fine_step <= 0.0 {
            return Err(Error::InvalidParam("time grid values must be > 0".into()));
        }
        if fine_step > obs_step {
            return Err(Error::InvalidParam(
                "fine_step must not exceed obs_step".into(),
            ));
        }
        let g = Self {
            duration,
            obs_step,
            fine_step,
        };
        let steps = duration / obs_step;
        if (steps - steps.round()).abs() > 1e-9 * steps.max(1.0) {
            return Err(Error::InvalidParam(
                "obs_step must divide duration evenly".into(),
            ));
        }
        let sub = obs_step / fine_step;
        if (sub - sub.round()).abs() > 1e-9 * sub.max(1.0) {
            return Err(Error::InvalidParam(
                "fine_step must divide obs_step evenly".into(),
            ));
        }
        Ok(g)
    }

    /// Number of observation instants, n = duration/obs_step + 1.
    pub fn n_points(&self) -> usize {
        (self.duration / self.obs_step).round() as usize + 1
    }

    /// Integration substeps per observation interval.
    pub fn substeps(&self) -> usize {
        (self.obs_step / self.fine_step).round() as usize
    }
}

/// Displacement and acceleration sampled on the observation grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseSeries {
    pub displacement: Vec<f64>,
    pub acceleration: Vec<f64>,
}

/// Closed-form coefficients shared by the SDOF solution and every MDOF mode:
/// an underdamped oscillator q'' + 2 xi wn q' + wn^2 q = (1/m_eff) sum_j a_j
/// sin(w_j t + phi_j) with zero initial conditions, where k_eff = m_eff wn^2.
#[derive(Debug, Clone)]
pub(crate) struct UnderdampedSolution {
    pub decay: f64,       // rho = xi wn
    pub damped_freq: f64, // zeta = wn sqrt(1 - xi^2)
    pub a_coef: f64,
    pub b_coef: f64,
    pub load_freqs: Vec<f64>,
    pub c: Vec<f64>,
    pub d: Vec<f64>,
    pub e: Vec<f64>,
    pub f: Vec<f64>,
}

impl UnderdampedSolution {
    /// `amplitudes` are the effective modal load amplitudes (already scaled
    /// by any participation factor).
    pub fn new(
        amplitudes: &[f64],
        freqs: &[f64],
        phases: &[f64],
        omega_n: f64,
        xi: f64,
        k_eff: f64,
    ) -> Result<Self> {
        if xi >= 1.0 {
            return Err(Error::InvalidParam(
                "closed-form solution requires an underdamped system (xi < 1)".into(),
            ));
        }
        let np = amplitudes.len();
        let decay = xi * omega_n;
        let damped_freq = omega_n * (1.0 - xi * xi).sqrt();
        let mut c = vec![0.0; np];
        let mut d = vec![0.0; np];
        let mut e = vec![0.0; np];
        let mut f = vec![0.0; np];
        let mut a_coef = 0.0;
        let mut b_sum = 0.0;
        for j in 0..np {
            let r = freqs[j] / omega_n;
            let denom = (1.0 - r * r).powi(2) + (2.0 * xi * r).powi(2);
            let (sin_p, cos_p) = phases[j].sin_cos();
            let aj = amplitudes[j] / k_eff;
            c[j] = aj * cos_p * (1.0 - r * r) / denom;
            d[j] = aj * cos_p * (-2.0 * xi * r) / denom;
            e[j] = aj * sin_p * (2.0 * xi * r) / denom;
            f[j] = aj * sin_p * (1.0 - r * r) / denom;
            a_coef -= aj * (-2.0 * xi * r * cos_p + (1.0 - r * r) * sin_p) / denom;
            b_sum += aj * freqs[j] * ((1.0 - r * r) * cos_p + 2.0 * xi * r * sin_p) / denom;
        }
        let b_coef = (decay * a_coef - b_sum) / damped_freq;
        Ok(Self {
            decay,
            damped_freq,
            a_coef,
            b_coef,
            load_freqs: freqs.to_vec(),
            c,
            d,
            e,
            f,
        })
    }

    pub fn displacement(&self, t: f64) -> f64 {
        let (sin_z, cos_z) = (self.damped_freq * t).sin_cos();
        let mut u = (-self.decay * t).exp() * (self.a_coef * cos_z + self.b_coef * sin_z);
        for j in 0..self.c.len() {
            let (sin_w, cos_w) = (self.load_freqs[j] * t).sin_cos();
            u += (self.c[j] + self.e[j]) * sin_w + (self.d[j] + self.f[j]) * cos_w;
        }
        u
    }

    pub fn acceleration(&self, t: f64) -> f64 {
        let (sin_z, cos_z) = (self.damped_freq * t).sin_cos();
        let env = (-self.decay * t).exp();
        let g = self.a_coef * cos_z + self.b_coef * sin_z;
        let dg = -self.a_coef * self.damped_freq * sin_z + self.b_coef * self.damped_freq * cos_z;
        let mut a = self.decay * self.decay * env * g - 2.0 * self.decay * env * dg
            - env * self.damped_freq * self.damped_freq * g;
        for j in 0..self.c.len() {
            let w2 = self.load_freqs[j] * self.load_freqs[j];
            let (sin_w, cos_w) = (self.load_freqs[j] * t).sin_cos();
            a -= w2 * ((self.c[j] + self.e[j]) * sin_w + (self.d[j] + self.f[j]) * cos_w);
        }
        a
    }
}
