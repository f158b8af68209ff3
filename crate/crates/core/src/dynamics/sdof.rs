//! Closed-form solution of the linear SDOF system under harmonic loading,
//! plus the SDOF system adapter for the Newmark integrator.

use ndarray::{array, Array1, Array2};

use super::newmark::DynamicSystem;
use super::{HarmonicLoad, ResponseSeries, SdofParams, TimeGrid, UnderdampedSolution};
use crate::error::{Error, Result};

/// Homogeneous/particular coefficients of the closed-form SDOF displacement.
#[derive(Debug, Clone)]
pub struct SdofAnalyticCoeffs {
    pub decay: f64,
    pub damped_freq: f64,
    pub a_coef: f64,
    pub b_coef: f64,
    pub c: Vec<f64>,
    pub d: Vec<f64>,
    pub e: Vec<f64>,
    pub f: Vec<f64>,
}

impl SdofAnalyticCoeffs {
    pub fn new(params: &SdofParams, load: &HarmonicLoad) -> Result<Self> {
        let sol = solution(params, load)?;
        Ok(Self {
            decay: sol.decay,
            damped_freq: sol.damped_freq,
            a_coef: sol.a_coef,
            b_coef: sol.b_coef,
            c: sol.c,
            d: sol.d,
            e: sol.e,
            f: sol.f,
        })
    }
}

fn solution(params: &SdofParams, load: &HarmonicLoad) -> Result<UnderdampedSolution> {
    if params.cubic_coeff != 0.0 {
        return Err(Error::InvalidParam(
            "closed-form SDOF solution requires cubic_coeff = 0".into(),
        ));
    }
    if !params.is_underdamped() {
        return Err(Error::InvalidParam(
            "closed-form SDOF solution requires an underdamped system".into(),
        ));
    }
    UnderdampedSolution::new(
        load.amplitudes(),
        load.frequencies(),
        load.phases(),
        params.natural_freq(),
        params.damping_ratio(),
        params.stiffness,
    )
}

/// Samples the exact displacement and acceleration of the linear SDOF system
/// on the observation grid. Zero initial conditions are built into the
/// homogeneous coefficients; the first displacement sample is pinned to 0.
pub fn sdof_linear_response(
    params: &SdofParams,
    load: &HarmonicLoad,
    grid: &TimeGrid,
) -> Result<ResponseSeries> {
    let sol = solution(params, load)?;
    let n = grid.n_points();
    let mut displacement = Vec::with_capacity(n);
    let mut acceleration = Vec::with_capacity(n);
    for k in 0..n {
        let t = k as f64 * grid.obs_step;
        displacement.push(sol.displacement(t));
        acceleration.push(sol.acceleration(t));
    }
    displacement[0] = 0.0;
    Ok(ResponseSeries {
        displacement,
        acceleration,
    })
}

/// SDOF equation of motion m u'' + c u' + k u + b u^3 = p(t) for the
/// Newmark integrator.
pub struct SdofSystem {
    params: SdofParams,
    mass: Array2<f64>,
    damping: Array2<f64>,
}

impl SdofSystem {
    pub fn new(params: SdofParams) -> Self {
        Self {
            params,
            mass: array![[params.mass]],
            damping: array![[params.damping]],
        }
    }
}

impl DynamicSystem for SdofSystem {
    fn ndof(&self) -> usize {
        1
    }

    fn mass(&self) -> &Array2<f64> {
        &self.mass
    }

    fn damping(&self) -> &Array2<f64> {
        &self.damping
    }

    fn internal_force(&self, u: &Array1<f64>) -> Array1<f64> {
        let x = u[0];
        array![self.params.stiffness * x + self.params.cubic_coeff * x.powi(3)]
    }

    fn tangent_stiffness(&self, u: &Array1<f64>) -> Array2<f64> {
        let x = u[0];
        array![[self.params.stiffness + 3.0 * self.params.cubic_coeff * x * x]]
    }
}
