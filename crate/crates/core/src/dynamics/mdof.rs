//! Six-story shear frame: system assembly, modal closed-form solution for
//! the linear case, and the cubic-spring internal force for the integrator.

use ndarray::{Array1, Array2};

use super::eigen::{jacobi_eig_sym, ModalBasis};
use super::newmark::DynamicSystem;
use super::{HarmonicLoad, MdofParams, ResponseSeries, TimeGrid, UnderdampedSolution, NDOF_MDOF};
use crate::error::{Error, Result};

/// Diagonal mass entries [m1, m1, m2, m2, m3, m3].
pub fn mass_diagonal(params: &MdofParams) -> Array1<f64> {
    let [m1, m2, m3] = params.story_masses;
    Array1::from_vec(vec![m1, m1, m2, m2, m3, m3])
}

fn stiffness_matrix(params: &MdofParams) -> Array2<f64> {
    let g = params.youngs_modulus * params.moment_of_inertia / params.story_height.powi(3);
    let mut k = Array2::zeros((NDOF_MDOF, NDOF_MDOF));
    for i in 0..NDOF_MDOF {
        k[[i, i]] = if i == NDOF_MDOF - 1 { 24.0 * g } else { 48.0 * g };
        if i + 1 < NDOF_MDOF {
            k[[i, i + 1]] = -24.0 * g;
            k[[i + 1, i]] = -24.0 * g;
        }
    }
    k
}

/// Rayleigh coefficients calibrated to the first two natural frequencies:
/// a0 = 2 xi w1 w2 / (w1 + w2), a1 = 2 xi / (w1 + w2).
pub fn rayleigh_coefficients(params: &MdofParams, basis: &ModalBasis) -> (f64, f64) {
    let (w1, w2) = (basis.omega[0], basis.omega[1]);
    let xi = params.damping_ratio;
    (
        2.0 * xi * w1 * w2 / (w1 + w2),
        2.0 * xi / (w1 + w2),
    )
}

/// Assembles mass, stiffness and Rayleigh damping matrices. The damping
/// calibration runs the eigensolver internally.
pub fn assemble_mdof(params: &MdofParams) -> Result<(Array2<f64>, Array2<f64>, Array2<f64>)> {
    let m_diag = mass_diagonal(params);
    let k = stiffness_matrix(params);
    let basis = jacobi_eig_sym(&m_diag, &k)?;
    let (a0, a1) = rayleigh_coefficients(params, &basis);
    let m = Array2::from_diag(&m_diag);
    let c = &m * a0 + &k * a1;
    Ok((m, k, c))
}

/// Story-wise internal force of the cubic-spring frame and its tangent.
pub fn mdof_internal_force(params: &MdofParams, u: &Array1<f64>) -> (Array1<f64>, Array2<f64>) {
    let k = params.story_stiffness();
    let b = params.cubic_coeff;
    let spring = |d: f64| k * d + b * d.powi(3);
    let spring_t = |d: f64| k + 3.0 * b * d * d;

    let n = NDOF_MDOF;
    let mut f = Array1::zeros(n);
    let mut kt = Array2::zeros((n, n));
    // base spring acting on dof 0
    f[0] += spring(u[0]);
    kt[[0, 0]] += spring_t(u[0]);
    // inter-story springs between dof i and i+1
    for i in 0..n - 1 {
        let d = u[i] - u[i + 1];
        let s = spring(d);
        let st = spring_t(d);
        f[i] += s;
        f[i + 1] -= s;
        kt[[i, i]] += st;
        kt[[i + 1, i + 1]] += st;
        kt[[i, i + 1]] -= st;
        kt[[i + 1, i]] -= st;
    }
    (f, kt)
}

/// Modal closed-form response of the linear frame under harmonic ground
/// acceleration, returning the series at `dof` (1-based, the study uses 6).
pub fn mdof_linear_response(
    params: &MdofParams,
    ground_accel: &HarmonicLoad,
    grid: &TimeGrid,
    dof: usize,
) -> Result<ResponseSeries> {
    if params.cubic_coeff != 0.0 {
        return Err(Error::InvalidParam(
            "modal solution requires cubic_coeff = 0".into(),
        ));
    }
    if dof < 1 || dof > NDOF_MDOF {
        return Err(Error::InvalidParam(format!(
            "dof must lie in 1..={NDOF_MDOF}, got {dof}"
        )));
    }
    let m_diag = mass_diagonal(params);
    let k = stiffness_matrix(params);
    let basis = jacobi_eig_sym(&m_diag, &k)?;
    let (a0, a1) = rayleigh_coefficients(params, &basis);

    let mut modes = Vec::with_capacity(NDOF_MDOF);
    for i in 0..NDOF_MDOF {
        let wn = basis.omega[i];
        // participation gamma_i = -phi_i^T diag(M)
        let mut gamma = 0.0;
        for r in 0..NDOF_MDOF {
            gamma -= basis.shapes[[r, i]] * m_diag[r];
        }
        let xi_i = (a0 + a1 * wn * wn) / (2.0 * wn);
        let amps: Vec<f64> = ground_accel.amplitudes().iter().map(|a| gamma * a).collect();
        let sol = UnderdampedSolution::new(
            &amps,
            ground_accel.frequencies(),
            ground_accel.phases(),
            wn,
            xi_i,
            wn * wn, // unit modal mass
        )?;
        modes.push(sol);
    }

    let di = dof - 1;
    let n = grid.n_points();
    let mut displacement = Vec::with_capacity(n);
    let mut acceleration = Vec::with_capacity(n);
    for kstep in 0..n {
        let t = kstep as f64 * grid.obs_step;
        let mut u = 0.0;
        let mut a = 0.0;
        for (i, sol) in modes.iter().enumerate() {
            let phi = basis.shapes[[di, i]];
            u += phi * sol.displacement(t);
            a += phi * sol.acceleration(t);
        }
        displacement.push(u);
        acceleration.push(a);
    }
    displacement[0] = 0.0;
    Ok(ResponseSeries {
        displacement,
        acceleration,
    })
}

/// Frame system for the Newmark integrator (cubic springs allowed).
pub struct MdofSystem {
    params: MdofParams,
    mass: Array2<f64>,
    damping: Array2<f64>,
}

impl MdofSystem {
    pub fn new(params: MdofParams) -> Result<Self> {
        // damping always calibrated on the linear stiffness
        let linear = MdofParams {
            cubic_coeff: 0.0,
            ..params
        };
        let (mass, _, damping) = assemble_mdof(&linear)?;
        Ok(Self {
            params,
            mass,
            damping,
        })
    }

    /// Force vector p(t) = -a_g(t) M 1 for ground-acceleration loading.
    pub fn ground_force(&self, ground_accel: &HarmonicLoad, t: f64) -> Array1<f64> {
        let ag = ground_accel.eval(t);
        let mut f = Array1::zeros(NDOF_MDOF);
        for i in 0..NDOF_MDOF {
            f[i] = -ag * self.mass[[i, i]];
        }
        f
    }
}

impl DynamicSystem for MdofSystem {
    fn ndof(&self) -> usize {
        NDOF_MDOF
    }

    fn mass(&self) -> &Array2<f64> {
        &self.mass
    }

    fn damping(&self) -> &Array2<f64> {
        &self.damping
    }

    fn internal_force(&self, u: &Array1<f64>) -> Array1<f64> {
        mdof_internal_force(&self.params, u).0
    }

    fn tangent_stiffness(&self, u: &Array1<f64>) -> Array2<f64> {
        mdof_internal_force(&self.params, u).1
    }
}
