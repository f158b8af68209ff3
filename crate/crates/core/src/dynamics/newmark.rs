//! Implicit Newmark time integration (average acceleration, gamma = 1/2,
//! beta = 1/4) with a full-tangent Newton solve per step.

use ndarray::{Array1, Array2};

use super::{ResponseSeries, TimeGrid};
use crate::error::{Error, Result};
use crate::util::solve_dense;

const GAMMA: f64 = 0.5;
const BETA: f64 = 0.25;
const NEWTON_TOL: f64 = 1e-10;
const NEWTON_MAX_ITERS: usize = 20;

/// System description for the integrator: M u'' + C u' + F_int(u) = p(t).
/// The tangent must be consistent with the internal force.
pub trait DynamicSystem {
    fn ndof(&self) -> usize;
    fn mass(&self) -> &Array2<f64>;
    fn damping(&self) -> &Array2<f64>;
    fn internal_force(&self, u: &Array1<f64>) -> Array1<f64>;
    fn tangent_stiffness(&self, u: &Array1<f64>) -> Array2<f64>;
}

/// Full-history result on the observation grid, one column per dof.
#[derive(Debug, Clone)]
pub struct NewmarkResult {
    pub displacement: Array2<f64>,
    pub velocity: Array2<f64>,
    pub acceleration: Array2<f64>,
}

impl NewmarkResult {
    /// Extracts one dof (1-based) as a ResponseSeries.
    pub fn series(&self, dof: usize) -> Result<ResponseSeries> {
        if dof < 1 || dof > self.displacement.ncols() {
            return Err(Error::InvalidParam(format!(
                "dof must lie in 1..={}, got {dof}",
                self.displacement.ncols()
            )));
        }
        Ok(ResponseSeries {
            displacement: self.displacement.column(dof - 1).to_vec(),
            acceleration: self.acceleration.column(dof - 1).to_vec(),
        })
    }
}

/// Integrates from zero initial conditions on the fine step and records every
/// obs_step/fine_step-th state. Acceleration is the integrator's own state at
/// the observation instants.
pub fn newmark_integrate<S: DynamicSystem>(
    system: &S,
    load_fn: &dyn Fn(f64) -> Array1<f64>,
    grid: &TimeGrid,
) -> Result<NewmarkResult> {
    let ndof = system.ndof();
    let n_obs = grid.n_points();
    let sub = grid.substeps();
    let dt = grid.fine_step;
    let m = system.mass();
    let c = system.damping();

    let mut u = Array1::<f64>::zeros(ndof);
    let mut v = Array1::<f64>::zeros(ndof);
    // consistent initial acceleration: M a0 = p(0) - C v0 - F_int(u0)
    let r0 = load_fn(0.0) - c.dot(&v) - system.internal_force(&u);
    let mut a = solve_dense(m, &r0)?;

    let mut displacement = Array2::zeros((n_obs, ndof));
    let mut velocity = Array2::zeros((n_obs, ndof));
    let mut acceleration = Array2::zeros((n_obs, ndof));
    displacement.row_mut(0).assign(&u);
    velocity.row_mut(0).assign(&v);
    acceleration.row_mut(0).assign(&a);

    let inv_b_dt2 = 1.0 / (BETA * dt * dt);
    let inv_b_dt = 1.0 / (BETA * dt);
    let half_b = 1.0 / (2.0 * BETA) - 1.0;

    let mut step = 0usize;
    for obs in 1..n_obs {
        for _ in 0..sub {
            step += 1;
            let t_new = step as f64 * dt;
            let p_new = load_fn(t_new);

            // predictor: constant displacement
            let mut u_new = u.clone();
            let mut converged = false;
            let mut res_norm = f64::INFINITY;
            for _ in 0..NEWTON_MAX_ITERS {
                let a_new = (&u_new - &u).mapv(|x| x * inv_b_dt2) - v.mapv(|x| x * inv_b_dt)
                    - a.mapv(|x| x * half_b);
                let v_new = &v + &(a.mapv(|x| x * (1.0 - GAMMA) * dt))
                    + a_new.mapv(|x| x * GAMMA * dt);
                let f_int = system.internal_force(&u_new);
                let residual = m.dot(&a_new) + c.dot(&v_new) + &f_int - &p_new;
                res_norm = residual.iter().map(|x| x * x).sum::<f64>().sqrt();
                let scale = p_new
                    .iter()
                    .chain(f_int.iter())
                    .map(|x| x * x)
                    .sum::<f64>()
                    .sqrt()
                    .max(1.0);
                if res_norm <= NEWTON_TOL * scale {
                    converged = true;
                    break;
                }
                let kt = system.tangent_stiffness(&u_new);
                let jac = &kt + &c.mapv(|x| x * GAMMA * inv_b_dt) + &m.mapv(|x| x * inv_b_dt2);
                let du = solve_dense(&jac, &residual)?;
                u_new -= &du;
                // At small steps the residual floor is set by roundoff in the
                // 1/(beta dt^2) inertia term, so also accept a stagnated
                // displacement increment.
                let du_norm = du.iter().map(|x| x * x).sum::<f64>().sqrt();
                let u_norm = u_new.iter().map(|x| x * x).sum::<f64>().sqrt();
                if du_norm <= NEWTON_TOL * (1.0 + u_norm) {
                    converged = true;
                    break;
                }
            }
            if !converged {
                return Err(Error::NewtonDiverged {
                    step,
                    residual: res_norm,
                });
            }
            let a_new = (&u_new - &u).mapv(|x| x * inv_b_dt2) - v.mapv(|x| x * inv_b_dt)
                - a.mapv(|x| x * half_b);
            let v_new =
                &v + &(a.mapv(|x| x * (1.0 - GAMMA) * dt)) + a_new.mapv(|x| x * GAMMA * dt);
            u = u_new;
            v = v_new;
            a = a_new;
        }
        displacement.row_mut(obs).assign(&u);
        velocity.row_mut(obs).assign(&v);
        acceleration.row_mut(obs).assign(&a);
    }
    Ok(NewmarkResult {
        displacement,
        velocity,
        acceleration,
    })
}
