//! Cyclic Jacobi eigensolver for the generalized problem K phi = w^2 M phi
//! with diagonal positive M, via the symmetric reduction
//! B = M^(-1/2) K M^(-1/2).

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 64;

/// Natural frequencies and mass-orthonormal mode shapes, ascending order.
#[derive(Debug, Clone)]
pub struct ModalBasis {
    /// omega_ni, rad/s, ascending.
    pub omega: Vec<f64>,
    /// Column i is the mass-normalized shape of mode i.
    pub shapes: Array2<f64>,
}

/// Solves the symmetric generalized eigenproblem for diagonal positive `m`.
/// Shapes satisfy phi_i^T M phi_j = delta_ij.
pub fn jacobi_eig_sym(m_diag: &Array1<f64>, k: &Array2<f64>) -> Result<ModalBasis> {
    let n = m_diag.len();
    if k.nrows() != n || k.ncols() != n {
        return Err(Error::ShapeMismatch(format!(
            "K is {}x{} but M has {} entries",
            k.nrows(),
            k.ncols(),
            n
        )));
    }
    if m_diag.iter().any(|&m| m <= 0.0) {
        return Err(Error::InvalidParam("mass diagonal must be positive".into()));
    }
    let sym_err = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| (k[[i, j]] - k[[j, i]]).abs())
        .fold(0.0_f64, f64::max);
    let k_scale = k.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    if sym_err > 1e-10 * k_scale.max(1.0) {
        return Err(Error::InvalidParam("K must be symmetric".into()));
    }

    let m_inv_sqrt: Vec<f64> = m_diag.iter().map(|&m| 1.0 / m.sqrt()).collect();
    let mut a = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            a[[i, j]] = k[[i, j]] * m_inv_sqrt[i] * m_inv_sqrt[j];
        }
    }
    let mut v: Array2<f64> = Array2::eye(n);
    let norm = a.iter().map(|x| x * x).sum::<f64>().sqrt();

    let mut converged = false;
    for _sweep in 0..MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[[i, j]] * a[[i, j]])
            .sum::<f64>()
            .sqrt();
        if off < 1e-12 * norm.max(f64::MIN_POSITIVE) {
            converged = true;
            break;
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = a[[p, q]];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[[q, q]] - a[[p, p]]) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    -1.0 / (-theta + (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for i in 0..n {
                    let aip = a[[i, p]];
                    let aiq = a[[i, q]];
                    a[[i, p]] = c * aip - s * aiq;
                    a[[i, q]] = s * aip + c * aiq;
                }
                for j in 0..n {
                    let apj = a[[p, j]];
                    let aqj = a[[q, j]];
                    a[[p, j]] = c * apj - s * aqj;
                    a[[q, j]] = s * apj + c * aqj;
                }
                for i in 0..n {
                    let vip = v[[i, p]];
                    let viq = v[[i, q]];
                    v[[i, p]] = c * vip - s * viq;
                    v[[i, q]] = s * vip + c * viq;
                }
            }
        }
    }
    if !converged {
        return Err(Error::EigenNoConvergence(MAX_SWEEPS));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[[i, i]].partial_cmp(&a[[j, j]]).unwrap());

    let mut omega = Vec::with_capacity(n);
    let mut shapes = Array2::zeros((n, n));
    for (col, &idx) in order.iter().enumerate() {
        let lambda = a[[idx, idx]];
        if lambda <= 0.0 {
            return Err(Error::InvalidParam(
                "stiffness matrix is not positive definite".into(),
            ));
        }
        omega.push(lambda.sqrt());
        // phi = M^(-1/2) v is automatically mass-orthonormal
        for row in 0..n {
            shapes[[row, col]] = m_inv_sqrt[row] * v[[row, idx]];
        }
    }
    Ok(ModalBasis { omega, shapes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array1;

    #[test]
    fn diagonal_system_is_its_own_solution() {
        let m = Array1::from_elem(6, 1.0);
        let mut k = Array2::zeros((6, 6));
        for i in 0..6 {
            k[[i, i]] = ((i + 1) * (i + 1)) as f64;
        }
        let basis = jacobi_eig_sym(&m, &k).unwrap();
        for i in 0..6 {
            assert!((basis.omega[i] - (i + 1) as f64).abs() < 1e-12);
            for j in 0..6 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((basis.shapes[[j, i]].abs() - expect).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn shapes_are_mass_orthonormal() {
        let m = Array1::from_vec(vec![2.0, 3.0, 5.0, 7.0]);
        let mut k = Array2::zeros((4, 4));
        for i in 0..4 {
            k[[i, i]] = 10.0 + i as f64;
            if i + 1 < 4 {
                k[[i, i + 1]] = -2.0;
                k[[i + 1, i]] = -2.0;
            }
        }
        let basis = jacobi_eig_sym(&m, &k).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let mut dot = 0.0;
                for r in 0..4 {
                    dot += basis.shapes[[r, i]] * m[r] * basis.shapes[[r, j]];
                }
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((dot - expect).abs() < 1e-10, "gram[{i},{j}] = {dot}");
            }
        }
        for i in 1..4 {
            assert!(basis.omega[i] >= basis.omega[i - 1]);
        }
    }

    #[test]
    fn rejects_asymmetric_k() {
        let m = Array1::from_elem(2, 1.0);
        let mut k = Array2::eye(2);
        k[[0, 1]] = 1.0;
        assert!(jacobi_eig_sym(&m, &k).is_err());
    }
}
