//! Jacobi-preconditioned conjugate gradients.

use super::sparse::CsrMatrix;
use super::LinalgError;
use crate::par::Execution;

#[derive(Debug, Clone)]
pub struct CgOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Achieved `||A x - b|| / ||b||`.
    pub residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves `A x = b` for SPD `A` to relative residual `tol`, starting from
/// `x0` when given.
pub fn cg_solve(
    a: &CsrMatrix,
    b: &[f64],
    x0: Option<&[f64]>,
    tol: f64,
    max_iter: usize,
    exec: Execution,
) -> Result<CgOutcome, LinalgError> {
    let n = b.len();
    if a.nrows() != n || a.ncols() != n {
        return Err(LinalgError::DimensionMismatch(format!(
            "{}x{} system with rhs of length {n}",
            a.nrows(),
            a.ncols()
        )));
    }
    let bnorm = dot(b, b).sqrt();
    if !bnorm.is_finite() {
        return Err(LinalgError::NonFinite("right-hand side".into()));
    }
    if bnorm == 0.0 {
        return Ok(CgOutcome {
            x: vec![0.0; n],
            iterations: 0,
            residual: 0.0,
        });
    }
    let inv_diag: Vec<f64> = a
        .diagonal()
        .iter()
        .map(|&d| if d > 0.0 { 1.0 / d } else { 1.0 })
        .collect();

    let mut x = x0.map_or_else(|| vec![0.0; n], |x| x.to_vec());
    let mut r = vec![0.0; n];
    a.matvec_into(&x, &mut r, exec);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut res = dot(&r, &r).sqrt() / bnorm;
    let mut it = 0;
    while res > tol {
        if it >= max_iter {
            return Err(LinalgError::NotConverged {
                iterations: it,
                residual: res,
                x,
            });
        }
        a.matvec_into(&p, &mut ap, exec);
        let pap = dot(&p, &ap);
        if !pap.is_finite() || pap <= 0.0 {
            return Err(LinalgError::NonFinite(format!("p^T A p = {pap} at iteration {it}")));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        res = dot(&r, &r).sqrt() / bnorm;
        if !res.is_finite() {
            return Err(LinalgError::NonFinite(format!("residual at iteration {it}")));
        }
        it += 1;
    }
    Ok(CgOutcome {
        x,
        iterations: it,
        residual: res,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};

    #[test]
    fn identity_in_one_iteration() {
        let a = CsrMatrix::identity(7);
        let b: Vec<f64> = (0..7).map(|i| i as f64 - 2.5).collect();
        let out = cg_solve(&a, &b, None, 1e-12, 10, Execution::Serial).unwrap();
        assert_eq!(out.iterations, 1);
        assert_eq!(out.x, b);
    }

    #[test]
    fn diagonal_system() {
        let a = CsrMatrix::from_triplets(5, 5, (0..5).map(|i| (i, i, (i + 1) as f64)).collect());
        let out = cg_solve(&a, &[1.0; 5], None, 1e-12, 50, Execution::Serial).unwrap();
        for (i, x) in out.x.iter().enumerate() {
            assert!((x - 1.0 / (i + 1) as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn random_spd_matches_dense_cholesky() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let n = 50;
        let g = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let spd = &g * g.transpose() + DMatrix::identity(n, n) * n as f64 * 0.1;
        let b: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let a = CsrMatrix::from_dense(&spd, 0.0);
        let tol = 1e-10;
        let out = cg_solve(&a, &b, None, tol, 10 * n, Execution::Parallel).unwrap();
        let exact = spd.clone().cholesky().unwrap().solve(&nalgebra::DVector::from_vec(b.clone()));
        let err = (nalgebra::DVector::from_vec(out.x) - &exact).norm() / exact.norm();
        let cond = {
            let e = spd.symmetric_eigenvalues();
            e.max() / e.min()
        };
        assert!(err <= tol * cond, "{err}");
        assert!(out.residual <= tol);
    }

    #[test]
    fn iteration_cap_reports_progress() {
        let a = CsrMatrix::from_triplets(3, 3, vec![(0, 0, 1.0), (1, 1, 10.0), (2, 2, 100.0), (0, 2, 0.5), (2, 0, 0.5)]);
        match cg_solve(&a, &[1.0, 1.0, 1.0], None, 1e-15, 1, Execution::Serial) {
            Err(LinalgError::NotConverged { iterations, residual, x }) => {
                assert_eq!(iterations, 1);
                assert!(residual > 0.0);
                assert_eq!(x.len(), 3);
            }
            other => panic!("expected NotConverged, got {other:?}"),
        }
    }
}
