//! The saddle-point system
//!
//! ```text
//! [ K   B   ] [H]   [F]
//! [ B^T -sM ] [m] = [G]
//! ```
//!
//! is solved by eliminating `m` with the element-local inverse of `M`:
//! `S = K + B M^{-1} B^T / s`, `S H = F + B M^{-1} G / s`, and
//! `m = M^{-1} (B^T H - G) / s`.

use std::ops::Range;

use faer::prelude::*;
use faer::sparse::linalg::solvers::{Llt, SymbolicLlt};
use faer::sparse::{SparseColMat, Triplet};
use faer::Side;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::cg::cg_solve;
use super::sparse::CsrMatrix;
use super::LinalgError;
use crate::par::{map_range, Execution};

/// Exact inverse of a block-diagonal SPD matrix with the given diagonal
/// blocks.
pub fn invert_mass_blocks(m: &CsrMatrix, blocks: &[Range<usize>]) -> Result<CsrMatrix, LinalgError> {
    invert_mass_blocks_with(m, blocks, Execution::Serial)
}

pub fn invert_mass_blocks_with(
    m: &CsrMatrix,
    blocks: &[Range<usize>],
    exec: Execution,
) -> Result<CsrMatrix, LinalgError> {
    let inv = map_range(exec, blocks.len(), |e| {
        let r = &blocks[e];
        let n = r.len();
        let mut a = DMatrix::zeros(n, n);
        for (li, i) in r.clone().enumerate() {
            let (c, v) = m.row(i);
            for (j, x) in c.iter().zip(v) {
                if !r.contains(j) {
                    if *x != 0.0 {
                        return Err(LinalgError::NotBlockDiagonal { row: i, col: *j });
                    }
                    continue;
                }
                a[(li, j - r.start)] = *x;
            }
        }
        a.cholesky()
            .map(|c| c.inverse())
            .ok_or(LinalgError::NotPositiveDefinite { block: e })
    });
    let mut t = Vec::new();
    for (e, b) in inv.into_iter().enumerate() {
        let b = b?;
        let s = blocks[e].start;
        for i in 0..b.nrows() {
            for j in 0..b.ncols() {
                t.push((s + i, s + j, b[(i, j)]));
            }
        }
    }
    Ok(CsrMatrix::from_triplets(m.nrows(), m.ncols(), t))
}

/// `K + B M^{-1} B^T / sigma`.
pub fn schur_complement(
    k: &CsrMatrix,
    b: &CsrMatrix,
    m_inv: &CsrMatrix,
    sigma: f64,
) -> Result<CsrMatrix, LinalgError> {
    if b.nrows() != k.nrows() || b.ncols() != m_inv.nrows() {
        return Err(LinalgError::DimensionMismatch(format!(
            "K {}x{}, B {}x{}, M^-1 {}x{}",
            k.nrows(),
            k.ncols(),
            b.nrows(),
            b.ncols(),
            m_inv.nrows(),
            m_inv.ncols()
        )));
    }
    let bmb = b.matmul(m_inv)?.matmul(&b.transpose())?;
    k.add_scaled(&bmb, 1.0 / sigma)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    /// Sparse Cholesky of the Schur complement, factored once per operator.
    #[default]
    Direct,
    /// Jacobi-preconditioned CG, warm-started from the previous solution.
    Cg,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    pub kind: SolverKind,
    pub tol: f64,
    /// Defaults to ten times the number of flux dofs.
    pub max_iter: Option<usize>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            kind: SolverKind::Direct,
            tol: 1e-10,
            max_iter: None,
        }
    }
}

enum Method {
    Direct(Llt<usize, f64>),
    Cg { tol: f64, max_iter: usize },
}

/// Reusable solver for a fixed `(K, B, M, sigma)` and a fixed set of
/// constrained flux dofs.
pub struct SchurSolver {
    b: CsrMatrix,
    bt: CsrMatrix,
    m_inv: CsrMatrix,
    sigma: f64,
    s: CsrMatrix,
    reduced: CsrMatrix,
    fixed: Vec<bool>,
    method: Method,
    exec: Execution,
}

impl std::fmt::Debug for SchurSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SchurSolver")
            .field("n_flux", &self.s.nrows())
            .field("n_mass", &self.m_inv.nrows())
            .field("sigma", &self.sigma)
            .field("nnz", &self.s.nnz())
            .finish()
    }
}

impl SchurSolver {
    pub fn new(
        k: &CsrMatrix,
        b: &CsrMatrix,
        m_inv: CsrMatrix,
        sigma: f64,
        fixed: Vec<bool>,
        opts: &SolverOptions,
        exec: Execution,
    ) -> Result<Self, LinalgError> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(LinalgError::NonFinite(format!("shift {sigma}")));
        }
        if fixed.len() != k.nrows() {
            return Err(LinalgError::DimensionMismatch(format!(
                "{} constraint flags for {} flux dofs",
                fixed.len(),
                k.nrows()
            )));
        }
        let s = schur_complement(k, b, &m_inv, sigma)?;
        let reduced = s.eliminate_symmetric(&fixed);
        let method = match opts.kind {
            SolverKind::Direct => Method::Direct(factor(&reduced)?),
            SolverKind::Cg => Method::Cg {
                tol: opts.tol,
                max_iter: opts.max_iter.unwrap_or(10 * k.nrows().max(1)),
            },
        };
        Ok(Self {
            b: b.clone(),
            bt: b.transpose(),
            m_inv,
            sigma,
            s,
            reduced,
            fixed,
            method,
            exec,
        })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn schur(&self) -> &CsrMatrix {
        &self.s
    }

    /// Solves for `(H, m)`. Constrained flux dofs take their values from
    /// `fixed_values`; other entries of it are ignored. `warm` seeds CG.
    pub fn solve(
        &self,
        f: &[f64],
        g: &[f64],
        fixed_values: &[f64],
        warm: Option<&[f64]>,
    ) -> Result<(Vec<f64>, Vec<f64>), LinalgError> {
        let n = self.s.nrows();
        let nm = self.m_inv.nrows();
        if f.len() != n || g.len() != nm || fixed_values.len() != n {
            return Err(LinalgError::DimensionMismatch(format!(
                "F {} / G {} / constraints {} for a {n} + {nm} system",
                f.len(),
                g.len(),
                fixed_values.len()
            )));
        }
        let inv_s = 1.0 / self.sigma;
        let mg = self.m_inv.matvec(g);
        let mut bmg = vec![0.0; n];
        self.b.matvec_into(&mg, &mut bmg, self.exec);
        let mut rhs: Vec<f64> = f.iter().zip(&bmg).map(|(f, x)| f + inv_s * x).collect();

        let xc: Vec<f64> = (0..n)
            .map(|i| if self.fixed[i] { fixed_values[i] } else { 0.0 })
            .collect();
        if self.fixed.iter().any(|&c| c) {
            let mut sx = vec![0.0; n];
            self.s.matvec_into(&xc, &mut sx, self.exec);
            for i in 0..n {
                rhs[i] = if self.fixed[i] { xc[i] } else { rhs[i] - sx[i] };
            }
        }

        let h = match &self.method {
            Method::Direct(llt) => {
                let mut col = Col::<f64>::from_fn(n, |i| rhs[i]);
                llt.solve_in_place(col.as_mat_mut());
                let mut h: Vec<f64> = (0..n).map(|i| col[i]).collect();
                // one step of iterative refinement
                let mut r = vec![0.0; n];
                self.reduced.matvec_into(&h, &mut r, self.exec);
                let mut col = Col::<f64>::from_fn(n, |i| rhs[i] - r[i]);
                llt.solve_in_place(col.as_mat_mut());
                for i in 0..n {
                    h[i] += col[i];
                }
                h
            }
            Method::Cg { tol, max_iter } => {
                cg_solve(&self.reduced, &rhs, warm, *tol, *max_iter, self.exec)?.x
            }
        };
        let mut h = h;
        for i in 0..n {
            if self.fixed[i] {
                h[i] = xc[i];
            }
        }
        if h.iter().any(|x| !x.is_finite()) {
            return Err(LinalgError::NonFinite("flux solution".into()));
        }
        let mut bth = vec![0.0; nm];
        self.bt.matvec_into(&h, &mut bth, self.exec);
        let r: Vec<f64> = bth.iter().zip(g).map(|(a, b)| a - b).collect();
        let m = self.m_inv.matvec(&r).into_iter().map(|x| x * inv_s).collect();
        Ok((h, m))
    }
}

fn factor(a: &CsrMatrix) -> Result<Llt<usize, f64>, LinalgError> {
    let n = a.nrows();
    // CSR rows of a symmetric matrix are its CSC columns; keep the upper part
    let mut t = Vec::with_capacity(a.nnz() / 2 + n);
    for i in 0..n {
        let (c, v) = a.row(i);
        for (j, x) in c.iter().zip(v) {
            if *j >= i {
                t.push(Triplet::new(i, *j, *x));
            }
        }
    }
    let mat = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &t)
        .map_err(|e| LinalgError::Factorization(format!("{e:?}")))?;
    let symbolic = SymbolicLlt::try_new(mat.symbolic(), Side::Upper)
        .map_err(|e| LinalgError::Factorization(format!("{e:?}")))?;
    Llt::try_new_with_symbolic(symbolic, mat.as_ref(), Side::Upper)
        .map_err(|e| LinalgError::Factorization(format!("{e:?}")))
}

/// Assembled block system.
#[derive(Debug, Clone)]
pub struct BlockSystem {
    pub k: CsrMatrix,
    pub b: CsrMatrix,
    pub m: CsrMatrix,
    pub sigma: f64,
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    /// Element blocks of `M`.
    pub mass_blocks: Vec<Range<usize>>,
}

impl BlockSystem {
    /// Euclidean norms of the two block-row residuals.
    pub fn residuals(&self, h: &[f64], m: &[f64]) -> (f64, f64) {
        let kh = self.k.matvec(h);
        let bm = self.b.matvec(m);
        let r1: f64 = (0..h.len()).map(|i| (kh[i] + bm[i] - self.f[i]).powi(2)).sum();
        let bth = self.b.transpose().matvec(h);
        let mm = self.m.matvec(m);
        let r2: f64 = (0..m.len())
            .map(|i| (bth[i] - self.sigma * mm[i] - self.g[i]).powi(2))
            .sum();
        (r1.sqrt(), r2.sqrt())
    }
}

/// One-shot solve with no constrained dofs; checks both block residuals
/// against `tol (||F|| + ||G||)`.
pub fn solve_block_system(
    sys: &BlockSystem,
    opts: &SolverOptions,
) -> Result<(Vec<f64>, Vec<f64>), LinalgError> {
    let m_inv = invert_mass_blocks(&sys.m, &sys.mass_blocks)?;
    let n = sys.k.nrows();
    let solver = SchurSolver::new(&sys.k, &sys.b, m_inv, sys.sigma, vec![false; n], opts, Execution::default())?;
    let (h, m) = solver.solve(&sys.f, &sys.g, &vec![0.0; n], None)?;
    let (r1, r2) = sys.residuals(&h, &m);
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let scale = (norm(&sys.f) + norm(&sys.g)).max(f64::MIN_POSITIVE);
    // the reduction amplifies round-off by roughly the conditioning of S
    let allowed = opts.tol.max(1e-12) * scale * 1e3;
    if r1 > allowed || r2 > allowed {
        return Err(LinalgError::Residual { flux: r1, mass: r2, scale });
    }
    Ok((h, m))
}
