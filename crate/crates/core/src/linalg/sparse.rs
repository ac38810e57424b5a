//! Compressed sparse row matrices.

use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;

use super::LinalgError;
use crate::par::{for_each_mut, Execution};

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    data: Vec<f64>,
}

impl CsrMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            indptr: vec![0; nrows + 1],
            indices: Vec::new(),
            data: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            nrows: n,
            ncols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            data: vec![1.0; n],
        }
    }

    /// Sums duplicate entries; explicit zeros are kept.
    pub fn from_triplets(nrows: usize, ncols: usize, mut t: Vec<(usize, usize, f64)>) -> Self {
        t.sort_unstable_by_key(|&(i, j, _)| (i, j));
        let mut indptr = vec![0; nrows + 1];
        let mut indices = Vec::with_capacity(t.len());
        let mut data: Vec<f64> = Vec::with_capacity(t.len());
        let mut last = None;
        for (i, j, v) in t {
            assert!(i < nrows && j < ncols, "entry ({i}, {j}) outside {nrows}x{ncols}");
            if last == Some((i, j)) {
                *data.last_mut().unwrap() += v;
            } else {
                indices.push(j);
                data.push(v);
                indptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..nrows {
            indptr[i + 1] += indptr[i];
        }
        Self {
            nrows,
            ncols,
            indptr,
            indices,
            data,
        }
    }

    /// Drops entries with `|a_ij| <= tol`.
    pub fn from_dense(a: &DMatrix<f64>, tol: f64) -> Self {
        let mut t = Vec::new();
        for i in 0..a.nrows() {
            for j in 0..a.ncols() {
                if a[(i, j)].abs() > tol {
                    t.push((i, j, a[(i, j)]));
                }
            }
        }
        Self::from_triplets(a.nrows(), a.ncols(), t)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.nrows, self.ncols);
        for i in 0..self.nrows {
            let (c, v) = self.row(i);
            for (j, x) in c.iter().zip(v) {
                a[(i, *j)] += x;
            }
        }
        a
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    pub fn indptr(&self) -> &[usize] {
        &self.indptr
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.indptr[i]..self.indptr[i + 1];
        (&self.indices[r.clone()], &self.data[r])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (c, v) = self.row(i);
        c.binary_search(&j).map_or(0.0, |k| v[k])
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    /// `y = A x`.
    pub fn matvec_into(&self, x: &[f64], y: &mut [f64], exec: Execution) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for_each_mut(exec, y, |i, yi| {
            let (c, v) = self.row(i);
            *yi = c.iter().zip(v).map(|(j, a)| a * x[*j]).sum();
        });
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.matvec_into(x, &mut y, Execution::Serial);
        y
    }

    pub fn transpose(&self) -> Self {
        let mut count = vec![0usize; self.ncols + 1];
        for &j in &self.indices {
            count[j + 1] += 1;
        }
        for j in 0..self.ncols {
            count[j + 1] += count[j];
        }
        let indptr = count.clone();
        let mut next = count;
        let mut indices = vec![0; self.nnz()];
        let mut data = vec![0.0; self.nnz()];
        for i in 0..self.nrows {
            let (c, v) = self.row(i);
            for (j, a) in c.iter().zip(v) {
                let k = next[*j];
                indices[k] = i;
                data[k] = *a;
                next[*j] += 1;
            }
        }
        Self {
            nrows: self.ncols,
            ncols: self.nrows,
            indptr,
            indices,
            data,
        }
    }

    /// Sparse product `A B`.
    pub fn matmul(&self, other: &CsrMatrix) -> Result<CsrMatrix, LinalgError> {
        if self.ncols != other.nrows {
            return Err(LinalgError::DimensionMismatch(format!(
                "{}x{} times {}x{}",
                self.nrows, self.ncols, other.nrows, other.ncols
            )));
        }
        let mut indptr = vec![0; self.nrows + 1];
        let mut indices = Vec::new();
        let mut data = Vec::new();
        let mut acc = vec![0.0; other.ncols];
        let mut mark = vec![usize::MAX; other.ncols];
        let mut cols = Vec::new();
        for i in 0..self.nrows {
            cols.clear();
            let (ca, va) = self.row(i);
            for (k, a) in ca.iter().zip(va) {
                let (cb, vb) = other.row(*k);
                for (j, b) in cb.iter().zip(vb) {
                    if mark[*j] != i {
                        mark[*j] = i;
                        acc[*j] = 0.0;
                        cols.push(*j);
                    }
                    acc[*j] += a * b;
                }
            }
            cols.sort_unstable();
            for &j in &cols {
                indices.push(j);
                data.push(acc[j]);
            }
            indptr[i + 1] = indices.len();
        }
        Ok(CsrMatrix {
            nrows: self.nrows,
            ncols: other.ncols,
            indptr,
            indices,
            data,
        })
    }

    /// `self + s * other`.
    pub fn add_scaled(&self, other: &CsrMatrix, s: f64) -> Result<CsrMatrix, LinalgError> {
        if self.nrows != other.nrows || self.ncols != other.ncols {
            return Err(LinalgError::DimensionMismatch(format!(
                "{}x{} plus {}x{}",
                self.nrows, self.ncols, other.nrows, other.ncols
            )));
        }
        let mut indptr = vec![0; self.nrows + 1];
        let mut indices = Vec::with_capacity(self.nnz().max(other.nnz()));
        let mut data = Vec::with_capacity(indices.capacity());
        for i in 0..self.nrows {
            let (ca, va) = self.row(i);
            let (cb, vb) = other.row(i);
            let (mut p, mut q) = (0, 0);
            while p < ca.len() || q < cb.len() {
                let ja = ca.get(p).copied().unwrap_or(usize::MAX);
                let jb = cb.get(q).copied().unwrap_or(usize::MAX);
                if ja < jb {
                    indices.push(ja);
                    data.push(va[p]);
                    p += 1;
                } else if jb < ja {
                    indices.push(jb);
                    data.push(s * vb[q]);
                    q += 1;
                } else {
                    indices.push(ja);
                    data.push(va[p] + s * vb[q]);
                    p += 1;
                    q += 1;
                }
            }
            indptr[i + 1] = indices.len();
        }
        Ok(CsrMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            indptr,
            indices,
            data,
        })
    }

    pub fn scale(&mut self, s: f64) {
        self.data.iter_mut().for_each(|x| *x *= s);
    }

    /// Largest `|a_ij - a_ji|` relative to the largest entry.
    pub fn asymmetry(&self) -> f64 {
        if self.nrows != self.ncols {
            return f64::INFINITY;
        }
        let scale = self.data.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(f64::MIN_POSITIVE);
        let t = self.transpose();
        match self.add_scaled(&t, -1.0) {
            Ok(d) => d.data.iter().fold(0.0f64, |m, x| m.max(x.abs())) / scale,
            Err(_) => f64::INFINITY,
        }
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.asymmetry() <= tol
    }

    /// Symmetric elimination of the listed dofs: their rows and columns are
    /// replaced by the identity.
    pub fn eliminate_symmetric(&self, fixed: &[bool]) -> CsrMatrix {
        assert_eq!(fixed.len(), self.nrows);
        let mut indptr = vec![0; self.nrows + 1];
        let mut indices = Vec::with_capacity(self.nnz());
        let mut data = Vec::with_capacity(self.nnz());
        for i in 0..self.nrows {
            if fixed[i] {
                indices.push(i);
                data.push(1.0);
            } else {
                let (c, v) = self.row(i);
                for (j, a) in c.iter().zip(v) {
                    if !fixed[*j] {
                        indices.push(*j);
                        data.push(*a);
                    }
                }
            }
            indptr[i + 1] = indices.len();
        }
        CsrMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            indptr,
            indices,
            data,
        }
    }

    /// Matrix Market coordinate dump.
    pub fn write_matrix_market(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
        writeln!(w, "{} {} {}", self.nrows, self.ncols, self.nnz())?;
        for i in 0..self.nrows {
            let (c, v) = self.row(i);
            for (j, a) in c.iter().zip(v) {
                writeln!(w, "{} {} {:.17e}", i + 1, j + 1, a)?;
            }
        }
        w.flush()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn random_sparse(n: usize, m: usize, seed: u64) -> CsrMatrix {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut t = Vec::new();
        for _ in 0..(n * m / 3).max(1) {
            t.push((rng.random_range(0..n), rng.random_range(0..m), rng.random_range(-1.0..1.0)));
        }
        CsrMatrix::from_triplets(n, m, t)
    }

    #[test]
    fn triplets_merge_duplicates() {
        let a = CsrMatrix::from_triplets(2, 3, vec![(1, 2, 1.0), (0, 0, 2.0), (1, 2, 0.5)]);
        assert_eq!(a.nnz(), 2);
        assert_eq!(a.get(1, 2), 1.5);
        assert_eq!(a.get(0, 1), 0.0);
    }

    #[test]
    fn elimination_keeps_symmetry() {
        let d = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 2.0, 1.0, 5.0, 1.0, 2.0, 1.0, 6.0]);
        let a = CsrMatrix::from_dense(&d, 0.0);
        let e = a.eliminate_symmetric(&[false, true, false]);
        assert!(e.is_symmetric(0.0));
        assert_eq!(e.get(1, 1), 1.0);
        assert_eq!(e.get(0, 1), 0.0);
        assert_eq!(e.get(0, 2), 2.0);
    }

    proptest! {
        #[test]
        fn products_match_dense(n in 1usize..12, k in 1usize..12, m in 1usize..12, seed in 0u64..1000) {
            let a = random_sparse(n, k, seed);
            let b = random_sparse(k, m, seed + 1);
            let c = a.matmul(&b).unwrap();
            let d = a.to_dense() * b.to_dense();
            prop_assert!((c.to_dense() - d).amax() < 1e-13);
            let t = a.transpose();
            prop_assert_eq!(t.to_dense(), a.to_dense().transpose());
            let s = a.add_scaled(&random_sparse(n, k, seed + 2), -0.5).unwrap();
            let sd = a.to_dense() - random_sparse(n, k, seed + 2).to_dense() * 0.5;
            prop_assert!((s.to_dense() - sd).amax() < 1e-14);
        }

        #[test]
        fn matvec_policies_agree(n in 1usize..40, seed in 0u64..1000) {
            let a = random_sparse(n, n, seed);
            let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).cos()).collect();
            let mut ys = vec![0.0; n];
            let mut yp = vec![0.0; n];
            a.matvec_into(&x, &mut ys, Execution::Serial);
            a.matvec_into(&x, &mut yp, Execution::Parallel);
            prop_assert_eq!(&ys, &yp);
            let d = a.to_dense() * nalgebra::DVector::from_vec(x);
            for i in 0..n {
                prop_assert!((ys[i] - d[i]).abs() < 1e-13);
            }
        }
    }
}
