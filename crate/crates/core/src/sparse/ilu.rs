use super::{Preconditioner, SparseMatrix};
use crate::error::{MhdError, Result};

/// Incomplete LU factorization with zero fill on the pattern of `A`.
///
/// `L` (unit lower) and `U` share one CSR value array, as in the classical
/// IKJ formulation.
#[derive(Debug, Clone)]
pub struct Ilu0 {
    lu: SparseMatrix,
    diag: Vec<usize>,
}

impl Ilu0 {
    pub fn new(a: &SparseMatrix) -> Result<Self> {
        if a.n_rows != a.n_cols {
            return Err(MhdError::InvalidArgument("ILU(0) needs a square matrix".into()));
        }
        let n = a.n_rows;
        let mut lu = a.clone();
        let mut diag = vec![usize::MAX; n];
        for i in 0..n {
            diag[i] = lu.find(i, i).ok_or_else(|| MhdError::Singular {
                block: "ilu0 (missing diagonal)".into(),
                pivot: Some(i),
            })?;
        }
        // Scatter map from column to position in the current row.
        let mut pos = vec![usize::MAX; n];
        for i in 0..n {
            let (lo, hi) = (lu.indptr[i], lu.indptr[i + 1]);
            for k in lo..hi {
                pos[lu.indices[k]] = k;
            }
            for k in lo..hi {
                let col = lu.indices[k];
                if col >= i {
                    break;
                }
                let pivot = lu.values[diag[col]];
                let factor = lu.values[k] / pivot;
                lu.values[k] = factor;
                for kk in diag[col] + 1..lu.indptr[col + 1] {
                    let p = pos[lu.indices[kk]];
                    if p != usize::MAX {
                        lu.values[p] -= factor * lu.values[kk];
                    }
                }
            }
            for k in lo..hi {
                pos[lu.indices[k]] = usize::MAX;
            }
            if lu.values[diag[i]] == 0.0 || !lu.values[diag[i]].is_finite() {
                return Err(MhdError::Singular {
                    block: "ilu0".into(),
                    pivot: Some(i),
                });
            }
        }
        Ok(Self { lu, diag })
    }
}

impl Preconditioner for Ilu0 {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        let lu = &self.lu;
        let n = lu.n_rows;
        for i in 0..n {
            let mut s = r[i];
            for k in lu.indptr[i]..self.diag[i] {
                s -= lu.values[k] * z[lu.indices[k]];
            }
            z[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = z[i];
            for k in self.diag[i] + 1..lu.indptr[i + 1] {
                s -= lu.values[k] * z[lu.indices[k]];
            }
            z[i] = s / lu.values[self.diag[i]];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_on_tridiagonal() {
        // No fill occurs for a tridiagonal matrix, so ILU(0) is exact.
        let n = 10;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        let a = SparseMatrix::from_triplets(n, n, &t).unwrap();
        let ilu = Ilu0::new(&a).unwrap();
        let b: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let mut x = vec![0.0; n];
        ilu.apply(&b, &mut x);
        let r = a.spmv(&x).unwrap();
        assert!(r.iter().zip(&b).all(|(p, q)| (p - q).abs() < 1e-12));
    }

    #[test]
    fn missing_diagonal_is_singular() {
        let a = SparseMatrix::from_triplets(2, 2, &[(0, 1, 1.0), (1, 0, 1.0)]).unwrap();
        assert!(matches!(Ilu0::new(&a), Err(MhdError::Singular { pivot: Some(0), .. })));
    }
}
