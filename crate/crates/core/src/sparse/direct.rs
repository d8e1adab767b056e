//! Direct sparse factorizations backed by faer.

use faer::linalg::solvers::SolveCore;
use faer::sparse::linalg::solvers::{Llt, Lu, SymbolicLlt, SymbolicLu};
use faer::sparse::linalg::{LltError, LuError};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};
use faer::{Conj, MatMut, Side};

use super::{Preconditioner, SparseMatrix};
use crate::error::{MhdError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum DirectKind {
    /// Sparse LU with partial pivoting (general matrices).
    Lu,
    /// Sparse Cholesky (symmetric positive definite matrices).
    Cholesky,
}

enum Factor {
    Lu(SymbolicLu<usize>, Lu<usize, f64>),
    Llt(SymbolicLlt<usize>, Llt<usize, f64>),
}

/// A factorized square matrix. The symbolic analysis is kept so that a
/// matrix with the same pattern can be refactorized cheaply.
pub struct DirectSolver {
    n: usize,
    name: String,
    /// Column-major copy of the pattern, to detect pattern changes.
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    factor: Factor,
}

fn csc(a: &SparseMatrix) -> SparseMatrix {
    // CSR of A^T has the layout of CSC of A.
    a.transpose()
}

fn singular(name: &str, pivot: Option<usize>) -> MhdError {
    MhdError::Singular {
        block: name.to_string(),
        pivot,
    }
}

fn lu_err(name: &str, e: LuError) -> MhdError {
    match e {
        LuError::SymbolicSingular { index } => singular(name, Some(index)),
        LuError::Generic(g) => MhdError::InvalidArgument(format!("{name}: {g:?}")),
    }
}

fn llt_err(name: &str, e: LltError) -> MhdError {
    match e {
        LltError::Numeric(faer::linalg::cholesky::llt::factor::LltError::NonPositivePivot { index }) => {
            singular(name, Some(index))
        }
        LltError::Generic(g) => MhdError::InvalidArgument(format!("{name}: {g:?}")),
    }
}

/// Factorize `a`; `name` labels the matrix in error messages.
pub fn factorize(a: &SparseMatrix, kind: DirectKind, name: &str) -> Result<DirectSolver> {
    if a.n_rows != a.n_cols {
        return Err(MhdError::InvalidArgument(format!("{name}: cannot factorize a non-square matrix")));
    }
    let t = csc(a);
    let n = a.n_rows;
    let sym = SymbolicSparseColMatRef::new_checked(n, n, &t.indptr, None, &t.indices);
    let mat = SparseColMatRef::new(sym, &t.values);
    let factor = match kind {
        DirectKind::Lu => {
            let s = SymbolicLu::try_new(sym).map_err(|e| MhdError::InvalidArgument(format!("{name}: {e:?}")))?;
            let f = Lu::try_new_with_symbolic(s.clone(), mat).map_err(|e| lu_err(name, e))?;
            Factor::Lu(s, f)
        }
        DirectKind::Cholesky => {
            let s = SymbolicLlt::try_new(sym, Side::Lower).map_err(|e| MhdError::InvalidArgument(format!("{name}: {e:?}")))?;
            let f = Llt::try_new_with_symbolic(s.clone(), mat, Side::Lower).map_err(|e| llt_err(name, e))?;
            Factor::Llt(s, f)
        }
    };
    let solver = DirectSolver {
        n,
        name: name.to_string(),
        col_ptr: t.indptr,
        row_idx: t.indices,
        factor,
    };
    solver.check_finite()?;
    Ok(solver)
}

impl DirectSolver {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> DirectKind {
        match self.factor {
            Factor::Lu(..) => DirectKind::Lu,
            Factor::Llt(..) => DirectKind::Cholesky,
        }
    }

    /// Numeric refactorization of a matrix with the same sparsity pattern;
    /// falls back to a fresh analysis when the pattern differs.
    pub fn refactor(&mut self, a: &SparseMatrix) -> Result<()> {
        let t = csc(a);
        if t.indptr != self.col_ptr || t.indices != self.row_idx {
            *self = factorize(a, self.kind(), &self.name)?;
            return Ok(());
        }
        let n = self.n;
        let sym = SymbolicSparseColMatRef::new_checked(n, n, &self.col_ptr, None, &self.row_idx);
        let mat = SparseColMatRef::new(sym, &t.values);
        self.factor = match &self.factor {
            Factor::Lu(s, _) => Factor::Lu(
                s.clone(),
                Lu::try_new_with_symbolic(s.clone(), mat).map_err(|e| lu_err(&self.name, e))?,
            ),
            Factor::Llt(s, _) => Factor::Llt(
                s.clone(),
                Llt::try_new_with_symbolic(s.clone(), mat, Side::Lower).map_err(|e| llt_err(&self.name, e))?,
            ),
        };
        self.check_finite()
    }

    /// A numerically singular matrix slips through pivoting as a zero
    /// pivot, which shows up as non-finite solution entries.
    fn check_finite(&self) -> Result<()> {
        let probe: Vec<f64> = (0..self.n).map(|i| 1.0 + (i % 7) as f64 * 0.1).collect();
        let x = self.solve(&probe);
        match x.iter().position(|v| !v.is_finite()) {
            Some(i) => Err(singular(&self.name, Some(i))),
            None => Ok(()),
        }
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        let n = self.n;
        let rhs = MatMut::from_column_major_slice_mut(x, n, 1);
        match &self.factor {
            Factor::Lu(_, f) => f.solve_in_place_with_conj(Conj::No, rhs),
            Factor::Llt(_, f) => f.solve_in_place_with_conj(Conj::No, rhs),
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

impl Preconditioner for DirectSolver {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        z.copy_from_slice(r);
        self.solve_in_place(z);
    }
}
