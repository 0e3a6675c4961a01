//! Thin wrapper over faer's sparse LU.

use faer::sparse::{SparseColMat, Triplet};
use faer::prelude::*;
use faer::Col;

use crate::error::{Error, Result};

/// Solves `M x = b` for a square sparse `M` given as `(row, col, value)` triplets
/// (duplicates are summed).
pub(crate) fn sparse_solve(n: usize, entries: &[(usize, usize, f64)], rhs: &[f64]) -> Result<Vec<f64>> {
    if rhs.len() != n {
        return Err(Error::Shape(format!("rhs has {} entries for a {n}x{n} system", rhs.len())));
    }
    let triplets: Vec<Triplet<usize, usize, f64>> =
        entries.iter().map(|&(i, j, v)| Triplet::new(i, j, v)).collect();
    let m = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &triplets)
        .map_err(|e| Error::SolverFailure(format!("matrix assembly: {e:?}")))?;
    let lu = m.sp_lu().map_err(|e| Error::SolverFailure(format!("sparse LU: {e:?}")))?;
    let b = Col::<f64>::from_fn(n, |i| rhs[i]);
    let x = lu.solve(&b);
    let out: Vec<f64> = (0..n).map(|i| x[i]).collect();
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::SolverFailure("sparse LU produced non-finite values".into()));
    }
    Ok(out)
}
