//! The application problems: nonnegative PCA, sphere-constrained Lasso and
//! box-constrained QP, plus the checks and oracles that go with them.

pub mod boxqp;
pub mod equivalence;
pub mod lasso;
pub mod nnpca;
pub mod reference;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::kernels;

pub use boxqp::{BoxQpInstance, BoxQpProblem};
pub use lasso::{LassoInstance, LassoProblem};
pub use nnpca::{kkt_check, nnpca_lift, KktReport, NnpcaInstance, NnpcaProblem};

pub(crate) fn check_square(a: &DMatrix<f64>, what: &str) -> Result<usize> {
    if a.nrows() != a.ncols() || a.nrows() == 0 {
        return Err(Error::InvalidInput(format!(
            "{what} must be a nonempty square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    kernels::check_finite(a.as_slice())?;
    Ok(a.nrows())
}

/// Symmetric to 1e-12 (entrywise, relative to the largest entry) and
/// Cholesky-factorizable.
pub(crate) fn check_spd(a: &DMatrix<f64>, what: &str) -> Result<()> {
    check_square(a, what)?;
    let scale = a.amax().max(1.0);
    let asym = (a - a.transpose()).amax();
    if asym > 1e-12 * scale {
        return Err(Error::InvalidInput(format!("{what} is not symmetric (max |A - A^T| = {asym:e})")));
    }
    if a.clone().cholesky().is_none() {
        return Err(Error::InvalidInput(format!("{what} is not positive definite")));
    }
    Ok(())
}

pub fn matvec(a: &DMatrix<f64>, x: &[f64]) -> Vec<f64> {
    (a * DVector::from_column_slice(x)).data.into()
}

pub(crate) fn matvec_t(a: &DMatrix<f64>, x: &[f64]) -> Vec<f64> {
    (a.tr_mul(&DVector::from_column_slice(x))).data.into()
}

pub(crate) fn check_len(v: &[f64], n: usize) -> Result<()> {
    if v.len() == n {
        Ok(())
    } else {
        Err(Error::Dimension { expected: n, got: v.len() })
    }
}
