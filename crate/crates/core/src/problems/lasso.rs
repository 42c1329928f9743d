//! `min ||Xw - y||^2` over `||w||_p = C`, solved as `f(x) = ||C X x - y||^2`
//! on the unit p-sphere with `w = C x`.

use nalgebra::{DMatrix, DVector};

use super::{check_len, matvec, matvec_t};
use crate::error::{Error, Result};
use crate::kernels::{self, dot};
use crate::optimizer::Problem;

pub const DEFAULT_EPS: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct LassoInstance {
    x: DMatrix<f64>,
    y: Vec<f64>,
    c: f64,
    p: f64,
}

impl LassoInstance {
    pub fn new(x: DMatrix<f64>, y: Vec<f64>, c: f64, p: f64) -> Result<Self> {
        if x.nrows() == 0 || x.ncols() == 0 {
            return Err(Error::InvalidInput("data matrix must be nonempty".into()));
        }
        kernels::check_finite(x.as_slice())?;
        check_len(&y, x.nrows())?;
        kernels::check_finite(&y)?;
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidInput(format!("radius C must be positive, got {c}")));
        }
        kernels::check_exponent(p)?;
        Ok(LassoInstance { x, y, c, p })
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn response(&self) -> &[f64] {
        &self.y
    }

    pub fn radius(&self) -> f64 {
        self.c
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn n(&self) -> usize {
        self.x.ncols()
    }

    pub fn with_radius(&self, c: f64) -> Result<Self> {
        LassoInstance::new(self.x.clone(), self.y.clone(), c, self.p)
    }

    /// `L(w) = ||Xw - y||^2`.
    pub fn loss(&self, w: &[f64]) -> f64 {
        let r = kernels::sub(&matvec(&self.x, w), &self.y);
        dot(&r, &r)
    }

    pub fn problem(&self) -> LassoProblem<'_> {
        LassoProblem { inst: self }
    }

    /// `(X^T X)^{-1} X^T y`, or `None` when `X^T X` is singular.
    pub fn unregularized(&self) -> Option<Vec<f64>> {
        let xtx = self.x.tr_mul(&self.x);
        let xty = self.x.tr_mul(&DVector::from_column_slice(&self.y));
        let chol = xtx.cholesky()?;
        let w = chol.solve(&xty);
        w.iter().all(|v| v.is_finite()).then(|| w.data.into())
    }
}

pub struct LassoProblem<'a> {
    inst: &'a LassoInstance,
}

impl Problem for LassoProblem<'_> {
    fn objective(&self, x: &[f64]) -> f64 {
        self.inst.loss(&kernels::scaled(self.inst.c, x))
    }

    fn euclidean_gradient(&self, x: &[f64]) -> Vec<f64> {
        let c = self.inst.c;
        let r = kernels::sub(&matvec(&self.inst.x, &kernels::scaled(c, x)), &self.inst.y);
        kernels::scaled(2.0 * c, &matvec_t(&self.inst.x, &r))
    }

    fn descriptor(&self) -> &str {
        "lasso"
    }
}
