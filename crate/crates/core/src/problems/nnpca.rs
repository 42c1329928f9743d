//! Nonnegative PCA, `max v^T A v` over `v >= 0, ||v||_2 = 1`, solved as the
//! unconstrained problem `min -(x^2)^T A (x^2)` on the 4-sphere with `v = x^2`.

use nalgebra::DMatrix;
use serde::Serialize;

use super::{check_len, check_spd, matvec};
use crate::error::{Error, Result};
use crate::kernels::{self, dot};
use crate::optimizer::Problem;

#[derive(Debug, Clone, PartialEq)]
pub struct NnpcaInstance {
    a: DMatrix<f64>,
}

impl NnpcaInstance {
    pub fn new(a: DMatrix<f64>) -> Result<Self> {
        check_spd(&a, "A")?;
        Ok(NnpcaInstance { a })
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn problem(&self) -> NnpcaProblem<'_> {
        NnpcaProblem { inst: self }
    }

    /// `g(v) = -v^T A v`.
    pub fn lifted_objective(&self, v: &[f64]) -> f64 {
        -dot(v, &matvec(&self.a, v))
    }

    /// Closed-form Riemannian gradient on the 4-sphere:
    /// `-4((Ax^2) ⊙ x - ((x^4)^T A x^2 / ||x^3||^2) x^3)`.
    pub fn riemannian_gradient_closed_form(&self, x: &[f64]) -> Vec<f64> {
        let x2: Vec<f64> = x.iter().map(|v| v * v).collect();
        let ax2 = matvec(&self.a, &x2);
        let x3: Vec<f64> = x.iter().zip(&x2).map(|(a, b)| a * b).collect();
        let x4: Vec<f64> = x2.iter().map(|v| v * v).collect();
        let coef = dot(&x4, &ax2) / dot(&x3, &x3);
        ax2.iter()
            .zip(x)
            .zip(&x3)
            .map(|((axi, xi), x3i)| -4.0 * (axi * xi - coef * x3i))
            .collect()
    }
}

pub struct NnpcaProblem<'a> {
    inst: &'a NnpcaInstance,
}

impl Problem for NnpcaProblem<'_> {
    fn objective(&self, x: &[f64]) -> f64 {
        let x2: Vec<f64> = x.iter().map(|v| v * v).collect();
        self.inst.lifted_objective(&x2)
    }

    fn euclidean_gradient(&self, x: &[f64]) -> Vec<f64> {
        let x2: Vec<f64> = x.iter().map(|v| v * v).collect();
        let ax2 = matvec(&self.inst.a, &x2);
        ax2.iter().zip(x).map(|(a, xi)| -4.0 * a * xi).collect()
    }

    fn descriptor(&self) -> &str {
        "nnpca"
    }
}

/// `v = x ⊙ x`.
pub fn nnpca_lift(x: &[f64]) -> Vec<f64> {
    x.iter().map(|v| v * v).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KktReport {
    pub v: Vec<f64>,
    pub multiplier_mu: f64,
    /// Largest positive entry of `(I - v v^T) A v`.
    pub residual_stationarity: f64,
    pub residual_norm: f64,
    pub residual_nonneg: f64,
    /// `max |(Av)_i - mu v_i|` over `{i : v_i > tol}`.
    pub support_residual: f64,
    /// Largest `(Av)_i` off the support, floored at zero.
    pub off_support_residual: f64,
    pub support_size: usize,
    pub tol: f64,
    pub passed: bool,
}

impl KktReport {
    pub fn support_consistent(&self) -> bool {
        self.support_residual <= self.tol && self.off_support_residual <= self.tol
    }
}

/// First-order conditions of `max v^T A v` over the nonnegative part of the
/// unit 2-sphere: `v >= 0`, `v^T v = 1`, `(I - v v^T) A v <= 0`.
pub fn kkt_check(inst: &NnpcaInstance, v: &[f64], tol: f64) -> Result<KktReport> {
    check_len(v, inst.n())?;
    kernels::check_finite(v)?;
    if !(tol > 0.0) {
        return Err(Error::InvalidInput(format!("KKT tolerance must be positive, got {tol}")));
    }
    let av = matvec(&inst.a, v);
    let mu = dot(v, &av);
    let s: Vec<f64> = av.iter().zip(v).map(|(a, vi)| a - mu * vi).collect();
    let residual_stationarity = s.iter().cloned().fold(0.0, f64::max);
    let residual_norm = (dot(v, v) - 1.0).abs();
    let residual_nonneg = v.iter().cloned().fold(0.0f64, |m, vi| m.max(-vi));
    let mut support_residual: f64 = 0.0;
    let mut off_support_residual: f64 = 0.0;
    let mut support_size = 0;
    for ((&vi, &si), &ai) in v.iter().zip(&s).zip(&av) {
        if vi > tol {
            support_size += 1;
            support_residual = support_residual.max(si.abs());
        } else {
            off_support_residual = off_support_residual.max(ai);
        }
    }
    let passed = residual_stationarity <= tol && residual_norm <= tol && residual_nonneg <= tol;
    Ok(KktReport {
        v: v.to_vec(),
        multiplier_mu: mu,
        residual_stationarity,
        residual_norm,
        residual_nonneg,
        support_residual,
        off_support_residual,
        support_size,
        tol,
        passed,
    })
}

/// Number of entries of `v` with magnitude below `threshold`.
pub fn sparsity_count(v: &[f64], threshold: f64) -> usize {
    v.iter().filter(|x| x.abs() < threshold).count()
}
