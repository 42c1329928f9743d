//! `min 1/2 w^T A w + c^T w` over the box `l <= w <= u`, mapped to the unit
//! p-sphere with `w = a ⊙ x + b`, `a = (u - l)/2`, `b = (u + l)/2`.

use nalgebra::{DMatrix, DVector};

use super::{check_len, check_spd, matvec};
use crate::error::{Error, Result};
use crate::kernels::{self, dot};
use crate::optimizer::Problem;

#[derive(Debug, Clone, PartialEq)]
pub struct BoxQpInstance {
    a_mat: DMatrix<f64>,
    c: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    half_width: Vec<f64>,
    center: Vec<f64>,
}

impl BoxQpInstance {
    pub fn new(a_mat: DMatrix<f64>, c: Vec<f64>, lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        check_spd(&a_mat, "A")?;
        let n = a_mat.nrows();
        check_len(&c, n)?;
        check_len(&lower, n)?;
        check_len(&upper, n)?;
        kernels::check_finite(&c)?;
        kernels::check_finite(&lower)?;
        kernels::check_finite(&upper)?;
        if let Some(i) = (0..n).find(|&i| !(lower[i] < upper[i])) {
            return Err(Error::InvalidInput(format!(
                "bounds must satisfy l < u, violated at index {i} ({} >= {})",
                lower[i], upper[i]
            )));
        }
        let half_width = lower.iter().zip(&upper).map(|(l, u)| 0.5 * (u - l)).collect();
        let center = lower.iter().zip(&upper).map(|(l, u)| 0.5 * (u + l)).collect();
        Ok(BoxQpInstance { a_mat, c, lower, upper, half_width, center })
    }

    pub fn n(&self) -> usize {
        self.c.len()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a_mat
    }

    pub fn linear(&self) -> &[f64] {
        &self.c
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn half_width(&self) -> &[f64] {
        &self.half_width
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    /// `L(w) = 1/2 w^T A w + c^T w`.
    pub fn loss(&self, w: &[f64]) -> f64 {
        0.5 * dot(w, &matvec(&self.a_mat, w)) + dot(&self.c, w)
    }

    /// `A w + c`.
    pub fn loss_gradient(&self, w: &[f64]) -> Vec<f64> {
        kernels::add(&matvec(&self.a_mat, w), &self.c)
    }

    pub fn to_box(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.half_width).zip(&self.center).map(|((x, a), b)| a * x + b).collect()
    }

    pub fn from_box(&self, w: &[f64]) -> Vec<f64> {
        w.iter().zip(&self.half_width).zip(&self.center).map(|((w, a), b)| (w - b) / a).collect()
    }

    /// `-A^{-1} c`.
    pub fn unconstrained_minimizer(&self) -> Vec<f64> {
        let chol = self.a_mat.clone().cholesky().expect("A is positive definite");
        let w = chol.solve(&DVector::from_column_slice(&self.c));
        w.iter().map(|v| -v).collect()
    }

    /// Largest amount by which `w` leaves the box.
    pub fn box_violation(&self, w: &[f64]) -> f64 {
        w.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(&wi, (&l, &u))| (l - wi).max(wi - u).max(0.0))
            .fold(0.0, f64::max)
    }

    pub fn is_feasible(&self, w: &[f64]) -> bool {
        self.box_violation(w) == 0.0
    }

    pub fn problem(&self) -> BoxQpProblem<'_> {
        BoxQpProblem { inst: self }
    }
}

pub struct BoxQpProblem<'a> {
    inst: &'a BoxQpInstance,
}

impl Problem for BoxQpProblem<'_> {
    fn objective(&self, x: &[f64]) -> f64 {
        self.inst.loss(&self.inst.to_box(x))
    }

    fn euclidean_gradient(&self, x: &[f64]) -> Vec<f64> {
        let g = self.inst.loss_gradient(&self.inst.to_box(x));
        g.iter().zip(&self.inst.half_width).map(|(g, a)| a * g).collect()
    }

    fn descriptor(&self) -> &str {
        "boxqp"
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inst(l: Vec<f64>, u: Vec<f64>) -> BoxQpInstance {
        BoxQpInstance::new(DMatrix::identity(2, 2), vec![0.0, 0.0], l, u).unwrap()
    }

    #[test]
    fn transform_examples() {
        let b = inst(vec![-1.0, -2.0], vec![1.0, 2.0]);
        assert_eq!(b.half_width(), &[1.0, 2.0]);
        assert_eq!(b.center(), &[0.0, 0.0]);
        assert_eq!(b.to_box(&[0.5, 0.5]), vec![0.5, 1.0]);
        let b = inst(vec![0.0, 0.0], vec![2.0, 2.0]);
        assert_eq!(b.half_width(), &[1.0, 1.0]);
        assert_eq!(b.to_box(&[0.5, -0.25]), vec![1.5, 0.75]);
    }

    #[test]
    fn round_trip() {
        let b = inst(vec![-3.0, 0.5], vec![1.0, 7.0]);
        let x = [0.37, -0.91];
        let back = b.from_box(&b.to_box(&x));
        for (a, c) in back.iter().zip(&x) {
            assert!((a - c).abs() <= 1e-12);
        }
    }

    #[test]
    fn bounds_validation() {
        assert!(BoxQpInstance::new(DMatrix::identity(2, 2), vec![0.0; 2], vec![0.0, 1.0], vec![1.0, 1.0]).is_err());
    }

    #[test]
    fn unconstrained_minimizer_and_violation() {
        let b = BoxQpInstance::new(DMatrix::identity(2, 2), vec![-10.0, 0.0], vec![-1.0; 2], vec![1.0; 2]).unwrap();
        assert_eq!(b.unconstrained_minimizer(), vec![10.0, 0.0]);
        assert_eq!(b.box_violation(&[10.0, 0.0]), 9.0);
        assert!(b.is_feasible(&[1.0, -1.0]));
    }
}
