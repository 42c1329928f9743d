//! Scalar and vector kernels shared by the geometry.
//!
//! Every p-norm is evaluated in max-scaled form `m * ||v / m||_p`, so the
//! exponent can be pushed to 10^5 and beyond without `sum |v_i|^p`
//! overflowing or underflowing to zero.

use std::cmp::Ordering;
use std::ops::Deref;

use crate::error::{Error, Result};

/// Magnitudes below this are treated as exact zeros by [`sign_power`].
pub const ZERO_FLUSH: f64 = 1e-300;

/// An ambient vector whose entries are all finite.
#[derive(Debug, Clone, PartialEq)]
pub struct RealVec(Vec<f64>);

impl RealVec {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidInput("vector must have at least one entry".into()));
        }
        check_finite(&entries)?;
        Ok(RealVec(entries))
    }

    pub fn zeros(n: usize) -> Self {
        RealVec(vec![0.0; n.max(1)])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for RealVec {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for RealVec {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        RealVec::new(v)
    }
}

pub(crate) fn check_finite(v: &[f64]) -> Result<()> {
    match v.iter().position(|x| !x.is_finite()) {
        Some(i) => Err(Error::InvalidInput(format!("entry {i} is not finite ({})", v[i]))),
        None => Ok(()),
    }
}

pub fn check_exponent(p: f64) -> Result<()> {
    if p.is_finite() && p > 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("exponent p must be finite and > 1, got {p}")))
    }
}

pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Euclidean norm, scaled like [`pnorm`].
pub fn norm2(v: &[f64]) -> f64 {
    let m = max_abs(v);
    if m == 0.0 {
        return 0.0;
    }
    let s: f64 = v.iter().map(|x| (x / m) * (x / m)).sum();
    m * s.sqrt()
}

/// `||v||_p` for finite entries. Returns 0 for the zero vector.
pub fn pnorm(v: &[f64], p: f64) -> f64 {
    let m = max_abs(v);
    if m == 0.0 {
        return 0.0;
    }
    m * scaled_power_sum(v, m, p).powf(1.0 / p)
}

/// Checked variant of [`pnorm`].
pub fn try_pnorm(v: &[f64], p: f64) -> Result<f64> {
    if v.is_empty() {
        return Err(Error::InvalidInput("empty vector".into()));
    }
    check_exponent(p)?;
    check_finite(v)?;
    Ok(pnorm(v, p))
}

// sum |v_i / m|^p, always in [1, n] when m = max |v_i| > 0
fn scaled_power_sum(v: &[f64], m: f64, p: f64) -> f64 {
    if p == 2.0 {
        return v.iter().map(|x| (x / m) * (x / m)).sum();
    }
    v.iter()
        .map(|x| {
            let r = x.abs() / m;
            if r == 1.0 {
                1.0
            } else {
                r.powf(p)
            }
        })
        .sum()
}

/// Decides `||v||_p` against 1 without forming `||v||_p - 1`.
///
/// When the largest entry is exactly 1 in magnitude the contribution of
/// the remaining entries can be far below double precision (e.g. `0.9^50000`)
/// while still being strictly positive; this comparison keeps that
/// information instead of rounding the norm to 1.
pub fn cmp_pnorm_one(v: &[f64], p: f64) -> Ordering {
    let m = max_abs(v);
    if m == 0.0 {
        return Ordering::Less;
    }
    if m > 1.0 {
        return Ordering::Greater;
    }
    let mut maxima = 0usize;
    let mut others_nonzero = false;
    let mut rest = 0.0;
    for x in v {
        let r = x.abs() / m;
        if r == 1.0 {
            maxima += 1;
        } else if r > 0.0 {
            others_nonzero = true;
            rest += r.powf(p);
        }
    }
    if m == 1.0 {
        return if maxima > 1 || others_nonzero {
            Ordering::Greater
        } else {
            Ordering::Equal
        };
    }
    // m < 1:  ||v||_p^p = m^p (k + rest)
    let log_total = p * m.ln() + ((maxima as f64) + rest).ln();
    log_total.partial_cmp(&0.0).unwrap_or(Ordering::Less)
}

/// `sgn(w) |w|^(p-1)` for a scalar.
#[inline]
pub fn sign_power_scalar(w: f64, p: f64) -> f64 {
    if p == 2.0 {
        return w;
    }
    let a = w.abs();
    if a < ZERO_FLUSH {
        return 0.0;
    }
    let mag = (p - 1.0) * a.ln();
    let r = mag.exp();
    if r < f64::MIN_POSITIVE {
        0.0
    } else {
        r.copysign(w)
    }
}

/// Element-wise `sgn(v) ⊙ |v|^(p-1)`.
pub fn sign_power(v: &[f64], p: f64) -> Vec<f64> {
    v.iter().map(|&w| sign_power_scalar(w, p)).collect()
}

/// Element-wise product.
pub fn hadamard(a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    if a.len() != b.len() {
        return Err(Error::Dimension { expected: a.len(), got: b.len() });
    }
    Ok(a.iter().zip(b).map(|(x, y)| x * y).collect())
}

/// Element-wise power `v_i^r`. Fractional exponents need nonnegative bases.
pub fn elementwise_power(v: &[f64], r: f64) -> Result<Vec<f64>> {
    let integral = r.fract() == 0.0;
    if !integral {
        if let Some(i) = v.iter().position(|&x| x < 0.0) {
            return Err(Error::Domain(format!(
                "negative base {} at entry {i} with fractional exponent {r}",
                v[i]
            )));
        }
    }
    Ok(v.iter()
        .map(|&x| if integral && r.abs() < i32::MAX as f64 { x.powi(r as i32) } else { x.powf(r) })
        .collect())
}

/// `v / ||v||_p`; `v` must be nonzero.
pub fn normalize(v: &[f64], p: f64) -> Vec<f64> {
    let s = pnorm(v, p);
    v.iter().map(|x| x / s).collect()
}

pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub(crate) fn scaled(alpha: f64, x: &[f64]) -> Vec<f64> {
    x.iter().map(|v| alpha * v).collect()
}

pub(crate) fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn pnorm_examples() {
        assert_eq!(pnorm(&[3.0, 4.0], 2.0), 5.0);
        assert_relative_eq!(pnorm(&[1.0, 1.0], 4.0), 2f64.powf(0.25), max_relative = 1e-15);
        let big = pnorm(&[1e200, 1e200], 4.0);
        assert!(big.is_finite());
        assert_relative_eq!(big, 1e200 * 2f64.powf(0.25), max_relative = 1e-14);
        assert_eq!(pnorm(&[0.0, 0.0], 3.0), 0.0);
    }

    #[test]
    fn pnorm_extreme_exponents() {
        let v = [0.3, -0.9, 0.5];
        assert_relative_eq!(pnorm(&v, 50000.0), 0.9, max_relative = 1e-12);
        assert_relative_eq!(pnorm(&v, 1.000001), 1.7, max_relative = 1e-5);
        let tiny = [1e-200, 2e-200];
        assert_relative_eq!(pnorm(&tiny, 100.0), 2e-200, max_relative = 1e-12);
    }

    #[test]
    fn try_pnorm_rejects_non_finite_and_bad_p() {
        assert!(matches!(try_pnorm(&[1.0, f64::NAN], 2.0), Err(Error::InvalidInput(_))));
        assert!(matches!(try_pnorm(&[1.0, f64::INFINITY], 2.0), Err(Error::InvalidInput(_))));
        assert!(try_pnorm(&[1.0], 1.0).is_err());
        assert!(try_pnorm(&[], 2.0).is_err());
        assert!(RealVec::new(vec![0.0, f64::NAN]).is_err());
    }

    #[test]
    fn sign_power_examples() {
        assert_eq!(sign_power(&[1.0, -1.0, 0.0], 3.0), vec![1.0, -1.0, 0.0]);
        assert_eq!(sign_power(&[2.0, -3.0], 2.0), vec![2.0, -3.0]);
        assert_relative_eq!(sign_power(&[0.5], 4.0)[0], 0.125, max_relative = 1e-15);
        // near-one exponent: tiny magnitudes flush to zero
        assert_eq!(sign_power(&[1e-320, -1e-301], 1.000001), vec![0.0, 0.0]);
        assert_eq!(sign_power(&[0.5], 50000.0), vec![0.0]);
    }

    #[test]
    fn hadamard_examples() {
        assert_eq!(hadamard(&[1.0, 2.0], &[3.0, 4.0]).unwrap(), vec![3.0, 8.0]);
        assert_eq!(hadamard(&[1.5, -2.0], &[1.0, 1.0]).unwrap(), vec![1.5, -2.0]);
        assert_eq!(hadamard(&[1.0, 2.0], &[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
        assert!(matches!(
            hadamard(&[1.0], &[1.0, 2.0]),
            Err(Error::Dimension { expected: 1, got: 2 })
        ));
    }

    #[test]
    fn elementwise_power_examples() {
        assert_eq!(elementwise_power(&[2.0, 3.0], 2.0).unwrap(), vec![4.0, 9.0]);
        assert_eq!(elementwise_power(&[-2.0, 3.0], 2.0).unwrap(), vec![4.0, 9.0]);
        assert_eq!(elementwise_power(&[4.0, 9.0], 0.5).unwrap(), vec![2.0, 3.0]);
        assert!(matches!(elementwise_power(&[-4.0], 0.5), Err(Error::Domain(_))));
    }

    #[test]
    fn cmp_one_sees_sub_precision_excess() {
        assert_eq!(cmp_pnorm_one(&[1.0, 0.9], 50000.0), Ordering::Greater);
        assert_eq!(cmp_pnorm_one(&[1.0, 0.0], 50000.0), Ordering::Equal);
        assert_eq!(cmp_pnorm_one(&[0.9, 0.9], 2.0), Ordering::Greater);
        assert_eq!(cmp_pnorm_one(&[0.5, 0.5], 2.0), Ordering::Less);
        assert_eq!(cmp_pnorm_one(&[0.999, 0.999], 2.0), Ordering::Greater);
    }

    fn vec_strategy() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-1.0f64..1.0, 1..20)
    }

    proptest! {
        #[test]
        fn pnorm_scales(v in vec_strategy(), e in -150i32..150, p in prop::sample::select(vec![1.000001, 1.5, 2.0, 3.0, 4.0, 10.0, 100.0, 50000.0])) {
            prop_assume!(max_abs(&v) > 1e-6);
            let c = 10f64.powi(e);
            let cv: Vec<f64> = v.iter().map(|x| c * x).collect();
            let lhs = pnorm(&cv, p);
            let rhs = c * pnorm(&v, p);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs);
        }

        #[test]
        fn pnorm_decreases_in_p(v in vec_strategy(), p1 in 1.01f64..50.0, dp in 0.01f64..50.0) {
            let a = pnorm(&v, p1);
            let b = pnorm(&v, p1 + dp);
            prop_assert!(a >= b * (1.0 - 1e-12));
            prop_assert!(b >= max_abs(&v) * (1.0 - 1e-12));
        }

        #[test]
        fn sign_power_reproduces_power_sum(v in vec_strategy(), p in 1.1f64..12.0) {
            prop_assume!(max_abs(&v) > 1e-3);
            let lhs = dot(&v, &sign_power(&v, p));
            let rhs = pnorm(&v, p).powf(p);
            prop_assert!((lhs - rhs).abs() <= 1e-10 * rhs);
        }

        #[test]
        fn sign_power_two_is_identity(v in vec_strategy()) {
            prop_assert_eq!(sign_power(&v, 2.0), v);
        }
    }
}
