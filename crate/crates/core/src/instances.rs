//! Seeded instance generators. All randomness goes through ChaCha8 so a
//! seed reproduces the same data on every platform.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{StandardNormal, Uniform};

use crate::error::{Error, Result};
use crate::kernels;
use crate::manifold::{Point, SpherePNorm};
use crate::problems::{BoxQpInstance, NnpcaInstance};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent stream `stream` of `seed`.
pub fn rng_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

pub fn gaussian_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<f64> {
    let data: Vec<f64> = (0..rows * cols).map(|_| rng.sample(StandardNormal)).collect();
    DMatrix::from_row_slice(rows, cols, &data)
}

/// `G^T G + 1e-3 n I` with standard normal `G`.
pub fn spd_matrix<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DMatrix<f64> {
    let g = gaussian_matrix(n, n, rng);
    let mut a = g.tr_mul(&g);
    for i in 0..n {
        a[(i, i)] += 1e-3 * n as f64;
    }
    // exact symmetry regardless of summation order
    let t = a.transpose();
    (a + t) * 0.5
}

pub fn nnpca_instance(n: usize, seed: u64) -> Result<NnpcaInstance> {
    if n < 2 {
        return Err(Error::InvalidInput(format!("n must be >= 2, got {n}")));
    }
    NnpcaInstance::new(spd_matrix(n, &mut rng(seed)))
}

/// Starting points with entries `|N(0,1)| + 0.1`, normalized; start `i`
/// uses stream `i` of `seed`.
pub fn positive_starts(manifold: &SpherePNorm, m: usize, seed: u64) -> Vec<Point> {
    (0..m)
        .map(|i| {
            let mut r = rng_stream(seed, i as u64);
            let v: Vec<f64> = (0..manifold.n()).map(|_| r.sample::<f64, _>(StandardNormal).abs() + 0.1).collect();
            manifold.point_from_ambient(&v).expect("positive vector normalizes")
        })
        .collect()
}

/// First `n - 3` coefficients `-k, ..., -1, 1, ..., k'` followed by three zeros;
/// for `n = 13` this is `(-5, ..., -1, 1, ..., 5, 0, 0, 0)`.
pub fn lasso_truth(n: usize) -> Vec<f64> {
    let k = n.saturating_sub(3);
    let neg = k.div_ceil(2);
    let mut w: Vec<f64> = (0..neg).map(|i| -((neg - i) as f64)).collect();
    w.extend((1..=k - neg).map(|i| i as f64));
    w.resize(n, 0.0);
    w
}

pub struct LassoData {
    pub x: DMatrix<f64>,
    pub y: Vec<f64>,
    pub w_true: Vec<f64>,
}

/// Standard normal design, `y = X w_true + e` with `e ~ U[-1, 1]`.
pub fn lasso_data(m: usize, n: usize, seed: u64) -> Result<LassoData> {
    if n < 4 || m < n {
        return Err(Error::InvalidInput(format!("need m >= n >= 4, got m = {m}, n = {n}")));
    }
    let mut r = rng(seed);
    let x = gaussian_matrix(m, n, &mut r);
    let w_true = lasso_truth(n);
    let noise = Uniform::new_inclusive(-1.0, 1.0).expect("valid range");
    let xw = crate::problems::matvec(&x, &w_true);
    let y = xw.iter().map(|v| v + r.sample(noise)).collect();
    Ok(LassoData { x, y, w_true })
}

/// Bounds `l = -(1, ..., n)`, `u = (1, ..., n)`.
pub fn ramp_bounds(n: usize) -> (Vec<f64>, Vec<f64>) {
    let u: Vec<f64> = (1..=n).map(|i| i as f64).collect();
    (u.iter().map(|v| -v).collect(), u)
}

/// Box QP with SPD `A`, ramp bounds and `c = n N(0, I)`, redrawing `c` until
/// the unconstrained minimizer leaves the box (at most `retries` redraws).
pub fn boxqp_instance(n: usize, seed: u64, retries: usize) -> Result<BoxQpInstance> {
    if n < 2 {
        return Err(Error::InvalidInput(format!("n must be >= 2, got {n}")));
    }
    let mut r = rng(seed);
    let a = spd_matrix(n, &mut r);
    let (l, u) = ramp_bounds(n);
    for _ in 0..=retries {
        let c: Vec<f64> = (0..n).map(|_| n as f64 * r.sample::<f64, _>(StandardNormal)).collect();
        let inst = BoxQpInstance::new(a.clone(), c, l.clone(), u.clone())?;
        if require_infeasible(&inst).is_ok() {
            return Ok(inst);
        }
    }
    Err(Error::Domain(format!(
        "unconstrained minimizer stayed inside the box after {} draws",
        retries + 1
    )))
}

/// Errors unless `-A^{-1} c` violates the box.
pub fn require_infeasible(inst: &BoxQpInstance) -> Result<()> {
    if inst.is_feasible(&inst.unconstrained_minimizer()) {
        Err(Error::Domain("unconstrained minimizer lies inside the box".into()))
    } else {
        Ok(())
    }
}

/// Start for the box problem: the clamped unconstrained minimizer, mapped
/// to the unit cube and normalized onto the p-sphere.
pub fn boxqp_start(inst: &BoxQpInstance, manifold: &SpherePNorm) -> Result<Point> {
    let w = inst.unconstrained_minimizer();
    let clamped: Vec<f64> = w
        .iter()
        .zip(inst.lower().iter().zip(inst.upper()))
        .map(|(&wi, (&l, &u))| wi.clamp(l, u))
        .collect();
    let x = inst.from_box(&clamped);
    if kernels::max_abs(&x) == 0.0 {
        return manifold.point_from_ambient(&vec![1.0; manifold.n()]);
    }
    manifold.point_from_ambient(&x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn truth_vector() {
        assert_eq!(
            lasso_truth(13),
            vec![-5.0, -4.0, -3.0, -2.0, -1.0, 1.0, 2.0, 3.0, 4.0, 5.0, 0.0, 0.0, 0.0]
        );
        assert_eq!(lasso_truth(4), vec![-1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn generators_are_deterministic() {
        let a = spd_matrix(5, &mut rng(3));
        assert_eq!(a, spd_matrix(5, &mut rng(3)));
        assert_ne!(a, spd_matrix(5, &mut rng(4)));
        assert_eq!(a, a.transpose());
        let d1 = lasso_data(20, 6, 1).unwrap();
        let d2 = lasso_data(20, 6, 1).unwrap();
        assert_eq!(d1.x, d2.x);
        assert_eq!(d1.y, d2.y);
    }

    #[test]
    fn box_instance_is_infeasible_unconstrained() {
        let inst = boxqp_instance(10, 7, 100).unwrap();
        assert!(!inst.is_feasible(&inst.unconstrained_minimizer()));
        assert_eq!(inst.lower()[9], -10.0);
    }

    #[test]
    fn positive_starts_are_positive() {
        let s = SpherePNorm::new(6, 4.0).unwrap();
        let starts = positive_starts(&s, 5, 1);
        assert!(starts.iter().all(|x| x.coords().iter().all(|&v| v > 0.0)));
        assert_ne!(starts[0], starts[1]);
    }
}
