//! Brute-force grid witnesses for the correspondence between p-norm
//! regularization, p-norm ball constraints and p-sphere constraints, on
//! small convex quadratics `L(w) = (w - z)^T Q (w - z)`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::kernels::{self, pnorm};
use crate::par::{self, Execution};

/// `L(w) = (w - z)^T Q (w - z)` with `Q` symmetric positive semidefinite.
#[derive(Debug, Clone, PartialEq)]
pub struct Quadratic {
    q: DMatrix<f64>,
    z: Vec<f64>,
}

impl Quadratic {
    pub fn new(q: DMatrix<f64>, z: Vec<f64>) -> Result<Self> {
        let n = z.len();
        if !(1..=3).contains(&n) || q.nrows() != n || q.ncols() != n {
            return Err(Error::InvalidInput("grid oracles need a square Q of size 1..=3".into()));
        }
        kernels::check_finite(q.as_slice())?;
        kernels::check_finite(&z)?;
        if (&q - q.transpose()).amax() > 1e-12 * q.amax().max(1.0) {
            return Err(Error::InvalidInput("Q must be symmetric".into()));
        }
        let low = q.clone().symmetric_eigen().eigenvalues.min();
        if low < -1e-12 * q.amax().max(1.0) {
            return Err(Error::InvalidInput("Q must be positive semidefinite".into()));
        }
        Ok(Quadratic { q, z })
    }

    /// `||w - center||_2^2`.
    pub fn isotropic(center: Vec<f64>) -> Result<Self> {
        let n = center.len();
        Quadratic::new(DMatrix::identity(n, n), center)
    }

    pub fn n(&self) -> usize {
        self.z.len()
    }

    pub fn eval(&self, w: &[f64]) -> f64 {
        let d = DVector::from_iterator(w.len(), w.iter().zip(&self.z).map(|(a, b)| a - b));
        d.dot(&(&self.q * &d))
    }

    /// Orthonormal basis of the null space of `Q`; the minimizers of `L`
    /// are `z + span(basis)`.
    fn null_basis(&self) -> Vec<Vec<f64>> {
        let eig = self.q.clone().symmetric_eigen();
        let scale = eig.eigenvalues.amax().max(f64::MIN_POSITIVE);
        (0..self.n())
            .filter(|&i| eig.eigenvalues[i].abs() <= 1e-12 * scale || self.q.amax() == 0.0)
            .map(|i| eig.eigenvectors.column(i).iter().cloned().collect())
            .collect()
    }

    /// Smallest p-norm over the minimizer set of `L`.
    pub fn min_norm_minimizer(&self, p: f64) -> f64 {
        let basis = self.null_basis();
        let mut coef = vec![0.0; basis.len()];
        let point = |coef: &[f64]| {
            let mut w = self.z.clone();
            for (c, b) in coef.iter().zip(&basis) {
                kernels::axpy(*c, b, &mut w);
            }
            w
        };
        if basis.is_empty() {
            return pnorm(&self.z, p);
        }
        // p-norm is convex along each coordinate of the affine parametrization
        let reach = 2.0 * kernels::norm2(&self.z) + 1.0;
        for _ in 0..50 {
            for k in 0..basis.len() {
                let f = |t: f64| {
                    let mut c = coef.clone();
                    c[k] = t;
                    pnorm(&point(&c), p)
                };
                coef[k] = golden_section(f, coef[k] - reach, coef[k] + reach);
            }
        }
        pnorm(&point(&coef), p)
    }
}

fn golden_section<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64) -> f64 {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() <= 1e-15 * (1.0 + a.abs().max(b.abs())) {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Uniform grid `linspace(-radius, radius, resolution + 1)` in every coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub radius: f64,
    pub resolution: usize,
}

impl Default for Grid {
    fn default() -> Self {
        Grid { radius: 4.0, resolution: 400 }
    }
}

impl Grid {
    fn axis(&self) -> Vec<f64> {
        let k = self.resolution as f64;
        (0..=self.resolution).map(|i| -self.radius + 2.0 * self.radius * i as f64 / k).collect()
    }

    /// Calls `visit` on each grid point; the first coordinate is split
    /// across workers and the per-chunk results are folded left to right.
    fn fold<T, F, G>(&self, n: usize, exec: Execution, init: T, visit: F, merge: G) -> T
    where
        T: Send + Sync + Clone,
        F: Fn(T, &[f64]) -> T + Sync + Send,
        G: Fn(T, T) -> T,
    {
        let axis = self.axis();
        let chunks = par::map_slice(exec, &axis, |&first| {
            let mut acc = init.clone();
            let mut w = vec![first; n];
            let mut idx = vec![0usize; n.saturating_sub(1)];
            loop {
                for (k, &i) in idx.iter().enumerate() {
                    w[k + 1] = axis[i];
                }
                acc = visit(acc, &w);
                let mut k = 0;
                while k < idx.len() {
                    idx[k] += 1;
                    if idx[k] < axis.len() {
                        break;
                    }
                    idx[k] = 0;
                    k += 1;
                }
                if k == idx.len() {
                    break;
                }
            }
            acc
        });
        chunks.into_iter().fold(init, merge)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegularizedWitness {
    /// Grid minimizer of `L(w) + lambda ||w||_p`.
    pub w_regularized: Vec<f64>,
    /// `||w_regularized||_p`.
    pub radius: f64,
    /// `L(w_regularized) - min { L(w) : ||w||_p <= radius }` over the grid.
    pub gap: f64,
}

type Best = Option<(f64, f64, Vec<f64>)>; // (value, norm, point)

fn better(a: &Best, value: f64, norm: f64) -> bool {
    match a {
        None => true,
        Some((v, nm, _)) => value < *v || (value == *v && norm < *nm),
    }
}

fn merge_best(a: Best, b: Best) -> Best {
    match &b {
        Some((v, norm, _)) if better(&a, *v, *norm) => b,
        _ => a,
    }
}

/// Grid witness that a minimizer of the regularized problem also solves the
/// ball-constrained problem at radius `||w*||_p`.
pub fn regularized_vs_constrained(
    l: &Quadratic,
    lambda: f64,
    p: f64,
    grid: Grid,
    exec: Execution,
) -> Result<RegularizedWitness> {
    kernels::check_exponent(p)?;
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidInput(format!("lambda must be >= 0, got {lambda}")));
    }
    let n = l.n();
    let reg = grid.fold(
        n,
        exec,
        None,
        |acc: Best, w| {
            let norm = pnorm(w, p);
            let v = l.eval(w) + lambda * norm;
            if better(&acc, v, norm) { Some((v, norm, w.to_vec())) } else { acc }
        },
        merge_best,
    );
    let (_, radius, w_reg) = reg.expect("grid is nonempty");
    let l_reg = l.eval(&w_reg);
    let ball = grid.fold(
        n,
        exec,
        f64::INFINITY,
        |acc: f64, w| if pnorm(w, p) <= radius { acc.min(l.eval(w)) } else { acc },
        f64::min,
    );
    Ok(RegularizedWitness { w_regularized: w_reg, radius, gap: l_reg - ball })
}

#[derive(Debug, Clone, PartialEq)]
pub enum SphereWitness {
    /// Some minimizer of `L` lies in the closed ball, so the reduction does not apply.
    NotApplicable { min_norm_minimizer: f64 },
    Checked { ball_optimum: f64, sphere_optimum: f64, gap: f64, confirmed: bool },
}

/// Grid witness that minimizing `L` over the ball `||w||_p <= c` gives the
/// same value as minimizing over the sphere `||w||_p = c` when every
/// unconstrained minimizer lies outside the ball. The ball is sampled in
/// polar form (radii times unit directions), so the sphere samples are a
/// subset of the ball samples.
pub fn ball_to_sphere(l: &Quadratic, c: f64, p: f64, resolution: usize, tol: f64, exec: Execution) -> Result<SphereWitness> {
    kernels::check_exponent(p)?;
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::InvalidInput(format!("radius must be positive, got {c}")));
    }
    let closest = l.min_norm_minimizer(p);
    if closest <= c {
        return Ok(SphereWitness::NotApplicable { min_norm_minimizer: closest });
    }
    let dirs = unit_directions(l.n(), p, resolution.max(1) * 8);
    let radii: Vec<f64> = (0..=resolution).map(|i| c * i as f64 / resolution as f64).collect();
    let per_dir = par::map_slice(exec, &dirs, |d| {
        let ball = radii.iter().map(|&r| l.eval(&kernels::scaled(r, d))).fold(f64::INFINITY, f64::min);
        (ball, l.eval(&kernels::scaled(c, d)))
    });
    let ball_optimum = per_dir.iter().map(|x| x.0).fold(f64::INFINITY, f64::min);
    let sphere_optimum = per_dir.iter().map(|x| x.1).fold(f64::INFINITY, f64::min);
    let gap = sphere_optimum - ball_optimum;
    Ok(SphereWitness::Checked { ball_optimum, sphere_optimum, gap, confirmed: gap <= tol })
}

/// Points of the cube surface `||v||_inf = 1`, `k + 1` per edge, rescaled to
/// unit p-norm.
fn unit_directions(n: usize, p: f64, k: usize) -> Vec<Vec<f64>> {
    let ticks: Vec<f64> = (0..=k).map(|i| -1.0 + 2.0 * i as f64 / k as f64).collect();
    let mut out = Vec::new();
    for face in 0..n {
        for sign in [-1.0, 1.0] {
            let m = n - 1;
            let mut idx = vec![0usize; m];
            loop {
                let mut v = Vec::with_capacity(n);
                let mut it = idx.iter();
                for j in 0..n {
                    v.push(if j == face { sign } else { ticks[*it.next().unwrap()] });
                }
                out.push(kernels::normalize(&v, p));
                let mut j = 0;
                while j < m {
                    idx[j] += 1;
                    if idx[j] <= k {
                        break;
                    }
                    idx[j] = 0;
                    j += 1;
                }
                if j == m {
                    break;
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> Grid {
        Grid { radius: 4.0, resolution: 80 }
    }

    #[test]
    fn origin_minimum_has_zero_radius() {
        let l = Quadratic::isotropic(vec![0.0, 0.0]).unwrap();
        let w = regularized_vs_constrained(&l, 1.0, 3.0, small(), Execution::Sequential).unwrap();
        assert_eq!(w.radius, 0.0);
        assert_eq!(w.gap, 0.0);
    }

    #[test]
    fn unregularized_is_identical() {
        let l = Quadratic::new(DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]), vec![2.0, 0.0]).unwrap();
        let w = regularized_vs_constrained(&l, 0.0, 2.0, small(), Execution::Sequential).unwrap();
        assert_eq!(w.radius, 2.0);
        assert_eq!(w.gap, 0.0);
    }

    #[test]
    fn precondition_gate() {
        let l = Quadratic::isotropic(vec![0.0, 0.0]).unwrap();
        assert!(matches!(
            ball_to_sphere(&l, 1.0, 2.0, 50, 1e-3, Execution::Sequential).unwrap(),
            SphereWitness::NotApplicable { .. }
        ));
        // a line of minimizers w1 = 2 passes through (2, 0), outside the unit ball
        let l = Quadratic::new(DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]), vec![2.0, 5.0]).unwrap();
        assert!((l.min_norm_minimizer(2.0) - 2.0).abs() < 1e-9);
        assert!((l.min_norm_minimizer(4.0) - 2.0).abs() < 1e-9);
    }

    #[test]
    fn directions_cover_the_unit_sphere() {
        let dirs = unit_directions(3, 4.0, 6);
        assert_eq!(dirs.len(), 6 * 49);
        assert!(dirs.iter().all(|d| (pnorm(d, 4.0) - 1.0).abs() < 1e-14));
    }

    #[test]
    fn exec_modes_agree() {
        let l = Quadratic::isotropic(vec![1.0, -0.5]).unwrap();
        let a = regularized_vs_constrained(&l, 0.7, 1.5, small(), Execution::Sequential).unwrap();
        let b = regularized_vs_constrained(&l, 0.7, 1.5, small(), Execution::Parallel).unwrap();
        assert_eq!(a, b);
    }
}
