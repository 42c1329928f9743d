//! The unit sphere of the p-norm as a Riemannian submanifold of R^n.
//!
//! Points and tangent vectors are plain ambient coordinates. The metric is
//! the standard inner product of R^n for every p, so tangent spaces are the
//! hyperplanes orthogonal to the normal direction `sgn(x) ⊙ |x|^(p-1)`.

mod retraction;
mod transport;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::kernels::{self, dot, norm2, pnorm, sign_power};

pub use retraction::{project_to_ball, InverseCheck};

/// Violations below this are repaired by the point/tangent constructors,
/// anything above is rejected.
pub const REPAIR_LIMIT: f64 = 1e-6;

/// Differentiability class of the sphere as an embedded submanifold.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Smoothness {
    Infinite,
    Finite(u32),
}

/// `S^{n-1}_p = { x in R^n : ||x||_p = 1 }` for `1 < p < inf`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpherePNorm {
    n: usize,
    p: f64,
    tol_membership: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum RetractionKind {
    #[default]
    Normalization,
    Projective,
    Orthographic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum TransportKind {
    #[default]
    DifferentiatedRetraction,
    Projection,
}

impl RetractionKind {
    pub const ALL: [RetractionKind; 3] =
        [RetractionKind::Normalization, RetractionKind::Projective, RetractionKind::Orthographic];
}

/// A point on the sphere.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    manifold: SpherePNorm,
    coords: Vec<f64>,
}

/// A tangent vector together with its base point.
#[derive(Debug, Clone, PartialEq)]
pub struct Tangent {
    base: Point,
    vec: Vec<f64>,
}

impl Point {
    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn manifold(&self) -> &SpherePNorm {
        &self.manifold
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.coords
    }
}

impl Tangent {
    pub fn base(&self) -> &Point {
        &self.base
    }

    pub fn vec(&self) -> &[f64] {
        &self.vec
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.vec
    }

    pub fn norm(&self) -> f64 {
        norm2(&self.vec)
    }

    pub fn is_zero(&self) -> bool {
        self.vec.iter().all(|&v| v == 0.0)
    }

    /// `alpha * self`, still based at the same point.
    pub fn scale(&self, alpha: f64) -> Tangent {
        Tangent { base: self.base.clone(), vec: kernels::scaled(alpha, &self.vec) }
    }

    /// `self + alpha * other`; both must share the base point.
    pub fn add_scaled(&self, alpha: f64, other: &Tangent) -> Tangent {
        debug_assert_eq!(self.base.coords, other.base.coords);
        let mut vec = self.vec.clone();
        kernels::axpy(alpha, &other.vec, &mut vec);
        Tangent { base: self.base.clone(), vec }
    }

    pub fn inner(&self, other: &Tangent) -> f64 {
        dot(&self.vec, &other.vec)
    }
}

impl SpherePNorm {
    pub fn new(n: usize, p: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidInput(format!("ambient dimension must be >= 2, got {n}")));
        }
        kernels::check_exponent(p)?;
        Ok(SpherePNorm { n, p, tol_membership: 1e-10 })
    }

    pub fn with_tolerance(mut self, tol: f64) -> Result<Self> {
        if !(tol >= 0.0 && tol.is_finite()) {
            return Err(Error::InvalidInput(format!("membership tolerance must be >= 0, got {tol}")));
        }
        self.tol_membership = tol;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// Manifold dimension `n - 1`.
    pub fn dim(&self) -> usize {
        self.n - 1
    }

    pub fn tol_membership(&self) -> f64 {
        self.tol_membership
    }

    /// `C^inf` for even integer p, `C^(p-1)` for odd integer p and
    /// `C^floor(p)` otherwise.
    pub fn smoothness(&self) -> Smoothness {
        let p = self.p;
        if p.fract() == 0.0 {
            if p % 2.0 == 0.0 {
                Smoothness::Infinite
            } else {
                Smoothness::Finite((p - 1.0) as u32)
            }
        } else {
            Smoothness::Finite(p.floor() as u32)
        }
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len == self.n {
            Ok(())
        } else {
            Err(Error::Dimension { expected: self.n, got: len })
        }
    }

    pub(crate) fn check_point(&self, x: &Point) -> Result<()> {
        if x.manifold != *self {
            return Err(Error::InvalidInput("point belongs to a different sphere".into()));
        }
        Ok(())
    }

    pub(crate) fn check_tangent(&self, x: &Point, eta: &Tangent) -> Result<()> {
        self.check_point(x)?;
        if eta.base.coords != x.coords {
            return Err(Error::InvalidInput("tangent vector is based at a different point".into()));
        }
        Ok(())
    }

    /// `| ||v||_p - 1 |`.
    pub fn membership_residual(&self, v: &[f64]) -> f64 {
        (pnorm(v, self.p) - 1.0).abs()
    }

    /// Validates `coords` as a point. Small violations (below
    /// [`REPAIR_LIMIT`]) are removed by renormalizing.
    pub fn point(&self, coords: Vec<f64>) -> Result<Point> {
        self.check_len(coords.len())?;
        kernels::check_finite(&coords)?;
        let residual = self.membership_residual(&coords);
        if residual <= self.tol_membership {
            Ok(Point { manifold: *self, coords })
        } else if residual <= REPAIR_LIMIT {
            Ok(self.point_unchecked(kernels::normalize(&coords, self.p)))
        } else {
            Err(Error::NotOnSphere { residual })
        }
    }

    /// Normalizes any nonzero finite vector onto the sphere.
    pub fn point_from_ambient(&self, v: &[f64]) -> Result<Point> {
        self.check_len(v.len())?;
        kernels::check_finite(v)?;
        if kernels::max_abs(v) == 0.0 {
            return Err(Error::InvalidInput("cannot normalize the zero vector".into()));
        }
        Ok(self.point_unchecked(kernels::normalize(v, self.p)))
    }

    pub(crate) fn point_unchecked(&self, coords: Vec<f64>) -> Point {
        Point { manifold: *self, coords }
    }

    /// `sgn(x) ⊙ |x|^(p-1)`, spanning the normal space at `x`.
    pub fn normal_direction(&self, x: &Point) -> Vec<f64> {
        sign_power(&x.coords, self.p)
    }

    /// `|<v, n_x>| / max(1, ||v||_2)`.
    pub fn tangency_residual(&self, x: &Point, v: &[f64]) -> f64 {
        let nx = self.normal_direction(x);
        dot(v, &nx).abs() / norm2(v).max(1.0)
    }

    /// Validates `v` as a tangent vector at `x`; violations below
    /// [`REPAIR_LIMIT`] are projected away.
    pub fn tangent(&self, x: &Point, v: Vec<f64>) -> Result<Tangent> {
        self.check_point(x)?;
        self.check_len(v.len())?;
        kernels::check_finite(&v)?;
        let residual = self.tangency_residual(x, &v);
        if residual <= self.tol_membership {
            Ok(Tangent { base: x.clone(), vec: v })
        } else if residual <= REPAIR_LIMIT {
            self.project(x, &v)
        } else {
            Err(Error::NotTangent { residual })
        }
    }

    pub(crate) fn tangent_unchecked(&self, x: &Point, vec: Vec<f64>) -> Tangent {
        Tangent { base: x.clone(), vec }
    }

    pub fn zero_tangent(&self, x: &Point) -> Tangent {
        Tangent { base: x.clone(), vec: vec![0.0; self.n] }
    }

    /// Orthogonal projection onto the tangent space at `x`:
    /// `d - (<n_x, d> / ||n_x||^2) n_x`.
    pub fn project(&self, x: &Point, d: &[f64]) -> Result<Tangent> {
        self.check_point(x)?;
        self.check_len(d.len())?;
        let nx = self.normal_direction(x);
        Ok(Tangent { base: x.clone(), vec: project_off(&nx, d) })
    }

    /// Uniformly-directed random point (normalized Gaussian sample).
    pub fn random_point<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        loop {
            let g: Vec<f64> = (0..self.n).map(|_| rng.sample(StandardNormal)).collect();
            if kernels::max_abs(&g) > 0.0 {
                return self.point_unchecked(kernels::normalize(&g, self.p));
            }
        }
    }

    /// Random tangent vector at `x` with Euclidean norm `norm`.
    pub fn random_tangent<R: Rng + ?Sized>(&self, x: &Point, norm: f64, rng: &mut R) -> Tangent {
        let nx = self.normal_direction(x);
        loop {
            let g: Vec<f64> = (0..self.n).map(|_| rng.sample(StandardNormal)).collect();
            let t = project_off(&nx, &g);
            let len = norm2(&t);
            if len > 1e-8 {
                return Tangent { base: x.clone(), vec: kernels::scaled(norm / len, &t) };
            }
        }
    }
}

/// Removes the component of `d` along `normal`, with one re-orthogonalization pass.
pub(crate) fn project_off(normal: &[f64], d: &[f64]) -> Vec<f64> {
    let nn = dot(normal, normal);
    let mut out = d.to_vec();
    if nn == 0.0 {
        return out;
    }
    for _ in 0..2 {
        let c = dot(normal, &out) / nn;
        if c == 0.0 {
            break;
        }
        kernels::axpy(-c, normal, &mut out);
    }
    out
}
