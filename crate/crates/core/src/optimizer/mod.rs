//! First-order Riemannian solvers on the p-sphere.

mod line_search;
mod solve;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::kernels::{self, dot};
use crate::manifold::{Point, RetractionKind, SpherePNorm, Tangent, TransportKind};

pub use line_search::{armijo_backtracking, line_search_wolfe, strong_wolfe, LineSearchOutcome};
pub use solve::{multistart, random_starts, solve, MultiStartResult};

/// A smooth function on R^n whose restriction to the sphere is minimized.
pub trait Problem: Sync {
    fn objective(&self, x: &[f64]) -> f64;
    fn euclidean_gradient(&self, x: &[f64]) -> Vec<f64>;
    fn descriptor(&self) -> &str;
}

impl<P: Problem + ?Sized> Problem for &P {
    fn objective(&self, x: &[f64]) -> f64 {
        (**self).objective(x)
    }
    fn euclidean_gradient(&self, x: &[f64]) -> Vec<f64> {
        (**self).euclidean_gradient(x)
    }
    fn descriptor(&self) -> &str {
        (**self).descriptor()
    }
}

/// Wraps a pair of closures as a [`Problem`].
pub struct FnProblem<F, G> {
    label: String,
    f: F,
    g: G,
}

impl<F, G> FnProblem<F, G>
where
    F: Fn(&[f64]) -> f64 + Sync,
    G: Fn(&[f64]) -> Vec<f64> + Sync,
{
    pub fn new(label: impl Into<String>, f: F, g: G) -> Self {
        FnProblem { label: label.into(), f, g }
    }
}

impl<F, G> Problem for FnProblem<F, G>
where
    F: Fn(&[f64]) -> f64 + Sync,
    G: Fn(&[f64]) -> Vec<f64> + Sync,
{
    fn objective(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }
    fn euclidean_gradient(&self, x: &[f64]) -> Vec<f64> {
        (self.g)(x)
    }
    fn descriptor(&self) -> &str {
        &self.label
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Method {
    GradientDescent,
    #[default]
    ConjugateGradient,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BetaRule {
    #[default]
    FletcherReeves,
    PolakRibierePlus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub method: Method,
    pub retraction: RetractionKind,
    pub transport: TransportKind,
    pub beta_rule: BetaRule,
    pub grad_tol: f64,
    pub max_iters: usize,
    pub wolfe_c1: f64,
    pub wolfe_c2: f64,
    pub initial_step: f64,
    pub rng_seed: u64,
    /// Carry the previous direction with `-R^{-1}_{x_k}(x_{k-1}) / t_{k-1}`
    /// instead of a vector transport.
    pub inverse_retraction_transport: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            method: Method::ConjugateGradient,
            retraction: RetractionKind::Normalization,
            transport: TransportKind::DifferentiatedRetraction,
            beta_rule: BetaRule::FletcherReeves,
            grad_tol: 1e-8,
            max_iters: 10_000,
            wolfe_c1: 1e-4,
            wolfe_c2: 0.1,
            initial_step: 1.0,
            rng_seed: 0,
            inverse_retraction_transport: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.wolfe_c1 && self.wolfe_c1 < self.wolfe_c2 && self.wolfe_c2 < 1.0) {
            return Err(Error::InvalidInput(format!(
                "need 0 < c1 < c2 < 1, got c1 = {}, c2 = {}",
                self.wolfe_c1, self.wolfe_c2
            )));
        }
        if !(self.grad_tol > 0.0 && self.grad_tol.is_finite()) {
            return Err(Error::InvalidInput(format!("grad_tol must be positive, got {}", self.grad_tol)));
        }
        if self.max_iters < 1 {
            return Err(Error::InvalidInput("max_iters must be at least 1".into()));
        }
        if !(self.initial_step > 0.0 && self.initial_step.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "initial_step must be positive, got {}",
                self.initial_step
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEntry {
    pub iteration: usize,
    pub objective: f64,
    pub grad_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub point: Point,
    pub objective: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub trace: Vec<TraceEntry>,
}

pub(crate) fn eval_gradient<P: Problem + ?Sized>(prob: &P, x: &[f64]) -> Result<Vec<f64>> {
    let g = prob.euclidean_gradient(x);
    if g.len() != x.len() {
        return Err(Error::Dimension { expected: x.len(), got: g.len() });
    }
    if g.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric(format!("{}: gradient is not finite", prob.descriptor())));
    }
    Ok(g)
}

/// `P_x(grad f̄(x))`.
pub fn riemannian_gradient<P: Problem + ?Sized>(prob: &P, manifold: &SpherePNorm, x: &Point) -> Result<Tangent> {
    let g = eval_gradient(prob, x.coords())?;
    manifold.project(x, &g)
}

/// Largest relative mismatch between `<grad f̄(x), d>` and a central
/// difference of `f̄` along `d`, over `trials` random points and directions.
pub fn gradient_check<P: Problem + ?Sized, R: Rng + ?Sized>(
    prob: &P,
    manifold: &SpherePNorm,
    trials: usize,
    rng: &mut R,
) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let x = manifold.random_point(rng);
        let d: Vec<f64> = (0..manifold.n()).map(|_| rng.sample(StandardNormal)).collect();
        let d = kernels::scaled(1.0 / kernels::norm2(&d), &d);
        let g = eval_gradient(prob, x.coords())?;
        let h = 1e-6;
        let fp = prob.objective(&kernels::add(x.coords(), &kernels::scaled(h, &d)));
        let fm = prob.objective(&kernels::add(x.coords(), &kernels::scaled(-h, &d)));
        let fd = (fp - fm) / (2.0 * h);
        let exact = dot(&g, &d);
        let scale = exact.abs().max(kernels::norm2(&g)).max(1e-12);
        worst = worst.max((fd - exact).abs() / scale);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        assert!(SolverConfig::default().validate().is_ok());
        let bad = SolverConfig { wolfe_c1: 0.5, wolfe_c2: 0.1, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = SolverConfig { grad_tol: 0.0, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = SolverConfig { max_iters: 0, ..Default::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn gradient_examples() {
        let s = SpherePNorm::new(2, 2.0).unwrap();
        let x = s.point(vec![1.0, 0.0]).unwrap();
        let lin = FnProblem::new("x2", |x: &[f64]| x[1], |_x: &[f64]| vec![0.0, 1.0]);
        assert_eq!(riemannian_gradient(&lin, &s, &x).unwrap().vec(), &[0.0, 1.0]);

        let s3 = SpherePNorm::new(3, 3.0).unwrap();
        let x = s3.point_from_ambient(&[0.2, -0.5, 0.7]).unwrap();
        let c = s3.normal_direction(&x);
        let c2 = c.clone();
        let normal = FnProblem::new("normal", move |v: &[f64]| dot(&c, v), move |_v: &[f64]| c2.clone());
        assert!(riemannian_gradient(&normal, &s3, &x).unwrap().norm() < 1e-15);
    }

    #[test]
    fn non_finite_gradient_is_an_error() {
        let s = SpherePNorm::new(2, 2.0).unwrap();
        let x = s.point(vec![1.0, 0.0]).unwrap();
        let bad = FnProblem::new("bad", |_x: &[f64]| 0.0, |_x: &[f64]| vec![f64::NAN, 0.0]);
        assert!(matches!(riemannian_gradient(&bad, &s, &x), Err(Error::Numeric(_))));
    }

    #[test]
    fn gradient_check_flags_wrong_gradient() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let s = SpherePNorm::new(4, 3.0).unwrap();
        let good = FnProblem::new("sq", |x: &[f64]| dot(x, x), |x: &[f64]| kernels::scaled(2.0, x));
        assert!(gradient_check(&good, &s, 20, &mut rng).unwrap() < 1e-6);
        let wrong = FnProblem::new("sq", |x: &[f64]| dot(x, x), |x: &[f64]| x.to_vec());
        assert!(gradient_check(&wrong, &s, 20, &mut rng).unwrap() > 0.1);
    }
}
