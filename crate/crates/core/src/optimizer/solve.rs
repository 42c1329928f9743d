use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::line_search::{armijo_backtracking, rounding_noise, strong_wolfe, RiemannianPhi, Trial};
use super::{eval_gradient, BetaRule, Method, Problem, SolveResult, SolverConfig, TraceEntry};
use crate::error::{Error, Result};
use crate::kernels::{self, dot, norm2};
use crate::manifold::{project_off, Point, SpherePNorm};
use crate::par::{self, Execution};

const POWELL_RESTART: f64 = 0.2;

struct Iterate {
    point: Point,
    value: f64,
    grad: Vec<f64>,
    grad_norm: f64,
}

impl Iterate {
    fn new(manifold: &SpherePNorm, point: Point, value: f64, egrad: Vec<f64>) -> Self {
        let grad = project_off(&manifold.normal_direction(&point), &egrad);
        let grad_norm = norm2(&grad);
        Iterate { point, value, grad, grad_norm }
    }
}

/// Riemannian gradient descent or conjugate gradient from `x0`.
pub fn solve<P: Problem + ?Sized>(
    prob: &P,
    manifold: &SpherePNorm,
    x0: &Point,
    cfg: &SolverConfig,
) -> Result<SolveResult> {
    cfg.validate()?;
    manifold.check_point(x0)?;
    let value = prob.objective(x0.coords());
    if !value.is_finite() {
        return Err(Error::Numeric(format!("{}: objective is not finite at x0", prob.descriptor())));
    }
    let egrad = eval_gradient(prob, x0.coords())?;
    let mut cur = Iterate::new(manifold, x0.clone(), value, egrad);
    let mut trace = vec![TraceEntry { iteration: 0, objective: cur.value, grad_norm: cur.grad_norm }];
    let mut eta: Vec<f64> = kernels::scaled(-1.0, &cur.grad);
    let mut prev_step: Option<(f64, f64)> = None; // (t, phi'(0))
    let mut iterations = 0;

    while iterations < cfg.max_iters && cur.grad_norm > cfg.grad_tol {
        let mut dphi0 = dot(&cur.grad, &eta);
        if !(dphi0 < 0.0) {
            eta = kernels::scaled(-1.0, &cur.grad);
            dphi0 = -cur.grad_norm * cur.grad_norm;
        }
        let t_init = match prev_step {
            None => cfg.initial_step,
            Some((t, d)) => (t * d / dphi0).clamp(1e-12, 1e12),
        };
        let step = match line_step(prob, manifold, &cur, &eta, dphi0, t_init, cfg) {
            Some(step) => Some(step),
            None if dist_from_steepest(&eta, &cur.grad) > 0.0 => {
                eta = kernels::scaled(-1.0, &cur.grad);
                dphi0 = -cur.grad_norm * cur.grad_norm;
                line_step(prob, manifold, &cur, &eta, dphi0, cfg.initial_step, cfg)
            }
            None => None,
        };
        let Some(trial) = step else { break };
        let t = trial.t;
        let next = Iterate::new(manifold, trial.point, trial.value, trial.egrad);
        iterations += 1;
        trace.push(TraceEntry { iteration: iterations, objective: next.value, grad_norm: next.grad_norm });

        eta = match cfg.method {
            Method::GradientDescent => kernels::scaled(-1.0, &next.grad),
            Method::ConjugateGradient => cg_direction(manifold, cfg, &cur, &next, &eta, t),
        };
        prev_step = Some((t, dphi0));
        cur = next;
    }

    Ok(SolveResult {
        converged: cur.grad_norm <= cfg.grad_tol,
        objective: cur.value,
        grad_norm: cur.grad_norm,
        point: cur.point,
        iterations,
        trace,
    })
}

fn dist_from_steepest(eta: &[f64], grad: &[f64]) -> f64 {
    eta.iter().zip(grad).map(|(e, g)| (e + g).abs()).fold(0.0, f64::max)
}

fn line_step<P: Problem + ?Sized>(
    prob: &P,
    manifold: &SpherePNorm,
    cur: &Iterate,
    eta: &[f64],
    dphi0: f64,
    t_init: f64,
    cfg: &SolverConfig,
) -> Option<Trial> {
    let mut phi = RiemannianPhi {
        prob,
        manifold,
        retraction: cfg.retraction,
        x: &cur.point,
        eta,
        trials: Vec::new(),
    };
    let outcome = match cfg.method {
        Method::ConjugateGradient => {
            strong_wolfe(|t| phi.value_and_slope(t), cur.value, dphi0, t_init, cfg.wolfe_c1, cfg.wolfe_c2)
        }
        Method::GradientDescent => {
            armijo_backtracking(|t, slope| if slope { phi.value_and_slope(t) } else { (phi.value(t), f64::NAN) }, cur.value, dphi0, t_init, cfg.wolfe_c1)
        }
    }
    .ok()?;
    if !(outcome.value <= cur.value + rounding_noise(cur.value)) {
        return None;
    }
    let mut trial = phi.take(outcome.step)?;
    if trial.egrad.is_empty() {
        trial.egrad = eval_gradient(prob, trial.point.coords()).ok()?;
    }
    Some(trial)
}

fn cg_direction(
    manifold: &SpherePNorm,
    cfg: &SolverConfig,
    cur: &Iterate,
    next: &Iterate,
    eta: &[f64],
    t: f64,
) -> Vec<f64> {
    let step: Vec<f64> = kernels::scaled(t, eta);
    let carry = |v: &[f64]| {
        manifold.transport_vec(cfg.transport, cfg.retraction, &cur.point, &step, &next.point, v)
    };
    let moved_eta = if cfg.inverse_retraction_transport {
        match manifold.inverse_retract(cfg.retraction, &next.point, &cur.point) {
            Ok(back) => kernels::scaled(-1.0 / t, back.vec()),
            Err(_) => carry(eta),
        }
    } else {
        carry(eta)
    };
    let moved_grad = carry(&cur.grad);
    let gg_old = cur.grad_norm * cur.grad_norm;
    let gg_new = next.grad_norm * next.grad_norm;
    let mut beta = match cfg.beta_rule {
        BetaRule::FletcherReeves => gg_new / gg_old,
        BetaRule::PolakRibierePlus => ((gg_new - dot(&next.grad, &moved_grad)) / gg_old).max(0.0),
    };
    if dot(&next.grad, &moved_grad).abs() > POWELL_RESTART * gg_new || !beta.is_finite() {
        beta = 0.0;
    }
    let mut dir = kernels::scaled(-1.0, &next.grad);
    if beta != 0.0 {
        kernels::axpy(beta, &moved_eta, &mut dir);
    }
    project_off(&manifold.normal_direction(&next.point), &dir)
}

#[derive(Debug, Clone)]
pub struct MultiStartResult {
    pub best: usize,
    pub runs: Vec<Result<SolveResult>>,
}

impl MultiStartResult {
    pub fn best_result(&self) -> &SolveResult {
        self.runs[self.best].as_ref().expect("best run succeeded")
    }
}

/// `m` random starting points, the i-th drawn from its own ChaCha stream of `seed`.
pub fn random_starts(manifold: &SpherePNorm, m: usize, seed: u64) -> Vec<Point> {
    (0..m)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            manifold.random_point(&mut rng)
        })
        .collect()
}

/// Independent solves from each start; the lowest objective wins, ties go
/// to the earliest start.
pub fn multistart<P: Problem + ?Sized>(
    prob: &P,
    manifold: &SpherePNorm,
    starts: &[Point],
    cfg: &SolverConfig,
    exec: Execution,
) -> Result<MultiStartResult> {
    if starts.is_empty() {
        return Err(Error::InvalidInput("multistart needs at least one start".into()));
    }
    let runs = par::map_slice(exec, starts, |x0| solve(prob, manifold, x0, cfg));
    let mut best: Option<usize> = None;
    for (i, run) in runs.iter().enumerate() {
        if let Ok(r) = run {
            if best.is_none_or(|b| r.objective < runs[b].as_ref().unwrap().objective) {
                best = Some(i);
            }
        }
    }
    match best {
        Some(best) => Ok(MultiStartResult { best, runs }),
        None => Err(runs.into_iter().next().unwrap().unwrap_err()),
    }
}
