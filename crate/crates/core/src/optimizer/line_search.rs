use super::{eval_gradient, Problem, SolverConfig};
use crate::error::{Error, Result};
use crate::kernels::dot;
use crate::manifold::{Point, RetractionKind, SpherePNorm, Tangent};

const MAX_EVALS: usize = 60;
const MAX_STEP: f64 = 1e10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearchOutcome {
    pub step: f64,
    pub value: f64,
    /// `phi'(step)`; NaN when the search never needed it.
    pub slope: f64,
    pub evaluations: usize,
    /// Whether the strong Wolfe conditions hold at `step`; false when the
    /// search fell back to the best Armijo point.
    pub wolfe: bool,
}

/// Spread of objective values at points that agree to rounding.
pub(crate) fn rounding_noise(f: f64) -> f64 {
    8.0 * f64::EPSILON * f.abs()
}

struct Sample {
    t: f64,
    f: f64,
    d: f64,
}

fn cubic_minimizer(a: &Sample, b: &Sample) -> Option<f64> {
    if !(a.d.is_finite() && b.d.is_finite() && a.f.is_finite() && b.f.is_finite()) {
        return None;
    }
    let d1 = a.d + b.d - 3.0 * (a.f - b.f) / (a.t - b.t);
    let disc = d1 * d1 - a.d * b.d;
    if disc < 0.0 {
        return None;
    }
    let d2 = (b.t - a.t).signum() * disc.sqrt();
    let t = b.t - (b.t - a.t) * (b.d + d2 - d1) / (b.d - a.d + 2.0 * d2);
    t.is_finite().then_some(t)
}

/// Strong-Wolfe search on a scalar function `phi(t) -> (value, slope)` by
/// bracketing and cubic zoom. A non-finite value marks `t` as too far.
///
/// Once the requested decrease `c1 t phi'(0)` is below the rounding noise of
/// `phi0`, any `phi(t) <= phi0` counts as sufficient and the bracket is
/// driven by the slope.
pub fn strong_wolfe<F>(
    mut phi: F,
    phi0: f64,
    dphi0: f64,
    t_init: f64,
    c1: f64,
    c2: f64,
) -> Result<LineSearchOutcome>
where
    F: FnMut(f64) -> (f64, f64),
{
    if !(dphi0 < 0.0) {
        return Err(Error::NotDescent(dphi0));
    }
    let noise = rounding_noise(phi0);
    let quiet = |t: f64| -c1 * t * dphi0 <= noise;
    let armijo = |t: f64, f: f64| f.is_finite() && (f <= phi0 + c1 * t * dphi0 || (quiet(t) && f <= phi0));
    // too high to be a bracket end; in the quiet regime only a rise beyond
    // the noise counts
    let high = |t: f64, f: f64, than: f64| {
        if !f.is_finite() {
            true
        } else if quiet(t) {
            f > than + noise
        } else {
            !armijo(t, f) || f >= than
        }
    };
    let curvature = |d: f64| d.abs() <= -c2 * dphi0;
    let mut evals = 0;
    let mut best: Option<(f64, f64, f64)> = None;
    // quiet-regime points meeting the curvature condition within the noise
    // of phi0, used only when no strict Wolfe point turns up
    let mut approx: Option<(f64, f64, f64)> = None;
    let mut eval = |t: f64, evals: &mut usize, best: &mut Option<(f64, f64, f64)>| {
        *evals += 1;
        let (f, d) = phi(t);
        if armijo(t, f) && best.is_none_or(|(_, bf, _)| f < bf) {
            *best = Some((t, f, d));
        }
        if quiet(t) && f <= phi0 + noise && curvature(d) && approx.is_none_or(|(_, af, _)| f < af) {
            approx = Some((t, f, d));
        }
        Sample { t, f, d }
    };
    let done = |s: &Sample, evals: usize| LineSearchOutcome {
        step: s.t,
        value: s.f,
        slope: s.d,
        evaluations: evals,
        wolfe: true,
    };

    let mut prev = Sample { t: 0.0, f: phi0, d: dphi0 };
    let mut t = t_init.clamp(f64::MIN_POSITIVE, MAX_STEP);
    let mut bracket: Option<(Sample, Sample)> = None;
    while evals < MAX_EVALS {
        let cur = eval(t, &mut evals, &mut best);
        if high(t, cur.f, phi0) || (prev.t > 0.0 && high(t, cur.f, prev.f)) {
            bracket = Some((prev, cur));
            break;
        }
        if curvature(cur.d) && armijo(t, cur.f) {
            return Ok(done(&cur, evals));
        }
        if cur.d >= 0.0 {
            bracket = Some((cur, prev));
            break;
        }
        if t >= MAX_STEP {
            break;
        }
        prev = cur;
        t = (2.0 * t).min(MAX_STEP);
    }

    if let Some((mut lo, mut hi)) = bracket {
        while evals < MAX_EVALS {
            let (a, b) = if lo.t < hi.t { (lo.t, hi.t) } else { (hi.t, lo.t) };
            let width = b - a;
            if width <= 4.0 * f64::EPSILON * b {
                break;
            }
            let guard = 0.1 * width;
            let t = match cubic_minimizer(&lo, &hi) {
                Some(t) if t > a + guard && t < b - guard => t,
                _ => 0.5 * (a + b),
            };
            let cur = eval(t, &mut evals, &mut best);
            if high(t, cur.f, lo.f) {
                hi = cur;
                continue;
            }
            if curvature(cur.d) && armijo(t, cur.f) {
                return Ok(done(&cur, evals));
            }
            if cur.d * (hi.t - lo.t) >= 0.0 {
                hi = lo;
            }
            lo = cur;
        }
    }

    if let Some((t, f, d)) = approx.filter(|_| best.is_none_or(|(_, bf, _)| bf == phi0)) {
        return Ok(LineSearchOutcome { step: t, value: f, slope: d, evaluations: evals, wolfe: true });
    }
    match best {
        Some((t, f, d)) => Ok(LineSearchOutcome { step: t, value: f, slope: d, evaluations: evals, wolfe: false }),
        None => Err(Error::Numeric(format!("line search found no decrease in {evals} evaluations"))),
    }
}

/// Halves `t` from `t_init` until `phi(t) <= phi0 + c1 t dphi0`. `phi(t, slope)`
/// returns the value and, when asked, the slope.
///
/// Below the rounding noise of `phi0` the decrease cannot be resolved; there a
/// point no worse than `phi0` is taken once its slope satisfies
/// `phi'(t) <= (1 - 2 delta) |phi'(0)|`, the slope form of the Armijo test on a
/// quadratic model.
pub fn armijo_backtracking<F>(mut phi: F, phi0: f64, dphi0: f64, t_init: f64, c1: f64) -> Result<LineSearchOutcome>
where
    F: FnMut(f64, bool) -> (f64, f64),
{
    const DELTA: f64 = 0.1;
    if !(dphi0 < 0.0) {
        return Err(Error::NotDescent(dphi0));
    }
    let noise = rounding_noise(phi0);
    let mut t = t_init.clamp(f64::MIN_POSITIVE, MAX_STEP);
    let mut evals = 0;
    while evals < MAX_EVALS {
        evals += 1;
        let (f, _) = phi(t, false);
        if f.is_finite() {
            if -c1 * t * dphi0 <= noise {
                if f <= phi0 + noise {
                    evals += 1;
                    let (f, d) = phi(t, true);
                    if d.is_finite() && d <= -(1.0 - 2.0 * DELTA) * dphi0 && f <= phi0 + noise {
                        return Ok(LineSearchOutcome { step: t, value: f, slope: d, evaluations: evals, wolfe: false });
                    }
                }
            } else if f <= phi0 + c1 * t * dphi0 {
                return Ok(LineSearchOutcome { step: t, value: f, slope: f64::NAN, evaluations: evals, wolfe: false });
            }
        }
        t *= 0.5;
    }
    Err(Error::Numeric(format!("backtracking found no decrease in {MAX_EVALS} evaluations")))
}

/// A trial point of a Riemannian line search.
pub(crate) struct Trial {
    pub t: f64,
    pub point: Point,
    pub value: f64,
    pub egrad: Vec<f64>,
}

/// Evaluates `phi(t) = f(R_x(t eta))` and its slope through the retraction
/// differential, remembering the points it visits.
pub(crate) struct RiemannianPhi<'a, P: Problem + ?Sized> {
    pub prob: &'a P,
    pub manifold: &'a SpherePNorm,
    pub retraction: RetractionKind,
    pub x: &'a Point,
    pub eta: &'a [f64],
    pub trials: Vec<Trial>,
}

impl<P: Problem + ?Sized> RiemannianPhi<'_, P> {
    fn visit(&mut self, t: f64, need_grad: bool) -> (f64, f64) {
        let step: Vec<f64> = self.eta.iter().map(|v| t * v).collect();
        let Ok(y) = self.manifold.retract_vec(self.retraction, self.x, &step) else {
            return (f64::INFINITY, f64::NAN);
        };
        let value = self.prob.objective(y.coords());
        if !value.is_finite() {
            return (f64::INFINITY, f64::NAN);
        }
        let (egrad, slope) = if need_grad {
            let Ok(g) = eval_gradient(self.prob, y.coords()) else {
                return (f64::INFINITY, f64::NAN);
            };
            let dr = self.manifold.differential_vec(self.retraction, self.x, &step, &y, self.eta);
            let slope = dot(&g, &dr);
            (g, slope)
        } else {
            (Vec::new(), f64::NAN)
        };
        self.trials.push(Trial { t, point: y, value, egrad });
        (value, slope)
    }

    pub fn value_and_slope(&mut self, t: f64) -> (f64, f64) {
        self.visit(t, true)
    }

    pub fn value(&mut self, t: f64) -> f64 {
        self.visit(t, false).0
    }

    pub fn take(mut self, t: f64) -> Option<Trial> {
        let i = self.trials.iter().rposition(|tr| tr.t == t)?;
        Some(self.trials.swap_remove(i))
    }
}

/// Strong-Wolfe step along `eta` from `x` under `cfg.retraction`, with
/// `phi'(t) = <grad f(R_x(t eta)), DR_x(t eta)[eta]>`.
pub fn line_search_wolfe<P: Problem + ?Sized>(
    prob: &P,
    manifold: &SpherePNorm,
    x: &Point,
    eta: &Tangent,
    cfg: &SolverConfig,
) -> Result<LineSearchOutcome> {
    manifold.check_tangent(x, eta)?;
    let g0 = eval_gradient(prob, x.coords())?;
    let dphi0 = dot(&g0, eta.vec());
    let mut phi = RiemannianPhi {
        prob,
        manifold,
        retraction: cfg.retraction,
        x,
        eta: eta.vec(),
        trials: Vec::new(),
    };
    let f0 = prob.objective(x.coords());
    strong_wolfe(|t| phi.value_and_slope(t), f0, dphi0, cfg.initial_step, cfg.wolfe_c1, cfg.wolfe_c2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimizer::{riemannian_gradient, FnProblem};

    #[test]
    fn quadratic_example() {
        let out = strong_wolfe(|t| ((t - 1.0).powi(2), 2.0 * (t - 1.0)), 1.0, -2.0, 1.0, 1e-4, 0.1).unwrap();
        assert!(out.wolfe);
        assert!((2.0 * (out.step - 1.0)).abs() <= 0.2);
        let out = strong_wolfe(|t| ((t - 1.0).powi(2), 2.0 * (t - 1.0)), 1.0, -2.0, 0.01, 1e-4, 0.1).unwrap();
        assert!(out.wolfe && (out.slope.abs() <= 0.2));
        let out = strong_wolfe(|t| ((t - 1.0).powi(2), 2.0 * (t - 1.0)), 1.0, -2.0, 50.0, 1e-4, 0.1).unwrap();
        assert!(out.wolfe && (out.slope.abs() <= 0.2));
    }

    #[test]
    fn ascent_direction_is_rejected() {
        assert!(matches!(
            strong_wolfe(|t| (t, 1.0), 0.0, 1.0, 1.0, 1e-4, 0.1),
            Err(Error::NotDescent(_))
        ));
        assert!(matches!(armijo_backtracking(|t, _| (t, 1.0), 0.0, 0.0, 1.0, 1e-4), Err(Error::NotDescent(_))));
    }

    #[test]
    fn backtracking_below_rounding_uses_the_slope() {
        // phi is flat to rounding at 3; the slope reflects at t = 1
        let phi = |t: f64, _| (3.0, 1e-12 * (2.0 * t - 1.0));
        let out = armijo_backtracking(phi, 3.0, -1e-12, 1.0, 1e-4).unwrap();
        assert_eq!(out.step, 0.5);
        let out = armijo_backtracking(|t, _| ((t - 1.0).powi(2), 2.0 * (t - 1.0)), 1.0, -2.0, 4.0, 1e-4).unwrap();
        assert_eq!(out.step, 1.0);
    }

    #[test]
    fn infinite_values_shrink_the_step() {
        let phi = |t: f64| if t > 0.5 { (f64::INFINITY, f64::NAN) } else { ((t - 0.3).powi(2), 2.0 * (t - 0.3)) };
        let out = strong_wolfe(phi, 0.09, -0.6, 1.0, 1e-4, 0.1).unwrap();
        assert!(out.step <= 0.5 && out.value < 0.09);
    }

    #[test]
    fn curved_phi_meets_curvature_condition() {
        let phi = |t: f64| (-(3.0 * t).sin() + t.powi(4) / 4.0, -3.0 * (3.0 * t).cos() + t.powi(3));
        let out = strong_wolfe(phi, 0.0, -3.0, 1.0, 1e-4, 0.01).unwrap();
        assert!(out.wolfe && out.slope.abs() <= 0.03);
    }

    #[test]
    fn rayleigh_step_decreases_objective() {
        let s = SpherePNorm::new(2, 2.0).unwrap();
        let f = |x: &[f64]| -(2.0 * x[0] * x[0] + x[1] * x[1]);
        let prob = FnProblem::new("rayleigh", f, |x: &[f64]| vec![-4.0 * x[0], -2.0 * x[1]]);
        let x = s.point(vec![0.6, 0.8]).unwrap();
        let eta = riemannian_gradient(&prob, &s, &x).unwrap().scale(-1.0);
        let cfg = SolverConfig::default();
        let out = line_search_wolfe(&prob, &s, &x, &eta, &cfg).unwrap();
        assert!(out.step > 0.0 && out.value < f(x.coords()));
        // oracle: dense grid scan of phi; the accepted value is within the
        // range the scan reaches and below phi(0)
        let grid_min = (1..=4000)
            .map(|i| {
                let t = i as f64 * 1e-3;
                let y = s.retract(RetractionKind::Normalization, &x, &eta.scale(t)).unwrap();
                f(y.coords())
            })
            .fold(f64::INFINITY, f64::min);
        assert!(out.value >= grid_min - 1e-12);
        assert!(out.value < f(x.coords()) - 0.1 * (f(x.coords()) - grid_min));
    }
}
