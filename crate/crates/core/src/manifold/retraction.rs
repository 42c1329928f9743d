use super::{project_off, Point, RetractionKind, SpherePNorm, Tangent};
use crate::error::{Error, Result};
use crate::kernels::{self, cmp_pnorm_one, dot, pnorm, sign_power};
use crate::roots::{bisect_derivative, brent};
use std::cmp::Ordering;

/// Whether the orthographic inverse re-solves the forward problem to confirm
/// that the recovered root is the one the retraction would pick.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InverseCheck {
    #[default]
    Full,
    /// Trust that `y` is close enough to `x` for the smallest root to be the right one.
    Fast,
}

const LN_FLUSH: f64 = -690.7755278982137; // ln(1e-300)
const NU_MIN: f64 = -1.0e3;
const NU_MAX: f64 = 1.0e8;
const OUTER_MAX: usize = 200;

/// Solves `t + exp(nu) t^(p-1) = a` for `s = ln t`, given `ln a`.
/// The left side is convex and increasing in `s`, so Newton started at an
/// upper bound descends monotonically onto the root.
fn ball_coord(ln_a: f64, nu: f64, p: f64) -> f64 {
    let q = p - 1.0;
    let mut s = ln_a.min((ln_a - nu) / q);
    for _ in 0..200 {
        let u = s;
        let v = nu + q * s;
        let (hi, lo) = if u > v { (u, v) } else { (v, u) };
        let lse = hi + (lo - hi).exp().ln_1p();
        let h = lse - ln_a;
        if h <= 0.0 {
            break;
        }
        let slope = (u - lse).exp() + q * (v - lse).exp();
        let step = h / slope;
        s -= step;
        if step <= 1e-16 * s.abs().max(1.0) {
            break;
        }
    }
    s
}

fn log_pnorm_of_logs(logs: &[f64], p: f64) -> f64 {
    let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = logs.iter().map(|&s| (p * (s - top)).exp()).sum();
    top + sum.ln() / p
}

/// Euclidean projection of `c` onto the closed unit p-ball.
///
/// Points inside the ball are returned unchanged. Outside, the answer is
/// `t_i = sgn(c_i) t_i(mu)` with `t + mu t^(p-1) = |c_i|`, and the multiplier
/// `mu` is found by root finding on `ln ||t(mu)||_p`, which decreases in `mu`.
pub fn project_to_ball(c: &[f64], p: f64) -> Result<Vec<f64>> {
    kernels::check_exponent(p)?;
    kernels::check_finite(c)?;
    if cmp_pnorm_one(c, p) != Ordering::Greater {
        return Ok(c.to_vec());
    }
    if pnorm(c, p) - 1.0 <= 4.0 * f64::EPSILON {
        return Ok(kernels::normalize(c, p));
    }
    let ln_a: Vec<Option<f64>> =
        c.iter().map(|&ci| if ci == 0.0 { None } else { Some(ci.abs().ln()) }).collect();
    let mut logs = vec![f64::NEG_INFINITY; c.len()];
    let solve = |nu: f64, logs: &mut [f64]| {
        for (slot, la) in logs.iter_mut().zip(&ln_a) {
            *slot = match la {
                Some(la) => {
                    let s = ball_coord(*la, nu, p);
                    if s < LN_FLUSH { f64::NEG_INFINITY } else { s }
                }
                None => f64::NEG_INFINITY,
            };
        }
        log_pnorm_of_logs(logs, p)
    };

    let mut lo = -1.0;
    let mut width = 1.0;
    while solve(lo, &mut logs) <= 0.0 {
        if lo < NU_MIN {
            return Ok(kernels::normalize(c, p));
        }
        lo -= width;
        width *= 2.0;
    }
    let mut hi = 1.0;
    width = 1.0;
    while solve(hi, &mut logs) > 0.0 {
        if hi > NU_MAX {
            return Err(Error::Numeric("ball projection multiplier diverged".into()));
        }
        hi += width;
        width *= 2.0;
    }
    let nu = brent(|nu| solve(nu, &mut logs), lo, hi, 1e-14, OUTER_MAX)?;
    solve(nu, &mut logs);
    let t: Vec<f64> = c
        .iter()
        .zip(&logs)
        .map(|(&ci, &s)| if s == f64::NEG_INFINITY { 0.0 } else { s.exp().copysign(ci) })
        .collect();
    if kernels::max_abs(&t) == 0.0 {
        return Err(Error::Numeric("ball projection collapsed to zero".into()));
    }
    Ok(kernels::normalize(&t, p))
}

impl SpherePNorm {
    /// Maps a tangent step onto the sphere.
    pub fn retract(&self, kind: RetractionKind, x: &Point, eta: &Tangent) -> Result<Point> {
        self.check_tangent(x, eta)?;
        self.retract_vec(kind, x, eta.vec())
    }

    pub(crate) fn retract_vec(&self, kind: RetractionKind, x: &Point, eta: &[f64]) -> Result<Point> {
        if eta.iter().all(|&v| v == 0.0) {
            return Ok(x.clone());
        }
        let c = kernels::add(x.coords(), eta);
        kernels::check_finite(&c)?;
        let y = match kind {
            RetractionKind::Normalization => kernels::normalize(&c, self.p),
            RetractionKind::Projective => project_to_ball(&c, self.p)?,
            RetractionKind::Orthographic => {
                let nx = self.normal_direction(x);
                let alpha = orthographic_root(&c, &nx, self.p)?;
                let mut z = c;
                kernels::axpy(-alpha, &nx, &mut z);
                kernels::normalize(&z, self.p)
            }
        };
        Ok(self.point_unchecked(y))
    }

    /// Scalar `alpha` with `x + eta - alpha n_x` on the sphere and `|alpha|` smallest.
    pub fn orthographic_alpha(&self, x: &Point, eta: &Tangent) -> Result<f64> {
        self.check_tangent(x, eta)?;
        let c = kernels::add(x.coords(), eta.vec());
        orthographic_root(&c, &self.normal_direction(x), self.p)
    }

    pub fn inverse_retract(&self, kind: RetractionKind, x: &Point, y: &Point) -> Result<Tangent> {
        self.inverse_retract_with(kind, x, y, InverseCheck::Full)
    }

    /// Tangent `eta` at `x` with `retract(kind, x, eta) = y`, or an
    /// out-of-domain error naming the failed condition.
    pub fn inverse_retract_with(
        &self,
        kind: RetractionKind,
        x: &Point,
        y: &Point,
        check: InverseCheck,
    ) -> Result<Tangent> {
        self.check_point(x)?;
        self.check_point(y)?;
        if x.coords() == y.coords() {
            return Ok(self.zero_tangent(x));
        }
        let nx = self.normal_direction(x);
        let nxy = dot(&nx, y.coords());
        let eta = match kind {
            RetractionKind::Normalization => {
                if !(nxy > 0.0) {
                    return Err(Error::OutOfDomain(format!(
                        "<n_x, y> = {nxy:e} must be positive"
                    )));
                }
                kernels::sub(&kernels::scaled(1.0 / nxy, y.coords()), x.coords())
            }
            RetractionKind::Projective => {
                let ny = self.normal_direction(y);
                let den = dot(&nx, &ny);
                if !(den.abs() > f64::MIN_POSITIVE) {
                    return Err(Error::OutOfDomain("<n_x, n_y> = 0".into()));
                }
                let mut alpha = (1.0 - nxy) / den;
                if alpha < -1e-12 {
                    return Err(Error::OutOfDomain(format!(
                        "projective multiplier {alpha:e} is negative"
                    )));
                }
                alpha = alpha.max(0.0);
                let mut eta = kernels::sub(y.coords(), x.coords());
                kernels::axpy(alpha, &ny, &mut eta);
                eta
            }
            RetractionKind::Orthographic => {
                let alpha = (1.0 - nxy) / dot(&nx, &nx);
                let mut eta = kernels::sub(y.coords(), x.coords());
                kernels::axpy(alpha, &nx, &mut eta);
                if check == InverseCheck::Full {
                    let c = kernels::add(x.coords(), &eta);
                    let forward = orthographic_root(&c, &nx, self.p).map_err(|_| {
                        Error::OutOfDomain("orthographic equation has no real root".into())
                    })?;
                    if (forward - alpha).abs() > 1e-9 * alpha.abs().max(1.0) {
                        return Err(Error::OutOfDomain(format!(
                            "alpha = {alpha:e} is not the smallest root (forward gives {forward:e})"
                        )));
                    }
                }
                eta
            }
        };
        kernels::check_finite(&eta)
            .map_err(|_| Error::OutOfDomain("inverse retraction is not finite".into()))?;
        Ok(self.tangent_unchecked(x, project_off(&nx, &eta)))
    }
}

/// Smallest-magnitude root of `||c - alpha n||_p = 1`. The norm is convex in
/// `alpha`; its minimizer is found by bisection on the derivative sign and
/// the root is then isolated between zero and the minimizer.
fn orthographic_root(c: &[f64], n: &[f64], p: f64) -> Result<f64> {
    let shifted = |alpha: f64| {
        let mut z = c.to_vec();
        kernels::axpy(-alpha, n, &mut z);
        z
    };
    let slope_sign = |alpha: f64| {
        let z = shifted(alpha);
        let m = kernels::max_abs(&z);
        if m == 0.0 {
            return 0.0;
        }
        let zs = kernels::scaled(1.0 / m, &z);
        -dot(n, &sign_power(&zs, p))
    };

    let mut lo = -1.0;
    while slope_sign(lo) >= 0.0 {
        lo *= 2.0;
        if lo < -1e18 {
            return Err(Error::Numeric("orthographic bracket diverged".into()));
        }
    }
    let mut hi = 1.0;
    while slope_sign(hi) <= 0.0 {
        hi *= 2.0;
        if hi > 1e18 {
            return Err(Error::Numeric("orthographic bracket diverged".into()));
        }
    }
    let a_min = bisect_derivative(slope_sign, lo, hi, 200);
    let z_min = shifted(a_min);
    match cmp_pnorm_one(&z_min, p) {
        Ordering::Greater => return Err(Error::StepTooLarge { min_norm: pnorm(&z_min, p) }),
        Ordering::Equal => return Ok(a_min),
        Ordering::Less => {}
    }
    let f = |alpha: f64| pnorm(&shifted(alpha), p) - 1.0;
    if f(0.0) <= 0.0 {
        return Ok(0.0);
    }
    if f(a_min) >= 0.0 {
        return Ok(a_min);
    }
    brent(f, 0.0, a_min, 1e-17, 200)
}
