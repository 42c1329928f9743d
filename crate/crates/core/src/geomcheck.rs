//! Property suite for the sphere geometry over a grid of exponents and
//! dimensions. Each row is one formula of the geometry together with the
//! worst residual observed over random inputs.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::instances::rng_stream;
use crate::kernels::{self, cmp_pnorm_one, dot, norm2};
use crate::manifold::{Point, RetractionKind, SpherePNorm, Tangent, TransportKind};
use crate::par::{self, Execution};
use std::cmp::Ordering;

pub const STANDARD_P: [f64; 6] = [1.5, 2.0, 3.0, 4.0, 10.0, 100.0];
pub const EXTREME_P: [f64; 2] = [1.000001, 50000.0];
pub const STANDARD_N: [usize; 3] = [2, 5, 50];
pub const RIGIDITY_STEPS: [f64; 3] = [1e-3, 1e-4, 1e-5];

#[derive(Debug, Clone, PartialEq)]
pub struct GeomCheckConfig {
    pub ps: Vec<f64>,
    pub ns: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    pub exec: Execution,
}

impl Default for GeomCheckConfig {
    fn default() -> Self {
        GeomCheckConfig {
            ps: STANDARD_P.to_vec(),
            ns: STANDARD_N.to_vec(),
            trials: 100,
            seed: 0,
            exec: Execution::default(),
        }
    }
}

impl GeomCheckConfig {
    pub fn full_grid() -> Self {
        let mut cfg = GeomCheckConfig::default();
        cfg.ps.extend(EXTREME_P);
        cfg
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(usize)]
enum RowId {
    RetractZero,
    MembershipNormalization,
    MembershipProjective,
    MembershipOrthographic,
    PositiveExcess,
    Tangency,
    Idempotence,
    Symmetry,
    NormalAnnihilated,
    RoundTripNormalization,
    RoundTripProjective,
    RoundTripOrthographic,
    DomainShortfall,
    AntipodalAccepted,
    TransportDiffTangency,
    TransportProjTangency,
    TransportLinearity,
    TransportFiniteDifference,
    RigidityFailures,
}

const ROWS: [(RowId, &str, &str, f64); 19] = [
    (RowId::RetractZero, "retractions", "R_x(0) != x (count)", 0.0),
    (RowId::MembershipNormalization, "retraction by normalization", "| ||R_x(eta)||_p - 1 |", 1e-9),
    (RowId::MembershipProjective, "projective retraction", "| ||R_x(eta)||_p - 1 |", 1e-9),
    (RowId::MembershipOrthographic, "orthographic retraction", "| ||R_x(eta)||_p - 1 |", 1e-9),
    (RowId::PositiveExcess, "retraction by normalization", "||x + eta||_p > 1 violated (count)", 0.0),
    (RowId::Tangency, "tangent space", "|<P_x d, n_x>| / max(1, ||P_x d||)", 1e-10),
    (RowId::Idempotence, "orthogonal projection", "||P_x P_x d - P_x d||_inf / max(1, ||d||)", 1e-12),
    (RowId::Symmetry, "orthogonal projection", "|<P_x a, b> - <a, P_x b>| / (||a|| ||b||)", 1e-12),
    (RowId::NormalAnnihilated, "normal space", "||P_x n_x|| / ||n_x||", 1e-12),
    (RowId::RoundTripNormalization, "inverse of normalization", "||R^-1_x(R_x(eta)) - eta||_inf", 1e-8),
    (RowId::RoundTripProjective, "inverse of projective retraction", "||R^-1_x(R_x(eta)) - eta||_inf", 1e-8),
    (RowId::RoundTripOrthographic, "inverse of orthographic retraction", "||R^-1_x(R_x(eta)) - eta||_inf", 1e-8),
    (RowId::DomainShortfall, "inverse retractions", "fraction of pairs out of domain", 0.05),
    (RowId::AntipodalAccepted, "inverse of normalization", "pairs near -x accepted (count)", 0.0),
    (RowId::TransportDiffTangency, "differentiated retraction", "|<T xi, n_y>| / ||xi||", 1e-10),
    (RowId::TransportProjTangency, "transport by projection", "|<T xi, n_y>| / ||xi||", 1e-10),
    (RowId::TransportLinearity, "differentiated retraction", "||T(a xi1 + b xi2) - a T xi1 - b T xi2|| / scale", 1e-10),
    (RowId::TransportFiniteDifference, "differentiated retraction", "relative error vs finite differences", 1e-5),
    (RowId::RigidityFailures, "retractions", "first-order agreement failures (count)", 0.0),
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeomRow {
    pub formula: &'static str,
    pub check: &'static str,
    pub worst: f64,
    pub tol: f64,
    /// `(p, n)` of the cell with the worst residual.
    pub worst_at: Option<(f64, usize)>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeomReport {
    pub rows: Vec<GeomRow>,
    pub cells: usize,
    pub trials: usize,
}

impl GeomReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.passed)
    }

    pub fn all_finite(&self) -> bool {
        self.rows.iter().all(|r| r.worst.is_finite())
    }

    pub fn row(&self, formula: &str, check: &str) -> Option<&GeomRow> {
        self.rows.iter().find(|r| r.formula == formula && r.check == check)
    }
}

/// Step for finite differences at `z = x + eta`: small against both the
/// curvature scale `1/p` and the smallest nonzero coordinate of `z`.
pub fn fd_step(z: &[f64], p: f64) -> f64 {
    let smallest = z.iter().map(|v| v.abs()).filter(|&v| v > 0.0).fold(1.0, f64::min);
    1e-3 * (1.0 / p).min(1.0).min(smallest)
}

/// Five-point central difference of `t -> R_x(eta + t xi)` at `t = 0`.
pub fn retraction_fd(
    s: &SpherePNorm,
    kind: RetractionKind,
    x: &Point,
    eta: &Tangent,
    xi: &Tangent,
) -> crate::Result<Vec<f64>> {
    let h = fd_step(&kernels::add(x.coords(), eta.vec()), s.p());
    let at = |t: f64| s.retract(kind, x, &eta.add_scaled(t, xi)).map(Point::into_coords);
    let (p1, m1, p2, m2) = (at(h)?, at(-h)?, at(2.0 * h)?, at(-2.0 * h)?);
    Ok((0..s.n())
        .map(|i| (8.0 * (p1[i] - m1[i]) - (p2[i] - m2[i])) / (12.0 * h))
        .collect())
}

/// `||(R_x(t eta) - x)/t - eta||_2` for each step in [`RIGIDITY_STEPS`].
pub fn rigidity_errors(s: &SpherePNorm, kind: RetractionKind, x: &Point, eta: &Tangent) -> crate::Result<[f64; 3]> {
    let mut out = [0.0; 3];
    for (slot, &t) in out.iter_mut().zip(&RIGIDITY_STEPS) {
        let y = s.retract(kind, x, &eta.scale(t))?;
        let d: Vec<f64> = y
            .coords()
            .iter()
            .zip(x.coords())
            .zip(eta.vec())
            .map(|((yi, xi), ei)| (yi - xi) / t - ei)
            .collect();
        *slot = norm2(&d);
    }
    Ok(out)
}

/// Rounding floor of `||(R_x(t eta) - x)/t - eta||` at step `t`.
pub fn rigidity_floor(x: &Point, t: f64) -> f64 {
    64.0 * f64::EPSILON * (1.0 + norm2(x.coords())) / t
}

/// Each error is either at the rounding floor or an order of magnitude
/// below the previous one with `e(t)/t` stable to a factor of three.
pub fn rigidity_is_linear(errors: &[f64; 3], x: &Point) -> bool {
    (1..3).all(|k| {
        let (t0, t1) = (RIGIDITY_STEPS[k - 1], RIGIDITY_STEPS[k]);
        let (e0, e1) = (errors[k - 1], errors[k]);
        if e1 <= rigidity_floor(x, t1) {
            return true;
        }
        let (c0, c1) = (e0 / t0, e1 / t1);
        e1 < e0 && c1 <= 3.0 * c0 && c1 >= c0 / 3.0
    })
}

fn gaussian<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn bump(acc: &mut [f64], id: RowId, v: f64) {
    let slot = &mut acc[id as usize];
    if v.is_nan() || *slot < v {
        *slot = v;
    }
}

fn count(acc: &mut [f64], id: RowId) {
    acc[id as usize] += 1.0;
}

fn run_cell(p: f64, n: usize, trials: usize, seed: u64, stream: u64) -> Vec<f64> {
    let mut acc = vec![0.0; ROWS.len()];
    let Ok(s) = SpherePNorm::new(n, p) else {
        return vec![f64::NAN; ROWS.len()];
    };
    let mut rng = rng_stream(seed, stream);
    let mut pairs = 0usize;
    let mut out_of_domain = 0usize;
    for _ in 0..trials {
        let x = s.random_point(&mut rng);
        let nx = s.normal_direction(&x);
        let eta = s.random_tangent(&x, 0.5 * rng.random::<f64>() + 1e-4, &mut rng);
        let xi = s.random_tangent(&x, 1.0, &mut rng);

        let zero = s.zero_tangent(&x);
        for kind in RetractionKind::ALL {
            if s.retract(kind, &x, &zero).map(|y| y != x).unwrap_or(true) {
                count(&mut acc, RowId::RetractZero);
            }
        }
        for (kind, id) in [
            (RetractionKind::Normalization, RowId::MembershipNormalization),
            (RetractionKind::Projective, RowId::MembershipProjective),
            (RetractionKind::Orthographic, RowId::MembershipOrthographic),
        ] {
            match s.retract(kind, &x, &eta) {
                Ok(y) => bump(&mut acc, id, s.membership_residual(y.coords())),
                Err(crate::Error::StepTooLarge { .. }) => {}
                Err(_) => bump(&mut acc, id, f64::INFINITY),
            }
        }
        if cmp_pnorm_one(&kernels::add(x.coords(), eta.vec()), p) != Ordering::Greater {
            count(&mut acc, RowId::PositiveExcess);
        }

        let d = gaussian(n, &mut rng);
        let b = gaussian(n, &mut rng);
        let pd = s.project(&x, &d).unwrap();
        let ppd = s.project(&x, pd.vec()).unwrap();
        let pb = s.project(&x, &b).unwrap();
        bump(&mut acc, RowId::Tangency, s.tangency_residual(&x, pd.vec()));
        bump(&mut acc, RowId::Idempotence, max_abs_diff(ppd.vec(), pd.vec()) / norm2(&d).max(1.0));
        bump(
            &mut acc,
            RowId::Symmetry,
            (dot(pd.vec(), &b) - dot(&d, pb.vec())).abs() / (norm2(&d) * norm2(&b)),
        );
        bump(&mut acc, RowId::NormalAnnihilated, s.project(&x, &nx).unwrap().norm() / norm2(&nx));

        let eta_rt = eta.scale(0.6 * rng.random::<f64>());
        for (kind, id) in [
            (RetractionKind::Normalization, RowId::RoundTripNormalization),
            (RetractionKind::Projective, RowId::RoundTripProjective),
            (RetractionKind::Orthographic, RowId::RoundTripOrthographic),
        ] {
            let Ok(y) = s.retract(kind, &x, &eta_rt) else { continue };
            pairs += 1;
            match s.inverse_retract(kind, &x, &y) {
                Ok(back) => bump(&mut acc, id, max_abs_diff(back.vec(), eta_rt.vec())),
                Err(_) => out_of_domain += 1,
            }
        }

        let minus_x = s.point_unchecked(kernels::scaled(-1.0, x.coords()));
        let wobble = s.random_tangent(&minus_x, 0.05, &mut rng);
        if let Ok(y) = s.retract(RetractionKind::Normalization, &minus_x, &wobble) {
            if s.inverse_retract(RetractionKind::Normalization, &x, &y).is_ok() {
                count(&mut acc, RowId::AntipodalAccepted);
            }
        }

        let y = s.retract(RetractionKind::Normalization, &x, &eta).unwrap();
        let ny = s.normal_direction(&y);
        let xi_norm = xi.norm();
        let td = s.transport(TransportKind::DifferentiatedRetraction, &x, &eta, &xi).unwrap();
        let tp = s.transport(TransportKind::Projection, &x, &eta, &xi).unwrap();
        bump(&mut acc, RowId::TransportDiffTangency, dot(td.vec(), &ny).abs() / xi_norm);
        bump(&mut acc, RowId::TransportProjTangency, dot(tp.vec(), &ny).abs() / xi_norm);

        let xi2 = s.random_tangent(&x, 1.0, &mut rng);
        let (ca, cb) = (rng.random::<f64>() * 4.0 - 2.0, rng.random::<f64>() * 4.0 - 2.0);
        let combo = xi.scale(ca).add_scaled(cb, &xi2);
        let t_combo = s.transport(TransportKind::DifferentiatedRetraction, &x, &eta, &combo).unwrap();
        let t2 = s.transport(TransportKind::DifferentiatedRetraction, &x, &eta, &xi2).unwrap();
        let mut lin = t_combo.vec().to_vec();
        kernels::axpy(-ca, td.vec(), &mut lin);
        kernels::axpy(-cb, t2.vec(), &mut lin);
        bump(&mut acc, RowId::TransportLinearity, norm2(&lin) / (ca.abs() + cb.abs()).max(1e-300));

        let fd = retraction_fd(&s, RetractionKind::Normalization, &x, &eta, &xi).unwrap();
        let err = norm2(&kernels::sub(td.vec(), &fd)) / norm2(&fd).max(norm2(td.vec())).max(1e-300);
        bump(&mut acc, RowId::TransportFiniteDifference, err);

        for kind in RetractionKind::ALL {
            let ok = rigidity_errors(&s, kind, &x, &eta).map(|e| rigidity_is_linear(&e, &x)).unwrap_or(false);
            if !ok {
                count(&mut acc, RowId::RigidityFailures);
            }
        }
    }
    if pairs > 0 {
        bump(&mut acc, RowId::DomainShortfall, out_of_domain as f64 / pairs as f64);
    }
    acc
}

/// Runs every row over every `(p, n)` cell; cells run in parallel.
pub fn run(cfg: &GeomCheckConfig) -> GeomReport {
    let cells: Vec<(f64, usize)> = cfg.ps.iter().flat_map(|&p| cfg.ns.iter().map(move |&n| (p, n))).collect();
    let results = par::map_range(cfg.exec, cells.len(), |i| {
        let (p, n) = cells[i];
        run_cell(p, n, cfg.trials, cfg.seed, i as u64)
    });
    let rows = ROWS
        .iter()
        .map(|&(id, formula, check, tol)| {
            let mut worst = 0.0;
            let mut worst_at = None;
            for (cell, r) in cells.iter().zip(&results) {
                let v = r[id as usize];
                if worst_at.is_none() || (!f64::is_nan(worst) && (v.is_nan() || v > worst)) {
                    worst = v;
                    worst_at = Some(*cell);
                }
            }
            GeomRow { formula, check, worst, tol, worst_at, passed: worst <= tol }
        })
        .collect();
    GeomReport { rows, cells: cells.len(), trials: cfg.trials }
}
