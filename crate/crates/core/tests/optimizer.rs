use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use psphere::instances;
use psphere::kernels::pnorm;
use psphere::optimizer::{multistart, random_starts, solve, BetaRule, FnProblem, Method, Problem, SolverConfig};
use psphere::par::Execution;
use psphere::{RetractionKind, SpherePNorm, TransportKind};

fn config() -> impl Strategy<Value = SolverConfig> {
    (
        prop::sample::select(vec![Method::GradientDescent, Method::ConjugateGradient]),
        prop::sample::select(RetractionKind::ALL.to_vec()),
        prop::sample::select(vec![TransportKind::DifferentiatedRetraction, TransportKind::Projection]),
        prop::sample::select(vec![BetaRule::FletcherReeves, BetaRule::PolakRibierePlus]),
        any::<bool>(),
    )
        .prop_map(|(method, retraction, transport, beta_rule, inv)| SolverConfig {
            method,
            retraction,
            transport,
            beta_rule,
            max_iters: 400,
            inverse_retraction_transport: inv,
            ..Default::default()
        })
}

/// `x^T A x + b^T x` from a seeded SPD matrix.
fn quadratic(n: usize, seed: u64) -> impl Problem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = instances::spd_matrix(n, &mut rng);
    let b: Vec<f64> = instances::gaussian_matrix(n, 1, &mut rng).iter().cloned().collect();
    let a2 = a.clone();
    let b2 = b.clone();
    FnProblem::new(
        "quadratic",
        move |x: &[f64]| {
            let ax = &a * nalgebra::DVector::from_column_slice(x);
            x.iter().zip(ax.iter()).map(|(u, v)| u * v).sum::<f64>() + b.iter().zip(x).map(|(u, v)| u * v).sum::<f64>()
        },
        move |x: &[f64]| {
            let ax = &a2 * nalgebra::DVector::from_column_slice(x);
            ax.iter().zip(&b2).map(|(u, v)| 2.0 * u + v).collect()
        },
    )
}

fn independent_grad_norm<P: Problem>(prob: &P, x: &[f64], p: f64) -> f64 {
    let g = prob.euclidean_gradient(x);
    let n: Vec<f64> = x.iter().map(|v| v.signum() * v.abs().powf(p - 1.0)).collect();
    let c = g.iter().zip(&n).map(|(a, b)| a * b).sum::<f64>() / n.iter().map(|v| v * v).sum::<f64>();
    g.iter().zip(&n).map(|(a, b)| (a - c * b).powi(2)).sum::<f64>().sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn trace_does_not_increase(cfg in config(), p in prop::sample::select(vec![1.5, 2.0, 3.0, 4.0, 10.0]), n in 2usize..8, seed in any::<u64>()) {
        let s = SpherePNorm::new(n, p).unwrap();
        let prob = quadratic(n, seed);
        let x0 = random_starts(&s, 1, seed).remove(0);
        let r = solve(&prob, &s, &x0, &cfg).unwrap();
        for w in r.trace.windows(2) {
            // exact unless the step was taken in the rounding regime of the line search
            let allowance = 8.0 * f64::EPSILON * w[0].objective.abs();
            prop_assert!(w[1].objective <= w[0].objective + allowance, "{} -> {}", w[0].objective, w[1].objective);
        }
        prop_assert_eq!(r.trace.len(), r.iterations + 1);
    }

    #[test]
    fn iterates_stay_feasible_and_certificate_holds(cfg in config(), p in prop::sample::select(vec![1.5, 2.0, 4.0, 10.0]), n in 2usize..8, seed in any::<u64>()) {
        let s = SpherePNorm::new(n, p).unwrap();
        let prob = quadratic(n, seed);
        let x0 = random_starts(&s, 1, seed ^ 1).remove(0);
        let r = solve(&prob, &s, &x0, &cfg).unwrap();
        prop_assert!((pnorm(r.point.coords(), p) - 1.0).abs() <= 1e-9);
        let g = independent_grad_norm(&prob, r.point.coords(), p);
        prop_assert!((g - r.grad_norm).abs() <= 1e-9 * (1.0 + g));
        if r.converged {
            prop_assert!(g <= cfg.grad_tol * (1.0 + 1e-6));
        }
        prop_assert_eq!(r.objective, prob.objective(r.point.coords()));
    }

    #[test]
    fn solve_is_deterministic(cfg in config(), n in 2usize..6, seed in any::<u64>()) {
        let s = SpherePNorm::new(n, 3.0).unwrap();
        let prob = quadratic(n, seed);
        let x0 = random_starts(&s, 1, seed).remove(0);
        let a = solve(&prob, &s, &x0, &cfg).unwrap();
        let b = solve(&prob, &s, &x0, &cfg).unwrap();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn multistart_is_independent_of_execution_mode() {
    let s = SpherePNorm::new(6, 4.0).unwrap();
    let inst = instances::nnpca_instance(6, 3).unwrap();
    let starts = instances::positive_starts(&s, 6, 3);
    let cfg = SolverConfig::default();
    let a = multistart(&inst.problem(), &s, &starts, &cfg, Execution::Sequential).unwrap();
    let b = multistart(&inst.problem(), &s, &starts, &cfg, Execution::Parallel).unwrap();
    assert_eq!(a.best, b.best);
    for (ra, rb) in a.runs.iter().zip(&b.runs) {
        assert_eq!(ra.as_ref().unwrap(), rb.as_ref().unwrap());
    }
}

#[test]
fn every_variant_reaches_the_dominant_eigenvector() {
    let s = SpherePNorm::new(3, 2.0).unwrap();
    let prob = FnProblem::new(
        "rayleigh",
        |x: &[f64]| -(3.0 * x[0] * x[0] + 2.0 * x[1] * x[1] + x[2] * x[2]),
        |x: &[f64]| vec![-6.0 * x[0], -4.0 * x[1], -2.0 * x[2]],
    );
    let x0 = s.point_from_ambient(&[0.3, 0.6, 0.7]).unwrap();
    for method in [Method::GradientDescent, Method::ConjugateGradient] {
        for retraction in RetractionKind::ALL {
            for transport in [TransportKind::DifferentiatedRetraction, TransportKind::Projection] {
                for beta_rule in [BetaRule::FletcherReeves, BetaRule::PolakRibierePlus] {
                    let cfg = SolverConfig { method, retraction, transport, beta_rule, ..Default::default() };
                    let r = solve(&prob, &s, &x0, &cfg).unwrap();
                    assert!(r.converged, "{cfg:?} {} {} {}", r.iterations, r.grad_norm, r.objective);
                    assert!((r.objective + 3.0).abs() <= 1e-12, "{cfg:?}: {}", r.objective);
                }
            }
        }
    }
}

#[test]
fn multistart_requires_starts() {
    let s = SpherePNorm::new(2, 2.0).unwrap();
    let prob = quadratic(2, 0);
    assert!(multistart(&prob, &s, &[], &SolverConfig::default(), Execution::Sequential).is_err());
}
