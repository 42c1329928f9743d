//! Independent solvers used as oracles: cyclic coordinate descent for the
//! L1-regularized least-squares problem and projected gradient (with an
//! active-set polish) for the box QP.

use nalgebra::{DMatrix, DVector};

use super::{matvec, BoxQpInstance};
use crate::error::{Error, Result};
use crate::kernels::{self, dot};

fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

/// Minimizer of `||Xw - y||^2 + lambda ||w||_1`, warm-started from `w0`.
pub fn lasso_coordinate_descent(x: &DMatrix<f64>, y: &[f64], lambda: f64, w0: Option<&[f64]>) -> Vec<f64> {
    let n = x.ncols();
    let mut w = w0.map_or_else(|| vec![0.0; n], <[f64]>::to_vec);
    let mut r = kernels::sub(y, &matvec(x, &w));
    let col_sq: Vec<f64> = (0..n).map(|j| x.column(j).norm_squared()).collect();
    for _ in 0..100_000 {
        let mut biggest: f64 = 0.0;
        for j in 0..n {
            if col_sq[j] == 0.0 {
                continue;
            }
            let col = x.column(j);
            let rho = col.dot(&DVector::from_column_slice(&r)) + col_sq[j] * w[j];
            let new = soft_threshold(rho, 0.5 * lambda) / col_sq[j];
            let delta = new - w[j];
            if delta != 0.0 {
                for (ri, xi) in r.iter_mut().zip(col.iter()) {
                    *ri -= delta * xi;
                }
                w[j] = new;
                biggest = biggest.max(delta.abs());
            }
        }
        let scale = 1.0 + kernels::max_abs(&w);
        if biggest <= 1e-14 * scale {
            break;
        }
    }
    w
}

/// The L1-regularized solution whose L1 norm equals `c`, with its `lambda`
/// found by bisection (the norm decreases in `lambda`).
pub fn lasso_matched_radius(x: &DMatrix<f64>, y: &[f64], c: f64) -> Result<(f64, Vec<f64>)> {
    if !(c > 0.0) {
        return Err(Error::InvalidInput(format!("radius must be positive, got {c}")));
    }
    let l1 = |w: &[f64]| w.iter().map(|v| v.abs()).sum::<f64>();
    let w_free = lasso_coordinate_descent(x, y, 0.0, None);
    if l1(&w_free) <= c {
        return Ok((0.0, w_free));
    }
    let mut lo = 0.0;
    let mut hi = 2.0 * kernels::max_abs(&matvec_t_slice(x, y)) + 1.0;
    let mut w = vec![0.0; x.ncols()];
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        w = lasso_coordinate_descent(x, y, mid, Some(&w));
        if l1(&w) > c {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    let lambda = 0.5 * (lo + hi);
    Ok((lambda, lasso_coordinate_descent(x, y, lambda, Some(&w))))
}

fn matvec_t_slice(x: &DMatrix<f64>, y: &[f64]) -> Vec<f64> {
    x.tr_mul(&DVector::from_column_slice(y)).data.into()
}

fn clamp_to_box(inst: &BoxQpInstance, w: &[f64]) -> Vec<f64> {
    w.iter()
        .zip(inst.lower().iter().zip(inst.upper()))
        .map(|(&wi, (&l, &u))| wi.clamp(l, u))
        .collect()
}

/// `||w - clamp(w - grad L(w))||_inf`, zero exactly at box-KKT points.
pub fn box_kkt_residual(inst: &BoxQpInstance, w: &[f64]) -> f64 {
    let g = inst.loss_gradient(w);
    let moved = clamp_to_box(inst, &kernels::sub(w, &g));
    kernels::max_abs(&kernels::sub(w, &moved))
}

/// Box-QP minimizer by projected gradient with step `1/lambda_max(A)`,
/// finished by solving the reduced system on the free coordinates.
pub fn box_projected_gradient(inst: &BoxQpInstance, max_iters: usize) -> Vec<f64> {
    let a = inst.matrix();
    let lmax = a.clone().symmetric_eigen().eigenvalues.max();
    let step = 1.0 / lmax;
    let mut w = clamp_to_box(inst, &inst.unconstrained_minimizer());
    for _ in 0..max_iters {
        let g = inst.loss_gradient(&w);
        let next = clamp_to_box(inst, &kernels::sub(&w, &kernels::scaled(step, &g)));
        let moved = kernels::max_abs(&kernels::sub(&next, &w));
        w = next;
        if moved <= 1e-15 * (1.0 + kernels::max_abs(&w)) {
            break;
        }
    }
    let mut best = w.clone();
    let mut best_res = box_kkt_residual(inst, &best);
    let mut cur = w;
    for _ in 0..=inst.n() {
        let Some(polished) = active_set_solve(inst, &cur) else { break };
        let res = box_kkt_residual(inst, &polished);
        if res < best_res || (res == best_res && inst.loss(&polished) < inst.loss(&best)) {
            best = polished.clone();
            best_res = res;
        }
        if polished == cur {
            break;
        }
        cur = polished;
    }
    best
}

fn active_set_solve(inst: &BoxQpInstance, w: &[f64]) -> Option<Vec<f64>> {
    let g = inst.loss_gradient(w);
    let n = inst.n();
    let mut fixed = vec![None; n];
    for i in 0..n {
        let (l, u) = (inst.lower()[i], inst.upper()[i]);
        let tol = 1e-9 * (u - l);
        if w[i] <= l + tol && g[i] > 0.0 {
            fixed[i] = Some(l);
        } else if w[i] >= u - tol && g[i] < 0.0 {
            fixed[i] = Some(u);
        }
    }
    let free: Vec<usize> = (0..n).filter(|&i| fixed[i].is_none()).collect();
    let mut out: Vec<f64> = (0..n).map(|i| fixed[i].unwrap_or(0.0)).collect();
    if !free.is_empty() {
        let a = inst.matrix();
        let aff = DMatrix::from_fn(free.len(), free.len(), |r, c| a[(free[r], free[c])]);
        let rhs = DVector::from_fn(free.len(), |r, _| {
            let i = free[r];
            let coupled: f64 = (0..n).filter_map(|j| fixed[j].map(|v| a[(i, j)] * v)).sum();
            -(inst.linear()[i] + coupled)
        });
        let sol = aff.cholesky()?.solve(&rhs);
        for (r, &i) in free.iter().enumerate() {
            out[i] = sol[r];
        }
    }
    Some(clamp_to_box(inst, &out))
}

/// `L(w) + lambda ||w||_1` for the least-squares loss.
pub fn lasso_regularized_objective(x: &DMatrix<f64>, y: &[f64], lambda: f64, w: &[f64]) -> f64 {
    let r = kernels::sub(&matvec(x, w), y);
    dot(&r, &r) + lambda * w.iter().map(|v| v.abs()).sum::<f64>()
}
