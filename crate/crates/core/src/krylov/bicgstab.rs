use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Identity, KrylovError, Preconditioner, Result, SolveReport};
use crate::sparse::{dot, norm2, CsrMatrix};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BicgstabOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Seed for the replacement shadow residual after a breakdown.
    pub seed: u64,
}

impl Default for BicgstabOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 1000,
            seed: 0,
        }
    }
}

const BREAKDOWN: f64 = 1e-30;

/// BiCGstab with right preconditioning, `A M^-1 (M x) = b`, from `x0 = 0`.
///
/// Stops when `||b - A x|| <= tol ||b||` (checked against the true residual)
/// or after `max_iter` iterations. A breakdown (`rho` or `omega` vanishing) is
/// retried once with a random shadow residual before it is reported.
pub fn bicgstab(
    a: &CsrMatrix,
    b: &[f64],
    precond: Option<&dyn Preconditioner>,
    opts: &BicgstabOptions,
) -> Result<(Vec<f64>, SolveReport)> {
    let start = Instant::now();
    let n = a.n_rows();
    if !a.is_square() {
        return Err(KrylovError::NotSquare);
    }
    if b.len() != n {
        return Err(KrylovError::DimensionMismatch {
            expected: n,
            got: b.len(),
        });
    }
    if !(opts.tol > 0.0) {
        return Err(KrylovError::InvalidArgument(format!("tol = {}", opts.tol)));
    }
    let m = precond.unwrap_or(&Identity);
    let bnorm = norm2(b);
    let mut x = vec![0.0; n];
    let mut report = SolveReport {
        converged: false,
        iterations: 0,
        residual_history: vec![],
        breakdown: None,
        diverged: false,
        wall_time: 0.0,
    };
    if bnorm == 0.0 {
        report.converged = true;
        report.residual_history.push(0.0);
        return Ok((x, report));
    }
    let target = opts.tol * bnorm;

    let mut r = b.to_vec();
    report.residual_history.push(1.0);
    let mut shadow = r.clone();
    let mut retried = false;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);

    let (mut p, mut v) = (vec![0.0; n], vec![0.0; n]);
    let (mut phat, mut shat) = (vec![0.0; n], vec![0.0; n]);
    let (mut s, mut t) = (vec![0.0; n], vec![0.0; n]);
    let (mut rho_old, mut alpha, mut omega) = (1.0, 1.0, 1.0);

    // Restarts the recurrence from the true residual with the given shadow.
    macro_rules! restart {
        () => {{
            r = a.residual(b, &x);
            p.iter_mut().for_each(|e| *e = 0.0);
            v.iter_mut().for_each(|e| *e = 0.0);
            rho_old = 1.0;
            alpha = 1.0;
            omega = 1.0;
        }};
    }

    while report.iterations < opts.max_iter {
        let rho = dot(&shadow, &r);
        if rho.abs() < BREAKDOWN * norm2(&shadow) * bnorm || !rho.is_finite() {
            if !rho.is_finite() {
                report.diverged = true;
                break;
            }
            if retried {
                report.breakdown = Some(format!("rho = {rho:e}"));
                break;
            }
            retried = true;
            report.breakdown = Some(format!("rho = {rho:e} (recovered)"));
            restart!();
            shadow = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            continue;
        }
        report.iterations += 1;
        let beta = (rho / rho_old) * (alpha / omega);
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        m.apply(&p, &mut phat);
        a.mul_into(&phat, &mut v);
        let sv = dot(&shadow, &v);
        if sv.abs() < BREAKDOWN * norm2(&shadow) * bnorm || !sv.is_finite() {
            if retried || !sv.is_finite() {
                report.breakdown = Some(format!("(r~, v) = {sv:e}"));
                report.diverged = !sv.is_finite();
                break;
            }
            retried = true;
            report.breakdown = Some(format!("(r~, v) = {sv:e} (recovered)"));
            restart!();
            shadow = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            continue;
        }
        alpha = rho / sv;
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }
        let snorm = norm2(&s);
        if snorm <= target {
            for i in 0..n {
                x[i] += alpha * phat[i];
            }
            let true_res = norm2(&a.residual(b, &x));
            report.residual_history.push(true_res / bnorm);
            if true_res <= target {
                report.converged = true;
                break;
            }
            restart!();
            continue;
        }
        m.apply(&s, &mut shat);
        a.mul_into(&shat, &mut t);
        let tt = dot(&t, &t);
        omega = if tt > 0.0 { dot(&t, &s) / tt } else { 0.0 };
        for i in 0..n {
            x[i] += alpha * phat[i] + omega * shat[i];
            r[i] = s[i] - omega * t[i];
        }
        let rnorm = norm2(&r);
        report.residual_history.push(rnorm / bnorm);
        if !rnorm.is_finite() {
            report.diverged = true;
            break;
        }
        if rnorm <= target {
            let true_res = norm2(&a.residual(b, &x));
            if true_res <= target {
                *report.residual_history.last_mut().unwrap() = true_res / bnorm;
                report.converged = true;
                break;
            }
            restart!();
            continue;
        }
        if omega.abs() < BREAKDOWN {
            if retried {
                report.breakdown = Some(format!("omega = {omega:e}"));
                break;
            }
            retried = true;
            report.breakdown = Some(format!("omega = {omega:e} (recovered)"));
            restart!();
            shadow = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            continue;
        }
        rho_old = rho;
    }
    report.wall_time = start.elapsed().as_secs_f64();
    Ok((x, report))
}
