use super::{ConstraintSystem, Result, Stencil, StencilError, StencilMethod};

/// Weight exponent used for least-squares stencils unless configured.
pub const DEFAULT_LSQ_ALPHA: f64 = 2.0;

/// Least-squares stencil `s = W V^T (V W V^T)^-1 b`, the minimiser of
/// `sum s_i^2 / w_i` subject to `V s = b`.
pub fn lsq_stencil(sys: &ConstraintSystem) -> Result<Stencil> {
    let (k, m) = (sys.k(), sys.m());
    let (v, w, unscale) = sys.scaled();

    // Gram matrix G = V W V^T (symmetric positive semidefinite).
    let mut g = vec![0.0; k * k];
    for p in 0..k {
        for q in 0..=p {
            let s: f64 = (0..m).map(|j| v[(p, j)] * w[j] * v[(q, j)]).sum();
            g[p * k + q] = s;
            g[q * k + p] = s;
        }
    }
    let g_norm = (0..k)
        .map(|p| g[p * k..(p + 1) * k].iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let threshold = 1e-12 * g_norm;
    if m < k {
        return Err(StencilError::RankDeficient { pivot: 0.0, threshold });
    }

    // LDL^T without pivoting; a small pivot means V W V^T is singular.
    let mut l = vec![0.0; k * k];
    let mut dg = vec![0.0; k];
    for j in 0..k {
        let mut dj = g[j * k + j];
        for t in 0..j {
            dj -= l[j * k + t] * l[j * k + t] * dg[t];
        }
        if !(dj >= threshold) || dj == 0.0 {
            return Err(StencilError::RankDeficient { pivot: dj, threshold });
        }
        dg[j] = dj;
        l[j * k + j] = 1.0;
        for i in j + 1..k {
            let mut s = g[i * k + j];
            for t in 0..j {
                s -= l[i * k + t] * l[j * k + t] * dg[t];
            }
            l[i * k + j] = s / dj;
        }
    }
    let mut lambda = sys.b.clone();
    for i in 0..k {
        for t in 0..i {
            lambda[i] -= l[i * k + t] * lambda[t];
        }
    }
    for i in 0..k {
        lambda[i] /= dg[i];
    }
    for i in (0..k).rev() {
        for t in i + 1..k {
            lambda[i] -= l[t * k + i] * lambda[t];
        }
    }

    let coeffs: Vec<f64> = (0..m)
        .map(|j| unscale * w[j] * (0..k).map(|p| v[(p, j)] * lambda[p]).sum::<f64>())
        .collect();
    let objective = coeffs
        .iter()
        .zip(&sys.weights)
        .map(|(s, w)| s * s / w)
        .sum();
    Ok(Stencil::from_coeffs(sys, StencilMethod::Lsq, coeffs, 0, objective))
}

/// Flop estimate for one least-squares stencil: `k(k+1)m + floor(k^3/3)`.
pub fn lsq_flops(k: u64, m: u64) -> u64 {
    k * (k + 1) * m + k * k * k / 3
}
