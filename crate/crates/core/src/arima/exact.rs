//! Exact Gaussian likelihood of a stationary ARMA model through the
//! innovations algorithm applied to the transformed process
//! `W_t = X_t` (t ≤ m), `W_t = φ(B) X_t` (t > m), `m = max(p, q)`.

use crate::linalg::least_squares;

/// Autocovariances `γ(0..=max_lag)` of a causal ARMA process with unit
/// innovation variance, from the linear equations for the first
/// `max(p, q + 1)` lags and the AR recursion beyond.
pub(crate) fn arma_acvf(phi: &[f64], theta: &[f64], max_lag: usize) -> Option<Vec<f64>> {
    let (p, q) = (phi.len(), theta.len());
    let th = |j: usize| -> f64 {
        match j {
            0 => 1.0,
            j if j <= q => theta[j - 1],
            _ => 0.0,
        }
    };
    // psi weights up to q
    let mut psi = vec![0.0; q + 1];
    for j in 0..=q {
        let mut v = th(j);
        for i in 1..=p.min(j) {
            v += phi[i - 1] * psi[j - i];
        }
        psi[j] = v;
    }
    let rhs_k = |k: usize| -> f64 { (k..=q).map(|j| th(j) * psi[j - k]).sum() };
    let r = p.max(q + 1);
    // unknowns γ(0..=r); equations k = 0..=r:
    // γ(k) - Σ φ_i γ(|k - i|) = Σ_{j=k}^{q} θ_j ψ_{j-k}
    let mut rows = vec![vec![0.0; r + 1]; r + 1];
    let mut b = vec![0.0; r + 1];
    for k in 0..=r {
        rows[k][k] += 1.0;
        for i in 1..=p {
            let lag = k.abs_diff(i);
            rows[k][lag] -= phi[i - 1];
        }
        b[k] = rhs_k(k);
    }
    let mut g = least_squares(&rows, &b)?;
    for k in r + 1..=max_lag {
        let mut v = rhs_k(k);
        for i in 1..=p {
            v += phi[i - 1] * g[k - i];
        }
        g.push(v);
    }
    g.truncate(max_lag + 1);
    while g.len() < max_lag + 1 {
        g.push(0.0);
    }
    if g[0] <= 0.0 || g.iter().any(|v| !v.is_finite()) {
        return None;
    }
    Some(g)
}

/// Profile `-2 log L` (constants dropped) of the zero-mean series `x`:
/// `n ln(S/n) + Σ ln r_t`, with `S = Σ (x_t - x̂_t)² / r_t` and `σ²`
/// concentrated out as `S/n`. `None` when the model is not causal or the
/// recursion degenerates.
pub(crate) fn neg2_loglik(x: &[f64], phi: &[f64], theta: &[f64]) -> Option<f64> {
    let n = x.len();
    if n == 0 {
        return None;
    }
    let (p, q) = (phi.len(), theta.len());
    let m = p.max(q);
    let gamma = arma_acvf(phi, theta, 2 * m + p + 1)?;
    let g = |h: usize| gamma[h];
    let th = |j: usize| -> f64 {
        match j {
            0 => 1.0,
            j if j <= q => theta[j - 1],
            _ => 0.0,
        }
    };
    // covariance of the transformed process, 1-based indices
    let kappa = |i: usize, j: usize| -> f64 {
        let (lo, hi) = (i.min(j), i.max(j));
        let h = hi - lo;
        if hi <= m {
            g(h)
        } else if lo <= m && hi <= 2 * m {
            let mut v = g(h);
            for r in 1..=p {
                v -= phi[r - 1] * g(r.abs_diff(h));
            }
            v
        } else if lo > m {
            (0..=q).map(|r| th(r) * th(r + h)).sum()
        } else {
            0.0
        }
    };
    // Beyond step m only the first q innovation coefficients are nonzero.
    let lim = |t: usize| if t < m { t } else { q.min(t) };
    let mut coef: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut v: Vec<f64> = Vec::with_capacity(n);
    let mut xhat = vec![0.0; n];
    let (mut s, mut log_r) = (0.0, 0.0);
    for t in 0..n {
        let l = lim(t);
        // c[j-1] = θ_{t,j}; filled for decreasing j
        let mut c = vec![0.0; l];
        for j in (1..=l).rev() {
            let k = t - j;
            let mut val = kappa(t + 1, k + 1);
            for a in 1..=coef[k].len() {
                let b = j + a;
                if b <= l {
                    val -= coef[k][a - 1] * c[b - 1] * v[k - a];
                }
            }
            c[j - 1] = val / v[k];
        }
        let mut vt = kappa(t + 1, t + 1);
        for (idx, cv) in c.iter().enumerate() {
            vt -= cv * cv * v[t - idx - 1];
        }
        if !(vt > 0.0 && vt.is_finite()) {
            return None;
        }
        let mut pred = 0.0;
        if t >= m {
            for r in 1..=p {
                pred += phi[r - 1] * x[t - r];
            }
        }
        for (idx, cv) in c.iter().enumerate() {
            let u = t - idx - 1;
            pred += cv * (x[u] - xhat[u]);
        }
        xhat[t] = pred;
        let e = x[t] - pred;
        s += e * e / vt;
        log_r += vt.ln();
        coef.push(c);
        v.push(vt);
    }
    if !s.is_finite() {
        return None;
    }
    if s <= 0.0 {
        return Some(f64::NEG_INFINITY);
    }
    Some(n as f64 * (s / n as f64).ln() + log_r)
}
