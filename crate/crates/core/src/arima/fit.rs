//! Conditional-sum-of-squares estimation for ARMA models on an already
//! differenced series.

use crate::linalg::least_squares;

/// Residuals of `w_t = c + Σ φ_i w_{t-i} + e_t + Σ θ_j e_{t-j}` for
/// `t = p..len`, with pre-sample residuals taken as zero.
pub(crate) fn css_residuals(w: &[f64], c: f64, phi: &[f64], theta: &[f64]) -> Vec<f64> {
    let p = phi.len();
    let mut e = vec![0.0; w.len()];
    for t in p..w.len() {
        let mut pred = c;
        for (i, f) in phi.iter().enumerate() {
            pred += f * w[t - 1 - i];
        }
        for (j, th) in theta.iter().enumerate() {
            if t > j {
                pred += th * e[t - 1 - j];
            }
        }
        e[t] = w[t] - pred;
    }
    e.split_off(p)
}

pub(crate) fn css(w: &[f64], c: f64, phi: &[f64], theta: &[f64]) -> f64 {
    css_residuals(w, c, phi, theta).iter().map(|e| e * e).sum()
}

/// True when every root of `1 - Σ φ_i z^i` lies strictly outside the unit
/// circle, checked through the partial autocorrelations (step-down
/// Levinson–Durbin recursion).
pub fn is_stationary(phi: &[f64]) -> bool {
    if phi.iter().any(|v| !v.is_finite()) {
        return false;
    }
    let mut a = phi.to_vec();
    for k in (1..=a.len()).rev() {
        let kappa = a[k - 1];
        if kappa.abs() >= 1.0 {
            return false;
        }
        let denom = 1.0 - kappa * kappa;
        let prev: Vec<f64> = (1..k).map(|j| (a[j - 1] + kappa * a[k - j - 1]) / denom).collect();
        a = prev;
    }
    true
}

/// True when every root of `1 + Σ θ_j z^j` lies strictly outside the unit
/// circle.
pub fn is_invertible(theta: &[f64]) -> bool {
    let neg: Vec<f64> = theta.iter().map(|t| -t).collect();
    is_stationary(&neg)
}

/// Lagged-regressor OLS: regress `w_t` on `[1?, w_{t-1..p}, extra_{t-1..q}]`
/// for `t` in `start..len`.
fn lagged_ols(
    w: &[f64],
    extra: &[f64],
    p: usize,
    q: usize,
    start: usize,
    intercept: bool,
) -> Option<Vec<f64>> {
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for t in start..w.len() {
        let mut row = Vec::with_capacity(1 + p + q);
        if intercept {
            row.push(1.0);
        }
        row.extend((1..=p).map(|i| w[t - i]));
        row.extend((1..=q).map(|j| extra[t - j]));
        rows.push(row);
        rhs.push(w[t]);
    }
    let k = usize::from(intercept) + p + q;
    if k == 0 || rows.len() < k {
        return None;
    }
    least_squares(&rows, &rhs)
}

/// Parameter vector layout: `[c?, φ_1..φ_p, θ_1..θ_q]`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Layout {
    pub p: usize,
    pub q: usize,
    pub intercept: bool,
}

impl Layout {
    pub fn len(&self) -> usize {
        usize::from(self.intercept) + self.p + self.q
    }

    pub fn split<'a>(&self, x: &'a [f64]) -> (f64, &'a [f64], &'a [f64]) {
        let o = usize::from(self.intercept);
        let c = if self.intercept { x[0] } else { 0.0 };
        (c, &x[o..o + self.p], &x[o + self.p..])
    }

    pub fn join(&self, c: f64, phi: &[f64], theta: &[f64]) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.len());
        if self.intercept {
            v.push(c);
        }
        v.extend_from_slice(phi);
        v.extend_from_slice(theta);
        v
    }
}

/// Hannan–Rissanen starting values: a long autoregression supplies residual
/// proxies, then one OLS on lagged values and lagged proxies.
pub(crate) fn hannan_rissanen(w: &[f64], layout: Layout) -> Vec<f64> {
    let Layout { p, q, intercept } = layout;
    let m = w.len();
    let mean = if intercept {
        w.iter().sum::<f64>() / m as f64
    } else {
        0.0
    };
    if q == 0 {
        if let Some(x) = lagged_ols(w, &[], p, 0, p, intercept) {
            return x;
        }
        return layout.join(mean, &vec![0.0; p], &[]);
    }
    let long = (p.max(q) + 1).min(m.saturating_sub(2) / 3);
    let mut proxy = vec![0.0; m];
    let mut proxy_start = 0;
    if long > 0 {
        if let Some(ar) = lagged_ols(w, &[], long, 0, long, true) {
            for t in long..m {
                let fit = ar[0] + (1..=long).map(|i| ar[i] * w[t - i]).sum::<f64>();
                proxy[t] = w[t] - fit;
            }
            proxy_start = long;
        }
    }
    if proxy_start == 0 {
        let mu = w.iter().sum::<f64>() / m as f64;
        for t in 0..m {
            proxy[t] = w[t] - mu;
        }
    }
    let start = p.max(proxy_start + q);
    if m > start + layout.len() {
        if let Some(x) = lagged_ols(w, &proxy, p, q, start, intercept) {
            return x;
        }
    }
    // too short for the second stage: pure AR start with θ = 0
    let ar = lagged_ols(w, &[], p, 0, p, intercept)
        .unwrap_or_else(|| layout.join(mean, &vec![0.0; p], &[]));
    let (c, phi, _) = Layout { q: 0, ..layout }.split(&ar);
    layout.join(c, phi, &vec![0.0; q])
}

/// Derivative-free Nelder–Mead minimiser. Deterministic for a given start.
pub(crate) fn nelder_mead(
    f: &dyn Fn(&[f64]) -> f64,
    x0: &[f64],
    steps: &[f64],
    max_evals: usize,
    ftol: f64,
) -> (Vec<f64>, f64) {
    let n = x0.len();
    if n == 0 {
        return (vec![], f(x0));
    }
    let mut simplex: Vec<Vec<f64>> = vec![x0.to_vec()];
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] += steps[i];
        simplex.push(v);
    }
    let mut fx: Vec<f64> = simplex.iter().map(|v| f(v)).collect();
    let mut evals = n + 1;
    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);

    while evals < max_evals {
        let mut idx: Vec<usize> = (0..=n).collect();
        idx.sort_by(|&a, &b| fx[a].total_cmp(&fx[b]));
        simplex = idx.iter().map(|&i| simplex[i].clone()).collect();
        fx = idx.iter().map(|&i| fx[i]).collect();

        let (best, worst) = (fx[0], fx[n]);
        if best.is_finite() && (worst - best).abs() <= ftol * (best.abs() + ftol) {
            break;
        }

        let centroid: Vec<f64> = (0..n)
            .map(|j| simplex[..n].iter().map(|v| v[j]).sum::<f64>() / n as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[n])
                .map(|(c, w)| c + t * (w - c))
                .collect()
        };

        let xr = along(-alpha);
        let fr = f(&xr);
        evals += 1;
        if fr < fx[0] {
            let xe = along(-alpha * gamma);
            let fe = f(&xe);
            evals += 1;
            if fe < fr {
                simplex[n] = xe;
                fx[n] = fe;
            } else {
                simplex[n] = xr;
                fx[n] = fr;
            }
            continue;
        }
        if fr < fx[n - 1] {
            simplex[n] = xr;
            fx[n] = fr;
            continue;
        }
        let (xc, fc) = if fr < fx[n] {
            let xc = along(-alpha * rho);
            let fc = f(&xc);
            (xc, fc)
        } else {
            let xc = along(rho);
            let fc = f(&xc);
            (xc, fc)
        };
        evals += 1;
        if fc < fx[n].min(fr) {
            simplex[n] = xc;
            fx[n] = fc;
            continue;
        }
        for i in 1..=n {
            let shrunk: Vec<f64> = simplex[0]
                .iter()
                .zip(&simplex[i])
                .map(|(b, v)| b + sigma * (v - b))
                .collect();
            fx[i] = f(&shrunk);
            simplex[i] = shrunk;
        }
        evals += n;
    }
    let best = (0..=n)
        .min_by(|&a, &b| fx[a].total_cmp(&fx[b]))
        .expect("nonempty simplex");
    (simplex[best].clone(), fx[best])
}
