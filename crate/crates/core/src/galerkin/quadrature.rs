//! Gauss–Hermite and composite Gauss–Legendre rules.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{Error, Result};

/// Nodes and weights for ∫ f(y) dy ≈ Σ w_k f(y_k).
///
/// Gauss–Hermite rules store weights already multiplied by e^{y²}, so they
/// integrate f directly (exact for polynomial·e^{−y²} up to degree 2·order−1).
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }
}

/// Normalized Hermite functions ψ_0..ψ_{n-1} at x (unit scale), evaluated with
/// the three-term recurrence and periodic rescaling so that large |x| does not
/// underflow the Gaussian prefactor before the polynomial growth kicks in.
pub fn hermite_functions(x: f64, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n];
    if n == 0 {
        return out;
    }
    let (vals, logs) = hermite_scaled(x, n);
    let base = -0.5 * x * x;
    for k in 0..n {
        if vals[k] != 0.0 {
            out[k] = vals[k] * (logs[k] + base).exp();
        }
    }
    out
}

const RESCALE: f64 = 1e100;

/// Returns unscaled values v_k and log factors L_k with ψ_k = v_k·e^{L_k − x²/2}.
fn hermite_scaled(x: f64, n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut vals = vec![0.0; n];
    let mut logs = vec![0.0; n];
    let mut log_acc = 0.0;
    let mut prev = 0.0;
    let mut cur = std::f64::consts::PI.powf(-0.25);
    vals[0] = cur;
    for k in 1..n {
        let kf = k as f64;
        let next = (2.0 / kf).sqrt() * x * cur - ((kf - 1.0) / kf).sqrt() * prev;
        prev = cur;
        cur = next;
        if cur.abs() > RESCALE {
            cur /= RESCALE;
            prev /= RESCALE;
            log_acc += RESCALE.ln();
        }
        vals[k] = cur;
        logs[k] = log_acc;
    }
    (vals, logs)
}

/// Eigenvalues of a symmetric tridiagonal matrix (implicit QL).
/// `d` is the diagonal, `e[i]` couples i and i+1; `e` must have length n with e[n-1] unused.
fn tridiagonal_eigenvalues(mut d: Vec<f64>, mut e: Vec<f64>) -> Result<Vec<f64>> {
    let n = d.len();
    if n == 0 {
        return Ok(d);
    }
    e[n - 1] = 0.0;
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m < n - 1 {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 200 {
                return Err(Error::QuadratureNotConverged { delta: e[l].abs() });
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut deflated = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    d.sort_by(|a, b| a.total_cmp(b));
    Ok(d)
}

fn build_gauss_hermite(m: usize) -> Result<QuadratureRule> {
    let d = vec![0.0; m];
    let e: Vec<f64> = (1..=m).map(|k| (k as f64 / 2.0).sqrt()).collect();
    let mut nodes = tridiagonal_eigenvalues(d, e)?;
    // Newton polish on ψ_m, whose zeros are the nodes; ψ_m' = √(2m)ψ_{m−1} − xψ_m.
    for x in nodes.iter_mut() {
        for _ in 0..3 {
            let (vals, logs) = hermite_scaled(*x, m + 1);
            let pm = vals[m];
            let pm1 = vals[m - 1] * (logs[m - 1] - logs[m]).exp();
            let deriv = (2.0 * m as f64).sqrt() * pm1 - *x * pm;
            if deriv == 0.0 {
                break;
            }
            let step = pm / deriv;
            *x -= step;
            if step.abs() < 1e-15 * x.abs().max(1.0) {
                break;
            }
        }
    }
    // Christoffel weights: w_k e^{x_k²} = 1 / Σ_{n<m} ψ_n(x_k)².
    let weights = nodes
        .iter()
        .map(|&x| {
            let (vals, logs) = hermite_scaled(x, m);
            let top = logs[m - 1];
            let sum: f64 = vals.iter().zip(&logs).map(|(&v, &l)| v * v * (2.0 * (l - top)).exp()).sum();
            (-(sum.ln() + 2.0 * top - x * x)).exp()
        })
        .collect();
    Ok(QuadratureRule { nodes, weights })
}

/// Gauss–Hermite rule with `m` nodes (cached).
pub fn gauss_hermite(m: usize) -> Result<Arc<QuadratureRule>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<QuadratureRule>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(rule) = cache.lock().expect("quadrature cache poisoned").get(&m) {
        return Ok(rule.clone());
    }
    if m == 0 {
        return Err(Error::invalid("Gauss-Hermite rule needs at least one node"));
    }
    let rule = Arc::new(build_gauss_hermite(m)?);
    cache.lock().expect("quadrature cache poisoned").insert(m, rule.clone());
    Ok(rule)
}

/// Gauss–Legendre nodes and weights on [−1, 1].
pub fn gauss_legendre(n: usize) -> QuadratureRule {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else { p1 };
            let pn1 = if n == 1 { 1.0 } else { p0 };
            dp = nf * (x * pn - pn1) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    QuadratureRule { nodes, weights }
}

/// Composite Gauss–Legendre rule on [a, b] with panel edges at every breakpoint
/// inside the interval and panels no wider than `max_width`.
pub fn composite_legendre(a: f64, b: f64, breaks: &[f64], max_width: f64, order: usize) -> QuadratureRule {
    let mut edges = vec![a];
    let mut inner: Vec<f64> = breaks.iter().copied().filter(|&x| x > a && x < b).collect();
    inner.sort_by(|x, y| x.total_cmp(y));
    edges.extend(inner);
    edges.push(b);
    let base = gauss_legendre(order);
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    for w in edges.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        if hi <= lo {
            continue;
        }
        let panels = ((hi - lo) / max_width).ceil().max(1.0) as usize;
        let h = (hi - lo) / panels as f64;
        for p in 0..panels {
            let left = lo + p as f64 * h;
            for (&x, &wt) in base.nodes.iter().zip(&base.weights) {
                nodes.push(left + 0.5 * h * (x + 1.0));
                weights.push(0.5 * h * wt);
            }
        }
    }
    QuadratureRule { nodes, weights }
}
