//! Krylov approximation of e^{−iHt}v with adaptive step splitting.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::linalg::{c, expm, re, CMat, CVec, C64};
use crate::sparse::Csr;

#[derive(Debug, Clone, Copy)]
pub struct KrylovOptions {
    /// Error tolerance for the whole interval, relative to ‖v‖.
    pub tol: f64,
    pub max_subspace: usize,
}

impl Default for KrylovOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_subspace: 40,
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct KrylovStats {
    pub steps: usize,
    pub matvecs: usize,
    /// Sum of the accepted local error estimates.
    pub error_estimate: f64,
}

struct Basis {
    vecs: Vec<CVec>,
    h: CMat,
    /// h_{m+1,m}; zero on happy breakdown.
    next: f64,
}

fn build_basis(op: &Csr, v: &CVec, m: usize, hermitian: bool, stats: &mut KrylovStats) -> Basis {
    let beta = v.norm();
    let mut vecs = vec![v / re(beta)];
    let mut h = CMat::zeros(m + 1, m);
    let mut next = 0.0;
    let mut dim = m;
    for j in 0..m {
        let mut w = op.matvec(&vecs[j]);
        stats.matvecs += 1;
        // Full (re)orthogonalization, twice for stability.
        for _ in 0..2 {
            for (i, q) in vecs.iter().enumerate() {
                let coef = q.dotc(&w);
                h[(i, j)] += coef;
                w.axpy(-coef, q, re(1.0));
            }
        }
        let nrm = w.norm();
        h[(j + 1, j)] = re(nrm);
        if nrm <= 1e-12 * (1.0 + h[(j, j)].norm()) {
            dim = j + 1;
            next = 0.0;
            break;
        }
        next = nrm;
        if j + 1 < m {
            vecs.push(w / re(nrm));
        }
    }
    let mut hm = h.view((0, 0), (dim, dim)).into_owned();
    if hermitian {
        // Lanczos structure: real symmetric tridiagonal.
        let mut t = CMat::zeros(dim, dim);
        for i in 0..dim {
            t[(i, i)] = re(hm[(i, i)].re);
            if i + 1 < dim {
                let b = hm[(i + 1, i)].re;
                t[(i + 1, i)] = re(b);
                t[(i, i + 1)] = re(b);
            }
        }
        hm = t;
    }
    vecs.truncate(dim);
    Basis { vecs, h: hm, next }
}

/// e^{−iτ H_m} e₁ for the projected matrix.
fn small_exp(h: &CMat, tau: f64, hermitian: bool) -> CVec {
    let m = h.nrows();
    if hermitian {
        let t = DMatrix::from_fn(m, m, |i, j| h[(i, j)].re);
        let eig = SymmetricEigen::new(t);
        CVec::from_fn(m, |i, _| {
            (0..m)
                .map(|k| {
                    let q = eig.eigenvectors[(i, k)] * eig.eigenvectors[(0, k)];
                    C64::from_polar(q, -eig.eigenvalues[k] * tau)
                })
                .sum()
        })
    } else {
        let e = expm(&(h * c(0.0, -tau)));
        e.column(0).into_owned()
    }
}

/// Computes e^{−iHt}v; `hermitian` selects Lanczos (true) or Arnoldi.
pub fn expm_multiply(op: &Csr, v: &CVec, t: f64, hermitian: bool, opts: KrylovOptions) -> Result<(CVec, KrylovStats)> {
    let mut stats = KrylovStats::default();
    let mut w = v.clone();
    let total = t.abs();
    if total == 0.0 || v.norm() == 0.0 {
        return Ok((w, stats));
    }
    let sign = t.signum();
    let m = opts.max_subspace.min(op.nrows()).max(1);
    let norm = op.inf_norm().max(1e-300);
    let mut tau = total.min(0.5 * m as f64 / norm);
    let mut done = 0.0;
    while done < total {
        tau = tau.min(total - done);
        let beta = w.norm();
        let basis = build_basis(op, &w, m, hermitian, &mut stats);
        loop {
            let y = small_exp(&basis.h, sign * tau, hermitian);
            let last = y[y.len() - 1].norm();
            let err = beta * basis.next * last;
            let allowed = opts.tol * beta * (tau / total);
            if basis.next == 0.0 || err <= allowed {
                let mut out = CVec::zeros(w.len());
                for (q, &yk) in basis.vecs.iter().zip(y.iter()) {
                    out.axpy(yk * beta, q, re(1.0));
                }
                w = out;
                done += tau;
                stats.steps += 1;
                stats.error_estimate += err;
                if basis.next == 0.0 {
                    tau = total - done;
                } else if err < 0.1 * allowed {
                    tau *= 1.5;
                }
                break;
            }
            tau *= 0.5;
            if tau < 1e-14 * total {
                return Err(Error::KrylovNotConverged { residual: err / beta });
            }
        }
    }
    Ok((w, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::expm_hermitian;

    fn random_hermitian(n: usize) -> CMat {
        let mut state = 12345u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let a = CMat::from_fn(n, n, |_, _| c(next(), next()));
        (&a + a.adjoint()) * re(0.5)
    }

    #[test]
    fn lanczos_matches_dense() {
        let h = random_hermitian(256);
        let v = CVec::from_fn(256, |i, _| c((i as f64).sin(), (0.3 * i as f64).cos()));
        let exact = expm_hermitian(&h, 1.0) * &v;
        let (got, _) = expm_multiply(&Csr::from_dense(&h), &v, 1.0, true, KrylovOptions::default()).unwrap();
        assert!((got - &exact).norm() / exact.norm() < 1e-8);
    }

    #[test]
    fn arnoldi_nonhermitian() {
        let mut a = random_hermitian(60);
        a[(0, 5)] += c(0.3, -0.2);
        let v = CVec::from_fn(60, |i, _| re(1.0 / (1.0 + i as f64)));
        let exact = expm(&(&a * c(0.0, -2.0))) * &v;
        let (got, _) = expm_multiply(&Csr::from_dense(&a), &v, 2.0, false, KrylovOptions::default()).unwrap();
        assert!((got - &exact).norm() / exact.norm() < 1e-8);
    }

    #[test]
    fn zero_time_is_identity() {
        let h = random_hermitian(8);
        let v = CVec::from_element(8, re(0.5));
        let (got, _) = expm_multiply(&Csr::from_dense(&h), &v, 0.0, true, KrylovOptions::default()).unwrap();
        assert_eq!(got, v);
    }
}
