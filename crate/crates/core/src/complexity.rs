//! Sparse-access resource estimates in relative cost units (all big-O
//! constants set to one).

use serde::Serialize;

use crate::error::{Error, Result};
use crate::sparse::Csr;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MatrixStats {
    /// Maximum number of nonzeros in a row.
    pub sparsity: usize,
    /// Largest absolute entry.
    pub max_norm: f64,
}

pub fn matrix_stats(m: &Csr) -> MatrixStats {
    MatrixStats {
        sparsity: m.max_row_nnz(),
        max_norm: m.max_abs(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CostReport {
    pub sparsity: usize,
    pub max_norm: f64,
    pub time: f64,
    pub epsilon: f64,
    pub tau: f64,
    pub qubits: u32,
    pub queries: f64,
    pub gates: f64,
}

/// L/ln L with L = ln(τ/ε); ln L is floored at 1 where τ/ε < e^e.
fn log_ratio(tau: f64, eps: f64) -> f64 {
    let l = (tau / eps).ln().max(1.0);
    l / l.ln().max(1.0)
}

fn report(sparsity: usize, max_norm: f64, time: f64, eps: f64, j: usize, tau: f64) -> Result<CostReport> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::invalid(format!("ε must lie in (0, 1), got {eps}")));
    }
    if !(time > 0.0) || j == 0 {
        return Err(Error::invalid("cost estimate needs T > 0 and J >= 1"));
    }
    let qubits = (j as f64 / eps).log2().ceil() as u32;
    let ratio = log_ratio(tau, eps);
    let queries = tau * ratio;
    let gates = tau * (qubits as f64 + (tau / eps).ln().max(0.0).powf(2.5)) * ratio;
    Ok(CostReport {
        sparsity,
        max_norm,
        time,
        epsilon: eps,
        tau,
        qubits,
        queries,
        gates,
    })
}

/// τ = s(1/ε + h_max)T with the clock resolution tied to the target error.
pub fn theorem4_estimate(s_h: usize, h_max: f64, time: f64, eps: f64, j: usize) -> Result<CostReport> {
    if s_h == 0 || !(h_max >= 0.0) {
        return Err(Error::invalid("sparsity must be positive and h_max nonnegative"));
    }
    let tau = s_h as f64 * (1.0 / eps + h_max) * time;
    report(s_h, h_max, time, eps, j, tau)
}

/// τ = s_H̄ T ‖H̄‖_max from the assembled matrix, with ε and the clock size independent.
pub fn measured_estimate(stats: MatrixStats, time: f64, eps: f64, j: usize) -> Result<CostReport> {
    let tau = stats.sparsity as f64 * time * stats.max_norm;
    report(stats.sparsity, stats.max_norm, time, eps, j, tau)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_stats() {
        let s = matrix_stats(&Csr::identity(5));
        assert_eq!(s.sparsity, 1);
        assert_eq!(s.max_norm, 1.0);
    }

    #[test]
    fn formula_example() {
        let r = theorem4_estimate(4, 10.0, 1.0, 1e-3, 64).unwrap();
        assert!((r.tau - 4040.0).abs() < 1e-9);
        let l = (4040.0f64 / 1e-3).ln();
        assert!((r.queries - 4040.0 * l / l.ln()).abs() < 1e-6);
        assert_eq!(r.qubits, 16);
        assert!(r.queries <= r.gates);
        let doubled = theorem4_estimate(4, 10.0, 2.0, 1e-3, 64).unwrap();
        assert!((doubled.tau - 2.0 * r.tau).abs() < 1e-9);
        assert!(theorem4_estimate(4, 10.0, 1.0, 1.0, 64).is_err());
    }
}
