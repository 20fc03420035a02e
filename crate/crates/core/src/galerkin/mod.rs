//! Hermite-function Galerkin machinery: basis evaluation, operator matrices,
//! state projection, Fourier-conjugate representation change and interval
//! projectors.

pub mod quadrature;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{c, re, CMat, CVec, C64};
use crate::scalar::ScalarFn;
use quadrature::{composite_legendre, gauss_hermite, hermite_functions, QuadratureRule};

const STABLE_TOL: f64 = 1e-10;
const FAIL_TOL: f64 = 1e-8;

/// Hermite functions φ_n(x) = ψ_n(x/ς)/√ς, n < size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HermiteBasis {
    size: usize,
    scale: f64,
}

impl HermiteBasis {
    pub fn new(size: usize, scale: f64) -> Result<Self> {
        if size < 2 {
            return Err(Error::invalid(format!("Hermite basis needs N >= 2, got {size}")));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::invalid(format!("Hermite scale must be positive, got {scale}")));
        }
        Ok(Self { size, scale })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Same size, scale 1/ς (the Fourier-conjugate representation).
    pub fn conjugate(&self) -> Self {
        Self {
            size: self.size,
            scale: 1.0 / self.scale,
        }
    }

    pub fn with_size(&self, size: usize) -> Self {
        Self { size, scale: self.scale }
    }

    /// Half-width (in x units) beyond which every basis function is negligible.
    pub fn support(&self) -> f64 {
        self.scale * ((2.0 * self.size as f64).sqrt() + 12.0)
    }

    /// Smallest position width this basis can resolve, ς/√N.
    pub fn resolution(&self) -> f64 {
        self.scale / (self.size as f64).sqrt()
    }

    /// φ_0(x)..φ_{N−1}(x).
    pub fn eval_all(&self, x: f64) -> Vec<f64> {
        let norm = self.scale.sqrt().recip();
        hermite_functions(x / self.scale, self.size).into_iter().map(|v| v * norm).collect()
    }

    /// Gram matrix under the Gauss–Hermite rule used for operator assembly.
    pub fn gram(&self) -> Result<DMatrix<f64>> {
        let rule = gauss_hermite(2 * self.size)?;
        Ok(weighted_gram(&rule, self.size, |_| 1.0))
    }
}

/// φ_n(x) for a single index.
pub fn basis_eval(n: usize, basis: &HermiteBasis, x: f64) -> Result<f64> {
    if n >= basis.size {
        return Err(Error::IndexOutOfRange {
            index: n,
            size: basis.size,
        });
    }
    let norm = basis.scale.sqrt().recip();
    Ok(hermite_functions(x / basis.scale, n + 1)[n] * norm)
}

/// Tridiagonal position matrix, super-diagonal ς√((n+1)/2).
pub fn position_matrix(basis: &HermiteBasis) -> CMat {
    let n = basis.size;
    let mut m = CMat::zeros(n, n);
    for k in 0..n - 1 {
        let v = re(basis.scale * ((k as f64 + 1.0) / 2.0).sqrt());
        m[(k, k + 1)] = v;
        m[(k + 1, k)] = v;
    }
    m
}

/// Tridiagonal momentum matrix (p = −i d/dx), entries ∓i√((n+1)/2)/ς.
pub fn momentum_matrix(basis: &HermiteBasis) -> CMat {
    let n = basis.size;
    let mut m = CMat::zeros(n, n);
    for k in 0..n - 1 {
        let v = ((k as f64 + 1.0) / 2.0).sqrt() / basis.scale;
        m[(k, k + 1)] = c(0.0, -v);
        m[(k + 1, k)] = c(0.0, v);
    }
    m
}

/// Σ_k w_k ψ_n(y_k) ψ_m(y_k) f(y_k) on unit-scale Hermite functions.
fn weighted_gram(rule: &QuadratureRule, n: usize, f: impl Fn(f64) -> f64 + Sync) -> DMatrix<f64> {
    let (psi, w) = tabulate(rule, n, f);
    let wpsi = DMatrix::from_fn(psi.nrows(), n, |k, j| psi[(k, j)] * w[k]);
    psi.transpose() * wpsi
}

/// Rows: quadrature nodes; columns: ψ_0..ψ_{n−1}. Returns also w_k·f(y_k).
fn tabulate(rule: &QuadratureRule, n: usize, f: impl Fn(f64) -> f64 + Sync) -> (DMatrix<f64>, Vec<f64>) {
    let rows: Vec<Vec<f64>> = rule.nodes.par_iter().map(|&y| hermite_functions(y, n)).collect();
    let psi = DMatrix::from_fn(rows.len(), n, |k, j| rows[k][j]);
    let w = rule.nodes.iter().zip(&rule.weights).map(|(&y, &wk)| wk * f(y)).collect();
    (psi, w)
}

fn complex_gram(rule: &QuadratureRule, basis: &HermiteBasis, f: &ScalarFn) -> CMat {
    let s = basis.scale;
    let n = basis.size;
    let (psi, wre) = tabulate(rule, n, |y| f.eval(s * y).re);
    let wim: Vec<f64> = rule
        .nodes
        .iter()
        .zip(&rule.weights)
        .map(|(&y, &wk)| wk * f.eval(s * y).im)
        .collect();
    let gram = |w: &[f64]| {
        let wpsi = DMatrix::from_fn(psi.nrows(), n, |k, j| psi[(k, j)] * w[k]);
        psi.transpose() * wpsi
    };
    let r = gram(&wre);
    if wim.iter().all(|&x| x == 0.0) {
        return r.map(re);
    }
    let i = gram(&wim);
    CMat::from_fn(n, n, |a, b| c(r[(a, b)], i[(a, b)]))
}

fn max_diff(a: &CMat, b: &CMat) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Composite Legendre rule over the effective support in unit-scale coordinates,
/// with panel edges at the (scaled) breakpoints.
fn legendre_rule(basis: &HermiteBasis, lo: f64, hi: f64, breaks: &[f64], refine: usize) -> QuadratureRule {
    let half = (2.0 * basis.size as f64).sqrt() + 12.0;
    let a = (lo / basis.scale).max(-half);
    let b = (hi / basis.scale).min(half);
    let width = (1.5 / (2.0 * basis.size as f64).sqrt()).min(0.5) / refine as f64;
    let scaled: Vec<f64> = breaks.iter().map(|x| x / basis.scale).collect();
    composite_legendre(a, b, &scaled, width, 16)
}

/// Galerkin matrix f_nm = ∫ φ_n f φ_m dx.
///
/// Polynomials use an exact Gauss–Hermite rule. Smooth callables use
/// Gauss–Hermite with node doubling until entries stabilise; callables with
/// breakpoints use composite Gauss–Legendre split at the breakpoints.
pub fn multiplication_operator(f: &ScalarFn, basis: &HermiteBasis) -> Result<CMat> {
    let n = basis.size;
    if let Some(deg) = f.degree() {
        let rule = gauss_hermite((2 * n).max(n + deg + 1))?;
        return Ok(complex_gram(&rule, basis, f));
    }
    if !f.breaks().is_empty() {
        let coarse = complex_gram(&legendre_rule(basis, f64::NEG_INFINITY, f64::INFINITY, f.breaks(), 1), basis, f);
        let fine = complex_gram(&legendre_rule(basis, f64::NEG_INFINITY, f64::INFINITY, f.breaks(), 2), basis, f);
        let delta = max_diff(&coarse, &fine);
        if delta > FAIL_TOL {
            return Err(Error::QuadratureNotConverged { delta });
        }
        return Ok(fine);
    }
    let mut m = 2 * n;
    let mut prev = complex_gram(&*gauss_hermite(m)?, basis, f);
    let mut delta = f64::INFINITY;
    while m <= 16 * n {
        m *= 2;
        let next = complex_gram(&*gauss_hermite(m)?, basis, f);
        delta = max_diff(&prev, &next);
        prev = next;
        if delta < STABLE_TOL {
            return Ok(prev);
        }
    }
    if delta > FAIL_TOL {
        return Err(Error::QuadratureNotConverged { delta });
    }
    Ok(prev)
}

/// Result of projecting a function onto a Hermite basis.
#[derive(Debug, Clone)]
pub struct Projection {
    pub coeffs: CVec,
    /// ∫ |ψ|² dx, computed on a fine composite rule.
    pub norm_sq: f64,
    /// 1 − Σ|c_n|² / ‖ψ‖².
    pub leakage: f64,
}

/// c_n = ∫ φ_n ψ dx.
pub fn project_state(psi: &ScalarFn, basis: &HermiteBasis) -> Result<Projection> {
    let s = basis.scale;
    let n = basis.size;
    let project = |rule: &QuadratureRule| -> CVec {
        let (tab, _) = tabulate(rule, n, |_| 1.0);
        let vals: Vec<C64> = rule.nodes.iter().zip(&rule.weights).map(|(&y, &w)| psi.eval(s * y) * w).collect();
        CVec::from_fn(n, |j, _| (0..rule.order()).map(|k| vals[k] * tab[(k, j)]).sum::<C64>() * s.sqrt())
    };
    let coeffs = if let (Some(deg), true) = (psi.degree(), psi.breaks().is_empty()) {
        // polynomial amplitudes are not square integrable, but their
        // projections are still exact with enough nodes
        project(&*gauss_hermite((2 * n).max(n + deg + 1))?)
    } else {
        let coarse = project(&legendre_rule(basis, f64::NEG_INFINITY, f64::INFINITY, psi.breaks(), 1));
        let fine = project(&legendre_rule(basis, f64::NEG_INFINITY, f64::INFINITY, psi.breaks(), 2));
        let delta = (&coarse - &fine).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if delta > FAIL_TOL {
            return Err(Error::QuadratureNotConverged { delta });
        }
        fine
    };
    let norm_rule = legendre_rule(basis, f64::NEG_INFINITY, f64::INFINITY, psi.breaks(), 2);
    let norm_sq = norm_rule.integrate(|y| psi.eval(s * y).norm_sqr()) * s;
    let captured = coeffs.norm_squared();
    let leakage = if norm_sq > 0.0 { 1.0 - captured / norm_sq } else { 0.0 };
    Ok(Projection { coeffs, norm_sq, leakage })
}

/// Direction of the Hermite–Fourier representation change.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FourierDirection {
    /// c_n → iⁿ c_n
    Forward,
    /// c_n → (−i)ⁿ c_n
    Inverse,
}

/// Change representation η ↔ ξ: Hermite functions are Fourier eigenfunctions,
/// so the transform is diagonal in the coefficients and maps scale ς to 1/ς.
pub fn fourier_conjugate(coeffs: &CVec, basis: &HermiteBasis, dir: FourierDirection) -> (CVec, HermiteBasis) {
    let phase = |n: usize| -> C64 {
        let k = match dir {
            FourierDirection::Forward => n % 4,
            FourierDirection::Inverse => (4 - n % 4) % 4,
        };
        [re(1.0), c(0.0, 1.0), re(-1.0), c(0.0, -1.0)][k]
    };
    let out = CVec::from_fn(coeffs.len(), |n, _| coeffs[n] * phase(n));
    (out, basis.conjugate())
}

/// Diagonal matrix of the Fourier phases, for transforming operators.
pub fn fourier_phases(n: usize, dir: FourierDirection) -> CVec {
    let ones = CVec::from_element(n, re(1.0));
    let basis = HermiteBasis {
        size: n.max(2),
        scale: 1.0,
    };
    fourier_conjugate(&ones, &basis, dir).0
}

/// Galerkin compression of the indicator of [a, b].
#[derive(Debug, Clone)]
pub struct IntervalProjector {
    pub matrix: CMat,
    /// ‖P² − P‖_F, nonzero under truncation.
    pub idempotency_defect: f64,
    /// Largest entry change when the quadrature is refined.
    pub quadrature_delta: f64,
}

pub fn interval_projection(a: f64, b: f64, basis: &HermiteBasis) -> Result<IntervalProjector> {
    if a >= b || a.is_nan() || b.is_nan() {
        return Err(Error::invalid(format!("interval needs a < b, got [{a}, {b}]")));
    }
    let build = |refine: usize| {
        let rule = legendre_rule(basis, a, b, &[], refine);
        weighted_gram(&rule, basis.size, |_| 1.0).map(re)
    };
    let coarse = build(1);
    let fine = build(2);
    let quadrature_delta = max_diff(&coarse, &fine);
    if quadrature_delta > FAIL_TOL {
        return Err(Error::QuadratureNotConverged { delta: quadrature_delta });
    }
    let matrix = (&fine + fine.adjoint()) * re(0.5);
    let sq = &matrix * &matrix;
    let idempotency_defect = crate::linalg::fro_norm(&(sq - &matrix));
    Ok(IntervalProjector {
        matrix,
        idempotency_defect,
        quadrature_delta,
    })
}

/// Position-localized vector Σ_n φ_n(x₀)|n⟩, normalized.
pub fn localized_vector(basis: &HermiteBasis, x0: f64) -> Result<CVec> {
    let v = CVec::from_iterator(basis.size, basis.eval_all(x0).into_iter().map(re));
    let n = v.norm();
    if n == 0.0 {
        return Err(Error::ZeroProbability);
    }
    Ok(v / re(n))
}

/// Product of primitive factors computed on a padded basis and truncated,
/// which reproduces the exact Galerkin compression of the operator product
/// when the padding covers the total bandwidth of the factors.
pub fn padded_product(basis: &HermiteBasis, pad: usize, build: impl Fn(&HermiteBasis) -> Result<Vec<CMat>>) -> Result<CMat> {
    let big = basis.with_size(basis.size + pad);
    let factors = build(&big)?;
    let n = basis.size;
    let prod = factors
        .into_iter()
        .reduce(|acc, f| acc * f)
        .unwrap_or_else(|| CMat::identity(big.size, big.size));
    Ok(prod.view((0, 0), (n, n)).into_owned())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{fro_norm, I};

    fn basis(n: usize, s: f64) -> HermiteBasis {
        HermiteBasis::new(n, s).unwrap()
    }

    #[test]
    fn ground_state_value() {
        let v = basis_eval(0, &basis(4, 1.0), 0.0).unwrap();
        assert!((v - 0.751_125_544_464_942_5).abs() < 1e-15);
        assert_eq!(basis_eval(1, &basis(4, 2.5), 0.0).unwrap(), 0.0);
        assert!(basis_eval(4, &basis(4, 1.0), 0.0).is_err());
    }

    #[test]
    fn closed_form_matches_recurrence() {
        // φ_3 = (8y³ − 12y) e^{−y²/2} / (π^{1/4} √(3!·2³)) / √ς, y = x/ς
        let b = basis(8, 1.7);
        let x = 0.9;
        let y = x / b.scale();
        let exact =
            (8.0 * y.powi(3) - 12.0 * y) * (-0.5 * y * y).exp() / (std::f64::consts::PI.powf(0.25) * 48f64.sqrt()) / b.scale().sqrt();
        assert!((basis_eval(3, &b, x).unwrap() - exact).abs() < 1e-14);
    }

    #[test]
    fn gram_is_identity() {
        for n in [2, 16, 128, 256] {
            let g = basis(n, 0.7).gram().unwrap();
            let err = (g - DMatrix::<f64>::identity(n, n)).amax();
            assert!(err < 1e-10, "n={n}: {err}");
        }
    }

    #[test]
    fn position_entry_by_quadrature() {
        let b = basis(2, 1.0);
        let x = position_matrix(&b);
        let rule = gauss_hermite(8).unwrap();
        let q = rule.integrate(|y| {
            let v = hermite_functions(y, 2);
            v[0] * y * v[1]
        });
        assert!((x[(0, 1)].re - q).abs() < 1e-14);
        assert!((q - 0.5f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn canonical_commutation_interior() {
        let b = basis(24, 0.3);
        let x = position_matrix(&b);
        let p = momentum_matrix(&b);
        let comm = &x * &p - &p * &x;
        let k = 23;
        let block = comm.view((0, 0), (k, k)).into_owned();
        assert!(fro_norm(&(block - CMat::identity(k, k) * I)) < 1e-10);
    }

    #[test]
    fn scale_covariance() {
        let x1 = position_matrix(&basis(6, 1.0));
        let x2 = position_matrix(&basis(6, 2.0));
        let p1 = momentum_matrix(&basis(6, 1.0));
        let p2 = momentum_matrix(&basis(6, 2.0));
        assert!(fro_norm(&(x2 - x1 * re(2.0))) < 1e-15);
        assert!(fro_norm(&(p2 - p1 * re(0.5))) < 1e-15);
    }

    #[test]
    fn multiplication_by_polynomials() {
        let b = basis(16, 1.0);
        let one = multiplication_operator(&ScalarFn::one(), &b).unwrap();
        assert!(fro_norm(&(one - CMat::identity(16, 16))) < 1e-12);
        let x = multiplication_operator(&ScalarFn::linear(), &b).unwrap();
        assert!(fro_norm(&(x - position_matrix(&b))) < 1e-12);
        let x2 = multiplication_operator(&ScalarFn::monomial(1.0, 2), &b).unwrap();
        assert!((x2[(0, 0)].re - 0.5).abs() < 1e-14);
    }

    #[test]
    fn smooth_callable_matches_polynomial() {
        let b = basis(12, 0.6);
        let p = multiplication_operator(&ScalarFn::real_poly(&[0.3, -1.0, 0.25]), &b).unwrap();
        let f = multiplication_operator(&ScalarFn::from_real_fn(|x| 0.3 - x + 0.25 * x * x), &b).unwrap();
        assert!(max_diff(&p, &f) < 1e-11);
    }

    #[test]
    fn project_basis_function() {
        let b = basis(8, 1.3);
        let phi2 = ScalarFn::from_real_fn(move |x| basis_eval(2, &b, x).unwrap());
        let proj = project_state(&phi2, &b).unwrap();
        let mut e2 = CVec::zeros(8);
        e2[2] = re(1.0);
        assert!((proj.coeffs - e2).norm() < 1e-12);
        assert!(proj.leakage.abs() < 1e-12);
    }

    #[test]
    fn fp_initial_condition_leakage() {
        // Reference leakages from an independent trapezoid projection on [−40, 40].
        let amp = gaussian_amplitude(0.8, 0.3);
        let wide = project_state(&amp, &basis(64, 2.0)).unwrap();
        assert!((wide.leakage - 6.598_857_59e-4).abs() < 1e-9, "leakage {}", wide.leakage);
        let narrow = project_state(&amp, &basis(32, 0.5)).unwrap();
        assert!(narrow.leakage < 1e-6, "leakage {}", narrow.leakage);
        assert!((wide.norm_sq - 1.0).abs() < 1e-12);
    }

    fn gaussian_amplitude(mu: f64, sigma: f64) -> ScalarFn {
        let norm = (2.0 * std::f64::consts::PI * sigma * sigma).powf(-0.25);
        ScalarFn::from_real_fn(move |x| norm * (-(x - mu).powi(2) / (4.0 * sigma * sigma)).exp())
    }

    #[test]
    fn fourier_phases_cycle() {
        let b = basis(6, 2.0);
        let v = CVec::from_fn(6, |n, _| c(n as f64 + 0.5, 1.0 - n as f64));
        let (f1, b1) = fourier_conjugate(&v, &b, FourierDirection::Forward);
        assert_eq!(b1.scale(), 0.5);
        assert_eq!(f1[1], v[1] * I);
        let (back, b2) = fourier_conjugate(&f1, &b1, FourierDirection::Inverse);
        assert_eq!(b2, b);
        assert!((back - &v).norm() < 1e-15);
        let mut w = v.clone();
        for _ in 0..4 {
            w = fourier_conjugate(&w, &b, FourierDirection::Forward).0;
        }
        assert_eq!(w, v);
    }

    #[test]
    fn interval_projection_partition() {
        let b = basis(32, 1.0);
        let full = interval_projection(f64::NEG_INFINITY, f64::INFINITY, &b).unwrap();
        assert!(fro_norm(&(&full.matrix - CMat::identity(32, 32))) < 1e-10);
        let left = interval_projection(f64::NEG_INFINITY, 0.0, &b).unwrap();
        let right = interval_projection(0.0, f64::INFINITY, &b).unwrap();
        assert!(fro_norm(&(left.matrix + right.matrix - CMat::identity(32, 32))) < 1e-10);
    }

    #[test]
    fn padded_product_is_exact_compression() {
        // ⟨m|x̂²|n⟩ on the padded basis equals the quadrature of x² for every entry.
        let b = basis(8, 1.0);
        let prod = padded_product(&b, 2, |big| Ok(vec![position_matrix(big), position_matrix(big)])).unwrap();
        let direct = multiplication_operator(&ScalarFn::monomial(1.0, 2), &b).unwrap();
        assert!(fro_norm(&(prod - direct)) < 1e-12);
    }
}
