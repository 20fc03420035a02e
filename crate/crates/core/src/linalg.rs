//! Dense complex linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub const I: C64 = C64::new(0.0, 1.0);

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[inline]
pub fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

/// Kronecker product of a list of factors, left to right.
pub fn kron_all<'a>(factors: impl IntoIterator<Item = &'a CMat>) -> CMat {
    let mut out = CMat::from_element(1, 1, re(1.0));
    for f in factors {
        out = out.kronecker(f);
    }
    out
}

pub fn fro_norm(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// ‖M − M†‖_F / ‖M‖_F (0 for the zero matrix).
pub fn hermitian_defect(m: &CMat) -> f64 {
    let scale = fro_norm(m);
    if scale == 0.0 {
        return 0.0;
    }
    fro_norm(&(m - m.adjoint())) / scale
}

pub fn ensure_square(m: &CMat) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::NonSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    Ok(m.nrows())
}

/// Eigen-decomposition of a Hermitian matrix (the input is symmetrized first).
pub fn hermitian_eig(m: &CMat) -> (DVector<f64>, CMat) {
    let sym = (m + m.adjoint()) * re(0.5);
    let eig = SymmetricEigen::new(sym);
    (eig.eigenvalues, eig.eigenvectors)
}

/// f(M) for Hermitian M via its eigen-decomposition.
pub fn hermitian_fn(m: &CMat, f: impl Fn(f64) -> C64) -> CMat {
    let (vals, vecs) = hermitian_eig(m);
    let mut scaled = vecs.clone();
    for (j, &v) in vals.iter().enumerate() {
        let fv = f(v);
        for z in scaled.column_mut(j).iter_mut() {
            *z *= fv;
        }
    }
    scaled * vecs.adjoint()
}

/// e^{−iHt} for Hermitian H.
pub fn expm_hermitian(h: &CMat, t: f64) -> CMat {
    hermitian_fn(h, |e| C64::from_polar(1.0, -e * t))
}

/// General matrix exponential e^{M}.
pub fn expm(m: &CMat) -> CMat {
    m.clone().exp()
}

pub fn normalize(v: &CVec) -> CVec {
    let n = v.norm();
    if n == 0.0 {
        v.clone()
    } else {
        v / re(n)
    }
}

pub fn outer(a: &CVec, b: &CVec) -> CMat {
    a * b.adjoint()
}

/// Tr(ρ O).
pub fn expectation(rho: &CMat, op: &CMat) -> C64 {
    let n = rho.nrows();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            acc += rho[(i, j)] * op[(j, i)];
        }
    }
    acc
}

pub fn trace(m: &CMat) -> C64 {
    m.diagonal().iter().sum()
}

/// Pauli matrices.
pub fn sigma_x() -> CMat {
    CMat::from_row_slice(2, 2, &[re(0.0), re(1.0), re(1.0), re(0.0)])
}

pub fn sigma_y() -> CMat {
    CMat::from_row_slice(2, 2, &[re(0.0), -I, I, re(0.0)])
}

pub fn sigma_z() -> CMat {
    CMat::from_row_slice(2, 2, &[re(1.0), re(0.0), re(0.0), re(-1.0)])
}

/// Partial trace over the trailing factor of a pure state on (outer ⊗ inner).
pub fn reduce_trailing(psi: &CVec, inner: usize) -> CMat {
    let outer = psi.len() / inner;
    let view = CMat::from_fn(outer, inner, |a, c| psi[a * inner + c]);
    &view * view.adjoint()
}

/// Partial trace over the leading factor of a density on (outer ⊗ inner),
/// weighted by an operator `w` on the outer factor: Σ_ab w_ba ρ[(a,·),(b,·)].
pub fn reduce_leading_weighted(rho: &CMat, outer: usize, w: &CMat) -> CMat {
    let inner = rho.nrows() / outer;
    let mut out = CMat::zeros(inner, inner);
    for a in 0..outer {
        for b in 0..outer {
            let wba = w[(b, a)];
            if wba == C64::new(0.0, 0.0) {
                continue;
            }
            let block = rho.view((a * inner, b * inner), (inner, inner));
            out += block * wba;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expm_hermitian_matches_pade() {
        let h = CMat::from_row_slice(2, 2, &[re(0.3), c(0.1, -0.2), c(0.1, 0.2), re(-0.7)]);
        let a = expm_hermitian(&h, 1.3);
        let b = expm(&(h * c(0.0, -1.3)));
        assert!(fro_norm(&(a - b)) < 1e-12);
    }

    #[test]
    fn reduce_trailing_of_product_state() {
        let a = CVec::from_vec(vec![re(0.6), c(0.0, 0.8)]);
        let b = normalize(&CVec::from_vec(vec![re(1.0), re(2.0), re(-1.0)]));
        let psi = a.kronecker(&b);
        let rho = reduce_trailing(&psi, 3);
        assert!(fro_norm(&(rho - outer(&a, &a))) < 1e-14);
    }

    #[test]
    fn pauli_algebra() {
        let xy = sigma_x() * sigma_y();
        assert!(fro_norm(&(xy - sigma_z() * I)) < 1e-15);
    }
}
