//! Builders turning PDE and ODE families into operator expressions.

use crate::error::{Error, Result};
use crate::galerkin::HermiteBasis;
use crate::linalg::{c, re, CMat, CVec, C64, I};
use crate::operator::{split_generator, Bases, Generator, ModeBasis, ModeKind, OperatorExpr, PrimitiveOp};
use crate::scalar::ScalarFn;

/// Name of the qubit mode added by the dilations.
pub const QUBIT: &str = "q";

/// Σ_m c_m(t)·Π_j f_{m,j}(x_j), with axes indexing an externally supplied mode list.
#[derive(Debug, Clone, Default)]
pub struct SpaceTimeFn {
    terms: Vec<(ScalarFn, Vec<(usize, ScalarFn)>)>,
}

impl SpaceTimeFn {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(v: C64) -> Self {
        Self::time(ScalarFn::constant(v))
    }

    pub fn time(f: ScalarFn) -> Self {
        Self { terms: vec![(f, vec![])] }
    }

    /// c(t)·f(x_axis).
    pub fn separable(time: ScalarFn, axis: usize, space: ScalarFn) -> Self {
        Self {
            terms: vec![(time, vec![(axis, space)])],
        }
    }

    pub fn product(time: ScalarFn, factors: Vec<(usize, ScalarFn)>) -> Self {
        Self {
            terms: vec![(time, factors)],
        }
    }

    pub fn plus(mut self, other: SpaceTimeFn) -> Self {
        self.terms.extend(other.terms);
        self
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|(t, _)| t.is_zero())
    }

    pub fn eval(&self, t: f64, x: &[f64]) -> C64 {
        self.terms
            .iter()
            .map(|(c, fs)| c.eval(t) * fs.iter().map(|(j, f)| f.eval(x[*j])).product::<C64>())
            .sum()
    }

    fn max_axis(&self) -> Option<usize> {
        self.terms.iter().flat_map(|(_, fs)| fs.iter().map(|(j, _)| *j)).max()
    }

    fn is_polynomial(&self) -> bool {
        self.terms.iter().all(|(_, fs)| fs.iter().all(|(_, f)| f.coefficients().is_some()))
    }

    /// Terms as (time coefficient, multiplication factors on the named modes).
    fn factors(&self, names: &[String]) -> Result<Vec<(ScalarFn, Vec<PrimitiveOp>)>> {
        self.terms
            .iter()
            .map(|(c, fs)| {
                let ops = fs
                    .iter()
                    .map(|(j, f)| {
                        names
                            .get(*j)
                            .map(|n| PrimitiveOp::mult(f.clone(), n.as_str()))
                            .ok_or_else(|| Error::invalid(format!("axis {j} out of range for {} modes", names.len())))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok((c.clone(), ops))
            })
            .collect()
    }
}

/// a(t, x)·∂^k/∂x_j^k for each listed (axis, order).
#[derive(Debug, Clone)]
pub struct PdeTerm {
    pub derivatives: Vec<(usize, u32)>,
    pub coeff: SpaceTimeFn,
}

impl PdeTerm {
    pub fn new(order: u32, axis: usize, coeff: SpaceTimeFn) -> Self {
        Self {
            derivatives: vec![(axis, order)],
            coeff,
        }
    }
}

/// ∂u/∂t + Σ a_{k,j} ∂^k u/∂x_j^k + b u = f.
#[derive(Debug, Clone)]
pub struct LinearPdeSpec {
    pub dim: usize,
    pub terms: Vec<PdeTerm>,
    pub potential: SpaceTimeFn,
    /// f = e^{g₁(t)} g₂(x) as (g₁, g₂ sampled as a state vector).
    pub source: Option<(ScalarFn, CVec)>,
}

/// Spatial mode names x1..xD.
pub fn space_modes(d: usize) -> Vec<String> {
    (1..=d).map(|j| format!("x{j}")).collect()
}

/// A = −Σ a_{k,j} i^{k+1} p̂_j^k − i b, multiplier left of the momentum power.
pub fn linear_pde_generator(spec: &LinearPdeSpec) -> Result<OperatorExpr> {
    if spec.dim == 0 {
        return Err(Error::invalid("PDE dimension must be at least 1"));
    }
    let names = space_modes(spec.dim);
    let mut expr = OperatorExpr::new(names.iter().map(|n| (n.clone(), ModeKind::Continuous)).collect());
    for term in &spec.terms {
        let (axis, k) = match term.derivatives.as_slice() {
            [single] => *single,
            [] => return Err(Error::invalid("PDE term without a derivative; use the potential")),
            _ => return Err(Error::Unsupported("mixed spatial derivatives".into())),
        };
        if axis >= spec.dim || term.coeff.max_axis().is_some_and(|j| j >= spec.dim) {
            return Err(Error::invalid(format!("axis out of range for D = {}", spec.dim)));
        }
        let phase = -I.powu(k + 1);
        for (coeff, mut ops) in term.coeff.factors(&names)? {
            ops.push(PrimitiveOp::momentum_pow(k, names[axis].as_str()));
            expr.push(coeff.scale(phase), ops)?;
        }
    }
    for (coeff, ops) in spec.potential.factors(&names)? {
        expr.push(coeff.scale(-I), ops)?;
    }
    Ok(expr)
}

/// Sampled violations of sign(a_{2k,j}) = (−1)^k.
pub fn stability_warnings(spec: &LinearPdeSpec, times: &[f64], points: &[Vec<f64>]) -> Vec<String> {
    let mut out = Vec::new();
    for term in &spec.terms {
        let [(axis, k)] = term.derivatives.as_slice() else { continue };
        if k % 2 != 0 {
            continue;
        }
        let want = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
        let bad = times.iter().any(|&t| {
            points.iter().any(|x| {
                let v = term.coeff.eval(t, x).re;
                v != 0.0 && v.signum() != want
            })
        });
        if bad {
            out.push(format!("coefficient of ∂^{k}/∂x{}^{k} has the unstable sign somewhere", axis + 1));
        }
    }
    out
}

/// A₁ = −g x̂p̂ + ig/2, A₂ = −g/2 + βp̂² as an expression on mode `x`.
pub fn fokker_planck_expr(g: &ScalarFn, beta: &ScalarFn) -> Result<OperatorExpr> {
    OperatorExpr::on_mode("x")
        .with(g.scale(I), vec![])?
        .with(g.scale(re(-1.0)), vec![PrimitiveOp::position("x"), PrimitiveOp::momentum("x")])?
        .with(beta.scale(-I), vec![PrimitiveOp::momentum_pow(2, "x")])
}

/// Fokker–Planck generator ∂_t q = g(t)∇·(xq) + β(t)Δq on a Hermite basis.
pub fn fokker_planck_generator(g: &ScalarFn, beta: &ScalarFn, basis: HermiteBasis) -> Result<Generator> {
    if [0.0, 0.25, 0.5, 1.0, 2.0].iter().any(|&t| beta.eval_re(t) < 0.0) {
        return Err(Error::invalid("diffusion β(t) must be nonnegative"));
    }
    let bases = Bases::from([("x".to_string(), ModeBasis::Hermite(basis))]);
    split_generator(&fokker_planck_expr(g, beta)?, &bases)
}

fn qubit(m: [[C64; 2]; 2]) -> CMat {
    CMat::from_row_slice(2, 2, &[m[0][0], m[0][1], m[1][0], m[1][1]])
}

fn ket_bra(a: usize, b: usize) -> CMat {
    let mut m = CMat::zeros(2, 2);
    m[(a, b)] = re(1.0);
    m
}

/// B = A⊗|0⟩⟨0| + iI⊗|0⟩⟨1| + i ġ₁ I⊗|1⟩⟨1| with the qubit last, and
/// y₀ = u₀⊗|0⟩ + e^{g₁(0)} g₂⊗|1⟩.
pub fn inhomogeneous_dilation(a: &OperatorExpr, g1: &ScalarFn, u0: &CVec, g2: &CVec) -> Result<(OperatorExpr, CVec)> {
    if u0.len() != g2.len() {
        return Err(Error::DimensionMismatch(format!(
            "u₀ of length {} vs source of length {}",
            u0.len(),
            g2.len()
        )));
    }
    let modes = a.clone().with_mode(QUBIT, ModeKind::Finite(2));
    let mut b = modes.clone().times_op(PrimitiveOp::matrix(ket_bra(0, 0), QUBIT))?;
    b.push(ScalarFn::constant(I), vec![PrimitiveOp::matrix(ket_bra(0, 1), QUBIT)])?;
    b.push(g1.derivative().scale(I), vec![PrimitiveOp::matrix(ket_bra(1, 1), QUBIT)])?;
    let f0 = g2 * g1.eval(0.0).exp();
    let y0 = u0.kronecker(&CVec::from_vec(vec![re(1.0), re(0.0)])) + f0.kronecker(&CVec::from_vec(vec![re(0.0), re(1.0)]));
    Ok((b, y0))
}

/// Damping Γ(t) and stiffness A(t) of ü + Γu̇ + iAu = 0.
#[derive(Debug, Clone)]
pub struct SecondOrderSpec {
    pub damping: OperatorExpr,
    pub stiffness: OperatorExpr,
}

/// V = iI⊗|0⟩⟨1| + A⊗|1⟩⟨0| − iΓ⊗|1⟩⟨1| acting on u⊗|0⟩ + u̇⊗|1⟩.
pub fn second_order_dilation(spec: &SecondOrderSpec) -> Result<OperatorExpr> {
    let base = spec.stiffness.plus(&spec.damping)?;
    let modes = OperatorExpr::new(base.modes().to_vec()).with_mode(QUBIT, ModeKind::Finite(2));
    let upper = modes
        .clone()
        .with(ScalarFn::constant(I), vec![PrimitiveOp::matrix(ket_bra(0, 1), QUBIT)])?;
    let lower = spec
        .stiffness
        .clone()
        .with_mode(QUBIT, ModeKind::Finite(2))
        .times_op(PrimitiveOp::matrix(ket_bra(1, 0), QUBIT))?;
    let damp = spec
        .damping
        .scaled(-I)
        .with_mode(QUBIT, ModeKind::Finite(2))
        .times_op(PrimitiveOp::matrix(ket_bra(1, 1), QUBIT))?;
    let v = upper.plus(&lower)?.plus(&damp)?;
    let mut order: Vec<String> = base.modes().iter().map(|(n, _)| n.clone()).collect();
    order.push(QUBIT.to_string());
    v.reorder_modes(&order.iter().map(String::as_str).collect::<Vec<_>>())
}

/// Level-set mode names q1..qJ.
pub fn levelset_modes(j: usize) -> Vec<String> {
    (1..=j).map(|n| format!("q{n}")).collect()
}

/// A = Σ_n Q̂_n F_n(t, q̂) for q̇_n = F_n(t, q); F_n must be polynomial in q.
pub fn nonlinear_ode_levelset(f: &[SpaceTimeFn], j: usize) -> Result<OperatorExpr> {
    if j == 0 || f.len() != j {
        return Err(Error::invalid(format!("need J >= 1 right-hand sides, got {} for J = {j}", f.len())));
    }
    if f.iter().any(|fn_| !fn_.is_polynomial()) {
        return Err(Error::Unsupported("non-polynomial right-hand side with a Hermite basis".into()));
    }
    let names = levelset_modes(j);
    let mut expr = OperatorExpr::new(names.iter().map(|n| (n.clone(), ModeKind::Continuous)).collect());
    for (n, fn_) in f.iter().enumerate() {
        for (coeff, ops) in fn_.factors(&names)? {
            let mut factors = vec![PrimitiveOp::momentum(names[n].as_str())];
            factors.extend(ops);
            expr.push(coeff, factors)?;
        }
    }
    Ok(expr)
}

/// Modes x1..xD followed by `chi`.
pub fn hyperbolic_modes(d: usize) -> Vec<String> {
    let mut m = space_modes(d);
    m.push("chi".into());
    m
}

/// Σ_j F_j(t, x̂, χ̂) p̂_j + Q(t, x̂, χ̂) ζ̂ with ζ̂ the momentum of χ.
/// Axes in `flux` and `source` index [`hyperbolic_modes`].
pub fn hyperbolic_levelset_generator(flux: &[SpaceTimeFn], source: &SpaceTimeFn, d: usize) -> Result<OperatorExpr> {
    if d == 0 || flux.len() != d {
        return Err(Error::invalid(format!(
            "need D >= 1 flux components, got {} for D = {d}",
            flux.len()
        )));
    }
    let names = hyperbolic_modes(d);
    let mut expr = OperatorExpr::new(names.iter().map(|n| (n.clone(), ModeKind::Continuous)).collect());
    for (j, fj) in flux.iter().enumerate() {
        for (coeff, mut ops) in fj.factors(&names)? {
            ops.push(PrimitiveOp::momentum(names[j].as_str()));
            expr.push(coeff, ops)?;
        }
    }
    for (coeff, mut ops) in source.factors(&names)? {
        ops.push(PrimitiveOp::momentum("chi"));
        expr.push(coeff, ops)?;
    }
    Ok(expr)
}

/// Modes x1..xD followed by chi1..chiD.
pub fn hamilton_jacobi_modes(d: usize) -> Vec<String> {
    let mut m = space_modes(d);
    m.extend((1..=d).map(|j| format!("chi{j}")));
    m
}

/// iΣ_j(ζ̂_j H p̂_j − p̂_j H ζ̂_j) for a Hamiltonian H(t, x̂, χ̂) given on
/// (a subset of) [`hamilton_jacobi_modes`].
pub fn hamilton_jacobi_generator(h: &OperatorExpr, d: usize) -> Result<OperatorExpr> {
    if d == 0 {
        return Err(Error::invalid("Hamilton–Jacobi needs D >= 1"));
    }
    let names = hamilton_jacobi_modes(d);
    let blank = OperatorExpr::new(names.iter().map(|n| (n.clone(), ModeKind::Continuous)).collect());
    let mut total = blank.clone();
    for j in 0..d {
        let (x, chi) = (names[j].as_str(), names[d + j].as_str());
        let fwd = blank
            .clone()
            .with(ScalarFn::constant(I), vec![PrimitiveOp::momentum(chi)])?
            .times(h)?
            .times_op(PrimitiveOp::momentum(x))?;
        let back = blank
            .clone()
            .with(ScalarFn::constant(-I), vec![PrimitiveOp::momentum(x)])?
            .times(h)?
            .times_op(PrimitiveOp::momentum(chi))?;
        total = total.plus(&fwd)?.plus(&back)?;
    }
    total.reorder_modes(&names.iter().map(String::as_str).collect::<Vec<_>>())
}

/// Level-set families and the dimensions at which they can be simulated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LevelSetKind {
    NonlinearOde,
    Hyperbolic,
    HamiltonJacobi,
}

pub fn check_simulable(kind: LevelSetKind, d: usize) -> Result<()> {
    match kind {
        LevelSetKind::NonlinearOde if d <= 2 => Ok(()),
        LevelSetKind::Hyperbolic if d == 1 => Ok(()),
        _ => Err(Error::Unsupported(format!("simulating {kind:?} at dimension {d}"))),
    }
}

/// Pauli helper used by tests and configs: (x, y, z) coefficients → 2×2 matrix.
pub fn pauli(x: f64, y: f64, z: f64) -> CMat {
    qubit([[re(z), c(x, -y)], [c(x, y), re(-z)]])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{fro_norm, hermitian_defect};
    use crate::operator::materialize;

    fn hermite(names: &[String], n: usize, s: f64) -> Bases {
        names
            .iter()
            .map(|m| (m.clone(), ModeBasis::Hermite(HermiteBasis::new(n, s).unwrap())))
            .collect()
    }

    #[test]
    fn convection_generator() {
        let spec = LinearPdeSpec {
            dim: 1,
            terms: vec![PdeTerm::new(1, 0, SpaceTimeFn::time(ScalarFn::monomial(2.0, 1)))],
            potential: SpaceTimeFn::zero(),
            source: None,
        };
        let expr = linear_pde_generator(&spec).unwrap();
        let bases = hermite(&space_modes(1), 12, 1.0);
        let a = materialize(&expr, &bases, 0.5).unwrap();
        let p = crate::galerkin::momentum_matrix(&HermiteBasis::new(12, 1.0).unwrap());
        // ∂_t u + 2t ∂_x u = 0 ⇒ A = 2t p̂
        assert!(fro_norm(&(a - p * re(1.0))) < 1e-12);
    }

    #[test]
    fn heat_split() {
        let d1 = 0.7;
        let spec = LinearPdeSpec {
            dim: 1,
            terms: vec![PdeTerm::new(2, 0, SpaceTimeFn::constant(re(-d1)))],
            potential: SpaceTimeFn::zero(),
            source: None,
        };
        let bases = hermite(&space_modes(1), 12, 1.0);
        let a = materialize(&linear_pde_generator(&spec).unwrap(), &bases, 0.0).unwrap();
        let (a1, a2) = crate::operator::hermitian_split(&a).unwrap();
        let p = crate::galerkin::momentum_matrix(&HermiteBasis::new(12, 1.0).unwrap());
        assert!(fro_norm(&a1) < 1e-12);
        // interior block (the truncated p̂² differs in the last row/column)
        let diff = a2 - &p * &p * re(d1);
        assert!(fro_norm(&diff.view((0, 0), (11, 11)).into_owned()) < 1e-12);
        assert!(stability_warnings(&spec, &[0.0], &[vec![0.0]]).is_empty());
    }

    #[test]
    fn pure_gain_is_anti_dissipative() {
        let spec = LinearPdeSpec {
            dim: 1,
            terms: vec![],
            // u̇ = 0.4u
            potential: SpaceTimeFn::constant(re(-0.4)),
            source: None,
        };
        let expr = linear_pde_generator(&spec).unwrap();
        let bases = hermite(&space_modes(1), 6, 1.0);
        let (_, a2) = crate::operator::hermitian_split(&materialize(&expr, &bases, 0.0).unwrap()).unwrap();
        assert!(fro_norm(&(a2 + CMat::identity(6, 6) * re(0.4))) < 1e-12);
    }

    #[test]
    fn mixed_derivatives_rejected() {
        let spec = LinearPdeSpec {
            dim: 2,
            terms: vec![PdeTerm {
                derivatives: vec![(0, 1), (1, 1)],
                coeff: SpaceTimeFn::constant(re(1.0)),
            }],
            potential: SpaceTimeFn::zero(),
            source: None,
        };
        assert!(matches!(linear_pde_generator(&spec), Err(Error::Unsupported(_))));
    }

    #[test]
    fn fokker_planck_split_case3() {
        let basis = HermiteBasis::new(16, 0.5).unwrap();
        let gen = fokker_planck_generator(&ScalarFn::monomial(0.5, 3), &ScalarFn::monomial(0.3, 1), basis).unwrap();
        let (a1, a2) = gen.split(1.0);
        let x = crate::galerkin::position_matrix(&basis);
        let p = crate::galerkin::momentum_matrix(&basis);
        let id = CMat::identity(16, 16);
        let want1 = -(&x * &p) * re(0.5) + &id * c(0.0, 0.25);
        let want2 = -&id * re(0.25) + &p * &p * re(0.3);
        let inner = |m: CMat| fro_norm(&m.view((0, 0), (14, 14)).into_owned());
        assert!(inner(a1 - want1) < 1e-12);
        assert!(inner(a2 - want2) < 1e-12);
    }

    #[test]
    fn inhomogeneous_blocks() {
        let a = OperatorExpr::new(vec![("s".into(), ModeKind::Finite(2))])
            .with(ScalarFn::one(), vec![PrimitiveOp::matrix(pauli(0.0, 0.0, 1.0), "s")])
            .unwrap();
        let g1 = ScalarFn::poly(vec![re(0.0), c(0.0, 2.0)]);
        let u0 = CVec::from_vec(vec![re(1.0), re(0.0)]);
        let g2 = CVec::from_vec(vec![re(0.0), re(0.5)]);
        let (b, y0) = inhomogeneous_dilation(&a, &g1, &u0, &g2).unwrap();
        let bases = Bases::from([("s".to_string(), ModeBasis::Finite(2)), (QUBIT.to_string(), ModeBasis::Finite(2))]);
        let m = materialize(&b, &bases, 0.3).unwrap();
        assert_eq!(y0.len(), 4);
        assert_eq!(m[(0, 0)], re(1.0));
        assert_eq!(m[(0, 1)], I);
        // i·ġ₁ = i·2i = −2 on the |1⟩⟨1| block
        assert_eq!(m[(1, 1)], re(-2.0));
        // ġ₁ purely imaginary ⇒ B₂ has no |1⟩⟨1| part
        let (_, b2) = crate::operator::hermitian_split(&m).unwrap();
        assert!(b2[(1, 1)].norm() < 1e-15 && b2[(3, 3)].norm() < 1e-15);
    }

    #[test]
    fn hamilton_jacobi_is_hermitian() {
        let names = hamilton_jacobi_modes(1);
        let h = OperatorExpr::new(vec![("chi1".into(), ModeKind::Continuous)])
            .with(ScalarFn::constant(re(0.5)), vec![PrimitiveOp::position_pow(2, "chi1")])
            .unwrap();
        let expr = hamilton_jacobi_generator(&h, 1).unwrap();
        let m = materialize(&expr, &hermite(&names, 16, 1.0), 0.0).unwrap();
        assert!(hermitian_defect(&m) < 1e-10);
    }

    #[test]
    fn simulation_limits() {
        assert!(check_simulable(LevelSetKind::Hyperbolic, 1).is_ok());
        assert!(check_simulable(LevelSetKind::Hyperbolic, 2).is_err());
        assert!(check_simulable(LevelSetKind::HamiltonJacobi, 1).is_err());
    }
}
