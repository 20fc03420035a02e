//! Symbolic sums of tensor-product operator terms with time-dependent
//! coefficients, their adjoints, Hermitian splitting and materialization.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::galerkin::{momentum_matrix, multiplication_operator, padded_product, position_matrix, HermiteBasis};
use crate::linalg::{ensure_square, fro_norm, kron_all, re, CMat, C64, I};
use crate::scalar::ScalarFn;

#[derive(Debug, Clone)]
pub enum PrimitiveKind {
    Identity,
    Position,
    Momentum,
    PositionPower(u32),
    MomentumPower(u32),
    MultiplicationBy(ScalarFn),
    FiniteMatrix(CMat),
}

/// A single-mode operator factor.
#[derive(Debug, Clone)]
pub struct PrimitiveOp {
    pub kind: PrimitiveKind,
    pub mode: String,
}

impl PrimitiveOp {
    pub fn new(kind: PrimitiveKind, mode: impl Into<String>) -> Self {
        Self { kind, mode: mode.into() }
    }

    pub fn identity(mode: impl Into<String>) -> Self {
        Self::new(PrimitiveKind::Identity, mode)
    }

    pub fn position(mode: impl Into<String>) -> Self {
        Self::new(PrimitiveKind::Position, mode)
    }

    pub fn momentum(mode: impl Into<String>) -> Self {
        Self::new(PrimitiveKind::Momentum, mode)
    }

    pub fn position_pow(k: u32, mode: impl Into<String>) -> Self {
        Self::new(PrimitiveKind::PositionPower(k), mode)
    }

    pub fn momentum_pow(k: u32, mode: impl Into<String>) -> Self {
        Self::new(PrimitiveKind::MomentumPower(k), mode)
    }

    pub fn mult(f: ScalarFn, mode: impl Into<String>) -> Self {
        Self::new(PrimitiveKind::MultiplicationBy(f), mode)
    }

    pub fn matrix(m: CMat, mode: impl Into<String>) -> Self {
        Self::new(PrimitiveKind::FiniteMatrix(m), mode)
    }

    pub fn adjoint(&self) -> Self {
        let kind = match &self.kind {
            PrimitiveKind::MultiplicationBy(f) => PrimitiveKind::MultiplicationBy(f.conj()),
            PrimitiveKind::FiniteMatrix(m) => PrimitiveKind::FiniteMatrix(m.adjoint()),
            k => k.clone(),
        };
        Self::new(kind, self.mode.clone())
    }

    /// Number of off-diagonals the factor adds in the oscillator basis;
    /// `None` when the Galerkin matrix is dense.
    fn bandwidth(&self) -> Option<usize> {
        match &self.kind {
            PrimitiveKind::Identity | PrimitiveKind::FiniteMatrix(_) => Some(0),
            PrimitiveKind::Position | PrimitiveKind::Momentum => Some(1),
            PrimitiveKind::PositionPower(k) | PrimitiveKind::MomentumPower(k) => Some(*k as usize),
            PrimitiveKind::MultiplicationBy(f) => f.degree(),
        }
    }
}

/// Representation hint for a declared mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModeKind {
    Continuous,
    Finite(usize),
}

/// Realization of a mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModeBasis {
    Hermite(HermiteBasis),
    Finite(usize),
}

impl ModeBasis {
    pub fn dim(&self) -> usize {
        match self {
            ModeBasis::Hermite(b) => b.size(),
            ModeBasis::Finite(n) => *n,
        }
    }
}

pub type Bases = BTreeMap<String, ModeBasis>;

#[derive(Debug, Clone)]
pub struct Term {
    pub coeff: ScalarFn,
    pub factors: Vec<PrimitiveOp>,
}

/// Σ_k c_k(t) · Π factors, over an ordered list of named modes.
///
/// Factors on different modes commute; several factors on the same mode
/// multiply in the order listed.
#[derive(Debug, Clone, Default)]
pub struct OperatorExpr {
    modes: Vec<(String, ModeKind)>,
    terms: Vec<Term>,
}

impl OperatorExpr {
    pub fn new(modes: Vec<(String, ModeKind)>) -> Self {
        Self { modes, terms: vec![] }
    }

    /// Single continuous mode.
    pub fn on_mode(name: &str) -> Self {
        Self::new(vec![(name.to_string(), ModeKind::Continuous)])
    }

    pub fn modes(&self) -> &[(String, ModeKind)] {
        &self.modes
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    fn has_mode(&self, name: &str) -> bool {
        self.modes.iter().any(|(m, _)| m == name)
    }

    pub fn push(&mut self, coeff: ScalarFn, factors: Vec<PrimitiveOp>) -> Result<()> {
        for f in &factors {
            if !self.has_mode(&f.mode) {
                return Err(Error::UnknownMode(f.mode.clone()));
            }
            if let (PrimitiveKind::FiniteMatrix(m), Some((_, ModeKind::Finite(d)))) =
                (&f.kind, self.modes.iter().find(|(n, _)| *n == f.mode))
            {
                if m.nrows() != *d || m.ncols() != *d {
                    return Err(Error::DimensionMismatch(format!(
                        "matrix {}x{} on mode `{}` of dimension {d}",
                        m.nrows(),
                        m.ncols(),
                        f.mode
                    )));
                }
            }
        }
        self.terms.push(Term { coeff, factors });
        Ok(())
    }

    /// Builder form of [`push`](Self::push).
    pub fn with(mut self, coeff: impl Into<ScalarFn>, factors: Vec<PrimitiveOp>) -> Result<Self> {
        self.push(coeff.into(), factors)?;
        Ok(self)
    }

    fn merged_modes(&self, other: &OperatorExpr) -> Result<Vec<(String, ModeKind)>> {
        let mut modes = self.modes.clone();
        for (name, kind) in &other.modes {
            match modes.iter().find(|(m, _)| m == name) {
                Some((_, k)) if k != kind => {
                    return Err(Error::DimensionMismatch(format!(
                        "mode `{name}` declared twice with different kinds"
                    )))
                }
                Some(_) => {}
                None => modes.push((name.clone(), *kind)),
            }
        }
        Ok(modes)
    }

    pub fn plus(&self, other: &OperatorExpr) -> Result<Self> {
        let mut out = Self::new(self.merged_modes(other)?);
        out.terms = self.terms.iter().chain(&other.terms).cloned().collect();
        Ok(out)
    }

    pub fn scaled(&self, s: C64) -> Self {
        self.scaled_by(&ScalarFn::constant(s))
    }

    pub fn scaled_by(&self, f: &ScalarFn) -> Self {
        let mut out = self.clone();
        for t in &mut out.terms {
            t.coeff = t.coeff.mul(f);
        }
        out
    }

    /// Operator product self·other.
    pub fn times(&self, other: &OperatorExpr) -> Result<Self> {
        let mut out = Self::new(self.merged_modes(other)?);
        for a in &self.terms {
            for b in &other.terms {
                let mut factors = a.factors.clone();
                factors.extend(b.factors.iter().cloned());
                out.terms.push(Term {
                    coeff: a.coeff.mul(&b.coeff),
                    factors,
                });
            }
        }
        Ok(out)
    }

    /// Multiply every term on the right by a single factor.
    pub fn times_op(&self, op: PrimitiveOp) -> Result<Self> {
        if !self.has_mode(&op.mode) {
            return Err(Error::UnknownMode(op.mode));
        }
        let mut out = self.clone();
        for t in &mut out.terms {
            t.factors.push(op.clone());
        }
        Ok(out)
    }

    /// Declare an extra mode (appended at the end of the layout).
    pub fn with_mode(mut self, name: &str, kind: ModeKind) -> Self {
        if !self.has_mode(name) {
            self.modes.push((name.to_string(), kind));
        }
        self
    }

    /// Reorder the declared modes (the set must match).
    pub fn reorder_modes(mut self, order: &[&str]) -> Result<Self> {
        if order.len() != self.modes.len() {
            return Err(Error::DimensionMismatch("mode order has wrong length".into()));
        }
        let mut modes = Vec::with_capacity(order.len());
        for name in order {
            let entry = self
                .modes
                .iter()
                .find(|(m, _)| m == name)
                .ok_or_else(|| Error::UnknownMode(name.to_string()))?;
            modes.push(entry.clone());
        }
        self.modes = modes;
        Ok(self)
    }

    /// (c·F₁F₂⋯)† = c̄·⋯F₂†F₁†.
    pub fn adjoint(&self) -> Self {
        let mut out = Self::new(self.modes.clone());
        out.terms = self
            .terms
            .iter()
            .map(|t| Term {
                coeff: t.coeff.conj(),
                factors: t.factors.iter().rev().map(PrimitiveOp::adjoint).collect(),
            })
            .collect();
        out
    }

    /// Materialize every term's operator part once, keeping the
    /// time coefficients symbolic.
    pub fn compile(&self, bases: &Bases) -> Result<CompiledExpr> {
        let mut dims = Vec::with_capacity(self.modes.len());
        for (name, _) in &self.modes {
            let b = bases.get(name).ok_or_else(|| Error::UnknownMode(name.clone()))?;
            dims.push(b.dim());
        }
        let dim = dims.iter().product();
        let mut terms = Vec::with_capacity(self.terms.len());
        for term in &self.terms {
            let mut mats = Vec::with_capacity(self.modes.len());
            for (name, _) in &self.modes {
                let factors: Vec<&PrimitiveOp> = term.factors.iter().filter(|f| &f.mode == name).collect();
                mats.push(mode_product(name, &factors, &bases[name])?);
            }
            terms.push((term.coeff.clone(), kron_all(mats.iter())));
        }
        Ok(CompiledExpr { dim, terms })
    }
}

fn primitive_matrix(op: &PrimitiveOp, basis: &ModeBasis) -> Result<CMat> {
    match (basis, &op.kind) {
        (b, PrimitiveKind::Identity) => Ok(CMat::identity(b.dim(), b.dim())),
        (b, PrimitiveKind::FiniteMatrix(m)) => {
            if m.nrows() != b.dim() || m.ncols() != b.dim() {
                return Err(Error::DimensionMismatch(format!(
                    "matrix {}x{} on mode `{}` of dimension {}",
                    m.nrows(),
                    m.ncols(),
                    op.mode,
                    b.dim()
                )));
            }
            Ok(m.clone())
        }
        (ModeBasis::Hermite(h), PrimitiveKind::Position) => Ok(position_matrix(h)),
        (ModeBasis::Hermite(h), PrimitiveKind::Momentum) => Ok(momentum_matrix(h)),
        (ModeBasis::Hermite(h), PrimitiveKind::PositionPower(k)) => Ok(power(&position_matrix(h), *k)),
        (ModeBasis::Hermite(h), PrimitiveKind::MomentumPower(k)) => Ok(power(&momentum_matrix(h), *k)),
        (ModeBasis::Hermite(h), PrimitiveKind::MultiplicationBy(f)) => multiplication_operator(f, h),
        (ModeBasis::Finite(_), k) => Err(Error::Unsupported(format!(
            "{k:?} on finite mode `{}` (needs a continuous basis)",
            op.mode
        ))),
    }
}

fn power(m: &CMat, k: u32) -> CMat {
    (0..k).fold(CMat::identity(m.nrows(), m.ncols()), |acc, _| acc * m)
}

/// Ordered product of the factors acting on one mode.
fn mode_product(name: &str, factors: &[&PrimitiveOp], basis: &ModeBasis) -> Result<CMat> {
    let n = basis.dim();
    match factors {
        [] => Ok(CMat::identity(n, n)),
        [single] if !matches!(single.kind, PrimitiveKind::PositionPower(_) | PrimitiveKind::MomentumPower(_)) => {
            primitive_matrix(single, basis)
        }
        _ => match basis {
            ModeBasis::Finite(_) => factors
                .iter()
                .try_fold(CMat::identity(n, n), |acc, f| Ok(acc * primitive_matrix(f, basis)?)),
            ModeBasis::Hermite(h) => {
                if factors.iter().any(|f| matches!(f.kind, PrimitiveKind::FiniteMatrix(_))) {
                    return Err(Error::Unsupported(format!(
                        "finite matrix multiplied with continuous factors on mode `{name}`"
                    )));
                }
                // Dense factors (non-polynomial multipliers) count as zero bandwidth; the
                // compression is then exact only up to their own truncation.
                let pad: usize = factors.iter().map(|f| f.bandwidth().unwrap_or(0)).sum();
                padded_product(h, pad, |big| {
                    factors.iter().map(|f| primitive_matrix(f, &ModeBasis::Hermite(*big))).collect()
                })
            }
        },
    }
}

/// A(t) = Σ_k λ_k(t) M_k with every M_k materialized.
#[derive(Debug, Clone)]
pub struct CompiledExpr {
    pub dim: usize,
    pub terms: Vec<(ScalarFn, CMat)>,
}

impl CompiledExpr {
    pub fn eval(&self, t: f64) -> CMat {
        let mut out = CMat::zeros(self.dim, self.dim);
        for (c, m) in &self.terms {
            out += m * c.eval(t);
        }
        out
    }
}

/// Materialize an expression at time t.
pub fn materialize(expr: &OperatorExpr, bases: &Bases, t: f64) -> Result<CMat> {
    Ok(expr.compile(bases)?.eval(t))
}

/// A = A₁ − iA₂ with A₁ = (A+A†)/2, A₂ = i(A−A†)/2.
pub fn hermitian_split(a: &CMat) -> Result<(CMat, CMat)> {
    ensure_square(a)?;
    let ad = a.adjoint();
    let a1 = (a + &ad) * re(0.5);
    let a2 = (a - &ad) * (I * 0.5);
    Ok((a1, a2))
}

type MatrixFn = Arc<dyn Fn(f64) -> CMat + Send + Sync>;

#[derive(Clone)]
enum GenRepr {
    Separable(Vec<(ScalarFn, CMat)>),
    Pointwise(MatrixFn),
}

/// The Hermitian split pair of a generator A(t), computed on demand.
#[derive(Clone)]
pub struct Generator {
    dim: usize,
    repr: GenRepr,
    source: Option<OperatorExpr>,
}

impl fmt::Debug for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.repr {
            GenRepr::Separable(t) => format!("separable({} terms)", t.len()),
            GenRepr::Pointwise(_) => "pointwise".to_string(),
        };
        f.debug_struct("Generator").field("dim", &self.dim).field("repr", &kind).finish()
    }
}

impl Generator {
    /// A(t) = Σ_k λ_k(t) M_k.
    pub fn separable(terms: Vec<(ScalarFn, CMat)>) -> Result<Self> {
        let dim = terms
            .first()
            .map(|(_, m)| m.nrows())
            .ok_or_else(|| Error::invalid("empty generator"))?;
        for (_, m) in &terms {
            if m.nrows() != dim || m.ncols() != dim {
                return Err(Error::DimensionMismatch(format!(
                    "term {}x{} in generator of dim {dim}",
                    m.nrows(),
                    m.ncols()
                )));
            }
        }
        Ok(Self {
            dim,
            repr: GenRepr::Separable(terms),
            source: None,
        })
    }

    /// Time-independent generator.
    pub fn constant(m: CMat) -> Result<Self> {
        Self::separable(vec![(ScalarFn::one(), m)])
    }

    /// Only pointwise-evaluable A(t); usable with grid clocks and oracles.
    pub fn pointwise(dim: usize, f: impl Fn(f64) -> CMat + Send + Sync + 'static) -> Self {
        Self {
            dim,
            repr: GenRepr::Pointwise(Arc::new(f)),
            source: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn source(&self) -> Option<&OperatorExpr> {
        self.source.as_ref()
    }

    pub fn separable_terms(&self) -> Option<&[(ScalarFn, CMat)]> {
        match &self.repr {
            GenRepr::Separable(t) => Some(t),
            GenRepr::Pointwise(_) => None,
        }
    }

    /// A(t).
    pub fn matrix(&self, t: f64) -> CMat {
        match &self.repr {
            GenRepr::Separable(terms) => {
                let mut out = CMat::zeros(self.dim, self.dim);
                for (c, m) in terms {
                    out += m * c.eval(t);
                }
                out
            }
            GenRepr::Pointwise(f) => f(t),
        }
    }

    pub fn split(&self, t: f64) -> (CMat, CMat) {
        hermitian_split(&self.matrix(t)).expect("generator matrices are square")
    }

    pub fn a1(&self, t: f64) -> CMat {
        self.split(t).0
    }

    pub fn a2(&self, t: f64) -> CMat {
        self.split(t).1
    }

    /// max over sample times of ‖A₂(t)‖_F / ‖A(t)‖_F.
    pub fn anti_hermitian_part(&self, times: &[f64]) -> f64 {
        times
            .iter()
            .map(|&t| {
                let a = self.matrix(t);
                let scale = fro_norm(&a);
                if scale == 0.0 {
                    0.0
                } else {
                    fro_norm(&hermitian_split(&a).expect("square").1) / scale
                }
            })
            .fold(0.0, f64::max)
    }

    /// Same generator scaled by a constant.
    pub fn scaled(&self, s: C64) -> Self {
        let repr = match &self.repr {
            GenRepr::Separable(t) => GenRepr::Separable(t.iter().map(|(c, m)| (c.scale(s), m.clone())).collect()),
            GenRepr::Pointwise(f) => {
                let f = f.clone();
                GenRepr::Pointwise(Arc::new(move |t| f(t) * s))
            }
        };
        Self {
            dim: self.dim,
            repr,
            source: self.source.clone(),
        }
    }
}

/// Compile an expression and wrap it as a generator.
pub fn split_generator(expr: &OperatorExpr, bases: &Bases) -> Result<Generator> {
    let compiled = expr.compile(bases)?;
    let mut gen = Generator::separable(compiled.terms)?;
    gen.source = Some(expr.clone());
    Ok(gen)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::galerkin::quadrature::{gauss_hermite, hermite_functions};
    use crate::linalg::{c, sigma_x, sigma_y, sigma_z};

    fn hermite(n: usize, s: f64) -> ModeBasis {
        ModeBasis::Hermite(HermiteBasis::new(n, s).unwrap())
    }

    #[test]
    fn identity_materializes() {
        let e = OperatorExpr::on_mode("x").with(1.0, vec![PrimitiveOp::identity("x")]).unwrap();
        let bases = Bases::from([("x".to_string(), hermite(4, 1.0))]);
        let m = materialize(&e, &bases, 0.3).unwrap();
        assert_eq!(m, CMat::identity(4, 4));
    }

    #[test]
    fn qubit_hamiltonian() {
        let modes = vec![("q".to_string(), ModeKind::Finite(2))];
        let e = OperatorExpr::new(modes)
            .with(0.5, vec![PrimitiveOp::matrix(sigma_x(), "q")])
            .unwrap()
            .with(1.0 / 3.0, vec![PrimitiveOp::matrix(sigma_y(), "q")])
            .unwrap()
            .with(0.25, vec![PrimitiveOp::matrix(sigma_z(), "q")])
            .unwrap();
        let bases = Bases::from([("q".to_string(), ModeBasis::Finite(2))]);
        let m = materialize(&e, &bases, 0.0).unwrap();
        let expect = CMat::from_row_slice(2, 2, &[re(0.25), c(0.5, -1.0 / 3.0), c(0.5, 1.0 / 3.0), re(-0.25)]);
        assert!(fro_norm(&(m - expect)) < 1e-15);
    }

    #[test]
    fn position_squared_block_matches_quadrature() {
        let e = OperatorExpr::on_mode("x")
            .with(1.0, vec![PrimitiveOp::position_pow(2, "x")])
            .unwrap();
        let bases = Bases::from([("x".to_string(), hermite(8, 1.0))]);
        let m = materialize(&e, &bases, 0.0).unwrap();
        let rule = gauss_hermite(32).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                let q = rule.integrate(|y| {
                    let v = hermite_functions(y, 8);
                    v[i] * y * y * v[j]
                });
                assert!((m[(i, j)].re - q).abs() < 1e-12);
            }
        }
        let x = position_matrix(&HermiteBasis::new(8, 1.0).unwrap());
        let trunc = &x * &x;
        let block = |a: &CMat| a.view((0, 0), (6, 6)).into_owned();
        assert!(fro_norm(&(block(&m) - block(&trunc))) < 1e-12);
    }

    #[test]
    fn adjoint_of_xp() {
        let e = OperatorExpr::on_mode("x")
            .with(c(0.3, 0.7), vec![PrimitiveOp::position("x"), PrimitiveOp::momentum("x")])
            .unwrap();
        let bases = Bases::from([("x".to_string(), hermite(16, 0.8))]);
        let m = materialize(&e, &bases, 0.0).unwrap();
        let ma = materialize(&e.adjoint(), &bases, 0.0).unwrap();
        assert!(fro_norm(&(ma - m.adjoint())) < 1e-12);
        let adj = e.adjoint();
        assert!(matches!(adj.terms()[0].factors[0].kind, PrimitiveKind::Momentum));
    }

    #[test]
    fn split_cases() {
        let h = sigma_x() + sigma_z() * re(0.3);
        let (a1, a2) = hermitian_split(&h).unwrap();
        assert_eq!(a1, h);
        assert!(fro_norm(&a2) == 0.0);
        let (b1, b2) = hermitian_split(&(&h * c(0.0, -1.0))).unwrap();
        assert!(fro_norm(&b1) < 1e-16);
        assert!(fro_norm(&(b2 - h)) < 1e-16);
        assert!(hermitian_split(&CMat::zeros(2, 3)).is_err());
    }

    #[test]
    fn unknown_mode_rejected() {
        let e = OperatorExpr::on_mode("x");
        assert!(matches!(e.with(1.0, vec![PrimitiveOp::position("y")]), Err(Error::UnknownMode(_))));
        let ok = OperatorExpr::on_mode("x").with(1.0, vec![PrimitiveOp::position("x")]).unwrap();
        assert!(matches!(ok.compile(&Bases::new()), Err(Error::UnknownMode(_))));
    }
}
