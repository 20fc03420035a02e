//! Clock-mode dilation: H̄ = I_η ⊗ 1 ⊗ p̂_s + η̂ ⊗ A₂(ŝ) + I_η ⊗ A₁(ŝ),
//! clock state preparation, evolution and recovery by trace or measurement.

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::galerkin::{localized_vector, momentum_matrix, multiplication_operator, position_matrix, project_state, HermiteBasis};
use crate::krylov::{expm_multiply, KrylovOptions};
use crate::linalg::{c, expm, hermitian_eig, re, reduce_trailing, CMat, CVec, C64, I};
use crate::operator::Generator;
use crate::scalar::ScalarFn;
use crate::sparse::{kron_sum, Csr, KronTerm};

/// Default refusal threshold for dense assembly of H̄.
pub const DENSE_CAP: usize = 16384;
/// Above this dimension `Method::Auto` switches from dense eigen-propagation to Krylov.
pub const AUTO_DENSE_LIMIT: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MomentumScheme {
    /// First-order backward difference with periodic wrap (non-Hermitian).
    Upwind,
    /// Discrete-Fourier differentiation (Hermitian).
    Spectral,
}

/// Uniform clock grid s_j = (first + j)·Δs, j = 0..=n.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridClock {
    n: usize,
    ds: f64,
    first: i64,
    pub scheme: MomentumScheme,
    /// Zero the Hamiltonian on nodes with s < 0.
    pub causal: bool,
}

impl GridClock {
    /// Window [−½, ½] with Δs = 1/(n+1), nodes centred on s = 0.
    pub fn centered(n: usize, scheme: MomentumScheme) -> Result<Self> {
        Self::with_spacing(n, 1.0 / (n as f64 + 1.0), -((n / 2) as i64), scheme)
    }

    pub fn with_spacing(n: usize, ds: f64, first: i64, scheme: MomentumScheme) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid(format!("grid clock needs N >= 2, got {n}")));
        }
        if !(ds > 0.0) {
            return Err(Error::invalid(format!("grid spacing must be positive, got {ds}")));
        }
        Ok(Self {
            n,
            ds,
            first,
            scheme,
            causal: true,
        })
    }

    /// Smallest grid of n+1 nodes (with a node at 0) whose window covers [lo, hi].
    pub fn covering(n: usize, lo: f64, hi: f64, scheme: MomentumScheme) -> Result<Self> {
        if !(hi > lo) || n < 2 {
            return Err(Error::invalid(format!("cannot cover [{lo}, {hi}] with {n} intervals")));
        }
        let ds = (hi - lo) / (n as f64 - 1.0);
        Self::with_spacing(n, ds, (lo / ds).floor() as i64, scheme)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn ds(&self) -> f64 {
        self.ds
    }

    pub fn len(&self) -> usize {
        self.n + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.len()).map(|j| (self.first + j as i64) as f64 * self.ds).collect()
    }

    pub fn window(&self) -> (f64, f64) {
        let nodes = self.nodes();
        (nodes[0], nodes[self.n])
    }

    pub fn nearest(&self, s: f64) -> Result<usize> {
        let (lo, hi) = self.window();
        if s < lo - 0.5 * self.ds || s > hi + 0.5 * self.ds {
            return Err(Error::ClockWindowExceeded { lo, hi, t: s });
        }
        let j = (s / self.ds).round() as i64 - self.first;
        Ok(j.clamp(0, self.n as i64) as usize)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClockRepr {
    Galerkin(HermiteBasis),
    Grid(GridClock),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClockSpec {
    pub repr: ClockRepr,
}

impl ClockSpec {
    pub fn galerkin(n: usize, scale: f64) -> Result<Self> {
        Ok(Self {
            repr: ClockRepr::Galerkin(HermiteBasis::new(n, scale)?),
        })
    }

    pub fn grid(grid: GridClock) -> Self {
        Self {
            repr: ClockRepr::Grid(grid),
        }
    }

    pub fn dim(&self) -> usize {
        match &self.repr {
            ClockRepr::Galerkin(b) => b.size(),
            ClockRepr::Grid(g) => g.len(),
        }
    }

    /// Clock momentum p̂_s in this representation.
    pub fn momentum(&self) -> CMat {
        match &self.repr {
            ClockRepr::Galerkin(b) => momentum_matrix(b),
            ClockRepr::Grid(g) => match g.scheme {
                MomentumScheme::Upwind => upwind_momentum(g.len(), g.ds()),
                MomentumScheme::Spectral => spectral_momentum(g.len(), g.ds()),
            },
        }
    }

    /// Clock position ŝ.
    pub fn position(&self) -> CMat {
        match &self.repr {
            ClockRepr::Galerkin(b) => position_matrix(b),
            ClockRepr::Grid(g) => CMat::from_diagonal(&CVec::from_iterator(g.len(), g.nodes().into_iter().map(re))),
        }
    }

    /// f(ŝ): Galerkin multiplication operator or grid diagonal.
    pub fn function_of_position(&self, f: &ScalarFn) -> Result<CMat> {
        match &self.repr {
            ClockRepr::Galerkin(b) => multiplication_operator(f, b),
            ClockRepr::Grid(g) => Ok(CMat::from_diagonal(&CVec::from_iterator(
                g.len(),
                g.nodes().into_iter().map(|s| f.eval(s)),
            ))),
        }
    }
}

/// P_s = −i·D with (Dw)_i = (w_i − w_{i−1})/Δs and periodic wrap, on `m` nodes.
pub fn upwind_momentum(m: usize, ds: f64) -> CMat {
    let mut p = CMat::zeros(m, m);
    for i in 0..m {
        p[(i, i)] = c(0.0, -1.0 / ds);
        p[(i, (i + m - 1) % m)] = c(0.0, 1.0 / ds);
    }
    p
}

/// Hermitian Fourier-differentiation momentum on `m` periodic nodes.
pub fn spectral_momentum(m: usize, ds: f64) -> CMat {
    let length = m as f64 * ds;
    let wavenumber = |q: usize| -> f64 {
        if 2 * q == m {
            0.0 // Nyquist mode carries no derivative
        } else if 2 * q < m {
            2.0 * PI * q as f64 / length
        } else {
            2.0 * PI * (q as f64 - m as f64) / length
        }
    };
    let coeff: Vec<C64> = (0..m)
        .map(|d| {
            (0..m)
                .map(|q| {
                    let k = wavenumber(q);
                    C64::from_polar(k, 2.0 * PI * (q * d) as f64 / m as f64)
                })
                .sum::<C64>()
                / m as f64
        })
        .collect();
    CMat::from_fn(m, m, |j, l| coeff[(j + m - l) % m])
}

/// Regularized delta profile δ_ω.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClockProfile {
    /// (1/ω)β(s/ω) with β(x) = 1 − |x| on |x| < 1.
    Triangular,
    /// (1/ω)β(s/ω) with β(x) = (1 + cos πx)/2 on |x| < 1.
    Cosine,
    /// Normal density with standard deviation ω.
    Gaussian,
}

impl ClockProfile {
    pub fn density(&self, s: f64, omega: f64) -> f64 {
        let x = s / omega;
        match self {
            ClockProfile::Triangular => (1.0 - x.abs()).max(0.0) / omega,
            ClockProfile::Cosine => {
                if x.abs() < 1.0 {
                    0.5 * (1.0 + (PI * x).cos()) / omega
                } else {
                    0.0
                }
            }
            ClockProfile::Gaussian => (-0.5 * x * x).exp() / ((2.0 * PI).sqrt() * omega),
        }
    }

    /// Variance of the profile.
    pub fn variance(&self, omega: f64) -> f64 {
        match self {
            ClockProfile::Triangular => omega * omega / 6.0,
            ClockProfile::Cosine => omega * omega * (1.0 / 3.0 - 2.0 / (PI * PI)),
            ClockProfile::Gaussian => omega * omega,
        }
    }

    /// Points where the profile is not smooth, or where narrow features need panel edges.
    fn breaks(&self, omega: f64, bias: f64) -> Vec<f64> {
        match self {
            ClockProfile::Triangular | ClockProfile::Cosine => vec![bias - omega, bias, bias + omega],
            ClockProfile::Gaussian => (-10..=10).map(|k| bias + k as f64 * omega).collect(),
        }
    }

    /// δ_ω(s − bias) as a scalar function.
    pub fn as_fn(&self, omega: f64, bias: f64) -> ScalarFn {
        let p = *self;
        ScalarFn::from_real_fn(move |s| p.density(s - bias, omega)).with_breaks(self.breaks(omega, bias))
    }

    /// √δ_ω(s − bias).
    pub fn sqrt_fn(&self, omega: f64, bias: f64) -> ScalarFn {
        let p = *self;
        ScalarFn::from_real_fn(move |s| p.density(s - bias, omega).sqrt()).with_breaks(self.breaks(omega, bias))
    }
}

/// Initial clock density g(s, s′).
#[derive(Debug, Clone)]
pub enum ClockState {
    PureSqrtDelta { profile: ClockProfile, omega: f64, bias: f64 },
    MixedDiagonal { profile: ClockProfile, omega: f64, bias: f64 },
    Uniform,
    CustomPure(CVec),
    CustomDiagonal(Vec<f64>),
}

impl ClockState {
    pub fn pure(profile: ClockProfile, omega: f64) -> Self {
        ClockState::PureSqrtDelta { profile, omega, bias: 0.0 }
    }

    pub fn mixed(profile: ClockProfile, omega: f64) -> Self {
        ClockState::MixedDiagonal { profile, omega, bias: 0.0 }
    }

    pub fn omega(&self) -> Option<f64> {
        match self {
            ClockState::PureSqrtDelta { omega, .. } | ClockState::MixedDiagonal { omega, .. } => Some(*omega),
            _ => None,
        }
    }
}

/// Clock state as a weighted ensemble of pure clock vectors.
#[derive(Debug, Clone)]
pub struct PreparedClock {
    pub members: Vec<(f64, CVec)>,
    /// ⟨ŝ⟩ of the realized state.
    pub mean: f64,
    /// ⟨ŝ²⟩ of the realized state.
    pub second_moment: f64,
    /// Probability lost when projecting onto the clock representation.
    pub leakage: f64,
}

/// Prepare a clock state, rejecting widths the representation cannot resolve.
pub fn prepare_clock(spec: &ClockSpec, state: &ClockState) -> Result<PreparedClock> {
    if let Some(omega) = state.omega() {
        if !(omega > 0.0) {
            return Err(Error::invalid(format!("clock width must be positive, got {omega}")));
        }
        let resolution = match &spec.repr {
            ClockRepr::Galerkin(b) => b.resolution(),
            ClockRepr::Grid(g) => g.ds(),
        };
        if omega < resolution {
            return Err(Error::UnderResolvedClock { omega, resolution });
        }
    }
    prepare_clock_unchecked(spec, state)
}

/// As [`prepare_clock`] without the resolution guard, for studies that probe
/// the under-resolved regime on purpose.
pub fn prepare_clock_unchecked(spec: &ClockSpec, state: &ClockState) -> Result<PreparedClock> {
    let dim = spec.dim();
    let (members, leakage) = match (&spec.repr, state) {
        (ClockRepr::Galerkin(b), ClockState::PureSqrtDelta { profile, omega, bias }) => {
            let proj = project_state(&profile.sqrt_fn(*omega, *bias), b)?;
            let n = proj.coeffs.norm();
            (vec![(1.0, proj.coeffs / re(n))], proj.leakage)
        }
        (ClockRepr::Galerkin(b), ClockState::MixedDiagonal { profile, omega, bias }) => {
            let rho = multiplication_operator(&profile.as_fn(*omega, *bias), b)?;
            (ensemble_from_density(&rho)?, 0.0)
        }
        (ClockRepr::Grid(g), ClockState::PureSqrtDelta { profile, omega, bias }) => {
            let amp: Vec<f64> = g
                .nodes()
                .iter()
                .map(|&s| (profile.density(s - bias, *omega) * g.ds()).sqrt())
                .collect();
            let total: f64 = amp.iter().map(|a| a * a).sum();
            if total == 0.0 {
                return Err(Error::UnderResolvedClock {
                    omega: *omega,
                    resolution: g.ds(),
                });
            }
            let v = CVec::from_iterator(dim, amp.iter().map(|&a| re(a / total.sqrt())));
            (vec![(1.0, v)], (1.0 - total).abs())
        }
        (ClockRepr::Grid(g), ClockState::MixedDiagonal { profile, omega, bias }) => {
            let w: Vec<f64> = g.nodes().iter().map(|&s| profile.density(s - bias, *omega) * g.ds()).collect();
            let total: f64 = w.iter().sum();
            (diagonal_members(&w)?, (1.0 - total).abs())
        }
        (_, ClockState::Uniform) => (diagonal_members(&vec![1.0; dim])?, 0.0),
        (_, ClockState::CustomPure(v)) => {
            if v.len() != dim {
                return Err(Error::DimensionMismatch(format!(
                    "clock vector of length {} for clock dim {dim}",
                    v.len()
                )));
            }
            let n = v.norm();
            if n == 0.0 {
                return Err(Error::invalid("zero clock vector"));
            }
            (vec![(1.0, v / re(n))], 0.0)
        }
        (_, ClockState::CustomDiagonal(w)) => {
            if w.len() != dim {
                return Err(Error::DimensionMismatch(format!("{} clock weights for clock dim {dim}", w.len())));
            }
            (diagonal_members(w)?, 0.0)
        }
    };
    let s = spec.position();
    let s2 = match &spec.repr {
        ClockRepr::Galerkin(b) => multiplication_operator(&ScalarFn::monomial(1.0, 2), b)?,
        ClockRepr::Grid(_) => &s * &s,
    };
    let moment = |op: &CMat| -> f64 { members.iter().map(|(w, v)| w * v.dotc(&(op * v)).re).sum() };
    let mean = moment(&s);
    let second_moment = moment(&s2);
    Ok(PreparedClock {
        members,
        mean,
        second_moment,
        leakage,
    })
}

fn diagonal_members(w: &[f64]) -> Result<Vec<(f64, CVec)>> {
    if w.iter().any(|&x| x < 0.0 || !x.is_finite()) {
        return Err(Error::invalid("clock weights must be nonnegative"));
    }
    let total: f64 = w.iter().sum();
    if total <= 0.0 {
        return Err(Error::invalid("clock weights sum to zero"));
    }
    let n = w.len();
    Ok(w.iter()
        .enumerate()
        .filter(|(_, &x)| x > 0.0)
        .map(|(i, &x)| {
            let mut v = CVec::zeros(n);
            v[i] = re(1.0);
            (x / total, v)
        })
        .collect())
}

/// Trace-normalized density matrix → eigen-ensemble (negative round-off clipped).
fn ensemble_from_density(rho: &CMat) -> Result<Vec<(f64, CVec)>> {
    let (vals, vecs) = hermitian_eig(rho);
    let top = vals.iter().copied().fold(0.0, f64::max);
    let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
    if min < -1e-9 * top.max(1.0) {
        return Err(Error::NonPsd { min_eig: min });
    }
    let kept: Vec<(f64, CVec)> = vals
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > 1e-14 * top)
        .map(|(k, &v)| (v, vecs.column(k).into_owned()))
        .collect();
    let total: f64 = kept.iter().map(|(w, _)| w).sum();
    Ok(kept.into_iter().map(|(w, v)| (w / total, v)).collect())
}

/// Tensor layout (η?, system, clock), clock innermost.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub eta: Option<usize>,
    pub system: usize,
    pub clock: usize,
}

impl Layout {
    /// Dimension of everything except the clock.
    pub fn outer(&self) -> usize {
        self.eta.unwrap_or(1) * self.system
    }

    pub fn total(&self) -> usize {
        self.outer() * self.clock
    }
}

/// The assembled time-independent Hamiltonian H̄.
#[derive(Debug, Clone)]
pub struct DilatedSystem {
    pub hbar: Arc<Csr>,
    pub layout: Layout,
    pub clock: ClockSpec,
    pub hermitian_defect: f64,
    pub dense_cap: usize,
}

impl DilatedSystem {
    pub fn dim(&self) -> usize {
        self.layout.total()
    }

    /// Dense realization, refused above the dense cap.
    pub fn dense(&self) -> Result<CMat> {
        if self.dim() > self.dense_cap {
            return Err(Error::TooLargeForDense {
                dim: self.dim(),
                cap: self.dense_cap,
            });
        }
        Ok(self.hbar.to_dense())
    }
}

/// Options for [`build_dilated`].
#[derive(Debug, Clone, Copy)]
pub struct BuildOptions {
    pub dense_cap: usize,
    /// Relative anti-Hermitian part above which a generator without an η mode is rejected.
    pub hermitian_tol: f64,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self {
            dense_cap: DENSE_CAP,
            hermitian_tol: 1e-10,
        }
    }
}

const SAMPLE_TIMES: [f64; 6] = [-0.7, 0.0, 0.31, 0.5, 1.0, 1.9];

/// Assemble H̄ in the (η, system, clock) layout. `eta` is the η-representation
/// basis; when absent the generator must be Hermitian.
pub fn build_dilated(gen: &Generator, clock: &ClockSpec, eta: Option<&HermiteBasis>, opts: BuildOptions) -> Result<DilatedSystem> {
    if eta.is_none() {
        let defect = gen.anti_hermitian_part(&SAMPLE_TIMES);
        if defect > opts.hermitian_tol {
            return Err(Error::NonHermitianGenerator { defect });
        }
    }
    let layout = Layout {
        eta: eta.map(|b| b.size()),
        system: gen.dim(),
        clock: clock.dim(),
    };
    let momentum = Csr::from_dense(&clock.momentum());
    let eta_x = eta.map(|b| Csr::from_dense(&position_matrix(b)));
    let id_eta = Csr::identity(layout.eta.unwrap_or(1));
    let id_outer = Csr::identity(layout.outer());
    let mut terms = vec![KronTerm::new(re(1.0), vec![&id_outer, &momentum])];
    let hbar = match &clock.repr {
        ClockRepr::Galerkin(basis) => {
            let factors = galerkin_factors(gen, basis)?;
            for (m, m_adj, lam, lam_adj) in &factors {
                terms.push(KronTerm::new(re(0.5), vec![&id_eta, m, lam]));
                terms.push(KronTerm::new(re(0.5), vec![&id_eta, m_adj, lam_adj]));
                if let Some(x) = &eta_x {
                    terms.push(KronTerm::new(I * 0.5, vec![x, m, lam]));
                    terms.push(KronTerm::new(I * -0.5, vec![x, m_adj, lam_adj]));
                }
            }
            kron_sum(&terms)?
        }
        ClockRepr::Grid(grid) => {
            let (a1, a2) = grid_split(gen, grid);
            terms.push(KronTerm::new(re(1.0), vec![&id_eta, &a1]));
            if let Some(x) = &eta_x {
                terms.push(KronTerm::new(re(1.0), vec![x, &a2]));
            }
            kron_sum(&terms)?
        }
    };
    let hermitian_defect = hbar.hermitian_defect();
    Ok(DilatedSystem {
        hbar: Arc::new(hbar),
        layout,
        clock: *clock,
        hermitian_defect,
        dense_cap: opts.dense_cap,
    })
}

/// (M_k, M_k†, Λ_k, Λ_k†) per separable term λ_k(t)M_k, with Λ_k the clock
/// matrix of λ_k(ŝ). A₁ = Σ ½(M⊗Λ + M†⊗Λ†) and A₂ = Σ ½i(M⊗Λ − M†⊗Λ†).
fn galerkin_factors(gen: &Generator, basis: &HermiteBasis) -> Result<Vec<(Csr, Csr, Csr, Csr)>> {
    let terms = gen.separable_terms().ok_or(Error::NonSeparable)?;
    terms
        .iter()
        .map(|(lambda, m)| {
            let lam = Csr::from_dense(&multiplication_operator(lambda, basis)?);
            let lam_adj = lam.adjoint();
            Ok((Csr::from_dense(m), Csr::from_dense(&m.adjoint()), lam, lam_adj))
        })
        .collect()
}

/// Block-diagonal Σ_i A_{1,2}(s_i) ⊗ |i⟩⟨i|, zero before s = 0 on causal grids.
fn grid_split(gen: &Generator, grid: &GridClock) -> (Csr, Csr) {
    let nodes = grid.nodes();
    let m = nodes.len();
    let d = gen.dim();
    let blocks: Vec<(CMat, CMat)> = nodes
        .par_iter()
        .map(|&s| {
            if grid.causal && s < 0.0 {
                (CMat::zeros(d, d), CMat::zeros(d, d))
            } else {
                gen.split(s)
            }
        })
        .collect();
    let mut t1 = Vec::new();
    let mut t2 = Vec::new();
    for (i, (b1, b2)) in blocks.iter().enumerate() {
        for a in 0..d {
            for b in 0..d {
                if b1[(a, b)].norm() > 0.0 {
                    t1.push((a * m + i, b * m + i, b1[(a, b)]));
                }
                if b2[(a, b)].norm() > 0.0 {
                    t2.push((a * m + i, b * m + i, b2[(a, b)]));
                }
            }
        }
    }
    (Csr::from_triplets(d * m, d * m, t1), Csr::from_triplets(d * m, d * m, t2))
}

/// Propagation method for e^{−iH̄t}.
#[derive(Debug, Clone, Copy)]
pub enum Method {
    DenseEig,
    Krylov(KrylovOptions),
    /// Dense eigen-propagation for small Hermitian systems, Krylov otherwise.
    Auto,
}

enum EvolverKind {
    Dense { vals: Vec<f64>, vecs: CMat },
    Krylov { opts: KrylovOptions, hermitian: bool },
}

/// Reusable propagator for one dilated system.
pub struct Evolver {
    hbar: Arc<Csr>,
    kind: EvolverKind,
}

impl Evolver {
    pub fn new(sys: &DilatedSystem, method: Method) -> Result<Self> {
        let hermitian = sys.hermitian_defect < 1e-12;
        let method = match method {
            Method::Auto if hermitian && sys.dim() <= AUTO_DENSE_LIMIT => Method::DenseEig,
            Method::Auto => Method::Krylov(KrylovOptions::default()),
            m => m,
        };
        let kind = match method {
            Method::DenseEig => {
                if !hermitian {
                    return Err(Error::NotHermitian {
                        defect: sys.hermitian_defect,
                    });
                }
                let (vals, vecs) = hermitian_eig(&sys.dense()?);
                EvolverKind::Dense {
                    vals: vals.iter().copied().collect(),
                    vecs,
                }
            }
            Method::Krylov(opts) => EvolverKind::Krylov { opts, hermitian },
            Method::Auto => unreachable!("resolved above"),
        };
        Ok(Self {
            hbar: Arc::clone(&sys.hbar),
            kind,
        })
    }

    pub fn dim(&self) -> usize {
        self.hbar.nrows()
    }

    /// e^{−iH̄t}ψ.
    pub fn apply(&self, psi: &CVec, t: f64) -> Result<CVec> {
        if psi.len() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "state of length {} for H̄ of dim {}",
                psi.len(),
                self.dim()
            )));
        }
        match &self.kind {
            EvolverKind::Dense { vals, vecs } => {
                let mut coef = vecs.adjoint() * psi;
                for (z, &e) in coef.iter_mut().zip(vals) {
                    *z *= C64::from_polar(1.0, -e * t);
                }
                Ok(vecs * coef)
            }
            EvolverKind::Krylov { opts, hermitian } => Ok(expm_multiply(&self.hbar, psi, t, *hermitian, *opts)?.0),
        }
    }

    /// Evolve every ensemble member (in parallel).
    pub fn apply_ensemble(&self, members: &[(f64, CVec)], t: f64) -> Result<Vec<(f64, CVec)>> {
        members.par_iter().map(|(w, v)| Ok((*w, self.apply(v, t)?))).collect()
    }
}

/// One-shot e^{−iH̄t}ψ₀.
pub fn evolve(sys: &DilatedSystem, psi0: &CVec, t: f64, method: Method) -> Result<CVec> {
    Evolver::new(sys, method)?.apply(psi0, t)
}

/// Full initial ensemble outer ⊗ clock members.
pub fn initial_ensemble(outer: &CVec, clock: &PreparedClock) -> Vec<(f64, CVec)> {
    clock.members.iter().map(|(w, v)| (*w, outer.kronecker(v))).collect()
}

/// Tr_s over an ensemble; the result lives on (η ⊗) system.
pub fn trace_out_clock(ensemble: &[(f64, CVec)], layout: &Layout) -> Result<CMat> {
    let outer = layout.outer();
    let total: f64 = ensemble.iter().map(|(w, _)| w).sum();
    if (total - 1.0).abs() > 1e-10 {
        return Err(Error::invalid(format!("ensemble weights sum to {total}")));
    }
    let mut rho = CMat::zeros(outer, outer);
    for (w, v) in ensemble {
        if v.len() != layout.total() {
            return Err(Error::DimensionMismatch(format!(
                "state of length {} for layout of size {}",
                v.len(),
                layout.total()
            )));
        }
        rho += reduce_trailing(v, layout.clock) * re(*w);
    }
    Ok(rho)
}

/// Project the clock onto the vector localized at `s_target`; returns the
/// conditional (η ⊗) system density and the outcome probability.
pub fn measure_clock_at(ensemble: &[(f64, CVec)], s_target: f64, sys: &DilatedSystem) -> Result<(CMat, f64)> {
    let layout = sys.layout;
    let probe = clock_probe(&sys.clock, s_target)?;
    let outer = layout.outer();
    let mut rho = CMat::zeros(outer, outer);
    let mut prob = 0.0;
    for (w, v) in ensemble {
        let chi = CVec::from_fn(outer, |a, _| {
            (0..layout.clock).map(|c| probe[c].conj() * v[a * layout.clock + c]).sum()
        });
        prob += w * chi.norm_squared();
        rho += (&chi * chi.adjoint()) * re(*w);
    }
    if prob <= 1e-300 {
        return Err(Error::ZeroProbability);
    }
    Ok((rho / re(prob), prob))
}

fn clock_probe(clock: &ClockSpec, s: f64) -> Result<CVec> {
    match &clock.repr {
        ClockRepr::Galerkin(b) => localized_vector(b, s),
        ClockRepr::Grid(g) => {
            let j = g.nearest(s)?;
            let mut v = CVec::zeros(g.len());
            v[j] = re(1.0);
            Ok(v)
        }
    }
}

/// G(s) = (1/s)∫₀ˢ g, continued by g(0) at s = 0.
pub fn time_average(g: &ScalarFn) -> ScalarFn {
    match g.coefficients() {
        Some(cs) => ScalarFn::poly(cs.iter().enumerate().map(|(k, z)| z / (k as f64 + 1.0)).collect()),
        None => {
            let g = g.clone();
            ScalarFn::from_fn(move |s| if s.abs() < 1e-12 { g.eval(0.0) } else { g.integrate(0.0, s) / s })
        }
    }
}

/// Commuting-case protocol U₂U₁ with U₁ = e^{−i(1⊗p̂_s)t}, U₂ = e^{−i(h⊗G(ŝ))t};
/// returns the clock-traced system density.
pub fn commuting_protocol(h: &CMat, g: &ScalarFn, y0: &CVec, t: f64, clock: &ClockSpec, state: &ClockState) -> Result<CMat> {
    let prepared = prepare_clock(clock, state)?;
    let p = clock.momentum();
    let u1 = match &clock.repr {
        ClockRepr::Grid(GridClock {
            scheme: MomentumScheme::Upwind,
            ..
        }) => expm(&(p * c(0.0, -t))),
        _ => crate::linalg::expm_hermitian(&p, t),
    };
    let gmat = clock.function_of_position(&time_average(g))?;
    let (gvals, gvecs) = hermitian_eig(&gmat);
    let (hvals, hvecs) = hermitian_eig(h);
    let d = h.nrows();
    let mut rho = CMat::zeros(d, d);
    for (w, chi0) in &prepared.members {
        let chi = &u1 * chi0;
        let coef = gvecs.adjoint() * &chi;
        // E_k χ = W diag(e^{−i t e_k γ}) W† χ for each eigenvalue e_k of h.
        let branches: Vec<CVec> = hvals
            .iter()
            .map(|&e| {
                let mut z = coef.clone();
                for (zi, &gamma) in z.iter_mut().zip(gvals.iter()) {
                    *zi *= C64::from_polar(1.0, -t * e * gamma);
                }
                &gvecs * z
            })
            .collect();
        let amps: Vec<CVec> = (0..d)
            .map(|k| {
                let v = hvecs.column(k).into_owned();
                &v * v.dotc(y0)
            })
            .collect();
        for k in 0..d {
            for l in 0..d {
                let overlap = branches[l].dotc(&branches[k]);
                rho += (&amps[k] * amps[l].adjoint()) * (overlap * *w);
            }
        }
    }
    Ok(rho)
}
