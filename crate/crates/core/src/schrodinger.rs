//! Schrödingerisation: Hermitian dynamics on an extra η mode for
//! non-unitary generators, and recovery of the system state by ξ-projection.

use std::time::Instant;

use crate::clock::{
    build_dilated, initial_ensemble, prepare_clock, trace_out_clock, BuildOptions, ClockSpec, ClockState, DilatedSystem, Evolver, Method,
    PreparedClock,
};
use crate::error::{Error, Result, StageExt};
use crate::galerkin::{
    fourier_conjugate, fourier_phases, interval_projection, localized_vector, position_matrix, project_state, FourierDirection,
    HermiteBasis,
};
use crate::linalg::{kron, outer, re, reduce_leading_weighted, trace, CMat, CVec};
use crate::operator::Generator;
use crate::scalar::ScalarFn;

/// Leakage of the ξ-state above which the η mode is rejected.
pub const ETA_LEAKAGE_LIMIT: f64 = 0.05;
/// Recovery success probability below which recovery is reported as failed.
pub const MIN_SUCCESS_PROBABILITY: f64 = 1e-6;

/// The auxiliary η mode on a Hermite basis of width `scale`; the
/// ξ representation uses the conjugate basis of width 1/scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EtaMode {
    basis: HermiteBasis,
}

impl EtaMode {
    pub fn new(size: usize, scale: f64) -> Result<Self> {
        Ok(Self {
            basis: HermiteBasis::new(size, scale)?,
        })
    }

    pub fn xi_basis(&self) -> HermiteBasis {
        self.basis.conjugate()
    }

    pub fn eta_basis(&self) -> HermiteBasis {
        self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.size()
    }

    /// η̂ in the Hermite coefficient basis.
    pub fn eta_position(&self) -> CMat {
        position_matrix(&self.eta_basis())
    }
}

/// H(t) = η̂ ⊗ A₂(t) + I_η ⊗ A₁(t) on η ⊗ system.
#[derive(Clone)]
pub struct ExtendedGenerator {
    gen: Generator,
    eta_pos: CMat,
}

impl ExtendedGenerator {
    pub fn matrix(&self, t: f64) -> CMat {
        let (a1, a2) = self.gen.split(t);
        kron(&self.eta_pos, &a2) + kron(&CMat::identity(self.eta_pos.nrows(), self.eta_pos.nrows()), &a1)
    }

    pub fn dim(&self) -> usize {
        self.eta_pos.nrows() * self.gen.dim()
    }
}

pub fn extend_generator(gen: &Generator, eta: &EtaMode) -> ExtendedGenerator {
    ExtendedGenerator {
        gen: gen.clone(),
        eta_pos: eta.eta_position(),
    }
}

/// |Ξ⟩ in both representations.
#[derive(Debug, Clone)]
pub struct XiState {
    /// Coefficients in the η representation (what enters the dilation).
    pub eta_coeffs: CVec,
    /// Coefficients of e^{−|ξ|} in the ξ representation.
    pub xi_coeffs: CVec,
    pub leakage: f64,
}

/// Project e^{−|ξ|} and move it to the η representation.
pub fn xi_state(eta: &EtaMode) -> Result<XiState> {
    let f = ScalarFn::from_real_fn(|x: f64| (-x.abs()).exp()).with_breaks(vec![0.0]);
    let proj = project_state(&f, &eta.xi_basis())?;
    if proj.leakage > ETA_LEAKAGE_LIMIT {
        return Err(Error::UnderResolvedEta { leakage: proj.leakage });
    }
    let (eta_coeffs, _) = fourier_conjugate(&proj.coeffs, &eta.xi_basis(), FourierDirection::Forward);
    Ok(XiState {
        eta_coeffs,
        xi_coeffs: proj.coeffs,
        leakage: proj.leakage,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RecoveryMode {
    ProjectAndNormalize,
    /// Contract against the ξ-localized vector at ξ₀ > 0.
    PointSlice(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecoverySpec {
    a: f64,
    b: f64,
    pub mode: RecoveryMode,
}

impl Default for RecoverySpec {
    fn default() -> Self {
        Self {
            a: 0.0,
            b: 2.0,
            mode: RecoveryMode::ProjectAndNormalize,
        }
    }
}

impl RecoverySpec {
    /// Projection onto ξ ∈ [a, b]; `b` may be infinite.
    pub fn interval(a: f64, b: f64) -> Result<Self> {
        if !(a < b) {
            return Err(Error::invalid(format!("recovery interval needs a < b, got [{a}, {b}]")));
        }
        Ok(Self {
            a,
            b,
            mode: RecoveryMode::ProjectAndNormalize,
        })
    }

    pub fn point_slice(xi0: f64) -> Result<Self> {
        if !(xi0 > 0.0) {
            return Err(Error::invalid(format!("point slice needs ξ₀ > 0, got {xi0}")));
        }
        Ok(Self {
            mode: RecoveryMode::PointSlice(xi0),
            ..Self::default()
        })
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.a, self.b)
    }
}

#[derive(Debug, Clone)]
pub struct Recovered {
    /// Normalized system density.
    pub rho: CMat,
    /// Trace before normalization.
    pub probability: f64,
}

/// Recover the system density from a density on η ⊗ system.
pub fn recover(rho: &CMat, eta: &EtaMode, spec: &RecoverySpec) -> Result<Recovered> {
    let n_eta = eta.dim();
    if !rho.nrows().is_multiple_of(n_eta) || rho.nrows() != rho.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "density {}x{} on an η mode of size {n_eta}",
            rho.nrows(),
            rho.ncols()
        )));
    }
    let d = rho.nrows() / n_eta;
    let weight = recovery_weight(eta, spec)?;
    // η → ξ representation: c_n → (−i)ⁿ c_n on the η factor.
    let phases = fourier_phases(n_eta, FourierDirection::Inverse);
    let mut rho_xi = rho.clone();
    for r in 0..rho.nrows() {
        for col in 0..rho.ncols() {
            rho_xi[(r, col)] *= phases[r / d] * phases[col / d].conj();
        }
    }
    normalize_recovered(reduce_leading_weighted(&rho_xi, n_eta, &weight))
}

/// [`recover`] applied to Σ_k w_k Tr_clock|v_k⟩⟨v_k| for states on
/// η ⊗ system ⊗ clock, without forming the η ⊗ system density.
pub fn recover_ensemble(ensemble: &[(f64, CVec)], clock_dim: usize, eta: &EtaMode, spec: &RecoverySpec) -> Result<Recovered> {
    let n_eta = eta.dim();
    let block = n_eta * clock_dim;
    if let Some((_, v)) = ensemble.iter().find(|(_, v)| block == 0 || !v.len().is_multiple_of(block)) {
        return Err(Error::DimensionMismatch(format!(
            "state of length {} on an η mode of size {n_eta} and a clock of size {clock_dim}",
            v.len()
        )));
    }
    let weight_adj = recovery_weight(eta, spec)?.adjoint();
    let phases = fourier_phases(n_eta, FourierDirection::Inverse);
    let Some((_, first)) = ensemble.first() else {
        return Err(Error::invalid("empty ensemble"));
    };
    let (d, m) = (first.len() / block, clock_dim);
    let mut reduced = CMat::zeros(d, d);
    for (w, v) in ensemble {
        // rows η, columns (system, clock), in the ξ representation
        let psi = CMat::from_fn(n_eta, d * m, |a, k| v[a * d * m + k] * phases[a]);
        let phi = &weight_adj * &psi;
        // Σ_{a,b} W_ba Ψ_a Ψ_b† = Σ_a Ψ_a Φ_a† with Φ = W†Ψ
        let x = CMat::from_fn(d, n_eta * m, |i, j| psi[(j / m, i * m + j % m)]);
        let y = CMat::from_fn(d, n_eta * m, |i, j| phi[(j / m, i * m + j % m)]);
        reduced += x * y.adjoint() * re(*w);
    }
    normalize_recovered(reduced)
}

fn recovery_weight(eta: &EtaMode, spec: &RecoverySpec) -> Result<CMat> {
    Ok(match spec.mode {
        RecoveryMode::ProjectAndNormalize => interval_projection(spec.a, spec.b, &eta.xi_basis())?.matrix,
        RecoveryMode::PointSlice(xi0) => {
            let v = localized_vector(&eta.xi_basis(), xi0)?;
            outer(&v, &v)
        }
    })
}

fn normalize_recovered(reduced: CMat) -> Result<Recovered> {
    let probability = trace(&reduced).re;
    if probability < MIN_SUCCESS_PROBABILITY {
        return Err(Error::RecoveryFailure { probability });
    }
    let rho = &reduced / re(probability);
    Ok(Recovered {
        rho: (&rho + rho.adjoint()) * re(0.5),
        probability,
    })
}

/// Everything the pipeline needs besides the generator and initial state.
#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub clock: ClockSpec,
    pub clock_state: ClockState,
    /// `None` for Hermitian generators.
    pub eta: Option<EtaMode>,
    pub recovery: RecoverySpec,
    pub method: Method,
    pub build: BuildOptions,
    /// Skip the clock resolution guard.
    pub allow_under_resolved: bool,
}

/// One recovered time point.
#[derive(Debug, Clone)]
pub struct PipelineStep {
    pub t: f64,
    /// Normalized system density.
    pub rho: CMat,
    /// Recovery success probability (1 without η mode).
    pub success_probability: f64,
    /// Trace of the clock-reduced density; 1 up to propagation error.
    pub reduced_trace: f64,
    pub wall_ms: f64,
}

/// Assembled pipeline: extend → dilate → prepare clock → evolve → trace → recover.
pub struct Pipeline {
    pub system: DilatedSystem,
    pub clock: PreparedClock,
    pub xi: Option<XiState>,
    evolver: Evolver,
    initial: Vec<(f64, CVec)>,
    eta: Option<EtaMode>,
    recovery: RecoverySpec,
}

impl Pipeline {
    pub fn new(gen: &Generator, u0: &CVec, cfg: &PipelineConfig) -> Result<Self> {
        if u0.len() != gen.dim() {
            return Err(Error::DimensionMismatch(format!(
                "initial state of length {} for generator of dim {}",
                u0.len(),
                gen.dim()
            )));
        }
        let u0 = crate::linalg::normalize(u0);
        let eta_basis = cfg.eta.map(|e| e.eta_basis());
        let system = build_dilated(gen, &cfg.clock, eta_basis.as_ref(), cfg.build).stage("build_dilated")?;
        let clock = if cfg.allow_under_resolved {
            crate::clock::prepare_clock_unchecked(&cfg.clock, &cfg.clock_state)
        } else {
            prepare_clock(&cfg.clock, &cfg.clock_state)
        }
        .stage("prepare_clock")?;
        let xi = cfg.eta.as_ref().map(xi_state).transpose().stage("xi_state")?;
        let outer_state = match &xi {
            Some(x) => crate::linalg::normalize(&x.eta_coeffs).kronecker(&u0),
            None => u0,
        };
        let initial = initial_ensemble(&outer_state, &clock);
        let evolver = Evolver::new(&system, cfg.method).stage("evolve")?;
        Ok(Self {
            system,
            clock,
            xi,
            evolver,
            initial,
            eta: cfg.eta,
            recovery: cfg.recovery,
        })
    }

    fn finish(&self, t: f64, ensemble: &[(f64, CVec)], started: Instant) -> Result<PipelineStep> {
        let (rho, success_probability, reduced_trace) = match &self.eta {
            Some(eta) => {
                let r = recover_ensemble(ensemble, self.system.layout.clock, eta, &self.recovery).stage("recover")?;
                let norm = ensemble.iter().map(|(w, v)| w * v.norm_squared()).sum();
                (r.rho, r.probability, norm)
            }
            None => {
                let reduced = trace_out_clock(ensemble, &self.system.layout).stage("trace_out_clock")?;
                let tr = trace(&reduced).re;
                (&reduced / re(tr), 1.0, tr)
            }
        };
        Ok(PipelineStep {
            t,
            rho,
            success_probability,
            reduced_trace,
            wall_ms: started.elapsed().as_secs_f64() * 1e3,
        })
    }

    /// State at a single time.
    pub fn at(&self, t: f64) -> Result<PipelineStep> {
        let started = Instant::now();
        let ens = self.evolver.apply_ensemble(&self.initial, t).stage("evolve")?;
        self.finish(t, &ens, started)
    }

    /// States at increasing times, propagating incrementally between them.
    pub fn run(&self, times: &[f64]) -> Result<Vec<PipelineStep>> {
        if times.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::invalid("pipeline times must be nondecreasing"));
        }
        let mut ens = self.initial.clone();
        let mut last = 0.0;
        let mut out = Vec::with_capacity(times.len());
        for &t in times {
            let started = Instant::now();
            ens = self.evolver.apply_ensemble(&ens, t - last).stage("evolve")?;
            last = t;
            out.push(self.finish(t, &ens, started)?);
        }
        Ok(out)
    }
}

/// Run the pipeline and evaluate Hermitian observables on each recovered state.
pub fn full_pipeline(
    gen: &Generator,
    u0: &CVec,
    times: &[f64],
    cfg: &PipelineConfig,
    observables: &[CMat],
) -> Result<Vec<(PipelineStep, Vec<f64>)>> {
    if let Some(o) = observables.iter().find(|o| o.nrows() != gen.dim() || o.ncols() != gen.dim()) {
        return Err(Error::DimensionMismatch(format!(
            "observable {}x{} for system of dim {}",
            o.nrows(),
            o.ncols(),
            gen.dim()
        )));
    }
    let pipe = Pipeline::new(gen, u0, cfg)?;
    Ok(pipe
        .run(times)?
        .into_iter()
        .map(|step| {
            let vals = observables.iter().map(|o| crate::linalg::expectation(&step.rho, o).re).collect();
            (step, vals)
        })
        .collect())
}
