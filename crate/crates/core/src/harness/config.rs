//! TOML experiment configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::clock::{ClockProfile, ClockSpec, ClockState, GridClock, Method, MomentumScheme};
use crate::error::{Error, Result};
use crate::krylov::KrylovOptions;
use crate::scalar::ScalarFn;

pub const DEFAULT_OMEGAS: [f64; 5] = [0.2, 0.1, 0.05, 0.02, 0.01];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExperimentKind {
    #[serde(rename = "hamiltonian2lvl")]
    Hamiltonian2Lvl,
    #[serde(rename = "open-ode")]
    OpenOde,
    #[serde(rename = "fokker-planck")]
    FokkerPlanck,
    #[serde(rename = "omega-sweep")]
    OmegaSweep,
    #[serde(rename = "commuting-appendixA")]
    CommutingAppendixA,
    #[serde(rename = "consistency")]
    Consistency,
    #[serde(rename = "complexity")]
    Complexity,
    #[serde(rename = "pde")]
    Pde,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClockScheme {
    Galerkin,
    Spectral,
    Upwind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClockStateKind {
    Pure,
    Mixed,
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodKind {
    Auto,
    Dense,
    Krylov,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Numerics {
    pub n_s: usize,
    pub scale_s: f64,
    pub n_eta: usize,
    pub scale_eta: f64,
    pub n_u: usize,
    pub scale_u: f64,
    pub clock: ClockScheme,
    pub clock_state: ClockStateKind,
    pub profile: ClockProfileName,
    pub omegas: Vec<f64>,
    pub method: MethodKind,
    pub krylov_tol: f64,
    pub allow_under_resolved: bool,
    pub dense_cap: usize,
    /// Oracle propagator steps; derived from the generator norm when absent.
    pub oracle_steps: Option<usize>,
}

impl Default for Numerics {
    fn default() -> Self {
        Self {
            n_s: 32,
            scale_s: 0.2,
            n_eta: 64,
            scale_eta: 2.0,
            n_u: 32,
            scale_u: 0.5,
            clock: ClockScheme::Galerkin,
            clock_state: ClockStateKind::Pure,
            profile: ClockProfileName::Gaussian,
            omegas: DEFAULT_OMEGAS.to_vec(),
            method: MethodKind::Auto,
            krylov_tol: 1e-8,
            allow_under_resolved: false,
            dense_cap: crate::clock::DENSE_CAP,
            oracle_steps: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClockProfileName {
    Gaussian,
    Triangular,
    Cosine,
}

impl From<ClockProfileName> for ClockProfile {
    fn from(p: ClockProfileName) -> Self {
        match p {
            ClockProfileName::Gaussian => ClockProfile::Gaussian,
            ClockProfileName::Triangular => ClockProfile::Triangular,
            ClockProfileName::Cosine => ClockProfile::Cosine,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Physics {
    pub a: f64,
    /// Polynomial in `t`.
    pub g: String,
    /// Polynomial in `t`.
    pub beta: String,
    pub t_final: f64,
    pub times: usize,
    pub observables: Vec<String>,
    /// Initial system state as [re, im] pairs; normalized on use.
    pub initial: Option<Vec<[f64; 2]>>,
    /// Fokker–Planck case 1, 2 or 3; overrides `g` and `beta`.
    pub case: Option<u8>,
    pub mu0: f64,
    pub var0: f64,
}

impl Default for Physics {
    fn default() -> Self {
        Self {
            a: 1.0,
            g: "t".into(),
            beta: "0.3".into(),
            t_final: 0.5,
            times: 21,
            observables: vec!["sigma_z".into()],
            initial: None,
            case: None,
            mu0: 0.8,
            var0: 0.09,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    pub csv: Option<PathBuf>,
    pub json: Option<PathBuf>,
    pub seed: u64,
    /// Write measured wall times; disable for byte-reproducible CSVs.
    pub record_timing: bool,
    /// Require power-of-two mode sizes so the qubit count is exact.
    pub qubit_report: bool,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            csv: None,
            json: None,
            seed: 0,
            record_timing: true,
            qubit_report: false,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Assertions {
    pub max_abs_err: Option<f64>,
    pub min_fidelity: Option<f64>,
    pub slope: Option<[f64; 2]>,
    pub prefactor_rel: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PdeTermConfig {
    pub order: u32,
    #[serde(default)]
    pub axis: usize,
    /// Polynomial in `t`.
    #[serde(default = "one")]
    pub time: String,
    /// Polynomial in `x`.
    #[serde(default = "one")]
    pub space: String,
}

fn one() -> String {
    "1".into()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialConfig {
    #[serde(default = "one")]
    pub time: String,
    #[serde(default = "one")]
    pub space: String,
    /// Imaginary part multiplier: the term is (re + i·im)·time·space.
    #[serde(default)]
    pub im: f64,
    #[serde(default = "unit")]
    pub re: f64,
}

fn unit() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PdeConfig {
    #[serde(default = "dim_one")]
    pub dim: usize,
    #[serde(default)]
    pub terms: Vec<PdeTermConfig>,
    #[serde(default)]
    pub potential: Vec<PotentialConfig>,
}

fn dim_one() -> usize {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub numerics: Numerics,
    #[serde(default)]
    pub physics: Physics,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default)]
    pub assertions: Assertions,
    pub pde: Option<PdeConfig>,
}

/// Command-line overrides.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub omega: Option<f64>,
    pub full: bool,
    pub method: Option<MethodKind>,
}

fn config_err(path: &str, msg: impl Into<String>) -> Error {
    Error::Config {
        path: path.into(),
        msg: msg.into(),
    }
}

impl ExperimentConfig {
    pub fn from_toml(src: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(src).map_err(|e| {
            let path = e.span().map(|s| format!("byte {}..{}", s.start, s.end)).unwrap_or_default();
            config_err(&path, e.message())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn new(experiment: ExperimentKind) -> Self {
        Self {
            experiment,
            numerics: Numerics::default(),
            physics: Physics::default(),
            output: OutputSpec::default(),
            assertions: Assertions::default(),
            pde: None,
        }
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<()> {
        if let Some(w) = o.omega {
            self.numerics.omegas = vec![w];
        }
        if o.full {
            self.numerics.n_s = 128;
            self.numerics.n_eta = 128;
            self.numerics.n_u = 64;
            self.numerics.method = MethodKind::Krylov;
        }
        if let Some(m) = o.method {
            self.numerics.method = m;
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<()> {
        let n = &self.numerics;
        if n.omegas.is_empty() {
            return Err(config_err("numerics.omegas", "needs at least one width"));
        }
        if let Some(w) = n.omegas.iter().find(|w| !(**w > 0.0)) {
            return Err(config_err("numerics.omegas", format!("widths must be positive, got {w}")));
        }
        for (path, v) in [("numerics.n_s", n.n_s), ("numerics.n_eta", n.n_eta), ("numerics.n_u", n.n_u)] {
            if v < 2 {
                return Err(config_err(path, format!("size must be at least 2, got {v}")));
            }
            if self.output.qubit_report && !v.is_power_of_two() {
                return Err(config_err(path, format!("qubit report needs a power of two, got {v}")));
            }
        }
        for (path, v) in [
            ("numerics.scale_s", n.scale_s),
            ("numerics.scale_eta", n.scale_eta),
            ("numerics.scale_u", n.scale_u),
            ("numerics.krylov_tol", n.krylov_tol),
            ("physics.t_final", self.physics.t_final),
            ("physics.var0", self.physics.var0),
        ] {
            if !(v > 0.0) {
                return Err(config_err(path, format!("must be positive, got {v}")));
            }
        }
        if self.physics.times < 2 {
            return Err(config_err("physics.times", "needs at least two time points"));
        }
        ScalarFn::parse_poly(&self.physics.g, "t").map_err(|e| config_err("physics.g", e.to_string()))?;
        ScalarFn::parse_poly(&self.physics.beta, "t").map_err(|e| config_err("physics.beta", e.to_string()))?;
        if let Some(c) = self.physics.case {
            if !(1..=3).contains(&c) {
                return Err(config_err("physics.case", format!("unknown case {c}")));
            }
        }
        if self.experiment == ExperimentKind::Pde && self.pde.is_none() {
            return Err(config_err("pde", "pde experiment needs a [pde] table"));
        }
        Ok(())
    }

    pub fn g(&self) -> ScalarFn {
        ScalarFn::parse_poly(&self.physics.g, "t").expect("validated")
    }

    pub fn beta(&self) -> ScalarFn {
        ScalarFn::parse_poly(&self.physics.beta, "t").expect("validated")
    }

    /// Uniform time points on [0, T].
    pub fn times(&self) -> Vec<f64> {
        let n = self.physics.times;
        (0..n).map(|k| self.physics.t_final * k as f64 / (n - 1) as f64).collect()
    }

    pub fn method(&self) -> Method {
        match self.numerics.method {
            MethodKind::Auto => Method::Auto,
            MethodKind::Dense => Method::DenseEig,
            MethodKind::Krylov => Method::Krylov(KrylovOptions {
                tol: self.numerics.krylov_tol,
                ..KrylovOptions::default()
            }),
        }
    }

    /// Clock representation for width ω; grids cover [−6ω, T + 6ω].
    pub fn clock_spec(&self, omega: f64) -> Result<ClockSpec> {
        let n = &self.numerics;
        let scheme = match n.clock {
            ClockScheme::Galerkin => return ClockSpec::galerkin(n.n_s, n.scale_s),
            ClockScheme::Spectral => MomentumScheme::Spectral,
            ClockScheme::Upwind => MomentumScheme::Upwind,
        };
        let margin = 6.0 * omega;
        Ok(ClockSpec::grid(GridClock::covering(
            n.n_s,
            -margin,
            self.physics.t_final + margin,
            scheme,
        )?))
    }

    pub fn clock_state(&self, omega: f64) -> ClockState {
        let profile = self.numerics.profile.into();
        match self.numerics.clock_state {
            ClockStateKind::Pure => ClockState::pure(profile, omega),
            ClockStateKind::Mixed => ClockState::mixed(profile, omega),
            ClockStateKind::Uniform => ClockState::Uniform,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_minimal() {
        let cfg = ExperimentConfig::from_toml("experiment = \"open-ode\"\n[physics]\na = 0.3\ng = \"1 - t\"\n").unwrap();
        assert_eq!(cfg.experiment, ExperimentKind::OpenOde);
        assert_eq!(cfg.times().len(), 21);
        assert_eq!(cfg.numerics.omegas, DEFAULT_OMEGAS.to_vec());
    }

    #[test]
    fn reports_field_paths() {
        let err = ExperimentConfig::from_toml("experiment = \"open-ode\"\n[numerics]\nomegas = []\n").unwrap_err();
        assert!(matches!(err, Error::Config { ref path, .. } if path == "numerics.omegas"), "{err}");
        let err = ExperimentConfig::from_toml("experiment = \"open-ode\"\n[physics]\ng = \"t +\"\n").unwrap_err();
        assert!(matches!(err, Error::Config { ref path, .. } if path == "physics.g"));
        assert!(ExperimentConfig::from_toml("experiment = \"nope\"").is_err());
    }

    #[test]
    fn full_override() {
        let mut cfg = ExperimentConfig::new(ExperimentKind::FokkerPlanck);
        cfg.apply(&Overrides {
            full: true,
            omega: Some(0.05),
            ..Overrides::default()
        })
        .unwrap();
        assert_eq!((cfg.numerics.n_s, cfg.numerics.n_eta, cfg.numerics.n_u), (128, 128, 64));
        assert_eq!(cfg.numerics.omegas, vec![0.05]);
    }
}
