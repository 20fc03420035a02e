use rayon::prelude::*;

use super::{fit_error_law, ClockStateKind, Error, ExperimentConfig, ExperimentReport, Result, Row};
use crate::clock::{build_dilated, commuting_protocol, BuildOptions, ClockProfile, ClockRepr, ClockState};
use crate::complexity::{matrix_stats, measured_estimate, theorem4_estimate};
use crate::galerkin::{multiplication_operator, position_matrix, project_state, HermiteBasis};
use crate::linalg::{
    c, expectation, expm, expm_hermitian, kron, max_abs, normalize, outer, re, sigma_x, sigma_y, sigma_z, CMat, CVec, C64, I,
};
use crate::operator::{split_generator, Bases, Generator, ModeBasis};
use crate::oracles::{commuting_exact, default_steps, error_constants, fidelity, ou_moments, time_ordered_propagator, trace_distance};
use crate::pde::{fokker_planck_generator, linear_pde_generator, space_modes, stability_warnings, LinearPdeSpec, PdeTerm, SpaceTimeFn};
use crate::scalar::ScalarFn;
use crate::schrodinger::{EtaMode, Pipeline, PipelineConfig, PipelineStep, RecoverySpec};
use crate::sparse::Csr;

/// Slack on the trace-distance bound for rounding in the eigen-solves.
const TD_SLACK: f64 = 1e-8;

fn config_err(path: &str, msg: impl Into<String>) -> Error {
    Error::Config {
        path: path.into(),
        msg: msg.into(),
    }
}

/// ½σ_X + ⅓σ_Y + ¼σ_Z.
pub fn two_level_h() -> CMat {
    sigma_x() * re(0.5) + sigma_y() * re(1.0 / 3.0) + sigma_z() * re(0.25)
}

/// A₁ and A₂ of the two-level damped system.
pub fn open_ode_parts() -> (CMat, CMat) {
    let a1 = CMat::from_diagonal(&CVec::from_vec(vec![re(0.6), re(1.4)]));
    let a2 = CMat::from_row_slice(2, 2, &[re(1.25), I, -I, re(1.25)]);
    (a1, a2)
}

/// (g, β) of the three Fokker–Planck cases.
pub fn fokker_planck_case(case: u8) -> Option<(ScalarFn, ScalarFn)> {
    match case {
        1 => Some((ScalarFn::monomial(0.5, 1), ScalarFn::monomial(0.5, 1))),
        2 => Some((ScalarFn::monomial(0.5, 1), ScalarFn::real_poly(&[0.3]))),
        3 => Some((ScalarFn::monomial(0.5, 3), ScalarFn::monomial(0.3, 1))),
        _ => None,
    }
}

fn qubit_observables(cfg: &ExperimentConfig) -> Result<Vec<(String, CMat)>> {
    cfg.physics
        .observables
        .iter()
        .map(|name| {
            let m = match name.as_str() {
                "sigma_x" => sigma_x(),
                "sigma_y" => sigma_y(),
                "sigma_z" => sigma_z(),
                other => return Err(config_err("physics.observables", format!("unknown two-level observable `{other}`"))),
            };
            Ok((name.clone(), m))
        })
        .collect()
}

/// `x` and `x2` on the first spatial mode, identity on the remaining `rest` dims.
fn position_observables(cfg: &ExperimentConfig, basis: &HermiteBasis, rest: usize) -> Result<Vec<(String, CMat)>> {
    let id = CMat::identity(rest, rest);
    cfg.physics
        .observables
        .iter()
        .map(|name| {
            let m = match name.as_str() {
                "x" => position_matrix(basis),
                "x2" => multiplication_operator(&ScalarFn::monomial(1.0, 2), basis)?,
                other => return Err(config_err("physics.observables", format!("unknown position observable `{other}`"))),
            };
            Ok((name.clone(), kron(&m, &id)))
        })
        .collect()
}

fn initial_state(cfg: &ExperimentConfig, default: &[C64]) -> Result<CVec> {
    let v = match &cfg.physics.initial {
        Some(pairs) => CVec::from_iterator(pairs.len(), pairs.iter().map(|[a, b]| c(*a, *b))),
        None => CVec::from_column_slice(default),
    };
    if v.len() != default.len() {
        return Err(config_err(
            "physics.initial",
            format!("expected {} amplitudes, got {}", default.len(), v.len()),
        ));
    }
    if v.norm() == 0.0 {
        return Err(config_err("physics.initial", "initial state is zero"));
    }
    Ok(normalize(&v))
}

/// Gaussian density N(μ, σ²) on one axis, projected and normalized as a state.
fn gaussian_state(mu: f64, var: f64, basis: &HermiteBasis) -> Result<CVec> {
    let q = ScalarFn::from_real_fn(move |x| (-(x - mu).powi(2) / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt());
    Ok(normalize(&project_state(&q, basis)?.coeffs))
}

fn pipeline_config(cfg: &ExperimentConfig, omega: f64, state: ClockState, eta: Option<EtaMode>) -> Result<PipelineConfig> {
    Ok(PipelineConfig {
        clock: cfg.clock_spec(omega)?,
        clock_state: state,
        eta,
        recovery: RecoverySpec::default(),
        method: cfg.method(),
        build: BuildOptions {
            dense_cap: cfg.numerics.dense_cap,
            ..BuildOptions::default()
        },
        allow_under_resolved: cfg.numerics.allow_under_resolved,
    })
}

fn eta_mode(cfg: &ExperimentConfig) -> Result<EtaMode> {
    EtaMode::new(cfg.numerics.n_eta, cfg.numerics.scale_eta)
}

fn oracle_steps(cfg: &ExperimentConfig, gen: &Generator) -> usize {
    cfg.numerics
        .oracle_steps
        .unwrap_or_else(|| default_steps(gen, 0.0, cfg.physics.t_final))
}

/// Rows for one width, plus the final-time infidelity and bound violations.
#[derive(Debug, Default)]
struct WidthRun {
    rows: Vec<Row>,
    violations: usize,
    final_infidelity: Option<f64>,
}

/// Compare recovered densities against exact pure states.
fn compare(steps: &[PipelineStep], exact: &[CVec], omega: f64, obs: &[(String, CMat)], pred: &[f64], label: &str) -> Result<WidthRun> {
    let mut run = WidthRun::default();
    for ((step, psi), &pred) in steps.iter().zip(exact).zip(pred) {
        let fid = fidelity(&step.rho, psi)?;
        let td = trace_distance(&step.rho, &outer(psi, psi))?;
        if td > (1.0 - fid).max(0.0).sqrt() + TD_SLACK {
            run.violations += 1;
        }
        for (name, o) in obs {
            let mut row = Row::new(
                step.t,
                omega,
                format!("{name}{label}"),
                expectation(&step.rho, o).re,
                psi.dotc(&(o * psi)).re,
            );
            row.fidelity = fid;
            row.pred_one_minus_fid = pred;
            row.succ_prob = step.success_probability;
            row.wall_ms = step.wall_ms;
            run.rows.push(row);
        }
        run.final_infidelity = Some(1.0 - fid);
    }
    Ok(run)
}

fn collect_widths(report: &mut ExperimentReport, runs: Vec<WidthRun>) {
    for r in runs {
        report.rows.extend(r.rows);
        report.trace_distance_violations += r.violations;
    }
}

/// Two-level H(t) = a g(t) h swept over clock widths.
pub(super) fn hamiltonian(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let h = two_level_h() * re(cfg.physics.a);
    let g = cfg.g();
    let gen = Generator::separable(vec![(g.clone(), h.clone())])?;
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let y0 = initial_state(cfg, &[re(s), re(s)])?;
    let times = cfg.times();
    let steps = oracle_steps(cfg, &gen);
    let consts: Vec<f64> = times
        .iter()
        .map(|&t| error_constants(&gen, &y0, t, steps).map(|ec| ec.c))
        .collect::<Result<_>>()?;
    let exact: Vec<CVec> = times.iter().map(|&t| commuting_exact(&h, &g, t) * &y0).collect();
    let obs = qubit_observables(cfg)?;
    let profile: ClockProfile = cfg.numerics.profile.into();
    let predicts = cfg.numerics.clock_state == ClockStateKind::Pure;

    let runs: Vec<WidthRun> = cfg
        .numerics
        .omegas
        .par_iter()
        .map(|&omega| {
            let pc = pipeline_config(cfg, omega, cfg.clock_state(omega), None)?;
            let steps = Pipeline::new(&gen, &y0, &pc)?.run(&times)?;
            let pred: Vec<f64> = consts
                .iter()
                .map(|c| if predicts { c * profile.variance(omega) } else { f64::NAN })
                .collect();
            compare(&steps, &exact, omega, &obs, &pred, "")
        })
        .collect::<Result<_>>()?;

    let mut report = ExperimentReport::new(cfg, "closed form exp(-i a (int g) h) y0; C from oracle propagator");
    let points: Vec<(f64, f64)> = cfg
        .numerics
        .omegas
        .iter()
        .zip(&runs)
        .filter_map(|(&w, r)| r.final_infidelity.map(|e| (w, e)))
        .collect();
    let c_final = *consts.last().expect("at least two times");
    match fit_error_law(&points, c_final * profile.variance(1.0)) {
        Ok(mut fit) => {
            fit.t = cfg.physics.t_final;
            report.fits.push(fit);
        }
        Err(e) => report.notes.push(format!("no error-law fit: {e}")),
    }
    report.notes.push(format!("C(T) = {c_final:.6e}"));
    let clock_dim = cfg.clock_spec(cfg.numerics.omegas[0])?.dim();
    report.set_dims(&[("system", 2), ("clock", clock_dim)]);
    collect_widths(&mut report, runs);
    Ok(report)
}

/// du/dt = −i a g(t)(A₁ − iA₂)u with an η mode.
pub(super) fn open_ode(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let (a1, a2) = open_ode_parts();
    let m = (a1 - a2 * I) * re(cfg.physics.a);
    let g = cfg.g();
    let gen = Generator::separable(vec![(g.clone(), m.clone())])?;
    let u0 = initial_state(cfg, &[re((2.0f64 / 3.0).sqrt()), re((1.0f64 / 3.0).sqrt())])?;
    let times = cfg.times();
    let exact: Vec<CVec> = times
        .iter()
        .map(|&t| normalize(&(expm(&(&m * (-I * g.integrate(0.0, t)))) * &u0)))
        .collect();
    let obs = qubit_observables(cfg)?;
    let eta = eta_mode(cfg)?;
    let nan = vec![f64::NAN; times.len()];
    let runs: Vec<WidthRun> = cfg
        .numerics
        .omegas
        .par_iter()
        .map(|&omega| {
            let pc = pipeline_config(cfg, omega, cfg.clock_state(omega), Some(eta))?;
            let steps = Pipeline::new(&gen, &u0, &pc)?.run(&times)?;
            compare(&steps, &exact, omega, &obs, &nan, "")
        })
        .collect::<Result<_>>()?;
    let mut report = ExperimentReport::new(cfg, "closed form exp(-i a (int g) A) u0, normalized");
    let clock_dim = cfg.clock_spec(cfg.numerics.omegas[0])?.dim();
    report.set_dims(&[("eta", eta.dim()), ("system", 2), ("clock", clock_dim)]);
    collect_widths(&mut report, runs);
    Ok(report)
}

/// Fokker–Planck moments against the Ornstein–Uhlenbeck closed form.
pub(super) fn fokker_planck(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let (g, beta) = match cfg.physics.case {
        Some(k) => fokker_planck_case(k).ok_or_else(|| config_err("physics.case", format!("unknown case {k}")))?,
        None => (cfg.g(), cfg.beta()),
    };
    let basis = HermiteBasis::new(cfg.numerics.n_u, cfg.numerics.scale_u)?;
    let gen = fokker_planck_generator(&g, &beta, basis)?;
    let (mu0, var0) = (cfg.physics.mu0, cfg.physics.var0);
    let u0 = gaussian_state(mu0, var0, &basis)?;
    let obs = position_observables(cfg, &basis, 1)?;
    let times = cfg.times();
    let moments = times
        .iter()
        .map(|&t| ou_moments(&g, &beta, mu0, var0 + mu0 * mu0, t))
        .collect::<Result<Vec<_>>>()?;
    let exact_states = moments
        .iter()
        .map(|m| gaussian_state(m.mu, m.var, &basis))
        .collect::<Result<Vec<_>>>()?;
    let eta = eta_mode(cfg)?;
    let runs: Vec<WidthRun> = cfg
        .numerics
        .omegas
        .par_iter()
        .map(|&omega| {
            let pc = pipeline_config(cfg, omega, cfg.clock_state(omega), Some(eta))?;
            let steps = Pipeline::new(&gen, &u0, &pc)?.run(&times)?;
            let mut run = compare(&steps, &exact_states, omega, &obs, &vec![f64::NAN; times.len()], "")?;
            // moments come from the closed form, not the projected Gaussian
            for row in &mut run.rows {
                let k = times.iter().position(|&t| t == row.t).expect("row time from the grid");
                let (x, x2) = crate::oracles::gaussian_observables(moments[k].mu, moments[k].var)?;
                row.exact = if row.observable == "x" { x } else { x2 };
                row.abs_err = (row.value - row.exact).abs();
            }
            Ok(run)
        })
        .collect::<Result<_>>()?;
    let mut report = ExperimentReport::new(
        cfg,
        "closed form Ornstein-Uhlenbeck moments; fidelity against the projected exact Gaussian",
    );
    let clock_dim = cfg.clock_spec(cfg.numerics.omegas[0])?.dim();
    report.set_dims(&[("eta", eta.dim()), ("x", basis.size()), ("clock", clock_dim)]);
    collect_widths(&mut report, runs);
    Ok(report)
}

/// Commuting-case protocol against e^{−i a (∫g) h}.
pub(super) fn commuting(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let h = two_level_h() * re(cfg.physics.a);
    let g = cfg.g();
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let y0 = initial_state(cfg, &[re(s), re(s)])?;
    let obs = qubit_observables(cfg)?;
    let times = cfg.times();
    let runs: Vec<WidthRun> = cfg
        .numerics
        .omegas
        .par_iter()
        .map(|&omega| {
            let clock = cfg.clock_spec(omega)?;
            let state = cfg.clock_state(omega);
            let mut run = WidthRun::default();
            for &t in &times {
                let started = std::time::Instant::now();
                let rho = commuting_protocol(&h, &g, &y0, t, &clock, &state)?;
                let wall = started.elapsed().as_secs_f64() * 1e3;
                let step = PipelineStep {
                    t,
                    success_probability: 1.0,
                    reduced_trace: crate::linalg::trace(&rho).re,
                    rho,
                    wall_ms: wall,
                };
                let psi = commuting_exact(&h, &g, t) * &y0;
                let part = compare(&[step], &[psi], omega, &obs, &[f64::NAN], "")?;
                run.rows.extend(part.rows);
                run.violations += part.violations;
            }
            Ok(run)
        })
        .collect::<Result<_>>()?;
    let mut report = ExperimentReport::new(cfg, "closed form exp(-i a (int g) h) y0");
    let clock_dim = cfg.clock_spec(cfg.numerics.omegas[0])?.dim();
    report.set_dims(&[("system", 2), ("clock", clock_dim)]);
    collect_widths(&mut report, runs);
    Ok(report)
}

/// Time-independent h under pure, uniform and mixed clocks.
pub(super) fn consistency(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let h = two_level_h() * re(cfg.physics.a);
    let gen = Generator::constant(h.clone())?;
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let y0 = initial_state(cfg, &[re(s), re(s)])?;
    let obs = qubit_observables(cfg)?;
    let times = cfg.times();
    let exact: Vec<CVec> = times.iter().map(|&t| expm_hermitian(&h, t) * &y0).collect();
    let omega = cfg.numerics.omegas[0];
    let profile: ClockProfile = cfg.numerics.profile.into();
    let states = [
        ("pure", ClockState::pure(profile, omega)),
        ("uniform", ClockState::Uniform),
        ("mixed", ClockState::mixed(profile, omega)),
    ];
    let nan = vec![f64::NAN; times.len()];
    let runs: Vec<WidthRun> = states
        .par_iter()
        .map(|(label, state)| {
            let pc = pipeline_config(cfg, omega, state.clone(), None)?;
            let steps = Pipeline::new(&gen, &y0, &pc)?.run(&times)?;
            compare(&steps, &exact, omega, &obs, &nan, &format!("[{label}]"))
        })
        .collect::<Result<_>>()?;
    let mut report = ExperimentReport::new(cfg, "closed form exp(-i a h t) y0");
    let clock = cfg.clock_spec(omega)?;
    if let ClockRepr::Galerkin(b) = &clock.repr {
        report.notes.push(format!(
            "truncation floor: Galerkin clock of {} functions, resolution {:.3e}",
            b.size(),
            b.resolution()
        ));
    }
    report.set_dims(&[("system", 2), ("clock", clock.dim())]);
    collect_widths(&mut report, runs);
    Ok(report)
}

/// Measured sparse-access cost of the assembled grid-clock H̄ against the bound.
pub(super) fn complexity(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let h = two_level_h() * re(cfg.physics.a);
    let g = cfg.g();
    let gen = Generator::separable(vec![(g, h)])?;
    let t_final = cfg.physics.t_final;
    let mut report = ExperimentReport::new(cfg, "sparse-access bound with eps = clock spacing");
    for &omega in &cfg.numerics.omegas {
        let clock = cfg.clock_spec(omega)?;
        let ClockRepr::Grid(grid) = &clock.repr else {
            return Err(config_err("numerics.clock", "complexity report needs a grid clock"));
        };
        let eps = grid.ds();
        let sys = build_dilated(&gen, &clock, None, BuildOptions::default())?;
        let stats = matrix_stats(&sys.hbar);
        let (mut s_h, mut h_max) = (0usize, 0.0f64);
        for s in grid.nodes() {
            let m = gen.matrix(s);
            s_h = s_h.max(Csr::from_dense(&m).max_row_nnz());
            h_max = h_max.max(max_abs(&m));
        }
        let j = sys.dim();
        let measured = measured_estimate(stats, t_final, eps, j)?;
        let bound = theorem4_estimate(s_h + 2, h_max, t_final, eps, j)?;
        let within = measured.sparsity <= bound.sparsity && measured.max_norm <= 1.0 / eps + h_max && measured.tau <= bound.tau;
        report.check(
            &format!("cost_bound[omega={omega}]"),
            within,
            format!(
                "s {} <= {}, max-norm {:.4e} <= {:.4e}, tau {:.4e} <= {:.4e}",
                measured.sparsity,
                bound.sparsity,
                measured.max_norm,
                1.0 / eps + h_max,
                measured.tau,
                bound.tau
            ),
        );
        for (name, value, limit) in [
            ("sparsity", measured.sparsity as f64, bound.sparsity as f64),
            ("max_norm", measured.max_norm, 1.0 / eps + h_max),
            ("tau", measured.tau, bound.tau),
            ("queries", measured.queries, bound.queries),
            ("gates", measured.gates, bound.gates),
        ] {
            report.rows.push(Row::new(t_final, omega, name, value, limit));
        }
        report.costs.extend([measured, bound]);
        report.set_dims(&[("system", 2), ("clock", clock.dim())]);
    }
    Ok(report)
}

fn parse_poly(src: &str, var: &str, path: &str) -> Result<ScalarFn> {
    ScalarFn::parse_poly(src, var).map_err(|e| config_err(path, e.to_string()))
}

/// Linear PDE from the `[pde]` table, checked against the oracle propagator
/// of the same spatial discretization.
pub(super) fn pde(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let pc = cfg.pde.as_ref().ok_or_else(|| config_err("pde", "missing [pde] table"))?;
    let mut terms = Vec::new();
    for (k, t) in pc.terms.iter().enumerate() {
        let time = parse_poly(&t.time, "t", &format!("pde.terms[{k}].time"))?;
        let space = parse_poly(&t.space, "x", &format!("pde.terms[{k}].space"))?;
        terms.push(PdeTerm::new(t.order, t.axis, SpaceTimeFn::separable(time, t.axis, space)));
    }
    let mut potential = SpaceTimeFn::zero();
    for (k, p) in pc.potential.iter().enumerate() {
        let time = parse_poly(&p.time, "t", &format!("pde.potential[{k}].time"))?.scale(c(p.re, p.im));
        let space = parse_poly(&p.space, "x", &format!("pde.potential[{k}].space"))?;
        potential = potential.plus(SpaceTimeFn::separable(time, 0, space));
    }
    let spec = LinearPdeSpec {
        dim: pc.dim,
        terms,
        potential,
        source: None,
    };
    let basis = HermiteBasis::new(cfg.numerics.n_u, cfg.numerics.scale_u)?;
    let names = space_modes(pc.dim);
    let bases: Bases = names.iter().map(|n| (n.clone(), ModeBasis::Hermite(basis))).collect();
    let gen = split_generator(&linear_pde_generator(&spec)?, &bases)?;
    let times = cfg.times();

    let mut u0 = CVec::from_element(1, re(1.0));
    for _ in 0..pc.dim {
        u0 = u0.kronecker(&gaussian_state(cfg.physics.mu0, cfg.physics.var0, &basis)?);
    }
    let rest = gen.dim() / basis.size();
    let obs = position_observables(cfg, &basis, rest)?;
    let steps = oracle_steps(cfg, &gen);
    let exact = times
        .iter()
        .map(|&t| Ok(normalize(&(time_ordered_propagator(&gen, 0.0, t, steps)? * &u0))))
        .collect::<Result<Vec<_>>>()?;
    let eta = if gen.anti_hermitian_part(&times) > 1e-10 {
        Some(eta_mode(cfg)?)
    } else {
        None
    };
    let nan = vec![f64::NAN; times.len()];
    let runs: Vec<WidthRun> = cfg
        .numerics
        .omegas
        .par_iter()
        .map(|&omega| {
            let pcfg = pipeline_config(cfg, omega, cfg.clock_state(omega), eta)?;
            let steps = Pipeline::new(&gen, &u0, &pcfg)?.run(&times)?;
            compare(&steps, &exact, omega, &obs, &nan, "")
        })
        .collect::<Result<_>>()?;

    let mut report = ExperimentReport::new(cfg, "oracle propagator (midpoint product) on the same spatial basis");
    let probes: Vec<Vec<f64>> = (-4..=4).map(|k| vec![k as f64 * 0.5; pc.dim]).collect();
    report.notes.extend(stability_warnings(&spec, &times, &probes));
    let clock_dim = cfg.clock_spec(cfg.numerics.omegas[0])?.dim();
    let mut dims: Vec<(&str, usize)> = Vec::new();
    if let Some(e) = &eta {
        dims.push(("eta", e.dim()));
    }
    dims.extend(names.iter().map(|n| (n.as_str(), basis.size())));
    dims.push(("clock", clock_dim));
    report.set_dims(&dims);
    collect_widths(&mut report, runs);
    Ok(report)
}
