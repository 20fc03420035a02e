use autonomize::clock::{ClockProfile, ClockSpec, ClockState, GridClock, MomentumScheme};
use autonomize::linalg::{c, expm, normalize, re, CMat, CVec};
use autonomize::operator::Generator;
use autonomize::oracles::{commuting_exact, fidelity};
use autonomize::scalar::ScalarFn;
use autonomize::schrodinger::{full_pipeline, xi_state, EtaMode, PipelineConfig, RecoverySpec};
use autonomize::{clock, Error};

#[test]
fn xi_ground_overlap_matches_erfc() {
    // ξ basis of scale 2
    let x = xi_state(&EtaMode::new(64, 0.5).unwrap()).unwrap();
    let s: f64 = 2.0;
    let pi = std::f64::consts::PI;
    let closed = 2.0 * (pi * s * s).powf(-0.25) * s * (pi / 2.0).sqrt() * (s * s / 2.0).exp() * libm::erfc(s / 2f64.sqrt());
    assert!((x.xi_coeffs[0].re - closed).abs() < 1e-9, "{} vs {closed}", x.xi_coeffs[0].re);
}

#[test]
fn damped_qubit_recovers_normalized_solution() {
    let a = CMat::from_row_slice(2, 2, &[c(0.2, -0.5), re(0.3), re(0.3), c(-0.1, -0.2)]);
    let gen = Generator::separable(vec![(ScalarFn::real_poly(&[1.0, -1.0]), a.clone())]).unwrap();
    let u0 = normalize(&CVec::from_vec(vec![re(1.0), re(0.5)]));
    let cfg = PipelineConfig {
        clock: ClockSpec::galerkin(48, 0.2).unwrap(),
        clock_state: ClockState::pure(ClockProfile::Gaussian, 0.05),
        eta: Some(EtaMode::new(64, 2.0).unwrap()),
        recovery: RecoverySpec::default(),
        method: clock::Method::Auto,
        build: clock::BuildOptions::default(),
        allow_under_resolved: false,
    };
    let times = [0.0, 0.25, 0.5];
    let out = full_pipeline(&gen, &u0, &times, &cfg, &[]).unwrap();
    for (step, _) in out {
        let t = step.t;
        let exact = normalize(&(expm(&(&a * c(0.0, -(t - t * t / 2.0)))) * &u0));
        let f = fidelity(&step.rho, &exact).unwrap();
        assert!(f > 0.999, "t = {t}: fidelity {f}");
        assert!(step.success_probability > 0.0 && step.success_probability <= 1.0);
    }
}

#[test]
fn non_hermitian_without_eta_is_rejected() {
    let gen = Generator::constant(CMat::from_row_slice(2, 2, &[c(0.0, -1.0), re(0.0), re(0.0), re(1.0)])).unwrap();
    let cfg = PipelineConfig {
        clock: ClockSpec::galerkin(16, 0.3).unwrap(),
        clock_state: ClockState::pure(ClockProfile::Gaussian, 0.2),
        eta: None,
        recovery: RecoverySpec::default(),
        method: clock::Method::Auto,
        build: clock::BuildOptions::default(),
        allow_under_resolved: false,
    };
    let u0 = CVec::from_vec(vec![re(1.0), re(0.0)]);
    let err = full_pipeline(&gen, &u0, &[0.1], &cfg, &[]).unwrap_err();
    assert!(
        matches!(err, Error::Stage { ref source, .. } if matches!(**source, Error::NonHermitianGenerator { .. })),
        "{err}"
    );
}

#[test]
fn commuting_protocol_on_spectral_grid() {
    let h = autonomize::harness::two_level_h();
    let g = ScalarFn::linear();
    let y0 = normalize(&CVec::from_vec(vec![re(1.0), re(1.0)]));
    let t = 0.5;
    let grid = GridClock::covering(256, -0.06, 0.56, MomentumScheme::Spectral).unwrap();
    let rho = clock::commuting_protocol(
        &h,
        &g,
        &y0,
        t,
        &ClockSpec::grid(grid),
        &ClockState::pure(ClockProfile::Gaussian, 0.01),
    )
    .unwrap();
    let exact = commuting_exact(&h, &g, t) * &y0;
    assert!(fidelity(&rho, &exact).unwrap() > 1.0 - 1e-4);
}
