//! Ground-truth propagators, exact solutions, error constants and metrics.

use crate::clock::ClockProfile;
use crate::error::{Error, Result};
use crate::galerkin::quadrature::composite_legendre;
use crate::linalg::{expm, expm_hermitian, hermitian_defect, hermitian_eig, max_abs, re, CMat, CVec};
use crate::operator::Generator;
use crate::scalar::ScalarFn;

/// Eigenvalue tolerance for accepting a density as positive semidefinite.
pub const PSD_TOL: f64 = 1e-9;

/// max(10³, 100·|t1 − t0|·max_t ‖H(t)‖_max) sampled on the interval.
pub fn default_steps(gen: &Generator, t0: f64, t1: f64) -> usize {
    let hmax = (0..=8)
        .map(|k| max_abs(&gen.matrix(t0 + (t1 - t0) * k as f64 / 8.0)))
        .fold(0.0, f64::max);
    (100.0 * (t1 - t0).abs() * hmax).ceil().max(1000.0) as usize
}

/// Midpoint exponential product approximating T e^{−i∫_{t0}^{t1} A}.
pub fn time_ordered_propagator(gen: &Generator, t0: f64, t1: f64, steps: usize) -> Result<CMat> {
    if steps == 0 {
        return Err(Error::invalid("time_ordered_propagator needs steps >= 1"));
    }
    let d = gen.dim();
    let dt = (t1 - t0) / steps as f64;
    let mut u = CMat::identity(d, d);
    if dt == 0.0 {
        return Ok(u);
    }
    for k in 0..steps {
        let h = gen.matrix(t0 + (k as f64 + 0.5) * dt);
        let step = if hermitian_defect(&h) < 1e-13 {
            expm_hermitian(&h, dt)
        } else {
            expm(&(h * re(-dt) * crate::linalg::I))
        };
        u = step * u;
    }
    Ok(u)
}

/// G(t)·t = ∫₀ᵗ g.
pub fn drift_integral(g: &ScalarFn, t: f64) -> f64 {
    g.integrate(0.0, t).re
}

/// e^{−i(∫₀ᵗ g) h}.
pub fn commuting_exact(h: &CMat, g: &ScalarFn, t: f64) -> CMat {
    expm_hermitian(h, drift_integral(g, t))
}

/// The constants governing the O(ω²) infidelity of the clock protocol.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorConstants {
    pub c_r: f64,
    pub c: f64,
    /// ⟨H²(t)⟩ on y(t).
    pub h2_t: f64,
    /// ⟨H²(0)⟩ on y₀.
    pub h2_0: f64,
    /// Re⟨y(t)|H(t) U_{t,0} H(0)|y₀⟩.
    pub cross: f64,
    /// ⟨H(t)⟩ on y(t).
    pub mean_t: f64,
    /// ⟨H(0)⟩ on y₀.
    pub mean_0: f64,
}

pub fn error_constants(gen: &Generator, y0: &CVec, t: f64, steps: usize) -> Result<ErrorConstants> {
    let h0 = gen.matrix(0.0);
    let ht = gen.matrix(t);
    let defect = hermitian_defect(&h0).max(hermitian_defect(&ht));
    if defect > 1e-10 {
        return Err(Error::NotHermitian { defect });
    }
    if (y0.norm() - 1.0).abs() > 1e-10 {
        return Err(Error::invalid("error_constants needs a unit initial state"));
    }
    let u = time_ordered_propagator(gen, 0.0, t, steps)?;
    let yt = &u * y0;
    let h0y = &h0 * y0;
    let hty = &ht * &yt;
    let h2_t = hty.norm_squared();
    let h2_0 = h0y.norm_squared();
    let cross = hty.dotc(&(&u * &h0y)).re;
    let mean_t = yt.dotc(&hty).re;
    let mean_0 = y0.dotc(&h0y).re;
    let c_r = h2_t + h2_0 - 2.0 * cross;
    let c = c_r - (mean_t - mean_0).powi(2);
    Ok(ErrorConstants {
        c_r,
        c,
        h2_t,
        h2_0,
        cross,
        mean_t,
        mean_0,
    })
}

fn check_density(rho: &CMat) -> Result<()> {
    let (vals, _) = hermitian_eig(rho);
    let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
    if min < -PSD_TOL {
        return Err(Error::NonPsd { min_eig: min });
    }
    Ok(())
}

/// ⟨ψ|ρ|ψ⟩.
pub fn fidelity(rho: &CMat, psi: &CVec) -> Result<f64> {
    if rho.nrows() != psi.len() {
        return Err(Error::DimensionMismatch(format!(
            "density of dim {} vs state of length {}",
            rho.nrows(),
            psi.len()
        )));
    }
    check_density(rho)?;
    Ok(psi.dotc(&(rho * psi)).re.clamp(0.0, 1.0))
}

/// ½‖ρ − σ‖₁.
pub fn trace_distance(rho: &CMat, sigma: &CMat) -> Result<f64> {
    if rho.shape() != sigma.shape() {
        return Err(Error::DimensionMismatch("trace distance of differently sized densities".into()));
    }
    check_density(rho)?;
    check_density(sigma)?;
    let (vals, _) = hermitian_eig(&(rho - sigma));
    Ok(0.5 * vals.iter().map(|v| v.abs()).sum::<f64>())
}

/// Mean, second moment and variance of an Ornstein–Uhlenbeck density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OuMoments {
    pub mu: f64,
    pub m: f64,
    pub var: f64,
}

/// Moments at time t for drift −g(t)x and diffusion β(t).
pub fn ou_moments(g: &ScalarFn, beta: &ScalarFn, mu0: f64, m0: f64, t: f64) -> Result<OuMoments> {
    if m0 < mu0 * mu0 {
        return Err(Error::invalid(format!("second moment {m0} below squared mean {}", mu0 * mu0)));
    }
    let big_g = g.antiderivative();
    let gt = big_g.eval_re(t);
    let (bg, b) = (big_g.clone(), beta.clone());
    let source = ScalarFn::from_real_fn(move |r| (2.0 * bg.eval_re(r)).exp() * 2.0 * b.eval_re(r));
    let inner = source.integrate(0.0, t).re;
    let mu = (-gt).exp() * mu0;
    let m = (-2.0 * gt).exp() * (m0 + inner);
    let var = m - mu * mu;
    if !(var > 0.0) {
        return Err(Error::invalid(format!("nonpositive variance {var}")));
    }
    Ok(OuMoments { mu, m, var })
}

/// (⟨x̂⟩, ⟨x̂²⟩) for the normalized amplitude √N(μ, σ²).
pub fn gaussian_observables(mu: f64, var: f64) -> Result<(f64, f64)> {
    if !(var > 0.0) {
        return Err(Error::invalid(format!("variance must be positive, got {var}")));
    }
    Ok((mu, var / 2.0 + mu * mu))
}

/// y_ω(t) = ∫ δ_ω(s − t) U_{s,s−t} y₀ ds by composite Gauss–Legendre with
/// `quad_points` nodes per panel. Not normalized.
pub fn classical_y_omega(
    gen: &Generator,
    y0: &CVec,
    t: f64,
    omega: f64,
    profile: ClockProfile,
    quad_points: usize,
    steps: usize,
) -> Result<CVec> {
    if !(omega > 0.0) || quad_points == 0 {
        return Err(Error::invalid("classical_y_omega needs ω > 0 and at least one node"));
    }
    let half = match profile {
        ClockProfile::Gaussian => 8.0 * omega,
        _ => omega,
    };
    let rule = composite_legendre(t - half, t + half, &[t], omega, quad_points);
    let mut acc = CVec::zeros(y0.len());
    for (&s, &w) in rule.nodes.iter().zip(&rule.weights) {
        let weight = w * profile.density(s - t, omega);
        if weight == 0.0 {
            continue;
        }
        let u = time_ordered_propagator(gen, s - t, s, steps)?;
        acc += (u * y0) * re(weight);
    }
    Ok(acc)
}
