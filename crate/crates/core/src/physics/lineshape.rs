//! Lorentzian response, far-field extinction and their Gaussian-broadened
//! counterparts.

use num_complex::Complex64;
use std::f64::consts::{PI, SQRT_2};

use super::faddeeva::Faddeeva;
use super::quadrature::GaussHermite;
use super::{domain, EmitterParams, InterferenceModel, PhysicsError, SpectralDiffusion};

/// Fewest Gauss-Hermite points accepted for diffusion averages.
pub const MIN_QUADRATURE_POINTS: usize = 16;

/// Complex response `S(Δ) = 1 / (1 − 2iΔ/γ)` of a line of FWHM `γ`.
pub fn lorentzian_response(detuning_hz: f64, gamma_fwhm_hz: f64) -> Result<Complex64, PhysicsError> {
    if !(gamma_fwhm_hz > 0.0) || !gamma_fwhm_hz.is_finite() {
        return Err(domain(format!("gamma_fwhm must be positive, got {gamma_fwhm_hz}")));
    }
    Ok(response(detuning_hz, gamma_fwhm_hz))
}

#[inline]
fn response(detuning_hz: f64, gamma_fwhm_hz: f64) -> Complex64 {
    let u = 2.0 * detuning_hz / gamma_fwhm_hz;
    let d = 1.0 + u * u;
    Complex64::new(1.0 / d, u / d)
}

#[inline]
fn interference(detuning_hz: f64, gamma_fwhm_hz: f64, alpha: f64, phase: f64) -> f64 {
    let field = Complex64::new(1.0, 0.0)
        + alpha * response(detuning_hz, gamma_fwhm_hz) * Complex64::from_polar(1.0, phase);
    field.norm_sqr()
}

/// `|1 + α S(Δ) e^{iφ}|²`, normalised so the far-detuned limit is one.
pub fn extinction_intensity(
    detuning_hz: f64,
    model: &InterferenceModel,
    emitter: &EmitterParams,
) -> Result<f64, PhysicsError> {
    lorentzian_response(detuning_hz, emitter.gamma_fwhm_hz())?;
    Ok(interference(
        detuning_hz,
        emitter.gamma_fwhm_hz(),
        model.alpha(),
        model.phase(),
    ))
}

/// Extinction averaged over Gaussian resonance offsets, by Gauss-Hermite
/// quadrature with `quadrature_points` nodes.
pub fn extinction_intensity_diffused(
    detuning_hz: f64,
    model: &InterferenceModel,
    emitter: &EmitterParams,
    diffusion: &SpectralDiffusion,
    quadrature_points: usize,
) -> Result<f64, PhysicsError> {
    if quadrature_points < MIN_QUADRATURE_POINTS {
        return Err(PhysicsError::Config(format!(
            "need at least {MIN_QUADRATURE_POINTS} quadrature points, got {quadrature_points}"
        )));
    }
    let rule = GaussHermite::new(quadrature_points);
    extinction_intensity_diffused_with(&rule, detuning_hz, model, emitter, diffusion)
}

/// Same as [`extinction_intensity_diffused`] with a prebuilt rule.
pub fn extinction_intensity_diffused_with(
    rule: &GaussHermite,
    detuning_hz: f64,
    model: &InterferenceModel,
    emitter: &EmitterParams,
    diffusion: &SpectralDiffusion,
) -> Result<f64, PhysicsError> {
    if rule.len() < MIN_QUADRATURE_POINTS {
        return Err(PhysicsError::Config(format!(
            "need at least {MIN_QUADRATURE_POINTS} quadrature points, got {}",
            rule.len()
        )));
    }
    let gamma = emitter.gamma_fwhm_hz();
    let (alpha, phase) = (model.alpha(), model.phase());
    if diffusion.sigma_hz() == 0.0 {
        return Ok(interference(detuning_hz, gamma, alpha, phase));
    }
    Ok(rule.gaussian_mean(diffusion.sigma_hz(), |offset| {
        interference(detuning_hz - offset, gamma, alpha, phase)
    }))
}

/// Gaussian average of the complex response, `⟨S(Δ − δ)⟩` with
/// `δ ~ N(0, σ²)`, in closed form through the Faddeeva function.
pub fn diffused_response(
    faddeeva: &Faddeeva,
    detuning_hz: f64,
    gamma_fwhm_hz: f64,
    sigma_hz: f64,
) -> Complex64 {
    if sigma_hz == 0.0 {
        return response(detuning_hz, gamma_fwhm_hz);
    }
    let z = Complex64::new(detuning_hz, 0.5 * gamma_fwhm_hz) / (SQRT_2 * sigma_hz);
    faddeeva.eval(z) * (gamma_fwhm_hz * PI.sqrt() / (2.0 * SQRT_2 * sigma_hz))
}

/// Closed-form Gaussian-broadened extinction:
/// `1 + 2α Re(e^{iφ}⟨S⟩) + α² Re⟨S⟩`, using `|S|² = Re S`.
pub fn extinction_intensity_voigt(
    faddeeva: &Faddeeva,
    detuning_hz: f64,
    model: &InterferenceModel,
    emitter: &EmitterParams,
    diffusion: &SpectralDiffusion,
) -> f64 {
    let s = diffused_response(
        faddeeva,
        detuning_hz,
        emitter.gamma_fwhm_hz(),
        diffusion.sigma_hz(),
    );
    let a = model.alpha();
    1.0 + 2.0 * a * (Complex64::from_polar(1.0, model.phase()) * s).re + a * a * s.re
}

/// Peak-normalised Lorentzian, `1 / (1 + (2Δ/γ)²)`.
pub fn lorentzian_ple(detuning_hz: f64, gamma_fwhm_hz: f64) -> f64 {
    let u = 2.0 * detuning_hz / gamma_fwhm_hz;
    1.0 / (1.0 + u * u)
}

/// Lorentzian of FWHM `γ` convolved with a Gaussian of standard deviation
/// `σ`, scaled so that it reduces to [`lorentzian_ple`] when `σ = 0`.
pub fn voigt_ple(faddeeva: &Faddeeva, detuning_hz: f64, gamma_fwhm_hz: f64, sigma_hz: f64) -> f64 {
    if sigma_hz == 0.0 {
        return lorentzian_ple(detuning_hz, gamma_fwhm_hz);
    }
    diffused_response(faddeeva, detuning_hz, gamma_fwhm_hz, sigma_hz).re
}

/// Numerical FWHM of the Voigt profile (Hz).
pub fn voigt_fwhm(faddeeva: &Faddeeva, gamma_fwhm_hz: f64, sigma_hz: f64) -> f64 {
    let peak = voigt_ple(faddeeva, 0.0, gamma_fwhm_hz, sigma_hz);
    let half = 0.5 * peak;
    let mut lo = 0.0;
    let mut hi = gamma_fwhm_hz + 3.0 * sigma_hz;
    while voigt_ple(faddeeva, hi, gamma_fwhm_hz, sigma_hz) > half {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if voigt_ple(faddeeva, mid, gamma_fwhm_hz, sigma_hz) > half {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-12 * hi {
            break;
        }
    }
    lo + hi
}

/// Olivero-Longbothum approximation of the Voigt FWHM, accurate to ~0.02 %.
pub fn voigt_fwhm_olivero(lorentz_fwhm: f64, gauss_fwhm: f64) -> f64 {
    0.5346 * lorentz_fwhm + (0.2166 * lorentz_fwhm * lorentz_fwhm + gauss_fwhm * gauss_fwhm).sqrt()
}
