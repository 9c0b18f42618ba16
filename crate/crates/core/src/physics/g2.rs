//! Analytic second-order correlation models.

use num_complex::Complex64;

use super::{domain, EmitterParams, InterferenceModel, PhysicsError};

/// Resonance-fluorescence `g²(τ)` of a driven two-level emitter with
/// visibility `a`:
///
/// `1 − a e^{−3Γ|τ|/4} (cos Ω_Γ|τ| + 3Γ/(4Ω_Γ) sin Ω_Γ|τ|)`,
/// `Ω_Γ = √(Ω_c² − Γ²/16)`.
///
/// Below `Ω_c = Γ/4` the damped Rabi frequency is imaginary and the
/// expression is continued with `cosh`/`sinh`; at the boundary the
/// `sin(Ω_Γτ)/Ω_Γ → τ` limit is used.
pub fn g2_driven(tau: f64, a: f64, emitter: &EmitterParams) -> Result<f64, PhysicsError> {
    if !(0.0..=1.0).contains(&a) {
        return Err(domain(format!("visibility a must lie in [0, 1], got {a}")));
    }
    Ok(g2_driven_unchecked(tau, a, emitter.decay_rate(), emitter.rabi_frequency()))
}

/// [`g2_driven`] on raw rates, without range checks on `a`.
pub(crate) fn g2_driven_unchecked(tau: f64, a: f64, decay: f64, rabi: f64) -> f64 {
    let t = tau.abs();
    let damping = 0.75 * decay;
    let quarter = 0.25 * decay;
    let detuned = rabi * rabi - quarter * quarter;
    let w = detuned.abs().sqrt();
    // slowest envelope is e^{-Γt/2}; beyond this the correlation term is < 1e-300
    if decay * t > 1400.0 {
        return 1.0;
    }
    let x = w * t;
    let (even, odd_over_w) = if detuned >= 0.0 {
        (x.cos(), t * sinc(x))
    } else {
        (x.cosh(), t * sinhc(x))
    };
    1.0 - a * (-damping * t).exp() * (even + damping * odd_over_w)
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        1.0 - x2 / 6.0 + x2 * x2 / 120.0
    } else {
        x.sin() / x
    }
}

fn sinhc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        1.0 + x2 / 6.0 + x2 * x2 / 120.0
    } else {
        x.sinh() / x
    }
}

/// Bunching model `1 + a e^{−Γ|τ|}`.
pub fn g2_bunching(tau: f64, a: f64, decay_rate: f64) -> Result<f64, PhysicsError> {
    if !(a >= 0.0) {
        return Err(domain(format!("bunching amplitude must be non-negative, got {a}")));
    }
    if !(decay_rate > 0.0) {
        return Err(domain(format!("decay rate must be positive, got {decay_rate}")));
    }
    Ok(1.0 + a * (-decay_rate * tau.abs()).exp())
}

/// Weak-drive limit of the transmitted-field `g²(0)`.
///
/// With `x = α e^{iφ} S(Δ)` and `R = 2Γ₂/Γ` the ratio of total to coherent
/// scattering, the transmitted field `ε + cσ` gives
/// `g²(0) = (1 + 4 Re x + 4R|x|²) / (1 + 2 Re x + R|x|²)²`.
pub fn weak_drive_transmitted_g2_zero(
    model: &InterferenceModel,
    emitter: &EmitterParams,
    detuning_hz: f64,
) -> Result<f64, PhysicsError> {
    let s = super::lorentzian_response(detuning_hz, emitter.gamma_fwhm_hz())?;
    let x = model.alpha() * s * Complex64::from_polar(1.0, model.phase());
    let r = 2.0 * emitter.coherence_decay_rate() / emitter.decay_rate();
    let x2 = x.norm_sqr();
    let num = 1.0 + 4.0 * x.re + 4.0 * r * x2;
    let den = 1.0 + 2.0 * x.re + r * x2;
    Ok(num / (den * den))
}
