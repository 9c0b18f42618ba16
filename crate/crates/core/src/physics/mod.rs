//! Closed-form physics of a two-level emitter interfering with a drive field
//! in a single-mode waveguide.

mod bloch;
mod coherent;
mod coupling;
pub mod faddeeva;
mod g2;
mod lineshape;
pub mod quadrature;

pub use bloch::{
    bloch_g2_oracle, liouvillian, steady_state, transmitted_field_ratio, DetectionChannel,
    OracleConfig, SteadyState,
};
pub use coherent::coherent_amplitudes;
pub use coupling::{beta_factor, cooperativity_from_transmission, lifetime_linewidth_ratio};
pub use g2::{g2_bunching, g2_driven, weak_drive_transmitted_g2_zero};
pub(crate) use g2::g2_driven_unchecked as g2_driven_rates;
pub use lineshape::{
    diffused_response, extinction_intensity, extinction_intensity_diffused,
    extinction_intensity_diffused_with, extinction_intensity_voigt, lorentzian_ple,
    lorentzian_response, voigt_fwhm, voigt_fwhm_olivero, voigt_ple,
};

use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};
use thiserror::Error;

use crate::units;

/// Ratio `Ω_c/Γ` below which the drive counts as weak.
pub const WEAK_DRIVE_RATIO: f64 = 0.05;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PhysicsError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("steady state not reached after {horizon:.3e} s (last change {last_change:.3e}, tolerance {tolerance:.1e})")]
    Convergence {
        horizon: f64,
        last_change: f64,
        tolerance: f64,
    },
}

fn domain(msg: impl Into<String>) -> PhysicsError {
    PhysicsError::Domain(msg.into())
}

/// A value with its standard uncertainty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub sigma: f64,
}

impl Estimate {
    pub fn new(value: f64, sigma: f64) -> Self {
        Self { value, sigma }
    }

    pub fn exact(value: f64) -> Self {
        Self { value, sigma: 0.0 }
    }
}

/// Parameters of the two-level transition.
///
/// `gamma_fwhm_hz` is the homogeneous line width entering the Lorentzian
/// response. When it exceeds the lifetime limit `Γ/2π` the excess is carried
/// by pure dephasing in the dynamical models.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmitterParams {
    gamma_fwhm_hz: f64,
    decay_rate: f64,
    rabi_frequency: f64,
    resonance_frequency_hz: f64,
}

impl EmitterParams {
    pub fn new(
        gamma_fwhm_hz: f64,
        decay_rate: f64,
        rabi_frequency: f64,
        resonance_frequency_hz: f64,
    ) -> Result<Self, PhysicsError> {
        if !(gamma_fwhm_hz > 0.0 && gamma_fwhm_hz.is_finite()) {
            return Err(domain(format!("gamma_fwhm must be positive, got {gamma_fwhm_hz}")));
        }
        if !(decay_rate > 0.0 && decay_rate.is_finite()) {
            return Err(domain(format!("decay_rate must be positive, got {decay_rate}")));
        }
        if !(rabi_frequency >= 0.0 && rabi_frequency.is_finite()) {
            return Err(domain(format!(
                "rabi_frequency must be non-negative, got {rabi_frequency}"
            )));
        }
        if !resonance_frequency_hz.is_finite() {
            return Err(domain("resonance_frequency must be finite"));
        }
        let lifetime_fwhm = units::linewidth_from_decay_rate(decay_rate);
        if gamma_fwhm_hz < lifetime_fwhm * (1.0 - 1e-9) {
            return Err(domain(format!(
                "gamma_fwhm {gamma_fwhm_hz:.6e} Hz is below the lifetime limit {lifetime_fwhm:.6e} Hz"
            )));
        }
        Ok(Self {
            gamma_fwhm_hz,
            decay_rate,
            rabi_frequency,
            resonance_frequency_hz,
        })
    }

    /// Lifetime-limited emitter: `gamma_fwhm = Γ/2π`, drive given as `Ω_c/Γ`.
    pub fn lifetime_limited(gamma_fwhm_hz: f64, rabi_over_decay: f64) -> Result<Self, PhysicsError> {
        let decay = units::decay_rate_from_linewidth(gamma_fwhm_hz);
        Self::new(gamma_fwhm_hz, decay, rabi_over_decay * decay, 0.0)
    }

    pub fn gamma_fwhm_hz(&self) -> f64 {
        self.gamma_fwhm_hz
    }

    pub fn decay_rate(&self) -> f64 {
        self.decay_rate
    }

    pub fn rabi_frequency(&self) -> f64 {
        self.rabi_frequency
    }

    pub fn resonance_frequency_hz(&self) -> f64 {
        self.resonance_frequency_hz
    }

    pub fn rabi_over_decay(&self) -> f64 {
        self.rabi_frequency / self.decay_rate
    }

    pub fn is_weak_drive(&self) -> bool {
        self.rabi_over_decay() < WEAK_DRIVE_RATIO
    }

    /// Decay rate of the optical coherence `Γ₂ = Γ/2 + γ*` (rad/s).
    pub fn coherence_decay_rate(&self) -> f64 {
        units::coherence_rate_from_fwhm(self.gamma_fwhm_hz).max(0.5 * self.decay_rate)
    }

    /// Pure dephasing rate `γ*` (rad/s), zero for a lifetime-limited line.
    pub fn pure_dephasing_rate(&self) -> f64 {
        (self.coherence_decay_rate() - 0.5 * self.decay_rate).max(0.0)
    }

    pub fn with_rabi_frequency(mut self, rabi_frequency: f64) -> Result<Self, PhysicsError> {
        self.rabi_frequency = rabi_frequency;
        Self::new(
            self.gamma_fwhm_hz,
            self.decay_rate,
            self.rabi_frequency,
            self.resonance_frequency_hz,
        )
    }
}

/// Relative weight and phase of resonance fluorescence against the drive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterferenceModel {
    alpha_weight: f64,
    phase: f64,
}

impl InterferenceModel {
    pub fn new(alpha_weight: f64, phase: f64) -> Result<Self, PhysicsError> {
        if !(alpha_weight >= 0.0 && alpha_weight.is_finite()) {
            return Err(domain(format!("alpha must be non-negative, got {alpha_weight}")));
        }
        if !phase.is_finite() {
            return Err(domain("phase must be finite"));
        }
        let mut phase = phase.rem_euclid(TAU);
        if phase >= TAU {
            phase = 0.0;
        }
        Ok(Self { alpha_weight, phase })
    }

    /// Absorptive configuration, `φ = π`.
    pub fn absorptive(alpha_weight: f64) -> Result<Self, PhysicsError> {
        Self::new(alpha_weight, PI)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha_weight
    }

    pub fn phase(&self) -> f64 {
        self.phase
    }
}

/// Slow Gaussian wandering of the resonance frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralDiffusion {
    gaussian_sigma_hz: f64,
}

impl SpectralDiffusion {
    pub fn new(gaussian_sigma_hz: f64) -> Result<Self, PhysicsError> {
        if !(gaussian_sigma_hz >= 0.0 && gaussian_sigma_hz.is_finite()) {
            return Err(domain(format!(
                "gaussian sigma must be non-negative, got {gaussian_sigma_hz}"
            )));
        }
        Ok(Self { gaussian_sigma_hz })
    }

    pub fn sigma_hz(&self) -> f64 {
        self.gaussian_sigma_hz
    }
}

/// Truncated coherent state, photon number normalised to one emitter lifetime.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoherentStateSpec {
    mean_photon_number: f64,
    cutoff: usize,
}

impl CoherentStateSpec {
    /// Probability mass that must be retained for `n̄ ≤ 0.1`.
    pub const MASS_TOLERANCE: f64 = 1e-9;

    pub fn new(mean_photon_number: f64, cutoff: usize) -> Result<Self, PhysicsError> {
        if !(mean_photon_number >= 0.0 && mean_photon_number.is_finite()) {
            return Err(domain(format!(
                "mean photon number must be non-negative, got {mean_photon_number}"
            )));
        }
        if cutoff < 1 {
            return Err(domain("cutoff must be at least 1"));
        }
        let spec = Self {
            mean_photon_number,
            cutoff,
        };
        if mean_photon_number <= 0.1 {
            let missing = spec.truncated_mass();
            if missing > Self::MASS_TOLERANCE {
                return Err(domain(format!(
                    "cutoff {cutoff} drops {missing:.2e} of the probability mass at n̄ = {mean_photon_number}; \
                     use at least {}",
                    Self::minimal_cutoff(mean_photon_number)
                )));
            }
        }
        Ok(spec)
    }

    /// Smallest cutoff ≥ 4 whose truncated mass is within [`Self::MASS_TOLERANCE`].
    pub fn with_auto_cutoff(mean_photon_number: f64) -> Result<Self, PhysicsError> {
        Self::new(mean_photon_number, Self::minimal_cutoff(mean_photon_number))
    }

    fn minimal_cutoff(nbar: f64) -> usize {
        let mut cutoff = 4;
        while cutoff < 10_000 && poisson_tail(nbar, cutoff) > Self::MASS_TOLERANCE {
            cutoff += 1;
        }
        cutoff
    }

    pub fn mean_photon_number(&self) -> f64 {
        self.mean_photon_number
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    /// Poisson mass above the cutoff.
    pub fn truncated_mass(&self) -> f64 {
        poisson_tail(self.mean_photon_number, self.cutoff)
    }
}

/// `P(n > cutoff)` for a Poisson distribution, summed from the tail side.
fn poisson_tail(nbar: f64, cutoff: usize) -> f64 {
    if nbar == 0.0 {
        return 0.0;
    }
    let mut term = (-nbar).exp();
    for n in 1..=cutoff + 1 {
        term *= nbar / n as f64;
    }
    let mut tail = 0.0;
    let mut n = cutoff + 1;
    while term > tail * 1e-17 && n < cutoff + 100_000 {
        tail += term;
        n += 1;
        term *= nbar / n as f64;
    }
    tail
}

/// Coupling figures derived from the on-resonance transmission.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingFigures {
    pub transmission_on_resonance: Estimate,
    pub cooperativity: Estimate,
    pub beta: Estimate,
    pub qe_lower_bound: Estimate,
}

impl CouplingFigures {
    /// Figures of an uncoupled emitter, `T = 1`.
    pub fn uncoupled() -> Self {
        Self {
            transmission_on_resonance: Estimate::exact(1.0),
            cooperativity: Estimate::exact(0.0),
            beta: Estimate::exact(0.0),
            qe_lower_bound: Estimate::exact(0.0),
        }
    }
}
