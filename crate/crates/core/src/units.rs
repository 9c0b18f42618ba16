//! Unit conventions.
//!
//! Line widths and detunings are ordinary frequencies in Hz (FWHM where a
//! width is meant). Decay rates and Rabi frequencies are angular, in rad/s.
//! Every conversion between the two goes through this module.

use std::f64::consts::{LN_2, PI};

pub const PS_PER_S: f64 = 1e12;

/// Total decay rate `Γ` (rad/s) of a lifetime-limited line of FWHM `linewidth_hz`.
pub fn decay_rate_from_linewidth(linewidth_hz: f64) -> f64 {
    2.0 * PI * linewidth_hz
}

/// Lifetime-limited FWHM (Hz) belonging to a total decay rate `Γ` (rad/s).
pub fn linewidth_from_decay_rate(decay_rate: f64) -> f64 {
    decay_rate / (2.0 * PI)
}

/// Amplitude decay rate of the optical coherence (rad/s) for a homogeneous FWHM in Hz.
pub fn coherence_rate_from_fwhm(gamma_fwhm_hz: f64) -> f64 {
    PI * gamma_fwhm_hz
}

pub fn hz_to_rad_per_s(f: f64) -> f64 {
    2.0 * PI * f
}

pub fn seconds_to_ps(t: f64) -> f64 {
    t * PS_PER_S
}

pub fn ps_to_seconds(t: f64) -> f64 {
    t / PS_PER_S
}

/// Gaussian FWHM for a standard deviation.
pub fn gaussian_fwhm(sigma: f64) -> f64 {
    2.0 * (2.0 * LN_2).sqrt() * sigma
}

/// Gaussian standard deviation for a FWHM.
pub fn gaussian_sigma(fwhm: f64) -> f64 {
    fwhm / (2.0 * (2.0 * LN_2).sqrt())
}

pub fn degrees(rad: f64) -> f64 {
    rad.to_degrees()
}

pub fn radians(deg: f64) -> f64 {
    deg.to_radians()
}

/// Optical frequency (Hz) of a vacuum wavelength given in nm.
pub fn frequency_from_wavelength_nm(wavelength_nm: f64) -> f64 {
    299_792_458.0 / (wavelength_nm * 1e-9)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decay_rate_round_trip() {
        let g = decay_rate_from_linewidth(154e6);
        assert!((linewidth_from_decay_rate(g) - 154e6).abs() < 1e-6);
        // lifetime-limited line: coherence decays at half the population rate
        assert!((coherence_rate_from_fwhm(154e6) - g / 2.0).abs() < 1e-3);
    }

    #[test]
    fn gaussian_width_round_trip() {
        assert!((gaussian_sigma(gaussian_fwhm(85e6)) - 85e6).abs() < 1e-6);
    }
}
