//! Fit models: each wraps a physics function with scale and offset nuisances.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::physics::faddeeva::Faddeeva;
use crate::physics::{
    extinction_intensity, extinction_intensity_voigt, g2_bunching, lorentzian_ple, voigt_ple, EmitterParams,
    InterferenceModel, PhysicsError, SpectralDiffusion,
};
use crate::presets;
use crate::units;

use super::data::SpectrumData;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelId {
    /// `scale · |1 + α e^{iφ} S(x − x₀)|² + offset`
    Extinction,
    /// Extinction averaged over Gaussian spectral diffusion of width `σ`.
    ExtinctionDiffused,
    /// `A / (1 + (2(x − x₀)/γ)²) + offset`
    LorentzianPle,
    /// Lorentzian convolved with a Gaussian, reducing to `lorentzian_ple` at `σ = 0`.
    VoigtPle,
    /// Resonance-fluorescence antibunching, `scale · g²(τ − τ₀) + offset`.
    G2Driven,
    /// `scale · (1 + a e^{−Γ|τ − τ₀|}) + offset`
    G2Bunching,
    /// `A cos²(x − θ) + offset`
    Malus,
}

/// Allowed range of a parameter; the solver works on an unconstrained
/// transform of it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Bound {
    Free,
    /// `p = exp(u)`
    Positive,
    /// `p = lower + (upper − lower) / (1 + e^{−u})`
    Interval { lower: f64, upper: f64 },
}

impl Bound {
    /// Whether a free parameter may start at `p`.
    pub fn contains_open(&self, p: f64) -> bool {
        match *self {
            Bound::Free => p.is_finite(),
            Bound::Positive => p > 0.0 && p.is_finite(),
            Bound::Interval { lower, upper } => p > lower && p < upper,
        }
    }

    /// Whether a fixed parameter may take `p`.
    pub fn contains_closed(&self, p: f64) -> bool {
        match *self {
            Bound::Free => p.is_finite(),
            Bound::Positive => p >= 0.0 && p.is_finite(),
            Bound::Interval { lower, upper } => p >= lower && p <= upper,
        }
    }

    pub(crate) fn to_internal(&self, p: f64, scale: f64) -> f64 {
        match *self {
            Bound::Free => p / scale,
            Bound::Positive => p.ln(),
            Bound::Interval { lower, upper } => {
                let f = (p - lower) / (upper - lower);
                (f / (1.0 - f)).ln()
            }
        }
    }

    pub(crate) fn to_physical(&self, u: f64, scale: f64) -> f64 {
        match *self {
            Bound::Free => u * scale,
            Bound::Positive => u.exp(),
            Bound::Interval { lower, upper } => lower + (upper - lower) / (1.0 + (-u).exp()),
        }
    }

    /// `dp/du`
    pub(crate) fn derivative(&self, u: f64, scale: f64) -> f64 {
        match *self {
            Bound::Free => scale,
            Bound::Positive => u.exp(),
            Bound::Interval { lower, upper } => {
                let e = (-u.abs()).exp();
                (upper - lower) * e / ((1.0 + e) * (1.0 + e))
            }
        }
    }
}

/// What a parameter measures, used to pick its natural scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    /// Position along the abscissa (line centre, delay, polarisation axis).
    Abscissa,
    /// Additive on the ordinate.
    Ordinate,
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamInfo {
    pub name: &'static str,
    pub unit: &'static str,
    pub bound: Bound,
    pub fixed_by_default: bool,
    pub kind: ParamKind,
}

const fn param(name: &'static str, unit: &'static str, bound: Bound, fixed: bool, kind: ParamKind) -> ParamInfo {
    ParamInfo {
        name,
        unit,
        bound,
        fixed_by_default: fixed,
        kind,
    }
}

const UNIT_INTERVAL: Bound = Bound::Interval { lower: 0.0, upper: 1.0 };
// a = 1 is the ideal antibunching dip and must stay interior
const VISIBILITY: Bound = Bound::Interval { lower: 0.0, upper: 2.0 };

const EXTINCTION: [ParamInfo; 6] = [
    param("alpha", "1", UNIT_INTERVAL, false, ParamKind::Other),
    param("phase", "rad", Bound::Free, false, ParamKind::Other),
    param("gamma_fwhm", "Hz", Bound::Positive, false, ParamKind::Other),
    param("center", "Hz", Bound::Free, false, ParamKind::Abscissa),
    param("scale", "y", Bound::Positive, false, ParamKind::Other),
    param("offset", "y", Bound::Free, true, ParamKind::Ordinate),
];

const EXTINCTION_DIFFUSED: [ParamInfo; 7] = [
    param("alpha", "1", UNIT_INTERVAL, false, ParamKind::Other),
    param("phase", "rad", Bound::Free, false, ParamKind::Other),
    param("gamma_fwhm", "Hz", Bound::Positive, false, ParamKind::Other),
    param("sigma", "Hz", Bound::Positive, false, ParamKind::Other),
    param("center", "Hz", Bound::Free, false, ParamKind::Abscissa),
    param("scale", "y", Bound::Positive, false, ParamKind::Other),
    param("offset", "y", Bound::Free, true, ParamKind::Ordinate),
];

const LORENTZIAN_PLE: [ParamInfo; 4] = [
    param("amplitude", "y", Bound::Positive, false, ParamKind::Other),
    param("gamma_fwhm", "Hz", Bound::Positive, false, ParamKind::Other),
    param("center", "Hz", Bound::Free, false, ParamKind::Abscissa),
    param("offset", "y", Bound::Free, false, ParamKind::Ordinate),
];

const VOIGT_PLE: [ParamInfo; 5] = [
    param("amplitude", "y", Bound::Positive, false, ParamKind::Other),
    param("gamma_fwhm", "Hz", Bound::Positive, false, ParamKind::Other),
    param("sigma", "Hz", Bound::Positive, false, ParamKind::Other),
    param("center", "Hz", Bound::Free, false, ParamKind::Abscissa),
    param("offset", "y", Bound::Free, false, ParamKind::Ordinate),
];

const G2_DRIVEN: [ParamInfo; 6] = [
    param("a", "1", VISIBILITY, false, ParamKind::Other),
    param("decay_rate", "1/s", Bound::Positive, false, ParamKind::Other),
    param("rabi_frequency", "1/s", Bound::Positive, false, ParamKind::Other),
    param("tau0", "s", Bound::Free, true, ParamKind::Abscissa),
    param("scale", "1", Bound::Positive, false, ParamKind::Other),
    param("offset", "1", Bound::Free, true, ParamKind::Ordinate),
];

const G2_BUNCHING: [ParamInfo; 5] = [
    param("a", "1", Bound::Positive, false, ParamKind::Other),
    param("decay_rate", "1/s", Bound::Positive, false, ParamKind::Other),
    param("tau0", "s", Bound::Free, true, ParamKind::Abscissa),
    param("scale", "1", Bound::Positive, false, ParamKind::Other),
    param("offset", "1", Bound::Free, true, ParamKind::Ordinate),
];

const MALUS: [ParamInfo; 3] = [
    param("amplitude", "y", Bound::Positive, false, ParamKind::Other),
    param("axis", "rad", Bound::Free, false, ParamKind::Abscissa),
    param("offset", "y", Bound::Free, false, ParamKind::Ordinate),
];

impl ModelId {
    pub const ALL: [ModelId; 7] = [
        ModelId::Extinction,
        ModelId::ExtinctionDiffused,
        ModelId::LorentzianPle,
        ModelId::VoigtPle,
        ModelId::G2Driven,
        ModelId::G2Bunching,
        ModelId::Malus,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelId::Extinction => "extinction",
            ModelId::ExtinctionDiffused => "extinction_diffused",
            ModelId::LorentzianPle => "lorentzian_ple",
            ModelId::VoigtPle => "voigt_ple",
            ModelId::G2Driven => "g2_driven",
            ModelId::G2Bunching => "g2_bunching",
            ModelId::Malus => "malus",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name() == name)
    }

    pub fn parameters(self) -> &'static [ParamInfo] {
        match self {
            ModelId::Extinction => &EXTINCTION,
            ModelId::ExtinctionDiffused => &EXTINCTION_DIFFUSED,
            ModelId::LorentzianPle => &LORENTZIAN_PLE,
            ModelId::VoigtPle => &VOIGT_PLE,
            ModelId::G2Driven => &G2_DRIVEN,
            ModelId::G2Bunching => &G2_BUNCHING,
            ModelId::Malus => &MALUS,
        }
    }

    pub fn index_of(self, name: &str) -> Option<usize> {
        self.parameters().iter().position(|p| p.name == name)
    }

    pub fn default_fixed(self) -> Vec<bool> {
        self.parameters().iter().map(|p| p.fixed_by_default).collect()
    }

    /// Starting values read off the data.
    ///
    /// Extinction fits start from `α = 0.1`, `φ = π` and the slow-scan PLE
    /// width; correlation fits from the lifetime-limited decay rate.
    pub fn default_init(self, data: &SpectrumData) -> Vec<f64> {
        let (x, y) = (&data.x, &data.y);
        let argmax = argbest(y, |a, b| a > b);
        let argmin = argbest(y, |a, b| a < b);
        let ymax = y[argmax];
        let ymin = y[argmin];
        let edge = 0.5 * (y[0] + y[y.len() - 1]);
        let gamma_ple = presets::PLE_BROAD_FWHM_HZ.value;
        let decay = units::decay_rate_from_linewidth(presets::PLE_NARROW_FWHM_HZ.value);
        match self {
            ModelId::Extinction => vec![0.1, PI, gamma_ple, x[argmin], edge.abs().max(1e-300), 0.0],
            ModelId::ExtinctionDiffused => {
                vec![0.1, PI, gamma_ple, 0.2 * gamma_ple, x[argmin], edge.abs().max(1e-300), 0.0]
            }
            ModelId::LorentzianPle => {
                let w = half_width_estimate(x, y, argmax, ymin);
                vec![(ymax - ymin).max(1e-300), w, x[argmax], ymin]
            }
            ModelId::VoigtPle => {
                let w = half_width_estimate(x, y, argmax, ymin);
                vec![(ymax - ymin).max(1e-300), 0.7 * w, 0.25 * w, x[argmax], ymin]
            }
            ModelId::G2Driven => vec![0.9, decay, decay, 0.0, edge.abs().max(1e-300), 0.0],
            ModelId::G2Bunching => vec![(ymax / edge - 1.0).max(0.01), decay, 0.0, edge.abs().max(1e-300), 0.0],
            ModelId::Malus => vec![(ymax - ymin).max(1e-300), x[argmax], ymin],
        }
    }
}

fn argbest(v: &[f64], better: impl Fn(f64, f64) -> bool) -> usize {
    let mut best = 0;
    for (i, &value) in v.iter().enumerate() {
        if better(value, v[best]) {
            best = i;
        }
    }
    best
}

/// Full width of the region above half maximum, or a quarter of the span.
fn half_width_estimate(x: &[f64], y: &[f64], peak: usize, floor: f64) -> f64 {
    let half = floor + 0.5 * (y[peak] - floor);
    let above: Vec<f64> = x.iter().zip(y).filter(|(_, &v)| v >= half).map(|(&u, _)| u).collect();
    let lo = above.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = above.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = x.iter().copied().fold(f64::NEG_INFINITY, f64::max) - x.iter().copied().fold(f64::INFINITY, f64::min);
    if hi > lo {
        hi - lo
    } else {
        0.25 * span.abs().max(1e-300)
    }
}

/// Evaluator for one model, holding whatever tables it needs.
#[derive(Debug, Clone)]
pub struct ModelFunction {
    id: ModelId,
    faddeeva: Option<Faddeeva>,
}

impl ModelFunction {
    pub fn new(id: ModelId) -> Self {
        let faddeeva = matches!(id, ModelId::ExtinctionDiffused | ModelId::VoigtPle).then(Faddeeva::default);
        Self { id, faddeeva }
    }

    pub fn id(&self) -> ModelId {
        self.id
    }

    pub fn evaluate(&self, p: &[f64], x: f64) -> Result<f64, PhysicsError> {
        match self.id {
            ModelId::Extinction => {
                let emitter = line(p[2])?;
                let model = InterferenceModel::new(p[0], p[1])?;
                Ok(p[4] * extinction_intensity(x - p[3], &model, &emitter)? + p[5])
            }
            ModelId::ExtinctionDiffused => {
                let emitter = line(p[2])?;
                let model = InterferenceModel::new(p[0], p[1])?;
                let diffusion = SpectralDiffusion::new(p[3])?;
                let f = self.faddeeva.as_ref().expect("built with the model");
                Ok(p[5] * extinction_intensity_voigt(f, x - p[4], &model, &emitter, &diffusion) + p[6])
            }
            ModelId::LorentzianPle => {
                positive(p[1], "gamma_fwhm")?;
                Ok(p[0] * lorentzian_ple(x - p[2], p[1]) + p[3])
            }
            ModelId::VoigtPle => {
                positive(p[1], "gamma_fwhm")?;
                if !(p[2] >= 0.0) {
                    return Err(PhysicsError::Domain(format!("sigma must be non-negative, got {}", p[2])));
                }
                let f = self.faddeeva.as_ref().expect("built with the model");
                Ok(p[0] * voigt_ple(f, x - p[3], p[1], p[2]) + p[4])
            }
            ModelId::G2Driven => {
                positive(p[1], "decay_rate")?;
                let g = crate::physics::g2_driven_rates(x - p[3], p[0], p[1], p[2]);
                Ok(p[4] * g + p[5])
            }
            ModelId::G2Bunching => Ok(p[3] * g2_bunching(x - p[2], p[0], p[1])? + p[4]),
            ModelId::Malus => {
                let c = (x - p[1]).cos();
                Ok(p[0] * c * c + p[2])
            }
        }
    }
}

fn positive(v: f64, name: &str) -> Result<(), PhysicsError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(PhysicsError::Domain(format!("{name} must be positive, got {v}")))
    }
}

/// A bare line of the given FWHM; only the width enters the extinction shape.
fn line(gamma_fwhm_hz: f64) -> Result<EmitterParams, PhysicsError> {
    positive(gamma_fwhm_hz, "gamma_fwhm")?;
    EmitterParams::lifetime_limited(gamma_fwhm_hz, 0.0)
}
