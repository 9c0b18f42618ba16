//! JSON run configurations. Unknown keys are rejected and every dimensional
//! key names its unit.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use wgqed_core::inference::{Bound, EfficiencyConvention};
use wgqed_core::physics::{EmitterParams, Estimate, InterferenceModel};
use wgqed_core::presets;
use wgqed_core::trajectory::{DetectorModel, Propagation};
use wgqed_core::units;

use crate::error::CliError;

/// Parses `path`; errors carry the file name and the serde line/column.
pub fn load<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

/// Resolves a path from a config file against the file's directory.
pub fn resolve(config_path: &Path, p: &str) -> PathBuf {
    let p = Path::new(p);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        config_path.parent().unwrap_or(Path::new("")).join(p)
    }
}

fn invalid(key: &str, message: impl std::fmt::Display) -> CliError {
    CliError::Input(format!("{key}: {message}"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EmitterConfig {
    /// Homogeneous line width of the extinction feature.
    pub gamma_fwhm_mhz: f64,
    /// Lifetime-limited line width, setting the decay rate.
    pub lifetime_fwhm_mhz: f64,
    pub rabi_over_decay: f64,
    pub resonance_wavelength_nm: f64,
}

impl Default for EmitterConfig {
    fn default() -> Self {
        Self {
            gamma_fwhm_mhz: presets::EXTINCTION_FWHM_HZ.value / 1e6,
            lifetime_fwhm_mhz: presets::PLE_NARROW_FWHM_HZ.value / 1e6,
            rabi_over_decay: presets::RABI_OVER_DECAY,
            resonance_wavelength_nm: presets::RESONANCE_WAVELENGTH_NM,
        }
    }
}

impl EmitterConfig {
    pub fn build(&self) -> Result<EmitterParams, CliError> {
        let decay = units::decay_rate_from_linewidth(self.lifetime_fwhm_mhz * 1e6);
        EmitterParams::new(
            self.gamma_fwhm_mhz * 1e6,
            decay,
            self.rabi_over_decay * decay,
            units::frequency_from_wavelength_nm(self.resonance_wavelength_nm),
        )
        .map_err(|e| invalid("emitter", e))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InterferenceConfig {
    /// Interference weight; omitted means the weight reproducing the
    /// reference on-resonance transmission for this emitter.
    pub alpha: Option<f64>,
    pub phase_rad: f64,
}

impl Default for InterferenceConfig {
    fn default() -> Self {
        Self {
            alpha: None,
            phase_rad: PI,
        }
    }
}

impl InterferenceConfig {
    pub fn build(&self, emitter: &EmitterParams) -> Result<InterferenceModel, CliError> {
        let alpha = match self.alpha {
            Some(a) => a,
            None => presets::dynamical_alpha(emitter, presets::TRANSMISSION.value).map_err(|e| invalid("interference", e))?,
        };
        InterferenceModel::new(alpha, self.phase_rad).map_err(|e| invalid("interference", e))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfigBlock {
    /// Drive photon flux; omitted means the flux matched to the Rabi frequency.
    pub laser_flux_hz: Option<f64>,
    pub detuning_mhz: f64,
    pub shards: usize,
    pub psb_branching: f64,
    pub psb_collection: f64,
    pub warmup_lifetimes: f64,
    /// Omitted means `0.01/Γ`.
    pub time_step_ps: Option<f64>,
    pub propagation: Propagation,
}

impl Default for SimConfigBlock {
    fn default() -> Self {
        Self {
            laser_flux_hz: None,
            detuning_mhz: 0.0,
            shards: 16,
            psb_branching: 0.3,
            psb_collection: 0.1,
            warmup_lifetimes: 100.0,
            time_step_ps: None,
            propagation: Propagation::Exact,
        }
    }
}

/// Defaults are order-of-magnitude guesses for silicon avalanche diodes, not
/// calibrated values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectorConfig {
    pub efficiency: f64,
    pub dark_count_rate_hz: f64,
    pub dead_time_ns: f64,
    pub timing_jitter_ps: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        let d = DetectorModel::default();
        Self {
            efficiency: d.efficiency,
            dark_count_rate_hz: d.dark_count_rate_hz,
            dead_time_ns: d.dead_time_s * 1e9,
            timing_jitter_ps: d.timing_jitter_sigma_s * 1e12,
        }
    }
}

impl DetectorConfig {
    pub fn build(&self) -> Result<DetectorModel, CliError> {
        let d = DetectorModel {
            efficiency: self.efficiency,
            dark_count_rate_hz: self.dark_count_rate_hz,
            dead_time_s: self.dead_time_ns * 1e-9,
            timing_jitter_sigma_s: self.timing_jitter_ps * 1e-12,
        };
        d.validate().map_err(|e| invalid("detectors", e))?;
        Ok(d)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryConfig {
    pub duration_s: f64,
    #[serde(default)]
    pub hbt: bool,
    #[serde(default = "yes")]
    pub reflection: bool,
    #[serde(default = "yes")]
    pub transmission: bool,
    #[serde(default = "half")]
    pub hbt_split: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub detunings_mhz: Vec<f64>,
    pub dwell_s: f64,
}

fn yes() -> bool {
    true
}

fn half() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    #[serde(default)]
    pub rng_seed: u64,
    #[serde(default)]
    pub output_dir: Option<String>,
    #[serde(default)]
    pub emitter: EmitterConfig,
    #[serde(default)]
    pub interference: InterferenceConfig,
    #[serde(default)]
    pub sim: SimConfigBlock,
    #[serde(default)]
    pub detectors: DetectorConfig,
    #[serde(default)]
    pub trajectory: Option<TrajectoryConfig>,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrelateConfig {
    #[serde(default)]
    pub output_dir: Option<String>,
    /// One file for an autocorrelation, two for a cross-correlation. Binary
    /// time-tag files or `channel,timestamp_ps` CSV.
    pub inputs: Vec<String>,
    /// Channels to take from a single CSV input holding several.
    #[serde(default)]
    pub channels: Option<Vec<u16>>,
    #[serde(default = "default_bin_width")]
    pub bin_width_ps: u64,
    pub tau_max_ps: u64,
    /// Acquisition length; omitted means the last timestamp.
    #[serde(default)]
    pub span_ps: Option<u64>,
    #[serde(default)]
    pub symmetrize: bool,
}

fn default_bin_width() -> u64 {
    128
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    #[serde(default)]
    pub output_dir: Option<String>,
    pub model: String,
    /// `x,y[,yerr]` spectrum CSV or a correlation histogram CSV.
    pub data: String,
    /// Starting values overriding the data-derived defaults, by parameter name.
    #[serde(default)]
    pub init: BTreeMap<String, f64>,
    /// Parameters held at the given values.
    #[serde(default)]
    pub fixed: BTreeMap<String, f64>,
    /// Parameters fixed by default that should float.
    #[serde(default)]
    pub free: Vec<String>,
    #[serde(default)]
    pub bounds: BTreeMap<String, Bound>,
    #[serde(default = "default_iterations")]
    pub max_iterations: usize,
    #[serde(default)]
    pub multistart: bool,
}

fn default_iterations() -> usize {
    500
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateConfig {
    pub value: f64,
    #[serde(default)]
    pub sigma: f64,
}

impl From<EstimateConfig> for Estimate {
    fn from(e: EstimateConfig) -> Self {
        Estimate::new(e.value, e.sigma)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AreasConfig {
    pub transmission: EstimateConfig,
    pub reflection: EstimateConfig,
    #[serde(default)]
    pub convention: EfficiencyConvention,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeriveConfig {
    #[serde(default)]
    pub output_dir: Option<String>,
    /// Fit result JSON of an extinction model.
    #[serde(default)]
    pub fit: Option<String>,
    /// On-resonance relative transmission given directly.
    #[serde(default)]
    pub transmission: Option<EstimateConfig>,
    /// PLE peak areas for the relative coupling efficiency.
    #[serde(default)]
    pub areas: Option<AreasConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseSweepConfig {
    #[serde(default)]
    pub output_dir: Option<String>,
    pub alpha: f64,
    #[serde(default = "default_gamma_mhz")]
    pub gamma_fwhm_mhz: f64,
    /// Explicit phases; omitted means `phase_steps` values from π to 2π.
    #[serde(default)]
    pub phases_rad: Option<Vec<f64>>,
    #[serde(default = "default_phase_steps")]
    pub phase_steps: usize,
    #[serde(default = "default_detuning_min")]
    pub detuning_min_mhz: f64,
    #[serde(default = "default_detuning_max")]
    pub detuning_max_mhz: f64,
    #[serde(default = "default_detuning_points")]
    pub detuning_points: usize,
}

fn default_gamma_mhz() -> f64 {
    presets::EXTINCTION_FWHM_HZ.value / 1e6
}

fn default_phase_steps() -> usize {
    5
}

fn default_detuning_min() -> f64 {
    -1000.0
}

fn default_detuning_max() -> f64 {
    1000.0
}

fn default_detuning_points() -> usize {
    201
}
