use std::f64::consts::PI;
use std::path::Path;

use serde::Serialize;

use wgqed_core::inference::phase_sweep;
use wgqed_core::physics::{EmitterParams, InterferenceModel};

use super::{output_dir, Overrides};
use crate::artifacts::{config_hash, Artifacts};
use crate::config::{load, PhaseSweepConfig};
use crate::error::CliError;

#[derive(Serialize)]
struct Report {
    alpha: f64,
    gamma_fwhm_hz: f64,
    phases_rad: Vec<f64>,
    detuning_points: usize,
    /// Intensity on resonance for each phase.
    on_resonance: Vec<f64>,
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

pub fn run(config_path: &Path, overrides: &Overrides) -> Result<(), CliError> {
    let config: PhaseSweepConfig = load(config_path)?;
    let dir = output_dir(config_path, config.output_dir.as_deref(), overrides)?;
    let phases = match &config.phases_rad {
        Some(p) => p.clone(),
        None => linspace(PI, 2.0 * PI, config.phase_steps),
    };
    if config.detuning_points < 2 || !(config.detuning_max_mhz > config.detuning_min_mhz) {
        return Err(CliError::Input(
            "detuning grid: need at least two points and detuning_max_mhz > detuning_min_mhz".into(),
        ));
    }
    let detunings = linspace(config.detuning_min_mhz * 1e6, config.detuning_max_mhz * 1e6, config.detuning_points);
    let gamma = config.gamma_fwhm_mhz * 1e6;
    let emitter = EmitterParams::lifetime_limited(gamma, 0.0)?;
    let base = InterferenceModel::new(config.alpha, PI)?;
    let sweep = phase_sweep(&base, &emitter, &phases, &detunings)?;

    let mut csv = Vec::new();
    sweep.write_csv(&mut csv).map_err(|e| CliError::Runtime(e.to_string()))?;
    let hash = config_hash(&config);
    let mut artifacts = Artifacts::create(&dir)?;
    artifacts.write("phase_sweep.csv", &csv)?;
    let on_resonance = phases
        .iter()
        .map(|&p| phase_sweep(&base, &emitter, &[p], &[0.0]).map(|s| s.rows[0].intensity))
        .collect::<Result<Vec<_>, _>>()?;
    for (p, i) in phases.iter().zip(&on_resonance) {
        println!("phase {p:.4} rad: on-resonance intensity {i:.4}");
    }
    let report = Report {
        alpha: config.alpha,
        gamma_fwhm_hz: gamma,
        phases_rad: phases,
        detuning_points: config.detuning_points,
        on_resonance,
    };
    artifacts.finish("phase_sweep.json", &hash, Vec::new(), &report)?;
    Ok(())
}
