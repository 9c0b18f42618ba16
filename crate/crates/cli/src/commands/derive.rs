use std::path::Path;

use serde::Serialize;

use wgqed_core::inference::{derive_coupling, relative_coupling_efficiency, EfficiencyConvention, FitResult};
use wgqed_core::physics::{cooperativity_from_transmission, CouplingFigures, Estimate};

use super::{output_dir, Overrides};
use crate::artifacts::{config_hash, read_input, Artifacts};
use crate::config::{load, DeriveConfig};
use crate::error::CliError;

#[derive(Serialize)]
struct Coupling {
    #[serde(skip_serializing_if = "Option::is_none")]
    figures: Option<CouplingFigures>,
    #[serde(skip_serializing_if = "Option::is_none")]
    alpha: Option<Estimate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    beta_from_alpha: Option<Estimate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    relative_coupling_efficiency: Option<Estimate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    efficiency_convention: Option<EfficiencyConvention>,
    warnings: Vec<String>,
}

pub fn run(config_path: &Path, overrides: &Overrides) -> Result<(), CliError> {
    let config: DeriveConfig = load(config_path)?;
    let dir = output_dir(config_path, config.output_dir.as_deref(), overrides)?;
    let mut out = Coupling {
        figures: None,
        alpha: None,
        beta_from_alpha: None,
        relative_coupling_efficiency: None,
        efficiency_convention: None,
        warnings: Vec::new(),
    };
    let mut inputs = Vec::new();
    match (&config.fit, &config.transmission) {
        (Some(_), Some(_)) => {
            return Err(CliError::Input("give either \"fit\" or \"transmission\", not both".into()));
        }
        (Some(name), None) => {
            let (bytes, digest) = read_input(config_path, name)?;
            let fit: FitResult =
                serde_json::from_slice(&bytes).map_err(|e| CliError::Input(format!("{name}: {e}")))?;
            let derived = derive_coupling(&fit)?;
            out.figures = Some(derived.figures);
            out.alpha = Some(derived.alpha);
            out.beta_from_alpha = Some(derived.beta_from_alpha);
            out.warnings = derived.warnings;
            inputs.push(digest);
        }
        (None, Some(t)) => {
            out.figures = Some(cooperativity_from_transmission(t.value, t.sigma)?);
        }
        (None, None) => {}
    }
    if let Some(areas) = &config.areas {
        out.relative_coupling_efficiency = Some(relative_coupling_efficiency(
            areas.transmission.into(),
            areas.reflection.into(),
            areas.convention,
        )?);
        out.efficiency_convention = Some(areas.convention);
    }
    if out.figures.is_none() && out.relative_coupling_efficiency.is_none() {
        return Err(CliError::Input(format!(
            "{}: nothing to derive; give \"fit\", \"transmission\" or \"areas\"",
            config_path.display()
        )));
    }
    for w in &out.warnings {
        eprintln!("warning: {w}");
    }
    if let Some(f) = &out.figures {
        println!("T = {:.4} ± {:.4}", f.transmission_on_resonance.value, f.transmission_on_resonance.sigma);
        println!("C = {:.4} ± {:.4}", f.cooperativity.value, f.cooperativity.sigma);
        println!("beta = {:.4} ± {:.4}", f.beta.value, f.beta.sigma);
    }
    if let Some(e) = &out.relative_coupling_efficiency {
        println!("eta_rel = {:.4} ± {:.4}", e.value, e.sigma);
    }
    let hash = config_hash(&config);
    Artifacts::create(&dir)?.finish("coupling.json", &hash, inputs, &out)?;
    Ok(())
}
