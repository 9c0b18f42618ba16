use std::path::Path;

use wgqed_core::correlator::read_histogram_csv;
use wgqed_core::inference::{fit, FitOptions, FitSpec, ModelId, Provenance, SpectrumData};

use super::{output_dir, Overrides};
use crate::artifacts::{config_hash, read_input, Artifacts, TOOL_VERSION};
use crate::config::{load, FitConfig};
use crate::error::CliError;

/// Spectrum CSV, or a correlation histogram recognised by its header.
fn parse_data(name: &str, bytes: &[u8]) -> Result<SpectrumData, CliError> {
    let first = bytes
        .split(|b| *b == b'\n')
        .map(|l| String::from_utf8_lossy(l).trim().to_string())
        .find(|l| !l.is_empty() && !l.starts_with('#'))
        .unwrap_or_default();
    let tagged = |e: &dyn std::fmt::Display| CliError::Input(format!("{name}: {e}"));
    if first.starts_with("tau_ps") {
        let rows = read_histogram_csv(bytes).map_err(|e| tagged(&e))?;
        let usable: Vec<_> = rows.iter().filter(|r| r.2.is_finite() && r.3 > 0.0).collect();
        let x = usable.iter().map(|r| r.0 as f64 * 1e-12).collect();
        let y = usable.iter().map(|r| r.2).collect();
        let e = usable.iter().map(|r| r.3).collect();
        Ok(SpectrumData::new(x, y, Some(e)).map_err(|e| tagged(&e))?.with_units("s", "g2"))
    } else {
        SpectrumData::read_csv(bytes).map_err(|e| tagged(&e))
    }
}

pub fn run(config_path: &Path, overrides: &Overrides) -> Result<(), CliError> {
    let config: FitConfig = load(config_path)?;
    let dir = output_dir(config_path, config.output_dir.as_deref(), overrides)?;
    let model = ModelId::from_name(&config.model).ok_or_else(|| {
        let names: Vec<&str> = ModelId::ALL.iter().map(|m| m.name()).collect();
        CliError::Input(format!("model: unknown model \"{}\"; expected one of {}", config.model, names.join(", ")))
    })?;
    let (bytes, digest) = read_input(config_path, &config.data)?;
    let data = parse_data(&config.data, &bytes)?;

    let mut spec = FitSpec::from_data(model, &data);
    for (name, value) in &config.init {
        spec = spec.set(name, *value)?;
    }
    for name in &config.free {
        spec = spec.free(name)?;
    }
    for (name, value) in &config.fixed {
        spec = spec.fix(name, *value)?;
    }
    for (name, bound) in &config.bounds {
        spec = spec.bound(name, *bound)?;
    }
    spec = spec.with_options(FitOptions {
        max_iterations: config.max_iterations,
        multistart: config.multistart,
    });

    let mut result = fit(&data, &spec)?;
    let hash = config_hash(&config);
    result.provenance = Some(Provenance {
        tool_version: TOOL_VERSION.to_string(),
        input_sha256: digest.sha256.clone(),
        config_sha256: hash,
    });
    let mut artifacts = Artifacts::create(&dir)?;
    let mut json = serde_json::to_vec_pretty(&result).map_err(|e| CliError::Runtime(e.to_string()))?;
    json.push(b'\n');
    artifacts.write("fit.json", &json)?;

    for p in &result.parameters {
        let tag = if p.fixed { " (fixed)" } else { "" };
        println!("{:>10} = {:.6e} ± {:.2e} {}{tag}", p.name, p.value, p.sigma, p.unit);
    }
    println!("chi2_red = {:.4} over {} dof", result.reduced_chi_square, result.degrees_of_freedom);
    if !result.converged {
        return Err(CliError::NotConverged(format!(
            "fit did not converge after {} iterations: {}",
            result.iterations, result.message
        )));
    }
    Ok(())
}
