use std::path::Path;

use serde::Serialize;

use wgqed_core::correlator::{
    correlate_streams, read_tag_csv, read_ttag, write_histogram_csv, CorrelatorError, TimeTagStream, TTAG_MAGIC,
};
use wgqed_core::physics::Estimate;

use super::{output_dir, Overrides};
use crate::artifacts::{config_hash, read_input, Artifacts};
use crate::config::{load, CorrelateConfig};
use crate::error::CliError;

#[derive(Serialize)]
struct Report {
    channel_a: u16,
    channel_b: u16,
    autocorrelation: bool,
    bin_width_ps: u64,
    tau_max_ps: u64,
    rate_a_hz: f64,
    rate_b_hz: f64,
    effective_span_ps: u64,
    symmetrized: bool,
    total_coincidences: u64,
    g2_zero: Estimate,
}

fn parse(name: &str, bytes: &[u8], span: Option<u64>) -> Result<Vec<TimeTagStream>, CliError> {
    let tagged = |e: CorrelatorError| CliError::Input(format!("{name}: {e}"));
    if bytes.starts_with(TTAG_MAGIC) {
        Ok(vec![read_ttag(bytes, span).map_err(tagged)?])
    } else {
        read_tag_csv(bytes, span).map_err(tagged)
    }
}

pub fn run(config_path: &Path, overrides: &Overrides) -> Result<(), CliError> {
    let config: CorrelateConfig = load(config_path)?;
    let dir = output_dir(config_path, config.output_dir.as_deref(), overrides)?;
    if config.inputs.is_empty() || config.inputs.len() > 2 {
        return Err(CliError::Input(format!(
            "inputs: expected one or two files, got {}",
            config.inputs.len()
        )));
    }
    let mut digests = Vec::new();
    let mut streams = Vec::new();
    for name in &config.inputs {
        let (bytes, digest) = read_input(config_path, name)?;
        streams.extend(parse(name, &bytes, config.span_ps)?);
        digests.push(digest);
    }
    if let Some(wanted) = &config.channels {
        streams.retain(|s| wanted.contains(&s.channel()));
        if let Some(missing) = wanted.iter().find(|c| !streams.iter().any(|s| s.channel() == **c)) {
            return Err(CliError::Input(format!("channels: channel {missing} not found in the inputs")));
        }
    }
    let (a, b) = match streams.as_slice() {
        [a] => (a, a),
        [a, b] => (a, b),
        [] => return Err(CliError::Input("inputs: no time tags found".into())),
        more => {
            return Err(CliError::Input(format!(
                "inputs: {} channels found; select one or two with \"channels\"",
                more.len()
            )))
        }
    };
    let mut hist = correlate_streams(a, b, config.bin_width_ps, config.tau_max_ps)?;
    if config.symmetrize {
        hist = hist.symmetrized();
    }
    let hash = config_hash(&config);
    let mut artifacts = Artifacts::create(&dir)?;
    let mut bytes = Vec::new();
    write_histogram_csv(&mut bytes, &hist)?;
    artifacts.write("histogram.csv", &bytes)?;
    let zero = hist.zero_bin();
    let report = Report {
        channel_a: a.channel(),
        channel_b: b.channel(),
        autocorrelation: a.channel() == b.channel(),
        bin_width_ps: hist.bin_width_ps,
        tau_max_ps: hist.tau_max_ps,
        rate_a_hz: hist.rate_a_hz,
        rate_b_hz: hist.rate_b_hz,
        effective_span_ps: hist.effective_span_ps,
        symmetrized: hist.symmetrized,
        total_coincidences: hist.total_counts(),
        g2_zero: Estimate::new(hist.g2[zero], hist.g2_err[zero]),
    };
    println!("g2(0) = {:.4} ± {:.4}", report.g2_zero.value, report.g2_zero.sigma);
    artifacts.finish("correlate.json", &hash, digests, &report)?;
    Ok(())
}
