pub mod correlate;
pub mod derive;
pub mod fit;
pub mod phase_sweep;
pub mod simulate;

use std::path::{Path, PathBuf};

use crate::config::resolve;
use crate::error::CliError;

/// Command-line settings that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
}

/// `--out`, else the config's `output_dir` relative to the config file.
pub fn output_dir(config_path: &Path, configured: Option<&str>, overrides: &Overrides) -> Result<PathBuf, CliError> {
    if let Some(out) = &overrides.out {
        return Ok(out.clone());
    }
    match configured {
        Some(dir) => Ok(resolve(config_path, dir)),
        None => Err(CliError::Input(format!(
            "{}: no output directory; set \"output_dir\" or pass --out",
            config_path.display()
        ))),
    }
}
