//! Output directory handling, hashing and the per-run manifest.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const TOOL_VERSION: &str = concat!("wgqed ", env!("CARGO_PKG_VERSION"));

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Hash of the effective configuration, after command-line overrides.
pub fn config_hash<T: Serialize>(config: &T) -> String {
    sha256_hex(&serde_json::to_vec(config).expect("configs serialise"))
}

#[derive(Debug, Clone, Serialize)]
pub struct FileDigest {
    pub file: String,
    pub sha256: String,
}


/// Files written by one command, in write order.
#[derive(Debug)]
pub struct Artifacts {
    dir: PathBuf,
    written: Vec<FileDigest>,
}

impl Artifacts {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir)
            .map_err(|e| CliError::Input(format!("cannot create output directory {}: {e}", dir.display())))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))?;
        self.written.push(FileDigest {
            file: name.to_string(),
            sha256: sha256_hex(bytes),
        });
        Ok(path)
    }

    /// Writes `body` as pretty JSON with the run header and the digests of
    /// every file written so far.
    pub fn finish<T: Serialize>(mut self, name: &str, config_sha256: &str, inputs: Vec<FileDigest>, body: &T) -> Result<PathBuf, CliError> {
        #[derive(Serialize)]
        struct Manifest<'a, T> {
            tool_version: &'a str,
            config_sha256: &'a str,
            inputs: Vec<FileDigest>,
            artifacts: &'a [FileDigest],
            #[serde(flatten)]
            body: &'a T,
        }
        let manifest = Manifest {
            tool_version: TOOL_VERSION,
            config_sha256,
            inputs,
            artifacts: &self.written,
            body,
        };
        let mut bytes = serde_json::to_vec_pretty(&manifest).map_err(|e| CliError::Runtime(e.to_string()))?;
        bytes.push(b'\n');
        let path = self.dir.join(name);
        fs::write(&path, &bytes).map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))?;
        self.written.clear();
        Ok(path)
    }
}

/// Reads an input file named in a config, keeping its digest under the name
/// as written there.
pub fn read_input(config_path: &Path, name: &str) -> Result<(Vec<u8>, FileDigest), CliError> {
    let path = crate::config::resolve(config_path, name);
    let bytes = fs::read(&path).map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    let digest = FileDigest {
        file: name.to_string(),
        sha256: sha256_hex(&bytes),
    };
    Ok((bytes, digest))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_digest() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
