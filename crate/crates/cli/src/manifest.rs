use std::ffi::OsString;
use std::fs;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

/// What identifies a run. Output location, thread count and timing are
/// left out so re-runs compare byte for byte.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: Vec<String>,
    pub inputs: Vec<InputDigest>,
    pub seed: Option<u64>,
}

impl RunManifest {
    pub fn new(argv: &[OsString]) -> Self {
        RunManifest {
            tool: "wormscan",
            version: env!("CARGO_PKG_VERSION"),
            command: identity_args(argv),
            inputs: Vec::new(),
            seed: None,
        }
    }

    pub fn add_input(&mut self, path: &Path) -> Result<(), CliError> {
        let bytes =
            fs::read(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        self.inputs.push(InputDigest {
            path: path.display().to_string(),
            sha256: hex::encode(Sha256::digest(&bytes)),
        });
        Ok(())
    }
}

/// Wall-clock facts of one execution, kept apart from the manifest.
#[derive(Debug, Serialize)]
pub struct RunTiming {
    pub threads: usize,
    pub wall_clock_seconds: f64,
}

/// The argument list without the program path and without `--out` and
/// `--threads`, which do not change any result.
fn identity_args(argv: &[OsString]) -> Vec<String> {
    let mut out = Vec::new();
    let mut it = argv
        .iter()
        .skip(1)
        .map(|a| a.to_string_lossy().into_owned());
    while let Some(arg) = it.next() {
        if arg == "--out" || arg == "--threads" {
            it.next();
        } else if !(arg.starts_with("--out=") || arg.starts_with("--threads=")) {
            out.push(arg);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn drops_location_and_threads() {
        let argv: Vec<OsString> = [
            "/bin/wormscan",
            "--threads",
            "4",
            "rates",
            "--out=x",
            "--s",
            "1",
        ]
        .iter()
        .map(OsString::from)
        .collect();
        assert_eq!(identity_args(&argv), ["rates", "--s", "1"]);
    }
}
