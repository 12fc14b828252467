use std::fs;
use std::path::{Path, PathBuf};

use bam_core::pipeline::{read_json, write_json};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::commands::{Invocation, Output};
use crate::error::CliError;

pub const CODE_VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputDigest {
    pub name: String,
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub code_version: String,
    pub seed: u64,
    #[serde(flatten)]
    pub invocation: Invocation,
    pub outputs: Vec<OutputDigest>,
}

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = fs::read(path).map_err(|e| bam_core::Error::Io {
        path: path.into(),
        source: e,
    })?;
    Ok(format!("{:x}", Sha256::digest(&bytes)))
}

pub fn manifest_path(inv: &Invocation) -> PathBuf {
    inv.config
        .output_dir
        .join(format!("{}.manifest.json", inv.subcommand))
}

pub fn build(inv: &Invocation, outputs: &[Output]) -> Result<Manifest, CliError> {
    let outputs = outputs
        .iter()
        .map(|o| {
            Ok(OutputDigest {
                name: o.name.clone(),
                path: o.path.clone(),
                sha256: sha256_file(&o.path)?,
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    Ok(Manifest {
        code_version: CODE_VERSION.into(),
        seed: inv.config.seed,
        invocation: inv.clone(),
        outputs,
    })
}

pub fn save(manifest: &Manifest) -> Result<PathBuf, CliError> {
    let path = manifest_path(&manifest.invocation);
    write_json(&path, manifest)?;
    Ok(path)
}

pub fn read(path: &Path) -> Result<Manifest, CliError> {
    Ok(read_json(path)?)
}

/// Names of outputs whose digests differ between two manifests.
pub fn differences(expected: &Manifest, actual: &Manifest) -> Vec<String> {
    let mut diffs = Vec::new();
    for e in &expected.outputs {
        match actual.outputs.iter().find(|a| a.name == e.name) {
            Some(a) if a.sha256 == e.sha256 => {}
            _ => diffs.push(e.name.clone()),
        }
    }
    for a in &actual.outputs {
        if !expected.outputs.iter().any(|e| e.name == a.name) {
            diffs.push(a.name.clone());
        }
    }
    diffs
}
