//! On-disk cache of assembled operators keyed by basis, Re and slip length.

use std::path::{Path, PathBuf};

use anyhow::Context;
use hydromodes::evolution::{BaseFlowKind, System};
use hydromodes::operators::{CouplingTensor, LinearOperator, TensorOptions};
use hydromodes::BasisSet;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Serialize, Deserialize)]
struct Entry {
    version: String,
    key: String,
    linear: LinearOperator,
    tensor: CouplingTensor,
}

pub fn key(basis: &BasisSet, base: BaseFlowKind) -> String {
    let text = format!(
        "{}|{:016x}|{:016x}|{:?}|{}",
        basis.checksum(),
        basis.cfg.reynolds.to_bits(),
        basis.cfg.slip_length.to_bits(),
        base,
        hydromodes::VERSION
    );
    Sha256::digest(text.as_bytes()).iter().take(10).map(|b| format!("{b:02x}")).collect()
}

fn path(dir: &Path, key: &str) -> PathBuf {
    dir.join(format!("operators-{key}.json"))
}

/// Loads the operators for `basis` from `dir`, assembling and storing them
/// on a miss.
pub fn system(basis: BasisSet, base: BaseFlowKind, dir: &Path) -> anyhow::Result<System> {
    let key = key(&basis, base);
    let file = path(dir, &key);
    if let Ok(text) = std::fs::read_to_string(&file) {
        match serde_json::from_str::<Entry>(&text) {
            Ok(e) if e.key == key && e.linear.dim == basis.len() => {
                log::info!("operators loaded from {}", file.display());
                return Ok(System::with_operators(basis, base, e.linear, e.tensor)?);
            }
            _ => log::warn!("ignoring unreadable cache entry {}", file.display()),
        }
    }
    let (linear, tensor) = System::assemble(&basis, base, TensorOptions::default())?;
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let entry = Entry { version: hydromodes::VERSION.into(), key, linear, tensor };
    std::fs::write(&file, serde_json::to_string(&entry)?).with_context(|| format!("writing {}", file.display()))?;
    log::info!("operators cached at {}", file.display());
    Ok(System::with_operators(basis, base, entry.linear, entry.tensor)?)
}
