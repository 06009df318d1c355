use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::{Deserialize, Serialize};

use crate::commands::Command;

pub const MANIFEST_FILE: &str = "manifest.json";

/// Provenance record written next to every command's outputs. `args` holds
/// the fully resolved command, so replaying it needs nothing else.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub inputs: Vec<PathBuf>,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub tool_version: String,
    pub args: Command,
}

impl RunManifest {
    pub fn for_command(cmd: &Command, seed: u64) -> RunManifest {
        RunManifest {
            command: cmd.name().to_owned(),
            inputs: cmd.inputs(),
            seed,
            output_dir: cmd.out_dir().to_owned(),
            tool_version: env!("CARGO_PKG_VERSION").to_owned(),
            args: cmd.clone(),
        }
    }

    pub fn write(&self, dir: &Path) -> anyhow::Result<()> {
        let text = serde_json::to_string_pretty(self)? + "\n";
        fs::write(dir.join(MANIFEST_FILE), text)
            .with_context(|| format!("writing manifest in {}", dir.display()))
    }

    pub fn read(path: &Path) -> anyhow::Result<RunManifest> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading manifest {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing manifest {}", path.display()))
    }
}
