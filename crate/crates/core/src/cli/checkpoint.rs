//! Stream checkpoints: everything needed to resume a report exactly.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

use super::input::{ReorderBuffer, TimestampMode};
use crate::seqtest::OddsState;
use crate::types::SimplexVector;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamCheckpoint {
    pub version: u32,
    pub command: String,
    /// Digest of the effective configuration, after command-line overrides.
    pub config_digest: String,
    pub state: OddsState,
    pub rho: Option<SimplexVector>,
    /// Input records consumed so far, including any still buffered.
    pub events_processed: u64,
    pub composite_running_min: Option<f64>,
    pub timestamps: TimestampMode,
    pub reorder: Option<ReorderBuffer>,
}

impl StreamCheckpoint {
    /// Writes to a sibling temporary file and renames it into place.
    pub fn save(&self, path: &Path) -> anyhow::Result<()> {
        let json = serde_json::to_string_pretty(self)?;
        let mut tmp = path.as_os_str().to_owned();
        tmp.push(".tmp");
        fs::write(&tmp, json).with_context(|| format!("writing checkpoint {}", path.display()))?;
        fs::rename(&tmp, path).with_context(|| format!("replacing checkpoint {}", path.display()))?;
        Ok(())
    }

    /// Loads a checkpoint and checks it belongs to this command and config.
    pub fn restore(path: &Path, command: &str, digest: &str) -> anyhow::Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading checkpoint {}", path.display()))?;
        let cp: Self = serde_json::from_str(&text)
            .with_context(|| format!("parsing checkpoint {}", path.display()))?;
        if cp.version != CHECKPOINT_VERSION {
            bail!(
                "checkpoint version {} is not supported (expected {CHECKPOINT_VERSION})",
                cp.version
            );
        }
        if cp.command != command {
            bail!("checkpoint was written by `{}`, not `{command}`", cp.command);
        }
        if cp.config_digest != digest {
            bail!("checkpoint config digest does not match the current configuration; refusing to resume");
        }
        cp.state.validate().context("checkpoint state is inconsistent")?;
        if let Some(p) = cp.composite_running_min {
            if !(p > 0.0 && p <= 1.0) {
                bail!("checkpoint composite p-value {p} is out of range");
            }
        }
        Ok(cp)
    }
}
