//! Subcommand implementations. They share two conventions: every run echoes
//! the configuration it actually used as `effective_config.toml`, and every
//! artifact is written atomically (temp file, then rename) so an interrupted
//! run never leaves a half-written CSV behind.

pub mod montecarlo;
pub mod report;
pub mod simulate;

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp_name = path.as_os_str().to_os_string();
    tmp_name.push(".tmp");
    let tmp = PathBuf::from(tmp_name);
    fs::write(&tmp, bytes).with_context(|| format!("cannot write {}", tmp.display()))?;
    fs::rename(&tmp, path)
        .with_context(|| format!("cannot move {} into place", tmp.display()))?;
    Ok(())
}

/// File-name-safe version of a sector label.
pub fn sanitize(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}
