//! One TOML configuration file shared by every subcommand. Sections mirror
//! the pipeline stages and all have defaults, so an absent file is a valid
//! configuration. Command-line flags override file values, and the merged
//! result is echoed into the output directory as `effective_config.toml`,
//! making any run reproducible from its artifacts alone.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use panelks_core::dgp::DgpConfig;
use panelks_core::mc::ExperimentConfig;
use panelks_core::panel::{CleaningConfig, SchemaMapping};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct FileConfig {
    pub io: IoSection,
    pub schema: SchemaMapping,
    pub cleaning: CleaningConfig,
    pub test: TestSection,
    pub dgp: DgpConfig,
    pub experiment: ExperimentSection,
}

/// Paths and the master seed. Flags take precedence; a seed given neither
/// way is drawn from the OS and echoed, so the run is still reproducible
/// after the fact.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct IoSection {
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct TestSection {
    /// Bootstrap draws per sector.
    pub bootstrap: usize,
    /// Warn when max(N_AMD, N_BMD) / T_min^4 exceeds this.
    pub validity_threshold: f64,
    /// Sectors to test; absent means every sector in the cleaned panel.
    pub sectors: Option<Vec<String>>,
    /// Also write monotone [0, 1]-clipped companions of the CDF files.
    pub clip_cdf: bool,
}

impl Default for TestSection {
    fn default() -> Self {
        TestSection { bootstrap: 999, validity_threshold: 1.0, sectors: None, clip_cdf: false }
    }
}

/// Monte Carlo experiment selection: `kind` is `size`, `power`, or
/// `bias-order`; `spec` holds the base generator and the parameter grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentSection {
    pub kind: String,
    pub spec: ExperimentConfig,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        ExperimentSection { kind: "size".into(), spec: ExperimentConfig::default() }
    }
}

pub fn load(path: Option<&Path>) -> Result<FileConfig> {
    match path {
        None => Ok(FileConfig::default()),
        Some(p) => {
            let text = fs::read_to_string(p)
                .with_context(|| format!("cannot read config {}", p.display()))?;
            toml::from_str(&text).with_context(|| format!("cannot parse config {}", p.display()))
        }
    }
}

/// Seeds are stored in the effective config, and TOML integers are i64.
pub fn checked_seed(seed: u64) -> Result<u64> {
    anyhow::ensure!(
        seed <= i64::MAX as u64,
        "seed {seed} does not fit a TOML integer; use at most {}",
        i64::MAX
    );
    Ok(seed)
}

/// Flag > config > freshly drawn. The caller stores the result back into
/// the effective config before echoing it.
pub fn resolve_seed(flag: Option<u64>, cfg: &FileConfig) -> Result<u64> {
    match flag.or(cfg.io.seed) {
        Some(seed) => checked_seed(seed),
        None => Ok(rand::Rng::gen_range(&mut rand::thread_rng(), 0..=i64::MAX as u64)),
    }
}

pub fn write_effective(dir: &Path, cfg: &FileConfig) -> Result<()> {
    let body = toml::to_string_pretty(cfg).context("cannot serialize effective config")?;
    let text = format!(
        "# Configuration this run actually used, flags folded in.\n\
         # Rerun with `--config effective_config.toml` to reproduce it.\n{body}"
    );
    crate::commands::atomic_write(&dir.join("effective_config.toml"), text.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_round_trips_through_toml() {
        let cfg = FileConfig::default();
        let text = toml::to_string_pretty(&cfg).unwrap();
        let back: FileConfig = toml::from_str(&text).unwrap();
        assert_eq!(back.test.bootstrap, 999);
        assert_eq!(back.cleaning.min_tenure, 15);
        assert_eq!(back.dgp.tenure, cfg.dgp.tenure);
        assert_eq!(back.experiment.kind, "size");
    }

    #[test]
    fn year_intercepts_survive_the_round_trip() {
        let mut cfg = FileConfig::default();
        cfg.dgp.beta0_by_year = Some((0..3).map(|t| (2000 + t, 0.1 * t as f64)).collect());
        let text = toml::to_string_pretty(&cfg).unwrap();
        let back: FileConfig = toml::from_str(&text).unwrap();
        assert_eq!(back.dgp.beta0_by_year, cfg.dgp.beta0_by_year);
    }

    #[test]
    fn partial_file_keeps_defaults_elsewhere() {
        let cfg: FileConfig = toml::from_str(
            "[io]\nseed = 7\n\n[test]\nbootstrap = 99\n\n[experiment]\nkind = \"power\"\n",
        )
        .unwrap();
        assert_eq!(cfg.io.seed, Some(7));
        assert_eq!(cfg.test.bootstrap, 99);
        assert_eq!(cfg.test.validity_threshold, 1.0);
        assert_eq!(cfg.experiment.kind, "power");
        assert_eq!(cfg.schema.firm_id, "firm_id");
    }

    #[test]
    fn seed_resolution_prefers_the_flag() {
        let mut cfg = FileConfig::default();
        cfg.io.seed = Some(3);
        assert_eq!(resolve_seed(Some(9), &cfg).unwrap(), 9);
        assert_eq!(resolve_seed(None, &cfg).unwrap(), 3);
    }

    #[test]
    fn seeds_beyond_toml_integers_are_rejected_and_never_drawn() {
        let cfg = FileConfig::default();
        assert!(resolve_seed(Some(u64::MAX), &cfg).is_err());
        for _ in 0..64 {
            assert!(resolve_seed(None, &cfg).unwrap() <= i64::MAX as u64);
        }
    }
}
