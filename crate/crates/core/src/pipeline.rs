//! End-to-end test pipeline: clean the panel, fit the production function
//! per (sector, area) cell, build debiased TFP triples for the
//! tenure-filtered firms, and run the bootstrap test sector by sector.
//!
//! Estimation and testing deliberately use different samples: coefficients
//! come from every clean observation of a cell, while the distribution test
//! only uses firms observed long enough for the half-panel split to mean
//! something. A sector that cannot be tested (too few firms in an area, a
//! collinear design, a degenerate variance) is reported as skipped with the
//! reason; it never aborts the other sectors.

use rayon::prelude::*;
use thiserror::Error;

use crate::kstest::{bootstrap_test, CellSummary, TestResult};
use crate::panel::{
    clean_panel, filter_consecutive_years, filter_min_periods, group_series, Area,
    CleaningConfig, CleaningReport, FirmSeries, PanelDataset, PanelError,
};
use crate::prodfn::{
    compute_residuals, estimate_production_function, tfp_estimates, ProductionEstimate,
    Residual, TripleEstimate,
};
use crate::rng::derive_seed;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Panel(#[from] PanelError),
    #[error("requested sector(s) not present in the cleaned panel: {0:?}")]
    UnknownSectors(Vec<String>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestPipelineConfig {
    pub cleaning: CleaningConfig,
    pub bootstrap_b: usize,
    pub seed: u64,
    pub validity_threshold: f64,
}

impl Default for TestPipelineConfig {
    fn default() -> Self {
        TestPipelineConfig {
            cleaning: CleaningConfig::default(),
            bootstrap_b: 999,
            seed: 0,
            validity_threshold: 1.0,
        }
    }
}

/// What happened to one sector.
#[derive(Debug, Clone, PartialEq)]
pub enum SectorOutcome {
    Tested(TestResult),
    Skipped { reason: String },
}

/// Standardized debiased CDF of one tested cell, tabulated at its jump
/// points for plotting area overlays. Ordinates are raw: debiasing can push
/// them outside [0, 1] and the overlay keeps that visible.
#[derive(Debug, Clone, PartialEq)]
pub struct CdfOverlay {
    pub area: Area,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SectorRun {
    pub sector: String,
    /// Successful per-area fits, in [`Area::BOTH`] order. May be shorter
    /// when an area could not be estimated.
    pub estimates: Vec<ProductionEstimate>,
    pub outcome: SectorOutcome,
    /// Per-area CDF tables, present only for tested sectors.
    pub overlays: Vec<CdfOverlay>,
    /// Pipeline-level notes, e.g. firms dropped because an observation year
    /// had no intercept in their cell's fit.
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestRun {
    pub cleaning_report: CleaningReport,
    /// One entry per tested sector, lexicographic.
    pub sectors: Vec<SectorRun>,
}

/// Builds triples for the tested firms of one (sector, area) cell. Firms
/// whose years are not covered by the fit are skipped and noted.
fn cell_triples(
    series: &[FirmSeries],
    estimate: &ProductionEstimate,
    warnings: &mut Vec<String>,
) -> Vec<TripleEstimate> {
    let mut residuals: Vec<Residual> = Vec::new();
    let mut kept: Vec<FirmSeries> = Vec::new();
    for s in series {
        let obs: Vec<&_> = s.observations.iter().collect();
        match compute_residuals(&obs, estimate) {
            Ok(mut r) => {
                residuals.append(&mut r);
                kept.push(s.clone());
            }
            Err(e) => warnings.push(format!("firm {:?} skipped: {e}", s.firm_id)),
        }
    }
    if kept.is_empty() {
        return Vec::new();
    }
    tfp_estimates(&residuals, &kept)
        .expect("residuals cover every kept observation and tenure was filtered")
}

fn run_sector(
    sector: &str,
    cleaned: &PanelDataset,
    tested: &[FirmSeries],
    config: &TestPipelineConfig,
) -> SectorRun {
    let mut estimates = Vec::new();
    let mut warnings = Vec::new();
    let mut triples: Vec<Vec<TripleEstimate>> = Vec::new();
    for area in Area::BOTH {
        match estimate_production_function(cleaned, sector, area) {
            Ok(estimate) => {
                let series: Vec<FirmSeries> = tested
                    .iter()
                    .filter(|s| s.sector == sector && s.area == area)
                    .cloned()
                    .collect();
                triples.push(cell_triples(&series, &estimate, &mut warnings));
                estimates.push(estimate);
            }
            Err(e) => {
                return SectorRun {
                    sector: sector.to_string(),
                    estimates,
                    outcome: SectorOutcome::Skipped { reason: e.to_string() },
                    overlays: Vec::new(),
                    warnings,
                };
            }
        }
    }
    let bmd = triples.pop().expect("both areas estimated");
    let amd = triples.pop().expect("both areas estimated");
    let seed = derive_seed(config.seed, sector, 0);
    let mut overlays = Vec::new();
    let outcome = match bootstrap_test(
        sector,
        &amd,
        &bmd,
        config.bootstrap_b,
        seed,
        config.validity_threshold,
    ) {
        Ok(result) => {
            for (area, cell) in [(Area::Amd, &amd), (Area::Bmd, &bmd)] {
                let summary = CellSummary::from_triples(sector, area, cell)
                    .expect("the test already built this summary");
                overlays.push(CdfOverlay { area, points: summary.standardized_cdf_table() });
            }
            SectorOutcome::Tested(result)
        }
        Err(e) => SectorOutcome::Skipped { reason: e.to_string() },
    };
    SectorRun { sector: sector.to_string(), estimates, outcome, overlays, warnings }
}

/// Runs the full pipeline. `sectors` restricts the run to the listed
/// sectors; requesting a sector that is absent after cleaning is an error.
pub fn run_test(
    dataset: PanelDataset,
    config: &TestPipelineConfig,
    sectors: Option<&[String]>,
) -> Result<TestRun, PipelineError> {
    let (cleaned, cleaning_report) = clean_panel(dataset, &config.cleaning);

    let available = cleaned.sectors();
    let selected: Vec<String> = match sectors {
        Some(requested) => {
            let missing: Vec<String> = requested
                .iter()
                .filter(|s| !available.contains(s.as_str()))
                .cloned()
                .collect();
            if !missing.is_empty() {
                return Err(PipelineError::UnknownSectors(missing));
            }
            let mut list: Vec<String> = requested.to_vec();
            list.sort();
            list.dedup();
            list
        }
        None => available.into_iter().collect(),
    };

    let mut filtered = filter_min_periods(cleaned.clone(), config.cleaning.min_tenure)?;
    if config.cleaning.require_consecutive_years {
        filtered = filter_consecutive_years(filtered);
    }
    let tested = group_series(&filtered)?;

    let sectors = selected
        .par_iter()
        .map(|s| run_sector(s, &cleaned, &tested, config))
        .collect();

    Ok(TestRun { cleaning_report, sectors })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dgp::{generate_panel, DgpConfig};

    fn small_config(seed: u64) -> TestPipelineConfig {
        TestPipelineConfig {
            cleaning: CleaningConfig { min_tenure: 15, ..Default::default() },
            bootstrap_b: 49,
            seed,
            validity_threshold: 1.0,
        }
    }

    #[test]
    fn null_panel_runs_end_to_end() {
        let dgp = DgpConfig { n_amd: 30, n_bmd: 25, tenure: 16, seed: 5, ..Default::default() };
        let (panel, _) = generate_panel(&dgp).unwrap();
        let run = run_test(panel.clone(), &small_config(11), None).unwrap();
        assert_eq!(run.cleaning_report.input_records, 55 * 16);
        assert_eq!(run.cleaning_report.retained_records, 55 * 16);
        assert_eq!(run.sectors.len(), 1);
        let sector = &run.sectors[0];
        assert_eq!(sector.sector, "S1");
        assert_eq!(sector.estimates.len(), 2);
        match &sector.outcome {
            SectorOutcome::Tested(result) => {
                assert_eq!(result.n_amd, 30);
                assert_eq!(result.n_bmd, 25);
                assert_eq!(result.min_tenure, 16);
                assert!(result.p_value > 0.0 && result.p_value <= 1.0);
            }
            SectorOutcome::Skipped { reason } => panic!("unexpected skip: {reason}"),
        }
        assert_eq!(sector.overlays.len(), 2);
        assert_eq!(sector.overlays[0].area, Area::Amd);
        for overlay in &sector.overlays {
            assert_eq!(overlay.points.last().map(|p| p.1), Some(1.0));
        }

        let again = run_test(panel, &small_config(11), None).unwrap();
        assert_eq!(run, again);
    }

    #[test]
    fn sector_selection_is_validated() {
        let dgp = DgpConfig { n_amd: 20, n_bmd: 20, tenure: 16, seed: 6, ..Default::default() };
        let (panel, _) = generate_panel(&dgp).unwrap();
        let err =
            run_test(panel.clone(), &small_config(1), Some(&["S9".to_string()])).unwrap_err();
        assert!(matches!(err, PipelineError::UnknownSectors(ref v) if v == &["S9"]));
        let run = run_test(panel, &small_config(1), Some(&["S1".to_string()])).unwrap();
        assert_eq!(run.sectors.len(), 1);
    }

    #[test]
    fn multiple_sectors_run_in_name_order() {
        let a = DgpConfig { sector: "mfg".into(), n_amd: 20, n_bmd: 20, tenure: 16, seed: 7, ..Default::default() };
        let b = DgpConfig { sector: "svc".into(), n_amd: 18, n_bmd: 22, tenure: 16, seed: 8, ..Default::default() };
        let (mut panel, _) = generate_panel(&a).unwrap();
        let (other, _) = generate_panel(&b).unwrap();
        panel.observations.extend(other.observations.into_iter().map(|mut o| {
            o.firm_id = format!("G{}", o.firm_id);
            o
        }));
        let run = run_test(panel, &small_config(2), None).unwrap();
        let names: Vec<&str> = run.sectors.iter().map(|s| s.sector.as_str()).collect();
        assert_eq!(names, ["mfg", "svc"]);
        for sector in &run.sectors {
            assert!(matches!(sector.outcome, SectorOutcome::Tested(_)));
        }
    }

    #[test]
    fn untestable_sector_is_skipped_not_fatal() {
        // tenure 10 < min_tenure 15: estimation succeeds on the full cell but
        // no firm survives the tenure filter
        let dgp = DgpConfig { n_amd: 12, n_bmd: 12, tenure: 10, seed: 9, ..Default::default() };
        let (panel, _) = generate_panel(&dgp).unwrap();
        let run = run_test(panel, &small_config(3), None).unwrap();
        assert_eq!(run.sectors.len(), 1);
        let sector = &run.sectors[0];
        assert_eq!(sector.estimates.len(), 2);
        match &sector.outcome {
            SectorOutcome::Skipped { reason } => assert!(reason.contains("firm")),
            SectorOutcome::Tested(_) => panic!("expected a skip"),
        }
    }
}
