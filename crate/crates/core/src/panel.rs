//! Firm-year panel data model: CSV ingestion, cleaning filters, tenure
//! filtering, and contiguous half-panel splits.
//!
//! Cleaning operates on observations; tenure filtering drops firms as whole
//! units. Both are single-pass and deterministic: a record violating several
//! rules is attributed to the first rule in the documented order
//! (nonpositive values, excluded sector, category filter, employee cap), so
//! the cleaning report's counts always reconcile with the input size.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PanelError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed CSV in {path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
    #[error("column {0:?} not found in header")]
    MissingColumn(String),
    #[error("duplicate observation for firm {firm_id:?} in year {year}")]
    DuplicateFirmYear { firm_id: String, year: i32 },
    #[error("min_tenure must be at least 2 (both halves must be non-empty), got {0}")]
    MinTenureTooSmall(usize),
    #[error("cannot split a series of {0} observation(s); need at least 2")]
    SeriesTooShort(usize),
}

/// Area label: above- or below-median-density.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Area {
    #[serde(rename = "AMD")]
    Amd,
    #[serde(rename = "BMD")]
    Bmd,
}

impl Area {
    pub fn as_str(self) -> &'static str {
        match self {
            Area::Amd => "AMD",
            Area::Bmd => "BMD",
        }
    }

    pub fn parse(s: &str) -> Option<Area> {
        if s.eq_ignore_ascii_case("amd") {
            Some(Area::Amd)
        } else if s.eq_ignore_ascii_case("bmd") {
            Some(Area::Bmd)
        } else {
            None
        }
    }

    pub const BOTH: [Area; 2] = [Area::Amd, Area::Bmd];
}

impl fmt::Display for Area {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One firm-year record. `value_added`, `capital`, and `labor` must be
/// strictly positive after cleaning so their logs exist.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelObservation {
    pub firm_id: String,
    pub year: i32,
    pub sector: String,
    pub area: Area,
    pub value_added: f64,
    pub capital: f64,
    pub labor: f64,
    /// Present only when the input maps an employee-count column.
    pub employees: Option<f64>,
    /// Present only when the input maps a categorical filter column.
    pub category: Option<String>,
}

/// A row that could not be parsed under the schema mapping. Recorded, never
/// silently dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct ParseFailure {
    /// 1-based data-row number (excluding the header).
    pub record: usize,
    pub column: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct PanelDataset {
    pub observations: Vec<PanelObservation>,
    pub parse_failures: Vec<ParseFailure>,
}

impl PanelDataset {
    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    /// Distinct sector codes, sorted.
    pub fn sectors(&self) -> BTreeSet<String> {
        self.observations.iter().map(|o| o.sector.clone()).collect()
    }

    /// Observations matching the given sector and/or area, in input order.
    pub fn select(&self, sector: Option<&str>, area: Option<Area>) -> Vec<&PanelObservation> {
        self.observations
            .iter()
            .filter(|o| sector.map_or(true, |s| o.sector == s))
            .filter(|o| area.map_or(true, |a| o.area == a))
            .collect()
    }
}

/// Column-name mapping from the caller's CSV header onto the panel fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SchemaMapping {
    pub firm_id: String,
    pub year: String,
    pub sector: String,
    pub area: String,
    pub value_added: String,
    pub capital: String,
    pub labor: String,
    pub employees: Option<String>,
    pub category: Option<String>,
}

impl Default for SchemaMapping {
    fn default() -> Self {
        SchemaMapping {
            firm_id: "firm_id".into(),
            year: "year".into(),
            sector: "sector".into(),
            area: "area".into(),
            value_added: "value_added".into(),
            capital: "capital".into(),
            labor: "labor".into(),
            employees: None,
            category: None,
        }
    }
}

/// Cleaning rules. Each enabled rule drops observations; tenure is enforced
/// separately by [`filter_min_periods`] because it drops whole firms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CleaningConfig {
    /// Minimum observations per firm for the testing sample (≥ 2).
    pub min_tenure: usize,
    /// Drop observations with nonpositive (or non-finite) value added,
    /// capital, or labor.
    pub drop_nonpositive: bool,
    pub excluded_sectors: BTreeSet<String>,
    /// Keep only observations whose category is listed. Observations without
    /// a category are dropped when the filter is set.
    pub allowed_categories: Option<BTreeSet<String>>,
    /// Drop observations with more employees than this, where an employee
    /// column is mapped; observations without the field are untouched.
    pub max_employees: Option<f64>,
    /// Drop firms whose calendar years have gaps (after cleaning). Off by
    /// default: half-panel splits are contiguous in observation order, not
    /// calendar time.
    pub require_consecutive_years: bool,
}

impl Default for CleaningConfig {
    fn default() -> Self {
        CleaningConfig {
            min_tenure: 15,
            drop_nonpositive: true,
            excluded_sectors: BTreeSet::new(),
            allowed_categories: None,
            max_employees: None,
            require_consecutive_years: false,
        }
    }
}

/// Firm counts for one (sector, area) cell of the cleaned sample.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CellFirmCount {
    pub sector: String,
    pub area: Area,
    pub firms: usize,
}

/// Accounting for one [`clean_panel`] pass:
/// `input_records = retained_records + Σ dropped_*`.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct CleaningReport {
    pub input_records: usize,
    pub dropped_nonpositive: usize,
    pub dropped_excluded_sector: usize,
    pub dropped_category: usize,
    pub dropped_employees: usize,
    pub retained_records: usize,
    pub retained_firms: Vec<CellFirmCount>,
}

impl CleaningReport {
    pub fn dropped_total(&self) -> usize {
        self.dropped_nonpositive
            + self.dropped_excluded_sector
            + self.dropped_category
            + self.dropped_employees
    }
}

/// A firm's time-ordered observations under its (modal) sector and area.
#[derive(Debug, Clone, PartialEq)]
pub struct FirmSeries {
    pub firm_id: String,
    pub sector: String,
    pub area: Area,
    pub observations: Vec<PanelObservation>,
}

impl FirmSeries {
    pub fn tenure(&self) -> usize {
        self.observations.len()
    }
}

/// Reads a CSV panel under the given column mapping.
///
/// Rows whose mapped fields do not parse are recorded as [`ParseFailure`]s
/// and excluded from the observations. Duplicate (firm_id, year) pairs are a
/// hard error.
pub fn load_panel(path: &Path, schema: &SchemaMapping) -> Result<PanelDataset, PanelError> {
    let display = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => PanelError::Io {
                path: display.clone(),
                source: match e.into_kind() {
                    csv::ErrorKind::Io(io) => io,
                    _ => unreachable!(),
                },
            },
            _ => PanelError::Csv { path: display.clone(), source: e },
        })?;

    let headers = reader
        .headers()
        .map_err(|e| PanelError::Csv { path: display.clone(), source: e })?
        .clone();
    let col = |name: &str| -> Result<usize, PanelError> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| PanelError::MissingColumn(name.to_string()))
    };
    let idx_firm = col(&schema.firm_id)?;
    let idx_year = col(&schema.year)?;
    let idx_sector = col(&schema.sector)?;
    let idx_area = col(&schema.area)?;
    let idx_va = col(&schema.value_added)?;
    let idx_k = col(&schema.capital)?;
    let idx_l = col(&schema.labor)?;
    let idx_emp = schema.employees.as_deref().map(col).transpose()?;
    let idx_cat = schema.category.as_deref().map(col).transpose()?;

    let mut dataset = PanelDataset::default();
    let mut seen: HashSet<(String, i32)> = HashSet::new();

    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| PanelError::Csv { path: display.clone(), source: e })?;
        let record_no = row + 1;
        let fail = |column: &str, reason: String| ParseFailure {
            record: record_no,
            column: column.to_string(),
            reason,
        };

        let field = |idx: usize| record.get(idx).unwrap_or("");
        let firm_id = field(idx_firm);
        if firm_id.is_empty() {
            dataset.parse_failures.push(fail(&schema.firm_id, "empty firm id".into()));
            continue;
        }
        let year = match field(idx_year).parse::<i32>() {
            Ok(y) => y,
            Err(_) => {
                dataset
                    .parse_failures
                    .push(fail(&schema.year, format!("not an integer: {:?}", field(idx_year))));
                continue;
            }
        };
        let area = match Area::parse(field(idx_area)) {
            Some(a) => a,
            None => {
                dataset.parse_failures.push(fail(
                    &schema.area,
                    format!("expected AMD or BMD, got {:?}", field(idx_area)),
                ));
                continue;
            }
        };
        let numeric = |idx: usize, name: &str| -> Result<f64, ParseFailure> {
            let raw = field(idx);
            if raw.is_empty() {
                return Err(fail(name, "missing value".into()));
            }
            raw.parse::<f64>().map_err(|_| fail(name, format!("not a number: {raw:?}")))
        };
        let value_added = match numeric(idx_va, &schema.value_added) {
            Ok(v) => v,
            Err(f) => {
                dataset.parse_failures.push(f);
                continue;
            }
        };
        let capital = match numeric(idx_k, &schema.capital) {
            Ok(v) => v,
            Err(f) => {
                dataset.parse_failures.push(f);
                continue;
            }
        };
        let labor = match numeric(idx_l, &schema.labor) {
            Ok(v) => v,
            Err(f) => {
                dataset.parse_failures.push(f);
                continue;
            }
        };
        let employees = match idx_emp {
            Some(idx) if !field(idx).is_empty() => {
                match numeric(idx, schema.employees.as_deref().unwrap()) {
                    Ok(v) => Some(v),
                    Err(f) => {
                        dataset.parse_failures.push(f);
                        continue;
                    }
                }
            }
            _ => None,
        };
        let category = idx_cat.and_then(|idx| {
            let raw = field(idx);
            (!raw.is_empty()).then(|| raw.to_string())
        });

        if !seen.insert((firm_id.to_string(), year)) {
            return Err(PanelError::DuplicateFirmYear { firm_id: firm_id.to_string(), year });
        }
        dataset.observations.push(PanelObservation {
            firm_id: firm_id.to_string(),
            year,
            sector: field(idx_sector).to_string(),
            area,
            value_added,
            capital,
            labor,
            employees,
            category,
        });
    }
    Ok(dataset)
}

fn violates_nonpositive(o: &PanelObservation) -> bool {
    !(o.value_added > 0.0 && o.capital > 0.0 && o.labor > 0.0)
        || !o.value_added.is_finite()
        || !o.capital.is_finite()
        || !o.labor.is_finite()
}

/// Applies the observation-level cleaning rules, in documented order.
/// Cleaning never fails; every dropped record is accounted for in the report.
pub fn clean_panel(dataset: PanelDataset, config: &CleaningConfig) -> (PanelDataset, CleaningReport) {
    let mut report = CleaningReport { input_records: dataset.observations.len(), ..Default::default() };
    let mut retained = Vec::with_capacity(dataset.observations.len());

    for obs in dataset.observations {
        if config.drop_nonpositive && violates_nonpositive(&obs) {
            report.dropped_nonpositive += 1;
        } else if config.excluded_sectors.contains(&obs.sector) {
            report.dropped_excluded_sector += 1;
        } else if config
            .allowed_categories
            .as_ref()
            .is_some_and(|allowed| !obs.category.as_ref().is_some_and(|c| allowed.contains(c)))
        {
            report.dropped_category += 1;
        } else if config
            .max_employees
            .is_some_and(|max| obs.employees.is_some_and(|e| e > max))
        {
            report.dropped_employees += 1;
        } else {
            retained.push(obs);
        }
    }
    report.retained_records = retained.len();

    let mut firms: BTreeMap<(String, Area), BTreeSet<&str>> = BTreeMap::new();
    for obs in &retained {
        firms
            .entry((obs.sector.clone(), obs.area))
            .or_default()
            .insert(obs.firm_id.as_str());
    }
    report.retained_firms = firms
        .into_iter()
        .map(|((sector, area), ids)| CellFirmCount { sector, area, firms: ids.len() })
        .collect();

    (
        PanelDataset { observations: retained, parse_failures: dataset.parse_failures },
        report,
    )
}

/// Keeps only firms observed for at least `min_tenure` periods. Firms are
/// dropped as units; surviving observations keep their input order and
/// values.
pub fn filter_min_periods(dataset: PanelDataset, min_tenure: usize) -> Result<PanelDataset, PanelError> {
    if min_tenure < 2 {
        return Err(PanelError::MinTenureTooSmall(min_tenure));
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for obs in &dataset.observations {
        *counts.entry(obs.firm_id.as_str()).or_default() += 1;
    }
    let keep: HashSet<String> = counts
        .into_iter()
        .filter(|&(_, n)| n >= min_tenure)
        .map(|(id, _)| id.to_string())
        .collect();
    Ok(PanelDataset {
        observations: dataset
            .observations
            .into_iter()
            .filter(|o| keep.contains(o.firm_id.as_str()))
            .collect(),
        parse_failures: dataset.parse_failures,
    })
}

/// Drops firms whose observed calendar years are not consecutive.
pub fn filter_consecutive_years(dataset: PanelDataset) -> PanelDataset {
    let mut years: HashMap<&str, Vec<i32>> = HashMap::new();
    for obs in &dataset.observations {
        years.entry(obs.firm_id.as_str()).or_default().push(obs.year);
    }
    let keep: HashSet<String> = years
        .into_iter()
        .filter(|(_, ys)| {
            let mut ys = ys.clone();
            ys.sort_unstable();
            ys.windows(2).all(|w| w[1] == w[0] + 1)
        })
        .map(|(id, _)| id.to_string())
        .collect();
    PanelDataset {
        observations: dataset
            .observations
            .into_iter()
            .filter(|o| keep.contains(o.firm_id.as_str()))
            .collect(),
        parse_failures: dataset.parse_failures,
    }
}

/// The most frequent label; ties break to the lexicographically smallest.
fn modal_label<T: Ord + Clone>(labels: impl Iterator<Item = T>) -> T {
    let mut counts: BTreeMap<T, usize> = BTreeMap::new();
    for l in labels {
        *counts.entry(l).or_default() += 1;
    }
    counts
        .into_iter()
        .max_by(|a, b| a.1.cmp(&b.1).then_with(|| b.0.cmp(&a.0)))
        .expect("non-empty label set")
        .0
}

/// Groups observations into per-firm series, sorted by firm id.
///
/// Observations within a firm are ordered by year. Firms whose sector or
/// area labels vary across rows are attributed to the most frequent label
/// (ties to the smallest), matching how multi-sector firms are classified.
pub fn group_series(dataset: &PanelDataset) -> Result<Vec<FirmSeries>, PanelError> {
    let mut by_firm: BTreeMap<&str, Vec<&PanelObservation>> = BTreeMap::new();
    for obs in &dataset.observations {
        by_firm.entry(obs.firm_id.as_str()).or_default().push(obs);
    }
    let mut series = Vec::with_capacity(by_firm.len());
    for (firm_id, mut obs) in by_firm {
        obs.sort_by_key(|o| o.year);
        for w in obs.windows(2) {
            if w[0].year == w[1].year {
                return Err(PanelError::DuplicateFirmYear {
                    firm_id: firm_id.to_string(),
                    year: w[0].year,
                });
            }
        }
        let sector = modal_label(obs.iter().map(|o| o.sector.clone()));
        let area = modal_label(obs.iter().map(|o| o.area));
        series.push(FirmSeries {
            firm_id: firm_id.to_string(),
            sector,
            area,
            observations: obs.into_iter().cloned().collect(),
        });
    }
    Ok(series)
}

/// Splits a series into two contiguous halves: observations `1..⌊T/2⌋` and
/// `⌊T/2⌋+1..T`. For odd T the first half is the shorter one.
pub fn split_halves(series: &FirmSeries) -> Result<(FirmSeries, FirmSeries), PanelError> {
    let t = series.observations.len();
    if t < 2 {
        return Err(PanelError::SeriesTooShort(t));
    }
    let cut = t / 2;
    let mk = |obs: &[PanelObservation]| FirmSeries {
        firm_id: series.firm_id.clone(),
        sector: series.sector.clone(),
        area: series.area,
        observations: obs.to_vec(),
    };
    Ok((mk(&series.observations[..cut]), mk(&series.observations[cut..])))
}

/// Convenience: group, then keep only series in the given (sector, area).
pub fn cell_series(dataset: &PanelDataset, sector: &str, area: Area) -> Result<Vec<FirmSeries>, PanelError> {
    Ok(group_series(dataset)?
        .into_iter()
        .filter(|s| s.sector == sector && s.area == area)
        .collect())
}
