//! Log-linear production-function estimation with year intercepts, and
//! per-firm TFP estimates on the full panel and on each contiguous half.
//!
//! The regression of log V on log K, log L, and year indicators is solved by
//! within-year demeaning: demeaned slopes come from 2×2 normal equations and
//! the year intercepts are recovered as year means of `log V − b1·log K −
//! b2·log L`. This is algebraically identical to the full dummy regression.
//!
//! TFP for a firm is the average residual over its periods. The half-panel
//! estimates reuse the single full-sample coefficient fit — the halves
//! differ only in which residuals are averaged — which is what makes the
//! jackknife combination downstream target estimation noise rather than a
//! moving coefficient.

use std::collections::{BTreeMap, HashMap};

use thiserror::Error;

use crate::panel::{split_halves, Area, FirmSeries, PanelDataset, PanelObservation};
use crate::stats::mean;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProdfnError {
    #[error("no observations for sector {sector:?} area {area}")]
    EmptyCell { sector: String, area: Area },
    #[error("rank-deficient design for sector {sector:?} area {area}: within-year input variation is collinear")]
    RankDeficient { sector: String, area: Area },
    #[error("no year intercept for year {0}")]
    UnseenYear(i32),
    #[error("missing residual for firm {firm_id:?} year {year}")]
    MissingResidual { firm_id: String, year: i32 },
    #[error("firm {firm_id:?} has {tenure} residual(s); need at least 2")]
    ShortSeries { firm_id: String, tenure: usize },
}

/// Least-squares fit of the log-linearized production function for one
/// (sector, area) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductionEstimate {
    pub sector: String,
    pub area: Area,
    pub beta0_by_year: BTreeMap<i32, f64>,
    pub beta1: f64,
    pub beta2: f64,
    pub n_obs: usize,
    /// Residual sum of squares over (n − #years − 2); zero when the fit is
    /// saturated.
    pub residual_variance: f64,
}

/// One observation's regression residual.
#[derive(Debug, Clone, PartialEq)]
pub struct Residual {
    pub firm_id: String,
    pub year: i32,
    pub residual: f64,
}

/// Per-firm TFP estimates: the average residual over all periods and over
/// each contiguous half.
#[derive(Debug, Clone, PartialEq)]
pub struct TripleEstimate {
    pub firm_id: String,
    pub sector: String,
    pub area: Area,
    pub theta_full: f64,
    pub theta_h1: f64,
    pub theta_h2: f64,
    pub tenure: usize,
}

struct YearAccumulator {
    n: f64,
    sum_v: f64,
    sum_k: f64,
    sum_l: f64,
}

/// Fits log V on log K, log L, and year indicators over all observations of
/// the (sector, area) cell.
///
/// The cell should come from the full (unfiltered) sample: estimation uses
/// every clean observation, while the distribution test downstream runs on
/// the tenure-filtered firms.
pub fn estimate_production_function(
    dataset: &PanelDataset,
    sector: &str,
    area: Area,
) -> Result<ProductionEstimate, ProdfnError> {
    let cell: Vec<&PanelObservation> = dataset.select(Some(sector), Some(area));
    if cell.is_empty() {
        return Err(ProdfnError::EmptyCell { sector: sector.to_string(), area });
    }

    let logs: Vec<(i32, f64, f64, f64)> = cell
        .iter()
        .map(|o| (o.year, o.value_added.ln(), o.capital.ln(), o.labor.ln()))
        .collect();

    let mut years: BTreeMap<i32, YearAccumulator> = BTreeMap::new();
    for &(year, v, k, l) in &logs {
        let acc = years
            .entry(year)
            .or_insert(YearAccumulator { n: 0.0, sum_v: 0.0, sum_k: 0.0, sum_l: 0.0 });
        acc.n += 1.0;
        acc.sum_v += v;
        acc.sum_k += k;
        acc.sum_l += l;
    }

    // within-year demeaned cross-products
    let (mut skk, mut sll, mut skl, mut skv, mut slv) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(year, v, k, l) in &logs {
        let acc = &years[&year];
        let (dv, dk, dl) = (v - acc.sum_v / acc.n, k - acc.sum_k / acc.n, l - acc.sum_l / acc.n);
        skk += dk * dk;
        sll += dl * dl;
        skl += dk * dl;
        skv += dk * dv;
        slv += dl * dv;
    }

    // Gram determinant, scale-free tolerance: skk·sll bounds det from above.
    let det = skk * sll - skl * skl;
    if !(det > 1e-12 * skk * sll) {
        return Err(ProdfnError::RankDeficient { sector: sector.to_string(), area });
    }
    let beta1 = (sll * skv - skl * slv) / det;
    let beta2 = (skk * slv - skl * skv) / det;

    let beta0_by_year: BTreeMap<i32, f64> = years
        .iter()
        .map(|(&year, acc)| {
            (year, (acc.sum_v - beta1 * acc.sum_k - beta2 * acc.sum_l) / acc.n)
        })
        .collect();

    let mut sse = 0.0;
    for &(year, v, k, l) in &logs {
        let e = v - beta0_by_year[&year] - beta1 * k - beta2 * l;
        sse += e * e;
    }
    let params = years.len() + 2;
    let dof = logs.len().saturating_sub(params);
    let residual_variance = if dof > 0 { sse / dof as f64 } else { 0.0 };

    Ok(ProductionEstimate {
        sector: sector.to_string(),
        area,
        beta0_by_year,
        beta1,
        beta2,
        n_obs: logs.len(),
        residual_variance,
    })
}

/// Residual of each observation under the given estimate. Errors if an
/// observation's year has no intercept in the estimate.
pub fn compute_residuals(
    observations: &[&PanelObservation],
    estimate: &ProductionEstimate,
) -> Result<Vec<Residual>, ProdfnError> {
    observations
        .iter()
        .map(|o| {
            let beta0 = estimate
                .beta0_by_year
                .get(&o.year)
                .ok_or(ProdfnError::UnseenYear(o.year))?;
            Ok(Residual {
                firm_id: o.firm_id.clone(),
                year: o.year,
                residual: o.value_added.ln()
                    - beta0
                    - estimate.beta1 * o.capital.ln()
                    - estimate.beta2 * o.labor.ln(),
            })
        })
        .collect()
}

/// Averages residuals into per-firm triples: full series mean and the means
/// over the two contiguous halves of each firm's series.
pub fn tfp_estimates(
    residuals: &[Residual],
    series: &[FirmSeries],
) -> Result<Vec<TripleEstimate>, ProdfnError> {
    let mut by_obs: HashMap<(&str, i32), f64> = HashMap::with_capacity(residuals.len());
    for r in residuals {
        by_obs.insert((r.firm_id.as_str(), r.year), r.residual);
    }
    let lookup = |s: &FirmSeries, obs: &[PanelObservation]| -> Result<Vec<f64>, ProdfnError> {
        obs.iter()
            .map(|o| {
                by_obs.get(&(s.firm_id.as_str(), o.year)).copied().ok_or_else(|| {
                    ProdfnError::MissingResidual { firm_id: s.firm_id.clone(), year: o.year }
                })
            })
            .collect()
    };

    series
        .iter()
        .map(|s| {
            if s.tenure() < 2 {
                return Err(ProdfnError::ShortSeries {
                    firm_id: s.firm_id.clone(),
                    tenure: s.tenure(),
                });
            }
            let (h1, h2) = split_halves(s).expect("tenure checked above");
            let full = lookup(s, &s.observations)?;
            let first = lookup(s, &h1.observations)?;
            let second = lookup(s, &h2.observations)?;
            Ok(TripleEstimate {
                firm_id: s.firm_id.clone(),
                sector: s.sector.clone(),
                area: s.area,
                theta_full: mean(&full),
                theta_h1: mean(&first),
                theta_h2: mean(&second),
                tenure: s.tenure(),
            })
        })
        .collect()
}
