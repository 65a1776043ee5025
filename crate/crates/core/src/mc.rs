//! Scripted Monte Carlo experiments over the full pipeline.
//!
//! Three experiment kinds share one grid mechanism:
//!
//! * size: rejection rate under the null (ξ = 0, same base law both areas),
//! * power: rejection rate under truncation or shape alternatives,
//! * bias order: CDF bias of the plug-in and debiased estimators at fixed
//!   evaluation points, across a tenure grid containing (T, 2T) pairs, so
//!   halving checks like bias(T)/bias(2T) ≈ 2 (plug-in) vs ≈ 4 (debiased)
//!   are a table lookup.
//!
//! Every replication draws its generator and bootstrap seeds from the master
//! seed by position, so a summary is exactly reproducible regardless of
//! thread count. Aggregation folds the collected per-replication records in
//! index order; nothing depends on scheduling.
//!
//! The bias-order experiment bypasses the regression stage: firm-level
//! estimates are simulated directly as θ_i plus averaged noise, which is
//! exactly the estimation-noise structure the debiasing targets, without
//! spending cycles on inputs that the regression would remove again.

use std::time::{Duration, Instant};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dgp::{generate_panel, DgpConfig, DgpError, NoiseSpec};
use crate::dist::{cdgpr_quantile, sample_latent_one, DistError, LatentDistSpec};
use crate::hpj::hpj_combine;
use crate::panel::CleaningConfig;
use crate::pipeline::{run_test, SectorOutcome, TestPipelineConfig};
use crate::rng::{derive_seed, substream};
use crate::stats::mean;

#[derive(Debug, Error)]
pub enum McError {
    #[error("experiment config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Dgp(#[from] DgpError),
    #[error(transparent)]
    Dist(#[from] DistError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocationScale {
    pub mu: f64,
    pub sigma: f64,
}

/// Experiment specification: a base generator configuration plus parameter
/// lists. The grid is the cross product of the non-empty lists; an empty
/// list keeps the base value for that axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub base: DgpConfig,
    pub xi: Vec<f64>,
    /// Firm counts applied to both areas.
    pub n_per_area: Vec<usize>,
    pub tenure: Vec<usize>,
    pub noise_sd: Vec<f64>,
    pub location_scale: Vec<LocationScale>,
    pub replications: usize,
    pub bootstrap_b: usize,
    pub alpha: f64,
    /// CDF evaluation levels for the bias-order experiment, each in (0, 1).
    pub eval_levels: Vec<f64>,
    pub master_seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            base: DgpConfig::default(),
            xi: Vec::new(),
            n_per_area: Vec::new(),
            tenure: Vec::new(),
            noise_sd: Vec::new(),
            location_scale: Vec::new(),
            replications: 100,
            bootstrap_b: 199,
            alpha: 0.05,
            eval_levels: vec![0.25, 0.5, 0.75],
            master_seed: 0,
        }
    }
}

fn axis<T: Copy>(list: &[T]) -> Vec<Option<T>> {
    if list.is_empty() {
        vec![None]
    } else {
        list.iter().copied().map(Some).collect()
    }
}

impl ExperimentConfig {
    /// Effective generator configurations, one per grid point, in a fixed
    /// nesting order with ξ varying fastest.
    pub fn grid(&self) -> Vec<DgpConfig> {
        let mut points = Vec::new();
        for ls in axis(&self.location_scale) {
            for n in axis(&self.n_per_area) {
                for tenure in axis(&self.tenure) {
                    for noise_sd in axis(&self.noise_sd) {
                        for xi in axis(&self.xi) {
                            let mut cfg = self.base.clone();
                            if let Some(LocationScale { mu, sigma }) = ls {
                                cfg.mu = mu;
                                cfg.sigma = sigma;
                            }
                            if let Some(n) = n {
                                cfg.n_amd = n;
                                cfg.n_bmd = n;
                            }
                            if let Some(t) = tenure {
                                cfg.tenure = t;
                            }
                            if let Some(s) = noise_sd {
                                cfg.noise_sd = s;
                            }
                            if let Some(x) = xi {
                                cfg.xi = x;
                            }
                            points.push(cfg);
                        }
                    }
                }
            }
        }
        points
    }

    fn validate(&self) -> Result<Vec<DgpConfig>, McError> {
        if self.replications < 1 {
            return Err(McError::InvalidConfig("replications must be at least 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(McError::InvalidConfig(format!(
                "alpha must lie strictly inside (0, 1), got {}",
                self.alpha
            )));
        }
        if self.bootstrap_b < 1 {
            return Err(McError::InvalidConfig("bootstrap_b must be at least 1".into()));
        }
        if self.eval_levels.iter().any(|l| !(*l > 0.0 && *l < 1.0)) {
            return Err(McError::InvalidConfig("eval_levels must lie in (0, 1)".into()));
        }
        let grid = self.grid();
        for cfg in &grid {
            cfg.validate()?;
        }
        Ok(grid)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Size,
    Power,
    BiasOrder,
}

impl std::fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ExperimentKind::Size => "size",
            ExperimentKind::Power => "power",
            ExperimentKind::BiasOrder => "bias-order",
        })
    }
}

/// Rejection-rate summary for one grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSummary {
    pub xi: f64,
    pub n_amd: usize,
    pub n_bmd: usize,
    pub tenure: usize,
    pub noise_sd: f64,
    pub mu: f64,
    pub sigma: f64,
    /// Replications attempted / that produced a test result.
    pub replications: usize,
    pub completed: usize,
    pub rejections: usize,
    pub rejection_rate: f64,
    /// Binomial sqrt(r(1−r)/completed).
    pub mc_se: f64,
    /// Mean over completed replications of the debiased mean (variance)
    /// minus the closed-form truth, averaged over the two areas. Only
    /// available under the null with no shape alternative.
    pub mean_bias: Option<f64>,
    pub variance_bias: Option<f64>,
    pub degenerate_draws: usize,
    pub skipped: usize,
}

/// CDF bias at one (grid point, evaluation level).
#[derive(Debug, Clone, PartialEq)]
pub struct BiasRow {
    pub xi: f64,
    pub n_firms: usize,
    pub tenure: usize,
    pub noise_sd: f64,
    pub mu: f64,
    pub sigma: f64,
    pub level: f64,
    /// True quantile of the (transformed) latent law at `level`.
    pub eval_point: f64,
    pub plugin_bias: f64,
    pub plugin_se: f64,
    pub debiased_bias: f64,
    pub debiased_se: f64,
    pub replications: usize,
}

#[derive(Debug, Clone)]
pub struct MonteCarloSummary {
    pub kind: ExperimentKind,
    pub alpha: f64,
    pub rows: Vec<GridSummary>,
    pub bias_rows: Vec<BiasRow>,
    /// Measured runtime; informational only, never part of written
    /// artifacts.
    pub wall_clock: Duration,
}

/// bias(T) / bias(2T) for grid points differing only in tenure.
#[derive(Debug, Clone, PartialEq)]
pub struct BiasRatio {
    pub level: f64,
    pub tenure: usize,
    pub double_tenure: usize,
    pub plugin_ratio: f64,
    pub debiased_ratio: f64,
}

/// Halving ratios from a bias-order summary: one row per (T, 2T) pair per
/// evaluation level, matching rows that agree on every other axis.
pub fn bias_ratios(summary: &MonteCarloSummary) -> Vec<BiasRatio> {
    let rows = &summary.bias_rows;
    let mut out = Vec::new();
    for a in rows {
        for b in rows {
            if b.tenure == 2 * a.tenure
                && a.level == b.level
                && a.xi == b.xi
                && a.n_firms == b.n_firms
                && a.noise_sd == b.noise_sd
                && a.mu == b.mu
                && a.sigma == b.sigma
            {
                out.push(BiasRatio {
                    level: a.level,
                    tenure: a.tenure,
                    double_tenure: b.tenure,
                    plugin_ratio: a.plugin_bias / b.plugin_bias,
                    debiased_ratio: a.debiased_bias / b.debiased_bias,
                });
            }
        }
    }
    out
}

/// Simulated firm-level (full, first-half, second-half) TFP estimates for
/// one cell: θ_i plus the matching averages of scaled unit-variance noise.
pub fn simulate_triple_cell<R: Rng + ?Sized>(
    spec: &LatentDistSpec,
    mu: f64,
    sigma: f64,
    xi: f64,
    noise: &NoiseSpec,
    noise_sd: f64,
    n_firms: usize,
    tenure: usize,
    rng: &mut R,
) -> Vec<(f64, f64, f64)> {
    assert!(tenure >= 2, "tenure must allow a half split");
    let h = tenure / 2;
    let mut u = vec![0.0f64; tenure];
    (0..n_firms)
        .map(|_| {
            let theta = sample_latent_one(spec, mu, sigma, xi, rng);
            let mut prev = 0.0;
            for (t, slot) in u.iter_mut().enumerate() {
                prev = noise.next_unit(t, prev, rng);
                *slot = prev;
            }
            (
                theta + noise_sd * mean(&u),
                theta + noise_sd * mean(&u[..h]),
                theta + noise_sd * mean(&u[h..]),
            )
        })
        .collect()
}

struct RepRecord {
    rejected: Option<bool>,
    degenerate_draws: usize,
    /// (mean dev, variance dev) averaged over areas, when truth is known.
    moment_dev: Option<(f64, f64)>,
}

/// Closed-form moments of each area's latent law under the null transform.
fn null_truth(cfg: &DgpConfig) -> Option<(f64, f64, f64, f64)> {
    if cfg.xi != 0.0 || cfg.amd_latent.is_some() {
        return None;
    }
    let m = cfg.latent.mean();
    let v = cfg.latent.variance();
    Some((cfg.mu + cfg.sigma * m, cfg.sigma * cfg.sigma * v, m, v))
}

fn run_rejection_experiment(
    config: &ExperimentConfig,
    kind: ExperimentKind,
) -> Result<MonteCarloSummary, McError> {
    let grid = config.validate()?;
    let r = config.replications;
    let started = Instant::now();

    let pipeline_cleaning = CleaningConfig { min_tenure: 2, ..CleaningConfig::default() };
    let records: Vec<RepRecord> = (0..grid.len() * r)
        .into_par_iter()
        .map(|i| {
            let g = i / r;
            let mut dgp = grid[g].clone();
            dgp.seed = derive_seed(config.master_seed, "mc-dgp", i as u64);
            let (panel, _) = generate_panel(&dgp).expect("grid validated");
            let pipe = TestPipelineConfig {
                cleaning: pipeline_cleaning.clone(),
                bootstrap_b: config.bootstrap_b,
                seed: derive_seed(config.master_seed, "mc-pipe", i as u64),
                validity_threshold: f64::INFINITY,
            };
            let run = match run_test(panel, &pipe, None) {
                Ok(run) => run,
                Err(_) => {
                    return RepRecord { rejected: None, degenerate_draws: 0, moment_dev: None }
                }
            };
            match run.sectors.into_iter().next().map(|s| s.outcome) {
                Some(SectorOutcome::Tested(res)) => {
                    let moment_dev = null_truth(&dgp).map(|(ma, va, mb, vb)| {
                        (
                            0.5 * ((res.amd_mean - ma) + (res.bmd_mean - mb)),
                            0.5 * ((res.amd_variance - va) + (res.bmd_variance - vb)),
                        )
                    });
                    RepRecord {
                        rejected: Some(res.p_value <= config.alpha),
                        degenerate_draws: res.degenerate_draws,
                        moment_dev,
                    }
                }
                _ => RepRecord { rejected: None, degenerate_draws: 0, moment_dev: None },
            }
        })
        .collect();

    let mut rows = Vec::with_capacity(grid.len());
    for (g, cfg) in grid.iter().enumerate() {
        let mut completed = 0usize;
        let mut rejections = 0usize;
        let mut degenerate = 0usize;
        let mut dev_count = 0usize;
        let (mut dev_mean, mut dev_var) = (0.0f64, 0.0f64);
        for rec in &records[g * r..(g + 1) * r] {
            degenerate += rec.degenerate_draws;
            if let Some(rej) = rec.rejected {
                completed += 1;
                rejections += rej as usize;
            }
            if let Some((dm, dv)) = rec.moment_dev {
                dev_count += 1;
                dev_mean += dm;
                dev_var += dv;
            }
        }
        let rate = if completed > 0 { rejections as f64 / completed as f64 } else { 0.0 };
        let mc_se =
            if completed > 0 { (rate * (1.0 - rate) / completed as f64).sqrt() } else { 0.0 };
        rows.push(GridSummary {
            xi: cfg.xi,
            n_amd: cfg.n_amd,
            n_bmd: cfg.n_bmd,
            tenure: cfg.tenure,
            noise_sd: cfg.noise_sd,
            mu: cfg.mu,
            sigma: cfg.sigma,
            replications: r,
            completed,
            rejections,
            rejection_rate: rate,
            mc_se,
            mean_bias: (dev_count > 0).then(|| dev_mean / dev_count as f64),
            variance_bias: (dev_count > 0).then(|| dev_var / dev_count as f64),
            degenerate_draws: degenerate,
            skipped: r - completed,
        });
    }

    Ok(MonteCarloSummary {
        kind,
        alpha: config.alpha,
        rows,
        bias_rows: Vec::new(),
        wall_clock: started.elapsed(),
    })
}

/// Rejection rates under the null. Every grid point must keep ξ = 0 and use
/// the same base law in both areas.
pub fn run_size_experiment(config: &ExperimentConfig) -> Result<MonteCarloSummary, McError> {
    let grid = config.validate()?;
    if config.base.amd_latent.is_some() || grid.iter().any(|cfg| cfg.xi != 0.0) {
        return Err(McError::InvalidConfig(
            "size experiment requires ξ = 0 and an identical base law in both areas".into(),
        ));
    }
    run_rejection_experiment(config, ExperimentKind::Size)
}

/// Rejection rates under truncation (ξ > 0 somewhere on the grid) or a
/// shape alternative (`amd_latent` set).
pub fn run_power_experiment(config: &ExperimentConfig) -> Result<MonteCarloSummary, McError> {
    let grid = config.validate()?;
    if config.base.amd_latent.is_none() && grid.iter().all(|cfg| cfg.xi == 0.0) {
        return Err(McError::InvalidConfig(
            "power experiment needs ξ > 0 on the grid or a shape alternative".into(),
        ));
    }
    run_rejection_experiment(config, ExperimentKind::Power)
}

/// CDF bias of the plug-in and debiased estimators at the configured
/// evaluation levels. The tenure grid must contain at least one (T, 2T)
/// pair so halving ratios can be formed.
pub fn bias_order_check(config: &ExperimentConfig) -> Result<MonteCarloSummary, McError> {
    let grid = config.validate()?;
    if config.eval_levels.is_empty() {
        return Err(McError::InvalidConfig("bias check needs at least one eval level".into()));
    }
    let tenures: Vec<usize> = grid.iter().map(|c| c.tenure).collect();
    if !tenures.iter().any(|t| tenures.contains(&(2 * t))) {
        return Err(McError::InvalidConfig(
            "bias check needs a (T, 2T) pair on the tenure grid".into(),
        ));
    }
    let r = config.replications;
    let levels = &config.eval_levels;
    let started = Instant::now();

    // per-replication deviations (plugin, debiased) per level
    let devs: Vec<Vec<(f64, f64)>> = (0..grid.len() * r)
        .into_par_iter()
        .map(|i| {
            let g = i / r;
            let cfg = &grid[g];
            let spec = cfg.amd_latent.as_ref().unwrap_or(&cfg.latent);
            let mut rng = substream(config.master_seed, "mc-bias", i as u64);
            let triples = simulate_triple_cell(
                spec,
                cfg.mu,
                cfg.sigma,
                cfg.xi,
                &cfg.noise,
                cfg.noise_sd,
                cfg.n_amd,
                cfg.tenure,
                &mut rng,
            );
            let n = triples.len() as f64;
            levels
                .iter()
                .map(|&level| {
                    let x = cdgpr_quantile(spec, level, cfg.mu, cfg.sigma, cfg.xi)
                        .expect("levels validated");
                    let count = |pick: fn(&(f64, f64, f64)) -> f64| {
                        triples.iter().filter(|t| pick(t) <= x).count() as f64 / n
                    };
                    let plugin = count(|t| t.0);
                    let debiased = hpj_combine(plugin, count(|t| t.1), count(|t| t.2));
                    (plugin - level, debiased - level)
                })
                .collect()
        })
        .collect();

    let mut bias_rows = Vec::with_capacity(grid.len() * levels.len());
    for (g, cfg) in grid.iter().enumerate() {
        for (li, &level) in levels.iter().enumerate() {
            let spec = cfg.amd_latent.as_ref().unwrap_or(&cfg.latent);
            let eval_point =
                cdgpr_quantile(spec, level, cfg.mu, cfg.sigma, cfg.xi).expect("validated");
            let (mut sp, mut sd) = (0.0f64, 0.0f64);
            for rep in &devs[g * r..(g + 1) * r] {
                sp += rep[li].0;
                sd += rep[li].1;
            }
            let (mp, md) = (sp / r as f64, sd / r as f64);
            let (mut vp, mut vd) = (0.0f64, 0.0f64);
            for rep in &devs[g * r..(g + 1) * r] {
                vp += (rep[li].0 - mp) * (rep[li].0 - mp);
                vd += (rep[li].1 - md) * (rep[li].1 - md);
            }
            let denom = (r.max(2) - 1) as f64 * r as f64;
            bias_rows.push(BiasRow {
                xi: cfg.xi,
                n_firms: cfg.n_amd,
                tenure: cfg.tenure,
                noise_sd: cfg.noise_sd,
                mu: cfg.mu,
                sigma: cfg.sigma,
                level,
                eval_point,
                plugin_bias: mp,
                plugin_se: (vp / denom).sqrt(),
                debiased_bias: md,
                debiased_se: (vd / denom).sqrt(),
                replications: r,
            });
        }
    }

    Ok(MonteCarloSummary {
        kind: ExperimentKind::BiasOrder,
        alpha: config.alpha,
        rows: Vec::new(),
        bias_rows,
        wall_clock: started.elapsed(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_base() -> DgpConfig {
        DgpConfig { n_amd: 40, n_bmd: 40, tenure: 8, ..DgpConfig::default() }
    }

    #[test]
    fn size_smoke_run_is_reproducible() {
        let config = ExperimentConfig {
            base: tiny_base(),
            replications: 10,
            bootstrap_b: 19,
            master_seed: 42,
            ..Default::default()
        };
        let summary = run_size_experiment(&config).unwrap();
        assert_eq!(summary.kind, ExperimentKind::Size);
        assert_eq!(summary.rows.len(), 1);
        let row = &summary.rows[0];
        assert_eq!(row.completed, 10);
        assert_eq!(row.skipped, 0);
        assert!((0.0..=1.0).contains(&row.rejection_rate));
        let expected_se = (row.rejection_rate * (1.0 - row.rejection_rate) / 10.0).sqrt();
        assert_eq!(row.mc_se, expected_se);
        assert!(row.mean_bias.is_some());
        assert!(row.variance_bias.is_some());

        let again = run_size_experiment(&config).unwrap();
        assert_eq!(summary.rows, again.rows);
    }

    #[test]
    fn size_preconditions_are_enforced() {
        let null_violation = ExperimentConfig {
            base: tiny_base(),
            xi: vec![0.0, 0.2],
            replications: 1,
            ..Default::default()
        };
        assert!(matches!(run_size_experiment(&null_violation), Err(McError::InvalidConfig(_))));

        let bad_alpha =
            ExperimentConfig { base: tiny_base(), alpha: 1.0, ..Default::default() };
        assert!(matches!(run_size_experiment(&bad_alpha), Err(McError::InvalidConfig(_))));

        let no_reps =
            ExperimentConfig { base: tiny_base(), replications: 0, ..Default::default() };
        assert!(matches!(run_size_experiment(&no_reps), Err(McError::InvalidConfig(_))));
    }

    #[test]
    fn single_replication_size_is_degenerate_but_valid() {
        let config = ExperimentConfig {
            base: tiny_base(),
            replications: 1,
            bootstrap_b: 19,
            master_seed: 3,
            ..Default::default()
        };
        let row = run_size_experiment(&config).unwrap().rows.remove(0);
        assert!(row.rejection_rate == 0.0 || row.rejection_rate == 1.0);
        assert_eq!(row.mc_se, 0.0);
    }

    #[test]
    fn power_precondition_requires_an_alternative() {
        let null_only = ExperimentConfig { base: tiny_base(), ..Default::default() };
        assert!(matches!(run_power_experiment(&null_only), Err(McError::InvalidConfig(_))));

        let config = ExperimentConfig {
            base: tiny_base(),
            xi: vec![0.4],
            replications: 5,
            bootstrap_b: 19,
            master_seed: 9,
            ..Default::default()
        };
        let summary = run_power_experiment(&config).unwrap();
        assert_eq!(summary.kind, ExperimentKind::Power);
        assert_eq!(summary.rows.len(), 1);
        assert_eq!(summary.rows[0].xi, 0.4);
        // truncated alternative has no closed-form truth
        assert!(summary.rows[0].mean_bias.is_none());
    }

    #[test]
    fn grid_nests_with_xi_fastest() {
        let config = ExperimentConfig {
            base: tiny_base(),
            xi: vec![0.0, 0.2],
            tenure: vec![4, 8],
            ..Default::default()
        };
        let grid = config.grid();
        let seen: Vec<(usize, f64)> = grid.iter().map(|c| (c.tenure, c.xi)).collect();
        assert_eq!(seen, [(4, 0.0), (4, 0.2), (8, 0.0), (8, 0.2)]);
    }

    #[test]
    fn noiseless_bias_check_reduces_to_sampling_noise() {
        let config = ExperimentConfig {
            base: DgpConfig { n_amd: 50, n_bmd: 50, tenure: 4, noise_sd: 0.0, ..DgpConfig::default() },
            tenure: vec![4, 8],
            eval_levels: vec![0.5],
            replications: 300,
            master_seed: 17,
            ..Default::default()
        };
        let summary = bias_order_check(&config).unwrap();
        assert_eq!(summary.bias_rows.len(), 2);
        for row in &summary.bias_rows {
            // without noise the three estimates coincide
            assert_eq!(row.plugin_bias, row.debiased_bias);
            assert!(row.plugin_bias.abs() <= 4.0 * row.plugin_se.max(1e-9));
        }
        let ratios = bias_ratios(&summary);
        assert_eq!(ratios.len(), 1);
        assert_eq!(ratios[0].tenure, 4);
        assert_eq!(ratios[0].double_tenure, 8);

        let again = bias_order_check(&config).unwrap();
        assert_eq!(summary.bias_rows, again.bias_rows);
    }

    #[test]
    fn bias_check_requires_a_halving_pair() {
        let config = ExperimentConfig {
            base: tiny_base(),
            tenure: vec![4, 6],
            replications: 2,
            ..Default::default()
        };
        assert!(matches!(bias_order_check(&config), Err(McError::InvalidConfig(_))));
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let config = ExperimentConfig {
            base: tiny_base(),
            replications: 6,
            bootstrap_b: 19,
            master_seed: 5,
            ..Default::default()
        };
        let wide = run_size_experiment(&config).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let narrow = pool.install(|| run_size_experiment(&config).unwrap());
        assert_eq!(wide.rows, narrow.rows);
    }
}
