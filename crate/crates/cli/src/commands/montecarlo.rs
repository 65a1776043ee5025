//! `panelks montecarlo`: run the experiment described by the [experiment]
//! config section and write its summary tables. Wall-clock time goes to
//! stderr only; the artifacts depend on nothing but the configuration, so
//! repeated runs are byte-identical.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use panelks_core::mc::{
    bias_order_check, bias_ratios, run_power_experiment, run_size_experiment, ExperimentKind,
    GridSummary, MonteCarloSummary,
};

use crate::commands::atomic_write;
use crate::config;

#[derive(Debug, clap::Args)]
pub struct MontecarloArgs {
    /// TOML configuration; [experiment] picks the kind and the grid.
    #[arg(long)]
    pub config: PathBuf,
    /// Directory for summary.csv / bias.csv and report.txt.
    #[arg(long)]
    pub output: PathBuf,
    /// Master seed; falls back to [io] seed, then to a fresh one (echoed).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Bootstrap draws per replication (overrides the experiment spec).
    #[arg(long)]
    pub bootstrap: Option<usize>,
}

pub fn run(args: &MontecarloArgs) -> Result<()> {
    let mut cfg = config::load(Some(&args.config))?;
    // Experiments are reproducible by default: without an explicit seed the
    // spec's own master seed stands instead of a random draw.
    let seed = match args.seed.or(cfg.io.seed) {
        Some(s) => config::checked_seed(s)?,
        None => cfg.experiment.spec.master_seed,
    };
    cfg.io.seed = Some(seed);
    cfg.io.output = Some(args.output.clone());
    cfg.experiment.spec.master_seed = seed;
    if let Some(b) = args.bootstrap {
        cfg.experiment.spec.bootstrap_b = b;
    }

    let kind = cfg.experiment.kind.trim().to_ascii_lowercase();
    let summary = match kind.as_str() {
        "size" => run_size_experiment(&cfg.experiment.spec)?,
        "power" => run_power_experiment(&cfg.experiment.spec)?,
        "bias-order" | "bias_order" => bias_order_check(&cfg.experiment.spec)?,
        other => bail!("unknown experiment kind {other:?} (expected size, power, or bias-order)"),
    };

    fs::create_dir_all(&args.output)
        .with_context(|| format!("cannot create {}", args.output.display()))?;
    match summary.kind {
        ExperimentKind::Size | ExperimentKind::Power => {
            write_summary_csv(&args.output.join("summary.csv"), &summary)?
        }
        ExperimentKind::BiasOrder => write_bias_csv(&args.output.join("bias.csv"), &summary)?,
    }
    atomic_write(&args.output.join("report.txt"), report_text(&summary).as_bytes())?;
    config::write_effective(&args.output, &cfg)?;
    eprintln!(
        "seed {seed}: {} experiment finished in {:.1?}; artifacts in {}",
        summary.kind,
        summary.wall_clock,
        args.output.display()
    );
    Ok(())
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn write_summary_csv(path: &Path, summary: &MonteCarloSummary) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "xi",
        "n_amd",
        "n_bmd",
        "tenure",
        "noise_sd",
        "mu",
        "sigma",
        "replications",
        "completed",
        "rejections",
        "rejection_rate",
        "mc_se",
        "mean_bias",
        "variance_bias",
        "degenerate_draws",
        "skipped",
    ])?;
    for r in &summary.rows {
        w.write_record([
            r.xi.to_string(),
            r.n_amd.to_string(),
            r.n_bmd.to_string(),
            r.tenure.to_string(),
            r.noise_sd.to_string(),
            r.mu.to_string(),
            r.sigma.to_string(),
            r.replications.to_string(),
            r.completed.to_string(),
            r.rejections.to_string(),
            r.rejection_rate.to_string(),
            r.mc_se.to_string(),
            opt(r.mean_bias),
            opt(r.variance_bias),
            r.degenerate_draws.to_string(),
            r.skipped.to_string(),
        ])?;
    }
    atomic_write(path, &w.into_inner()?)
}

fn write_bias_csv(path: &Path, summary: &MonteCarloSummary) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "xi",
        "n_firms",
        "tenure",
        "noise_sd",
        "mu",
        "sigma",
        "level",
        "eval_point",
        "plugin_bias",
        "plugin_se",
        "debiased_bias",
        "debiased_se",
        "replications",
    ])?;
    for r in &summary.bias_rows {
        w.write_record([
            r.xi.to_string(),
            r.n_firms.to_string(),
            r.tenure.to_string(),
            r.noise_sd.to_string(),
            r.mu.to_string(),
            r.sigma.to_string(),
            r.level.to_string(),
            r.eval_point.to_string(),
            r.plugin_bias.to_string(),
            r.plugin_se.to_string(),
            r.debiased_bias.to_string(),
            r.debiased_se.to_string(),
            r.replications.to_string(),
        ])?;
    }
    atomic_write(path, &w.into_inner()?)
}

fn same_axes(a: &GridSummary, b: &GridSummary) -> bool {
    a.n_amd == b.n_amd
        && a.n_bmd == b.n_bmd
        && a.tenure == b.tenure
        && a.noise_sd == b.noise_sd
        && a.mu == b.mu
        && a.sigma == b.sigma
}

fn report_text(summary: &MonteCarloSummary) -> String {
    let mut text = format!("{} experiment, alpha = {}\n", summary.kind, summary.alpha);
    for r in &summary.rows {
        text.push_str(&format!(
            "xi={} n={}/{} T={} noise_sd={}: reject {}/{} = {:.3} (se {:.3}, skipped {}, degenerate draws {})\n",
            r.xi,
            r.n_amd,
            r.n_bmd,
            r.tenure,
            r.noise_sd,
            r.rejections,
            r.completed,
            r.rejection_rate,
            r.mc_se,
            r.skipped,
            r.degenerate_draws,
        ));
    }
    if summary.kind == ExperimentKind::Power {
        // grid order puts xi fastest, so each run of equal non-xi axes is a
        // power curve
        let rows = &summary.rows;
        let mut start = 0;
        while start < rows.len() {
            let mut end = start + 1;
            while end < rows.len() && same_axes(&rows[end], &rows[start]) {
                end += 1;
            }
            if end - start > 1 {
                let group = &rows[start..end];
                let monotone =
                    group.windows(2).all(|w| w[1].rejection_rate >= w[0].rejection_rate);
                text.push_str(&format!(
                    "n={}/{} T={} noise_sd={}: rejection rate nondecreasing in xi: {}\n",
                    group[0].n_amd,
                    group[0].n_bmd,
                    group[0].tenure,
                    group[0].noise_sd,
                    if monotone { "yes" } else { "no" },
                ));
            }
            start = end;
        }
    }
    for r in &summary.bias_rows {
        text.push_str(&format!(
            "level {:.2} T={}: plug-in bias {:.5} (se {:.5}), debiased bias {:.5} (se {:.5})\n",
            r.level, r.tenure, r.plugin_bias, r.plugin_se, r.debiased_bias, r.debiased_se,
        ));
    }
    for ratio in bias_ratios(summary) {
        text.push_str(&format!(
            "level {:.2}: bias(T={}) / bias(T={}) = {:.3} (plug-in), {:.3} (debiased)\n",
            ratio.level,
            ratio.tenure,
            ratio.double_tenure,
            ratio.plugin_ratio,
            ratio.debiased_ratio,
        ));
    }
    text
}
