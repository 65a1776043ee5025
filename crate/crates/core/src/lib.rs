//! Testing equality of two latent distributions from noisy panel estimates.
//!
//! The library implements a complete inference pipeline for the question
//! "do two groups of firms draw their (log) total factor productivity from
//! the same distribution, up to mean and variance?" when TFP is never
//! observed directly and must be estimated as an average regression residual
//! over a finite panel:
//!
//! 1. [`panel`] — firm-year panel ingestion, cleaning, tenure filtering, and
//!    contiguous half-panel splits.
//! 2. [`prodfn`] — log-linear Cobb-Douglas production-function estimation
//!    with year intercepts, and per-firm TFP estimates on the full panel and
//!    on each half.
//! 3. [`hpj`] — half-panel jackknife debiasing of means, variances, and
//!    empirical CDFs, removing the O(1/T) bias that averaging noisy
//!    residuals over T periods leaves in nonlinear functionals.
//! 4. [`kstest`] — a two-sample Kolmogorov-Smirnov-type statistic on the
//!    standardized debiased CDFs, with firm-level bootstrap p-values.
//! 5. [`dist`] and [`dgp`] — a synthetic panel generator whose latent TFP
//!    law is a shift-dilation-truncation transform of a configurable base
//!    distribution, providing ground truth for verification.
//! 6. [`mc`] — Monte Carlo experiments (size, power, bias order) that check
//!    the method's statistical properties end to end.
//!
//! Everything stochastic draws from counter-derived substreams of a single
//! master seed ([`rng`]), so results are reproducible bit for bit regardless
//! of thread count or scheduling.

pub mod dgp;
pub mod dist;
pub mod hpj;
pub mod kstest;
pub mod mc;
pub mod panel;
pub mod pipeline;
pub mod prodfn;
pub mod rng;
pub mod stats;
