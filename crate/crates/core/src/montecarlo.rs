//! Repeated sampling from a synthetic population.
//!
//! A replicate is one random sample of `n` sentences; its error count is the
//! quantity a reviewer would report. Over `R` replicates the spread of the
//! observed densities gives an empirical confidence interval that can be set
//! against the closed-form Wald half-width.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::population::{draw_sample_with, generate_population, Population, PopulationSpec, SamplingMode};
use crate::stats::{wald_delta, wald_interval, ConfidenceLevel, Proportion};

pub const DEFAULT_REPLICATES: usize = 2000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MCConfig {
    pub replicates: usize,
    pub sample_sizes: Vec<usize>,
    pub level: ConfidenceLevel,
    pub seed: u64,
    pub mode: SamplingMode,
    /// Run replicates on the rayon pool. Results do not depend on this flag.
    #[serde(skip)]
    pub parallel: bool,
}

impl MCConfig {
    pub fn new(sample_sizes: Vec<usize>, seed: u64) -> Result<Self> {
        let config = MCConfig {
            replicates: DEFAULT_REPLICATES,
            sample_sizes,
            level: ConfidenceLevel::default(),
            seed,
            mode: SamplingMode::default(),
            parallel: true,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn with_replicates(mut self, replicates: usize) -> Result<Self> {
        self.replicates = replicates;
        self.validate()?;
        Ok(self)
    }

    pub fn with_level(mut self, level: ConfidenceLevel) -> Self {
        self.level = level;
        self
    }

    pub fn with_mode(mut self, mode: SamplingMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_parallel(mut self, parallel: bool) -> Self {
        self.parallel = parallel;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates < 2 {
            return Err(Error::domain(format!(
                "at least 2 replicates are needed, got {}",
                self.replicates
            )));
        }
        if self.sample_sizes.is_empty() {
            return Err(Error::domain("at least one sample size is needed"));
        }
        if self.sample_sizes[0] == 0 {
            return Err(Error::domain("sample sizes must be positive"));
        }
        if self.sample_sizes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::domain("sample sizes must be strictly increasing"));
        }
        Ok(())
    }

    /// Maps `f` over replicate indices, in index order.
    pub(crate) fn map_replicates<T, F>(&self, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(u64) -> Result<T> + Sync + Send,
    {
        let count = self.replicates as u64;
        if self.parallel {
            (0..count).into_par_iter().map(f).collect()
        } else {
            (0..count).map(f).collect()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicateSeries {
    pub sample_size: usize,
    pub error_counts: Vec<u64>,
    pub densities: Vec<f64>,
}

/// Draws `config.replicates` samples of `sample_size`; replicate `r` uses stream key `r`.
pub fn run_replicates(population: &Population, sample_size: usize, config: &MCConfig) -> Result<ReplicateSeries> {
    config.validate()?;
    let error_counts = config.map_replicates(|r| {
        draw_sample_with(population, sample_size, r, config.mode).map(|s| s.error_count)
    })?;
    let densities = error_counts
        .iter()
        .map(|&c| c as f64 / sample_size as f64)
        .collect();
    Ok(ReplicateSeries {
        sample_size,
        error_counts,
        densities,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct HistogramBin {
    pub count_value: u64,
    pub frequency: usize,
}

/// One bin per distinct error count, in ascending order.
pub fn histogram(series: &ReplicateSeries) -> Vec<HistogramBin> {
    let mut bins = BTreeMap::new();
    for &count in &series.error_counts {
        *bins.entry(count).or_insert(0) += 1;
    }
    bins.into_iter()
        .map(|(count_value, frequency)| HistogramBin {
            count_value,
            frequency,
        })
        .collect()
}

/// Maximum-likelihood normal parameters (divisor `R`, as `scipy.stats.norm.fit`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormalFit {
    pub mu: f64,
    pub sigma: f64,
}

fn require_two(values: &[f64]) -> Result<()> {
    if values.len() < 2 {
        return Err(Error::domain(format!(
            "at least 2 values are needed, got {}",
            values.len()
        )));
    }
    Ok(())
}

pub fn fit_normal(values: &[f64]) -> Result<NormalFit> {
    require_two(values)?;
    let n = values.len() as f64;
    let mu = values.iter().sum::<f64>() / n;
    let variance = values.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / n;
    Ok(NormalFit {
        mu,
        sigma: variance.sqrt(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EmpiricalInterval {
    pub lower: f64,
    pub upper: f64,
    pub delta: f64,
}

/// Quantile of sorted data by linear interpolation between order statistics
/// at position `(len - 1) q` (the numpy default).
fn interpolated_quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let below = h.floor() as usize;
    let above = h.ceil() as usize;
    sorted[below] + (h - below as f64) * (sorted[above] - sorted[below])
}

/// Central percentile interval holding `level` of the values.
pub fn empirical_ci(values: &[f64], level: ConfidenceLevel) -> Result<EmpiricalInterval> {
    require_two(values)?;
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let tail = (1.0 - level.level()) / 2.0;
    let lower = interpolated_quantile(&sorted, tail);
    let upper = interpolated_quantile(&sorted, 1.0 - tail);
    Ok(EmpiricalInterval {
        lower,
        upper,
        delta: (upper - lower) / 2.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub sample_size: usize,
    /// Half-width of the percentile interval.
    pub mc_delta: f64,
    /// Closed-form reference half-width.
    pub analytic_delta: f64,
    pub lower: f64,
    pub upper: f64,
    /// `z` times the fitted sigma of the replicate values.
    pub normal_fit_delta: f64,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    pub fn row(&self, sample_size: usize) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.sample_size == sample_size)
    }
}

pub(crate) fn summarize(
    sample_size: usize,
    values: &[f64],
    analytic_delta: f64,
    level: ConfidenceLevel,
) -> Result<SweepRow> {
    let ci = empirical_ci(values, level)?;
    let fit = fit_normal(values)?;
    Ok(SweepRow {
        sample_size,
        mc_delta: ci.delta,
        analytic_delta,
        lower: ci.lower,
        upper: ci.upper,
        normal_fit_delta: level.z() * fit.sigma,
        mean: fit.mu,
    })
}

/// Closed-form half-width for a sample of `n` from `population`.
///
/// With one category this is the Wald half-width at the realized density.
/// With several, `p (1 - p)` is replaced by the population variance of the
/// per-sentence error totals, which reduces to the same value for 0/1 flags.
pub fn analytic_delta(population: &Population, n: usize, level: ConfidenceLevel) -> Result<f64> {
    let density = population.realized_density();
    if population.num_categories() == 1 {
        return wald_delta(Proportion::new(density)?, n as f64, level);
    }
    let size = population.num_sentences();
    let variance = (0..size)
        .map(|i| {
            let d = population.errors_in(i) as f64 - density;
            d * d
        })
        .sum::<f64>()
        / size as f64;
    Ok(level.z() * (variance / n as f64).sqrt())
}

/// Runs every configured sample size against an existing population.
pub fn sweep_population(population: &Population, config: &MCConfig) -> Result<SweepResult> {
    let rows = sweep_with_series(population, config)?
        .into_iter()
        .map(|(_, row)| row)
        .collect();
    Ok(SweepResult { rows })
}

/// Like [`sweep_population`], also returning the replicate series behind each row.
pub fn sweep_with_series(population: &Population, config: &MCConfig) -> Result<Vec<(ReplicateSeries, SweepRow)>> {
    config.validate()?;
    let largest = *config.sample_sizes.last().expect("validated nonempty");
    if largest > population.num_sentences() {
        return Err(Error::domain(format!(
            "sample size {largest} exceeds population size {}",
            population.num_sentences()
        )));
    }
    config
        .sample_sizes
        .iter()
        .map(|&n| {
            let series = run_replicates(population, n, config)?;
            let row = summarize(n, &series.densities, analytic_delta(population, n, config.level)?, config.level)?;
            Ok((series, row))
        })
        .collect()
}

/// Generates the population described by `spec` and sweeps it.
pub fn ci_sweep(spec: &PopulationSpec, config: &MCConfig) -> Result<SweepResult> {
    let population = generate_population(spec)?;
    sweep_population(&population, config)
}

/// Share of replicates whose own Wald interval covers `truth`.
pub fn wald_coverage(series: &ReplicateSeries, truth: f64, level: ConfidenceLevel) -> Result<f64> {
    let mut covered = 0usize;
    for &density in &series.densities {
        let ci = wald_interval(Proportion::new(density)?, series.sample_size as f64, level)?;
        if ci.contains(truth) {
            covered += 1;
        }
    }
    Ok(covered as f64 / series.densities.len() as f64)
}
