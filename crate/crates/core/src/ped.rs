//! Post-editing distance.
//!
//! PED counts the insertions and deletions that turn a machine-translated
//! candidate into its post-edited form, divided by the candidate's token
//! length. A replaced word costs two operations, so PED can exceed 1. PEDn maps
//! it into `(0, 1]` with `1 - tanh(c * PED)`.

use std::io::BufRead;
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::montecarlo::{summarize, MCConfig, SweepResult};
use crate::rng::{self, DOMAIN_PED};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Granularity {
    #[default]
    Word,
    /// Every non-whitespace character is a token.
    Char,
}

/// Splits on Unicode whitespace.
pub fn tokenize(text: &str) -> Vec<&str> {
    text.split_whitespace().collect()
}

pub fn tokenize_with(text: &str, granularity: Granularity) -> Vec<&str> {
    match granularity {
        Granularity::Word => tokenize(text),
        Granularity::Char => text
            .char_indices()
            .filter(|(_, ch)| !ch.is_whitespace())
            .map(|(i, ch)| &text[i..i + ch.len_utf8()])
            .collect(),
    }
}

/// Minimal number of insertions plus deletions turning `a` into `b`.
///
/// Equals `|a| + |b| - 2 LCS(a, b)`.
pub fn insdel_distance<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let (long, short) = if a.len() >= b.len() { (a, b) } else { (b, a) };
    let mut prev = vec![0usize; short.len() + 1];
    let mut curr = vec![0usize; short.len() + 1];
    for x in long {
        for (j, y) in short.iter().enumerate() {
            curr[j + 1] = if x == y {
                prev[j] + 1
            } else {
                prev[j + 1].max(curr[j])
            };
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    a.len() + b.len() - 2 * prev[short.len()]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct NormalizationConstant(f64);

impl NormalizationConstant {
    pub fn new(c: f64) -> Result<Self> {
        if c > 0.0 && c.is_finite() {
            Ok(NormalizationConstant(c))
        } else {
            Err(Error::domain(format!("normalization constant must be positive, got {c}")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl Default for NormalizationConstant {
    fn default() -> Self {
        NormalizationConstant(1.0)
    }
}

impl TryFrom<f64> for NormalizationConstant {
    type Error = Error;

    fn try_from(c: f64) -> Result<Self> {
        NormalizationConstant::new(c)
    }
}

impl From<NormalizationConstant> for f64 {
    fn from(c: NormalizationConstant) -> f64 {
        c.0
    }
}

/// `1 - tanh(c * ped)`, evaluated as `2 / (exp(2 c ped) + 1)` so that large
/// PED values keep full relative precision.
pub fn pedn(ped: f64, c: NormalizationConstant) -> Result<f64> {
    if ped.is_nan() || ped < 0.0 {
        return Err(Error::domain(format!("PED must be nonnegative, got {ped}")));
    }
    Ok(normalize(ped, c))
}

fn normalize(ped: f64, c: NormalizationConstant) -> f64 {
    2.0 / ((2.0 * c.value() * ped).exp() + 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PedRecord {
    pub candidate_len: usize,
    pub edit_ops: usize,
    pub ped: f64,
    pub pedn: f64,
}

pub fn ped_score(candidate: &str, postedited: &str, c: NormalizationConstant) -> Result<PedRecord> {
    ped_score_with(candidate, postedited, c, Granularity::Word)
}

pub fn ped_score_with(
    candidate: &str,
    postedited: &str,
    c: NormalizationConstant,
    granularity: Granularity,
) -> Result<PedRecord> {
    let before = tokenize_with(candidate, granularity);
    if before.is_empty() {
        return Err(Error::domain("candidate translation has no tokens"));
    }
    let after = tokenize_with(postedited, granularity);
    let edit_ops = insdel_distance(&before, &after);
    let ped = edit_ops as f64 / before.len() as f64;
    Ok(PedRecord {
        candidate_len: before.len(),
        edit_ops,
        ped,
        pedn: pedn(ped, c)?,
    })
}

/// Where simulated per-segment PED values come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PedDistributionModel {
    /// Resample observed values with replacement.
    Empirical { values: Vec<f64> },
    /// Zero with probability `zero_mass`, otherwise exponential with rate `tail_rate`.
    ZeroInflatedExponential { zero_mass: f64, tail_rate: f64 },
}

impl Default for PedDistributionModel {
    /// Mean PED 0.65 / 3 ≈ 0.22.
    fn default() -> Self {
        PedDistributionModel::ZeroInflatedExponential {
            zero_mass: 0.35,
            tail_rate: 3.0,
        }
    }
}

impl PedDistributionModel {
    pub fn validate(&self) -> Result<()> {
        match self {
            PedDistributionModel::Empirical { values } => {
                if values.is_empty() {
                    return Err(Error::domain("empirical PED model needs at least one value"));
                }
                if let Some(bad) = values.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
                    return Err(Error::domain(format!("PED values must be nonnegative, got {bad}")));
                }
            }
            PedDistributionModel::ZeroInflatedExponential { zero_mass, tail_rate } => {
                if !(0.0..=1.0).contains(zero_mass) {
                    return Err(Error::domain(format!("zero mass must lie in [0, 1], got {zero_mass}")));
                }
                if !(*tail_rate > 0.0 && tail_rate.is_finite()) {
                    return Err(Error::domain(format!("tail rate must be positive, got {tail_rate}")));
                }
            }
        }
        Ok(())
    }
}

enum PedSampler<'a> {
    Empirical(&'a [f64]),
    ZeroInflated { zero_mass: f64, tail: Exp<f64> },
}

impl<'a> PedSampler<'a> {
    fn new(model: &'a PedDistributionModel) -> Result<Self> {
        model.validate()?;
        Ok(match model {
            PedDistributionModel::Empirical { values } => PedSampler::Empirical(values),
            PedDistributionModel::ZeroInflatedExponential { zero_mass, tail_rate } => PedSampler::ZeroInflated {
                zero_mass: *zero_mass,
                tail: Exp::new(*tail_rate).map_err(|e| Error::domain(e.to_string()))?,
            },
        })
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            PedSampler::Empirical(values) => values[rng.random_range(0..values.len())],
            PedSampler::ZeroInflated { zero_mass, tail } => {
                if rng.random::<f64>() < *zero_mass {
                    0.0
                } else {
                    tail.sample(rng)
                }
            }
        }
    }
}

/// Draws `n` PED values; the stream is selected by `stream_key` alone.
pub fn sample_ped(model: &PedDistributionModel, n: usize, stream_key: u64) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::domain("PED sample size must be positive"));
    }
    let sampler = PedSampler::new(model)?;
    let mut stream = rng::stream(0, DOMAIN_PED, 0, stream_key);
    Ok((0..n).map(|_| sampler.draw(&mut stream)).collect())
}

/// Confidence half-width of mean PEDn against sample size.
///
/// Replicate `r` at size `n` draws from the stream keyed by `(config.seed, n, r)`.
/// `analytic_delta` holds `z` times the spread of the replicate means.
pub fn mean_pedn_sweep(
    model: &PedDistributionModel,
    c: NormalizationConstant,
    config: &MCConfig,
) -> Result<SweepResult> {
    config.validate()?;
    let sampler = PedSampler::new(model)?;
    let rows = config
        .sample_sizes
        .iter()
        .map(|&n| {
            let means = config.map_replicates(|r| {
                let mut stream = rng::stream(config.seed, DOMAIN_PED, n as u64, r);
                let total: f64 = (0..n)
                    .map(|_| normalize(sampler.draw(&mut stream), c))
                    .sum();
                Ok(total / n as f64)
            })?;
            let mut row = summarize(n, &means, 0.0, config.level)?;
            row.analytic_delta = row.normal_fit_delta;
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult { rows })
}

/// Smallest swept sample size whose Monte Carlo half-width is at most `target`.
pub fn min_sample_size(sweep: &SweepResult, target: f64) -> Option<usize> {
    sweep
        .rows
        .iter()
        .find(|row| row.mc_delta <= target)
        .map(|row| row.sample_size)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum InputFormat {
    /// Tab-separated pairs when the first data line holds a tab, otherwise values.
    #[default]
    Auto,
    /// `candidate<TAB>postedited` per line.
    Pairs,
    /// One precomputed PED value per line.
    Values,
}

/// One scored line of a PED input file.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Segment {
    /// 1-based line number in the input.
    pub line: usize,
    /// `None` for precomputed values.
    pub candidate_len: Option<usize>,
    pub edit_ops: Option<usize>,
    pub ped: f64,
    pub pedn: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PedInput {
    pub segments: Vec<Segment>,
    /// Pairs whose candidate had no tokens.
    pub skipped_empty: Vec<usize>,
}

impl PedInput {
    pub fn ped_values(&self) -> Vec<f64> {
        self.segments.iter().map(|s| s.ped).collect()
    }
}

pub fn read_ped_input<R: BufRead>(
    reader: R,
    path: &Path,
    format: InputFormat,
    c: NormalizationConstant,
    granularity: Granularity,
) -> Result<PedInput> {
    let parse_error = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut format = format;
    let mut input = PedInput {
        segments: Vec::new(),
        skipped_empty: Vec::new(),
    };
    for (index, text) in reader.lines().enumerate() {
        let line = index + 1;
        let text = text.map_err(|e| Error::io(path, e))?;
        let text = text.strip_suffix('\r').unwrap_or(&text);
        if text.trim().is_empty() {
            continue;
        }
        if format == InputFormat::Auto {
            format = if text.contains('\t') {
                InputFormat::Pairs
            } else {
                InputFormat::Values
            };
        }
        if format == InputFormat::Pairs {
            let mut fields = text.split('\t');
            let (Some(candidate), Some(postedited), None) = (fields.next(), fields.next(), fields.next()) else {
                return Err(parse_error(line, "expected exactly two tab-separated columns".into()));
            };
            match ped_score_with(candidate, postedited, c, granularity) {
                Ok(record) => input.segments.push(Segment {
                    line,
                    candidate_len: Some(record.candidate_len),
                    edit_ops: Some(record.edit_ops),
                    ped: record.ped,
                    pedn: record.pedn,
                }),
                Err(_) => input.skipped_empty.push(line),
            }
        } else {
            let ped: f64 = text
                .trim()
                .parse()
                .map_err(|_| parse_error(line, format!("not a number: {:?}", text.trim())))?;
            if !(ped >= 0.0 && ped.is_finite()) {
                return Err(parse_error(line, format!("PED must be nonnegative, got {ped}")));
            }
            input.segments.push(Segment {
                line,
                candidate_len: None,
                edit_ops: None,
                ped,
                pedn: pedn(ped, c)?,
            });
        }
    }
    Ok(input)
}
