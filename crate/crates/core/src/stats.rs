//! Closed-form interval math for a per-sentence error rate.
//!
//! A reviewed sample of `n` sentences with observed error density `p` has
//! standard error `sqrt(p(1-p)/n)`. The half-width of the Wald interval is that
//! standard error scaled by the two-sided normal quantile of the confidence
//! level. When the sample is a sizable share of a finite job of `N` sentences
//! the standard error is multiplied by `sqrt((N-n)/(N-1))`.
//!
//! Sentence counts are real-valued throughout: a 400-word sample is 23.5
//! sentences at 17 words per sentence.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Below this expected count on either side the normal approximation is flagged.
pub const NORMAL_APPROX_MIN_COUNT: f64 = 5.0;

/// A probability or error density in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Proportion(f64);

impl Proportion {
    pub fn new(value: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&value) {
            Ok(Proportion(value))
        } else {
            Err(Error::domain(format!("proportion must lie in [0, 1], got {value}")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// `p (1 - p)`, the Bernoulli variance.
    pub fn variance(self) -> f64 {
        self.0 * (1.0 - self.0)
    }
}

impl TryFrom<f64> for Proportion {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        Proportion::new(value)
    }
}

impl From<Proportion> for f64 {
    fn from(p: Proportion) -> f64 {
        p.0
    }
}

/// A two-sided confidence level together with its standard-normal quantile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConfidenceLevel {
    level: f64,
    z: f64,
}

impl ConfidenceLevel {
    pub fn new(level: f64) -> Result<Self> {
        Ok(ConfidenceLevel {
            level,
            z: z_for_level(level)?,
        })
    }

    /// The customary 95% level with `z = 1.96`.
    pub fn ninety_five() -> Self {
        ConfidenceLevel {
            level: 0.95,
            z: 1.96,
        }
    }

    pub fn level(&self) -> f64 {
        self.level
    }

    pub fn z(&self) -> f64 {
        self.z
    }
}

impl Default for ConfidenceLevel {
    fn default() -> Self {
        ConfidenceLevel::ninety_five()
    }
}

/// Two-sided standard-normal quantile for `level`.
///
/// 0.95 maps to the table value 1.96; every other level goes through the
/// inverse normal CDF.
pub fn z_for_level(level: f64) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::domain(format!(
            "confidence level must lie in (0, 1), got {level}"
        )));
    }
    if level == 0.95 {
        return Ok(1.96);
    }
    let standard = Normal::new(0.0, 1.0).expect("standard normal parameters are valid");
    Ok(standard.inverse_cdf(0.5 + level / 2.0))
}

/// A point estimate with its half-width and bounds clamped to `[0, 1]`.
///
/// `delta` is never truncated, so `point ± delta` can always be reconstructed
/// even when `lower`/`upper` were clamped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntervalEstimate {
    pub point: Proportion,
    pub delta: f64,
    pub lower: f64,
    pub upper: f64,
    pub level: ConfidenceLevel,
    pub clamped: bool,
    /// Set when `n p < 5` or `n (1 - p) < 5`.
    pub normal_approx_unreliable: bool,
}

impl IntervalEstimate {
    fn new(point: Proportion, delta: f64, level: ConfidenceLevel, n: f64) -> Self {
        let p = point.value();
        let raw_lower = p - delta;
        let raw_upper = p + delta;
        let lower = raw_lower.max(0.0);
        let upper = raw_upper.min(1.0);
        IntervalEstimate {
            point,
            delta,
            lower,
            upper,
            level,
            clamped: lower != raw_lower || upper != raw_upper,
            normal_approx_unreliable: n * p < NORMAL_APPROX_MIN_COUNT
                || n * (1.0 - p) < NORMAL_APPROX_MIN_COUNT,
        }
    }

    pub fn contains(&self, value: f64) -> bool {
        self.lower <= value && value <= self.upper
    }
}

fn check_sample_size(n: f64) -> Result<()> {
    if n > 0.0 && n.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("sample size must be positive, got {n}")))
    }
}

/// Standard error of a proportion measured on `n` sentences.
pub fn wald_sigma(p: Proportion, n: f64) -> Result<f64> {
    check_sample_size(n)?;
    Ok((p.variance() / n).sqrt())
}

pub fn wald_delta(p: Proportion, n: f64, level: ConfidenceLevel) -> Result<f64> {
    Ok(level.z() * wald_sigma(p, n)?)
}

pub fn wald_interval(p: Proportion, n: f64, level: ConfidenceLevel) -> Result<IntervalEstimate> {
    let delta = wald_delta(p, n, level)?;
    Ok(IntervalEstimate::new(p, delta, level, n))
}

/// Standard error with the finite population correction `(N - n)/(N - 1)`.
pub fn fpc_sigma(p: Proportion, n: f64, population: f64) -> Result<f64> {
    check_sample_size(n)?;
    if !(population > 1.0 && population.is_finite()) {
        return Err(Error::domain(format!(
            "population size must exceed 1, got {population}"
        )));
    }
    if n > population {
        return Err(Error::domain(format!(
            "sample size {n} exceeds population size {population}"
        )));
    }
    let correction = (population - n) / (population - 1.0);
    Ok((p.variance() / n * correction).sqrt())
}

pub fn fpc_interval(
    p: Proportion,
    n: f64,
    population: f64,
    level: ConfidenceLevel,
) -> Result<IntervalEstimate> {
    let delta = level.z() * fpc_sigma(p, n, population)?;
    Ok(IntervalEstimate::new(p, delta, level, n))
}

/// Output of [`required_sample_size`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SampleSize {
    /// `z² p (1 - p) / Δ²` before rounding.
    pub exact: f64,
    /// Smallest whole number of sentences whose Wald half-width is at most Δ.
    pub recommended: u64,
}

/// Number of sentences needed for a Wald half-width of at most `delta`.
///
/// Degenerate densities (0 or 1) have zero variance and need no sample.
pub fn required_sample_size(
    p: Proportion,
    delta: f64,
    level: ConfidenceLevel,
) -> Result<SampleSize> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::domain(format!("delta must be positive, got {delta}")));
    }
    let z = level.z();
    let exact = z * z * p.variance() / (delta * delta);
    if p.variance() == 0.0 {
        return Ok(SampleSize {
            exact,
            recommended: 0,
        });
    }
    // ceil() can land one off when `exact` is an integer up to rounding error.
    let mut recommended = exact.ceil().max(1.0) as u64;
    while wald_delta(p, recommended as f64, level)? > delta {
        recommended += 1;
    }
    while recommended > 1 && wald_delta(p, (recommended - 1) as f64, level)? <= delta {
        recommended -= 1;
    }
    Ok(SampleSize { exact, recommended })
}

/// Average text-unit sizes used to translate between sentences, words and pages.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConversionConstants {
    pub words_per_sentence: f64,
    pub sentences_per_page: f64,
    pub words_per_page: f64,
}

impl Default for ConversionConstants {
    fn default() -> Self {
        ConversionConstants {
            words_per_sentence: 17.0,
            sentences_per_page: 15.0,
            words_per_page: 250.0,
        }
    }
}

impl ConversionConstants {
    pub fn new(words_per_sentence: f64, sentences_per_page: f64, words_per_page: f64) -> Result<Self> {
        for (name, value) in [
            ("words per sentence", words_per_sentence),
            ("sentences per page", sentences_per_page),
            ("words per page", words_per_page),
        ] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::domain(format!("{name} must be positive, got {value}")));
            }
        }
        Ok(ConversionConstants {
            words_per_sentence,
            sentences_per_page,
            words_per_page,
        })
    }
}

/// One amount of text expressed in all three units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TextVolume {
    pub sentences: f64,
    pub words: f64,
    pub pages: f64,
}

fn check_nonnegative(amount: f64, unit: &str) -> Result<()> {
    if amount >= 0.0 && amount.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("{unit} must be nonnegative, got {amount}")))
    }
}

pub fn convert_sentences(sentences: f64, constants: &ConversionConstants) -> Result<TextVolume> {
    check_nonnegative(sentences, "sentence count")?;
    Ok(TextVolume {
        sentences,
        words: sentences * constants.words_per_sentence,
        pages: sentences / constants.sentences_per_page,
    })
}

pub fn convert_words(words: f64, constants: &ConversionConstants) -> Result<TextVolume> {
    check_nonnegative(words, "word count")?;
    convert_sentences(words / constants.words_per_sentence, constants)
}
