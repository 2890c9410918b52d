//! Synthetic translated material with randomly placed errors.
//!
//! Each sentence carries one binary flag per error category. Flags are
//! independent Bernoulli draws: flag `(i, c)` is the `i`-th draw of the stream
//! keyed by `(seed, c)`, so a population is a pure function of its spec.

use std::collections::HashSet;
use std::io::{BufRead, Write};

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, DOMAIN_FLAGS, DOMAIN_SAMPLE};
use crate::stats::Proportion;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorCategory {
    pub name: String,
    pub density: Proportion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationSpec {
    pub num_sentences: usize,
    pub categories: Vec<ErrorCategory>,
    pub seed: u64,
}

impl PopulationSpec {
    pub fn new(num_sentences: usize, categories: Vec<ErrorCategory>, seed: u64) -> Result<Self> {
        let spec = PopulationSpec {
            num_sentences,
            categories,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// A spec with one category named `errors`.
    pub fn single(num_sentences: usize, density: f64, seed: u64) -> Result<Self> {
        PopulationSpec::new(
            num_sentences,
            vec![ErrorCategory {
                name: "errors".into(),
                density: Proportion::new(density)?,
            }],
            seed,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_sentences == 0 {
            return Err(Error::domain("population needs at least one sentence"));
        }
        if self.categories.is_empty() {
            return Err(Error::domain("population needs at least one error category"));
        }
        let mut seen = HashSet::new();
        for category in &self.categories {
            if !seen.insert(category.name.as_str()) {
                return Err(Error::domain(format!(
                    "duplicate error category name {:?}",
                    category.name
                )));
            }
        }
        Ok(())
    }
}

/// Realized error flags of a synthetic population.
#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    spec: PopulationSpec,
    /// Row-major `[sentence][category]`.
    flags: Vec<bool>,
    /// Errors per sentence, summed over categories.
    per_sentence: Vec<u32>,
    total_errors: u64,
}

impl Population {
    fn from_flags(spec: PopulationSpec, flags: Vec<bool>) -> Self {
        let width = spec.categories.len();
        let per_sentence: Vec<u32> = flags
            .chunks(width)
            .map(|row| row.iter().filter(|&&f| f).count() as u32)
            .collect();
        let total_errors = per_sentence.iter().map(|&e| u64::from(e)).sum();
        Population {
            spec,
            flags,
            per_sentence,
            total_errors,
        }
    }

    pub fn spec(&self) -> &PopulationSpec {
        &self.spec
    }

    pub fn num_sentences(&self) -> usize {
        self.spec.num_sentences
    }

    pub fn num_categories(&self) -> usize {
        self.spec.categories.len()
    }

    pub fn flag(&self, sentence: usize, category: usize) -> bool {
        self.flags[sentence * self.num_categories() + category]
    }

    pub fn errors_in(&self, sentence: usize) -> u32 {
        self.per_sentence[sentence]
    }

    pub fn total_errors(&self) -> u64 {
        self.total_errors
    }

    /// Errors per sentence; exceeds 1 only with several categories.
    pub fn realized_density(&self) -> f64 {
        self.total_errors as f64 / self.num_sentences() as f64
    }

    /// Writes the population as a magic line, the spec as one JSON line, and
    /// the flags packed LSB-first in row-major order.
    pub fn export<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let header = FileHeader {
            spec: self.spec.clone(),
            generator: rng::GENERATOR_NAME.to_string(),
            total_errors: self.total_errors,
        };
        out.write_all(POPULATION_MAGIC)?;
        serde_json::to_writer(&mut out, &header)?;
        out.write_all(b"\n")?;
        let mut packed = vec![0u8; self.flags.len().div_ceil(8)];
        for (i, _) in self.flags.iter().enumerate().filter(|(_, &f)| f) {
            packed[i / 8] |= 1 << (i % 8);
        }
        out.write_all(&packed)
    }

    pub fn import<R: BufRead>(mut input: R) -> Result<Population> {
        let mut magic = vec![0u8; POPULATION_MAGIC.len()];
        input
            .read_exact(&mut magic)
            .map_err(|_| Error::PopulationFile("missing magic line".into()))?;
        if magic != POPULATION_MAGIC {
            return Err(Error::PopulationFile("unrecognized magic line".into()));
        }
        let mut line = String::new();
        input
            .read_line(&mut line)
            .map_err(|e| Error::PopulationFile(format!("unreadable header: {e}")))?;
        let header: FileHeader = serde_json::from_str(line.trim_end())
            .map_err(|e| Error::PopulationFile(format!("bad header: {e}")))?;
        header.spec.validate()?;
        let len = header.spec.num_sentences * header.spec.categories.len();
        let mut packed = Vec::new();
        input
            .read_to_end(&mut packed)
            .map_err(|e| Error::PopulationFile(format!("unreadable bitmap: {e}")))?;
        if packed.len() != len.div_ceil(8) {
            return Err(Error::PopulationFile(format!(
                "bitmap holds {} bytes, expected {}",
                packed.len(),
                len.div_ceil(8)
            )));
        }
        let flags = (0..len).map(|i| packed[i / 8] >> (i % 8) & 1 == 1).collect();
        let population = Population::from_flags(header.spec, flags);
        if population.total_errors != header.total_errors {
            return Err(Error::PopulationFile(format!(
                "header records {} errors, bitmap holds {}",
                header.total_errors, population.total_errors
            )));
        }
        Ok(population)
    }
}

const POPULATION_MAGIC: &[u8] = b"TQEPOP1\n";

#[derive(Serialize, Deserialize)]
struct FileHeader {
    spec: PopulationSpec,
    generator: String,
    total_errors: u64,
}

pub fn generate_population(spec: &PopulationSpec) -> Result<Population> {
    spec.validate()?;
    let n = spec.num_sentences;
    let width = spec.categories.len();
    let mut flags = vec![false; n * width];
    for (c, category) in spec.categories.iter().enumerate() {
        let mut stream = rng::stream(spec.seed, DOMAIN_FLAGS, c as u64, 0);
        let density = category.density.value();
        for i in 0..n {
            flags[i * width + c] = stream.random_bool(density);
        }
    }
    Ok(Population::from_flags(spec.clone(), flags))
}

/// Total errors divided by sentence count.
pub fn error_density(population: &Population) -> f64 {
    population.realized_density()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplingMode {
    #[default]
    WithoutReplacement,
    WithReplacement,
}

/// Sentences picked for review.
///
/// Indices are sorted. They are distinct unless the sample was drawn with
/// replacement.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sample {
    pub indices: Vec<usize>,
    pub error_count: u64,
}

impl Sample {
    pub fn size(&self) -> usize {
        self.indices.len()
    }
}

/// Draws `n` distinct sentences uniformly at random.
pub fn draw_sample(population: &Population, n: usize, stream_key: u64) -> Result<Sample> {
    draw_sample_with(population, n, stream_key, SamplingMode::WithoutReplacement)
}

pub fn draw_sample_with(
    population: &Population,
    n: usize,
    stream_key: u64,
    mode: SamplingMode,
) -> Result<Sample> {
    let size = population.num_sentences();
    if n == 0 || n > size {
        return Err(Error::domain(format!(
            "sample size must lie in [1, {size}], got {n}"
        )));
    }
    let mut stream = rng::stream(population.spec.seed, DOMAIN_SAMPLE, 0, stream_key);
    let mut indices: Vec<usize> = match mode {
        SamplingMode::WithoutReplacement => index::sample(&mut stream, size, n).into_vec(),
        SamplingMode::WithReplacement => (0..n).map(|_| stream.random_range(0..size)).collect(),
    };
    indices.sort_unstable();
    let error_count = indices
        .iter()
        .map(|&i| u64::from(population.per_sentence[i]))
        .sum();
    Ok(Sample {
        indices,
        error_count,
    })
}
