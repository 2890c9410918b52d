//! The `tqe` command-line front end.
//!
//! Every numeric parameter can come from a flag, from a JSON config file
//! (`--config`), or from the built-in default, in that order of precedence.
//! A config file is either a flat object keyed by parameter name or any JSON
//! output of a previous run, whose embedded manifest is replayed.

use std::fs::{self, File};
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::Error;
use crate::manifest::RunManifest;
use crate::montecarlo::{
    fit_normal, histogram, sweep_with_series, wald_coverage, HistogramBin, MCConfig, NormalFit, SweepResult,
    DEFAULT_REPLICATES,
};
use crate::output::{save_bytes, save_histogram_csv, save_json, save_sweep_csv, sig};
use crate::ped::{
    mean_pedn_sweep, min_sample_size, read_ped_input, Granularity, InputFormat, NormalizationConstant,
    PedDistributionModel, Segment,
};
use crate::population::{generate_population, ErrorCategory, Population, PopulationSpec, SamplingMode};
use crate::stats::{
    convert_sentences, convert_words, fpc_interval, required_sample_size, wald_interval, ConfidenceLevel,
    ConversionConstants, IntervalEstimate, Proportion, TextVolume,
};

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DOMAIN: i32 = 3;
pub const EXIT_IO: i32 = 4;

const DEFAULT_SIMULATE_SIZES: &str = "10,15,25,50,100,150,200,400,625,1000,1500,2000";
const DEFAULT_PED_SIZES: &str = "25,50,100,150,200,300,400,600,800,1000,1500,2000";

#[derive(Debug, Parser)]
#[command(name = "tqe", version, about = "Sample sizes and confidence intervals for translation quality evaluation")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Two-sided confidence level [default: 0.95]
    #[arg(long, global = true)]
    pub level: Option<f64>,
    /// Seed for every random stream [default: 0]
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Print the JSON report instead of the text summary
    #[arg(long, global = true)]
    pub json: bool,
    /// Output file (calculators) or directory (simulate, ped)
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// [default: 17]
    #[arg(long, global = true)]
    pub words_per_sentence: Option<f64>,
    /// [default: 15]
    #[arg(long, global = true)]
    pub sentences_per_page: Option<f64>,
    /// [default: 250]
    #[arg(long, global = true)]
    pub words_per_page: Option<f64>,
    /// JSON config file or a previous run's JSON output
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads for Monte Carlo replicates (1 runs serially)
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sentences to review for a target half-width
    SampleSize {
        /// Expected error density (errors per sentence)
        #[arg(long)]
        p: Option<f64>,
        /// Target half-width of the confidence interval
        #[arg(long)]
        delta: Option<f64>,
    },
    /// Confidence interval for a measured error density
    Interval {
        #[arg(long)]
        p: Option<f64>,
        /// Sentences reviewed (may be fractional)
        #[arg(long)]
        n: Option<f64>,
        /// Sentences in the whole job; enables the finite population correction
        #[arg(long)]
        population: Option<f64>,
    },
    /// Job-level estimate from a review scorecard
    Scorecard {
        #[arg(long)]
        job_words: Option<f64>,
        #[arg(long)]
        sample_words: Option<f64>,
        #[arg(long)]
        errors: Option<u64>,
    },
    /// Monte Carlo sampling from a synthetic population
    Simulate {
        /// Sentences in the synthetic population [default: 15000]
        #[arg(long)]
        n_population: Option<usize>,
        /// Error density of a single category [default: 0.07]
        #[arg(long)]
        density: Option<f64>,
        /// Error category as NAME=DENSITY; repeat for several (overrides --density)
        #[arg(long = "category")]
        categories: Vec<String>,
        /// Comma list or START:END[:STEP]
        #[arg(long)]
        sample_sizes: Option<String>,
        /// [default: 2000]
        #[arg(long)]
        replicates: Option<usize>,
        #[arg(long)]
        with_replacement: bool,
        /// Replay a population exported earlier instead of generating one
        #[arg(long)]
        population_file: Option<PathBuf>,
        /// Also write the population to this file
        #[arg(long)]
        export_population: Option<PathBuf>,
    },
    /// Post-editing distance scoring and confidence sweep
    Ped {
        /// TSV of candidate/post-edited pairs, or one PED value per line
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long, value_enum)]
        format: Option<InputFormat>,
        #[arg(long, value_enum)]
        granularity: Option<Granularity>,
        /// Distribution to simulate when no input is given
        #[arg(long, value_enum)]
        model: Option<ModelKind>,
        /// [default: 0.35]
        #[arg(long)]
        zero_mass: Option<f64>,
        /// [default: 3.0]
        #[arg(long)]
        tail_rate: Option<f64>,
        /// Normalization constant of PEDn [default: 1]
        #[arg(long)]
        c: Option<f64>,
        /// Comma list or START:END[:STEP]
        #[arg(long)]
        sweep: Option<String>,
        /// [default: 2000]
        #[arg(long)]
        replicates: Option<usize>,
        /// Half-width used for the minimum sample size summary [default: 0.05]
        #[arg(long)]
        target_delta: Option<f64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    ZeroInflated,
    Empirical,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Core(Error::Domain(_) | Error::Parse { .. } | Error::PopulationFile(_)) => EXIT_DOMAIN,
            CliError::Core(Error::Io { .. } | Error::Json(_) | Error::Csv(_)) => EXIT_IO,
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn usage(message: impl Into<String>) -> CliError {
    CliError::Usage(message.into())
}

/// Parameters from a config file.
struct Config(Map<String, Value>);

impl Config {
    fn load(path: Option<&Path>) -> CliResult<Self> {
        let Some(path) = path else {
            return Ok(Config(Map::new()));
        };
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let value: Value =
            serde_json::from_str(&text).map_err(|e| usage(format!("{}: invalid JSON: {e}", path.display())))?;
        let Value::Object(mut map) = value else {
            return Err(usage(format!("{}: config must be a JSON object", path.display())));
        };
        if let Some(Value::Object(mut manifest)) = map.remove("manifest") {
            if let Some(Value::Object(params)) = manifest.remove("parameters") {
                return Ok(Config(params));
            }
        }
        if let Some(Value::Object(params)) = map.remove("parameters") {
            return Ok(Config(params));
        }
        Ok(Config(map))
    }

    fn get<T: DeserializeOwned>(&self, flag: Option<T>, key: &str) -> CliResult<Option<T>> {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.0.get(key) {
            None | Some(Value::Null) => Ok(None),
            Some(v) => serde_json::from_value(v.clone())
                .map(Some)
                .map_err(|e| usage(format!("config key {key:?}: {e}"))),
        }
    }

    fn or<T: DeserializeOwned>(&self, flag: Option<T>, key: &str, default: T) -> CliResult<T> {
        Ok(self.get(flag, key)?.unwrap_or(default))
    }

    fn required<T: DeserializeOwned>(&self, flag: Option<T>, key: &str) -> CliResult<T> {
        self.get(flag, key)?
            .ok_or_else(|| usage(format!("missing required parameter --{}", key.replace('_', "-"))))
    }

    fn flag(&self, flag: bool, key: &str) -> CliResult<bool> {
        Ok(flag || self.get(None, key)?.unwrap_or(false))
    }
}

/// Settings shared by all subcommands after merging flags, config and defaults.
struct Context {
    config: Config,
    level: ConfidenceLevel,
    seed: u64,
    constants: ConversionConstants,
    json: bool,
    out: Option<PathBuf>,
    threads: Option<usize>,
}

impl Context {
    fn new(global: GlobalArgs) -> CliResult<Self> {
        let config = Config::load(global.config.as_deref())?;
        let level = ConfidenceLevel::new(config.or(global.level, "level", 0.95)?)?;
        let defaults = ConversionConstants::default();
        let constants = ConversionConstants::new(
            config.or(global.words_per_sentence, "words_per_sentence", defaults.words_per_sentence)?,
            config.or(global.sentences_per_page, "sentences_per_page", defaults.sentences_per_page)?,
            config.or(global.words_per_page, "words_per_page", defaults.words_per_page)?,
        )?;
        let threads = config.get(global.threads, "threads")?;
        if threads == Some(0) {
            return Err(usage("--threads must be at least 1"));
        }
        Ok(Context {
            seed: config.or(global.seed, "seed", 0)?,
            level,
            constants,
            json: global.json,
            out: global.out,
            threads,
            config,
        })
    }

    fn manifest(&self, command: &str) -> RunManifest {
        let mut m = RunManifest::new(command, self.seed);
        m.param("level", self.level.level())
            .param("seed", self.seed)
            .param("words_per_sentence", self.constants.words_per_sentence)
            .param("sentences_per_page", self.constants.sentences_per_page)
            .param("words_per_page", self.constants.words_per_page);
        m
    }

    fn parallel(&self) -> bool {
        self.threads != Some(1)
    }

    fn in_pool<T: Send>(&self, job: impl FnOnce() -> T + Send) -> CliResult<T> {
        match self.threads {
            Some(n) if n > 1 => {
                let pool = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build()
                    .map_err(|e| usage(format!("cannot start {n} threads: {e}")))?;
                Ok(pool.install(job))
            }
            _ => Ok(job()),
        }
    }

    fn output_dir(&self, fallback: &str) -> CliResult<PathBuf> {
        let dir = self.out.clone().unwrap_or_else(|| PathBuf::from(fallback));
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(dir)
    }

    /// Prints JSON or text, and saves the JSON to `--out` when given.
    fn emit<T: Serialize>(&self, report: &T, text: impl FnOnce() -> String, stdout: &mut dyn Write) -> CliResult<()> {
        if let Some(path) = &self.out {
            save_json(report, path)?;
        }
        let rendered = if self.json {
            serde_json::to_string_pretty(report).map_err(Error::from)?
        } else {
            text()
        };
        writeln!(stdout, "{rendered}").map_err(|e| Error::io("<stdout>", e))?;
        Ok(())
    }
}

/// Parses `"100,200"` or `"START:END[:STEP]"` (step defaults to START).
pub fn parse_sizes(text: &str) -> CliResult<Vec<usize>> {
    let bad = || usage(format!("invalid size list {text:?}"));
    let number = |s: &str| s.trim().parse::<usize>().map_err(|_| bad());
    let sizes: Vec<usize> = if text.contains(':') {
        let parts: Vec<usize> = text.split(':').map(number).collect::<CliResult<_>>()?;
        let (start, end, step) = match parts[..] {
            [start, end] => (start, end, start),
            [start, end, step] => (start, end, step),
            _ => return Err(bad()),
        };
        if start == 0 || step == 0 || end < start {
            return Err(bad());
        }
        (start..=end).step_by(step).collect()
    } else {
        text.split(',').map(number).collect::<CliResult<_>>()?
    };
    if sizes.is_empty() || sizes.contains(&0) || sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(usage(format!("sizes must be positive and strictly increasing: {text:?}")));
    }
    Ok(sizes)
}

fn parse_category(text: &str) -> CliResult<ErrorCategory> {
    let (name, density) = text
        .split_once('=')
        .ok_or_else(|| usage(format!("category must look like NAME=DENSITY, got {text:?}")))?;
    let density: f64 = density
        .parse()
        .map_err(|_| usage(format!("invalid density in category {text:?}")))?;
    Ok(ErrorCategory {
        name: name.to_string(),
        density: Proportion::new(density)?,
    })
}

/// Entry point used by the binary; returns the process exit status.
pub fn main_with_args<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(stderr, "{}", e.render());
                return EXIT_USAGE;
            }
            let _ = write!(stdout, "{}", e.render());
            return 0;
        }
    };
    match run(cli, stdout, stderr) {
        Ok(()) => 0,
        // Reader went away, e.g. `tqe ... | head`.
        Err(CliError::Core(Error::Io { source, .. })) if source.kind() == std::io::ErrorKind::BrokenPipe => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> CliResult<()> {
    let ctx = Context::new(cli.global)?;
    match cli.command {
        Command::SampleSize { p, delta } => cmd_sample_size(&ctx, p, delta, stdout, stderr),
        Command::Interval { p, n, population } => cmd_interval(&ctx, p, n, population, stdout),
        Command::Scorecard {
            job_words,
            sample_words,
            errors,
        } => cmd_scorecard(&ctx, job_words, sample_words, errors, stdout),
        Command::Simulate {
            n_population,
            density,
            categories,
            sample_sizes,
            replicates,
            with_replacement,
            population_file,
            export_population,
        } => cmd_simulate(
            &ctx,
            SimulateArgs {
                n_population,
                density,
                categories,
                sample_sizes,
                replicates,
                with_replacement,
                population_file,
                export_population,
            },
            stdout,
        ),
        Command::Ped {
            input,
            format,
            granularity,
            model,
            zero_mass,
            tail_rate,
            c,
            sweep,
            replicates,
            target_delta,
        } => cmd_ped(
            &ctx,
            PedArgs {
                input,
                format,
                granularity,
                model,
                zero_mass,
                tail_rate,
                c,
                sweep,
                replicates,
                target_delta,
            },
            stdout,
            stderr,
        ),
    }
}

#[derive(Debug, Serialize)]
pub struct SampleSizeReport {
    pub manifest: RunManifest,
    pub p: f64,
    pub delta: f64,
    pub z: f64,
    pub exact: f64,
    pub recommended: u64,
    pub volume: TextVolume,
    pub warnings: Vec<String>,
}

fn cmd_sample_size(
    ctx: &Context,
    p: Option<f64>,
    delta: Option<f64>,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> CliResult<()> {
    let p: f64 = ctx.config.required(p, "p")?;
    let delta: f64 = ctx.config.required(delta, "delta")?;
    let size = required_sample_size(Proportion::new(p)?, delta, ctx.level)?;
    let mut warnings = Vec::new();
    if p == 0.0 || p == 1.0 {
        warnings.push(format!("degenerate density {p}: zero variance, no sample is informative"));
    }
    let mut manifest = ctx.manifest("sample-size");
    manifest.param("p", p).param("delta", delta);
    let report = SampleSizeReport {
        manifest,
        p,
        delta,
        z: ctx.level.z(),
        exact: size.exact,
        recommended: size.recommended,
        volume: convert_sentences(size.recommended as f64, &ctx.constants)?,
        warnings,
    };
    for w in &report.warnings {
        let _ = writeln!(stderr, "warning: {w}");
    }
    ctx.emit(
        &report,
        || {
            format!(
                "error density {} ± {} at {}% confidence (z = {})\n\
                 exact sample size: {} sentences\n\
                 recommended:       {} sentences ≈ {} words ≈ {} pages",
                sig(report.p, 4),
                sig(report.delta, 4),
                sig(ctx.level.level() * 100.0, 4),
                sig(report.z, 4),
                sig(report.exact, 4),
                report.recommended,
                sig(report.volume.words, 4),
                sig(report.volume.pages, 4),
            )
        },
        stdout,
    )
}

#[derive(Debug, Serialize)]
pub struct IntervalReport {
    pub manifest: RunManifest,
    pub n: f64,
    pub population: Option<f64>,
    pub interval: IntervalEstimate,
}

fn describe(ci: &IntervalEstimate) -> String {
    let mut text = format!(
        "{} ± {}  [{}, {}] at {}% confidence",
        sig(ci.point.value(), 4),
        sig(ci.delta, 4),
        sig(ci.lower, 4),
        sig(ci.upper, 4),
        sig(ci.level.level() * 100.0, 4),
    );
    if ci.clamped {
        text.push_str("\nnote: bounds clamped to [0, 1]");
    }
    if ci.normal_approx_unreliable {
        text.push_str("\nwarning: fewer than 5 expected errors or non-errors; the normal approximation is unreliable");
    }
    text
}

fn cmd_interval(
    ctx: &Context,
    p: Option<f64>,
    n: Option<f64>,
    population: Option<f64>,
    stdout: &mut dyn Write,
) -> CliResult<()> {
    let p: f64 = ctx.config.required(p, "p")?;
    let n: f64 = ctx.config.required(n, "n")?;
    let population: Option<f64> = ctx.config.get(population, "population")?;
    let point = Proportion::new(p)?;
    let interval = match population {
        Some(big_n) => fpc_interval(point, n, big_n, ctx.level)?,
        None => wald_interval(point, n, ctx.level)?,
    };
    let mut manifest = ctx.manifest("interval");
    manifest.param("p", p).param("n", n).param("population", population);
    let report = IntervalReport {
        manifest,
        n,
        population,
        interval,
    };
    ctx.emit(&report, || describe(&report.interval), stdout)
}

#[derive(Debug, Serialize)]
pub struct ScorecardReport {
    pub manifest: RunManifest,
    pub job: TextVolume,
    pub sample: TextVolume,
    pub errors_found: u64,
    pub density: f64,
    pub interval: IntervalEstimate,
}

fn cmd_scorecard(
    ctx: &Context,
    job_words: Option<f64>,
    sample_words: Option<f64>,
    errors: Option<u64>,
    stdout: &mut dyn Write,
) -> CliResult<()> {
    let job_words: f64 = ctx.config.required(job_words, "job_words")?;
    let sample_words: f64 = ctx.config.required(sample_words, "sample_words")?;
    let errors: u64 = ctx.config.required(errors, "errors")?;
    if sample_words.is_nan() || sample_words <= 0.0 {
        return Err(Error::domain(format!("sample must contain words, got {sample_words}")).into());
    }
    if sample_words > job_words {
        return Err(Error::domain(format!(
            "sample of {sample_words} words is larger than the {job_words}-word job"
        ))
        .into());
    }
    let job = convert_words(job_words, &ctx.constants)?;
    let sample = convert_words(sample_words, &ctx.constants)?;
    let density = errors as f64 / sample.sentences;
    let point = Proportion::new(density).map_err(|_| {
        Error::domain(format!(
            "{errors} errors in {} sentences exceeds one error per sentence",
            sig(sample.sentences, 4)
        ))
    })?;
    let interval = fpc_interval(point, sample.sentences, job.sentences, ctx.level)?;
    let mut manifest = ctx.manifest("scorecard");
    manifest
        .param("job_words", job_words)
        .param("sample_words", sample_words)
        .param("errors", errors);
    let report = ScorecardReport {
        manifest,
        job,
        sample,
        errors_found: errors,
        density,
        interval,
    };
    ctx.emit(
        &report,
        || {
            format!(
                "job: {} words ({} sentences); sample: {} words ({} sentences)\n\
                 {} errors -> density {} errors per sentence\n{}",
                report.job.words,
                sig(report.job.sentences, 4),
                report.sample.words,
                sig(report.sample.sentences, 4),
                report.errors_found,
                sig(report.density, 4),
                describe(&report.interval),
            )
        },
        stdout,
    )
}

struct SimulateArgs {
    n_population: Option<usize>,
    density: Option<f64>,
    categories: Vec<String>,
    sample_sizes: Option<String>,
    replicates: Option<usize>,
    with_replacement: bool,
    population_file: Option<PathBuf>,
    export_population: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
pub struct SizeFit {
    pub sample_size: usize,
    /// Fit to the error counts.
    pub counts: NormalFit,
    /// Fit to the observed densities.
    pub densities: NormalFit,
}

#[derive(Debug, Serialize)]
pub struct SizeHistogram {
    pub sample_size: usize,
    pub bins: Vec<HistogramBin>,
}

#[derive(Debug, Serialize)]
pub struct NormalFitReport {
    pub manifest: RunManifest,
    pub fits: Vec<SizeFit>,
}

#[derive(Debug, Serialize)]
pub struct SimulateReport {
    pub manifest: RunManifest,
    pub population: PopulationSpec,
    pub total_errors: u64,
    pub realized_density: f64,
    pub config: MCConfig,
    pub sweep: SweepResult,
    pub fits: Vec<SizeFit>,
    /// Share of replicate Wald intervals that cover the realized density.
    pub wald_coverage: Vec<f64>,
    pub histograms: Vec<SizeHistogram>,
}

fn cmd_simulate(ctx: &Context, args: SimulateArgs, stdout: &mut dyn Write) -> CliResult<()> {
    let cfg = &ctx.config;
    let population_file: Option<PathBuf> = cfg.get(args.population_file, "population_file")?;
    let population: Population = match &population_file {
        Some(path) => {
            let file = File::open(path).map_err(|e| Error::io(path, e))?;
            Population::import(BufReader::new(file))?
        }
        None => {
            let n_population = cfg.or(args.n_population, "n_population", 15_000)?;
            let categories = if !args.categories.is_empty() {
                args.categories.iter().map(|c| parse_category(c)).collect::<CliResult<Vec<_>>>()?
            } else if let Some(categories) = cfg.get(None, "categories")? {
                categories
            } else {
                vec![ErrorCategory {
                    name: "errors".into(),
                    density: Proportion::new(cfg.or(args.density, "density", 0.07)?)?,
                }]
            };
            generate_population(&PopulationSpec::new(n_population, categories, ctx.seed)?)?
        }
    };
    let sizes_text = cfg.or(args.sample_sizes, "sample_sizes", DEFAULT_SIMULATE_SIZES.to_string())?;
    let mode = if cfg.flag(args.with_replacement, "with_replacement")? {
        SamplingMode::WithReplacement
    } else {
        SamplingMode::WithoutReplacement
    };
    let config = MCConfig::new(parse_sizes(&sizes_text)?, ctx.seed)?
        .with_replicates(cfg.or(args.replicates, "replicates", DEFAULT_REPLICATES)?)?
        .with_level(ctx.level)
        .with_mode(mode)
        .with_parallel(ctx.parallel());

    let dir = ctx.output_dir("tqe-simulate")?;
    if let Some(path) = &args.export_population {
        save_bytes(path, |out| population.export(out))?;
    }

    let results = ctx.in_pool(|| sweep_with_series(&population, &config))??;
    let mut fits = Vec::new();
    let mut histograms = Vec::new();
    let mut coverage = Vec::new();
    for (series, _) in &results {
        let counts: Vec<f64> = series.error_counts.iter().map(|&c| c as f64).collect();
        fits.push(SizeFit {
            sample_size: series.sample_size,
            counts: fit_normal(&counts)?,
            densities: fit_normal(&series.densities)?,
        });
        let bins = histogram(series);
        save_histogram_csv(&bins, &dir.join(format!("histogram_n{}.csv", series.sample_size)))?;
        histograms.push(SizeHistogram {
            sample_size: series.sample_size,
            bins,
        });
        coverage.push(if population.num_categories() == 1 {
            wald_coverage(series, population.realized_density(), ctx.level)?
        } else {
            f64::NAN
        });
    }
    let sweep = SweepResult {
        rows: results.into_iter().map(|(_, row)| row).collect(),
    };
    save_sweep_csv(&sweep, &dir.join("sweep.csv"))?;

    let mut manifest = ctx.manifest("simulate");
    manifest
        .param("population_file", &population_file)
        .param("n_population", population.num_sentences())
        .param("categories", &population.spec().categories)
        .param("sample_sizes", &sizes_text)
        .param("replicates", config.replicates)
        .param("with_replacement", mode == SamplingMode::WithReplacement);
    let fit_report = NormalFitReport {
        manifest: manifest.clone(),
        fits,
    };
    save_json(&fit_report, &dir.join("normal_fit.json"))?;
    let report = SimulateReport {
        manifest,
        population: population.spec().clone(),
        total_errors: population.total_errors(),
        realized_density: population.realized_density(),
        config,
        sweep,
        fits: fit_report.fits,
        wald_coverage: coverage,
        histograms,
    };
    save_json(&report, &dir.join("simulate.json"))?;

    let text = if ctx.json {
        serde_json::to_string_pretty(&report).map_err(Error::from)?
    } else {
        let mut t = format!(
            "population: {} sentences, {} errors, realized density {}\n\
             {} replicates per sample size, seed {}\n\n\
             {:>8} {:>10} {:>10} {:>10} {:>10}\n",
            population.num_sentences(),
            report.total_errors,
            sig(report.realized_density, 4),
            report.config.replicates,
            ctx.seed,
            "n",
            "mc_delta",
            "analytic",
            "sigma(cnt)",
            "coverage",
        );
        for ((row, fit), cov) in report.sweep.rows.iter().zip(&report.fits).zip(&report.wald_coverage) {
            t.push_str(&format!(
                "{:>8} {:>10} {:>10} {:>10} {:>10}\n",
                row.sample_size,
                sig(row.mc_delta, 4),
                sig(row.analytic_delta, 4),
                sig(fit.counts.sigma, 4),
                sig(*cov, 4),
            ));
        }
        t.push_str(&format!("\nwrote {}", dir.display()));
        t
    };
    writeln!(stdout, "{text}").map_err(|e| Error::io("<stdout>", e))?;
    Ok(())
}

struct PedArgs {
    input: Option<PathBuf>,
    format: Option<InputFormat>,
    granularity: Option<Granularity>,
    model: Option<ModelKind>,
    zero_mass: Option<f64>,
    tail_rate: Option<f64>,
    c: Option<f64>,
    sweep: Option<String>,
    replicates: Option<usize>,
    target_delta: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct PedInputSummary {
    pub path: PathBuf,
    pub segments: usize,
    pub skipped_empty_lines: Vec<usize>,
    pub mean_ped: f64,
    pub mean_pedn: f64,
}

#[derive(Debug, Serialize)]
pub struct PedReport {
    pub manifest: RunManifest,
    pub c: f64,
    pub model: PedDistributionModel,
    pub input: Option<PedInputSummary>,
    pub config: MCConfig,
    pub sweep: SweepResult,
    pub target_delta: f64,
    pub min_sample_size: Option<usize>,
    pub min_sample_words: Option<f64>,
}

fn write_segments(path: &Path, segments: &[Segment]) -> crate::Result<()> {
    save_bytes(path, |out| {
        writeln!(out, "line\tcandidate_len\tedit_ops\tped\tpedn")?;
        let opt = |v: Option<usize>| v.map(|v| v.to_string()).unwrap_or_default();
        for s in segments {
            writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}",
                s.line,
                opt(s.candidate_len),
                opt(s.edit_ops),
                s.ped,
                s.pedn
            )?;
        }
        Ok(())
    })
}

fn mean(values: impl ExactSizeIterator<Item = f64>) -> f64 {
    let n = values.len() as f64;
    values.sum::<f64>() / n
}

fn cmd_ped(ctx: &Context, args: PedArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> CliResult<()> {
    let cfg = &ctx.config;
    let c = NormalizationConstant::new(cfg.or(args.c, "c", 1.0)?)?;
    let input_path: Option<PathBuf> = cfg.get(args.input, "input")?;
    let format = cfg.or(args.format, "format", InputFormat::Auto)?;
    let granularity = cfg.or(args.granularity, "granularity", Granularity::Word)?;
    let kind = cfg.get(args.model, "model")?;
    let zero_mass = cfg.or(args.zero_mass, "zero_mass", 0.35)?;
    let tail_rate = cfg.or(args.tail_rate, "tail_rate", 3.0)?;
    let sizes_text = cfg.or(args.sweep, "sweep", DEFAULT_PED_SIZES.to_string())?;
    let target_delta = cfg.or(args.target_delta, "target_delta", 0.05)?;
    if target_delta.is_nan() || target_delta <= 0.0 {
        return Err(Error::domain(format!("target delta must be positive, got {target_delta}")).into());
    }
    let dir = ctx.output_dir("tqe-ped")?;

    let mut input_summary = None;
    let model = match (kind, &input_path) {
        (Some(ModelKind::ZeroInflated), Some(_)) => {
            return Err(usage("--input resamples observed values; drop --model zero-inflated"));
        }
        (Some(ModelKind::Empirical), None) => return Err(usage("--model empirical needs --input")),
        (_, Some(path)) => {
            let file = File::open(path).map_err(|e| Error::io(path, e))?;
            let input = read_ped_input(BufReader::new(file), path, format, c, granularity)?;
            for line in &input.skipped_empty {
                let _ = writeln!(stderr, "warning: {}:{line}: empty candidate skipped", path.display());
            }
            if input.segments.is_empty() {
                return Err(Error::domain(format!("{}: no usable segments", path.display())).into());
            }
            write_segments(&dir.join("segments.tsv"), &input.segments)?;
            input_summary = Some(PedInputSummary {
                path: path.clone(),
                segments: input.segments.len(),
                skipped_empty_lines: input.skipped_empty.clone(),
                mean_ped: mean(input.segments.iter().map(|s| s.ped)),
                mean_pedn: mean(input.segments.iter().map(|s| s.pedn)),
            });
            PedDistributionModel::Empirical {
                values: input.ped_values(),
            }
        }
        (_, None) => PedDistributionModel::ZeroInflatedExponential { zero_mass, tail_rate },
    };
    model.validate()?;

    let config = MCConfig::new(parse_sizes(&sizes_text)?, ctx.seed)?
        .with_replicates(cfg.or(args.replicates, "replicates", DEFAULT_REPLICATES)?)?
        .with_level(ctx.level)
        .with_parallel(ctx.parallel());
    let sweep = ctx.in_pool(|| mean_pedn_sweep(&model, c, &config))??;
    save_sweep_csv(&sweep, &dir.join("sweep.csv"))?;
    let min_n = min_sample_size(&sweep, target_delta);

    let mut manifest = ctx.manifest("ped");
    manifest
        .param("c", c.value())
        .param("input", &input_path)
        .param("format", format)
        .param("granularity", granularity)
        .param("model", kind)
        .param("zero_mass", zero_mass)
        .param("tail_rate", tail_rate)
        .param("sweep", &sizes_text)
        .param("replicates", config.replicates)
        .param("target_delta", target_delta);
    let report = PedReport {
        manifest,
        c: c.value(),
        model,
        input: input_summary,
        config,
        min_sample_words: min_n.map(|n| n as f64 * ctx.constants.words_per_sentence),
        min_sample_size: min_n,
        sweep,
        target_delta,
    };
    save_json(&report, &dir.join("ped.json"))?;

    let text = if ctx.json {
        serde_json::to_string_pretty(&report).map_err(Error::from)?
    } else {
        let mut t = String::new();
        if let Some(input) = &report.input {
            t.push_str(&format!(
                "{}: {} segments ({} skipped), mean PED {}, mean PEDn {}\n",
                input.path.display(),
                input.segments,
                input.skipped_empty_lines.len(),
                sig(input.mean_ped, 4),
                sig(input.mean_pedn, 4),
            ));
        }
        t.push_str(&format!("{:>8} {:>10} {:>10} {:>10}\n", "n", "mean_pedn", "mc_delta", "z*sd"));
        for row in &report.sweep.rows {
            t.push_str(&format!(
                "{:>8} {:>10} {:>10} {:>10}\n",
                row.sample_size,
                sig(row.mean, 4),
                sig(row.mc_delta, 4),
                sig(row.analytic_delta, 4)
            ));
        }
        match (report.min_sample_size, report.min_sample_words) {
            (Some(n), Some(words)) => t.push_str(&format!(
                "\ndelta <= {} first reached at {n} sentences ≈ {} words",
                sig(target_delta, 4),
                sig(words, 4)
            )),
            _ => t.push_str(&format!("\ndelta <= {} not reached in the sweep", sig(target_delta, 4))),
        }
        t.push_str(&format!("\nwrote {}", dir.display()));
        t
    };
    writeln!(stdout, "{text}").map_err(|e| Error::io("<stdout>", e))?;
    Ok(())
}
