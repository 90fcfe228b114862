//! Command-line front end. Every command prints one JSON document.
//!
//! Exit codes: 0 on success, 2 for usage errors (bad flags or parameter
//! combinations), 1 for data errors (unreadable or invalid inputs).

pub mod report;

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use cgmatch::analysis::{
    bench_complete_graph, expectation_bipartite, expectation_cgsm, flops_estimate, halving_schedule,
    layered_reduction_run, loglog_slope, simulate_optimal_match_rate, LayeredRunConfig, ModelConfig,
    ScheduleConfig, SimMethod, TokenSource,
};
use cgmatch::format::{load_payload, parse_importance, Payload};
use cgmatch::{run_matcher, Error, Keys, MatcherSettings, Method, ReductionOptions};
use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use report::{
    BenchReport, Envelope, ExpectReport, FlopsSummary, InputKind, InputSummary, RunReport, ScheduleReport,
    SimulateReport,
};

pub const EXIT_OK: u8 = 0;
pub const EXIT_DATA: u8 = 1;
pub const EXIT_USAGE: u8 = 2;

#[derive(Debug)]
enum CliError {
    Usage(String),
    Data(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) => m,
        }
    }
}

/// Errors caused by the requested parameters rather than the input data.
fn classify(e: Error) -> CliError {
    match e {
        Error::ReductionTooLarge { .. }
        | Error::InstanceTooLarge { .. }
        | Error::InvalidSchedule(_)
        | Error::MissingImportance
        | Error::KeysRequired => CliError::Usage(e.to_string()),
        other => CliError::Data(other.to_string()),
    }
}

fn usage(e: Error) -> CliError {
    CliError::Usage(e.to_string())
}

#[derive(Debug, Parser)]
#[command(
    name = "cgmatch",
    version,
    about = "Token matching, expectation analysis and FLOPs accounting"
)]
struct Cli {
    /// Write the report to this file instead of standard output.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Match tokens from an embedding or similarity file.
    Match(MatchArgs),
    /// Closed-form optimal-match probabilities.
    Expect(ExpectArgs),
    /// Monte Carlo estimate of an optimal-match probability.
    Simulate(SimulateArgs),
    /// Halving reduction schedule.
    Schedule(ScheduleArgs),
    /// Analytic FLOPs of a model configuration.
    Flops(FlopsArgs),
    /// Wall time of complete-graph matching across sizes.
    Bench(BenchArgs),
    /// Layer-by-layer reduction following a schedule.
    Reduce(ReduceArgs),
}

#[derive(Debug, clap::Args)]
struct MatchArgs {
    /// Binary CGET file or CSV with one token per line.
    #[arg(long)]
    input: PathBuf,
    /// cgsm, cgsm-guided, bipartite, greedy, kmeans, random or oracle.
    #[arg(long, default_value = "cgsm")]
    method: Method,
    #[arg(long)]
    r: usize,
    /// Importance scores, one per token (cgsm-guided only).
    #[arg(long)]
    importance: Option<PathBuf>,
    /// Comma-separated token indices that are never merged.
    #[arg(long, value_delimiter = ',')]
    protect: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// K-means iterations.
    #[arg(long, default_value_t = 10)]
    iterations: usize,
    /// Record wall time in the report.
    #[arg(long)]
    timing: bool,
}

#[derive(Debug, clap::Args)]
struct ExpectArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    layers: usize,
    #[arg(long)]
    r: usize,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SimArg {
    Cgsm,
    Bipartite,
}

#[derive(Debug, clap::Args)]
struct SimulateArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    layers: usize,
    #[arg(long)]
    r: usize,
    #[arg(long, default_value_t = 100_000)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "cgsm")]
    method: SimArg,
}

#[derive(Debug, clap::Args)]
struct ScheduleArgs {
    #[arg(long)]
    n0: usize,
    #[arg(long)]
    layers: usize,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Preset {
    Clip,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MacArg {
    Single,
    Double,
}

#[derive(Debug, clap::Args)]
#[command(group(clap::ArgGroup::new("model").required(true).args(["config", "preset"])))]
struct FlopsArgs {
    /// JSON model description.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    /// Override how multiply-accumulates are counted.
    #[arg(long, value_enum)]
    mac: Option<MacArg>,
    /// Treat every branch as unreduced.
    #[arg(long)]
    no_reduction: bool,
}

#[derive(Debug, clap::Args)]
struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_value = "64,128,256,512,1024")]
    sizes: Vec<usize>,
    #[arg(long, default_value_t = 64)]
    dim: usize,
    #[arg(long, default_value_t = 5)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, clap::Args)]
struct ReduceArgs {
    /// Token file; synthetic Gaussian tokens when omitted.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, default_value_t = 197)]
    n0: usize,
    #[arg(long, default_value_t = 64)]
    dim: usize,
    #[arg(long, default_value_t = 12)]
    layers: usize,
    /// Constant per-layer reduction; defaults to the halving schedule.
    #[arg(long)]
    r: Option<usize>,
    #[arg(long, default_value = "cgsm")]
    method: Method,
    /// Leading tokens that are never merged.
    #[arg(long, default_value_t = 0)]
    protect_prefix: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    iterations: usize,
    #[arg(long)]
    timing: bool,
}

/// Model file for `flops --config`: a model plus optional per-branch
/// reduction counts (`null` for the default schedule).
#[derive(Debug, Deserialize, Serialize)]
struct FlopsConfigFile {
    #[serde(flatten)]
    model: ModelConfig,
    #[serde(default)]
    schedules: Vec<Option<Vec<usize>>>,
}

fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn read_text(path: &Path) -> Result<String, CliError> {
    String::from_utf8(read(path)?).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn data_in(path: &Path) -> impl Fn(Error) -> CliError + '_ {
    move |e| CliError::Data(format!("{}: {e}", path.display()))
}

fn to_json<T: Serialize>(command: &str, result: T) -> Result<String, CliError> {
    let mut text = serde_json::to_string_pretty(&Envelope::new(command, result))
        .map_err(|e| CliError::Data(e.to_string()))?;
    text.push('\n');
    Ok(text)
}

fn cmd_match(a: &MatchArgs) -> Result<String, CliError> {
    if !a.protect.is_empty() && !a.method.supports_protection() {
        return Err(CliError::Usage(format!(
            "--protect is not supported by {}",
            a.method
        )));
    }
    if a.importance.is_some() != (a.method == Method::CrossGuided) {
        return Err(CliError::Usage(
            "--importance is required by, and only valid with, cgsm-guided".into(),
        ));
    }
    let payload = load_payload(&read(&a.input)?).map_err(data_in(&a.input))?;
    let n = payload.n();
    let importance = match &a.importance {
        Some(path) => {
            let scores = parse_importance(&read_text(path)?).map_err(data_in(path))?;
            if scores.len() != n {
                return Err(CliError::Data(format!(
                    "{}: {} importance scores for {n} tokens",
                    path.display(),
                    scores.len()
                )));
            }
            Some(scores)
        }
        None => None,
    };
    if let Some(&bad) = a.protect.iter().find(|&&i| i >= n) {
        return Err(CliError::Usage(format!(
            "protected index {bad} out of range for {n} tokens"
        )));
    }
    let opts = ReductionOptions {
        importance,
        ..Default::default()
    }
    .with_protected(a.protect.iter().copied());
    let (keys, input) = match &payload {
        Payload::Embeddings(t) => (
            Keys::Embeddings(t),
            InputSummary {
                kind: InputKind::Embeddings,
                n,
                dim: t.dim(),
            },
        ),
        Payload::Similarity(s) => (
            Keys::Similarity(s),
            InputSummary {
                kind: InputKind::Similarity,
                n,
                dim: n,
            },
        ),
    };
    let settings = MatcherSettings {
        seed: a.seed,
        kmeans_iterations: a.iterations,
    };
    let started = Instant::now();
    let outcome = run_matcher(a.method, keys, a.r, &opts, &settings).map_err(classify)?;
    let elapsed = started.elapsed().as_micros() as u64;
    to_json(
        "match",
        RunReport {
            method: a.method,
            input,
            n,
            r: outcome.plan.r(),
            seed: a.seed,
            protected: opts.protected.iter().copied().collect(),
            pairs: outcome.plan.pairs().to_vec(),
            stacks: outcome.stacks.groups().to_vec(),
            objective: outcome.objective,
            degenerate_fallbacks: outcome.plan.degenerate_fallbacks(),
            timing_us: a.timing.then_some(elapsed),
        },
    )
}

fn cmd_expect(a: &ExpectArgs) -> Result<String, CliError> {
    let c = expectation_cgsm(a.n, a.layers, a.r).map_err(usage)?;
    let b = expectation_bipartite(a.n, a.layers, a.r).map_err(usage)?;
    to_json(
        "expect",
        ExpectReport {
            n: a.n,
            layers: a.layers,
            r: a.r,
            complete_graph: c,
            bipartite: b,
            difference: c - b,
        },
    )
}

fn cmd_simulate(a: &SimulateArgs) -> Result<String, CliError> {
    let (method, name, closed) = match a.method {
        SimArg::Cgsm => (
            SimMethod::CompleteGraph,
            "cgsm",
            expectation_cgsm(a.n, a.layers, a.r),
        ),
        SimArg::Bipartite => (
            SimMethod::Bipartite,
            "bipartite",
            expectation_bipartite(a.n, a.layers, a.r),
        ),
    };
    let closed_form = closed.map_err(usage)?;
    let estimate =
        simulate_optimal_match_rate(a.n, a.layers, a.r, a.trials, a.seed, method).map_err(usage)?;
    to_json(
        "simulate",
        SimulateReport {
            n: a.n,
            layers: a.layers,
            r: a.r,
            method: name.into(),
            trials: a.trials,
            seed: a.seed,
            estimate,
            closed_form,
            abs_error: (estimate - closed_form).abs(),
        },
    )
}

fn cmd_schedule(a: &ScheduleArgs) -> Result<String, CliError> {
    let s = halving_schedule(a.n0, a.layers).map_err(usage)?;
    to_json(
        "schedule",
        ScheduleReport {
            n0: s.n0,
            layers: s.layers,
            final_tokens: s.final_tokens(),
            effective_r_per_layer: s.effective_r_per_layer(),
            effective_final_tokens: s.effective_final_tokens(),
            r_per_layer: s.r_per_layer,
        },
    )
}

fn cmd_flops(a: &FlopsArgs) -> Result<String, CliError> {
    let (mut model, schedules) = match (&a.config, a.preset) {
        (Some(path), _) => {
            let file: FlopsConfigFile = serde_json::from_str(&read_text(path)?)
                .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
            if !file.schedules.is_empty() && file.schedules.len() != file.model.branches.len() {
                return Err(CliError::Data(format!(
                    "{}: {} schedules for {} branches",
                    path.display(),
                    file.schedules.len(),
                    file.model.branches.len()
                )));
            }
            let schedules = file
                .schedules
                .into_iter()
                .zip(&file.model.branches)
                .map(|(s, b)| s.map(|r| ScheduleConfig::new(b.tokens, r)).transpose())
                .collect::<Result<Vec<_>, _>>()
                .map_err(data_in(path))?;
            (file.model, schedules)
        }
        (None, Some(Preset::Clip)) => (ModelConfig::clip_like(), Vec::new()),
        (None, None) => unreachable!("clap enforces the model group"),
    };
    match a.mac {
        Some(MacArg::Single) => model.mac_counting = cgmatch::analysis::MacCounting::Single,
        Some(MacArg::Double) => model.mac_counting = cgmatch::analysis::MacCounting::Double,
        None => {}
    }
    let schedules = if a.no_reduction {
        model.branches.iter_mut().for_each(|b| b.reduced = false);
        Vec::new()
    } else {
        schedules
    };
    let detail = flops_estimate(&model, &schedules).map_err(classify)?;
    to_json(
        "flops",
        FlopsSummary {
            mac_counting: model.mac_counting,
            total_gflops: detail.total_gflops(),
            baseline_gflops: detail.baseline_gflops(),
            reduction_fraction: detail.reduction_fraction,
            detail,
        },
    )
}

fn cmd_bench(a: &BenchArgs) -> Result<String, CliError> {
    if a.sizes.iter().any(|&n| n < 2) {
        return Err(CliError::Usage("bench sizes must be at least 2".into()));
    }
    let points = bench_complete_graph(&a.sizes, a.dim, a.reps, a.seed).map_err(usage)?;
    let slope = |f: fn(&cgmatch::analysis::BenchPoint) -> f64| {
        loglog_slope(&points.iter().map(|p| (p.n as f64, f(p))).collect::<Vec<_>>())
    };
    to_json(
        "bench",
        BenchReport {
            dim: a.dim,
            reps: a.reps,
            seed: a.seed,
            loglog_slope_best: slope(|p| p.best_us),
            loglog_slope_median: slope(|p| p.median_us),
            points,
        },
    )
}

fn cmd_reduce(a: &ReduceArgs) -> Result<String, CliError> {
    let source = match &a.input {
        Some(path) => match load_payload(&read(path)?).map_err(data_in(path))? {
            Payload::Embeddings(t) => TokenSource::Provided(t),
            Payload::Similarity(_) => {
                return Err(CliError::Usage(
                    "reduce needs token embeddings, not similarities".into(),
                ))
            }
        },
        None => TokenSource::Synthetic {
            n_tokens: a.n0,
            dim: a.dim,
            seed: a.seed,
        },
    };
    let n0 = match &source {
        TokenSource::Provided(t) => t.n_tokens(),
        TokenSource::Synthetic { n_tokens, .. } => *n_tokens,
    };
    let schedule = match a.r {
        Some(r) => ScheduleConfig::constant(n0, a.layers, r),
        None => halving_schedule(n0, a.layers),
    }
    .map_err(usage)?;
    let cfg = LayeredRunConfig {
        protect_prefix: a.protect_prefix,
        seed: a.seed,
        kmeans_iterations: a.iterations,
        record_timing: a.timing,
        ..LayeredRunConfig::new(a.method, schedule)
    };
    let run = layered_reduction_run(&source, &cfg).map_err(classify)?;
    to_json("reduce", run.report)
}

fn dispatch(cli: &Cli) -> Result<String, CliError> {
    match &cli.command {
        Command::Match(a) => cmd_match(a),
        Command::Expect(a) => cmd_expect(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Schedule(a) => cmd_schedule(a),
        Command::Flops(a) => cmd_flops(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Reduce(a) => cmd_reduce(a),
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code. Reports go to `out`, diagnostics to `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = err.write_all(text.as_bytes());
                EXIT_USAGE
            } else {
                let _ = out.write_all(text.as_bytes());
                EXIT_OK
            };
        }
    };
    let result = dispatch(&cli).and_then(|text| match &cli.output {
        Some(path) => fs::write(path, text).map_err(|e| CliError::Data(format!("{}: {e}", path.display()))),
        None => out
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Data(e.to_string())),
    });
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {}", e.message());
            e.code()
        }
    }
}
