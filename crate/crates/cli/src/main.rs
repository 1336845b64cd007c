mod config;
mod output;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use photonfilter::ensemble::{run_ensemble, EnsembleSpec};
use photonfilter::homodyne::{replay_homodyne, simulate_homodyne, FilterOptions};
use photonfilter::master::integrate_master_with;
use photonfilter::photocount::{replay_photocount, simulate_photocount, COARSE_STEP_PROBABILITY};
use photonfilter::validate;
use thiserror::Error;

use crate::config::{ConfigError, RunConfig};
use crate::output::Sink;

#[derive(Parser)]
#[command(name = "photonfilter", version, about = "Master equations and quantum filters for systems driven by n-photon wavepackets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the deterministic hierarchy and write every component.
    Master(Source),
    /// Filter one homodyne record, simulated or replayed.
    FilterHomodyne(Filter),
    /// Filter one photon-counting record, simulated or replayed.
    FilterPhotocount(Filter),
    /// Average many simulated trajectories and compare with the master equation.
    Ensemble(EnsembleArgs),
    /// Run the internal consistency checks.
    Validate {
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

#[derive(Args)]
struct Source {
    /// Run configuration file.
    #[arg(long, required_unless_present = "preset", conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in experiment, atom-2photon-a … atom-2photon-d.
    #[arg(long)]
    preset: Option<String>,
    /// Output CSV (stdout if omitted). A `.meta` sidecar is written next to it.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Divide every component by the top trace after each filter step.
    #[arg(long)]
    renormalize: bool,
}

#[derive(Args)]
struct Filter {
    #[command(flatten)]
    source: Source,
    /// Noise seed, overriding `detection.seed`.
    #[arg(long, conflicts_with = "replay")]
    seed: Option<u64>,
    /// Measurement record to filter: one dY per step (homodyne) or one
    /// detection time per line (counting).
    #[arg(long)]
    replay: Option<PathBuf>,
}

#[derive(Args)]
struct EnsembleArgs {
    #[command(flatten)]
    source: Source,
    /// Base seed, overriding `detection.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Trajectory count, overriding `detection.N`.
    #[arg(long)]
    trajectories: Option<usize>,
}

/// Problems with the invocation or its inputs, as opposed to the run itself.
#[derive(Debug, Error)]
enum UsageError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{path}:{line}: {reason}")]
    Record { path: PathBuf, line: usize, reason: String },
    #[error("{0}")]
    Other(String),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            let usage = e.downcast_ref::<UsageError>().is_some()
                || matches!(
                    e.downcast_ref::<photonfilter::Error>(),
                    Some(photonfilter::Error::ReplayLength { .. } | photonfilter::Error::InvalidArgument(_))
                );
            ExitCode::from(if usage { 2 } else { 1 })
        }
    }
}

/// `PHOTONFILTER_THREADS` caps the worker pool; 0 or unset means automatic.
fn configure_threads() -> Result<(), UsageError> {
    let Ok(value) = std::env::var("PHOTONFILTER_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .map_err(|_| UsageError::Other(format!("PHOTONFILTER_THREADS must be a non-negative integer, got {value:?}")))?;
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| UsageError::Other(e.to_string()))?;
    }
    Ok(())
}

fn load(source: &Source) -> Result<RunConfig, UsageError> {
    Ok(match (&source.config, &source.preset) {
        (Some(path), _) => RunConfig::from_file(path)?,
        (None, Some(name)) => RunConfig::from_preset(name)?,
        (None, None) => return Err(UsageError::Other("either --config or --preset is required".into())),
    })
}

fn options(source: &Source) -> FilterOptions {
    FilterOptions { renormalize: source.renormalize }
}

fn run(command: Command) -> anyhow::Result<ExitCode> {
    match command {
        Command::Master(source) => master(&source),
        Command::FilterHomodyne(args) => filter_homodyne(&args),
        Command::FilterPhotocount(args) => filter_photocount(&args),
        Command::Ensemble(args) => ensemble(&args),
        Command::Validate { seed } => validate(seed),
    }
}

fn master(source: &Source) -> anyhow::Result<ExitCode> {
    let config = load(source)?;
    let started = Instant::now();
    let photons = config.photons()?;
    let mut sink = Sink::open(source.out.as_deref())?;
    output::master_header(&mut sink, &config.labels())?;
    let mut written = Ok(());
    let steps = photonfilter::master::step_count(config.t_final, config.dt)?;
    integrate_master_with(&config.model, &photons, config.t_final, config.dt, |m, t, h| {
        if written.is_ok() && (m % config.stride == 0 || m == steps) {
            written = output::master_rows(&mut sink, t, h, &config.observables);
        }
    })?;
    written?;
    sink.finish()?;
    write_sidecar(source.out.as_deref(), &config, started, &[])?;
    Ok(ExitCode::SUCCESS)
}

fn filter_homodyne(args: &Filter) -> anyhow::Result<ExitCode> {
    let mut config = load(&args.source)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let started = Instant::now();
    let photons = config.photons()?;
    let observables = config.observable_matrices();
    let record = match &args.replay {
        Some(path) => {
            let dy = read_numbers(path)?;
            replay_homodyne(&config.model, &photons, &observables, &dy, config.t_final, config.dt, options(&args.source))?
        }
        None => simulate_homodyne(
            &config.model,
            &photons,
            &observables,
            config.t_final,
            config.dt,
            config.seed,
            options(&args.source),
        )?,
    };
    let mut sink = Sink::open(args.source.out.as_deref())?;
    output::trajectory(&mut sink, &record, &config.labels(), config.stride)?;
    sink.finish()?;
    let mut meta = vec![
        format!("renormalizations = {}", record.stats.renormalizations),
        format!("max_gain_imag = {:e}", record.stats.max_gain_imag),
    ];
    if let Some(path) = &args.replay {
        meta.push(format!("replay = {}", path.display()));
    }
    write_sidecar(args.source.out.as_deref(), &config, started, &meta)?;
    Ok(ExitCode::SUCCESS)
}

fn filter_photocount(args: &Filter) -> anyhow::Result<ExitCode> {
    let mut config = load(&args.source)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let started = Instant::now();
    let photons = config.photons()?;
    let observables = config.observable_matrices();
    let record = match &args.replay {
        Some(path) => {
            let times = read_numbers(path)?;
            replay_photocount(&config.model, &photons, &observables, &times, config.t_final, config.dt, options(&args.source))?
        }
        None => simulate_photocount(
            &config.model,
            &photons,
            &observables,
            config.t_final,
            config.dt,
            config.seed,
            options(&args.source),
        )?,
    };
    if record.max_jump_probability > COARSE_STEP_PROBABILITY {
        eprintln!(
            "warning: detection probability per step reached {:.3} (above {COARSE_STEP_PROBABILITY}); consider a smaller time.dt",
            record.max_jump_probability
        );
    }
    let mut sink = Sink::open(args.source.out.as_deref())?;
    output::jumps(&mut sink, &record, &config.labels(), config.stride)?;
    sink.finish()?;
    let mut meta = vec![
        format!("detections = {}", record.jump_times.len()),
        format!("max_jump_probability = {:e}", record.max_jump_probability),
    ];
    if let Some(path) = &args.replay {
        meta.push(format!("replay = {}", path.display()));
    }
    write_sidecar(args.source.out.as_deref(), &config, started, &meta)?;
    Ok(ExitCode::SUCCESS)
}

fn ensemble(args: &EnsembleArgs) -> anyhow::Result<ExitCode> {
    let mut config = load(&args.source)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(n) = args.trajectories {
        if n == 0 {
            return Err(UsageError::Other("--trajectories must be at least 1".into()).into());
        }
        config.trajectories = n;
    }
    let started = Instant::now();
    let photons = config.photons()?;
    let mut spec = EnsembleSpec::new(config.detection, config.trajectories, config.seed).with_stride(config.stride);
    spec.options = options(&args.source);
    for (label, x) in &config.observables {
        spec = spec.observe(label.clone(), x.clone());
    }
    let summary = run_ensemble(&spec, &config.model, &photons, config.t_final, config.dt)?;
    let mut sink = Sink::open(args.source.out.as_deref())?;
    output::summary(&mut sink, &summary)?;
    sink.finish()?;

    let mut meta = vec![
        format!("completed = {}", summary.completed),
        format!("failures = {}", summary.failures.len()),
        format!("component_distance = {:e}", summary.component_distance),
    ];
    for (label, d) in summary.labels.iter().zip(&summary.sup_distance) {
        meta.push(format!("sup_distance.{label} = {d:e}"));
    }
    if let Some(mean) = summary.mean_count() {
        meta.push(format!("mean_count = {mean}"));
    }
    for (seed, reason) in &summary.failures {
        eprintln!("warning: trajectory with seed {seed} aborted: {reason}");
        meta.push(format!("failed_seed.{seed} = {reason}"));
    }
    write_sidecar(args.source.out.as_deref(), &config, started, &meta)?;
    Ok(ExitCode::SUCCESS)
}

fn validate(seed: u64) -> anyhow::Result<ExitCode> {
    let checks = validate::run_all(seed)?;
    let mut stdout = std::io::stdout().lock();
    for c in &checks {
        writeln!(stdout, "{c}")?;
    }
    let failed = checks.iter().filter(|c| !c.passed()).count();
    writeln!(stdout, "{} checks, {failed} failed", checks.len())?;
    Ok(if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

/// One number per non-empty, non-comment line; a leading non-numeric header
/// line is skipped.
fn read_numbers(path: &Path) -> anyhow::Result<Vec<f64>> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let mut values = Vec::new();
    let mut seen_content = false;
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        match line.parse::<f64>() {
            Ok(v) => values.push(v),
            Err(_) if !seen_content => {}
            Err(_) => {
                bail!(UsageError::Record { path: path.to_owned(), line: i + 1, reason: format!("expected a number, got {line:?}") })
            }
        }
        seen_content = true;
    }
    Ok(values)
}

/// Next to `out`, writes the fully expanded configuration followed by run
/// metadata as comments, so the file can be fed back through `--config`.
fn write_sidecar(out: Option<&Path>, config: &RunConfig, started: Instant, extra: &[String]) -> anyhow::Result<()> {
    let Some(out) = out else {
        return Ok(());
    };
    let mut text = config.to_text();
    text.push_str(&format!("# wall_time_s = {:.3}\n", started.elapsed().as_secs_f64()));
    for line in extra {
        text.push_str(&format!("# {line}\n"));
    }
    let path = output::sidecar_path(out);
    fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}
