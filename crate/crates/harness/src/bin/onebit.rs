use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use onebit_core::altopt::design_pair;
use onebit_core::mimo::{generate_rayleigh_channel, linear_to_db, ComplexChannel, SnrContext};
use onebit_core::spectral::AnnealSchedule;
use onebit_harness::error::ErrorReport;
use onebit_harness::spec::{BackendKind, ExperimentKind, ExperimentSpec};
use onebit_harness::{emit_plot_data, run_experiment, write_outputs, HarnessError, Result};
use serde_json::{json, Map, Value};

#[derive(Parser)]
#[command(
    name = "onebit",
    version,
    about = "One-bit MIMO pre/post-coder design and experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Design a coding pair for one channel and print it with its SNR.
    Design(DesignArgs),
    /// Mean SNR of ES, the alternating design and the RQ baseline versus power.
    Sweep(ExperimentArgs),
    /// Solution histograms of one precoder QUBO with and without companding.
    Histogram(ExperimentArgs),
    /// Distinct-solution and ground-state statistics over Gaussian QUBOs.
    Companding(ExperimentArgs),
    /// Minimum spectral gaps with and without companding.
    Gap(ExperimentArgs),
    /// Time to solution versus problem size.
    Tts(ExperimentArgs),
    /// Run any experiment described by a JSON spec.
    Run(ExperimentArgs),
    /// Channel utilities.
    #[command(subcommand)]
    Channel(ChannelCommand),
}

#[derive(Subcommand)]
enum ChannelCommand {
    /// Draw a Rayleigh channel.
    Gen {
        #[arg(long)]
        n_tx: usize,
        #[arg(long)]
        n_rx: usize,
        #[arg(long)]
        seed: u64,
        /// Write the channel JSON here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print a stored channel.
    Show { file: PathBuf },
}

#[derive(Args)]
struct AltOptArgs {
    #[arg(long)]
    restarts: Option<usize>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    rel_tol: Option<f64>,
    #[arg(long, value_parser = parse_backend)]
    backend: Option<BackendKind>,
    #[arg(long)]
    anneals: Option<usize>,
    #[arg(long)]
    sweeps: Option<usize>,
    #[arg(long)]
    noise_sigma: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
}

#[derive(Args)]
struct DesignArgs {
    /// Channel JSON; drawn from --n-tx/--n-rx/--seed when absent.
    #[arg(long)]
    channel: Option<PathBuf>,
    #[arg(long, default_value_t = 2)]
    n_tx: usize,
    #[arg(long)]
    n_rx: Option<usize>,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    power_db: f64,
    #[arg(long, default_value_t = 1.0)]
    noise_var: f64,
    /// Write the per-iteration trace as JSON lines.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[command(flatten)]
    altopt: AltOptArgs,
}

#[derive(Args)]
struct ExperimentArgs {
    /// JSON spec; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default `results/<kind>`).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    n_tx: Option<usize>,
    #[arg(long)]
    n_rx: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    powers_db: Option<Vec<f64>>,
    #[arg(long)]
    noise_var: Option<f64>,
    #[arg(long)]
    ensemble_size: Option<usize>,
    #[arg(long)]
    qubits: Option<usize>,
    #[arg(long)]
    grid_points: Option<usize>,
    /// Tabulated schedule CSV with columns s, A, B.
    #[arg(long)]
    schedule: Option<PathBuf>,
    #[arg(long)]
    min_distinct: Option<usize>,
    #[arg(long)]
    anneal_time_us: Option<f64>,
    #[arg(long)]
    es_cap_bits: Option<usize>,
    /// Recorded verbatim in the bundle provenance.
    #[arg(long)]
    timestamp: Option<String>,
    #[command(flatten)]
    altopt: AltOptArgs,
}

fn parse_backend(s: &str) -> std::result::Result<BackendKind, String> {
    match s {
        "exact" => Ok(BackendKind::Exact),
        "annealed" => Ok(BackendKind::Annealed),
        other => Err(format!("unknown backend `{other}` (exact | annealed)")),
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| HarnessError::Io {
        path: path.display().to_string(),
        source: e,
    })
}

fn spec_error(field: &str, reason: impl Into<String>) -> HarnessError {
    HarnessError::Spec {
        field: field.into(),
        reason: reason.into(),
    }
}

fn set<T: serde::Serialize>(obj: &mut Map<String, Value>, key: &str, v: &Option<T>) {
    if let Some(v) = v {
        obj.insert(key.into(), serde_json::to_value(v).expect("flag values serialize"));
    }
}

fn nested<T: serde::Serialize>(obj: &mut Map<String, Value>, section: &str, key: &str, v: &Option<T>) {
    if v.is_some() {
        let entry = obj.entry(section).or_insert_with(|| json!({}));
        if let Value::Object(m) = entry {
            set(m, key, v);
        }
    }
}

fn apply_altopt(obj: &mut Map<String, Value>, a: &AltOptArgs) {
    nested(obj, "altopt", "restarts", &a.restarts);
    nested(obj, "altopt", "max_iters", &a.max_iters);
    nested(obj, "altopt", "rel_tol", &a.rel_tol);
    nested(obj, "altopt", "backend", &a.backend);
    nested(obj, "solver", "num_anneals", &a.anneals);
    nested(obj, "solver", "sweeps_per_anneal", &a.sweeps);
    nested(obj, "solver", "noise_sigma", &a.noise_sigma);
    set(obj, "mu", &a.mu);
}

/// Config file first, then flags; the verb fixes the kind.
fn build_spec(kind: Option<ExperimentKind>, a: &ExperimentArgs) -> Result<ExperimentSpec> {
    let mut value = match &a.config {
        Some(path) => serde_json::from_str::<Value>(&read(path)?).map_err(|e| spec_error("", e.to_string()))?,
        None => json!({}),
    };
    let obj = value
        .as_object_mut()
        .ok_or_else(|| spec_error("", "config must be a JSON object"))?;
    if let Some(kind) = kind {
        let name = Value::String(kind.name().into());
        match obj.get("kind") {
            Some(existing) if *existing != name => {
                return Err(spec_error(
                    "kind",
                    format!("config is {existing}, command expects {name}"),
                ));
            }
            _ => {
                obj.insert("kind".into(), name);
            }
        }
    }
    set(obj, "seed", &a.seed);
    set(obj, "output_dir", &a.out);
    set(obj, "n_tx", &a.n_tx);
    set(obj, "n_rx", &a.n_rx);
    set(obj, "sizes", &a.sizes);
    set(obj, "powers_db", &a.powers_db);
    set(obj, "noise_var", &a.noise_var);
    set(obj, "ensemble_size", &a.ensemble_size);
    set(obj, "qubits", &a.qubits);
    set(obj, "grid_points", &a.grid_points);
    set(obj, "min_distinct", &a.min_distinct);
    set(obj, "anneal_time_us", &a.anneal_time_us);
    set(obj, "es_cap_bits", &a.es_cap_bits);
    set(obj, "timestamp", &a.timestamp);
    if let Some(path) = &a.schedule {
        let schedule = AnnealSchedule::from_csv(&read(path)?)?;
        set(obj, "schedule", &Some(schedule));
    }
    apply_altopt(obj, &a.altopt);
    ExperimentSpec::from_json(&value.to_string())
}

fn experiment(kind: Option<ExperimentKind>, a: &ExperimentArgs) -> Result<Value> {
    let spec = build_spec(kind, a)?;
    spec.validate()?;
    let dir = spec
        .output_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from("results").join(spec.kind.name()));
    let bundle = run_experiment(&spec)?;
    let mut files = write_outputs(&bundle, &dir)?;
    files.extend(emit_plot_data(&bundle, spec.kind, &dir)?);
    Ok(json!({
        "kind": spec.kind.name(),
        "output_dir": dir,
        "files": files,
    }))
}

fn design(a: &DesignArgs) -> Result<Value> {
    let channel = match &a.channel {
        Some(path) => ComplexChannel::from_json(&read(path)?)?,
        None => generate_rayleigh_channel(a.n_tx, a.n_rx.unwrap_or(a.n_tx), a.seed)?,
    };
    let mut spec = json!({"kind": "snr-sweep", "seed": a.seed});
    apply_altopt(spec.as_object_mut().expect("object literal"), &a.altopt);
    let spec = ExperimentSpec::from_json(&spec.to_string())?;
    spec.validate()?;
    let ctx = SnrContext::from_db(a.power_db, a.noise_var)?;
    let (pair, trace) = design_pair(&channel, &ctx, &spec.altopt_config())?;
    if let Some(path) = &a.trace {
        fs::write(path, trace.to_json_lines()).map_err(|e| HarnessError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
    }
    Ok(json!({
        "f": pair.f,
        "g": pair.g,
        "snr": trace.best_snr,
        "snr_db": linear_to_db(trace.best_snr),
        "winner": trace.winner,
        "iterations": trace.restarts[trace.winner].iterations.len(),
    }))
}

fn channel(cmd: &ChannelCommand) -> Result<Option<Value>> {
    match cmd {
        ChannelCommand::Gen { n_tx, n_rx, seed, out } => {
            let h = generate_rayleigh_channel(*n_tx, *n_rx, *seed)?;
            match out {
                Some(path) => {
                    fs::write(path, h.to_json()).map_err(|e| HarnessError::Io {
                        path: path.display().to_string(),
                        source: e,
                    })?;
                    Ok(Some(json!({"written": path})))
                }
                None => {
                    println!("{}", h.to_json());
                    Ok(None)
                }
            }
        }
        ChannelCommand::Show { file } => {
            let h = ComplexChannel::from_json(&read(file)?)?;
            println!("{} x {} channel (rows: receive antennas)", h.n_rx(), h.n_tx());
            for r in 0..h.n_rx() {
                let cells: Vec<String> = (0..h.n_tx())
                    .map(|t| {
                        let z = h.get(r, t);
                        format!("{:+.4}{:+.4}j", z.re, z.im)
                    })
                    .collect();
                println!("  {}", cells.join("  "));
            }
            Ok(None)
        }
    }
}

fn dispatch(cli: &Cli) -> Result<Option<Value>> {
    match &cli.command {
        Command::Design(a) => design(a).map(Some),
        Command::Sweep(a) => experiment(Some(ExperimentKind::SnrSweep), a).map(Some),
        Command::Histogram(a) => experiment(Some(ExperimentKind::SolutionHistogram), a).map(Some),
        Command::Companding(a) => experiment(Some(ExperimentKind::CompandingStudy), a).map(Some),
        Command::Gap(a) => experiment(Some(ExperimentKind::GapStudy), a).map(Some),
        Command::Tts(a) => experiment(Some(ExperimentKind::TtsCurve), a).map(Some),
        Command::Run(a) => experiment(None, a).map(Some),
        Command::Channel(c) => channel(c),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let report = ErrorReport {
                error: "usage",
                message: e.to_string().trim_end().to_string(),
                field: None,
            };
            eprintln!("{}", serde_json::to_string(&report).expect("report serializes"));
            return ExitCode::from(2);
        }
    };
    match dispatch(&cli) {
        Ok(Some(v)) => {
            println!("{}", serde_json::to_string_pretty(&v).expect("summary serializes"));
            ExitCode::SUCCESS
        }
        Ok(None) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", serde_json::to_string(&e.report()).expect("report serializes"));
            ExitCode::FAILURE
        }
    }
}
