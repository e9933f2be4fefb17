use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use leader_core::metrics::{detection_latency, Latency, RunMetrics};
use leader_core::overhead::{self, Format};
use leader_core::sim::{self, Scenario, SimError};
use leader_core::sweep::{run_sweep, SweepError, SweepSpec, METRICS};

#[derive(Parser)]
#[command(name = "leader", version, about = "RPL rank attack detection simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutFormat {
    Text,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one scenario and write its trace and metrics.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        /// Overrides the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a parameter sweep and write one CSV per metric.
    Sweep {
        #[arg(long)]
        sweep: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the closed-form overhead tables and tolerance report.
    Overhead {
        #[arg(long, default_value_t = 50)]
        n: u64,
        #[arg(long, default_value_t = 5)]
        d: u64,
        #[arg(long, default_value_t = 2)]
        m: u64,
        #[arg(long, default_value_t = 3)]
        depth: u32,
        #[arg(long, value_enum, default_value_t = OutFormat::Text)]
        format: OutFormat,
    },
}

/// Errors that map to a specific exit status.
#[derive(Debug)]
enum Failure {
    Config(String),
    Disconnected(String),
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Config(m) | Failure::Disconnected(m) => f.write_str(m),
        }
    }
}

impl std::error::Error for Failure {}

const EXIT_CONFIG: u8 = 2;
const EXIT_DISCONNECTED: u8 = 3;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            match e.downcast_ref::<Failure>() {
                Some(Failure::Config(_)) => ExitCode::from(EXIT_CONFIG),
                Some(Failure::Disconnected(_)) => ExitCode::from(EXIT_DISCONNECTED),
                None => ExitCode::FAILURE,
            }
        }
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Run { scenario, seed, out } => cmd_run(&scenario, seed, &out),
        Command::Sweep { sweep, out } => cmd_sweep(&sweep, &out),
        Command::Overhead { n, d, m, depth, format } => {
            let format = match format {
                OutFormat::Text => Format::Text,
                OutFormat::Csv => Format::Csv,
            };
            let text = overhead::render(n, d, m, depth, format).map_err(|e| Failure::Config(e.to_string()))?;
            print!("{text}");
            Ok(())
        }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn sim_failure(e: SimError) -> anyhow::Error {
    match e {
        SimError::DisconnectedRoot => Failure::Disconnected(e.to_string()).into(),
        SimError::Scenario(inner) => Failure::Config(format!("invalid scenario: {inner}")).into(),
    }
}

fn cmd_run(path: &Path, seed: Option<u64>, out: &Path) -> Result<()> {
    let text = read(path)?;
    let mut sc = Scenario::from_json(&text)
        .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    if let Some(s) = seed {
        sc.seed = s;
    }
    let name = if sc.name.is_empty() {
        path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
    } else {
        sc.name.clone()
    };
    log::info!("running {name} with seed {}", sc.seed);
    let result = sim::run(&sc).map_err(sim_failure)?;
    let metrics = RunMetrics::from_output(&result);

    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    write(&out.join("trace.jsonl"), result.trace.to_jsonl())?;

    let mut csv = String::from("scenario,metric,value\n");
    for (metric, value) in metrics.named() {
        csv.push_str(&format!("{name},{metric},{value}\n"));
    }
    write(&out.join("metrics.csv"), csv)?;

    let latency: serde_json::Map<String, serde_json::Value> = detection_latency(&result.trace, &result.truth)
        .into_iter()
        .map(|(node, l)| {
            let v = match l {
                Latency::Detected(t) => json!(t.as_secs()),
                Latency::NotDetected => json!("not_detected"),
            };
            (node.to_string(), v)
        })
        .collect();
    let summary = json!({
        "scenario": name,
        "seed": sc.seed,
        "metrics": metrics.named().into_iter().map(|(k, v)| (k.to_string(), json!(v))).collect::<serde_json::Map<_, _>>(),
        "attackers": result.truth.attackers,
        "detected": result.detector.malicious(),
        "latency_s": latency,
        "nodes": result.nodes,
    });
    write(&out.join("summary.json"), serde_json::to_string_pretty(&summary)? + "\n")?;
    println!(
        "{name}: accuracy {:.4}, {} node(s) flagged, {} attacker(s)",
        metrics.accuracy, metrics.detected, metrics.attackers
    );
    Ok(())
}

fn cmd_sweep(path: &Path, out: &Path) -> Result<()> {
    let text = read(path)?;
    let spec: SweepSpec = serde_json::from_str(&text)
        .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    let result = run_sweep(&spec).map_err(|e| match e {
        SweepError::Run { source, .. } => sim_failure(source),
        other => Failure::Config(other.to_string()).into(),
    })?;

    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    for metric in METRICS {
        write(&out.join(format!("{metric}.csv")), result.metric_csv(metric))?;
    }
    let trends = result.trends();
    let summary = json!({
        "variable": result.variable,
        "runs_per_point": spec.runs_per_point,
        "master_seed": spec.master_seed,
        "points": spec.values,
        "metrics": result.summary(),
        "trends": trends,
    });
    write(&out.join("summary.json"), serde_json::to_string_pretty(&summary)? + "\n")?;
    for t in &trends {
        println!("trend {} {:?}: {} inversion(s)", t.metric, t.direction, t.inversions);
    }
    Ok(())
}
