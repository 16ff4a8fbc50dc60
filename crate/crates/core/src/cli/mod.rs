//! Command-line entry point: collect -> train -> eval -> plot.

mod manifest;
mod plot;

pub use manifest::{append_manifest, read_manifest, ManifestEntry, MANIFEST_FILE};
pub use plot::{parse_csv, plot_file, render_line_chart, CsvTable};

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::diffusion::{load_policy, save_policy};
use crate::driveworld::{Scenario, TrafficDensity, WorldConfig};
use crate::error::{Error, Result};
use crate::eval::evaluate;
use crate::expert::{collect, CollectOptions, ExpertConfig, TrajectoryDataset};
use crate::trainer::{train, Ablation, TrainConfig};

const EXIT_CODE_HELP: &str = "EXIT CODES:
  0  success
  1  internal error
  2  usage or configuration error
  3  missing input file
  4  schema or dimension mismatch
  5  corrupt or malformed data
";

#[derive(Debug, Parser)]
#[command(
    name = "ddm-lag",
    version,
    about = "Diffusion driving policy with PID-Lagrangian safety: data collection, offline training, evaluation and plots",
    after_help = EXIT_CODE_HELP
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Master seed for the command's randomness.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// TOML config file (training hyperparameters).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory (created if missing); receives artifacts and the
    /// run manifest.
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,

    /// Suppress progress output.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Roll the scripted expert through a scenario and write a `.ddt`
    /// offline dataset.
    Collect(CollectArgs),
    /// Train a diffusion policy on a dataset; writes `policy.ckpt`,
    /// `critics.ckpt` and `report.csv`.
    Train(TrainArgs),
    /// Evaluate a policy checkpoint; writes `metrics.csv`.
    Eval(EvalArgs),
    /// Render SVG charts from a report or metrics CSV.
    Plot(PlotArgs),
}

#[derive(Debug, Args)]
struct CollectArgs {
    /// Scenario preset (straight_curve|intersection|long_route) or a path
    /// to a scenario .toml file.
    #[arg(long, default_value = "straight_curve")]
    scenario: String,

    /// Traffic density: none|low|high.
    #[arg(long, default_value = "low")]
    density: String,

    #[arg(long, default_value_t = 500)]
    episodes: usize,
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Input dataset (.ddt).
    #[arg(long)]
    dataset: PathBuf,

    /// Training variant: none|bc-only|no-lag.
    #[arg(long, default_value = "none")]
    ablation: String,

    /// Override the config's epoch count.
    #[arg(long)]
    epochs: Option<usize>,

    /// Override the config's batch size.
    #[arg(long)]
    batch_size: Option<usize>,

    /// Override the config's Q-guidance strength.
    #[arg(long)]
    eta: Option<f64>,

    /// Override the config's cost budget d.
    #[arg(long)]
    cost_limit: Option<f64>,

    /// Override the config's evaluation interval.
    #[arg(long)]
    eval_interval: Option<usize>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Policy checkpoint to evaluate.
    #[arg(long)]
    policy: PathBuf,

    /// Scenario preset or .toml path.
    #[arg(long, default_value = "straight_curve")]
    scenario: String,

    /// Traffic density: none|low|high.
    #[arg(long, default_value = "low")]
    density: String,

    #[arg(long, default_value_t = 20)]
    episodes: usize,

    /// Other metrics.csv files to place side by side in `comparison.csv`.
    #[arg(long)]
    compare: Vec<PathBuf>,
}

#[derive(Debug, Args)]
struct PlotArgs {
    /// Input CSV (a training report or an evaluation metrics file).
    #[arg(long)]
    input: PathBuf,
}

/// Entry point used by the binary; returns the process exit code.
pub fn main() -> i32 {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("ddm-lag: error[{}] {e}", error_kind(&e));
            exit_code(&e)
        }
    }
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound => "missing-input",
        Error::Io { .. } => "io",
        Error::Dimension(_) | Error::SchemaVersion { .. } => "schema-mismatch",
        Error::Corrupt { .. } | Error::Truncated { .. } | Error::Checksum { .. } => "corrupt-data",
        Error::Config(_) | Error::Argument(_) => "usage",
        _ => "internal",
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound => 3,
        Error::Dimension(_) | Error::SchemaVersion { .. } => 4,
        Error::Corrupt { .. } | Error::Truncated { .. } | Error::Checksum { .. } => 5,
        Error::Config(_) | Error::Argument(_) => 2,
        _ => 1,
    }
}

fn run(cli: Cli) -> Result<()> {
    std::fs::create_dir_all(&cli.out_dir)
        .map_err(|e| Error::io(cli.out_dir.display().to_string(), e))?;
    let started = Instant::now();
    let seed = cli.seed.unwrap_or(0);
    match &cli.command {
        Command::Collect(args) => cmd_collect(&cli, args, seed, started),
        Command::Train(args) => cmd_train(&cli, args, started),
        Command::Eval(args) => cmd_eval(&cli, args, seed, started),
        Command::Plot(args) => cmd_plot(&cli, args, started),
    }
}

fn say(cli: &Cli, msg: &str) {
    if !cli.quiet {
        eprintln!("{msg}");
    }
}

fn cmd_collect(cli: &Cli, args: &CollectArgs, seed: u64, started: Instant) -> Result<()> {
    let density = TrafficDensity::parse(&args.density)?;
    let scenario = Scenario::resolve(&args.scenario, density)?;
    let world_cfg = WorldConfig::default();
    let expert_cfg = ExpertConfig::default();
    let opts = CollectOptions::new(args.episodes, seed);

    say(
        cli,
        &format!(
            "collecting {} episodes on `{}` ({} traffic)...",
            args.episodes, scenario.name, density
        ),
    );
    let dataset = collect(&scenario, &world_cfg, &expert_cfg, &opts)?;
    for w in &dataset.meta.warnings {
        say(cli, &format!("warning: {w}"));
    }
    let out = cli.out_dir.join("data.ddt");
    dataset.save(&out)?;
    say(
        cli,
        &format!(
            "wrote {} ({} transitions, {} unsafe episodes)",
            out.display(),
            dataset.len(),
            dataset.meta.crash_episodes
        ),
    );

    append_manifest(
        &cli.out_dir,
        ManifestEntry {
            command: "collect".into(),
            config: serde_json::json!({
                "scenario": args.scenario,
                "density": args.density,
                "episodes": args.episodes,
                "world_config": world_cfg,
                "expert_config": expert_cfg,
            }),
            seed,
            artifacts: vec![out.display().to_string()],
            tool_version: env!("CARGO_PKG_VERSION").into(),
            duration_seconds: started.elapsed().as_secs_f64(),
        },
    )?;
    Ok(())
}

fn cmd_train(cli: &Cli, args: &TrainArgs, started: Instant) -> Result<()> {
    let dataset = TrajectoryDataset::load(&args.dataset)?;

    let mut config = match &cli.config {
        Some(path) => TrainConfig::load(path)?,
        None => TrainConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(epochs) = args.epochs {
        config.epochs = epochs;
    }
    if let Some(batch) = args.batch_size {
        config.batch_size = batch;
    }
    if let Some(eta) = args.eta {
        config.eta = eta;
    }
    if let Some(d) = args.cost_limit {
        config.cost_limit = d;
    }
    if let Some(interval) = args.eval_interval {
        config.eval_interval = interval;
    }
    let config = config.with_ablation(Ablation::parse(&args.ablation)?);
    config.validate()?;

    say(
        cli,
        &format!(
            "training on {} ({} transitions, scenario `{}`), {} epochs, ablation {}...",
            args.dataset.display(),
            dataset.len(),
            dataset.meta.scenario_name,
            config.epochs,
            config.ablation
        ),
    );
    let outputs = train(&dataset, &config)?;

    let policy_path = cli.out_dir.join("policy.ckpt");
    let critics_path = cli.out_dir.join("critics.ckpt");
    let report_path = cli.out_dir.join("report.csv");
    save_policy(&policy_path, &outputs.policy, Some(&outputs.policy_adam))?;
    crate::critics::save_critics(&critics_path, &outputs.critics)?;
    outputs.report.write_csv(&report_path)?;

    if let Some(last) = outputs.report.rows.last() {
        say(
            cli,
            &format!(
                "done: loss_bc {:.4}, lambda {:.4}, eval reward {:.1}, eval cost {:.3}",
                last.loss_bc, last.lambda, last.eval_mean_reward, last.eval_mean_cost
            ),
        );
    }

    append_manifest(
        &cli.out_dir,
        ManifestEntry {
            command: "train".into(),
            config: serde_json::to_value(&config)
                .map_err(|e| Error::Config(format!("config snapshot: {e}")))?,
            seed: config.seed,
            artifacts: vec![
                policy_path.display().to_string(),
                critics_path.display().to_string(),
                report_path.display().to_string(),
            ],
            tool_version: env!("CARGO_PKG_VERSION").into(),
            duration_seconds: started.elapsed().as_secs_f64(),
        },
    )?;
    Ok(())
}

fn cmd_eval(cli: &Cli, args: &EvalArgs, seed: u64, started: Instant) -> Result<()> {
    let (policy, _) = load_policy(&args.policy)?;
    let density = TrafficDensity::parse(&args.density)?;
    let scenario = Scenario::resolve(&args.scenario, density)?;
    let world_cfg = WorldConfig::default();

    say(
        cli,
        &format!(
            "evaluating {} over {} episodes on `{}` ({} traffic)...",
            args.policy.display(),
            args.episodes,
            scenario.name,
            density
        ),
    );
    let report = evaluate(&policy, &scenario, &world_cfg, args.episodes, seed)?;
    let metrics_path = cli.out_dir.join("metrics.csv");
    report.write_csv(&metrics_path)?;
    let agg = &report.aggregate;
    say(
        cli,
        &format!(
            "mean reward {:.1}, mean cost {:.3}, mean safe length {:.1} m, {} unsafe episodes",
            agg.mean_reward, agg.mean_cost, agg.mean_safe_length, agg.crash_episodes
        ),
    );

    let mut artifacts = vec![metrics_path.display().to_string()];
    if !args.compare.is_empty() {
        let comparison_path = cli.out_dir.join("comparison.csv");
        write_comparison(&metrics_path, &args.compare, &comparison_path)?;
        artifacts.push(comparison_path.display().to_string());
    }

    append_manifest(
        &cli.out_dir,
        ManifestEntry {
            command: "eval".into(),
            config: serde_json::json!({
                "policy": args.policy.display().to_string(),
                "scenario": args.scenario,
                "density": args.density,
                "episodes": args.episodes,
                "compare": args.compare.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
            }),
            seed,
            artifacts,
            tool_version: env!("CARGO_PKG_VERSION").into(),
            duration_seconds: started.elapsed().as_secs_f64(),
        },
    )?;
    Ok(())
}

/// Side-by-side aggregate table: one column per metrics file.
fn write_comparison(ours: &Path, others: &[PathBuf], out: &Path) -> Result<()> {
    let mut columns: Vec<(String, Vec<String>)> = Vec::new();
    let mut metric_names: Option<Vec<String>> = None;
    for path in std::iter::once(ours).chain(others.iter().map(|p| p.as_path())) {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        let table = parse_csv(&text, &path.display().to_string())?;
        let agg = table
            .rows
            .iter()
            .find(|r| r[0] == "aggregate")
            .ok_or_else(|| Error::Corrupt {
                path: path.display().to_string(),
                detail: "no aggregate row".into(),
            })?;
        if metric_names.is_none() {
            metric_names = Some(table.header[1..].to_vec());
        }
        let label = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        let parent = path
            .parent()
            .and_then(|p| p.file_name())
            .map(|s| s.to_string_lossy().into_owned());
        let label = match parent {
            Some(p) => format!("{p}/{label}"),
            None => label,
        };
        columns.push((label, agg[1..].to_vec()));
    }
    let names = metric_names.unwrap();
    let mut csv = String::from("metric");
    for (label, _) in &columns {
        csv.push(',');
        csv.push_str(label);
    }
    csv.push('\n');
    for (i, name) in names.iter().enumerate() {
        csv.push_str(name);
        for (_, vals) in &columns {
            csv.push(',');
            csv.push_str(vals.get(i).map(String::as_str).unwrap_or(""));
        }
        csv.push('\n');
    }
    std::fs::write(out, csv).map_err(|e| Error::io(out.display().to_string(), e))
}

fn cmd_plot(cli: &Cli, args: &PlotArgs, started: Instant) -> Result<()> {
    let written = plot_file(&args.input, &cli.out_dir)?;
    say(
        cli,
        &format!(
            "wrote {}",
            written
                .iter()
                .map(|p| p.display().to_string())
                .collect::<Vec<_>>()
                .join(", ")
        ),
    );
    append_manifest(
        &cli.out_dir,
        ManifestEntry {
            command: "plot".into(),
            config: serde_json::json!({ "input": args.input.display().to_string() }),
            seed: 0,
            artifacts: written.iter().map(|p| p.display().to_string()).collect(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            duration_seconds: started.elapsed().as_secs_f64(),
        },
    )?;
    Ok(())
}
