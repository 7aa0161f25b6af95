use std::fs::{self, File};
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use cemrl_core::harness::config::{apply_config, split_assignment};
use cemrl_core::harness::{aggregate, emit_csv, emit_run_csv};
use cemrl_core::{run_experiment, HybridConfig, RunRecord};
use clap::{Parser, ValueEnum};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Switch {
    On,
    Off,
}

/// Run CEM-RL policy search experiments and write learning curves as CSV.
///
/// Settings are layered: defaults, then `--config`, then the explicit flags,
/// then `--set` assignments.
#[derive(Debug, Parser)]
#[command(name = "cemrl", version)]
struct Cli {
    /// cem | ddpg | td3 | cem-ddpg | cem-td3 | multi-td3
    #[arg(long)]
    algo: Option<String>,
    /// pointmass | pendulum | deceptive | sphere | rastrigin
    #[arg(long)]
    env: Option<String>,
    /// Seed of the first run; run r uses seed + r.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    max_steps: Option<u64>,
    #[arg(long, default_value_t = 1)]
    runs: u64,
    #[arg(long)]
    pop_size: Option<usize>,
    #[arg(long, value_enum)]
    importance_mixing: Option<Switch>,
    /// Std of the Gaussian action noise during population evaluation.
    #[arg(long)]
    action_noise: Option<f64>,
    /// tanh | relu
    #[arg(long)]
    actor_nonlinearity: Option<String>,
    /// text | pseudocode
    #[arg(long)]
    budget_mode: Option<String>,
    /// Output directory for per-run and aggregate CSVs.
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// File of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Extra `key=value` override; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    /// Checkpoint spacing of the aggregate curve, in env steps.
    #[arg(long, default_value_t = 5000)]
    checkpoint: u64,
}

fn build_config(cli: &Cli) -> Result<HybridConfig, String> {
    let mut config = HybridConfig::default();
    if let Some(path) = &cli.config {
        let text = fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        config = apply_config(config, &text).map_err(|e| format!("{}: {e}", path.display()))?;
    }
    let mut assignments: Vec<(String, String)> = Vec::new();
    let mut flag = |k: &str, v: Option<String>| {
        if let Some(v) = v {
            assignments.push((k.to_string(), v));
        }
    };
    flag("env", cli.env.clone());
    flag("algo", cli.algo.clone());
    flag("max_steps", cli.max_steps.map(|v| v.to_string()));
    flag("pop_size", cli.pop_size.map(|v| v.to_string()));
    flag(
        "importance_mixing",
        cli.importance_mixing.map(|s| match s {
            Switch::On => "on".to_string(),
            Switch::Off => "off".to_string(),
        }),
    );
    flag("action_noise", cli.action_noise.map(|v| v.to_string()));
    flag("actor_nonlinearity", cli.actor_nonlinearity.clone());
    flag("budget_mode", cli.budget_mode.clone());
    for s in &cli.sets {
        let (k, v) = split_assignment(s).map_err(|e| e.to_string())?;
        assignments.push((k.to_string(), v.to_string()));
    }
    // `env` first so `problem_dim` can follow it in any order
    assignments.sort_by_key(|(k, _)| k != "env");
    for (k, v) in &assignments {
        config.set(k, v).map_err(|e| e.to_string())?;
    }
    config.validate().map_err(|e| e.to_string())?;
    Ok(config)
}

fn write_csv(path: &PathBuf, f: impl FnOnce(BufWriter<File>) -> cemrl_core::Result<()>) -> Result<(), String> {
    let file = File::create(path).map_err(|e| format!("cannot create {}: {e}", path.display()))?;
    f(BufWriter::new(file)).map_err(|e| format!("{}: {e}", path.display()))
}

fn run(cli: Cli) -> Result<(), String> {
    if cli.runs == 0 {
        return Err("--runs must be >= 1".into());
    }
    let config = build_config(&cli)?;
    fs::create_dir_all(&cli.out).map_err(|e| format!("cannot create {}: {e}", cli.out.display()))?;

    let mut runs: Vec<Vec<RunRecord>> = Vec::new();
    for r in 0..cli.runs {
        let seed = cli.seed + r;
        let records = run_experiment(&config, seed).map_err(|e| format!("run with seed {seed}: {e}"))?;
        let last = records.last().expect("at least one record");
        println!(
            "{} {} seed={seed} steps={} final_return={:.4}",
            config.algo,
            config.task.name(),
            last.total_steps,
            last.eval_mean
        );
        write_csv(&cli.out.join(format!("run_seed{seed}.csv")), |w| emit_run_csv(&records, w))?;
        runs.push(records);
    }
    let curve = aggregate(&runs, cli.checkpoint).map_err(|e| e.to_string())?;
    write_csv(&cli.out.join("aggregate.csv"), |w| emit_csv(&curve, w))?;
    if let Some(p) = curve.last() {
        println!("aggregate steps={} mean={:.4} median={:.4} ci68={:.4}", p.total_steps, p.eval_mean, p.eval_median, p.ci68);
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
