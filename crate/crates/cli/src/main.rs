use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use modesel_cli::{run, Command, Outcome, ScenarioConfig};

#[derive(Parser)]
#[command(name = "modesel", version, about = "Mode-selective upconversion classifier simulator")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Optimal pump coefficients per separation
    Optimize(Common),
    /// Fidelity versus photon budget
    Sweep(Common),
    /// Photons needed for 68% and 95% fidelity against direct detection
    Benchmark(Common),
    /// Reference scenario with side-by-side comparison values
    Reproduce(Common),
}

#[derive(Args)]
struct Common {
    /// JSON scenario file; defaults apply when omitted
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. --set count_model.leak_even=0.05
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default: the config's output_dir)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads
    #[arg(long)]
    jobs: Option<usize>,
    /// Also write SVG charts
    #[arg(long)]
    svg: bool,
}

fn write_outputs(dir: &Path, outcome: &Outcome) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join("run.json");
    std::fs::write(&path, outcome.run_json()).with_context(|| format!("writing {}", path.display()))?;
    for (name, text) in &outcome.files {
        let path = dir.join(name);
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (command, common) = match cli.command {
        Cmd::Optimize(c) => (Command::Optimize, c),
        Cmd::Sweep(c) => (Command::Sweep, c),
        Cmd::Benchmark(c) => (Command::Benchmark, c),
        Cmd::Reproduce(c) => (Command::Reproduce, c),
    };
    let mut cfg = match ScenarioConfig::load(common.config.as_deref(), &common.overrides) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    let out = common.out.clone().unwrap_or_else(|| PathBuf::from(&cfg.output_dir));
    cfg.output_dir = out.display().to_string();

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(jobs) = common.jobs {
        if jobs == 0 {
            eprintln!("config error: --jobs must be at least 1");
            return ExitCode::from(2);
        }
        pool = pool.num_threads(jobs);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    };
    let outcome = pool.install(|| run(command, &cfg, common.svg));
    print!("{}", outcome.report);
    if let Err(e) = write_outputs(&out, &outcome) {
        eprintln!("error: {e:#}");
        return ExitCode::FAILURE;
    }
    println!("results written to {}", out.display());
    ExitCode::from(outcome.status().exit_code() as u8)
}
