use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use combo::cli::{cmd_bench, cmd_coarsen, cmd_generate, cmd_normals, cmd_post, cmd_solve, echo_config, CommandOutput, RunConfig};
use combo::Error;

#[derive(Parser)]
#[command(name = "combo", version, about = "FFT homogenization with composite boxels at finite strain")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration; defaults are used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `output`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Dotted-path override, e.g. `solver.tol_equilibrium=1e-6`. Repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Voxelize the configured geometry.
    Generate,
    /// Coarsen the image into boxels.
    Coarsen,
    /// Estimate interface normals of composite boxels.
    Normals,
    /// Solve the cell problem.
    Solve,
    /// Phase averages, interface tractions and slices.
    Post,
    /// Reference vs. ComBo comparison table.
    Bench {
        #[arg(long)]
        suite: Option<String>,
    },
}

fn run(cli: Cli) -> Result<CommandOutput, Error> {
    let mut overrides = cli.common.overrides.clone();
    if let Some(o) = &cli.common.out {
        overrides.push(format!("output={}", serde_json::to_string(o).unwrap()));
    }
    if let Some(t) = cli.common.threads {
        overrides.push(format!("threads={t}"));
    }
    if let Some(s) = cli.common.seed {
        overrides.push(format!("seed={s}"));
    }
    if let Command::Bench { suite: Some(s) } = &cli.command {
        overrides.push(format!("bench.suite={}", serde_json::to_string(s).unwrap()));
    }
    let cfg = RunConfig::load(cli.common.config.as_deref(), &overrides)?;
    if let Some(n) = cfg.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| Error::ConfigInvalid(e.to_string()))?;
    }
    echo_config(&cfg)?;
    match cli.command {
        Command::Generate => cmd_generate(&cfg),
        Command::Coarsen => cmd_coarsen(&cfg),
        Command::Normals => cmd_normals(&cfg),
        Command::Solve => cmd_solve(&cfg),
        Command::Post => cmd_post(&cfg),
        Command::Bench { .. } => cmd_bench(&cfg, |line| println!("{line}")),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("COMBO_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(out) => {
            for l in &out.lines {
                println!("{l}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            let report = json!({ "error": e.kind(), "message": e.to_string() });
            eprintln!("{report}");
            ExitCode::FAILURE
        }
    }
}
