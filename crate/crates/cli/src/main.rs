use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use spvar_cli::{run, write_outcome, CliError, GridScale, RunOptions, Scenario, ScenarioConfig};

/// Run one named scenario and write its report and artifacts.
#[derive(Debug, Parser)]
#[command(name = "spvar", version)]
struct Args {
    /// Scenario to run.
    #[arg(value_enum)]
    scenario: Scenario,
    /// JSON scenario config; defaults apply when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Seed, used unless the config pins one.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Single-threaded execution for bitwise reproducibility.
    #[arg(long)]
    serial: bool,
    #[arg(long, value_enum, default_value_t = GridScale::Desk)]
    grid_scale: GridScale,
}

fn main() -> ExitCode {
    env_logger::init();
    let args = Args::parse();
    match execute(&args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            let msg = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
            eprintln!("{msg}");
            ExitCode::from(2)
        }
    }
}

fn execute(args: &Args) -> Result<bool, CliError> {
    let (cfg, base_dir) = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            let dir = path.parent().map(PathBuf::from).unwrap_or_else(|| PathBuf::from("."));
            (ScenarioConfig::parse(&text)?, dir)
        }
        None => (ScenarioConfig::default(), PathBuf::from(".")),
    };
    let opts = RunOptions {
        seed: args.seed,
        serial: args.serial,
        grid_scale: args.grid_scale,
        base_dir,
    };
    log::info!("running {} (seed {}, serial {})", args.scenario, args.seed, args.serial);
    let outcome = run(args.scenario, &cfg, &opts)?;
    write_outcome(&outcome, &args.out)?;
    for v in &outcome.report.verdicts {
        println!("{:<13} {:<32} {}", format!("{:?}", v.status).to_lowercase(), v.name, v.detail);
    }
    println!("report: {}", args.out.join("report.json").display());
    Ok(outcome.report.all_passed)
}
