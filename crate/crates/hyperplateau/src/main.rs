use clap::{Parser, Subcommand};
use hyperplateau::cli::{self, ExperimentConfig, Mode};
use hyperplateau::solver::ContinuationSchedule;
use hyperplateau::Error;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "hyperplateau", about = "Prescribed Weingarten curvature solver", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the continuation family and emit solution snapshots
    Solve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// override the number of continuation levels (geometric respacing)
        #[arg(long)]
        eps_levels: Option<usize>,
        /// override the grid spacing h
        #[arg(long)]
        grid: Option<f64>,
    },
    /// Solve and run the full verification battery
    Verify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        eps_levels: Option<usize>,
        #[arg(long)]
        grid: Option<f64>,
    },
    /// Run the built-in exact-solution oracle suite
    OracleTest,
    /// Parse a right-hand side expression and print its exact partials
    ParseCheck {
        /// expression in x1..xn, u
        expr: String,
    },
}

fn load_config(
    path: &PathBuf,
    mode: Mode,
    eps_levels: Option<usize>,
    grid: Option<f64>,
) -> Result<ExperimentConfig, Error> {
    let text = std::fs::read_to_string(path)?;
    let mut cfg = ExperimentConfig::from_json(&text)?;
    cfg.mode = mode;
    if let Some(h) = grid {
        cfg.h = h;
    }
    if let Some(count) = eps_levels {
        let first = *cfg.eps_levels.first().ok_or_else(|| {
            Error::Config("cannot respace an empty continuation schedule".into())
        })?;
        let last = *cfg.eps_levels.last().unwrap();
        cfg.eps_levels = ContinuationSchedule::geometric(first, last, count)?.levels;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn exit_code_for(err: &Error) -> ExitCode {
    match err {
        Error::Config(_) | Error::Parse { .. } | Error::Argument(_) | Error::Json(_) => {
            ExitCode::from(2)
        }
        _ => ExitCode::from(1),
    }
}

fn report_error(err: &Error) -> ExitCode {
    let payload = serde_json::json!({ "error": err.to_string() });
    eprintln!("{payload}");
    exit_code_for(err)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Solve { config, out, eps_levels, grid } => {
            load_config(config, Mode::Solve, *eps_levels, *grid)
                .and_then(|cfg| cli::run(&cfg, out))
        }
        Command::Verify { config, out, eps_levels, grid } => {
            load_config(config, Mode::Verify, *eps_levels, *grid)
                .and_then(|cfg| cli::run(&cfg, out))
        }
        Command::OracleTest => cli::oracle_suite(),
        Command::ParseCheck { expr } => hyperplateau::expr::RhsSpec::parse(expr, 2).map(|psi| {
            vec![
                format!("psi: {}", psi.psi),
                format!("psi_u: {}", psi.psi_u),
                format!("psi_x1: {}", psi.psi_x[0]),
                format!("psi_x2: {}", psi.psi_x[1]),
            ]
        }),
    };
    match result {
        Ok(lines) => {
            for line in lines {
                println!("{line}");
            }
            ExitCode::SUCCESS
        }
        Err(err) => report_error(&err),
    }
}
