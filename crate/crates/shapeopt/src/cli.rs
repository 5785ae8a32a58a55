//! Command-line interface. Exit status 0 on success, 1 on a failed check or
//! runtime error, 2 on usage and configuration errors.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::config::{RunConfig, OUTPUT_DIR_ENV};
use crate::{presets, report, run, scenario::Scenario, verify};

#[derive(Parser, Debug)]
#[command(name = "shapeopt", version, about = "Parameterized shape optimization on a built-in model problem")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the optimizer a configuration file describes.
    Run { config: PathBuf },
    /// Run the oracle checks and write a report.
    Verify {
        #[arg(value_enum)]
        level: verify::Level,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Report directory (default: SHAPEOPT_OUTPUT_DIR, then shapeopt-out).
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Tabulate finished runs with retardation factors.
    Report {
        #[arg(required = true)]
        histories: Vec<PathBuf>,
        /// Wall time of one converged state solve, in seconds.
        #[arg(long)]
        baseline_time: f64,
        /// Fixed-point iterations of one converged state solve.
        #[arg(long)]
        baseline_iters: f64,
        /// Also write the table as CSV here.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// List presets, or print one as TOML.
    Presets { name: Option<String> },
}

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Check(String),
    Runtime(anyhow::Error),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Check(_) | Failure::Runtime(_) => 1,
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

fn default_dir() -> PathBuf {
    std::env::var_os(OUTPUT_DIR_ENV)
        .filter(|d| !d.is_empty())
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("shapeopt-out"))
}

fn cmd_run(path: PathBuf) -> Result<(), Failure> {
    let cfg = RunConfig::from_path(&path).map_err(|e| Failure::Usage(e.to_string()))?;
    let sc = Scenario::build(&cfg)?;
    let out = run::execute(&cfg, &sc)?;
    let dir = run::output_dir(&cfg);
    let written = run::write_artifacts(&dir, &cfg, &sc, &out)?;
    let s = &out.summary;
    println!(
        "{}: {} after {} iterations, objective {:.10e} -> {:.10e}",
        s.algorithm, s.termination, s.iterations, s.objective_initial, s.objective_final
    );
    for p in written {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn cmd_verify(level: verify::Level, seed: u64, dir: Option<PathBuf>) -> Result<(), Failure> {
    let dir = dir.unwrap_or_else(default_dir);
    std::fs::create_dir_all(&dir).map_err(|e| Failure::Runtime(e.into()))?;
    let checks = verify::run_checks(level, seed, Some(&dir))?;
    let text = verify::render(&checks, seed);
    let path = dir.join("verify_report.txt");
    std::fs::write(&path, &text).map_err(|e| Failure::Runtime(e.into()))?;
    print!("{text}");
    match checks.iter().find(|c| !c.passed()) {
        Some(c) => Err(Failure::Check(format!(
            "check {} failed: measured {:e} exceeds tolerance {:e}",
            c.id, c.measured, c.tolerance
        ))),
        None => Ok(()),
    }
}

fn cmd_report(histories: Vec<PathBuf>, time: f64, iters: f64, csv: Option<PathBuf>) -> Result<(), Failure> {
    let rows = report::build_report(&histories, time, iters)?;
    print!("{}", report::to_text(&rows));
    if let Some(path) = csv {
        std::fs::write(&path, report::to_csv(&rows)?).map_err(|e| Failure::Runtime(e.into()))?;
    }
    Ok(())
}

fn cmd_presets(name: Option<String>) -> Result<(), Failure> {
    match name {
        None => presets::names().iter().for_each(|n| println!("{n}")),
        Some(n) => match presets::preset_toml(&n) {
            Some(t) => print!("{t}"),
            None => return Err(Failure::Usage(format!("preset: unknown preset `{n}`"))),
        },
    }
    Ok(())
}

/// Parses `args` (program name first), runs the command and returns the
/// exit status.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = match cli.command {
        Command::Run { config } => cmd_run(config),
        Command::Verify { level, seed, output_dir } => cmd_verify(level, seed, output_dir),
        Command::Report {
            histories,
            baseline_time,
            baseline_iters,
            csv,
        } => cmd_report(histories, baseline_time, baseline_iters, csv),
        Command::Presets { name } => cmd_presets(name),
    };
    match result {
        Ok(()) => 0,
        Err(f) => {
            match &f {
                Failure::Usage(m) | Failure::Check(m) => eprintln!("error: {m}"),
                Failure::Runtime(e) => eprintln!("error: {e:#}"),
            }
            f.exit_code()
        }
    }
}
