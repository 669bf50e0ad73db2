use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fdsic::imd::ImdTables;
use fdsic_scenario::{emit_report, run_scenario, validate, Format, ScenarioSpec};

#[derive(Parser)]
#[command(name = "fdsic", version, about = "Flexible-duplex nonlinear SIC simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a scenario and write residual PSD, CDF, SICR and counter reports.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, default_value = "csv")]
        format: Format,
        /// Overrides the seed in the config file.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Dump IMD set sizes and expected basis powers for the configured grid.
    Tables {
        #[arg(long)]
        config: PathBuf,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the fast paths against slow reference computations.
    Validate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 20_000)]
        trials: usize,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> fdsic::Result<ExitCode> {
    match cli.cmd {
        Cmd::Run { config, out, format, seed } => {
            let mut spec = ScenarioSpec::load(&config)?;
            if let Some(s) = seed {
                spec.seed = s;
            }
            let report = run_scenario(&spec)?;
            for path in emit_report(&report, format, &out)? {
                println!("wrote {}", path.display());
            }
            for c in &report.cancellers {
                println!("{:<10} SICR {:>7.2} dB", c.name.name(), c.sicr_db);
            }
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Tables { config, out } => {
            let spec = ScenarioSpec::load(&config)?;
            let grid = spec.grid()?;
            let cfg = spec.estimator_config()?;
            let t = ImdTables::build(&grid, spec.iq()?.b, spec.a_digi()?, cfg.k_max, cfg.moment_mode);
            match out {
                Some(path) => t.write_csv(std::io::BufWriter::new(std::fs::File::create(path)?))?,
                None => t.write_csv(std::io::stdout().lock())?,
            }
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Validate { config, trials } => {
            let spec = ScenarioSpec::load(&config)?;
            let checks = validate::validate(&spec, trials)?;
            for c in &checks {
                println!("{c}");
            }
            Ok(if checks.iter().all(|c| c.passed) { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
    }
}
