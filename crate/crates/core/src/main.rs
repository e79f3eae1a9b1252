use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use debye_cq::config::{load_config, preset, ConfigError, Scheme, SimConfig};
use debye_cq::run::{compare_schemes, prepare, run_simulation, AppError};

#[derive(Parser)]
#[command(name = "debye-cq", version, about = "1D Maxwell solver for multipole Debye media")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Source {
    /// TOML configuration file.
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    config: Option<PathBuf>,
    /// Built-in configuration (tissue-interface).
    #[arg(long)]
    preset: Option<String>,
}

impl Source {
    fn load(&self) -> Result<SimConfig, ConfigError> {
        match (&self.config, &self.preset) {
            (Some(path), _) => load_config(path),
            (None, Some(name)) => preset(name),
            (None, None) => unreachable!("clap requires one source"),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run one scheme and write snapshots, energies and a plot script.
    Simulate {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        scheme: Option<Scheme>,
        #[arg(long)]
        steps: Option<usize>,
        /// Directory for `weights_<material>.csv` dumps.
        #[arg(long)]
        dump_weights: Option<PathBuf>,
    },
    /// Run several schemes in lockstep and report their differences.
    Compare {
        #[command(flatten)]
        source: Source,
        /// Comma-separated scheme list, e.g. `ade,cq-direct`.
        #[arg(long, value_delimiter = ',', required = true)]
        schemes: Vec<Scheme>,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Print the largest stable time step.
    Cfl {
        #[command(flatten)]
        source: Source,
    },
}

fn with_steps(mut config: SimConfig, steps: Option<usize>) -> Result<SimConfig, ConfigError> {
    if let Some(n) = steps {
        config.time.n_steps = n;
        config.validate()?;
    }
    Ok(config)
}

fn execute(cli: Cli) -> Result<ExitCode, AppError> {
    match cli.command {
        Command::Simulate {
            source,
            scheme,
            steps,
            dump_weights,
        } => {
            let mut config = with_steps(source.load()?, steps)?;
            if let Some(s) = scheme {
                config.scheme = s;
            }
            let summary = run_simulation(&config, dump_weights.as_deref())?;
            for w in &summary.warnings {
                eprintln!("warning: {w}");
            }
            println!("scheme          {}", summary.scheme);
            println!("steps           {}", summary.steps);
            println!("dt              {:.6e} s", summary.tau);
            println!("dt_max          {:.6e} s", summary.tau_max);
            println!("energy          {:.9e} -> {:.9e}", summary.initial_energy, summary.final_energy);
            if let Some(r) = summary.max_step_imbalance {
                println!("max imbalance   {r:.3e}");
            }
            if let Some(v) = summary.stored_vectors {
                println!("stored vectors  {v}");
            }
            for p in &summary.written {
                println!("wrote           {}", p.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Compare {
            source,
            schemes,
            tol,
            steps,
        } => {
            let config = with_steps(source.load()?, steps)?;
            let tolerance = tol.unwrap_or(config.compare.tolerance);
            let report = compare_schemes(&config, &schemes, tolerance)?;
            let names: Vec<&str> = report.schemes.iter().map(Scheme::name).collect();
            println!("schemes         {}", names.join(","));
            println!("steps           {}", report.steps);
            println!(
                "max diff        e {:.3e}  h {:.3e}  p {:.3e}",
                report.max_diff[0], report.max_diff[1], report.max_diff[2]
            );
            println!("relative diff   {:.3e} (tolerance {:.1e})", report.relative_difference(), tolerance);
            for p in &report.written {
                println!("wrote           {}", p.display());
            }
            if report.passed() {
                println!("verdict         pass");
                Ok(ExitCode::SUCCESS)
            } else {
                println!("verdict         fail");
                Ok(ExitCode::from(3))
            }
        }
        Command::Cfl { source } => {
            let prep = prepare(&source.load()?)?;
            println!("{:.16e}", prep.cfl.tau_max);
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
