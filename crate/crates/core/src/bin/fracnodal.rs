use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use fracnodal::cli::{
    cmd_angular, cmd_classify, cmd_curve, cmd_plot, cmd_solve, cmd_verify, list_checks, load_config, CliError, Outcome,
    ProfileChoice,
};

/// Weighted extension problem: solver, functionals, angular profiles and nodal analysis.
#[derive(Parser)]
#[command(name = "fracnodal", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the configured boundary-value problem and store the field.
    Solve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Exit 0 even if the fixed-point iteration did not converge.
        #[arg(long)]
        allow_nonconverged: bool,
    },
    /// Eigen-curves, angular profiles and their constants.
    Angular {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Profiles::Both)]
        profile: Profiles,
    },
    /// Functional curve of a stored field about a trace point.
    Curve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        field: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        x0: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Locate and classify the nodal points of a stored field.
    Classify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        field: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the acceptance checks.
    Verify {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// List the checks without running them.
        #[arg(long)]
        list: bool,
        /// Run only these check ids.
        #[arg(long, value_delimiter = ',')]
        only: Vec<u8>,
    },
    /// Plot columns of a CSV artifact as SVG.
    Plot {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        x: String,
        #[arg(long, value_delimiter = ',', required = true)]
        y: Vec<String>,
        #[arg(long)]
        log_x: bool,
        #[arg(long)]
        log_y: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Profiles {
    Both,
    Antisymmetric,
    Symmetric,
}

fn report(outcome: &Outcome) {
    println!("{}", outcome.summary);
    for f in &outcome.files {
        println!("  wrote {}", f.display());
    }
}

fn run(cli: Cli) -> Result<bool, CliError> {
    match cli.command {
        Command::Solve {
            config,
            out,
            allow_nonconverged,
        } => {
            let cfg = load_config(&config)?;
            let out = out.unwrap_or_else(|| cfg.io.output_dir.clone());
            report(&cmd_solve(&cfg, &out, allow_nonconverged)?);
        }
        Command::Angular { config, out, profile } => {
            let cfg = load_config(&config)?;
            let out = out.unwrap_or_else(|| cfg.io.output_dir.clone());
            let choice = match profile {
                Profiles::Both => ProfileChoice::Both,
                Profiles::Antisymmetric => ProfileChoice::Antisymmetric,
                Profiles::Symmetric => ProfileChoice::Symmetric,
            };
            report(&cmd_angular(&cfg, &out, choice)?);
        }
        Command::Curve { config, field, x0, out } => {
            let cfg = load_config(&config)?;
            let out = out.unwrap_or_else(|| cfg.io.output_dir.clone());
            report(&cmd_curve(&cfg, &field, x0, &out)?);
        }
        Command::Classify { config, field, out } => {
            let cfg = load_config(&config)?;
            let out = out.unwrap_or_else(|| cfg.io.output_dir.clone());
            report(&cmd_classify(&cfg, &field, &out)?);
        }
        Command::Verify {
            config,
            out,
            list,
            only,
        } => {
            if list {
                print!("{}", list_checks());
                return Ok(true);
            }
            let cfg = config.as_deref().map(load_config).transpose()?;
            let out = out.or_else(|| cfg.as_ref().map(|c| c.io.output_dir.clone()));
            let (rows, outcome) = cmd_verify(cfg.as_ref(), &only, out.as_deref())?;
            for r in &rows {
                println!("{}", r.line());
            }
            report(&outcome);
            return Ok(rows.iter().all(|r| r.pass));
        }
        Command::Plot {
            config,
            input,
            x,
            y,
            log_x,
            log_y,
            out,
        } => {
            let cfg = load_config(&config)?;
            let out = out.unwrap_or_else(|| cfg.io.output_dir.clone());
            report(&cmd_plot(&cfg, &input, &x, &y, log_x, log_y, &out)?);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    if let Some(n) = std::env::var("FRACNODAL_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
    {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
