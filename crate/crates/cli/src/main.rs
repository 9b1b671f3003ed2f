use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use geninv_lab::experiments::listing;
use geninv_lab::{parse_config_file, run_experiment, Check, LabError};

/// Exit status for configuration, input, module and I/O errors.
const EXIT_ERROR: u8 = 2;
/// Exit status when `--check` finds a failed threshold.
const EXIT_CHECK_FAILED: u8 = 3;

#[derive(Parser)]
#[command(
    name = "geninv-lab",
    version,
    about = "Run generalized-inverse experiments from JSON configs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List experiments, built-in families and built-in maps.
    List,
    /// Moore–Penrose errors along a line or a rank-preserving curve.
    MpSweep(RunArgs),
    /// The seven stability conditions and the perturbed inverse.
    Conditions(RunArgs),
    /// Local conjugacy of a built-in map to its derivative.
    Conjugacy(RunArgs),
    /// Fixed-rank tangent spaces and chart round trips.
    Chart(RunArgs),
    /// Integral patch of a built-in distribution.
    Frobenius(RunArgs),
    /// Co-final membership of points for a built-in distribution.
    Cofinal(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Exit with status 3 if any acceptance threshold fails.
    #[arg(long)]
    check: bool,
    /// Directory for the report files.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
}

fn configure_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var("GENINV_LAB_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("GENINV_LAB_THREADS must be a positive integer, got {raw:?}"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| e.to_string())
}

fn describe(c: &Check) -> String {
    let status = if c.passed { "ok  " } else { "FAIL" };
    match (c.value, c.bound) {
        (Some(v), Some(b)) => format!("{status} {} ({v:e} vs {b:e})", c.name),
        _ => format!("{status} {}", c.name),
    }
}

fn run(experiment: &str, args: RunArgs) -> Result<bool, LabError> {
    let mut config = parse_config_file(&args.config)?;
    if config.experiment != experiment {
        return Err(geninv_lab::ConfigError::Parse {
            line: None,
            column: None,
            field: Some("experiment".into()),
            message: format!(
                "config is for {:?} but {experiment:?} was requested",
                config.experiment
            ),
        }
        .into());
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let report = run_experiment(&config)?;
    for path in report.write(&args.out, &config.output_path)? {
        println!("wrote {}", path.display());
    }
    for c in &report.checks {
        println!("{}", describe(c));
    }
    Ok(!args.check || report.passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        eprintln!("geninv-lab: {e}");
        return ExitCode::from(EXIT_ERROR);
    }
    let (name, args) = match cli.command {
        Command::List => {
            print!("{}", listing());
            return ExitCode::SUCCESS;
        }
        Command::MpSweep(a) => ("mp-sweep", a),
        Command::Conditions(a) => ("conditions", a),
        Command::Conjugacy(a) => ("conjugacy", a),
        Command::Chart(a) => ("chart", a),
        Command::Frobenius(a) => ("frobenius", a),
        Command::Cofinal(a) => ("cofinal", a),
    };
    match run(name, args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("geninv-lab: acceptance check failed");
            ExitCode::from(EXIT_CHECK_FAILED)
        }
        Err(e) => {
            eprintln!("geninv-lab: {e}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}
