use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use adastrat::bench::{fit_slope, read_csv, run_bench, write_csv, BenchConfig, Experiment};
use adastrat::data::GERMAN_PATH_ENV;
use adastrat::estimators::EstimatorKind;
use adastrat::Error;

/// Adaptive stratification Monte Carlo: RMSE benchmarks and slope fits.
#[derive(Debug, Parser)]
#[command(name = "adastrat", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run an RMSE sweep over N = 2^kmin..2^kmax and write one CSV row per (estimator, N).
    Bench(BenchArgs),
    /// Fit the log2(rmse) vs log2(N) slope of one estimator from a bench CSV.
    Slope(SlopeArgs),
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// toy | logistic | linear | sine
    #[arg(long)]
    experiment: String,
    /// Dimension
    #[arg(long)]
    s: usize,
    /// Smallest exponent: N starts at 2^kmin
    #[arg(long)]
    kmin: u32,
    /// Largest exponent: N ends at 2^kmax
    #[arg(long)]
    kmax: u32,
    #[arg(long, default_value_t = 256)]
    reps: usize,
    /// Comma-separated subset of mc, haber, adastrat, adastrat-var, oracle
    #[arg(long, default_value = "mc,adastrat", value_delimiter = ',')]
    estimators: Vec<String>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Output CSV (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
    /// German credit data file (german.data-numeric)
    #[arg(long, env = GERMAN_PATH_ENV)]
    data: Option<PathBuf>,
    /// Haber cells per axis; runs N = j^s for each value
    #[arg(long = "haber-j", value_delimiter = ',')]
    haber_j: Vec<u64>,
    /// Weights of the linear experiment, comma-separated (default all ones)
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    lambda: Option<Vec<f64>>,
    /// Linear slope of the sine experiment
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    sine_lambda: f64,
    /// Prior standard deviation of the logistic coefficients
    #[arg(long, default_value_t = 5.0)]
    prior_sd: f64,
    /// Add an intercept column to the logistic design
    #[arg(long)]
    intercept: bool,
    /// Record per-cell wall time (output is then no longer byte-reproducible)
    #[arg(long)]
    timing: bool,
}

#[derive(Debug, Args)]
struct SlopeArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    estimator: String,
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Argument(_) | Error::Unsupported(_) | Error::Indivisible | Error::Domain(_) => 2,
        // Unreadable or malformed input files.
        Error::Io { .. } | Error::Parse { .. } | Error::Csv(_) => 3,
        _ => 1,
    }
}

fn io_error(path: &Path, source: io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn bench(args: BenchArgs) -> Result<(), Error> {
    let experiment: Experiment = args.experiment.parse()?;
    let mut config = BenchConfig::new(experiment, args.s, args.kmin, args.kmax);
    config.replicates = args.reps;
    config.estimators = args
        .estimators
        .iter()
        .map(|e| e.parse::<EstimatorKind>())
        .collect::<Result<_, _>>()?;
    config.master_seed = args.seed;
    config.data_path = args.data;
    config.output_path = args.out.clone();
    config.haber_per_axis = args.haber_j;
    config.lambda = args.lambda;
    config.sine_lambda = args.sine_lambda;
    config.prior_sd = args.prior_sd;
    config.intercept = args.intercept;
    config.record_timing = args.timing;
    config.validate()?;

    let output = run_bench(&config)?;
    log::info!(
        "reference {} ({:?}), log offset {}",
        output.reference,
        output.reference_kind,
        output.log_offset
    );
    match &args.out {
        Some(path) => {
            let file = File::create(path).map_err(|e| io_error(path, e))?;
            write_csv(&output.rows, BufWriter::new(file))?;
            eprintln!("wrote {} rows to {}", output.rows.len(), path.display());
        }
        None => write_csv(&output.rows, io::stdout().lock())?,
    }
    Ok(())
}

fn slope(args: SlopeArgs) -> Result<(), Error> {
    let estimator: EstimatorKind = args.estimator.parse()?;
    let file = File::open(&args.input).map_err(|e| io_error(&args.input, e))?;
    let rows = read_csv(BufReader::new(file))?;
    let value = fit_slope(&rows, estimator)?;
    let mut out = io::stdout().lock();
    writeln!(out, "{value:.6}").map_err(|e| io_error(Path::new("<stdout>"), e))?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Bench(args) => bench(args),
        Command::Slope(args) => slope(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
