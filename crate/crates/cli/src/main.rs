//! `qbench`: benchmark queries, oracle verification, game simulation, sweeps and certification.

mod error;
mod family;
mod sweep;
mod verify;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use qbench::benchmarks::benchmark;
use qbench::certify::{certify, parse_experiment, parse_spec_file, SpecFile, DEFAULT_Z};
use qbench::game_sim::{optimal_mp_strategy, run_game, srm_strategy};
use qbench::srm::srm_optimize;

use error::CliError;
use family::FamilyFlags;

#[derive(Parser)]
#[command(name = "qbench", version, about = "Classical fidelity thresholds: query, verify, simulate, sweep, certify")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form threshold and success probability as JSON.
    Benchmark(FamilyFlags),
    /// Closed form vs numerical oracle vs operator norm for every spec in a file.
    Verify(verify::VerifyArgs),
    /// Play the verification game and print the trial batch as JSON.
    Simulate(SimulateArgs),
    /// Threshold surface over N, M and widths as CSV.
    Sweep(sweep::SweepArgs),
    /// Certification verdict for an experiment record.
    Certify(CertifyArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyKind {
    #[value(name = "optimal-mp", alias = "optimal_mp")]
    OptimalMp,
    Srm,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    spec_file: PathBuf,
    /// Which spec of the file to play (0-based).
    #[arg(long, default_value_t = 0)]
    index: usize,
    #[arg(long, value_enum, default_value = "optimal-mp")]
    strategy: StrategyKind,
    /// SRM width; defaults to the optimum for the ensemble's β.
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long, default_value_t = 100_000, value_parser = clap::value_parser!(u64).range(1..))]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct CertifyArgs {
    #[arg(long)]
    experiment_file: PathBuf,
    /// One-sided z threshold.
    #[arg(long, default_value_t = DEFAULT_Z)]
    z: f64,
}

fn read(path: &PathBuf) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn emit(text: &str) -> Result<(), CliError> {
    let mut out = std::io::stdout().lock();
    writeln!(out, "{text}").map_err(|e| CliError::Io(e.to_string()))
}

fn json<T: serde::Serialize>(v: &T) -> Result<String, CliError> {
    serde_json::to_string(v).map_err(|e| CliError::Data(e.to_string()))
}

fn run_benchmark(flags: &FamilyFlags) -> Result<(), CliError> {
    let spec = flags.to_spec_file()?.to_spec().map_err(CliError::usage)?;
    let value = benchmark(&spec).map_err(CliError::usage)?;
    emit(&json(&value)?)
}

fn load_specs(path: &PathBuf) -> Result<Vec<SpecFile>, CliError> {
    parse_spec_file(&read(path)?).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn run_simulate(a: &SimulateArgs) -> Result<(), CliError> {
    let files = load_specs(&a.spec_file)?;
    let file = files
        .get(a.index)
        .ok_or_else(|| CliError::Usage(format!("--index {} but the file holds {} spec(s)", a.index, files.len())))?;
    let spec = file.to_spec().map_err(CliError::data)?;
    let strategy = match a.strategy {
        StrategyKind::OptimalMp => optimal_mp_strategy(&spec).map_err(CliError::data)?,
        StrategyKind::Srm => {
            let eta = match a.eta {
                Some(e) => e,
                None => srm_optimize(spec.widths.beta).map_err(CliError::data)?.eta_opt,
            };
            srm_strategy(eta, spec.n, spec.m).map_err(CliError::usage)?
        }
    };
    let batch = run_game(&spec, &strategy, a.trials, a.seed).map_err(CliError::data)?;
    emit(&json(&batch)?)
}

fn run_certify(a: &CertifyArgs) -> Result<(), CliError> {
    let text = read(&a.experiment_file)?;
    let record = parse_experiment(&text).map_err(|e| CliError::Data(format!("{}: {e}", a.experiment_file.display())))?;
    let verdict = certify(&record, a.z).map_err(CliError::data)?;
    emit(&json(&verdict)?)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { error::EX_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Benchmark(f) => run_benchmark(f),
        Command::Verify(a) => verify::run(a),
        Command::Simulate(a) => run_simulate(a),
        Command::Sweep(a) => sweep::run(a),
        Command::Certify(a) => run_certify(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qbench: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
