use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use qho_fcs_cli::commands::{self, Output};
use qho_fcs_cli::config::RunConfig;
use qho_fcs_cli::CliError;

/// Full counting statistics of a quantum harmonic oscillator coupled to
/// thermal baths.
#[derive(Debug, Parser)]
#[command(name = "qho-fcs", version)]
struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file, or `-` for stdout.
    #[arg(long, global = true, default_value = "-")]
    output: String,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Overrides the configuration seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// θ(s) and its oscillator and drive parts across the branch interval.
    ThetaSweep,
    /// Activity k(0) against bath temperature T₁ with T₂ = ratio·T₁.
    ActivityScan,
    /// Single-bath cooling report: n_st, ln k(0) and Q(0) for three drives.
    Ion,
    /// Cross-check of closed form, moment ODE, Fock oracle and Monte Carlo.
    Verify,
    /// Quantum-jump Monte Carlo: per-trajectory counts (CSV) or estimates (JSON).
    Mc,
    /// Branch points and Gallavotti–Cohen midpoint.
    Branch,
    /// Moment-ODE trajectory t, x, y, σ, ln A.
    TrajDump,
    /// Truncated tilted generator as coordinate triplets.
    GeneratorDump,
}

const DEFAULT_SEED: u64 = 0x5eed;

fn run(cli: &Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    let path = cli.config.as_ref().ok_or_else(|| CliError::Config("--config is required".into()))?;
    let config = RunConfig::load(path)?;
    let seed = cli.seed.or(config.seed).unwrap_or(DEFAULT_SEED);

    let mut verification_failed = false;
    let output = match cli.command {
        Command::ThetaSweep => commands::theta_sweep(&config)?,
        Command::ActivityScan => commands::activity_scan(&config)?,
        Command::Ion => commands::ion(&config)?,
        Command::Branch => commands::branch(&config)?,
        Command::TrajDump => commands::traj_dump(&config)?,
        Command::GeneratorDump => commands::generator_dump(&config)?,
        Command::Mc => commands::mc(&config, seed)?,
        Command::Verify => {
            let (output, passed) = commands::verify(&config, seed)?;
            verification_failed = !passed;
            output
        }
    };

    let sink: Box<dyn Write> =
        if cli.output == "-" { Box::new(io::stdout().lock()) } else { Box::new(File::create(&cli.output)?) };
    let mut sink = BufWriter::new(sink);
    match (output, cli.format) {
        (Output::Table(t) | Output::Split { table: t, .. }, Format::Csv) => t.write_csv(&mut sink)?,
        (Output::Table(t), Format::Json) => writeln!(sink, "{}", serde_json::to_string_pretty(&t.to_json()).unwrap())?,
        (Output::Split { report, .. }, Format::Json) => {
            writeln!(sink, "{}", serde_json::to_string_pretty(&report).unwrap())?
        }
        (Output::Text(text), _) => sink.write_all(text.as_bytes())?,
    }
    sink.flush()?;
    if verification_failed {
        return Err(CliError::Verification);
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Io(e)) if e.kind() == io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qho-fcs: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
