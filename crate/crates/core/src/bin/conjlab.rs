use clap::{Parser, ValueEnum};
use conjlab::cli::{self, CliError, Command, Format, ScenarioConfig};
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CommandArg {
    Series,
    Entropy,
    Conjugate,
    Dynsys,
    Verify,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
}

/// Entropy functionals, grid conjugates and conjugacy checks for finite weighted composition operators.
#[derive(Debug, Parser)]
#[command(name = "conjlab", version)]
struct Args {
    command: CommandArg,
    /// Scenario config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output file; overrides the config's output_path. Stdout when neither is set.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for the parallel sweeps; results do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
}

fn load(args: &Args) -> Result<ScenarioConfig, CliError> {
    let text = std::fs::read_to_string(&args.config).map_err(|source| CliError::Io {
        path: args.config.clone(),
        source,
    })?;
    let command = match args.command {
        CommandArg::Series => Command::Series,
        CommandArg::Entropy => Command::Entropy,
        CommandArg::Conjugate => Command::Conjugate,
        CommandArg::Dynsys => Command::Dynsys,
        CommandArg::Verify => Command::Verify,
    };
    let mut config = ScenarioConfig::from_json(&text, Some(command))?;
    if let Some(out) = &args.out {
        config.output_path = Some(out.clone());
    }
    if let Some(f) = args.format {
        config.format = match f {
            FormatArg::Json => Format::Json,
            FormatArg::Csv => Format::Csv,
        };
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    Ok(config)
}

fn run(args: &Args) -> Result<cli::ExitReport, CliError> {
    let config = load(args)?;
    match args.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::ConfigInvalid {
                key: "--threads".into(),
                reason: e.to_string(),
            })?
            .install(|| cli::execute(&config)),
        None => cli::execute(&config),
    }
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            // usage errors are config errors
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(&args) {
        Ok(report) => {
            if report.written.is_empty() {
                print!("{}", report.output);
                let _ = std::io::stdout().flush();
            }
            eprintln!("{}", report.summary());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.status() as u8)
        }
    }
}
