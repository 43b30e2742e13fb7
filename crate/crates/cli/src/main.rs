//! `bench`: run replicated detection/attack experiments from a config file.

use clap::{Parser, Subcommand, ValueEnum};
use conformal_attack::harness::{emit_report, run_suite, Preset, ReportFormat, SuiteConfig};
use conformal_attack::Error;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

const EXIT_CONFIG: u8 = 2;
const EXIT_PARTIAL: u8 = 3;

#[derive(Parser)]
#[command(
    name = "bench",
    version,
    about = "Conformal novelty detection under decision-based attacks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every experiment in a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Use full-size splits (n=5000, m=1000) and scale fixed attack sizes.
        #[arg(long = "paper-scale")]
        full_scale: bool,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        /// Master seed; overrides the config and BENCH_SEED.
        #[arg(long, env = "BENCH_SEED")]
        seed: Option<u64>,
    },
    /// Print a preset config.
    GenConfig {
        #[arg(long, value_enum)]
        preset: PresetArg,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
    Md,
}

impl From<Format> for ReportFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Json => ReportFormat::Json,
            Format::Csv => ReportFormat::Csv,
            Format::Md => ReportFormat::Markdown,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum PresetArg {
    Exp1,
    Exp2,
    Exp3,
    #[value(name = "expA1", alias = "expa1")]
    ExpA1,
    #[value(name = "expA2", alias = "expa2")]
    ExpA2,
}

impl From<PresetArg> for Preset {
    fn from(p: PresetArg) -> Self {
        match p {
            PresetArg::Exp1 => Preset::Exp1,
            PresetArg::Exp2 => Preset::Exp2,
            PresetArg::Exp3 => Preset::Exp3,
            PresetArg::ExpA1 => Preset::ExpA1,
            PresetArg::ExpA2 => Preset::ExpA2,
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_CONFIG)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match cli.command {
        Command::GenConfig { preset } => match Preset::from(preset).suite().to_toml() {
            Ok(text) => {
                print!("{text}");
                ExitCode::SUCCESS
            }
            Err(e) => fail(&e),
        },
        Command::Run {
            config,
            full_scale,
            jobs,
            out,
            format,
            seed,
        } => run(config, full_scale, jobs, out, format, seed),
    }
}

fn fail(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    match e {
        Error::Config(_) | Error::InvalidInput(_) | Error::Io(_) | Error::Format { .. } => ExitCode::from(EXIT_CONFIG),
        _ => ExitCode::FAILURE,
    }
}

fn run(
    config: PathBuf,
    full_scale: bool,
    jobs: usize,
    out: Option<PathBuf>,
    format: Format,
    seed: Option<u64>,
) -> ExitCode {
    let text = match std::fs::read_to_string(&config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", config.display());
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let mut suite = match SuiteConfig::from_toml(&text) {
        Ok(s) => s,
        Err(e) => return fail(&e),
    };
    for exp in &mut suite.experiment {
        if full_scale {
            exp.to_full_scale();
        }
        if let Some(s) = seed {
            exp.seed = s;
        }
    }
    let report = match run_suite(&suite, jobs) {
        Ok(r) => r,
        Err(e) => return fail(&e),
    };
    let bytes = match emit_report(&report, format.into()) {
        Ok(b) => b,
        Err(e) => return fail(&e),
    };
    let written = match &out {
        Some(path) => std::fs::write(path, &bytes),
        None => std::io::stdout().write_all(&bytes),
    };
    if let Err(e) = written {
        eprintln!("error: cannot write report: {e}");
        return ExitCode::FAILURE;
    }
    if report.partial() {
        eprintln!("warning: some replicates failed");
        ExitCode::from(EXIT_PARTIAL)
    } else {
        ExitCode::SUCCESS
    }
}
