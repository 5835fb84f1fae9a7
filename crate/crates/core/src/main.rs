use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qtat::cli::{self, exit_code, stages, ExperimentManifest};
use qtat::Result;

#[derive(Parser)]
#[command(
    name = "qtat",
    version,
    about = "Quantitative thermo-acoustic imaging experiments"
)]
struct Args {
    #[command(subcommand)]
    command: Command,
    /// Experiment manifest (JSON); defaults apply when omitted.
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    /// Output directory, overriding the manifest.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Run seed, overriding the manifest.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Also write the raw noise fields.
    #[arg(long, global = true)]
    dump_noise: bool,
    /// Skip the refinement stage.
    #[arg(long, global = true)]
    no_refine: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Phantom and forward solutions.
    Forward,
    /// Energies, noise and smoothing (after `forward`).
    Acquire,
    /// Exact inversion of clean and smoothed data (after `acquire`).
    Invert,
    /// Least-squares refinement (after `invert`).
    Refine,
    /// All stages and a report.
    Pipeline,
    /// Monte-Carlo sweep over the manifest's sweep section.
    Sweep,
    /// Plot data from a run directory into `<out>/plot`.
    Export,
    /// Print the effective manifest.
    Manifest,
}

fn load(args: &Args) -> Result<ExperimentManifest> {
    let mut m = match &args.manifest {
        Some(path) => ExperimentManifest::load(path)?,
        None => ExperimentManifest::default(),
    };
    if let Some(out) = &args.out {
        m.output_dir = out.clone();
    }
    if let Some(seed) = args.seed {
        m.seed = seed;
    }
    m.dump_noise |= args.dump_noise;
    if args.no_refine {
        m.refine.enabled = false;
    }
    m.validate()?;
    Ok(m)
}

fn run(args: &Args) -> Result<()> {
    if let Some(n) = args.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| qtat::Error::Config(e.to_string()))?;
    }
    let m = load(args)?;
    let dir = m.output_dir.clone();
    match args.command {
        Command::Forward => stages::forward(&m, &dir),
        Command::Acquire => stages::acquire(&m, &dir),
        Command::Invert => stages::invert_stage(&m, &dir),
        Command::Refine => stages::refine(&m, &dir),
        Command::Pipeline => {
            let report = cli::run_pipeline(&m)?;
            emit(&serde_json::to_string_pretty(&report)?)?;
            Ok(())
        }
        Command::Sweep => {
            let summary = cli::run_sweep(&m)?;
            emit(&serde_json::to_string_pretty(&summary)?)?;
            Ok(())
        }
        Command::Export => {
            for path in cli::export_plotdata(&dir, &dir.join("plot"))? {
                emit(&path.display().to_string())?;
            }
            Ok(())
        }
        Command::Manifest => {
            emit(&m.to_json())?;
            Ok(())
        }
    }
}

/// Writes one line to stdout; a closed pipe (`qtat manifest | head`) is not an error.
fn emit(line: &str) -> Result<()> {
    match writeln!(std::io::stdout().lock(), "{line}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn main() -> ExitCode {
    env_logger::init();
    // Usage errors are configuration errors; clap's own code 2 means an improper set here.
    let args = match Args::try_parse() {
        Ok(args) => args,
        Err(e) => {
            let code = if e.use_stderr() {
                cli::exit::CONFIG
            } else {
                cli::exit::SUCCESS
            };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qtat: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
