use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use defect_resonance::cli::{run, ExitKind, Mode, RunConfig};

/// Defect states of periodic 1D Schrödinger operators and the resonances of
/// their truncations.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Band/gap scan of the periodic background.
    Bands(Common),
    /// Defect eigenvalues and eigenfunctions in every gap of the window.
    Defect(Common),
    /// Resonances (E > 0) of the truncated structure.
    Resonance(Common),
    /// Perturbed bound states (E < 0) of the truncated structure.
    Bound(Common),
    /// Edge states of a half-line structure under truncation.
    Edge(Common),
    /// Truncation sweep over the configured radii with rate fits.
    Sweep(Common),
    /// Run whatever mode the config file names.
    Run(Common),
}

#[derive(Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output.dir` of the config.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Worker threads for independent solves (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Progress on stderr; repeat for more detail.
    #[arg(long, short, action = clap::ArgAction::Count)]
    verbose: u8,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (mode, args) = match cli.command {
        Command::Bands(a) => (Some(Mode::Bands), a),
        Command::Defect(a) => (Some(Mode::Defect), a),
        Command::Resonance(a) => (Some(Mode::Resonance), a),
        Command::Bound(a) => (Some(Mode::Bound), a),
        Command::Edge(a) => (Some(Mode::Edge), a),
        Command::Sweep(a) => (Some(Mode::Sweep), a),
        Command::Run(a) => (None, a),
    };
    let level = match args.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).init();

    if let Some(n) = args.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: --threads: {e}");
            return ExitCode::from(ExitKind::Config as u8);
        }
    }

    let text = match std::fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {}: {e}", args.config.display());
            return ExitCode::from(ExitKind::Config as u8);
        }
    };
    let mut cfg = match RunConfig::from_json(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: config {e}");
            return ExitCode::from(ExitKind::Config as u8);
        }
    };
    if let Some(m) = mode {
        cfg.mode = m;
    }
    match run(&cfg, args.out_dir.as_deref()) {
        Ok(report) => {
            for f in &report.files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
