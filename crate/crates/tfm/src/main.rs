use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tfm::commands::{self, Loaded, Outcome};
use tfm::CliError;

#[derive(Parser, Debug)]
#[command(name = "tfm", version, about = "Traction force microscopy: forward simulation and regularized reconstruction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Debug)]
struct Common {
    /// Experiment configuration (INI)
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides [output] dir
    #[arg(long)]
    out: Option<PathBuf>,
    /// Noise seed; overrides [noise] seed
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Synthetic traction, displacement and noisy displacement on the data mesh
    Simulate(Common),
    /// Reconstruct traction from displacement data
    Reconstruct {
        #[command(flatten)]
        common: Common,
        /// Displacement CSV; defaults to the csv force source path
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Linear against nonlinear forward model sweep and two-stage reconstruction
    Compare(Common),
    /// Built-in adjoint, derivative and oracle checks
    Selftest,
    /// Mesh statistics; with --out also mesh VTK and Matrix Market matrices
    MeshInfo(Common),
}

fn load(common: &Common) -> Result<Loaded, CliError> {
    let mut loaded = Loaded::from_path(&common.config)?;
    if let Some(dir) = &common.out {
        loaded.config.output_dir = dir.clone();
    }
    if let Some(seed) = common.seed {
        loaded.config.noise = loaded.config.noise.clone().with_seed(seed);
    }
    Ok(loaded)
}

fn finish(outcome: Outcome) -> ExitCode {
    for w in &outcome.warnings {
        eprintln!("warning: {w}");
    }
    print!("{}", outcome.summary.render());
    for f in &outcome.files {
        println!("wrote {}", f.display());
    }
    match outcome.failure {
        Some(f) => {
            eprintln!("error: {f}");
            ExitCode::from(1)
        }
        None => ExitCode::SUCCESS,
    }
}

fn run(cli: Cli) -> Result<ExitCode, CliError> {
    match cli.command {
        Command::Simulate(c) => Ok(finish(commands::simulate(&load(&c)?)?)),
        Command::Reconstruct { common, data } => {
            let loaded = load(&common)?;
            Ok(finish(commands::reconstruct(&loaded, data.as_deref())?))
        }
        Command::Compare(c) => Ok(finish(commands::compare(&load(&c)?)?)),
        Command::MeshInfo(c) => {
            let loaded = load(&c)?;
            Ok(finish(commands::mesh_info(&loaded, c.out.as_deref().map(Path::new))?))
        }
        Command::Selftest => {
            let lines = commands::selftest()?;
            let mut failed = 0;
            for l in &lines {
                let mark = if l.passed { "PASS" } else { "FAIL" };
                println!("[{mark}] {}: {} ({}) {:.3} s", l.module, l.invariant, l.detail, l.seconds);
                failed += usize::from(!l.passed);
            }
            println!("{} passed, {failed} failed", lines.len() - failed);
            Ok(if failed == 0 { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
