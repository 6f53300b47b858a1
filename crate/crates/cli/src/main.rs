//! `femopt` command-line driver.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use femopt::backend::{emit_c, run_pipeline, PipelineOptions, Report};
use femopt::driver::{Config, DEFAULT_THRESHOLD};
use femopt::ir::{flop_count, kernel_to_json, parse_kernel};
use femopt::oracle::pipeline_error;
use femopt::Kernel64;

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}: {1}")]
    Io(PathBuf, std::io::Error),
    #[error(transparent)]
    Kernel(#[from] femopt::Error),
    #[error("oracle mismatch: relative error {0:.3e} exceeds {1:.0e}")]
    Mismatch(f64, f64),
}

#[derive(Parser)]
#[command(name = "femopt", version, about = "Flop-minimizing optimizer for finite element integration kernels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimize a kernel and optionally write C, the report and the result.
    Optimize(OptimizeArgs),
    /// Print the flop count of a kernel.
    Count {
        kernel: PathBuf,
    },
    /// Check the optimized kernel against the interpreter on perturbed inputs.
    Verify {
        kernel: PathBuf,
        #[arg(long, default_value_t = 10)]
        seeds: u64,
        #[arg(long, default_value_t = 1e-10)]
        tolerance: f64,
        #[command(flatten)]
        flags: PipelineFlags,
    },
}

#[derive(Args)]
struct PipelineFlags {
    /// Bytes available to array temporaries.
    #[arg(long = "th", default_value_t = DEFAULT_THRESHOLD)]
    threshold: usize,
    #[arg(long)]
    no_preeval: bool,
    #[arg(long)]
    no_zero_skip: bool,
}

impl PipelineFlags {
    fn options(&self) -> PipelineOptions {
        PipelineOptions {
            config: Config { threshold: self.threshold, preeval: !self.no_preeval },
            zero_skip: !self.no_zero_skip,
        }
    }
}

#[derive(Args)]
struct OptimizeArgs {
    kernel: PathBuf,
    #[command(flatten)]
    flags: PipelineFlags,
    /// Print the flop count after every stage and the chosen plan.
    #[arg(long)]
    trace: bool,
    #[arg(long, value_name = "PATH")]
    emit_c: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    report: Option<PathBuf>,
    /// Write the optimized kernel as JSON.
    #[arg(long, value_name = "PATH")]
    emit_kernel: Option<PathBuf>,
}

fn load(path: &Path) -> Result<Kernel64, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(path.to_path_buf(), e))?;
    Ok(parse_kernel(&text)?)
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Io(path.to_path_buf(), e))
}

fn to_pretty(v: &impl serde::Serialize) -> String {
    serde_json::to_string_pretty(v).expect("serializable") + "\n"
}

fn print_trace(r: &Report) {
    for s in &r.stages {
        println!("  {:<10} {}", s.stage, s.flops);
    }
    match r.plan.chosen() {
        Some(b) => println!("  plan: pre-evaluate {:?}, sharing elimination {:?} (cost {})", b.b_p, b.b_s, b.cost),
        None => println!("  plan: none"),
    }
    if let Some(z) = &r.zero_skip {
        println!("  zero-skip: {} loops split into {} ranges", z.split_loops, z.ranges);
    }
}

fn optimize(a: &OptimizeArgs) -> Result<(), CliError> {
    let k = load(&a.kernel)?;
    let out = run_pipeline(&k, &a.flags.options())?;
    println!("flops: {} -> {}", out.report.input_flops, out.report.output_flops);
    if a.trace {
        print_trace(&out.report);
    }
    if let Some(p) = &a.emit_c {
        write(p, &emit_c(&out.kernel)?)?;
    }
    if let Some(p) = &a.report {
        write(p, &to_pretty(&out.report))?;
    }
    if let Some(p) = &a.emit_kernel {
        write(p, &to_pretty(&kernel_to_json(&out.kernel)))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Optimize(a) => optimize(&a),
        Command::Count { kernel } => {
            println!("{}", flop_count(&load(&kernel)?));
            Ok(())
        }
        Command::Verify { kernel, seeds, tolerance, flags } => {
            let err = pipeline_error(&load(&kernel)?, &flags.options(), 0..seeds)?;
            if err > tolerance {
                return Err(CliError::Mismatch(err, tolerance));
            }
            println!("ok: relative error {err:.3e} over {seeds} seeds");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
