use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use gsc_restore::task::{run_task, TaskConfig, TaskKind};
use gsc_restore::verify::{print_table, run_checks};

#[derive(Parser)]
#[command(name = "gsc-restore", version, about = "Group low-rank image restoration")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Degrade an image (or load a degraded one) and restore it.
    Run(RunArgs),
    /// Run the built-in oracle checks.
    Verify,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, value_enum)]
    task: TaskKind,
    /// Clean image path or test-image manifest name (PSNR reference).
    #[arg(long)]
    input: Option<String>,
    /// Already degraded image to restore instead of synthesizing one.
    #[arg(long)]
    degraded: Option<PathBuf>,
    /// Restored image path [default: <input>_<task>.png].
    #[arg(long)]
    output: Option<PathBuf>,
    /// Per-iteration trace [default: next to the output, .trace.tsv].
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Run report [default: next to the output, .report.tsv].
    #[arg(long)]
    report: Option<PathBuf>,
    /// Also write the degraded baseline image here.
    #[arg(long)]
    save_degraded: Option<PathBuf>,
    /// Exponent: 0.5, 0.6667 or 1.0.
    #[arg(long, default_value_t = 0.5)]
    p: f64,
    /// cs: measurement rate per 32x32 block [default: 0.3].
    #[arg(long)]
    subrate: Option<f64>,
    /// inpaint: fraction of pixels removed [default: 0.5].
    #[arg(long)]
    missing: Option<f64>,
    /// inpaint/textremove: mask image or manifest name, 0 = missing [default for textremove: text_mask].
    #[arg(long)]
    mask: Option<String>,
    /// deblur: uniform<side>, gaussian<side>:<sigma> or motion<len>:<angle> [default: uniform9].
    #[arg(long)]
    kernel: Option<String>,
    /// spn: noise density [default: 0.3].
    #[arg(long)]
    density: Option<f64>,
    /// deblur/denoise: Gaussian noise level [default: 1.414 for deblur, 20 for denoise].
    #[arg(long)]
    sigma: Option<f64>,
    /// Penalty parameter [default: from the built-in table].
    #[arg(long)]
    mu: Option<f64>,
    /// Regularization weight [default: from the built-in table].
    #[arg(long)]
    lambda: Option<f64>,
    /// Patches per group [default: 60].
    #[arg(long)]
    group_size: Option<usize>,
    /// Patch side [default: 6 cs, 10 textremove, 8 otherwise].
    #[arg(long)]
    patch_side: Option<usize>,
    /// Reference patch stride [default: 5 for side >= 10, else 4].
    #[arg(long)]
    stride: Option<usize>,
    /// Search window side [default: 20].
    #[arg(long)]
    search_window: Option<usize>,
    /// Maximum outer iterations [default: 200 inpaint/textremove/spn, 100 otherwise].
    #[arg(long)]
    iters: Option<usize>,
    /// Reweighting passes per group [default: 2].
    #[arg(long)]
    inner_iters: Option<usize>,
    /// cs: gradient steps per z-update [default: 200].
    #[arg(long)]
    grad_steps: Option<usize>,
    /// Relative-change stopping threshold [default: 5e-4].
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads [default: all cores].
    #[arg(long)]
    threads: Option<usize>,
}

impl From<RunArgs> for TaskConfig {
    fn from(a: RunArgs) -> Self {
        TaskConfig {
            task: a.task,
            input: a.input,
            degraded: a.degraded,
            output: a.output,
            trace: a.trace,
            report: a.report,
            save_degraded: a.save_degraded,
            p: a.p,
            subrate: a.subrate,
            missing: a.missing,
            mask: a.mask,
            kernel: a.kernel,
            density: a.density,
            sigma: a.sigma,
            mu: a.mu,
            lambda: a.lambda,
            group_size: a.group_size,
            patch_side: a.patch_side,
            stride: a.stride,
            search_window: a.search_window,
            iters: a.iters,
            inner_iters: a.inner_iters,
            grad_steps: a.grad_steps,
            tol: a.tol,
            seed: a.seed,
            threads: a.threads,
        }
    }
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run(args) => match run_task(&args.into()) {
            Ok(report) => {
                println!("{}", report.summary_line());
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {}", e);
                ExitCode::FAILURE
            }
        },
        Command::Verify => {
            let checks = run_checks();
            print_table(&checks);
            if checks.iter().all(|c| c.passed) {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
