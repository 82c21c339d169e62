use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use marsm_core::bench::{self, BenchError, RunConfig, VerifyOptions};

#[derive(Parser)]
#[command(name = "marsm", version, about = "Seeded benchmark harness for Muon, Moonlight and MARS-M")]
struct Cli {
    /// Print nothing on success.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one config and write `<out>/<name>_seed<seed>.csv` plus a summary.
    Run(RunArgs),
    /// Run several configs over several seeds and rank them.
    Compare(CompareArgs),
    /// Fit the log-log slope of a column's running mean.
    FitSlope(FitSlopeArgs),
    /// Run the built-in invariant checks.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults to the config's `out`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the config's seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct CompareArgs {
    /// Repeat once per config.
    #[arg(long, required = true)]
    config: Vec<PathBuf>,
    #[arg(long, default_value = "compare")]
    out: PathBuf,
    /// Comma-separated seeds; defaults to each config's own seed.
    #[arg(long, value_delimiter = ',')]
    seeds: Vec<u64>,
    /// Single seed, same as `--seeds <n>`.
    #[arg(long, conflicts_with = "seeds")]
    seed: Option<u64>,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct FitSlopeArgs {
    csv: PathBuf,
    #[arg(long, default_value = "true_grad_norm")]
    column: String,
    #[arg(long, default_value_t = bench::DEFAULT_BURN_IN)]
    burn_in: f64,
}

#[derive(Args)]
struct VerifyArgs {
    /// Quintic Newton–Schulz steps used by the checks.
    #[arg(long, default_value_t = 5)]
    ns_steps: usize,
    /// Clip threshold used where the contract expects 1.
    #[arg(long, default_value_t = 1.0)]
    clip_threshold: f64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(cli: &Cli) -> Result<(), BenchError> {
    let say = |s: &str| {
        if !cli.quiet {
            println!("{s}");
        }
    };
    match &cli.cmd {
        Cmd::Run(a) => {
            let mut cfg = RunConfig::from_file(&a.config)?;
            if let Some(seed) = a.seed {
                cfg.set_seed(seed);
            }
            if let Some(out) = &a.out {
                cfg.set_out(out);
            }
            let out = bench::run(&cfg, &cfg.out.clone())?;
            say(&format!("wrote {}", out.csv.display()));
            say(&format!("wrote {}", out.summary.display()));
            say(&format!(
                "final loss {}  tail grad norm {}",
                bench::format_real(out.result.final_loss()),
                bench::format_real(out.result.tail_grad_norm())
            ));
            Ok(())
        }
        Cmd::Compare(a) => {
            let configs = a
                .config
                .iter()
                .map(|p| RunConfig::from_file(p))
                .collect::<Result<Vec<_>, _>>()?;
            let seeds = match (a.seed, a.seeds.is_empty()) {
                (Some(s), _) => vec![s],
                (None, false) => a.seeds.clone(),
                (None, true) => vec![configs.first().map_or(0, |c| c.seed)],
            };
            let threads = a
                .threads
                .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
            let cmp = bench::compare(&configs, &seeds, &a.out, threads)?;
            let (txt, csv) = cmp.write(&a.out)?;
            say(cmp.to_text().trim_end());
            say(&format!("wrote {} and {}", txt.display(), csv.display()));
            Ok(())
        }
        Cmd::FitSlope(a) => {
            let slope = bench::fit_slope(&a.csv, &a.column, a.burn_in)?;
            // the slope is the command's output, so it is printed even with --quiet
            println!("{}", bench::format_real(slope));
            Ok(())
        }
        Cmd::Verify(a) => {
            let checks = bench::verify(&VerifyOptions {
                ns_steps: a.ns_steps,
                clip_threshold: a.clip_threshold,
            });
            let failed = checks.iter().filter(|c| !c.passed()).count();
            for c in &checks {
                if !cli.quiet || !c.passed() {
                    println!("{c}");
                }
            }
            say(&format!("{} checks, {} failed", checks.len(), failed));
            if failed > 0 {
                return Err(BenchError::VerificationFailed { failed });
            }
            Ok(())
        }
    }
}
