use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ffdga_cli::commands;
use ffdga_cli::{CliError, RunConfig};

/// B-spline deformation estimation with a probabilistic bitwise GA.
///
/// Defaults: levels=3, base_k=base_l=3, bits_per_param=5, radius=3 follow the
/// published protocol. w_max=0.5, s_bit=2, s_fit=0.3, e=1, p_min=0.1,
/// g_size=200, population=50 are implementation defaults. Any of them can be
/// set in a `key = value` file (--config) or with --set key=value.
#[derive(Parser, Debug)]
#[command(name = "ffdga", version, about, long_about)]
struct Cli {
    /// Configuration file of `key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed for every random choice.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker thread cap (0 = all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Override one config key, e.g. --set g_size=50. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Estimate the deformation from SOURCE to TARGET.
    Estimate {
        #[arg(long)]
        source: PathBuf,
        #[arg(long)]
        target: PathBuf,
    },
    /// Warp SOURCE by a lattice file.
    Warp {
        #[arg(long)]
        source: PathBuf,
        #[arg(long)]
        lattice: PathBuf,
    },
    /// Generate a synthetic target, ground-truth lattice and landmarks.
    Synth {
        /// Source image; a procedural texture is used when omitted.
        #[arg(long)]
        image: Option<PathBuf>,
    },
    /// Run the synthetic benchmark against the crossover+mutation baseline.
    Bench,
}

fn config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &cli.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        cfg.apply_str(&text)?;
    }
    for kv in &cli.overrides {
        cfg.apply_override(kv)?;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(threads) = cli.threads {
        cfg.threads = threads;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = config(&cli)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    pool.install(|| match &cli.command {
        Command::Estimate { source, target } => {
            let r = commands::estimate(source, target, &cfg, &cli.out)?;
            let last = r.levels.last().expect("at least one level");
            println!("final SAD {} (max node displacement {:.3} px)", last.elite_sad, r.lattice.max_norm());
            Ok(())
        }
        Command::Warp { source, lattice } => {
            let path = commands::warp_cmd(source, lattice, &cli.out)?;
            println!("wrote {}", path.display());
            Ok(())
        }
        Command::Synth { image } => commands::synth(image.as_deref(), &cfg, &cli.out),
        Command::Bench => {
            let report = commands::bench(&cfg, &cli.out)?;
            let ok = report.successes().count();
            if ok > 0 {
                println!(
                    "{ok}/{} cases: mean RMSE pbo {:.3} px, baseline {:.3} px, identity {:.3} px",
                    report.cases.len(),
                    report.mean_rmse_pbo(),
                    report.mean_rmse_baseline(),
                    report.mean_rmse_identity()
                );
            }
            Ok(())
        }
    })
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
