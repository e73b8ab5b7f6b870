use std::fs::File;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rbmlab::{run_study, StudyConfig, StudyError};
use rbmlab_core::chaos::write_clean_csv;
use rbmlab_core::wasserstein::w_q;
use rbmlab_core::{epsilon_exact, epsilon_mc, fp_solve, stable_dt, Ensemble, GridDensity, Preset};
use serde_json::json;

#[derive(Parser)]
#[command(name = "rbmlab", version, about = "Random batch convergence studies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Runs a study; exits 1 when any check fails.
    Run {
        study: String,
        #[arg(long)]
        config: PathBuf,
        /// Output directory; defaults to the config's output path, then `results`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Wasserstein distance between two particle CSV files.
    Wasserstein {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        q: f64,
    },
    /// Solves the Fokker-Planck equation of a preset from a standard Gaussian.
    Fp {
        #[arg(long)]
        preset: String,
        #[arg(long = "T")]
        t: f64,
        #[arg(long, default_value_t = 8.0)]
        half_width: f64,
        #[arg(long, default_value_t = 512)]
        cells: usize,
        /// Writes the final density to `<out>/fp_density.csv`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Probability that particle 1 is not clean after k divisions.
    Chaos {
        #[arg(long = "N")]
        n: usize,
        #[arg(long)]
        p: usize,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 100_000)]
        replicates: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Enumerates all partition sequences instead of sampling.
        #[arg(long)]
        exact: bool,
    },
}

fn run(cli: Cli) -> Result<bool, StudyError> {
    match cli.command {
        Command::Run { study, config, out } => {
            let cfg = StudyConfig::load(&config)?;
            if cfg.study != study {
                return Err(StudyError::Config(format!(
                    "config is for study '{}', not '{study}'",
                    cfg.study
                )));
            }
            let report = run_study(&cfg)?;
            let dir = out.or_else(|| cfg.output.clone()).unwrap_or_else(|| "results".into());
            for path in report.write(&dir)? {
                eprintln!("wrote {}", path.display());
            }
            for c in &report.checks {
                println!("{} {}: {} ({})", if c.passed { "PASS" } else { "FAIL" }, c.name, c.value, c.threshold);
            }
            for (name, fit) in &report.fits {
                println!("fit {name}: slope {:.4} interval {:?}", fit.slope, fit.interval);
            }
            Ok(report.passed())
        }
        Command::Wasserstein { a, b, q } => {
            let ea = Ensemble::<f64>::read_csv(File::open(&a)?)?;
            let eb = Ensemble::<f64>::read_csv(File::open(&b)?)?;
            let r = w_q(&ea.empirical_measure(), &eb.empirical_measure(), q)?;
            println!("{}", serde_json::to_string_pretty(&r)?);
            Ok(true)
        }
        Command::Fp { preset, t, half_width, cells, out } => {
            let p = Preset::<f64>::get(&preset)?;
            let rho0 = GridDensity::gaussian(half_width, cells, 0.0, 1.0)?;
            let dt = 0.5 * stable_dt(&rho0, &p.model)?;
            let traj = fp_solve(&rho0, &p.model, t, dt, &[])?;
            let last = traj.last();
            let summary = json!({
                "preset": preset,
                "T": t,
                "mean": last.mean(),
                "variance": last.variance(),
                "mass": last.mass(),
                "analytic": p.analytic_facts,
                "diagnostics": traj.diagnostics(),
            });
            println!("{}", serde_json::to_string_pretty(&summary)?);
            if let Some(dir) = out {
                std::fs::create_dir_all(&dir)?;
                last.write_csv(File::create(dir.join("fp_density.csv"))?)?;
            }
            Ok(true)
        }
        Command::Chaos { n, p, k, replicates, seed, exact } => {
            let r = if exact { epsilon_exact(n, p, k)? } else { epsilon_mc(n, p, k, replicates, seed)? };
            write_clean_csv(&[r], std::io::stdout())?;
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
