use clap::{Args, Parser, Subcommand};
use qem_core::experiment::{characterize_only, exit_code, run_experiment, sigma_sweep, with_jobs, ExperimentConfig};
use qem_core::Error;
use std::path::PathBuf;
use std::process::ExitCode;

/// Error-mitigation experiments on the simulated device.
#[derive(Parser)]
#[command(name = "qem", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every configured method and write the report.
    Run(Common),
    /// Repeat the mitigated estimator over several target standard deviations.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Comma-separated sigma values.
        #[arg(long, value_delimiter = ',', required = true)]
        sigmas: Vec<f64>,
    },
    /// Benchmark each distinct hard cycle and write the error-rate reports.
    Characterize(Common),
}

#[derive(Args)]
struct Common {
    config: PathBuf,
    /// Master seed (overrides the config).
    #[arg(long)]
    seed: Option<u64>,
    /// Output path (overrides the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (overrides QEM_JOBS).
    #[arg(long)]
    jobs: Option<usize>,
}

impl Common {
    fn config(&self) -> Result<ExperimentConfig, Error> {
        let mut cfg = ExperimentConfig::load(&self.config)?;
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(o) = &self.out {
            cfg.output = Some(o.clone());
        }
        Ok(cfg)
    }
}

fn execute(cli: Cli) -> Result<String, Error> {
    match cli.command {
        Command::Run(c) => {
            let cfg = c.config()?;
            let report = with_jobs(c.jobs, || run_experiment(&cfg))??;
            let mut out = String::from("circuit,method,vd,vd_stderr,improvement\n");
            for r in &report.results {
                let imp = r.improvement.map(|v| format!("{v:.4}")).unwrap_or_default();
                out.push_str(&format!("{},{},{:.6},{:.6},{imp}\n", r.circuit, r.method, r.vd, r.vd_stderr));
            }
            Ok(out)
        }
        Command::Sweep { common, sigmas } => {
            let cfg = common.config()?;
            let report = with_jobs(common.jobs, || sigma_sweep(&cfg, &sigmas))??;
            report.to_csv()
        }
        Command::Characterize(c) => {
            let cfg = c.config()?;
            let reports = with_jobs(c.jobs, || characterize_only(&cfg))??;
            Ok(serde_json::to_string_pretty(&reports).map_err(Error::from)?)
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(s) => {
            print!("{s}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
