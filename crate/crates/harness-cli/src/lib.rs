//! Command-line front end for the linear-regression and two-layer testbeds:
//! config parsing, single runs, b₀ sweeps and the CSV/JSON outputs.

pub mod config;
pub mod experiment;
pub mod output;
pub mod sweep;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

pub use config::{parse_config, ExperimentConfig, OptimizerName, RunMode, Testbed};
pub use experiment::{run_experiment, run_point, RunOutput};
pub use output::{trajectory_csv, BoundRow, RunReport, TrajectoryRow, CSV_HEADER};
pub use sweep::{sweep_b0, sweep_csv, SweepRow, WindowCell, SWEEP_HEADER, WINDOWS};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    LinReg(#[from] linreg_lab::LinRegError),
    #[error(transparent)]
    TwoLayer(#[from] twolayer_lab::TwoLayerError),
    #[error(transparent)]
    Controller(#[from] stepsize_controllers::ControllerError),
    #[error(transparent)]
    Numerics(#[from] numerics_core::NumericsError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, HarnessError>;

pub const EXIT_OK: u8 = 0;
pub const EXIT_ERROR: u8 = 1;
pub const EXIT_DIVERGED: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "harness", version, about = "Adaptive step-size experiments on linear regression and two-layer nets")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the generated problem (data and initial weights) as JSON.
    Gen(Flags),
    /// Train once and write trajectory.csv and report.json.
    Run(Flags),
    /// Train over every b₀ in the grid and write sweep.csv.
    Sweep(Flags),
    /// Evaluate the bounds for the configuration without training.
    Verify(Flags),
    /// Eigenvalues of H^∞ and H(0) for the two-layer setup.
    Gram(Flags),
}

#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long, value_parser = ["linreg", "twolayer"])]
    pub testbed: Option<String>,
    /// One name, or a comma list for `sweep`.
    #[arg(long)]
    pub optimizer: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub b0: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub eta: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub alpha: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub c: Option<f64>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_parser = ["det", "stoch"])]
    pub mode: Option<String>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long = "b0-grid", value_name = "LIST")]
    pub b0_grid: Option<String>,
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

impl Flags {
    fn overrides(&self) -> Vec<(&'static str, String)> {
        let mut v: Vec<(&'static str, String)> = Vec::new();
        let mut put = |k: &'static str, s: Option<String>| {
            if let Some(s) = s {
                v.push((k, s));
            }
        };
        // `{:?}` keeps the exact value of each float flag
        let f = |x: Option<f64>| x.map(|x| format!("{x:?}"));
        put("testbed", self.testbed.clone());
        put("optimizer", self.optimizer.clone());
        put("b0", f(self.b0));
        put("eta", f(self.eta));
        put("alpha", f(self.alpha));
        put("c", f(self.c));
        put("n", self.n.map(|x| x.to_string()));
        put("d", self.d.map(|x| x.to_string()));
        put("m", self.m.map(|x| x.to_string()));
        put("steps", self.steps.map(|x| x.to_string()));
        put("tol", f(self.tol));
        put("seed", self.seed.map(|x| x.to_string()));
        put("mode", self.mode.clone());
        put("batch", self.batch.map(|x| x.to_string()));
        put("b0_grid", self.b0_grid.clone());
        put("jobs", self.jobs.map(|x| x.to_string()));
        put("out", self.out.as_ref().map(|p| p.display().to_string()));
        v
    }

    pub fn resolve(&self) -> Result<ExperimentConfig> {
        parse_config(self.config.as_deref(), &self.overrides())
    }
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    output::write_file(path, &serde_json::to_string_pretty(value)?)
}

fn write_run(dir: &Path, csv_name: &str, run: &RunOutput, plot: bool) -> Result<()> {
    output::write_file(&dir.join(csv_name), &trajectory_csv(&run.rows))?;
    if plot {
        let stem = csv_name.trim_end_matches(".csv");
        for (name, body) in output::plot_series(&run.rows) {
            output::write_file(&dir.join(format!("{stem}_{name}")), &body)?;
        }
    }
    Ok(())
}

/// Runs one subcommand and returns the process exit code.
pub fn execute(cli: &Cli) -> Result<u8> {
    match &cli.command {
        Command::Gen(flags) => {
            let cfg = flags.resolve()?;
            let path = cfg.out.join("problem.json");
            write_json(&path, &experiment::gen_problem_file(&cfg)?)?;
            println!("wrote {}", path.display());
            Ok(EXIT_OK)
        }
        Command::Run(flags) => {
            let cfg = flags.resolve()?;
            let run = run_experiment(&cfg)?;
            write_run(&cfg.out, "trajectory.csv", &run, cfg.plot)?;
            output::write_file(&cfg.out.join("report.json"), &run.report.to_json()?)?;
            let f = &run.report.final_state;
            println!(
                "iterations {} loss {} error {} b {} converged {} diverged {}",
                f.iterations, f.loss, f.error, f.b, run.report.flags.converged, run.report.flags.diverged
            );
            for b in &run.report.bounds {
                println!("{:<8} {} computed {} realized {}", if b.pass { "PASS" } else { "FAIL" }, b.name, b.computed, b.realized);
            }
            Ok(if run.diverged() { EXIT_DIVERGED } else { EXIT_OK })
        }
        Command::Sweep(flags) => {
            let cfg = flags.resolve()?;
            let out = sweep_b0(&cfg)?;
            let dir = cfg.out.join("sweep");
            for (i, (row, run)) in out.rows.iter().zip(&out.runs).enumerate() {
                write_run(&dir, &sweep::point_file(i, row.b0, row.optimizer), run, cfg.plot)?;
            }
            let path = cfg.out.join("sweep.csv");
            let csv = sweep_csv(&out.rows);
            output::write_file(&path, &csv)?;
            print!("{csv}");
            Ok(EXIT_OK)
        }
        Command::Verify(flags) => {
            let cfg = flags.resolve()?;
            let rows = experiment::verify_only(&cfg)?;
            write_json(&cfg.out.join("verify.json"), &serde_json::json!({ "config": cfg, "bounds": rows }))?;
            for r in &rows {
                println!("{} {}", r.name, r.computed);
            }
            Ok(EXIT_OK)
        }
        Command::Gram(flags) => {
            let cfg = flags.resolve()?;
            let g = experiment::gram_report(&cfg)?;
            write_json(&cfg.out.join("gram.json"), &g)?;
            println!(
                "lambda0 {} h_inf_norm {} lambda_min_H0 {} lambda_max_H0 {}",
                g.lambda0, g.h_inf_norm, g.lambda_min_h0, g.lambda_max_h0
            );
            Ok(EXIT_OK)
        }
    }
}
