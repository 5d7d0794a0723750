//! Experiment orchestration: configuration, seeded sweeps, exports and the
//! command-line front end.

mod cli;
mod config;
mod sweep;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::analytics::AnalyticsError;
use crate::attack::AttackError;
use crate::bigraph::GraphError;
use crate::bounds::BoundError;

pub use cli::cli;
pub use config::{EpsilonOverride, ExperimentConfig};
pub use sweep::{
    export_csv, export_plot_data, graph_seed, grid_params, point_graphs, run_point, run_sweep, run_sweep_with,
    trial_seed, tune_point, write_csv_row, SweepPoint, SweepResult, TrialRecord, ACCOUNTING_NOTE, CSV_HEADER,
    WORKERS_ENV,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config line {line}: {msg}")]
    Config { line: usize, msg: String },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("thread pool: {0}")]
    Pool(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Attack(#[from] AttackError),
    #[error(transparent)]
    Bound(#[from] BoundError),
    #[error(transparent)]
    Analytics(#[from] AnalyticsError),
}

pub(crate) fn io_at(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub const CSV_FILE: &str = "results.csv";
pub const PLOT_FILE: &str = "plot.dat";
pub const CONFIG_ECHO_FILE: &str = "config.txt";
pub const METADATA_FILE: &str = "metadata.txt";

/// Runs the sweep and writes the CSV, plot data, resolved config and
/// metadata into `dir`. CSV rows are flushed as points finish.
pub fn run_sweep_to_dir(cfg: &ExperimentConfig, dir: &Path) -> Result<SweepResult, HarnessError> {
    cfg.validate()?;
    fs::create_dir_all(dir).map_err(io_at(dir))?;

    let echo_path = dir.join(CONFIG_ECHO_FILE);
    fs::write(&echo_path, cfg.echo()).map_err(io_at(&echo_path))?;

    let csv_path = dir.join(CSV_FILE);
    let mut csv = BufWriter::new(File::create(&csv_path).map_err(io_at(&csv_path))?);
    writeln!(csv, "{CSV_HEADER}").map_err(io_at(&csv_path))?;
    let result = run_sweep_with(cfg, |p| {
        write_csv_row(p, &mut csv)
            .and_then(|_| csv.flush())
            .map_err(io_at(&csv_path))
    })?;
    drop(csv);

    let plot_path = dir.join(PLOT_FILE);
    let mut plot = Vec::new();
    export_plot_data(&result, &mut plot).map_err(io_at(&plot_path))?;
    fs::write(&plot_path, plot).map_err(io_at(&plot_path))?;

    let meta_path = dir.join(METADATA_FILE);
    let meta = format!(
        "accounting = {ACCOUNTING_NOTE}\ntrials_per_point = {}\nmarginal = channel output under P(R=1) = d/m\n",
        cfg.trials_per_point()
    );
    fs::write(&meta_path, meta).map_err(io_at(&meta_path))?;
    Ok(result)
}
