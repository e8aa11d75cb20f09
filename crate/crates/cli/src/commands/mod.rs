//! Command implementations behind the CLI subcommands. Each command is
//! an ordinary function over paths and a parsed configuration, so tests
//! drive them directly and `main` stays a thin argument layer.

mod evaluate;
mod fit;
mod forecast;
mod multiscale;
mod simulate;

pub use evaluate::cmd_evaluate;
pub use fit::{cmd_fit, FitOutcome};
pub use forecast::cmd_forecast;
pub use multiscale::cmd_multiscale;
pub use simulate::{cmd_simulate, SimulateConfig};

use std::collections::BTreeMap;
use std::path::Path;

use crate::errors::{CliError, Result};

/// Builds a dedicated thread pool of the requested width (`None` lets
/// the pool pick). Commands run their parallel sections inside it, so a
/// `--threads` choice never leaks into other work.
pub(crate) fn thread_pool(threads: Option<usize>) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| CliError::input(format!("thread pool: {e}")))
}

/// Runs `f` over `0..n` inside the pool, preserving index order in the
/// output regardless of schedule.
pub(crate) fn run_indexed<T, F>(pool: &rayon::ThreadPool, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    pool.install(|| (0..n).into_par_iter().map(f).collect())
}

/// Writes the per-series failure manifest (sorted, stable) and returns
/// the exit-worthy error if every series failed.
pub(crate) fn write_failures(
    out_dir: &Path,
    failures: &BTreeMap<String, String>,
) -> Result<()> {
    if failures.is_empty() {
        return Ok(());
    }
    let path = out_dir.join("failures.json");
    let text = serde_json::to_string_pretty(failures)?;
    std::fs::write(&path, text)
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    Ok(())
}

pub(crate) fn ensure_out_dir(out_dir: &Path) -> Result<()> {
    std::fs::create_dir_all(out_dir)
        .map_err(|e| CliError::input(format!("{}: {e}", out_dir.display())))
}
