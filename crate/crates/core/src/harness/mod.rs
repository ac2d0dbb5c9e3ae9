//! Experiment orchestration: JSON configs, seeded runs on a worker pool,
//! reports with CSV tables, and merging of reports across seeds.

mod config;
mod experiments;
mod report;

pub use config::{Experiment, ExperimentConfig, GridConfig, KernelSpec, Params};
pub use report::{merge, Check, ClippingEntry, Estimate, EstimateReport, RngProvenance, Table, Timing};

use crate::error::{Error, Result};
use std::time::Instant;

/// Worker count for `requested`, where 0 means every available core.
pub fn resolve_workers(requested: usize) -> usize {
    if requested > 0 {
        requested
    } else {
        std::thread::available_parallelism().map_or(1, |n| n.get())
    }
}

/// Runs `f` on a dedicated pool of `workers` threads.
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(resolve_workers(workers))
        .build()
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    Ok(pool.install(f))
}

/// Runs the configured experiment and, when `config.out` is set, writes the
/// report and its tables there. Numeric output depends only on the config
/// and seed, not on the worker count.
pub fn run_experiment(config: &ExperimentConfig) -> Result<EstimateReport> {
    config.validate()?;
    let workers = resolve_workers(config.workers);
    let start = Instant::now();
    let out = with_workers(workers, || experiments::dispatch(config))??;
    let report = EstimateReport {
        experiment: config.experiment,
        config: config.clone(),
        config_hash: config.hash(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        rng: RngProvenance {
            master_seed: config.seed,
            generator: "ChaCha8 streams keyed by splitmix64(master, axis, index)".into(),
        },
        seeds: vec![config.seed],
        estimates: out.estimates,
        checks: out.checks,
        results: serde_json::Value::Object(out.results),
        tables: out.tables,
        clipping: out.clipping,
        warnings: out.warnings,
        timing: Timing {
            wall_seconds: start.elapsed().as_secs_f64(),
            workers,
        },
    };
    if let Some(dir) = &config.out {
        report.write(dir)?;
    }
    Ok(report)
}
