use clap::{Args, Parser, Subcommand};
use liouville_area::area::{area_process, path_window, AreaMode};
use liouville_area::field::FieldSampler;
use liouville_area::gmc::{gmc_from_field, GmcEnsemble, GmcSample};
use liouville_area::harness::{merge, run_experiment, with_workers, EstimateReport, Experiment, ExperimentConfig};
use liouville_area::io::persist_ensemble;
use liouville_area::rng::{derive_seed, Axis};
use liouville_area::winding::winding_field;
use liouville_area::{Error, Result};
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

const EXIT_CONFIG: u8 = 2;
const EXIT_PRECONDITION: u8 = 3;
const EXIT_ASSERT: u8 = 4;

/// Lévy area against Gaussian multiplicative chaos: Monte Carlo experiments.
#[derive(Parser)]
#[command(name = "liouville-area", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON experiment config.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; without it reports are printed as JSON.
    #[arg(long, global = true, env = "LIOUVILLE_AREA_OUT")]
    out: Option<PathBuf>,
    /// Worker threads, 0 for all cores.
    #[arg(long, global = true, env = "LIOUVILLE_AREA_WORKERS")]
    workers: Option<usize>,
    /// Replace the gamma list with a single value.
    #[arg(long, global = true)]
    gamma: Option<f64>,
    /// Grid size and spacing.
    #[arg(long, global = true, num_args = 3, value_names = ["NX", "NY", "H"])]
    grid: Option<Vec<String>>,
    /// Only report errors.
    #[arg(long, global = true)]
    quiet: bool,
    /// Exit with status 4 when any acceptance check fails.
    #[arg(long, global = true)]
    assert: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment named in the config.
    Run,
    /// Sample log-correlated fields and write binary and CSV dumps.
    Field {
        #[arg(long, default_value_t = 1)]
        count: u64,
    },
    /// Write a chaos ensemble directory with a manifest.
    Gmc {
        #[arg(long, default_value_t = 4)]
        count: u64,
    },
    /// Winding field of a curve from the config.
    Winding {
        /// Path index within the curve family.
        #[arg(long, default_value_t = 0)]
        index: u64,
    },
    /// Area process of one path against one chaos sample.
    Levyarea {
        #[arg(long, default_value_t = 0)]
        index: u64,
        /// Clamp windings at K instead of summing all levels.
        #[arg(long)]
        cutoff: Option<u32>,
    },
    /// Summation by parts, Chen relations and inclusions on random instances.
    Chen,
    /// Second-moment scaling exponent.
    Scaling,
    /// Werner's winding-area law, or circle-chain level areas.
    Werner,
    /// Decay of compensated level-set masses.
    Tail,
    /// Level-set masses against the piecewise proxy.
    Proxy,
    /// Regularity exponent and rectangle statistics of the area process.
    Regularity,
    /// Properties of the rectangle-folding map.
    PhiMap,
    /// Operations on existing reports.
    Report {
        #[command(subcommand)]
        action: ReportAction,
    },
}

#[derive(Subcommand)]
enum ReportAction {
    /// Pool reports that share a configuration.
    Merge { reports: Vec<PathBuf> },
}

fn config_for(common: &Common, experiment: Option<Experiment>) -> Result<ExperimentConfig> {
    let mut cfg = match (&common.config, experiment) {
        (Some(path), _) => ExperimentConfig::from_file(path)?,
        (None, Some(e)) => ExperimentConfig::new(e),
        (None, None) => {
            return Err(Error::Config {
                path: "--config".into(),
                message: "required for this command".into(),
            })
        }
    };
    if let Some(e) = experiment {
        if cfg.experiment != e {
            let defaults = ExperimentConfig::new(e);
            cfg.experiment = e;
            if cfg.curve.is_none() {
                cfg.curve = defaults.curve;
            }
        }
    }
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(o) = &common.out {
        cfg.out = Some(o.clone());
    }
    if let Some(w) = common.workers {
        cfg.workers = w;
    }
    if let Some(g) = common.gamma {
        cfg.gammas = vec![g];
    }
    if let Some(v) = &common.grid {
        let bad = |m: String| Error::Config {
            path: "--grid".into(),
            message: m,
        };
        cfg.grid.nx = v[0].parse().map_err(|e| bad(format!("NX: {e}")))?;
        cfg.grid.ny = v[1].parse().map_err(|e| bad(format!("NY: {e}")))?;
        cfg.grid.h = v[2].parse().map_err(|e| bad(format!("H: {e}")))?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn out_dir(cfg: &ExperimentConfig) -> PathBuf {
    cfg.out.clone().unwrap_or_else(|| PathBuf::from("."))
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    std::fs::create_dir_all(dir)?;
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn say(common: &Common, msg: impl AsRef<str>) {
    if !common.quiet {
        println!("{}", msg.as_ref());
    }
}

/// Prints the checks (or the whole report without an output directory) and
/// returns whether every check passed.
fn present(common: &Common, report: &EstimateReport) -> Result<bool> {
    if common.quiet {
        return Ok(report.passed());
    }
    if report.config.out.is_none() {
        println!("{}", serde_json::to_string_pretty(report)?);
    } else {
        for c in &report.checks {
            println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
        }
        for w in &report.warnings {
            println!("warning: {w}");
        }
    }
    Ok(report.passed())
}

fn run_tool(common: &Common, command: &Command) -> Result<bool> {
    let experiment = match command {
        Command::Run => None,
        Command::Chen => Some(Experiment::Chen),
        Command::Scaling => Some(Experiment::Scaling),
        Command::Werner => Some(Experiment::Werner),
        Command::Tail => Some(Experiment::TailDecay),
        Command::Proxy => Some(Experiment::ProxyComparison),
        Command::Regularity => Some(Experiment::Regularity),
        Command::PhiMap => Some(Experiment::PhiMap),
        Command::Field { .. } | Command::Gmc { .. } | Command::Winding { .. } | Command::Levyarea { .. } => {
            Some(Experiment::Chen)
        }
        Command::Report { action } => {
            let ReportAction::Merge { reports } = action;
            let loaded = reports.iter().map(|p| EstimateReport::read(p)).collect::<Result<Vec<_>>>()?;
            let merged = merge(&loaded)?;
            match &common.out {
                Some(dir) => {
                    merged.write(dir)?;
                    say(common, format!("merged {} reports into {}", loaded.len(), dir.display()));
                }
                None => say(common, serde_json::to_string_pretty(&merged)?),
            }
            return Ok(true);
        }
    };
    let cfg = config_for(common, experiment)?;
    match command {
        Command::Field { count } => {
            let dir = out_dir(&cfg);
            let sampler = FieldSampler::auto(&cfg.kernel()?, &cfg.grid_spec()?)?;
            for k in 0..*count {
                let f = sampler.sample(cfg.seed, k);
                f.write_binary(create(&dir, &format!("field_{k:06}.bin"))?)?;
                f.write_csv(create(&dir, &format!("field_{k:06}.csv"))?)?;
            }
            say(common, format!("wrote {count} fields to {} (clipped fraction {:.3e})", dir.display(), sampler.clipped_fraction()));
        }
        Command::Gmc { count } => {
            let dir = out_dir(&cfg).join("gmc");
            let sampler = Arc::new(FieldSampler::auto(&cfg.kernel()?, &cfg.grid_spec()?)?);
            let ens = GmcEnsemble::new(sampler, cfg.gammas[0], cfg.seed, *count as usize)?;
            let m = with_workers(cfg.workers, || persist_ensemble(&ens, &dir, 0..*count))??;
            say(common, format!("wrote {} samples and manifest.json to {}", m.files.len(), dir.display()));
        }
        Command::Winding { index } => {
            let dir = out_dir(&cfg);
            let spec = cfg.curve.clone().expect("validated");
            let path = spec.build(cfg.seed, *index)?;
            let closed = path.closure();
            let grid = path_window(&closed, cfg.grid.h, cfg.seed, *index)?;
            let wf = winding_field(&closed, &grid)?;
            path.write_csv(create(&dir, "polyline.csv")?)?;
            path.write_binary(create(&dir, "polyline.bin")?)?;
            wf.write_binary(create(&dir, "winding.bin")?)?;
            wf.histogram().write_csv(create(&dir, "winding_histogram.csv")?)?;
            say(common, format!("{}x{} window, max |winding| {}", grid.nx, grid.ny, wf.max_abs()));
        }
        Command::Levyarea { index, cutoff } => {
            let dir = out_dir(&cfg);
            let spec = cfg.curve.clone().expect("validated");
            let path = spec.build(cfg.seed, *index)?;
            let grid = path_window(&path, cfg.grid.h, cfg.seed, *index)?;
            let gamma = cfg.gammas[0];
            let gmc = if gamma == 0.0 {
                GmcSample::lebesgue(grid)
            } else {
                let sampler = FieldSampler::auto(&cfg.kernel()?, &grid)?;
                gmc_from_field(&sampler.sample(derive_seed(cfg.seed, Axis::Gmc, *index), 0), gamma)?
            };
            let mode = cutoff.map_or(AreaMode::Full, AreaMode::Cutoff);
            let aps = with_workers(cfg.workers, || area_process(&path, &gmc, cfg.depth, mode))??;
            let mut w = create(&dir, "levyarea.csv")?;
            use std::io::Write;
            writeln!(w, "i,j,s,t,area,correction")?;
            let n = aps.steps() as f64;
            for (i, j, a) in aps.pairs() {
                writeln!(w, "{i},{j},{},{},{a},{}", i as f64 / n, j as f64 / n, aps.correction(i, j))?;
            }
            say(common, format!("A(0,1) = {:.6e} over {} pairs", aps.get(0, aps.steps()), aps.values.len()));
        }
        _ => {
            let report = run_experiment(&cfg)?;
            return present(common, &report);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run_tool(&cli.common, &cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) if cli.common.assert => {
            eprintln!("acceptance checks failed");
            ExitCode::from(EXIT_ASSERT)
        }
        Ok(false) => ExitCode::SUCCESS,
        Err(e @ (Error::Config { .. } | Error::Json(_) | Error::ConfigHashMismatch)) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_PRECONDITION)
        }
    }
}
