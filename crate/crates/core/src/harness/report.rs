use super::config::{Experiment, ExperimentConfig};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

/// A named scalar with its standard error and sample count; the unit of merging.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub name: String,
    #[serde(with = "nan_as_null")]
    pub value: f64,
    #[serde(with = "nan_as_null")]
    pub stderr: f64,
    pub n: usize,
}

impl Estimate {
    pub fn new(name: impl Into<String>, value: f64, stderr: f64, n: usize) -> Self {
        Self {
            name: name.into(),
            value,
            stderr,
            n,
        }
    }
}

/// Outcome of one pass/fail criterion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClippingEntry {
    pub label: String,
    /// Fraction of spectral mass removed by eigenvalue clipping.
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RngProvenance {
    pub master_seed: u64,
    pub generator: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub wall_seconds: f64,
    pub workers: usize,
}

/// A CSV table written next to the JSON report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    #[serde(with = "nan_as_null::rows")]
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Self {
            name: name.into(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{}", self.header.join(","))?;
        for r in &self.rows {
            let cells: Vec<String> = r.iter().map(|v| v.to_string()).collect();
            writeln!(w, "{}", cells.join(","))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub experiment: Experiment,
    pub config: ExperimentConfig,
    pub config_hash: String,
    pub version: String,
    pub rng: RngProvenance,
    /// Master seeds of the runs pooled into this report.
    pub seeds: Vec<u64>,
    pub estimates: Vec<Estimate>,
    pub checks: Vec<Check>,
    /// Experiment-specific detail.
    pub results: serde_json::Value,
    pub tables: Vec<Table>,
    pub clipping: Vec<ClippingEntry>,
    pub warnings: Vec<String>,
    pub timing: Timing,
}

impl EstimateReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn estimate(&self, name: &str) -> Option<&Estimate> {
        self.estimates.iter().find(|e| e.name == name)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// The report without the fields allowed to vary between identical runs
    /// (timing, worker count and output directory).
    pub fn reproducible_json(&self) -> String {
        let mut r = self.clone();
        r.timing = Timing {
            wall_seconds: 0.0,
            workers: 0,
        };
        r.config.workers = 0;
        r.config.out = None;
        serde_json::to_string(&r).expect("report serializes")
    }

    /// Writes `<experiment>.json` and `<experiment>_<table>.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let stem = self.experiment.name();
        let json = serde_json::to_string_pretty(self)?;
        std::fs::write(dir.join(format!("{stem}.json")), json)?;
        for t in &self.tables {
            let f = std::fs::File::create(dir.join(format!("{stem}_{}.csv", t.name)))?;
            t.write_csv(std::io::BufWriter::new(f))?;
        }
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Pools estimates by name with inverse-variance weights. Reports must share
/// a config hash; sample counts add up. Checks, tables and results of the
/// inputs are kept under `results.inputs` and not re-evaluated.
pub fn merge(reports: &[EstimateReport]) -> Result<EstimateReport> {
    let first = reports.first().ok_or(Error::EmptySamples)?;
    if reports.iter().any(|r| r.config_hash != first.config_hash) {
        return Err(Error::ConfigHashMismatch);
    }
    let mut groups: BTreeMap<&str, Vec<&Estimate>> = BTreeMap::new();
    let mut order = Vec::new();
    for r in reports {
        for e in &r.estimates {
            let g = groups.entry(e.name.as_str()).or_default();
            if g.is_empty() {
                order.push(e.name.as_str());
            }
            g.push(e);
        }
    }
    let estimates = order
        .into_iter()
        .map(|name| {
            let g = &groups[name];
            let n = g.iter().map(|e| e.n).sum();
            if g.iter().all(|e| e.stderr > 0.0 && e.stderr.is_finite()) {
                let w: Vec<f64> = g.iter().map(|e| e.stderr.powi(-2)).collect();
                let wsum: f64 = w.iter().sum();
                let value = g.iter().zip(&w).map(|(e, w)| e.value * w).sum::<f64>() / wsum;
                Estimate::new(name, value, wsum.sqrt().recip(), n)
            } else {
                // Exact or undetermined errors: weight by sample count.
                let value = g.iter().map(|e| e.value * e.n as f64).sum::<f64>() / n.max(1) as f64;
                let stderr = if g.iter().all(|e| e.stderr == 0.0) { 0.0 } else { f64::NAN };
                Estimate::new(name, value, stderr, n)
            }
        })
        .collect();
    let mut seeds: Vec<u64> = reports.iter().flat_map(|r| r.seeds.iter().copied()).collect();
    seeds.sort_unstable();
    let mut warnings: Vec<String> = reports.iter().flat_map(|r| r.warnings.iter().cloned()).collect();
    warnings.dedup();
    Ok(EstimateReport {
        experiment: first.experiment,
        config: first.config.clone(),
        config_hash: first.config_hash.clone(),
        version: first.version.clone(),
        rng: first.rng.clone(),
        seeds,
        estimates,
        checks: Vec::new(),
        results: serde_json::json!({
            "inputs": reports.iter().map(|r| serde_json::json!({
                "seeds": r.seeds,
                "checks": r.checks,
                "results": r.results,
            })).collect::<Vec<_>>(),
        }),
        tables: Vec::new(),
        clipping: reports.iter().flat_map(|r| r.clipping.iter().cloned()).collect(),
        warnings,
        timing: Timing {
            wall_seconds: reports.iter().map(|r| r.timing.wall_seconds).sum(),
            workers: first.timing.workers,
        },
    })
}

/// JSON has no NaN; undefined values travel as `null`.
mod nan_as_null {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        v.is_finite().then_some(*v).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }

    pub mod rows {
        use super::*;

        pub fn serialize<S: Serializer>(v: &[Vec<f64>], s: S) -> Result<S::Ok, S::Error> {
            let rows: Vec<Vec<Option<f64>>> = v
                .iter()
                .map(|r| r.iter().map(|x| x.is_finite().then_some(*x)).collect())
                .collect();
            rows.serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<f64>>, D::Error> {
            let rows = Vec::<Vec<Option<f64>>>::deserialize(d)?;
            Ok(rows
                .into_iter()
                .map(|r| r.into_iter().map(|x| x.unwrap_or(f64::NAN)).collect())
                .collect())
        }
    }
}
