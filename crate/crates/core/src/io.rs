//! On-disk formats for fields and chaos ensembles.
//!
//! Grids of `f64` share one binary layout: a 4-byte magic, `nx` and `ny` as
//! `u32`, then `x0`, `y0`, `h` as `f64`, then the row-major values, all
//! little endian.

use crate::error::{Error, Result};
use crate::field::{ScalarField, SamplingMethod};
use crate::gmc::{GmcEnsemble, GmcSample};
use crate::grid::GridSpec;
use serde::{Deserialize, Serialize};
use std::fs::{self, File};
use std::io::{BufWriter, Read, Write};
use std::path::Path;

pub const FIELD_MAGIC: &[u8; 4] = b"FLD1";
pub const GMC_MAGIC: &[u8; 4] = b"GMC1";

pub fn write_grid_values<W: Write>(mut w: W, magic: &[u8; 4], grid: &GridSpec, values: &[f64]) -> Result<()> {
    w.write_all(magic)?;
    w.write_all(&(grid.nx as u32).to_le_bytes())?;
    w.write_all(&(grid.ny as u32).to_le_bytes())?;
    for v in [grid.x0, grid.y0, grid.h] {
        w.write_all(&v.to_le_bytes())?;
    }
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_grid_values<R: Read>(mut r: R, magic: &[u8; 4]) -> Result<(GridSpec, Vec<f64>)> {
    let mut head = [0u8; 36];
    r.read_exact(&mut head)?;
    if &head[..4] != magic {
        return Err(Error::Format("bad magic".into()));
    }
    let u = |k: usize| u32::from_le_bytes(head[k..k + 4].try_into().expect("4 bytes")) as usize;
    let f = |k: usize| f64::from_le_bytes(head[k..k + 8].try_into().expect("8 bytes"));
    let grid = GridSpec::new(f(12), f(20), f(28), u(4), u(8))?;
    let mut body = Vec::new();
    r.read_to_end(&mut body)?;
    if body.len() != 8 * grid.cells() {
        return Err(Error::InvalidArgument(format!(
            "expected {} values, found {} bytes",
            grid.cells(),
            body.len()
        )));
    }
    let values = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Ok((grid, values))
}

/// `x,y,value` per cell center, row-major.
pub fn write_grid_csv<W: Write>(mut w: W, grid: &GridSpec, values: &[f64]) -> Result<()> {
    writeln!(w, "x,y,value")?;
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let c = grid.center(i, j);
            writeln!(w, "{},{},{}", c.x, c.y, values[grid.index(i, j)])?;
        }
    }
    Ok(())
}

impl ScalarField {
    pub fn write_binary<W: Write>(&self, w: W) -> Result<()> {
        write_grid_values(w, FIELD_MAGIC, &self.grid, &self.values)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        write_grid_csv(w, &self.grid, &self.values)
    }
}

impl GmcSample {
    pub fn write_binary<W: Write>(&self, w: W) -> Result<()> {
        write_grid_values(w, GMC_MAGIC, &self.grid, &self.masses)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        write_grid_csv(w, &self.grid, &self.masses)
    }
}

/// `manifest.json` of a persisted ensemble directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleManifest {
    pub kernel: String,
    pub gamma: f64,
    pub seed: u64,
    /// Half-open range of sample indices stored in the directory.
    pub indices: (u64, u64),
    pub grid: GridSpec,
    pub method: SamplingMethod,
    pub clipped_fraction: f64,
    /// File name of each sample, in index order.
    pub files: Vec<String>,
}

/// Writes samples `range` of `ens` as `gmc_<index>.bin` plus `manifest.json`.
pub fn persist_ensemble(ens: &GmcEnsemble, dir: &Path, range: std::ops::Range<u64>) -> Result<EnsembleManifest> {
    if range.end > ens.size as u64 {
        return Err(Error::InvalidArgument("range exceeds the ensemble size".into()));
    }
    fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    for k in range.clone() {
        let name = format!("gmc_{k:06}.bin");
        let sample = ens.sample(k as usize);
        sample.write_binary(BufWriter::new(File::create(dir.join(&name))?))?;
        files.push(name);
    }
    let sampler = &ens.sampler;
    let manifest = EnsembleManifest {
        kernel: sampler.kernel().describe(),
        gamma: ens.gamma,
        seed: ens.seed,
        indices: (range.start, range.end),
        grid: *sampler.grid(),
        method: sampler.method(),
        clipped_fraction: sampler.clipped_fraction(),
        files,
    };
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    fs::write(dir.join("manifest.json"), json)?;
    Ok(manifest)
}

/// Reads the manifest and the mass arrays of a persisted ensemble.
pub fn load_ensemble(dir: &Path) -> Result<(EnsembleManifest, Vec<Vec<f64>>)> {
    let text = fs::read_to_string(dir.join("manifest.json"))?;
    let manifest: EnsembleManifest = serde_json::from_str(&text).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut out = Vec::with_capacity(manifest.files.len());
    for name in &manifest.files {
        let (grid, values) = read_grid_values(File::open(dir.join(name))?, GMC_MAGIC)?;
        grid.same_as(&manifest.grid)?;
        out.push(values);
    }
    Ok((manifest, out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{CovarianceKernel, FieldSampler};
    use std::sync::Arc;

    #[test]
    fn binary_round_trip() {
        let grid = GridSpec::new(-0.5, 0.25, 0.125, 3, 2).unwrap();
        let vals: Vec<f64> = (0..6).map(|k| k as f64 * 0.3 - 1.0).collect();
        let mut buf = Vec::new();
        write_grid_values(&mut buf, FIELD_MAGIC, &grid, &vals).unwrap();
        assert_eq!(buf.len(), 36 + 48);
        let (g, v) = read_grid_values(&buf[..], FIELD_MAGIC).unwrap();
        assert_eq!(g, grid);
        assert_eq!(v, vals);
        assert!(read_grid_values(&buf[..], GMC_MAGIC).is_err());
        assert!(read_grid_values(&buf[..40], FIELD_MAGIC).is_err());
    }

    #[test]
    fn csv_layout() {
        let grid = GridSpec::new(0.0, 0.0, 0.5, 2, 1).unwrap();
        let mut buf = Vec::new();
        write_grid_csv(&mut buf, &grid, &[1.0, 2.0]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "x,y,value\n0.25,0.25,1\n0.75,0.25,2\n");
    }

    #[test]
    fn ensemble_directory() {
        let dir = tempfile::tempdir().unwrap();
        let grid = GridSpec::square(8, 1.0).unwrap();
        let sampler = Arc::new(FieldSampler::auto(&CovarianceKernel::pure_log(), &grid).unwrap());
        let ens = GmcEnsemble::new(sampler, 0.5, 11, 4).unwrap();
        let m = persist_ensemble(&ens, dir.path(), 1..3).unwrap();
        assert_eq!(m.files.len(), 2);
        let (m2, data) = load_ensemble(dir.path()).unwrap();
        assert_eq!(m, m2);
        assert_eq!(data[1], ens.sample(2).masses);
    }
}
