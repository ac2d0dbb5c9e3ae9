//! Decay of compensated level-set masses and the piecewise proxy, estimated
//! over nested ensembles of Brownian paths and chaos measures.

use super::norm::{norm_of_terms, outer_terms, InnerMoment, NormEstimate};
use super::{closed_window, norm_pq};
use crate::curves::{sample_brownian, subdivide, Polyline};
use crate::error::{Error, Result};
use crate::field::{CovarianceKernel, FieldSampler};
use crate::gmc::{check_gamma, GmcEnsemble, GmcSample, ScalingConstants};
use crate::grid::{GridSpec, Point2};
use crate::rng::{derive_seed, stream, Axis};
use crate::stats::{bootstrap_stderr, linear_fit, LinearFit};
use crate::winding::winding_numbers;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Sizes and seeds of a nested (path × measure) ensemble.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PathEnsemble {
    pub n_steps: usize,
    pub paths: usize,
    /// Chaos samples per path.
    pub measures: usize,
    pub gamma: f64,
    /// Cell side of the per-path window.
    pub h: f64,
    pub seed: u64,
}

impl PathEnsemble {
    fn check_sizes(&self, need: usize) -> Result<()> {
        check_gamma(self.gamma)?;
        if self.paths < need {
            return Err(Error::InsufficientEnsemble {
                got: self.paths,
                need,
            });
        }
        if self.measures < need {
            return Err(Error::InsufficientEnsemble {
                got: self.measures,
                need,
            });
        }
        if !(self.h > 0.0) {
            return Err(Error::InvalidArgument("h must be positive".into()));
        }
        Ok(())
    }

    pub fn path(&self, index: usize) -> Result<Polyline> {
        sample_brownian(self.n_steps, derive_seed(self.seed, Axis::Path, index as u64))
    }

    /// Applies `f` to each chaos sample on `grid` for path `index`. At
    /// `gamma = 0` the measure is deterministic and `f` runs once.
    fn per_measure<T, F>(&self, kernel: &CovarianceKernel, grid: &GridSpec, index: usize, f: F) -> Result<Vec<T>>
    where
        T: Send + Clone,
        F: Fn(&GmcSample) -> T + Sync,
    {
        if self.gamma == 0.0 {
            return Ok(vec![f(&GmcSample::lebesgue(*grid)); self.measures]);
        }
        let sampler = Arc::new(FieldSampler::auto(kernel, grid)?);
        let ens = GmcEnsemble::new(
            sampler,
            self.gamma,
            derive_seed(self.seed, Axis::Gmc, index as u64),
            self.measures,
        )?;
        Ok(ens.map(|_, g| f(g)))
    }
}

/// Window of side `h` cells around the path with two spare cells per side
/// and a random sub-cell offset.
pub fn path_window(path: &Polyline, h: f64, seed: u64, index: u64) -> Result<GridSpec> {
    let (x_lo, x_hi, y_lo, y_hi) = path.bbox();
    let mut rng = stream(derive_seed(seed, Axis::Offset, index), 0);
    let (ox, oy): (f64, f64) = (rng.random(), rng.random());
    let x0 = x_lo - (2.0 + ox) * h;
    let y0 = y_lo - (2.0 + oy) * h;
    let nx = ((x_hi - x0) / h).ceil() as usize + 2;
    let ny = ((y_hi - y0) / h).ceil() as usize + 2;
    GridSpec::new(x0, y0, h, nx, ny)
}

fn check_levels(levels: &[u32]) -> Result<()> {
    if levels.len() < 2 || levels.iter().any(|&n| n == 0) || levels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("levels must be at least two increasing positive integers".into()));
    }
    Ok(())
}

fn check_moment(p: f64, gamma: f64) -> Result<()> {
    let max = if gamma > 0.0 { 4.0 / (gamma * gamma) } else { f64::INFINITY };
    if !(p >= 2.0 && p < max) {
        return Err(Error::MomentOutOfRange { q: p, max });
    }
    Ok(())
}

/// Log-log slope of norms against levels with a bootstrap over paths.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SlopeEstimate {
    pub fit: LinearFit,
    pub stderr: f64,
    pub ci95: (f64, f64),
}

fn slope_over_paths(levels: &[f64], terms: &[Vec<f64>], p: f64, seed: u64) -> Result<SlopeEstimate> {
    let n_paths = terms[0].len();
    let x: Vec<f64> = levels.iter().map(|n| n.ln()).collect();
    let slope_of = |idx: &[usize]| -> f64 {
        let y: Vec<f64> = terms.iter().map(|t| norm_of_terms(t, idx, p).ln()).collect();
        linear_fit(&x, &y).map(|f| f.slope).unwrap_or(f64::NAN)
    };
    let all: Vec<usize> = (0..n_paths).collect();
    let y: Vec<f64> = terms.iter().map(|t| norm_of_terms(t, &all, p).ln()).collect();
    let fit = linear_fit(&x, &y)?;
    let stderr = bootstrap_stderr(n_paths, 400, seed, slope_of);
    Ok(SlopeEstimate {
        fit,
        stderr,
        ci95: (fit.slope - 1.96 * stderr, fit.slope + 1.96 * stderr),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TailReport {
    pub levels: Vec<u32>,
    pub p: f64,
    pub gamma: f64,
    /// `‖M(D_N) - M(D_-N)‖_{p,2}` per level.
    pub compensated: Vec<NormEstimate>,
    /// `‖M(D_N)‖_{p,1}` per level.
    pub control: Vec<NormEstimate>,
    pub slope: SlopeEstimate,
    pub control_slope: SlopeEstimate,
    pub max_winding: i32,
}

/// `(M(D_N), M(D_-N))` for each level, from the cells with `|θ| >= min level`.
fn level_masses(hot: &[(usize, i32)], masses: &[f64], levels: &[u32]) -> Vec<(f64, f64)> {
    levels
        .iter()
        .map(|&n| {
            let n = n as i32;
            let (mut pos, mut neg) = (0.0, 0.0);
            for &(c, w) in hot {
                if w >= n {
                    pos += masses[c];
                } else if w <= -n {
                    neg += masses[c];
                }
            }
            (pos, neg)
        })
        .collect()
}

/// Fits the decay of `‖M(D_N) - M(D_-N)‖_{p,2}` in `N`. Windings use exact
/// center evaluation on each path's own window.
pub fn tail_decay(ens: &PathEnsemble, kernel: &CovarianceKernel, levels: &[u32], p: f64) -> Result<TailReport> {
    ens.check_sizes(32)?;
    check_levels(levels)?;
    check_moment(p, ens.gamma)?;
    let n_min = levels[0] as i32;
    let per_path: Vec<(Vec<Vec<(f64, f64)>>, i32)> = (0..ens.paths)
        .into_par_iter()
        .map(|k| {
            let path = ens.path(k)?;
            let grid = path_window(&path, ens.h, ens.seed, k as u64)?;
            let w = winding_numbers(&grid, path.closure().segments());
            let max_w = w.iter().map(|v| v.abs()).max().unwrap_or(0);
            let hot: Vec<(usize, i32)> =
                w.iter().enumerate().filter(|(_, v)| v.abs() >= n_min).map(|(c, &v)| (c, v)).collect();
            let rows = ens.per_measure(kernel, &grid, k, |g| level_masses(&hot, &g.masses, levels))?;
            Ok((rows, max_w))
        })
        .collect::<Result<_>>()?;
    let mut compensated = Vec::new();
    let mut control = Vec::new();
    let mut comp_terms = Vec::new();
    let mut ctrl_terms = Vec::new();
    for l in 0..levels.len() {
        let comp: Vec<InnerMoment> = per_path
            .iter()
            .map(|(rows, _)| {
                let z: Vec<f64> = rows.iter().map(|r| r[l].0 - r[l].1).collect();
                InnerMoment::from_samples(&z, 2.0)
            })
            .collect::<Result<_>>()?;
        let ctrl: Vec<InnerMoment> = per_path
            .iter()
            .map(|(rows, _)| {
                let z: Vec<f64> = rows.iter().map(|r| r[l].0).collect();
                InnerMoment::from_samples(&z, 1.0)
            })
            .collect::<Result<_>>()?;
        let seed = derive_seed(ens.seed, Axis::Bootstrap, l as u64);
        compensated.push(norm_pq(&comp, p, 2.0, seed)?);
        control.push(norm_pq(&ctrl, p, 1.0, seed)?);
        comp_terms.push(outer_terms(&comp, p, 2.0)?);
        ctrl_terms.push(outer_terms(&ctrl, p, 1.0)?);
    }
    let xs: Vec<f64> = levels.iter().map(|&n| n as f64).collect();
    let boot = derive_seed(ens.seed, Axis::Bootstrap, u64::MAX);
    Ok(TailReport {
        levels: levels.to_vec(),
        p,
        gamma: ens.gamma,
        slope: slope_over_paths(&xs, &comp_terms, p, boot)?,
        control_slope: slope_over_paths(&xs, &ctrl_terms, p, boot)?,
        compensated,
        control,
        max_winding: per_path.iter().map(|(_, m)| *m).max().unwrap_or(0),
    })
}

/// Empirical frequency of `F_{i,j}^c` (pieces `i`, `j` come close) against its bound.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FrequencyEntry {
    pub i: usize,
    pub j: usize,
    pub frequency: f64,
    pub stderr: f64,
    pub bound: f64,
    pub exceeds: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProxyReport {
    pub levels: Vec<u32>,
    pub t: f64,
    pub eps: f64,
    pub p: f64,
    pub gamma: f64,
    /// `T = floor(N^t)` per level.
    pub pieces: Vec<usize>,
    /// `‖M(D_N) - M_N‖_{p,2}` per level.
    pub norms: Vec<NormEstimate>,
    /// Fit over the levels with `T >= 2`; below that the difference is zero.
    pub slope: Option<SlopeEstimate>,
    /// Root mean square of `R_i = M(D^i_N) - M(D^i_-N)` per level.
    pub r_rms: Vec<f64>,
    /// `F_{i,j}^c` frequencies at the largest `T`.
    pub frequencies: Vec<FrequencyEntry>,
}

/// Compares `M(D_N)` with the proxy `M_N = Σ_i M(D^i_N)` built from the
/// chord-closed pieces of a `T = floor(N^t)` subdivision.
pub fn proxy_comparison(
    ens: &PathEnsemble,
    kernel: &CovarianceKernel,
    levels: &[u32],
    t: f64,
    eps: f64,
    p: f64,
) -> Result<ProxyReport> {
    ens.check_sizes(2)?;
    check_levels(levels)?;
    check_moment(p, ens.gamma)?;
    let nu = ScalingConstants::new(ens.gamma)?.nu;
    let t_max = (nu / 8.0 * p / (p - 1.0)).min(0.5);
    if !(t > 0.0 && t < t_max) {
        return Err(Error::HypothesisViolated(format!("t = {t} must lie in (0, {t_max:.4})")));
    }
    if !(eps > 0.0) {
        return Err(Error::HypothesisViolated("eps must be positive".into()));
    }
    let pieces: Vec<usize> = levels.iter().map(|&n| ((n as f64).powf(t).floor() as usize).max(1)).collect();
    // Per path: per measure, per level: (M(D_N) - M_N, Σ_i R_i^2).
    type Row = Vec<(f64, f64)>;
    let per_path: Vec<(Vec<Row>, Vec<Point2>)> = (0..ens.paths)
        .into_par_iter()
        .map(|k| {
            let path = ens.path(k)?;
            let grid = path_window(&path, ens.h, ens.seed, k as u64)?;
            let w = winding_numbers(&grid, path.closure().segments());
            let mut piece_windows = Vec::with_capacity(levels.len());
            for &tp in &pieces {
                let sub = subdivide(&path, tp, true)?;
                piece_windows.push(sub.pieces.iter().map(|pc| closed_window(&grid, pc)).collect::<Vec<_>>());
            }
            let rows = ens.per_measure(kernel, &grid, k, |g| {
                levels
                    .iter()
                    .zip(&piece_windows)
                    .map(|(&n, wins)| {
                        let n = n as i32;
                        let mut full = 0.0;
                        for (c, &v) in w.iter().enumerate() {
                            if v >= n {
                                full += g.masses[c];
                            }
                        }
                        let mut proxy = 0.0;
                        let mut r2 = 0.0;
                        for win in wins {
                            let (mut pos, mut neg) = (0.0, 0.0);
                            for (c, v) in win.nonzero(&grid) {
                                if v >= n {
                                    pos += g.masses[c];
                                } else if v <= -n {
                                    neg += g.masses[c];
                                }
                            }
                            proxy += pos;
                            r2 += (pos - neg) * (pos - neg);
                        }
                        (full - proxy, r2)
                    })
                    .collect::<Row>()
            })?;
            let tp = *pieces.last().expect("levels nonempty");
            let corners = (0..=tp).map(|i| path.eval(i as f64 / tp as f64)).collect();
            Ok((rows, corners))
        })
        .collect::<Result<_>>()?;

    let mut norms = Vec::new();
    let mut terms = Vec::new();
    let mut r_rms = Vec::new();
    for l in 0..levels.len() {
        let inner: Vec<InnerMoment> = per_path
            .iter()
            .map(|(rows, _)| InnerMoment::from_samples(&rows.iter().map(|r| r[l].0).collect::<Vec<_>>(), 2.0))
            .collect::<Result<_>>()?;
        norms.push(norm_pq(&inner, p, 2.0, derive_seed(ens.seed, Axis::Bootstrap, l as u64))?);
        terms.push(outer_terms(&inner, p, 2.0)?);
        let (sum, count) = per_path.iter().fold((0.0, 0usize), |(s, c), (rows, _)| {
            (s + rows.iter().map(|r| r[l].1).sum::<f64>(), c + rows.len() * pieces[l])
        });
        r_rms.push((sum / count as f64).sqrt());
    }
    let fit_levels: Vec<usize> = (0..levels.len()).filter(|&l| pieces[l] >= 2).collect();
    let slope = if fit_levels.len() >= 2 {
        let xs: Vec<f64> = fit_levels.iter().map(|&l| levels[l] as f64).collect();
        let ts: Vec<Vec<f64>> = fit_levels.iter().map(|&l| terms[l].clone()).collect();
        Some(slope_over_paths(&xs, &ts, p, derive_seed(ens.seed, Axis::Bootstrap, u64::MAX))?)
    } else {
        None
    };

    let tp = *pieces.last().expect("levels nonempty");
    let radius = (tp as f64).powf(-0.5 + eps);
    let n = per_path.len() as f64;
    let mut frequencies = Vec::new();
    for i in 0..tp {
        for j in i + 2..tp {
            let close = per_path.iter().filter(|(_, z)| z[i + 1].dist(z[j]) < radius).count() as f64;
            let frequency = close / n;
            let stderr = (frequency * (1.0 - frequency) / n).sqrt();
            let bound = (tp as f64).powf(2.0 * eps) / (2.0 * (j - i - 1) as f64);
            frequencies.push(FrequencyEntry {
                i,
                j,
                frequency,
                stderr,
                bound,
                exceeds: frequency > bound + 3.0 * stderr,
            });
        }
    }
    Ok(ProxyReport {
        levels: levels.to_vec(),
        t,
        eps,
        p,
        gamma: ens.gamma,
        pieces,
        norms,
        slope,
        r_rms,
        frequencies,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(gamma: f64, paths: usize, measures: usize) -> PathEnsemble {
        PathEnsemble {
            n_steps: 1 << 10,
            paths,
            measures,
            gamma,
            h: 1.0 / 64.0,
            seed: 9,
        }
    }

    #[test]
    fn window_holds_path_with_margin() {
        let ens = small(0.0, 1, 1);
        let path = ens.path(0).unwrap();
        let grid = path_window(&path, ens.h, 1, 0).unwrap();
        super::super::check_window(&path, &grid).unwrap();
    }

    #[test]
    fn size_and_parameter_checks() {
        let k = CovarianceKernel::pure_log();
        assert!(matches!(
            tail_decay(&small(0.0, 8, 32), &k, &[4, 8], 2.0),
            Err(Error::InsufficientEnsemble { .. })
        ));
        assert!(matches!(
            tail_decay(&small(1.5, 32, 32), &k, &[4, 8], 2.0),
            Err(Error::MomentOutOfRange { .. })
        ));
        assert!(matches!(
            proxy_comparison(&small(0.8, 4, 4), &k, &[4, 8], 0.45, 0.1, 2.0),
            Err(Error::HypothesisViolated(_))
        ));
    }

    #[test]
    fn single_piece_proxy_is_exact() {
        let k = CovarianceKernel::pure_log();
        let rep = proxy_comparison(&small(0.5, 3, 2), &k, &[1, 2], 0.2, 0.1, 2.0).unwrap();
        assert_eq!(rep.pieces, vec![1, 1]);
        assert!(rep.norms.iter().all(|n| n.value == 0.0));
        assert!(rep.slope.is_none());
    }

    #[test]
    fn lebesgue_tail_runs() {
        let k = CovarianceKernel::pure_log();
        let rep = tail_decay(&small(0.0, 32, 32), &k, &[1, 2, 4], 2.0).unwrap();
        assert_eq!(rep.compensated.len(), 3);
        assert!(rep.control.iter().all(|c| c.value > 0.0));
        assert!(rep.control_slope.fit.slope < 0.0);
        // At gamma = 0 the inner samples coincide.
        assert!(rep.compensated.iter().all(|c| c.inner.iter().all(|v| v.is_finite())));
    }
}
