//! Areas swept by a path and weighted by a chaos measure.
//!
//! The primitive is the integral of the winding function of a chord-closed
//! sub-path against cell masses. Level sums, dyadic area processes, Chen
//! defects and the statistics built on them all reduce to it.

mod norm;
mod regularity;
mod tail;

pub use norm::{norm_p2, norm_pq, InnerMoment, NormEstimate};
pub use regularity::{
    beta0, holder_area_bound, rectangle_j_moments, regularity_fit, BetaFit, HolderInterval, HolderMeasure,
    HolderOptions, HolderReport, JEntry, JReport,
};
pub use tail::{
    path_window, proxy_comparison, tail_decay, FrequencyEntry, PathEnsemble, ProxyReport, SlopeEstimate,
    TailReport,
};

use crate::curves::Polyline;
use crate::error::{Error, Result};
use crate::gmc::{measure_of, GmcSample};
use crate::grid::{CellMask, GridSpec, Point2};
use crate::raster::WindowWinding;
use crate::stats::NeumaierAcc;
use crate::winding::{boundary_mask, level_sets, WindingField};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// How winding numbers enter the integral.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AreaMode {
    Full,
    Cutoff(u32),
}

impl AreaMode {
    pub fn weight(self, w: i32) -> f64 {
        match self {
            AreaMode::Full => w as f64,
            AreaMode::Cutoff(k) => {
                let k = k.min(i32::MAX as u32) as i32;
                w.clamp(-k, k) as f64
            }
        }
    }
}

/// `Σ clamp(θ, -K, K) · mass` over cells off the boundary.
pub fn cutoff_integral(wf: &WindingField, gmc: &GmcSample, k: u32) -> Result<f64> {
    wf.grid.same_as(&gmc.grid)?;
    let mode = AreaMode::Cutoff(k);
    let mut acc = NeumaierAcc::default();
    for (c, &w) in wf.winding.iter().enumerate() {
        if w != 0 && !wf.boundary.get(c) {
            acc.add(mode.weight(w) * gmc.masses[c]);
        }
    }
    Ok(acc.value())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LevelSum {
    pub value: f64,
    /// `M(D_N) - M(D_-N)` for `N = 1..=K`.
    pub increments: Vec<f64>,
    /// `Σ_N M(D_N) + M(D_-N)`, the scale for rounding comparisons.
    pub abs_terms: f64,
}

/// `Σ_{N=1}^{K} M(D_N) - M(D_-N)`.
pub fn levelsum_partial(wf: &WindingField, gmc: &GmcSample, k: u32) -> Result<LevelSum> {
    wf.grid.same_as(&gmc.grid)?;
    if k == 0 {
        return Ok(LevelSum {
            value: 0.0,
            increments: Vec::new(),
            abs_terms: 0.0,
        });
    }
    let sets = level_sets(wf, k)?;
    let mut increments = Vec::with_capacity(k as usize);
    let mut abs = NeumaierAcc::default();
    for (pos, neg) in sets.positive.iter().zip(&sets.negative) {
        let (mp, mn) = (measure_of(gmc, pos)?, measure_of(gmc, neg)?);
        increments.push(mp - mn);
        abs.add(mp);
        abs.add(mn);
    }
    let mut value = NeumaierAcc::default();
    increments.iter().for_each(|&v| value.add(v));
    Ok(LevelSum {
        value: value.value(),
        increments,
        abs_terms: abs.value(),
    })
}

/// Smallest `K` from which `cutoff_integral` no longer changes.
pub fn stabilization_cutoff(wf: &WindingField) -> u32 {
    wf.winding
        .iter()
        .enumerate()
        .filter(|&(c, _)| !wf.boundary.get(c))
        .map(|(_, w)| w.unsigned_abs())
        .max()
        .unwrap_or(0)
}

/// Dyadic area process `A_{s,t}` for `s = i 2^-d <= t = j 2^-d`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AreaProcessSample {
    pub depth: u32,
    pub mode: AreaMode,
    /// Indexed by [`AreaProcessSample::pair_index`]; `NaN` beyond `max_span`.
    pub values: Vec<f64>,
    /// `ε_{s,t} M(T_{s,t})` for the triangle `Z_s, (Z_t^1, Z_s^2), Z_t`.
    pub corrections: Vec<f64>,
    /// Largest `j - i` computed.
    pub max_span: usize,
    pub path_id: u64,
    pub gmc_id: u64,
    /// Full mode: largest gap between Chen-assembled and directly computed values.
    pub validation_error: Option<f64>,
}

impl AreaProcessSample {
    pub fn steps(&self) -> usize {
        1 << self.depth
    }

    pub fn pair_index(i: usize, j: usize) -> usize {
        debug_assert!(i <= j);
        j * (j + 1) / 2 + i
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[Self::pair_index(i, j)]
    }

    pub fn correction(&self, i: usize, j: usize) -> f64 {
        self.corrections[Self::pair_index(i, j)]
    }

    /// `A_{s,t} + ε_{s,t} M(T_{s,t})`.
    pub fn corrected(&self, i: usize, j: usize) -> f64 {
        self.get(i, j) + self.correction(i, j)
    }

    /// `(i, j, A)` over computed pairs with `i < j`.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let n = self.steps();
        (0..n).flat_map(move |i| {
            (i + 1..=(i + self.max_span).min(n)).map(move |j| (i, j, self.get(i, j)))
        })
    }
}

#[derive(Debug, Clone)]
pub struct AreaOptions {
    /// Only pairs with `j - i <= max_span`; `None` for all pairs.
    pub max_span: Option<usize>,
    /// Number of assembled pairs re-checked directly in full mode.
    pub validate: usize,
    pub path_id: u64,
    pub gmc_id: u64,
}

impl Default for AreaOptions {
    fn default() -> Self {
        Self {
            max_span: None,
            validate: 8,
            path_id: 0,
            gmc_id: 0,
        }
    }
}

/// Fails unless the grid holds the path with at least one spare cell on every side.
pub fn check_window(path: &Polyline, grid: &GridSpec) -> Result<()> {
    let (x_lo, x_hi, y_lo, y_hi) = path.bbox();
    let h = grid.h;
    if x_lo < grid.x0 + h || y_lo < grid.y0 + h || x_hi > grid.x_max() - h || y_hi > grid.y_max() - h {
        return Err(Error::GridTooSmall);
    }
    Ok(())
}

pub(crate) fn closed_window(grid: &GridSpec, path: &Polyline) -> WindowWinding {
    let segs: Vec<(Point2, Point2)> = path.closure().segments().collect();
    WindowWinding::closed(grid, &segs)
}

pub(crate) fn polygon_window(grid: &GridSpec, pts: &[Point2]) -> WindowWinding {
    let segs: Vec<(Point2, Point2)> = (0..pts.len()).map(|k| (pts[k], pts[(k + 1) % pts.len()])).collect();
    WindowWinding::closed(grid, &segs)
}

/// Signed measure of the polygon: `ε M(P)` for a triangle.
pub(crate) fn polygon_mass(gmc: &GmcSample, pts: &[Point2]) -> f64 {
    polygon_window(&gmc.grid, pts).integrate(&gmc.grid, &gmc.masses)
}

fn dyadic_points(path: &Polyline, depth: u32) -> Result<(Vec<f64>, Vec<Point2>)> {
    if depth > 20 {
        return Err(Error::InvalidArgument(format!("depth {depth} is too large")));
    }
    if path.start_time() > 0.0 || path.end_time() < 1.0 {
        return Err(Error::InvalidArgument("path horizon must cover [0, 1]".into()));
    }
    let n = 1usize << depth;
    let times: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
    let points = times.iter().map(|&t| path.eval(t)).collect();
    Ok((times, points))
}

pub fn area_process(path: &Polyline, gmc: &GmcSample, depth: u32, mode: AreaMode) -> Result<AreaProcessSample> {
    area_process_with(path, gmc, depth, mode, &AreaOptions::default())
}

/// Centers on a curve count for neither side here: the raster rule is exact,
/// so no boundary band is removed and Chen's relation holds cell by cell.
pub fn area_process_with(
    path: &Polyline,
    gmc: &GmcSample,
    depth: u32,
    mode: AreaMode,
    opts: &AreaOptions,
) -> Result<AreaProcessSample> {
    check_window(path, &gmc.grid)?;
    let (times, z) = dyadic_points(path, depth)?;
    let n = 1usize << depth;
    let span = opts.max_span.unwrap_or(n).clamp(1, n);
    let grid = &gmc.grid;
    let direct = |i: usize, j: usize| -> Result<f64> {
        let piece = path.slice(times[i], times[j])?;
        Ok(closed_window(grid, &piece).integrate_with(grid, &gmc.masses, |w| mode.weight(w)))
    };
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..=(i + span).min(n)).map(move |j| (i, j)))
        .collect();
    let len = AreaProcessSample::pair_index(n, n) + 1;
    let mut values = vec![f64::NAN; len];
    let mut corrections = vec![f64::NAN; len];
    for i in 0..=n {
        values[AreaProcessSample::pair_index(i, i)] = 0.0;
        corrections[AreaProcessSample::pair_index(i, i)] = 0.0;
    }
    let corr: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| polygon_mass(gmc, &[z[i], Point2::new(z[j].x, z[i].y), z[j]]))
        .collect();
    for (&(i, j), c) in pairs.iter().zip(corr) {
        corrections[AreaProcessSample::pair_index(i, j)] = c;
    }
    let mut validation_error = None;
    match mode {
        AreaMode::Cutoff(_) => {
            let vals: Vec<f64> = pairs.par_iter().map(|&(i, j)| direct(i, j)).collect::<Result<_>>()?;
            for (&(i, j), v) in pairs.iter().zip(vals) {
                values[AreaProcessSample::pair_index(i, j)] = v;
            }
        }
        AreaMode::Full => {
            let adjacent: Vec<f64> = (0..n).into_par_iter().map(|i| direct(i, i + 1)).collect::<Result<_>>()?;
            let long: Vec<(usize, usize)> = pairs.iter().copied().filter(|&(i, j)| j - i >= 2).collect();
            let tri: Vec<f64> = long
                .par_iter()
                .map(|&(i, j)| polygon_mass(gmc, &[z[i], z[j - 1], z[j]]))
                .collect();
            for i in 0..n {
                values[AreaProcessSample::pair_index(i, i + 1)] = adjacent[i];
            }
            // `long` is ordered by `i`, then `j`, so `A_{i,j-1}` is always ready.
            for (&(i, j), t) in long.iter().zip(tri) {
                let prev = values[AreaProcessSample::pair_index(i, j - 1)];
                values[AreaProcessSample::pair_index(i, j)] = prev + adjacent[j - 1] + t;
            }
            if opts.validate > 0 && !long.is_empty() {
                let step = (long.len() / opts.validate).max(1);
                let picks: Vec<(usize, usize)> = long.iter().copied().step_by(step).take(opts.validate).collect();
                let errs: Vec<f64> = picks
                    .par_iter()
                    .map(|&(i, j)| Ok((direct(i, j)? - values[AreaProcessSample::pair_index(i, j)]).abs()))
                    .collect::<Result<_>>()?;
                validation_error = Some(errs.into_iter().fold(0.0, f64::max));
            }
        }
    }
    Ok(AreaProcessSample {
        depth,
        mode,
        values,
        corrections,
        max_span: span,
        path_id: opts.path_id,
        gmc_id: opts.gmc_id,
        validation_error,
    })
}

/// Winding block of the closed piece on a grid fitted to it. The cell side
/// is `1/cells` of the piece's mean thickness `2|area| / perimeter`, bounded
/// below so the block stays under about `2^22` cells.
pub(crate) fn adaptive_window(piece: &Polyline, cells: usize) -> Result<(GridSpec, WindowWinding)> {
    let (x_lo, x_hi, y_lo, y_hi) = piece.bbox();
    let (wx, wy) = (x_hi - x_lo, y_hi - y_lo);
    let long = wx.max(wy);
    if long == 0.0 {
        let grid = GridSpec::new(x_lo - 1.0, y_lo - 1.0, 1.0, 2, 2)?;
        return Ok((grid, WindowWinding::closed(&grid, &[])));
    }
    let closed = piece.closure();
    let thickness = 2.0 * closed.signed_area().abs() / closed.length();
    let h = (thickness / cells.max(1) as f64)
        .max(long / 65536.0)
        .max((wx * wy / 4_194_304.0).sqrt());
    let grid = GridSpec::covering(x_lo - 2.0 * h, y_lo - 2.0 * h, x_hi + 2.0 * h, y_hi + 2.0 * h, h)?;
    let win = closed_window(&grid, piece);
    Ok((grid, win))
}

/// Lebesgue area process with every pair computed directly on its own fitted grid.
pub fn area_process_adaptive(path: &Polyline, depth: u32, max_span: usize, cells: usize) -> Result<AreaProcessSample> {
    let (times, z) = dyadic_points(path, depth)?;
    let n = 1usize << depth;
    let span = max_span.clamp(1, n);
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..=(i + span).min(n)).map(move |j| (i, j)))
        .collect();
    let computed: Vec<(f64, f64)> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let (grid, win) = adaptive_window(&path.slice(times[i], times[j])?, cells)?;
            let area = grid.h * grid.h * win.values.iter().map(|&w| w as f64).sum::<f64>();
            let corner = Point2::new(z[j].x, z[i].y);
            let corr = 0.5 * (corner - z[i]).cross(z[j] - z[i]);
            Ok((area, corr))
        })
        .collect::<Result<_>>()?;
    let len = AreaProcessSample::pair_index(n, n) + 1;
    let mut values = vec![f64::NAN; len];
    let mut corrections = vec![f64::NAN; len];
    for i in 0..=n {
        values[AreaProcessSample::pair_index(i, i)] = 0.0;
        corrections[AreaProcessSample::pair_index(i, i)] = 0.0;
    }
    for (&(i, j), (a, c)) in pairs.iter().zip(computed) {
        values[AreaProcessSample::pair_index(i, j)] = a;
        corrections[AreaProcessSample::pair_index(i, j)] = c;
    }
    Ok(AreaProcessSample {
        depth,
        mode: AreaMode::Full,
        values,
        corrections,
        max_span: span,
        path_id: 0,
        gmc_id: 0,
        validation_error: None,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChenDefectReport {
    pub triples: usize,
    /// Largest defect with all four terms recomputed on a common set of cells.
    pub max_defect: f64,
    /// Largest defect of the stored values against unmasked triangle masses.
    pub stored_max_defect: f64,
    pub worst_triple: (usize, usize, usize),
    pub total_mass: f64,
}

/// Chen defects over every dyadic triple `s < u < t` within the sample's span.
/// Cells within `h/2` of any of the three chord-closed pieces or of the
/// triangle edges are dropped from all four terms.
pub fn chen_defect(aps: &AreaProcessSample, gmc: &GmcSample, path: &Polyline) -> Result<ChenDefectReport> {
    let (times, z) = dyadic_points(path, aps.depth)?;
    let grid = &gmc.grid;
    let tau = 0.5 * grid.h;
    let n = aps.steps();
    let span = aps.max_span;
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..=(i + span).min(n)).map(move |j| (i, j)))
        .collect();
    let pieces: Vec<(WindowWinding, CellMask)> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let closed = path.slice(times[i], times[j])?.closure();
            let segs: Vec<(Point2, Point2)> = closed.segments().collect();
            Ok((WindowWinding::closed(grid, &segs), boundary_mask(grid, segs.iter().copied(), tau)))
        })
        .collect::<Result<_>>()?;
    let lookup = |i: usize, j: usize| -> usize { pairs.binary_search(&(i, j)).expect("pair within span") };
    let triples: Vec<(usize, usize, usize)> = (0..n)
        .flat_map(|i| {
            (i + 2..=(i + span).min(n)).flat_map(move |j| (i + 1..j).map(move |u| (i, u, j)))
        })
        .collect();
    let mode = aps.mode;
    let results: Vec<(f64, f64)> = triples
        .par_iter()
        .map(|&(i, u, j)| {
            let pts = [z[i], z[u], z[j]];
            let tri = polygon_window(grid, &pts);
            let edges = [(pts[0], pts[1]), (pts[1], pts[2]), (pts[2], pts[0])];
            let tri_mask = boundary_mask(grid, edges, tau);
            let (st, su, ut) = (&pieces[lookup(i, j)], &pieces[lookup(i, u)], &pieces[lookup(u, j)]);
            let blocks = [&st.0, &su.0, &ut.0, &tri];
            let i_lo = blocks.iter().map(|b| b.i0).min().unwrap_or(0);
            let j_lo = blocks.iter().map(|b| b.j0).min().unwrap_or(0);
            let i_hi = blocks.iter().map(|b| b.i0 + b.ni).max().unwrap_or(0);
            let j_hi = blocks.iter().map(|b| b.j0 + b.nj).max().unwrap_or(0);
            let mut acc = [NeumaierAcc::default(); 4];
            for jj in j_lo..j_hi {
                for ii in i_lo..i_hi {
                    let c = grid.index(ii, jj);
                    if st.1.get(c) || su.1.get(c) || ut.1.get(c) || tri_mask.get(c) {
                        continue;
                    }
                    let m = gmc.masses[c];
                    acc[0].add(mode.weight(st.0.at(ii, jj)) * m);
                    acc[1].add(mode.weight(su.0.at(ii, jj)) * m);
                    acc[2].add(mode.weight(ut.0.at(ii, jj)) * m);
                    acc[3].add(tri.at(ii, jj) as f64 * m);
                }
            }
            let recomputed = (acc[0].value() - acc[1].value() - acc[2].value() - acc[3].value()).abs();
            let t_mass = tri.integrate(grid, &gmc.masses);
            let stored = (aps.get(i, j) - aps.get(i, u) - aps.get(u, j) - t_mass).abs();
            (recomputed, stored)
        })
        .collect();
    let mut report = ChenDefectReport {
        triples: triples.len(),
        max_defect: 0.0,
        stored_max_defect: 0.0,
        worst_triple: (0, 0, 0),
        total_mass: gmc.total_mass(),
    };
    for (&t, &(rec, stored)) in triples.iter().zip(&results) {
        if rec > report.max_defect {
            report.max_defect = rec;
            report.worst_triple = t;
        }
        report.stored_max_defect = report.stored_max_defect.max(stored);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curves::{circle_chain, sample_brownian};
    use crate::field::{CovarianceKernel, FieldSampler, SamplingMethod};
    use crate::gmc::gmc_from_field;
    use crate::winding::{winding_field, winding_field_with_tolerance};
    use std::f64::consts::PI;

    fn circle(r: f64, n: usize, ccw: bool) -> Polyline {
        let pts = (0..n)
            .map(|k| {
                let a = 2.0 * PI * k as f64 / n as f64;
                let a = if ccw { a } else { -a };
                Point2::new(r * a.cos(), r * a.sin())
            })
            .collect();
        Polyline::from_points(pts, true).unwrap()
    }

    fn brownian_gmc(seed: u64, gamma: f64) -> (Polyline, GmcSample) {
        let path = sample_brownian(1 << 10, seed).unwrap();
        let (x_lo, x_hi, y_lo, y_hi) = path.bbox();
        let grid = GridSpec::covering(x_lo - 0.05, y_lo - 0.05, x_hi + 0.05, y_hi + 0.05, 1.0 / 64.0).unwrap();
        let sampler = FieldSampler::new(&CovarianceKernel::pure_log(), &grid, SamplingMethod::Circulant).unwrap();
        let gmc = gmc_from_field(&sampler.sample(seed, 0), gamma).unwrap();
        (path, gmc)
    }

    #[test]
    fn cutoff_basics() {
        let grid = GridSpec::new(-1.5, -1.5, 1.0 / 256.0, 768, 768).unwrap();
        let leb = GmcSample::lebesgue(grid);
        let wf = winding_field(&circle(1.0, 2048, true), &grid).unwrap();
        assert_eq!(cutoff_integral(&wf, &leb, 0).unwrap(), 0.0);
        let area = cutoff_integral(&wf, &leb, 1).unwrap();
        assert!((area - PI).abs() < 2.0 * PI * grid.h, "{area}");
        let cw = winding_field(&circle(1.0, 2048, false), &grid).unwrap();
        let ls = levelsum_partial(&cw, &leb, 3).unwrap();
        assert!((ls.value + area).abs() < 1e-12, "{}", ls.value);
        assert_eq!(ls.increments.len(), 3);
    }

    #[test]
    fn summation_by_parts_on_brownian() {
        for seed in 0..3 {
            let (path, gmc) = brownian_gmc(seed, 1.0);
            let wf = winding_field(&path.closure(), &gmc.grid).unwrap();
            let kmax = stabilization_cutoff(&wf);
            for k in [1, 2, kmax, kmax + 3] {
                let a = cutoff_integral(&wf, &gmc, k).unwrap();
                let b = levelsum_partial(&wf, &gmc, k).unwrap();
                assert!((a - b.value).abs() <= 2f64.powi(-40) * b.abs_terms.max(f64::MIN_POSITIVE));
            }
            let full: f64 = wf
                .winding
                .iter()
                .enumerate()
                .filter(|&(c, _)| !wf.boundary.get(c))
                .map(|(c, &w)| w as f64 * gmc.masses[c])
                .sum();
            let top = levelsum_partial(&wf, &gmc, kmax + 1).unwrap().value;
            assert!((top - full).abs() < 1e-10 * gmc.total_mass());
        }
    }

    #[test]
    fn constant_path_has_zero_area() {
        let path = Polyline::new(vec![0.0, 1.0], vec![Point2::new(0.1, 0.2); 2], false).unwrap();
        let grid = GridSpec::square(32, 1.0).unwrap();
        let grid = GridSpec::new(-0.5, -0.5, grid.h, 32, 32).unwrap();
        let aps = area_process(&path, &GmcSample::lebesgue(grid), 3, AreaMode::Full).unwrap();
        assert!(aps.pairs().all(|(_, _, a)| a == 0.0));
    }

    #[test]
    fn window_too_small() {
        let path = sample_brownian(64, 1).unwrap();
        let grid = GridSpec::new(-0.1, -0.1, 0.01, 20, 20).unwrap();
        let err = area_process(&path, &GmcSample::lebesgue(grid), 2, AreaMode::Full).unwrap_err();
        assert!(matches!(err, Error::GridTooSmall));
    }

    #[test]
    fn circle_chain_total_area() {
        let (alpha, m) = (0.8, 6);
        let h = 1.0 / 512.0;
        let path = circle_chain(alpha, m, crate::curves::circle_vertices_for(h)).unwrap();
        let grid = GridSpec::new(-1.1, -0.1, h, 1127, 1127).unwrap();
        let aps = area_process(&path, &GmcSample::lebesgue(grid), 1, AreaMode::Full).unwrap();
        let exact: f64 = (1..=m).map(|k| PI * (k as f64).powf(-2.0 * alpha)).sum();
        let perimeter: f64 = (1..=m).map(|k| 2.0 * PI * (k as f64).powf(-alpha)).sum();
        assert!((aps.get(0, 2) - exact).abs() < perimeter * h, "{} vs {exact}", aps.get(0, 2));
    }

    #[test]
    fn chen_full_mode_is_exact() {
        for seed in 0..2 {
            let (path, gmc) = brownian_gmc(seed + 10, 1.0);
            let aps = area_process(&path, &gmc, 3, AreaMode::Full).unwrap();
            assert!(aps.validation_error.unwrap() <= 1e-12 * gmc.total_mass());
            let rep = chen_defect(&aps, &gmc, &path).unwrap();
            assert_eq!(rep.triples, 84);
            assert!(rep.max_defect <= 2f64.powi(-38) * rep.total_mass, "{rep:?}");
            assert!(rep.stored_max_defect <= 2f64.powi(-38) * rep.total_mass, "{rep:?}");
        }
    }

    #[test]
    fn triangle_path_area_is_the_triangle() {
        let pts = vec![Point2::new(0.0, 0.0), Point2::new(0.6, 0.1), Point2::new(0.2, 0.7)];
        let path = Polyline::new(vec![0.0, 0.5, 1.0], pts.clone(), false).unwrap();
        let grid = GridSpec::new(-0.25, -0.25, 1.0 / 512.0, 600, 600).unwrap();
        let leb = GmcSample::lebesgue(grid);
        let aps = area_process(&path, &leb, 1, AreaMode::Full).unwrap();
        assert_eq!(aps.get(0, 1), 0.0);
        assert_eq!(aps.get(1, 2), 0.0);
        let tri = polygon_mass(&leb, &pts);
        assert_eq!(aps.get(0, 2), tri);
        let exact = 0.5 * ((pts[1] - pts[0]).cross(pts[2] - pts[0]));
        assert!((tri - exact).abs() < 3.0 * grid.h);
    }

    #[test]
    fn reversal_negates_areas() {
        let (path, gmc) = brownian_gmc(5, 0.5);
        let rev = Polyline::new(
            path.times.iter().rev().map(|t| 1.0 - t).collect(),
            path.points.iter().rev().copied().collect(),
            false,
        )
        .unwrap();
        let a = area_process(&path, &gmc, 2, AreaMode::Cutoff(u32::MAX)).unwrap();
        let b = area_process(&rev, &gmc, 2, AreaMode::Cutoff(u32::MAX)).unwrap();
        let n = a.steps();
        for (i, j, v) in a.pairs() {
            let w = b.get(n - j, n - i);
            assert!((v + w).abs() <= 1e-12 * gmc.total_mass(), "{v} {w}");
        }
    }

    #[test]
    fn cutoff_mode_stabilizes() {
        let (path, gmc) = brownian_gmc(3, 0.5);
        let wf = winding_field_with_tolerance(&path.closure(), &gmc.grid, 0.0).unwrap();
        let kmax = stabilization_cutoff(&wf);
        let full = area_process(&path, &gmc, 0, AreaMode::Full).unwrap();
        let cut = area_process(&path, &gmc, 0, AreaMode::Cutoff(kmax)).unwrap();
        assert!((full.get(0, 1) - cut.get(0, 1)).abs() <= 1e-12 * gmc.total_mass());
    }
}
