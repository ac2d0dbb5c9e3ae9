//! Integer winding-number fields of closed polylines on grids.

use crate::curves::{subdivide, Polyline};
use crate::error::{Error, Result};
use crate::grid::{on_segment, CellMask, GridSpec, Point2, Triangle};
use crate::raster::RowEvents;
use crate::stats::MeanEstimate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::Write;

/// Winding numbers at cell centers plus the cells too close to the curve to count.
#[derive(Debug, Clone)]
pub struct WindingField {
    pub grid: GridSpec,
    pub winding: Vec<i32>,
    /// Cells whose center is within `tau` of the curve.
    pub boundary: CellMask,
    pub tau: f64,
}

/// Raw crossing-rule winding numbers of the closed chain `segments`, with no masking.
pub fn winding_numbers<I>(grid: &GridSpec, segments: I) -> Vec<i32>
where
    I: IntoIterator<Item = (Point2, Point2)>,
{
    let mut ev = RowEvents::new(grid);
    for (a, b) in segments {
        ev.add_segment(grid, a, b);
    }
    let mut out = vec![0i32; grid.cells()];
    out.par_chunks_mut(grid.nx).enumerate().for_each(|(j, row)| ev.fill_row(j, row));
    out
}

/// Cells whose center lies within `tau` of one of the segments (on it when `tau == 0`).
pub fn boundary_mask<I>(grid: &GridSpec, segments: I, tau: f64) -> CellMask
where
    I: IntoIterator<Item = (Point2, Point2)>,
{
    let mut mask = CellMask::empty(*grid);
    let t2 = tau * tau;
    for (a, b) in segments {
        let (y_lo, y_hi) = (a.y.min(b.y) - tau, a.y.max(b.y) + tau);
        let j0 = grid.first_row_at_or_after(y_lo);
        let mut j = j0;
        while j < grid.ny && grid.center_y(j) <= y_hi {
            let yc = grid.center_y(j);
            // x-extent of the segment within the band |y - yc| <= tau.
            let (x_lo, x_hi) = if a.y == b.y {
                (a.x.min(b.x), a.x.max(b.x))
            } else {
                let s0 = ((yc - tau - a.y) / (b.y - a.y)).clamp(0.0, 1.0);
                let s1 = ((yc + tau - a.y) / (b.y - a.y)).clamp(0.0, 1.0);
                let (x0, x1) = (a.x + s0 * (b.x - a.x), a.x + s1 * (b.x - a.x));
                (x0.min(x1), x0.max(x1))
            };
            let i0 = grid.first_col_at_or_after(x_lo - tau);
            let mut i = i0;
            while i < grid.nx && grid.center_x(i) <= x_hi + tau {
                let c = grid.center(i, j);
                let hit = if tau == 0.0 {
                    on_segment(c, a, b)
                } else {
                    dist2_to_segment(c, a, b) <= t2
                };
                if hit {
                    mask.set(grid.index(i, j), true);
                }
                i += 1;
            }
            j += 1;
        }
    }
    mask
}

fn dist2_to_segment(p: Point2, a: Point2, b: Point2) -> f64 {
    let d = b - a;
    let l2 = d.dot(d);
    let s = if l2 == 0.0 { 0.0 } else { ((p - a).dot(d) / l2).clamp(0.0, 1.0) };
    let q = a + s * d;
    let e = p - q;
    e.dot(e)
}

/// Winding field with the default boundary tolerance `h / 2`.
pub fn winding_field(path: &Polyline, grid: &GridSpec) -> Result<WindingField> {
    winding_field_with_tolerance(path, grid, 0.5 * grid.h)
}

pub fn winding_field_with_tolerance(path: &Polyline, grid: &GridSpec, tau: f64) -> Result<WindingField> {
    if !path.closed {
        return Err(Error::OpenPath);
    }
    if !(tau >= 0.0) {
        return Err(Error::InvalidArgument("tolerance must be nonnegative".into()));
    }
    Ok(WindingField {
        grid: *grid,
        winding: winding_numbers(grid, path.segments()),
        boundary: boundary_mask(grid, path.segments(), tau),
        tau,
    })
}

impl WindingField {
    /// Winding at cell `k`, or `None` on the boundary mask.
    pub fn value(&self, k: usize) -> Option<i32> {
        (!self.boundary.get(k)).then(|| self.winding[k])
    }

    pub fn max_abs(&self) -> i32 {
        self.winding.iter().map(|w| w.abs()).max().unwrap_or(0)
    }

    /// Cells per winding value, boundary excluded.
    pub fn histogram(&self) -> WindingHistogram {
        let mut counts = BTreeMap::new();
        for (k, &w) in self.winding.iter().enumerate() {
            if !self.boundary.get(k) {
                *counts.entry(w).or_insert(0u64) += 1;
            }
        }
        WindingHistogram {
            cell_area: self.grid.cell_area(),
            counts,
        }
    }

    /// `{theta >= n}` for `n > 0`, `{theta <= n}` for `n < 0`, boundary excluded.
    pub fn level_set(&self, n: i32) -> CellMask {
        let mut m = CellMask::empty(self.grid);
        for (k, &w) in self.winding.iter().enumerate() {
            let hit = if n > 0 { w >= n } else if n < 0 { w <= n } else { w == 0 };
            if hit && !self.boundary.get(k) {
                m.set(k, true);
            }
        }
        m
    }

    /// `h^2 * sum of windings`, boundary included; compare to the shoelace area.
    pub fn integral(&self) -> f64 {
        self.winding.iter().map(|&w| w as i64).sum::<i64>() as f64 * self.grid.cell_area()
    }

    /// Binary dump: `b"WND1"`, nx and ny (u32), x0, y0, h (f64), then
    /// row-major i32 windings, all little endian.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        let g = self.grid;
        w.write_all(b"WND1")?;
        w.write_all(&(g.nx as u32).to_le_bytes())?;
        w.write_all(&(g.ny as u32).to_le_bytes())?;
        for v in [g.x0, g.y0, g.h] {
            w.write_all(&v.to_le_bytes())?;
        }
        for v in &self.winding {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }
}

/// Area of each winding value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindingHistogram {
    pub cell_area: f64,
    pub counts: BTreeMap<i32, u64>,
}

impl WindingHistogram {
    /// `|{theta = n}|`.
    pub fn area_eq(&self, n: i32) -> f64 {
        self.counts.get(&n).copied().unwrap_or(0) as f64 * self.cell_area
    }

    /// `|D_n|`: `{theta >= n}` for `n > 0`, `{theta <= n}` for `n < 0`.
    pub fn level_area(&self, n: i32) -> f64 {
        let c: u64 = if n > 0 {
            self.counts.range(n..).map(|(_, c)| c).sum()
        } else {
            self.counts.range(..=n).map(|(_, c)| c).sum()
        };
        c as f64 * self.cell_area
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "winding,cells")?;
        for (k, c) in &self.counts {
            writeln!(w, "{k},{c}")?;
        }
        Ok(())
    }
}

/// Histogram of windings without materializing the field. Rows are
/// processed in parallel and counts merged in row order. With `tau > 0`
/// centers within `tau` of the curve are skipped.
pub fn winding_histogram(path: &Polyline, grid: &GridSpec, tau: f64) -> Result<WindingHistogram> {
    if !path.closed {
        return Err(Error::OpenPath);
    }
    let mut ev = RowEvents::new(grid);
    for (a, b) in path.segments() {
        ev.add_segment(grid, a, b);
    }
    let boundary = (tau > 0.0).then(|| boundary_mask(grid, path.segments(), tau));
    let nx = grid.nx;
    let per_row: Vec<BTreeMap<i32, u64>> = (0..grid.ny)
        .into_par_iter()
        .map_init(
            || vec![0i32; nx],
            |row, j| {
                let mut counts = BTreeMap::new();
                if ev.row_is_empty(j) {
                    let skipped = boundary
                        .as_ref()
                        .map_or(0, |b| (0..nx).filter(|&i| b.get(grid.index(i, j))).count());
                    counts.insert(0, (nx - skipped) as u64);
                    return counts;
                }
                ev.fill_row(j, row);
                for (i, &w) in row.iter().enumerate() {
                    if boundary.as_ref().is_some_and(|b| b.get(grid.index(i, j))) {
                        continue;
                    }
                    *counts.entry(w).or_insert(0u64) += 1;
                }
                counts
            },
        )
        .collect();
    let mut counts = BTreeMap::new();
    for r in per_row {
        for (k, c) in r {
            *counts.entry(k).or_insert(0) += c;
        }
    }
    Ok(WindingHistogram {
        cell_area: grid.cell_area(),
        counts,
    })
}

/// Level sets `D_1..D_n_max` and `D_-1..D_-n_max`.
#[derive(Debug, Clone)]
pub struct LevelSets {
    pub positive: Vec<CellMask>,
    pub negative: Vec<CellMask>,
}

impl LevelSets {
    pub fn area(&self, n: i32) -> f64 {
        match n {
            n if n > 0 => self.positive.get(n as usize - 1).map_or(0.0, CellMask::area),
            n if n < 0 => self.negative.get((-n) as usize - 1).map_or(0.0, CellMask::area),
            _ => f64::NAN,
        }
    }
}

pub fn level_sets(wf: &WindingField, n_max: u32) -> Result<LevelSets> {
    if n_max == 0 {
        return Err(Error::InvalidArgument("n_max must be at least 1".into()));
    }
    let n = n_max as i32;
    Ok(LevelSets {
        positive: (1..=n).map(|k| wf.level_set(k)).collect(),
        negative: (1..=n).map(|k| wf.level_set(-k)).collect(),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WernerReport {
    pub n: i32,
    /// `n^2 |{theta = n}|`.
    pub level: MeanEstimate,
    /// `n |D_n|`.
    pub tail: MeanEstimate,
    pub target: f64,
    pub level_rel_error: f64,
    pub tail_rel_error: f64,
    pub warnings: Vec<String>,
}

/// Werner-type statistics over an ensemble of winding histograms.
pub fn werner_statistic(hists: &[WindingHistogram], n: i32, brownian: bool) -> Result<WernerReport> {
    if n <= 0 {
        return Err(Error::InvalidArgument("n must be positive".into()));
    }
    let nf = n as f64;
    let level: Vec<f64> = hists.iter().map(|h| nf * nf * h.area_eq(n)).collect();
    let tail: Vec<f64> = hists.iter().map(|h| nf * h.level_area(n)).collect();
    let level = MeanEstimate::from_samples(&level)?;
    let tail = MeanEstimate::from_samples(&tail)?;
    let target = 1.0 / (2.0 * std::f64::consts::PI);
    let mut warnings = Vec::new();
    if !brownian {
        warnings.push("NotBrownianWarning: the area law only applies to Brownian paths".into());
    }
    Ok(WernerReport {
        n,
        level,
        tail,
        target,
        level_rel_error: (level.mean - target).abs() / target,
        tail_rel_error: (tail.mean - target).abs() / target,
        warnings,
    })
}

/// Selector for the joint level sets of subdivided paths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum JointSpec {
    /// `{|theta^i| >= n, |theta^j| >= m1}`.
    Pair { i: usize, j: usize, n: i64, m1: i64 },
    /// `{|theta^i| >= m2 for every i in indices}`.
    Multi { indices: Vec<usize>, m2: i64 },
}

/// Union of the boundary masks of `fields`.
pub fn union_boundary(fields: &[WindingField]) -> Result<CellMask> {
    let mut acc = CellMask::empty(fields.first().ok_or(Error::EmptySamples)?.grid);
    for f in fields {
        acc = acc.union(&f.boundary)?;
    }
    Ok(acc)
}

pub fn joint_level_sets(pieces: &[WindingField], spec: &JointSpec) -> Result<CellMask> {
    let grid = pieces.first().ok_or(Error::EmptySamples)?.grid;
    for p in pieces {
        grid.same_as(&p.grid)?;
    }
    let excluded = union_boundary(pieces)?;
    let check = |i: usize| {
        pieces
            .get(i)
            .ok_or_else(|| Error::InvalidArgument(format!("piece {i} out of range")))
    };
    let mut m = CellMask::empty(grid);
    match spec {
        JointSpec::Pair { i, j, n, m1 } => {
            let (a, b) = (check(*i)?, check(*j)?);
            for k in 0..grid.cells() {
                if (a.winding[k].abs() as i64) >= *n && (b.winding[k].abs() as i64) >= *m1 && !excluded.get(k) {
                    m.set(k, true);
                }
            }
        }
        JointSpec::Multi { indices, m2 } => {
            let fs: Vec<&WindingField> = indices.iter().map(|&i| check(i)).collect::<Result<_>>()?;
            for k in 0..grid.cells() {
                if fs.iter().all(|f| (f.winding[k].abs() as i64) >= *m2) && !excluded.get(k) {
                    m.set(k, true);
                }
            }
        }
    }
    Ok(m)
}

/// Parameters of the deterministic inclusions between `D_N` and the piecewise sets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InclusionParams {
    pub t_pieces: usize,
    pub n: i64,
    pub m1: i64,
    pub m2: i64,
    pub k: i64,
}

impl InclusionParams {
    pub fn validate(&self) -> Result<()> {
        let t = self.t_pieces as i64;
        if self.k < 1 || t < 1 {
            return Err(Error::HypothesisViolated("k and T must be positive".into()));
        }
        // T M2 <= N / k - T, multiplied through by k.
        if self.k * (t * self.m2 + t) > self.n {
            return Err(Error::HypothesisViolated("T M2 <= N/k - T fails".into()));
        }
        if self.k * self.m1 + (self.m2 + 1) * t >= self.n {
            return Err(Error::HypothesisViolated("k M1 + (M2 + 1) T < N fails".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct InclusionReport {
    pub first_violations: usize,
    pub second_violations: usize,
    /// Cells of `D_N` off the excluded set (non-vacuity diagnostic).
    pub d_n_cells: usize,
    /// Cells of the left-hand union of the first inclusion.
    pub lower_cells: usize,
    pub excluded_cells: usize,
}

impl InclusionReport {
    pub fn violations(&self) -> usize {
        self.first_violations + self.second_violations
    }
}

/// Counts cells violating either inclusion, off the curve, the chords and
/// all piece boundaries.
pub fn inclusion_check(path: &Polyline, params: InclusionParams, grid: &GridSpec) -> Result<InclusionReport> {
    params.validate()?;
    let sd = subdivide(path, params.t_pieces, true)?;
    let tau = 0.5 * grid.h;
    let full = path.closure();
    let theta = winding_numbers(grid, full.segments());
    let pieces: Vec<Vec<i32>> = sd
        .closed_pieces()
        .iter()
        .map(|p| winding_numbers(grid, p.segments()))
        .collect();
    let mut excluded = boundary_mask(grid, full.segments(), tau);
    for p in sd.closed_pieces() {
        excluded = excluded.union(&boundary_mask(grid, p.segments(), tau))?;
    }
    let InclusionParams { n, m1, m2, k, t_pieces } = params;
    let t = t_pieces as i64;
    let mut report = InclusionReport {
        first_violations: 0,
        second_violations: 0,
        d_n_cells: 0,
        lower_cells: 0,
        excluded_cells: excluded.count(),
    };
    let mut abs = vec![0i64; pieces.len()];
    for c in 0..grid.cells() {
        if excluded.get(c) {
            continue;
        }
        for (a, p) in abs.iter_mut().zip(&pieces) {
            *a = p[c].abs() as i64;
        }
        let signed = |i: usize| pieces[i][c] as i64;
        let in_dn = theta[c] as i64 >= n;
        // Union over i != j of {|theta^i| >= N/k, |theta^j| >= M1}.
        let big: Vec<usize> = (0..abs.len()).filter(|&i| k * abs[i] >= n).collect();
        let mid: Vec<usize> = (0..abs.len()).filter(|&j| abs[j] >= m1).collect();
        let in_pair = !big.is_empty() && (mid.len() >= 2 || (mid.len() == 1 && big.iter().any(|&i| i != mid[0])));
        let in_upper_single = (0..abs.len()).any(|i| signed(i) >= n + t * m1);
        let in_lower_single = (0..abs.len()).any(|i| signed(i) >= n - k * m1 - (m2 + 1) * t);
        let in_multi = abs.iter().filter(|&&a| a >= m2).count() as i64 >= k;
        if in_dn {
            report.d_n_cells += 1;
        }
        let lhs = in_upper_single && !in_pair;
        if lhs {
            report.lower_cells += 1;
            if !in_dn {
                report.first_violations += 1;
            }
        }
        if in_dn && !(in_lower_single || in_pair || in_multi) {
            report.second_violations += 1;
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ChenPointwiseReport {
    pub max_defect: i64,
    pub checked_cells: usize,
    pub masked_cells: usize,
    pub orientation: i32,
}

/// Checks `theta_{s,t} = theta_{s,u} + theta_{u,t} + eps 1_T` at every cell
/// off the curve pieces and the triangle edges.
pub fn pointwise_chen_check(path: &Polyline, s: f64, u: f64, t: f64, grid: &GridSpec) -> Result<ChenPointwiseReport> {
    if !(s <= u && u <= t) {
        return Err(Error::InvalidArgument("need s <= u <= t".into()));
    }
    let tau = 0.5 * grid.h;
    let yst = path.slice(s, t)?.closure();
    let ysu = path.slice(s, u)?.closure();
    let yut = path.slice(u, t)?.closure();
    let tri = Triangle::new(path.eval(s), path.eval(u), path.eval(t));
    let eps = tri.orientation();
    let tri_edges = [(tri.z[0], tri.z[1]), (tri.z[1], tri.z[2]), (tri.z[2], tri.z[0])];
    let w_st = winding_numbers(grid, yst.segments());
    let w_su = winding_numbers(grid, ysu.segments());
    let w_ut = winding_numbers(grid, yut.segments());
    let w_tri = winding_numbers(grid, tri_edges);
    let mut masked = boundary_mask(grid, yst.segments(), tau);
    masked = masked.union(&boundary_mask(grid, ysu.segments(), tau))?;
    masked = masked.union(&boundary_mask(grid, yut.segments(), tau))?;
    masked = masked.union(&boundary_mask(grid, tri_edges, tau))?;
    let mut max_defect = 0i64;
    let mut checked = 0;
    for c in 0..grid.cells() {
        if masked.get(c) {
            continue;
        }
        checked += 1;
        let d = w_st[c] as i64 - w_su[c] as i64 - w_ut[c] as i64 - w_tri[c] as i64;
        max_defect = max_defect.max(d.abs());
    }
    Ok(ChenPointwiseReport {
        max_defect,
        checked_cells: checked,
        masked_cells: masked.count(),
        orientation: eps,
    })
}

/// Winding number of the closed polyline around `z` by summing turning angles.
pub fn winding_by_angles(path: &Polyline, z: Point2) -> i64 {
    let total: f64 = path
        .segments()
        .map(|(a, b)| {
            let (u, v) = (a - z, b - z);
            u.cross(v).atan2(u.dot(v))
        })
        .sum();
    (total / (2.0 * std::f64::consts::PI)).round() as i64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curves::{circle_chain, sample_brownian};
    use crate::rng::stream;
    use proptest::prelude::*;
    use rand::Rng;
    use std::f64::consts::PI;

    fn ngon(n: usize, r: f64, turns: usize) -> Polyline {
        let pts = (0..n * turns)
            .map(|k| {
                let a = 2.0 * PI * k as f64 / n as f64;
                Point2::new(r * a.cos(), r * a.sin())
            })
            .collect();
        Polyline::from_points(pts, true).unwrap()
    }

    fn window() -> GridSpec {
        GridSpec::new(-2.0, -2.0, 1.0 / 64.0, 256, 256).unwrap()
    }

    #[test]
    fn circle_windings() {
        let g = window();
        let wf = winding_field(&ngon(64, 1.0, 1), &g).unwrap();
        let center = g.index(128, 128);
        assert_eq!(wf.value(center), Some(1));
        let far = g.index(((1.5 + 2.0) * 64.0) as usize, ((1.5 + 2.0) * 64.0) as usize);
        assert_eq!(wf.value(far), Some(0));
        let twice = winding_field(&ngon(64, 1.0, 2), &g).unwrap();
        assert_eq!(twice.value(center), Some(2));
        let ls = level_sets(&wf, 2).unwrap();
        assert!(ls.positive[1].is_empty() && ls.negative[0].is_empty());
        assert!(matches!(
            winding_field(&Polyline { closed: false, ..ngon(8, 1.0, 1) }, &g),
            Err(Error::OpenPath)
        ));
    }

    #[test]
    fn brownian_matches_angle_oracle() {
        let p = sample_brownian(4096, 17).unwrap().closure();
        let (x0, x1, y0, y1) = p.bbox();
        let g = GridSpec::covering(x0 - 0.1, y0 - 0.1, x1 + 0.1, y1 + 0.1, 1.0 / 256.0).unwrap();
        let wf = winding_field(&p, &g).unwrap();
        let mut rng = stream(5, 0);
        let mut checked = 0;
        while checked < 200 {
            let k = rng.random_range(0..g.cells());
            if let Some(w) = wf.value(k) {
                assert_eq!(w as i64, winding_by_angles(&p, g.center_of_index(k)));
                checked += 1;
            }
        }
    }

    #[test]
    fn circle_chain_levels() {
        let h = 1.0 / 512.0;
        let g = GridSpec::new(-1.0, -0.01, h, 1024, 1040).unwrap();
        let c = circle_chain(1.0, 6, 400).unwrap();
        let wf = winding_field(&c, &g).unwrap();
        for n in 1..5usize {
            let exact = crate::curves::circle_chain_level_area(1.0, n);
            let got = wf.histogram().area_eq(n as i32);
            let perim = 2.0 * PI * ((n as f64).recip() + (n as f64 + 1.0).recip());
            assert!((got - exact).abs() < 2.0 * h * perim, "n={n} {got} {exact}");
        }
        let single = winding_field(&circle_chain(1.0, 1, 64).unwrap(), &g).unwrap();
        assert_eq!(single.max_abs(), 1);
    }

    #[test]
    fn lens_area() {
        let g = window();
        let a = winding_field(&ngon(512, 1.0, 1), &g).unwrap();
        let b = winding_field(&ngon(512, 1.0, 1).translated(Point2::new(1.0, 0.0)), &g).unwrap();
        let m = joint_level_sets(&[a, b], &JointSpec::Pair { i: 0, j: 1, n: 1, m1: 1 }).unwrap();
        let exact = 2.0 * PI / 3.0 - 3f64.sqrt() / 2.0;
        assert!((m.area() - exact).abs() < 2.0 * g.h * 4.0 * PI / 3.0 * 2.0, "{}", m.area());
    }

    #[test]
    fn chen_on_brownian_and_degenerate_cases() {
        let p = sample_brownian(2048, 3).unwrap();
        let (x0, x1, y0, y1) = p.bbox();
        let g = GridSpec::covering(x0 - 0.05, y0 - 0.05, x1 + 0.05, y1 + 0.05, 1.0 / 200.0).unwrap();
        assert_eq!(pointwise_chen_check(&p, 0.0, 0.5, 1.0, &g).unwrap().max_defect, 0);
        assert_eq!(pointwise_chen_check(&p, 0.25, 0.25, 0.8, &g).unwrap().max_defect, 0);
        let line = Polyline::from_points((0..10).map(|k| Point2::new(k as f64 * 0.1, 0.05)).collect(), false).unwrap();
        let r = pointwise_chen_check(&line, 0.0, 0.3, 1.0, &g).unwrap();
        assert_eq!((r.max_defect, r.orientation), (0, 0));
    }

    #[test]
    fn inclusion_trivial_and_hypotheses() {
        let p = ngon(32, 0.5, 12);
        let g = GridSpec::new(-1.0, -1.0, 1.0 / 64.0, 128, 128).unwrap();
        let bad = InclusionParams { t_pieces: 4, n: 20, m1: 10, m2: 2, k: 3 };
        assert!(matches!(inclusion_check(&p, bad, &g), Err(Error::HypothesisViolated(_))));
        let one = InclusionParams { t_pieces: 1, n: 6, m1: 1, m2: 1, k: 2 };
        let r = inclusion_check(&p, one, &g).unwrap();
        assert_eq!(r.violations(), 0);
        assert!(r.d_n_cells > 0);
    }

    #[test]
    fn green_identity_on_circles() {
        let g = window();
        for turns in 1..3 {
            let c = ngon(100, 1.3, turns);
            let wf = winding_field(&c, &g).unwrap();
            let tol = g.h * c.length() * (1.0 + wf.max_abs() as f64);
            assert!((wf.integral() - c.signed_area()).abs() <= tol);
        }
    }

    #[test]
    fn histogram_streaming_matches_field() {
        let p = sample_brownian(1000, 8).unwrap().closure();
        let g = GridSpec::new(-2.0, -2.0, 1.0 / 50.0, 200, 200).unwrap();
        let wf = winding_field(&p, &g).unwrap();
        assert_eq!(winding_histogram(&p, &g, wf.tau).unwrap(), wf.histogram());
    }

    #[test]
    fn werner_flags_non_brownian() {
        let g = window();
        let h = winding_field(&ngon(64, 1.0, 1), &g).unwrap().histogram();
        let r = werner_statistic(&[h.clone(), h], 1, false).unwrap();
        assert_eq!(r.warnings.len(), 1);
        assert!(r.level.mean > 3.0);
    }

    fn arb_path() -> impl Strategy<Value = Polyline> {
        proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 3..40)
            .prop_map(|v| Polyline::from_points(v.into_iter().map(|(x, y)| Point2::new(x, y)).collect(), true).unwrap())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn reversal_negates(p in arb_path()) {
            let g = GridSpec::new(-1.2, -1.2, 0.04, 60, 60).unwrap();
            let a = winding_numbers(&g, p.segments());
            let b = winding_numbers(&g, p.reversed().segments());
            prop_assert!(a.iter().zip(&b).all(|(x, y)| *x == -*y));
        }

        #[test]
        fn translation_equivariance(p in arb_path(), di in -5i32..5, dj in -5i32..5) {
            let h = 1.0 / 32.0;
            let g = GridSpec::new(-1.25, -1.25, h, 80, 80).unwrap();
            let shift = Point2::new(di as f64 * h, dj as f64 * h);
            let g2 = GridSpec::new(-1.25 + shift.x, -1.25 + shift.y, h, 80, 80).unwrap();
            let a = winding_field(&p, &g).unwrap();
            let b = winding_field(&p.translated(shift), &g2).unwrap();
            // Exact except where rounding of the shifted coordinates moves a
            // crossing across a center; both fields mask those cells.
            for k in 0..g.cells() {
                if let (Some(x), Some(y)) = (a.value(k), b.value(k)) {
                    prop_assert_eq!(x, y);
                }
            }
        }

        #[test]
        fn subdivision_identity(p in arb_path(), t in 1usize..6) {
            let g = GridSpec::new(-1.2, -1.2, 0.03, 80, 80).unwrap();
            let open = Polyline { closed: false, ..p.clone() };
            let sd = crate::curves::subdivide(&open, t, true).unwrap();
            let full = winding_field(&p, &g).unwrap();
            let mut acc = winding_numbers(&g, sd.closing.segments());
            for piece in sd.closed_pieces() {
                for (a, w) in acc.iter_mut().zip(winding_numbers(&g, piece.segments())) {
                    *a += w;
                }
            }
            for k in 0..g.cells() {
                if let Some(w) = full.value(k) {
                    prop_assert_eq!(acc[k], w);
                }
            }
        }
    }
}
