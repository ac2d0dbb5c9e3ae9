//! Scanline crossing accumulation shared by winding fields and triangle masks.
//!
//! A segment contributes to row `j` when `lo.y <= y_c(j) < hi.y`, where
//! `(lo, hi)` is the segment sorted by `y`. The crossing abscissa is always
//! computed from `lo` to `hi`, so a reversed segment produces the same rows
//! and columns with the opposite sign. Cells whose center lies strictly left
//! of the crossing receive the signed contribution.

use crate::grid::{GridSpec, Point2};

pub(crate) struct RowEvents {
    j0: usize,
    rows: Vec<Vec<(u32, i32)>>,
}

impl RowEvents {
    pub(crate) fn new(grid: &GridSpec) -> Self {
        Self::rows_in(0, grid.ny)
    }

    /// Events restricted to rows `j0..j1`.
    pub(crate) fn rows_in(j0: usize, j1: usize) -> Self {
        Self {
            j0,
            rows: vec![Vec::new(); j1.saturating_sub(j0)],
        }
    }

    pub(crate) fn add_segment(&mut self, grid: &GridSpec, a: Point2, b: Point2) {
        if a.y == b.y {
            return;
        }
        let (lo, hi, sign) = if a.y < b.y { (a, b, 1) } else { (b, a, -1) };
        let slope = (hi.x - lo.x) / (hi.y - lo.y);
        let j_end = self.j0 + self.rows.len();
        let mut j = grid.first_row_at_or_after(lo.y).max(self.j0);
        while j < j_end {
            let yc = grid.center_y(j);
            if yc >= hi.y {
                break;
            }
            let xc = lo.x + (yc - lo.y) * slope;
            let i_star = grid.first_col_at_or_after(xc);
            if i_star > 0 {
                self.rows[j - self.j0].push((i_star as u32, sign));
            }
            j += 1;
        }
    }

    pub(crate) fn active_rows(&self) -> impl Iterator<Item = usize> + '_ {
        self.rows
            .iter()
            .enumerate()
            .filter(|(_, r)| !r.is_empty())
            .map(|(j, _)| j + self.j0)
    }

    pub(crate) fn row_is_empty(&self, j: usize) -> bool {
        self.rows[j - self.j0].is_empty()
    }

    /// Writes the winding numbers of row `j` into `out` (length `nx`).
    pub(crate) fn fill_row(&self, j: usize, out: &mut [i32]) {
        self.fill_row_from(j, 0, out);
    }

    /// Writes columns `i0..i0 + out.len()` of row `j` into `out`.
    pub(crate) fn fill_row_from(&self, j: usize, i0: usize, out: &mut [i32]) {
        out.iter_mut().for_each(|w| *w = 0);
        let n = out.len();
        let mut head = 0i32;
        for &(i_star, s) in &self.rows[j - self.j0] {
            let i_star = i_star as usize;
            if i_star <= i0 {
                continue;
            }
            head += s;
            if i_star - i0 < n {
                out[i_star - i0] -= s;
            }
        }
        let mut acc = head;
        for w in out.iter_mut() {
            acc += *w;
            *w = acc;
        }
    }
}

/// Winding numbers of a closed polygon on the smallest block of cells that
/// can carry a nonzero value. Cells outside the block have winding zero.
pub(crate) struct WindowWinding {
    pub i0: usize,
    pub j0: usize,
    pub ni: usize,
    pub nj: usize,
    pub values: Vec<i32>,
}

impl WindowWinding {
    pub(crate) fn closed(grid: &GridSpec, segments: &[(Point2, Point2)]) -> Self {
        let (mut x_lo, mut y_lo) = (f64::INFINITY, f64::INFINITY);
        let (mut x_hi, mut y_hi) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for &(a, b) in segments {
            x_lo = x_lo.min(a.x).min(b.x);
            x_hi = x_hi.max(a.x).max(b.x);
            y_lo = y_lo.min(a.y).min(b.y);
            y_hi = y_hi.max(a.y).max(b.y);
        }
        if segments.is_empty() {
            return Self { i0: 0, j0: 0, ni: 0, nj: 0, values: Vec::new() };
        }
        let i0 = grid.first_col_at_or_after(x_lo);
        let i1 = grid.first_col_at_or_after(x_hi).max(i0);
        let j0 = grid.first_row_at_or_after(y_lo);
        let j1 = grid.first_row_at_or_after(y_hi).max(j0);
        let mut ev = RowEvents::rows_in(j0, j1);
        for &(a, b) in segments {
            ev.add_segment(grid, a, b);
        }
        let (ni, nj) = (i1 - i0, j1 - j0);
        let mut values = vec![0i32; ni * nj];
        if ni > 0 {
            for (r, row) in values.chunks_mut(ni).enumerate() {
                if !ev.row_is_empty(j0 + r) {
                    ev.fill_row_from(j0 + r, i0, row);
                }
            }
        }
        Self { i0, j0, ni, nj, values }
    }

    /// Σ f(winding) · weight over the block, with `weights` indexed on the
    /// full grid. `f(0)` must be zero.
    pub(crate) fn integrate_with(&self, grid: &GridSpec, weights: &[f64], f: impl Fn(i32) -> f64) -> f64 {
        let mut acc = crate::stats::NeumaierAcc::default();
        for r in 0..self.nj {
            let base = grid.index(self.i0, self.j0 + r);
            let row = &self.values[r * self.ni..(r + 1) * self.ni];
            for (c, &w) in row.iter().enumerate() {
                if w != 0 {
                    acc.add(f(w) * weights[base + c]);
                }
            }
        }
        acc.value()
    }

    pub(crate) fn integrate(&self, grid: &GridSpec, weights: &[f64]) -> f64 {
        self.integrate_with(grid, weights, |w| w as f64)
    }

    /// Winding at global cell `(i, j)`; zero outside the block.
    pub(crate) fn at(&self, i: usize, j: usize) -> i32 {
        if i < self.i0 || j < self.j0 || i >= self.i0 + self.ni || j >= self.j0 + self.nj {
            0
        } else {
            self.values[(j - self.j0) * self.ni + (i - self.i0)]
        }
    }

    /// Iterates `(full-grid index, winding)` over nonzero cells.
    pub(crate) fn nonzero<'a>(&'a self, grid: &'a GridSpec) -> impl Iterator<Item = (usize, i32)> + 'a {
        (0..self.nj).flat_map(move |r| {
            let base = grid.index(self.i0, self.j0 + r);
            self.values[r * self.ni..(r + 1) * self.ni]
                .iter()
                .enumerate()
                .filter(|(_, &w)| w != 0)
                .map(move |(c, &w)| (base + c, w))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_matches_full_grid() {
        let grid = GridSpec::new(-1.0, -1.0, 1.0 / 64.0, 128, 128).unwrap();
        let pts = [
            Point2::new(-0.3, -0.2),
            Point2::new(0.5, 0.1),
            Point2::new(-0.1, 0.6),
            Point2::new(0.2, -0.4),
            Point2::new(0.0, 0.3),
        ];
        let segs: Vec<_> = (0..pts.len()).map(|k| (pts[k], pts[(k + 1) % pts.len()])).collect();
        let mut ev = RowEvents::new(&grid);
        for &(a, b) in &segs {
            ev.add_segment(&grid, a, b);
        }
        let mut full = vec![0i32; grid.cells()];
        for (j, row) in full.chunks_mut(grid.nx).enumerate() {
            ev.fill_row(j, row);
        }
        let win = WindowWinding::closed(&grid, &segs);
        let mut rebuilt = vec![0i32; grid.cells()];
        for (k, w) in win.nonzero(&grid) {
            rebuilt[k] = w;
        }
        assert_eq!(full, rebuilt);
        assert!(full.iter().any(|&w| w == 2));
    }
}
