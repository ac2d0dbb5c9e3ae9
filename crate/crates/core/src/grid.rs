//! Uniform cell grids, cell masks and the shapes rasterized onto them.

use crate::error::{Error, Result};
use crate::raster::RowEvents;
use serde::{Deserialize, Serialize};
use std::ops::{Add, Mul, Sub};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(self, other: Self) -> f64 {
        (self - other).norm()
    }

    /// z-component of the cross product.
    pub fn cross(self, other: Self) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn dot(self, other: Self) -> f64 {
        self.x * other.x + self.y * other.y
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, o: Point2) -> Point2 {
        Point2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, o: Point2) -> Point2 {
        Point2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<Point2> for f64 {
    type Output = Point2;
    fn mul(self, p: Point2) -> Point2 {
        Point2::new(self * p.x, self * p.y)
    }
}

/// Axis-aligned uniform grid of `nx * ny` square cells of side `h` whose
/// lower-left corner is `(x0, y0)`. Cells are indexed row-major,
/// `index = j * nx + i`, where `i` runs along x.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x0: f64,
    pub y0: f64,
    pub h: f64,
    pub nx: usize,
    pub ny: usize,
}

impl GridSpec {
    pub fn new(x0: f64, y0: f64, h: f64, nx: usize, ny: usize) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidGrid(format!("cell size {h} must be positive")));
        }
        if nx == 0 || ny == 0 {
            return Err(Error::InvalidGrid("grid has no cells".into()));
        }
        if !(x0.is_finite() && y0.is_finite()) {
            return Err(Error::InvalidGrid("origin must be finite".into()));
        }
        Ok(Self { x0, y0, h, nx, ny })
    }

    /// The `n x n` grid on `[0, side]^2`.
    pub fn square(n: usize, side: f64) -> Result<Self> {
        Self::new(0.0, 0.0, side / n as f64, n, n)
    }

    /// Smallest grid with cell size `h` anchored at `(x_lo, y_lo)` that
    /// covers the rectangle up to `(x_hi, y_hi)`.
    pub fn covering(x_lo: f64, y_lo: f64, x_hi: f64, y_hi: f64, h: f64) -> Result<Self> {
        let nx = (((x_hi - x_lo) / h) - 1e-9).ceil().max(1.0) as usize;
        let ny = (((y_hi - y_lo) / h) - 1e-9).ceil().max(1.0) as usize;
        Self::new(x_lo, y_lo, h, nx, ny)
    }

    pub fn cells(&self) -> usize {
        self.nx * self.ny
    }

    pub fn cell_area(&self) -> f64 {
        self.h * self.h
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn center_x(&self, i: usize) -> f64 {
        self.x0 + (i as f64 + 0.5) * self.h
    }

    pub fn center_y(&self, j: usize) -> f64 {
        self.y0 + (j as f64 + 0.5) * self.h
    }

    pub fn center(&self, i: usize, j: usize) -> Point2 {
        Point2::new(self.center_x(i), self.center_y(j))
    }

    pub fn center_of_index(&self, k: usize) -> Point2 {
        self.center(k % self.nx, k / self.nx)
    }

    pub fn x_max(&self) -> f64 {
        self.x0 + self.nx as f64 * self.h
    }

    pub fn y_max(&self) -> f64 {
        self.y0 + self.ny as f64 * self.h
    }

    /// First column whose center is `>= x` (may be `nx`).
    pub fn first_col_at_or_after(&self, x: f64) -> usize {
        let guess = ((x - self.x0) / self.h - 0.5).ceil();
        let mut i = guess.clamp(0.0, self.nx as f64) as usize;
        while i > 0 && self.center_x(i - 1) >= x {
            i -= 1;
        }
        while i < self.nx && self.center_x(i) < x {
            i += 1;
        }
        i
    }

    /// First row whose center is `>= y` (may be `ny`).
    pub fn first_row_at_or_after(&self, y: f64) -> usize {
        let guess = ((y - self.y0) / self.h - 0.5).ceil();
        let mut j = guess.clamp(0.0, self.ny as f64) as usize;
        while j > 0 && self.center_y(j - 1) >= y {
            j -= 1;
        }
        while j < self.ny && self.center_y(j) < y {
            j += 1;
        }
        j
    }

    pub fn same_as(&self, other: &GridSpec) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }
}

/// A set of cells, stored as a packed bitset in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct CellMask {
    grid: GridSpec,
    bits: Vec<u64>,
}

impl CellMask {
    pub fn empty(grid: GridSpec) -> Self {
        Self {
            grid,
            bits: vec![0; grid.cells().div_ceil(64)],
        }
    }

    pub fn full(grid: GridSpec) -> Self {
        let mut m = Self::empty(grid);
        for w in m.bits.iter_mut() {
            *w = u64::MAX;
        }
        m.trim();
        m
    }

    /// Mask of cells whose center satisfies `pred`.
    pub fn from_centers(grid: GridSpec, pred: impl Fn(Point2) -> bool) -> Self {
        let mut m = Self::empty(grid);
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                if pred(grid.center(i, j)) {
                    m.set(grid.index(i, j), true);
                }
            }
        }
        m
    }

    fn trim(&mut self) {
        let n = self.grid.cells();
        let rem = n % 64;
        if rem != 0 {
            if let Some(last) = self.bits.last_mut() {
                *last &= (1u64 << rem) - 1;
            }
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn get(&self, k: usize) -> bool {
        (self.bits[k / 64] >> (k % 64)) & 1 == 1
    }

    pub fn set(&mut self, k: usize, value: bool) {
        let bit = 1u64 << (k % 64);
        if value {
            self.bits[k / 64] |= bit;
        } else {
            self.bits[k / 64] &= !bit;
        }
    }

    pub fn count(&self) -> usize {
        self.bits.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.iter().all(|&w| w == 0)
    }

    /// Lebesgue measure of the union of the selected cells.
    pub fn area(&self) -> f64 {
        self.count() as f64 * self.grid.cell_area()
    }

    pub fn iter_ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.iter().enumerate().flat_map(|(w, &word)| {
            let mut rest = word;
            std::iter::from_fn(move || {
                if rest == 0 {
                    None
                } else {
                    let b = rest.trailing_zeros() as usize;
                    rest &= rest - 1;
                    Some(w * 64 + b)
                }
            })
        })
    }

    fn zip(&self, other: &CellMask, f: impl Fn(u64, u64) -> u64) -> Result<CellMask> {
        self.grid.same_as(&other.grid)?;
        let bits = self.bits.iter().zip(&other.bits).map(|(&a, &b)| f(a, b)).collect();
        Ok(CellMask { grid: self.grid, bits })
    }

    pub fn union(&self, other: &CellMask) -> Result<CellMask> {
        self.zip(other, |a, b| a | b)
    }

    pub fn intersection(&self, other: &CellMask) -> Result<CellMask> {
        self.zip(other, |a, b| a & b)
    }

    pub fn difference(&self, other: &CellMask) -> Result<CellMask> {
        self.zip(other, |a, b| a & !b)
    }

    pub fn complement(&self) -> CellMask {
        let mut m = CellMask {
            grid: self.grid,
            bits: self.bits.iter().map(|w| !w).collect(),
        };
        m.trim();
        m
    }

    pub fn intersects(&self, other: &CellMask) -> Result<bool> {
        self.grid.same_as(&other.grid)?;
        Ok(self.bits.iter().zip(&other.bits).any(|(a, b)| a & b != 0))
    }

    /// Bounding box of the selected cells as `(i_min, i_max, j_min, j_max)`.
    pub fn bounding_cells(&self) -> Option<(usize, usize, usize, usize)> {
        let nx = self.grid.nx;
        let mut bb: Option<(usize, usize, usize, usize)> = None;
        for k in self.iter_ones() {
            let (i, j) = (k % nx, k / nx);
            bb = Some(match bb {
                None => (i, i, j, j),
                Some((a, b, c, d)) => (a.min(i), b.max(i), c.min(j), d.max(j)),
            });
        }
        bb
    }

    /// Maximal horizontal runs of set cells as `(row, first_col, last_col)`.
    pub fn runs(&self) -> Vec<(usize, usize, usize)> {
        let nx = self.grid.nx;
        let mut out = Vec::new();
        let mut cur: Option<(usize, usize, usize)> = None;
        for k in self.iter_ones() {
            let (i, j) = (k % nx, k / nx);
            cur = match cur {
                Some((r, a, b)) if r == j && b + 1 == i => Some((r, a, i)),
                Some(run) => {
                    out.push(run);
                    Some((j, i, i))
                }
                None => Some((j, i, i)),
            };
        }
        out.extend(cur);
        out
    }

    /// Run-length encoding: a 16-byte header (`b"CMK1"`, `nx` and `ny` as
    /// little-endian u16, `h` as little-endian f64) followed by LEB128 run
    /// lengths that alternate between unset and set cells, starting unset.
    /// The grid origin is not stored.
    pub fn to_rle(&self) -> Result<Vec<u8>> {
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        if nx > u16::MAX as usize || ny > u16::MAX as usize {
            return Err(Error::Format("grid too large for mask encoding".into()));
        }
        let mut out = Vec::with_capacity(16 + self.bits.len());
        out.extend_from_slice(b"CMK1");
        out.extend_from_slice(&(nx as u16).to_le_bytes());
        out.extend_from_slice(&(ny as u16).to_le_bytes());
        out.extend_from_slice(&self.grid.h.to_le_bytes());
        let mut current = false;
        let mut run = 0u64;
        for k in 0..self.grid.cells() {
            if self.get(k) == current {
                run += 1;
            } else {
                write_leb128(&mut out, run);
                current = !current;
                run = 1;
            }
        }
        write_leb128(&mut out, run);
        Ok(out)
    }

    /// Decodes [`CellMask::to_rle`] output onto a grid anchored at `(x0, y0)`.
    pub fn from_rle(bytes: &[u8], x0: f64, y0: f64) -> Result<CellMask> {
        if bytes.len() < 16 || &bytes[..4] != b"CMK1" {
            return Err(Error::Format("not a cell mask".into()));
        }
        let nx = u16::from_le_bytes([bytes[4], bytes[5]]) as usize;
        let ny = u16::from_le_bytes([bytes[6], bytes[7]]) as usize;
        let h = f64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes"));
        let grid = GridSpec::new(x0, y0, h, nx, ny)?;
        let mut mask = CellMask::empty(grid);
        let mut pos = 16;
        let mut k = 0usize;
        let mut current = false;
        while pos < bytes.len() {
            let run = read_leb128(bytes, &mut pos)? as usize;
            if k + run > grid.cells() {
                return Err(Error::Format("mask runs overflow the grid".into()));
            }
            if current {
                for c in k..k + run {
                    mask.set(c, true);
                }
            }
            k += run;
            current = !current;
        }
        if k != grid.cells() {
            return Err(Error::Format("mask runs do not cover the grid".into()));
        }
        Ok(mask)
    }
}

fn write_leb128(out: &mut Vec<u8>, mut v: u64) {
    loop {
        let byte = (v & 0x7f) as u8;
        v >>= 7;
        if v == 0 {
            out.push(byte);
            return;
        }
        out.push(byte | 0x80);
    }
}

fn read_leb128(bytes: &[u8], pos: &mut usize) -> Result<u64> {
    let mut v = 0u64;
    let mut shift = 0;
    loop {
        let b = *bytes
            .get(*pos)
            .ok_or_else(|| Error::Format("truncated run length".into()))?;
        *pos += 1;
        if shift >= 64 {
            return Err(Error::Format("run length overflow".into()));
        }
        v |= ((b & 0x7f) as u64) << shift;
        if b & 0x80 == 0 {
            return Ok(v);
        }
        shift += 7;
    }
}

/// Largest distance between a center of `a` and a center of `b`.
pub fn d_sup(a: &CellMask, b: &CellMask) -> Result<f64> {
    a.grid().same_as(b.grid())?;
    let h = a.grid().h;
    let (ra, rb) = (a.runs(), b.runs());
    let mut best = 0.0f64;
    for &(ja, a0, a1) in &ra {
        for &(jb, b0, b1) in &rb {
            let dx = (a1 as f64 - b0 as f64).abs().max((b1 as f64 - a0 as f64).abs());
            let dy = (ja as f64 - jb as f64).abs();
            best = best.max(dx.hypot(dy) * h);
        }
    }
    Ok(best)
}

/// Smallest distance between centers of `a` and `b`, capped at 1.
pub fn d_inf(a: &CellMask, b: &CellMask) -> Result<f64> {
    a.grid().same_as(b.grid())?;
    let h = a.grid().h;
    let (ra, rb) = (a.runs(), b.runs());
    let mut best = f64::INFINITY;
    for &(ja, a0, a1) in &ra {
        for &(jb, b0, b1) in &rb {
            let gap = (b0 as f64 - a1 as f64).max(a0 as f64 - b1 as f64).max(0.0);
            let dy = (ja as f64 - jb as f64).abs();
            best = best.min(gap.hypot(dy) * h);
        }
    }
    Ok(best.min(1.0))
}

/// Cells whose center lies in the half-open rectangle `[x_lo, x_hi) x [y_lo, y_hi)`.
/// Adjacent rectangles therefore partition cells without overlap.
pub fn rectangle_mask(x_lo: f64, x_hi: f64, y_lo: f64, y_hi: f64, grid: &GridSpec) -> CellMask {
    let mut m = CellMask::empty(*grid);
    let (i0, i1) = (grid.first_col_at_or_after(x_lo), grid.first_col_at_or_after(x_hi));
    let (j0, j1) = (grid.first_row_at_or_after(y_lo), grid.first_row_at_or_after(y_hi));
    for j in j0..j1 {
        for i in i0..i1 {
            m.set(grid.index(i, j), true);
        }
    }
    m
}

/// Triangle with ordered vertices. Orientation follows the vertex order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Triangle {
    pub z: [Point2; 3],
}

impl Triangle {
    pub fn new(a: Point2, b: Point2, c: Point2) -> Self {
        Self { z: [a, b, c] }
    }

    /// `+1` counterclockwise, `-1` clockwise, `0` degenerate.
    pub fn orientation(&self) -> i32 {
        let c = (self.z[1] - self.z[0]).cross(self.z[2] - self.z[0]);
        if c > 0.0 {
            1
        } else if c < 0.0 {
            -1
        } else {
            0
        }
    }

    pub fn area(&self) -> f64 {
        0.5 * (self.z[1] - self.z[0]).cross(self.z[2] - self.z[0]).abs()
    }

    pub fn reversed(&self) -> Self {
        Self::new(self.z[0], self.z[2], self.z[1])
    }
}

/// `true` if `p` lies exactly on the closed segment `[a, b]`.
pub(crate) fn on_segment(p: Point2, a: Point2, b: Point2) -> bool {
    (b - a).cross(p - a) == 0.0
        && p.x >= a.x.min(b.x)
        && p.x <= a.x.max(b.x)
        && p.y >= a.y.min(b.y)
        && p.y <= a.y.max(b.y)
}

/// Cells whose center lies strictly inside the triangle, computed with the
/// same crossing rule used for winding numbers. Returns the mask and the
/// orientation sign.
pub fn triangle_mask(tri: &Triangle, grid: &GridSpec) -> (CellMask, i32) {
    let eps = tri.orientation();
    let mut mask = CellMask::empty(*grid);
    if eps == 0 {
        return (mask, 0);
    }
    let mut ev = RowEvents::new(grid);
    for k in 0..3 {
        ev.add_segment(grid, tri.z[k], tri.z[(k + 1) % 3]);
    }
    let mut row = vec![0i32; grid.nx];
    for j in ev.active_rows() {
        ev.fill_row(j, &mut row);
        for (i, &w) in row.iter().enumerate() {
            if w != 0 {
                let c = grid.center(i, j);
                let on_edge = (0..3).any(|k| on_segment(c, tri.z[k], tri.z[(k + 1) % 3]));
                if !on_edge {
                    mask.set(grid.index(i, j), true);
                }
            }
        }
    }
    (mask, eps)
}

/// Translates a mask by whole cells. Cells pushed off the grid are dropped
/// and counted.
pub fn shift_mask(mask: &CellMask, di: i64, dj: i64) -> (CellMask, usize) {
    let g = *mask.grid();
    let mut out = CellMask::empty(g);
    let mut dropped = 0;
    for k in mask.iter_ones() {
        let i = (k % g.nx) as i64 + di;
        let j = (k / g.nx) as i64 + dj;
        if i >= 0 && j >= 0 && (i as usize) < g.nx && (j as usize) < g.ny {
            out.set(g.index(i as usize, j as usize), true);
        } else {
            dropped += 1;
        }
    }
    (out, dropped)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit_grid(n: usize) -> GridSpec {
        GridSpec::square(n, 1.0).unwrap()
    }

    #[test]
    fn unit_square_has_area_one() {
        let g = unit_grid(128);
        let m = rectangle_mask(0.0, 1.0, 0.0, 1.0, &g);
        assert_eq!(m.count(), 128 * 128);
        assert!((m.area() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn grid_rejects_bad_parameters() {
        assert!(GridSpec::new(0.0, 0.0, 0.0, 4, 4).is_err());
        assert!(GridSpec::new(0.0, 0.0, 0.1, 0, 4).is_err());
    }

    #[test]
    fn mismatched_grids_are_rejected() {
        let a = CellMask::full(unit_grid(8));
        let b = CellMask::full(unit_grid(16));
        assert!(matches!(a.union(&b), Err(Error::GridMismatch)));
    }

    #[test]
    fn triangle_orientation_and_area() {
        let t = Triangle::new(Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), Point2::new(0.0, 1.0));
        assert_eq!(t.orientation(), 1);
        assert_eq!(t.reversed().orientation(), -1);
        let g = unit_grid(256);
        let (m, eps) = triangle_mask(&t, &g);
        let (mr, epsr) = triangle_mask(&t.reversed(), &g);
        assert_eq!((eps, epsr), (1, -1));
        assert_eq!(m, mr);
        assert!((m.area() - 0.5).abs() < 4.0 / 256.0);
    }

    #[test]
    fn shift_counts_dropped_cells() {
        let g = unit_grid(4);
        let m = rectangle_mask(0.0, 1.0, 0.0, 0.25, &g);
        let (s, dropped) = shift_mask(&m, 1, 0);
        assert_eq!(dropped, 1);
        assert_eq!(s.count(), 3);
    }

    #[test]
    fn rle_round_trip() {
        let g = unit_grid(37);
        let m = CellMask::from_centers(g, |p| (p.x - 0.4).hypot(p.y - 0.5) < 0.3);
        let bytes = m.to_rle().unwrap();
        assert_eq!(&bytes[..4], b"CMK1");
        let back = CellMask::from_rle(&bytes, 0.0, 0.0).unwrap();
        assert_eq!(back, m);
        assert!(CellMask::from_rle(&bytes[..10], 0.0, 0.0).is_err());
    }

    #[test]
    fn set_distances_match_brute_force() {
        let g = unit_grid(20);
        let a = CellMask::from_centers(g, |p| p.x < 0.3 && p.y > 0.5 && (p.x + p.y) < 1.0);
        let b = CellMask::from_centers(g, |p| p.x > 0.6 && (p.y - 0.3).abs() < 0.2);
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for ka in a.iter_ones() {
            for kb in b.iter_ones() {
                let d = g.center_of_index(ka).dist(g.center_of_index(kb));
                lo = lo.min(d);
                hi = hi.max(d);
            }
        }
        assert!((d_inf(&a, &b).unwrap() - lo.min(1.0)).abs() < 1e-12);
        assert!((d_sup(&a, &b).unwrap() - hi).abs() < 1e-12);
    }

    fn arb_mask(n: usize) -> impl Strategy<Value = CellMask> {
        proptest::collection::vec(any::<bool>(), n * n).prop_map(move |v| {
            let mut m = CellMask::empty(unit_grid(n));
            for (k, b) in v.into_iter().enumerate() {
                m.set(k, b);
            }
            m
        })
    }

    proptest! {
        #[test]
        fn inclusion_exclusion(a in arb_mask(9), b in arb_mask(9)) {
            let u = a.union(&b).unwrap().count();
            let i = a.intersection(&b).unwrap().count();
            prop_assert_eq!(u + i, a.count() + b.count());
            prop_assert_eq!(a.difference(&b).unwrap().count() + i, a.count());
            prop_assert_eq!(a.complement().count() + a.count(), 81);
        }

        #[test]
        fn triangle_mask_is_orientation_symmetric(
            pts in proptest::collection::vec((0.0f64..1.0, 0.0f64..1.0), 3)
        ) {
            let t = Triangle::new(
                Point2::new(pts[0].0, pts[0].1),
                Point2::new(pts[1].0, pts[1].1),
                Point2::new(pts[2].0, pts[2].1),
            );
            let g = unit_grid(40);
            let (m, e) = triangle_mask(&t, &g);
            let (mr, er) = triangle_mask(&t.reversed(), &g);
            prop_assert_eq!(e, -er);
            prop_assert_eq!(m, mr);
        }

        #[test]
        fn adjacent_rectangles_partition(split in 0.0f64..1.0) {
            let g = unit_grid(33);
            let l = rectangle_mask(0.0, split, 0.0, 1.0, &g);
            let r = rectangle_mask(split, 1.0, 0.0, 1.0, &g);
            prop_assert!(!l.intersects(&r).unwrap());
            prop_assert_eq!(l.count() + r.count(), 33 * 33);
        }
    }
}
