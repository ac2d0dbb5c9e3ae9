//! Log-correlated Gaussian fields on grids.
//!
//! The covariance is `K(z, w) = log_+(1 / max(|z - w|, eps)) + g(z, w)`.
//! Stationary kernels are sampled exactly on a torus of twice the grid size
//! by circulant embedding; general kernels fall back to a dense spectral
//! factor. Negative eigenvalues are clipped in both cases and the clipped
//! fraction of spectral mass is reported. Fields carry their realized
//! per-cell variance so that the chaos normalization is exact.

use crate::error::{Error, Result};
use crate::fft::Fft2;
use crate::grid::{GridSpec, Point2};
use crate::rng::{derive_seed, stream, Axis};
use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::Arc;

pub type StationaryFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
pub type GeneralFn = Arc<dyn Fn(Point2, Point2) -> f64 + Send + Sync>;

/// Smooth bounded perturbation `g` of the logarithmic kernel.
#[derive(Clone)]
pub enum Perturbation {
    Constant(f64),
    /// `g(z, w) = f(w.x - z.x, w.y - z.y)` with `f` even.
    Stationary(StationaryFn),
    General(GeneralFn),
}

#[derive(Clone)]
pub enum KernelVariant {
    PureLog,
    LogPlusSmooth { g: Perturbation, sup_bound: f64 },
}

#[derive(Clone)]
pub struct CovarianceKernel {
    pub variant: KernelVariant,
    /// Diagonal regularization scale; `None` means half the grid spacing.
    /// At exactly `h` the nearest-neighbour covariance equals the variance
    /// and about 3% of the spectral mass is negative.
    pub eps_reg: Option<f64>,
}

impl fmt::Debug for CovarianceKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CovarianceKernel({}, eps_reg={:?})", self.describe(), self.eps_reg)
    }
}

pub fn log_plus_inv(r: f64) -> f64 {
    if r >= 1.0 {
        0.0
    } else {
        -r.ln()
    }
}

impl CovarianceKernel {
    pub fn pure_log() -> Self {
        Self {
            variant: KernelVariant::PureLog,
            eps_reg: None,
        }
    }

    pub fn log_plus_constant(c: f64) -> Self {
        Self {
            variant: KernelVariant::LogPlusSmooth {
                g: Perturbation::Constant(c),
                sup_bound: c.abs(),
            },
            eps_reg: None,
        }
    }

    pub fn log_plus_smooth(g: Perturbation, sup_bound: f64) -> Self {
        Self {
            variant: KernelVariant::LogPlusSmooth { g, sup_bound },
            eps_reg: None,
        }
    }

    pub fn with_eps(mut self, eps: f64) -> Self {
        self.eps_reg = Some(eps);
        self
    }

    pub fn eps_for(&self, grid: &GridSpec) -> f64 {
        self.eps_reg.unwrap_or(0.5 * grid.h)
    }

    pub fn describe(&self) -> String {
        match &self.variant {
            KernelVariant::PureLog => "pure-log".into(),
            KernelVariant::LogPlusSmooth { g, sup_bound } => match g {
                Perturbation::Constant(c) => format!("log+const({c})"),
                Perturbation::Stationary(_) => format!("log+stationary(|g|<={sup_bound})"),
                Perturbation::General(_) => format!("log+general(|g|<={sup_bound})"),
            },
        }
    }

    pub fn is_stationary(&self) -> bool {
        !matches!(
            self.variant,
            KernelVariant::LogPlusSmooth {
                g: Perturbation::General(_),
                ..
            }
        )
    }

    /// `sup |g|` as certified by the caller.
    pub fn g_bound(&self) -> f64 {
        match &self.variant {
            KernelVariant::PureLog => 0.0,
            KernelVariant::LogPlusSmooth { sup_bound, .. } => *sup_bound,
        }
    }

    pub fn eval(&self, z: Point2, w: Point2, eps: f64) -> f64 {
        let d = w - z;
        let base = log_plus_inv(d.norm().max(eps));
        base + match &self.variant {
            KernelVariant::PureLog => 0.0,
            KernelVariant::LogPlusSmooth { g, .. } => match g {
                Perturbation::Constant(c) => *c,
                Perturbation::Stationary(f) => f(d.x, d.y),
                Perturbation::General(f) => f(z, w),
            },
        }
    }

    /// Kernel at displacement `(dx, dy)`; only meaningful for stationary kernels.
    fn eval_offset(&self, dx: f64, dy: f64, eps: f64) -> f64 {
        let o = Point2::new(0.0, 0.0);
        self.eval(o, Point2::new(dx, dy), eps)
    }
}

/// Covariance of the cell-center values of a field on a grid.
#[derive(Debug, Clone)]
pub enum CovarianceTable {
    /// Entries indexed by cell offset; `(2nx-1) x (2ny-1)` values.
    Stationary { grid: GridSpec, values: Vec<f64> },
    /// Full `n x n` matrix.
    Dense { grid: GridSpec, values: Vec<f64> },
}

impl CovarianceTable {
    pub fn grid(&self) -> &GridSpec {
        match self {
            CovarianceTable::Stationary { grid, .. } | CovarianceTable::Dense { grid, .. } => grid,
        }
    }

    /// Entry for the offset `(di, dj)` cells; stationary tables only.
    pub fn offset_entry(&self, di: i64, dj: i64) -> Option<f64> {
        match self {
            CovarianceTable::Stationary { grid, values } => {
                let w = 2 * grid.nx - 1;
                let a = di + grid.nx as i64 - 1;
                let b = dj + grid.ny as i64 - 1;
                if a < 0 || b < 0 || a as usize >= w || b as usize >= 2 * grid.ny - 1 {
                    return None;
                }
                Some(values[b as usize * w + a as usize])
            }
            CovarianceTable::Dense { .. } => None,
        }
    }

    pub fn entry(&self, c1: usize, c2: usize) -> f64 {
        match self {
            CovarianceTable::Stationary { grid, .. } => {
                let nx = grid.nx;
                let di = (c2 % nx) as i64 - (c1 % nx) as i64;
                let dj = (c2 / nx) as i64 - (c1 / nx) as i64;
                self.offset_entry(di, dj).expect("offset within grid")
            }
            CovarianceTable::Dense { grid, values } => values[c1 * grid.cells() + c2],
        }
    }
}

pub fn discrete_covariance(kernel: &CovarianceKernel, grid: &GridSpec) -> Result<CovarianceTable> {
    let eps = kernel.eps_for(grid);
    let h = grid.h;
    if kernel.is_stationary() {
        let (w, hgt) = (2 * grid.nx - 1, 2 * grid.ny - 1);
        let mut values = vec![0.0; w * hgt];
        for b in 0..hgt {
            let dy = (b as f64 - (grid.ny - 1) as f64) * h;
            for a in 0..w {
                let dx = (a as f64 - (grid.nx - 1) as f64) * h;
                let v = kernel.eval_offset(dx, dy, eps);
                if !v.is_finite() {
                    return Err(Error::NonFiniteKernel(dx, dy));
                }
                values[b * w + a] = v;
            }
        }
        Ok(CovarianceTable::Stationary { grid: *grid, values })
    } else {
        let n = grid.cells();
        let mut values = vec![0.0; n * n];
        for c1 in 0..n {
            let z = grid.center_of_index(c1);
            for c2 in c1..n {
                let w = grid.center_of_index(c2);
                let v = kernel.eval(z, w, eps);
                if !v.is_finite() {
                    return Err(Error::NonFiniteKernel(w.x - z.x, w.y - z.y));
                }
                values[c1 * n + c2] = v;
                values[c2 * n + c1] = v;
            }
        }
        Ok(CovarianceTable::Dense { grid: *grid, values })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMethod {
    Circulant,
    DenseFactor,
}

#[derive(Debug, Clone, Copy)]
pub struct SamplerOptions {
    pub dense_cap: usize,
    pub max_clipped_fraction: f64,
    /// Torus side as a multiple of the grid side (at least 2).
    pub embedding_factor: usize,
}

impl Default for SamplerOptions {
    fn default() -> Self {
        Self {
            dense_cap: 4096,
            max_clipped_fraction: 0.01,
            embedding_factor: 2,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct FieldProvenance {
    pub kernel: String,
    pub seed: u64,
    pub index: u64,
    /// Hierarchy level, `levels` being the finest.
    pub level: u32,
    pub levels: u32,
    pub method: SamplingMethod,
}

#[derive(Debug, Clone)]
pub enum FieldVariance {
    Uniform(f64),
    PerCell(Arc<Vec<f64>>),
}

impl FieldVariance {
    pub fn at(&self, k: usize) -> f64 {
        match self {
            FieldVariance::Uniform(v) => *v,
            FieldVariance::PerCell(v) => v[k],
        }
    }
}

/// One realization of a Gaussian field at the cell centers of a grid.
#[derive(Debug, Clone)]
pub struct ScalarField {
    pub grid: GridSpec,
    pub values: Vec<f64>,
    /// Realized (post-clipping) variance of each cell.
    pub variance: FieldVariance,
    pub provenance: FieldProvenance,
}

struct CirculantPlan {
    mx: usize,
    my: usize,
    /// `sqrt(max(lambda, 0) / M)` per frequency.
    amplitude: Vec<f64>,
    lambda_pos: Vec<f64>,
    fft: Fft2,
}

struct DenseFactor {
    /// Row-major `n x n` factor with `F F^T` the clipped covariance.
    factor: Vec<f64>,
    variance: Arc<Vec<f64>>,
}

enum SamplerImpl {
    Circulant(CirculantPlan),
    Dense(DenseFactor),
}

/// Precomputed sampler for one kernel on one grid.
pub struct FieldSampler {
    kernel: CovarianceKernel,
    grid: GridSpec,
    eps: f64,
    method: SamplingMethod,
    clipped_fraction: f64,
    inner: SamplerImpl,
}

impl fmt::Debug for FieldSampler {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FieldSampler")
            .field("kernel", &self.kernel)
            .field("grid", &self.grid)
            .field("method", &self.method)
            .field("clipped_fraction", &self.clipped_fraction)
            .finish()
    }
}

impl FieldSampler {
    pub fn new(kernel: &CovarianceKernel, grid: &GridSpec, method: SamplingMethod) -> Result<Self> {
        Self::with_options(kernel, grid, method, SamplerOptions::default())
    }

    pub fn with_options(
        kernel: &CovarianceKernel,
        grid: &GridSpec,
        method: SamplingMethod,
        opts: SamplerOptions,
    ) -> Result<Self> {
        let eps = kernel.eps_for(grid);
        let (inner, clipped) = match method {
            SamplingMethod::Circulant => {
                if !kernel.is_stationary() {
                    return Err(Error::NotStationary);
                }
                let (plan, clipped) = circulant_plan(kernel, grid, eps, opts.embedding_factor.max(2))?;
                (SamplerImpl::Circulant(plan), clipped)
            }
            SamplingMethod::DenseFactor => {
                if grid.cells() > opts.dense_cap {
                    return Err(Error::DenseTooLarge {
                        cells: grid.cells(),
                        cap: opts.dense_cap,
                    });
                }
                let (f, clipped) = dense_factor(kernel, grid)?;
                (SamplerImpl::Dense(f), clipped)
            }
        };
        if clipped > opts.max_clipped_fraction {
            return Err(Error::ClippingExceeded {
                fraction: clipped,
                threshold: opts.max_clipped_fraction,
            });
        }
        Ok(Self {
            kernel: kernel.clone(),
            grid: *grid,
            eps,
            method,
            clipped_fraction: clipped,
            inner,
        })
    }

    /// Circulant when the kernel allows it, dense otherwise.
    pub fn auto(kernel: &CovarianceKernel, grid: &GridSpec) -> Result<Self> {
        if kernel.is_stationary() {
            match Self::new(kernel, grid, SamplingMethod::Circulant) {
                Err(Error::ClippingExceeded { .. }) if grid.cells() <= 4096 => {
                    Self::new(kernel, grid, SamplingMethod::DenseFactor)
                }
                other => other,
            }
        } else {
            Self::new(kernel, grid, SamplingMethod::DenseFactor)
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn kernel(&self) -> &CovarianceKernel {
        &self.kernel
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn method(&self) -> SamplingMethod {
        self.method
    }

    pub fn clipped_fraction(&self) -> f64 {
        self.clipped_fraction
    }

    /// Number of fields produced by one draw (two for circulant, one for dense).
    pub fn batch(&self) -> usize {
        match self.inner {
            SamplerImpl::Circulant(_) => 2,
            SamplerImpl::Dense(_) => 1,
        }
    }

    fn provenance(&self, seed: u64, index: u64, level: u32, levels: u32) -> FieldProvenance {
        FieldProvenance {
            kernel: self.kernel.describe(),
            seed,
            index,
            level,
            levels,
            method: self.method,
        }
    }

    /// Field number `index` of the stream keyed by `seed`.
    pub fn sample(&self, seed: u64, index: u64) -> ScalarField {
        let b = self.batch() as u64;
        let mut fields = self.sample_hierarchy_batch(seed, index / b, 1);
        fields.swap_remove((index % b) as usize).pop().expect("one level")
    }

    /// Fields `batch * draw .. batch * (draw + 1)`.
    pub fn sample_batch(&self, seed: u64, draw: u64) -> Vec<ScalarField> {
        self.sample_hierarchy_batch(seed, draw, 1)
            .into_iter()
            .map(|mut l| l.pop().expect("one level"))
            .collect()
    }

    /// Coupled hierarchy for field `index`, coarsest level first.
    pub fn sample_hierarchy(&self, seed: u64, index: u64, levels: u32) -> Vec<ScalarField> {
        let b = self.batch() as u64;
        let mut all = self.sample_hierarchy_batch(seed, index / b, levels);
        all.swap_remove((index % b) as usize)
    }

    /// Hierarchies for every field of draw `draw`; outer index is the field.
    pub fn sample_hierarchy_batch(&self, seed: u64, draw: u64, levels: u32) -> Vec<Vec<ScalarField>> {
        let levels = levels.max(1);
        let key = derive_seed(seed, Axis::Field, draw);
        let g = self.grid;
        match &self.inner {
            SamplerImpl::Circulant(plan) => {
                let (mx, my) = (plan.mx, plan.my);
                let mut noise = vec![Complex64::new(0.0, 0.0); mx * my];
                noise.par_chunks_mut(mx).enumerate().for_each(|(r, row)| {
                    let mut rng = stream(key, r as u64);
                    for v in row.iter_mut() {
                        let a: f64 = rng.sample(StandardNormal);
                        let b: f64 = rng.sample(StandardNormal);
                        *v = Complex64::new(a, b);
                    }
                });
                let mut out = vec![Vec::with_capacity(levels as usize), Vec::with_capacity(levels as usize)];
                for level in 1..=levels {
                    let width = self.eps * 2f64.powi((levels - level) as i32) / g.h;
                    let (bx, by) = if level < levels && width > 1.0 {
                        (Some(box_symbol(width, mx)), Some(box_symbol(width, my)))
                    } else {
                        (None, None)
                    };
                    let mut buf: Vec<Complex64> = noise
                        .par_iter()
                        .enumerate()
                        .map(|(k, z)| {
                            let mut a = plan.amplitude[k];
                            if let (Some(bx), Some(by)) = (&bx, &by) {
                                a *= bx[k % mx] * by[k / mx];
                            }
                            z * a
                        })
                        .collect();
                    let var = match (&bx, &by) {
                        (Some(bx), Some(by)) => {
                            let m = (mx * my) as f64;
                            let mut acc = crate::stats::NeumaierAcc::default();
                            for (k, l) in plan.lambda_pos.iter().enumerate() {
                                let s = bx[k % mx] * by[k / mx];
                                acc.add(l * s * s);
                            }
                            acc.value() / m
                        }
                        _ => {
                            let m = (mx * my) as f64;
                            crate::stats::neumaier_sum(plan.lambda_pos.iter().copied()) / m
                        }
                    };
                    plan.fft.process(&mut buf);
                    let mut re = Vec::with_capacity(g.cells());
                    let mut im = Vec::with_capacity(g.cells());
                    for j in 0..g.ny {
                        for i in 0..g.nx {
                            let v = buf[j * mx + i];
                            re.push(v.re);
                            im.push(v.im);
                        }
                    }
                    for (half, values) in [re, im].into_iter().enumerate() {
                        out[half].push(ScalarField {
                            grid: g,
                            values,
                            variance: FieldVariance::Uniform(var),
                            provenance: self.provenance(seed, 2 * draw + half as u64, level, levels),
                        });
                    }
                }
                out
            }
            SamplerImpl::Dense(f) => {
                let n = g.cells();
                let mut rng = stream(key, 0);
                let z: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
                let fine: Vec<f64> = f
                    .factor
                    .par_chunks(n)
                    .map(|row| crate::stats::neumaier_sum(row.iter().zip(&z).map(|(a, b)| a * b)))
                    .collect();
                let mut levels_out = Vec::with_capacity(levels as usize);
                for level in 1..=levels {
                    let width = self.eps * 2f64.powi((levels - level) as i32) / g.h;
                    let (values, variance) = if level < levels && width > 1.0 {
                        let values = smooth_real(&fine, &g, width);
                        let var = smoothed_factor_variance(&f.factor, &g, width);
                        (values, FieldVariance::PerCell(Arc::new(var)))
                    } else {
                        (fine.clone(), FieldVariance::PerCell(f.variance.clone()))
                    };
                    levels_out.push(ScalarField {
                        grid: g,
                        values,
                        variance,
                        provenance: self.provenance(seed, draw, level, levels),
                    });
                }
                vec![levels_out]
            }
        }
    }
}

/// Signed torus offset of index `a` on a cycle of length `m`.
fn signed(a: usize, m: usize) -> i64 {
    if a <= m / 2 {
        a as i64
    } else {
        a as i64 - m as i64
    }
}

fn circulant_plan(
    kernel: &CovarianceKernel,
    grid: &GridSpec,
    eps: f64,
    factor: usize,
) -> Result<(CirculantPlan, f64)> {
    let (mx, my) = (factor * grid.nx, factor * grid.ny);
    let h = grid.h;
    let mut c = vec![Complex64::new(0.0, 0.0); mx * my];
    for b in 0..my {
        let dy = signed(b, my) as f64 * h;
        for a in 0..mx {
            let dx = signed(a, mx) as f64 * h;
            let v = kernel.eval_offset(dx, dy, eps);
            if !v.is_finite() {
                return Err(Error::NonFiniteKernel(dx, dy));
            }
            c[b * mx + a] = Complex64::new(v, 0.0);
        }
    }
    Fft2::new(mx, my, false).process(&mut c);
    let m = (mx * my) as f64;
    let mut pos = 0.0;
    let mut neg = 0.0;
    let mut lambda_pos = Vec::with_capacity(mx * my);
    let mut amplitude = Vec::with_capacity(mx * my);
    for v in &c {
        let l = v.re;
        if l >= 0.0 {
            pos += l;
            lambda_pos.push(l);
            amplitude.push((l / m).sqrt());
        } else {
            neg -= l;
            lambda_pos.push(0.0);
            amplitude.push(0.0);
        }
    }
    let clipped = if pos + neg > 0.0 { neg / (pos + neg) } else { 0.0 };
    Ok((
        CirculantPlan {
            mx,
            my,
            amplitude,
            lambda_pos,
            fft: Fft2::new(mx, my, false),
        },
        clipped,
    ))
}

fn dense_factor(kernel: &CovarianceKernel, grid: &GridSpec) -> Result<(DenseFactor, f64)> {
    let table = discrete_covariance(kernel, grid)?;
    let n = grid.cells();
    let m = DMatrix::from_fn(n, n, |a, b| table.entry(a, b));
    let eig = SymmetricEigen::new(m);
    let mut pos = 0.0;
    let mut neg = 0.0;
    let roots: Vec<f64> = eig
        .eigenvalues
        .iter()
        .map(|&l| {
            if l >= 0.0 {
                pos += l;
                l.sqrt()
            } else {
                neg -= l;
                0.0
            }
        })
        .collect();
    let clipped = if pos + neg > 0.0 { neg / (pos + neg) } else { 0.0 };
    let mut factor = vec![0.0; n * n];
    let mut variance = vec![0.0; n];
    for a in 0..n {
        let mut acc = crate::stats::NeumaierAcc::default();
        for (k, r) in roots.iter().enumerate() {
            let v = eig.eigenvectors[(a, k)] * r;
            factor[a * n + k] = v;
            acc.add(v * v);
        }
        variance[a] = acc.value();
    }
    Ok((
        DenseFactor {
            factor,
            variance: Arc::new(variance),
        },
        clipped,
    ))
}

/// Weights of a box of width `b` cells on integer offsets: the length of
/// `[o - 1/2, o + 1/2] ∩ [-b/2, b/2]`, divided by `b`.
fn box_weights(b: f64) -> Vec<(i64, f64)> {
    let r = (b / 2.0 + 0.5).ceil() as i64;
    (-r..=r)
        .filter_map(|o| {
            let lo = (o as f64 - 0.5).max(-b / 2.0);
            let hi = (o as f64 + 0.5).min(b / 2.0);
            (hi > lo).then(|| (o, (hi - lo) / b))
        })
        .collect()
}

/// Real Fourier symbol of the box on a cycle of length `m`.
fn box_symbol(b: f64, m: usize) -> Vec<f64> {
    let w = box_weights(b);
    (0..m)
        .map(|k| {
            w.iter()
                .map(|&(o, wt)| wt * (2.0 * std::f64::consts::PI * (k as f64) * (o as f64) / m as f64).cos())
                .sum()
        })
        .collect()
}

/// Separable box smoothing with weights renormalized at the grid edge.
fn smooth_real(values: &[f64], g: &GridSpec, b: f64) -> Vec<f64> {
    let w = box_weights(b);
    let pass = |src: &[f64], along_x: bool| -> Vec<f64> {
        let mut out = vec![0.0; src.len()];
        for j in 0..g.ny {
            for i in 0..g.nx {
                let (mut acc, mut norm) = (0.0, 0.0);
                for &(o, wt) in &w {
                    let (ii, jj) = if along_x { (i as i64 + o, j as i64) } else { (i as i64, j as i64 + o) };
                    if ii >= 0 && jj >= 0 && (ii as usize) < g.nx && (jj as usize) < g.ny {
                        acc += wt * src[g.index(ii as usize, jj as usize)];
                        norm += wt;
                    }
                }
                out[g.index(i, j)] = acc / norm;
            }
        }
        out
    };
    pass(&pass(values, true), false)
}

fn smoothed_factor_variance(factor: &[f64], g: &GridSpec, b: f64) -> Vec<f64> {
    let n = g.cells();
    let cols: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|k| {
            let col: Vec<f64> = (0..n).map(|a| factor[a * n + k]).collect();
            smooth_real(&col, g, b)
        })
        .collect();
    (0..n)
        .map(|a| crate::stats::neumaier_sum(cols.iter().map(|c| c[a] * c[a])))
        .collect()
}

/// One field from a fresh sampler.
pub fn sample_field(
    kernel: &CovarianceKernel,
    grid: &GridSpec,
    seed: u64,
    method: SamplingMethod,
) -> Result<ScalarField> {
    Ok(FieldSampler::new(kernel, grid, method)?.sample(seed, 0))
}

/// Coupled hierarchy of `levels` fields, coarsest first.
pub fn sample_field_hierarchy(
    kernel: &CovarianceKernel,
    grid: &GridSpec,
    seed: u64,
    levels: u32,
    method: SamplingMethod,
) -> Result<Vec<ScalarField>> {
    Ok(FieldSampler::new(kernel, grid, method)?.sample_hierarchy(seed, 0, levels))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_values() {
        let k = CovarianceKernel::pure_log();
        let o = Point2::new(0.0, 0.0);
        assert_eq!(k.eval(o, Point2::new(1.0, 0.0), 1e-3), 0.0);
        assert!((k.eval(o, Point2::new((-1f64).exp(), 0.0), 1e-3) - 1.0).abs() < 1e-15);
        let eps = 2f64.powi(-10);
        assert!((k.eval(o, o, eps) - 10.0 * 2f64.ln()).abs() < 1e-12);
        assert!((10.0 * 2f64.ln() - 6.9315).abs() < 1e-4);
    }

    #[test]
    fn table_is_symmetric() {
        let g = GridSpec::square(6, 0.5).unwrap();
        let t = discrete_covariance(&CovarianceKernel::pure_log(), &g).unwrap();
        for a in 0..g.cells() {
            for b in 0..g.cells() {
                assert_eq!(t.entry(a, b), t.entry(b, a));
            }
        }
        assert!((t.entry(0, 0) - (2.0 / g.h).ln()).abs() < 1e-12);
        let bad = CovarianceKernel::log_plus_smooth(
            Perturbation::General(Arc::new(|_, _| f64::NAN)),
            1.0,
        );
        assert!(matches!(discrete_covariance(&bad, &g), Err(Error::NonFiniteKernel(..))));
    }

    #[test]
    fn circulant_rejects_general_kernels() {
        let g = GridSpec::square(4, 1.0).unwrap();
        let k = CovarianceKernel::log_plus_smooth(Perturbation::General(Arc::new(|_, _| 0.1)), 0.1);
        assert!(matches!(
            FieldSampler::new(&k, &g, SamplingMethod::Circulant),
            Err(Error::NotStationary)
        ));
        let big = GridSpec::square(65, 1.0).unwrap();
        assert!(matches!(
            FieldSampler::new(&k, &big, SamplingMethod::DenseFactor),
            Err(Error::DenseTooLarge { .. })
        ));
    }

    #[test]
    fn box_weights_sum_to_one() {
        for b in [1.0, 1.5, 2.0, 3.7, 8.0] {
            let s: f64 = box_weights(b).iter().map(|w| w.1).sum();
            assert!((s - 1.0).abs() < 1e-14);
        }
        assert_eq!(box_weights(1.0), vec![(0, 1.0)]);
    }

    #[test]
    fn fixed_seed_is_deterministic_across_thread_counts() {
        let g = GridSpec::square(32, 1.0).unwrap();
        let s = FieldSampler::new(&CovarianceKernel::pure_log(), &g, SamplingMethod::Circulant).unwrap();
        let a = s.sample(11, 3).values;
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let b = pool.install(|| s.sample(11, 3).values);
        assert_eq!(a, b);
        assert_ne!(a, s.sample(11, 2).values);
    }

    #[test]
    fn single_level_hierarchy_equals_sample() {
        let g = GridSpec::square(16, 0.5).unwrap();
        let k = CovarianceKernel::pure_log();
        for method in [SamplingMethod::Circulant, SamplingMethod::DenseFactor] {
            let f = sample_field(&k, &g, 5, method).unwrap();
            let h = sample_field_hierarchy(&k, &g, 5, 1, method).unwrap();
            assert_eq!(h.len(), 1);
            assert_eq!(h[0].values, f.values);
        }
    }

    #[test]
    fn hierarchy_variance_increases_with_level() {
        let g = GridSpec::square(32, 1.0).unwrap();
        let k = CovarianceKernel::pure_log();
        for method in [SamplingMethod::Circulant, SamplingMethod::DenseFactor] {
            let s = FieldSampler::new(&k, &g, method).unwrap();
            let h = s.sample_hierarchy(1, 0, 4);
            for w in h.windows(2) {
                let k0 = g.index(16, 16);
                assert!(w[0].variance.at(k0) <= w[1].variance.at(k0));
            }
        }
    }
}
