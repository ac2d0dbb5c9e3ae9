//! Gaussian multiplicative chaos cell masses, moment oracles and checks.

use crate::error::{Error, Result};
use crate::fft::Fft2;
use crate::field::{
    discrete_covariance, CovarianceKernel, CovarianceTable, FieldProvenance, FieldSampler, SamplingMethod, ScalarField,
};
use crate::grid::{d_inf, d_sup, CellMask, GridSpec};
use crate::rng::{derive_seed, stream, Axis};
use crate::stats::{linear_fit, LinearFit, MeanEstimate, NeumaierAcc};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// One realization of the chaos measure as cell masses.
#[derive(Debug, Clone)]
pub struct GmcSample {
    pub grid: GridSpec,
    pub gamma: f64,
    pub masses: Vec<f64>,
    pub provenance: FieldProvenance,
}

pub fn check_gamma(gamma: f64) -> Result<()> {
    if (0.0..2.0).contains(&gamma) {
        Ok(())
    } else {
        Err(Error::GammaOutOfRange(gamma))
    }
}

/// `mass(c) = h^2 exp(gamma phi_c - gamma^2 / 2 Var(phi_c))` with the realized variance.
pub fn gmc_from_field(field: &ScalarField, gamma: f64) -> Result<GmcSample> {
    check_gamma(gamma)?;
    let h2 = field.grid.cell_area();
    let half = 0.5 * gamma * gamma;
    let masses = if gamma == 0.0 {
        vec![h2; field.values.len()]
    } else {
        field
            .values
            .iter()
            .enumerate()
            .map(|(k, &phi)| h2 * (gamma * phi - half * field.variance.at(k)).exp())
            .collect()
    };
    Ok(GmcSample {
        grid: field.grid,
        gamma,
        masses,
        provenance: field.provenance.clone(),
    })
}

impl GmcSample {
    /// The `gamma = 0` measure: every cell carries `h^2`.
    pub fn lebesgue(grid: GridSpec) -> Self {
        Self {
            grid,
            gamma: 0.0,
            masses: vec![grid.cell_area(); grid.cells()],
            provenance: FieldProvenance {
                kernel: "lebesgue".into(),
                seed: 0,
                index: 0,
                level: 0,
                levels: 0,
                method: SamplingMethod::Circulant,
            },
        }
    }

    pub fn total_mass(&self) -> f64 {
        crate::stats::neumaier_sum(self.masses.iter().copied())
    }

    /// Row-major summed-area table with a leading zero row and column.
    pub fn summed_area(&self) -> Vec<f64> {
        let g = self.grid;
        let w = g.nx + 1;
        let mut s = vec![0.0; w * (g.ny + 1)];
        for j in 0..g.ny {
            let mut row = 0.0;
            for i in 0..g.nx {
                row += self.masses[g.index(i, j)];
                s[(j + 1) * w + i + 1] = s[j * w + i + 1] + row;
            }
        }
        s
    }
}

/// `M(A)`: compensated sum of the masses of the cells in `mask`.
pub fn measure_of(gmc: &GmcSample, mask: &CellMask) -> Result<f64> {
    gmc.grid.same_as(mask.grid())?;
    let mut acc = NeumaierAcc::default();
    for k in mask.iter_ones() {
        acc.add(gmc.masses[k]);
    }
    Ok(acc.value())
}

/// Exponents attached to `gamma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingConstants {
    pub gamma: f64,
    pub nu: f64,
    pub q_max: f64,
}

impl ScalingConstants {
    pub fn new(gamma: f64) -> Result<Self> {
        check_gamma(gamma)?;
        let g2 = gamma * gamma;
        Ok(Self {
            gamma,
            nu: 2.0 - g2 / 2.0,
            q_max: if gamma == 0.0 { f64::INFINITY } else { 4.0 / g2 },
        })
    }

    /// Per-area structure exponent: `E[M(A)^q] <~ |A|^zeta(q)`.
    pub fn zeta(&self, q: f64) -> f64 {
        let g2 = self.gamma * self.gamma;
        (1.0 + g2 / 4.0) * q - g2 / 4.0 * q * q
    }
}

/// `h^4 sum_{a in A, b in B} exp(gamma^2 K(a, b))` over cell centers.
pub fn second_moment_oracle(kernel: &CovarianceKernel, gamma: f64, a: &CellMask, b: &CellMask) -> Result<f64> {
    a.grid().same_as(b.grid())?;
    check_gamma(gamma)?;
    if gamma * gamma >= 2.0 && a.intersects(b)? {
        return Err(Error::L2PhaseViolation { gamma });
    }
    let g = *a.grid();
    let h4 = g.cell_area() * g.cell_area();
    if gamma == 0.0 {
        return Ok(a.area() * b.area());
    }
    let g2 = gamma * gamma;
    let table = discrete_covariance(kernel, &g)?;
    match &table {
        CovarianceTable::Stationary { .. } => {
            let counts = offset_counts(a, b);
            let (mx, my) = (2 * g.nx, 2 * g.ny);
            let mut acc = NeumaierAcc::default();
            for (t, &n) in counts.iter().enumerate() {
                if n == 0 {
                    continue;
                }
                let di = signed(t % mx, mx);
                let dj = signed(t / mx, my);
                let k = table.offset_entry(di, dj).expect("offset in range");
                acc.add(n as f64 * (g2 * k).exp());
            }
            Ok(h4 * acc.value())
        }
        CovarianceTable::Dense { .. } => {
            let bs: Vec<usize> = b.iter_ones().collect();
            let rows: Vec<f64> = a
                .iter_ones()
                .collect::<Vec<_>>()
                .par_iter()
                .map(|&ka| {
                    let mut acc = NeumaierAcc::default();
                    for &kb in &bs {
                        acc.add((g2 * table.entry(ka, kb)).exp());
                    }
                    acc.value()
                })
                .collect();
            Ok(h4 * crate::stats::neumaier_sum(rows))
        }
    }
}

fn signed(a: usize, m: usize) -> i64 {
    if a < m / 2 {
        a as i64
    } else {
        a as i64 - m as i64
    }
}

/// Number of pairs `(a, b)` with offset `b - a`, on a `2nx x 2ny` torus.
fn offset_counts(a: &CellMask, b: &CellMask) -> Vec<u64> {
    let g = *a.grid();
    let (mx, my) = (2 * g.nx, 2 * g.ny);
    let embed = |m: &CellMask| {
        let mut v = vec![Complex64::new(0.0, 0.0); mx * my];
        for k in m.iter_ones() {
            v[(k / g.nx) * mx + k % g.nx] = Complex64::new(1.0, 0.0);
        }
        v
    };
    let (mut fa, mut fb) = (embed(a), embed(b));
    let fwd = Fft2::new(mx, my, false);
    fwd.process(&mut fa);
    fwd.process(&mut fb);
    let mut prod: Vec<Complex64> = fa.iter().zip(&fb).map(|(x, y)| x.conj() * y).collect();
    Fft2::new(mx, my, true).process(&mut prod);
    let m = (mx * my) as f64;
    prod.iter().map(|v| (v.re / m).round().max(0.0) as u64).collect()
}

/// Independent chaos samples drawn from one field sampler.
#[derive(Debug, Clone)]
pub struct GmcEnsemble {
    pub sampler: Arc<FieldSampler>,
    pub gamma: f64,
    pub seed: u64,
    pub size: usize,
}

impl GmcEnsemble {
    pub fn new(sampler: Arc<FieldSampler>, gamma: f64, seed: u64, size: usize) -> Result<Self> {
        check_gamma(gamma)?;
        Ok(Self {
            sampler,
            gamma,
            seed,
            size,
        })
    }

    /// Sample number `index`, identical to the one seen by [`GmcEnsemble::map`].
    pub fn sample(&self, index: usize) -> GmcSample {
        let field = self.sampler.sample(self.seed, index as u64);
        gmc_from_field(&field, self.gamma).expect("gamma checked")
    }

    /// Applies `f` to fields `0..size` and returns results in index order.
    pub fn map_fields<T, F>(&self, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize, &ScalarField) -> T + Sync,
    {
        let b = self.sampler.batch();
        let draws = self.size.div_ceil(b);
        let nested: Vec<Vec<T>> = (0..draws)
            .into_par_iter()
            .map(|d| {
                self.sampler
                    .sample_batch(self.seed, d as u64)
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| d * b + k < self.size)
                    .map(|(k, field)| f(d * b + k, field))
                    .collect()
            })
            .collect();
        nested.into_iter().flatten().collect()
    }

    pub fn map<T, F>(&self, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize, &GmcSample) -> T + Sync,
    {
        let gamma = self.gamma;
        self.map_fields(|k, field| f(k, &gmc_from_field(field, gamma).expect("gamma checked")))
    }

    /// Applies `f` to coupled hierarchies (coarsest first) of every sample.
    pub fn map_hierarchy<T, F>(&self, levels: u32, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize, &[GmcSample]) -> T + Sync,
    {
        let b = self.sampler.batch();
        let draws = self.size.div_ceil(b);
        let nested: Vec<Vec<T>> = (0..draws)
            .into_par_iter()
            .map(|d| {
                self.sampler
                    .sample_hierarchy_batch(self.seed, d as u64, levels)
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| d * b + k < self.size)
                    .map(|(k, fields)| {
                        let gmcs: Vec<GmcSample> = fields
                            .iter()
                            .map(|fl| gmc_from_field(fl, self.gamma).expect("gamma checked"))
                            .collect();
                        f(d * b + k, &gmcs)
                    })
                    .collect()
            })
            .collect();
        nested.into_iter().flatten().collect()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MomentEntry {
    pub area: f64,
    pub second_moment: MeanEstimate,
    pub ratio: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SecondMomentBoundReport {
    pub entries: Vec<MomentEntry>,
    /// `max Ê[M(A)^2] / (|A|^nu + |A|^2)`.
    pub max_ratio: f64,
    /// Fit of `log Ê[M(A)^2]` against `log |A|`.
    pub fit: Option<LinearFit>,
}

pub fn second_moment_bound_check(ens: &GmcEnsemble, masks: &[CellMask]) -> Result<SecondMomentBoundReport> {
    if ens.size < 2 {
        return Err(Error::InsufficientEnsemble { got: ens.size, need: 2 });
    }
    for m in masks {
        ens.sampler.grid().same_as(m.grid())?;
    }
    let nu = ScalingConstants::new(ens.gamma)?.nu;
    let per_sample: Vec<Vec<f64>> = ens.map(|_, s| {
        masks
            .iter()
            .map(|m| measure_of(s, m).expect("grid checked").powi(2))
            .collect()
    });
    let mut entries = Vec::new();
    for (k, m) in masks.iter().enumerate() {
        let xs: Vec<f64> = per_sample.iter().map(|v| v[k]).collect();
        let est = MeanEstimate::from_samples(&xs)?;
        let a = m.area();
        entries.push(MomentEntry {
            area: a,
            second_moment: est,
            ratio: est.mean / (a.powf(nu) + a * a),
        });
    }
    let max_ratio = entries.iter().map(|e| e.ratio).fold(0.0, f64::max);
    let (lx, ly): (Vec<f64>, Vec<f64>) = entries
        .iter()
        .filter(|e| e.area > 0.0)
        .map(|e| (e.area.ln(), e.second_moment.mean.ln()))
        .unzip();
    Ok(SecondMomentBoundReport {
        entries,
        max_ratio,
        fit: linear_fit(&lx, &ly).ok(),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FourSetReport {
    pub empirical: f64,
    pub stderr: f64,
    /// Right-hand side of the four-set covariance bound with unit constant.
    pub rhs: f64,
    pub ratio: f64,
    pub d_inf: f64,
    pub d_sup_a: f64,
    pub d_sup_b: f64,
}

pub fn four_set_covariance_check(
    ens: &GmcEnsemble,
    a1: &CellMask,
    a2: &CellMask,
    b1: &CellMask,
    b2: &CellMask,
) -> Result<FourSetReport> {
    for m in [a1, a2, b1, b2] {
        ens.sampler.grid().same_as(m.grid())?;
        if m.area() > 1.0 {
            return Err(Error::HypothesisViolated("all areas must be at most 1".into()));
        }
    }
    let dsa = d_sup(a1, a2)?;
    let dsb = d_sup(b1, b2)?;
    let di = d_inf(a1, b1)?;
    if 4.0 * dsa.max(dsb) > di {
        return Err(Error::HypothesisViolated(format!(
            "4 max(d_sup) = {} exceeds d_inf = {}",
            4.0 * dsa.max(dsb),
            di
        )));
    }
    let prods: Vec<f64> = ens.map(|_, s| {
        let m = |x: &CellMask| measure_of(s, x).expect("grid checked");
        (m(a1) - m(a2)) * (m(b1) - m(b2))
    });
    let est = MeanEstimate::from_samples(&prods)?;
    let g2 = ens.gamma * ens.gamma;
    let (xa1, xa2, xb1, xb2) = (a1.area(), a2.area(), b1.area(), b2.area());
    let rhs = di.powf(-g2) * (xb1 - xb2).abs() * (xa1 - xa2).abs()
        + (dsa + dsb) * di.powf(-1.0 - g2) * (xa1 * (xb1 - xb2).abs() + (xa2 - xa1).abs() * xb1)
        + di.powf(-2.0 - g2) * dsa * dsb * xa1 * xb1;
    Ok(FourSetReport {
        empirical: est.mean.abs(),
        stderr: est.stderr,
        rhs,
        ratio: if rhs > 0.0 { est.mean.abs() / rhs } else { f64::NAN },
        d_inf: di,
        d_sup_a: dsa,
        d_sup_b: dsb,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KahaneReport {
    /// `Ê[M_A(mask)^q]`.
    pub lhs: MeanEstimate,
    /// `Ê[(e^{gamma Omega - gamma^2 C / 2} M_B(mask))^q]`.
    pub rhs: MeanEstimate,
    pub difference: f64,
    pub difference_stderr: f64,
    /// `max (K_A - K_B - C)` over cell pairs; nonpositive when the hypothesis holds.
    pub kernel_excess: f64,
}

/// Largest `K_A - K_B - c` over pairs of cells of `grid`.
pub fn kernel_excess(ka: &CovarianceKernel, kb: &CovarianceKernel, c: f64, grid: &GridSpec) -> Result<f64> {
    let ta = discrete_covariance(ka, grid)?;
    let tb = discrete_covariance(kb, grid)?;
    let mut worst = f64::NEG_INFINITY;
    match (&ta, &tb) {
        (CovarianceTable::Stationary { values: va, .. }, CovarianceTable::Stationary { values: vb, .. }) => {
            for (x, y) in va.iter().zip(vb) {
                worst = worst.max(x - y - c);
            }
        }
        _ => {
            let n = grid.cells();
            for p in 0..n {
                for q in p..n {
                    worst = worst.max(ta.entry(p, q) - tb.entry(p, q) - c);
                }
            }
        }
    }
    Ok(worst)
}

/// Convexity comparison for `F(x) = x^q` between two kernels with `K_A <= K_B + C`.
pub fn kahane_compare(
    sampler_a: Arc<FieldSampler>,
    sampler_b: Arc<FieldSampler>,
    c: f64,
    gamma: f64,
    mask: &CellMask,
    q: f64,
    size: usize,
    seed: u64,
) -> Result<KahaneReport> {
    let sc = ScalingConstants::new(gamma)?;
    if !(1.0..sc.q_max).contains(&q) {
        return Err(Error::MomentOutOfRange { q, max: sc.q_max });
    }
    if c < 0.0 {
        return Err(Error::InvalidArgument("shift constant must be nonnegative".into()));
    }
    sampler_a.grid().same_as(mask.grid())?;
    sampler_b.grid().same_as(mask.grid())?;
    let excess = kernel_excess(sampler_a.kernel(), sampler_b.kernel(), c, mask.grid())?;
    if excess > 1e-12 {
        return Err(Error::KernelInequalityViolated { excess });
    }
    let ea = GmcEnsemble::new(sampler_a, gamma, derive_seed(seed, Axis::Gmc, 0), size)?;
    let eb = GmcEnsemble::new(sampler_b, gamma, derive_seed(seed, Axis::Gmc, 1), size)?;
    let lhs: Vec<f64> = ea.map(|_, s| measure_of(s, mask).expect("grid checked").powf(q));
    let rhs: Vec<f64> = eb.map(|k, s| {
        let mut rng = stream(derive_seed(seed, Axis::Kahane, k as u64), 0);
        let z: f64 = rng.sample(StandardNormal);
        let shift = (gamma * c.sqrt() * z - 0.5 * gamma * gamma * c).exp();
        (shift * measure_of(s, mask).expect("grid checked")).powf(q)
    });
    let lhs = MeanEstimate::from_samples(&lhs)?;
    let rhs = MeanEstimate::from_samples(&rhs)?;
    Ok(KahaneReport {
        lhs,
        rhs,
        difference: lhs.mean - rhs.mean,
        difference_stderr: lhs.stderr.hypot(rhs.stderr),
        kernel_excess: excess,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RectangleEntry {
    pub aspect: f64,
    pub width: f64,
    pub height: f64,
    pub moment: MeanEstimate,
    /// `Ê[M(R)^q] / |R|^zeta(q)`.
    pub ratio: f64,
    pub clipped_fraction: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RectangleMomentReport {
    pub q: f64,
    pub zeta: f64,
    pub entries: Vec<RectangleEntry>,
    pub max_over_min: f64,
}

/// Moments of rectangles of area `area` and the given aspect ratios
/// (width / height). Each rectangle is sampled on its own grid of spacing `h`.
pub fn rectangle_moment_check(
    kernel: &CovarianceKernel,
    gamma: f64,
    q: f64,
    area: f64,
    aspects: &[f64],
    h: f64,
    size: usize,
    seed: u64,
) -> Result<RectangleMomentReport> {
    let sc = ScalingConstants::new(gamma)?;
    if !(1.0..sc.q_max).contains(&q) {
        return Err(Error::MomentOutOfRange { q, max: sc.q_max });
    }
    let zeta = sc.zeta(q);
    let mut entries = Vec::new();
    for (idx, &aspect) in aspects.iter().enumerate() {
        let width = (area * aspect).sqrt();
        let height = (area / aspect).sqrt();
        if width > 1.0 || height > 1.0 {
            return Err(Error::InvalidArgument("rectangle sides must be at most 1".into()));
        }
        let grid = GridSpec::covering(0.0, 0.0, width, height, h)?;
        let sampler = Arc::new(FieldSampler::auto(kernel, &grid)?);
        let clipped_fraction = sampler.clipped_fraction();
        let ens = GmcEnsemble::new(sampler, gamma, derive_seed(seed, Axis::Gmc, idx as u64), size)?;
        let vals: Vec<f64> = ens.map(|_, s| s.total_mass().powf(q));
        let moment = MeanEstimate::from_samples(&vals)?;
        let r_area = grid.nx as f64 * grid.ny as f64 * grid.cell_area();
        entries.push(RectangleEntry {
            aspect,
            width,
            height,
            moment,
            ratio: moment.mean / r_area.powf(zeta),
            clipped_fraction,
        });
    }
    let max = entries.iter().map(|e| e.ratio).fold(f64::NEG_INFINITY, f64::max);
    let min = entries.iter().map(|e| e.ratio).fold(f64::INFINITY, f64::min);
    Ok(RectangleMomentReport {
        q,
        zeta,
        entries,
        max_over_min: max / min,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScalingEntry {
    pub r: f64,
    pub second_moment: MeanEstimate,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScalingReport {
    pub entries: Vec<ScalingEntry>,
    /// Fit of `log Ê[M(rQ)^2]` against `log r`; the exact value is `2 nu`.
    pub fit: LinearFit,
    pub expected_slope: f64,
}

/// Second moments of the scaled squares `r [0, side]^2`, each on an
/// `n x n` grid so that the discretization scales with the square.
pub fn scaling_check(
    kernel: &CovarianceKernel,
    gamma: f64,
    side: f64,
    ratios: &[f64],
    n: usize,
    size: usize,
    seed: u64,
) -> Result<ScalingReport> {
    let sc = ScalingConstants::new(gamma)?;
    let mut entries = Vec::new();
    for (idx, &r) in ratios.iter().enumerate() {
        let grid = GridSpec::square(n, r * side)?;
        let scaled = match kernel.eps_reg {
            Some(e) => kernel.clone().with_eps(e * r),
            None => kernel.clone(),
        };
        let sampler = Arc::new(FieldSampler::auto(&scaled, &grid)?);
        let ens = GmcEnsemble::new(sampler, gamma, derive_seed(seed, Axis::Gmc, idx as u64), size)?;
        let vals: Vec<f64> = ens.map(|_, s| s.total_mass().powi(2));
        entries.push(ScalingEntry {
            r,
            second_moment: MeanEstimate::from_samples(&vals)?,
        });
    }
    let lx: Vec<f64> = entries.iter().map(|e| e.r.ln()).collect();
    let ly: Vec<f64> = entries.iter().map(|e| e.second_moment.mean.ln()).collect();
    Ok(ScalingReport {
        fit: linear_fit(&lx, &ly)?,
        entries,
        expected_slope: 2.0 * sc.nu,
    })
}

/// `Var(M_l(A) - M_L(A))` for each level `l` against the finest level.
pub fn hierarchy_cauchy(ens: &GmcEnsemble, levels: u32, mask: &CellMask) -> Result<Vec<f64>> {
    ens.sampler.grid().same_as(mask.grid())?;
    if ens.size < 2 {
        return Err(Error::InsufficientEnsemble { got: ens.size, need: 2 });
    }
    let per: Vec<Vec<f64>> = ens.map_hierarchy(levels, |_, gs| {
        gs.iter().map(|g| measure_of(g, mask).expect("grid checked")).collect()
    });
    let l = levels as usize;
    Ok((0..l)
        .map(|lv| {
            let d: Vec<f64> = per.iter().map(|v| v[lv] - v[l - 1]).collect();
            crate::stats::sample_variance(&d)
        })
        .collect())
}
