//! Hölder-type regularity of the area process: the `β` fit over dyadic
//! scales, the rectangle maxima `J_{n,n'}`, and the deterministic-curve bound.

use super::{adaptive_window, check_window, closed_window, AreaProcessSample};
use crate::curves::Polyline;
use crate::error::{Error, Result};
use crate::gmc::{GmcEnsemble, GmcSample, ScalingConstants};
use crate::stats::{linear_fit, LinearFit, MeanEstimate};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// `β_0`: `αν - 1` when `α >= γ^-2`, else `2α(1 + γ²/4) - 2γ√α`.
pub fn beta0(alpha: f64, gamma: f64) -> Result<f64> {
    let nu = ScalingConstants::new(gamma)?.nu;
    Ok(if gamma > 0.0 && alpha >= 1.0 / (gamma * gamma) {
        alpha * nu - 1.0
    } else {
        2.0 * alpha * (1.0 + gamma * gamma / 4.0) - 2.0 * gamma * alpha.sqrt()
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BetaFit {
    /// The three finest pair lengths `t - s`.
    pub scales: Vec<f64>,
    /// Ensemble mean of `max |A_{s,t}|` over pairs of each length.
    pub mean_sup: Vec<f64>,
    /// Slope of `log mean_sup` against `log(t - s)`.
    pub base_slope: f64,
    pub betas: Vec<f64>,
    /// Slope for each candidate: `base_slope - β`.
    pub slopes: Vec<f64>,
    /// Largest candidate whose normalized sup does not grow as `t - s` shrinks.
    pub beta_hat: Option<f64>,
}

/// `sup |A_{s,t}| / (t - s)^β` stays bounded across scales exactly when the
/// slope of `log sup |A|` against `log(t - s)` is at least `β`.
pub fn regularity_fit(samples: &[AreaProcessSample], betas: &[f64]) -> Result<BetaFit> {
    let first = samples.first().ok_or(Error::EmptySamples)?;
    let d = first.depth;
    if d < 3 {
        return Err(Error::DepthTooSmall(d));
    }
    if samples.iter().any(|s| s.depth != d || s.max_span < 4) {
        return Err(Error::InvalidArgument("samples need a common depth and span >= 4".into()));
    }
    let n = first.steps();
    let spans = [1usize, 2, 4];
    let scales: Vec<f64> = spans.iter().map(|&k| k as f64 / n as f64).collect();
    let mean_sup: Vec<f64> = spans
        .iter()
        .map(|&k| {
            let total: f64 = samples
                .iter()
                .map(|s| (0..=n - k).map(|i| s.get(i, i + k).abs()).fold(0.0, f64::max))
                .sum();
            total / samples.len() as f64
        })
        .collect();
    let x: Vec<f64> = scales.iter().map(|v| v.ln()).collect();
    let y: Vec<f64> = mean_sup.iter().map(|v| v.ln()).collect();
    let base_slope = linear_fit(&x, &y)?.slope;
    let slopes: Vec<f64> = betas.iter().map(|b| base_slope - b).collect();
    let beta_hat = betas
        .iter()
        .zip(&slopes)
        .filter(|(_, &s)| s >= 0.0)
        .map(|(&b, _)| b)
        .fold(None, |acc: Option<f64>, b| Some(acc.map_or(b, |a| a.max(b))));
    Ok(BetaFit {
        scales,
        mean_sup,
        base_slope,
        betas: betas.to_vec(),
        slopes,
        beta_hat,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JEntry {
    pub n: u32,
    pub n_prime: u32,
    pub second_moment: MeanEstimate,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JReport {
    pub entries: Vec<JEntry>,
    /// Fit of `log2 E[J_{n,n}^2]` against `n`.
    pub diagonal: LinearFit,
}

/// `M` of the cells whose centers lie in `[x_lo, x_hi) × [y_lo, y_hi)`.
fn rect_mass(gmc: &GmcSample, sat: &[f64], x_lo: f64, x_hi: f64, y_lo: f64, y_hi: f64) -> f64 {
    let g = &gmc.grid;
    let (i0, i1) = (g.first_col_at_or_after(x_lo), g.first_col_at_or_after(x_hi));
    let (j0, j1) = (g.first_row_at_or_after(y_lo), g.first_row_at_or_after(y_hi));
    if i1 <= i0 || j1 <= j0 {
        return 0.0;
    }
    let w = g.nx + 1;
    (sat[j1 * w + i1] - sat[j0 * w + i1] - sat[j1 * w + i0] + sat[j0 * w + i0]).max(0.0)
}

/// Monte Carlo `E[J_{n,n'}^2]` for `1 <= n, n' <= depth`, where `J` is the
/// largest mass of a coordinate rectangle `[Z^1_s, Z^1_t] × [Z^2_u, Z^2_v]`
/// over dyadic intervals of lengths `2^-n` and `2^-n'`.
pub fn rectangle_j_moments(paths: &[Polyline], gmcs: &[GmcSample], depth: u32) -> Result<JReport> {
    if paths.is_empty() || paths.len() != gmcs.len() {
        return Err(Error::InvalidArgument("need one measure per path".into()));
    }
    if depth < 2 {
        return Err(Error::DepthTooSmall(depth));
    }
    let per: Vec<Vec<f64>> = paths
        .par_iter()
        .zip(gmcs)
        .map(|(path, gmc)| {
            check_window(path, &gmc.grid)?;
            let sat = gmc.summed_area();
            let ends = |n: u32| -> Vec<(f64, f64, f64, f64)> {
                let m = 1usize << n;
                (0..m)
                    .map(|i| {
                        let a = path.eval(i as f64 / m as f64);
                        let b = path.eval((i + 1) as f64 / m as f64);
                        (a.x.min(b.x), a.x.max(b.x), a.y.min(b.y), a.y.max(b.y))
                    })
                    .collect()
            };
            let levels: Vec<_> = (1..=depth).map(ends).collect();
            let mut out = Vec::with_capacity((depth * depth) as usize);
            for xs in &levels {
                for ys in &levels {
                    let mut best = 0.0f64;
                    for &(x0, x1, _, _) in xs {
                        for &(_, _, y0, y1) in ys {
                            best = best.max(rect_mass(gmc, &sat, x0, x1, y0, y1));
                        }
                    }
                    out.push(best * best);
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let mut entries = Vec::new();
    let d = depth as usize;
    for a in 0..d {
        for b in 0..d {
            let xs: Vec<f64> = per.iter().map(|v| v[a * d + b]).collect();
            entries.push(JEntry {
                n: a as u32 + 1,
                n_prime: b as u32 + 1,
                second_moment: MeanEstimate::from_samples(&xs)?,
            });
        }
    }
    let (x, y): (Vec<f64>, Vec<f64>) = entries
        .iter()
        .filter(|e| e.n == e.n_prime && e.second_moment.mean > 0.0)
        .map(|e| (e.n as f64, e.second_moment.mean.log2()))
        .unzip();
    Ok(JReport {
        diagonal: linear_fit(&x, &y)?,
        entries,
    })
}

/// Measure against which a deterministic curve's areas are taken.
pub enum HolderMeasure<'a> {
    /// Lebesgue measure, each interval on its own grid fitted to the piece
    /// with `cells` cells across its shorter side.
    Lebesgue { cells: usize },
    Chaos(&'a GmcEnsemble),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HolderOptions {
    /// Dyadic levels `1..=depth`.
    pub depth: u32,
    /// Exponent of the winding-function norm.
    pub r: f64,
}

impl Default for HolderOptions {
    fn default() -> Self {
        Self { depth: 5, r: 1.5 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HolderInterval {
    pub s: f64,
    pub t: f64,
    /// `‖A_{s,t}‖_{L^2}` over the measure ensemble.
    pub area_norm: f64,
    /// `‖θ_{s,t}‖_{L^r(λ)}`.
    pub winding_norm: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HolderReport {
    pub alpha: f64,
    pub gamma: f64,
    pub nu: f64,
    /// `αν`.
    pub bound: f64,
    pub r: f64,
    /// `2α / r`.
    pub winding_bound: f64,
    pub intervals: Vec<HolderInterval>,
    pub fit: LinearFit,
    pub winding_fit: LinearFit,
}

/// Fits `log ‖A_{s,t}‖` and `log ‖θ_{s,t}‖_{L^r}` against `log(t - s)` over
/// dyadic intervals of a deterministic curve assumed `α`-Hölder.
pub fn holder_area_bound(
    path: &Polyline,
    alpha: f64,
    measure: HolderMeasure<'_>,
    opts: &HolderOptions,
) -> Result<HolderReport> {
    let gamma = match &measure {
        HolderMeasure::Lebesgue { .. } => 0.0,
        HolderMeasure::Chaos(ens) => ens.gamma,
    };
    let nu = ScalingConstants::new(gamma)?.nu;
    if alpha * nu <= 1.0 {
        return Err(Error::HypothesisViolated(format!("alpha * nu = {} <= 1", alpha * nu)));
    }
    if opts.depth == 0 || opts.depth > 16 || !(opts.r >= 1.0) {
        return Err(Error::InvalidArgument("need 1 <= depth <= 16 and r >= 1".into()));
    }
    if path.start_time() > 0.0 || path.end_time() < 1.0 {
        return Err(Error::InvalidArgument("path horizon must cover [0, 1]".into()));
    }
    let spans: Vec<(f64, f64)> = (1..=opts.depth)
        .flat_map(|l| {
            let m = 1usize << l;
            (0..m).map(move |i| (i as f64 / m as f64, (i + 1) as f64 / m as f64))
        })
        .collect();
    let r = opts.r;
    let lr = |h: f64, values: &[i32]| -> f64 {
        (h * h * values.iter().map(|&w| (w.unsigned_abs() as f64).powf(r)).sum::<f64>()).powf(1.0 / r)
    };
    let intervals: Vec<HolderInterval> = match measure {
        HolderMeasure::Lebesgue { cells } => spans
            .par_iter()
            .map(|&(s, t)| {
                let piece = path.slice(s, t)?;
                let (grid, win) = adaptive_window(&piece, cells)?;
                let area = grid.h * grid.h * win.values.iter().map(|&w| w as f64).sum::<f64>();
                Ok(HolderInterval {
                    s,
                    t,
                    area_norm: area.abs(),
                    winding_norm: lr(grid.h, &win.values),
                })
            })
            .collect::<Result<_>>()?,
        HolderMeasure::Chaos(ens) => {
            let grid = *ens.sampler.grid();
            check_window(path, &grid)?;
            let windows = spans
                .par_iter()
                .map(|&(s, t)| Ok(closed_window(&grid, &path.slice(s, t)?)))
                .collect::<Result<Vec<_>>>()?;
            let areas: Vec<Vec<f64>> =
                ens.map(|_, g| windows.iter().map(|w| w.integrate(&grid, &g.masses)).collect());
            spans
                .iter()
                .enumerate()
                .map(|(k, &(s, t))| {
                    let m2 = areas.iter().map(|a| a[k] * a[k]).sum::<f64>() / areas.len() as f64;
                    Ok(HolderInterval {
                        s,
                        t,
                        area_norm: m2.sqrt(),
                        winding_norm: lr(grid.h, &windows[k].values),
                    })
                })
                .collect::<Result<_>>()?
        }
    };
    let fit_of = |f: &dyn Fn(&HolderInterval) -> f64| -> Result<LinearFit> {
        let (x, y): (Vec<f64>, Vec<f64>) = intervals
            .iter()
            .filter(|iv| f(iv) > 0.0)
            .map(|iv| ((iv.t - iv.s).ln(), f(iv).ln()))
            .unzip();
        linear_fit(&x, &y)
    };
    Ok(HolderReport {
        alpha,
        gamma,
        nu,
        bound: alpha * nu,
        r,
        winding_bound: 2.0 * alpha / r,
        fit: fit_of(&|iv| iv.area_norm)?,
        winding_fit: fit_of(&|iv| iv.winding_norm)?,
        intervals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::area::{area_process_adaptive, area_process_with, AreaMode, AreaOptions};
    use crate::curves::sample_brownian;
    use crate::grid::{GridSpec, Point2};

    fn unit_speed_arc(verts: usize) -> Polyline {
        let times: Vec<f64> = (0..=verts).map(|k| k as f64 / verts as f64).collect();
        let pts = times.iter().map(|&t| Point2::new(t.sin(), 1.0 - t.cos())).collect();
        Polyline::new(times, pts, false).unwrap()
    }

    #[test]
    fn beta0_cases() {
        assert!((beta0(0.5, 0.5).unwrap() - 0.355_393).abs() < 1e-5);
        let nu = 2.0 - 0.5 * 1.9 * 1.9;
        assert!((beta0(0.5, 1.9).unwrap() - (0.5 * nu - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn circle_arc_areas_and_beta() {
        let path = unit_speed_arc(1 << 12);
        let aps = area_process_adaptive(&path, 3, 4, 48).unwrap();
        for (i, j, a) in aps.pairs() {
            let d = (j - i) as f64 / 8.0;
            let exact = (d - d.sin()) / 2.0;
            assert!((a - exact).abs() < 3e-3 * exact, "{i} {j} {a} {exact}");
        }
        let betas: Vec<f64> = (0..=80).map(|k| k as f64 * 0.05).collect();
        let fit = regularity_fit(&[aps], &betas).unwrap();
        assert!((fit.beta_hat.unwrap() - 3.0).abs() <= 0.15, "{fit:?}");
    }

    #[test]
    fn shallow_depth_rejected() {
        let path = unit_speed_arc(64);
        let aps = area_process_adaptive(&path, 2, 4, 16).unwrap();
        assert!(matches!(regularity_fit(&[aps], &[1.0]), Err(Error::DepthTooSmall(2))));
    }

    #[test]
    fn holder_bound_for_circle() {
        let path = unit_speed_arc(1 << 12);
        let rep = holder_area_bound(&path, 1.0, HolderMeasure::Lebesgue { cells: 32 }, &HolderOptions {
            depth: 4,
            r: 1.5,
        })
        .unwrap();
        assert!(rep.fit.slope > 2.8 && rep.fit.slope >= rep.bound, "{}", rep.fit.slope);
        assert!(rep.winding_fit.slope >= rep.winding_bound - 0.1);
    }

    #[test]
    fn j_moments_on_lebesgue() {
        let path = sample_brownian(1 << 10, 3).unwrap();
        let (x_lo, x_hi, y_lo, y_hi) = path.bbox();
        let grid = GridSpec::covering(x_lo - 0.1, y_lo - 0.1, x_hi + 0.1, y_hi + 0.1, 1.0 / 128.0).unwrap();
        let gmc = GmcSample::lebesgue(grid);
        let rep = rectangle_j_moments(&[path.clone()], &[gmc.clone()], 3).unwrap();
        assert_eq!(rep.entries.len(), 9);
        // J_{1,1} is at most the bounding-box area.
        let j11 = rep.entries[0].second_moment.mean.sqrt();
        assert!(j11 <= (x_hi - x_lo) * (y_hi - y_lo) + 1e-12);
        let aps = area_process_with(&path, &gmc, 3, AreaMode::Full, &AreaOptions::default()).unwrap();
        assert!(regularity_fit(&[aps], &[0.5]).is_ok());
    }
}
