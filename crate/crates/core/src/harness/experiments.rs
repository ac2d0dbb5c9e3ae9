use super::config::{Experiment, ExperimentConfig};
use super::report::{Check, ClippingEntry, Estimate, Table};
use crate::area::{
    area_process, area_process_adaptive, area_process_with, beta0, chen_defect, cutoff_integral, holder_area_bound,
    levelsum_partial, path_window, proxy_comparison, rectangle_j_moments, regularity_fit, stabilization_cutoff,
    tail_decay, AreaMode, AreaOptions, HolderMeasure, HolderOptions, PathEnsemble,
};
use crate::curves::{circle_chain_level_area, holder_seminorm, CurveSpec, Polyline};
use crate::error::{Error, Result};
use crate::field::{CovarianceKernel, FieldSampler};
use crate::gmc::{
    check_gamma, gmc_from_field, kahane_compare, rectangle_moment_check, scaling_check, second_moment_oracle,
    GmcEnsemble, GmcSample,
};
use crate::grid::{rectangle_mask, GridSpec, Point2};
use crate::phi::check_phi_map;
use crate::rng::{derive_seed, stream, Axis};
use crate::stats::{linear_fit, MeanEstimate};
use crate::winding::{inclusion_check, pointwise_chen_check, winding_field, winding_histogram, werner_statistic, InclusionParams};
use rand::Rng;
use rayon::prelude::*;
use serde_json::json;
use std::f64::consts::TAU;
use std::sync::Arc;

/// Everything an experiment produces apart from the bookkeeping fields.
#[derive(Default)]
pub(crate) struct Output {
    pub estimates: Vec<Estimate>,
    pub checks: Vec<Check>,
    pub results: serde_json::Map<String, serde_json::Value>,
    pub tables: Vec<Table>,
    pub clipping: Vec<ClippingEntry>,
    pub warnings: Vec<String>,
}

impl Output {
    fn result(&mut self, key: impl Into<String>, value: impl serde::Serialize) {
        self.results.insert(key.into(), serde_json::to_value(value).expect("serializable"));
    }

    fn clip(&mut self, label: impl Into<String>, fraction: f64) {
        self.clipping.push(ClippingEntry {
            label: label.into(),
            fraction,
        });
    }
}

pub(crate) fn dispatch(cfg: &ExperimentConfig) -> Result<Output> {
    match cfg.experiment {
        Experiment::MassIntensity => mass_intensity(cfg),
        Experiment::SecondMoment => second_moment(cfg),
        Experiment::Scaling => scaling(cfg),
        Experiment::Werner => werner(cfg),
        Experiment::TailDecay => tail(cfg),
        Experiment::ProxyComparison => proxy(cfg),
        Experiment::Chen => chen(cfg),
        Experiment::Regularity => regularity(cfg),
        Experiment::HolderBound => holder(cfg),
        Experiment::PhiMap => phi_map(cfg),
        Experiment::RectangleMoments => rectangle_moments(cfg),
        Experiment::Kahane => kahane(cfg),
    }
}

fn curve(cfg: &ExperimentConfig) -> CurveSpec {
    cfg.curve.clone().unwrap_or(CurveSpec::Brownian {
        n_steps: 1 << 12,
        horizon: (0.0, 1.0),
    })
}

fn brownian_steps(cfg: &ExperimentConfig) -> usize {
    match curve(cfg) {
        CurveSpec::Brownian { n_steps, .. } => n_steps,
        _ => unreachable!("validated"),
    }
}

/// One chaos sample on `grid`, or Lebesgue measure at `gamma = 0`.
fn single_gmc(kernel: &CovarianceKernel, grid: &GridSpec, gamma: f64, seed: u64) -> Result<GmcSample> {
    if gamma == 0.0 {
        return Ok(GmcSample::lebesgue(*grid));
    }
    let sampler = FieldSampler::auto(kernel, grid)?;
    gmc_from_field(&sampler.sample(seed, 0), gamma)
}

fn tag(gamma: f64) -> String {
    format!("gamma={gamma}")
}

fn mass_intensity(cfg: &ExperimentConfig) -> Result<Output> {
    let mut out = Output::default();
    let grid = cfg.grid_spec()?;
    let sampler = Arc::new(FieldSampler::auto(&cfg.kernel()?, &grid)?);
    out.clip("grid", sampler.clipped_fraction());
    for &g in &cfg.gammas {
        check_gamma(g)?;
    }
    // One field per sample serves every gamma.
    let ens = GmcEnsemble::new(sampler, cfg.gammas[0], derive_seed(cfg.seed, Axis::Gmc, 0), cfg.measures)?;
    let gammas = &cfg.gammas;
    let per: Vec<Vec<f64>> = ens.map_fields(|_, f| {
        gammas
            .iter()
            .map(|&g| gmc_from_field(f, g).expect("gamma checked").total_mass())
            .collect()
    });
    let area = grid.cells() as f64 * grid.cell_area();
    let mut table = Table::new("mass", &["gamma", "mean", "stderr", "n", "area"]);
    for (k, &g) in cfg.gammas.iter().enumerate() {
        let xs: Vec<f64> = per.iter().map(|v| v[k]).collect();
        let est = MeanEstimate::from_samples(&xs)?;
        out.estimates.push(Estimate::new(format!("mass[{}]", tag(g)), est.mean, est.stderr, est.n));
        let dev = (est.mean - area).abs();
        out.checks.push(Check::new(
            format!("unit-intensity[{}]", tag(g)),
            dev <= 3.0 * est.stderr,
            format!("|{:.6} - {area}| = {dev:.3e} vs 3 se = {:.3e}", est.mean, 3.0 * est.stderr),
        ));
        table.push(vec![g, est.mean, est.stderr, est.n as f64, area]);
    }
    out.tables.push(table);
    Ok(out)
}

fn second_moment(cfg: &ExperimentConfig) -> Result<Output> {
    let mut out = Output::default();
    let grid = cfg.grid_spec()?;
    let kernel = cfg.kernel()?;
    let (xl, xh, yl, yh) = cfg.params.square;
    let q = rectangle_mask(xl, xh, yl, yh, &grid);
    if q.is_empty() {
        return Err(Error::InvalidArgument("the test square holds no cell centers".into()));
    }
    let fine_grid = GridSpec::covering(xl, yl, xh, yh, 0.5 * grid.h)?;
    let fine_q = rectangle_mask(xl, xh, yl, yh, &fine_grid);
    let sampler = Arc::new(FieldSampler::auto(&kernel, &grid)?);
    out.clip("grid", sampler.clipped_fraction());
    let mut table = Table::new("second_moment", &["gamma", "monte_carlo", "stderr", "oracle_h", "oracle_h2"]);
    for (gi, &g) in cfg.gammas.iter().enumerate() {
        let o1 = second_moment_oracle(&kernel, g, &q, &q)?;
        let o2 = second_moment_oracle(&kernel, g, &fine_q, &fine_q)?;
        let ens = GmcEnsemble::new(sampler.clone(), g, derive_seed(cfg.seed, Axis::Gmc, gi as u64), cfg.measures)?;
        let xs: Vec<f64> = ens.map(|_, s| crate::gmc::measure_of(s, &q).expect("same grid").powi(2));
        let est = MeanEstimate::from_samples(&xs)?;
        let rel = (est.mean - o1).abs() / o1;
        let refine = (o1 - o2).abs() / o2;
        out.estimates.push(Estimate::new(format!("second-moment[{}]", tag(g)), est.mean, est.stderr, est.n));
        out.estimates.push(Estimate::new(format!("oracle[{}]", tag(g)), o1, 0.0, 1));
        out.checks.push(Check::new(
            format!("oracle-match[{}]", tag(g)),
            rel <= 0.10,
            format!("Monte Carlo {:.6e} ± {:.2e} vs oracle {o1:.6e}: relative {rel:.4}", est.mean, est.stderr),
        ));
        out.checks.push(Check::new(
            format!("oracle-refinement[{}]", tag(g)),
            refine <= 0.02,
            format!("oracle at h {o1:.6e}, at h/2 {o2:.6e}: relative {refine:.4}"),
        ));
        table.push(vec![g, est.mean, est.stderr, o1, o2]);
    }
    out.tables.push(table);
    Ok(out)
}

fn scaling(cfg: &ExperimentConfig) -> Result<Output> {
    let mut out = Output::default();
    let kernel = cfg.kernel()?;
    let mut table = Table::new("scaling", &["gamma", "r", "second_moment", "stderr"]);
    for (gi, &g) in cfg.gammas.iter().enumerate() {
        let rep = scaling_check(
            &kernel,
            g,
            cfg.params.side,
            &cfg.params.ratios,
            cfg.grid.nx,
            cfg.measures,
            derive_seed(cfg.seed, Axis::Sampling, gi as u64),
        )?;
        for e in &rep.entries {
            table.push(vec![g, e.r, e.second_moment.mean, e.second_moment.stderr]);
        }
        let s = rep.fit.slope;
        out.estimates.push(Estimate::new(format!("slope[{}]", tag(g)), s, rep.fit.slope_stderr, cfg.measures));
        out.checks.push(Check::new(
            format!("scaling-slope[{}]", tag(g)),
            (s - rep.expected_slope).abs() <= 0.2,
            format!("slope {s:.4} vs 2 nu = {:.4}", rep.expected_slope),
        ));
        out.result(tag(g), &rep);
    }
    out.tables.push(table);
    Ok(out)
}

fn werner(cfg: &ExperimentConfig) -> Result<Output> {
    let mut out = Output::default();
    let spec = curve(cfg);
    let h = cfg.grid.h;
    let brownian = spec.is_brownian();
    let count = if brownian { cfg.paths } else { 1 };
    let hists = (0..count)
        .into_par_iter()
        .map(|k| {
            let path = spec.build(cfg.seed, k as u64)?.closure();
            let grid = path_window(&path, h, cfg.seed, k as u64)?;
            winding_histogram(&path, &grid, 0.0)
        })
        .collect::<Result<Vec<_>>>()?;
    let max_winding = hists
        .iter()
        .flat_map(|hh| hh.counts.keys().map(|w| w.abs()))
        .max()
        .unwrap_or(0);
    out.result("max_winding", max_winding);
    let mut table = Table::new("levels", &["n", "tail", "tail_stderr", "level", "level_stderr", "target"]);
    for &n in &cfg.levels {
        let rep = werner_statistic(&hists, n as i32, brownian)?;
        table.push(vec![n as f64, rep.tail.mean, rep.tail.stderr, rep.level.mean, rep.level.stderr, rep.target]);
        out.estimates.push(Estimate::new(format!("tail[n={n}]"), rep.tail.mean, rep.tail.stderr, rep.tail.n));
        out.estimates.push(Estimate::new(format!("level[n={n}]"), rep.level.mean, rep.level.stderr, rep.level.n));
        if brownian {
            out.checks.push(Check::new(
                format!("werner[n={n}]"),
                rep.tail_rel_error <= 0.2,
                format!("n|D_n| = {:.5} ± {:.5} vs 1/(2 pi) = {:.5}", rep.tail.mean, rep.tail.stderr, rep.target),
            ));
        }
        for w in rep.warnings {
            if !out.warnings.contains(&w) {
                out.warnings.push(w);
            }
        }
    }
    out.tables.push(table);
    let mut hist_table = Table::new("histogram", &["winding", "mean_area"]);
    let mut values: Vec<i32> = hists.iter().flat_map(|hh| hh.counts.keys().copied()).collect();
    values.sort_unstable();
    values.dedup();
    for w in values {
        let a: f64 = hists.iter().map(|hh| hh.area_eq(w)).sum::<f64>() / hists.len() as f64;
        hist_table.push(vec![w as f64, a]);
    }
    out.tables.push(hist_table);
    if let CurveSpec::CircleChain { alpha, m, .. } = spec {
        circle_geometry(&mut out, &hists[0], alpha, m, h, &cfg.levels)?;
    }
    Ok(out)
}

/// Level areas of the circle chain against the nested-disk formula, and the
/// level-area exponent fitted against `n + 1/2` for `n >= 2`.
fn circle_geometry(
    out: &mut Output,
    hist: &crate::winding::WindingHistogram,
    alpha: f64,
    m: usize,
    h: f64,
    levels: &[u32],
) -> Result<()> {
    let mut table = Table::new("circle_levels", &["n", "raster", "exact", "tolerance"]);
    let (mut xs, mut ys, mut ye) = (Vec::new(), Vec::new(), Vec::new());
    let mut ok = true;
    for &n in levels.iter().filter(|&&n| (n as usize) < m) {
        let exact = circle_chain_level_area(alpha, n as usize);
        let got = hist.area_eq(n as i32);
        let r = |k: f64| k.powf(-alpha);
        let tol = 2.0 * h * TAU * (r(n as f64) + r(n as f64 + 1.0));
        ok &= (got - exact).abs() <= tol;
        table.push(vec![n as f64, got, exact, tol]);
        if n >= 2 && got > 0.0 {
            xs.push((n as f64 + 0.5).ln());
            ys.push(got.ln());
            ye.push(exact.ln());
        }
    }
    out.checks.push(Check::new(
        "circle-level-areas",
        ok && !table.rows.is_empty(),
        format!("{} levels within 2 h x perimeter", table.rows.len()),
    ));
    out.tables.push(table);
    let target = -2.0 * alpha - 1.0;
    match (linear_fit(&xs, &ys), linear_fit(&xs, &ye)) {
        (Ok(fit), Ok(exact_fit)) => {
            out.estimates.push(Estimate::new("circle-exponent", fit.slope, fit.slope_stderr, xs.len()));
            out.checks.push(Check::new(
                "circle-exponent",
                (fit.slope - target).abs() <= 0.1,
                format!(
                    "fitted {:.4} (formula {:.4}) vs -2 alpha - 1 = {target:.4}",
                    fit.slope, exact_fit.slope
                ),
            ));
            out.result("circle_exponent", json!({"raster": fit, "formula": exact_fit, "target": target}));
        }
        _ => out.checks.push(Check::new("circle-exponent", false, "fewer than two levels with 2 <= n < m")),
    }
    Ok(())
}

fn check_regime(out: &mut Output, gamma: f64) {
    if gamma >= (4.0f64 / 3.0).sqrt() {
        out.warnings.push(format!(
            "gamma = {gamma} is outside the proven regime gamma < sqrt(4/3); results are exploratory"
        ));
    }
}

fn tail(cfg: &ExperimentConfig) -> Result<Output> {
    let mut out = Output::default();
    let kernel = cfg.kernel()?;
    let p = cfg.p[0];
    let mut table = Table::new("tail", &["gamma", "n", "norm", "stderr", "control", "control_stderr"]);
    for &g in &cfg.gammas {
        if g >= 2f64.sqrt() {
            return Err(Error::HypothesisViolated(format!("tail decay needs gamma < sqrt(2), got {g}")));
        }
        check_regime(&mut out, g);
        let ens = PathEnsemble {
            n_steps: brownian_steps(cfg),
            paths: cfg.paths,
            measures: cfg.measures,
            gamma: g,
            h: cfg.grid.h,
            seed: cfg.seed,
        };
        let rep = tail_decay(&ens, &kernel, &cfg.levels, p)?;
        for (k, &n) in rep.levels.iter().enumerate() {
            let (c, u) = (&rep.compensated[k], &rep.control[k]);
            table.push(vec![g, n as f64, c.value, c.stderr, u.value, u.stderr]);
            out.estimates.push(Estimate::new(format!("compensated[{}][n={n}]", tag(g)), c.value, c.stderr, cfg.paths));
            out.estimates.push(Estimate::new(format!("control[{}][n={n}]", tag(g)), u.value, u.stderr, cfg.paths));
        }
        let (s, cs) = (&rep.slope, &rep.control_slope);
        out.estimates.push(Estimate::new(format!("slope[{}]", tag(g)), s.fit.slope, s.stderr, cfg.paths));
        out.estimates.push(Estimate::new(format!("control-slope[{}]", tag(g)), cs.fit.slope, cs.stderr, cfg.paths));
        out.checks.push(Check::new(
            format!("compensated-slope[{}]", tag(g)),
            s.ci95.0 <= -1.0,
            format!(
                "slope {:.3}, 95% CI [{:.3}, {:.3}], max winding {}",
                s.fit.slope, s.ci95.0, s.ci95.1, rep.max_winding
            ),
        ));
        out.checks.push(Check::new(
            format!("control-slope[{}]", tag(g)),
            (cs.fit.slope + 1.0).abs() <= 0.2,
            format!("control slope {:.3} vs -1 ± 0.2", cs.fit.slope),
        ));
        out.result(tag(g), &rep);
    }
    out.tables.push(table);
    Ok(out)
}

fn proxy(cfg: &ExperimentConfig) -> Result<Output> {
    let mut out = Output::default();
    let kernel = cfg.kernel()?;
    let p = cfg.p[0];
    let mut table = Table::new("proxy", &["gamma", "n", "pieces", "norm", "stderr", "r_rms"]);
    for &g in &cfg.gammas {
        check_regime(&mut out, g);
        let ens = PathEnsemble {
            n_steps: brownian_steps(cfg),
            paths: cfg.paths,
            measures: cfg.measures,
            gamma: g,
            h: cfg.grid.h,
            seed: cfg.seed,
        };
        let rep = proxy_comparison(&ens, &kernel, &cfg.levels, cfg.params.t, cfg.params.eps, p)?;
        for (k, &n) in rep.levels.iter().enumerate() {
            let nm = &rep.norms[k];
            table.push(vec![g, n as f64, rep.pieces[k] as f64, nm.value, nm.stderr, rep.r_rms[k]]);
            out.estimates.push(Estimate::new(format!("proxy-norm[{}][n={n}]", tag(g)), nm.value, nm.stderr, cfg.paths));
        }
        let worst = rep.frequencies.iter().filter(|f| f.exceeds).count();
        out.checks.push(Check::new(
            format!("distance-frequencies[{}]", tag(g)),
            worst == 0,
            format!("{worst} of {} pairs exceed T^(2 eps) / (2 (j - i - 1)) + 3 se", rep.frequencies.len()),
        ));
        match &rep.slope {
            Some(s) => {
                out.estimates.push(Estimate::new(format!("proxy-slope[{}]", tag(g)), s.fit.slope, s.stderr, cfg.paths));
                out.checks.push(Check::new(
                    format!("proxy-slope[{}]", tag(g)),
                    s.ci95.1 < 0.0,
                    format!("slope {:.3}, 95% CI [{:.3}, {:.3}]", s.fit.slope, s.ci95.0, s.ci95.1),
                ));
            }
            None => out.checks.push(Check::new(
                format!("proxy-slope[{}]", tag(g)),
                false,
                "fewer than two levels with T >= 2",
            )),
        }
        out.result(tag(g), &rep);
    }
    out.tables.push(table);
    Ok(out)
}

/// Random valid `(T, N, M1, M2, k)`.
fn inclusion_params<R: Rng>(rng: &mut R) -> InclusionParams {
    let t = rng.random_range(1..=4usize);
    let k = rng.random_range(1..=3i64);
    let m2 = rng.random_range(0..=2i64);
    let m1 = rng.random_range(0..=3i64);
    let ti = t as i64;
    let n = (k * ti * (m2 + 1)).max(k * m1 + (m2 + 1) * ti + 1) + rng.random_range(0..3i64);
    InclusionParams { t_pieces: t, n, m1, m2, k }
}

/// Spirals and random polygons that wind many times and self-intersect.
fn adversarial_curve<R: Rng>(rng: &mut R, kind: usize) -> Result<Polyline> {
    let pts: Vec<Point2> = if kind == 0 {
        let turns = rng.random_range(3..8) as f64;
        let c = Point2::new(rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1));
        let n = 600;
        (0..=n)
            .map(|j| {
                let s = j as f64 / n as f64;
                let th = TAU * turns * s;
                let r = 0.05 + 0.9 * s * (1.0 + 0.1 * (7.0 * th).sin());
                c + r * Point2::new(th.cos(), th.sin())
            })
            .collect()
    } else {
        let n = rng.random_range(5..40);
        (0..n)
            .map(|_| Point2::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect()
    };
    Polyline::from_points(pts, false)
}

#[derive(serde::Serialize)]
struct ChenInstance {
    k: usize,
    cutoff: u32,
    sbp_defect: f64,
    sbp_bound: f64,
    pointwise_defect: i64,
    area_defect: f64,
    area_bound: f64,
    inclusion: InclusionParams,
    inclusion_violations: usize,
    inclusion_cells: usize,
}

/// Exact identities on random instances: summation by parts, pointwise and
/// area-level Chen relations, and the deterministic inclusions.
fn chen(cfg: &ExperimentConfig) -> Result<Output> {
    let mut out = Output::default();
    let spec = curve(cfg);
    let kernel = cfg.kernel()?;
    let gamma = cfg.gammas[0];
    check_gamma(gamma)?;
    let h = cfg.grid.h;
    let rows = (0..cfg.params.instances)
        .into_par_iter()
        .map(|k| -> Result<ChenInstance> {
            let ku = k as u64;
            let mut rng = stream(derive_seed(cfg.seed, Axis::Sampling, ku), 0);
            let path = spec.build(cfg.seed, ku)?;
            let grid = path_window(&path, h, cfg.seed, ku)?;
            let gmc = single_gmc(&kernel, &grid, gamma, derive_seed(cfg.seed, Axis::Gmc, ku))?;

            let wf = winding_field(&path.closure(), &grid)?;
            let cutoff = rng.random_range(0..=stabilization_cutoff(&wf) + 1);
            let a = cutoff_integral(&wf, &gmc, cutoff)?;
            let b = levelsum_partial(&wf, &gmc, cutoff)?;

            let (t0, t1) = (path.start_time(), path.end_time());
            let mut stu = [0.0; 3].map(|_| t0 + (t1 - t0) * rng.random::<f64>());
            stu.sort_by(f64::total_cmp);
            let pc = pointwise_chen_check(&path, stu[0], stu[1], stu[2], &grid)?;

            let aps = area_process(&path, &gmc, cfg.depth, AreaMode::Full)?;
            let cd = chen_defect(&aps, &gmc, &path)?;

            let params = inclusion_params(&mut rng);
            let inc_path = match k % 3 {
                0 => path.clone(),
                kind => adversarial_curve(&mut rng, kind - 1)?,
            };
            let inc_grid = path_window(&inc_path, h, cfg.seed, ku)?;
            let inc = inclusion_check(&inc_path, params, &inc_grid)?;
            Ok(ChenInstance {
                k,
                cutoff,
                sbp_defect: (a - b.value).abs(),
                sbp_bound: 2f64.powi(-40) * b.abs_terms,
                pointwise_defect: pc.max_defect,
                area_defect: cd.max_defect,
                area_bound: 2f64.powi(-38) * cd.total_mass,
                inclusion: params,
                inclusion_violations: inc.violations(),
                inclusion_cells: inc.d_n_cells,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let n = rows.len();
    let sbp_ok = rows.iter().all(|r| r.sbp_defect <= r.sbp_bound);
    let pc_max = rows.iter().map(|r| r.pointwise_defect).max().unwrap_or(0);
    let area_ok = rows.iter().all(|r| r.area_defect <= r.area_bound);
    let area_max = rows.iter().map(|r| r.area_defect).fold(0.0, f64::max);
    let viol: usize = rows.iter().map(|r| r.inclusion_violations).sum();
    out.estimates.push(Estimate::new(
        "summation-by-parts-max-defect",
        rows.iter().map(|r| r.sbp_defect).fold(0.0, f64::max),
        0.0,
        n,
    ));
    out.estimates.push(Estimate::new("pointwise-chen-max-defect", pc_max as f64, 0.0, n));
    out.estimates.push(Estimate::new("area-chen-max-defect", area_max, 0.0, n));
    out.estimates.push(Estimate::new("inclusion-violations", viol as f64, 0.0, n));
    out.checks.push(Check::new(
        "summation-by-parts",
        sbp_ok,
        format!("{n} instances within 2^-40 of the absolute terms"),
    ));
    out.checks.push(Check::new(
        "pointwise-chen",
        pc_max == 0,
        format!("max integer defect {pc_max} over {n} instances"),
    ));
    out.checks.push(Check::new(
        "area-chen",
        area_ok,
        format!("max defect {area_max:.3e} over {n} instances at depth {}", cfg.depth),
    ));
    out.checks.push(Check::new("inclusions", viol == 0, format!("{viol} violating cells over {n} instances")));
    let mut table = Table::new(
        "instances",
        &[
            "k",
            "cutoff",
            "sbp_defect",
            "sbp_bound",
            "pointwise_defect",
            "area_defect",
            "area_bound",
            "t_pieces",
            "n",
            "m1",
            "m2",
            "k_param",
            "inclusion_violations",
        ],
    );
    for r in &rows {
        let p = r.inclusion;
        table.push(vec![
            r.k as f64,
            r.cutoff as f64,
            r.sbp_defect,
            r.sbp_bound,
            r.pointwise_defect as f64,
            r.area_defect,
            r.area_bound,
            p.t_pieces as f64,
            p.n as f64,
            p.m1 as f64,
            p.m2 as f64,
            p.k as f64,
            r.inclusion_violations as f64,
        ]);
    }
    out.tables.push(table);
    out.result("instances", &rows);
    Ok(out)
}

fn regularity(cfg: &ExperimentConfig) -> Result<Output> {
    let mut out = Output::default();
    let spec = curve(cfg);
    let kernel = cfg.kernel()?;
    let brownian = spec.is_brownian();
    let mut table = Table::new("beta", &["gamma", "scale", "mean_sup"]);
    for &g in &cfg.gammas {
        check_gamma(g)?;
        let lebesgue = !brownian && (g == 0.0 || cfg.params.lebesgue_cells.is_some());
        let (samples, j) = if lebesgue {
            let path = spec.build(cfg.seed, 0)?;
            let cells = cfg.params.lebesgue_cells.unwrap_or(48);
            (vec![area_process_adaptive(&path, cfg.depth, cfg.params.max_span, cells)?], None)
        } else {
            let count = if brownian { cfg.paths } else { cfg.measures };
            let per = (0..count)
                .into_par_iter()
                .map(|k| -> Result<_> {
                    let ku = k as u64;
                    let path = spec.build(cfg.seed, if brownian { ku } else { 0 })?;
                    let grid = path_window(&path, cfg.grid.h, cfg.seed, ku)?;
                    let gmc = single_gmc(&kernel, &grid, g, derive_seed(cfg.seed, Axis::Gmc, ku))?;
                    let opts = AreaOptions {
                        max_span: Some(cfg.params.max_span),
                        path_id: ku,
                        gmc_id: ku,
                        ..AreaOptions::default()
                    };
                    let aps = area_process_with(&path, &gmc, cfg.depth, AreaMode::Full, &opts)?;
                    Ok((aps, path, gmc))
                })
                .collect::<Result<Vec<_>>>()?;
            let mut samples = Vec::with_capacity(per.len());
            let mut paths = Vec::with_capacity(per.len());
            let mut gmcs = Vec::with_capacity(per.len());
            for (a, p, m) in per {
                samples.push(a);
                paths.push(p);
                gmcs.push(m);
            }
            (samples, Some(rectangle_j_moments(&paths, &gmcs, cfg.depth)?))
        };
        let fit = regularity_fit(&samples, &cfg.params.betas)?;
        for (s, m) in fit.scales.iter().zip(&fit.mean_sup) {
            table.push(vec![g, *s, *m]);
        }
        let beta_hat = fit.beta_hat.unwrap_or(f64::NAN);
        out.estimates.push(Estimate::new(format!("beta-hat[{}]", tag(g)), beta_hat, f64::NAN, samples.len()));
        out.estimates.push(Estimate::new(format!("base-slope[{}]", tag(g)), fit.base_slope, f64::NAN, samples.len()));
        if brownian {
            let g2 = g * g;
            let target = (0.5 - g2 / 4.0).min(1.0 + g2 / 4.0 - 2f64.sqrt() * g) - 0.15;
            out.checks.push(Check::new(
                format!("beta-hat[{}]", tag(g)),
                beta_hat >= target,
                format!("beta hat {beta_hat:.3} (base slope {:.3}) vs {target:.4}", fit.base_slope),
            ));
        }
        if let Some(j) = &j {
            let b0 = beta0(cfg.params.alpha, g)?;
            let bound = -2.0 * b0 + 0.2;
            out.estimates.push(Estimate::new(
                format!("j-diagonal-slope[{}]", tag(g)),
                j.diagonal.slope,
                j.diagonal.slope_stderr,
                samples.len(),
            ));
            out.checks.push(Check::new(
                format!("j-diagonal[{}]", tag(g)),
                j.diagonal.slope <= bound,
                format!("log2 E[J_nn^2] slope {:.3} vs -2 beta0 + 0.2 = {bound:.4}", j.diagonal.slope),
            ));
        }
        out.result(tag(g), json!({"fit": fit, "j": j}));
    }
    out.tables.push(table);
    Ok(out)
}

fn holder(cfg: &ExperimentConfig) -> Result<Output> {
    let mut out = Output::default();
    let path = curve(cfg).build(cfg.seed, 0)?;
    let alpha = cfg.params.alpha;
    let seminorm = holder_seminorm(&path, alpha)?;
    out.result("holder_seminorm", seminorm);
    let opts = HolderOptions {
        depth: cfg.depth,
        r: cfg.params.r,
    };
    let grid = cfg.grid_spec()?;
    let kernel = cfg.kernel()?;
    let mut table = Table::new("holder", &["gamma", "s", "t", "area_norm", "winding_norm"]);
    for (gi, &g) in cfg.gammas.iter().enumerate() {
        let rep = if g == 0.0 {
            let cells = cfg.params.lebesgue_cells.unwrap_or(32);
            holder_area_bound(&path, alpha, HolderMeasure::Lebesgue { cells }, &opts)?
        } else {
            let sampler = Arc::new(FieldSampler::auto(&kernel, &grid)?);
            out.clip(tag(g), sampler.clipped_fraction());
            let ens = GmcEnsemble::new(sampler, g, derive_seed(cfg.seed, Axis::Gmc, gi as u64), cfg.measures)?;
            holder_area_bound(&path, alpha, HolderMeasure::Chaos(&ens), &opts)?
        };
        for iv in &rep.intervals {
            table.push(vec![g, iv.s, iv.t, iv.area_norm, iv.winding_norm]);
        }
        let target = rep.bound - 0.25;
        out.estimates.push(Estimate::new(format!("area-slope[{}]", tag(g)), rep.fit.slope, rep.fit.slope_stderr, rep.intervals.len()));
        out.estimates.push(Estimate::new(
            format!("winding-slope[{}]", tag(g)),
            rep.winding_fit.slope,
            rep.winding_fit.slope_stderr,
            rep.intervals.len(),
        ));
        out.checks.push(Check::new(
            format!("area-slope[{}]", tag(g)),
            rep.fit.slope >= target,
            format!("slope {:.4} vs alpha nu - 0.25 = {target:.4}", rep.fit.slope),
        ));
        let wt = rep.winding_bound - 0.1;
        out.checks.push(Check::new(
            format!("winding-slope[{}]", tag(g)),
            rep.winding_fit.slope >= wt,
            format!("L^{} slope {:.4} vs 2 alpha / r - 0.1 = {wt:.4}", rep.r, rep.winding_fit.slope),
        ));
        out.result(tag(g), &rep);
    }
    out.tables.push(table);
    Ok(out)
}

fn phi_map(cfg: &ExperimentConfig) -> Result<Output> {
    let mut out = Output::default();
    let mut table = Table::new("phi", &["n", "max_lipschitz_ratio", "min_jacobian", "injectivity_violations"]);
    let reports = cfg
        .params
        .phi_n
        .par_iter()
        .map(|&n| check_phi_map(n, cfg.params.phi_pairs, cfg.seed))
        .collect::<Result<Vec<_>>>()?;
    for rep in &reports {
        let n = rep.n;
        table.push(vec![
            n as f64,
            rep.max_lipschitz_ratio,
            rep.min_jacobian,
            rep.injectivity_violations as f64,
        ]);
        out.estimates.push(Estimate::new(format!("lipschitz[n={n}]"), rep.max_lipschitz_ratio, 0.0, rep.pairs));
        out.estimates.push(Estimate::new(format!("min-jacobian[n={n}]"), rep.min_jacobian, 0.0, rep.pairs));
        out.checks.push(Check::new(
            format!("phi[n={n}]"),
            rep.passes(),
            format!(
                "Lipschitz {:.4}, Jacobian >= {:.4}, {} injectivity violations, image {:?}",
                rep.max_lipschitz_ratio, rep.min_jacobian, rep.injectivity_violations, rep.image_bbox
            ),
        ));
    }
    out.tables.push(table);
    out.result("reports", &reports);
    Ok(out)
}

fn rectangle_moments(cfg: &ExperimentConfig) -> Result<Output> {
    let mut out = Output::default();
    let kernel = cfg.kernel()?;
    let mut table = Table::new("rectangles", &["gamma", "aspect", "width", "height", "moment", "stderr", "ratio"]);
    for (gi, &g) in cfg.gammas.iter().enumerate() {
        let rep = rectangle_moment_check(
            &kernel,
            g,
            cfg.q,
            cfg.params.area,
            &cfg.params.aspects,
            cfg.grid.h,
            cfg.measures,
            derive_seed(cfg.seed, Axis::Sampling, gi as u64),
        )?;
        for e in &rep.entries {
            table.push(vec![g, e.aspect, e.width, e.height, e.moment.mean, e.moment.stderr, e.ratio]);
            out.clip(format!("{}[aspect={}]", tag(g), e.aspect), e.clipped_fraction);
            out.estimates.push(Estimate::new(
                format!("ratio[{}][aspect={}]", tag(g), e.aspect),
                e.ratio,
                e.moment.stderr * e.ratio / e.moment.mean,
                e.moment.n,
            ));
        }
        out.checks.push(Check::new(
            format!("aspect-uniformity[{}]", tag(g)),
            rep.max_over_min <= 4.0,
            format!("max/min of E[M(R)^q] / |R|^zeta = {:.4}", rep.max_over_min),
        ));
        out.result(tag(g), &rep);
    }
    out.tables.push(table);
    Ok(out)
}

fn kahane(cfg: &ExperimentConfig) -> Result<Output> {
    let mut out = Output::default();
    let grid = cfg.grid_spec()?;
    let ka = cfg.kernel()?;
    let kb = cfg.params.kernel_b.as_ref().unwrap_or(&cfg.kernel).build(cfg.eps_reg)?;
    let (xl, xh, yl, yh) = cfg.params.square;
    let mask = rectangle_mask(xl, xh, yl, yh, &grid);
    let sa = Arc::new(FieldSampler::auto(&ka, &grid)?);
    let sb = Arc::new(FieldSampler::auto(&kb, &grid)?);
    out.clip("kernel_a", sa.clipped_fraction());
    out.clip("kernel_b", sb.clipped_fraction());
    let mut table = Table::new("kahane", &["gamma", "lhs", "lhs_stderr", "rhs", "rhs_stderr"]);
    for (gi, &g) in cfg.gammas.iter().enumerate() {
        let rep = kahane_compare(
            sa.clone(),
            sb.clone(),
            cfg.params.shift_c,
            g,
            &mask,
            cfg.q,
            cfg.measures,
            derive_seed(cfg.seed, Axis::Sampling, gi as u64),
        )?;
        table.push(vec![g, rep.lhs.mean, rep.lhs.stderr, rep.rhs.mean, rep.rhs.stderr]);
        out.estimates.push(Estimate::new(format!("difference[{}]", tag(g)), rep.difference, rep.difference_stderr, cfg.measures));
        out.checks.push(Check::new(
            format!("kahane[{}]", tag(g)),
            rep.difference <= 3.0 * rep.difference_stderr,
            format!("E F(M_A) - E F(shifted M_B) = {:.4e} vs 3 se = {:.4e}", rep.difference, 3.0 * rep.difference_stderr),
        ));
        out.result(tag(g), &rep);
    }
    out.tables.push(table);
    Ok(out)
}
