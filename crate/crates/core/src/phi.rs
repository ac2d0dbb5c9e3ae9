//! Folding the thin rectangle `[0, 2^n] × [0, 2^-n]` into a bounded square.
//!
//! Each unit block becomes an integral-sign shape: a straight column with a
//! quarter annulus of radii `w` to `2w` at each end, `w = 2^-n`. Consecutive
//! blocks alternate up and down, so the hooks pair into U-turns and the
//! blocks form a serpentine about 3 units wide and 1 unit tall. Hook points
//! are stretched along the arc by `radius / w ∈ [1, 2]` and not at all across
//! it, so the map is 2-Lipschitz with Jacobian in `[1, 2]`.

use crate::error::{Error, Result};
use crate::grid::Point2;
use crate::rng::{derive_seed, stream, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;

/// Lower-left corner of the first block's edge point.
const ORIGIN: Point2 = Point2 { x: 1.0, y: 1.0 };

#[derive(Debug, Clone, Copy)]
pub struct PhiMap {
    n: u32,
    w: f64,
    /// Straight part of each column; the literal fold needs `π w < 1`, so for
    /// `n = 1` the map is a plain translation.
    straight: Option<f64>,
}

fn rot(v: Point2, theta: f64) -> Point2 {
    let (s, c) = theta.sin_cos();
    Point2::new(c * v.x - s * v.y, s * v.x + c * v.y)
}

fn left_normal(d: Point2) -> Point2 {
    Point2::new(-d.y, d.x)
}

/// Point of a quarter turn starting at edge point `p` with heading `d`, at
/// arclength `s` along the edge parameter and offset `y`. Returns the point
/// and the Jacobian `radius / w`.
fn hook(p: Point2, d: Point2, left: bool, w: f64, s: f64, y: f64) -> (Point2, f64) {
    let n = left_normal(d);
    let theta = s / w;
    if left {
        let c = p + (2.0 * w) * n;
        let r = 2.0 * w - y;
        (c + r * rot(-1.0 * n, theta), r / w)
    } else {
        let c = p + (-w) * n;
        let r = w + y;
        (c + r * rot(n, -theta), r / w)
    }
}

impl PhiMap {
    pub fn new(n: u32) -> Result<Self> {
        if !(1..=30).contains(&n) {
            return Err(Error::InvalidArgument(format!("n = {n} must lie in 1..=30")));
        }
        let w = (-(n as f64)).exp2();
        let l = 1.0 - std::f64::consts::PI * w;
        Ok(Self {
            n,
            w,
            straight: (l > 0.0).then_some(l),
        })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    /// `(2^n, 2^-n)`.
    pub fn domain(&self) -> (f64, f64) {
        ((self.n as f64).exp2(), self.w)
    }

    /// Image point and absolute Jacobian determinant at `(x, y)`.
    pub fn eval_with_jacobian(&self, x: f64, y: f64) -> (Point2, f64) {
        let (len, w) = self.domain();
        let x = x.clamp(0.0, len);
        let y = y.clamp(0.0, w);
        let Some(l) = self.straight else {
            return (ORIGIN + Point2::new(x, y), 1.0);
        };
        let blocks = len as usize;
        let b = (x.floor() as usize).min(blocks - 1);
        let s = x - b as f64;
        let up = b % 2 == 0;
        let mut p = ORIGIN + Point2::new(3.0 * w * b as f64, if up { 0.0 } else { l + 3.0 * w });
        let east = Point2::new(1.0, 0.0);
        let quarter = FRAC_PI_2 * w;
        // Start hook turns east into the column; end hook turns back east.
        if s < quarter {
            return hook(p, east, up, w, s, y);
        }
        p = hook(p, east, up, w, quarter, 0.0).0;
        let d = Point2::new(0.0, if up { 1.0 } else { -1.0 });
        if s < quarter + l {
            return (p + (s - quarter) * d + y * left_normal(d), 1.0);
        }
        p = p + l * d;
        hook(p, d, !up, w, (s - quarter - l).min(quarter), y)
    }

    pub fn eval(&self, x: f64, y: f64) -> Point2 {
        self.eval_with_jacobian(x, y).0
    }

    pub fn jacobian(&self, x: f64, y: f64) -> f64 {
        self.eval_with_jacobian(x, y).1
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhiReport {
    pub n: u32,
    pub pairs: usize,
    pub max_lipschitz_ratio: f64,
    pub min_jacobian: f64,
    /// Image points within `1e-8` of each other whose preimages are more than `1e-3` apart.
    pub injectivity_violations: usize,
    /// `(x_min, x_max, y_min, y_max)` of the sampled image.
    pub image_bbox: (f64, f64, f64, f64),
}

impl PhiReport {
    pub fn passes(&self) -> bool {
        self.max_lipschitz_ratio <= 10.0 * (1.0 + 1e-6)
            && self.min_jacobian >= 0.1 - 1e-9
            && self.injectivity_violations == 0
            && self.image_bbox.0 >= 0.0
            && self.image_bbox.1 <= 10.0
            && self.image_bbox.2 >= 0.0
            && self.image_bbox.3 <= 10.0
    }
}

/// Samples `pairs` point pairs (half uniform, half at distance below
/// `1e-3`) and checks the Lipschitz ratio, the Jacobian and injectivity.
pub fn check_phi_map(n: u32, pairs: usize, seed: u64) -> Result<PhiReport> {
    let phi = PhiMap::new(n)?;
    let (len, w) = phi.domain();
    let mut rng = stream(derive_seed(seed, Axis::Sampling, n as u64), 0);
    let mut samples: Vec<(Point2, Point2)> = Vec::with_capacity(2 * pairs);
    let mut max_ratio = 0.0f64;
    let mut min_jac = f64::INFINITY;
    for k in 0..pairs {
        let p = Point2::new(rng.random::<f64>() * len, rng.random::<f64>() * w);
        let q = if k % 2 == 0 {
            Point2::new(rng.random::<f64>() * len, rng.random::<f64>() * w)
        } else {
            let r = 1e-3 * rng.random::<f64>();
            let a = std::f64::consts::TAU * rng.random::<f64>();
            Point2::new((p.x + r * a.cos()).clamp(0.0, len), (p.y + r * a.sin()).clamp(0.0, w))
        };
        let (fp, jp) = phi.eval_with_jacobian(p.x, p.y);
        let (fq, jq) = phi.eval_with_jacobian(q.x, q.y);
        let d = p.dist(q);
        if d > 0.0 {
            max_ratio = max_ratio.max(fp.dist(fq) / d);
        }
        min_jac = min_jac.min(jp).min(jq);
        samples.push((p, fp));
        samples.push((q, fq));
    }
    samples.sort_by(|a, b| a.1.x.total_cmp(&b.1.x));
    let mut violations = 0;
    for a in 0..samples.len() {
        for b in a + 1..samples.len() {
            if samples[b].1.x - samples[a].1.x > 1e-8 {
                break;
            }
            if samples[a].1.dist(samples[b].1) <= 1e-8 && samples[a].0.dist(samples[b].0) > 1e-3 {
                violations += 1;
            }
        }
    }
    let image_bbox = samples.iter().fold(
        (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY),
        |(a, b, c, d), (_, f)| (a.min(f.x), b.max(f.x), c.min(f.y), d.max(f.y)),
    );
    Ok(PhiReport {
        n,
        pairs,
        max_lipschitz_ratio: max_ratio,
        min_jacobian: min_jac,
        injectivity_violations: violations,
        image_bbox,
    })
}
