//! Time-parametrized planar polylines: Brownian paths, the circle chain,
//! slicing and subdivision into chord-closed pieces.

use crate::error::{Error, Result};
use crate::grid::Point2;
use crate::rng::{derive_seed, stream, Axis};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::{Read, Write};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polyline {
    pub times: Vec<f64>,
    pub points: Vec<Point2>,
    /// Whether the segment from the last vertex back to the first is part of the curve.
    pub closed: bool,
}

impl Polyline {
    pub fn new(times: Vec<f64>, points: Vec<Point2>, closed: bool) -> Result<Self> {
        if times.len() != points.len() {
            return Err(Error::InvalidArgument("times and points differ in length".into()));
        }
        if points.len() < 2 {
            return Err(Error::InvalidArgument("a polyline needs at least 2 vertices".into()));
        }
        if times.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidArgument("times must be strictly increasing".into()));
        }
        if points.iter().any(|p| !(p.x.is_finite() && p.y.is_finite())) {
            return Err(Error::InvalidArgument("vertices must be finite".into()));
        }
        Ok(Self { times, points, closed })
    }

    /// Vertices at uniform times on `[0, 1]`.
    pub fn from_points(points: Vec<Point2>, closed: bool) -> Result<Self> {
        let n = points.len();
        let denom = (n.max(2) - 1) as f64;
        let times = (0..n).map(|k| k as f64 / denom).collect();
        Self::new(times, points, closed)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn start_time(&self) -> f64 {
        self.times[0]
    }

    pub fn end_time(&self) -> f64 {
        *self.times.last().expect("nonempty")
    }

    /// The chord-closed curve.
    pub fn closure(&self) -> Polyline {
        Polyline {
            closed: true,
            ..self.clone()
        }
    }

    /// Same curve traversed backwards; time `t` maps to `t0 + t1 - t`.
    pub fn reversed(&self) -> Polyline {
        let (t0, t1) = (self.start_time(), self.end_time());
        Polyline {
            times: self.times.iter().rev().map(|t| t0 + t1 - t).collect(),
            points: self.points.iter().rev().copied().collect(),
            closed: self.closed,
        }
    }

    pub fn translated(&self, d: Point2) -> Polyline {
        Polyline {
            times: self.times.clone(),
            points: self.points.iter().map(|&p| p + d).collect(),
            closed: self.closed,
        }
    }

    /// Segments in traversal order, including the closing chord when closed.
    pub fn segments(&self) -> impl Iterator<Item = (Point2, Point2)> + '_ {
        let n = self.points.len();
        let closing = (self.closed && n > 1).then(|| (self.points[n - 1], self.points[0]));
        self.points.windows(2).map(|w| (w[0], w[1])).chain(closing)
    }

    pub fn length(&self) -> f64 {
        self.segments().map(|(a, b)| a.dist(b)).sum()
    }

    /// Shoelace signed area of the chord-closed curve.
    pub fn signed_area(&self) -> f64 {
        let n = self.points.len();
        let mut acc = 0.0;
        for k in 0..n {
            let (a, b) = (self.points[k], self.points[(k + 1) % n]);
            acc += a.cross(b);
        }
        0.5 * acc
    }

    /// `(x_min, x_max, y_min, y_max)`.
    pub fn bbox(&self) -> (f64, f64, f64, f64) {
        self.points.iter().fold(
            (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY),
            |(a, b, c, d), p| (a.min(p.x), b.max(p.x), c.min(p.y), d.max(p.y)),
        )
    }

    /// Position at time `t`, linear between vertices.
    pub fn eval(&self, t: f64) -> Point2 {
        let k = self.times.partition_point(|&x| x <= t);
        if k == 0 {
            return self.points[0];
        }
        if k == self.times.len() {
            return *self.points.last().expect("nonempty");
        }
        let (ta, tb) = (self.times[k - 1], self.times[k]);
        if t == ta {
            return self.points[k - 1];
        }
        let (a, b) = (self.points[k - 1], self.points[k]);
        a + ((t - ta) / (tb - ta)) * (b - a)
    }

    /// Open restriction to `[s, t]`, interpolating at the endpoints. When
    /// `s == t` the result is the degenerate two-vertex curve at `X_s`.
    pub fn slice(&self, s: f64, t: f64) -> Result<Polyline> {
        let (t0, t1) = (self.start_time(), self.end_time());
        if !(t0 <= s && s <= t && t <= t1) {
            return Err(Error::InvalidArgument(format!(
                "slice [{s}, {t}] outside horizon [{t0}, {t1}]"
            )));
        }
        let zs = self.eval(s);
        if s == t {
            let dt = f64::EPSILON * s.abs().max(1.0);
            return Ok(Polyline {
                times: vec![s, s + dt],
                points: vec![zs, zs],
                closed: false,
            });
        }
        let lo = self.times.partition_point(|&x| x <= s);
        let hi = self.times.partition_point(|&x| x < t);
        let mut times = vec![s];
        let mut points = vec![zs];
        for k in lo..hi {
            times.push(self.times[k]);
            points.push(self.points[k]);
        }
        times.push(t);
        points.push(self.eval(t));
        Ok(Polyline {
            times,
            points,
            closed: false,
        })
    }

    /// CSV with header `t,x,y`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,x,y")?;
        for (t, p) in self.times.iter().zip(&self.points) {
            writeln!(w, "{t:e},{:e},{:e}", p.x, p.y)?;
        }
        Ok(())
    }

    /// `b"PLY1"`, vertex count (u64), closed flag (u8), then `(t, x, y)` as f64, all little endian.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(b"PLY1")?;
        w.write_all(&(self.len() as u64).to_le_bytes())?;
        w.write_all(&[self.closed as u8])?;
        for (t, p) in self.times.iter().zip(&self.points) {
            for v in [*t, p.x, p.y] {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Polyline> {
        let mut head = [0u8; 13];
        r.read_exact(&mut head)?;
        if &head[..4] != b"PLY1" {
            return Err(Error::Format("not a polyline".into()));
        }
        let n = u64::from_le_bytes(head[4..12].try_into().expect("8 bytes")) as usize;
        let closed = head[12] != 0;
        let mut buf = vec![0u8; n * 24];
        r.read_exact(&mut buf)?;
        let f = |k: usize| f64::from_le_bytes(buf[8 * k..8 * k + 8].try_into().expect("8 bytes"));
        let times = (0..n).map(|k| f(3 * k)).collect();
        let points = (0..n).map(|k| Point2::new(f(3 * k + 1), f(3 * k + 2))).collect();
        Polyline::new(times, points, closed)
    }
}

/// Curve families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CurveSpec {
    Brownian {
        n_steps: usize,
        #[serde(default = "unit_horizon")]
        horizon: (f64, f64),
    },
    CircleChain {
        alpha: f64,
        m: usize,
        verts_per_circle: usize,
        /// When set, time is spread so the curve is Hölder with this exponent.
        #[serde(default)]
        holder: Option<f64>,
    },
    CustomPolyline {
        points: Vec<(f64, f64)>,
    },
}

fn unit_horizon() -> (f64, f64) {
    (0.0, 1.0)
}

impl CurveSpec {
    /// Path number `index` of the family; deterministic in `(seed, index)`.
    pub fn build(&self, seed: u64, index: u64) -> Result<Polyline> {
        match self {
            CurveSpec::Brownian { n_steps, horizon } => {
                sample_brownian_on(*n_steps, horizon.0, horizon.1, derive_seed(seed, Axis::Path, index))
            }
            CurveSpec::CircleChain {
                alpha,
                m,
                verts_per_circle,
                holder: None,
            } => circle_chain(*alpha, *m, *verts_per_circle),
            CurveSpec::CircleChain {
                alpha,
                m,
                verts_per_circle,
                holder: Some(beta),
            } => circle_chain_holder(*alpha, *m, *verts_per_circle, *beta),
            CurveSpec::CustomPolyline { points } => {
                Polyline::from_points(points.iter().map(|&(x, y)| Point2::new(x, y)).collect(), false)
            }
        }
    }

    pub fn is_brownian(&self) -> bool {
        matches!(self, CurveSpec::Brownian { .. })
    }
}

/// Planar Brownian motion on `[0, 1]` sampled at `n_steps + 1` uniform times.
pub fn sample_brownian(n_steps: usize, seed: u64) -> Result<Polyline> {
    sample_brownian_on(n_steps, 0.0, 1.0, seed)
}

pub fn sample_brownian_on(n_steps: usize, t0: f64, t1: f64, seed: u64) -> Result<Polyline> {
    if n_steps == 0 {
        return Err(Error::InvalidArgument("n_steps must be at least 1".into()));
    }
    if !(t0 < t1) {
        return Err(Error::InvalidArgument("empty horizon".into()));
    }
    let dt = (t1 - t0) / n_steps as f64;
    let sd = dt.sqrt();
    let mut rng = stream(seed, 0);
    let mut times = Vec::with_capacity(n_steps + 1);
    let mut points = Vec::with_capacity(n_steps + 1);
    let mut p = Point2::new(0.0, 0.0);
    times.push(t0);
    points.push(p);
    for k in 1..=n_steps {
        let dx: f64 = rng.sample(StandardNormal);
        let dy: f64 = rng.sample(StandardNormal);
        p = Point2::new(p.x + sd * dx, p.y + sd * dy);
        times.push(if k == n_steps { t1 } else { t0 + k as f64 * dt });
        points.push(p);
    }
    Polyline::new(times, points, false)
}

/// Vertices per circle so that the chord sagitta of the unit circle stays below `h / 2`.
pub fn circle_vertices_for(h: f64) -> usize {
    let v = (PI / (1.0 - h / 2.0).acos()).ceil() as usize;
    v.max(16)
}

/// Closed curve running once, counterclockwise, around each circle with
/// center `(0, k^-alpha)` and radius `k^-alpha`, `k = 1..=m`. All circles
/// touch the origin, where the curve passes from one to the next.
pub fn circle_chain(alpha: f64, m: usize, verts_per_circle: usize) -> Result<Polyline> {
    if !(alpha > 0.5) {
        return Err(Error::InvalidArgument("alpha must exceed 1/2".into()));
    }
    if m == 0 || verts_per_circle < 3 {
        return Err(Error::InvalidArgument("need m >= 1 and at least 3 vertices per circle".into()));
    }
    let mut points = Vec::with_capacity(m * verts_per_circle + 1);
    for k in 1..=m {
        let r = (k as f64).powf(-alpha);
        for j in 0..verts_per_circle {
            let phi = 2.0 * PI * j as f64 / verts_per_circle as f64;
            points.push(if j == 0 {
                Point2::new(0.0, 0.0)
            } else {
                Point2::new(r * phi.sin(), r - r * phi.cos())
            });
        }
    }
    points.push(Point2::new(0.0, 0.0));
    Polyline::from_points(points, true)
}

/// The circle chain reparametrized so circle `k` takes time proportional to
/// `r_k^(1/beta)`. Each circle then has Hölder-`beta` constant of order one,
/// which bounds the whole curve when `beta < alpha`.
pub fn circle_chain_holder(alpha: f64, m: usize, verts_per_circle: usize, beta: f64) -> Result<Polyline> {
    if !(beta > 0.0 && beta < alpha && beta <= 1.0) {
        return Err(Error::InvalidArgument("holder exponent must lie in (0, min(alpha, 1)]".into()));
    }
    let base = circle_chain(alpha, m, verts_per_circle)?;
    let durations: Vec<f64> = (1..=m).map(|k| (k as f64).powf(-alpha / beta)).collect();
    let total: f64 = durations.iter().sum();
    let mut times = Vec::with_capacity(base.len());
    let mut start = 0.0;
    for d in &durations {
        let d = d / total;
        for j in 0..verts_per_circle {
            times.push(start + d * j as f64 / verts_per_circle as f64);
        }
        start += d;
    }
    times.push(1.0);
    Polyline::new(times, base.points, true)
}

/// Exact area of `{theta = N}` for the circle chain, `N < m`.
pub fn circle_chain_level_area(alpha: f64, n: usize) -> f64 {
    let n = n as f64;
    PI * (n.powf(-2.0 * alpha) - (n + 1.0).powf(-2.0 * alpha))
}

/// The `T` pieces of a path and the polygon through their endpoints.
#[derive(Debug, Clone)]
pub struct Subdivision {
    /// Open pieces; close them with [`Polyline::closure`].
    pub pieces: Vec<Polyline>,
    /// Closed polygon `X_{t_0}, X_{t_1}, ..., X_{t_T}`.
    pub closing: Polyline,
}

impl Subdivision {
    pub fn closed_pieces(&self) -> Vec<Polyline> {
        self.pieces.iter().map(Polyline::closure).collect()
    }
}

/// Splits the path at `T` equal time steps. With `interpolate` the split
/// points are evaluated exactly; otherwise they snap to vertices, which
/// requires at least `T + 1` vertices.
pub fn subdivide(path: &Polyline, t_pieces: usize, interpolate: bool) -> Result<Subdivision> {
    if t_pieces == 0 {
        return Err(Error::InvalidArgument("T must be at least 1".into()));
    }
    let (t0, t1) = (path.start_time(), path.end_time());
    let mut pieces = Vec::with_capacity(t_pieces);
    if interpolate {
        let at = |i: usize| {
            if i == t_pieces {
                t1
            } else {
                t0 + (t1 - t0) * i as f64 / t_pieces as f64
            }
        };
        for i in 0..t_pieces {
            pieces.push(path.slice(at(i), at(i + 1))?);
        }
    } else {
        let n = path.len();
        if t_pieces > n - 1 {
            return Err(Error::TooManyPieces {
                pieces: t_pieces,
                vertices: n,
            });
        }
        let idx = |i: usize| (i * (n - 1) + t_pieces / 2) / t_pieces;
        for i in 0..t_pieces {
            let (a, b) = (idx(i), idx(i + 1));
            pieces.push(Polyline {
                times: path.times[a..=b].to_vec(),
                points: path.points[a..=b].to_vec(),
                closed: false,
            });
        }
    }
    let mut corners: Vec<Point2> = pieces.iter().map(|p| p.points[0]).collect();
    corners.push(*pieces.last().expect("T >= 1").points.last().expect("nonempty"));
    let closing = Polyline {
        times: (0..corners.len()).map(|k| k as f64).collect(),
        points: corners,
        closed: true,
    };
    Ok(Subdivision { pieces, closing })
}

/// `max |z_t - z_s| / (t - s)^alpha` over vertex pairs.
pub fn holder_seminorm(path: &Polyline, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidArgument("alpha must lie in (0, 1]".into()));
    }
    let n = path.len();
    Ok((0..n)
        .into_par_iter()
        .map(|a| {
            let (ta, za) = (path.times[a], path.points[a]);
            let mut best = 0.0f64;
            for b in a + 1..n {
                let d = za.dist(path.points[b]);
                best = best.max(d / (path.times[b] - ta).powf(alpha));
            }
            best
        })
        .reduce(|| 0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn brownian_single_step_and_determinism() {
        let p = sample_brownian(1, 4).unwrap();
        assert_eq!(p.len(), 2);
        assert_eq!(p.points[0], Point2::new(0.0, 0.0));
        assert_eq!(p, sample_brownian(1, 4).unwrap());
        assert!(sample_brownian(0, 4).is_err());
    }

    #[test]
    fn brownian_endpoint_variance() {
        let n = 4000;
        let xs: Vec<Point2> = (0..n)
            .map(|s| *sample_brownian(4, s as u64).unwrap().points.last().unwrap())
            .collect();
        for coord in [|p: &Point2| p.x, |p: &Point2| p.y] {
            let v: Vec<f64> = xs.iter().map(|p| coord(p) * coord(p)).collect();
            let m = crate::stats::MeanEstimate::from_samples(&v).unwrap();
            assert!((m.mean - 1.0).abs() < 4.0 * m.stderr, "{m:?}");
        }
    }

    #[test]
    fn circle_chain_shape() {
        let c = circle_chain(1.0, 3, 32).unwrap();
        assert!(c.closed);
        assert_eq!(c.len(), 3 * 32 + 1);
        let expected = PI * (1.0 + 0.25 + 1.0 / 9.0);
        let ratio = c.signed_area() / expected;
        assert!(ratio > 0.98 && ratio < 1.0, "{ratio}");
        assert!((circle_chain_level_area(1.0, 3) - 0.15271).abs() < 1e-5);
        assert!(circle_chain(0.5, 3, 32).is_err());
    }

    #[test]
    fn slice_interpolates_endpoints() {
        let p = Polyline::from_points(
            vec![Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), Point2::new(1.0, 2.0)],
            false,
        )
        .unwrap();
        let s = p.slice(0.25, 0.75).unwrap();
        assert_eq!(s.points, vec![Point2::new(0.5, 0.0), Point2::new(1.0, 0.0), Point2::new(1.0, 1.0)]);
        assert!(p.slice(0.5, 1.5).is_err());
        let d = p.slice(0.5, 0.5).unwrap();
        assert_eq!(d.points[0], d.points[1]);
    }

    #[test]
    fn holder_of_line_is_speed() {
        let p = Polyline::from_points((0..20).map(|k| Point2::new(3.0 * k as f64 / 19.0, 0.0)).collect(), false)
            .unwrap();
        assert!((holder_seminorm(&p, 1.0).unwrap() - 3.0).abs() < 1e-12);
        let c = Polyline::from_points(vec![Point2::new(1.0, 1.0); 5], false).unwrap();
        assert_eq!(holder_seminorm(&c, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn binary_round_trip() {
        let p = sample_brownian(17, 3).unwrap();
        let mut buf = Vec::new();
        p.write_binary(&mut buf).unwrap();
        assert_eq!(Polyline::read_binary(&buf[..]).unwrap(), p);
    }

    #[test]
    fn subdivide_endpoints() {
        let p = sample_brownian(64, 1).unwrap();
        let sd = subdivide(&p, 4, true).unwrap();
        for (i, piece) in sd.pieces.iter().enumerate() {
            assert_eq!(piece.points[0], p.eval(i as f64 / 4.0));
            assert_eq!(*piece.points.last().unwrap(), p.eval((i + 1) as f64 / 4.0));
        }
        assert_eq!(sd.closing.len(), 5);
        assert!(matches!(subdivide(&p, 100, false), Err(Error::TooManyPieces { .. })));
        let one = subdivide(&p, 1, false).unwrap();
        assert_eq!(one.pieces[0].points, p.points);
    }

    proptest! {
        #[test]
        fn subdivide_is_a_partition(n in 2usize..200, t in 1usize..12, seed in 0u64..1000) {
            prop_assume!(t < n);
            let p = sample_brownian(n, seed).unwrap();
            let sd = subdivide(&p, t, false).unwrap();
            let mut pts = sd.pieces[0].points.clone();
            for piece in &sd.pieces[1..] {
                prop_assert_eq!(piece.points[0], *pts.last().unwrap());
                pts.extend_from_slice(&piece.points[1..]);
            }
            prop_assert_eq!(pts, p.points);
        }
    }
}
