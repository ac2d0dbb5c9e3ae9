//! Mixed norms `‖Z‖_{p,q} = ‖ ‖Z‖_{L^q(measure)} ‖_{L^p(path)}` from nested ensembles.

use crate::error::{Error, Result};
use crate::stats::bootstrap_stderr;
use serde::{Deserialize, Serialize};

/// Estimate of `E^M[|Z|^q]` for one outer sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InnerMoment {
    pub value: f64,
    pub variance_of_mean: f64,
}

impl InnerMoment {
    pub fn from_samples(zs: &[f64], q: f64) -> Result<Self> {
        if zs.is_empty() {
            return Err(Error::EmptySamples);
        }
        let pw: Vec<f64> = zs.iter().map(|z| z.abs().powf(q)).collect();
        let n = pw.len() as f64;
        let value = pw.iter().sum::<f64>() / n;
        let variance_of_mean = if pw.len() > 1 {
            pw.iter().map(|v| (v - value).powi(2)).sum::<f64>() / (n - 1.0) / n
        } else {
            0.0
        };
        Ok(Self {
            value,
            variance_of_mean,
        })
    }

    pub fn exact(value: f64) -> Self {
        Self {
            value,
            variance_of_mean: 0.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NormEstimate {
    pub p: f64,
    pub q: f64,
    pub inner: Vec<f64>,
    pub value: f64,
    pub stderr: f64,
    pub ci95: (f64, f64),
}

/// Outer contribution `m^{p/q}`, less the second-order bias from the
/// inner estimate's own noise when `p != q`.
fn outer_term(m: InnerMoment, r: f64) -> f64 {
    let g = m.value.powf(r);
    if r == 1.0 || m.value <= 0.0 {
        return g;
    }
    let bias = 0.5 * r * (r - 1.0) * m.value.powf(r - 2.0) * m.variance_of_mean;
    (g - bias).max(0.0)
}

/// Bias-corrected outer terms whose mean, raised to `1/p`, is the norm.
pub(crate) fn outer_terms(inner: &[InnerMoment], p: f64, q: f64) -> Result<Vec<f64>> {
    if inner.is_empty() {
        return Err(Error::EmptySamples);
    }
    if !(p >= 1.0 && q >= 1.0) {
        return Err(Error::InvalidArgument("p and q must be at least 1".into()));
    }
    if inner.iter().any(|m| !(m.value >= 0.0)) {
        return Err(Error::InvalidArgument("inner moments must be nonnegative".into()));
    }
    Ok(inner.iter().map(|&m| outer_term(m, p / q)).collect())
}

pub(crate) fn norm_of_terms(terms: &[f64], idx: &[usize], p: f64) -> f64 {
    (idx.iter().map(|&k| terms[k]).sum::<f64>() / idx.len() as f64).powf(1.0 / p)
}

pub fn norm_pq(inner: &[InnerMoment], p: f64, q: f64, seed: u64) -> Result<NormEstimate> {
    let terms = outer_terms(inner, p, q)?;
    let of = |idx: &[usize]| norm_of_terms(&terms, idx, p);
    let all: Vec<usize> = (0..terms.len()).collect();
    let value = of(&all);
    let stderr = if terms.len() > 1 {
        bootstrap_stderr(terms.len(), 200, seed, of)
    } else {
        0.0
    };
    Ok(NormEstimate {
        p,
        q,
        inner: inner.iter().map(|m| m.value).collect(),
        value,
        stderr,
        ci95: (value - 1.96 * stderr, value + 1.96 * stderr),
    })
}

pub fn norm_p2(inner: &[InnerMoment], p: f64, seed: u64) -> Result<NormEstimate> {
    norm_pq(inner, p, 2.0, seed)
}
