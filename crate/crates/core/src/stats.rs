//! Small statistics helpers: compensated sums, means, least squares, bootstrap.

use crate::error::{Error, Result};
use crate::rng::{derive_seed, stream, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Neumaier-compensated sum. Order dependent but deterministic.
pub fn neumaier_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut acc = NeumaierAcc::default();
    for v in values {
        acc.add(v);
    }
    acc.value()
}

#[derive(Debug, Default, Clone, Copy)]
pub struct NeumaierAcc {
    sum: f64,
    comp: f64,
}

impl NeumaierAcc {
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct MeanEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
}

impl MeanEstimate {
    pub fn from_samples(xs: &[f64]) -> Result<Self> {
        if xs.is_empty() {
            return Err(Error::EmptySamples);
        }
        let n = xs.len();
        let mean = neumaier_sum(xs.iter().copied()) / n as f64;
        let stderr = if n > 1 {
            let ss = neumaier_sum(xs.iter().map(|x| (x - mean) * (x - mean)));
            (ss / (n - 1) as f64 / n as f64).sqrt()
        } else {
            f64::NAN
        };
        Ok(Self { mean, stderr, n })
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    neumaier_sum(xs.iter().copied()) / xs.len() as f64
}

pub fn sample_variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    neumaier_sum(xs.iter().map(|x| (x - m) * (x - m))) / (xs.len() as f64 - 1.0)
}

/// Ordinary least squares `y = intercept + slope * x`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    pub r_squared: f64,
}

impl LinearFit {
    /// Two-sided 95% interval for the slope using the normal quantile.
    pub fn slope_ci95(&self) -> (f64, f64) {
        (self.slope - 1.96 * self.slope_stderr, self.slope + 1.96 * self.slope_stderr)
    }
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    if x.len() != y.len() {
        return Err(Error::InvalidArgument("x and y differ in length".into()));
    }
    if x.len() < 2 {
        return Err(Error::InsufficientEnsemble { got: x.len(), need: 2 });
    }
    let n = x.len() as f64;
    let mx = mean(x);
    let my = mean(y);
    let sxx = neumaier_sum(x.iter().map(|a| (a - mx) * (a - mx)));
    let sxy = neumaier_sum(x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)));
    let syy = neumaier_sum(y.iter().map(|b| (b - my) * (b - my)));
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("x values are all equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss = neumaier_sum(
        x.iter()
            .zip(y)
            .map(|(a, b)| (b - intercept - slope * a).powi(2)),
    );
    let slope_stderr = if x.len() > 2 {
        (rss / (n - 2.0) / sxx).sqrt()
    } else {
        f64::NAN
    };
    let r_squared = if syy > 0.0 { 1.0 - rss / syy } else { 1.0 };
    Ok(LinearFit {
        slope,
        intercept,
        slope_stderr,
        r_squared,
    })
}

/// Bootstrap standard error of `stat` over resamples of `0..n`.
pub fn bootstrap_stderr<F>(n: usize, resamples: usize, seed: u64, mut stat: F) -> f64
where
    F: FnMut(&[usize]) -> f64,
{
    let mut values = Vec::with_capacity(resamples);
    let mut idx = vec![0usize; n];
    for b in 0..resamples {
        let mut rng = stream(derive_seed(seed, Axis::Bootstrap, b as u64), 0);
        for slot in idx.iter_mut() {
            *slot = rng.random_range(0..n);
        }
        let v = stat(&idx);
        if v.is_finite() {
            values.push(v);
        }
    }
    if values.len() < 2 {
        return f64::NAN;
    }
    sample_variance(&values).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let xs = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(neumaier_sum(xs), 2.0);
    }

    #[test]
    fn mean_estimate_matches_hand_computation() {
        let m = MeanEstimate::from_samples(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(m.mean, 2.5);
        // variance 5/3, stderr sqrt(5/12)
        assert!((m.stderr - (5.0f64 / 12.0).sqrt()).abs() < 1e-15);
        assert!(MeanEstimate::from_samples(&[]).is_err());
    }

    #[test]
    fn exact_line_fits_exactly() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 - 3.0 * v).collect();
        let f = linear_fit(&x, &y).unwrap();
        assert!((f.slope + 3.0).abs() < 1e-14);
        assert!((f.intercept - 2.0).abs() < 1e-14);
        assert!(f.slope_stderr < 1e-12);
    }

    #[test]
    fn bootstrap_of_mean_is_close_to_analytic_stderr() {
        let xs: Vec<f64> = (0..200).map(|i| ((i * 37) % 101) as f64).collect();
        let analytic = MeanEstimate::from_samples(&xs).unwrap().stderr;
        let b = bootstrap_stderr(xs.len(), 400, 1, |idx| {
            idx.iter().map(|&i| xs[i]).sum::<f64>() / idx.len() as f64
        });
        assert!((b / analytic - 1.0).abs() < 0.2, "{b} vs {analytic}");
    }
}
