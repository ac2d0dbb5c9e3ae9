//! Two-dimensional complex FFT on row-major buffers.

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

pub(crate) struct Fft2 {
    mx: usize,
    my: usize,
    row: Arc<dyn Fft<f64>>,
    col: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    pub(crate) fn new(mx: usize, my: usize, inverse: bool) -> Self {
        let mut planner = FftPlanner::new();
        let (row, col) = if inverse {
            (planner.plan_fft_inverse(mx), planner.plan_fft_inverse(my))
        } else {
            (planner.plan_fft_forward(mx), planner.plan_fft_forward(my))
        };
        Self { mx, my, row, col }
    }

    /// Unnormalized transform of an `my x mx` row-major buffer, in place.
    pub(crate) fn process(&self, data: &mut [Complex64]) {
        let (mx, my) = (self.mx, self.my);
        debug_assert_eq!(data.len(), mx * my);
        data.par_chunks_mut(mx).for_each(|r| self.row.process(r));
        let mut t = vec![Complex64::new(0.0, 0.0); mx * my];
        transpose(data, &mut t, mx, my);
        t.par_chunks_mut(my).for_each(|c| self.col.process(c));
        transpose(&t, data, my, mx);
    }
}

/// `src` is `rows x cols` (row-major, `cols` contiguous); `dst` becomes `cols x rows`.
fn transpose(src: &[Complex64], dst: &mut [Complex64], cols: usize, rows: usize) {
    dst.par_chunks_mut(rows).enumerate().for_each(|(c, out)| {
        for (r, v) in out.iter_mut().enumerate() {
            *v = src[r * cols + c];
        }
    });
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_naive_dft() {
        let (mx, my) = (6, 4);
        let data: Vec<Complex64> = (0..mx * my)
            .map(|k| Complex64::new((k as f64 * 0.37).sin(), (k as f64 * 0.11).cos()))
            .collect();
        let mut fast = data.clone();
        Fft2::new(mx, my, false).process(&mut fast);
        for ky in 0..my {
            for kx in 0..mx {
                let mut acc = Complex64::new(0.0, 0.0);
                for y in 0..my {
                    for x in 0..mx {
                        let ph = -2.0 * std::f64::consts::PI
                            * ((kx * x) as f64 / mx as f64 + (ky * y) as f64 / my as f64);
                        acc += data[y * mx + x] * Complex64::from_polar(1.0, ph);
                    }
                }
                assert!((acc - fast[ky * mx + kx]).norm() < 1e-12);
            }
        }
    }
}
