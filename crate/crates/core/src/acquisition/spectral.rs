//! Periodic FFT helpers shared by noise synthesis and smoothing.

use std::sync::Arc;

use rustfft::{Fft, FftPlanner};

use crate::grid::C64;

/// Forward and inverse transforms over a periodic box `shape[0] × … × shape[d-1]`, row-major.
pub(crate) struct PeriodicFft {
    shape: Vec<usize>,
    forward: Vec<Arc<dyn Fft<f64>>>,
    inverse: Vec<Arc<dyn Fft<f64>>>,
}

impl PeriodicFft {
    pub(crate) fn new(shape: &[usize]) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            shape: shape.to_vec(),
            forward: shape.iter().map(|&m| planner.plan_fft_forward(m)).collect(),
            inverse: shape.iter().map(|&m| planner.plan_fft_inverse(m)).collect(),
        }
    }

    pub(crate) fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub(crate) fn len(&self) -> usize {
        self.shape.iter().product()
    }

    /// Unnormalized forward transform.
    pub(crate) fn forward(&self, data: &mut [C64]) {
        self.run(data, &self.forward);
    }

    /// Inverse transform including the `1/N` factor.
    pub(crate) fn inverse(&self, data: &mut [C64]) {
        self.run(data, &self.inverse);
        let scale = 1.0 / self.len() as f64;
        data.iter_mut().for_each(|v| *v *= scale);
    }

    fn run(&self, data: &mut [C64], plans: &[Arc<dyn Fft<f64>>]) {
        assert_eq!(data.len(), self.len());
        let total = self.len();
        for (axis, plan) in plans.iter().enumerate() {
            let m = self.shape[axis];
            let stride: usize = self.shape[axis + 1..].iter().product();
            if stride == 1 {
                plan.process(data);
                continue;
            }
            // gather every line along `axis` into a contiguous batch
            let lines = total / m;
            let mut batch = vec![C64::new(0.0, 0.0); total];
            let mut line = 0;
            for outer in 0..total / (m * stride) {
                for inner in 0..stride {
                    let base = outer * m * stride + inner;
                    for i in 0..m {
                        batch[line * m + i] = data[base + i * stride];
                    }
                    line += 1;
                }
            }
            debug_assert_eq!(line, lines);
            plan.process(&mut batch);
            line = 0;
            for outer in 0..total / (m * stride) {
                for inner in 0..stride {
                    let base = outer * m * stride + inner;
                    for i in 0..m {
                        data[base + i * stride] = batch[line * m + i];
                    }
                    line += 1;
                }
            }
        }
    }
}

/// Signed periodic offset of index `i` on a circle of length `m`.
pub(crate) fn wrapped_offset(i: usize, m: usize) -> f64 {
    if i <= m / 2 {
        i as f64
    } else {
        i as f64 - m as f64
    }
}

/// Sizes with only small prime factors keep rustfft on its fast paths.
pub(crate) fn fast_size(min: usize) -> usize {
    let mut m = min.max(2);
    loop {
        let mut r = m;
        for p in [2, 3, 5] {
            while r % p == 0 {
                r /= p;
            }
        }
        if r == 1 {
            return m;
        }
        m += 1;
    }
}
