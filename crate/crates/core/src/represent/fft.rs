use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

/// Square 2-D FFT of a fixed side, row-major.
#[derive(Clone)]
pub(crate) struct Fft2 {
    side: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Fft2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Fft2").field("side", &self.side).finish()
    }
}

impl Fft2 {
    pub(crate) fn new(side: usize) -> Self {
        let mut planner = FftPlanner::new();
        Fft2 { side, forward: planner.plan_fft_forward(side), inverse: planner.plan_fft_inverse(side) }
    }

    fn run(&self, data: &mut [Complex<f64>], plan: &Arc<dyn Fft<f64>>) {
        let n = self.side;
        plan.process(data);
        transpose(data, n);
        plan.process(data);
        transpose(data, n);
    }

    pub(crate) fn forward(&self, data: &mut [Complex<f64>]) {
        self.run(data, &self.forward);
    }

    /// Inverse transform including the `1/N^2` normalization.
    pub(crate) fn inverse(&self, data: &mut [Complex<f64>]) {
        self.run(data, &self.inverse);
        let scale = 1.0 / (self.side * self.side) as f64;
        for v in data.iter_mut() {
            *v *= scale;
        }
    }

    pub(crate) fn forward_real(&self, values: &[f64]) -> Vec<Complex<f64>> {
        let mut data: Vec<Complex<f64>> = values.iter().map(|&v| Complex::new(v, 0.0)).collect();
        self.forward(&mut data);
        data
    }
}

fn transpose(data: &mut [Complex<f64>], n: usize) {
    for r in 0..n {
        for c in r + 1..n {
            data.swap(r * n + c, c * n + r);
        }
    }
}
