#![allow(dead_code)]

use decompound::NormalMixture;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

/// Periodic one-dimensional grid `x_j = j h` for `j < n/2`, `(j − n) h` otherwise.
pub struct Periodic {
    pub h: f64,
    pub n: usize,
}

impl Periodic {
    pub fn new(half_width: f64, n: usize) -> Self {
        Self {
            h: 2.0 * half_width / n as f64,
            n,
        }
    }

    pub fn x(&self, j: usize) -> f64 {
        let j = j as i64;
        let n = self.n as i64;
        (if j < n / 2 { j } else { j - n }) as f64 * self.h
    }

    /// Transforms samples of `jumps`, applies `f` to the discrete
    /// characteristic function and transforms back to a density.
    fn spectral(&self, jumps: &NormalMixture, f: impl Fn(Complex<f64>) -> Complex<f64>) -> Vec<f64> {
        let mut buf: Vec<Complex<f64>> = (0..self.n)
            .map(|j| Complex::new(jumps.density(&[self.x(j)]).unwrap() * self.h, 0.0))
            .collect();
        let mut planner = FftPlanner::new();
        planner.plan_fft_forward(self.n).process(&mut buf);
        for c in buf.iter_mut() {
            *c = f(*c);
        }
        planner.plan_fft_inverse(self.n).process(&mut buf);
        buf.iter().map(|c| c.re / (self.n as f64 * self.h)).collect()
    }

    /// Continuous part of the compound Poisson increment law with Poisson
    /// rate `rate`: inverse transform of `exp(rate (φ − 1)) − e^{−rate}`.
    pub fn increment_continuous(&self, jumps: &NormalMixture, rate: f64) -> Vec<f64> {
        let atom = (-rate).exp();
        self.spectral(jumps, |c| (rate * (c - 1.0)).exp() - atom)
    }

    /// Density of the sum of `k` independent jumps.
    pub fn power(&self, jumps: &NormalMixture, k: usize) -> Vec<f64> {
        self.spectral(jumps, |c| c.powi(k as i32))
    }
}

/// `∫_a^b f` by composite Simpson with `m` (even) panels.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, m: usize) -> f64 {
    let h = (b - a) / m as f64;
    let mut s = f(a) + f(b);
    for i in 1..m {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}
