//! Periodic-grid evaluation of the compound-Poisson continuous part for d ≤ 2.
//!
//! The jump density is sampled on a wrapped grid centered at the origin, and
//! `Σ_m w_m r^{*m}` is formed in Fourier space as `Σ_m w_m R̂^m`. The grid is
//! sized so that the support of every power fits inside half the period.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::model::NormalMixture;

#[derive(Clone, Debug)]
pub(crate) struct WrappedGrid {
    dim: usize,
    n: usize,
    step: Vec<f64>,
    values: Vec<f64>,
}

fn wrapped_coord(j: usize, n: usize, h: f64) -> f64 {
    if j < n / 2 {
        j as f64 * h
    } else {
        (j as f64 - n as f64) * h
    }
}

fn fft_in_place(dim: usize, n: usize, data: &mut [Complex64], inverse: bool) {
    let mut planner = FftPlanner::<f64>::new();
    let fft = if inverse {
        planner.plan_fft_inverse(n)
    } else {
        planner.plan_fft_forward(n)
    };
    if dim == 1 {
        fft.process(data);
        return;
    }
    // rows
    for row in data.chunks_mut(n) {
        fft.process(row);
    }
    // columns
    let mut col = vec![Complex64::new(0.0, 0.0); n];
    for c in 0..n {
        for r in 0..n {
            col[r] = data[r * n + c];
        }
        fft.process(&mut col);
        for r in 0..n {
            data[r * n + c] = col[r];
        }
    }
}

impl WrappedGrid {
    /// Builds the grid for `Σ_{m=1}^{M} exp(log_weights[m-1]) r^{*m}`.
    pub(crate) fn build(
        jumps: &NormalMixture,
        log_weights: &[f64],
        max_points_per_axis: usize,
    ) -> Result<Self> {
        let d = jumps.dim();
        if d > 2 {
            return Err(Error::Unsupported("grid route needs d <= 2".into()));
        }
        let m_max = log_weights.len();
        let mean = jumps.mean();
        let cov = jumps.total_covariance();
        let mut half_width: f64 = 0.0;
        for a in 0..d {
            let sd = cov[a * d + a].sqrt();
            for m in 1..=m_max {
                let mf = m as f64;
                half_width = half_width.max((mf * mean[a]).abs() + 10.0 * (mf).sqrt() * sd);
            }
            for (i, mu) in jumps.means().iter().enumerate() {
                let s = jumps.covariance(i)[a * d + a].sqrt();
                half_width = half_width.max(mu[a].abs() + 10.0 * s);
            }
        }
        let target_h = jumps.min_component_sd() / 16.0;
        let needed = ((2.0 * half_width / target_h).ceil() as usize + 4).next_power_of_two();
        let n = needed.min(max_points_per_axis.next_power_of_two()).max(16);
        let h = 2.0 * half_width / n as f64;
        let total = n.pow(d as u32);

        let cell = h.powi(d as i32);
        let mut data = vec![Complex64::new(0.0, 0.0); total];
        let mut x = vec![0.0; d];
        for idx in 0..total {
            if d == 1 {
                x[0] = wrapped_coord(idx, n, h);
            } else {
                x[0] = wrapped_coord(idx / n, n, h);
                x[1] = wrapped_coord(idx % n, n, h);
            }
            data[idx] = Complex64::new(jumps.ln_density_unchecked(&x).exp() * cell, 0.0);
        }
        fft_in_place(d, n, &mut data, false);
        let weights: Vec<f64> = log_weights.iter().map(|l| l.exp()).collect();
        for v in data.iter_mut() {
            let base = *v;
            let mut power = base;
            let mut acc = Complex64::new(0.0, 0.0);
            for w in &weights {
                acc += power * *w;
                power *= base;
            }
            *v = acc;
        }
        fft_in_place(d, n, &mut data, true);
        let norm = 1.0 / (total as f64 * cell);
        let values = data.iter().map(|c| c.re * norm).collect();
        Ok(Self {
            dim: d,
            n,
            step: vec![h; d],
            values,
        })
    }

    fn at(&self, i: i64, j: i64) -> f64 {
        let n = self.n as i64;
        let wi = i.rem_euclid(n) as usize;
        if self.dim == 1 {
            self.values[wi]
        } else {
            let wj = j.rem_euclid(n) as usize;
            self.values[wi * self.n + wj]
        }
    }

    /// Cubic Lagrange interpolation; `None` outside the trusted half-period.
    pub(crate) fn interpolate(&self, x: &[f64]) -> Option<f64> {
        let limit = (self.n / 2) as f64 - 3.0;
        let u: Vec<f64> = x.iter().zip(&self.step).map(|(xi, h)| xi / h).collect();
        if u.iter().any(|ui| ui.abs() > limit) {
            return None;
        }
        let basis = |t: f64| -> [f64; 4] {
            // nodes at -1, 0, 1, 2
            [
                -t * (t - 1.0) * (t - 2.0) / 6.0,
                (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0,
                -(t + 1.0) * t * (t - 2.0) / 2.0,
                (t + 1.0) * t * (t - 1.0) / 6.0,
            ]
        };
        let i0 = u[0].floor();
        let bx = basis(u[0] - i0);
        let i0 = i0 as i64;
        if self.dim == 1 {
            return Some((0..4).map(|k| bx[k] * self.at(i0 - 1 + k as i64, 0)).sum());
        }
        let j0 = u[1].floor();
        let by = basis(u[1] - j0);
        let j0 = j0 as i64;
        let mut acc = 0.0;
        for a in 0..4 {
            for b in 0..4 {
                acc += bx[a] * by[b] * self.at(i0 - 1 + a as i64, j0 - 1 + b as i64);
            }
        }
        Some(acc)
    }
}
