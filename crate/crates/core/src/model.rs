//! Jump densities and compound-Poisson models.
//!
//! [`NormalMixture`] is a finite location(-scale) mixture of d-variate
//! Gaussians. The family is closed under convolution, which is what makes the
//! m-fold convolution powers `r^{*m}` in the increment-density series exact.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, LN_2PI};
use crate::rng::RngStream;

/// Weights below this are dropped at construction.
pub const MIN_WEIGHT: f64 = 1e-15;
/// Tolerance on the weight sum accepted by the constructor before renormalizing.
const WEIGHT_SUM_TOL: f64 = 1e-8;
/// Relative tolerance used to merge identical components after convolution.
const MERGE_TOL: f64 = 1e-12;

pub const DEFAULT_MAX_COMPONENTS: usize = 4096;
pub const DEFAULT_PRUNE_TOL: f64 = 1e-10;

#[derive(Clone, Debug)]
pub(crate) struct GaussKernel {
    chol: Vec<f64>,
    log_norm: f64,
}

impl GaussKernel {
    fn new(d: usize, cov: &[f64]) -> Result<Self> {
        let chol = linalg::cholesky(d, cov)?;
        let log_norm = -0.5 * (d as f64 * LN_2PI + linalg::log_det_from_chol(d, &chol));
        Ok(Self { chol, log_norm })
    }

    #[inline]
    fn ln_pdf(&self, d: usize, diff: &[f64]) -> f64 {
        self.log_norm - 0.5 * linalg::mahalanobis_sq(d, &self.chol, diff)
    }

    /// Peak value of the kernel, `φ_Σ(0)`.
    fn peak(&self) -> f64 {
        self.log_norm.exp()
    }
}

/// Finite mixture `Σ_i w_i φ_{Σ_i}(x − μ_i)`.
///
/// Covariance factors are computed once at construction. When `shared` is set
/// a single covariance matrix serves every component.
#[derive(Clone, Debug)]
pub struct NormalMixture {
    dim: usize,
    weights: Vec<f64>,
    means: Vec<Vec<f64>>,
    covariances: Vec<Vec<f64>>,
    shared: bool,
    kernels: Vec<GaussKernel>,
}

/// Wire format of a [`NormalMixture`].
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct MixtureJson {
    pub dim: usize,
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub covariances: Vec<Vec<Vec<f64>>>,
    pub shared_sigma: bool,
}

impl NormalMixture {
    /// Builds and validates a mixture. With `shared = true`, `covariances`
    /// must hold exactly one matrix (row-major `d*d`).
    pub fn new(
        dim: usize,
        weights: Vec<f64>,
        means: Vec<Vec<f64>>,
        covariances: Vec<Vec<f64>>,
        shared: bool,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("mixture dimension must be positive"));
        }
        if weights.len() != means.len() {
            return Err(Error::invalid(format!(
                "{} weights but {} means",
                weights.len(),
                means.len()
            )));
        }
        let expected_covs = if shared { 1 } else { weights.len() };
        if covariances.len() != expected_covs {
            return Err(Error::invalid(format!(
                "expected {expected_covs} covariance matrices, got {}",
                covariances.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::invalid("weights must be finite and nonnegative"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::invalid(format!("weights sum to {total}, expected 1")));
        }
        for m in &means {
            Error::check_dim(dim, m.len())?;
            if m.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid("mixture mean is not finite"));
            }
        }
        for c in &covariances {
            linalg::validate_spd(dim, c)?;
        }

        let keep: Vec<usize> = (0..weights.len())
            .filter(|&i| weights[i] >= MIN_WEIGHT)
            .collect();
        if keep.is_empty() {
            return Err(Error::invalid("mixture has no components left"));
        }
        let new_weights: Vec<f64> = if keep.len() == weights.len() {
            weights
        } else {
            let kept_total: f64 = keep.iter().map(|&i| weights[i]).sum();
            keep.iter().map(|&i| weights[i] / kept_total).collect()
        };
        let new_means: Vec<Vec<f64>> = keep.iter().map(|&i| means[i].clone()).collect();
        let new_covs: Vec<Vec<f64>> = if shared {
            covariances
        } else {
            keep.iter().map(|&i| covariances[i].clone()).collect()
        };
        let kernels = new_covs
            .iter()
            .map(|c| GaussKernel::new(dim, c))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            dim,
            weights: new_weights,
            means: new_means,
            covariances: new_covs,
            shared,
            kernels,
        })
    }

    /// Single Gaussian `N(mean, cov)`.
    pub fn gaussian(mean: Vec<f64>, cov: Vec<f64>) -> Result<Self> {
        let d = mean.len();
        Self::new(d, vec![1.0], vec![mean], vec![cov], true)
    }

    /// One-dimensional `N(mu, var)`.
    pub fn univariate(mu: f64, var: f64) -> Result<Self> {
        Self::gaussian(vec![mu], vec![var])
    }

    /// Location mixture with a single shared covariance.
    pub fn shared(weights: Vec<f64>, means: Vec<Vec<f64>>, cov: Vec<f64>) -> Result<Self> {
        let d = means
            .first()
            .map(|m| m.len())
            .ok_or_else(|| Error::invalid("mixture needs at least one component"))?;
        Self::new(d, weights, means, vec![cov], true)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn means(&self) -> &[Vec<f64>] {
        &self.means
    }

    pub fn is_shared(&self) -> bool {
        self.shared
    }

    pub fn covariance(&self, i: usize) -> &[f64] {
        &self.covariances[self.cov_index(i)]
    }

    #[inline]
    fn cov_index(&self, i: usize) -> usize {
        if self.shared {
            0
        } else {
            i
        }
    }

    /// `ln r(x)` without a dimension check; `x.len()` must equal `dim`.
    pub fn ln_density_unchecked(&self, x: &[f64]) -> f64 {
        let d = self.dim;
        let mut diff = [0.0f64; 8];
        let mut heap;
        let diff: &mut [f64] = if d <= 8 {
            &mut diff[..d]
        } else {
            heap = vec![0.0; d];
            &mut heap
        };
        let mut max = f64::NEG_INFINITY;
        let mut terms = Vec::with_capacity(self.len());
        for (i, (w, mu)) in self.weights.iter().zip(&self.means).enumerate() {
            for k in 0..d {
                diff[k] = x[k] - mu[k];
            }
            let t = w.ln() + self.kernels[self.cov_index(i)].ln_pdf(d, diff);
            if t > max {
                max = t;
            }
            terms.push(t);
        }
        if max == f64::NEG_INFINITY {
            return max;
        }
        max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
    }

    pub fn ln_density(&self, x: &[f64]) -> Result<f64> {
        Error::check_dim(self.dim, x.len())?;
        Ok(self.ln_density_unchecked(x))
    }

    /// Mixture density at `x`. Finite and nonnegative for finite `x`; underflows to 0 far in the tails.
    pub fn density(&self, x: &[f64]) -> Result<f64> {
        Ok(self.ln_density(x)?.exp())
    }

    /// Upper bound on `sup_x r(x)`.
    pub fn sup_bound(&self) -> f64 {
        self.weights
            .iter()
            .enumerate()
            .map(|(i, w)| w * self.kernels[self.cov_index(i)].peak())
            .sum()
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        for (w, mu) in self.weights.iter().zip(&self.means) {
            for k in 0..self.dim {
                m[k] += w * mu[k];
            }
        }
        m
    }

    /// Covariance of the mixture law (within plus between components).
    pub fn total_covariance(&self) -> Vec<f64> {
        let d = self.dim;
        let mean = self.mean();
        let mut c = vec![0.0; d * d];
        for (i, (w, mu)) in self.weights.iter().zip(&self.means).enumerate() {
            let s = self.covariance(i);
            for a in 0..d {
                for b in 0..d {
                    c[a * d + b] += w * (s[a * d + b] + (mu[a] - mean[a]) * (mu[b] - mean[b]));
                }
            }
        }
        c
    }

    /// Largest per-axis standard deviation over all components.
    pub fn max_component_sd(&self) -> f64 {
        self.covariances
            .iter()
            .flat_map(|c| (0..self.dim).map(move |k| c[k * self.dim + k].sqrt()))
            .fold(0.0, f64::max)
    }

    /// Smallest per-axis standard deviation over all components.
    pub fn min_component_sd(&self) -> f64 {
        self.covariances
            .iter()
            .map(|c| linalg::min_eigenvalue(self.dim, c).sqrt())
            .fold(f64::INFINITY, f64::min)
    }

    fn pick_component(&self, rng: &mut RngStream) -> usize {
        let u = rng.open01();
        let mut acc = 0.0;
        for (i, w) in self.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                return i;
            }
        }
        self.len() - 1
    }

    /// Draw one vector from the mixture into `out`.
    pub fn sample_into(&self, rng: &mut RngStream, out: &mut [f64]) {
        let i = self.pick_component(rng);
        let d = self.dim;
        let z: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        linalg::lower_mul(d, &self.kernels[self.cov_index(i)].chol, &z, out);
        for k in 0..d {
            out[k] += self.means[i][k];
        }
    }

    pub fn sample(&self, rng: &mut RngStream) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.sample_into(rng, &mut out);
        out
    }

    /// Antithetic pair: same component, Gaussian noise `±z`.
    pub fn sample_antithetic(&self, rng: &mut RngStream) -> (Vec<f64>, Vec<f64>) {
        let i = self.pick_component(rng);
        let d = self.dim;
        let z: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        let mut lz = vec![0.0; d];
        linalg::lower_mul(d, &self.kernels[self.cov_index(i)].chol, &z, &mut lz);
        let a = (0..d).map(|k| self.means[i][k] + lz[k]).collect();
        let b = (0..d).map(|k| self.means[i][k] - lz[k]).collect();
        (a, b)
    }

    /// Density of `Y + Y'` for independent `Y ~ self`, `Y' ~ other`.
    ///
    /// Components are all pairs `(w_i v_j, μ_i + ν_j, Σ_i + Λ_j)`; pairs that
    /// coincide exactly are merged.
    pub fn convolve(&self, other: &NormalMixture) -> Result<NormalMixture> {
        Error::check_dim(self.dim, other.dim)?;
        let d = self.dim;
        let shared = self.shared && other.shared;
        let mut comps: Vec<(f64, Vec<f64>, usize)> = Vec::with_capacity(self.len() * other.len());
        let mut covs: Vec<Vec<f64>> = Vec::new();
        if shared {
            covs.push(linalg::add(&self.covariances[0], &other.covariances[0]));
        }
        for i in 0..self.len() {
            for j in 0..other.len() {
                let mean: Vec<f64> = (0..d).map(|k| self.means[i][k] + other.means[j][k]).collect();
                let cov_idx = if shared {
                    0
                } else {
                    covs.push(linalg::add(self.covariance(i), other.covariance(j)));
                    covs.len() - 1
                };
                comps.push((self.weights[i] * other.weights[j], mean, cov_idx));
            }
        }
        let (weights, means, covs) = merge_components(d, comps, covs, shared);
        let total: f64 = weights.iter().sum();
        let weights = weights.into_iter().map(|w| w / total).collect();
        NormalMixture::new(d, weights, means, covs, shared)
    }

    /// `r^{*k}`: the density of the sum of `k` independent draws.
    pub fn self_convolve(
        &self,
        k: usize,
        max_components: usize,
        prune_tol: f64,
    ) -> Result<SelfConvolution> {
        if k == 0 {
            return Err(Error::invalid("self-convolution power must be at least 1"));
        }
        let powers = self.convolution_powers(k, max_components, prune_tol)?;
        let within_budget = powers.within_budget;
        let pruned_mass = powers.pruned_mass;
        let mixture = powers
            .powers
            .into_iter()
            .last()
            .expect("at least one power");
        Ok(SelfConvolution {
            mixture,
            pruned_mass,
            within_budget,
        })
    }

    /// `r^{*1}, …, r^{*k_max}` by repeated convolution with `self`.
    ///
    /// Whenever a power exceeds `max_components`, the smallest weights with
    /// total mass at most `prune_tol` are dropped and the rest renormalized.
    /// If the power is still over budget, `within_budget` is false and the
    /// powers computed so far (still exact up to pruning) are returned.
    pub fn convolution_powers(
        &self,
        k_max: usize,
        max_components: usize,
        prune_tol: f64,
    ) -> Result<ConvolutionPowers> {
        let mut powers = vec![self.clone()];
        let mut pruned_mass = 0.0;
        let mut within_budget = self.len() <= max_components;
        while within_budget && powers.len() < k_max {
            let next = powers.last().unwrap().convolve(self)?;
            let (next, lost) = prune(next, max_components, prune_tol)?;
            pruned_mass += lost;
            if next.len() > max_components {
                within_budget = false;
                break;
            }
            powers.push(next);
        }
        Ok(ConvolutionPowers {
            powers,
            pruned_mass,
            within_budget,
        })
    }

    pub fn to_json(&self) -> MixtureJson {
        let d = self.dim;
        MixtureJson {
            dim: d,
            weights: self.weights.clone(),
            means: self.means.clone(),
            covariances: self
                .covariances
                .iter()
                .map(|c| c.chunks(d).map(|r| r.to_vec()).collect())
                .collect(),
            shared_sigma: self.shared,
        }
    }

    pub fn from_json(j: &MixtureJson) -> Result<Self> {
        let covs = j
            .covariances
            .iter()
            .map(|rows| {
                if rows.len() != j.dim || rows.iter().any(|r| r.len() != j.dim) {
                    Err(Error::invalid("covariance matrix has the wrong shape"))
                } else {
                    Ok(rows.concat())
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(j.dim, j.weights.clone(), j.means.clone(), covs, j.shared_sigma)
    }
}

impl Serialize for NormalMixture {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_json().serialize(s)
    }
}

impl<'de> Deserialize<'de> for NormalMixture {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let j = MixtureJson::deserialize(d)?;
        NormalMixture::from_json(&j).map_err(serde::de::Error::custom)
    }
}

fn close(a: &[f64], b: &[f64]) -> bool {
    a.iter()
        .zip(b)
        .all(|(x, y)| (x - y).abs() <= MERGE_TOL * (1.0 + x.abs().max(y.abs())))
}

type Merged = (Vec<f64>, Vec<Vec<f64>>, Vec<Vec<f64>>);

fn merge_components(
    d: usize,
    mut comps: Vec<(f64, Vec<f64>, usize)>,
    covs: Vec<Vec<f64>>,
    shared: bool,
) -> Merged {
    comps.sort_by(|a, b| {
        a.1.iter()
            .zip(&b.1)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut weights: Vec<f64> = Vec::new();
    let mut means: Vec<Vec<f64>> = Vec::new();
    let mut out_covs: Vec<Vec<f64>> = Vec::new();
    if shared {
        out_covs.push(covs[0].clone());
    }
    // Scan runs of (near-)equal means and merge components whose covariances also agree.
    let mut run_start = 0;
    while run_start < comps.len() {
        let mut run_end = run_start + 1;
        while run_end < comps.len() && close(&comps[run_start].1, &comps[run_end].1) {
            run_end += 1;
        }
        let first_out = weights.len();
        for c in &comps[run_start..run_end] {
            let cov = &covs[c.2];
            let hit = (first_out..weights.len()).find(|&o| shared || close(&out_covs[o], cov));
            match hit {
                Some(o) => weights[o] += c.0,
                None => {
                    weights.push(c.0);
                    means.push(c.1.clone());
                    if !shared {
                        out_covs.push(cov.clone());
                    }
                }
            }
        }
        run_start = run_end;
    }
    let _ = d;
    (weights, means, out_covs)
}

/// Drops the smallest weights totaling at most `prune_tol` when `m` has more
/// than `max_components` components. Returns the pruned mixture and lost mass.
pub fn prune(
    m: NormalMixture,
    max_components: usize,
    prune_tol: f64,
) -> Result<(NormalMixture, f64)> {
    if m.len() <= max_components {
        return Ok((m, 0.0));
    }
    let mut order: Vec<usize> = (0..m.len()).collect();
    order.sort_by(|&a, &b| m.weights[a].total_cmp(&m.weights[b]));
    let mut lost = 0.0;
    let mut drop = vec![false; m.len()];
    for &i in &order {
        if lost + m.weights[i] > prune_tol {
            break;
        }
        lost += m.weights[i];
        drop[i] = true;
    }
    if lost == 0.0 {
        return Ok((m, 0.0));
    }
    let keep: Vec<usize> = (0..m.len()).filter(|&i| !drop[i]).collect();
    let total: f64 = keep.iter().map(|&i| m.weights[i]).sum();
    let weights = keep.iter().map(|&i| m.weights[i] / total).collect();
    let means = keep.iter().map(|&i| m.means[i].clone()).collect();
    let covs = if m.shared {
        m.covariances.clone()
    } else {
        keep.iter().map(|&i| m.covariances[i].clone()).collect()
    };
    Ok((NormalMixture::new(m.dim, weights, means, covs, m.shared)?, lost))
}

#[derive(Clone, Debug)]
pub struct SelfConvolution {
    pub mixture: NormalMixture,
    pub pruned_mass: f64,
    pub within_budget: bool,
}

#[derive(Clone, Debug)]
pub struct ConvolutionPowers {
    /// `powers[m-1]` is `r^{*m}`.
    pub powers: Vec<NormalMixture>,
    pub pruned_mass: f64,
    pub within_budget: bool,
}

/// Intensity plus jump density of a compound Poisson process.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CppModel {
    pub lambda: f64,
    pub jumps: NormalMixture,
}

impl CppModel {
    pub fn new(lambda: f64, jumps: NormalMixture) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::invalid(format!("lambda must be positive, got {lambda}")));
        }
        Ok(Self { lambda, jumps })
    }

    pub fn dim(&self) -> usize {
        self.jumps.dim()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::invalid(format!(
                "lambda must be positive, got {}",
                self.lambda
            )));
        }
        Ok(())
    }
}

/// Regular tensor grid for quadrature on `d ∈ {1, 2}`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Grid {
    pub dim: usize,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub points_per_axis: usize,
}

impl Grid {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, points_per_axis: usize) -> Result<Self> {
        let g = Self {
            dim: lo.len(),
            lo,
            hi,
            points_per_axis,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn line(lo: f64, hi: f64, points: usize) -> Result<Self> {
        Self::new(vec![lo], vec![hi], points)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dim == 1 || self.dim == 2) {
            return Err(Error::Unsupported(format!(
                "grids support dimension 1 or 2, got {}",
                self.dim
            )));
        }
        Error::check_dim(self.dim, self.hi.len())?;
        if self.lo.iter().zip(&self.hi).any(|(l, h)| !(l < h)) {
            return Err(Error::invalid("grid requires lo < hi on every axis"));
        }
        if self.points_per_axis < 2 {
            return Err(Error::invalid("grid needs at least 2 points per axis"));
        }
        Ok(())
    }

    pub fn step(&self, axis: usize) -> f64 {
        (self.hi[axis] - self.lo[axis]) / (self.points_per_axis - 1) as f64
    }

    pub fn axis(&self, axis: usize) -> Vec<f64> {
        let h = self.step(axis);
        (0..self.points_per_axis)
            .map(|i| self.lo[axis] + i as f64 * h)
            .collect()
    }

    pub fn len(&self) -> usize {
        self.points_per_axis.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Nodes in row-major order (last axis fastest).
    pub fn nodes(&self) -> Vec<Vec<f64>> {
        let xs = self.axis(0);
        if self.dim == 1 {
            return xs.into_iter().map(|x| vec![x]).collect();
        }
        let ys = self.axis(1);
        let mut out = Vec::with_capacity(self.len());
        for &x in &xs {
            for &y in &ys {
                out.push(vec![x, y]);
            }
        }
        out
    }

    /// Trapezoid weights matching [`Grid::nodes`].
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let n = self.points_per_axis;
        let axis_w = |a: usize| -> Vec<f64> {
            let h = self.step(a);
            (0..n)
                .map(|i| if i == 0 || i == n - 1 { 0.5 * h } else { h })
                .collect()
        };
        let wx = axis_w(0);
        if self.dim == 1 {
            return wx;
        }
        let wy = axis_w(1);
        let mut out = Vec::with_capacity(self.len());
        for a in &wx {
            for b in &wy {
                out.push(a * b);
            }
        }
        out
    }

    pub fn integrate(&self, values: &[f64]) -> f64 {
        self.trapezoid_weights()
            .iter()
            .zip(values)
            .map(|(w, v)| w * v)
            .sum()
    }
}
