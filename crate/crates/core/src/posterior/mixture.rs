//! Truncated stick-breaking state and its conjugate blocked-Gibbs update.

use rand_distr::{Beta, Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{self, LN_2PI};
use crate::model::NormalMixture;
use crate::prior::{sample_inverse_wishart, BaseFamily, DpmPrior, StickDraw};
use crate::rng::RngStream;

/// All `K` sticks of the current jump density, including zero-weight ones.
#[derive(Clone, Debug)]
pub struct StickState {
    dim: usize,
    weights: Vec<f64>,
    ln_weights: Vec<f64>,
    locations: Vec<Vec<f64>>,
    sigma: Vec<f64>,
    chol: Vec<f64>,
    log_norm: f64,
}

impl StickState {
    pub fn new(weights: Vec<f64>, locations: Vec<Vec<f64>>, sigma: Vec<f64>) -> Result<Self> {
        let dim = locations.first().map(|l| l.len()).unwrap_or(0);
        if dim == 0 || weights.len() != locations.len() {
            return Err(Error::invalid("stick state needs matching weights and locations"));
        }
        if locations.iter().any(|l| l.len() != dim) {
            return Err(Error::invalid("stick locations have mixed dimensions"));
        }
        if weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::invalid("stick weights must be nonnegative"));
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::invalid("stick weights sum to zero"));
        }
        let weights: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let chol = linalg::cholesky(dim, &sigma)?;
        let log_norm = -0.5 * (dim as f64 * LN_2PI + linalg::log_det_from_chol(dim, &chol));
        Ok(Self {
            dim,
            ln_weights: weights.iter().map(|w| w.ln()).collect(),
            weights,
            locations,
            sigma,
            chol,
            log_norm,
        })
    }

    pub fn from_draw(draw: StickDraw) -> Result<Self> {
        Self::new(draw.weights, draw.locations, draw.sigma)
    }

    /// Embeds a shared-covariance mixture into `k` sticks; spare sticks get
    /// zero weight and locations from the prior base measure.
    pub fn from_mixture(m: &NormalMixture, prior: &DpmPrior, rng: &mut RngStream) -> Result<Self> {
        if !m.is_shared() && m.len() > 1 {
            return Err(Error::invalid("warm-start mixture must use a shared covariance"));
        }
        if m.len() > prior.truncation {
            return Err(Error::invalid(format!(
                "warm-start mixture has {} components, truncation is {}",
                m.len(),
                prior.truncation
            )));
        }
        let mut weights = m.weights().to_vec();
        let mut locations = m.means().to_vec();
        while weights.len() < prior.truncation {
            weights.push(0.0);
            locations.push(sample_base(prior, rng)?);
        }
        Self::new(weights, locations, m.covariance(0).to_vec())
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

    pub fn locations(&self) -> &[Vec<f64>] {
        &self.locations
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub(crate) fn sigma_chol(&self) -> &[f64] {
        &self.chol
    }

    #[inline]
    fn ln_kernel(&self, k: usize, y: &[f64]) -> f64 {
        let mut diff = [0.0f64; 8];
        let mut heap;
        let diff: &mut [f64] = if self.dim <= 8 {
            &mut diff[..self.dim]
        } else {
            heap = vec![0.0; self.dim];
            &mut heap
        };
        for a in 0..self.dim {
            diff[a] = y[a] - self.locations[k][a];
        }
        self.log_norm - 0.5 * linalg::mahalanobis_sq(self.dim, &self.chol, diff)
    }

    /// `ln r(y)` for the mixture over all live sticks.
    pub fn ln_density(&self, y: &[f64]) -> f64 {
        let mut max = f64::NEG_INFINITY;
        let mut acc = 0.0;
        for k in 0..self.len() {
            if self.weights[k] == 0.0 {
                continue;
            }
            let t = self.ln_weights[k] + self.ln_kernel(k, y);
            if t > max {
                acc = acc * (max - t).exp() + 1.0;
                max = t;
            } else {
                acc += (t - max).exp();
            }
        }
        if max == f64::NEG_INFINITY {
            max
        } else {
            max + acc.ln()
        }
    }

    pub fn sample_into(&self, rng: &mut RngStream, out: &mut [f64]) {
        let u = rng.open01();
        let mut cum = 0.0;
        let mut pick = self.len() - 1;
        for (k, w) in self.weights.iter().enumerate() {
            cum += w;
            if u < cum {
                pick = k;
                break;
            }
        }
        self.sample_component_into(pick, rng, out);
    }

    pub(crate) fn sample_component_into(&self, k: usize, rng: &mut RngStream, out: &mut [f64]) {
        let z: Vec<f64> = (0..self.dim).map(|_| StandardNormal.sample(rng)).collect();
        linalg::lower_mul(self.dim, &self.chol, &z, out);
        for a in 0..self.dim {
            out[a] += self.locations[k][a];
        }
    }

    /// Draws a component label from `p(c = k | y) ∝ w_k φ_Σ(y − μ_k)`.
    pub fn sample_label(&self, y: &[f64], rng: &mut RngStream, scratch: &mut Vec<f64>) -> usize {
        scratch.clear();
        let mut max = f64::NEG_INFINITY;
        for k in 0..self.len() {
            let t = if self.weights[k] == 0.0 {
                f64::NEG_INFINITY
            } else {
                self.ln_weights[k] + self.ln_kernel(k, y)
            };
            max = max.max(t);
            scratch.push(t);
        }
        let mut total = 0.0;
        for t in scratch.iter_mut() {
            *t = (*t - max).exp();
            total += *t;
        }
        let u = rng.open01() * total;
        let mut cum = 0.0;
        for (k, p) in scratch.iter().enumerate() {
            cum += p;
            if u < cum {
                return k;
            }
        }
        scratch
            .iter()
            .rposition(|p| *p > 0.0)
            .unwrap_or(0)
    }

    /// Snapshot as a [`NormalMixture`]; sticks below the mixture's weight floor are dropped.
    pub fn to_mixture(&self) -> Result<NormalMixture> {
        NormalMixture::shared(self.weights.clone(), self.locations.clone(), self.sigma.clone())
    }
}

pub(crate) fn sample_base(prior: &DpmPrior, rng: &mut RngStream) -> Result<Vec<f64>> {
    if prior.base_family != BaseFamily::Gaussian {
        return Err(Error::Unsupported(
            "posterior sampling needs a Gaussian base measure".into(),
        ));
    }
    let d = prior.dim();
    let chol = linalg::cholesky(d, &prior.base_cov_flat())?;
    let z: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
    let mut out = vec![0.0; d];
    linalg::lower_mul(d, &chol, &z, &mut out);
    Ok(out.iter().zip(&prior.base_mean).map(|(a, m)| a + m).collect())
}

/// Draws from `N(mean, cov)`.
fn sample_gaussian(d: usize, mean: &[f64], cov: &[f64], rng: &mut RngStream) -> Result<Vec<f64>> {
    let chol = linalg::cholesky(d, &linalg::symmetrize(d, cov))?;
    let z: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
    let mut out = vec![0.0; d];
    linalg::lower_mul(d, &chol, &z, &mut out);
    Ok(out.iter().zip(mean).map(|(a, m)| a + m).collect())
}

/// One blocked-Gibbs sweep given pooled jumps `ys`: labels, sticks,
/// locations, then the shared covariance. Returns the new state and labels.
pub fn gibbs_update(
    state: &StickState,
    ys: &[&[f64]],
    prior: &DpmPrior,
    rng: &mut RngStream,
) -> Result<(StickState, Vec<usize>)> {
    if prior.base_family != BaseFamily::Gaussian {
        return Err(Error::Unsupported(
            "posterior sampling needs a Gaussian base measure".into(),
        ));
    }
    let d = state.dim();
    let k_total = state.len();
    let mut scratch = Vec::with_capacity(k_total);
    let labels: Vec<usize> = ys
        .iter()
        .map(|y| state.sample_label(y, rng, &mut scratch))
        .collect();

    let mut counts = vec![0usize; k_total];
    let mut sums = vec![vec![0.0; d]; k_total];
    for (y, &c) in ys.iter().zip(&labels) {
        counts[c] += 1;
        for a in 0..d {
            sums[c][a] += y[a];
        }
    }

    // sticks
    let mut weights = Vec::with_capacity(k_total);
    let mut remaining = 1.0;
    let mut tail: usize = counts.iter().sum();
    for k in 0..k_total {
        tail -= counts[k];
        if k + 1 == k_total {
            weights.push(remaining);
            break;
        }
        let beta = Beta::new(1.0 + counts[k] as f64, prior.concentration + tail as f64)
            .map_err(|e| Error::Numerical(e.to_string()))?;
        let v: f64 = beta.sample(rng);
        weights.push(remaining * v);
        remaining *= 1.0 - v;
    }

    // locations
    let s0_inv = linalg::inverse(d, &prior.base_cov_flat())?;
    let sigma_inv = linalg::inverse(d, state.sigma())?;
    let s0_inv_m0 = linalg::mat_vec(d, &s0_inv, &prior.base_mean);
    let mut locations = Vec::with_capacity(k_total);
    for k in 0..k_total {
        if counts[k] == 0 {
            locations.push(sample_gaussian(d, &prior.base_mean, &prior.base_cov_flat(), rng)?);
            continue;
        }
        let prec = linalg::add(&s0_inv, &linalg::scale(&sigma_inv, counts[k] as f64));
        let cov = linalg::inverse(d, &prec)?;
        let rhs: Vec<f64> = linalg::mat_vec(d, &sigma_inv, &sums[k])
            .iter()
            .zip(&s0_inv_m0)
            .map(|(a, b)| a + b)
            .collect();
        let mean = linalg::mat_vec(d, &cov, &rhs);
        locations.push(sample_gaussian(d, &mean, &cov, rng)?);
    }

    // shared covariance
    let mut scatter = prior.iw_scale_flat();
    for (y, &c) in ys.iter().zip(&labels) {
        for a in 0..d {
            let da = y[a] - locations[c][a];
            for b in 0..d {
                scatter[a * d + b] += da * (y[b] - locations[c][b]);
            }
        }
    }
    let scatter = linalg::symmetrize(d, &scatter);
    let sigma = sample_inverse_wishart(d, prior.iw_df + ys.len() as f64, &scatter, rng)?;
    let next = StickState::new(weights, locations, sigma)?;
    Ok((next, labels))
}

/// Log density of the locations and covariance under the base measure and
/// inverse-Wishart prior, up to constants.
pub(crate) fn ln_prior_locations(state: &StickState, prior: &DpmPrior) -> f64 {
    let d = state.dim();
    let Ok(chol) = linalg::cholesky(d, &prior.base_cov_flat()) else {
        return f64::NEG_INFINITY;
    };
    let mut diff = vec![0.0; d];
    state
        .locations()
        .iter()
        .map(|l| {
            for a in 0..d {
                diff[a] = l[a] - prior.base_mean[a];
            }
            -0.5 * linalg::mahalanobis_sq(d, &chol, &diff)
        })
        .sum()
}
