//! Latent jump configurations and the birth / death / relocate kernel.
//!
//! Each nonzero increment carries `t ≥ 1` jumps stored in order; the last one
//! is the residual `Z − Σ_{j<t} y_j` and is always recomputed from the others.
//! Increments that are exactly zero carry no jumps: given `Z = 0` the
//! conditional law puts all its mass on `t = 0`.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::rng::RngStream;
use crate::simulate::{is_atom, IncrementSample};

use super::mixture::StickState;

/// Jump density seen by the latent kernel.
pub trait JumpKernel {
    fn ln_density(&self, y: &[f64]) -> f64;
    fn sample_into(&self, rng: &mut RngStream, out: &mut [f64]);
    /// Symmetric random displacement used by the relocate move.
    fn relocate_step(&self, rng: &mut RngStream, out: &mut [f64]);
}

/// Current mixture plus the relocate scale `s` (displacements `N(0, s²Σ)`).
pub struct MixtureKernel<'a> {
    pub sticks: &'a StickState,
    pub scale: f64,
}

impl JumpKernel for MixtureKernel<'_> {
    fn ln_density(&self, y: &[f64]) -> f64 {
        self.sticks.ln_density(y)
    }

    fn sample_into(&self, rng: &mut RngStream, out: &mut [f64]) {
        self.sticks.sample_into(rng, out)
    }

    fn relocate_step(&self, rng: &mut RngStream, out: &mut [f64]) {
        let d = self.sticks.dim();
        let z: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        linalg::lower_mul(d, self.sticks.sigma_chol(), &z, out);
        for v in out.iter_mut() {
            *v *= self.scale;
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct MoveProbs {
    pub birth: f64,
    pub death: f64,
    pub relocate: f64,
}

impl Default for MoveProbs {
    fn default() -> Self {
        Self {
            birth: 0.3,
            death: 0.3,
            relocate: 0.4,
        }
    }
}

impl MoveProbs {
    pub fn validate(&self) -> Result<()> {
        let p = [self.birth, self.death, self.relocate];
        if p.iter().any(|x| !(*x >= 0.0 && *x <= 1.0)) {
            return Err(Error::invalid("move probabilities must lie in [0, 1]"));
        }
        if (p.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(Error::invalid("move probabilities must sum to 1"));
        }
        if (self.birth > 0.0) != (self.death > 0.0) {
            return Err(Error::invalid("birth and death must both be enabled or both disabled"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Move {
    Birth,
    Death,
    Relocate,
}

/// Proposal and acceptance counts per move type.
#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize, PartialEq)]
pub struct MoveStats {
    pub proposed: [u64; 3],
    pub accepted: [u64; 3],
}

impl MoveStats {
    fn record(&mut self, m: Move, accepted: bool) {
        let i = m as usize;
        self.proposed[i] += 1;
        if accepted {
            self.accepted[i] += 1;
        }
    }

    pub fn rate(&self, m: Move) -> f64 {
        let i = m as usize;
        if self.proposed[i] == 0 {
            0.0
        } else {
            self.accepted[i] as f64 / self.proposed[i] as f64
        }
    }

    pub fn merge(&mut self, other: &MoveStats) {
        for i in 0..3 {
            self.proposed[i] += other.proposed[i];
            self.accepted[i] += other.accepted[i];
        }
    }
}

/// Latent jumps for every increment.
#[derive(Clone, Debug, PartialEq)]
pub struct LatentConfig {
    dim: usize,
    jumps: Vec<Vec<Vec<f64>>>,
}

impl LatentConfig {
    /// One jump equal to `Z_i` for nonzero increments, none for atoms.
    pub fn from_sample(sample: &IncrementSample) -> Self {
        let jumps = sample
            .values()
            .iter()
            .map(|z| if is_atom(z) { Vec::new() } else { vec![z.clone()] })
            .collect();
        Self {
            dim: sample.dim(),
            jumps,
        }
    }

    /// Builds a configuration from explicit jump lists; residuals are recomputed.
    pub fn from_jumps(sample: &IncrementSample, jumps: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        if jumps.len() != sample.len() {
            return Err(Error::invalid("one jump list per increment is required"));
        }
        let mut out = Self {
            dim: sample.dim(),
            jumps,
        };
        for (i, z) in sample.values().iter().enumerate() {
            let js = &mut out.jumps[i];
            if is_atom(z) != js.is_empty() {
                return Err(Error::invalid(format!(
                    "increment {i}: atoms carry no jumps and nonzero increments at least one"
                )));
            }
            if js.iter().any(|y| y.len() != sample.dim()) {
                return Err(Error::DimensionMismatch {
                    expected: sample.dim(),
                    got: js.iter().map(|y| y.len()).find(|l| *l != sample.dim()).unwrap_or(0),
                });
            }
            recompute_residual(js, z);
        }
        Ok(out)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.jumps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.jumps.is_empty()
    }

    pub fn jumps(&self, i: usize) -> &[Vec<f64>] {
        &self.jumps[i]
    }

    pub fn counts(&self) -> Vec<usize> {
        self.jumps.iter().map(|j| j.len()).collect()
    }

    pub fn total_jumps(&self) -> usize {
        self.jumps.iter().map(|j| j.len()).sum()
    }

    pub fn pooled(&self) -> Vec<&[f64]> {
        self.jumps
            .iter()
            .flat_map(|js| js.iter().map(|y| y.as_slice()))
            .collect()
    }

    /// Largest `|Σ_j y_ij − Z_i|` over increments and coordinates.
    pub fn constraint_error(&self, sample: &IncrementSample) -> f64 {
        let mut worst: f64 = 0.0;
        for (js, z) in self.jumps.iter().zip(sample.values()) {
            for a in 0..self.dim {
                let s: f64 = js.iter().map(|y| y[a]).sum();
                worst = worst.max((s - z[a]).abs());
            }
        }
        worst
    }

    pub(crate) fn increment_mut(&mut self, i: usize) -> &mut Vec<Vec<f64>> {
        &mut self.jumps[i]
    }
}

/// Sets the last jump to `z` minus the sum of the others.
pub fn recompute_residual(jumps: &mut [Vec<f64>], z: &[f64]) {
    let t = jumps.len();
    if t == 0 {
        return;
    }
    for a in 0..z.len() {
        let mut s = 0.0;
        for y in &jumps[..t - 1] {
            s += y[a];
        }
        jumps[t - 1][a] = z[a] - s;
    }
}

/// Moves `eps` from jump `b` to jump `a` and restores the residual.
pub fn relocate(jumps: &mut [Vec<f64>], z: &[f64], a: usize, b: usize, eps: &[f64]) {
    for k in 0..eps.len() {
        jumps[a][k] += eps[k];
        jumps[b][k] -= eps[k];
    }
    recompute_residual(jumps, z);
}

fn ln_joint_jumps<K: JumpKernel>(kernel: &K, jumps: &[Vec<f64>]) -> f64 {
    jumps.iter().map(|y| kernel.ln_density(y)).sum()
}

fn uniform_index(rng: &mut RngStream, n: usize) -> usize {
    ((rng.open01() * n as f64) as usize).min(n - 1)
}

/// One Metropolis–Hastings move on the jumps of a single increment.
///
/// `rate` is `λΔ`. The target is `rate^t e^{−rate}/t! · Π_j r(y_j)` on
/// configurations whose jumps sum to `z`.
pub fn latent_step<K: JumpKernel>(
    jumps: &mut Vec<Vec<f64>>,
    z: &[f64],
    rate: f64,
    kernel: &K,
    probs: &MoveProbs,
    rng: &mut RngStream,
    stats: &mut MoveStats,
) {
    let t = jumps.len();
    if t == 0 {
        return;
    }
    let d = z.len();
    let u = rng.open01();
    let mv = if u < probs.birth {
        Move::Birth
    } else if u < probs.birth + probs.death {
        Move::Death
    } else {
        Move::Relocate
    };
    let current = ln_joint_jumps(kernel, jumps);
    match mv {
        Move::Birth => {
            let mut y = vec![0.0; d];
            kernel.sample_into(rng, &mut y);
            let slot = uniform_index(rng, t);
            let mut proposal = jumps.clone();
            proposal.insert(slot, y.clone());
            recompute_residual(&mut proposal, z);
            // the proposal density r(y*) cancels against the new factor
            let log_a = rate.ln() - ((t + 1) as f64).ln() + ln_joint_jumps(kernel, &proposal)
                - current
                - kernel.ln_density(&y)
                + (probs.death / probs.birth).ln();
            let accept = rng.open01().ln() < log_a;
            if accept {
                *jumps = proposal;
            }
            stats.record(mv, accept);
        }
        Move::Death => {
            if t < 2 {
                stats.record(mv, false);
                return;
            }
            let j = uniform_index(rng, t - 1);
            let mut proposal = jumps.clone();
            let removed = proposal.remove(j);
            recompute_residual(&mut proposal, z);
            let log_a = (t as f64).ln() - rate.ln() + ln_joint_jumps(kernel, &proposal)
                - current
                + kernel.ln_density(&removed)
                + (probs.birth / probs.death).ln();
            let accept = rng.open01().ln() < log_a;
            if accept {
                *jumps = proposal;
            }
            stats.record(mv, accept);
        }
        Move::Relocate => {
            if t < 2 {
                stats.record(mv, false);
                return;
            }
            let a = uniform_index(rng, t);
            let mut b = uniform_index(rng, t - 1);
            if b >= a {
                b += 1;
            }
            let mut eps = vec![0.0; d];
            kernel.relocate_step(rng, &mut eps);
            let mut proposal = jumps.clone();
            relocate(&mut proposal, z, a, b, &eps);
            let log_a = ln_joint_jumps(kernel, &proposal) - current;
            let accept = rng.open01().ln() < log_a;
            if accept {
                *jumps = proposal;
            }
            stats.record(mv, accept);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats;

    /// Integer-valued jumps on `{−10, …, 10}` with a fixed pmf.
    struct Lattice {
        pmf: Vec<f64>,
    }

    impl Lattice {
        fn new() -> Self {
            let raw: Vec<f64> = (-10..=10)
                .map(|k: i32| (-(k as f64 - 1.0).abs() / 2.5).exp())
                .collect();
            let s: f64 = raw.iter().sum();
            Self {
                pmf: raw.iter().map(|p| p / s).collect(),
            }
        }
    }

    impl JumpKernel for Lattice {
        fn ln_density(&self, y: &[f64]) -> f64 {
            let v = y[0];
            if v.fract() != 0.0 || v.abs() > 10.0 {
                return f64::NEG_INFINITY;
            }
            self.pmf[(v + 10.0) as usize].ln()
        }

        fn sample_into(&self, rng: &mut RngStream, out: &mut [f64]) {
            let u = rng.open01();
            let mut cum = 0.0;
            for (i, p) in self.pmf.iter().enumerate() {
                cum += p;
                if u < cum {
                    out[0] = i as f64 - 10.0;
                    return;
                }
            }
            out[0] = 10.0;
        }

        fn relocate_step(&self, rng: &mut RngStream, out: &mut [f64]) {
            let k = 1 + uniform_index(rng, 3) as i32;
            out[0] = if rng.open01() < 0.5 { k as f64 } else { -k as f64 };
        }
    }

    /// Exact `P(t | Z = z)` on the lattice by repeated discrete convolution.
    fn exact_count_law(lat: &Lattice, rate: f64, z: i64, t_max: usize) -> Vec<f64> {
        let mut power = lat.pmf.clone(); // support offset −10·t
        let mut law = Vec::new();
        let mut fact = 1.0;
        for t in 1..=t_max {
            if t > 1 {
                let mut next = vec![0.0; power.len() + lat.pmf.len() - 1];
                for (i, a) in power.iter().enumerate() {
                    for (j, b) in lat.pmf.iter().enumerate() {
                        next[i + j] += a * b;
                    }
                }
                power = next;
                fact *= t as f64;
            }
            let idx = z + 10 * t as i64;
            let p = if idx >= 0 && (idx as usize) < power.len() {
                power[idx as usize]
            } else {
                0.0
            };
            law.push(rate.powi(t as i32) / fact * p);
        }
        let s: f64 = law.iter().sum();
        law.iter().map(|p| p / s).collect()
    }

    #[test]
    fn lattice_count_law_matches_enumeration() {
        let lat = Lattice::new();
        let rate = 1.2;
        let z = 4.0;
        let exact = exact_count_law(&lat, rate, 4, 40);
        let probs = MoveProbs::default();
        let mut rng = RngStream::new(11, 0);
        let mut stats_ = MoveStats::default();
        let mut jumps = vec![vec![z]];
        let bins = 5;
        let mut observed = vec![0.0; bins];
        let draws = 20_000;
        let thin = 25;
        for _ in 0..500 {
            latent_step(&mut jumps, &[z], rate, &lat, &probs, &mut rng, &mut stats_);
        }
        for _ in 0..draws {
            for _ in 0..thin {
                latent_step(&mut jumps, &[z], rate, &lat, &probs, &mut rng, &mut stats_);
            }
            let s: f64 = jumps.iter().map(|y| y[0]).sum();
            assert_eq!(s, z);
            observed[(jumps.len() - 1).min(bins - 1)] += 1.0;
        }
        let mut expected: Vec<f64> = exact[..bins - 1].iter().map(|p| p * draws as f64).collect();
        expected.push((1.0 - exact[..bins - 1].iter().sum::<f64>()) * draws as f64);
        let res = stats::chi_square(&observed, &expected);
        assert!(res.p_value > 0.001, "{observed:?} vs {expected:?}: p = {}", res.p_value);
        assert!(stats_.rate(Move::Birth) > 0.05);
    }

    #[test]
    fn relocate_is_an_involution() {
        let z = [0.7, -1.1];
        let mut jumps = vec![vec![0.2, 0.3], vec![1.0, -2.0], vec![0.0, 0.0]];
        recompute_residual(&mut jumps, &z);
        let orig = jumps.clone();
        let eps = [0.37, -0.81];
        relocate(&mut jumps, &z, 0, 2, &eps);
        assert_ne!(jumps, orig);
        relocate(&mut jumps, &z, 0, 2, &[-eps[0], -eps[1]]);
        for (a, b) in jumps.iter().zip(&orig) {
            for k in 0..2 {
                assert!((a[k] - b[k]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn atoms_never_gain_jumps() {
        let sticks = StickState::new(vec![1.0], vec![vec![0.0]], vec![1.0]).unwrap();
        let kernel = MixtureKernel {
            sticks: &sticks,
            scale: 1.0,
        };
        let mut rng = RngStream::new(12, 0);
        let mut st = MoveStats::default();
        let mut jumps: Vec<Vec<f64>> = Vec::new();
        for _ in 0..1000 {
            latent_step(&mut jumps, &[0.0], 1.0, &kernel, &MoveProbs::default(), &mut rng, &mut st);
            assert!(jumps.is_empty());
        }
    }

    #[test]
    fn constraint_holds_after_many_moves() {
        let sample = IncrementSample::new(1, 1.0, vec![vec![2.5], vec![0.0], vec![-0.75]]).unwrap();
        let mut latent = LatentConfig::from_sample(&sample);
        assert_eq!(latent.counts(), vec![1, 0, 1]);
        let sticks = StickState::new(vec![0.5, 0.5], vec![vec![-1.0], vec![1.0]], vec![0.5]).unwrap();
        let kernel = MixtureKernel {
            sticks: &sticks,
            scale: 1.0,
        };
        let mut rng = RngStream::new(13, 0);
        let mut st = MoveStats::default();
        for _ in 0..5000 {
            for i in 0..sample.len() {
                let z = sample.values()[i].clone();
                latent_step(latent.increment_mut(i), &z, 1.0, &kernel, &MoveProbs::default(), &mut rng, &mut st);
            }
            assert!(latent.constraint_error(&sample) < 1e-9);
        }
        assert!(st.accepted.iter().all(|a| *a > 0));
    }

    #[test]
    fn move_probabilities_validated() {
        assert!(MoveProbs::default().validate().is_ok());
        let bad = MoveProbs {
            birth: 0.5,
            death: 0.0,
            relocate: 0.5,
        };
        assert!(bad.validate().is_err());
        let bad = MoveProbs {
            birth: 0.3,
            death: 0.3,
            relocate: 0.3,
        };
        assert!(bad.validate().is_err());
    }
}
