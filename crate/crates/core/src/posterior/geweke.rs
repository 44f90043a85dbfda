//! Successive-conditional ("getting it right") check of the full sampler.
//!
//! A forward simulator draws `(θ, latent, Z)` from the joint model. The
//! successive-conditional simulator alternates regenerating `(latent, Z)`
//! given `θ` with one MCMC sweep given `Z`. Both target the same joint law,
//! so the means of any test statistic must agree.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::prior::Priors;
use crate::rng::RngStream;
use crate::simulate::{is_atom, poisson_count, IncrementSample};
use crate::stats;

use super::chain::{ln_posterior, sweep, ChainConfig, ChainState};
use super::latent::{LatentConfig, MoveStats};
use super::mixture::StickState;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GewekeConfig {
    pub n: usize,
    pub mesh: f64,
    pub forward_draws: usize,
    pub iterations: usize,
    pub burn_in: usize,
    pub batches: usize,
    pub seed: u64,
    pub chain: ChainConfig,
}

impl Default for GewekeConfig {
    fn default() -> Self {
        Self {
            n: 3,
            mesh: 1.0,
            forward_draws: 40_000,
            iterations: 40_000,
            burn_in: 1_000,
            batches: 50,
            seed: 0,
            chain: ChainConfig {
                latent_moves: 3,
                ..ChainConfig::default()
            },
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GewekeStatistic {
    pub name: String,
    pub forward_mean: f64,
    pub forward_se: f64,
    pub chain_mean: f64,
    pub chain_se: f64,
    pub z: f64,
}

const NAMES: [&str; 10] = [
    "lambda",
    "lambda_sq",
    "ln_sigma",
    "inv_sigma",
    "jumps_total",
    "jumps_total_sq",
    "weighted_location",
    "weighted_location_sq",
    "lambda_times_jumps",
    "max_weight",
];

fn statistics(lambda: f64, sticks: &StickState, total_jumps: usize) -> [f64; 10] {
    let sigma = sticks.sigma()[0];
    let loc: f64 = sticks
        .weights()
        .iter()
        .zip(sticks.locations())
        .map(|(w, l)| w * l[0])
        .sum();
    let s = total_jumps as f64;
    let wmax = sticks.weights().iter().cloned().fold(0.0, f64::max);
    [
        lambda,
        lambda * lambda,
        sigma.ln(),
        1.0 / sigma,
        s,
        s * s,
        loc,
        loc * loc,
        lambda * s,
        wmax,
    ]
}

/// Draws latent jumps and increments given `(λ, sticks)`.
fn regenerate(
    lambda: f64,
    sticks: &StickState,
    n: usize,
    mesh: f64,
    rng: &mut RngStream,
) -> Result<(IncrementSample, Vec<Vec<Vec<f64>>>)> {
    let d = sticks.dim();
    let mut zs = Vec::with_capacity(n);
    let mut jumps = Vec::with_capacity(n);
    for _ in 0..n {
        let t = poisson_count(lambda * mesh, rng);
        let mut js = Vec::with_capacity(t);
        let mut z = vec![0.0; d];
        for _ in 0..t {
            let mut y = vec![0.0; d];
            sticks.sample_into(rng, &mut y);
            for a in 0..d {
                z[a] += y[a];
            }
            js.push(y);
        }
        if is_atom(&z) {
            js.clear();
        }
        zs.push(z);
        jumps.push(js);
    }
    Ok((IncrementSample::new(d, mesh, zs)?, jumps))
}

/// Runs both simulators on a one-dimensional model and returns one
/// z-score per statistic (batch-means standard error for the chain).
pub fn geweke_test(priors: &Priors, config: &GewekeConfig) -> Result<Vec<GewekeStatistic>> {
    priors.validate()?;
    let mut rng = RngStream::new(config.seed, 0);

    let mut forward: Vec<Vec<f64>> = vec![Vec::with_capacity(config.forward_draws); 10];
    for _ in 0..config.forward_draws {
        let lambda = priors.lambda.sample(&mut rng);
        let sticks = StickState::from_draw(priors.dpm.sample_components(&mut rng))?;
        let (_, jumps) = regenerate(lambda, &sticks, config.n, config.mesh, &mut rng)?;
        let total: usize = jumps.iter().map(|j| j.len()).sum();
        for (k, v) in statistics(lambda, &sticks, total).iter().enumerate() {
            forward[k].push(*v);
        }
    }

    let mut rng = RngStream::new(config.seed, 1);
    let lambda = priors.lambda.sample(&mut rng);
    let sticks = StickState::from_draw(priors.dpm.sample_components(&mut rng))?;
    let (sample, jumps) = regenerate(lambda, &sticks, config.n, config.mesh, &mut rng)?;
    let latent = LatentConfig::from_jumps(&sample, jumps)?;
    let mut state = ChainState {
        lambda,
        allocations: latent.counts().iter().map(|c| vec![0; *c]).collect(),
        sticks,
        latent,
        log_post: 0.0,
    };
    let mut move_stats = MoveStats::default();
    let mut chain: Vec<Vec<f64>> = vec![Vec::with_capacity(config.iterations); 10];
    for it in 0..config.burn_in + config.iterations {
        let (sample, jumps) =
            regenerate(state.lambda, &state.sticks, config.n, config.mesh, &mut rng)?;
        state.latent = LatentConfig::from_jumps(&sample, jumps)?;
        state.log_post = ln_posterior(&state, &sample, priors);
        sweep(&mut state, &sample, priors, &config.chain, &mut rng, &mut move_stats)?;
        if it >= config.burn_in {
            for (k, v) in statistics(state.lambda, &state.sticks, state.total_jumps())
                .iter()
                .enumerate()
            {
                chain[k].push(*v);
            }
        }
    }

    Ok(NAMES
        .iter()
        .enumerate()
        .map(|(k, name)| {
            let fm = stats::mean(&forward[k]);
            let fse = (stats::variance(&forward[k]) / forward[k].len() as f64).sqrt();
            let cm = stats::mean(&chain[k]);
            let cse = stats::batch_means_se(&chain[k], config.batches);
            GewekeStatistic {
                name: name.to_string(),
                forward_mean: fm,
                forward_se: fse,
                chain_mean: cm,
                chain_se: cse,
                z: (fm - cm) / (fse * fse + cse * cse).sqrt(),
            }
        })
        .collect())
}
