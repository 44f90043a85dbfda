//! Chain state, conditional updates and the driver loop.

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::likelihood::write_grid_csv;
use crate::model::{Grid, NormalMixture};
use crate::prior::{BaseFamily, LambdaPrior, Priors};
use crate::rng::RngStream;
use crate::simulate::IncrementSample;
use crate::stats;

use super::latent::{latent_step, LatentConfig, MixtureKernel, Move, MoveProbs, MoveStats};
use super::mixture::{gibbs_update, ln_prior_locations, StickState};

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct ChainConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub moves: MoveProbs,
    /// Relocate displacements are `N(0, s²Σ)` with `Σ` the current covariance.
    pub relocate_scale: f64,
    /// Latent moves per nonzero increment per sweep.
    pub latent_moves: usize,
    pub seed: u64,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self {
            iterations: 20_000,
            burn_in: 5_000,
            thin: 10,
            moves: MoveProbs::default(),
            relocate_scale: 1.0,
            latent_moves: 1,
            seed: 0,
        }
    }
}

impl ChainConfig {
    pub fn validate(&self) -> Result<()> {
        self.moves.validate()?;
        if self.iterations <= self.burn_in {
            return Err(Error::invalid("iterations must exceed burn_in"));
        }
        if self.thin == 0 {
            return Err(Error::invalid("thin must be at least 1"));
        }
        if !(self.relocate_scale > 0.0 && self.relocate_scale.is_finite()) {
            return Err(Error::invalid("relocate_scale must be positive"));
        }
        Ok(())
    }

    pub fn retained(&self) -> usize {
        (self.iterations - self.burn_in).div_ceil(self.thin)
    }

    fn keeps(&self, iter: usize) -> bool {
        iter >= self.burn_in && (iter - self.burn_in) % self.thin == 0
    }
}

/// Optional starting point for `λ` and the mixture.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct WarmStart {
    pub lambda: Option<f64>,
    pub mixture: Option<NormalMixture>,
}

#[derive(Clone, Debug)]
pub struct ChainState {
    pub lambda: f64,
    pub sticks: StickState,
    pub latent: LatentConfig,
    /// Component label of every latent jump, grouped by increment.
    pub allocations: Vec<Vec<usize>>,
    pub log_post: f64,
}

impl ChainState {
    pub fn mixture(&self) -> Result<NormalMixture> {
        self.sticks.to_mixture()
    }

    pub fn total_jumps(&self) -> usize {
        self.latent.total_jumps()
    }
}

fn check_inputs(sample: &IncrementSample, priors: &Priors) -> Result<()> {
    priors.validate()?;
    Error::check_dim(priors.dpm.dim(), sample.dim())?;
    if priors.dpm.base_family != BaseFamily::Gaussian {
        return Err(Error::Unsupported(
            "posterior sampling needs a Gaussian base measure".into(),
        ));
    }
    Ok(())
}

fn allocate(latent: &LatentConfig, sticks: &StickState, rng: &mut RngStream) -> Vec<Vec<usize>> {
    let mut scratch = Vec::new();
    (0..latent.len())
        .map(|i| {
            latent
                .jumps(i)
                .iter()
                .map(|y| sticks.sample_label(y, rng, &mut scratch))
                .collect()
        })
        .collect()
}

/// `λ` at the prior median, mixture from a prior draw, one jump per nonzero increment.
pub fn init_chain(
    sample: &IncrementSample,
    priors: &Priors,
    rng: &mut RngStream,
) -> Result<ChainState> {
    init_chain_with(sample, priors, &WarmStart::default(), rng)
}

pub fn init_chain_with(
    sample: &IncrementSample,
    priors: &Priors,
    warm: &WarmStart,
    rng: &mut RngStream,
) -> Result<ChainState> {
    check_inputs(sample, priors)?;
    let lambda = match warm.lambda {
        Some(l) => {
            if !(priors.lambda.logpdf(l) > f64::NEG_INFINITY) {
                return Err(Error::invalid(format!(
                    "warm-start lambda {l} is outside the prior support [{}, {}]",
                    priors.lambda.lo(),
                    priors.lambda.hi()
                )));
            }
            l
        }
        None => priors.lambda.median(),
    };
    let draw = priors.dpm.sample_components(rng);
    let sticks = match &warm.mixture {
        Some(m) => {
            Error::check_dim(sample.dim(), m.dim())?;
            StickState::from_mixture(m, &priors.dpm, rng)?
        }
        None => StickState::from_draw(draw)?,
    };
    let latent = LatentConfig::from_sample(sample);
    let allocations = allocate(&latent, &sticks, rng);
    let mut state = ChainState {
        lambda,
        sticks,
        latent,
        allocations,
        log_post: 0.0,
    };
    state.log_post = ln_posterior(&state, sample, priors);
    Ok(state)
}

/// Unnormalized log posterior of `(λ, latent jumps, locations)` given the
/// data, with the jump density evaluated marginally over labels.
pub fn ln_posterior(state: &ChainState, sample: &IncrementSample, priors: &Priors) -> f64 {
    let rate = state.lambda * sample.mesh();
    let mut lp = priors.lambda.logpdf(state.lambda);
    for i in 0..state.latent.len() {
        let js = state.latent.jumps(i);
        let t = js.len();
        let ln_fact: f64 = (2..=t).map(|k| (k as f64).ln()).sum();
        lp += t as f64 * rate.ln() - rate - ln_fact;
        lp += js.iter().map(|y| state.sticks.ln_density(y)).sum::<f64>();
    }
    lp + ln_prior_locations(&state.sticks, &priors.dpm)
}

pub fn update_latent(
    state: &mut ChainState,
    sample: &IncrementSample,
    config: &ChainConfig,
    rng: &mut RngStream,
    stats: &mut MoveStats,
) {
    let rate = state.lambda * sample.mesh();
    let kernel = MixtureKernel {
        sticks: &state.sticks,
        scale: config.relocate_scale,
    };
    for (i, z) in sample.values().iter().enumerate() {
        let jumps = state.latent.increment_mut(i);
        for _ in 0..config.latent_moves {
            latent_step(jumps, z, rate, &kernel, &config.moves, rng, stats);
        }
    }
}

/// Slice sampler (shrinkage from the full support) for the density
/// `∝ λ^s e^{−exposure·λ} π₁(λ)` on `[λ̲, λ̄]`.
pub fn slice_lambda(
    current: f64,
    s: usize,
    exposure: f64,
    prior: &LambdaPrior,
    rng: &mut RngStream,
) -> f64 {
    let f = |x: f64| s as f64 * x.ln() - exposure * x + prior.logpdf(x);
    let level = f(current) + rng.open01().ln();
    let (mut lo, mut hi) = (prior.lo(), prior.hi());
    loop {
        let x = lo + rng.open01() * (hi - lo);
        if f(x) > level {
            return x;
        }
        if x < current {
            lo = x;
        } else {
            hi = x;
        }
        if hi - lo < 1e-14 * current.max(1.0) {
            return current;
        }
    }
}

pub fn update_lambda(
    state: &mut ChainState,
    sample: &IncrementSample,
    prior: &LambdaPrior,
    rng: &mut RngStream,
) {
    let exposure = sample.len() as f64 * sample.mesh();
    state.lambda = slice_lambda(state.lambda, state.total_jumps(), exposure, prior, rng);
}

pub fn update_mixture(state: &mut ChainState, priors: &Priors, rng: &mut RngStream) -> Result<()> {
    let (sticks, labels) = {
        let pooled = state.latent.pooled();
        gibbs_update(&state.sticks, &pooled, &priors.dpm, rng)?
    };
    let mut it = labels.into_iter();
    state.allocations = state
        .latent
        .counts()
        .iter()
        .map(|&c| it.by_ref().take(c).collect())
        .collect();
    state.sticks = sticks;
    Ok(())
}

/// One full sweep: latent jumps, intensity, mixture.
pub(crate) fn sweep(
    state: &mut ChainState,
    sample: &IncrementSample,
    priors: &Priors,
    config: &ChainConfig,
    rng: &mut RngStream,
    stats: &mut MoveStats,
) -> Result<()> {
    update_latent(state, sample, config, rng, stats);
    update_lambda(state, sample, &priors.lambda, rng);
    update_mixture(state, priors, rng)?;
    state.log_post = ln_posterior(state, sample, priors);
    Ok(())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChainRecord {
    pub iter: usize,
    pub lambda: f64,
    pub jump_count_total: usize,
    pub mixture: NormalMixture,
    pub log_post: f64,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct Acceptance {
    pub birth: f64,
    pub death: f64,
    pub relocate: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChainDiagnostics {
    pub acceptance: Acceptance,
    pub ess_lambda: f64,
    pub lambda_mean: f64,
    pub lambda_mc_se: f64,
    pub retained: usize,
    pub iterations_run: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub runtime_seconds: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub abort: Option<String>,
}

#[derive(Clone, Debug)]
pub struct ChainOutput {
    pub records: Vec<ChainRecord>,
    pub diagnostics: ChainDiagnostics,
    pub move_stats: MoveStats,
    /// Final state, or the offending state when the chain aborted.
    pub last_state: ChainState,
}

impl ChainOutput {
    pub fn aborted(&self) -> bool {
        self.diagnostics.abort.is_some()
    }

    pub fn lambda_trace(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.lambda).collect()
    }

    pub fn lambda_mean(&self) -> f64 {
        stats::mean(&self.lambda_trace())
    }

    /// JSONL, one retained state per line.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }
}

fn diagnostics(
    records: &[ChainRecord],
    stats_: &MoveStats,
    iterations_run: usize,
    runtime: Option<f64>,
    abort: Option<String>,
) -> ChainDiagnostics {
    let lam: Vec<f64> = records.iter().map(|r| r.lambda).collect();
    let (mean, ess, se) = if lam.is_empty() {
        (f64::NAN, 0.0, f64::NAN)
    } else {
        let ess = stats::effective_sample_size(&lam);
        let mean = stats::mean(&lam);
        (mean, ess, (stats::variance(&lam) / ess.max(1.0)).sqrt())
    };
    ChainDiagnostics {
        acceptance: Acceptance {
            birth: stats_.rate(Move::Birth),
            death: stats_.rate(Move::Death),
            relocate: stats_.rate(Move::Relocate),
        },
        ess_lambda: ess,
        lambda_mean: mean,
        lambda_mc_se: se,
        retained: records.len(),
        iterations_run,
        runtime_seconds: runtime,
        abort,
    }
}

/// Runs one chain from `init`. A non-finite log posterior stops the chain;
/// the output then carries the records so far and the reason in
/// `diagnostics.abort`.
pub fn run_chain_from(
    mut state: ChainState,
    sample: &IncrementSample,
    priors: &Priors,
    config: &ChainConfig,
    rng: &mut RngStream,
    record_timing: bool,
) -> Result<ChainOutput> {
    config.validate()?;
    check_inputs(sample, priors)?;
    let start = Instant::now();
    let mut stats_ = MoveStats::default();
    let mut records = Vec::with_capacity(config.retained());
    let mut abort = None;
    let mut iterations_run = 0;
    for iter in 0..config.iterations {
        let step = sweep(&mut state, sample, priors, config, rng, &mut stats_);
        iterations_run = iter + 1;
        if let Err(e) = step {
            abort = Some(format!("iteration {iter}: {e}"));
            break;
        }
        if !state.log_post.is_finite() {
            abort = Some(format!(
                "iteration {iter}: non-finite log posterior (lambda = {}, jumps = {})",
                state.lambda,
                state.total_jumps()
            ));
            break;
        }
        if config.keeps(iter) {
            records.push(ChainRecord {
                iter,
                lambda: state.lambda,
                jump_count_total: state.total_jumps(),
                mixture: state.mixture()?,
                log_post: state.log_post,
            });
        }
    }
    let runtime = record_timing.then(|| start.elapsed().as_secs_f64());
    Ok(ChainOutput {
        diagnostics: diagnostics(&records, &stats_, iterations_run, runtime, abort),
        records,
        move_stats: stats_,
        last_state: state,
    })
}

/// Initializes and runs a chain on stream `stream` of `config.seed`.
pub fn run_chain(
    sample: &IncrementSample,
    priors: &Priors,
    config: &ChainConfig,
    warm: &WarmStart,
    stream: u64,
) -> Result<ChainOutput> {
    config.validate()?;
    let mut rng = RngStream::new(config.seed, stream);
    let state = init_chain_with(sample, priors, warm, &mut rng)?;
    run_chain_from(state, sample, priors, config, &mut rng, false)
}

/// Independent chains on streams `0..starts.len()`, run in parallel.
pub fn run_chains(
    sample: &IncrementSample,
    priors: &Priors,
    config: &ChainConfig,
    starts: &[WarmStart],
) -> Result<Vec<ChainOutput>> {
    starts
        .par_iter()
        .enumerate()
        .map(|(k, w)| run_chain(sample, priors, config, w, k as u64))
        .collect()
}

/// Pointwise posterior mean of the jump density with 5% / 95% bands.
#[derive(Clone, Debug)]
pub struct PosteriorDensity {
    pub grid: Grid,
    pub mean: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl PosteriorDensity {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        write_grid_csv(
            &self.grid,
            &[("mean", &self.mean), ("q05", &self.lower), ("q95", &self.upper)],
            w,
        )
    }
}

pub fn posterior_mean_density(mixtures: &[NormalMixture], grid: &Grid) -> Result<PosteriorDensity> {
    grid.validate()?;
    let Some(first) = mixtures.first() else {
        return Err(Error::invalid("at least one retained state is required"));
    };
    Error::check_dim(first.dim(), grid.dim)?;
    let nodes = grid.nodes();
    let per_draw: Vec<Vec<f64>> = mixtures
        .par_iter()
        .map(|m| nodes.iter().map(|x| m.ln_density_unchecked(x).exp()).collect())
        .collect();
    let n = per_draw.len();
    let mut mean = vec![0.0; nodes.len()];
    let mut lower = vec![0.0; nodes.len()];
    let mut upper = vec![0.0; nodes.len()];
    let mut column = vec![0.0; n];
    for j in 0..nodes.len() {
        for (k, d) in per_draw.iter().enumerate() {
            column[k] = d[j];
        }
        mean[j] = column.iter().sum::<f64>() / n as f64;
        column.sort_by(f64::total_cmp);
        lower[j] = stats::quantile_sorted(&column, 0.05);
        upper[j] = stats::quantile_sorted(&column, 0.95);
    }
    Ok(PosteriorDensity {
        grid: grid.clone(),
        mean,
        lower,
        upper,
    })
}
