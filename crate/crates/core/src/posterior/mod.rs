//! Data-augmentation MCMC for the posterior of `(λ, r)`.
//!
//! Each sweep updates the latent jumps of every increment (marginally over
//! component labels), then `λ` by slice sampling from
//! `λ^S e^{−nΔλ} π₁(λ)`, then the stick-breaking mixture by blocked Gibbs.

mod chain;
mod geweke;
mod latent;
mod mixture;

pub use chain::{
    init_chain, init_chain_with, ln_posterior, posterior_mean_density, run_chain, run_chain_from, run_chains,
    slice_lambda, update_lambda, update_latent, update_mixture, Acceptance, ChainConfig,
    ChainDiagnostics, ChainOutput, ChainRecord, ChainState, PosteriorDensity, WarmStart,
};
pub use geweke::{geweke_test, GewekeConfig, GewekeStatistic};
pub use latent::{
    latent_step, recompute_residual, relocate, JumpKernel, LatentConfig, MixtureKernel, Move,
    MoveProbs, MoveStats,
};
pub use mixture::{gibbs_update, StickState};
