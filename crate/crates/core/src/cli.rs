//! Command-line entry points: `simulate`, `fit`, `metrics`, `rate-study`.
//!
//! Every command writes a manifest JSON next to its outputs with the fully
//! resolved configuration and the SHA-256 of every input file. Outputs
//! depend only on inputs and seeds, so reruns are byte-identical.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::metrics::{self, MetricsConfig};
use crate::model::{CppModel, Grid, NormalMixture};
use crate::posterior::{self, ChainConfig, ChainOutput, WarmStart};
use crate::prior::Priors;
use crate::rng::RngStream;
use crate::simulate::{format_f64, simulate_increments, IncrementSample, SampleSidecar};
use crate::stats;

#[derive(Parser, Debug)]
#[command(name = "decompound", version, about = "Bayesian decompounding of compound Poisson processes")]
pub struct Cli {
    /// Master seed; every random stream is derived from it.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Directory for all outputs.
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Simulate increments of a compound Poisson process.
    Simulate(SimulateArgs),
    /// Run the posterior sampler on an increment CSV.
    Fit(FitArgs),
    /// Certify the divergence inequalities on a model pair or a random sweep.
    Metrics(MetricsArgs),
    /// Simulate, fit and score over a range of sample sizes.
    RateStudy(RateStudyArgs),
}

#[derive(Args, Debug)]
pub struct ModelArgs {
    /// Model JSON `{"lambda": .., "jumps": <mixture>}`; overrides --lambda/--jumps.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub lambda: Option<f64>,
    /// `gauss:MEAN,VAR` (isotropic) or `mix:FILE.json`.
    #[arg(long, default_value = "gauss:0,1")]
    pub jumps: String,
    #[arg(long, default_value_t = 1)]
    pub dim: usize,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 1.0)]
    pub mesh: f64,
    /// Output CSV name inside the output directory.
    #[arg(long, default_value = "data.csv")]
    pub out: String,
}

#[derive(Args, Debug, Clone)]
pub struct ChainArgs {
    /// Prior JSON; defaults to the built-in prior for the data dimension.
    #[arg(long)]
    pub prior: Option<PathBuf>,
    /// Chain configuration JSON.
    #[arg(long)]
    pub chain: Option<PathBuf>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub burn_in: Option<usize>,
    #[arg(long)]
    pub thin: Option<usize>,
    /// Posterior-density grid `LO,HI,POINTS` (per axis).
    #[arg(long)]
    pub grid: Option<String>,
}

#[derive(Args, Debug)]
pub struct FitArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    pub mesh: f64,
    /// Dimension assumed when the data file is empty.
    #[arg(long, default_value_t = 1)]
    pub dim: usize,
    /// Increments with every |coordinate| <= tol are treated as exact zeros.
    #[arg(long, default_value_t = 0.0)]
    pub zero_tol: f64,
    /// Warm-start JSON `{"lambda": .., "mixture": <mixture>}`.
    #[arg(long)]
    pub warm_start: Option<PathBuf>,
    #[command(flatten)]
    pub chain: ChainArgs,
    /// Output file prefix.
    #[arg(long, default_value = "fit")]
    pub prefix: String,
    /// Include wall-clock runtime in the diagnostics (breaks byte-identity).
    #[arg(long)]
    pub record_timing: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum MethodArg {
    Quadrature,
    MonteCarlo,
}

impl From<MethodArg> for metrics::Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Quadrature => metrics::Method::Quadrature,
            MethodArg::MonteCarlo => metrics::Method::MonteCarlo,
        }
    }
}

#[derive(Args, Debug)]
pub struct MetricsArgs {
    /// Two model JSON files.
    #[arg(long, num_args = 2, value_names = ["MODEL0", "MODEL"], conflicts_with = "sweep")]
    pub pair: Option<Vec<PathBuf>>,
    /// Number of random pairs.
    #[arg(long)]
    pub sweep: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub dim: usize,
    /// Intensity interval `LO,HI` for the constant and the sweep.
    #[arg(long, default_value = "0.5,2")]
    pub bounds: String,
    #[arg(long, value_enum, default_value_t = MethodArg::Quadrature)]
    pub method: MethodArg,
    #[arg(long)]
    pub mc_draws: Option<usize>,
    #[arg(long, default_value = "metrics")]
    pub prefix: String,
}

#[derive(Args, Debug)]
pub struct RateStudyArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Sample sizes, comma separated.
    #[arg(long, default_value = "50,200,800")]
    pub ns: String,
    #[arg(long, default_value_t = 5)]
    pub replicates: usize,
    #[arg(long, default_value_t = 1.0)]
    pub mesh: f64,
    #[command(flatten)]
    pub chain: ChainArgs,
    #[arg(long, default_value = "rate_study")]
    pub prefix: String,
}

fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

struct Inputs(BTreeMap<String, String>);

impl Inputs {
    fn new() -> Self {
        Self(BTreeMap::new())
    }

    fn add(&mut self, path: &Path) -> Result<()> {
        self.0.insert(path.display().to_string(), sha256_file(path)?);
        Ok(())
    }
}

fn manifest(command: &str, seed: u64, config: Value, inputs: &Inputs) -> Value {
    json!({
        "command": command,
        "seed": seed,
        "version": env!("CARGO_PKG_VERSION"),
        "config": config,
        "inputs": inputs.0,
    })
}

/// Parses `gauss:MEAN,VAR` or `mix:FILE.json`.
fn parse_jumps(spec: &str, dim: usize, inputs: Option<&mut Inputs>) -> Result<NormalMixture> {
    if let Some(rest) = spec.strip_prefix("gauss:") {
        let parts: Vec<&str> = rest.split(',').collect();
        if parts.len() != 2 {
            return Err(Error::invalid(format!("expected gauss:MEAN,VAR, got '{spec}'")));
        }
        let num = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| Error::invalid(format!("bad number '{s}': {e}")))
        };
        let (mu, var) = (num(parts[0])?, num(parts[1])?);
        if dim == 0 {
            return Err(Error::invalid("dimension must be positive"));
        }
        let cov = (0..dim * dim)
            .map(|k| if k % (dim + 1) == 0 { var } else { 0.0 })
            .collect();
        return NormalMixture::gaussian(vec![mu; dim], cov);
    }
    if let Some(file) = spec.strip_prefix("mix:") {
        let path = Path::new(file);
        if let Some(inp) = inputs {
            inp.add(path)?;
        }
        let m: NormalMixture = read_json(path)?;
        Error::check_dim(dim, m.dim())?;
        return Ok(m);
    }
    Err(Error::invalid(format!(
        "jump spec must be gauss:MEAN,VAR or mix:FILE.json, got '{spec}'"
    )))
}

fn resolve_model(args: &ModelArgs, inputs: &mut Inputs) -> Result<CppModel> {
    if let Some(path) = &args.model {
        inputs.add(path)?;
        let m: CppModel = read_json(path)?;
        m.validate()?;
        return Ok(m);
    }
    let lambda = args
        .lambda
        .ok_or_else(|| Error::invalid("--lambda or --model is required"))?;
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::invalid(format!("lambda must be positive, got {lambda}")));
    }
    CppModel::new(lambda, parse_jumps(&args.jumps, args.dim, Some(inputs))?)
}

fn parse_grid(spec: Option<&str>, dim: usize) -> Result<Grid> {
    let default = if dim == 1 { "-10,10,2001" } else { "-8,8,161" };
    let spec = spec.unwrap_or(default);
    let parts: Vec<&str> = spec.split(',').collect();
    if parts.len() != 3 {
        return Err(Error::invalid(format!("grid must be LO,HI,POINTS, got '{spec}'")));
    }
    let lo: f64 = parts[0].trim().parse().map_err(|_| Error::invalid("bad grid LO"))?;
    let hi: f64 = parts[1].trim().parse().map_err(|_| Error::invalid("bad grid HI"))?;
    let n: usize = parts[2].trim().parse().map_err(|_| Error::invalid("bad grid POINTS"))?;
    let g = Grid::new(vec![lo; dim], vec![hi; dim], n)?;
    g.validate()?;
    Ok(g)
}

fn parse_bounds(spec: &str) -> Result<(f64, f64)> {
    let parts: Vec<f64> = spec
        .split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|_| Error::invalid("bad bounds")))
        .collect::<Result<_>>()?;
    if parts.len() != 2 || !(parts[0] > 0.0 && parts[1] >= parts[0]) {
        return Err(Error::invalid("bounds must be LO,HI with 0 < LO <= HI"));
    }
    Ok((parts[0], parts[1]))
}

fn resolve_chain(args: &ChainArgs, seed: u64, inputs: &mut Inputs) -> Result<ChainConfig> {
    let mut cfg: ChainConfig = match &args.chain {
        Some(p) => {
            inputs.add(p)?;
            read_json(p)?
        }
        None => ChainConfig::default(),
    };
    cfg.seed = seed;
    if let Some(v) = args.iterations {
        cfg.iterations = v;
    }
    if let Some(v) = args.burn_in {
        cfg.burn_in = v;
    }
    if let Some(v) = args.thin {
        cfg.thin = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn resolve_priors(args: &ChainArgs, dim: usize, inputs: &mut Inputs) -> Result<Priors> {
    let p = match &args.prior {
        Some(path) => {
            inputs.add(path)?;
            read_json(path)?
        }
        None => Priors::default_for_dim(dim),
    };
    p.validate()?;
    Error::check_dim(dim, p.dpm.dim())?;
    Ok(p)
}

/// Parses arguments, configures the thread pool and runs the command.
pub fn run(cli: Cli) -> Result<()> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(Error::invalid("--threads must be positive"));
        }
        // a second initialization in the same process is harmless
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    fs::create_dir_all(&cli.out_dir)?;
    match &cli.command {
        Command::Simulate(a) => cmd_simulate(&cli, a),
        Command::Fit(a) => cmd_fit(&cli, a),
        Command::Metrics(a) => cmd_metrics(&cli, a),
        Command::RateStudy(a) => cmd_rate_study(&cli, a),
    }
}

pub fn cmd_simulate(cli: &Cli, args: &SimulateArgs) -> Result<()> {
    let mut inputs = Inputs::new();
    let model = resolve_model(&args.model, &mut inputs)?;
    if args.n == 0 {
        return Err(Error::invalid("--n must be positive"));
    }
    let mut rng = RngStream::new(cli.seed, 0);
    let sample = simulate_increments(&model, args.n, args.mesh, &mut rng)?;
    let out = cli.out_dir.join(&args.out);
    sample.write_csv(fs::File::create(&out)?)?;
    let sidecar = SampleSidecar {
        lambda_true: Some(model.lambda),
        mesh: args.mesh,
        seed: Some(cli.seed),
        model: Some(model.clone()),
    };
    let config = json!({ "n": args.n, "sample": sidecar, "output": args.out });
    let mut side = out.clone().into_os_string();
    side.push(".json");
    write_json(Path::new(&side), &manifest("simulate", cli.seed, config, &inputs))
}

fn fit_outputs(cli: &Cli, prefix: &str, partial: bool) -> [PathBuf; 4] {
    let suffix = if partial { ".partial" } else { "" };
    ["chain.jsonl", "diagnostics.json", "density.csv", "manifest.json"]
        .map(|n| cli.out_dir.join(format!("{prefix}_{n}{suffix}")))
}

pub fn cmd_fit(cli: &Cli, args: &FitArgs) -> Result<()> {
    let mut inputs = Inputs::new();
    inputs.add(&args.data)?;
    let sample = IncrementSample::read_csv(fs::File::open(&args.data)?, args.mesh, args.dim)?
        .snap_zeros(args.zero_tol);
    let priors = resolve_priors(&args.chain, sample.dim(), &mut inputs)?;
    let config = resolve_chain(&args.chain, cli.seed, &mut inputs)?;
    let grid = parse_grid(args.chain.grid.as_deref(), sample.dim())?;
    let warm: WarmStart = match &args.warm_start {
        Some(p) => {
            inputs.add(p)?;
            read_json(p)?
        }
        None => WarmStart::default(),
    };
    let mut rng = RngStream::new(config.seed, 0);
    let state = posterior::init_chain_with(&sample, &priors, &warm, &mut rng)?;
    let out = posterior::run_chain_from(state, &sample, &priors, &config, &mut rng, args.record_timing)?;
    let partial = out.aborted();
    let [chain_p, diag_p, dens_p, man_p] = fit_outputs(cli, &args.prefix, partial);
    out.write_jsonl(std::io::BufWriter::new(fs::File::create(&chain_p)?))?;
    let mut diag = serde_json::to_value(&out.diagnostics)?;
    if partial {
        diag["state_dump"] = json!({
            "lambda": out.last_state.lambda,
            "jump_counts": out.last_state.latent.counts(),
            "log_post": format!("{}", out.last_state.log_post),
            "sigma": out.last_state.sticks.sigma(),
        });
    }
    write_json(&diag_p, &diag)?;
    if !out.records.is_empty() {
        let mixtures: Vec<NormalMixture> = out.records.iter().map(|r| r.mixture.clone()).collect();
        posterior::posterior_mean_density(&mixtures, &grid)?.write_csv(fs::File::create(&dens_p)?)?;
    }
    let resolved = json!({
        "data": { "n": sample.len(), "dim": sample.dim(), "mesh": sample.mesh(),
                  "zeros": sample.zero_count(), "zero_tol": args.zero_tol },
        "priors": priors,
        "chain": config,
        "grid": { "lo": grid.lo, "hi": grid.hi, "points_per_axis": grid.points_per_axis },
        "warm_start": warm,
        "prior_reproduction": sample.is_empty(),
    });
    write_json(&man_p, &manifest("fit", cli.seed, resolved, &inputs))?;
    if let Some(reason) = &out.diagnostics.abort {
        return Err(Error::Numerical(format!("chain aborted, partial outputs kept: {reason}")));
    }
    Ok(())
}

pub fn cmd_metrics(cli: &Cli, args: &MetricsArgs) -> Result<()> {
    let mut inputs = Inputs::new();
    let bounds = parse_bounds(&args.bounds)?;
    let mut config = MetricsConfig {
        mc_seed: cli.seed,
        ..MetricsConfig::default()
    };
    if let Some(n) = args.mc_draws {
        config.mc_draws = n;
    }
    let method: metrics::Method = args.method.into();
    let pairs: Vec<(CppModel, CppModel)> = match (&args.pair, args.sweep) {
        (Some(files), None) => {
            let mut ms = Vec::new();
            for f in files {
                inputs.add(f)?;
                let m: CppModel = read_json(f)?;
                m.validate()?;
                ms.push(m);
            }
            Error::check_dim(ms[0].dim(), ms[1].dim())?;
            vec![(ms[0].clone(), ms[1].clone())]
        }
        (None, Some(n)) => (0..n)
            .map(|i| metrics::random_pair(args.dim, bounds, &mut RngStream::new(cli.seed, i as u64)))
            .collect::<Result<_>>()?,
        _ => return Err(Error::invalid("exactly one of --pair or --sweep is required")),
    };
    let results: Vec<(metrics::LemmaOneReport, metrics::DataProcessingReport)> = pairs
        .par_iter()
        .map(|(a, b)| {
            Ok((
                metrics::check_lemma1(a, b, bounds, method, &config)?,
                metrics::check_data_processing(a, b, method, &config)?,
            ))
        })
        .collect::<Result<_>>()?;
    let lemma: Vec<metrics::LemmaOneReport> = results.iter().map(|r| r.0.clone()).collect();
    let rows = metrics::certification_rows(&lemma);
    let base = |n: &str| cli.out_dir.join(format!("{}_{n}", args.prefix));
    metrics::write_certification_csv(&rows, fs::File::create(base("certification.csv"))?)?;

    let mut wr = csv::Writer::from_path(base("data_processing.csv"))?;
    wr.write_record(["pair_id", "check", "lhs", "rhs", "margin", "error", "pass"])?;
    for (i, (_, dp)) in results.iter().enumerate() {
        for r in &dp.records {
            wr.write_record([
                i.to_string(),
                r.id.clone(),
                format_f64(r.lhs),
                format_f64(r.rhs),
                format_f64(r.margin),
                format_f64(r.error),
                r.pass.to_string(),
            ])?;
        }
    }
    wr.flush()?;

    let report: Vec<Value> = pairs
        .iter()
        .zip(&results)
        .map(|((a, b), (l, d))| json!({ "model0": a, "model": b, "lemma": l, "data_processing": d }))
        .collect();
    let all_pass = lemma.iter().all(|r| r.all_pass());
    write_json(&base("report.json"), &json!({ "all_pass": all_pass, "pairs": report }))?;
    let resolved = json!({
        "bounds": [bounds.0, bounds.1],
        "dim": pairs[0].0.dim(),
        "method": config_method_name(method),
        "pairs": pairs.len(),
        "metrics": config,
    });
    write_json(&base("manifest.json"), &manifest("metrics", cli.seed, resolved, &inputs))
}

fn config_method_name(m: metrics::Method) -> &'static str {
    match m {
        metrics::Method::Quadrature => "quadrature",
        metrics::Method::MonteCarlo => "monte_carlo",
    }
}

/// One simulated-and-fitted replicate of the rate study.
#[derive(Clone, Debug, Serialize)]
pub struct RateRow {
    pub n: usize,
    pub replicate: usize,
    pub hellinger: f64,
    pub lambda_mean: f64,
    pub lambda_abs_error: f64,
    pub ess_lambda: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct RateSummary {
    pub ns: Vec<usize>,
    pub median_hellinger: Vec<f64>,
    pub median_lambda_abs_error: Vec<f64>,
    /// Least-squares slope of log median Hellinger error on log n; null for one n.
    pub slope: Option<f64>,
}

/// Runs every `(n, replicate)` cell: simulate, fit, score. Cell `k` uses
/// data stream `2k` and chain stream `2k + 1` of `seed`.
pub fn rate_study(
    truth: &CppModel,
    ns: &[usize],
    replicates: usize,
    mesh: f64,
    priors: &Priors,
    config: &ChainConfig,
    grid: &Grid,
) -> Result<(Vec<RateRow>, RateSummary)> {
    let cells: Vec<(usize, usize)> = ns
        .iter()
        .flat_map(|&n| (0..replicates).map(move |r| (n, r)))
        .collect();
    let truth_vals: Vec<f64> = grid
        .nodes()
        .iter()
        .map(|x| truth.jumps.ln_density_unchecked(x).exp())
        .collect();
    let rows: Vec<RateRow> = cells
        .par_iter()
        .enumerate()
        .map(|(k, &(n, replicate))| {
            let mut rng = RngStream::new(config.seed, 2 * k as u64);
            let sample = simulate_increments(truth, n, mesh, &mut rng)?;
            let out: ChainOutput =
                posterior::run_chain(&sample, priors, config, &WarmStart::default(), 2 * k as u64 + 1)?;
            if let Some(reason) = &out.diagnostics.abort {
                return Err(Error::Numerical(format!("n = {n}, replicate {replicate}: {reason}")));
            }
            let mixtures: Vec<NormalMixture> = out.records.iter().map(|r| r.mixture.clone()).collect();
            let pd = posterior::posterior_mean_density(&mixtures, grid)?;
            let h = metrics::hellinger_on_grid(grid, &truth_vals, &pd.mean)?;
            let lm = out.lambda_mean();
            Ok(RateRow {
                n,
                replicate,
                hellinger: h,
                lambda_mean: lm,
                lambda_abs_error: (lm - truth.lambda).abs(),
                ess_lambda: out.diagnostics.ess_lambda,
            })
        })
        .collect::<Result<_>>()?;
    let mut median_h = Vec::new();
    let mut median_l = Vec::new();
    for &n in ns {
        let hs: Vec<f64> = rows.iter().filter(|r| r.n == n).map(|r| r.hellinger).collect();
        let ls: Vec<f64> = rows.iter().filter(|r| r.n == n).map(|r| r.lambda_abs_error).collect();
        median_h.push(stats::median(&hs));
        median_l.push(stats::median(&ls));
    }
    let lx: Vec<f64> = ns.iter().map(|n| (*n as f64).ln()).collect();
    let ly: Vec<f64> = median_h.iter().map(|h| h.ln()).collect();
    let summary = RateSummary {
        ns: ns.to_vec(),
        median_hellinger: median_h,
        median_lambda_abs_error: median_l,
        slope: stats::ols_slope(&lx, &ly),
    };
    Ok((rows, summary))
}

pub fn cmd_rate_study(cli: &Cli, args: &RateStudyArgs) -> Result<()> {
    let mut inputs = Inputs::new();
    let truth = resolve_model(&args.model, &mut inputs)?;
    let mut ns: Vec<usize> = args
        .ns
        .split(',')
        .map(|s| s.trim().parse::<usize>().map_err(|_| Error::invalid(format!("bad n '{s}'"))))
        .collect::<Result<_>>()?;
    ns.sort_unstable();
    ns.dedup();
    if ns.is_empty() || ns[0] == 0 || args.replicates == 0 {
        return Err(Error::invalid("need positive sample sizes and replicates"));
    }
    let priors = resolve_priors(&args.chain, truth.dim(), &mut inputs)?;
    let config = resolve_chain(&args.chain, cli.seed, &mut inputs)?;
    let grid = parse_grid(args.chain.grid.as_deref(), truth.dim())?;
    let (rows, summary) = rate_study(&truth, &ns, args.replicates, args.mesh, &priors, &config, &grid)?;

    let base = |n: &str| cli.out_dir.join(format!("{}_{n}", args.prefix));
    let mut wr = csv::Writer::from_path(base("results.csv"))?;
    wr.write_record(["n", "replicate", "hellinger", "lambda_mean", "lambda_abs_error", "ess_lambda"])?;
    for r in &rows {
        wr.write_record([
            r.n.to_string(),
            r.replicate.to_string(),
            format_f64(r.hellinger),
            format_f64(r.lambda_mean),
            format_f64(r.lambda_abs_error),
            format_f64(r.ess_lambda),
        ])?;
    }
    wr.flush()?;
    write_json(&base("summary.json"), &summary)?;
    let resolved = json!({
        "truth": truth,
        "ns": ns,
        "replicates": args.replicates,
        "mesh": args.mesh,
        "priors": priors,
        "chain": config,
        "grid": { "lo": grid.lo, "hi": grid.hi, "points_per_axis": grid.points_per_axis },
    });
    write_json(&base("manifest.json"), &manifest("rate-study", cli.seed, resolved, &inputs))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jump_shorthand() {
        let m = parse_jumps("gauss:0.5,2", 2, None).unwrap();
        assert_eq!(m.dim(), 2);
        assert_eq!(m.means()[0], vec![0.5, 0.5]);
        assert_eq!(m.covariance(0), &[2.0, 0.0, 0.0, 2.0]);
        assert!(parse_jumps("gauss:1", 1, None).is_err());
        assert!(parse_jumps("cauchy:0,1", 1, None).is_err());
    }

    #[test]
    fn grid_and_bounds_parsing() {
        let g = parse_grid(Some("-5,5,11"), 1).unwrap();
        assert_eq!(g.points_per_axis, 11);
        assert!(parse_grid(Some("5,-5,11"), 1).is_err());
        assert_eq!(parse_bounds("0.5,2").unwrap(), (0.5, 2.0));
        assert!(parse_bounds("2,1").is_err());
    }
}
