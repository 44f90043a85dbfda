//! Hellinger distance, Kullback–Leibler divergence and V-discrepancy for jump
//! laws `P_r`, increment laws `Q_{λ,r}` and path laws `R_{λ,r}`.
//!
//! Hellinger uses `h² = ∫(√p − √q)²`, so `h² ≤ 2`. Increment laws are
//! handled as an atom at zero plus a continuous part; the two contributions
//! are reported separately.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::likelihood::{DensityConfig, IncrementDensity};
use crate::model::{CppModel, Grid, NormalMixture};
use crate::rng::RngStream;
use crate::simulate::format_f64;

fn check_positive(x: f64, y: f64) -> Result<()> {
    if x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("scalar divergences need positive inputs, got ({x}, {y})")))
    }
}

fn k_raw(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        return y;
    }
    x * (x / y).ln() - x + y
}

fn v_raw(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    x * (x / y).ln().powi(2)
}

fn h_raw(x: f64, y: f64) -> f64 {
    (x.sqrt() - y.sqrt()).abs()
}

/// `K(x, y) = x log(x/y) − x + y`.
pub fn scalar_k(x: f64, y: f64) -> Result<f64> {
    check_positive(x, y)?;
    Ok(k_raw(x, y))
}

/// `V(x, y) = x log²(x/y)`.
pub fn scalar_v(x: f64, y: f64) -> Result<f64> {
    check_positive(x, y)?;
    Ok(v_raw(x, y))
}

/// `h(x, y) = |√x − √y|`.
pub fn scalar_h(x: f64, y: f64) -> Result<f64> {
    check_positive(x, y)?;
    Ok(h_raw(x, y))
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub enum Kind {
    #[serde(rename = "h")]
    Hellinger,
    #[serde(rename = "K")]
    Kl,
    #[serde(rename = "V")]
    V,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Quadrature,
    MonteCarlo,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct MetricsConfig {
    /// Observation mesh `Δ` for increment and path laws.
    pub mesh: f64,
    /// Trapezoid intervals per axis in one dimension.
    pub quad_intervals_1d: usize,
    /// Trapezoid intervals per axis in two dimensions.
    pub quad_intervals_2d: usize,
    /// Half-width of the quadrature box in standard deviations.
    pub sd_mult: f64,
    pub mc_draws: usize,
    pub mc_seed: u64,
    pub density: DensityConfig,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            mesh: 1.0,
            quad_intervals_1d: 4096,
            quad_intervals_2d: 256,
            sd_mult: 8.0,
            mc_draws: 1_000_000,
            mc_seed: 0,
            density: DensityConfig::default(),
        }
    }
}

impl MetricsConfig {
    fn intervals(&self, d: usize) -> usize {
        let n = if d == 1 {
            self.quad_intervals_1d
        } else {
            self.quad_intervals_2d
        };
        // even, so the half-resolution rule reuses every other node
        (n.max(4) + 1) & !1
    }
}

/// A divergence value with its numerical error.
///
/// For quadrature `error` is the difference between full- and
/// half-resolution rules plus truncation terms and `mc_std_error` is zero;
/// for Monte Carlo `error` equals `mc_std_error`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DivergenceEstimate {
    pub kind: Kind,
    pub value: f64,
    pub method: Method,
    pub mc_std_error: f64,
    pub error: f64,
    /// Atom contribution (increment laws only; squared for Hellinger).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub atom_part: Option<f64>,
    /// Continuous contribution (increment laws only; squared for Hellinger).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub continuous_part: Option<f64>,
}

/// Trapezoid rule at full and half resolution on a box, `d ≤ 2`.
fn quad_box<F>(lo: &[f64], hi: &[f64], n: usize, f: F) -> Result<(f64, f64)>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let d = lo.len();
    let grid = Grid::new(lo.to_vec(), hi.to_vec(), n + 1)?;
    let nodes = grid.nodes();
    let values: Vec<f64> = nodes.par_iter().map(|x| f(x)).collect();
    let fine = grid.integrate(&values);
    let coarse_grid = Grid::new(lo.to_vec(), hi.to_vec(), n / 2 + 1)?;
    let coarse_vals: Vec<f64> = if d == 1 {
        values.iter().step_by(2).cloned().collect()
    } else {
        let p = n + 1;
        let mut v = Vec::with_capacity((n / 2 + 1).pow(2));
        for i in (0..p).step_by(2) {
            for j in (0..p).step_by(2) {
                v.push(values[i * p + j]);
            }
        }
        v
    };
    let coarse = coarse_grid.integrate(&coarse_vals);
    Ok((fine, (fine - coarse).abs()))
}

/// Integrand `q0·g(ln q0 − ln q)` from log densities, with `0·anything = 0`.
fn integrand(kind: Kind, l0: f64, l1: f64) -> f64 {
    if l0 == f64::NEG_INFINITY {
        return match kind {
            Kind::Hellinger => l1.exp(),
            Kind::Kl => l1.exp(),
            Kind::V => 0.0,
        };
    }
    let p0 = l0.exp();
    match kind {
        Kind::Hellinger => {
            let a = (0.5 * l0).exp();
            let b = (0.5 * l1).exp();
            (a - b).powi(2)
        }
        // the extra `q − q0` term integrates to the mass difference and keeps
        // the integrand nonnegative
        Kind::Kl => p0 * (l0 - l1) - p0 + l1.exp(),
        Kind::V => p0 * (l0 - l1).powi(2),
    }
}

fn mixture_box(ms: &[&NormalMixture], sd_mult: f64) -> (Vec<f64>, Vec<f64>) {
    let d = ms[0].dim();
    let sd = ms.iter().map(|m| m.max_component_sd()).fold(0.0, f64::max);
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for m in ms {
        for mu in m.means() {
            for a in 0..d {
                lo[a] = lo[a].min(mu[a] - sd_mult * sd);
                hi[a] = hi[a].max(mu[a] + sd_mult * sd);
            }
        }
    }
    (lo, hi)
}

fn finish(kind: Kind, raw: f64, err: f64, method: Method, se: f64) -> DivergenceEstimate {
    let (value, error, mc) = if kind == Kind::Hellinger {
        let h2 = raw.max(0.0);
        let h = h2.sqrt();
        let scale = |e: f64| if h > 0.0 { (e / (2.0 * h)).min(e.sqrt()) } else { e.sqrt() };
        (h, scale(err), scale(se))
    } else {
        (raw, err, se)
    };
    DivergenceEstimate {
        kind,
        value,
        method,
        mc_std_error: mc,
        error,
        atom_part: None,
        continuous_part: None,
    }
}

/// Divergence between the jump laws `P_{r0}` and `P_r`.
pub fn divergence_p(
    kind: Kind,
    r0: &NormalMixture,
    r: &NormalMixture,
    method: Method,
    config: &MetricsConfig,
) -> Result<DivergenceEstimate> {
    Error::check_dim(r0.dim(), r.dim())?;
    let d = r0.dim();
    match method {
        Method::Quadrature => {
            if d > 2 {
                return Err(Error::Unsupported("quadrature needs d <= 2".into()));
            }
            let (lo, hi) = mixture_box(&[r0, r], config.sd_mult);
            let (v, e) = quad_box(&lo, &hi, config.intervals(d), |x| {
                integrand(kind, r0.ln_density_unchecked(x), r.ln_density_unchecked(x))
            })?;
            Ok(finish(kind, v, e + 1e-13 * (1.0 + v.abs()), method, 0.0))
        }
        Method::MonteCarlo => {
            let mut rng = RngStream::new(config.mc_seed, 0x5000);
            let pairs = (config.mc_draws / 2).max(2);
            let mut vals = Vec::with_capacity(pairs);
            let g = |x: &[f64]| {
                let l0 = r0.ln_density_unchecked(x);
                let l1 = r.ln_density_unchecked(x);
                mc_term(kind, l0, l1)
            };
            for _ in 0..pairs {
                let (a, b) = r0.sample_antithetic(&mut rng);
                vals.push(0.5 * (g(&a) + g(&b)));
            }
            let (m, se) = mean_se(&vals);
            Ok(finish(kind, m, se, method, se))
        }
    }
}

/// Per-draw integrand under `q0`: the log ratio moments or `(1 − √(q/q0))²`.
fn mc_term(kind: Kind, l0: f64, l1: f64) -> f64 {
    let lr = l0 - l1;
    match kind {
        Kind::Kl => lr - 1.0 + (-lr).exp(),
        Kind::V => lr * lr,
        Kind::Hellinger => (1.0 - (-0.5 * lr).exp()).powi(2),
    }
}

fn mean_se(vals: &[f64]) -> (f64, f64) {
    let n = vals.len() as f64;
    let m = vals.iter().sum::<f64>() / n;
    let var = vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

/// Increment densities for a pair of models, with one quadrature box.
struct QPair {
    d0: IncrementDensity,
    d1: IncrementDensity,
}

impl QPair {
    fn new(m0: &CppModel, m: &CppModel, config: &MetricsConfig) -> Result<Self> {
        Error::check_dim(m0.dim(), m.dim())?;
        Ok(Self {
            d0: IncrementDensity::new(m0, config.mesh, &config.density)?,
            d1: IncrementDensity::new(m, config.mesh, &config.density)?,
        })
    }

    fn atom_term(&self, kind: Kind) -> f64 {
        let (a0, a1) = (self.d0.atom_mass(), self.d1.atom_mass());
        match kind {
            Kind::Kl => k_raw(a0, a1),
            Kind::V => v_raw(a0, a1),
            Kind::Hellinger => h_raw(a0, a1).powi(2),
        }
    }

    fn support(&self, sd_mult: f64) -> (Vec<f64>, Vec<f64>) {
        let (l0, h0) = self.d0.support_box(sd_mult);
        let (l1, h1) = self.d1.support_box(sd_mult);
        (
            l0.iter().zip(&l1).map(|(a, b)| a.min(*b)).collect(),
            h0.iter().zip(&h1).map(|(a, b)| a.max(*b)).collect(),
        )
    }

    fn truncation_error(&self) -> f64 {
        self.d0.tail_mass() + self.d1.tail_mass()
    }
}

/// Divergence between the increment laws `Q_{λ0,r0}` and `Q_{λ,r}`.
pub fn divergence_q(
    kind: Kind,
    m0: &CppModel,
    m: &CppModel,
    method: Method,
    config: &MetricsConfig,
) -> Result<DivergenceEstimate> {
    let pair = QPair::new(m0, m, config)?;
    let d = m0.dim();
    let atom = pair.atom_term(kind);
    let (cont, err, se) = match method {
        Method::Quadrature => {
            if d > 2 {
                return Err(Error::Unsupported("quadrature needs d <= 2".into()));
            }
            let (lo, hi) = pair.support(config.sd_mult);
            let (v, e) = quad_box(&lo, &hi, config.intervals(d), |x| {
                integrand(
                    kind,
                    pair.d0.ln_continuous_unchecked(x),
                    pair.d1.ln_continuous_unchecked(x),
                )
            })?;
            (v, e + pair.truncation_error() + 1e-13 * (1.0 + v.abs()), 0.0)
        }
        Method::MonteCarlo => {
            let (m, se) = mc_continuous(kind, &pair, config)?;
            (m, se + pair.truncation_error(), se)
        }
    };
    let mut est = finish(kind, atom + cont, err, method, se);
    est.atom_part = Some(atom);
    est.continuous_part = Some(cont);
    Ok(est)
}

/// `∫ q0 g` over the continuous part by sampling from `q0/(1 − a0)`.
fn mc_continuous(kind: Kind, pair: &QPair, config: &MetricsConfig) -> Result<(f64, f64)> {
    let model = pair.d0.model();
    let rate = model.lambda * config.mesh;
    let d = model.dim();
    let cont_mass = -(-rate).exp_m1();
    let mut rng = RngStream::new(config.mc_seed, 0x5100);
    let pairs = (config.mc_draws / 2).max(2);
    // zero-truncated Poisson by inversion
    let weights = pair.d0.series_weights();
    let total: f64 = weights.iter().sum();
    let mut vals = Vec::with_capacity(pairs);
    let (mut a, mut b) = (vec![0.0; d], vec![0.0; d]);
    for _ in 0..pairs {
        let u = rng.open01() * total;
        let mut cum = 0.0;
        let mut t = weights.len();
        for (m, w) in weights.iter().enumerate() {
            cum += w;
            if u < cum {
                t = m + 1;
                break;
            }
        }
        a.iter_mut().for_each(|v| *v = 0.0);
        b.iter_mut().for_each(|v| *v = 0.0);
        for _ in 0..t {
            let (ya, yb) = model.jumps.sample_antithetic(&mut rng);
            for k in 0..d {
                a[k] += ya[k];
                b[k] += yb[k];
            }
        }
        let g = |x: &[f64]| {
            let l0 = pair.d0.ln_continuous_unchecked(x);
            let l1 = pair.d1.ln_continuous_unchecked(x);
            mc_term(kind, l0, l1)
        };
        vals.push(0.5 * (g(&a) + g(&b)));
    }
    let (m, se) = mean_se(&vals);
    Ok((cont_mass * m, cont_mass * se))
}

/// Exact `K(R0, R) = λ0Δ K(P0, P) + K(λ0Δ, λΔ)` given `K(P0, P)`.
pub fn path_kl_from(kp: f64, lambda0: f64, lambda: f64, mesh: f64) -> f64 {
    lambda0 * mesh * kp + k_raw(lambda0 * mesh, lambda * mesh)
}

/// Path-level KL, with `K(P0, P)` by quadrature (d ≤ 2) or Monte Carlo.
pub fn path_kl(m0: &CppModel, m: &CppModel, config: &MetricsConfig) -> Result<f64> {
    let kp = divergence_p(Kind::Kl, &m0.jumps, &m.jumps, default_method(m0.dim()), config)?;
    Ok(path_kl_from(kp.value, m0.lambda, m.lambda, config.mesh))
}

fn default_method(d: usize) -> Method {
    if d <= 2 {
        Method::Quadrature
    } else {
        Method::MonteCarlo
    }
}

/// The two parts of `V(R0, R)` and their upper bounds.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PathV {
    pub iii: f64,
    pub iv: f64,
    pub bound_iii: f64,
    pub bound_iv: f64,
    pub error: f64,
}

impl PathV {
    pub fn total(&self) -> f64 {
        self.iii + self.iv
    }

    pub fn bound(&self) -> f64 {
        self.bound_iii + self.bound_iv
    }
}

/// `V(R0, R) = III + IV` with
/// `III = λ0 ∫ (log(λ0/λ) + log(r0/r))² r0` and
/// `IV = λ0² (K(P0,P) + log(λ0/λ) − (1 − λ/λ0))²`, rates scaled by `Δ`.
pub fn path_v_bound(m0: &CppModel, m: &CppModel, config: &MetricsConfig) -> Result<PathV> {
    Error::check_dim(m0.dim(), m.dim())?;
    let (l0, l1) = (m0.lambda * config.mesh, m.lambda * config.mesh);
    let c = (l0 / l1).ln();
    let method = default_method(m0.dim());
    let kp = divergence_p(Kind::Kl, &m0.jumps, &m.jumps, method, config)?;
    let vp = divergence_p(Kind::V, &m0.jumps, &m.jumps, method, config)?;
    let (r0, r) = (&m0.jumps, &m.jumps);
    let (second, second_err) = match method {
        Method::Quadrature => {
            let (lo, hi) = mixture_box(&[r0, r], config.sd_mult);
            let (v, e) = quad_box(&lo, &hi, config.intervals(m0.dim()), |x| {
                let a = r0.ln_density_unchecked(x);
                if a == f64::NEG_INFINITY {
                    return 0.0;
                }
                a.exp() * (c + a - r.ln_density_unchecked(x)).powi(2)
            })?;
            (v, e + 1e-13 * (1.0 + v))
        }
        Method::MonteCarlo => {
            // E(c + L)² = c² + 2c K + V with L the log ratio under r0
            let kp_raw = kp.value;
            (c * c + 2.0 * c * kp_raw + vp.value, 2.0 * c.abs() * kp.error + vp.error)
        }
    };
    let iii = l0 * second;
    let iv = l0 * l0 * (kp.value + c - (1.0 - l1 / l0)).powi(2);
    let klam = k_raw(l0, l1);
    let iv_err = 2.0 * l0 * l0 * (kp.value + c - (1.0 - l1 / l0)).abs() * kp.error;
    Ok(PathV {
        iii,
        iv,
        bound_iii: 2.0 * v_raw(l0, l1) + 2.0 * l0 * vp.value,
        bound_iv: 2.0 * l0 * l0 * vp.value + 2.0 * klam * klam,
        error: l0 * second_err + iv_err + 2.0 * l0 * (1.0 + l0) * vp.error,
    })
}

/// `√(λ0Δ) h(P0, P) + h(λ0Δ, λΔ)`, an upper bound on `h(R0, R)`.
pub fn path_hellinger_bound(m0: &CppModel, m: &CppModel, config: &MetricsConfig) -> Result<f64> {
    let hp = divergence_p(Kind::Hellinger, &m0.jumps, &m.jumps, default_method(m0.dim()), config)?;
    let (l0, l1) = (m0.lambda * config.mesh, m.lambda * config.mesh);
    Ok(l0.sqrt() * hp.value + h_raw(l0, l1))
}

/// Constant valid for every pair of intensities in `[lo, hi]`, built from
/// the bounds `K(λ0,λ) ≤ |λ0−λ|²/(2lo)`, `|log λ0 − log λ| ≤ |λ0−λ|/lo`
/// and `|√λ0 − √λ| ≤ |λ0−λ|/(2√lo)`.
pub fn lemma_constant(lo: f64, hi: f64) -> f64 {
    let c_k = 1.0 / (2.0 * lo);
    let c_v = 2.0 * hi / (lo * lo) + 4.0 * c_k + (hi - lo).powi(2) / (2.0 * lo * lo);
    [
        hi,
        c_k,
        2.0 * hi * (1.0 + hi),
        4.0 * hi,
        c_v,
        hi.sqrt(),
        1.0 / (2.0 * lo.sqrt()),
    ]
    .into_iter()
    .fold(0.0, f64::max)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InequalityRecord {
    pub id: String,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub error: f64,
    pub pass: bool,
    /// `lhs / rhs`, absent when `rhs = 0`.
    pub tightness: Option<f64>,
}

impl InequalityRecord {
    fn new(id: &str, lhs: f64, rhs: f64, error: f64) -> Self {
        Self {
            id: id.to_string(),
            lhs,
            rhs,
            margin: rhs - lhs,
            error,
            pass: lhs <= rhs + 3.0 * error,
            tightness: (rhs > 0.0).then(|| lhs / rhs),
        }
    }
}

/// The six increment-level inequalities for one pair of models.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LemmaOneReport {
    pub c_bar: f64,
    pub lambda_bounds: [f64; 2],
    pub records: Vec<InequalityRecord>,
}

impl LemmaOneReport {
    pub fn all_pass(&self) -> bool {
        self.records.iter().all(|r| r.pass)
    }
}

pub const INEQUALITY_IDS: [&str; 6] = [
    "kl",
    "v",
    "hellinger",
    "kl_const",
    "v_const",
    "hellinger_const",
];

/// Evaluates every Q-level inequality; `bounds` is the intensity interval
/// defining the constant. Rates are `λΔ`.
pub fn check_lemma1(
    m0: &CppModel,
    m: &CppModel,
    bounds: (f64, f64),
    method: Method,
    config: &MetricsConfig,
) -> Result<LemmaOneReport> {
    let (lo, hi) = bounds;
    if !(lo > 0.0 && hi >= lo) {
        return Err(Error::invalid("intensity bounds need 0 < lo <= hi"));
    }
    let (l0, l1) = (m0.lambda * config.mesh, m.lambda * config.mesh);
    for l in [l0, l1] {
        if l < lo - 1e-12 || l > hi + 1e-12 {
            return Err(Error::invalid(format!("intensity {l} outside [{lo}, {hi}]")));
        }
    }
    let q = |k| divergence_q(k, m0, m, method, config);
    let p = |k| divergence_p(k, &m0.jumps, &m.jumps, method, config);
    let (kq, vq, hq) = (q(Kind::Kl)?, q(Kind::V)?, q(Kind::Hellinger)?);
    let (kp, vp, hp) = (p(Kind::Kl)?, p(Kind::V)?, p(Kind::Hellinger)?);
    let klam = k_raw(l0, l1);
    let vlam = v_raw(l0, l1);
    let hlam = h_raw(l0, l1);
    let dl = (l0 - l1).abs();
    let c_bar = lemma_constant(lo, hi);
    let fp = 1e-12;

    let rhs_k = l0 * kp.value + klam;
    let rhs_v = 2.0 * l0 * (1.0 + l0) * vp.value + 4.0 * l0 * kp.value + 2.0 * vlam + 4.0 * klam
        + 2.0 * klam * klam;
    let rhs_h = l0.sqrt() * hp.value + hlam;
    let records = vec![
        InequalityRecord::new("kl", kq.value, rhs_k, kq.error + l0 * kp.error + fp * (1.0 + rhs_k)),
        InequalityRecord::new(
            "v",
            vq.value,
            rhs_v,
            vq.error + 2.0 * l0 * (1.0 + l0) * vp.error + 4.0 * l0 * kp.error + fp * (1.0 + rhs_v),
        ),
        InequalityRecord::new(
            "hellinger",
            hq.value,
            rhs_h,
            hq.error + l0.sqrt() * hp.error + fp * (1.0 + rhs_h),
        ),
        InequalityRecord::new(
            "kl_const",
            kq.value,
            c_bar * (kp.value + dl * dl),
            kq.error + c_bar * kp.error + fp,
        ),
        InequalityRecord::new(
            "v_const",
            vq.value,
            c_bar * (vp.value + kp.value + dl * dl),
            vq.error + c_bar * (vp.error + kp.error) + fp,
        ),
        InequalityRecord::new(
            "hellinger_const",
            hq.value,
            c_bar * (dl + hp.value),
            hq.error + c_bar * hp.error + fp,
        ),
    ];
    Ok(LemmaOneReport {
        c_bar,
        lambda_bounds: [lo, hi],
        records,
    })
}

/// Increment-level divergences against path-level quantities.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DataProcessingReport {
    pub records: Vec<InequalityRecord>,
    pub path_v: PathV,
}

impl DataProcessingReport {
    pub fn record(&self, id: &str) -> Option<&InequalityRecord> {
        self.records.iter().find(|r| r.id == id)
    }
}

/// Compares `K(Q0,Q)` with the exact `K(R0,R)`, `h(Q0,Q)` with the path
/// Hellinger bound, and `V(Q0,Q)` with both `V(R0,R)` and
/// `V(R0,R) + 4K(Q0,Q)`.
pub fn check_data_processing(
    m0: &CppModel,
    m: &CppModel,
    method: Method,
    config: &MetricsConfig,
) -> Result<DataProcessingReport> {
    let (l0, l1) = (m0.lambda * config.mesh, m.lambda * config.mesh);
    let q = |k| divergence_q(k, m0, m, method, config);
    let (kq, vq, hq) = (q(Kind::Kl)?, q(Kind::V)?, q(Kind::Hellinger)?);
    let kp = divergence_p(Kind::Kl, &m0.jumps, &m.jumps, method, config)?;
    let hp = divergence_p(Kind::Hellinger, &m0.jumps, &m.jumps, method, config)?;
    let kr = path_kl_from(kp.value, m0.lambda, m.lambda, config.mesh);
    let hr = l0.sqrt() * hp.value + h_raw(l0, l1);
    let pv = path_v_bound(m0, m, config)?;
    let fp = 1e-12;
    let records = vec![
        InequalityRecord::new("kl", kq.value, kr, kq.error + l0 * kp.error + fp * (1.0 + kr)),
        InequalityRecord::new(
            "hellinger",
            hq.value,
            hr,
            hq.error + l0.sqrt() * hp.error + fp * (1.0 + hr),
        ),
        InequalityRecord::new(
            "v",
            vq.value,
            pv.total(),
            vq.error + pv.error + fp * (1.0 + pv.total()),
        ),
        InequalityRecord::new(
            "v_plus_4k",
            vq.value,
            pv.total() + 4.0 * kq.value,
            vq.error + pv.error + 4.0 * kq.error + fp * (1.0 + pv.total()),
        ),
        InequalityRecord::new("path_v_iii", pv.iii, pv.bound_iii, pv.error + fp * (1.0 + pv.bound_iii)),
        InequalityRecord::new("path_v_iv", pv.iv, pv.bound_iv, pv.error + fp * (1.0 + pv.bound_iv)),
    ];
    Ok(DataProcessingReport {
        records,
        path_v: pv,
    })
}

/// `h` between two densities tabulated on the same grid.
pub fn hellinger_on_grid(grid: &Grid, f: &[f64], g: &[f64]) -> Result<f64> {
    if f.len() != grid.len() || g.len() != grid.len() {
        return Err(Error::invalid("tabulated densities must match the grid"));
    }
    let sq: Vec<f64> = f
        .iter()
        .zip(g)
        .map(|(a, b)| (a.max(0.0).sqrt() - b.max(0.0).sqrt()).powi(2))
        .collect();
    Ok(grid.integrate(&sq).max(0.0).sqrt())
}

/// A random model pair for certification sweeps: intensities uniform on
/// `bounds`, `r0 = N(0, I)` and `r = N(μ, s·I)` with `μ ∈ [−1.5, 1.5]^d`,
/// `s ∈ [0.6, 1.6]`.
pub fn random_pair(d: usize, bounds: (f64, f64), rng: &mut RngStream) -> Result<(CppModel, CppModel)> {
    let (lo, hi) = bounds;
    let mut u = |a: f64, b: f64| a + (b - a) * rng.open01();
    let l0 = u(lo, hi);
    let l1 = u(lo, hi);
    let mu: Vec<f64> = (0..d).map(|_| u(-1.5, 1.5)).collect();
    let s = u(0.6, 1.6);
    let eye = |v: f64| -> Vec<f64> {
        (0..d * d).map(|k| if k % (d + 1) == 0 { v } else { 0.0 }).collect()
    };
    Ok((
        CppModel::new(l0, NormalMixture::gaussian(vec![0.0; d], eye(1.0))?)?,
        CppModel::new(l1, NormalMixture::gaussian(mu, eye(s))?)?,
    ))
}

/// One row of the certification CSV.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CertificationRow {
    pub pair_id: usize,
    pub inequality: String,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub error: f64,
    pub pass: bool,
    pub tightness: Option<f64>,
}

pub fn certification_rows(reports: &[LemmaOneReport]) -> Vec<CertificationRow> {
    reports
        .iter()
        .enumerate()
        .flat_map(|(i, rep)| {
            rep.records.iter().map(move |r| CertificationRow {
                pair_id: i,
                inequality: r.id.clone(),
                lhs: r.lhs,
                rhs: r.rhs,
                margin: r.margin,
                error: r.error,
                pass: r.pass,
                tightness: r.tightness,
            })
        })
        .collect()
}

pub fn write_certification_csv<W: Write>(rows: &[CertificationRow], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["pair_id", "inequality", "lhs", "rhs", "margin", "error", "pass", "tightness"])?;
    for r in rows {
        wr.write_record([
            r.pair_id.to_string(),
            r.inequality.clone(),
            format_f64(r.lhs),
            format_f64(r.rhs),
            format_f64(r.margin),
            format_f64(r.error),
            r.pass.to_string(),
            r.tightness.map(format_f64).unwrap_or_default(),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

/// Runs `check_lemma1` on `n_pairs` random pairs, in parallel; pair `i` uses stream `i`.
pub fn lemma_sweep(
    n_pairs: usize,
    d: usize,
    bounds: (f64, f64),
    seed: u64,
    config: &MetricsConfig,
) -> Result<Vec<(CppModel, CppModel, LemmaOneReport)>> {
    (0..n_pairs)
        .into_par_iter()
        .map(|i| {
            let mut rng = RngStream::new(seed, i as u64);
            let (a, b) = random_pair(d, bounds, &mut rng)?;
            let rep = check_lemma1(&a, &b, bounds, default_method(d), config)?;
            Ok((a, b, rep))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> MetricsConfig {
        MetricsConfig::default()
    }

    fn gauss(mu: f64, var: f64) -> NormalMixture {
        NormalMixture::univariate(mu, var).unwrap()
    }

    #[test]
    fn scalar_values() {
        assert_eq!(scalar_k(1.5, 1.5).unwrap(), 0.0);
        assert!((scalar_k(2.0, 1.0).unwrap() - (2.0 * 2f64.ln() - 1.0)).abs() < 1e-16);
        assert!((scalar_k(1.0, 2.0).unwrap() - (1.0 - 2f64.ln())).abs() < 1e-15);
        assert!((scalar_v(1.0, std::f64::consts::E).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(scalar_h(4.0, 1.0).unwrap(), 1.0);
        assert!(scalar_k(0.0, 1.0).is_err());
        assert!(scalar_h(1.0, -1.0).is_err());
    }

    #[test]
    fn gaussian_closed_forms() {
        let (a, b) = (gauss(0.0, 1.0), gauss(1.0, 1.0));
        let k = divergence_p(Kind::Kl, &a, &b, Method::Quadrature, &cfg()).unwrap();
        assert!((k.value - 0.5).abs() < 1e-9, "{}", k.value);
        let h = divergence_p(Kind::Hellinger, &a, &b, Method::Quadrature, &cfg()).unwrap();
        let exact = (2.0 - 2.0 * (-0.125f64).exp()).sqrt();
        assert!((h.value - exact).abs() < 1e-9);
        // log ratio is 1/2 − x under N(0,1): E(L²) = 1 + 1/4
        let v = divergence_p(Kind::V, &a, &b, Method::Quadrature, &cfg()).unwrap();
        assert!((v.value - 1.25).abs() < 1e-9, "{}", v.value);
        for kind in [Kind::Kl, Kind::V, Kind::Hellinger] {
            let z = divergence_p(kind, &a, &a, Method::Quadrature, &cfg()).unwrap();
            assert!(z.value.abs() < 1e-8);
        }
    }

    #[test]
    fn monte_carlo_matches_quadrature_on_p() {
        let (a, b) = (gauss(0.0, 1.0), gauss(0.7, 1.3));
        let mut c = cfg();
        c.mc_draws = 200_000;
        for kind in [Kind::Kl, Kind::V, Kind::Hellinger] {
            let q = divergence_p(kind, &a, &b, Method::Quadrature, &c).unwrap();
            let m = divergence_p(kind, &a, &b, Method::MonteCarlo, &c).unwrap();
            assert!((q.value - m.value).abs() < 4.0 * m.mc_std_error, "{kind:?}: {} vs {} ± {}", q.value, m.value, m.mc_std_error);
        }
    }

    #[test]
    fn q_identical_is_zero_and_atom_bound() {
        let m0 = CppModel::new(1.0, gauss(0.0, 1.0)).unwrap();
        for kind in [Kind::Kl, Kind::V, Kind::Hellinger] {
            let z = divergence_q(kind, &m0, &m0, Method::Quadrature, &cfg()).unwrap();
            assert!(z.value.abs() < 1e-8);
        }
        let m1 = CppModel::new(1.6, gauss(0.0, 1.0)).unwrap();
        let h = divergence_q(Kind::Hellinger, &m0, &m1, Method::Quadrature, &cfg()).unwrap();
        let atom = ((-0.5f64).exp() - (-0.8f64).exp()).powi(2);
        assert!(h.value.powi(2) >= atom);
        assert!((h.atom_part.unwrap() - atom).abs() < 1e-15);
    }

    #[test]
    fn q_quadrature_matches_monte_carlo() {
        let m0 = CppModel::new(1.0, gauss(0.0, 1.0)).unwrap();
        let m1 = CppModel::new(1.2, gauss(0.0, 1.0)).unwrap();
        let mut c = cfg();
        c.mc_draws = 200_000;
        for kind in [Kind::Kl, Kind::V, Kind::Hellinger] {
            let q = divergence_q(kind, &m0, &m1, Method::Quadrature, &c).unwrap();
            let m = divergence_q(kind, &m0, &m1, Method::MonteCarlo, &c).unwrap();
            assert!(
                (q.value - m.value).abs() <= 3.0 * m.mc_std_error + 1e-12,
                "{kind:?}: {} vs {} ± {}",
                q.value,
                m.value,
                m.mc_std_error
            );
        }
    }

    #[test]
    fn path_quantities() {
        let a = CppModel::new(2.0, gauss(0.0, 1.0)).unwrap();
        let b = CppModel::new(1.0, gauss(0.0, 1.0)).unwrap();
        assert!((path_kl(&a, &b, &cfg()).unwrap() - (2.0 * 2f64.ln() - 1.0)).abs() < 1e-10);
        let pv = path_v_bound(&a, &b, &cfg()).unwrap();
        let iv = 4.0 * (2f64.ln() - 0.5).powi(2);
        assert!((pv.iv - iv).abs() < 1e-10);
        assert!(pv.iv <= pv.bound_iv + 1e-12);
        assert!(pv.iii <= pv.bound_iii + 1e-12);

        let c = CppModel::new(1.0, gauss(1.0, 1.0)).unwrap();
        assert!((path_kl(&b, &c, &cfg()).unwrap() - 0.5).abs() < 1e-9);
        let hb = path_hellinger_bound(&b, &c, &cfg()).unwrap();
        assert!((hb - (2.0 - 2.0 * (-0.125f64).exp()).sqrt()).abs() < 1e-9);
        let d4 = CppModel::new(4.0, gauss(0.0, 1.0)).unwrap();
        assert!((path_hellinger_bound(&d4, &b, &cfg()).unwrap() - 1.0).abs() < 1e-12);
        let same = path_v_bound(&b, &b, &cfg()).unwrap();
        assert!(same.iii.abs() < 1e-12 && same.iv.abs() < 1e-12);
    }

    #[test]
    fn lemma_identical_and_boundary() {
        let a = CppModel::new(1.0, gauss(0.3, 1.0)).unwrap();
        let rep = check_lemma1(&a, &a, (0.5, 2.0), Method::Quadrature, &cfg()).unwrap();
        assert!(rep.all_pass());
        for r in &rep.records {
            assert!(r.lhs.abs() < 1e-8 && r.rhs.abs() < 1e-8);
        }
        let lo = CppModel::new(0.5, gauss(0.0, 1.0)).unwrap();
        let hi = CppModel::new(2.0, gauss(0.0, 1.0)).unwrap();
        for (x, y) in [(&lo, &hi), (&hi, &lo)] {
            let rep = check_lemma1(x, y, (0.5, 2.0), Method::Quadrature, &cfg()).unwrap();
            assert!(rep.all_pass(), "{rep:?}");
        }
        assert!(check_lemma1(&a, &hi, (0.5, 1.5), Method::Quadrature, &cfg()).is_err());
    }

    #[test]
    fn constant_dominates_scalar_ratios() {
        let (lo, hi) = (0.5, 2.0);
        let c = lemma_constant(lo, hi);
        for i in 0..=40 {
            for j in 0..=40 {
                let a = lo + (hi - lo) * i as f64 / 40.0;
                let b = lo + (hi - lo) * j as f64 / 40.0;
                let d2 = (a - b).powi(2);
                assert!(k_raw(a, b) <= c * d2 + 1e-15);
                assert!(2.0 * v_raw(a, b) + 4.0 * k_raw(a, b) + 2.0 * k_raw(a, b).powi(2) <= c * d2 + 1e-12);
                assert!(h_raw(a, b) <= c * (a - b).abs() + 1e-15);
            }
        }
    }

    #[test]
    fn data_processing_example() {
        let a = CppModel::new(1.0, gauss(0.0, 1.0)).unwrap();
        let b = CppModel::new(1.5, gauss(0.0, 1.0)).unwrap();
        let rep = check_data_processing(&a, &b, Method::Quadrature, &cfg()).unwrap();
        let kl = rep.record("kl").unwrap();
        assert!((kl.rhs - scalar_k(1.0, 1.5).unwrap()).abs() < 1e-12);
        assert!(kl.pass && kl.lhs > 0.0);
        assert!(rep.record("v_plus_4k").unwrap().pass);
    }

    #[test]
    fn grid_hellinger_matches_closed_form() {
        let grid = Grid::line(-12.0, 13.0, 5001).unwrap();
        let f: Vec<f64> = grid.nodes().iter().map(|x| gauss(0.0, 1.0).density(x).unwrap()).collect();
        let g: Vec<f64> = grid.nodes().iter().map(|x| gauss(1.0, 1.0).density(x).unwrap()).collect();
        let h = hellinger_on_grid(&grid, &f, &g).unwrap();
        assert!((h - (2.0 - 2.0 * (-0.125f64).exp()).sqrt()).abs() < 1e-9);
    }
}
