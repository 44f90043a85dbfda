//! Product prior: a bounded-support density on the intensity and a truncated
//! Dirichlet-process location mixture of normals on the jump density.

use std::collections::BTreeMap;

use rand_distr::{Beta, ChiSquared, Cauchy, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::NormalMixture;
use crate::rng::RngStream;

/// Shape of the intensity prior density on `[lo, hi]`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "snake_case")]
pub enum LambdaFamily {
    Uniform,
    /// Linear between the (unnormalized) heights at `lo` and `hi`.
    Linear { left: f64, right: f64 },
    /// Piecewise-linear through `[λ, height]` knots spanning `[lo, hi]`.
    PiecewiseLinear { knots: Vec<[f64; 2]> },
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(try_from = "LambdaPriorJson", into = "LambdaPriorJson")]
pub struct LambdaPrior {
    lo: f64,
    hi: f64,
    family: LambdaFamily,
    /// Normalized knots `(λ, density)`.
    knots: Vec<(f64, f64)>,
    /// Cumulative mass at each knot.
    cum: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct LambdaPriorJson {
    lo: f64,
    hi: f64,
    family: LambdaFamily,
}

impl TryFrom<LambdaPriorJson> for LambdaPrior {
    type Error = Error;
    fn try_from(j: LambdaPriorJson) -> Result<Self> {
        LambdaPrior::new(j.lo, j.hi, j.family)
    }
}

impl From<LambdaPrior> for LambdaPriorJson {
    fn from(p: LambdaPrior) -> Self {
        Self {
            lo: p.lo,
            hi: p.hi,
            family: p.family,
        }
    }
}

impl LambdaPrior {
    pub fn new(lo: f64, hi: f64, family: LambdaFamily) -> Result<Self> {
        if !(lo > 0.0 && hi > lo && hi.is_finite()) {
            return Err(Error::invalid(format!(
                "lambda prior needs 0 < lo < hi, got [{lo}, {hi}]"
            )));
        }
        let raw: Vec<(f64, f64)> = match &family {
            LambdaFamily::Uniform => vec![(lo, 1.0), (hi, 1.0)],
            LambdaFamily::Linear { left, right } => vec![(lo, *left), (hi, *right)],
            LambdaFamily::PiecewiseLinear { knots } => knots.iter().map(|k| (k[0], k[1])).collect(),
        };
        if raw.len() < 2 {
            return Err(Error::invalid("lambda prior needs at least two knots"));
        }
        if raw.iter().any(|(_, h)| !(h.is_finite() && *h >= 0.0)) {
            return Err(Error::invalid("lambda prior heights must be finite and nonnegative"));
        }
        if raw.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(Error::invalid("lambda prior knots must be strictly increasing"));
        }
        if (raw[0].0 - lo).abs() > 1e-12 || (raw[raw.len() - 1].0 - hi).abs() > 1e-12 {
            return Err(Error::invalid("lambda prior knots must span [lo, hi]"));
        }
        let area: f64 = raw
            .windows(2)
            .map(|w| 0.5 * (w[0].1 + w[1].1) * (w[1].0 - w[0].0))
            .sum();
        if !(area > 0.0) {
            return Err(Error::invalid("lambda prior has zero mass"));
        }
        let knots: Vec<(f64, f64)> = raw.iter().map(|(x, h)| (*x, h / area)).collect();
        let mut cum = vec![0.0];
        for w in knots.windows(2) {
            let last = *cum.last().unwrap();
            cum.push(last + 0.5 * (w[0].1 + w[1].1) * (w[1].0 - w[0].0));
        }
        Ok(Self {
            lo,
            hi,
            family,
            knots,
            cum,
        })
    }

    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        Self::new(lo, hi, LambdaFamily::Uniform)
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn family(&self) -> &LambdaFamily {
        &self.family
    }

    fn segment(&self, x: f64) -> usize {
        match self.knots.iter().position(|k| k.0 >= x) {
            Some(0) => 0,
            Some(i) => i - 1,
            None => self.knots.len() - 2,
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        if !(x >= self.lo && x <= self.hi) {
            return 0.0;
        }
        let i = self.segment(x);
        let (x0, y0) = self.knots[i];
        let (x1, y1) = self.knots[i + 1];
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    }

    /// Log density; `−∞` outside `[lo, hi]`.
    pub fn logpdf(&self, x: f64) -> f64 {
        self.pdf(x).ln()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= self.lo {
            return 0.0;
        }
        if x >= self.hi {
            return 1.0;
        }
        let i = self.segment(x);
        let (x0, y0) = self.knots[i];
        self.cum[i] + 0.5 * (y0 + self.pdf(x)) * (x - x0)
    }

    pub fn quantile(&self, p: f64) -> f64 {
        let p = p.clamp(0.0, 1.0);
        let i = match self.cum.iter().position(|c| *c >= p) {
            Some(0) => 0,
            Some(i) => i - 1,
            None => self.knots.len() - 2,
        };
        let (x0, y0) = self.knots[i];
        let (x1, y1) = self.knots[i + 1];
        let target = p - self.cum[i];
        let slope = (y1 - y0) / (x1 - x0);
        // solve y0·t + slope·t²/2 = target for t in [0, x1 − x0]
        let t = if slope.abs() < 1e-14 {
            if y0 > 0.0 {
                target / y0
            } else {
                0.0
            }
        } else {
            let disc = (y0 * y0 + 2.0 * slope * target).max(0.0);
            (-y0 + disc.sqrt()) / slope
        };
        (x0 + t.clamp(0.0, x1 - x0)).clamp(self.lo, self.hi)
    }

    pub fn median(&self) -> f64 {
        self.quantile(0.5)
    }

    pub fn mean(&self) -> f64 {
        self.knots
            .windows(2)
            .map(|w| {
                let (a, fa) = w[0];
                let (b, fb) = w[1];
                // ∫ x f(x) over a linear segment
                (b - a) * (fa * (2.0 * a + b) + fb * (a + 2.0 * b)) / 6.0
            })
            .sum()
    }

    /// Lower and upper density bounds over the support.
    pub fn density_bounds(&self) -> (f64, f64) {
        self.knots.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), k| {
            (lo.min(k.1), hi.max(k.1))
        })
    }

    pub fn sample(&self, rng: &mut RngStream) -> f64 {
        self.quantile(rng.open01())
    }
}

/// Base measure of the Dirichlet process (normalized).
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "snake_case")]
pub enum BaseFamily {
    #[default]
    Gaussian,
    /// Independent Cauchy coordinates with location `base_mean` and scale
    /// `sqrt(base_cov[k][k])`. Only for the tail check and prior draws.
    Cauchy,
}

/// Truncated Dirichlet-process location mixture of normals with a shared
/// inverse-Wishart covariance.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct DpmPrior {
    pub concentration: f64,
    pub base_mean: Vec<f64>,
    pub base_cov: Vec<Vec<f64>>,
    pub iw_df: f64,
    pub iw_scale: Vec<Vec<f64>>,
    #[serde(rename = "truncation_K")]
    pub truncation: usize,
    #[serde(default)]
    pub base_family: BaseFamily,
}

impl DpmPrior {
    /// `N(0, 4·I)` base, concentration 1, `IW(d + 2, I)`, 50 sticks.
    pub fn default_for_dim(d: usize) -> Self {
        let rows = |s: f64| -> Vec<Vec<f64>> {
            (0..d)
                .map(|i| (0..d).map(|j| if i == j { s } else { 0.0 }).collect())
                .collect()
        };
        Self {
            concentration: 1.0,
            base_mean: vec![0.0; d],
            base_cov: rows(4.0),
            iw_df: d as f64 + 2.0,
            iw_scale: rows(1.0),
            truncation: 50,
            base_family: BaseFamily::Gaussian,
        }
    }

    pub fn dim(&self) -> usize {
        self.base_mean.len()
    }

    pub fn base_cov_flat(&self) -> Vec<f64> {
        self.base_cov.concat()
    }

    pub fn iw_scale_flat(&self) -> Vec<f64> {
        self.iw_scale.concat()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        if d == 0 {
            return Err(Error::invalid("DPM prior dimension must be positive"));
        }
        if !(self.concentration > 0.0 && self.concentration.is_finite()) {
            return Err(Error::invalid("concentration must be positive"));
        }
        if self.truncation < 1 {
            return Err(Error::invalid("truncation must be at least 1"));
        }
        if !(self.iw_df > d as f64 - 1.0) {
            return Err(Error::invalid(format!(
                "inverse Wishart degrees of freedom must exceed {}",
                d - 1
            )));
        }
        let shape_ok = |m: &Vec<Vec<f64>>| m.len() == d && m.iter().all(|r| r.len() == d);
        if !shape_ok(&self.base_cov) || !shape_ok(&self.iw_scale) {
            return Err(Error::invalid("prior matrices must be d×d"));
        }
        linalg::validate_spd(d, &self.base_cov_flat())?;
        linalg::validate_spd(d, &self.iw_scale_flat())?;
        Ok(())
    }

    fn sample_location(&self, rng: &mut RngStream) -> Vec<f64> {
        let d = self.dim();
        match self.base_family {
            BaseFamily::Gaussian => {
                let chol = linalg::cholesky(d, &self.base_cov_flat()).expect("validated base");
                let z: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
                let mut out = vec![0.0; d];
                linalg::lower_mul(d, &chol, &z, &mut out);
                out.iter().zip(&self.base_mean).map(|(a, m)| a + m).collect()
            }
            BaseFamily::Cauchy => (0..d)
                .map(|k| {
                    let c = Cauchy::new(self.base_mean[k], self.base_cov[k][k].sqrt())
                        .expect("positive scale");
                    c.sample(rng)
                })
                .collect(),
        }
    }

    /// Stick-breaking weights with the last stick absorbing the remainder.
    pub fn sample_weights(&self, rng: &mut RngStream) -> Vec<f64> {
        let k = self.truncation;
        let beta = Beta::new(1.0, self.concentration).expect("valid Beta");
        let mut weights = Vec::with_capacity(k);
        let mut remaining = 1.0;
        for _ in 0..k.saturating_sub(1) {
            let v: f64 = beta.sample(rng);
            weights.push(remaining * v);
            remaining *= 1.0 - v;
        }
        weights.push(remaining);
        weights
    }

    /// One full draw `(weights, locations, Σ)` with all `K` sticks kept.
    pub fn sample_components(&self, rng: &mut RngStream) -> StickDraw {
        let d = self.dim();
        let sigma = sample_inverse_wishart(d, self.iw_df, &self.iw_scale_flat(), rng)
            .expect("validated inverse Wishart");
        let weights = self.sample_weights(rng);
        let locations = (0..self.truncation).map(|_| self.sample_location(rng)).collect();
        StickDraw {
            weights,
            locations,
            sigma,
        }
    }

    /// A random jump density `Σ_k w_k φ_Σ(· − z_k)` from the prior.
    pub fn sample_prior_draw(&self, rng: &mut RngStream) -> Result<NormalMixture> {
        self.validate()?;
        self.sample_components(rng).to_mixture()
    }
}

/// Raw prior draw before tiny weights are dropped.
#[derive(Clone, Debug)]
pub struct StickDraw {
    pub weights: Vec<f64>,
    pub locations: Vec<Vec<f64>>,
    pub sigma: Vec<f64>,
}

impl StickDraw {
    pub fn to_mixture(&self) -> Result<NormalMixture> {
        let total: f64 = self.weights.iter().sum();
        let w = self.weights.iter().map(|x| x / total).collect();
        NormalMixture::shared(w, self.locations.clone(), self.sigma.clone())
    }
}

/// `Σ ~ IW(df, scale)` via the Bartlett decomposition of `Σ⁻¹ ~ W(df, scale⁻¹)`.
pub fn sample_inverse_wishart(
    d: usize,
    df: f64,
    scale: &[f64],
    rng: &mut RngStream,
) -> Result<Vec<f64>> {
    if !(df > d as f64 - 1.0) {
        return Err(Error::invalid("inverse Wishart needs df > d - 1"));
    }
    let scale_inv = linalg::inverse(d, scale)?;
    let l = linalg::cholesky(d, &scale_inv)?;
    let mut a = vec![0.0; d * d];
    for i in 0..d {
        let chi = ChiSquared::new(df - i as f64).map_err(|e| Error::Numerical(e.to_string()))?;
        a[i * d + i] = chi.sample(rng).sqrt();
        for j in 0..i {
            a[i * d + j] = StandardNormal.sample(rng);
        }
    }
    // B = L·A (lower), W = B·Bᵀ
    let mut b = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..=i {
            b[i * d + j] = (j..=i).map(|k| l[i * d + k] * a[k * d + j]).sum();
        }
    }
    let mut w = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            w[i * d + j] = (0..d).map(|k| b[i * d + k] * b[j * d + k]).sum();
        }
    }
    let sigma = linalg::inverse(d, &w)?;
    linalg::validate_spd(d, &sigma)?;
    Ok(sigma)
}

/// Both prior factors, as read from the prior JSON file.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Priors {
    pub lambda: LambdaPrior,
    pub dpm: DpmPrior,
}

impl Priors {
    /// Uniform intensity prior on `[0.1, 5]` and the default DPM prior.
    pub fn default_for_dim(d: usize) -> Self {
        Self {
            lambda: LambdaPrior::uniform(0.1, 5.0).expect("valid default"),
            dpm: DpmPrior::default_for_dim(d),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.dpm.validate()
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum ClauseStatus {
    Pass,
    Warn,
    Fail,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ClauseResult {
    pub clause: String,
    pub status: ClauseStatus,
    pub detail: String,
    pub constants: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub clauses: Vec<ClauseResult>,
}

impl AssumptionReport {
    pub fn status(&self, clause: &str) -> Option<ClauseStatus> {
        self.clauses.iter().find(|c| c.clause == clause).map(|c| c.status)
    }

    pub fn all_pass(&self) -> bool {
        self.clauses.iter().all(|c| c.status == ClauseStatus::Pass)
    }
}

/// Union bound on `1 − ᾱ([−x, x]^d)`.
fn base_tail(p: &DpmPrior, x: f64) -> f64 {
    let d = p.dim();
    let mut total = 0.0;
    for k in 0..d {
        let m = p.base_mean[k];
        let s = p.base_cov[k][k].sqrt();
        let axis = match p.base_family {
            BaseFamily::Gaussian => {
                let r = std::f64::consts::SQRT_2 * s;
                0.5 * erfc((x - m) / r) + 0.5 * erfc((x + m) / r)
            }
            BaseFamily::Cauchy => {
                if x > m.abs() {
                    ((s / (x - m)).atan() + (s / (x + m)).atan()) / std::f64::consts::PI
                } else {
                    1.0
                }
            }
        };
        total += axis;
    }
    total.min(1.0)
}

/// Numerical check of the prior conditions: (i) intensity density bounded
/// away from zero and infinity, (ii) exponential-type tails of the base
/// measure, (iii) inverse-Wishart covariance prior.
///
/// `lambda0`, when given and interior, turns a density vanishing only at the
/// interval endpoints into a warning instead of a failure.
pub fn validate_assumptions(
    dpm: &DpmPrior,
    lambda: &LambdaPrior,
    lambda0: Option<f64>,
) -> AssumptionReport {
    let mut clauses = Vec::new();

    // (i)
    let n = 10_000;
    let xs: Vec<f64> = (0..n)
        .map(|i| lambda.lo() + (lambda.hi() - lambda.lo()) * i as f64 / (n - 1) as f64)
        .collect();
    let vals: Vec<f64> = xs.iter().map(|x| lambda.pdf(*x)).collect();
    let min = vals.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = vals.iter().cloned().fold(0.0, f64::max);
    let mut constants = BTreeMap::new();
    constants.insert("pi_lower".into(), min);
    constants.insert("pi_upper".into(), max);
    constants.insert("lambda_lower".into(), lambda.lo());
    constants.insert("lambda_upper".into(), lambda.hi());
    let (status, detail) = if min > 0.0 && max.is_finite() {
        (ClauseStatus::Pass, format!("density within [{min:.6}, {max:.6}]"))
    } else {
        let interior_zero = vals[1..n - 1].iter().any(|v| *v <= 0.0);
        let interior_truth = lambda0.is_some_and(|l| l > lambda.lo() && l < lambda.hi());
        if !interior_zero && interior_truth {
            (
                ClauseStatus::Warn,
                "density vanishes only at the interval endpoints and the true intensity is interior"
                    .to_string(),
            )
        } else {
            (
                ClauseStatus::Fail,
                "density is not bounded away from zero on the support".to_string(),
            )
        }
    };
    clauses.push(ClauseResult {
        clause: "i".into(),
        status,
        detail,
        constants,
    });

    // (ii)
    let mut constants = BTreeMap::new();
    let d = dpm.dim();
    let (status, detail) = if d == 0 || dpm.base_cov.len() != d {
        (ClauseStatus::Fail, "malformed base measure".to_string())
    } else {
        let spread = (0..d)
            .map(|k| dpm.base_mean[k].abs() + dpm.base_cov[k][k].sqrt())
            .fold(0.0, f64::max);
        let x0 = (2.0 * spread).max(1.0);
        let mut pts: Vec<(f64, f64)> = Vec::new();
        let mut x = x0;
        for _ in 0..400 {
            let t = base_tail(dpm, x);
            if !(t > 1e-250) {
                break;
            }
            pts.push((x, -t.ln()));
            x *= std::f64::consts::SQRT_2;
        }
        if pts.len() < 3 {
            (ClauseStatus::Fail, "tail could not be resolved".to_string())
        } else {
            let (xa, ga) = pts[pts.len() - 2];
            let (xb, gb) = pts[pts.len() - 1];
            let a1 = (gb / ga).ln() / (xb / xa).ln();
            let c1 = pts
                .iter()
                .map(|(x, g)| g / x.powf(a1))
                .fold(f64::INFINITY, f64::min);
            constants.insert("a1".into(), a1);
            constants.insert("b1".into(), 1.0);
            constants.insert("C1".into(), c1);
            constants.insert("x0".into(), x0);
            if a1 >= 0.5 && c1 > 0.0 {
                (
                    ClauseStatus::Pass,
                    format!("tail <= exp(-{c1:.4e} x^{a1:.3}) for x >= {x0:.3}"),
                )
            } else {
                (
                    ClauseStatus::Fail,
                    format!("tail decays too slowly (fitted exponent {a1:.3})"),
                )
            }
        }
    };
    clauses.push(ClauseResult {
        clause: "ii".into(),
        status,
        detail,
        constants,
    });

    // (iii)
    let mut constants = BTreeMap::new();
    let iw_ok = dpm.iw_df > d as f64 - 1.0
        && dpm.iw_scale.len() == d
        && linalg::validate_spd(d, &dpm.iw_scale_flat()).is_ok();
    let (status, detail) = if iw_ok {
        constants.insert("kappa".into(), 2.0);
        (
            ClauseStatus::Pass,
            "inverse Wishart covariance prior (kappa = 2)".to_string(),
        )
    } else {
        (
            ClauseStatus::Fail,
            "inverse Wishart parameters are invalid".to_string(),
        )
    };
    clauses.push(ClauseResult {
        clause: "iii".into(),
        status,
        detail,
        constants,
    });

    AssumptionReport { clauses }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_logpdf() {
        let p = LambdaPrior::uniform(0.5, 2.0).unwrap();
        assert!((p.logpdf(1.0) - (1.0f64 / 1.5).ln()).abs() < 1e-15);
        assert_eq!(p.logpdf(2.5), f64::NEG_INFINITY);
        assert_eq!(p.median(), 1.25);
    }

    #[test]
    fn linear_density_bounds_and_normalization() {
        let p = LambdaPrior::new(0.5, 2.0, LambdaFamily::Linear { left: 1.0, right: 3.0 }).unwrap();
        let (lo, hi) = p.density_bounds();
        let grid: Vec<f64> = (0..1000).map(|i| 0.5 + 1.5 * i as f64 / 999.0).collect();
        for x in &grid {
            let v = p.pdf(*x);
            assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
        }
        assert!(lo > 0.0);
        assert!((p.cdf(2.0) - 1.0).abs() < 1e-12);
        let mass: f64 = grid.windows(2).map(|w| 0.5 * (p.pdf(w[0]) + p.pdf(w[1])) * (w[1] - w[0])).sum();
        assert!((mass - 1.0).abs() < 1e-8);
        for q in [0.1, 0.5, 0.9] {
            assert!((p.cdf(p.quantile(q)) - q).abs() < 1e-12);
        }
    }

    #[test]
    fn json_shape() {
        let pr = Priors::default_for_dim(1);
        let s = serde_json::to_string(&pr).unwrap();
        assert!(s.contains("\"truncation_K\":50"));
        assert!(s.contains("\"family\":\"uniform\""));
        let back: Priors = serde_json::from_str(&s).unwrap();
        assert_eq!(back, pr);
        assert!(serde_json::from_str::<LambdaPrior>(r#"{"lo":2,"hi":1,"family":"uniform"}"#).is_err());
    }

    #[test]
    fn single_stick_is_single_gaussian() {
        let mut p = DpmPrior::default_for_dim(1);
        p.truncation = 1;
        let m = p.sample_prior_draw(&mut RngStream::new(4, 0)).unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!(m.weights(), &[1.0]);
    }

    #[test]
    fn stick_weights_are_probability_vector() {
        let p = DpmPrior::default_for_dim(2);
        let mut rng = RngStream::new(5, 0);
        for _ in 0..200 {
            let w = p.sample_weights(&mut rng);
            assert_eq!(w.len(), 50);
            assert!(w.iter().all(|x| *x >= 0.0));
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn prior_draws_are_valid_mixtures() {
        let p = DpmPrior::default_for_dim(2);
        for seed in 0..1000 {
            let m = p.sample_prior_draw(&mut RngStream::new(seed, 0)).unwrap();
            assert!(linalg::validate_spd(2, m.covariance(0)).is_ok());
            assert!((m.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn inverse_wishart_mean() {
        // E[Σ] = Ψ / (ν − d − 1)
        let mut rng = RngStream::new(6, 0);
        let psi = vec![2.0, 0.5, 0.5, 1.0];
        let nu = 7.0;
        let n = 40_000;
        let mut acc = vec![0.0; 4];
        for _ in 0..n {
            let s = sample_inverse_wishart(2, nu, &psi, &mut rng).unwrap();
            for k in 0..4 {
                acc[k] += s[k] / n as f64;
            }
        }
        for k in 0..4 {
            let expect = psi[k] / (nu - 3.0);
            assert!((acc[k] - expect).abs() < 0.03 * psi[0], "{k}: {} vs {expect}", acc[k]);
        }
    }

    #[test]
    fn default_assumptions_pass() {
        let r = validate_assumptions(
            &DpmPrior::default_for_dim(2),
            &LambdaPrior::uniform(0.5, 2.0).unwrap(),
            None,
        );
        assert!(r.all_pass(), "{r:?}");
        let a1 = r.clauses[1].constants["a1"];
        assert!((a1 - 2.0).abs() < 0.2, "{a1}");
    }

    #[test]
    fn interior_zero_fails_endpoint_zero_warns() {
        let dpm = DpmPrior::default_for_dim(1);
        let dip = LambdaPrior::new(
            0.5,
            2.0,
            LambdaFamily::PiecewiseLinear {
                knots: vec![[0.5, 1.0], [1.0, 0.0], [2.0, 1.0]],
            },
        )
        .unwrap();
        let r = validate_assumptions(&dpm, &dip, Some(1.5));
        assert_eq!(r.status("i"), Some(ClauseStatus::Fail));

        let tent = LambdaPrior::new(
            0.5,
            2.0,
            LambdaFamily::PiecewiseLinear {
                knots: vec![[0.5, 0.0], [1.25, 1.0], [2.0, 0.0]],
            },
        )
        .unwrap();
        assert_eq!(
            validate_assumptions(&dpm, &tent, Some(1.0)).status("i"),
            Some(ClauseStatus::Warn)
        );
        assert_eq!(
            validate_assumptions(&dpm, &tent, None).status("i"),
            Some(ClauseStatus::Fail)
        );
    }

    #[test]
    fn cauchy_base_fails_tail_clause() {
        let mut dpm = DpmPrior::default_for_dim(1);
        dpm.base_family = BaseFamily::Cauchy;
        let r = validate_assumptions(&dpm, &LambdaPrior::uniform(0.5, 2.0).unwrap(), None);
        assert_eq!(r.status("ii"), Some(ClauseStatus::Fail));
        assert_eq!(r.status("i"), Some(ClauseStatus::Pass));
    }
}
