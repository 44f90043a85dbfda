//! Increment density, sample likelihood and path likelihood ratio.
//!
//! Densities are taken with respect to the fixed measure `δ₀ + Lebesgue`: an
//! increment that is exactly zero carries the point mass `e^{−λΔ}`, every
//! other increment the continuous density
//!
//! ```text
//! k(x) = Σ_{m=1}^{M} e^{−λΔ} (λΔ)^m / m! · r^{*m}(x)
//! ```
//!
//! truncated at the smallest `M` whose Poisson tail is below `tail_tol`.
//! Likelihood ratios between two models agree with ratios taken against any
//! reference compound-Poisson law.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fftgrid::WrappedGrid;
use crate::linalg;
use crate::model::{CppModel, Grid, NormalMixture, DEFAULT_MAX_COMPONENTS, DEFAULT_PRUNE_TOL};
use crate::rng::RngStream;
use crate::simulate::{format_f64, is_atom, IncrementSample, SamplePath};

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct DensityConfig {
    pub tail_tol: f64,
    pub min_terms: usize,
    pub max_components: usize,
    pub prune_tol: f64,
    /// Upper bound on grid points per axis for the FFT route.
    pub grid_max_points: usize,
    /// Partial-sum draws for the Monte Carlo route.
    pub mc_draws: usize,
    pub mc_seed: u64,
}

impl Default for DensityConfig {
    fn default() -> Self {
        Self {
            tail_tol: 1e-10,
            min_terms: 10,
            max_components: DEFAULT_MAX_COMPONENTS,
            prune_tol: DEFAULT_PRUNE_TOL,
            grid_max_points: 1 << 16,
            mc_draws: 10_000,
            mc_seed: 0,
        }
    }
}

impl DensityConfig {
    pub fn with_terms(mut self, m: usize) -> Self {
        self.min_terms = m;
        self.tail_tol = f64::INFINITY;
        self
    }
}

/// How the convolution powers `r^{*m}` are evaluated.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    Exact,
    Grid,
    MonteCarlo,
}

#[derive(Clone, Debug)]
enum Powers {
    Exact(Vec<NormalMixture>),
    Grid(WrappedGrid),
    /// `sums[s * M + (m-1)]` holds the partial sum `S_{m-1}` of draw `s`.
    MonteCarlo { sums: Vec<Vec<f64>>, draws: usize },
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct DensityMetadata {
    #[serde(rename = "M")]
    pub terms: usize,
    pub tail_mass: f64,
    pub route: Route,
    pub prune_loss: f64,
}

/// Smallest `M ≥ min_terms` with `P(N > M) < tail_tol` for `N ~ Poisson(rate)`,
/// together with that tail mass.
pub fn poisson_truncation(rate: f64, tail_tol: f64, min_terms: usize) -> (usize, f64) {
    // log pmf up to well past the mode, then suffix sums for the tail
    let upper = (rate + 40.0 * rate.sqrt() + 60.0).ceil() as usize + min_terms;
    let mut log_pmf = Vec::with_capacity(upper + 1);
    let ln_rate = rate.ln();
    let mut lf = 0.0;
    for m in 0..=upper {
        if m > 0 {
            lf += (m as f64).ln();
        }
        log_pmf.push(-rate + m as f64 * ln_rate - lf);
    }
    let mut tail = vec![0.0; upper + 2];
    for m in (0..=upper).rev() {
        tail[m] = tail[m + 1] + log_pmf[m].exp();
    }
    // tail[m] = P(N >= m); P(N > M) = tail[M + 1]
    let mut m = min_terms.max(1);
    while m < upper && !(tail[m + 1] < tail_tol) {
        m += 1;
    }
    (m, tail[m + 1])
}

/// The law of one increment `Z = X_Δ − X_0` as atom plus continuous density.
#[derive(Clone, Debug)]
pub struct IncrementDensity {
    model: CppModel,
    mesh: f64,
    log_weights: Vec<f64>,
    atom_mass: f64,
    tail_mass: f64,
    prune_loss: f64,
    powers: Powers,
}

impl IncrementDensity {
    pub fn new(model: &CppModel, mesh: f64, config: &DensityConfig) -> Result<Self> {
        model.validate()?;
        if !(mesh > 0.0 && mesh.is_finite()) {
            return Err(Error::invalid("mesh must be positive"));
        }
        let rate = model.lambda * mesh;
        let (terms, tail_mass) = poisson_truncation(rate, config.tail_tol, config.min_terms);
        let mut log_weights = Vec::with_capacity(terms);
        let mut lf = 0.0;
        for m in 1..=terms {
            lf += (m as f64).ln();
            log_weights.push(-rate + m as f64 * rate.ln() - lf);
        }
        let d = model.dim();
        let exact =
            model
                .jumps
                .convolution_powers(terms, config.max_components, config.prune_tol)?;
        let (powers, prune_loss) = if exact.within_budget {
            (Powers::Exact(exact.powers), exact.pruned_mass)
        } else if d <= 2 {
            (
                Powers::Grid(WrappedGrid::build(
                    &model.jumps,
                    &log_weights,
                    config.grid_max_points,
                )?),
                0.0,
            )
        } else {
            let mut rng = RngStream::new(config.mc_seed, 0x4d43);
            let draws = config.mc_draws.max(1);
            let mut sums = Vec::with_capacity(draws * terms);
            let mut y = vec![0.0; d];
            for _ in 0..draws {
                let mut s = vec![0.0; d];
                for _ in 0..terms {
                    sums.push(s.clone());
                    model.jumps.sample_into(&mut rng, &mut y);
                    for k in 0..d {
                        s[k] += y[k];
                    }
                }
            }
            (Powers::MonteCarlo { sums, draws }, 0.0)
        };
        Ok(Self {
            model: model.clone(),
            mesh,
            log_weights,
            atom_mass: (-rate).exp(),
            tail_mass,
            prune_loss,
            powers,
        })
    }

    pub fn model(&self) -> &CppModel {
        &self.model
    }

    pub fn dim(&self) -> usize {
        self.model.dim()
    }

    pub fn mesh(&self) -> f64 {
        self.mesh
    }

    pub fn terms(&self) -> usize {
        self.log_weights.len()
    }

    pub fn atom_mass(&self) -> f64 {
        self.atom_mass
    }

    /// Poisson mass beyond the truncation point.
    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    pub fn route(&self) -> Route {
        match self.powers {
            Powers::Exact(_) => Route::Exact,
            Powers::Grid(_) => Route::Grid,
            Powers::MonteCarlo { .. } => Route::MonteCarlo,
        }
    }

    /// Series weights `P(N = m)` for `m = 1..=M`.
    pub fn series_weights(&self) -> Vec<f64> {
        self.log_weights.iter().map(|l| l.exp()).collect()
    }

    /// Exact convolution powers when the exact route is active.
    pub fn exact_powers(&self) -> Option<&[NormalMixture]> {
        match &self.powers {
            Powers::Exact(p) => Some(p),
            _ => None,
        }
    }

    pub fn metadata(&self) -> DensityMetadata {
        DensityMetadata {
            terms: self.terms(),
            tail_mass: self.tail_mass,
            route: self.route(),
            prune_loss: self.prune_loss,
        }
    }

    /// Bound on the absolute truncation error of the continuous part.
    pub fn truncation_error_bound(&self) -> f64 {
        self.tail_mass * self.model.jumps.sup_bound()
    }

    /// Log of the continuous part at `x` (the atom is ignored).
    pub fn ln_continuous_unchecked(&self, x: &[f64]) -> f64 {
        let jumps = &self.model.jumps;
        match &self.powers {
            Powers::Exact(p) => {
                let mut max = f64::NEG_INFINITY;
                let mut terms = [0.0f64; 64];
                let mut heap;
                let buf: &mut [f64] = if p.len() <= 64 {
                    &mut terms[..p.len()]
                } else {
                    heap = vec![0.0; p.len()];
                    &mut heap
                };
                for (m, (lw, r)) in self.log_weights.iter().zip(p).enumerate() {
                    let t = lw + r.ln_density_unchecked(x);
                    buf[m] = t;
                    if t > max {
                        max = t;
                    }
                }
                if max == f64::NEG_INFINITY {
                    return max;
                }
                max + buf.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
            }
            Powers::Grid(g) => {
                let first = self.log_weights[0] + jumps.ln_density_unchecked(x);
                match g.interpolate(x) {
                    Some(v) if v > 0.0 && v.ln() > first => v.ln(),
                    _ => first,
                }
            }
            Powers::MonteCarlo { sums, draws } => {
                let d = self.dim();
                let m_terms = self.terms();
                let mut diff = vec![0.0; d];
                let mut acc = Vec::with_capacity(m_terms);
                for m in 0..m_terms {
                    let mut inner = Vec::with_capacity(*draws);
                    for s in 0..*draws {
                        let partial = &sums[s * m_terms + m];
                        for k in 0..d {
                            diff[k] = x[k] - partial[k];
                        }
                        inner.push(jumps.ln_density_unchecked(&diff));
                    }
                    let mean = linalg::log_sum_exp(inner) - (*draws as f64).ln();
                    acc.push(self.log_weights[m] + mean);
                }
                linalg::log_sum_exp(acc)
            }
        }
    }

    /// `(true, e^{−λΔ})` at the exact zero vector, else `(false, k(x))`.
    pub fn increment_density(&self, x: &[f64]) -> Result<(bool, f64)> {
        Error::check_dim(self.dim(), x.len())?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("increment is not finite"));
        }
        if is_atom(x) {
            Ok((true, self.atom_mass))
        } else {
            Ok((false, self.ln_continuous_unchecked(x).exp()))
        }
    }

    /// Continuous part at `x`, ignoring the atom even at the origin.
    pub fn continuous_density(&self, x: &[f64]) -> Result<f64> {
        Error::check_dim(self.dim(), x.len())?;
        Ok(self.ln_continuous_unchecked(x).exp())
    }

    /// Log density with respect to `δ₀ + Lebesgue`.
    pub fn ln_density(&self, x: &[f64]) -> Result<f64> {
        Error::check_dim(self.dim(), x.len())?;
        if is_atom(x) {
            Ok(-self.model.lambda * self.mesh)
        } else {
            Ok(self.ln_continuous_unchecked(x))
        }
    }

    /// Box covering the continuous part up to `sd_mult` standard deviations of
    /// every power with non-negligible weight.
    pub fn support_box(&self, sd_mult: f64) -> (Vec<f64>, Vec<f64>) {
        let d = self.dim();
        let jumps = &self.model.jumps;
        let mut lo = vec![f64::INFINITY; d];
        let mut hi = vec![f64::NEG_INFINITY; d];
        let sd_max = jumps.max_component_sd();
        for (m, lw) in self.log_weights.iter().enumerate() {
            if m > 0 && *lw < (1e-18f64).ln() {
                continue;
            }
            let mf = (m + 1) as f64;
            for mu in jumps.means() {
                for a in 0..d {
                    // sums of m component means lie in the hull of m·μ_i
                    let c = mf * mu[a];
                    let spread = jumps
                        .means()
                        .iter()
                        .map(|o| (mf - 1.0) * (o[a] - mu[a]))
                        .fold(0.0, f64::max);
                    let w = sd_mult * mf.sqrt() * sd_max;
                    lo[a] = lo[a].min(c - w);
                    hi[a] = hi[a].max(c + spread.max(0.0) + w);
                }
            }
        }
        (lo, hi)
    }
}

/// `Σ_i log k_{λ,r}(Z_i)` with respect to `δ₀ + Lebesgue`.
pub fn log_likelihood(
    sample: &IncrementSample,
    model: &CppModel,
    config: &DensityConfig,
) -> Result<f64> {
    Error::check_dim(model.dim(), sample.dim())?;
    let dens = IncrementDensity::new(model, sample.mesh(), config)?;
    log_likelihood_with(sample, &dens)
}

pub fn log_likelihood_with(sample: &IncrementSample, dens: &IncrementDensity) -> Result<f64> {
    Error::check_dim(dens.dim(), sample.dim())?;
    let mut total = 0.0;
    for z in sample.values() {
        total += dens.ln_density(z)?;
    }
    if !total.is_finite() {
        return Err(Error::Numerical("log-likelihood is not finite".into()));
    }
    Ok(total)
}

/// Log of `dR_num/dR_den` evaluated on a continuously observed path:
/// `Σ_jumps log(λ_num r_num(x) / (λ_den r_den(x))) − (λ_num − λ_den)·horizon`.
pub fn path_log_likelihood_ratio(path: &SamplePath, num: &CppModel, den: &CppModel) -> Result<f64> {
    num.validate()?;
    den.validate()?;
    Error::check_dim(num.dim(), den.dim())?;
    let ln_ratio_lambda = num.lambda.ln() - den.lambda.ln();
    let mut total = 0.0;
    for y in &path.jump_values {
        total += ln_ratio_lambda + num.jumps.ln_density(y)? - den.jumps.ln_density(y)?;
    }
    Ok(total - (num.lambda - den.lambda) * path.horizon)
}

/// Continuous part tabulated on a grid.
#[derive(Clone, Debug)]
pub struct DensityGrid {
    pub grid: Grid,
    pub values: Vec<f64>,
    pub metadata: DensityMetadata,
}

impl DensityGrid {
    pub fn integral(&self) -> f64 {
        self.grid.integrate(&self.values)
    }

    /// CSV `x[,y],density`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        write_grid_csv(&self.grid, &[("density", &self.values)], w)
    }
}

pub(crate) fn write_grid_csv<W: Write>(
    grid: &Grid,
    columns: &[(&str, &[f64])],
    w: W,
) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    let mut header: Vec<String> = ["x", "y"][..grid.dim].iter().map(|s| s.to_string()).collect();
    header.extend(columns.iter().map(|(n, _)| n.to_string()));
    wr.write_record(&header)?;
    for (i, node) in grid.nodes().iter().enumerate() {
        let mut row: Vec<String> = node.iter().map(|v| format_f64(*v)).collect();
        row.extend(columns.iter().map(|(_, vals)| format_f64(vals[i])));
        wr.write_record(&row)?;
    }
    wr.flush()?;
    Ok(())
}

/// Evaluates the continuous part at every grid node (d ≤ 2).
pub fn density_grid(dens: &IncrementDensity, grid: &Grid) -> Result<DensityGrid> {
    grid.validate()?;
    if dens.dim() > 2 {
        return Err(Error::Unsupported("density grids need d <= 2".into()));
    }
    Error::check_dim(dens.dim(), grid.dim)?;
    let values = grid
        .nodes()
        .iter()
        .map(|x| dens.ln_continuous_unchecked(x).exp())
        .collect();
    Ok(DensityGrid {
        grid: grid.clone(),
        values,
        metadata: dens.metadata(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::simulate_path;

    fn std_model(lambda: f64) -> CppModel {
        CppModel::new(lambda, NormalMixture::univariate(0.0, 1.0).unwrap()).unwrap()
    }

    #[test]
    fn truncation_meets_tail_tolerance() {
        let (m, tail) = poisson_truncation(1.0, 1e-10, 10);
        assert!(m >= 10);
        assert!(tail < 1e-10);
        let (m1, tail1) = poisson_truncation(1.0, 1e-10, 1);
        assert!(tail1 < 1e-10);
        let (_, before) = poisson_truncation(1.0, f64::INFINITY, m1 - 1);
        assert!(before >= 1e-10);
        assert_eq!(m, m1.max(10));
        let (fixed, _) = poisson_truncation(1.0, f64::INFINITY, 30);
        assert_eq!(fixed, 30);
    }

    #[test]
    fn atom_mass_is_exp_minus_lambda() {
        let d = IncrementDensity::new(&std_model(1.0), 1.0, &DensityConfig::default()).unwrap();
        let (atom, v) = d.increment_density(&[0.0]).unwrap();
        assert!(atom);
        assert_eq!(v, (-1.0f64).exp());
    }

    #[test]
    fn far_tail_has_no_nan() {
        let d = IncrementDensity::new(&std_model(1.0), 1.0, &DensityConfig::default()).unwrap();
        let (atom, v) = d.increment_density(&[50.0]).unwrap();
        assert!(!atom);
        assert!(v >= 0.0 && v.is_finite());
        assert!(d.ln_density(&[50.0]).unwrap().is_finite());
    }

    #[test]
    fn monotone_in_truncation() {
        let m = std_model(2.0);
        let xs = [-3.0, -0.5, 0.1, 1.0, 4.0];
        let mut prev = vec![0.0; xs.len()];
        for terms in 1..15 {
            let d = IncrementDensity::new(&m, 1.0, &DensityConfig::default().with_terms(terms))
                .unwrap();
            for (i, x) in xs.iter().enumerate() {
                let v = d.continuous_density(&[*x]).unwrap();
                assert!(v >= prev[i]);
                prev[i] = v;
            }
        }
    }

    #[test]
    fn zero_sample_likelihood() {
        let s = IncrementSample::new(1, 1.0, vec![vec![0.0]; 7]).unwrap();
        let ll = log_likelihood(&s, &std_model(1.3), &DensityConfig::default()).unwrap();
        assert_eq!(ll, -7.0 * 1.3);
        let best = (0..=30)
            .map(|i| 0.5 + 1.5 * i as f64 / 30.0)
            .map(|l| {
                let s1 = IncrementSample::new(1, 1.0, vec![vec![0.0]]).unwrap();
                (l, log_likelihood(&s1, &std_model(l), &DensityConfig::default()).unwrap())
            })
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        assert_eq!(best.0, 0.5);
    }

    #[test]
    fn path_ratio_identities() {
        let a = std_model(1.5);
        let b = CppModel::new(0.7, NormalMixture::univariate(1.0, 2.0).unwrap()).unwrap();
        let mut rng = RngStream::new(2, 0);
        for _ in 0..20 {
            let p = simulate_path(&a, 2.0, &mut rng).unwrap();
            assert_eq!(path_log_likelihood_ratio(&p, &a, &a).unwrap(), 0.0);
        }
        let empty = SamplePath {
            horizon: 3.0,
            jump_times: vec![],
            jump_values: vec![],
        };
        assert_eq!(
            path_log_likelihood_ratio(&empty, &a, &b).unwrap(),
            -(1.5 - 0.7) * 3.0
        );
    }

    #[test]
    fn grid_route_used_when_budget_exceeded() {
        let jumps = NormalMixture::shared(
            vec![0.4, 0.35, 0.25],
            vec![vec![-1.3], vec![0.2], vec![1.7]],
            vec![0.5],
        )
        .unwrap();
        let model = CppModel::new(1.0, jumps).unwrap();
        let cfg = DensityConfig {
            max_components: 8,
            ..DensityConfig::default()
        };
        let grid_dens = IncrementDensity::new(&model, 1.0, &cfg).unwrap();
        assert_eq!(grid_dens.route(), Route::Grid);
        let exact = IncrementDensity::new(&model, 1.0, &DensityConfig::default()).unwrap();
        assert_eq!(exact.route(), Route::Exact);
        for x in [-4.0, -1.0, 0.3, 2.5, 6.0] {
            let a = grid_dens.continuous_density(&[x]).unwrap();
            let b = exact.continuous_density(&[x]).unwrap();
            assert!((a - b).abs() < 1e-7, "x={x}: {a} vs {b}");
        }
    }

    #[test]
    fn monte_carlo_route_in_three_dims() {
        let jumps = NormalMixture::new(
            3,
            vec![0.5, 0.5],
            vec![vec![0.0, 0.0, 0.0], vec![1.0, -1.0, 0.5]],
            vec![linalg::identity(3), linalg::scaled_identity(3, 0.5)],
            false,
        )
        .unwrap();
        let model = CppModel::new(0.8, jumps).unwrap();
        let cfg = DensityConfig {
            max_components: 4,
            mc_draws: 4000,
            ..DensityConfig::default()
        };
        let mc = IncrementDensity::new(&model, 1.0, &cfg).unwrap();
        assert_eq!(mc.route(), Route::MonteCarlo);
        let exact = IncrementDensity::new(&model, 1.0, &DensityConfig::default()).unwrap();
        let x = [0.3, -0.2, 0.1];
        let a = mc.continuous_density(&x).unwrap();
        let b = exact.continuous_density(&x).unwrap();
        assert!((a / b - 1.0).abs() < 0.05, "{a} vs {b}");
    }

    #[test]
    fn density_grid_rejects_three_dims() {
        let m = CppModel::new(
            1.0,
            NormalMixture::gaussian(vec![0.0; 3], linalg::identity(3)).unwrap(),
        )
        .unwrap();
        let d = IncrementDensity::new(&m, 1.0, &DensityConfig::default()).unwrap();
        let g = Grid::line(-1.0, 1.0, 5).unwrap();
        assert!(density_grid(&d, &g).is_err());
    }
}
