//! Sample paths and discretely observed increments of a compound Poisson process.

use std::io::{Read, Write};

use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::CppModel;
use crate::rng::RngStream;

/// Jump record of `X_t = Σ_{j ≤ N_t} Y_j` on `(0, horizon]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplePath {
    pub horizon: f64,
    pub jump_times: Vec<f64>,
    pub jump_values: Vec<Vec<f64>>,
}

impl SamplePath {
    pub fn jump_count(&self) -> usize {
        self.jump_times.len()
    }

    /// `X_{kΔ} − X_{(k−1)Δ}` for `k = 1..=⌊horizon/Δ⌋`; intervals are right-closed.
    pub fn increments(&self, dim: usize, mesh: f64) -> Result<IncrementSample> {
        if !(mesh > 0.0) {
            return Err(Error::invalid("mesh must be positive"));
        }
        let n = (self.horizon / mesh + 1e-9).floor() as usize;
        let mut z = vec![vec![0.0; dim]; n];
        for (t, y) in self.jump_times.iter().zip(&self.jump_values) {
            let k = ((t / mesh).ceil() as usize).max(1) - 1;
            if k < n {
                for a in 0..dim {
                    z[k][a] += y[a];
                }
            }
        }
        IncrementSample::new(dim, mesh, z)
    }
}

/// Observed increments `Z_1..Z_n` on a regular mesh.
///
/// Zero increments are stored as exact zero vectors so the atom of the
/// increment law at the origin stays detectable.
#[derive(Clone, Debug, PartialEq)]
pub struct IncrementSample {
    dim: usize,
    mesh: f64,
    z: Vec<Vec<f64>>,
}

impl IncrementSample {
    pub fn new(dim: usize, mesh: f64, z: Vec<Vec<f64>>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("sample dimension must be positive"));
        }
        if !(mesh > 0.0 && mesh.is_finite()) {
            return Err(Error::invalid("mesh must be positive"));
        }
        for v in &z {
            Error::check_dim(dim, v.len())?;
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::invalid("increment is not finite"));
            }
        }
        Ok(Self { dim, mesh, z })
    }

    /// A sample with no observations; the posterior then equals the prior.
    pub fn empty(dim: usize, mesh: f64) -> Result<Self> {
        Self::new(dim, mesh, Vec::new())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mesh(&self) -> f64 {
        self.mesh
    }

    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.z
    }

    pub fn zero_count(&self) -> usize {
        self.z.iter().filter(|v| is_atom(v)).count()
    }

    /// Replace increments with `max_k |z_k| ≤ tol` by the exact zero vector.
    pub fn snap_zeros(mut self, tol: f64) -> Self {
        if tol > 0.0 {
            for v in &mut self.z {
                if v.iter().all(|x| x.abs() <= tol) {
                    v.iter_mut().for_each(|x| *x = 0.0);
                }
            }
        }
        self
    }

    pub fn permuted(&self, order: &[usize]) -> Self {
        Self {
            dim: self.dim,
            mesh: self.mesh,
            z: order.iter().map(|&i| self.z[i].clone()).collect(),
        }
    }

    /// CSV with header `z1,...,zd`, 17 significant digits per value.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record((1..=self.dim).map(|k| format!("z{k}")))?;
        for v in &self.z {
            wr.write_record(v.iter().map(|x| format_f64(*x)))?;
        }
        wr.flush()?;
        Ok(())
    }

    /// Reads the CSV format written by [`IncrementSample::write_csv`]. A
    /// completely empty input yields an empty sample of dimension `fallback_dim`.
    pub fn read_csv<R: Read>(r: R, mesh: f64, fallback_dim: usize) -> Result<Self> {
        let mut rd = csv::ReaderBuilder::new().has_headers(false).from_reader(r);
        let mut records = rd.records();
        let header = match records.next() {
            None => return Self::empty(fallback_dim, mesh),
            Some(h) => h?,
        };
        let dim = header.len();
        for (k, name) in header.iter().enumerate() {
            if name.trim() != format!("z{}", k + 1) {
                return Err(Error::invalid(format!(
                    "unexpected CSV header field '{name}', expected z{}",
                    k + 1
                )));
            }
        }
        let mut z = Vec::new();
        for rec in records {
            let rec = rec?;
            let row = rec
                .iter()
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::invalid(format!("bad number '{s}': {e}")))
                })
                .collect::<Result<Vec<f64>>>()?;
            z.push(row);
        }
        Self::new(dim, mesh, z)
    }
}

/// An increment is the atom iff every coordinate is exactly zero.
#[inline]
pub fn is_atom(z: &[f64]) -> bool {
    z.iter().all(|x| *x == 0.0)
}

pub(crate) fn format_f64(x: f64) -> String {
    if x == 0.0 {
        "0".to_string()
    } else {
        format!("{x:.16e}")
    }
}

pub(crate) fn poisson_count(rate: f64, rng: &mut RngStream) -> usize {
    if rate <= 0.0 {
        return 0;
    }
    let p = Poisson::new(rate).expect("positive Poisson rate");
    let k: f64 = p.sample(rng);
    k as usize
}

/// Simulates the jump record on `(0, horizon]`.
pub fn simulate_path(model: &CppModel, horizon: f64, rng: &mut RngStream) -> Result<SamplePath> {
    model.validate()?;
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::invalid("horizon must be positive"));
    }
    let n = poisson_count(model.lambda * horizon, rng);
    let mut times: Vec<f64> = (0..n).map(|_| horizon * (1.0 - rng.open01())).collect();
    times.sort_by(f64::total_cmp);
    let values = (0..n).map(|_| model.jumps.sample(rng)).collect();
    Ok(SamplePath {
        horizon,
        jump_times: times,
        jump_values: values,
    })
}

/// Draws one increment over a mesh interval into `out`; returns the jump count.
pub fn sample_increment_into(
    model: &CppModel,
    mesh: f64,
    rng: &mut RngStream,
    out: &mut [f64],
) -> usize {
    out.iter_mut().for_each(|x| *x = 0.0);
    let t = poisson_count(model.lambda * mesh, rng);
    let mut y = vec![0.0; model.dim()];
    for _ in 0..t {
        model.jumps.sample_into(rng, &mut y);
        for (o, v) in out.iter_mut().zip(&y) {
            *o += v;
        }
    }
    t
}

/// `n` i.i.d. increments `Z_i = Σ_{j ≤ T_i} Y_{ij}` with `T_i ~ Poisson(λ·mesh)`.
pub fn simulate_increments(
    model: &CppModel,
    n: usize,
    mesh: f64,
    rng: &mut RngStream,
) -> Result<IncrementSample> {
    model.validate()?;
    if n == 0 {
        return Err(Error::invalid("need at least one increment"));
    }
    if !(mesh > 0.0 && mesh.is_finite()) {
        return Err(Error::invalid("mesh must be positive"));
    }
    let d = model.dim();
    let z = (0..n)
        .map(|_| {
            let mut v = vec![0.0; d];
            sample_increment_into(model, mesh, rng, &mut v);
            v
        })
        .collect();
    IncrementSample::new(d, mesh, z)
}

/// Sidecar metadata written next to a simulated increment CSV.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SampleSidecar {
    pub lambda_true: Option<f64>,
    pub mesh: f64,
    pub seed: Option<u64>,
    pub model: Option<CppModel>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::NormalMixture;

    fn std_model(lambda: f64) -> CppModel {
        CppModel::new(lambda, NormalMixture::univariate(0.0, 1.0).unwrap()).unwrap()
    }

    #[test]
    fn mean_jump_count_matches_lambda() {
        let m = std_model(1.0);
        let mut rng = RngStream::new(11, 0);
        let reps = 100_000;
        let total: usize = (0..reps)
            .map(|_| simulate_path(&m, 1.0, &mut rng).unwrap().jump_count())
            .sum();
        let mean = total as f64 / reps as f64;
        assert!((mean - 1.0).abs() < 3.0 * (1.0 / reps as f64).sqrt());
    }

    #[test]
    fn tiny_intensity_mostly_empty_paths() {
        let m = std_model(1e-6);
        let mut rng = RngStream::new(12, 0);
        let reps = 100_000;
        let zeros = (0..reps)
            .filter(|_| simulate_path(&m, 1.0, &mut rng).unwrap().jump_count() == 0)
            .count();
        let p = (-1e-6f64).exp();
        let frac = zeros as f64 / reps as f64;
        let sd = (p * (1.0 - p) / reps as f64).sqrt();
        assert!((frac - p).abs() <= 3.0 * sd + 1.0 / reps as f64);
    }

    #[test]
    fn paths_are_sorted_and_deterministic() {
        let m = std_model(5.0);
        let a = simulate_path(&m, 3.0, &mut RngStream::new(3, 1)).unwrap();
        let b = simulate_path(&m, 3.0, &mut RngStream::new(3, 1)).unwrap();
        assert_eq!(a, b);
        assert!(a.jump_times.windows(2).all(|w| w[0] < w[1]));
        assert!(a.jump_times.iter().all(|&t| t > 0.0 && t <= 3.0));
        assert_eq!(a.jump_times.len(), a.jump_values.len());
    }

    #[test]
    fn zero_fraction_matches_atom_mass() {
        let m = std_model(1.0);
        let n = 100_000;
        let s = simulate_increments(&m, n, 1.0, &mut RngStream::new(5, 0)).unwrap();
        let p = (-1.0f64).exp();
        let frac = s.zero_count() as f64 / n as f64;
        assert!((frac - p).abs() < 3.0 * (p * (1.0 - p) / n as f64).sqrt());
    }

    #[test]
    fn compound_moments() {
        let m = std_model(2.0);
        let n = 100_000;
        let s = simulate_increments(&m, n, 1.0, &mut RngStream::new(6, 0)).unwrap();
        let xs: Vec<f64> = s.values().iter().map(|v| v[0]).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!(mean.abs() < 3.0 * (2.0 / n as f64).sqrt());
        assert!((var - 2.0).abs() < 0.05 * 2.0);
    }

    #[test]
    fn single_increment_shape() {
        let s = simulate_increments(&std_model(1.0), 1, 1.0, &mut RngStream::new(1, 0)).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s.values()[0].len(), 1);
        assert!(simulate_increments(&std_model(1.0), 0, 1.0, &mut RngStream::new(1, 0)).is_err());
    }

    #[test]
    fn csv_roundtrip_preserves_exact_zeros() {
        let s = simulate_increments(&std_model(1.0), 50, 1.0, &mut RngStream::new(8, 0)).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("z1\n"));
        let back = IncrementSample::read_csv(&buf[..], 1.0, 1).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.zero_count(), s.zero_count());
    }

    #[test]
    fn empty_csv_is_empty_sample() {
        let s = IncrementSample::read_csv(&b""[..], 1.0, 2).unwrap();
        assert!(s.is_empty());
        assert_eq!(s.dim(), 2);
        let s = IncrementSample::read_csv(&b"z1,z2\n"[..], 1.0, 1).unwrap();
        assert_eq!(s.dim(), 2);
        assert!(IncrementSample::read_csv(&b"a,b\n"[..], 1.0, 1).is_err());
    }

    #[test]
    fn snap_zeros_applies_tolerance() {
        let s = IncrementSample::new(1, 1.0, vec![vec![1e-13], vec![0.5]]).unwrap();
        assert_eq!(s.zero_count(), 0);
        assert_eq!(s.snap_zeros(1e-12).zero_count(), 1);
    }

    #[test]
    fn path_increments_partition_jumps() {
        let m = std_model(3.0);
        let p = simulate_path(&m, 10.0, &mut RngStream::new(4, 0)).unwrap();
        let inc = p.increments(1, 1.0).unwrap();
        assert_eq!(inc.len(), 10);
        let total: f64 = inc.values().iter().map(|v| v[0]).sum();
        let direct: f64 = p.jump_values.iter().map(|v| v[0]).sum();
        assert!((total - direct).abs() < 1e-12);
    }
}
