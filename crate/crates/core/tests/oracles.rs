mod common;

use common::{simpson, Periodic};
use decompound::likelihood::Route;
use decompound::metrics::{self, Kind, Method, MetricsConfig};
use decompound::{CppModel, DensityConfig, IncrementDensity, NormalMixture};

fn bimodal() -> NormalMixture {
    NormalMixture::new(
        1,
        vec![0.3, 0.7],
        vec![vec![-1.5], vec![1.0]],
        vec![vec![0.5], vec![0.8]],
        false,
    )
    .unwrap()
}

#[test]
fn third_power_matches_spectral_power() {
    let r = bimodal();
    let exact = r.self_convolve(3, 1000, 0.0).unwrap();
    assert!(exact.within_budget);
    assert_eq!(exact.mixture.len(), 4);
    let per = Periodic::new(40.0, 1 << 13);
    let oracle = per.power(&r, 3);
    let mut worst: f64 = 0.0;
    for (j, o) in oracle.iter().enumerate() {
        let x = per.x(j);
        if x.abs() <= 12.0 {
            worst = worst.max((exact.mixture.density(&[x]).unwrap() - o).abs());
        }
    }
    assert!(worst < 1e-6, "sup error {worst}");
}

#[test]
fn increment_density_matches_spectral_inversion_with_mesh() {
    let model = CppModel::new(2.5, bimodal()).unwrap();
    let mesh = 0.5;
    let dens = IncrementDensity::new(&model, mesh, &DensityConfig::default()).unwrap();
    assert!((dens.atom_mass() - (-1.25f64).exp()).abs() < 1e-15);
    let per = Periodic::new(50.0, 1 << 14);
    let oracle = per.increment_continuous(&model.jumps, 2.5 * mesh);
    let mut worst: f64 = 0.0;
    for (j, o) in oracle.iter().enumerate() {
        let x = per.x(j);
        if x.abs() <= 10.0 && x != 0.0 {
            worst = worst.max((dens.continuous_density(&[x]).unwrap() - o).abs());
        }
    }
    assert!(worst < 1e-8, "sup error {worst}");
}

#[test]
fn grid_route_agrees_with_exact_series() {
    let model = CppModel::new(1.5, bimodal()).unwrap();
    let exact = IncrementDensity::new(&model, 1.0, &DensityConfig::default()).unwrap();
    let cfg = DensityConfig {
        max_components: 1,
        ..DensityConfig::default()
    };
    let grid = IncrementDensity::new(&model, 1.0, &cfg).unwrap();
    assert_eq!(exact.route(), Route::Exact);
    assert_eq!(grid.route(), Route::Grid);
    for i in 0..=80 {
        let x = -8.0 + 0.2 * i as f64 + 0.013;
        let a = exact.continuous_density(&[x]).unwrap();
        let b = grid.continuous_density(&[x]).unwrap();
        assert!((a - b).abs() < 1e-5, "x = {x}: {a} vs {b}");
    }
}

#[test]
fn two_dimensional_grid_route_agrees_with_exact_series() {
    let jumps = NormalMixture::new(
        2,
        vec![0.5, 0.5],
        vec![vec![1.0, 0.0], vec![-0.5, 1.0]],
        vec![vec![1.0, 0.3, 0.3, 0.8], vec![0.6, 0.0, 0.0, 0.6]],
        false,
    )
    .unwrap();
    let model = CppModel::new(1.0, jumps).unwrap();
    let exact = IncrementDensity::new(&model, 1.0, &DensityConfig::default()).unwrap();
    let cfg = DensityConfig {
        max_components: 1,
        ..DensityConfig::default()
    };
    let grid = IncrementDensity::new(&model, 1.0, &cfg).unwrap();
    assert_eq!(grid.route(), Route::Grid);
    for i in 0..9 {
        for j in 0..9 {
            let x = [-4.0 + i as f64 + 0.1, -4.0 + j as f64 + 0.2];
            let a = exact.continuous_density(&x).unwrap();
            let b = grid.continuous_density(&x).unwrap();
            assert!((a - b).abs() < 1e-4, "{x:?}: {a} vs {b}");
        }
    }
}

#[test]
fn gaussian_divergences_match_closed_forms() {
    let cfg = MetricsConfig::default();
    // N(0,1) against N(0.7, 1.5²)
    let p = NormalMixture::univariate(0.0, 1.0).unwrap();
    let q = NormalMixture::univariate(0.7, 2.25).unwrap();
    let s2: f64 = 2.25;
    let kl = 0.5 * (1.0 / s2 + 0.49 / s2 - 1.0 + s2.ln());
    let bc = (2.0 * 1.5 / (1.0 + s2)).sqrt() * (-0.49 / (4.0 * (1.0 + s2))).exp();
    let h = (2.0 - 2.0 * bc).sqrt();
    // V by direct Simpson quadrature of p (ln p − ln q)²
    let v = simpson(
        |x| {
            let lr = p.ln_density(&[x]).unwrap() - q.ln_density(&[x]).unwrap();
            p.density(&[x]).unwrap() * lr * lr
        },
        -14.0,
        14.0,
        20_000,
    );
    let got = |k| metrics::divergence_p(k, &p, &q, Method::Quadrature, &cfg).unwrap().value;
    assert!((got(Kind::Kl) - kl).abs() < 1e-9);
    assert!((got(Kind::Hellinger) - h).abs() < 1e-9);
    assert!((got(Kind::V) - v).abs() < 1e-8);
}

#[test]
fn increment_kl_matches_direct_quadrature() {
    let m0 = CppModel::new(1.0, NormalMixture::univariate(0.0, 1.0).unwrap()).unwrap();
    let m1 = CppModel::new(1.4, NormalMixture::univariate(0.3, 1.3).unwrap()).unwrap();
    let cfg = MetricsConfig::default();
    let d0 = IncrementDensity::new(&m0, 1.0, &cfg.density).unwrap();
    let d1 = IncrementDensity::new(&m1, 1.0, &cfg.density).unwrap();
    let (a0, a1) = (d0.atom_mass(), d1.atom_mass());
    let cont = simpson(
        |x| {
            let q0 = d0.continuous_density(&[x]).unwrap();
            let q1 = d1.continuous_density(&[x]).unwrap();
            if q0 > 0.0 {
                q0 * (q0 / q1).ln()
            } else {
                0.0
            }
        },
        -30.0,
        30.0,
        60_000,
    );
    let expected = a0 * (a0 / a1).ln() + cont;
    let got = metrics::divergence_q(Kind::Kl, &m0, &m1, Method::Quadrature, &cfg).unwrap();
    assert!((got.value - expected).abs() < 1e-8, "{} vs {expected}", got.value);
}

#[test]
fn scalar_divergences() {
    assert!((metrics::scalar_k(2.0, 1.0).unwrap() - (2.0 * 2f64.ln() - 1.0)).abs() < 1e-15);
    assert!((metrics::scalar_h(4.0, 1.0).unwrap() - 1.0).abs() < 1e-15);
    assert!((metrics::scalar_v(1.0, std::f64::consts::E).unwrap() - 1.0).abs() < 1e-15);
}
