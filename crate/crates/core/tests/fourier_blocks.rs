//! Expansion blocks of the Hill matrix against quadrature Fourier
//! coefficients of finite-difference amplitude derivatives.

use std::f64::consts::PI;

use faer::Mat;
use num_complex::Complex64 as c64;

use floquet_edge::capacitance::dilute_capacitance;
use floquet_edge::error::Error;
use floquet_edge::geometry::{build_supercell_chain, ResonatorSystem};
use floquet_edge::hill::{assemble_m, epsilon_fourier_blocks, scaled_fourier_blocks, FourierBlocks, Modulation, PhasePreset};
use floquet_edge::linalg;

const NODES: usize = 64;

/// Order-`order` amplitude derivative of `M(t)` divided by `order!`, where
/// the amplitudes are `e * weights`.
fn derivative(system: &ResonatorSystem, weights: &[f64], phases: &[f64], omega: f64, order: usize, t: f64) -> Mat<f64> {
    let c = dilute_capacitance(system).unwrap();
    let n = weights.len();
    let at = |e: f64| {
        let m = Modulation::new(omega, weights.iter().map(|w| w * e).collect(), phases.to_vec()).unwrap();
        assemble_m(&c, system, &m, t).unwrap()
    };
    let m0 = at(0.0);
    let stencil = |h: f64| {
        let (p, q) = (at(h), at(-h));
        Mat::from_fn(n, n, |i, j| match order {
            1 => (p[(i, j)] - q[(i, j)]) / (2.0 * h),
            _ => (p[(i, j)] + q[(i, j)] - 2.0 * m0[(i, j)]) / (2.0 * h * h),
        })
    };
    let (a, b) = (stencil(1e-3), stencil(2e-3));
    Mat::from_fn(n, n, |i, j| (4.0 * a[(i, j)] - b[(i, j)]) / 3.0)
}

/// Trapezoidal `(1/T) int f(t) e^{-i m Omega t} dt`, exact for the
/// trigonometric polynomials involved.
fn fourier(samples: &[Mat<f64>], m: i32) -> Mat<c64> {
    let n = samples[0].nrows();
    let mut out = Mat::<c64>::zeros(n, n);
    for (k, s) in samples.iter().enumerate() {
        let w = c64::from_polar(1.0 / NODES as f64, -(m as f64) * 2.0 * PI * k as f64 / NODES as f64);
        for i in 0..n {
            for j in 0..n {
                out[(i, j)] += w * s[(i, j)];
            }
        }
    }
    out
}

fn check(system: &ResonatorSystem, weights: &[f64], phases: &[f64], blocks: &FourierBlocks) {
    let omega = 2.0;
    let period = 2.0 * PI / omega;
    let scale = blocks.m0.norm_max();
    for order in [1, 2] {
        let samples: Vec<Mat<f64>> =
            (0..NODES).map(|k| derivative(system, weights, phases, omega, order, k as f64 * period / NODES as f64)).collect();
        for m in -3..=3 {
            let quad = fourier(&samples, m);
            let n = quad.nrows();
            let block = blocks.harmonic(order, m).unwrap_or_else(|| Mat::zeros(n, n));
            let diff = Mat::from_fn(n, n, |i, j| quad[(i, j)] - block[(i, j)]);
            let err = linalg::max_abs(diff.as_ref());
            assert!(err <= 1e-8 * scale, "order {order} harmonic {m}: error {err:e} (scale {scale:e})");
        }
    }
}

#[test]
fn uniform_blocks_match_quadrature() {
    let s = build_supercell_chain(1, 0.1).unwrap();
    let c = dilute_capacitance(&s).unwrap();
    let phases = PhasePreset::Supercell.phases(6);
    let blocks = epsilon_fourier_blocks(&c, &s, &Modulation::uniform(2.0, 0.2, phases.clone()).unwrap()).unwrap();
    check(&s, &[1.0; 6], &phases, &blocks);
    // constant first-order harmonic vanishes identically
    assert!(blocks.harmonic(1, 0).is_none());
}

#[test]
fn scaled_blocks_match_quadrature() {
    let s = build_supercell_chain(1, 0.1).unwrap();
    let c = dilute_capacitance(&s).unwrap();
    let phases = vec![0.3, 1.1, -2.0, 2.9, 0.0, 4.4];
    let amplitudes = vec![0.19, 0.22, 0.2, 0.15, 0.25, 0.21];
    let m = Modulation::new(2.0, amplitudes.clone(), phases.clone()).unwrap();
    let blocks = scaled_fourier_blocks(&c, &s, &m).unwrap();
    let mean = amplitudes.iter().sum::<f64>() / 6.0;
    assert!((blocks.epsilon - mean).abs() < 1e-15);
    let weights: Vec<f64> = amplitudes.iter().map(|a| a / mean).collect();
    check(&s, &weights, &phases, &blocks);
    assert!(matches!(epsilon_fourier_blocks(&c, &s, &m), Err(Error::NonUniformAmplitude)));
}

#[test]
fn scaled_blocks_reduce_to_uniform() {
    let s = build_supercell_chain(2, 0.1).unwrap();
    let c = dilute_capacitance(&s).unwrap();
    let m = Modulation::uniform(2.0, 0.2, PhasePreset::Supercell.phases(12)).unwrap();
    let a = epsilon_fourier_blocks(&c, &s, &m).unwrap();
    let b = scaled_fourier_blocks(&c, &s, &m).unwrap();
    for (order, h) in [(1, 1), (2, 0), (2, 2)] {
        let (x, y) = (a.harmonic(order, h).unwrap(), b.harmonic(order, h).unwrap());
        let diff = Mat::from_fn(12, 12, |i, j| x[(i, j)] - y[(i, j)]);
        assert!(linalg::max_abs(diff.as_ref()) <= 1e-14 * a.m0.norm_max());
    }
}
