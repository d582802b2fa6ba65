//! Gauss-Legendre nodes, real spherical harmonics and a product quadrature on
//! the unit sphere.

use std::f64::consts::PI;

/// Nodes and weights of the `n`-point Gauss-Legendre rule on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre_with_derivative(n, z);
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, z);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Number of real harmonics of degree at most `degree`.
pub fn basis_len(degree: usize) -> usize {
    (degree + 1) * (degree + 1)
}

/// Index of `(n, m)` in the flat basis ordering, `-n <= m <= n`.
pub fn basis_index(n: usize, m: i64) -> usize {
    n * n + (m + n as i64) as usize
}

/// Orthonormal real spherical harmonics at polar angle with cosine `x` and
/// azimuth `phi`, all degrees up to `degree`.
#[allow(clippy::needless_range_loop)]
pub fn real_harmonics(degree: usize, x: f64, phi: f64) -> Vec<f64> {
    let s = (1.0 - x * x).max(0.0).sqrt();
    // fully normalized associated Legendre functions, no Condon-Shortley phase
    let mut p = vec![vec![0.0; degree + 1]; degree + 1];
    p[0][0] = 1.0 / (4.0 * PI).sqrt();
    for m in 1..=degree {
        let mf = m as f64;
        p[m][m] = ((2.0 * mf + 1.0) / (2.0 * mf)).sqrt() * s * p[m - 1][m - 1];
    }
    for m in 0..degree {
        p[m + 1][m] = (2.0 * m as f64 + 3.0).sqrt() * x * p[m][m];
    }
    for m in 0..=degree {
        for n in m + 2..=degree {
            let (nf, mf) = (n as f64, m as f64);
            let a = ((4.0 * nf * nf - 1.0) / (nf * nf - mf * mf)).sqrt();
            let b = (((nf - 1.0).powi(2) - mf * mf) / (4.0 * (nf - 1.0).powi(2) - 1.0)).sqrt();
            p[n][m] = a * (x * p[n - 1][m] - b * p[n - 2][m]);
        }
    }
    let mut out = vec![0.0; basis_len(degree)];
    let r2 = std::f64::consts::SQRT_2;
    for n in 0..=degree {
        out[basis_index(n, 0)] = p[n][0];
        for m in 1..=n {
            let (sm, cm) = (m as f64 * phi).sin_cos();
            out[basis_index(n, m as i64)] = r2 * p[n][m] * cm;
            out[basis_index(n, -(m as i64))] = r2 * p[n][m] * sm;
        }
    }
    out
}

/// Product rule on the unit sphere: Gauss-Legendre in `cos(theta)` times
/// an equispaced azimuth grid.
#[derive(Clone, Debug)]
pub struct SphereQuadrature {
    pub directions: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    pub polar: Vec<f64>,
    pub azimuth: Vec<f64>,
}

impl SphereQuadrature {
    pub fn new(polar_nodes: usize, azimuth_nodes: usize) -> Self {
        let (xs, ws) = gauss_legendre(polar_nodes);
        let dphi = 2.0 * PI / azimuth_nodes as f64;
        let mut directions = Vec::with_capacity(polar_nodes * azimuth_nodes);
        let mut weights = Vec::with_capacity(polar_nodes * azimuth_nodes);
        let mut polar = Vec::new();
        let mut azimuth = Vec::new();
        for (&x, &w) in xs.iter().zip(&ws) {
            let s = (1.0 - x * x).sqrt();
            for k in 0..azimuth_nodes {
                let phi = dphi * k as f64;
                directions.push([s * phi.cos(), s * phi.sin(), x]);
                weights.push(w * dphi);
                polar.push(x);
                azimuth.push(phi);
            }
        }
        Self {
            directions,
            weights,
            polar,
            azimuth,
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}
