//! Dilute capacitance of a chain periodic along x, at a fixed Bloch
//! parameter.

use std::f64::consts::PI;

use faer::Mat;
use num_complex::Complex64 as c64;
use serde::Serialize;

use super::dilute::REFERENCE_CAPACITY;
use crate::error::{Error, Result};
use crate::geometry::ResonatorSystem;
use crate::linalg;

pub const DEFAULT_TRUNCATION: usize = 10_000;

/// Relative tail size above which a warning is logged.
const TAIL_WARNING: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct BlochCapacitance {
    pub entries: Mat<c64>,
    pub alpha: f64,
    pub period: f64,
    pub truncation: usize,
    /// Largest change of a lattice sum between truncation `M/2` and `M`.
    pub tail_estimate: f64,
}

#[derive(Serialize)]
struct BlochJson<'a> {
    n: usize,
    backend: &'a str,
    alpha: f64,
    period: f64,
    truncation: usize,
    tail_estimate: f64,
    entries: Vec<Vec<[f64; 2]>>,
}

impl BlochCapacitance {
    pub fn len(&self) -> usize {
        self.entries.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, i: usize, j: usize) -> c64 {
        self.entries[(i, j)]
    }

    /// Ascending real eigenvalues and eigenvectors.
    pub fn eigen(&self) -> Result<(Vec<f64>, Mat<c64>)> {
        linalg::herm_eigen(self.entries.as_ref())
    }

    pub fn hermitian_defect(&self) -> f64 {
        linalg::hermitian_defect(self.entries.as_ref())
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(BlochJson {
            n: self.len(),
            backend: "quasiperiodic",
            alpha: self.alpha,
            period: self.period,
            truncation: self.truncation,
            tail_estimate: self.tail_estimate,
            entries: super::complex_rows(&self.entries),
        })
        .expect("bloch matrix serializes")
    }
}

/// Smallest admissible |alpha|; the lattice sum diverges logarithmically at 0.
pub fn alpha_min(period: f64) -> f64 {
    1e-3 * PI / period
}

/// `sum_{m != 0} e^{i m theta} / (|m| period)`.
fn axial_sum(theta: f64, period: f64) -> f64 {
    -2.0 / period * (2.0 * (0.5 * theta).sin().abs()).ln()
}

/// Sum of `e^{i m theta} (1/|d - m period e_x| - 1/(|m| period))` over
/// `0 < |m| <= limit`, together with the partial sum at `limit / 2`.
fn corrected_sum(d: [f64; 3], theta: f64, period: f64, limit: usize) -> (c64, c64) {
    let lateral = d[1] * d[1] + d[2] * d[2];
    let term = |m: f64| {
        let x = d[0] - m * period;
        1.0 / (x * x + lateral).sqrt() - 1.0 / (m.abs() * period)
    };
    let half = limit / 2;
    let mut total = c64::new(0.0, 0.0);
    let mut at_half = total;
    // accumulate from the far end so that small terms are added first
    for m in (1..=limit).rev() {
        let mf = m as f64;
        let (s, c) = (mf * theta).sin_cos();
        let plus = term(mf);
        let minus = term(-mf);
        total += c64::new(c * (plus + minus), s * (plus - minus));
        if m == half + 1 {
            at_half = total;
        }
    }
    let partial_half = total - at_half;
    (total, partial_half)
}

pub fn quasiperiodic_capacitance(
    unit_cell: &ResonatorSystem,
    alpha: f64,
    period: f64,
    truncation: usize,
) -> Result<BlochCapacitance> {
    if !(period.is_finite() && period > 0.0) {
        return Err(Error::InvalidArgument(format!("period must be positive, got {period}")));
    }
    if truncation < 2 {
        return Err(Error::InvalidArgument("truncation must be at least 2".into()));
    }
    let amin = alpha_min(period);
    if alpha.abs() < amin {
        return Err(Error::Divergence { alpha, alpha_min: amin });
    }
    if alpha.abs() > PI / period * (1.0 + 1e-12) {
        return Err(Error::InvalidArgument(format!("alpha = {alpha} lies outside the Brillouin zone")));
    }
    let n = unit_cell.len();
    let theta = alpha * period;
    let cap = REFERENCE_CAPACITY;
    let coupling = unit_cell.gamma * cap * cap / (4.0 * PI);
    let axial = axial_sum(theta, period);
    let mut entries = Mat::<c64>::zeros(n, n);
    let mut tail: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            let zi = unit_cell.centers[i];
            let zj = unit_cell.centers[j];
            let d = [zi[0] - zj[0], zi[1] - zj[1], zi[2] - zj[2]];
            let mut sum = c64::new(axial, 0.0);
            if i != j {
                let r = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
                if r == 0.0 {
                    return Err(Error::DegenerateGeometry { i, j });
                }
                let (full, half) = corrected_sum(d, theta, period, truncation);
                tail = tail.max((full - half).norm());
                sum += full + 1.0 / r;
            }
            let value = if i == j { c64::new(cap, 0.0) - coupling * sum } else { -coupling * sum };
            entries[(i, j)] = value;
            entries[(j, i)] = value.conj();
        }
    }
    for i in 0..n {
        entries[(i, i)] = c64::new(entries[(i, i)].re, 0.0);
    }
    let tail_estimate = coupling * tail;
    if tail_estimate > TAIL_WARNING * cap {
        log::warn!("lattice sum tail estimate {tail_estimate:.3e} at alpha = {alpha:.4}");
    }
    Ok(BlochCapacitance {
        entries,
        alpha,
        period,
        truncation,
        tail_estimate,
    })
}
