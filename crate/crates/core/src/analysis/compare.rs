//! Numeric edge pairs from the monodromy spectrum and their comparison with
//! predicted modes.

use faer::Mat;
use num_complex::Complex64 as c64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::floquet::{folded_distance, FloquetSpectrum, Quasifrequency};
use crate::linalg;

/// Determinant of the overlap matrix below which the pairing is ambiguous.
const AMBIGUOUS_DET: f64 = 1e-6;

/// Two positive-branch Floquet modes selected by their overlap with a
/// reference two-space.
#[derive(Clone, Debug, Serialize)]
pub struct NumericPair {
    /// Indices into the spectrum, ordered by folded real part.
    pub indices: [usize; 2],
    pub quasifrequencies: [Quasifrequency; 2],
    /// Resonator amplitudes at `t = 0`, max modulus 1.
    pub modes: [Vec<c64>; 2],
    /// Share of each mode inside the reference span.
    pub scores: [f64; 2],
    /// Distance between the two quasifrequencies, real parts on the circle.
    pub split: f64,
}

fn complex_split(a: &Quasifrequency, b: &Quasifrequency, omega: f64) -> f64 {
    folded_distance(a.re, b.re, omega).hypot(a.im - b.im)
}

/// Select the two positive-branch modes with the largest share in
/// `span(reference)`.
pub fn numeric_pair(spectrum: &FloquetSpectrum, reference: &[Vec<c64>]) -> Result<NumericPair> {
    let n = spectrum.vectors.nrows() / 2;
    if reference.is_empty() || reference.iter().any(|r| r.len() != n) {
        return Err(Error::Dimension {
            expected: n,
            found: reference.first().map_or(0, Vec::len),
        });
    }
    let refs = Mat::from_fn(n, reference.len(), |i, k| reference[k][i]);
    let q = linalg::orthonormalize(refs.as_ref())?;
    let score = |k: usize| -> f64 {
        let a = spectrum.amplitudes(k);
        let total: f64 = a.iter().map(|z| z.norm_sqr()).sum();
        if total == 0.0 {
            return 0.0;
        }
        let inside: f64 = (0..q.ncols())
            .map(|c| {
                let col: Vec<c64> = (0..n).map(|i| q[(i, c)]).collect();
                linalg::dot(&col, &a).norm_sqr()
            })
            .sum();
        inside / total
    };
    let mut candidates: Vec<(usize, f64)> = spectrum.positive_branch().into_iter().map(|k| (k, score(k))).collect();
    if candidates.len() < 2 {
        return Err(Error::NoDegeneratePair);
    }
    candidates.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut chosen = [candidates[0], candidates[1]];
    chosen.sort_by(|a, b| spectrum.modes[a.0].re.total_cmp(&spectrum.modes[b.0].re));
    let mode = |k: usize| -> Result<Vec<c64>> {
        let mut a = spectrum.amplitudes(k);
        linalg::normalize_max(&mut a)?;
        Ok(a)
    };
    let (qa, qb) = (spectrum.modes[chosen[0].0], spectrum.modes[chosen[1].0]);
    Ok(NumericPair {
        indices: [chosen[0].0, chosen[1].0],
        quasifrequencies: [qa, qb],
        modes: [mode(chosen[0].0)?, mode(chosen[1].0)?],
        scores: [chosen[0].1, chosen[1].1],
        split: complex_split(&qa, &qb, spectrum.omega),
    })
}

/// `mode` times the unit phase maximizing `Re <reference, mode>`.
pub fn align_phase(reference: &[c64], mode: &[c64]) -> Vec<c64> {
    let ip = linalg::dot(mode, reference);
    let phase = if ip.norm() > 0.0 { ip / ip.norm() } else { c64::new(1.0, 0.0) };
    mode.iter().map(|z| z * phase).collect()
}

/// Relative l2 distance after phase alignment.
pub fn aligned_error(reference: &[c64], mode: &[c64]) -> f64 {
    let aligned = align_phase(reference, mode);
    let diff: Vec<c64> = reference.iter().zip(&aligned).map(|(a, b)| a - b).collect();
    linalg::norm2(&diff) / linalg::norm2(reference)
}

#[derive(Clone, Debug, Serialize)]
pub struct ModeComparison {
    /// Numeric index matched to each predicted mode.
    pub pairing: [usize; 2],
    /// Phase-aligned relative l2 errors per predicted mode.
    pub errors: [f64; 2],
    /// Normalized overlap moduli `|<p_a, n_b>|`.
    pub overlaps: [[f64; 2]; 2],
    /// Largest principal angle between the two spans.
    pub subspace_angle: f64,
}

pub fn compare_modes(predicted: [&[c64]; 2], numeric: [&[c64]; 2]) -> Result<ModeComparison> {
    let n = predicted[0].len();
    if predicted.iter().chain(numeric.iter()).any(|v| v.len() != n) {
        return Err(Error::Dimension {
            expected: n,
            found: numeric[0].len(),
        });
    }
    let mut overlaps = [[0.0; 2]; 2];
    for a in 0..2 {
        for b in 0..2 {
            let denom = linalg::norm2(predicted[a]) * linalg::norm2(numeric[b]);
            if denom == 0.0 {
                return Err(Error::ZeroVector);
            }
            overlaps[a][b] = linalg::dot(predicted[a], numeric[b]).norm() / denom;
        }
    }
    let det = overlaps[0][0] * overlaps[1][1] - overlaps[0][1] * overlaps[1][0];
    if det.abs() < AMBIGUOUS_DET {
        return Err(Error::AmbiguousPairing { det });
    }
    let pairing = if det > 0.0 { [0, 1] } else { [1, 0] };
    let errors = [
        aligned_error(predicted[0], numeric[pairing[0]]),
        aligned_error(predicted[1], numeric[pairing[1]]),
    ];
    let span = |v: [&[c64]; 2]| Mat::from_fn(n, 2, |i, k| v[k][i]);
    let subspace_angle = linalg::subspace_angle(span(predicted).as_ref(), span(numeric).as_ref())?;
    Ok(ModeComparison {
        pairing,
        errors,
        overlaps,
        subspace_angle,
    })
}
