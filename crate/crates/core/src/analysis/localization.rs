//! Edge masses and participation of a mode.

use num_complex::Complex64 as c64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Resonators counted as one edge: a trimer.
pub const EDGE_WINDOW: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Edge {
    Left,
    Right,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LocalizationProfile {
    /// `|u_i|`, max 1.
    pub magnitudes: Vec<f64>,
    /// Share of the squared norm on the leftmost window.
    pub left_mass: f64,
    pub right_mass: f64,
    /// `(sum |u|^2)^2 / (N sum |u|^4)`.
    pub participation: f64,
    pub window: usize,
}

impl LocalizationProfile {
    pub fn dominant_edge(&self) -> Edge {
        if self.left_mass > self.right_mass {
            Edge::Left
        } else {
            Edge::Right
        }
    }

    /// Ratio of the larger to the smaller edge mass.
    pub fn dominance(&self) -> f64 {
        let (hi, lo) = if self.left_mass > self.right_mass {
            (self.left_mass, self.right_mass)
        } else {
            (self.right_mass, self.left_mass)
        };
        if lo == 0.0 {
            f64::INFINITY
        } else {
            hi / lo
        }
    }

    /// Share of the squared norm on an arbitrary index range.
    pub fn mass(&self, range: std::ops::Range<usize>) -> f64 {
        let total: f64 = self.magnitudes.iter().map(|m| m * m).sum();
        self.magnitudes[range].iter().map(|m| m * m).sum::<f64>() / total
    }
}

pub fn localization_metrics(mode: &[c64]) -> Result<LocalizationProfile> {
    localization_metrics_window(mode, EDGE_WINDOW)
}

pub fn localization_metrics_window(mode: &[c64], window: usize) -> Result<LocalizationProfile> {
    let n = mode.len();
    if n == 0 || window == 0 || window > n {
        return Err(Error::InvalidArgument(format!("window {window} for a mode of length {n}")));
    }
    let peak = mode.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if peak == 0.0 {
        return Err(Error::ZeroVector);
    }
    let magnitudes: Vec<f64> = mode.iter().map(|z| z.norm() / peak).collect();
    let sq: Vec<f64> = magnitudes.iter().map(|m| m * m).collect();
    let total: f64 = sq.iter().sum();
    let left_mass = sq[..window].iter().sum::<f64>() / total;
    let right_mass = sq[n - window..].iter().sum::<f64>() / total;
    let quartic: f64 = sq.iter().map(|s| s * s).sum();
    Ok(LocalizationProfile {
        magnitudes,
        left_mass,
        right_mass,
        participation: total * total / (n as f64 * quartic),
        window,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::edge_pair::canonical_vectors;

    fn real(v: &[f64]) -> Vec<c64> {
        v.iter().map(|&x| c64::new(x, 0.0)).collect()
    }

    #[test]
    fn delta_vector() {
        let mut v = vec![0.0; 12];
        v[0] = 2.0;
        let p = localization_metrics(&real(&v)).unwrap();
        assert_eq!(p.left_mass, 1.0);
        assert_eq!(p.right_mass, 0.0);
        assert!((p.participation - 1.0 / 12.0).abs() < 1e-15);
        assert_eq!(p.dominant_edge(), Edge::Left);
    }

    #[test]
    fn uniform_vector() {
        let p = localization_metrics(&real(&[1.0; 12])).unwrap();
        assert!((p.left_mass - 0.25).abs() < 1e-15);
        assert!((p.right_mass - 0.25).abs() < 1e-15);
        assert!((p.participation - 1.0).abs() < 1e-15);
    }

    #[test]
    fn symmetric_edge_vector() {
        let [v1, _] = canonical_vectors(24);
        let p = localization_metrics(&real(&v1)).unwrap();
        assert_eq!(p.left_mass, 0.5);
        assert_eq!(p.right_mass, 0.5);
    }

    #[test]
    fn zero_vector_rejected() {
        assert!(matches!(localization_metrics(&real(&[0.0; 6])), Err(Error::ZeroVector)));
    }
}
