//! Modes of a chain joined to its mirror image.

use num_complex::Complex64 as c64;
use serde::Serialize;

use super::localization::{localization_metrics, localization_metrics_window, LocalizationProfile, EDGE_WINDOW};
use crate::capacitance::CapacitanceMatrix;
use crate::error::{Error, Result};

#[derive(Clone, Debug, Serialize)]
pub struct InterfaceModes {
    /// Static index of the mode concentrated at the interface.
    pub middle: usize,
    /// Static indices (ascending) of the two modes concentrated at the ends.
    pub sides: [usize; 2],
    /// Share of the middle mode on the central window.
    pub middle_mass: f64,
    /// Share of each side mode on the two end windows together.
    pub side_masses: [f64; 2],
    pub eigenvalues: Vec<f64>,
    pub middle_profile: LocalizationProfile,
    pub side_profiles: [LocalizationProfile; 2],
}

impl InterfaceModes {
    pub fn side_vectors(&self, c: &CapacitanceMatrix) -> Result<Vec<Vec<c64>>> {
        let (_, vecs) = c.eigen()?;
        Ok(self.sides.iter().map(|&j| (0..c.len()).map(|i| c64::new(vecs[(i, j)], 0.0)).collect()).collect())
    }
}

/// Central window: one trimer on each side of the interface.
fn central(n: usize) -> std::ops::Range<usize> {
    n / 2 - EDGE_WINDOW..n / 2 + EDGE_WINDOW
}

pub fn detect_interface_modes(c: &CapacitanceMatrix) -> Result<InterfaceModes> {
    let n = c.len();
    if n < 4 * EDGE_WINDOW || n % 2 != 0 {
        return Err(Error::Dimension { expected: 4 * EDGE_WINDOW, found: n });
    }
    let (vals, vecs) = c.eigen()?;
    let column = |j: usize| -> Vec<c64> { (0..n).map(|i| c64::new(vecs[(i, j)], 0.0)).collect() };
    let mut middle = 0;
    let mut middle_mass = -1.0;
    let mut edge: Vec<(usize, f64)> = Vec::with_capacity(n);
    for j in 0..n {
        let p = localization_metrics(&column(j))?;
        let m = p.mass(central(n));
        if m > middle_mass {
            middle = j;
            middle_mass = m;
        }
        edge.push((j, p.left_mass + p.right_mass));
    }
    edge.retain(|&(j, _)| j != middle);
    edge.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut sides = [edge[0], edge[1]];
    sides.sort_by_key(|s| s.0);
    let middle_profile = localization_metrics_window(&column(middle), EDGE_WINDOW)?;
    Ok(InterfaceModes {
        middle,
        sides: [sides[0].0, sides[1].0],
        middle_mass,
        side_masses: [sides[0].1, sides[1].1],
        eigenvalues: vals,
        middle_profile,
        side_profiles: [localization_metrics(&column(sides[0].0))?, localization_metrics(&column(sides[1].0))?],
    })
}
