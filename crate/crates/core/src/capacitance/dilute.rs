use std::f64::consts::PI;

use faer::Mat;

use super::{CapacitanceMatrix, Provenance};
use crate::error::{Error, Result};
use crate::geometry::{distance, ResonatorSystem};

/// Capacity of the unit reference sphere.
pub const REFERENCE_CAPACITY: f64 = 4.0 * PI;

/// Leading-order capacitance of identical spheres placed at `centers / gamma`.
pub fn dilute_capacitance(system: &ResonatorSystem) -> Result<CapacitanceMatrix> {
    let n = system.len();
    let cap = REFERENCE_CAPACITY;
    let coupling = system.gamma * cap * cap / (4.0 * PI);
    let mut min_dist = f64::INFINITY;
    for i in 0..n {
        for j in i + 1..n {
            let d = distance(&system.centers[i], &system.centers[j]);
            if d == 0.0 {
                return Err(Error::DegenerateGeometry { i, j });
            }
            min_dist = min_dist.min(d);
        }
    }
    if n > 1 && system.gamma * cap / min_dist >= cap / 2.0 {
        log::warn!(
            "dilute coupling gamma/d_min = {:.3} is large; the matrix may lose positive definiteness",
            system.gamma / min_dist
        );
    }
    let entries = Mat::from_fn(n, n, |i, j| {
        if i == j {
            cap
        } else {
            -coupling / distance(&system.centers[i], &system.centers[j])
        }
    });
    CapacitanceMatrix::new(entries, Provenance::Dilute)
}
