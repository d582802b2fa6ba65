//! Single-layer capacitance of a union of equal spheres.
//!
//! The density on each sphere is expanded in real spherical harmonics and
//! the equations are tested against the same harmonics. On a sphere of
//! radius `R` the single-layer operator acts diagonally,
//! `S[Y_n] = -R / (2n + 1) Y_n`, so the self blocks are exact; the
//! interaction between distinct spheres has a smooth kernel and is
//! integrated with the product rule.

use std::f64::consts::PI;

use faer::linalg::solvers::Solve;
use faer::Mat;

use super::harmonics::{basis_index, basis_len, real_harmonics, SphereQuadrature};
use super::{CapacitanceMatrix, Provenance};
use crate::error::{Error, Result};
use crate::geometry::{distance, ResonatorSystem};
use crate::linalg;

pub const DEFAULT_QUAD_ORDER: usize = 12;

const MAX_CONDITION: f64 = 1e12;

/// Capacitance of spheres of radius `system.radius` centred at
/// `centers / gamma`.
///
/// `quad_order` polar nodes are used per sphere, with harmonics up to degree
/// `quad_order - 1`. The azimuthal grid has at least `2 * quad_order` nodes,
/// rounded up to a multiple of six so that the discretization inherits the
/// hexagonal symmetries of the supercell.
pub fn boundary_capacitance(system: &ResonatorSystem, quad_order: usize) -> Result<CapacitanceMatrix> {
    if quad_order < 2 {
        return Err(Error::InvalidArgument(format!("quad_order must be at least 2, got {quad_order}")));
    }
    let n = system.len();
    let radius = system.radius;
    let centers: Vec<[f64; 3]> = system.centers.iter().map(|c| c.map(|x| x / system.gamma)).collect();
    for i in 0..n {
        for j in i + 1..n {
            let d = distance(&centers[i], &centers[j]);
            if d <= 2.0 * radius {
                return Err(Error::Overlap {
                    i,
                    j,
                    distance: d,
                    limit: 2.0 * radius,
                });
            }
        }
    }

    let degree = quad_order - 1;
    let azimuth = (2 * quad_order).div_ceil(6) * 6;
    let quad = SphereQuadrature::new(quad_order, azimuth);
    let nq = quad.len();
    let nb = basis_len(degree);

    // weighted basis values on the sphere: b[a, p] = w_a R^2 Y_p(x_a)
    let mut weighted = Mat::<f64>::zeros(nq, nb);
    for a in 0..nq {
        let y = real_harmonics(degree, quad.polar[a], quad.azimuth[a]);
        for p in 0..nb {
            weighted[(a, p)] = quad.weights[a] * radius * radius * y[p];
        }
    }
    let weighted_t = weighted.transpose().to_owned();

    let dim = n * nb;
    let mut system_matrix = Mat::<f64>::zeros(dim, dim);
    for s in 0..n {
        for deg in 0..=degree {
            let v = -radius.powi(3) / (2.0 * deg as f64 + 1.0);
            for m in -(deg as i64)..=deg as i64 {
                let k = s * nb + basis_index(deg, m);
                system_matrix[(k, k)] = v;
            }
        }
    }
    let nodes = |s: usize| -> Vec<[f64; 3]> {
        quad.directions
            .iter()
            .map(|d| {
                [
                    centers[s][0] + radius * d[0],
                    centers[s][1] + radius * d[1],
                    centers[s][2] + radius * d[2],
                ]
            })
            .collect()
    };
    let all_nodes: Vec<Vec<[f64; 3]>> = (0..n).map(nodes).collect();
    let mut kernel = Mat::<f64>::zeros(nq, nq);
    for t in 0..n {
        for s in t + 1..n {
            for a in 0..nq {
                for c in 0..nq {
                    kernel[(a, c)] = -1.0 / (4.0 * PI * distance(&all_nodes[t][a], &all_nodes[s][c]));
                }
            }
            let block = &weighted_t * (&kernel * &weighted);
            for p in 0..nb {
                for q in 0..nb {
                    system_matrix[(t * nb + p, s * nb + q)] = block[(p, q)];
                    system_matrix[(s * nb + q, t * nb + p)] = block[(p, q)];
                }
            }
        }
    }

    let lu = system_matrix.partial_piv_lu();
    let condition = linalg::condition_estimate_symmetric(system_matrix.as_ref(), &lu);
    if !(condition.is_finite() && condition <= MAX_CONDITION) {
        return Err(Error::IllConditioned { condition });
    }

    let monopole = radius * radius * (4.0 * PI).sqrt();
    let rhs = Mat::<f64>::from_fn(dim, n, |k, j| if k == j * nb { monopole } else { 0.0 });
    let density = lu.solve(&rhs);
    let raw = Mat::<f64>::from_fn(n, n, |i, j| -monopole * density[(i * nb, j)]);
    let asymmetry = linalg::hermitian_defect(raw.as_ref());
    let entries = Mat::from_fn(n, n, |i, j| 0.5 * (raw[(i, j)] + raw[(j, i)]));
    CapacitanceMatrix::new(
        entries,
        Provenance::Boundary {
            quad_order,
            asymmetry,
            condition_estimate: condition,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Materials;

    #[test]
    fn unit_sphere() {
        let s = ResonatorSystem::new(vec![[0.0; 3]], 1.0, 1.0, Materials::default()).unwrap();
        for q in [2, 4, 12] {
            let c = boundary_capacitance(&s, q).unwrap();
            assert!((c.get(0, 0) / (4.0 * PI) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn radius_scaling() {
        let s = ResonatorSystem::new(vec![[1.0, 2.0, 0.0]], 0.1, 1.0, Materials::default()).unwrap();
        let c = boundary_capacitance(&s, 4).unwrap();
        assert!((c.get(0, 0) - 0.4 * PI).abs() < 1e-12);
    }

    #[test]
    fn rejects_low_order_and_overlap() {
        let s = ResonatorSystem::new(vec![[0.0; 3], [3.0, 0.0, 0.0]], 1.0, 1.0, Materials::default()).unwrap();
        assert!(boundary_capacitance(&s, 1).is_err());
        let squeezed = s.clone().with_gamma(2.0);
        assert!(matches!(boundary_capacitance(&squeezed, 4), Err(Error::Overlap { .. })));
    }
}
