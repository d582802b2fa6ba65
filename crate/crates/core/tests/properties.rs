//! Randomized invariants of the small building blocks.

use num_complex::Complex64 as c64;
use proptest::prelude::*;

use floquet_edge::analysis::{align_phase, localization_metrics, zone_grid};
use floquet_edge::capacitance::{check_symmetry_pattern, dilute_capacitance};
use floquet_edge::floquet::{fold, folded_distance};
use floquet_edge::geometry::{build_supercell_chain, SymmetryPermutation};

fn complex_vec(len: usize) -> impl Strategy<Value = Vec<c64>> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64).prop_map(|(a, b)| c64::new(a, b)), len)
}

proptest! {
    #[test]
    fn fold_reconstructs_and_lies_in_zone(w in -50.0..50.0f64, omega in 0.05..5.0f64) {
        let (w0, m) = fold(w, omega);
        prop_assert!(w0 >= -0.5 * omega && w0 < 0.5 * omega);
        prop_assert!((w0 + m as f64 * omega - w).abs() <= 1e-12 * (1.0 + w.abs()));
    }

    #[test]
    fn fold_is_periodic(w in -5.0..5.0f64, omega in 0.1..3.0f64, k in -20i64..20) {
        let a = fold(w, omega).0;
        let b = fold(w + k as f64 * omega, omega).0;
        prop_assert!(folded_distance(a, b, omega).abs() <= 1e-11);
    }

    #[test]
    fn localization_is_scale_and_phase_invariant(v in complex_vec(18), scale in 0.1..10.0f64, phase in 0.0..std::f64::consts::TAU) {
        prop_assume!(v.iter().any(|z| z.norm() > 1e-3));
        let w: Vec<c64> = v.iter().map(|z| z * c64::from_polar(scale, phase)).collect();
        let (a, b) = (localization_metrics(&v).unwrap(), localization_metrics(&w).unwrap());
        prop_assert!((a.left_mass - b.left_mass).abs() < 1e-12);
        prop_assert!((a.right_mass - b.right_mass).abs() < 1e-12);
        prop_assert!(a.left_mass + a.right_mass <= 1.0 + 1e-12);
        prop_assert!(a.magnitudes.iter().all(|&m| (0.0..=1.0 + 1e-12).contains(&m)));
    }

    #[test]
    fn align_phase_removes_global_phase(v in complex_vec(8), phase in 0.0..std::f64::consts::TAU) {
        prop_assume!(v.iter().map(|z| z.norm_sqr()).sum::<f64>() > 1e-3);
        let rotated: Vec<c64> = v.iter().map(|z| z * c64::from_polar(1.0, phase)).collect();
        let aligned = align_phase(&v, &rotated);
        for (x, y) in aligned.iter().zip(&v) {
            prop_assert!((x - y).norm() < 1e-12);
        }
    }

    #[test]
    fn zone_grid_is_symmetric(half in 1usize..40, period in 0.5..3.0f64) {
        let grid = zone_grid(2 * half, period).unwrap();
        let edge = std::f64::consts::PI / period;
        prop_assert!((grid[0] + edge).abs() < 1e-12 && (grid[grid.len() - 1] - edge).abs() < 1e-12);
        for a in &grid {
            prop_assert!(grid.iter().any(|b| (a + b).abs() < 1e-12 * (1.0 + edge)));
        }
    }

    #[test]
    fn chain_reversal_is_a_symmetry(cells in 1usize..6, gamma in 0.005..0.05f64) {
        let s = build_supercell_chain(cells, 0.1).unwrap().with_gamma(gamma);
        let c = dilute_capacitance(&s).unwrap();
        let r = check_symmetry_pattern(&c, &SymmetryPermutation::reversal(s.len()), 1e-12).unwrap();
        prop_assert!(r.pass);
    }
}
