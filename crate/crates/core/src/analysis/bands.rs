//! Static and modulated band structure of a periodic chain of supercells.

use std::f64::consts::PI;

use num_complex::Complex64 as c64;
use serde::Serialize;

use super::compare::numeric_pair;
use crate::capacitance::{alpha_min, quasiperiodic_capacitance};
use crate::error::{Error, Result};
use crate::floquet::{folded_distance, monodromy, quasifrequencies, IntegratorOptions, Quasifrequency};
use crate::geometry::ResonatorSystem;
use crate::hill::{HillSystem, Modulation};

/// Gaps at the zone edges `+-pi / period`.
#[derive(Clone, Debug, Serialize)]
pub struct GapReport {
    pub zone_edge: f64,
    /// Static gaps of each band pair `(2k, 2k+1)` at `+zone_edge`.
    pub static_pairs: Vec<f64>,
    /// Largest static pair gap at `+zone_edge` and `-zone_edge`.
    pub static_plus: f64,
    pub static_minus: f64,
    /// Per static pair, the vertical separation of the two modulated bands
    /// continuing it, at `+zone_edge` and `-zone_edge`.
    pub modulated_pairs: Option<[Vec<f64>; 2]>,
    pub modulated_plus: Option<f64>,
    pub modulated_minus: Option<f64>,
    /// `|gap(+) - gap(-)|` of the modulated bands.
    pub nonreciprocity: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct BandTable {
    pub alphas: Vec<f64>,
    pub period: f64,
    /// Ascending `omega_j(alpha)` per grid point.
    pub static_bands: Vec<Vec<f64>>,
    /// Folded quasifrequencies per grid point, sorted by real part.
    pub modulated: Option<Vec<Vec<Quasifrequency>>>,
    pub omega: Option<f64>,
    /// `max |omega_j(alpha) - omega_j(-alpha)|` over the grid.
    pub static_reciprocity_defect: f64,
    /// Same for the sorted modulated real parts.
    pub modulated_reciprocity_defect: Option<f64>,
    pub gaps: GapReport,
}

/// `points` equispaced values covering `[-pi/period, pi/period]`; an even
/// count skips `alpha = 0`.
pub fn zone_grid(points: usize, period: f64) -> Result<Vec<f64>> {
    if points < 2 {
        return Err(Error::InvalidArgument("at least two grid points required".into()));
    }
    let edge = PI / period;
    let grid: Vec<f64> = (0..points).map(|k| -edge + 2.0 * edge * k as f64 / (points - 1) as f64).collect();
    let amin = alpha_min(period);
    if let Some(&a) = grid.iter().find(|a| a.abs() < amin) {
        return Err(Error::Divergence { alpha: a, alpha_min: amin });
    }
    Ok(grid)
}

struct Point {
    omegas: Vec<f64>,
    vectors: faer::Mat<c64>,
    modulated: Option<crate::floquet::FloquetSpectrum>,
}

fn evaluate(
    cell: &ResonatorSystem,
    alpha: f64,
    period: f64,
    truncation: usize,
    modulation: Option<&Modulation>,
    opts: &IntegratorOptions,
) -> Result<Point> {
    let c = quasiperiodic_capacitance(cell, alpha, period, truncation)?;
    let (vals, vectors) = c.eigen()?;
    let stiffness = cell.stiffness();
    if let Some(&v) = vals.iter().find(|v| **v <= 0.0) {
        return Err(Error::NotPositiveDefinite { min_eigenvalue: v });
    }
    let omegas = vals.iter().map(|v| (v * stiffness).sqrt()).collect();
    let modulated = match modulation {
        Some(m) => {
            let hill = HillSystem::bloch(&c, cell, m.clone())?;
            Some(quasifrequencies(&monodromy(&hill, opts)?)?)
        }
        None => None,
    };
    Ok(Point {
        omegas,
        vectors,
        modulated,
    })
}

fn pair_gaps(p: &Point) -> Result<(Vec<f64>, Option<Vec<f64>>)> {
    let n = p.omegas.len();
    let static_pairs: Vec<f64> = (0..n / 2).map(|k| (p.omegas[2 * k + 1] - p.omegas[2 * k]).abs()).collect();
    let modulated = match &p.modulated {
        Some(spectrum) => {
            let mut gaps = Vec::with_capacity(n / 2);
            for k in 0..n / 2 {
                let span: Vec<Vec<c64>> = [2 * k, 2 * k + 1].iter().map(|&j| (0..n).map(|i| p.vectors[(i, j)]).collect()).collect();
                let pair = numeric_pair(spectrum, &span)?;
                let [a, b] = pair.quasifrequencies;
                gaps.push(folded_distance(a.re, b.re, spectrum.omega).abs());
            }
            Some(gaps)
        }
        None => None,
    };
    Ok((static_pairs, modulated))
}

fn max_of(v: &[f64]) -> f64 {
    v.iter().copied().fold(0.0, f64::max)
}

/// Static bands from the Bloch capacitance and, when `modulation` is given,
/// folded quasifrequencies from the Bloch-reduced Hill system at every
/// grid point.
pub fn band_sweep(
    unit_cell: &ResonatorSystem,
    period: f64,
    alphas: &[f64],
    modulation: Option<&Modulation>,
    truncation: usize,
    opts: &IntegratorOptions,
) -> Result<BandTable> {
    let mut static_bands = Vec::with_capacity(alphas.len());
    let mut modulated = modulation.map(|_| Vec::with_capacity(alphas.len()));
    for &a in alphas {
        let p = evaluate(unit_cell, a, period, truncation, modulation, opts)?;
        static_bands.push(p.omegas);
        if let (Some(table), Some(spectrum)) = (modulated.as_mut(), p.modulated) {
            let mut q = spectrum.modes;
            q.sort_by(|x, y| x.re.total_cmp(&y.re).then(x.unfolded.total_cmp(&y.unfolded)));
            table.push(q);
        }
    }

    // reciprocity over the grid, pairing alpha with the nearest -alpha
    let mirror = |i: usize| -> Option<usize> {
        let target = -alphas[i];
        let (j, d) = alphas
            .iter()
            .enumerate()
            .map(|(j, a)| (j, (a - target).abs()))
            .min_by(|x, y| x.1.total_cmp(&y.1))?;
        (d <= 1e-12 * (1.0 + target.abs())).then_some(j)
    };
    let mut static_defect: f64 = 0.0;
    let mut modulated_defect: Option<f64> = modulated.as_ref().map(|_| 0.0);
    for i in 0..alphas.len() {
        if let Some(j) = mirror(i) {
            for (x, y) in static_bands[i].iter().zip(&static_bands[j]) {
                static_defect = static_defect.max((x - y).abs());
            }
            if let (Some(table), Some(d)) = (modulated.as_ref(), modulated_defect.as_mut()) {
                for (x, y) in table[i].iter().zip(&table[j]) {
                    *d = d.max((x.re - y.re).abs());
                }
            }
        }
    }

    let edge = PI / period;
    let plus = evaluate(unit_cell, edge, period, truncation, modulation, opts)?;
    let minus = evaluate(unit_cell, -edge, period, truncation, modulation, opts)?;
    let (sp, mp) = pair_gaps(&plus)?;
    let (sm, mm) = pair_gaps(&minus)?;
    let (modulated_pairs, modulated_plus, modulated_minus, nonreciprocity) = match (mp, mm) {
        (Some(p), Some(m)) => {
            let (gp, gm) = (max_of(&p), max_of(&m));
            (Some([p, m]), Some(gp), Some(gm), Some((gp - gm).abs()))
        }
        _ => (None, None, None, None),
    };
    Ok(BandTable {
        alphas: alphas.to_vec(),
        period,
        static_bands,
        modulated,
        omega: modulation.map(|m| m.omega),
        static_reciprocity_defect: static_defect,
        modulated_reciprocity_defect: modulated_defect,
        gaps: GapReport {
            zone_edge: edge,
            static_plus: max_of(&sp),
            static_minus: max_of(&sm),
            static_pairs: sp,
            modulated_pairs,
            modulated_plus,
            modulated_minus,
            nonreciprocity,
        },
    })
}

impl BandTable {
    pub fn static_csv(&self) -> String {
        let n = self.static_bands.first().map_or(0, Vec::len);
        let mut out = format!("# bands static N={n} period={:e}\nalpha", self.period);
        for j in 1..=n {
            out.push_str(&format!(",omega_{j}"));
        }
        out.push('\n');
        for (a, row) in self.alphas.iter().zip(&self.static_bands) {
            out.push_str(&format!("{a:e}"));
            for w in row {
                out.push_str(&format!(",{w:e}"));
            }
            out.push('\n');
        }
        out
    }

    pub fn modulated_csv(&self) -> Option<String> {
        let table = self.modulated.as_ref()?;
        let n = table.first().map_or(0, Vec::len);
        let mut out = format!("# bands modulated 2N={n} period={:e} omega={:e}\nalpha", self.period, self.omega.unwrap_or(f64::NAN));
        for j in 1..=n {
            out.push_str(&format!(",nu_{j}"));
        }
        for j in 1..=n {
            out.push_str(&format!(",im_nu_{j}"));
        }
        out.push('\n');
        for (a, row) in self.alphas.iter().zip(table) {
            out.push_str(&format!("{a:e}"));
            for q in row {
                out.push_str(&format!(",{:e}", q.re));
            }
            for q in row {
                out.push_str(&format!(",{:e}", q.im));
            }
            out.push('\n');
        }
        Some(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{supercell_centers, Materials, LATTICE_PERIOD};

    #[test]
    fn grid_is_symmetric_and_punctured() {
        let g = zone_grid(64, LATTICE_PERIOD).unwrap();
        assert_eq!(g.len(), 64);
        assert!((g[0] + PI / LATTICE_PERIOD).abs() < 1e-15);
        assert!((g[63] - PI / LATTICE_PERIOD).abs() < 1e-15);
        assert!(zone_grid(65, LATTICE_PERIOD).is_err());
    }

    #[test]
    fn static_reciprocity_and_degeneracy() {
        let cell = ResonatorSystem::new(supercell_centers(0.1).to_vec(), 0.1, 0.025, Materials::default()).unwrap();
        let g = zone_grid(8, LATTICE_PERIOD).unwrap();
        let t = band_sweep(&cell, LATTICE_PERIOD, &g, None, 2000, &IntegratorOptions::default()).unwrap();
        assert!(t.static_reciprocity_defect <= 1e-8);
        assert!(t.gaps.static_plus <= 1e-6 * 0.2);
        assert!(t.static_csv().starts_with("# bands static N=6"));
    }
}
