//! Capacitance matrices: dilute closed form, a boundary solver on sphere
//! surfaces, and quasiperiodic lattice sums.

mod boundary;
mod dilute;
pub mod harmonics;
mod lattice;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use faer::Mat;
use num_complex::Complex64 as c64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::SymmetryPermutation;
use crate::linalg;

pub use boundary::{boundary_capacitance, DEFAULT_QUAD_ORDER};
pub use dilute::{dilute_capacitance, REFERENCE_CAPACITY};
pub use lattice::{alpha_min, quasiperiodic_capacitance, BlochCapacitance, DEFAULT_TRUNCATION};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "backend", rename_all = "snake_case")]
pub enum Provenance {
    Dilute,
    Boundary {
        quad_order: usize,
        /// Relative asymmetry of the raw solve before symmetrization.
        asymmetry: f64,
        condition_estimate: f64,
    },
    /// A matrix whose edge-pair eigenvalues were replaced by their mean.
    DegenerateLimit {
        source: Box<Provenance>,
        removed_split: f64,
    },
    Custom,
}

impl Provenance {
    pub fn label(&self) -> &'static str {
        match self {
            Provenance::Dilute => "dilute",
            Provenance::Boundary { .. } => "boundary",
            Provenance::DegenerateLimit { .. } => "degenerate-limit",
            Provenance::Custom => "custom",
        }
    }
}

/// Real symmetric capacitance matrix.
#[derive(Clone, Debug)]
pub struct CapacitanceMatrix {
    pub entries: Mat<f64>,
    pub provenance: Provenance,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixCheck {
    pub asymmetry: f64,
    pub min_eigenvalue: f64,
    pub diagonal_positive: bool,
    pub off_diagonal_negative: bool,
}

impl MatrixCheck {
    pub fn is_valid(&self) -> bool {
        self.asymmetry <= 1e-12 && self.min_eigenvalue > 0.0 && self.diagonal_positive
    }
}

impl CapacitanceMatrix {
    pub fn new(entries: Mat<f64>, provenance: Provenance) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::Dimension {
                expected: entries.nrows(),
                found: entries.ncols(),
            });
        }
        Ok(Self { entries, provenance })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != n) {
            return Err(Error::Dimension {
                expected: n,
                found: bad.len(),
            });
        }
        Self::new(Mat::from_fn(n, n, |i, j| rows[i][j]), Provenance::Custom)
    }

    pub fn len(&self) -> usize {
        self.entries.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|i| (0..self.len()).map(|j| self.get(i, j)).collect()).collect()
    }

    /// Ascending eigenvalues and orthonormal eigenvectors (columns).
    pub fn eigen(&self) -> Result<(Vec<f64>, Mat<f64>)> {
        linalg::sym_eigen(self.entries.as_ref())
    }

    pub fn check(&self) -> Result<MatrixCheck> {
        let n = self.len();
        let (values, _) = self.eigen()?;
        let mut diagonal_positive = true;
        let mut off_diagonal_negative = true;
        for i in 0..n {
            for j in 0..n {
                let v = self.get(i, j);
                if i == j {
                    diagonal_positive &= v > 0.0;
                } else {
                    off_diagonal_negative &= v < 0.0;
                }
            }
        }
        Ok(MatrixCheck {
            asymmetry: linalg::hermitian_defect(self.entries.as_ref()),
            min_eigenvalue: values.first().copied().unwrap_or(f64::NAN),
            diagonal_positive,
            off_diagonal_negative,
        })
    }

    pub fn require_positive_definite(&self) -> Result<()> {
        let (values, _) = self.eigen()?;
        match values.first() {
            Some(&v) if v > 0.0 => Ok(()),
            Some(&v) => Err(Error::NotPositiveDefinite { min_eigenvalue: v }),
            None => Err(Error::InvalidArgument("empty capacitance matrix".into())),
        }
    }

    pub fn to_csv(&self) -> String {
        let n = self.len();
        let mut out = format!("# capacitance N={n} backend={}\n", self.provenance.label());
        for i in 0..n {
            let row: Vec<String> = (0..n).map(|j| format!("{:e}", self.get(i, j))).collect();
            let _ = writeln!(out, "{}", row.join(","));
        }
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "n": self.len(),
            "provenance": self.provenance,
            "entries": self.rows(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymmetryReport {
    pub max_deviation: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Largest |C[s(i), s(j)] - C[i, j]| over all entries.
pub fn check_symmetry_pattern(c: &CapacitanceMatrix, sym: &SymmetryPermutation, tol: f64) -> Result<SymmetryReport> {
    let n = c.len();
    if sym.len() != n {
        return Err(Error::Dimension {
            expected: n,
            found: sym.len(),
        });
    }
    let p = &sym.permutation;
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            worst = worst.max((c.get(p[i], p[j]) - c.get(i, j)).abs());
        }
    }
    Ok(SymmetryReport {
        max_deviation: worst,
        tolerance: tol,
        pass: worst <= tol,
    })
}

/// Letter layout of the single-supercell matrix.
pub const SUPERCELL_PATTERN: [[char; 6]; 6] = [
    ['a', 'c', 'k', 'd', 'b', 'h'],
    ['c', 'a', 'k', 'd', 'h', 'b'],
    ['k', 'k', 'e', 'f', 'd', 'd'],
    ['d', 'd', 'f', 'e', 'k', 'k'],
    ['b', 'h', 'd', 'k', 'a', 'c'],
    ['h', 'b', 'd', 'k', 'c', 'a'],
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatternReport {
    /// Mean value of the entries carrying each letter.
    pub letters: BTreeMap<char, f64>,
    /// Largest within-letter spread, absolute.
    pub spread: f64,
    /// Spread relative to the largest entry.
    pub relative_spread: f64,
}

impl PatternReport {
    pub fn letter(&self, c: char) -> f64 {
        self.letters[&c]
    }
}

pub fn supercell_pattern(c: &CapacitanceMatrix) -> Result<PatternReport> {
    if c.len() != 6 {
        return Err(Error::Dimension {
            expected: 6,
            found: c.len(),
        });
    }
    let mut groups: BTreeMap<char, Vec<f64>> = BTreeMap::new();
    for (i, row) in SUPERCELL_PATTERN.iter().enumerate() {
        for (j, &letter) in row.iter().enumerate() {
            groups.entry(letter).or_default().push(c.get(i, j));
        }
    }
    let mut spread: f64 = 0.0;
    let mut letters = BTreeMap::new();
    for (letter, vals) in groups {
        let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        spread = spread.max(hi - lo);
        letters.insert(letter, vals.iter().sum::<f64>() / vals.len() as f64);
    }
    let scale = linalg::max_abs(c.entries.as_ref());
    Ok(PatternReport {
        letters,
        spread,
        relative_spread: spread / scale,
    })
}

pub(crate) fn complex_rows(m: &Mat<c64>) -> Vec<Vec<[f64; 2]>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}
