//! The nearly degenerate edge pair of a supercell chain.

use faer::Mat;
use serde::Serialize;

use crate::capacitance::{supercell_pattern, CapacitanceMatrix, Provenance};
use crate::error::{Error, Result};

/// `v1 = (-1, 1, 0.., 1, -1)` and `v2 = (-1, 1, 0.., -1, 1)`.
pub fn canonical_vectors(n: usize) -> [Vec<f64>; 2] {
    let mut v1 = vec![0.0; n];
    let mut v2 = vec![0.0; n];
    if n >= 4 {
        v1[0] = -1.0;
        v1[1] = 1.0;
        v1[n - 2] = 1.0;
        v1[n - 1] = -1.0;
        v2[0] = -1.0;
        v2[1] = 1.0;
        v2[n - 2] = -1.0;
        v2[n - 1] = 1.0;
    }
    [v1, v2]
}

/// Letter combinations of a single supercell.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SingleCellLetters {
    /// `a - c - b + h`.
    pub lambda: f64,
    /// `a - c + b - h`.
    pub lambda_prime: f64,
    /// `2 |b - h|`.
    pub eta: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct EdgePairReport {
    /// `(C v1)_2`.
    pub lambda: f64,
    pub v1: Vec<f64>,
    pub v2: Vec<f64>,
    /// `(C - lambda) v_i`.
    pub residuals: [Vec<f64>; 2],
    pub residual_norms: [f64; 2],
    /// Static eigen-indices (ascending) spanning the pair.
    pub pair: [usize; 2],
    pub pair_eigenvalues: [f64; 2],
    /// Distance from `lambda` to the nearest eigenvalue outside the pair.
    pub gap: f64,
    /// Share of `span(v1, v2)` captured by the pair eigenvectors.
    pub overlap: f64,
    pub letters: Option<SingleCellLetters>,
}

pub fn detect_edge_pair(c: &CapacitanceMatrix) -> Result<EdgePairReport> {
    let n = c.len();
    if n == 0 || n % 6 != 0 {
        return Err(Error::Dimension {
            expected: 6 * n.div_ceil(6).max(1),
            found: n,
        });
    }
    let [v1, v2] = canonical_vectors(n);
    let apply = |v: &[f64]| -> Vec<f64> { (0..n).map(|i| (0..n).map(|j| c.get(i, j) * v[j]).sum()).collect() };
    let cv1 = apply(&v1);
    let cv2 = apply(&v2);
    let lambda = cv1[1];
    let residuals = [
        cv1.iter().zip(&v1).map(|(a, b)| a - lambda * b).collect::<Vec<_>>(),
        cv2.iter().zip(&v2).map(|(a, b)| a - lambda * b).collect::<Vec<_>>(),
    ];
    let inf = |v: &[f64]| v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let residual_norms = [inf(&residuals[0]), inf(&residuals[1])];

    let (vals, vecs) = c.eigen()?;
    // weight of each eigenvector in span(v1, v2); v1 and v2 are orthogonal
    // with squared norm 4
    let weight = |j: usize| -> f64 {
        let p1: f64 = (0..n).map(|i| vecs[(i, j)] * v1[i]).sum();
        let p2: f64 = (0..n).map(|i| vecs[(i, j)] * v2[i]).sum();
        (p1 * p1 + p2 * p2) / 4.0
    };
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| weight(b).total_cmp(&weight(a)).then(a.cmp(&b)));
    let mut pair = [order[0], order[1]];
    pair.sort_unstable();
    let overlap = 0.5 * (weight(pair[0]) + weight(pair[1]));
    let gap = (0..n)
        .filter(|j| !pair.contains(j))
        .map(|j| (vals[j] - lambda).abs())
        .fold(f64::INFINITY, f64::min);
    let letters = if n == 6 {
        let p = supercell_pattern(c)?;
        let (a, b, cc, h) = (p.letter('a'), p.letter('b'), p.letter('c'), p.letter('h'));
        Some(SingleCellLetters {
            lambda: a - cc - b + h,
            lambda_prime: a - cc + b - h,
            eta: 2.0 * (b - h).abs(),
        })
    } else {
        None
    };
    Ok(EdgePairReport {
        lambda,
        v1,
        v2,
        residuals,
        residual_norms,
        pair,
        pair_eigenvalues: [vals[pair[0]], vals[pair[1]]],
        gap,
        overlap,
        letters,
    })
}

/// Replace the two pair eigenvalues by their mean, leaving the rest of the
/// spectrum and all eigenvectors unchanged.
pub fn degenerate_limit(c: &CapacitanceMatrix, pair: [usize; 2]) -> Result<CapacitanceMatrix> {
    let n = c.len();
    if pair[0] == pair[1] || pair.iter().any(|&p| p >= n) {
        return Err(Error::InvalidArgument(format!("bad pair {pair:?}")));
    }
    let (vals, vecs) = c.eigen()?;
    let mean = 0.5 * (vals[pair[0]] + vals[pair[1]]);
    let raw = Mat::from_fn(n, n, |i, j| {
        c.get(i, j) + pair.iter().map(|&p| (mean - vals[p]) * vecs[(i, p)] * vecs[(j, p)]).sum::<f64>()
    });
    let entries = Mat::from_fn(n, n, |i, j| 0.5 * (raw[(i, j)] + raw[(j, i)]));
    CapacitanceMatrix::new(
        entries,
        Provenance::DegenerateLimit {
            source: Box::new(c.provenance.clone()),
            removed_split: (vals[pair[1]] - vals[pair[0]]).abs(),
        },
    )
}
