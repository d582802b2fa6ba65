//! Asymptotic Floquet matrix of a weakly modulated Hill system and the
//! second-order splitting of a degenerate pair.
//!
//! Conventions: the first-order system `y' = A(t) y` is written in the basis
//! that diagonalizes the static part, `A0 = diag(a_k)`. The Floquet matrix
//! `F` satisfies `X(T) = exp(F T)` in that basis, with `F0 = A0 - i n_k Omega`
//! and folded imaginary parts. A quasifrequency is an eigenvalue of `F`
//! divided by `i`.

use faer::Mat;
use num_complex::Complex64 as c64;
use serde::{Deserialize, Serialize};

use crate::capacitance::CapacitanceMatrix;
use crate::error::{Error, Result};
use crate::floquet::fold;
use crate::geometry::ResonatorSystem;
use crate::hill::{scaled_fourier_blocks, static_spectrum, FourierBlocks, Modulation};
use crate::linalg;

/// Relative width (in units of `Omega`) below which two folded exponents
/// count as equal.
pub const DEFAULT_EQUAL_TOLERANCE: f64 = 1e-9;

/// Relative size (in units of `Omega`) of the smallest admissible resonance
/// denominator.
pub const SMALL_DENOMINATOR: f64 = 1e-8;

const DEFECTIVE_WARNING: f64 = 1e8;

const I: c64 = c64::new(0.0, 1.0);

/// Diagonal first-order system with harmonics `A1^m` for `m = +-1` and
/// `A2^m` for `m = 0, +-2`.
#[derive(Clone, Debug)]
pub struct HarmonicSystem {
    pub a0: Vec<c64>,
    pub omega: f64,
    pub folding: Vec<i64>,
    pub f0: Vec<c64>,
    /// Entries with equal labels have equal folded exponents.
    pub classes: Vec<usize>,
    /// `[A1^{-1}, A1^{+1}]`.
    pub a1: [Mat<c64>; 2],
    /// `[A2^{-2}, A2^0, A2^{+2}]`.
    pub a2: [Mat<c64>; 3],
}

impl HarmonicSystem {
    pub fn new(a0: Vec<c64>, omega: f64, a1: [Mat<c64>; 2], a2: [Mat<c64>; 3], equal_tol: f64) -> Result<Self> {
        let n = a0.len();
        if !(omega.is_finite() && omega > 0.0) {
            return Err(Error::InvalidArgument(format!("omega must be positive, got {omega}")));
        }
        for m in a1.iter().chain(a2.iter()) {
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::Dimension {
                    expected: n,
                    found: m.nrows(),
                });
            }
        }
        let mut folding = Vec::with_capacity(n);
        let mut f0 = Vec::with_capacity(n);
        for a in &a0 {
            let (w0, k) = fold(a.im, omega);
            folding.push(k);
            f0.push(c64::new(a.re, w0));
        }
        let mut classes = vec![usize::MAX; n];
        let mut next = 0;
        for k in 0..n {
            if classes[k] != usize::MAX {
                continue;
            }
            classes[k] = next;
            for l in k + 1..n {
                if classes[l] == usize::MAX && (f0[k] - f0[l]).norm() <= equal_tol * omega {
                    classes[l] = next;
                }
            }
            next += 1;
        }
        Ok(Self {
            a0,
            omega,
            folding,
            f0,
            classes,
            a1,
            a2,
        })
    }

    pub fn len(&self) -> usize {
        self.a0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a0.is_empty()
    }

    pub fn a1_entry(&self, m: i64, k: usize, l: usize) -> c64 {
        match m {
            -1 => self.a1[0][(k, l)],
            1 => self.a1[1][(k, l)],
            _ => c64::new(0.0, 0.0),
        }
    }

    pub fn a2_entry(&self, m: i64, k: usize, l: usize) -> c64 {
        match m {
            -2 => self.a2[0][(k, l)],
            0 => self.a2[1][(k, l)],
            2 => self.a2[2][(k, l)],
            _ => c64::new(0.0, 0.0),
        }
    }

    pub fn equal(&self, k: usize, l: usize) -> bool {
        self.classes[k] == self.classes[l]
    }

    /// Treat `k` and `l` as one degenerate class.
    pub fn force_equal(&mut self, k: usize, l: usize) {
        let (keep, drop) = (self.classes[k], self.classes[l]);
        for c in &mut self.classes {
            if *c == drop {
                *c = keep;
            }
        }
    }

    /// Members of the class of `k`.
    pub fn class_of(&self, k: usize) -> Vec<usize> {
        (0..self.len()).filter(|&j| self.classes[j] == self.classes[k]).collect()
    }

    fn denominator(&self, m: i64, k: usize, l: usize, value: c64) -> Result<c64> {
        if value.norm() < SMALL_DENOMINATOR * self.omega {
            return Err(Error::SmallDenominator {
                k,
                l,
                m: m as i32,
                value: value.norm(),
            });
        }
        Ok(value)
    }
}

/// First-order Floquet matrix.
pub fn floquet_f1(sys: &HarmonicSystem) -> Result<Mat<c64>> {
    let n = sys.len();
    let mut f1 = Mat::<c64>::zeros(n, n);
    for l in 0..n {
        for k in 0..n {
            f1[(k, l)] = if sys.equal(k, l) {
                sys.a1_entry(sys.folding[k] - sys.folding[l], k, l)
            } else {
                let mut sum = c64::new(0.0, 0.0);
                for m in [-1i64, 1] {
                    let a = sys.a1_entry(m, k, l);
                    if a == c64::new(0.0, 0.0) {
                        continue;
                    }
                    let d = I * (m as f64 * sys.omega) + sys.a0[l] - sys.a0[k];
                    sum += a / sys.denominator(m, k, l, d)?;
                }
                (sys.f0[l] - sys.f0[k]) * sum
            };
        }
    }
    Ok(f1)
}

/// Second-order Floquet entry `(F2)_{k,l}` for `k`, `l` in one class.
pub fn floquet_f2_entry(sys: &HarmonicSystem, f1: &Mat<c64>, k: usize, l: usize) -> Result<c64> {
    if !sys.equal(k, l) {
        return Err(Error::InvalidArgument(format!("entries {k} and {l} are not degenerate")));
    }
    let n = sys.len();
    let nk = sys.folding[k];
    let nl = sys.folding[l];
    let mut total = sys.a2_entry(nk - nl, k, l);
    for j in 0..n {
        let nj = sys.folding[j];
        for m in [-1i64, 1] {
            if m != nj - nl {
                let right = sys.a1_entry(m, j, l);
                if right != c64::new(0.0, 0.0) {
                    let left = sys.a1_entry(nk - nl - m, k, j) - sys.a1_entry(nk - nj, k, j);
                    let d = I * (m as f64 * sys.omega) + sys.a0[l] - sys.a0[j];
                    total += left * right / sys.denominator(m, j, l, d)?;
                }
            }
            if m != nk - nj {
                let a = sys.a1_entry(m, k, j);
                if a != c64::new(0.0, 0.0) {
                    let d = I * (m as f64 * sys.omega) + sys.a0[j] - sys.a0[k];
                    total += a * f1[(j, l)] / sys.denominator(m, k, j, d)?;
                }
            }
        }
    }
    Ok(total)
}

/// Second-order block on the given degenerate indices.
pub fn floquet_f2_block(sys: &HarmonicSystem, f1: &Mat<c64>, indices: &[usize]) -> Result<Mat<c64>> {
    let r = indices.len();
    let mut out = Mat::<c64>::zeros(r, r);
    for (a, &k) in indices.iter().enumerate() {
        for (b, &l) in indices.iter().enumerate() {
            out[(a, b)] = floquet_f2_entry(sys, f1, k, l)?;
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    /// Exponents `+i omega_j`.
    Positive,
    /// Exponents `-i omega_j`.
    Negative,
}

/// How a nearly degenerate static pair enters the expansion.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DegeneracyTreatment {
    /// The pair is exactly degenerate, as for a capacitance matrix in its
    /// degenerate limit.
    #[default]
    Merge,
    /// The residual static splitting is kept inside the effective block.
    Physical,
}

/// Static Hill system in the basis `V` with columns
/// `(v_j, +-i omega_j v_j) / sqrt(1 + omega_j^2)`; index `2j` carries
/// `+i omega_j` and `2j + 1` carries `-i omega_j`.
#[derive(Clone, Debug)]
pub struct DiagonalizedStatic {
    pub omegas: Vec<f64>,
    /// Static modes `v_j` as columns, ascending frequency.
    pub modes: Mat<f64>,
    pub transform: Mat<c64>,
    pub inverse: Mat<c64>,
    pub harmonics: HarmonicSystem,
    /// `|V^-1 A V - A0| / |A0|` in the max norm.
    pub residual: f64,
    /// 2-norm condition number of `V`.
    pub condition: f64,
}

impl DiagonalizedStatic {
    pub fn len(&self) -> usize {
        self.omegas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omegas.is_empty()
    }

    pub fn index(j: usize, branch: Branch) -> usize {
        match branch {
            Branch::Positive => 2 * j,
            Branch::Negative => 2 * j + 1,
        }
    }

    /// Same static basis with the harmonics of another modulation of the
    /// same frequency.
    pub fn remodulated(&self, c: &CapacitanceMatrix, system: &ResonatorSystem, modulation: &Modulation) -> Result<Self> {
        if modulation.omega != self.harmonics.omega {
            return Err(Error::InvalidArgument("remodulation must keep the frequency".into()));
        }
        let blocks = scaled_fourier_blocks(c, system, modulation)?;
        let harmonics = transformed_harmonics(&self.inverse, &self.transform, &blocks, self.harmonics.a0.clone(), modulation.omega)?;
        Ok(Self { harmonics, ..self.clone() })
    }

    /// First `N` components of `V x`.
    pub fn to_physical(&self, x: &[c64]) -> Vec<c64> {
        let n = self.len();
        (0..n).map(|i| (0..2 * n).map(|k| self.transform[(i, k)] * x[k]).sum()).collect()
    }
}

fn transformed(inverse: &Mat<c64>, transform: &Mat<c64>, m: &Mat<c64>) -> Mat<c64> {
    // V^-1 [[0, 0], [-M, 0]] V = -V^-1[:, N..] M V[..N, :]
    let n = m.nrows();
    let right = inverse.get(.., n..).to_owned();
    let top = transform.get(..n, ..).to_owned();
    let mt = m * &top;
    let mut out = &right * &mt;
    for j in 0..out.ncols() {
        for z in out.col_as_slice_mut(j) {
            *z = -*z;
        }
    }
    out
}

fn transformed_harmonics(inverse: &Mat<c64>, transform: &Mat<c64>, blocks: &FourierBlocks, a0: Vec<c64>, omega: f64) -> Result<HarmonicSystem> {
    let n = blocks.m0.nrows();
    let conj = |a: &Mat<c64>| Mat::from_fn(n, n, |i, j| a[(i, j)].conj());
    let real = |a: &Mat<f64>| Mat::from_fn(n, n, |i, j| c64::new(a[(i, j)], 0.0));
    let t = |m: &Mat<c64>| transformed(inverse, transform, m);
    let a1 = [t(&conj(&blocks.m1_plus)), t(&blocks.m1_plus)];
    let a2 = [t(&conj(&blocks.m2_plus)), t(&real(&blocks.m2_zero)), t(&blocks.m2_plus)];
    HarmonicSystem::new(a0, omega, a1, a2, DEFAULT_EQUAL_TOLERANCE)
}

/// Diagonalize the static system and conjugate the harmonics of `A1`, `A2`
/// into the static eigenbasis. Harmonics are per unit mean amplitude.
pub fn diagonalize_static(c: &CapacitanceMatrix, system: &ResonatorSystem, modulation: &Modulation) -> Result<DiagonalizedStatic> {
    let blocks = scaled_fourier_blocks(c, system, modulation)?;
    let spectrum = static_spectrum(c, system)?;
    let n = spectrum.len();
    let omegas = spectrum.omegas.clone();
    let mut transform = Mat::<c64>::zeros(2 * n, 2 * n);
    let mut inverse = Mat::<c64>::zeros(2 * n, 2 * n);
    let mut a0 = Vec::with_capacity(2 * n);
    for (j, &w) in omegas.iter().enumerate() {
        let norm = (1.0 + w * w).sqrt();
        for (col, sign) in [(2 * j, 1.0), (2 * j + 1, -1.0)] {
            a0.push(c64::new(0.0, sign * w));
            for i in 0..n {
                let v = spectrum.vectors[(i, j)];
                transform[(i, col)] = c64::new(v / norm, 0.0);
                transform[(n + i, col)] = c64::new(0.0, sign * w * v / norm);
                inverse[(col, i)] = c64::new(0.5 * norm * v, 0.0);
                inverse[(col, n + i)] = c64::new(0.0, -sign * 0.5 * norm * v / w);
            }
        }
    }

    let static_a = Mat::<c64>::from_fn(2 * n, 2 * n, |i, j| {
        if i < n {
            c64::new(if j == n + i { 1.0 } else { 0.0 }, 0.0)
        } else if j < n {
            c64::new(-blocks.m0[(i - n, j)], 0.0)
        } else {
            c64::new(0.0, 0.0)
        }
    });
    let diag = &inverse * (&static_a * &transform);
    let scale = a0.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let defect = Mat::from_fn(2 * n, 2 * n, |i, j| diag[(i, j)] - if i == j { a0[i] } else { c64::new(0.0, 0.0) });
    let residual = linalg::max_abs(defect.as_ref()) / scale;
    let sv = transform.singular_values().map_err(|e| Error::Eigen(format!("{e:?}")))?;
    let condition = sv.first().copied().unwrap_or(1.0) / sv.last().copied().unwrap_or(1.0);
    if condition > DEFECTIVE_WARNING {
        log::warn!("static eigenbasis is nearly defective, condition {condition:.3e}");
    }

    let harmonics = transformed_harmonics(&inverse, &transform, &blocks, a0, modulation.omega)?;
    Ok(DiagonalizedStatic {
        omegas,
        modes: spectrum.vectors,
        transform,
        inverse,
        harmonics,
        residual,
        condition,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PairSelector {
    /// Two static modes (ascending frequency order) on one branch.
    Static { first: usize, second: usize, branch: Branch },
    /// The class of a diagonal index, which must have exactly two members.
    Cluster { index: usize },
}

/// Effective second-order operator on a degenerate pair.
#[derive(Clone, Debug)]
pub struct EffectiveBlock {
    /// Diagonal indices of the pair.
    pub pair: [usize; 2],
    /// Degenerate Floquet exponent (mean of the pair).
    pub nu0: c64,
    /// Pair basis: column `a` holds the coefficients of basis vector `a` on
    /// the diagonal indices `pair`.
    pub basis: [[f64; 2]; 2],
    /// `B = (P F1 G F1 P + P F2 P)` restricted to the pair, in `basis`.
    pub b: [[c64; 2]; 2],
    /// `P (F0 - nu0) P` in `basis`; zero for an exact degeneracy.
    pub static_split: [[c64; 2]; 2],
    /// Largest entry of `P F1 P`.
    pub first_order: f64,
    pub f1: Mat<c64>,
    /// Diagonal of `P`.
    pub projector: Vec<f64>,
    /// Diagonal of `G = (nu0 - F0)^-1 (1 - P)`.
    pub reduced: Vec<c64>,
}

/// Static branch and pair of a diagonal pair index.
fn static_of(k: usize) -> (usize, Branch) {
    (k / 2, if k % 2 == 0 { Branch::Positive } else { Branch::Negative })
}

/// Build `B` for the selected pair. `reference` optionally supplies two
/// physical vectors whose projections onto the pair, orthonormalized and
/// sign-aligned, define the pair basis.
pub fn effective_block_b(
    diag: &DiagonalizedStatic,
    selector: &PairSelector,
    treatment: DegeneracyTreatment,
    reference: Option<[&[f64]; 2]>,
) -> Result<EffectiveBlock> {
    let mut sys = diag.harmonics.clone();
    let pair = match *selector {
        PairSelector::Static { first, second, branch } => {
            if first == second || first >= diag.len() || second >= diag.len() {
                return Err(Error::InvalidArgument(format!("bad static pair ({first}, {second})")));
            }
            let (k, l) = (DiagonalizedStatic::index(first, branch), DiagonalizedStatic::index(second, branch));
            match treatment {
                DegeneracyTreatment::Merge if !sys.equal(k, l) => return Err(Error::NoDegeneratePair),
                DegeneracyTreatment::Physical => sys.force_equal(k, l),
                _ => {}
            }
            [k.min(l), k.max(l)]
        }
        PairSelector::Cluster { index } => {
            if index >= sys.len() {
                return Err(Error::InvalidArgument(format!("index {index} out of range")));
            }
            let class = sys.class_of(index);
            if class.len() != 2 {
                return Err(Error::NoDegeneratePair);
            }
            [class[0], class[1]]
        }
    };
    if sys.class_of(pair[0]).len() != 2 {
        return Err(Error::ClusterAmbiguity {
            index: pair[0],
            size: sys.class_of(pair[0]).len(),
        });
    }

    let f1 = floquet_f1(&sys)?;
    let f2 = floquet_f2_block(&sys, &f1, &pair)?;
    let nu0 = 0.5 * (sys.f0[pair[0]] + sys.f0[pair[1]]);
    let n2 = sys.len();
    let mut projector = vec![0.0; n2];
    let mut reduced = vec![c64::new(0.0, 0.0); n2];
    for k in 0..n2 {
        if pair.contains(&k) {
            projector[k] = 1.0;
        } else {
            reduced[k] = 1.0 / (nu0 - sys.f0[k]);
        }
    }
    let mut raw = [[c64::new(0.0, 0.0); 2]; 2];
    for (a, &k) in pair.iter().enumerate() {
        for (b, &l) in pair.iter().enumerate() {
            let mut v = f2[(a, b)];
            for j in 0..n2 {
                v += f1[(k, j)] * reduced[j] * f1[(j, l)];
            }
            raw[a][b] = v;
        }
    }
    let first_order = pair
        .iter()
        .flat_map(|&k| pair.iter().map(move |&l| (k, l)))
        .map(|(k, l)| f1[(k, l)].norm())
        .fold(0.0, f64::max);

    let basis = match reference {
        None => [[1.0, 0.0], [0.0, 1.0]],
        Some(refs) => pair_basis(diag, &pair, refs)?,
    };
    let change = |m: [[c64; 2]; 2]| {
        let mut out = [[c64::new(0.0, 0.0); 2]; 2];
        for a in 0..2 {
            for b in 0..2 {
                for p in 0..2 {
                    for q in 0..2 {
                        out[a][b] += basis[p][a] * m[p][q] * basis[q][b];
                    }
                }
            }
        }
        out
    };
    let d = [
        [sys.f0[pair[0]] - nu0, c64::new(0.0, 0.0)],
        [c64::new(0.0, 0.0), sys.f0[pair[1]] - nu0],
    ];
    Ok(EffectiveBlock {
        pair,
        nu0,
        basis,
        b: change(raw),
        static_split: change(d),
        first_order,
        f1,
        projector,
        reduced,
    })
}

fn pair_basis(diag: &DiagonalizedStatic, pair: &[usize; 2], refs: [&[f64]; 2]) -> Result<[[f64; 2]; 2]> {
    let n = diag.len();
    for r in refs {
        if r.len() != n {
            return Err(Error::Dimension { expected: n, found: r.len() });
        }
    }
    // coefficients of each reference on the two static modes of the pair
    let coeff = |r: &[f64]| -> [f64; 2] {
        let mut out = [0.0; 2];
        for (a, &k) in pair.iter().enumerate() {
            let (j, _) = static_of(k);
            out[a] = (0..n).map(|i| diag.modes[(i, j)] * r[i]).sum();
        }
        out
    };
    let mut u = coeff(refs[0]);
    let nu = (u[0] * u[0] + u[1] * u[1]).sqrt();
    if nu < 1e-12 {
        return Err(Error::ZeroVector);
    }
    u = [u[0] / nu, u[1] / nu];
    let w = coeff(refs[1]);
    let proj = u[0] * w[0] + u[1] * w[1];
    let mut v = [w[0] - proj * u[0], w[1] - proj * u[1]];
    let nv = (v[0] * v[0] + v[1] * v[1]).sqrt();
    if nv < 1e-12 {
        // second reference collinear with the first: take the complement
        v = [-u[1], u[0]];
        if v[0] * w[0] + v[1] * w[1] < 0.0 {
            v = [-v[0], -v[1]];
        }
    } else {
        v = [v[0] / nv, v[1] / nv];
    }
    Ok([[u[0], v[0]], [u[1], v[1]]])
}

/// Exponent to quasifrequency.
fn quasi(z: c64) -> c64 {
    z / I
}

/// Split modes of the pair at modulation amplitude `epsilon`.
#[derive(Clone, Debug)]
pub struct SplitPrediction {
    pub epsilon: f64,
    pub pair: [usize; 2],
    /// Degenerate quasifrequency.
    pub nu0: f64,
    /// `B` as Floquet-exponent entries in the pair basis.
    pub b: [[c64; 2]; 2],
    pub static_split: [[c64; 2]; 2],
    /// Second-order quasifrequency coefficients `(w, q)`, ordered by real part.
    pub nu2: [c64; 2],
    /// Predicted quasifrequencies.
    pub split: [c64; 2],
    /// Coefficients on the pair basis, unit norm, first nonzero entry
    /// positive real.
    pub beta: [[c64; 2]; 2],
    pub w0: Vec<c64>,
    pub q0: Vec<c64>,
    pub w1: Vec<c64>,
    pub q1: Vec<c64>,
    /// Physical resonator amplitudes at `t = 0`, max modulus 1.
    pub w_red: Vec<c64>,
    pub q_red: Vec<c64>,
    pub projector: Vec<f64>,
    pub reduced: Vec<c64>,
}

fn eig2(m: [[c64; 2]; 2]) -> ([c64; 2], [[c64; 2]; 2]) {
    let tr = m[0][0] + m[1][1];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let disc = (tr * tr - 4.0 * det).sqrt();
    let vals = [0.5 * (tr - disc), 0.5 * (tr + disc)];
    let mut vecs = [[c64::new(0.0, 0.0); 2]; 2];
    for (k, &l) in vals.iter().enumerate() {
        // pick the better conditioned row of (m - l I)
        let r0 = [m[0][0] - l, m[0][1]];
        let r1 = [m[1][0], m[1][1] - l];
        let row = if r0[0].norm() + r0[1].norm() >= r1[0].norm() + r1[1].norm() { r0 } else { r1 };
        let mut v = if row[0].norm() + row[1].norm() == 0.0 {
            if k == 0 {
                [c64::new(1.0, 0.0), c64::new(0.0, 0.0)]
            } else {
                [c64::new(0.0, 0.0), c64::new(1.0, 0.0)]
            }
        } else {
            [row[1], -row[0]]
        };
        normalize_beta(&mut v);
        vecs[k] = v;
    }
    (vals, vecs)
}

fn normalize_beta(v: &mut [c64; 2]) {
    let n = (v[0].norm_sqr() + v[1].norm_sqr()).sqrt();
    let lead = if v[0].norm() > 1e-14 * n { v[0] } else { v[1] };
    let phase = lead.conj() / (lead.norm() * n);
    v[0] *= phase;
    v[1] *= phase;
}

fn finish_mode(diag: &DiagonalizedStatic, z0: Vec<c64>, z1: Vec<c64>, epsilon: f64) -> Result<Vec<c64>> {
    let full: Vec<c64> = z0.iter().zip(&z1).map(|(a, b)| a + epsilon * b).collect();
    let mut phys = diag.to_physical(&full);
    linalg::normalize_max(&mut phys)?;
    Ok(phys)
}

/// Diagonalize the effective block and assemble the split modes.
pub fn split_eigenvectors(diag: &DiagonalizedStatic, block: &EffectiveBlock, epsilon: f64) -> Result<SplitPrediction> {
    let exact = block.static_split.iter().flatten().all(|z| z.norm() == 0.0);
    let e2 = epsilon * epsilon;
    let k = if exact {
        block.b
    } else {
        let mut k = block.static_split;
        for (row, b) in k.iter_mut().zip(&block.b) {
            for (z, bz) in row.iter_mut().zip(b) {
                *z += e2 * bz;
            }
        }
        k
    };
    let knorm = k.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max);
    let (vals, vecs) = eig2(k);
    if (vals[0] - vals[1]).norm() <= 1e-10 * knorm {
        return Err(Error::DegenerateBlock);
    }
    let residual = (0..2)
        .map(|s| {
            let v = vecs[s];
            (0..2).map(|a| (k[a][0] * v[0] + k[a][1] * v[1] - vals[s] * v[a]).norm()).fold(0.0, f64::max)
        })
        .fold(0.0, f64::max);
    debug_assert!(residual <= 1e-10 * knorm.max(1e-300));

    // exponent shifts and their second-order coefficients
    let shift = |s: usize| if exact { e2 * vals[s] } else { vals[s] };
    let coeff = |s: usize| if exact { vals[s] } else if e2 > 0.0 { vals[s] / e2 } else { c64::new(f64::NAN, f64::NAN) };
    let mut order = [0usize, 1];
    order.sort_by(|&a, &b| quasi(coeff(a)).re.total_cmp(&quasi(coeff(b)).re).then(quasi(shift(a)).re.total_cmp(&quasi(shift(b)).re)));

    let n2 = block.projector.len();
    let zeroth = |beta: &[c64; 2]| -> Vec<c64> {
        let mut out = vec![c64::new(0.0, 0.0); n2];
        for (a, &kidx) in block.pair.iter().enumerate() {
            out[kidx] = block.basis[a][0] * beta[0] + block.basis[a][1] * beta[1];
        }
        out
    };
    let first = |z0: &[c64]| -> Vec<c64> {
        (0..n2)
            .map(|i| -block.reduced[i] * (0..n2).map(|j| block.f1[(i, j)] * z0[j]).sum::<c64>())
            .collect()
    };
    let [sw, sq] = order;
    let w0 = zeroth(&vecs[sw]);
    let q0 = zeroth(&vecs[sq]);
    let w1 = first(&w0);
    let q1 = first(&q0);
    let w_red = finish_mode(diag, w0.clone(), w1.clone(), epsilon)?;
    let q_red = finish_mode(diag, q0.clone(), q1.clone(), epsilon)?;
    let nu0 = quasi(block.nu0).re;
    Ok(SplitPrediction {
        epsilon,
        pair: block.pair,
        nu0,
        b: block.b,
        static_split: block.static_split,
        nu2: [quasi(coeff(sw)), quasi(coeff(sq))],
        split: [quasi(block.nu0 + shift(sw)), quasi(block.nu0 + shift(sq))],
        beta: [vecs[sw], vecs[sq]],
        w0,
        q0,
        w1,
        q1,
        w_red,
        q_red,
        projector: block.projector.clone(),
        reduced: block.reduced.clone(),
    })
}

impl SplitPrediction {
    /// Predicted split `|nu_w - nu_q|`.
    pub fn splitting(&self) -> f64 {
        (self.split[0] - self.split[1]).norm()
    }

    /// `|nu2_w - nu2_q|`.
    pub fn second_order_gap(&self) -> f64 {
        (self.nu2[0] - self.nu2[1]).norm()
    }

    pub fn to_json(&self) -> serde_json::Value {
        let p = |z: &c64| [z.re, z.im];
        let v = |x: &[c64]| x.iter().map(p).collect::<Vec<_>>();
        serde_json::json!({
            "epsilon": self.epsilon,
            "pair": self.pair,
            "nu0": self.nu0,
            "b": self.b.iter().map(|r| r.iter().map(p).collect::<Vec<_>>()).collect::<Vec<_>>(),
            "static_split": self.static_split.iter().map(|r| r.iter().map(p).collect::<Vec<_>>()).collect::<Vec<_>>(),
            "nu2": {"w": p(&self.nu2[0]), "q": p(&self.nu2[1])},
            "split": {"w": p(&self.split[0]), "q": p(&self.split[1])},
            "beta": {"w": v(&self.beta[0]), "q": v(&self.beta[1])},
            "w_red": v(&self.w_red),
            "q_red": v(&self.q_red),
        })
    }
}

/// Amplitude that the harmonics of [`diagonalize_static`] are normalized by.
pub fn mean_amplitude(modulation: &Modulation) -> f64 {
    modulation.amplitudes.iter().sum::<f64>() / modulation.amplitudes.len() as f64
}

/// Convenience: diagonalize, build `B` on a static pair and split.
pub fn predict_split(
    c: &CapacitanceMatrix,
    system: &ResonatorSystem,
    modulation: &Modulation,
    pair: (usize, usize),
    treatment: DegeneracyTreatment,
    reference: Option<[&[f64]; 2]>,
) -> Result<SplitPrediction> {
    let epsilon = mean_amplitude(modulation);
    let diag = diagonalize_static(c, system, modulation)?;
    let selector = PairSelector::Static {
        first: pair.0,
        second: pair.1,
        branch: Branch::Positive,
    };
    let block = effective_block_b(&diag, &selector, treatment, reference)?;
    split_eigenvectors(&diag, &block, epsilon)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::capacitance::{dilute_capacitance, Provenance};
    use crate::geometry::{build_supercell_chain, Materials};
    use crate::hill::PhasePreset;

    fn zero(n: usize) -> Mat<c64> {
        Mat::zeros(n, n)
    }

    #[test]
    fn single_resonator_diagonal() {
        let s = ResonatorSystem::new(vec![[0.0; 3]], 0.1, 0.025, Materials::default()).unwrap();
        let c = dilute_capacitance(&s).unwrap();
        let m = Modulation::uniform(0.2, 0.1, vec![0.0]).unwrap();
        let d = diagonalize_static(&c, &s, &m).unwrap();
        let w = d.omegas[0];
        assert!((d.harmonics.a0[0] - c64::new(0.0, w)).norm() < 1e-15);
        assert!((d.harmonics.a0[1] - c64::new(0.0, -w)).norm() < 1e-15);
        assert_eq!(d.harmonics.folding[0], fold(w, 0.2).1);
        assert_eq!(d.harmonics.folding[1], fold(-w, 0.2).1);
        assert!(d.residual < 1e-12);
    }

    #[test]
    fn inverse_matches_lu() {
        use faer::linalg::solvers::DenseSolveCore;
        let s = build_supercell_chain(2, 0.1).unwrap();
        let c = dilute_capacitance(&s).unwrap();
        let m = Modulation::uniform(2.0, 0.2, PhasePreset::Supercell.phases(12)).unwrap();
        let d = diagonalize_static(&c, &s, &m).unwrap();
        let inv = d.transform.partial_piv_lu().inverse();
        let diff = Mat::from_fn(24, 24, |i, j| inv[(i, j)] - d.inverse[(i, j)]);
        assert!(linalg::max_abs(diff.as_ref()) < 1e-10 * linalg::max_abs(inv.as_ref()));
        assert!(d.residual < 1e-10);
    }

    #[test]
    fn conjugation_symmetry_of_harmonics() {
        // y -> conj(y) maps index 2j to 2j+1 because M(t) is real
        let s = build_supercell_chain(1, 0.1).unwrap();
        let c = dilute_capacitance(&s).unwrap();
        let m = Modulation::uniform(2.0, 0.2, PhasePreset::Supercell.phases(6)).unwrap();
        let h = diagonalize_static(&c, &s, &m).unwrap().harmonics;
        let flip = |k: usize| k ^ 1;
        for k in 0..12 {
            for l in 0..12 {
                let a = h.a1_entry(1, k, l);
                let b = h.a1_entry(-1, flip(k), flip(l)).conj();
                assert!((a - b).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn missing_harmonic_gives_zero() {
        let omega = 1.0;
        let a0 = vec![c64::new(0.0, 0.1), c64::new(0.0, 2.1)];
        let mut a1p = zero(2);
        a1p[(0, 1)] = c64::new(0.3, 0.1);
        a1p[(1, 0)] = c64::new(-0.2, 0.4);
        let a1m = Mat::from_fn(2, 2, |i, j| a1p[(j, i)].conj());
        let sys = HarmonicSystem::new(a0, omega, [a1m, a1p], [zero(2), zero(2), zero(2)], 1e-9).unwrap();
        assert!(sys.equal(0, 1));
        let f1 = floquet_f1(&sys).unwrap();
        assert_eq!(f1[(0, 1)], c64::new(0.0, 0.0));
        assert_eq!(f1[(1, 0)], c64::new(0.0, 0.0));
    }

    #[test]
    fn zero_harmonics_give_zero_f2() {
        let a0 = vec![c64::new(0.0, 0.3), c64::new(0.0, 0.3), c64::new(0.0, -0.3)];
        let sys = HarmonicSystem::new(a0, 2.0, [zero(3), zero(3)], [zero(3), zero(3), zero(3)], 1e-9).unwrap();
        let f1 = floquet_f1(&sys).unwrap();
        let f2 = floquet_f2_block(&sys, &f1, &[0, 1]).unwrap();
        assert!(linalg::max_abs(f2.as_ref()) == 0.0);
    }

    #[test]
    fn small_denominator_detected() {
        let a0 = vec![c64::new(0.0, 0.3), c64::new(0.0, 0.3 + 1.0 + 1e-12)];
        let mut a1m = zero(2);
        a1m[(0, 1)] = c64::new(1.0, 0.0);
        let sys = HarmonicSystem::new(a0, 1.0, [a1m, zero(2)], [zero(2), zero(2), zero(2)], 1e-14).unwrap();
        assert!(!sys.equal(0, 1));
        assert!(matches!(floquet_f1(&sys), Err(Error::SmallDenominator { .. })));
    }

    fn merged(cells: usize) -> (ResonatorSystem, CapacitanceMatrix, usize, usize) {
        let s = build_supercell_chain(cells, 0.1).unwrap();
        let c = dilute_capacitance(&s).unwrap();
        // merge two adjacent static modes into an exact degeneracy
        let (vals, vecs) = c.eigen().unwrap();
        let n = s.len();
        let (a, b) = (2, 3);
        let mean = 0.5 * (vals[a] + vals[b]);
        let entries = Mat::from_fn(n, n, |i, j| {
            c.get(i, j) + (mean - vals[a]) * vecs[(i, a)] * vecs[(j, a)] + (mean - vals[b]) * vecs[(i, b)] * vecs[(j, b)]
        });
        let cm = CapacitanceMatrix::new(
            Mat::from_fn(n, n, |i, j| 0.5 * (entries[(i, j)] + entries[(j, i)])),
            Provenance::Custom,
        )
        .unwrap();
        let (vals2, _) = cm.eigen().unwrap();
        let a2 = (0..n).min_by(|&x, &y| (vals2[x] - mean).abs().total_cmp(&(vals2[y] - mean).abs())).unwrap();
        let b2 = if a2 + 1 < n && (vals2[a2 + 1] - mean).abs() < 1e-9 { a2 + 1 } else { a2 - 1 };
        (s, cm, a2.min(b2), a2.max(b2))
    }

    #[test]
    fn first_order_block_vanishes() {
        let (s, c, a, b) = merged(2);
        let m = Modulation::uniform(2.0, 0.2, PhasePreset::Supercell.phases(12)).unwrap();
        let d = diagonalize_static(&c, &s, &m).unwrap();
        let sel = PairSelector::Static {
            first: a,
            second: b,
            branch: Branch::Positive,
        };
        let block = effective_block_b(&d, &sel, DegeneracyTreatment::Merge, None).unwrap();
        assert!(block.first_order <= 1e-12);
        // P^2 = P and G P = 0 hold on the diagonal representation
        for k in 0..block.projector.len() {
            let p = block.projector[k];
            assert_eq!(p * p, p);
            assert_eq!(block.reduced[k] * p, c64::new(0.0, 0.0));
        }
    }

    #[test]
    fn branches_conjugate() {
        let (s, c, a, b) = merged(2);
        let m = Modulation::uniform(2.0, 0.2, PhasePreset::Supercell.phases(12)).unwrap();
        let d = diagonalize_static(&c, &s, &m).unwrap();
        let eigs = |branch| {
            let sel = PairSelector::Static { first: a, second: b, branch };
            let blk = effective_block_b(&d, &sel, DegeneracyTreatment::Merge, None).unwrap();
            let (mut v, _) = eig2(blk.b);
            v.sort_by(|x, y| x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im)));
            v
        };
        let p = eigs(Branch::Positive);
        let mut q = eigs(Branch::Negative).map(|z| z.conj());
        q.sort_by(|x, y| x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im)));
        for (x, y) in p.iter().zip(&q) {
            assert!((x - y).norm() < 1e-10 * x.norm().max(1.0), "{p:?} vs {q:?}");
        }
    }

    #[test]
    fn zero_amplitude_spans_pair() {
        let (s, c, a, b) = merged(2);
        let m = Modulation::uniform(2.0, 0.2, PhasePreset::Supercell.phases(12)).unwrap();
        let d = diagonalize_static(&c, &s, &m).unwrap();
        let sel = PairSelector::Static {
            first: a,
            second: b,
            branch: Branch::Positive,
        };
        let block = effective_block_b(&d, &sel, DegeneracyTreatment::Merge, None).unwrap();
        let pred = split_eigenvectors(&d, &block, 0.0).unwrap();
        let n = s.len();
        let predicted = Mat::from_fn(n, 2, |i, k| if k == 0 { pred.w_red[i] } else { pred.q_red[i] });
        let pair = Mat::from_fn(n, 2, |i, k| c64::new(d.modes[(i, if k == 0 { a } else { b })], 0.0));
        assert!(linalg::subspace_angle(predicted.as_ref(), pair.as_ref()).unwrap() < 1e-10);
    }

    #[test]
    fn cluster_selector_needs_pair() {
        let s = build_supercell_chain(1, 0.1).unwrap();
        let c = dilute_capacitance(&s).unwrap();
        let m = Modulation::uniform(2.0, 0.2, PhasePreset::Supercell.phases(6)).unwrap();
        let d = diagonalize_static(&c, &s, &m).unwrap();
        let top = 2 * (d.len() - 1);
        let r = effective_block_b(&d, &PairSelector::Cluster { index: top }, DegeneracyTreatment::Merge, None);
        assert!(matches!(r, Err(Error::NoDegeneratePair)));
    }
}
