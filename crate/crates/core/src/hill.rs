//! Time-modulated coefficient matrix `M(t)` of the resonator Hill system
//! `psi'' + M(t) psi = 0`, its small-amplitude Fourier expansion and the
//! static spectrum.

use std::f64::consts::PI;

use faer::Mat;
use num_complex::Complex64 as c64;
use serde::{Deserialize, Serialize};

use crate::capacitance::{BlochCapacitance, CapacitanceMatrix};
use crate::error::{Error, Result};
use crate::geometry::{Layout, ResonatorSystem};

/// Periodic stiffness profile `kappa(t) = 1 + sum_k a_k cos(k * Omega * t + psi_k)`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KappaProfile {
    pub terms: Vec<KappaTerm>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KappaTerm {
    pub amplitude: f64,
    pub harmonic: u32,
    #[serde(default)]
    pub phase: f64,
}

impl KappaProfile {
    pub fn cosine(amplitude: f64, phase: f64) -> Self {
        Self {
            terms: vec![KappaTerm {
                amplitude,
                harmonic: 1,
                phase,
            }],
        }
    }

    pub fn is_constant(&self) -> bool {
        self.terms.iter().all(|t| t.amplitude == 0.0 || t.harmonic == 0)
    }

    /// `(kappa, kappa', kappa'')` at time `t`.
    pub fn eval(&self, omega: f64, t: f64) -> (f64, f64, f64) {
        let mut k = 1.0;
        let mut dk = 0.0;
        let mut ddk = 0.0;
        for term in &self.terms {
            let w = term.harmonic as f64 * omega;
            let (s, c) = (w * t + term.phase).sin_cos();
            k += term.amplitude * c;
            dk -= term.amplitude * w * s;
            ddk -= term.amplitude * w * w * c;
        }
        (k, dk, ddk)
    }

    /// Bound on `|kappa - 1|`; profiles must stay positive.
    pub fn max_deviation(&self) -> f64 {
        self.terms.iter().map(|t| t.amplitude.abs()).sum()
    }
}

/// Cosine modulation `rho_i(t) = 1 / (1 + eps_i cos(Omega t + phi_i))`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Modulation {
    pub omega: f64,
    pub amplitudes: Vec<f64>,
    pub phases: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<Vec<KappaProfile>>,
}

/// Named phase layouts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhasePreset {
    /// `(2pi/3, 4pi/3, 0)` repeated from the left end.
    Ssh,
    /// `(2pi/3, 4pi/3, 0, 2pi/3, 0, 4pi/3)` repeated per supercell; on a
    /// mirror interface the right half copies the phase of its preimage.
    Supercell,
}

pub const SSH_PHASES: [f64; 3] = [2.0 * PI / 3.0, 4.0 * PI / 3.0, 0.0];
pub const SUPERCELL_PHASES: [f64; 6] = [2.0 * PI / 3.0, 4.0 * PI / 3.0, 0.0, 2.0 * PI / 3.0, 0.0, 4.0 * PI / 3.0];

impl PhasePreset {
    pub fn phases(self, n: usize) -> Vec<f64> {
        let pattern: &[f64] = match self {
            PhasePreset::Ssh => &SSH_PHASES,
            PhasePreset::Supercell => &SUPERCELL_PHASES,
        };
        (0..n).map(|i| pattern[i % pattern.len()]).collect()
    }

    /// Phases adapted to the layout of `system`.
    pub fn phases_for(self, system: &ResonatorSystem) -> Vec<f64> {
        match (self, &system.layout) {
            (PhasePreset::Supercell, Layout::MirrorInterface { cells }) => {
                let half = self.phases(6 * cells);
                half.iter().chain(half.iter().rev()).copied().collect()
            }
            _ => self.phases(system.len()),
        }
    }
}

/// Reverse the orientation of every trimer: `(a, b, c) -> (c, b, a)` within
/// each consecutive triple. Used to flip which edge the split modes favour.
pub fn reverse_orientation(phases: &[f64]) -> Vec<f64> {
    let mut out = phases.to_vec();
    for chunk in out.chunks_mut(3) {
        chunk.reverse();
    }
    out
}

impl Modulation {
    pub fn new(omega: f64, amplitudes: Vec<f64>, phases: Vec<f64>) -> Result<Self> {
        let m = Self {
            omega,
            amplitudes,
            phases,
            kappa: None,
        };
        m.validate(m.amplitudes.len())?;
        Ok(m)
    }

    pub fn uniform(omega: f64, epsilon: f64, phases: Vec<f64>) -> Result<Self> {
        let n = phases.len();
        Self::new(omega, vec![epsilon; n], phases)
    }

    /// Unmodulated system with a nominal frequency `omega` (sets the period).
    pub fn none(omega: f64, n: usize) -> Self {
        Self {
            omega,
            amplitudes: vec![0.0; n],
            phases: vec![0.0; n],
            kappa: None,
        }
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        let mut m = self.clone();
        m.amplitudes = vec![epsilon; m.amplitudes.len()];
        m.validate(m.amplitudes.len())?;
        Ok(m)
    }

    pub fn with_phases(&self, phases: Vec<f64>) -> Result<Self> {
        let mut m = self.clone();
        m.phases = phases;
        m.validate(m.amplitudes.len())?;
        Ok(m)
    }

    pub fn with_kappa(mut self, kappa: Vec<KappaProfile>) -> Result<Self> {
        self.kappa = Some(kappa);
        self.validate(self.amplitudes.len())?;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    pub fn period(&self) -> f64 {
        2.0 * PI / self.omega
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if !(self.omega.is_finite() && self.omega > 0.0) {
            return Err(Error::InvalidArgument(format!("omega must be positive, got {}", self.omega)));
        }
        for len in [self.amplitudes.len(), self.phases.len()] {
            if len != n {
                return Err(Error::Dimension { expected: n, found: len });
            }
        }
        for (index, &amplitude) in self.amplitudes.iter().enumerate() {
            if !amplitude.is_finite() || amplitude.abs() >= 1.0 {
                return Err(Error::SingularModulation { index, amplitude });
            }
        }
        if let Some(kappa) = &self.kappa {
            if kappa.len() != n {
                return Err(Error::Dimension {
                    expected: n,
                    found: kappa.len(),
                });
            }
            if let Some(k) = kappa.iter().find(|k| k.max_deviation() >= 1.0) {
                return Err(Error::InvalidArgument(format!(
                    "kappa profile may vanish (total amplitude {})",
                    k.max_deviation()
                )));
            }
        }
        Ok(())
    }

    pub fn uniform_amplitude(&self) -> Option<f64> {
        let first = *self.amplitudes.first()?;
        self.amplitudes.iter().all(|&a| a == first).then_some(first)
    }

    pub fn has_constant_kappa(&self) -> bool {
        self.kappa.as_ref().is_none_or(|k| k.iter().all(KappaProfile::is_constant))
    }

    pub fn is_static(&self) -> bool {
        self.amplitudes.iter().all(|&a| a == 0.0) && self.has_constant_kappa()
    }
}

/// Coupling matrix of a Hill system: the capacitance of a finite structure
/// or the Bloch-reduced capacitance of a periodic one.
#[derive(Clone, Debug)]
pub enum Coupling {
    Real(Mat<f64>),
    Complex(Mat<c64>),
}

impl Coupling {
    pub fn len(&self) -> usize {
        match self {
            Coupling::Real(m) => m.nrows(),
            Coupling::Complex(m) => m.nrows(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug)]
pub struct HillSystem {
    pub coupling: Coupling,
    pub modulation: Modulation,
    /// `delta * kappa_r / (rho_r * |D|)`.
    pub stiffness: f64,
}

/// Diagonal factors with `M(t) = diag(row) C diag(col) + diag(shift)`.
#[derive(Clone, Debug)]
pub struct Factors {
    pub row: Vec<f64>,
    pub col: Vec<f64>,
    pub shift: Vec<f64>,
}

impl HillSystem {
    pub fn new(c: &CapacitanceMatrix, system: &ResonatorSystem, modulation: Modulation) -> Result<Self> {
        Self::with_coupling(Coupling::Real(c.entries.clone()), system, modulation)
    }

    pub fn bloch(c: &BlochCapacitance, system: &ResonatorSystem, modulation: Modulation) -> Result<Self> {
        Self::with_coupling(Coupling::Complex(c.entries.clone()), system, modulation)
    }

    pub fn with_coupling(coupling: Coupling, system: &ResonatorSystem, modulation: Modulation) -> Result<Self> {
        let n = coupling.len();
        if system.len() != n {
            return Err(Error::Dimension {
                expected: system.len(),
                found: n,
            });
        }
        modulation.validate(n)?;
        Ok(Self {
            coupling,
            modulation,
            stiffness: system.stiffness(),
        })
    }

    pub fn len(&self) -> usize {
        self.coupling.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn period(&self) -> f64 {
        self.modulation.period()
    }

    pub fn omega(&self) -> f64 {
        self.modulation.omega
    }

    pub fn is_real(&self) -> bool {
        matches!(self.coupling, Coupling::Real(_))
    }

    pub fn factors(&self, t: f64) -> Factors {
        let n = self.len();
        let m = &self.modulation;
        let mut row = Vec::with_capacity(n);
        let mut col = Vec::with_capacity(n);
        let mut shift = Vec::with_capacity(n);
        for i in 0..n {
            // rho_i(t) is the reciprocal of this factor
            let inv_rho = 1.0 + m.amplitudes[i] * (m.omega * t + m.phases[i]).cos();
            let (k, dk, ddk) = match &m.kappa {
                Some(profiles) => profiles[i].eval(m.omega, t),
                None => (1.0, 0.0, 0.0),
            };
            let sk = k.sqrt();
            row.push(self.stiffness * sk / inv_rho);
            col.push(sk * inv_rho);
            // (sqrt k / 2) d/dt (k' k^{-3/2})
            shift.push(0.5 * sk * (ddk * k.powf(-1.5) - 1.5 * dk * dk * k.powf(-2.5)));
        }
        Factors { row, col, shift }
    }

    pub fn kappa_sqrt(&self, t: f64) -> Vec<f64> {
        let m = &self.modulation;
        (0..self.len())
            .map(|i| match &m.kappa {
                Some(profiles) => profiles[i].eval(m.omega, t).0.sqrt(),
                None => 1.0,
            })
            .collect()
    }

    /// `M(t)` for a real coupling.
    pub fn assemble_real(&self, t: f64) -> Result<Mat<f64>> {
        match &self.coupling {
            Coupling::Real(c) => {
                let f = self.factors(t);
                Ok(Mat::from_fn(self.len(), self.len(), |i, j| {
                    f.row[i] * c[(i, j)] * f.col[j] + if i == j { f.shift[i] } else { 0.0 }
                }))
            }
            Coupling::Complex(_) => Err(Error::InvalidArgument("coupling is complex".into())),
        }
    }

    /// `M(t)` as a complex matrix, valid for either coupling.
    pub fn assemble_complex(&self, t: f64) -> Mat<c64> {
        let f = self.factors(t);
        let n = self.len();
        Mat::from_fn(n, n, |i, j| {
            let c = match &self.coupling {
                Coupling::Real(c) => c64::new(c[(i, j)], 0.0),
                Coupling::Complex(c) => c[(i, j)],
            };
            c * (f.row[i] * f.col[j]) + if i == j { c64::new(f.shift[i], 0.0) } else { c64::new(0.0, 0.0) }
        })
    }
}

/// `M(t)` for a finite structure at a single time.
pub fn assemble_m(c: &CapacitanceMatrix, system: &ResonatorSystem, modulation: &Modulation, t: f64) -> Result<Mat<f64>> {
    HillSystem::new(c, system, modulation.clone())?.assemble_real(t)
}

/// Harmonic coefficients of `M(t) = M0 + eps M1(t) + eps^2 M2(t) + O(eps^3)`
/// for a uniform amplitude and constant kappa. Only the present harmonics
/// are stored: `M1` has `m = +-1`, `M2` has `m = 0, +-2`.
#[derive(Clone, Debug)]
pub struct FourierBlocks {
    pub m0: Mat<f64>,
    pub m1_plus: Mat<c64>,
    pub m2_zero: Mat<f64>,
    pub m2_plus: Mat<c64>,
    pub epsilon: f64,
}

impl FourierBlocks {
    /// Coefficient of `e^{i m Omega t}` in `M_order(t)`.
    pub fn harmonic(&self, order: usize, m: i32) -> Option<Mat<c64>> {
        let n = self.m0.nrows();
        let conj = |a: &Mat<c64>| Mat::from_fn(n, n, |i, j| a[(i, j)].conj());
        let real = |a: &Mat<f64>| Mat::from_fn(n, n, |i, j| c64::new(a[(i, j)], 0.0));
        match (order, m) {
            (0, 0) => Some(real(&self.m0)),
            (1, 1) => Some(self.m1_plus.clone()),
            (1, -1) => Some(conj(&self.m1_plus)),
            (2, 0) => Some(real(&self.m2_zero)),
            (2, 2) => Some(self.m2_plus.clone()),
            (2, -2) => Some(conj(&self.m2_plus)),
            _ => None,
        }
    }

    pub fn harmonics(order: usize) -> &'static [i32] {
        match order {
            0 => &[0],
            1 => &[-1, 1],
            2 => &[-2, 0, 2],
            _ => &[],
        }
    }
}

pub fn epsilon_fourier_blocks(c: &CapacitanceMatrix, system: &ResonatorSystem, modulation: &Modulation) -> Result<FourierBlocks> {
    modulation.validate(c.len())?;
    modulation.uniform_amplitude().ok_or(Error::NonUniformAmplitude)?;
    scaled_fourier_blocks(c, system, modulation)
}

/// Expansion blocks for per-resonator amplitudes `eps_i = eps r_i`, with
/// `eps` the mean amplitude. Reduces to [`epsilon_fourier_blocks`] when
/// all amplitudes agree.
pub fn scaled_fourier_blocks(c: &CapacitanceMatrix, system: &ResonatorSystem, modulation: &Modulation) -> Result<FourierBlocks> {
    let n = c.len();
    if system.len() != n {
        return Err(Error::Dimension {
            expected: system.len(),
            found: n,
        });
    }
    modulation.validate(n)?;
    if !modulation.has_constant_kappa() {
        return Err(Error::UnsupportedModulation);
    }
    let amps = &modulation.amplitudes;
    let epsilon = amps.iter().sum::<f64>() / n as f64;
    let r: Vec<f64> = if epsilon == 0.0 {
        vec![1.0; n]
    } else {
        amps.iter().map(|a| a / epsilon).collect()
    };
    let s = system.stiffness();
    let phi = &modulation.phases;
    let m0 = Mat::from_fn(n, n, |i, j| s * c.get(i, j));
    // (1 + eps r_j c_j) / (1 + eps r_i c_i)
    //   = 1 + eps (r_j c_j - r_i c_i) + eps^2 (r_i^2 c_i^2 - r_i r_j c_i c_j) + ...
    // with c = cos(Omega t + phi) = (e^{i.} + e^{-i.}) / 2
    let e = |x: f64| c64::from_polar(1.0, x);
    let m1_plus = Mat::from_fn(n, n, |i, j| m0[(i, j)] * (r[j] * e(phi[j]) - r[i] * e(phi[i])) * 0.5);
    let m2_zero = Mat::from_fn(n, n, |i, j| m0[(i, j)] * (r[i] * r[i] - r[i] * r[j] * (phi[i] - phi[j]).cos()) * 0.5);
    let m2_plus = Mat::from_fn(n, n, |i, j| {
        m0[(i, j)] * (r[i] * r[i] * e(2.0 * phi[i]) - r[i] * r[j] * e(phi[i] + phi[j])) * 0.25
    });
    Ok(FourierBlocks {
        m0,
        m1_plus,
        m2_zero,
        m2_plus,
        epsilon,
    })
}

/// Resonant frequencies `omega_j = sqrt(stiffness * lambda_j)` with the
/// capacitance eigenvectors as columns of `vectors`.
#[derive(Clone, Debug)]
pub struct StaticSpectrum {
    pub eigenvalues: Vec<f64>,
    pub omegas: Vec<f64>,
    pub vectors: Mat<f64>,
}

impl StaticSpectrum {
    pub fn len(&self) -> usize {
        self.omegas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omegas.is_empty()
    }

    pub fn vector(&self, j: usize) -> Vec<f64> {
        (0..self.vectors.nrows()).map(|i| self.vectors[(i, j)]).collect()
    }
}

pub fn static_spectrum(c: &CapacitanceMatrix, system: &ResonatorSystem) -> Result<StaticSpectrum> {
    if system.len() != c.len() {
        return Err(Error::Dimension {
            expected: system.len(),
            found: c.len(),
        });
    }
    let (eigenvalues, vectors) = c.eigen()?;
    if let Some(&lo) = eigenvalues.first() {
        if lo <= 0.0 {
            return Err(Error::NotPositiveDefinite { min_eigenvalue: lo });
        }
    }
    let s = system.stiffness();
    let omegas = eigenvalues.iter().map(|l| (s * l).sqrt()).collect();
    Ok(StaticSpectrum {
        eigenvalues,
        omegas,
        vectors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::capacitance::dilute_capacitance;
    use crate::geometry::{build_supercell_chain, Materials};

    fn supercell(l: usize) -> (ResonatorSystem, CapacitanceMatrix) {
        let s = build_supercell_chain(l, 0.1).unwrap();
        let c = dilute_capacitance(&s).unwrap();
        (s, c)
    }

    #[test]
    fn unmodulated_is_constant() {
        let (s, c) = supercell(1);
        let m = Modulation::none(2.0, 6);
        let a = assemble_m(&c, &s, &m, 0.0).unwrap();
        let b = assemble_m(&c, &s, &m, 1.234).unwrap();
        let k = s.stiffness();
        for i in 0..6 {
            for j in 0..6 {
                assert_eq!(a[(i, j)], b[(i, j)]);
                assert!((a[(i, j)] - k * c.get(i, j)).abs() <= 1e-15 * k * c.get(0, 0));
            }
        }
    }

    #[test]
    fn equal_phases_cancel() {
        let (s, c) = supercell(1);
        let m = Modulation::uniform(2.0, 0.2, vec![0.0; 6]).unwrap();
        let k = s.stiffness();
        for t in [0.0, 0.3, 1.7] {
            let a = assemble_m(&c, &s, &m, t).unwrap();
            for i in 0..6 {
                for j in 0..6 {
                    assert!((a[(i, j)] - k * c.get(i, j)).abs() <= 1e-14 * k * c.get(0, 0));
                }
            }
        }
    }

    #[test]
    fn singular_amplitude() {
        assert!(matches!(
            Modulation::new(1.0, vec![0.5, 1.0], vec![0.0, 0.0]),
            Err(Error::SingularModulation { index: 1, .. })
        ));
    }

    #[test]
    fn kappa_shift_matches_finite_difference() {
        let s = ResonatorSystem::new(vec![[0.0; 3]], 0.1, 1.0, Materials::default()).unwrap();
        let c = CapacitanceMatrix::from_rows(&[vec![4.0 * PI]]).unwrap();
        let omega = 0.7;
        let profile = KappaProfile::cosine(0.1, 0.0);
        let m = Modulation::new(omega, vec![0.0], vec![0.0])
            .unwrap()
            .with_kappa(vec![profile.clone()])
            .unwrap();
        let hill = HillSystem::new(&c, &s, m).unwrap();
        let g = |t: f64| {
            let (k, dk, _) = profile.eval(omega, t);
            dk * k.powf(-1.5)
        };
        let t = 0.9;
        let mut errors = Vec::new();
        for h in [1e-2, 5e-3] {
            let fd = 0.5 * profile.eval(omega, t).0.sqrt() * (g(t + h) - g(t - h)) / (2.0 * h);
            errors.push((hill.factors(t).shift[0] - fd).abs());
        }
        // second order: halving h quarters the error
        assert!(errors[0] < 1e-6);
        let ratio = errors[0] / errors[1];
        assert!((ratio - 4.0).abs() < 0.2, "ratio {ratio}");
    }

    #[test]
    fn static_spectrum_of_scaled_identity() {
        let s = build_supercell_chain(1, 0.1).unwrap();
        let c = CapacitanceMatrix::from_rows(&(0..6).map(|i| (0..6).map(|j| if i == j { 4.0 * PI } else { 0.0 }).collect()).collect::<Vec<_>>()).unwrap();
        let sp = static_spectrum(&c, &s).unwrap();
        let w = (4.0 * PI * s.stiffness()).sqrt();
        assert!(sp.omegas.iter().all(|x| (x - w).abs() < 1e-14));
    }

    #[test]
    fn static_residual() {
        let (s, c) = supercell(4);
        let sp = static_spectrum(&c, &s).unwrap();
        let norm = crate::linalg::max_abs(c.entries.as_ref()) * 24.0;
        for j in 0..24 {
            let v = sp.vector(j);
            for i in 0..24 {
                let cv: f64 = (0..24).map(|k| c.get(i, k) * v[k]).sum();
                assert!((cv - sp.eigenvalues[j] * v[i]).abs() <= 1e-10 * norm);
            }
        }
    }

    #[test]
    fn non_positive_definite_rejected() {
        let s = build_supercell_chain(4, 0.1).unwrap().with_gamma(0.1);
        let c = dilute_capacitance(&s).unwrap();
        assert!(matches!(static_spectrum(&c, &s), Err(Error::NotPositiveDefinite { .. })));
    }

    #[test]
    fn phase_presets() {
        let p = PhasePreset::Supercell.phases(12);
        assert_eq!(&p[6..], &SUPERCELL_PHASES);
        let mirror = crate::geometry::build_mirror_interface(1, 0.1).unwrap();
        let q = PhasePreset::Supercell.phases_for(&mirror);
        for i in 0..12 {
            assert_eq!(q[i], q[11 - i]);
        }
        assert_eq!(reverse_orientation(&SSH_PHASES), vec![0.0, 4.0 * PI / 3.0, 2.0 * PI / 3.0]);
    }

    #[test]
    fn first_order_blocks_structure() {
        let (s, c) = supercell(1);
        let m = Modulation::uniform(2.0, 0.1, PhasePreset::Supercell.phases(6)).unwrap();
        let b = epsilon_fourier_blocks(&c, &s, &m).unwrap();
        for i in 0..6 {
            assert_eq!(b.m1_plus[(i, i)].norm(), 0.0);
            assert_eq!(b.m2_zero[(i, i)], 0.0);
            assert_eq!(b.m2_plus[(i, i)].norm(), 0.0);
        }
        // resonators 1 and 4 share a phase
        assert_eq!(b.m1_plus[(0, 3)].norm(), 0.0);
        assert_eq!(b.m2_zero[(0, 3)], 0.0);
        assert!(b.harmonic(1, 0).is_none());
        let minus = b.harmonic(1, -1).unwrap();
        assert!((minus[(0, 1)] - b.m1_plus[(0, 1)].conj()).norm() == 0.0);
        let varied = Modulation::new(2.0, vec![0.1, 0.2, 0.1, 0.1, 0.1, 0.1], vec![0.0; 6]).unwrap();
        assert!(matches!(epsilon_fourier_blocks(&c, &s, &varied), Err(Error::NonUniformAmplitude)));
    }
}
