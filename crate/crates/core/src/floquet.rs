//! Monodromy matrices, quasifrequencies and Bloch envelopes of Hill systems.

use faer::linalg::matmul::matmul;
use faer::{Accum, Mat, Par};
use num_complex::Complex64 as c64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hill::{Coupling, HillSystem};
use crate::linalg::{self, Scalar};

pub const DEFAULT_STEPS: usize = 2000;
pub const DEFAULT_TOLERANCE: f64 = 1e-8;
pub const DEFAULT_CLUSTER_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorOptions {
    /// RK4 steps per modulation period.
    pub steps: usize,
    /// Rerun with half the steps to estimate the error.
    pub richardson: bool,
    /// Relative error bound enforced when `richardson` is set.
    pub tolerance: f64,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        Self {
            steps: DEFAULT_STEPS,
            richardson: true,
            tolerance: DEFAULT_TOLERANCE,
        }
    }
}

impl IntegratorOptions {
    pub fn fast(steps: usize) -> Self {
        Self {
            steps,
            richardson: false,
            tolerance: DEFAULT_TOLERANCE,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Monodromy {
    /// `X(T)` with `X(0) = I`, acting on `(psi, psi')`.
    pub matrix: Mat<c64>,
    /// Relative Richardson estimate `|X_h - X_2h| / (15 |X_h|)`.
    pub error_estimate: Option<f64>,
    pub steps: usize,
    pub period: f64,
    pub omega: f64,
}

impl Monodromy {
    pub fn determinant(&self) -> c64 {
        linalg::determinant(self.matrix.as_ref())
    }

    pub fn len(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// `out = x + s * y`, column by column.
fn combine<T: Scalar>(out: &mut Mat<T>, x: &Mat<T>, s: f64, y: &Mat<T>) {
    for j in 0..out.ncols() {
        let (xc, yc) = (x.col_as_slice(j), y.col_as_slice(j));
        for (o, (a, b)) in out.col_as_slice_mut(j).iter_mut().zip(xc.iter().zip(yc)) {
            *o = *a + b.scale(s);
        }
    }
}

/// Classical RK4 for `y' = [[0, I], [-M(t), 0]] y` on the split state
/// `(top, bottom)`. Calls `visit(step, top, bottom)` after each step.
struct Rk4<T: Scalar> {
    n: usize,
    coupling: Mat<T>,
    m: [Mat<T>; 3],
    k_top: [Mat<T>; 4],
    k_bot: [Mat<T>; 4],
    tmp_top: Mat<T>,
    tmp_bot: Mat<T>,
}

impl<T: Scalar> Rk4<T> {
    fn new(coupling: Mat<T>, cols: usize) -> Self {
        let n = coupling.nrows();
        let z = || Mat::<T>::zeros(n, cols);
        Self {
            n,
            coupling,
            m: [Mat::zeros(n, n), Mat::zeros(n, n), Mat::zeros(n, n)],
            k_top: [z(), z(), z(), z()],
            k_bot: [z(), z(), z(), z()],
            tmp_top: z(),
            tmp_bot: z(),
        }
    }

    fn fill(&mut self, slot: usize, hill: &HillSystem, t: f64) {
        let f = hill.factors(t);
        let c = &self.coupling;
        let m = &mut self.m[slot];
        for j in 0..self.n {
            for i in 0..self.n {
                let mut v = c[(i, j)].scale(f.row[i] * f.col[j]);
                if i == j {
                    v += T::from(f.shift[i]);
                }
                m[(i, j)] = v;
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn run(
        &mut self,
        hill: &HillSystem,
        top: &mut Mat<T>,
        bot: &mut Mat<T>,
        t0: f64,
        h: f64,
        steps: usize,
        mut visit: impl FnMut(usize, &Mat<T>, &Mat<T>),
    ) {
        self.fill(0, hill, t0);
        for step in 0..steps {
            let t = t0 + step as f64 * h;
            self.fill(1, hill, t + 0.5 * h);
            self.fill(2, hill, t + h);
            let minus_one = T::from(-1.0);

            self.k_top[0].copy_from(&*bot);
            matmul(self.k_bot[0].as_mut(), Accum::Replace, self.m[0].as_ref(), top.as_ref(), minus_one, Par::Seq);

            for (stage, (scale, slot)) in [(0.5, 1usize), (0.5, 1), (1.0, 2)].into_iter().enumerate() {
                combine(&mut self.tmp_top, top, scale * h, &self.k_top[stage]);
                combine(&mut self.tmp_bot, bot, scale * h, &self.k_bot[stage]);
                self.k_top[stage + 1].copy_from(&self.tmp_bot);
                matmul(
                    self.k_bot[stage + 1].as_mut(),
                    Accum::Replace,
                    self.m[slot].as_ref(),
                    self.tmp_top.as_ref(),
                    minus_one,
                    Par::Seq,
                );
            }

            let w = h / 6.0;
            for (state, k) in [(&mut *top, &self.k_top), (&mut *bot, &self.k_bot)] {
                for j in 0..state.ncols() {
                    let (k0, k1, k2, k3) = (k[0].col_as_slice(j), k[1].col_as_slice(j), k[2].col_as_slice(j), k[3].col_as_slice(j));
                    for (i, x) in state.col_as_slice_mut(j).iter_mut().enumerate() {
                        *x += (k0[i] + k1[i].scale(2.0) + k2[i].scale(2.0) + k3[i]).scale(w);
                    }
                }
            }
            // the end-of-step matrix starts the next step
            self.m.swap(0, 2);
            visit(step, top, bot);
        }
    }
}

fn coupling_as<T: Scalar>(c: &Mat<f64>) -> Mat<T> {
    Mat::from_fn(c.nrows(), c.ncols(), |i, j| T::from(c[(i, j)]))
}

fn integrate_identity<T: Scalar>(hill: &HillSystem, coupling: Mat<T>, steps: usize) -> Mat<c64> {
    let n = hill.len();
    let mut top = Mat::<T>::from_fn(n, 2 * n, |i, j| T::from(if i == j { 1.0 } else { 0.0 }));
    let mut bot = Mat::<T>::from_fn(n, 2 * n, |i, j| T::from(if i + n == j { 1.0 } else { 0.0 }));
    let h = hill.period() / steps as f64;
    Rk4::new(coupling, 2 * n).run(hill, &mut top, &mut bot, 0.0, h, steps, |_, _, _| {});
    Mat::from_fn(2 * n, 2 * n, |i, j| if i < n { top[(i, j)].to_c64() } else { bot[(i - n, j)].to_c64() })
}

fn raw_monodromy(hill: &HillSystem, steps: usize) -> Mat<c64> {
    match &hill.coupling {
        Coupling::Real(c) => integrate_identity::<f64>(hill, c.clone(), steps),
        Coupling::Complex(c) => integrate_identity::<c64>(hill, c.clone(), steps),
    }
}

/// Fundamental matrix over one period.
pub fn monodromy(hill: &HillSystem, opts: &IntegratorOptions) -> Result<Monodromy> {
    if opts.steps < 100 {
        return Err(Error::InvalidArgument(format!("at least 100 steps required, got {}", opts.steps)));
    }
    let matrix = raw_monodromy(hill, opts.steps);
    let error_estimate = if opts.richardson {
        let coarse = raw_monodromy(hill, opts.steps / 2);
        let diff = Mat::from_fn(matrix.nrows(), matrix.ncols(), |i, j| matrix[(i, j)] - coarse[(i, j)]);
        let est = linalg::max_abs(diff.as_ref()) / (15.0 * linalg::max_abs(matrix.as_ref()));
        if est > opts.tolerance {
            return Err(Error::Accuracy {
                estimate: est,
                tolerance: opts.tolerance,
            });
        }
        Some(est)
    } else {
        None
    };
    Ok(Monodromy {
        matrix,
        error_estimate,
        steps: opts.steps,
        period: hill.period(),
        omega: hill.omega(),
    })
}

/// Fold a real frequency into `[-Omega/2, Omega/2)`: returns `(w0, m)` with
/// `w = w0 + m * Omega`.
pub fn fold(w: f64, omega: f64) -> (f64, i64) {
    let m = ((w + 0.5 * omega) / omega).floor();
    let w0 = w - m * omega;
    // guard the half-open upper end against rounding
    if w0 >= 0.5 * omega {
        (w0 - omega, m as i64 + 1)
    } else {
        (w0, m as i64)
    }
}

/// Signed distance between two folded frequencies on the circle of length
/// `omega`.
pub fn folded_distance(a: f64, b: f64, omega: f64) -> f64 {
    fold(a - b, omega).0
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quasifrequency {
    /// Folded quasifrequency; the imaginary part is `-ln|mu| / T`.
    pub re: f64,
    pub im: f64,
    /// Frequency read off the eigenvector, `Im(a^H b) / |a|^2` for
    /// `y = (a, b)`; selects the branch and the folding number.
    pub unfolded: f64,
    pub folding: i64,
    pub multiplier: [f64; 2],
}

impl Quasifrequency {
    pub fn value(&self) -> c64 {
        c64::new(self.re, self.im)
    }

    pub fn is_positive_branch(&self) -> bool {
        self.unfolded > 0.0
    }
}

#[derive(Clone, Debug)]
pub struct FloquetSpectrum {
    /// Sorted by the unfolded frequency.
    pub modes: Vec<Quasifrequency>,
    /// Eigenvectors `y(0)` of `X(T)`, unit 2-norm, one per column.
    pub vectors: Mat<c64>,
    pub omega: f64,
    pub period: f64,
}

impl FloquetSpectrum {
    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn vector(&self, k: usize) -> Vec<c64> {
        (0..self.vectors.nrows()).map(|i| self.vectors[(i, k)]).collect()
    }

    /// First half of the eigenvector: the resonator amplitudes at `t = 0`.
    pub fn amplitudes(&self, k: usize) -> Vec<c64> {
        let n = self.vectors.nrows() / 2;
        (0..n).map(|i| self.vectors[(i, k)]).collect()
    }

    pub fn positive_branch(&self) -> Vec<usize> {
        (0..self.len()).filter(|&k| self.modes[k].is_positive_branch()).collect()
    }

    /// Indices whose multipliers lie within `tol * |mu_k|` of mode `k`.
    pub fn cluster(&self, k: usize, tol: f64) -> Vec<usize> {
        let mu = |j: usize| c64::new(self.modes[j].multiplier[0], self.modes[j].multiplier[1]);
        let scale = mu(k).norm().max(1e-300);
        (0..self.len()).filter(|&j| (mu(j) - mu(k)).norm() <= tol * scale).collect()
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "omega": self.omega,
            "period": self.period,
            "quasifrequencies": self.modes,
        })
    }
}

/// Eigen-decomposition of `X(T)` into folded quasifrequencies.
pub fn quasifrequencies(x: &Monodromy) -> Result<FloquetSpectrum> {
    let (mus, vecs) = linalg::eigen(x.matrix.as_ref())?;
    let dim = x.len();
    let n = dim / 2;
    let period = x.period;
    let mut entries: Vec<(Quasifrequency, Vec<c64>)> = Vec::with_capacity(dim);
    for (k, mu) in mus.iter().enumerate() {
        let mut v: Vec<c64> = (0..dim).map(|i| vecs[(i, k)]).collect();
        let norm = linalg::norm2(&v);
        if norm == 0.0 {
            return Err(Error::ZeroVector);
        }
        v.iter_mut().for_each(|z| *z /= norm);
        let a = &v[..n];
        let b = &v[n..];
        let mass: f64 = a.iter().map(|z| z.norm_sqr()).sum();
        let unfolded = if mass > 0.0 { linalg::dot(a, b).im / mass } else { 0.0 };
        let nu = c64::new(mu.arg(), -mu.norm().ln()) / period;
        let (re, _) = fold(nu.re, x.omega);
        let folding = ((unfolded - re) / x.omega).round() as i64;
        entries.push((
            Quasifrequency {
                re,
                im: nu.im,
                unfolded,
                folding,
                multiplier: [mu.re, mu.im],
            },
            v,
        ));
    }
    entries.sort_by(|a, b| a.0.unfolded.total_cmp(&b.0.unfolded).then(a.0.re.total_cmp(&b.0.re)));
    for w in entries.windows(2) {
        let (p, q) = (&w[0], &w[1]);
        let close = (c64::new(p.0.multiplier[0], p.0.multiplier[1]) - c64::new(q.0.multiplier[0], q.0.multiplier[1])).norm() < 1e-10;
        if close && linalg::dot(&p.1, &q.1).norm() > 1.0 - 1e-8 {
            log::warn!("monodromy matrix appears defective near multiplier {:?}", p.0.multiplier);
        }
    }
    let vectors = Mat::from_fn(dim, dim, |i, k| entries[k].1[i]);
    Ok(FloquetSpectrum {
        modes: entries.into_iter().map(|e| e.0).collect(),
        vectors,
        omega: x.omega,
        period,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum ModeSelector {
    /// Mode index in the sorted spectrum; must be simple.
    Index(usize),
    /// Mode index accepted even when it sits in a cluster.
    Cluster(usize),
}

#[derive(Clone, Debug, Serialize)]
pub struct BlochMode {
    pub quasifrequency: Quasifrequency,
    /// Initial vector `y(0)`, scaled consistently with the envelopes.
    pub initial: Vec<[f64; 2]>,
    pub times: Vec<f64>,
    /// `psi_i(t)` per sample (rows) and resonator (columns).
    pub psi: Vec<Vec<[f64; 2]>>,
    /// `u_i(t) = psi_i(t) / sqrt(kappa_i(t))`, max modulus 1.
    pub envelope: Vec<Vec<[f64; 2]>>,
    /// `|y(T) - e^{i w T} y(0)| / |y(0)|`.
    pub quasiperiodicity_error: f64,
}

impl BlochMode {
    /// Envelope at `t = 0` as complex numbers.
    pub fn snapshot(&self) -> Vec<c64> {
        self.envelope[0].iter().map(|z| c64::new(z[0], z[1])).collect()
    }

    pub fn to_csv(&self) -> String {
        use std::fmt::Write as _;
        let n = self.envelope.first().map_or(0, Vec::len);
        let q = &self.quasifrequency;
        let mut out = format!("# bloch envelope N={n} quasifrequency={:e}{:+e}i folding={}\n", q.re, q.im, q.folding);
        let mut header = vec!["t".to_string()];
        for i in 1..=n {
            header.push(format!("re_u{i}"));
            header.push(format!("im_u{i}"));
        }
        let _ = writeln!(out, "{}", header.join(","));
        for (t, row) in self.times.iter().zip(&self.envelope) {
            let mut cells = vec![format!("{t:e}")];
            for z in row {
                cells.push(format!("{:e}", z[0]));
                cells.push(format!("{:e}", z[1]));
            }
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }
}

/// Propagate the selected Floquet eigenvector over one period and sample
/// the resonator envelopes at `time_samples + 1` equispaced times.
pub fn bloch_envelopes(
    hill: &HillSystem,
    spectrum: &FloquetSpectrum,
    which: ModeSelector,
    time_samples: usize,
    opts: &IntegratorOptions,
    cluster_tol: f64,
) -> Result<BlochMode> {
    let (k, allow_cluster) = match which {
        ModeSelector::Index(k) => (k, false),
        ModeSelector::Cluster(k) => (k, true),
    };
    if k >= spectrum.len() {
        return Err(Error::InvalidArgument(format!("mode index {k} out of range")));
    }
    if time_samples < 1 {
        return Err(Error::InvalidArgument("time_samples must be positive".into()));
    }
    let cluster = spectrum.cluster(k, cluster_tol);
    if cluster.len() > 1 && !allow_cluster {
        return Err(Error::ClusterAmbiguity {
            index: k,
            size: cluster.len(),
        });
    }
    let y0 = spectrum.vector(k);
    let n = hill.len();
    let per_sample = opts.steps.div_ceil(time_samples).max(1);
    let steps = per_sample * time_samples;
    let h = hill.period() / steps as f64;

    let mut samples: Vec<Vec<c64>> = vec![y0.clone()];
    let mut record = |step: usize, top: &Mat<c64>, bot: &Mat<c64>| {
        if (step + 1) % per_sample == 0 {
            let mut y: Vec<c64> = (0..n).map(|i| top[(i, 0)]).collect();
            y.extend((0..n).map(|i| bot[(i, 0)]));
            samples.push(y);
        }
    };
    let mut top = Mat::<c64>::from_fn(n, 1, |i, _| y0[i]);
    let mut bot = Mat::<c64>::from_fn(n, 1, |i, _| y0[n + i]);
    let coupling = match &hill.coupling {
        Coupling::Real(c) => coupling_as::<c64>(c),
        Coupling::Complex(c) => c.clone(),
    };
    Rk4::new(coupling, 1).run(hill, &mut top, &mut bot, 0.0, h, steps, &mut record);

    let q = spectrum.modes[k];
    let mu = c64::new(q.multiplier[0], q.multiplier[1]);
    let end = samples.last().expect("samples recorded");
    let defect: Vec<c64> = end.iter().zip(&y0).map(|(a, b)| a - mu * b).collect();
    let quasiperiodicity_error = linalg::norm2(&defect) / linalg::norm2(&y0);

    let times: Vec<f64> = (0..=time_samples).map(|s| s as f64 * per_sample as f64 * h).collect();
    let mut envelope: Vec<Vec<c64>> = samples
        .iter()
        .zip(&times)
        .map(|(y, &t)| {
            let sk = hill.kappa_sqrt(t);
            (0..n).map(|i| y[i] / sk[i]).collect()
        })
        .collect();
    // one common factor for every sample so relative phases survive; the
    // largest entry at t = 0 is made positive real
    let best = envelope.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max);
    if best == 0.0 {
        return Err(Error::ZeroVector);
    }
    let lead = envelope[0].iter().copied().max_by(|a, b| a.norm().total_cmp(&b.norm())).unwrap_or_default();
    let factor = if lead.norm() > 0.0 { lead.conj() / (lead.norm() * best) } else { c64::new(1.0 / best, 0.0) };
    envelope.iter_mut().flatten().for_each(|z| *z *= factor);
    let psi: Vec<Vec<c64>> = samples.iter().map(|y| y[..n].iter().map(|z| z * factor).collect()).collect();
    let pair = |z: &c64| [z.re, z.im];
    Ok(BlochMode {
        quasifrequency: q,
        initial: y0.iter().map(|z| pair(&(z * factor))).collect(),
        times,
        psi: psi.iter().map(|r| r.iter().map(pair).collect()).collect(),
        envelope: envelope.iter().map(|r| r.iter().map(pair).collect()).collect(),
        quasiperiodicity_error,
    })
}
