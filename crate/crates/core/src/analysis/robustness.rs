//! Monte Carlo study of edge modes under random modulation amplitudes.

use num_complex::Complex64 as c64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::compare::{align_phase, numeric_pair};
use super::localization::{localization_metrics, LocalizationProfile};
use crate::capacitance::CapacitanceMatrix;
use crate::error::{Error, Result};
use crate::floquet::{monodromy, quasifrequencies, IntegratorOptions};
use crate::geometry::ResonatorSystem;
use crate::hill::{HillSystem, Modulation};
use crate::linalg;
use crate::perturbation::{
    diagonalize_static, effective_block_b, mean_amplitude, split_eigenvectors, Branch, DegeneracyTreatment, DiagonalizedStatic,
    PairSelector,
};

/// Resampling attempts per trial before giving up.
const MAX_RESAMPLES: usize = 1000;

/// How the split edge modes of one trial are obtained.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RobustnessMethod {
    /// Second-order eigenvectors of the effective block.
    #[default]
    Perturbative,
    /// Floquet modes of the integrated monodromy matrix.
    Numeric,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RobustnessOptions {
    pub mu: Vec<f64>,
    pub sigma: f64,
    pub trials: usize,
    pub seed: u64,
    pub method: RobustnessMethod,
    pub treatment: DegeneracyTreatment,
    pub integrator: IntegratorOptions,
}

impl Default for RobustnessOptions {
    fn default() -> Self {
        Self {
            mu: vec![0.0, 0.01, 0.02, 0.05],
            sigma: 0.01,
            trials: 1000,
            seed: 0,
            method: RobustnessMethod::Perturbative,
            treatment: DegeneracyTreatment::Merge,
            integrator: IntegratorOptions::fast(400),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct MuReport {
    pub mu: f64,
    /// Phase-aligned mean of each edge mode over the trials.
    pub mean_modes: [Vec<[f64; 2]>; 2],
    pub profiles: [LocalizationProfile; 2],
    /// Relative l2 distance between the magnitude profiles of the mean and
    /// the unperturbed mode.
    pub deviations: [f64; 2],
    pub max_deviation: f64,
    /// `|mean - unperturbed|_2 / |unperturbed|_2` on the complex modes.
    pub mode_deviations: [f64; 2],
    /// Relative change of the dominant edge mass per mode.
    pub edge_mass_change: [f64; 2],
    /// Samples rejected because some amplitude reached 1.
    pub resamples: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct RobustnessReport {
    pub method: RobustnessMethod,
    pub pair: (usize, usize),
    pub unperturbed: [Vec<[f64; 2]>; 2],
    pub unperturbed_profiles: [LocalizationProfile; 2],
    pub sigma: f64,
    pub trials: usize,
    pub seed: u64,
    pub results: Vec<MuReport>,
}

/// Computes the tracked pair for one amplitude vector.
enum Solver<'a> {
    Perturbative {
        c: &'a CapacitanceMatrix,
        system: &'a ResonatorSystem,
        base: Box<DiagonalizedStatic>,
        selector: PairSelector,
        treatment: DegeneracyTreatment,
    },
    Numeric {
        c: &'a CapacitanceMatrix,
        system: &'a ResonatorSystem,
        span: Vec<Vec<c64>>,
        opts: &'a IntegratorOptions,
    },
}

impl Solver<'_> {
    fn modes(&self, m: &Modulation) -> Result<[Vec<c64>; 2]> {
        match self {
            Solver::Perturbative {
                c,
                system,
                base,
                selector,
                treatment,
            } => {
                let diag = base.remodulated(c, system, m)?;
                let block = effective_block_b(&diag, selector, *treatment, None)?;
                let split = split_eigenvectors(&diag, &block, mean_amplitude(m))?;
                Ok([split.w_red, split.q_red])
            }
            Solver::Numeric { c, system, span, opts } => {
                let hill = HillSystem::new(c, system, m.clone())?;
                let spectrum = quasifrequencies(&monodromy(&hill, opts)?)?;
                Ok(numeric_pair(&spectrum, span)?.modes)
            }
        }
    }
}

fn relative_distance(a: &[f64], b: &[f64]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    let r: f64 = b.iter().map(|y| y * y).sum();
    (d / r).sqrt()
}

/// Stream for one trial: independent of execution order.
fn trial_rng(seed: u64, mu_index: usize, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((mu_index as u64) << 40) | trial as u64);
    rng
}

/// Edge pair `pair` (static indices, ascending frequency) of `base`
/// against random amplitude perturbations.
pub fn robustness_study(
    c: &CapacitanceMatrix,
    system: &ResonatorSystem,
    base: &Modulation,
    pair: (usize, usize),
    opts: &RobustnessOptions,
) -> Result<RobustnessReport> {
    if opts.trials < 1 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    if !(opts.sigma >= 0.0 && opts.sigma.is_finite()) {
        return Err(Error::InvalidArgument(format!("sigma must be non-negative, got {}", opts.sigma)));
    }
    let n = system.len();
    let solver = match opts.method {
        RobustnessMethod::Perturbative => Solver::Perturbative {
            c,
            system,
            base: Box::new(diagonalize_static(c, system, base)?),
            selector: PairSelector::Static {
                first: pair.0,
                second: pair.1,
                branch: Branch::Positive,
            },
            treatment: opts.treatment,
        },
        RobustnessMethod::Numeric => {
            let (_, vecs) = c.eigen()?;
            let column = |j: usize| (0..n).map(|i| c64::new(vecs[(i, j)], 0.0)).collect();
            Solver::Numeric {
                c,
                system,
                span: vec![column(pair.0), column(pair.1)],
                opts: &opts.integrator,
            }
        }
    };
    let reference = solver.modes(base)?;
    let unperturbed_profiles = [localization_metrics(&reference[0])?, localization_metrics(&reference[1])?];
    let pack = |v: &[c64]| v.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>();

    let mut results = Vec::with_capacity(opts.mu.len());
    for (mi, &mu) in opts.mu.iter().enumerate() {
        let normal = Normal::new(mu, opts.sigma).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let mut sums = [vec![c64::new(0.0, 0.0); n], vec![c64::new(0.0, 0.0); n]];
        let mut resamples = 0;
        for trial in 0..opts.trials {
            let mut rng = trial_rng(opts.seed, mi, trial);
            let mut attempts = 0;
            let amplitudes = loop {
                let a: Vec<f64> = base.amplitudes.iter().map(|b| b + normal.sample(&mut rng)).collect();
                if a.iter().all(|x| x.abs() < 1.0) {
                    break a;
                }
                resamples += 1;
                attempts += 1;
                if attempts >= MAX_RESAMPLES {
                    return Err(Error::AmplitudeOverflow { limit: MAX_RESAMPLES });
                }
            };
            let m = Modulation::new(base.omega, amplitudes, base.phases.clone())?;
            let modes = solver.modes(&m)?;
            // match each tracked mode to the trial mode it overlaps most
            let ov = |a: usize, b: usize| linalg::dot(&reference[a], &modes[b]).norm();
            let order = if ov(0, 0) * ov(1, 1) >= ov(0, 1) * ov(1, 0) { [0, 1] } else { [1, 0] };
            for a in 0..2 {
                let aligned = align_phase(&reference[a], &modes[order[a]]);
                for (s, z) in sums[a].iter_mut().zip(&aligned) {
                    *s += z;
                }
            }
        }
        let scale = 1.0 / opts.trials as f64;
        let means: [Vec<c64>; 2] = [
            sums[0].iter().map(|z| z * scale).collect(),
            sums[1].iter().map(|z| z * scale).collect(),
        ];
        let mode_deviation = |a: usize| {
            let d: Vec<c64> = means[a].iter().zip(&reference[a]).map(|(x, y)| x - y).collect();
            linalg::norm2(&d) / linalg::norm2(&reference[a])
        };
        let mode_deviations = [mode_deviation(0), mode_deviation(1)];
        let profiles = [localization_metrics(&means[0])?, localization_metrics(&means[1])?];
        let deviations = [0, 1].map(|a| relative_distance(&profiles[a].magnitudes, &unperturbed_profiles[a].magnitudes));
        let edge_mass = |p: &LocalizationProfile| p.left_mass.max(p.right_mass);
        let edge_mass_change = [0, 1].map(|a| (edge_mass(&profiles[a]) - edge_mass(&unperturbed_profiles[a])).abs() / edge_mass(&unperturbed_profiles[a]));
        results.push(MuReport {
            mu,
            mean_modes: [pack(&means[0]), pack(&means[1])],
            profiles,
            deviations,
            max_deviation: deviations[0].max(deviations[1]),
            mode_deviations,
            edge_mass_change,
            resamples,
        });
    }
    Ok(RobustnessReport {
        method: opts.method,
        pair,
        unperturbed: [pack(&reference[0]), pack(&reference[1])],
        unperturbed_profiles,
        sigma: opts.sigma,
        trials: opts.trials,
        seed: opts.seed,
        results,
    })
}

impl RobustnessReport {
    /// Averaged magnitude profiles, one row per resonator.
    pub fn to_csv(&self, result: &MuReport) -> String {
        let mut out = format!("# robustness mu={:e} sigma={:e} trials={} seed={}\n", result.mu, self.sigma, self.trials, self.seed);
        out.push_str("index,unperturbed_w,mean_w,unperturbed_q,mean_q\n");
        let [uw, uq] = &self.unperturbed_profiles;
        let [mw, mq] = &result.profiles;
        for i in 0..uw.magnitudes.len() {
            out.push_str(&format!(
                "{},{:e},{:e},{:e},{:e}\n",
                i + 1,
                uw.magnitudes[i],
                mw.magnitudes[i],
                uq.magnitudes[i],
                mq.magnitudes[i]
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::edge_pair::{degenerate_limit, detect_edge_pair};
    use crate::capacitance::dilute_capacitance;
    use crate::geometry::build_supercell_chain;
    use crate::hill::PhasePreset;

    fn setup() -> (ResonatorSystem, CapacitanceMatrix, Modulation, (usize, usize)) {
        let s = build_supercell_chain(2, 0.1).unwrap();
        let c = dilute_capacitance(&s).unwrap();
        let r = detect_edge_pair(&c).unwrap();
        let c = degenerate_limit(&c, r.pair).unwrap();
        let m = Modulation::uniform(2.0, 0.2, PhasePreset::Supercell.phases(12)).unwrap();
        (s, c, m, (r.pair[0], r.pair[1]))
    }

    #[test]
    fn zero_noise_reproduces_reference() {
        let (s, c, m, pair) = setup();
        for method in [RobustnessMethod::Perturbative, RobustnessMethod::Numeric] {
            let opts = RobustnessOptions {
                mu: vec![0.0],
                sigma: 0.0,
                trials: 3,
                method,
                ..Default::default()
            };
            let r = robustness_study(&c, &s, &m, pair, &opts).unwrap();
            assert!(r.results[0].max_deviation < 1e-12, "{method:?}");
            assert!(r.results[0].mode_deviations[0] < 1e-12, "{method:?}");
        }
    }

    #[test]
    fn seed_determinism() {
        let (s, c, m, pair) = setup();
        let opts = RobustnessOptions {
            mu: vec![0.01],
            sigma: 0.01,
            trials: 20,
            seed: 11,
            ..Default::default()
        };
        let a = serde_json::to_string(&robustness_study(&c, &s, &m, pair, &opts).unwrap()).unwrap();
        let b = serde_json::to_string(&robustness_study(&c, &s, &m, pair, &opts).unwrap()).unwrap();
        assert_eq!(a, b);
        let other = RobustnessOptions { seed: 12, ..opts };
        let d = serde_json::to_string(&robustness_study(&c, &s, &m, pair, &other).unwrap()).unwrap();
        assert_ne!(a, d);
    }

    #[test]
    fn uniform_shift_matches_direct_prediction() {
        // sigma = 0 with mean mu is a uniform amplitude 0.2 + mu
        let (s, c, m, pair) = setup();
        let opts = RobustnessOptions {
            mu: vec![0.03],
            sigma: 0.0,
            trials: 2,
            ..Default::default()
        };
        let r = robustness_study(&c, &s, &m, pair, &opts).unwrap();
        let shifted = m.with_epsilon(0.23).unwrap();
        let direct = crate::perturbation::predict_split(&c, &s, &shifted, pair, DegeneracyTreatment::Merge, None).unwrap();
        let profile = localization_metrics(&direct.w_red).unwrap();
        assert!(relative_distance(&r.results[0].profiles[0].magnitudes, &profile.magnitudes) < 1e-9);
    }

    #[test]
    fn overflowing_amplitudes_rejected() {
        let (s, c, m, pair) = setup();
        let opts = RobustnessOptions {
            mu: vec![5.0],
            sigma: 0.01,
            trials: 1,
            ..Default::default()
        };
        assert!(matches!(robustness_study(&c, &s, &m, pair, &opts), Err(Error::AmplitudeOverflow { .. })));
    }
}
