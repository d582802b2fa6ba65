//! One function per command; each returns its artifacts in a fixed order.

use std::fmt::Write as _;

use num_complex::Complex64 as c64;
use serde_json::{json, Value};

use floquet_edge::analysis::{
    band_sweep, compare_modes, degenerate_limit, detect_edge_pair, localization_metrics, numeric_pair, robustness_study, zone_grid,
    EdgePairReport, LocalizationProfile, RobustnessOptions,
};
use floquet_edge::capacitance::{check_symmetry_pattern, supercell_pattern, CapacitanceMatrix};
use floquet_edge::floquet::{bloch_envelopes, monodromy, quasifrequencies, FloquetSpectrum, ModeSelector, Quasifrequency};
use floquet_edge::geometry::{build_supercell_chain, enumerate_symmetries, symmetry_tolerance, Layout, ResonatorSystem, LATTICE_PERIOD};
use floquet_edge::hill::{static_spectrum, HillSystem, Modulation};
use floquet_edge::perturbation::predict_split;

use crate::config::GeometrySpec;
use crate::{Artifact, CliError, ScenarioConfig};

fn pack(v: &[c64]) -> Vec<[f64; 2]> {
    v.iter().map(|z| [z.re, z.im]).collect()
}

fn column(c: &CapacitanceMatrix, j: usize) -> Result<Vec<c64>, CliError> {
    let (_, vecs) = c.eigen()?;
    Ok((0..c.len()).map(|i| c64::new(vecs[(i, j)], 0.0)).collect())
}

/// System, capacitance (in the degenerate limit if requested) and the
/// detected edge pair of a supercell chain.
struct EdgeSetup {
    system: ResonatorSystem,
    capacitance: CapacitanceMatrix,
    report: EdgePairReport,
    pair: [usize; 2],
}

fn edge_setup(config: &ScenarioConfig) -> Result<EdgeSetup, CliError> {
    let system = config.system()?;
    let raw = config.raw_capacitance(&system)?;
    let report = detect_edge_pair(&raw)?;
    let pair = config.perturb.pair.unwrap_or(report.pair);
    let capacitance = if config.capacitance.degenerate_limit {
        degenerate_limit(&raw, pair)?
    } else {
        raw
    };
    Ok(EdgeSetup {
        system,
        capacitance,
        report,
        pair,
    })
}

fn spectrum_of(c: &CapacitanceMatrix, system: &ResonatorSystem, m: Modulation, config: &ScenarioConfig) -> Result<(FloquetSpectrum, Value), CliError> {
    let hill = HillSystem::new(c, system, m)?;
    let x = monodromy(&hill, &config.solver)?;
    let det = x.determinant();
    let meta = json!({
        "steps": x.steps,
        "period": x.period,
        "error_estimate": x.error_estimate,
        "determinant": [det.re, det.im],
    });
    Ok((quasifrequencies(&x)?, meta))
}

pub fn capmat(config: &ScenarioConfig) -> Result<Vec<Artifact>, CliError> {
    let system = config.system()?;
    let c = config.raw_capacitance(&system)?;
    let tol = 1e-10 * floquet_edge::linalg::max_abs(c.entries.as_ref());
    let mut symmetries = Vec::new();
    for sym in enumerate_symmetries(&system) {
        let r = check_symmetry_pattern(&c, &sym, tol)?;
        symmetries.push(json!({"cycles": sym.cycles(), "geometric_deviation": sym.deviation, "report": r}));
    }
    let mut report = json!({
        "capacitance": c.to_json(),
        "check": c.check()?,
        "symmetry_tolerance": symmetry_tolerance(&system),
        "symmetries": symmetries,
    });
    if c.len() == 6 {
        report["pattern"] = serde_json::to_value(supercell_pattern(&c)?).expect("pattern serializes");
    }
    Ok(vec![Artifact::new("capmat.csv", c.to_csv()), Artifact::json("capmat.json", &report)])
}

pub fn spectrum(config: &ScenarioConfig) -> Result<Vec<Artifact>, CliError> {
    let system = config.system()?;
    let c = config.raw_capacitance(&system)?;
    let spectrum = static_spectrum(&c, &system)?;
    let mut csv = format!("# static spectrum N={}\nindex,eigenvalue,omega\n", spectrum.len());
    for j in 0..spectrum.len() {
        let _ = writeln!(csv, "{},{:e},{:e}", j + 1, spectrum.eigenvalues[j], spectrum.omegas[j]);
    }
    let report = json!({
        "eigenvalues": spectrum.eigenvalues,
        "omegas": spectrum.omegas,
        "vectors": (0..spectrum.len()).map(|j| spectrum.vector(j)).collect::<Vec<_>>(),
    });
    Ok(vec![Artifact::new("spectrum.csv", csv), Artifact::json("spectrum.json", &report)])
}

fn mode_csv(label: &str, q: &Quasifrequency, profile: &LocalizationProfile, numeric: &[c64], predicted: &[c64]) -> String {
    let mut out = format!(
        "# edge mode {label} N={} quasifrequency={:e}{:+e}i edge={:?} left_mass={:e} right_mass={:e}\n",
        numeric.len(),
        q.re,
        q.im,
        profile.dominant_edge(),
        profile.left_mass,
        profile.right_mass
    );
    out.push_str("index,re,im,abs,predicted_re,predicted_im,predicted_abs\n");
    for (i, (a, b)) in numeric.iter().zip(predicted).enumerate() {
        let _ = writeln!(out, "{},{:e},{:e},{:e},{:e},{:e},{:e}", i + 1, a.re, a.im, a.norm(), b.re, b.im, b.norm());
    }
    out
}

pub fn edge_modes(config: &ScenarioConfig) -> Result<Vec<Artifact>, CliError> {
    let s = edge_setup(config)?;
    let m = config.modulation(&s.system)?;
    let span = vec![column(&s.capacitance, s.pair[0])?, column(&s.capacitance, s.pair[1])?];
    let (spectrum, meta) = spectrum_of(&s.capacitance, &s.system, m.clone(), config)?;
    let np = numeric_pair(&spectrum, &span)?;
    let pred = predict_split(&s.capacitance, &s.system, &m, (s.pair[0], s.pair[1]), config.treatment(), None)?;
    let cmp = compare_modes([&pred.w_red, &pred.q_red], [&np.modes[0], &np.modes[1]])?;
    let numeric = [&np.modes[cmp.pairing[0]], &np.modes[cmp.pairing[1]]];
    let profiles = [localization_metrics(numeric[0])?, localization_metrics(numeric[1])?];
    let quasi = [np.quasifrequencies[cmp.pairing[0]], np.quasifrequencies[cmp.pairing[1]]];
    let report = json!({
        "edge_pair": s.report,
        "pair": s.pair,
        "degenerate_limit": config.capacitance.degenerate_limit,
        "monodromy": meta,
        "numeric": {
            "quasifrequencies": {"w": quasi[0], "q": quasi[1]},
            "split": np.split,
            "profiles": {"w": profiles[0], "q": profiles[1]},
            "modes": {"w": pack(numeric[0]), "q": pack(numeric[1])},
        },
        "prediction": pred.to_json(),
        "comparison": {"errors": cmp.errors, "subspace_angle": cmp.subspace_angle},
    });
    Ok(vec![
        Artifact::new("edge-modes.w.csv", mode_csv("w", &quasi[0], &profiles[0], numeric[0], &pred.w_red)),
        Artifact::new("edge-modes.q.csv", mode_csv("q", &quasi[1], &profiles[1], numeric[1], &pred.q_red)),
        Artifact::json("edge-modes.json", &report),
    ])
}

pub fn floquet(config: &ScenarioConfig) -> Result<Vec<Artifact>, CliError> {
    let system = config.system()?;
    let c = config.raw_capacitance(&system)?;
    let m = config.modulation(&system)?;
    let (spectrum, meta) = spectrum_of(&c, &system, m.clone(), config)?;
    let mut csv = format!("# floquet spectrum N={} omega={:e}\nk,re,im,unfolded,folding,abs_multiplier\n", system.len(), spectrum.omega);
    for (k, q) in spectrum.modes.iter().enumerate() {
        let _ = writeln!(csv, "{k},{:e},{:e},{:e},{},{:e}", q.re, q.im, q.unfolded, q.folding, q.multiplier[0].hypot(q.multiplier[1]));
    }
    let mut artifacts = vec![
        Artifact::new("floquet.csv", csv),
        Artifact::json("floquet.json", &json!({"monodromy": meta, "spectrum": spectrum.to_json()})),
    ];
    if let Some(k) = config.floquet.envelope_mode {
        let hill = HillSystem::new(&c, &system, m)?;
        let mode = bloch_envelopes(&hill, &spectrum, ModeSelector::Cluster(k), config.floquet.time_samples, &config.solver, config.floquet.cluster_tolerance)?;
        artifacts.push(Artifact::new("floquet.envelope.csv", mode.to_csv()));
    }
    Ok(artifacts)
}

pub fn perturb(config: &ScenarioConfig) -> Result<Vec<Artifact>, CliError> {
    let s = edge_setup(config)?;
    let m = config.modulation(&s.system)?;
    let pred = predict_split(&s.capacitance, &s.system, &m, (s.pair[0], s.pair[1]), config.treatment(), None)?;
    let mut csv = format!(
        "# reduced split modes N={} epsilon={:e} split={:e}\nindex,w_re,w_im,q_re,q_im\n",
        s.system.len(),
        pred.epsilon,
        pred.splitting()
    );
    for (i, (w, q)) in pred.w_red.iter().zip(&pred.q_red).enumerate() {
        let _ = writeln!(csv, "{},{:e},{:e},{:e},{:e}", i + 1, w.re, w.im, q.re, q.im);
    }
    let mut report = pred.to_json();
    report["treatment"] = serde_json::to_value(config.treatment()).expect("treatment serializes");
    report["profiles"] = json!({"w": localization_metrics(&pred.w_red)?, "q": localization_metrics(&pred.q_red)?});
    Ok(vec![Artifact::new("perturb.csv", csv), Artifact::json("perturb.json", &report)])
}

pub fn bands(config: &ScenarioConfig) -> Result<Vec<Artifact>, CliError> {
    let GeometrySpec::Supercell { radius, .. } = config.geometry else {
        return Err(CliError::Schema("bands requires a supercell geometry".into()));
    };
    let cell = build_supercell_chain(1, radius)?.with_gamma(config.gamma()).with_materials(config.materials);
    let grid = zone_grid(config.bands.points, LATTICE_PERIOD)?;
    let modulation = if config.bands.modulated { Some(config.modulation(&cell)?) } else { None };
    let table = band_sweep(&cell, LATTICE_PERIOD, &grid, modulation.as_ref(), config.bands.truncation, &config.solver)?;
    let report = json!({
        "period": table.period,
        "omega": table.omega,
        "static_reciprocity_defect": table.static_reciprocity_defect,
        "modulated_reciprocity_defect": table.modulated_reciprocity_defect,
        "gaps": table.gaps,
    });
    let mut artifacts = vec![Artifact::new("bands.csv", table.static_csv())];
    if let Some(csv) = table.modulated_csv() {
        artifacts.push(Artifact::new("bands.modulated.csv", csv));
    }
    artifacts.push(Artifact::json("bands.json", &report));
    Ok(artifacts)
}

pub fn robustness(config: &ScenarioConfig) -> Result<Vec<Artifact>, CliError> {
    let s = edge_setup(config)?;
    let base = config.modulation(&s.system)?;
    let r = &config.robustness;
    let opts = RobustnessOptions {
        mu: r.mu.clone(),
        sigma: r.sigma,
        trials: r.trials,
        seed: config.seed,
        method: r.method,
        treatment: config.treatment(),
        integrator: config.solver,
    };
    let report = robustness_study(&s.capacitance, &s.system, &base, (s.pair[0], s.pair[1]), &opts)?;
    let mut artifacts: Vec<Artifact> = report
        .results
        .iter()
        .enumerate()
        .map(|(k, result)| Artifact::new(format!("robustness.mu{k}.csv"), report.to_csv(result)))
        .collect();
    artifacts.push(Artifact::json("robustness.json", &report));
    Ok(artifacts)
}

pub fn ssh_demo(config: &ScenarioConfig) -> Result<Vec<Artifact>, CliError> {
    if !matches!(config.geometry, GeometrySpec::Ssh { .. }) {
        return Err(CliError::Schema("ssh-demo requires an ssh geometry".into()));
    }
    let system = config.system()?;
    let c = config.raw_capacitance(&system)?;
    let n = system.len();
    // the static defect mode is the most localized eigenvector
    let (vals, _) = c.eigen()?;
    let mut best = (0, f64::INFINITY);
    for j in 0..n {
        let p = localization_metrics(&column(&c, j)?)?.participation;
        if p < best.1 {
            best = (j, p);
        }
    }
    let reference = column(&c, best.0)?;
    let mut columns = Vec::new();
    let mut runs = Vec::new();
    for &eps in &config.ssh_demo.epsilons {
        let base = config.modulation(&system)?;
        let m = Modulation::new(base.omega, vec![eps; n], base.phases)?;
        let (spectrum, meta) = spectrum_of(&c, &system, m.clone(), config)?;
        let overlap = |k: usize| {
            let a = spectrum.amplitudes(k);
            let ip: c64 = a.iter().zip(&reference).map(|(x, y)| x * y).sum();
            ip.norm_sqr() / a.iter().map(|z| z.norm_sqr()).sum::<f64>()
        };
        let k = spectrum
            .positive_branch()
            .into_iter()
            .max_by(|&a, &b| overlap(a).total_cmp(&overlap(b)))
            .ok_or(floquet_edge::Error::ZeroVector)?;
        let hill = HillSystem::new(&c, &system, m)?;
        let mode = bloch_envelopes(&hill, &spectrum, ModeSelector::Cluster(k), config.floquet.time_samples, &config.solver, config.floquet.cluster_tolerance)?;
        let snapshot = mode.snapshot();
        runs.push(json!({
            "epsilon": eps,
            "mode": k,
            "overlap": overlap(k),
            "quasifrequency": spectrum.modes[k],
            "quasiperiodicity_error": mode.quasiperiodicity_error,
            "profile": localization_metrics(&snapshot)?,
            "monodromy": meta,
        }));
        columns.push(snapshot);
    }
    let mut csv = format!("# ssh edge mode N={n} omega={:e} static_mode={}\nindex", config.modulation.omega, best.0 + 1);
    for eps in &config.ssh_demo.epsilons {
        let _ = write!(csv, ",abs_eps_{eps}");
    }
    csv.push('\n');
    for i in 0..n {
        let _ = write!(csv, "{}", i + 1);
        for col in &columns {
            let _ = write!(csv, ",{:e}", col[i].norm());
        }
        csv.push('\n');
    }
    let layout = match system.layout {
        Layout::SshChain { resonators, cell } => json!({"resonators": resonators, "cell": cell}),
        _ => Value::Null,
    };
    let report = json!({
        "layout": layout,
        "static_mode": best.0,
        "static_eigenvalue": vals[best.0],
        "static_participation": best.1,
        "runs": runs,
    });
    Ok(vec![Artifact::new("ssh-demo.csv", csv), Artifact::json("ssh-demo.json", &report)])
}
