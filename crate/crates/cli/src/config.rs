//! Scenario configuration: parsing, validation and resolution of defaults.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use floquet_edge::analysis::RobustnessMethod;
use floquet_edge::capacitance::{boundary_capacitance, dilute_capacitance, CapacitanceMatrix, DEFAULT_QUAD_ORDER, DEFAULT_TRUNCATION};
use floquet_edge::floquet::{IntegratorOptions, DEFAULT_CLUSTER_TOLERANCE};
use floquet_edge::geometry::{
    build_mirror_interface, build_ssh_chain_cells, build_supercell_chain, Materials, ResonatorSystem, DEFAULT_GAMMA, DEFAULT_RADIUS,
};
use floquet_edge::hill::{Modulation, PhasePreset};
use floquet_edge::perturbation::DegeneracyTreatment;

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

/// Published JSON schema for [`ScenarioConfig`].
pub const SCHEMA: &str = include_str!("../schema/scenario.schema.json");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    pub geometry: GeometrySpec,
    #[serde(default)]
    pub materials: Materials,
    #[serde(default)]
    pub modulation: ModulationSpec,
    #[serde(default)]
    pub capacitance: CapacitanceSpec,
    #[serde(default)]
    pub solver: IntegratorOptions,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default)]
    pub floquet: FloquetSpec,
    #[serde(default)]
    pub perturb: PerturbSpec,
    #[serde(default)]
    pub bands: BandsSpec,
    #[serde(default)]
    pub robustness: RobustnessSpec,
    #[serde(default)]
    pub ssh_demo: SshDemoSpec,
    /// Present in run manifests; ignored on input apart from validation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run: Option<RunInfo>,
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum GeometrySpec {
    Supercell {
        cells: usize,
        #[serde(default = "default_radius")]
        radius: f64,
        #[serde(default)]
        gamma: Option<f64>,
    },
    Ssh {
        resonators: usize,
        /// Resonators per cell; 2 gives dimers, 3 trimers.
        #[serde(default = "default_ssh_cell")]
        cell: usize,
        #[serde(default)]
        intra_gap: Option<f64>,
        #[serde(default)]
        inter_gap: Option<f64>,
        #[serde(default = "default_radius")]
        radius: f64,
        #[serde(default)]
        gamma: Option<f64>,
    },
    Mirror {
        cells: usize,
        #[serde(default = "default_radius")]
        radius: f64,
        #[serde(default)]
        gamma: Option<f64>,
    },
    Custom {
        centers: Vec<[f64; 3]>,
        radius: f64,
        #[serde(default)]
        gamma: Option<f64>,
    },
}

fn default_radius() -> f64 {
    DEFAULT_RADIUS
}

fn default_ssh_cell() -> usize {
    2
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PhaseSpec {
    Preset(PhasePreset),
    Values(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModulationSpec {
    pub omega: f64,
    /// Uniform amplitude; exclusive with `amplitudes`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitudes: Option<Vec<f64>>,
    pub phases: PhaseSpec,
}

impl Default for ModulationSpec {
    fn default() -> Self {
        Self {
            omega: 2.0,
            epsilon: Some(0.2),
            amplitudes: None,
            phases: PhaseSpec::Preset(PhasePreset::Supercell),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    #[default]
    Dilute,
    Boundary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CapacitanceSpec {
    pub backend: Backend,
    pub quad_order: usize,
    /// Replace the edge pair eigenvalues by their mean (supercell chains).
    pub degenerate_limit: bool,
}

impl Default for CapacitanceSpec {
    fn default() -> Self {
        Self {
            backend: Backend::Dilute,
            quad_order: DEFAULT_QUAD_ORDER,
            degenerate_limit: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FloquetSpec {
    /// Mode whose envelope is sampled; none for the spectrum only.
    pub envelope_mode: Option<usize>,
    pub time_samples: usize,
    pub cluster_tolerance: f64,
}

impl Default for FloquetSpec {
    fn default() -> Self {
        Self {
            envelope_mode: None,
            time_samples: 200,
            cluster_tolerance: DEFAULT_CLUSTER_TOLERANCE,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PerturbSpec {
    /// Defaults to `merge` in the degenerate limit and `physical` otherwise.
    pub treatment: Option<DegeneracyTreatment>,
    /// Static pair indices; detected from the supercell structure if absent.
    pub pair: Option<[usize; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BandsSpec {
    pub points: usize,
    pub truncation: usize,
    pub modulated: bool,
}

impl Default for BandsSpec {
    fn default() -> Self {
        Self {
            points: 64,
            truncation: DEFAULT_TRUNCATION,
            modulated: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RobustnessSpec {
    pub mu: Vec<f64>,
    pub sigma: f64,
    pub trials: usize,
    pub method: RobustnessMethod,
}

impl Default for RobustnessSpec {
    fn default() -> Self {
        Self {
            mu: vec![0.0, 0.01, 0.02, 0.05],
            sigma: 0.01,
            trials: 1000,
            method: RobustnessMethod::Perturbative,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SshDemoSpec {
    pub epsilons: Vec<f64>,
}

impl Default for SshDemoSpec {
    fn default() -> Self {
        Self {
            epsilons: vec![0.0, 0.1, 0.2, 0.3],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunInfo {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub artifacts: Vec<String>,
}

fn schema_error(msg: impl Into<String>) -> CliError {
    CliError::Schema(msg.into())
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let config: Self = serde_json::from_str(text).map_err(|e| schema_error(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(schema_error(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if let Some(run) = &self.run {
            if run.tool != crate::TOOL {
                return Err(schema_error(format!("manifest from unknown tool {:?}", run.tool)));
            }
        }
        let m = &self.modulation;
        if m.epsilon.is_some() == m.amplitudes.is_some() {
            return Err(schema_error("modulation needs exactly one of epsilon and amplitudes"));
        }
        if self.capacitance.quad_order < 2 {
            return Err(schema_error("capacitance.quad_order must be at least 2"));
        }
        if self.floquet.time_samples < 2 {
            return Err(schema_error("floquet.time_samples must be at least 2"));
        }
        if self.bands.points < 2 {
            return Err(schema_error("bands.points must be at least 2"));
        }
        if self.robustness.trials < 1 || self.robustness.mu.is_empty() {
            return Err(schema_error("robustness needs at least one trial and one mu"));
        }
        if self.ssh_demo.epsilons.is_empty() {
            return Err(schema_error("ssh_demo.epsilons is empty"));
        }
        Ok(())
    }

    /// Copy with every defaulted quantity written out.
    pub fn resolved(&self) -> Self {
        let mut out = self.clone();
        let gamma = self.gamma();
        match &mut out.geometry {
            GeometrySpec::Supercell { gamma: g, .. } | GeometrySpec::Mirror { gamma: g, .. } | GeometrySpec::Custom { gamma: g, .. } => {
                *g = Some(gamma)
            }
            GeometrySpec::Ssh {
                gamma: g,
                intra_gap,
                inter_gap,
                radius,
                ..
            } => {
                *g = Some(gamma);
                intra_gap.get_or_insert(*radius);
                inter_gap.get_or_insert(4.0 * *radius);
            }
        }
        out.perturb.treatment = Some(self.treatment());
        out
    }

    /// Dilute chains default to the small-coupling scale; the boundary solver
    /// works with physical positions.
    pub fn gamma(&self) -> f64 {
        let explicit = match &self.geometry {
            GeometrySpec::Supercell { gamma, .. }
            | GeometrySpec::Ssh { gamma, .. }
            | GeometrySpec::Mirror { gamma, .. }
            | GeometrySpec::Custom { gamma, .. } => *gamma,
        };
        explicit.unwrap_or(match self.capacitance.backend {
            Backend::Dilute => DEFAULT_GAMMA,
            Backend::Boundary => 1.0,
        })
    }

    pub fn treatment(&self) -> DegeneracyTreatment {
        self.perturb.treatment.unwrap_or(if self.capacitance.degenerate_limit {
            DegeneracyTreatment::Merge
        } else {
            DegeneracyTreatment::Physical
        })
    }

    pub fn system(&self) -> Result<ResonatorSystem, CliError> {
        let system = match &self.geometry {
            GeometrySpec::Supercell { cells, radius, .. } => build_supercell_chain(*cells, *radius)?,
            GeometrySpec::Ssh {
                resonators,
                cell,
                intra_gap,
                inter_gap,
                radius,
                ..
            } => build_ssh_chain_cells(*resonators, *cell, intra_gap.unwrap_or(*radius), inter_gap.unwrap_or(4.0 * radius), *radius)?,
            GeometrySpec::Mirror { cells, radius, .. } => build_mirror_interface(*cells, *radius)?,
            GeometrySpec::Custom { centers, radius, .. } => ResonatorSystem::new(centers.clone(), *radius, DEFAULT_GAMMA, Materials::default())?,
        };
        let system = system.with_gamma(self.gamma()).with_materials(self.materials);
        system.validate()?;
        Ok(system)
    }

    /// Capacitance matrix of `system` with the configured backend, before
    /// any degenerate-limit replacement.
    pub fn raw_capacitance(&self, system: &ResonatorSystem) -> Result<CapacitanceMatrix, CliError> {
        Ok(match self.capacitance.backend {
            Backend::Dilute => dilute_capacitance(system)?,
            Backend::Boundary => boundary_capacitance(system, self.capacitance.quad_order)?,
        })
    }

    pub fn modulation(&self, system: &ResonatorSystem) -> Result<Modulation, CliError> {
        let n = system.len();
        let m = &self.modulation;
        let phases = match &m.phases {
            PhaseSpec::Preset(p) => p.phases_for(system),
            PhaseSpec::Values(v) => v.clone(),
        };
        let amplitudes = match (&m.amplitudes, m.epsilon) {
            (Some(a), _) => a.clone(),
            (None, Some(e)) => vec![e; n],
            (None, None) => unreachable!("validated"),
        };
        if phases.len() != n || amplitudes.len() != n {
            return Err(schema_error(format!(
                "modulation arrays have lengths {} and {} for {n} resonators",
                amplitudes.len(),
                phases.len()
            )));
        }
        Ok(Modulation::new(m.omega, amplitudes, phases)?)
    }
}
