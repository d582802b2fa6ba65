//! Experiments built on the compute layers: edge-pair detection,
//! localization, perturbative versus numeric modes, band sweeps, robustness
//! and mirror interfaces.

pub mod bands;
pub mod compare;
pub mod edge_pair;
pub mod interface;
pub mod localization;
pub mod robustness;

pub use bands::{band_sweep, zone_grid, BandTable, GapReport};
pub use compare::{align_phase, compare_modes, numeric_pair, ModeComparison, NumericPair};
pub use edge_pair::{canonical_vectors, degenerate_limit, detect_edge_pair, EdgePairReport, SingleCellLetters};
pub use interface::{detect_interface_modes, InterfaceModes};
pub use localization::{localization_metrics, Edge, LocalizationProfile, EDGE_WINDOW};
pub use robustness::{robustness_study, MuReport, RobustnessMethod, RobustnessOptions, RobustnessReport};
