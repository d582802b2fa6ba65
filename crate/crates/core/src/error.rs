use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("resonators {i} and {j} overlap: center distance {distance:.6e} <= {limit:.6e}")]
    Overlap {
        i: usize,
        j: usize,
        distance: f64,
        limit: f64,
    },

    #[error("resonator count {n} is not 1 mod 6")]
    Parity { n: usize },

    #[error("resonators {i} and {j} share a center")]
    DegenerateGeometry { i: usize, j: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("single-layer system is ill-conditioned (condition estimate {condition:.3e})")]
    IllConditioned { condition: f64 },

    #[error("lattice sum diverges at alpha = {alpha:.3e} (|alpha| below {alpha_min:.3e})")]
    Divergence { alpha: f64, alpha_min: f64 },

    #[error("modulation amplitude {amplitude} at resonator {index} is not below 1 in magnitude")]
    SingularModulation { index: usize, amplitude: f64 },

    #[error("expansion blocks require a uniform amplitude")]
    NonUniformAmplitude,

    #[error("capacitance matrix is not positive definite (smallest eigenvalue {min_eigenvalue:.6e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },

    #[error("integration error estimate {estimate:.3e} exceeds tolerance {tolerance:.3e}")]
    Accuracy { estimate: f64, tolerance: f64 },

    #[error("eigenvalue {index} lies in a cluster of size {size}; pass a cluster selector")]
    ClusterAmbiguity { index: usize, size: usize },

    #[error("small denominator {value:.3e} at (k={k}, l={l}, m={m})")]
    SmallDenominator { k: usize, l: usize, m: i32, value: f64 },

    #[error("no degenerate pair found in the folded static spectrum")]
    NoDegeneratePair,

    #[error("effective block is degenerate: splitting unresolved at second order")]
    DegenerateBlock,

    #[error("mode vector is zero")]
    ZeroVector,

    #[error("mode pairing is ambiguous (overlap determinant {det:.3e})")]
    AmbiguousPairing { det: f64 },

    #[error("amplitude sampling exceeded {limit} resamples")]
    AmplitudeOverflow { limit: usize },

    #[error("expansion is only defined for constant kappa")]
    UnsupportedModulation,

    #[error("eigendecomposition failed: {0}")]
    Eigen(String),
}

pub type Result<T> = std::result::Result<T, Error>;
