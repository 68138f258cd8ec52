//! CP decomposition drivers: the robust tensor power method and ALS, each
//! over exact dense contractions or over sketches.
//!
//! Both drivers are written once against a small oracle trait
//! ([`PowerOracle`], [`AlsOracle`]); the exact and sketched variants only
//! differ in how the contractions are evaluated.

mod als;
mod eigengap;
mod power;

pub use als::{als_exact, als_fast, als_with, AlsConfig, AlsOracle, AlsOutput, SketchAls};
pub use eigengap::{eigengap_report, EigengapReport};
pub use power::{
    initial_vector, power_iterations, robust_tpm_exact, robust_tpm_fast, robust_tpm_fast_asym,
    robust_tpm_fast_resampled, robust_tpm_with, AsymSketchPower, ComponentTrace, ExactPower, PowerConfig,
    PowerOracle, PowerOutput, ResampledSymPower, SymSketchPower,
};
