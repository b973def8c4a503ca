//! Quasisolution spectra of the damped/driven cubic NLS on a frequency
//! lattice, the wave kinetic operator on the resonance quadric, and the
//! damped/driven wave kinetic equation.

pub mod error;
pub mod numerics;
pub mod spectral_domain;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
pub use spectral_domain::{
    chi_d, dispersion_omega, mod_sum, weighted_norm, DampingProfile, ForcingProfile, Horizon,
    LatticeSpec, Mode, PhysicalParams, Profiles, RadialDensity, ResonanceData, SpectralDensity,
    Vec3,
};
pub mod base_process;
pub mod chaos_expansion;
pub mod resonance_quadric;
pub mod kinetic_operator;
pub mod continuum;
pub mod wick_engine;
pub mod wke_solver;
pub mod verification;
