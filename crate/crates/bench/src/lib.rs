//! Benchmark fixtures.

use quasikin::{LatticeSpec, Profiles, RadialDensity};

pub fn profiles() -> Profiles {
    Profiles::default()
}

pub fn lattice(period: f64, cutoff: f64) -> LatticeSpec {
    LatticeSpec::new(2, period, cutoff).expect("valid lattice")
}

/// B = b²/γ on `nodes` radial nodes with spacing `dr`.
pub fn big_b(dr: f64, nodes: usize) -> RadialDensity {
    let p = profiles();
    RadialDensity::from_fn(dr, nodes, |rho| p.big_b(rho * rho))
}
