//! Shared fixtures for the criterion benchmarks under `benches/`.

use twistknot::twister::build_hamiltonian;
use twistknot::{ComplexMatrix, TwisterSpec};

/// Four-band Hamiltonian at the Solomon-knot point.
pub fn solomon_hamiltonian(k: f64) -> ComplexMatrix {
    build_hamiltonian(&TwisterSpec::four_band(-0.5, -0.4), k).expect("valid spec")
}

/// Two-band Hamiltonian at the Hopf-link point.
pub fn hopf_hamiltonian(k: f64) -> ComplexMatrix {
    build_hamiltonian(&TwisterSpec::two_band(0.5338, 0.6), k).expect("valid spec")
}
