//! Fixed workloads shared by the benchmarks.

use eabeam::network::{build_scenario, draw_realization, ChannelRealization, GaussianSource, ScenarioSpec};
use eabeam::numerics::ComplexMatrix;

/// Symmetric network with two antennas per end and SIR 0 dB.
pub fn symmetric_instance(n_links: usize, snr_db: f64, seed: u64) -> ChannelRealization {
    let spec = ScenarioSpec::symmetric(n_links, 2, 2, snr_db, 0.0);
    draw_realization(&build_scenario(&spec).expect("valid preset"), seed)
}

/// Random Hermitian matrix `(A + A^H) / 2`.
pub fn hermitian(dim: usize, seed: u64) -> ComplexMatrix {
    let a = GaussianSource::new(seed).complex_matrix(dim, dim);
    (&a + a.adjoint()).scale(0.5)
}
