//! Benchmark fixtures.

use pcqed_core::{DispersionModel, LayerStack};

/// Constant-index host, 50 nm layers.
pub fn constant_stack(n: f64) -> LayerStack {
    LayerStack::new(50.0, 50.0, DispersionModel::constant(n).unwrap()).unwrap()
}

/// Typical off-axis wavevector used by every bench.
pub const K_RHO: f64 = 0.012;
pub const K_Z: f64 = 0.017;
pub const OMEGA_MAX: f64 = 10.65;
