//! Shared inputs for the criterion benchmarks in `benches/`.

use swflow_core::random::random_connection;
use swflow_core::{random_band_limited, FlowState, TorusGrid};

/// Random band-limited state on an `n x n` torus.
pub fn planar_state(n: usize, seed: u64) -> FlowState {
    let g = TorusGrid::periodic(&[n, n]).expect("valid grid");
    let kmax = (n / 4).clamp(1, 4);
    let phi = random_band_limited(&g, 0, 1, kmax, seed, 0.5).expect("band fits the grid");
    let a = random_connection(&g, kmax, seed + 1, 0.5).expect("band fits the grid");
    FlowState::new(phi, a)
}
