//! Spectral simulation of Seiberg-Witten type energies with `k` extra derivatives on flat tori.
//!
//! Fields are sampled on a periodic lattice and differentiated spectrally;
//! pointwise products can be dealiased with the 2/3 rule. Besides the energies
//! and their discrete gradients the crate has explicit and integrating-factor
//! steppers for the flow and its gauge-fixed form, plus blow-up diagnostics.

pub mod config;
pub mod diagnostics;
pub mod diffgeo;
pub mod error;
pub mod field;
pub mod flow;
pub mod functional;
pub mod grid;
pub mod norms;
pub mod random;
pub mod snapshot;

pub use config::{FlowConfig, GridSpec, InitSpec, Integrator, OutputSpec};
pub use diagnostics::{
    blowup_sequence, classify_dimension, concentration_scan, lambda_scale, scaled_residual,
    scaling_exponent, spinor_bound_monitor, weighted_local_energy, ConcentrationReport,
    DimensionClass, RescaleParams, SpinorMonitorReport,
};
pub use diffgeo::{
    codifferential, commutator_defect, coulomb_project, cov_deriv, cov_deriv_adjoint, curvature,
    exterior_d, gauge_transform, iterated_adjoint, iterated_cov_deriv,
};
pub use error::{Error, Result};
pub use field::{
    spectral_partial, ConnectionForm, Field, GaugePhase, ScalarField, SpinorField, TwoForm, C64,
};
pub use flow::{
    deturck_rhs, deturck_to_flow, flow_rhs, gauge_ode_step, residual_flow, run_flow,
    run_flow_from, step_imex, step_rk4, DiagnosticsRecord, FlowState, RhsKind, Termination,
    Trajectory,
};
pub use functional::{
    fd_gradient_check, grad_connection, grad_spinor, gradients, sw_energy, sw_energy_k,
    EnergyBreakdown, GradCheck, GradientPair, SwParams,
};
pub use grid::{make_grid, TorusGrid};
pub use norms::{ball_lp_norm, bump_function, l2_inner, lp_norm, sup_norm, weighted_l2_norm, BumpWeight};
pub use random::random_band_limited;
