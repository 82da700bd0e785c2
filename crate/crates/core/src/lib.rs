//! Disturbance string stability toolkit for bidirectional vehicle platoons
//! under integral-action control.
//!
//! The library certifies a nonlinear coupling controller against contraction
//! conditions on the transformed closed loop, evaluates the resulting error
//! estimates, searches for feasible gains, and simulates the full platoon to
//! verify that measured errors stay under the certified bounds.
//!
//! Modules, bottom up:
//!
//! - [`matrix`]: small dense matrix measure / spectral norm / SVD extremes
//! - [`rng`]: documented SplitMix64 generator for reproducible draws
//! - [`model`]: vehicles, disturbances, desired configuration, scenario
//!   sampling
//! - [`controller`]: the coupling law and its gains
//! - [`conditions`]: transform, Jacobian blocks, condition checks,
//!   contraction margin
//! - [`bounds`]: evaluable error-estimate right-hand sides
//! - [`synthesis`]: certified direct search for gains
//! - [`sim`]: RK4 closed-loop simulation, metrics, bound verification,
//!   string-length sweeps
//! - [`io`]: CSV and TOML artifacts with round-trip readers
//!
//! Scenario batches, string sweeps and synthesis starts run data-parallel
//! under the `parallel` feature (enabled by default); disabling it yields a
//! sequential build with identical results.

pub mod bounds;
pub mod conditions;
pub mod controller;
pub mod error;
pub mod io;
pub mod matrix;
pub mod model;
mod par;
pub mod rng;
pub mod sim;
pub mod synthesis;

pub use bounds::{bound_curve, BoundInputs, BoundKind, DssBound};
pub use conditions::{
    build_transform, check_conditions, contraction_margin, gain_k, jacobian_blocks,
    ConditionReport, JacobianBlocks, SlopeBox, TransformPair,
};
pub use controller::{GainSet, Variant};
pub use error::{Error, Result};
pub use model::{
    sample_scenario, AugmentedState, DisturbanceSpec, PlatoonConfig, ScenarioTemplate,
    VehicleParams, VehicleState,
};
pub use sim::{
    integrate_rk4, run_scenario, string_sweep, verify_bound, DisturbanceChannel, ErrorMetrics,
    ErrorNorm, SimOptions, SweepRow, Trajectory,
};
pub use synthesis::{margin_landscape, synthesize, GainParam, SearchSpec, SynthesisOutcome};
