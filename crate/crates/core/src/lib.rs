//! Age-of-information analysis for slotted wireless networks with pairwise
//! interference and random ON/OFF channels.
//!
//! - [`network`]: conflict-graph instances and their TOML config format.
//! - [`sim`]: Monte Carlo simulation of link ages under a stationary policy.
//! - [`analytics`]: closed-form ages, the `1/√γ` heuristic, optimality residual.
//! - [`dual`]: entropy-form dual objective and the frame-synchronous
//!   distributed gradient ascent that computes age-optimal attempt rates.
//! - [`oracle`]: grid search plus coordinate descent for small instances.

pub mod analytics;
pub mod dual;
pub mod error;
pub mod network;
pub mod oracle;
pub mod rng;
pub mod sim;

pub use analytics::{
    activation_frequency, closed_form_age, fixed_point_residual, heuristic_sqrt_policy, ActivationProfile,
};
pub use dual::{
    dual_gradient, dual_objective, entropy, recover_policy, run_frames, solve_centralized, DualState, OptimizerConfig,
    OptimizerResult, StepSchedule,
};
pub use error::{Error, Result};
pub use network::{parse_network, validate, Intent, Link, Network, Severity, ValidationReport};
pub use oracle::{grid_search, refine, OracleResult};
pub use sim::{simulate, simulate_traced, transmission_success, LinkStats, Policy, SimState, TraceStats};
