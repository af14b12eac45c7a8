//! Solvers for a dynamic information-provision game between a funding
//! principal and a myopic agent.
//!
//! The state is a common belief `p ∈ [0,1]` that evolves as a martingale
//! diffusion while the principal funds research. The crate computes the
//! agent's myopic Markov strategy and the flow payoff `u` it induces for
//! the principal, the concave envelope `cav u` (the static persuasion
//! benchmark), the principal's value function `v` (exact closed form for
//! piecewise-affine `u`, monotone finite differences in general), the
//! equilibrium funding policy with its long-run beliefs, comparative
//! statics in the composite impatience parameter `rσ²`, and Monte Carlo
//! simulation of belief paths under a funding policy.

pub mod closed_form;
pub mod envelope;
pub mod equilibrium;
mod error;
pub mod fd;
pub mod fixtures;
pub mod io;
pub mod model;
pub mod piecewise;
pub mod poly;
pub mod simulate;

pub use closed_form::{basis, solve_closed_form, verify_value, xi, ClosedFormValue};
pub use envelope::{concave_envelope, persuasion_beliefs, BeliefPair};
pub use equilibrium::{
    best_reply_policy, equilibrium_report, full_info_check, long_run_beliefs, sweep,
    welfare_prior_monotonicity, EquilibriumReport, Method, Policy, Value,
};
pub use error::Error;
pub use fd::{funding_region_fd, solve_fd, GridValue};
pub use model::{induced_flow_payoff, myopic_regular_strategy, phi_map, AgentStrategy, ModelSpec};
pub use piecewise::PiecewiseFn;
pub use poly::Polynomial;
pub use simulate::{absorption_stats, simulate_paths, SimConfig, SimResult};

pub type Result<T> = std::result::Result<T, Error>;
