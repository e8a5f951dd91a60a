//! Verification toolkit: observables over flattened collective states, the
//! generator of the dynamics, Monte-Carlo semigroup estimates with
//! generator-consistency and composition checks, first-passage and hazard
//! estimation, jump-intensity measures, and forward-equation residuals.

pub mod first_passage;
pub mod forward;
pub mod generator;
pub mod intensity;
pub mod model;
pub mod semigroup;
pub mod testfn;

pub use first_passage::{
    estimate_first_passage, jump_rate_from_fp, rate_table, FirstPassageConditioning,
    FirstPassageEstimate, FirstPassageOptions, SURVIVAL_FLOOR,
};
pub use forward::{forward_equation_residual, ForwardResidualReport};
pub use generator::{
    generator_agent, generator_pdmp, generator_swarm, lie_derivative, GeneratorValue,
};
pub use intensity::{
    jump_samples_from_swarm, jump_samples_from_trajectory, mean_jump_intensity, IntensityEstimate,
    JumpSample, Region,
};
pub use model::{
    simulate_abstraction, simulate_abstraction_grid, AbstractionModel, AgentRate, ModelAgent,
    RateEstimate,
};
pub use semigroup::{
    chapman_kolmogorov_check, generator_residual, semigroup_estimate, ChapmanReport,
    ResidualReport,
};
pub use testfn::{Layout, TestFunction};
