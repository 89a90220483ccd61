//! Anytime-valid sequential tests and confidence sequences for multinomial
//! count data, with reductions for inhomogeneous Bernoulli and Poisson
//! processes.

mod activeset;
mod barrier;
pub mod cli;
pub mod confset;
pub mod contrasts;
pub mod error;
pub mod pointproc;
pub mod report;
pub mod seqtest;
pub mod sim;
pub mod special;
pub mod types;

pub use confset::{in_confidence_set, marginal_ci, solve_linear_over_set, Sense, SolverReport};
pub use contrasts::{
    composite_p, contrast_ci, delta_mle, null_from_equality, softmax_rho, CompositePStream,
    ContrastSpec, DeltaGauge, LinearConstraint, LinearHypothesis, Relation,
};
pub use error::{Error, Result};
pub use pointproc::{
    events_to_observations, mark_probability, simulate_marked_system, simulate_thinned,
    IntensityKind, IntensitySpec, MarkedEvent,
};
pub use seqtest::{init_state, kl_divergence, OddsState, Prior};
pub use sim::{
    pearson_chi2_p, run_bernoulli_scenario, run_coverage_experiment, run_power_experiment,
    run_type1_experiment, ExperimentConfig, ExperimentResult,
};
pub use special::{log_gamma, log_multivariate_beta};
pub use types::{CountVector, DirichletParams, Interval, SimplexVector};
