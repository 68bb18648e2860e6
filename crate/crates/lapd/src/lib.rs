//! Langevin sampling with prior diffusion, plus the exact oracles that
//! certify its convergence rates.
//!
//! The algorithm targets Gibbs measures `p* ∝ exp(-(f(w) + g(w))/β)` whose
//! potential splits into a likelihood `f` and a strongly convex prior `g`
//! containing `m‖w‖²/2`. Each iteration first flows the state along the
//! prior's exact diffusion for a scheduled duration, then takes a plain
//! (or minibatch) gradient step on `f`; the analyzed iterates are the
//! post-diffusion states.
//!
//! Modules:
//! - [`model`]: likelihood/prior specifications, their gradients and
//!   regularity constants, mode finding, and gradient-noise constants.
//! - [`prior_diffusion`]: the exact Ornstein-Uhlenbeck transition for
//!   Gaussian priors and the substepped numeric flow for elastic-net priors.
//! - [`schedule`]: the decreasing step-size schedule, its diffusion
//!   durations, and the trajectory weights.
//! - [`sampler`]: single chains (full-gradient and minibatch) and the
//!   deterministic multi-chain runner.
//! - [`oracle`]: exact Gaussian moment recursion with per-step KL, Gaussian
//!   KL/W2 closed forms, 1-D quadrature posteriors, and empirical 1-D W2.
//! - [`diagnostics`]: weighted trajectory estimators, pooled sampling,
//!   bound evaluation, and iterations-to-epsilon.

pub mod diagnostics;
pub mod error;
pub mod linalg;
pub mod model;
pub mod oracle;
pub mod prior_diffusion;
pub mod sampler;
pub mod schedule;

pub use error::{Error, Result};
pub use linalg::SymmetricMatrix;
pub use model::{
    find_mode, sg_variance_at_mode, ActivationFamily, Likelihood, Prior, QuadraticForm,
    Regularity, RidgeSeparable, SgVariance,
};
pub use oracle::{
    empirical_w2_sq_1d, expected_grad_norm_sq, gaussian_kl, gaussian_posterior, gaussian_w2_sq,
    grad_moment_step, grad_norm_sq_bound, ou_moment_step, quadrature_posterior_1d,
    run_moment_recursion, GaussianMoments, GridPosterior1D, MomentRecursionReport,
};
pub use prior_diffusion::{ou_coefficients, NumericConfig, PriorDiffusion, SubstepScheme};
pub use sampler::{
    chain_rngs, init_from_prior, run_chains, run_lapd, run_sgld, Recorder, Trajectory,
};
pub use schedule::StepSchedule;
