//! Structured semiconvex sparsity-promoting penalties.
//!
//! Starting from a convex base penalty `f` with its global minimum at the
//! origin and a kink there, the difference `f_alpha = f - env_alpha(f)`
//! between the penalty and its Moreau envelope is a nonnegative, semiconvex
//! penalty with the same subdifferential at zero. For `f = |.|` this
//! construction yields the minimax concave penalty, and its prox sweeps from
//! firm to hard thresholding as the prox step grows.
//!
//! The crate covers the full piecewise quadratic base family (optionally
//! restricted to an interval around the origin):
//!
//! - [`penalty`]: validated base penalties and their evaluation.
//! - [`moreau`]: closed-form envelopes and proximity operators of the base.
//! - [`semiconvex`]: the set-valued prox of `f_alpha` in every case the
//!   family produces, the guaranteed zero set, and hard thresholding.
//! - [`oracle`]: an independent brute-force grid minimizer used to verify
//!   every closed form.
//! - [`solver`]: penalized least-squares variable selection by
//!   forward-backward splitting.
//!
//! A narrative guide with runnable examples lives in the `book/` directory
//! of the repository; its chapters double as the doc-tests of [`book`].

pub mod moreau;
pub mod oracle;
pub mod penalty;
pub mod semiconvex;
pub mod solver;

pub mod book;

pub use moreau::{env, eval_falpha, prox, prox_base, prox_restricted, MoreauParams};
pub use penalty::{eval_l0, ExtReal, Interval, PenaltyError, PenaltySpec, QuadCoeffs};
pub use semiconvex::{
    prox_hard, prox_semiconvex, prox_semiconvex_restricted, prox_separable, s2_branch,
    sparsity_threshold, CaseBranch, CaseTag, ProxResult, ThresholdParams, ZeroSet,
};
pub use solver::{
    lipschitz_bound, make_synthetic, solve, PenaltyAssignment, RegressionProblem, SolveConfig,
    SolveError, SolveReport,
};
