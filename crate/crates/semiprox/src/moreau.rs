//! Closed-form Moreau envelopes and proximity operators of the convex base
//! penalties, and the semiconvex difference penalty built from them.
//!
//! For a base penalty `f` and index `alpha > 0`, the envelope is
//! `env(x) = inf_u f(u) + (u - x)^2 / (2 alpha)` and the prox is its argmin.
//! The difference `f_alpha = f - env` is the structured semiconvex penalty
//! this crate is about: for `|x|` it is exactly the minimax concave penalty.

use crate::penalty::{ExtReal, PenaltySpec, QuadCoeffs};

/// Validated envelope index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MoreauParams {
    alpha: f64,
}

impl MoreauParams {
    pub fn new(alpha: f64) -> Result<Self, InvalidIndex> {
        if alpha.is_finite() && alpha > 0.0 {
            Ok(MoreauParams { alpha })
        } else {
            Err(InvalidIndex)
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn prox(&self, spec: &PenaltySpec, x: f64) -> f64 {
        prox(spec, self.alpha, x)
    }

    pub fn env(&self, spec: &PenaltySpec, x: f64) -> f64 {
        env(spec, self.alpha, x)
    }

    pub fn falpha(&self, spec: &PenaltySpec, x: f64) -> ExtReal {
        eval_falpha(spec, self.alpha, x)
    }
}

/// An envelope or prox index that is not a positive finite number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("index must be a positive finite number")]
pub struct InvalidIndex;

fn check_params(alpha: f64, x: f64) {
    assert!(alpha.is_finite() && alpha > 0.0, "alpha must be positive");
    assert!(x.is_finite(), "query point must be finite");
}

/// Prox of the unconstrained quadratic part. Single-valued since the base is
/// convex:
///
/// ```text
/// prox(x) = min{0, (x - alpha b1) / (alpha a1 + 1)}   (x <= 0)
///           max{0, (x - alpha b2) / (alpha a2 + 1)}   (x >= 0)
/// ```
///
/// so inputs in `[alpha b1, alpha b2]` collapse to zero. Any constraint on
/// `spec` is ignored here; see [`prox_restricted`].
pub fn prox_base(spec: &PenaltySpec, alpha: f64, x: f64) -> f64 {
    check_params(alpha, x);
    prox_base_coeffs(spec.coeffs(), alpha, x)
}

fn prox_base_coeffs(c: &QuadCoeffs, alpha: f64, x: f64) -> f64 {
    if x <= 0.0 {
        ((x - alpha * c.b1()) / (alpha * c.a1() + 1.0)).min(0.0)
    } else {
        ((x - alpha * c.b2()) / (alpha * c.a2() + 1.0)).max(0.0)
    }
}

/// Prox of the interval-restricted penalty `f + i_C`. The unconstrained
/// objective is strictly convex in one dimension, so the constrained
/// minimizer is the unconstrained one clamped onto the interval.
pub fn prox_restricted(spec: &PenaltySpec, alpha: f64, x: f64) -> f64 {
    check_params(alpha, x);
    let p = prox_base_coeffs(spec.coeffs(), alpha, x);
    match spec.constraint() {
        Some(c) => c.clamp(p),
        None => p,
    }
}

/// Prox of the base penalty as specified: restricted when the spec carries a
/// constraint, unconstrained otherwise.
pub fn prox(spec: &PenaltySpec, alpha: f64, x: f64) -> f64 {
    if spec.constraint().is_some() {
        prox_restricted(spec, alpha, x)
    } else {
        prox_base(spec, alpha, x)
    }
}

/// Moreau envelope of the base penalty. Finite everywhere, even off the
/// domain of a constrained spec.
///
/// The unconstrained case uses the closed three-branch form; the restricted
/// case substitutes the clamped prox into the defining infimum, which avoids
/// a per-instance case table.
pub fn env(spec: &PenaltySpec, alpha: f64, x: f64) -> f64 {
    check_params(alpha, x);
    match spec.constraint() {
        None => env_unconstrained(spec.coeffs(), alpha, x),
        Some(_) => {
            let p = prox_restricted(spec, alpha, x);
            spec.coeffs().quad(p) + (p - x) * (p - x) / (2.0 * alpha)
        }
    }
}

fn env_unconstrained(c: &QuadCoeffs, alpha: f64, x: f64) -> f64 {
    if x <= alpha * c.b1() {
        (c.quad(x) - alpha * c.b1() * c.b1() / 2.0) / (alpha * c.a1() + 1.0)
    } else if x <= alpha * c.b2() {
        x * x / (2.0 * alpha)
    } else {
        (c.quad(x) - alpha * c.b2() * c.b2() / 2.0) / (alpha * c.a2() + 1.0)
    }
}

/// The structured semiconvex penalty `f_alpha = f - env`.
///
/// Off the domain of a constrained spec the value is `+inf`. On the domain
/// the envelope of the restricted penalty agrees with the unconstrained one,
/// so the unconstrained closed form is used throughout. For a pure indicator
/// the quadratic part is zero and this reduces to the indicator itself: the
/// construction fixes indicators.
pub fn eval_falpha(spec: &PenaltySpec, alpha: f64, x: f64) -> ExtReal {
    check_params(alpha, x);
    if let Some(c) = spec.constraint() {
        if !c.contains(x) {
            return ExtReal::PosInf;
        }
    }
    ExtReal::Finite(spec.coeffs().quad(x) - env_unconstrained(spec.coeffs(), alpha, x))
}
