//! The set-valued proximity operator of the semiconvex penalty
//! `f_alpha = f - env`, for every shape the piecewise quadratic family can
//! produce, plus the hard-threshold reference operator and the guaranteed
//! zero set around the origin.
//!
//! For a prox step `beta` the operator is
//!
//! ```text
//! prox(x) = argmin_u  f_alpha(u) + (u - x)^2 / (2 beta)
//! ```
//!
//! On the right of the origin the objective splits into a near-origin
//! quadratic piece and a tail piece. The sign of
//! `alpha b2 (a2 beta + 1) - beta b2` decides whether the near-origin piece
//! is strongly convex, degenerate linear, or concave, and with it whether
//! the operator is single-valued, jumps through a segment, or jumps across
//! a pair of tied minimizers. Negative inputs are handled by reflecting the
//! coefficient tuple.

use crate::moreau::{eval_falpha, InvalidIndex};
use crate::penalty::{PenaltySpec, QuadCoeffs};

/// Relative tolerance for classifying the degenerate case split and for
/// deciding that a query sits exactly on a set-valued point. Inside this
/// band the classification is implementation-defined.
const CASE_REL_TOL: f64 = 1e-12;

fn approx_eq(a: f64, b: f64) -> bool {
    (a - b).abs() <= CASE_REL_TOL * a.abs().max(b.abs()).max(1.0)
}

/// A set-valued prox output: one point, two isolated points, or a closed
/// segment. Every contained point `p` satisfies `|p| <= |x|` and shares the
/// sign of the query `x` when both are nonzero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProxResult {
    Single(f64),
    Pair(f64, f64),
    Segment(f64, f64),
}

impl ProxResult {
    fn pair(a: f64, b: f64) -> Self {
        debug_assert!(a < b);
        ProxResult::Pair(a, b)
    }

    pub fn is_set_valued(&self) -> bool {
        !matches!(self, ProxResult::Single(_))
    }

    /// Smallest contained point.
    pub fn low(&self) -> f64 {
        match *self {
            ProxResult::Single(p) => p,
            ProxResult::Pair(a, _) | ProxResult::Segment(a, _) => a,
        }
    }

    /// Largest contained point.
    pub fn high(&self) -> f64 {
        match *self {
            ProxResult::Single(p) => p,
            ProxResult::Pair(_, b) | ProxResult::Segment(_, b) => b,
        }
    }

    /// The isolated points, or the segment endpoints.
    pub fn points(&self) -> Vec<f64> {
        match *self {
            ProxResult::Single(p) => vec![p],
            ProxResult::Pair(a, b) | ProxResult::Segment(a, b) => vec![a, b],
        }
    }

    /// The element of smallest magnitude, ties broken toward zero. This is
    /// the selection rule used for single-valued downstream consumers.
    pub fn select_min_magnitude(&self) -> f64 {
        match *self {
            ProxResult::Single(p) => p,
            ProxResult::Pair(a, b) => {
                if a.abs() <= b.abs() {
                    a
                } else {
                    b
                }
            }
            ProxResult::Segment(lo, hi) => {
                if lo <= 0.0 && 0.0 <= hi {
                    0.0
                } else if lo.abs() <= hi.abs() {
                    lo
                } else {
                    hi
                }
            }
        }
    }

    /// Distance from `p` to the set.
    pub fn distance(&self, p: f64) -> f64 {
        match *self {
            ProxResult::Single(q) => (p - q).abs(),
            ProxResult::Pair(a, b) => (p - a).abs().min((p - b).abs()),
            ProxResult::Segment(lo, hi) => {
                if p < lo {
                    lo - p
                } else if p > hi {
                    p - hi
                } else {
                    0.0
                }
            }
        }
    }

    pub fn contains(&self, p: f64, tol: f64) -> bool {
        self.distance(p) <= tol
    }

    fn negate(self) -> Self {
        match self {
            ProxResult::Single(p) => ProxResult::Single(-p),
            ProxResult::Pair(a, b) => ProxResult::Pair(-b, -a),
            ProxResult::Segment(lo, hi) => ProxResult::Segment(-hi, -lo),
        }
    }
}

impl std::fmt::Display for ProxResult {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ProxResult::Single(p) => write!(f, "{{{p}}}"),
            ProxResult::Pair(a, b) => write!(f, "{{{a}, {b}}}"),
            ProxResult::Segment(lo, hi) => write!(f, "[{lo}, {hi}]"),
        }
    }
}

/// Which branch of the case analysis produced a result.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaseBranch {
    /// Right slope zero: the whole side is one strictly convex tail piece.
    B2Zero,
    /// Near-origin piece strongly convex: continuous single-valued map.
    StrongConvex,
    /// Near-origin piece degenerate linear: a segment at the switch point.
    ConvexBoundary,
    /// Near-origin piece concave: a jump with a tied pair at the switch.
    Concave,
    /// A constraint endpoint entered the result.
    IntervalSaturated,
    /// Pure indicator: the operator is the projection onto the interval.
    Projection,
}

/// Diagnostic tag: the case branch, and whether the query was handled
/// through the reflection of the coefficient tuple (negative inputs).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CaseTag {
    pub branch: CaseBranch,
    pub reflected: bool,
}

impl CaseTag {
    fn new(branch: CaseBranch) -> Self {
        CaseTag {
            branch,
            reflected: false,
        }
    }

    fn reflect(mut self) -> Self {
        self.reflected = true;
        self
    }
}

impl std::fmt::Display for CaseTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self.branch {
            CaseBranch::B2Zero => "B2Zero",
            CaseBranch::StrongConvex => "StrongConvexCase",
            CaseBranch::ConvexBoundary => "ConvexBoundaryCase",
            CaseBranch::Concave => "ConcaveCase",
            CaseBranch::IntervalSaturated => "IntervalSaturated",
            CaseBranch::Projection => "Projection",
        };
        if self.reflected {
            write!(f, "Reflected({name})")
        } else {
            write!(f, "{name}")
        }
    }
}

/// Validated `(alpha, beta)` pair for the semiconvex prox.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdParams {
    alpha: f64,
    beta: f64,
}

impl ThresholdParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self, InvalidIndex> {
        if alpha.is_finite() && alpha > 0.0 && beta.is_finite() && beta > 0.0 {
            Ok(ThresholdParams { alpha, beta })
        } else {
            Err(InvalidIndex)
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn prox(&self, spec: &PenaltySpec, x: f64) -> (ProxResult, CaseTag) {
        prox_semiconvex(spec, self.alpha, self.beta, x)
    }

    pub fn zero_set(&self, spec: &PenaltySpec) -> ZeroSet {
        sparsity_threshold(spec, self.alpha, self.beta)
    }
}

fn check_params(alpha: f64, beta: f64, x: f64) {
    assert!(alpha.is_finite() && alpha > 0.0, "alpha must be positive");
    assert!(beta.is_finite() && beta > 0.0, "beta must be positive");
    assert!(x.is_finite(), "query point must be finite");
}

/// The tail-piece minimizer for `x >= 0`:
/// `max{alpha b2, (alpha a2 + 1)(x - alpha a2 beta b2 / (alpha a2 + 1)) / (alpha a2 (a2 beta + 1) + 1)}`,
/// a piecewise linear function of `x`.
pub fn s2_branch(coeffs: &QuadCoeffs, alpha: f64, beta: f64, x: f64) -> f64 {
    check_params(alpha, beta, x);
    assert!(x >= 0.0, "s2_branch is defined for x >= 0");
    let (a2, b2) = (coeffs.a2(), coeffs.b2());
    let d = alpha * a2 * (a2 * beta + 1.0) + 1.0;
    let c2 = alpha * a2 * beta * b2 / (alpha * a2 + 1.0);
    ((alpha * a2 + 1.0) / d * (x - c2)).max(alpha * b2)
}

/// Case analysis on the right of the origin, `x >= 0`.
fn right_prox(a2: f64, b2: f64, alpha: f64, beta: f64, x: f64) -> (ProxResult, CaseBranch) {
    debug_assert!(x >= 0.0);
    let d = alpha * a2 * (a2 * beta + 1.0) + 1.0;
    let c2 = alpha * a2 * beta * b2 / (alpha * a2 + 1.0);
    let k2 = (alpha * a2 + 1.0) / d;
    let s2 = |x: f64| (k2 * (x - c2)).max(alpha * b2);

    if b2 == 0.0 {
        return (ProxResult::Single(s2(x)), CaseBranch::B2Zero);
    }

    let lhs = alpha * b2 * (a2 * beta + 1.0);
    let rhs = beta * b2;
    if approx_eq(lhs, rhs) {
        // Degenerate near-origin piece: constant objective on [0, alpha b2]
        // when x sits exactly at the switch.
        let switch = rhs;
        let r = if approx_eq(x, switch) {
            ProxResult::Segment(0.0, alpha * b2)
        } else if x < switch {
            ProxResult::Single(0.0)
        } else {
            ProxResult::Single(k2 * (x - c2))
        };
        (r, CaseBranch::ConvexBoundary)
    } else if lhs > rhs {
        let r = if x < rhs {
            ProxResult::Single(0.0)
        } else if x <= lhs {
            ProxResult::Single(alpha * (x - rhs) / ((a2 * beta + 1.0) * alpha - beta))
        } else {
            ProxResult::Single(k2 * (x - c2))
        };
        (r, CaseBranch::StrongConvex)
    } else {
        // Concave near-origin piece: the operator jumps from 0 to the tail
        // branch at tau, where the two local minima tie.
        let tau = c2 + b2 * (alpha * beta * d).sqrt() / (alpha * a2 + 1.0);
        let r = if approx_eq(x, tau) {
            ProxResult::pair(0.0, k2 * (tau - c2))
        } else if x < tau {
            ProxResult::Single(0.0)
        } else {
            ProxResult::Single(k2 * (x - c2))
        };
        (r, CaseBranch::Concave)
    }
}

fn unconstrained_prox(
    coeffs: &QuadCoeffs,
    alpha: f64,
    beta: f64,
    x: f64,
) -> (ProxResult, CaseTag) {
    if x >= 0.0 {
        let (r, branch) = right_prox(coeffs.a2(), coeffs.b2(), alpha, beta, x);
        (r, CaseTag::new(branch))
    } else {
        let m = coeffs.mirrored();
        let (r, branch) = right_prox(m.a2(), m.b2(), alpha, beta, -x);
        (r.negate(), CaseTag::new(branch).reflect())
    }
}

/// The set-valued prox of `f_alpha` with step `beta`. Dispatches on the
/// presence of a constraint; see [`prox_semiconvex_restricted`] for the
/// interval-restricted behavior.
pub fn prox_semiconvex(
    spec: &PenaltySpec,
    alpha: f64,
    beta: f64,
    x: f64,
) -> (ProxResult, CaseTag) {
    check_params(alpha, beta, x);
    if spec.constraint().is_some() {
        prox_semiconvex_restricted(spec, alpha, beta, x)
    } else {
        unconstrained_prox(spec.coeffs(), alpha, beta, x)
    }
}

/// The set-valued prox of the interval-restricted penalty
/// `f_alpha + i_[lo, hi]`.
///
/// Rather than transcribing the per-instance case tables, the minimizer set
/// is found by comparing the objective over a complete candidate set: the
/// origin, the unconstrained candidates clamped into the interval, and the
/// finite interval endpoints. The one genuinely flat configuration (the
/// degenerate case split with the query at its switch point) is detected
/// up front and returns a segment whose extent is the flat region
/// intersected with the interval.
pub fn prox_semiconvex_restricted(
    spec: &PenaltySpec,
    alpha: f64,
    beta: f64,
    x: f64,
) -> (ProxResult, CaseTag) {
    check_params(alpha, beta, x);
    assert!(
        spec.constraint().is_some(),
        "restricted prox requires a constrained spec"
    );
    if x < 0.0 {
        let (r, tag) = restricted_right(&spec.mirrored(), alpha, beta, -x);
        (r.negate(), tag.reflect())
    } else {
        restricted_right(spec, alpha, beta, x)
    }
}

/// Restricted case analysis for `x >= 0`.
fn restricted_right(spec: &PenaltySpec, alpha: f64, beta: f64, x: f64) -> (ProxResult, CaseTag) {
    let coeffs = spec.coeffs();
    let c = spec.constraint().expect("caller checked");
    let (a2, b2) = (coeffs.a2(), coeffs.b2());

    // Flat near-origin piece: degenerate case split with the query at the
    // switch. The argmin is the whole flat region inside the interval.
    if b2 > 0.0 {
        let lhs = alpha * b2 * (a2 * beta + 1.0);
        let rhs = beta * b2;
        if approx_eq(lhs, rhs) && approx_eq(x, rhs) {
            let extent = (alpha * b2).min(c.hi());
            if extent > 0.0 {
                let branch = if c.hi() < alpha * b2 {
                    CaseBranch::IntervalSaturated
                } else {
                    CaseBranch::ConvexBoundary
                };
                return (ProxResult::Segment(0.0, extent), CaseTag::new(branch));
            }
        }
    }

    let (unres, mut tag) = unconstrained_prox(coeffs, alpha, beta, x);
    if spec.is_indicator() {
        tag = CaseTag::new(CaseBranch::Projection);
    }

    let mut cands: Vec<f64> = vec![0.0];
    for p in unres.points() {
        cands.push(c.clamp(p));
    }
    if c.lo().is_finite() {
        cands.push(c.lo());
    }
    if c.hi().is_finite() {
        cands.push(c.hi());
    }
    cands.sort_by(|a, b| a.total_cmp(b));
    cands.dedup_by(|a, b| approx_eq(*a, *b));

    let objective = |u: f64| {
        eval_falpha(spec, alpha, u).unwrap_finite() + (u - x) * (u - x) / (2.0 * beta)
    };
    let values: Vec<f64> = cands.iter().map(|&u| objective(u)).collect();
    let (best_idx, &best) = values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("candidate set is nonempty");
    let best_u = cands[best_idx];

    // A tie between candidates u and v moves with x at rate |u - v| / beta,
    // so the positional classification band translates into this objective
    // band.
    let mut kept: Vec<f64> = Vec::with_capacity(2);
    for (&u, &v) in cands.iter().zip(&values) {
        let tie_tol = CASE_REL_TOL * x.abs().max(1.0) * (u - best_u).abs() / beta
            + 1e-14 * best.abs().max(1.0);
        if v - best <= tie_tol {
            kept.push(u);
        }
    }

    let result = match kept.len() {
        1 => ProxResult::Single(kept[0]),
        2 => ProxResult::pair(kept[0], kept[1]),
        // Degenerate coincidences only; keep the extremes.
        _ => ProxResult::pair(kept[0], *kept.last().unwrap()),
    };

    let saturated = result
        .points()
        .iter()
        .any(|&p| !unres.contains(p, CASE_REL_TOL * p.abs().max(1.0)));
    if saturated && !spec.is_indicator() {
        tag = CaseTag::new(CaseBranch::IntervalSaturated);
    }
    (result, tag)
}

/// Hard thresholding: the prox of the l0 penalty with weight `gamma`. Kills
/// inputs below `sqrt(2 gamma)` in magnitude, keeps larger ones unchanged,
/// and at the threshold itself both survive.
pub fn prox_hard(gamma: f64, x: f64) -> ProxResult {
    assert!(gamma.is_finite() && gamma > 0.0, "gamma must be positive");
    assert!(x.is_finite());
    let thr = (2.0 * gamma).sqrt();
    if approx_eq(x.abs(), thr) {
        if x < 0.0 {
            ProxResult::pair(x, 0.0)
        } else {
            ProxResult::pair(0.0, x)
        }
    } else if x.abs() < thr {
        ProxResult::Single(0.0)
    } else {
        ProxResult::Single(x)
    }
}

/// The guaranteed zero set of the prox around the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZeroSet {
    pub lo: f64,
    pub hi: f64,
    /// Whether the endpoints belong to the guarantee. The `beta = alpha`
    /// case only covers the open interior.
    pub closed: bool,
}

impl ZeroSet {
    pub fn contains(&self, x: f64) -> bool {
        if self.closed {
            self.lo <= x && x <= self.hi
        } else {
            self.lo < x && x < self.hi
        }
    }
}

/// The interval of inputs guaranteed to be sent to zero, scaled from the
/// subdifferential `[b1, b2]` at the origin:
/// `beta [b1, b2]` closed for `beta < alpha`, the open interior of
/// `alpha [b1, b2]` for `beta = alpha`, and `alpha [b1, b2]` closed for
/// `beta > alpha`. For `beta > alpha` this is a lower bound: the true zero
/// set is instance-specific and strictly larger.
pub fn sparsity_threshold(spec: &PenaltySpec, alpha: f64, beta: f64) -> ZeroSet {
    assert!(alpha.is_finite() && alpha > 0.0, "alpha must be positive");
    assert!(beta.is_finite() && beta > 0.0, "beta must be positive");
    let (b1, b2) = spec.subdiff_at_zero();
    if beta < alpha {
        ZeroSet {
            lo: beta * b1,
            hi: beta * b2,
            closed: true,
        }
    } else {
        ZeroSet {
            lo: alpha * b1,
            hi: alpha * b2,
            closed: beta > alpha,
        }
    }
}

/// Specs and point vector of different lengths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("dimension mismatch: {specs} penalty specs vs {point} coordinates")]
pub struct DimensionMismatch {
    pub specs: usize,
    pub point: usize,
}

/// Componentwise prox over a product of one-dimensional penalties. There is
/// no cross-coordinate coupling, so the result is the per-coordinate prox.
pub fn prox_separable(
    specs: &[PenaltySpec],
    alpha: f64,
    beta: f64,
    x: &[f64],
) -> Result<Vec<ProxResult>, DimensionMismatch> {
    if specs.len() != x.len() {
        return Err(DimensionMismatch {
            specs: specs.len(),
            point: x.len(),
        });
    }
    Ok(specs
        .iter()
        .zip(x)
        .map(|(spec, &xi)| prox_semiconvex(spec, alpha, beta, xi).0)
        .collect())
}
