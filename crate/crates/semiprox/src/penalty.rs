//! The base penalty family: piecewise quadratic functions, optionally
//! restricted to a closed interval around the origin, plus the pure
//! indicator and the l0 counting penalty.
//!
//! A base penalty is a convex function with global minimum 0 at the origin
//! and a subdifferential there that contains a nonzero slope. For the
//! piecewise quadratic family
//!
//! ```text
//! f(x) = a1/2 x^2 + b1 x   (x <= 0)
//!        a2/2 x^2 + b2 x   (x >= 0)
//! ```
//!
//! this holds exactly when `a1 >= 0`, `a2 >= 0`, `b1 <= 0 <= b2`, and
//! `b2 - b1 > 0`. Construction of [`QuadCoeffs`] rejects everything else.

use serde::{Deserialize, Serialize};

/// Construction errors for the penalty family.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PenaltyError {
    /// A coefficient tuple outside the admissible region, with the violated
    /// inequality named.
    #[error("rejected coefficients: {0}")]
    RejectedCoeffs(&'static str),
    /// A constraint interval that cannot carry a sparsity-promoting penalty.
    #[error("rejected interval: {0}")]
    RejectedInterval(&'static str),
    /// A malformed JSON penalty-spec document.
    #[error("invalid spec document: {0}")]
    Document(String),
}

/// An extended-real value: finite, or the explicit `+inf` marker produced by
/// an indicator constraint. Kept as an enum so that downstream minimization
/// never mixes IEEE infinities into arithmetic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtReal {
    Finite(f64),
    PosInf,
}

impl ExtReal {
    pub fn is_finite(self) -> bool {
        matches!(self, ExtReal::Finite(_))
    }

    /// The finite value, if any.
    pub fn finite(self) -> Option<f64> {
        match self {
            ExtReal::Finite(v) => Some(v),
            ExtReal::PosInf => None,
        }
    }

    /// The finite value; panics on `+inf`.
    pub fn unwrap_finite(self) -> f64 {
        match self {
            ExtReal::Finite(v) => v,
            ExtReal::PosInf => panic!("expected a finite extended real"),
        }
    }

    /// Total order with `+inf` above every finite value.
    pub fn total_cmp(self, other: ExtReal) -> std::cmp::Ordering {
        use ExtReal::*;
        match (self, other) {
            (Finite(a), Finite(b)) => a.total_cmp(&b),
            (Finite(_), PosInf) => std::cmp::Ordering::Less,
            (PosInf, Finite(_)) => std::cmp::Ordering::Greater,
            (PosInf, PosInf) => std::cmp::Ordering::Equal,
        }
    }
}

impl From<f64> for ExtReal {
    fn from(v: f64) -> Self {
        debug_assert!(!v.is_nan());
        if v.is_infinite() && v > 0.0 {
            ExtReal::PosInf
        } else {
            ExtReal::Finite(v)
        }
    }
}

impl std::fmt::Display for ExtReal {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ExtReal::Finite(v) => write!(f, "{v}"),
            ExtReal::PosInf => write!(f, "inf"),
        }
    }
}

/// Validated coefficients of the piecewise quadratic base penalty.
///
/// `a1` is the curvature on the left branch, `a2` on the right; `b1 <= 0` and
/// `b2 >= 0` are the one-sided slopes at the origin. The subdifferential at
/// zero is the interval `[b1, b2]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadCoeffs {
    a1: f64,
    a2: f64,
    b1: f64,
    b2: f64,
}

impl QuadCoeffs {
    /// Validates a coefficient tuple. Comparisons are exact: borderline
    /// inputs such as `b1 = b2 = 0` are rejected.
    pub fn new(a1: f64, a2: f64, b1: f64, b2: f64) -> Result<Self, PenaltyError> {
        for (v, name) in [
            (a1, "a1 is not finite"),
            (a2, "a2 is not finite"),
            (b1, "b1 is not finite"),
            (b2, "b2 is not finite"),
        ] {
            if !v.is_finite() {
                return Err(PenaltyError::RejectedCoeffs(name));
            }
        }
        if a1 < 0.0 {
            return Err(PenaltyError::RejectedCoeffs("a1 >= 0 violated"));
        }
        if a2 < 0.0 {
            return Err(PenaltyError::RejectedCoeffs("a2 >= 0 violated"));
        }
        if b1 > 0.0 {
            return Err(PenaltyError::RejectedCoeffs("b1 <= 0 violated"));
        }
        if b2 < 0.0 {
            return Err(PenaltyError::RejectedCoeffs("b2 >= 0 violated"));
        }
        if !(b2 - b1 > 0.0) {
            return Err(PenaltyError::RejectedCoeffs("b2 - b1 > 0 violated"));
        }
        Ok(QuadCoeffs { a1, a2, b1, b2 })
    }

    /// Degenerate all-zero tuple backing the pure indicator. Not reachable
    /// through [`QuadCoeffs::new`].
    pub(crate) fn zero() -> Self {
        QuadCoeffs {
            a1: 0.0,
            a2: 0.0,
            b1: 0.0,
            b2: 0.0,
        }
    }

    pub fn a1(&self) -> f64 {
        self.a1
    }
    pub fn a2(&self) -> f64 {
        self.a2
    }
    pub fn b1(&self) -> f64 {
        self.b1
    }
    pub fn b2(&self) -> f64 {
        self.b2
    }

    /// Evaluates the quadratic itself, with `x = 0` assigned to the right
    /// branch. Both branches vanish at the origin so the choice is
    /// unobservable.
    pub(crate) fn quad(&self, x: f64) -> f64 {
        if x < 0.0 {
            0.5 * self.a1 * x * x + self.b1 * x
        } else {
            0.5 * self.a2 * x * x + self.b2 * x
        }
    }

    /// The tuple describing `x -> f(-x)`, used by the reflection arguments.
    pub(crate) fn mirrored(&self) -> Self {
        QuadCoeffs {
            a1: self.a2,
            a2: self.a1,
            b1: -self.b2,
            b2: -self.b1,
        }
    }
}

/// A closed interval `[lo, hi]` containing the origin with nonempty
/// interior. Unbounded sides use IEEE infinities as sentinels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    lo: f64,
    hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self, PenaltyError> {
        if lo.is_nan() || hi.is_nan() {
            return Err(PenaltyError::RejectedInterval("endpoints must not be NaN"));
        }
        if !(lo <= 0.0) {
            return Err(PenaltyError::RejectedInterval("lo <= 0 violated"));
        }
        if !(hi >= 0.0) {
            return Err(PenaltyError::RejectedInterval("hi >= 0 violated"));
        }
        if !(hi - lo > 0.0) {
            return Err(PenaltyError::RejectedInterval("hi - lo > 0 violated"));
        }
        Ok(Interval { lo, hi })
    }

    /// The whole real line.
    pub fn full() -> Self {
        Interval {
            lo: f64::NEG_INFINITY,
            hi: f64::INFINITY,
        }
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }
    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn is_full(&self) -> bool {
        self.lo == f64::NEG_INFINITY && self.hi == f64::INFINITY
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn clamp(&self, x: f64) -> f64 {
        x.max(self.lo).min(self.hi)
    }
}

/// A validated base penalty: quadratic coefficients plus an optional
/// interval constraint. With a constraint the function is `f + i_C` where
/// `i_C` is the indicator of the interval; without one it is `f` itself.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltySpec {
    coeffs: QuadCoeffs,
    constraint: Option<Interval>,
    indicator: bool,
}

impl PenaltySpec {
    /// A penalty without interval constraint.
    pub fn unconstrained(coeffs: QuadCoeffs) -> Self {
        PenaltySpec {
            coeffs,
            constraint: None,
            indicator: false,
        }
    }

    /// A penalty with an optional constraint. A `(-inf, inf)` constraint is
    /// canonicalized away, so it compares equal to the unconstrained form.
    ///
    /// The constrained function must still be sparsity promoting: the
    /// subdifferential `[b1, b2]` has to meet the interval in more than the
    /// origin. `b1 = 0` with `hi = 0` (or the mirror image) flattens the
    /// penalty on its whole domain and is rejected.
    pub fn new(coeffs: QuadCoeffs, constraint: Option<Interval>) -> Result<Self, PenaltyError> {
        let constraint = constraint.filter(|c| !c.is_full());
        if let Some(c) = &constraint {
            let meets_right = coeffs.b2 > 0.0 && c.hi > 0.0;
            let meets_left = coeffs.b1 < 0.0 && c.lo < 0.0;
            if !meets_right && !meets_left {
                return Err(PenaltyError::RejectedInterval(
                    "subdifferential at zero meets the interval only at zero",
                ));
            }
        }
        Ok(PenaltySpec {
            coeffs,
            constraint,
            indicator: false,
        })
    }

    /// The pure indicator of an interval. This bypasses the `b2 - b1 > 0`
    /// coefficient check (the quadratic part is identically zero); instead
    /// the origin must sit on the boundary of the interval, which is exactly
    /// when the indicator is sparsity promoting.
    pub fn indicator(interval: Interval) -> Result<Self, PenaltyError> {
        if interval.lo != 0.0 && interval.hi != 0.0 {
            return Err(PenaltyError::RejectedInterval(
                "indicator requires 0 on the boundary of the interval",
            ));
        }
        Ok(PenaltySpec {
            coeffs: QuadCoeffs::zero(),
            constraint: Some(interval),
            indicator: true,
        })
    }

    /// `|x|`: soft thresholding base, the MCP generator.
    pub fn abs() -> Self {
        PenaltySpec::unconstrained(QuadCoeffs::new(0.0, 0.0, -1.0, 1.0).unwrap())
    }

    /// `max(0, x)`: the one-sided ramp.
    pub fn relu() -> Self {
        PenaltySpec::unconstrained(QuadCoeffs::new(0.0, 0.0, 0.0, 1.0).unwrap())
    }

    /// `x^2/2 + |x|`: the naive elastic net.
    pub fn elastic_net() -> Self {
        PenaltySpec::unconstrained(QuadCoeffs::new(1.0, 1.0, -1.0, 1.0).unwrap())
    }

    /// `|x|` restricted to `[-lambda, lambda]`, `lambda > 0`.
    pub fn abs_on_interval(lambda: f64) -> Result<Self, PenaltyError> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(PenaltyError::RejectedInterval("lambda must be positive"));
        }
        PenaltySpec::new(
            QuadCoeffs::new(0.0, 0.0, -1.0, 1.0).unwrap(),
            Some(Interval::new(-lambda, lambda)?),
        )
    }

    pub fn coeffs(&self) -> &QuadCoeffs {
        &self.coeffs
    }

    pub fn constraint(&self) -> Option<&Interval> {
        self.constraint.as_ref()
    }

    pub fn is_indicator(&self) -> bool {
        self.indicator
    }

    /// Evaluates the penalty, `+inf` outside the constraint interval.
    pub fn eval(&self, x: f64) -> ExtReal {
        debug_assert!(x.is_finite());
        if let Some(c) = &self.constraint {
            if !c.contains(x) {
                return ExtReal::PosInf;
            }
        }
        ExtReal::Finite(self.coeffs.quad(x))
    }

    /// The spec describing `x -> f(-x)`: mirrored coefficients and mirrored
    /// constraint interval. All invariants are symmetric, so no revalidation
    /// is needed.
    pub(crate) fn mirrored(&self) -> Self {
        PenaltySpec {
            coeffs: self.coeffs.mirrored(),
            constraint: self.constraint.map(|c| Interval {
                lo: -c.hi,
                hi: -c.lo,
            }),
            indicator: self.indicator,
        }
    }

    /// Endpoints of the subdifferential at the origin.
    ///
    /// For the quadratic family this is `(b1, b2)`, unaffected by the
    /// constraint. For the pure indicator it is the normal cone of the
    /// interval at zero, so one endpoint is infinite.
    pub fn subdiff_at_zero(&self) -> (f64, f64) {
        if self.indicator {
            let c = self.constraint.expect("indicator always carries an interval");
            if c.lo == 0.0 {
                (f64::NEG_INFINITY, 0.0)
            } else {
                (0.0, f64::INFINITY)
            }
        } else {
            (self.coeffs.b1, self.coeffs.b2)
        }
    }
}

/// The l0 counting penalty on the line: 1 for any nonzero input, 0 at zero.
/// The zero test is exact, with no tolerance.
pub fn eval_l0(x: f64) -> f64 {
    debug_assert!(x.is_finite());
    if x != 0.0 {
        1.0
    } else {
        0.0
    }
}

// JSON penalty-spec document:
//   {"a1":num,"a2":num,"b1":num,"b2":num,"interval":[lo,hi]|null}
// Interval endpoints may be the strings "inf"/"-inf"; the coefficient fields
// are finite by validation and stay plain numbers.

#[derive(Serialize, Deserialize)]
struct SpecDocument {
    a1: f64,
    a2: f64,
    b1: f64,
    b2: f64,
    interval: Option<[RawEndpoint; 2]>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum RawEndpoint {
    Num(f64),
    Tag(String),
}

impl RawEndpoint {
    fn to_f64(&self) -> Result<f64, PenaltyError> {
        match self {
            RawEndpoint::Num(v) => Ok(*v),
            RawEndpoint::Tag(s) => match s.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                other => Err(PenaltyError::Document(format!(
                    "unknown interval endpoint token {other:?} (expected \"inf\" or \"-inf\")"
                ))),
            },
        }
    }

    fn from_f64(v: f64) -> Self {
        if v == f64::INFINITY {
            RawEndpoint::Tag("inf".to_owned())
        } else if v == f64::NEG_INFINITY {
            RawEndpoint::Tag("-inf".to_owned())
        } else {
            RawEndpoint::Num(v)
        }
    }
}

impl PenaltySpec {
    /// Parses and validates a JSON penalty-spec document.
    pub fn from_json(text: &str) -> Result<Self, PenaltyError> {
        let doc: SpecDocument =
            serde_json::from_str(text).map_err(|e| PenaltyError::Document(e.to_string()))?;
        let coeffs = QuadCoeffs::new(doc.a1, doc.a2, doc.b1, doc.b2)?;
        let constraint = match doc.interval {
            None => None,
            Some([lo, hi]) => Some(Interval::new(lo.to_f64()?, hi.to_f64()?)?),
        };
        PenaltySpec::new(coeffs, constraint)
    }

    /// Serializes back to the JSON document form. Indicator specs are an
    /// API-level construction and have no document encoding.
    pub fn to_json(&self) -> String {
        let doc = SpecDocument {
            a1: self.coeffs.a1,
            a2: self.coeffs.a2,
            b1: self.coeffs.b1,
            b2: self.coeffs.b2,
            interval: self
                .constraint
                .map(|c| [RawEndpoint::from_f64(c.lo), RawEndpoint::from_f64(c.hi)]),
        };
        serde_json::to_string(&doc).expect("spec document serialization cannot fail")
    }
}
