//! Brute-force verification of the closed forms: grid minimization of
//! `u -> g(u) + (u - x)^2 / (2 t)` for any evaluable scalar function, plus
//! discrete convexity probes and an empirical zero-set scanner.
//!
//! Everything here is deliberately independent of the closed-form prox and
//! envelope code paths it is used to check.

use crate::moreau::eval_falpha;
use crate::penalty::{ExtReal, PenaltySpec};
use crate::semiconvex::ProxResult;

/// Search parameters for the grid minimizer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub n_coarse: usize,
    pub n_refine: usize,
    pub tol: f64,
}

/// Points per refinement window; each pass shrinks the spacing by 20x.
const WINDOW_POINTS: usize = 81;
/// At most this many refinement windows per pass.
const MAX_WINDOWS: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum OracleError {
    /// The function is `+inf` everywhere on the search window.
    #[error("objective has empty domain on the search window")]
    EmptyDomain,
    /// Grid parameters outside their invariants.
    #[error("invalid grid: {0}")]
    InvalidGrid(&'static str),
}

impl GridSpec {
    pub fn new(
        lo: f64,
        hi: f64,
        n_coarse: usize,
        n_refine: usize,
        tol: f64,
    ) -> Result<Self, OracleError> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(OracleError::InvalidGrid("needs finite lo < hi"));
        }
        if n_coarse < 1000 {
            return Err(OracleError::InvalidGrid("n_coarse must be at least 1000"));
        }
        if !(tol > 0.0) {
            return Err(OracleError::InvalidGrid("tol must be positive"));
        }
        Ok(GridSpec {
            lo,
            hi,
            n_coarse,
            n_refine,
            tol,
        })
    }

    /// Default search for a prox query at `x`: the minimizers live in the
    /// ball of radius `|x|` around `x`, so `[x - |x| - 1, x + |x| + 1]`
    /// covers them with margin.
    pub fn for_query(x: f64) -> Self {
        GridSpec {
            lo: x - x.abs() - 1.0,
            hi: x + x.abs() + 1.0,
            n_coarse: 20001,
            n_refine: 3,
            tol: 1e-9,
        }
    }

    fn coarse_step(&self) -> f64 {
        (self.hi - self.lo) / (self.n_coarse - 1) as f64
    }

    fn final_step(&self) -> f64 {
        self.coarse_step() / 20f64.powi(self.n_refine as i32)
    }
}

struct Minimization {
    /// Near-minimal points after clustering, sorted ascending.
    points: Vec<f64>,
    /// Smallest objective value seen.
    min: f64,
}

#[derive(Clone, Copy)]
struct Cluster {
    lo: f64,
    best: f64,
    best_value: f64,
    hi: f64,
}

fn near_minimal(pool: &[(f64, f64)], threshold: f64) -> Vec<(f64, f64)> {
    let mut out: Vec<(f64, f64)> = pool.iter().copied().filter(|&(_, v)| v <= threshold).collect();
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

/// Groups sorted points into runs separated by more than `gap`.
fn cluster(sorted: &[(f64, f64)], gap: f64) -> Vec<Cluster> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        let mut best = sorted[i];
        while j + 1 < sorted.len() && sorted[j + 1].0 - sorted[j].0 <= gap {
            j += 1;
            if sorted[j].1 < best.1 {
                best = sorted[j];
            }
        }
        out.push(Cluster {
            lo: sorted[i].0,
            best: best.0,
            best_value: best.1,
            hi: sorted[j].0,
        });
        i = j + 1;
    }
    out
}

fn rank_by_value(mut groups: Vec<Cluster>, cap: usize) -> Vec<Cluster> {
    groups.sort_by(|a, b| a.best_value.total_cmp(&b.best_value));
    groups.truncate(cap);
    groups
}

fn minimize(
    g: impl Fn(f64) -> ExtReal,
    t: f64,
    x: f64,
    grid: &GridSpec,
) -> Result<Minimization, OracleError> {
    assert!(t.is_finite() && t > 0.0, "prox step must be positive");
    assert!(x.is_finite());
    let phi = |u: f64| -> Option<f64> {
        g(u).finite().map(|v| v + (u - x) * (u - x) / (2.0 * t))
    };

    let h0 = grid.coarse_step();
    let mut pool: Vec<(f64, f64)> = Vec::with_capacity(grid.n_coarse);
    for i in 0..grid.n_coarse {
        let u = grid.lo + h0 * i as f64;
        if let Some(v) = phi(u) {
            pool.push((u, v));
        }
    }
    if pool.is_empty() {
        return Err(OracleError::EmptyDomain);
    }

    // Quantization slack: a grid point next to a true minimizer can sit
    // above it by about half the largest local second difference, so
    // candidates are admitted generously during window selection and only
    // the final filter applies `tol`.
    let mut max_second_diff: f64 = 0.0;
    for w in pool.windows(3) {
        let [(u0, v0), (u1, v1), (u2, v2)] = [w[0], w[1], w[2]];
        if (u1 - u0 - h0).abs() < 0.5 * h0 && (u2 - u1 - h0).abs() < 0.5 * h0 {
            max_second_diff = max_second_diff.max((v0 - 2.0 * v1 + v2).abs());
        }
    }
    let mut min = pool.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let mut h = h0;
    for _ in 0..grid.n_refine {
        // Cluster the near-minimal points and refine around each cluster's
        // extremes and its best point. The admission slack shrinks with the
        // resolution: each basin's best pool point tracks its true minimum
        // to within about max_second_diff * (h / h0) once the basin has been
        // refined at the previous pass.
        let slack = grid.tol.max(2.0 * max_second_diff * (h / h0));
        let cands = near_minimal(&pool, min + slack);
        let groups = cluster(&cands, (2.5 * h).max(4.0 * h0));
        let mut centers: Vec<f64> = Vec::new();
        for g in rank_by_value(groups, MAX_WINDOWS) {
            centers.extend([g.lo, g.best, g.hi]);
        }
        centers.sort_by(|a, b| a.total_cmp(b));
        centers.dedup_by(|a, b| (*a - *b).abs() < 0.25 * h);

        let fine = h / 20.0;
        for &c in &centers {
            let lo = (c - 2.0 * h).max(grid.lo);
            let hi = (c + 2.0 * h).min(grid.hi);
            for k in 0..WINDOW_POINTS {
                let u = lo + (hi - lo) * k as f64 / (WINDOW_POINTS - 1) as f64;
                if let Some(v) = phi(u) {
                    min = min.min(v);
                    pool.push((u, v));
                }
            }
        }
        h = fine;
    }

    // Terminal polish: grid values converge only linearly at kink-type
    // minimizers (gap ~ slope * h, about max_second_diff / 20^n_refine),
    // which would stall above tol. A short ternary search over each
    // candidate cluster closes the gap; polished points are added to the
    // pool, never removed from it.
    let polish_slack = grid.tol.max(max_second_diff / 20f64.powi(grid.n_refine as i32));
    let targets = near_minimal(&pool, min + polish_slack);
    let groups = cluster(&targets, 4.0 * h0);
    let val = |u: f64| phi(u).unwrap_or(f64::INFINITY);
    for g in rank_by_value(groups, MAX_WINDOWS) {
        let mut a = (g.lo - 2.0 * h0).max(grid.lo);
        let mut b = (g.hi + 2.0 * h0).min(grid.hi);
        let eps = 1e-13 * g.best.abs().max(1.0);
        while b - a > eps {
            let m1 = a + (b - a) / 3.0;
            let m2 = b - (b - a) / 3.0;
            if val(m1) <= val(m2) {
                b = m2;
            } else {
                a = m1;
            }
        }
        let u = 0.5 * (a + b);
        if let Some(v) = phi(u) {
            min = min.min(v);
            pool.push((u, v));
        }
    }

    // Final filter at tol, then cluster keeping the best representative of
    // each cluster. The radius covers the tol-level basin around a single
    // minimizer (width sqrt(2 t tol) since the coupling term alone curves at
    // 1/t), so one minimizer yields one representative while distinct
    // minimizers and flat stretches stay apart.
    let mut finals: Vec<(f64, f64)> = pool
        .into_iter()
        .filter(|&(_, v)| v <= min + grid.tol)
        .collect();
    finals.sort_by(|a, b| a.0.total_cmp(&b.0));
    let radius = (4.0 * grid.final_step()).max(2.0 * (2.0 * t * grid.tol).sqrt());
    let mut points = Vec::new();
    let mut i = 0;
    while i < finals.len() {
        let mut j = i;
        let mut best = finals[i];
        while j + 1 < finals.len() && finals[j + 1].0 - finals[j].0 <= radius {
            j += 1;
            if finals[j].1 < best.1 {
                best = finals[j];
            }
        }
        points.push(best.0);
        i = j + 1;
    }
    Ok(Minimization { points, min })
}

/// All near-minimizers of `u -> g(u) + (u - x)^2 / (2 t)` found on the
/// refined grid, clustered and sorted. `+inf` values never enter the argmin.
pub fn grid_prox(
    g: impl Fn(f64) -> ExtReal,
    t: f64,
    x: f64,
    grid: &GridSpec,
) -> Result<Vec<f64>, OracleError> {
    minimize(g, t, x, grid).map(|m| m.points)
}

/// The grid minimum of the same objective: a brute-force Moreau envelope.
pub fn grid_env(
    g: impl Fn(f64) -> ExtReal,
    t: f64,
    x: f64,
    grid: &GridSpec,
) -> Result<f64, OracleError> {
    minimize(g, t, x, grid).map(|m| m.min)
}

/// Minimum second difference `g(x - h) - 2 g(x) + g(x + h)` over the
/// interior of a uniform grid. Nonnegative values certify discrete convexity
/// at resolution `h`.
pub fn second_difference_min(
    g: impl Fn(f64) -> ExtReal,
    lo: f64,
    hi: f64,
    n: usize,
) -> Result<f64, OracleError> {
    assert!(n >= 3, "need at least three grid points");
    assert!(lo.is_finite() && hi.is_finite() && lo < hi);
    let h = (hi - lo) / (n - 1) as f64;
    let values: Vec<ExtReal> = (0..n).map(|i| g(lo + h * i as f64)).collect();
    let mut min = f64::INFINITY;
    for i in 1..n - 1 {
        if let (Some(a), Some(b), Some(c)) = (
            values[i - 1].finite(),
            values[i].finite(),
            values[i + 1].finite(),
        ) {
            min = min.min(a - 2.0 * b + c);
        }
    }
    if min.is_finite() {
        Ok(min)
    } else {
        Err(OracleError::EmptyDomain)
    }
}

/// Empirically locates the maximal interval around the origin on which the
/// prox of `f_alpha` (step `beta`) returns only zero. The scan covers
/// `[grid.lo, grid.hi]` and refines each endpoint by bisection, so the
/// returned endpoints approximate the instance's true sparsity thresholds.
pub fn zero_set_scan(spec: &PenaltySpec, alpha: f64, beta: f64, grid: &GridSpec) -> (f64, f64) {
    let only_zero = |x: f64| -> bool {
        if x == 0.0 {
            return true;
        }
        let inner = GridSpec {
            lo: x - x.abs() - 1.0,
            hi: x + x.abs() + 1.0,
            n_coarse: grid.n_coarse.min(4001),
            n_refine: grid.n_refine,
            tol: grid.tol,
        };
        let pts = grid_prox(|u| eval_falpha(spec, alpha, u), beta, x, &inner)
            .expect("f_alpha is finite at the origin, which the window contains");
        pts.iter().all(|p| p.abs() <= 1e-5 * x.abs().max(1.0))
    };

    let endpoint = |limit: f64| -> f64 {
        let steps = 64;
        let mut good = 0.0;
        let mut bad = None;
        for i in 1..=steps {
            let x = limit * i as f64 / steps as f64;
            if only_zero(x) {
                good = x;
            } else {
                bad = Some(x);
                break;
            }
        }
        match bad {
            None => good,
            Some(mut b) => {
                let mut a = good;
                for _ in 0..50 {
                    let mid = 0.5 * (a + b);
                    if only_zero(mid) {
                        a = mid;
                    } else {
                        b = mid;
                    }
                }
                0.5 * (a + b)
            }
        }
    };

    (endpoint(grid.lo), endpoint(grid.hi))
}

/// Deviation between a closed-form prox result and the oracle's point set.
///
/// Two directions: every returned point must be a genuine minimizer (close
/// to an oracle point, or exactly minimal by objective value), and every
/// oracle point must be covered by the result. Oracle points that are merely
/// near-minimal, with an objective gap above the numerical noise floor, are
/// bystanders admitted by the oracle's own tolerance and do not count as
/// missed minimizers.
pub fn prox_deviation(
    result: &ProxResult,
    oracle_points: &[f64],
    objective: impl Fn(f64) -> f64,
    oracle_min: f64,
    tol: f64,
) -> f64 {
    let scale = oracle_min.abs().max(1.0);
    let value_floor = tol.max(1e-12 * scale);
    let mut dev: f64 = 0.0;

    let mut returned = result.points();
    if let ProxResult::Segment(lo, hi) = result {
        returned.push(0.5 * (lo + hi));
    }
    for p in returned {
        let positional = oracle_points
            .iter()
            .map(|q| (q - p).abs())
            .fold(f64::INFINITY, f64::min);
        let by_value = if objective(p) - oracle_min <= value_floor {
            0.0
        } else {
            f64::INFINITY
        };
        dev = dev.max(positional.min(by_value));
    }

    for &q in oracle_points {
        if objective(q) - oracle_min > 1e-10 * scale {
            continue;
        }
        dev = dev.max(result.distance(q));
    }
    dev
}
