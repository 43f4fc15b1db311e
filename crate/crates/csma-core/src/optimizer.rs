//! Feasibility of arrival-rate vectors, the unique exponent vector matching
//! service rates to arrivals, and capacity-region bounds.
//!
//! An arrival vector is feasible when some time-sharing of independent sets
//! serves it; it is strictly feasible when it lies in the interior of that
//! region. For every strictly feasible vector there is exactly one exponent
//! vector `r*` with `s(r*) = lambda`, found here by maximizing the concave
//! objective `L(r; lambda)` with a damped Newton ascent.

use crate::error::{Error, Result};
use crate::graph::{independent_sets, ConflictGraph};
use crate::linalg::solve_dense;
use crate::simplex::{Lp, Sense};
use crate::stationary::{Analyzer, LengthExponents, ProtocolParams};

/// Per-link arrival rates as fractions of slot capacity, each in (0,1).
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ArrivalRates(pub Vec<f64>);

impl ArrivalRates {
    pub fn uniform(num_links: usize, lambda: f64) -> Self {
        Self(vec![lambda; num_links])
    }

    /// Component-wise scaling, e.g. a load factor times a base vector.
    pub fn scaled(base: &[f64], rho: f64) -> Self {
        Self(base.iter().map(|&l| rho * l).collect())
    }

    pub fn validate(&self, num_links: usize) -> Result<()> {
        if self.0.len() != num_links {
            return Err(Error::DimensionMismatch {
                what: "arrival rates",
                expected: num_links,
                got: self.0.len(),
            });
        }
        for (k, &l) in self.0.iter().enumerate() {
            if !(l > 0.0 && l < 1.0) {
                return Err(Error::Domain(format!(
                    "arrival rate lambda[{}] = {l} must lie in (0,1)",
                    k + 1
                )));
            }
        }
        Ok(())
    }
}

/// Classification of an arrival vector against the feasible region.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeasibilityStatus {
    Infeasible,
    Boundary,
    StrictlyFeasible,
}

/// Result of the feasibility linear program.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct FeasibilityReport {
    pub status: FeasibilityStatus,
    /// Largest `t` such that some independent-set schedule dominates
    /// `lambda + t` on every link. Negative when infeasible.
    pub margin: f64,
}

/// Margins within this tolerance of zero classify as boundary.
pub const FEASIBILITY_TOL: f64 = 1e-9;

/// Classify `lambda` against the capacity region of `g`.
///
/// Solves `max t` subject to a convex combination of independent sets
/// dominating `lambda + t` component-wise. Because the region is
/// downward-closed (non-maximal sets are allowed), a positive margin is
/// equivalent to topological interiority.
pub fn feasibility(g: &ConflictGraph, lambda: &ArrivalRates) -> Result<FeasibilityReport> {
    lambda.validate(g.num_links())?;
    let margin = feasibility_margin(g, &lambda.0)?;
    Ok(report_from_margin(margin))
}

fn report_from_margin(margin: f64) -> FeasibilityReport {
    let status = if margin > FEASIBILITY_TOL {
        FeasibilityStatus::StrictlyFeasible
    } else if margin < -FEASIBILITY_TOL {
        FeasibilityStatus::Infeasible
    } else {
        FeasibilityStatus::Boundary
    };
    FeasibilityReport { status, margin }
}

/// The raw max-margin LP, without the (0,1) domain restriction; boundary
/// vectors with unit components are admissible here.
pub(crate) fn feasibility_margin(g: &ConflictGraph, lambda: &[f64]) -> Result<f64> {
    if lambda.len() != g.num_links() {
        return Err(Error::DimensionMismatch {
            what: "arrival rates",
            expected: g.num_links(),
            got: lambda.len(),
        });
    }
    let sets = independent_sets(g)?;
    let n = sets.len();
    let k = g.num_links();
    // Variables: schedule weights (n), then t+ and t-.
    let mut objective = vec![0.0; n + 2];
    objective[n] = 1.0;
    objective[n + 1] = -1.0;
    let mut lp = Lp::new(n + 2, objective);
    for link in 0..k {
        let mut row = vec![0.0; n + 2];
        for (j, set) in sets.iter().enumerate() {
            if set.is_active(link) {
                row[j] = 1.0;
            }
        }
        row[n] = -1.0;
        row[n + 1] = 1.0;
        lp.add_row(row, Sense::Ge, lambda[link]);
    }
    let mut total = vec![0.0; n + 2];
    total[..n].fill(1.0);
    lp.add_row(total, Sense::Eq, 1.0);
    let sol = lp.solve()?;
    Ok(sol.objective)
}

/// Options for [`solve_rstar`].
#[derive(Debug, Clone)]
pub struct SolveOptions {
    /// Stop when `max_k |lambda_k - s_k(r)|` falls below this.
    pub tol: f64,
    pub max_iter: usize,
    /// Starting exponents; zeros when absent.
    pub initial: Option<Vec<f64>>,
    /// Record the objective value of each accepted iterate.
    pub record_trace: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_iter: 100_000,
            initial: None,
            record_trace: false,
        }
    }
}

/// Solution of the rate-matching problem.
#[derive(Debug, Clone)]
pub struct RStarResult {
    pub r_star: LengthExponents,
    /// `max_k |s_k(r*) - lambda_k|` at the returned point.
    pub residual: f64,
    pub iterations: usize,
    /// Objective values of accepted iterates when requested.
    pub objective_trace: Vec<f64>,
}

/// Newton is used up to this many links; plain gradient ascent beyond.
const NEWTON_MAX_LINKS: usize = 16;

/// Find the unique `r*` with `s(r*) = lambda` for a strictly feasible
/// `lambda`, by line-searched ascent on `L(r; lambda)`.
pub fn solve_rstar(
    g: &ConflictGraph,
    params: &ProtocolParams,
    lambda: &ArrivalRates,
    opts: &SolveOptions,
) -> Result<RStarResult> {
    let report = feasibility(g, lambda)?;
    if report.status != FeasibilityStatus::StrictlyFeasible {
        return Err(Error::NotStrictlyFeasible {
            margin: report.margin,
        });
    }
    let analyzer = Analyzer::new(g, params.clone())?;
    solve_rstar_with(&analyzer, &lambda.0, opts)
}

/// Ascent loop against a prebuilt analyzer; the caller guarantees strict
/// feasibility.
pub fn solve_rstar_with(
    analyzer: &Analyzer,
    lambda: &[f64],
    opts: &SolveOptions,
) -> Result<RStarResult> {
    let k = analyzer.num_links();
    let mut r = LengthExponents(match &opts.initial {
        Some(init) => {
            if init.len() != k {
                return Err(Error::DimensionMismatch {
                    what: "initial exponents",
                    expected: k,
                    got: init.len(),
                });
            }
            init.clone()
        }
        None => vec![0.0; k],
    });
    let mut trace = Vec::new();
    let (mut value, mut grad) = analyzer.log_likelihood(&r, lambda)?;
    if opts.record_trace {
        trace.push(value);
    }
    let mut best = (r.0.clone(), inf_norm(&grad));
    for iter in 0..opts.max_iter {
        let residual = inf_norm(&grad);
        if residual < best.1 {
            best = (r.0.clone(), residual);
        }
        if residual <= opts.tol {
            return Ok(RStarResult {
                r_star: r,
                residual,
                iterations: iter,
                objective_trace: trace,
            });
        }
        let direction = if k <= NEWTON_MAX_LINKS {
            newton_direction(analyzer, &r, &grad).unwrap_or_else(|| grad.clone())
        } else {
            grad.clone()
        };
        // Near the optimum the objective improvements underflow, so the
        // Armijo test cannot see them; accept a pure Newton step whenever
        // it contracts the residual.
        if residual < 1e-5 && k <= NEWTON_MAX_LINKS {
            let candidate = LengthExponents(
                r.0.iter()
                    .zip(&direction)
                    .map(|(&ri, &di)| ri + di)
                    .collect(),
            );
            if let Ok((v, g)) = analyzer.log_likelihood(&candidate, lambda) {
                if inf_norm(&g) < residual {
                    r = candidate;
                    value = v;
                    grad = g;
                    if opts.record_trace {
                        trace.push(value);
                    }
                    continue;
                }
            }
        }
        // Backtracking line search (Armijo).
        let slope: f64 = grad.iter().zip(&direction).map(|(g, d)| g * d).sum();
        let slope = if slope > 0.0 {
            slope
        } else {
            // Fall back to the gradient if the direction is not an ascent
            // direction (numerically degenerate Hessian).
            let g2: f64 = grad.iter().map(|g| g * g).sum();
            g2
        };
        let mut step = 1.0f64;
        let mut accepted = false;
        for _ in 0..70 {
            let candidate = LengthExponents(
                r.0.iter()
                    .zip(&direction)
                    .map(|(&ri, &di)| ri + step * di)
                    .collect(),
            );
            match analyzer.log_likelihood(&candidate, lambda) {
                Ok((v, g)) if v >= value + 1e-4 * step * slope => {
                    r = candidate;
                    value = v;
                    grad = g;
                    accepted = true;
                    break;
                }
                _ => step *= 0.5,
            }
        }
        if opts.record_trace {
            trace.push(value);
        }
        if !accepted {
            // No progress possible at machine precision.
            let residual = inf_norm(&grad);
            if residual <= opts.tol {
                return Ok(RStarResult {
                    r_star: r,
                    residual,
                    iterations: iter + 1,
                    objective_trace: trace,
                });
            }
            return Err(Error::NoConvergence {
                iterations: iter + 1,
                residual: best.1,
                best: best.0,
            });
        }
    }
    Err(Error::NoConvergence {
        iterations: opts.max_iter,
        residual: best.1,
        best: best.0,
    })
}

fn newton_direction(analyzer: &Analyzer, r: &LengthExponents, grad: &[f64]) -> Option<Vec<f64>> {
    let mut h = analyzer.log_e_hessian(r).ok()?;
    let k = grad.len();
    // Tiny ridge keeps the solve stable when the covariance is nearly
    // singular at extreme exponents.
    let ridge = 1e-12 * (1.0 + h.iter().enumerate().map(|(i, row)| row[i]).sum::<f64>());
    for (i, row) in h.iter_mut().enumerate() {
        row[i] += ridge;
    }
    solve_dense(h, grad.to_vec()).ok().filter(|d| d.len() == k)
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// True iff every component of `r*(lambda)` lies strictly inside
/// `(r_min, r_max)`.
pub fn region_check(
    g: &ConflictGraph,
    params: &ProtocolParams,
    lambda: &ArrivalRates,
    r_min: f64,
    r_max: f64,
) -> Result<bool> {
    let result = solve_rstar(g, params, lambda, &SolveOptions::default())?;
    Ok(result
        .r_star
        .0
        .iter()
        .all(|&rk| rk > r_min && rk < r_max))
}

/// Per-link lower bound on `r*`: `log((tau'/t0) * lambda_k / (1 - lambda_k))`.
///
/// Even a link transmitting all the time pays the overhead `tau'` per
/// success, so its payload share cannot exceed `T^p/(tau' + T^p)`.
pub fn r_lower_bound(params: &ProtocolParams, lambda: &ArrivalRates) -> Result<Vec<f64>> {
    lambda.validate(lambda.0.len())?;
    let ratio = params.tau_prime as f64 / params.t0;
    Ok(lambda
        .0
        .iter()
        .map(|&l| (ratio * l / (1.0 - l)).ln())
        .collect())
}

/// Cap on the number of detailed states for the capacity bound; the
/// extreme-point enumeration is exponential in spirit and intentionally
/// restricted to tiny instances.
pub const THEOREM4_STATE_CAP: usize = 64;

/// Capacity-region upper bound evaluated at `(1 - epsilon) * lambda_bar`.
#[derive(Debug, Clone)]
pub struct CapacityBound {
    /// Upper bound on `lambda_bar . r*((1 - epsilon) lambda_bar)`.
    pub value: f64,
    /// Polytope constant from the extreme-point enumeration.
    pub b: f64,
    /// Max absolute log-weight over detailed states.
    pub g_max: f64,
    pub num_detailed_states: usize,
    /// Whether the `epsilon <= 1/b` branch was used.
    pub small_epsilon_branch: bool,
}

/// Bound `lambda_bar . r*((1-eps) lambda_bar)` for a boundary direction
/// `lambda_bar > 0`.
///
/// The constant `b` comes from enumerating the extreme points of the
/// polytope of detailed-state distributions whose served rates are scalar
/// multiples of `lambda_bar`, and measuring how far each sits (in L1) from
/// the slice that serves `lambda_bar` exactly.
pub fn theorem4_bound(
    g: &ConflictGraph,
    params: &ProtocolParams,
    lambda_bar: &[f64],
    epsilon: f64,
) -> Result<CapacityBound> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::Domain(format!(
            "epsilon = {epsilon} must lie in (0,1)"
        )));
    }
    if lambda_bar.iter().any(|&l| !(l > 0.0 && l <= 1.0)) {
        return Err(Error::Domain(
            "boundary direction must have components in (0,1]".into(),
        ));
    }
    let margin = feasibility_margin(g, lambda_bar)?;
    if margin.abs() > FEASIBILITY_TOL {
        return Err(Error::Domain(format!(
            "lambda_bar is not on the boundary of the feasible region (margin {margin:.3e})"
        )));
    }
    let analyzer = Analyzer::new(g, params.clone())?;
    let states = analyzer.detailed_states()?;
    let n_states = states.len();
    if n_states > THEOREM4_STATE_CAP {
        return Err(Error::CapacityExceeded {
            what: "capacity-bound detailed states",
            cap: THEOREM4_STATE_CAP,
            requested: n_states,
        });
    }
    let k = g.num_links();
    // A[link][state] = 1 iff the link sends payload in that detailed state.
    let a: Vec<Vec<f64>> = (0..k)
        .map(|link| {
            states
                .iter()
                .map(|st| if st.z & (1 << link) != 0 { 1.0 } else { 0.0 })
                .collect()
        })
        .collect();
    let g_max = states
        .iter()
        .map(|st| analyzer.log_g_detailed(st).abs())
        .fold(0.0f64, f64::max);

    let vertices = enumerate_scaled_slice_vertices(&a, lambda_bar, n_states)?;
    let mut b = 0.0f64;
    for (u, rho) in &vertices {
        if *rho < 1.0 - 1e-12 {
            let d = l1_distance_to_slice(&a, lambda_bar, u)?;
            b = b.max(0.5 * d / (1.0 - rho));
        }
    }
    if !(b > 0.0) {
        return Err(Error::Solver(
            "degenerate polytope: no extreme point below the boundary slice".into(),
        ));
    }
    let n_f = n_states as f64;
    let (value, small_branch) = if epsilon <= 1.0 / b {
        (
            b * ((1.0 / epsilon).ln() + (n_f / b).ln() + 2.0 * g_max + 1.0),
            true,
        )
    } else {
        ((n_f.ln() + 2.0 * g_max) / epsilon, false)
    };
    Ok(CapacityBound {
        value,
        b,
        g_max,
        num_detailed_states: n_states,
        small_epsilon_branch: small_branch,
    })
}

/// Vertices (u, rho) of `{u >= 0, sum u = 1, A u = rho lambda_bar,
/// 0 <= rho <= 1}`, via exhaustive basis enumeration of the lifted system.
fn enumerate_scaled_slice_vertices(
    a: &[Vec<f64>],
    lambda_bar: &[f64],
    n_states: usize,
) -> Result<Vec<(Vec<f64>, f64)>> {
    let k = lambda_bar.len();
    let m = k + 2; // equality rows
    let n = n_states + 2; // u..., rho, slack for rho <= 1
    // Row-major constraint matrix.
    let mut mat = vec![vec![0.0f64; n]; m];
    let mut rhs = vec![0.0f64; m];
    for link in 0..k {
        for s in 0..n_states {
            mat[link][s] = a[link][s];
        }
        mat[link][n_states] = -lambda_bar[link];
    }
    for s in 0..n_states {
        mat[k][s] = 1.0;
    }
    rhs[k] = 1.0;
    mat[k + 1][n_states] = 1.0;
    mat[k + 1][n_states + 1] = 1.0;
    rhs[k + 1] = 1.0;

    let mut vertices: Vec<(Vec<f64>, f64)> = Vec::new();
    let mut seen: std::collections::HashSet<Vec<i64>> = std::collections::HashSet::new();
    let mut combo: Vec<usize> = (0..m).collect();
    loop {
        // Solve for the basic variables in `combo`.
        let sub: Vec<Vec<f64>> = (0..m)
            .map(|i| combo.iter().map(|&j| mat[i][j]).collect())
            .collect();
        if let Ok(xb) = solve_dense(sub, rhs.clone()) {
            if xb.iter().all(|&v| v >= -1e-9) {
                let mut full = vec![0.0f64; n];
                for (slot, &j) in combo.iter().enumerate() {
                    full[j] = xb[slot].max(0.0);
                }
                let key: Vec<i64> = full.iter().map(|&v| (v * 1e9).round() as i64).collect();
                if seen.insert(key) {
                    let rho = full[n_states];
                    vertices.push((full[..n_states].to_vec(), rho));
                }
            }
        }
        // Next m-combination of n columns.
        let mut i = m;
        loop {
            if i == 0 {
                return Ok(vertices);
            }
            i -= 1;
            if combo[i] != i + n - m {
                combo[i] += 1;
                for j in (i + 1)..m {
                    combo[j] = combo[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// `min ||u - z||_1` over distributions `z` with `A z = lambda_bar`.
fn l1_distance_to_slice(a: &[Vec<f64>], lambda_bar: &[f64], u: &[f64]) -> Result<f64> {
    let n = u.len();
    let k = lambda_bar.len();
    // Variables: z (n), e (n); minimize sum e.
    let mut objective = vec![0.0f64; 2 * n];
    objective[n..].fill(-1.0);
    let mut lp = Lp::new(2 * n, objective);
    for i in 0..n {
        // z_i + e_i >= u_i  and  z_i - e_i <= u_i
        let mut row = vec![0.0; 2 * n];
        row[i] = 1.0;
        row[n + i] = 1.0;
        lp.add_row(row, Sense::Ge, u[i]);
        let mut row = vec![0.0; 2 * n];
        row[i] = 1.0;
        row[n + i] = -1.0;
        lp.add_row(row, Sense::Le, u[i]);
    }
    for link in 0..k {
        let mut row = vec![0.0; 2 * n];
        row[..n].copy_from_slice(&a[link]);
        lp.add_row(row, Sense::Eq, lambda_bar[link]);
    }
    let mut total = vec![0.0; 2 * n];
    total[..n].fill(1.0);
    lp.add_row(total, Sense::Eq, 1.0);
    let sol = lp.solve()?;
    Ok(-sol.objective)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path3() -> ConflictGraph {
        ConflictGraph::path(3).unwrap()
    }

    #[test]
    fn path_boundary_point() {
        let report = feasibility(&path3(), &ArrivalRates::uniform(3, 0.5)).unwrap();
        assert_eq!(report.status, FeasibilityStatus::Boundary);
        assert!(report.margin.abs() <= FEASIBILITY_TOL);
    }

    #[test]
    fn path_strictly_feasible_point() {
        let report = feasibility(&path3(), &ArrivalRates::uniform(3, 0.49)).unwrap();
        assert_eq!(report.status, FeasibilityStatus::StrictlyFeasible);
        assert!((report.margin - 0.01).abs() < 1e-8);
    }

    #[test]
    fn path_infeasible_point() {
        let report = feasibility(&path3(), &ArrivalRates::uniform(3, 0.6)).unwrap();
        assert_eq!(report.status, FeasibilityStatus::Infeasible);
        assert!(report.margin < 0.0);
    }

    #[test]
    fn rates_outside_unit_interval_are_domain_errors() {
        let err = feasibility(&path3(), &ArrivalRates::uniform(3, 1.01)).unwrap_err();
        assert!(matches!(err, Error::Domain(_)));
    }

    #[test]
    fn scaling_moves_margin_monotonically() {
        let g = path3();
        let base = [0.4, 0.4, 0.4];
        let mut last = f64::INFINITY;
        for rho in [0.5, 0.7, 0.9, 1.1] {
            let m = feasibility_margin(&g, &ArrivalRates::scaled(&base, rho).0).unwrap();
            assert!(m < last);
            last = m;
        }
    }

    #[test]
    fn single_link_rstar_closed_form() {
        // p = 1/16, tau' = 10, t0 = 15, lambda = 6/11 inverts to r* = ln 2.
        let g = ConflictGraph::edgeless(1).unwrap();
        let params = ProtocolParams::uniform(1, 1.0 / 16.0, 1, 10, 15.0);
        let lambda = ArrivalRates(vec![6.0 / 11.0]);
        let res = solve_rstar(&g, &params, &lambda, &SolveOptions::default()).unwrap();
        assert!(res.residual <= 1e-9);
        assert!((res.r_star.0[0] - 2.0f64.ln()).abs() < 1e-8);
    }

    #[test]
    fn symmetric_pair_gets_equal_exponents() {
        let g = ConflictGraph::complete(2).unwrap();
        let params = ProtocolParams::uniform(2, 0.1, 2, 4, 10.0);
        let lambda = ArrivalRates::uniform(2, 0.3);
        let res = solve_rstar(&g, &params, &lambda, &SolveOptions::default()).unwrap();
        assert!((res.r_star.0[0] - res.r_star.0[1]).abs() < 1e-9);
    }

    #[test]
    fn rejects_non_strictly_feasible_lambda() {
        let g = path3();
        let params = ProtocolParams::uniform(3, 0.1, 2, 4, 10.0);
        let lambda = ArrivalRates::uniform(3, 0.5);
        assert!(matches!(
            solve_rstar(&g, &params, &lambda, &SolveOptions::default()),
            Err(Error::NotStrictlyFeasible { .. })
        ));
    }

    #[test]
    fn objective_is_monotone_over_accepted_iterates() {
        let g = ConflictGraph::new(4, &[(0, 1), (1, 2), (2, 3)]).unwrap();
        let params = ProtocolParams::uniform(4, 0.15, 3, 5, 12.0);
        let lambda = ArrivalRates(vec![0.25, 0.2, 0.22, 0.3]);
        let opts = SolveOptions {
            record_trace: true,
            ..SolveOptions::default()
        };
        let res = solve_rstar(&g, &params, &lambda, &opts).unwrap();
        for w in res.objective_trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-12);
        }
    }

    #[test]
    fn region_check_single_link() {
        let g = ConflictGraph::edgeless(1).unwrap();
        let params = ProtocolParams::uniform(1, 1.0 / 16.0, 1, 10, 15.0);
        let lambda = ArrivalRates(vec![6.0 / 11.0]);
        assert!(region_check(&g, &params, &lambda, 0.0, 1.0).unwrap());
        assert!(!region_check(&g, &params, &lambda, 0.0, 0.5).unwrap());
    }

    #[test]
    fn lower_bound_matches_arithmetic() {
        // tau' = 10, t0 = 15, lambda = 0.6: log((10/15) * 1.5) = 0.
        let params = ProtocolParams::uniform(1, 0.1, 1, 10, 15.0);
        let b = r_lower_bound(&params, &ArrivalRates(vec![0.6])).unwrap();
        assert!(b[0].abs() < 1e-12);
        // Tiny lambda gives a very negative but finite bound.
        let b = r_lower_bound(&params, &ArrivalRates(vec![1e-12])).unwrap();
        assert!(b[0].is_finite() && b[0] < -20.0);
    }

    #[test]
    fn lower_bound_holds_at_solutions() {
        let g = ConflictGraph::new(3, &[(0, 1), (1, 2)]).unwrap();
        let params = ProtocolParams::uniform(3, 0.2, 2, 6, 9.0);
        for lam in [[0.3, 0.25, 0.35], [0.44, 0.3, 0.2], [0.15, 0.4, 0.28]] {
            let lambda = ArrivalRates(lam.to_vec());
            let res = solve_rstar(&g, &params, &lambda, &SolveOptions::default()).unwrap();
            let lb = r_lower_bound(&params, &lambda).unwrap();
            for k in 0..3 {
                assert!(
                    res.r_star.0[k] >= lb[k] - 1e-9,
                    "link {k}: r* {} below bound {}",
                    res.r_star.0[k],
                    lb[k]
                );
            }
        }
    }

    #[test]
    fn uniqueness_from_two_starts() {
        let g = ConflictGraph::new(4, &[(0, 1), (1, 2), (2, 3), (0, 3)]).unwrap();
        let params = ProtocolParams::uniform(4, 0.2, 2, 5, 10.0);
        let lambda = ArrivalRates(vec![0.3, 0.3, 0.3, 0.3]);
        let a = solve_rstar(&g, &params, &lambda, &SolveOptions::default()).unwrap();
        let opts = SolveOptions {
            initial: Some(vec![2.0, -1.5, 0.7, 3.0]),
            ..SolveOptions::default()
        };
        let b = solve_rstar(&g, &params, &lambda, &opts).unwrap();
        for k in 0..4 {
            assert!((a.r_star.0[k] - b.r_star.0[k]).abs() < 1e-6);
        }
    }

    #[test]
    fn dual_constraint_satisfied_at_rstar() {
        // At r*, the detailed-state distribution puts exactly lambda_k mass
        // on states where link k sends payload.
        let g = path3();
        let params = ProtocolParams::uniform(3, 0.2, 2, 4, 8.0);
        let lambda = ArrivalRates(vec![0.3, 0.35, 0.25]);
        let res = solve_rstar(&g, &params, &lambda, &SolveOptions::default()).unwrap();
        let detailed = crate::stationary::detailed_distribution(&g, &params, &res.r_star).unwrap();
        for k in 0..3 {
            let mass: f64 = detailed
                .states
                .iter()
                .zip(&detailed.probs)
                .filter(|(st, _)| st.z & (1 << k) != 0)
                .map(|(_, &p)| p)
                .sum();
            assert!((mass - lambda.0[k]).abs() < 1e-8);
        }
    }

    #[test]
    fn theorem4_single_link_constants() {
        let g = ConflictGraph::edgeless(1).unwrap();
        let params = ProtocolParams::uniform(1, 1.0 / 16.0, 1, 10, 15.0);
        let bound = theorem4_bound(&g, &params, &[1.0], 0.1).unwrap();
        assert_eq!(bound.num_detailed_states, 3);
        assert!((bound.b - 1.0).abs() < 1e-6, "b = {}", bound.b);
        let expect_g = (params.p[0] * params.tau_prime as f64).ln().abs();
        assert!((bound.g_max - expect_g).abs() < 1e-12);
        assert!(bound.small_epsilon_branch);
    }

    #[test]
    fn theorem4_bound_dominates_rstar_single_link() {
        let g = ConflictGraph::edgeless(1).unwrap();
        let params = ProtocolParams::uniform(1, 1.0 / 16.0, 1, 10, 15.0);
        for eps in [0.5, 0.1, 0.01] {
            let bound = theorem4_bound(&g, &params, &[1.0], eps).unwrap();
            let lambda = ArrivalRates(vec![1.0 - eps]);
            let res = solve_rstar(&g, &params, &lambda, &SolveOptions::default()).unwrap();
            let lhs = res.r_star.0[0];
            assert!(
                lhs <= bound.value + 1e-9,
                "eps {eps}: r* {lhs} exceeds bound {}",
                bound.value
            );
        }
    }

    #[test]
    fn theorem4_rejects_interior_direction() {
        let g = ConflictGraph::edgeless(1).unwrap();
        let params = ProtocolParams::uniform(1, 0.2, 1, 2, 5.0);
        assert!(matches!(
            theorem4_bound(&g, &params, &[0.5], 0.1),
            Err(Error::Domain(_))
        ));
    }
}
