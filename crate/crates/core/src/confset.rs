//! Confidence sets for the multinomial parameter.
//!
//! `C_n(u) = {θ : O_n(θ) < 1/u}` covers the true `θ` at every `n`
//! simultaneously with probability at least `1 − u`. In terms of the counts,
//! membership is the concave constraint
//!
//! ```text
//!     Σᵢ Sᵢ log θᵢ  >  c + log u,     c = log Beta(α₀ + S_n) − log Beta(α₀)
//! ```
//!
//! Linear functionals of `θ` over the closure of `C_n(u)` are optimized by
//! Lagrangian duality. For a multiplier `μ` on the likelihood constraint the
//! inner problem over the simplex has the closed form
//! `θⱼ = μSⱼ / (ν − wⱼ)` on arms with counts (with `ν` fixing `Σθ = 1`), and
//! any remaining mass goes to the best zero-count arm. The likelihood of that
//! inner solution is monotone in `μ`, so the outer problem is a bisection on
//! `β = 1/μ`.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, check_level, Result};
use crate::seqtest::OddsState;
use crate::types::{Interval, SimplexVector};

/// Iteration cap shared by the solvers in this module.
pub const MAX_ITERATIONS: usize = 10_000;

/// Target accuracy of reported objectives.
pub const OBJECTIVE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sense {
    Max,
    Min,
}

/// Outcome of a linear optimization over the confidence set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    /// Optimal value, `NaN` when infeasible.
    pub objective: f64,
    pub feasible: bool,
    pub iterations: usize,
    /// Width of the final bracket on the objective.
    pub tolerance_achieved: f64,
    /// Optimizing point, when feasible.
    pub argopt: Option<Vec<f64>>,
}

impl SolverReport {
    fn infeasible(iterations: usize) -> Self {
        Self {
            objective: f64::NAN,
            feasible: false,
            iterations,
            tolerance_achieved: f64::NAN,
            argopt: None,
        }
    }
}

/// `log O_n(θ)` for an arbitrary point `θ` of the closed simplex.
///
/// Coordinates with zero count contribute nothing, so `θᵢ = 0` is allowed
/// there; a zero coordinate with a positive count gives `+∞`.
pub fn log_odds_at(theta: &[f64], state: &OddsState) -> Result<f64> {
    check_len(state.dim(), theta.len())?;
    let loglik = log_likelihood(theta, state.counts().counts());
    Ok(state.log_marginal() - loglik)
}

pub(crate) fn log_likelihood(theta: &[f64], counts: &[u64]) -> f64 {
    theta
        .iter()
        .zip(counts)
        .filter(|(_, &s)| s > 0)
        .map(|(t, &s)| s as f64 * t.ln())
        .sum()
}

/// Membership of `θ` in `C_n(u)`.
pub fn in_confidence_set(theta: &SimplexVector, state: &OddsState, u: f64) -> Result<bool> {
    check_level(u)?;
    Ok(log_odds_at(theta.values(), state)? < -u.ln())
}

/// `Σ Sᵢ log θᵢ ≥ bound` defines the closure of `C_n(u)`.
pub fn likelihood_bound(state: &OddsState, u: f64) -> Result<f64> {
    check_level(u)?;
    Ok(state.log_marginal() + u.ln())
}

/// Optimizes `⟨direction, θ⟩` over the closure of `C_n(u)`.
pub fn solve_linear_over_set(
    direction: &[f64],
    state: &OddsState,
    u: f64,
    sense: Sense,
) -> Result<SolverReport> {
    check_len(state.dim(), direction.len())?;
    let bound = likelihood_bound(state, u)?;
    Ok(solve_linear(direction, state.counts().counts(), bound, sense))
}

/// Marginal interval `[inf θᵢ, sup θᵢ]` over `C_n(u)`, clipped to `[0, 1]`.
pub fn marginal_ci(state: &OddsState, u: f64, arm: usize) -> Result<Interval> {
    let d = state.dim();
    if arm >= d {
        return Err(crate::Error::ArmOutOfRange { arm, d });
    }
    let mut e = vec![0.0; d];
    e[arm] = 1.0;
    let hi = solve_linear_over_set(&e, state, u, Sense::Max)?;
    let lo = solve_linear_over_set(&e, state, u, Sense::Min)?;
    if !hi.feasible || !lo.feasible {
        return Err(crate::Error::Infeasible("confidence set is empty".into()));
    }
    let lo = lo.objective.clamp(0.0, 1.0);
    let hi = hi.objective.clamp(0.0, 1.0);
    Ok(Interval::new(lo.min(hi), hi))
}

/// Core solver on raw counts and a likelihood bound.
pub(crate) fn solve_linear(w: &[f64], counts: &[u64], bound: f64, sense: Sense) -> SolverReport {
    let sign = match sense {
        Sense::Max => 1.0,
        Sense::Min => -1.0,
    };
    let w: Vec<f64> = w.iter().map(|x| sign * x).collect();
    let mut report = maximize_linear(&w, counts, bound);
    report.objective *= sign;
    report
}

struct InnerProblem<'a> {
    w: &'a [f64],
    counts: &'a [u64],
    positive: Vec<usize>,
    w_pos_max: f64,
    // Best zero-count arm, if it beats every counted arm.
    zero_best: Option<(usize, f64)>,
    n: f64,
}

impl<'a> InnerProblem<'a> {
    fn new(w: &'a [f64], counts: &'a [u64]) -> Self {
        let positive: Vec<usize> = (0..w.len()).filter(|&j| counts[j] > 0).collect();
        let w_pos_max = positive
            .iter()
            .map(|&j| w[j])
            .fold(f64::NEG_INFINITY, f64::max);
        let zero_best = (0..w.len())
            .filter(|&j| counts[j] == 0)
            .fold(None::<(usize, f64)>, |best, j| match best {
                Some((_, bw)) if bw >= w[j] => best,
                _ => Some((j, w[j])),
            })
            .filter(|&(_, wz)| wz > w_pos_max);
        let n = counts.iter().sum::<u64>() as f64;
        Self {
            w,
            counts,
            positive,
            w_pos_max,
            zero_best,
            n,
        }
    }

    // Solves Σ_P Sⱼ / (t + β rⱼ) = 1 for t > 0, rⱼ = w_max − wⱼ ≥ 0.
    fn solve_t(&self, beta: f64) -> f64 {
        let top: f64 = self
            .positive
            .iter()
            .filter(|&&j| self.w[j] == self.w_pos_max)
            .map(|&j| self.counts[j] as f64)
            .sum();
        // F is convex and decreasing; Newton from the left converges monotonically.
        let mut t = top;
        for _ in 0..200 {
            let (mut f, mut df) = (-1.0, 0.0);
            for &j in &self.positive {
                let den = t + beta * (self.w_pos_max - self.w[j]);
                let s = self.counts[j] as f64;
                f += s / den;
                df -= s / (den * den);
            }
            if f <= 0.0 || df == 0.0 {
                break;
            }
            let step = -f / df;
            let next = t + step;
            if next <= t || step <= t * 1e-16 {
                t = next.max(t);
                break;
            }
            t = next;
        }
        t.min(self.n)
    }

    // Maximizer of ⟨w, θ⟩ + μ Σ Sⱼ log θⱼ over the simplex, β = 1/μ.
    fn theta(&self, beta: f64) -> Vec<f64> {
        let mut theta = vec![0.0; self.w.len()];
        if beta == 0.0 {
            for &j in &self.positive {
                theta[j] = self.counts[j] as f64 / self.n;
            }
            return theta;
        }
        let t = self.solve_t(beta);
        match self.zero_best {
            Some((jz, wz)) if t < beta * (wz - self.w_pos_max) => {
                let mut used = 0.0;
                for &j in &self.positive {
                    let v = self.counts[j] as f64 / (beta * (wz - self.w[j]));
                    theta[j] = v;
                    used += v;
                }
                theta[jz] = (1.0 - used).max(0.0);
            }
            _ => {
                for &j in &self.positive {
                    theta[j] =
                        self.counts[j] as f64 / (t + beta * (self.w_pos_max - self.w[j]));
                }
            }
        }
        theta
    }

    fn loglik(&self, theta: &[f64]) -> f64 {
        log_likelihood(theta, self.counts)
    }

    fn objective(&self, theta: &[f64]) -> f64 {
        self.w.iter().zip(theta).map(|(a, b)| a * b).sum()
    }
}

fn maximize_linear(w: &[f64], counts: &[u64], bound: f64) -> SolverReport {
    let d = w.len();
    let n: u64 = counts.iter().sum();
    if n == 0 {
        // The constraint reads 0 ≥ bound; the set is the whole simplex or empty.
        if bound > 0.0 {
            return SolverReport::infeasible(0);
        }
        let (j, wmax) = w
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (j, x)| if x > acc.1 { (j, x) } else { acc });
        let mut point = vec![0.0; d];
        point[j] = 1.0;
        return SolverReport {
            objective: wmax,
            feasible: true,
            iterations: 0,
            tolerance_achieved: 0.0,
            argopt: Some(point),
        };
    }

    let inner = InnerProblem::new(w, counts);
    let mle = inner.theta(0.0);
    if inner.loglik(&mle) < bound {
        return SolverReport::infeasible(0);
    }

    // Bracket: g(β) = loglik(θ(β)) is non-increasing in β with g(0) ≥ bound.
    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut iterations = 0;
    loop {
        iterations += 1;
        let th = inner.theta(hi);
        if inner.loglik(&th) < bound {
            break;
        }
        lo = hi;
        hi *= 2.0;
        if hi > 1e300 || iterations >= MAX_ITERATIONS {
            // The likelihood never binds: the objective is flat on the counted arms.
            let obj = inner.objective(&th);
            return SolverReport {
                objective: obj,
                feasible: true,
                iterations,
                tolerance_achieved: 0.0,
                argopt: Some(th),
            };
        }
    }

    let mut theta_lo = inner.theta(lo);
    let mut theta_hi = inner.theta(hi);
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let th = inner.theta(mid);
        if inner.loglik(&th) >= bound {
            lo = mid;
            theta_lo = th;
        } else {
            hi = mid;
            theta_hi = th;
        }
        let gap = (inner.objective(&theta_hi) - inner.objective(&theta_lo)).abs();
        if gap <= 1e-13 && (hi - lo) <= 1e-12 * hi {
            break;
        }
    }
    let obj_lo = inner.objective(&theta_lo);
    let obj_hi = inner.objective(&theta_hi);
    SolverReport {
        objective: obj_lo,
        feasible: true,
        iterations,
        tolerance_achieved: (obj_hi - obj_lo).abs(),
        argopt: Some(theta_lo),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seqtest::Prior;
    use crate::types::CountVector;

    fn state(theta0: &[f64], counts: &[u64], prior: Prior) -> OddsState {
        OddsState::new(SimplexVector::new(theta0.to_vec()).unwrap(), prior)
            .unwrap()
            .update_batch(&CountVector::new(counts.to_vec()))
            .unwrap()
    }

    #[test]
    fn empty_data_gives_whole_simplex() {
        let s = state(&[0.2, 0.3, 0.5], &[0, 0, 0], Prior::Uniform);
        for i in 0..3 {
            let ci = marginal_ci(&s, 0.05, i).unwrap();
            assert_eq!((ci.lo, ci.hi), (0.0, 1.0));
        }
        assert!(in_confidence_set(&SimplexVector::new(vec![0.98, 0.01, 0.01]).unwrap(), &s, 0.05).unwrap());
    }

    #[test]
    fn mle_is_inside_and_covered() {
        let s = state(&[0.1, 0.4, 0.5], &[20, 60, 120], Prior::Uniform);
        let mle = SimplexVector::new(vec![0.1, 0.3, 0.6]).unwrap();
        assert!(in_confidence_set(&mle, &s, 0.05).unwrap());
        for (i, m) in [0.1, 0.3, 0.6].iter().enumerate() {
            let ci = marginal_ci(&s, 0.05, i).unwrap();
            assert!(ci.contains(*m), "{ci:?} misses {m}");
            assert!(ci.width() > 0.0);
        }
    }

    #[test]
    fn ones_direction_is_one() {
        let s = state(&[0.1, 0.4, 0.5], &[3, 0, 9], Prior::Uniform);
        let r = solve_linear_over_set(&[1.0, 1.0, 1.0], &s, 0.05, Sense::Max).unwrap();
        assert!(r.feasible);
        assert!((r.objective - 1.0).abs() < 1e-12);
        let r = solve_linear_over_set(&[1.0, 1.0, 1.0], &s, 0.05, Sense::Min).unwrap();
        assert!((r.objective - 1.0).abs() < 1e-12);
    }

    #[test]
    fn optimum_lies_on_the_boundary() {
        let s = state(&[0.3, 0.3, 0.4], &[7, 13, 4], Prior::Concentrated { k: 3.0 });
        let bound = likelihood_bound(&s, 0.05).unwrap();
        for dir in [[1.0, 0.0, 0.0], [0.3, -1.2, 0.5], [-2.0, 1.0, 0.0]] {
            for sense in [Sense::Max, Sense::Min] {
                let r = solve_linear_over_set(&dir, &s, 0.05, sense).unwrap();
                let th = r.argopt.unwrap();
                assert!((th.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                let ll = log_likelihood(&th, s.counts().counts());
                assert!(ll >= bound - 1e-9, "infeasible optimum {ll} < {bound}");
                assert!(ll <= bound + 1e-6, "optimum not on the boundary");
                assert!(r.tolerance_achieved <= OBJECTIVE_TOL);
            }
        }
    }

    #[test]
    fn zero_count_arm_reaches_far() {
        let s = state(&[0.5, 0.5], &[0, 4], Prior::Uniform);
        let ci = marginal_ci(&s, 0.05, 0).unwrap();
        assert_eq!(ci.lo, 0.0);
        assert!(ci.hi > 0.3 && ci.hi < 1.0);
        // The upper end sits where the remaining likelihood meets the bound.
        let bound = likelihood_bound(&s, 0.05).unwrap();
        assert!((4.0 * (1.0 - ci.hi).ln() - bound).abs() < 1e-7);
    }

    #[test]
    fn rejects_bad_inputs() {
        let s = state(&[0.5, 0.5], &[1, 1], Prior::Uniform);
        assert!(marginal_ci(&s, 0.05, 2).is_err());
        assert!(marginal_ci(&s, 1.5, 0).is_err());
        assert!(solve_linear_over_set(&[1.0], &s, 0.05, Sense::Max).is_err());
    }

    #[test]
    fn reports_infeasible_for_impossible_bound() {
        let r = solve_linear(&[1.0, 0.0], &[5, 5], 0.0, Sense::Max);
        assert!(!r.feasible);
        assert!(r.objective.is_nan());
        let r = solve_linear(&[1.0, 0.0], &[0, 0], 1.0, Sense::Max);
        assert!(!r.feasible);
    }
}
