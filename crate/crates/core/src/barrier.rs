//! Small dense log-barrier method for maximizing a smooth concave function
//! over a bounded polytope `{x : Gx ≤ h}`.

/// A smooth concave objective.
pub(crate) trait ConcaveObjective {
    fn dim(&self) -> usize;

    /// Returns the value and fills the gradient and the (negative
    /// semidefinite, row-major) Hessian.
    fn eval(&self, x: &[f64], grad: &mut [f64], hess: &mut [f64]) -> f64;
}

/// Linear inequalities `rows[k] · x ≤ rhs[k]`.
#[derive(Debug, Clone, Default)]
pub(crate) struct Polytope {
    pub rows: Vec<Vec<f64>>,
    pub rhs: Vec<f64>,
}

impl Polytope {
    pub fn push(&mut self, row: Vec<f64>, rhs: f64) {
        self.rows.push(row);
        self.rhs.push(rhs);
    }

    fn slacks(&self, x: &[f64], out: &mut Vec<f64>) -> bool {
        out.clear();
        for (row, h) in self.rows.iter().zip(&self.rhs) {
            let s = h - dot(row, x);
            if !(s > 0.0) {
                return false;
            }
            out.push(s);
        }
        true
    }
}

#[derive(Debug, Clone)]
pub(crate) struct BarrierResult {
    pub x: Vec<f64>,
    pub value: f64,
    /// Upper bound on the suboptimality of `value`.
    pub gap: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

// Solves A x = b for symmetric positive definite A (row-major), in place.
pub(crate) fn cholesky_solve(a: &mut [f64], b: &mut [f64], n: usize) -> bool {
    for j in 0..n {
        let mut diag = a[j * n + j];
        for k in 0..j {
            diag -= a[j * n + k] * a[j * n + k];
        }
        if !(diag > 0.0) {
            return false;
        }
        let l = diag.sqrt();
        a[j * n + j] = l;
        for i in (j + 1)..n {
            let mut v = a[i * n + j];
            for k in 0..j {
                v -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = v / l;
        }
    }
    for i in 0..n {
        let mut v = b[i];
        for k in 0..i {
            v -= a[i * n + k] * b[k];
        }
        b[i] = v / a[i * n + i];
    }
    for i in (0..n).rev() {
        let mut v = b[i];
        for k in (i + 1)..n {
            v -= a[k * n + i] * b[k];
        }
        b[i] = v / a[i * n + i];
    }
    true
}

const MAX_NEWTON: usize = 200;
const MAX_TOTAL: usize = 10_000;

/// Maximizes `obj` over `poly` starting from a strictly feasible `x0`.
pub(crate) fn maximize(
    obj: &dyn ConcaveObjective,
    poly: &Polytope,
    x0: Vec<f64>,
    gap_tol: f64,
) -> BarrierResult {
    let n = obj.dim();
    let m = poly.rows.len() as f64;
    let mut x = x0;
    let mut slack = Vec::with_capacity(poly.rows.len());
    let mut trial_slack = Vec::with_capacity(poly.rows.len());
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n * n];
    let mut g_scratch = vec![0.0; n];
    let mut h_scratch = vec![0.0; n * n];
    let mut t = 1.0;
    let mut iterations = 0;

    let barrier_value = |x: &[f64], t: f64, slack: &mut Vec<f64>, g: &mut [f64], h: &mut [f64]| {
        if !poly.slacks(x, slack) {
            return f64::NEG_INFINITY;
        }
        t * obj.eval(x, g, h) + slack.iter().map(|s| s.ln()).sum::<f64>()
    };

    loop {
        for _ in 0..MAX_NEWTON {
            iterations += 1;
            let phi = barrier_value(&x, t, &mut slack, &mut grad, &mut hess);
            debug_assert!(phi.is_finite());
            for v in grad.iter_mut() {
                *v *= t;
            }
            for v in hess.iter_mut() {
                *v *= -t;
            }
            for (row, s) in poly.rows.iter().zip(&slack) {
                for i in 0..n {
                    grad[i] -= row[i] / s;
                    for j in 0..n {
                        hess[i * n + j] += row[i] * row[j] / (s * s);
                    }
                }
            }
            let mut step = grad.clone();
            if !cholesky_solve(&mut hess, &mut step, n) {
                // Regularize and retry with a gradient step.
                step.clone_from(&grad);
                let scale = 1.0 / (1.0 + grad.iter().map(|g| g * g).sum::<f64>().sqrt());
                step.iter_mut().for_each(|v| *v *= scale);
            }
            // The decrement bounds the barrier suboptimality; below this it
            // is swamped by rounding in `phi`, whose size grows with `t`.
            let decrement = dot(&grad, &step);
            if decrement / 2.0 <= 1e-9 {
                break;
            }
            let mut alpha = 1.0;
            let mut improved = false;
            for _ in 0..40 {
                let cand: Vec<f64> = x.iter().zip(&step).map(|(a, b)| a + alpha * b).collect();
                let val = barrier_value(&cand, t, &mut trial_slack, &mut g_scratch, &mut h_scratch);
                if val.is_finite() && val >= phi + 0.25 * alpha * decrement {
                    x = cand;
                    improved = true;
                    break;
                }
                alpha *= 0.5;
            }
            if !improved || iterations >= MAX_TOTAL {
                break;
            }
        }
        if m / t <= gap_tol || iterations >= MAX_TOTAL {
            break;
        }
        t *= 8.0;
    }
    let value = obj.eval(&x, &mut grad, &mut hess);
    BarrierResult {
        x,
        value,
        gap: m / t,
    }
}

struct SlackObjective {
    n: usize,
}

impl ConcaveObjective for SlackObjective {
    fn dim(&self) -> usize {
        self.n + 1
    }

    fn eval(&self, x: &[f64], grad: &mut [f64], hess: &mut [f64]) -> f64 {
        grad.iter_mut().for_each(|g| *g = 0.0);
        hess.iter_mut().for_each(|h| *h = 0.0);
        grad[self.n] = 1.0;
        x[self.n]
    }
}

/// Finds a point with every slack at least `margin`, maximizing the smallest
/// slack. Returns `None` when the polytope has no such interior point.
pub(crate) fn interior_point(poly: &Polytope, n: usize, margin: f64) -> Option<Vec<f64>> {
    if poly.rows.is_empty() {
        return Some(vec![0.0; n]);
    }
    // max s  s.t.  g·x + s ≤ h,  s ≤ 1
    let mut lifted = Polytope::default();
    for (row, h) in poly.rows.iter().zip(&poly.rhs) {
        let mut r = row.clone();
        r.push(1.0);
        lifted.push(r, *h);
    }
    let mut cap = vec![0.0; n + 1];
    cap[n] = 1.0;
    lifted.push(cap, 1.0);
    let min_h = poly.rhs.iter().copied().fold(f64::INFINITY, f64::min);
    let mut x0 = vec![0.0; n + 1];
    x0[n] = min_h.min(1.0) - 1.0;
    let res = maximize(&SlackObjective { n }, &lifted, x0, 1e-10);
    if res.value >= margin {
        let mut x = res.x;
        x.truncate(n);
        Some(x)
    } else {
        None
    }
}
