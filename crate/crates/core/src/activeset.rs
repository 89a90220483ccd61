//! Primal active-set Newton method for maximizing a smooth, strictly concave
//! function over a small polytope. Exact on faces, so it needs far fewer
//! function evaluations than the barrier method; callers fall back to the
//! barrier when it gives up.

use crate::barrier::{cholesky_solve, ConcaveObjective, Polytope};

const MAX_ITER: usize = 500;

#[derive(Debug, Clone)]
pub(crate) struct ActiveSetResult {
    pub x: Vec<f64>,
    pub value: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn solve_spd(a: &[f64], b: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut a = a.to_vec();
    let mut x = b.to_vec();
    cholesky_solve(&mut a, &mut x, n).then_some(x)
}

/// `−H`, with a ridge added when it is numerically singular (as happens
/// where the objective flattens out). Any positive definite matrix still
/// yields an ascent direction.
fn regularized(hess: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut neg_h: Vec<f64> = hess.iter().map(|v| -v).collect();
    let scale = (0..n).map(|i| neg_h[i * n + i].abs()).fold(1e-300, f64::max);
    let mut ridge = 0.0;
    for _ in 0..12 {
        let mut a = neg_h.clone();
        let mut b = vec![0.0; n];
        for i in 0..n {
            a[i * n + i] += ridge;
        }
        if cholesky_solve(&mut a, &mut b, n) {
            for i in 0..n {
                neg_h[i * n + i] += ridge;
            }
            return Some(neg_h);
        }
        ridge = if ridge == 0.0 { 1e-12 * scale.max(1.0) } else { ridge * 100.0 };
    }
    None
}

/// Moves `x` orthogonally onto the hyperplanes of the working set, undoing
/// rounding drift. Returns whether `x` changed.
fn project(poly: &Polytope, working: &[usize], x: &mut [f64]) -> bool {
    let w = working.len();
    let n = x.len();
    let resid: Vec<f64> = working
        .iter()
        .map(|&k| dot(&poly.rows[k], x) - poly.rhs[k])
        .collect();
    if resid.iter().all(|r| *r == 0.0) {
        return false;
    }
    let mut gram = vec![0.0; w * w];
    for (i, &a) in working.iter().enumerate() {
        for (j, &b) in working.iter().enumerate() {
            gram[i * w + j] = dot(&poly.rows[a], &poly.rows[b]);
        }
    }
    let Some(mu) = solve_spd(&gram, &resid, w) else {
        return false;
    };
    for (m, &k) in mu.iter().zip(working) {
        for i in 0..n {
            x[i] -= m * poly.rows[k][i];
        }
    }
    true
}

/// Maximizes `obj` over `poly` from the feasible point `x0`. `None` when the
/// Hessian is numerically singular, the line search stalls or the iteration
/// budget runs out.
pub(crate) fn maximize(
    obj: &dyn ConcaveObjective,
    poly: &Polytope,
    x0: &[f64],
    decrement_tol: f64,
) -> Option<ActiveSetResult> {
    let n = obj.dim();
    let mut x = x0.to_vec();
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n * n];
    let mut g2 = vec![0.0; n];
    let mut h2 = vec![0.0; n * n];
    let mut working: Vec<usize> = Vec::new();

    let mut value = obj.eval(&x, &mut grad, &mut hess);
    for _ in 0..MAX_ITER {
        let neg_h = regularized(&hess, n)?;
        // Range-space solve: p = H⁻¹(g − Gᵀλ) with G p = 0.
        let y = solve_spd(&neg_h, &grad, n)?;
        let cols: Vec<Vec<f64>> = working
            .iter()
            .map(|&k| solve_spd(&neg_h, &poly.rows[k], n))
            .collect::<Option<_>>()?;
        let w = working.len();
        let lambda = if w == 0 {
            Vec::new()
        } else {
            let mut m = vec![0.0; w * w];
            for (i, &ki) in working.iter().enumerate() {
                for j in 0..w {
                    m[i * w + j] = dot(&poly.rows[ki], &cols[j]);
                }
            }
            let rhs: Vec<f64> = working.iter().map(|&k| dot(&poly.rows[k], &y)).collect();
            solve_spd(&m, &rhs, w)?
        };
        let mut p = y;
        for (l, c) in lambda.iter().zip(&cols) {
            for i in 0..n {
                p[i] -= l * c[i];
            }
        }
        let decrement = dot(&grad, &p);

        if decrement / 2.0 <= decrement_tol {
            let worst = lambda
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.total_cmp(b.1))
                .filter(|(_, &l)| l < -1e-9 * (1.0 + value.abs()).sqrt());
            match worst {
                Some((i, _)) => {
                    working.remove(i);
                    continue;
                }
                None => return Some(ActiveSetResult { x, value }),
            }
        }

        // Largest feasible step along p.
        let mut alpha_max = f64::INFINITY;
        let mut blocking = None;
        for (k, (row, h)) in poly.rows.iter().zip(&poly.rhs).enumerate() {
            if working.contains(&k) {
                continue;
            }
            let rate = dot(row, &p);
            if rate > 0.0 {
                let slack = (h - dot(row, &x)).max(0.0);
                let a = slack / rate;
                if a < alpha_max {
                    alpha_max = a;
                    blocking = Some(k);
                }
            }
        }
        let mut alpha = alpha_max.min(1.0);
        let mut accepted = None;
        for _ in 0..50 {
            let cand: Vec<f64> = x.iter().zip(&p).map(|(a, b)| a + alpha * b).collect();
            let v = obj.eval(&cand, &mut g2, &mut h2);
            if v >= value + 1e-4 * alpha * decrement || (alpha == 0.0 && v >= value) {
                accepted = Some((cand, v));
                break;
            }
            alpha *= 0.5;
        }
        let (cand, v) = accepted?;
        let hit = alpha == alpha_max.min(1.0) && alpha_max <= 1.0;
        x = cand;
        value = v;
        std::mem::swap(&mut grad, &mut g2);
        std::mem::swap(&mut hess, &mut h2);
        if hit {
            if let Some(k) = blocking {
                working.push(k);
            }
        }
        if !working.is_empty() && project(poly, &working, &mut x) {
            value = obj.eval(&x, &mut grad, &mut hess);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Quadratic {
        center: Vec<f64>,
    }

    impl ConcaveObjective for Quadratic {
        fn dim(&self) -> usize {
            self.center.len()
        }

        fn eval(&self, x: &[f64], grad: &mut [f64], hess: &mut [f64]) -> f64 {
            let n = x.len();
            hess.iter_mut().for_each(|h| *h = 0.0);
            let mut v = 0.0;
            for i in 0..n {
                let r = x[i] - self.center[i];
                v -= r * r;
                grad[i] = -2.0 * r;
                hess[i * n + i] = -2.0;
            }
            v
        }
    }

    fn unit_box(n: usize) -> Polytope {
        let mut poly = Polytope::default();
        for k in 0..n {
            let mut e = vec![0.0; n];
            e[k] = 1.0;
            poly.push(e.clone(), 1.0);
            e[k] = -1.0;
            poly.push(e, 1.0);
        }
        poly
    }

    #[test]
    fn projects_onto_box_faces() {
        let obj = Quadratic { center: vec![3.0, 0.25, -2.0] };
        let res = maximize(&obj, &unit_box(3), &[0.0, 0.0, 0.0], 1e-14).unwrap();
        let want = [1.0, 0.25, -1.0];
        for (a, b) in res.x.iter().zip(want) {
            assert!((a - b).abs() < 1e-12, "{:?}", res.x);
        }
        assert!((res.value - (-4.0 - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn releases_constraints_with_wrong_sign() {
        // The path first hits x₀ + x₁ ≤ 0.5 but the optimum lies on x₀ ≤ 0.2.
        let mut poly = unit_box(2);
        poly.push(vec![1.0, 1.0], 0.5);
        poly.push(vec![1.0, 0.0], 0.2);
        let obj = Quadratic { center: vec![2.0, -0.5] };
        let res = maximize(&obj, &poly, &[-0.5, -0.5], 1e-14).unwrap();
        assert!((res.x[0] - 0.2).abs() < 1e-12 && (res.x[1] + 0.5).abs() < 1e-12, "{:?}", res.x);
    }

    #[test]
    fn interior_optimum() {
        let obj = Quadratic { center: vec![0.3, -0.1] };
        let res = maximize(&obj, &unit_box(2), &[0.9, 0.9], 1e-14).unwrap();
        assert!((res.x[0] - 0.3).abs() < 1e-12 && (res.x[1] + 0.1).abs() < 1e-12);
    }
}
