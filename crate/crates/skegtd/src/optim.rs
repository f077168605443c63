//! Small optimization toolbox shared by the estimators: Nelder-Mead,
//! a BFGS quasi-Newton with numeric gradients, a bounded compass/pattern
//! search for non-smooth objectives, a bracketed 1-D root finder and a
//! natural cubic spline.

/// Bounded box, mapped to unconstrained space through a scaled logistic.
#[derive(Debug, Clone, Copy)]
pub struct Bound {
    pub lo: f64,
    pub hi: f64,
}

impl Bound {
    pub fn new(lo: f64, hi: f64) -> Self {
        Bound { lo, hi }
    }

    /// internal (unbounded) -> external (in [lo, hi])
    pub fn to_external(&self, u: f64) -> f64 {
        let s = 1.0 / (1.0 + (-u).exp());
        self.lo + (self.hi - self.lo) * s
    }

    /// external -> internal; clamps slightly inside the box first
    pub fn to_internal(&self, x: f64) -> f64 {
        let w = self.hi - self.lo;
        let eps = 1e-10 * w;
        let s = ((x - self.lo) / w).clamp(eps / w, 1.0 - eps / w);
        (s / (1.0 - s)).ln()
    }
}

pub fn to_external(bounds: &[Bound], u: &[f64]) -> Vec<f64> {
    bounds.iter().zip(u).map(|(b, &v)| b.to_external(v)).collect()
}

pub fn to_internal(bounds: &[Bound], x: &[f64]) -> Vec<f64> {
    bounds.iter().zip(x).map(|(b, &v)| b.to_internal(v)).collect()
}

#[derive(Debug, Clone)]
pub struct OptimResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Nelder-Mead simplex minimization in R^n.
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x0: &[f64],
    initial_step: f64,
    tol: f64,
    max_iter: usize,
) -> OptimResult {
    let n = x0.len();
    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(x0.to_vec());
    for i in 0..n {
        let mut v = x0.to_vec();
        let step = if v[i].abs() > 1e-8 { initial_step * v[i].abs() } else { initial_step };
        v[i] += step;
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| f(v)).collect();
    let mut iters = 0;
    let mut converged = false;
    while iters < max_iter {
        iters += 1;
        // order
        let mut idx: Vec<usize> = (0..=n).collect();
        idx.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap_or(std::cmp::Ordering::Equal));
        let best = idx[0];
        let worst = idx[n];
        let second_worst = idx[n - 1];
        if (values[worst] - values[best]).abs() <= tol * (values[best].abs() + tol) {
            converged = true;
            break;
        }
        // centroid of all but worst
        let mut cen = vec![0.0; n];
        for &i in idx.iter().take(n) {
            for j in 0..n {
                cen[j] += simplex[i][j] / n as f64;
            }
        }
        let refl: Vec<f64> = (0..n).map(|j| cen[j] + (cen[j] - simplex[worst][j])).collect();
        let f_refl = f(&refl);
        if f_refl < values[best] {
            let exp: Vec<f64> = (0..n).map(|j| cen[j] + 2.0 * (cen[j] - simplex[worst][j])).collect();
            let f_exp = f(&exp);
            if f_exp < f_refl {
                simplex[worst] = exp;
                values[worst] = f_exp;
            } else {
                simplex[worst] = refl;
                values[worst] = f_refl;
            }
        } else if f_refl < values[second_worst] {
            simplex[worst] = refl;
            values[worst] = f_refl;
        } else {
            let con: Vec<f64> = (0..n).map(|j| cen[j] + 0.5 * (simplex[worst][j] - cen[j])).collect();
            let f_con = f(&con);
            if f_con < values[worst] {
                simplex[worst] = con;
                values[worst] = f_con;
            } else {
                // shrink toward best
                for &i in idx.iter().skip(1) {
                    for j in 0..n {
                        simplex[i][j] = simplex[best][j] + 0.5 * (simplex[i][j] - simplex[best][j]);
                    }
                    values[i] = f(&simplex[i]);
                }
            }
        }
    }
    let mut best = 0;
    for i in 1..=n {
        if values[i] < values[best] {
            best = i;
        }
    }
    OptimResult { x: simplex[best].clone(), value: values[best], iterations: iters, converged }
}

/// BFGS with central-difference gradients and Armijo backtracking.
/// Works in unconstrained coordinates; combine with [`Bound`] transforms
/// for box constraints.
pub fn bfgs<F: FnMut(&[f64]) -> f64>(mut f: F, x0: &[f64], tol: f64, max_iter: usize) -> OptimResult {
    let n = x0.len();
    let h = 1e-6;
    let mut x = x0.to_vec();
    let mut fx = f(&x);
    let mut grad = vec![0.0; n];
    let mut compute_grad = |f: &mut F, x: &[f64], g: &mut [f64]| {
        let mut xp = x.to_vec();
        for i in 0..n {
            let step = h * (1.0 + x[i].abs());
            xp[i] = x[i] + step;
            let fp = f(&xp);
            xp[i] = x[i] - step;
            let fm = f(&xp);
            xp[i] = x[i];
            g[i] = (fp - fm) / (2.0 * step);
        }
    };
    compute_grad(&mut f, &x, &mut grad);
    // inverse Hessian approximation
    let mut hinv = vec![vec![0.0; n]; n];
    for (i, row) in hinv.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    let mut iters = 0;
    let mut converged = false;
    while iters < max_iter {
        iters += 1;
        let gnorm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if gnorm < tol {
            converged = true;
            break;
        }
        // direction d = -Hinv g
        let mut d = vec![0.0; n];
        for i in 0..n {
            for j in 0..n {
                d[i] -= hinv[i][j] * grad[j];
            }
        }
        let slope: f64 = d.iter().zip(&grad).map(|(a, b)| a * b).sum();
        if !slope.is_finite() || slope >= 0.0 {
            // reset to steepest descent
            for (i, row) in hinv.iter_mut().enumerate() {
                for (j, v) in row.iter_mut().enumerate() {
                    *v = if i == j { 1.0 } else { 0.0 };
                }
            }
            for i in 0..n {
                d[i] = -grad[i];
            }
        }
        // Armijo backtracking
        let mut step = 1.0;
        let slope: f64 = d.iter().zip(&grad).map(|(a, b)| a * b).sum();
        let mut x_new = x.clone();
        let mut f_new = f64::INFINITY;
        let mut ok = false;
        for _ in 0..40 {
            for i in 0..n {
                x_new[i] = x[i] + step * d[i];
            }
            f_new = f(&x_new);
            if f_new.is_finite() && f_new <= fx + 1e-4 * step * slope {
                ok = true;
                break;
            }
            step *= 0.5;
        }
        if !ok {
            break;
        }
        let mut grad_new = vec![0.0; n];
        compute_grad(&mut f, &x_new, &mut grad_new);
        // BFGS update
        let s: Vec<f64> = (0..n).map(|i| x_new[i] - x[i]).collect();
        let y: Vec<f64> = (0..n).map(|i| grad_new[i] - grad[i]).collect();
        let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
        if sy > 1e-12 {
            let rho = 1.0 / sy;
            // Hinv = (I - rho s y^T) Hinv (I - rho y s^T) + rho s s^T
            let mut hy = vec![0.0; n];
            for i in 0..n {
                for j in 0..n {
                    hy[i] += hinv[i][j] * y[j];
                }
            }
            let yhy: f64 = y.iter().zip(&hy).map(|(a, b)| a * b).sum();
            for i in 0..n {
                for j in 0..n {
                    hinv[i][j] += -rho * (s[i] * hy[j] + hy[i] * s[j]) + rho * rho * yhy * s[i] * s[j]
                        + rho * s[i] * s[j];
                }
            }
        }
        x = x_new;
        fx = f_new;
        grad = grad_new;
        if s_norm(&s) < 1e-11 * (1.0 + s_norm(&x)) {
            converged = true;
            break;
        }
    }
    OptimResult { x, value: fx, iterations: iters, converged }
}

fn s_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Compass/pattern search with box clamping, for non-smooth objectives.
pub fn pattern_search<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x0: &[f64],
    step0: &[f64],
    lo: &[f64],
    hi: &[f64],
    min_step: f64,
    max_evals: usize,
) -> OptimResult {
    let n = x0.len();
    let mut x: Vec<f64> = x0.iter().zip(lo.iter().zip(hi)).map(|(&v, (&l, &h))| v.clamp(l, h)).collect();
    let mut fx = f(&x);
    let mut step: Vec<f64> = step0.to_vec();
    let mut evals = 1usize;
    while evals < max_evals && step.iter().cloned().fold(f64::NEG_INFINITY, f64::max) > min_step {
        let mut improved = false;
        for i in 0..n {
            for &dir in &[1.0, -1.0] {
                let mut cand = x.clone();
                cand[i] = (cand[i] + dir * step[i]).clamp(lo[i], hi[i]);
                if cand[i] == x[i] {
                    continue;
                }
                let fc = f(&cand);
                evals += 1;
                if fc < fx {
                    x = cand;
                    fx = fc;
                    improved = true;
                    break;
                }
            }
        }
        if !improved {
            for s in step.iter_mut() {
                *s *= 0.5;
            }
        }
    }
    OptimResult { x, value: fx, iterations: evals, converged: true }
}

/// Find a root of `f` in [lo, hi]; assumes f(lo) and f(hi) bracket it.
/// Bisection with secant acceleration; tolerance on the argument.
pub fn bracketed_root<F: FnMut(f64) -> f64>(mut f: F, mut lo: f64, mut hi: f64, xtol: f64) -> Option<f64> {
    let mut flo = f(lo);
    let mut fhi = f(hi);
    if flo == 0.0 {
        return Some(lo);
    }
    if fhi == 0.0 {
        return Some(hi);
    }
    if flo.is_nan() || fhi.is_nan() || flo.signum() == fhi.signum() {
        return None;
    }
    for iter in 0..200 {
        // secant candidate on even rounds, bisection on odd rounds; the
        // forced bisection keeps the bracket shrinking geometrically
        let mut mid = if iter % 2 == 0 && (fhi - flo).abs() > 1e-300 {
            hi - fhi * (hi - lo) / (fhi - flo)
        } else {
            0.5 * (lo + hi)
        };
        if !(mid > lo && mid < hi) {
            mid = 0.5 * (lo + hi);
        }
        let fmid = f(mid);
        if fmid == 0.0 || (hi - lo) < xtol {
            return Some(mid);
        }
        if fmid.signum() == flo.signum() {
            lo = mid;
            flo = fmid;
        } else {
            hi = mid;
            fhi = fmid;
        }
        if (hi - lo) < xtol {
            return Some(0.5 * (lo + hi));
        }
    }
    Some(0.5 * (lo + hi))
}

/// Invert a small square matrix by Gauss-Jordan with partial pivoting.
/// Returns None when the matrix is numerically singular.
pub fn invert_matrix(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a.iter().map(|row| row.clone()).collect();
    let mut inv: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    for col in 0..n {
        let mut piv = col;
        for row in col + 1..n {
            if m[row][col].abs() > m[piv][col].abs() {
                piv = row;
            }
        }
        if m[piv][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, piv);
        inv.swap(col, piv);
        let d = m[col][col];
        for j in 0..n {
            m[col][j] /= d;
            inv[col][j] /= d;
        }
        for row in 0..n {
            if row == col {
                continue;
            }
            let f = m[row][col];
            if f == 0.0 {
                continue;
            }
            for j in 0..n {
                m[row][j] -= f * m[col][j];
                inv[row][j] -= f * inv[col][j];
            }
        }
    }
    Some(inv)
}

/// Natural cubic spline through (x, y), x strictly increasing.
pub struct CubicSpline {
    x: Vec<f64>,
    y: Vec<f64>,
    m: Vec<f64>, // second derivatives at the knots
}

impl CubicSpline {
    pub fn new(x: &[f64], y: &[f64]) -> Self {
        let n = x.len();
        assert!(n >= 2 && n == y.len());
        let mut m = vec![0.0; n];
        if n > 2 {
            // tridiagonal solve for interior second derivatives
            let mut sub = vec![0.0; n];
            let mut diag = vec![0.0; n];
            let mut sup = vec![0.0; n];
            let mut rhs = vec![0.0; n];
            for i in 1..n - 1 {
                let h0 = x[i] - x[i - 1];
                let h1 = x[i + 1] - x[i];
                sub[i] = h0;
                diag[i] = 2.0 * (h0 + h1);
                sup[i] = h1;
                rhs[i] = 6.0 * ((y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0);
            }
            // forward elimination on rows 1..n-1 (natural ends: m[0]=m[n-1]=0)
            for i in 2..n - 1 {
                let w = sub[i] / diag[i - 1];
                diag[i] -= w * sup[i - 1];
                rhs[i] -= w * rhs[i - 1];
            }
            for i in (1..n - 1).rev() {
                let upper = if i + 1 <= n - 2 { sup[i] * m[i + 1] } else { 0.0 };
                m[i] = (rhs[i] - upper) / diag[i];
            }
        }
        CubicSpline { x: x.to_vec(), y: y.to_vec(), m }
    }

    pub fn eval(&self, t: f64) -> f64 {
        let n = self.x.len();
        let i = match self.x.binary_search_by(|v| v.partial_cmp(&t).unwrap()) {
            Ok(i) => i.min(n - 2),
            Err(0) => 0,
            Err(i) if i >= n => n - 2,
            Err(i) => i - 1,
        };
        let h = self.x[i + 1] - self.x[i];
        let a = (self.x[i + 1] - t) / h;
        let b = (t - self.x[i]) / h;
        a * self.y[i] + b * self.y[i + 1]
            + ((a * a * a - a) * self.m[i] + (b * b * b - b) * self.m[i + 1]) * h * h / 6.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn nelder_mead_rosenbrock() {
        let res = nelder_mead(
            |p| {
                let (x, y) = (p[0], p[1]);
                (1.0 - x).powi(2) + 100.0 * (y - x * x).powi(2)
            },
            &[-1.2, 1.0],
            0.5,
            1e-14,
            4000,
        );
        assert!((res.x[0] - 1.0).abs() < 1e-5 && (res.x[1] - 1.0).abs() < 1e-5, "{:?}", res.x);
    }

    #[test]
    fn bfgs_quadratic_and_rosenbrock() {
        let res = bfgs(|p| (p[0] - 3.0).powi(2) + 2.0 * (p[1] + 1.0).powi(2), &[0.0, 0.0], 1e-10, 200);
        assert!((res.x[0] - 3.0).abs() < 1e-6 && (res.x[1] + 1.0).abs() < 1e-6);
        let res = bfgs(
            |p| (1.0 - p[0]).powi(2) + 100.0 * (p[1] - p[0] * p[0]).powi(2),
            &[-1.2, 1.0],
            1e-9,
            500,
        );
        assert!((res.x[0] - 1.0).abs() < 1e-4 && (res.x[1] - 1.0).abs() < 1e-4, "{:?}", res.x);
    }

    #[test]
    fn pattern_search_non_smooth() {
        let res = pattern_search(
            |p| (p[0] - 0.7).abs() + (p[1] - 0.2).abs(),
            &[0.0, 0.0],
            &[0.3, 0.3],
            &[-1.0, -1.0],
            &[1.0, 1.0],
            1e-9,
            20_000,
        );
        assert!((res.x[0] - 0.7).abs() < 1e-7 && (res.x[1] - 0.2).abs() < 1e-7);
    }

    #[test]
    fn pattern_search_respects_bounds() {
        let res = pattern_search(|p| -p[0], &[0.5], &[0.4], &[0.0], &[1.0], 1e-10, 5000);
        assert_abs_diff_eq!(res.x[0], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn root_finder() {
        let r = bracketed_root(|x| x * x - 2.0, 0.0, 2.0, 1e-13).unwrap();
        assert_abs_diff_eq!(r, std::f64::consts::SQRT_2, epsilon = 1e-10);
        assert!(bracketed_root(|x| x * x + 1.0, -1.0, 1.0, 1e-12).is_none());
    }

    #[test]
    fn bound_transform_round_trip() {
        let b = Bound::new(0.2, 50.0);
        for &x in &[0.21, 1.0, 25.0, 49.9] {
            assert_abs_diff_eq!(b.to_external(b.to_internal(x)), x, epsilon = 1e-8);
        }
    }

    #[test]
    fn spline_reproduces_cubic_shape() {
        // natural spline is exact for linear data
        let x: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        let s = CubicSpline::new(&x, &y);
        for &t in &[0.5, 3.2, 8.9] {
            assert_abs_diff_eq!(s.eval(t), 2.0 * t + 1.0, epsilon = 1e-10);
        }
        // interpolates knots of a smooth bump and finds max near truth
        let x: Vec<f64> = (0..41).map(|i| -2.0 + i as f64 * 0.1).collect();
        let y: Vec<f64> = x.iter().map(|v| -(v - 0.37f64).powi(2)).collect();
        let s = CubicSpline::new(&x, &y);
        let mut best = (f64::NEG_INFINITY, 0.0);
        let mut t = -2.0;
        while t <= 2.0 {
            let v = s.eval(t);
            if v > best.0 {
                best = (v, t);
            }
            t += 1e-3;
        }
        assert!((best.1 - 0.37).abs() < 5e-3);
    }
}
