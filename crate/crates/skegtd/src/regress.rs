//! Simple linear regression with SkeGTD errors: y_i = b0 + b1 x_i + e_i,
//! e_i ~ SkeGTD(0, sigma, r, alpha, beta). The location of the error law
//! is pinned at zero, so the fitted line tracks the conditional mode;
//! the adjusted intercept b0 + E(e) gives the conditional-mean line.

use serde::{Deserialize, Serialize};

use crate::dist::SkeGtdParams;
use crate::error::{Error, Result};
use crate::optim::{bfgs, invert_matrix, Bound};
use crate::tse::fit_tse;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegressionFit {
    pub beta0: f64,
    pub beta1: f64,
    pub sigma: f64,
    pub r: f64,
    pub alpha: f64,
    pub beta: f64,
    pub loglik: f64,
    pub n: usize,
    /// Empirical-information standard errors for
    /// (beta0, beta1, sigma, r, alpha, beta).
    pub standard_errors: Option<[f64; 6]>,
    /// beta0 + E(e); present when alpha*beta > 1.
    pub adjusted_intercept: Option<f64>,
    pub converged: bool,
    pub boundary: bool,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub warnings: Vec<String>,
}

const R_BOUND: Bound = Bound { lo: -0.999, hi: 0.999 };
const ALPHA_BOUND: Bound = Bound { lo: 0.05, hi: 60.0 };
const BETA_BOUND: Bound = Bound { lo: 0.1, hi: 30.0 };

fn unpack(p: &[f64]) -> (f64, f64, f64, f64, f64, f64) {
    (
        p[0],
        p[1],
        p[2].exp(),
        R_BOUND.to_external(p[3]),
        ALPHA_BOUND.to_external(p[4]),
        BETA_BOUND.to_external(p[5]),
    )
}

fn total_loglik(x: &[f64], y: &[f64], b0: f64, b1: f64, sigma: f64, r: f64, alpha: f64, beta: f64) -> f64 {
    match SkeGtdParams::new(0.0, sigma, r, alpha, beta) {
        Ok(err) => x
            .iter()
            .zip(y)
            .map(|(&xi, &yi)| err.logpdf(yi - b0 - b1 * xi))
            .sum(),
        Err(_) => f64::NEG_INFINITY,
    }
}

/// Maximum-likelihood regression fit. `fix_r` pins the skewness (used
/// for the nested symmetric comparison).
pub fn fit_regression_with(x: &[f64], y: &[f64], fix_r: Option<f64>) -> Result<RegressionFit> {
    let n = x.len();
    if n != y.len() {
        return Err(Error::Data(format!("x ({}) and y ({}) lengths differ", n, y.len())));
    }
    if n < 10 {
        return Err(Error::InsufficientSample { context: "fit_regression", needed: 10, got: n });
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    if sxx <= 0.0 {
        return Err(Error::Data("covariate is constant".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(&a, &b)| (a - mx) * (b - my)).sum();
    let b1_ols = sxy / sxx;
    let b0_ols = my - b1_ols * mx;
    let resid: Vec<f64> = x.iter().zip(y).map(|(&xi, &yi)| yi - b0_ols - b1_ols * xi).collect();
    let resid_sd = (resid.iter().map(|e| e * e).sum::<f64>() / n as f64).sqrt().max(1e-12);

    // error-law start from the two-step fit of the OLS residuals; its
    // location estimate shifts the intercept so the error mode sits at 0
    let mut starts: Vec<[f64; 6]> = Vec::new();
    if let Ok((tse, _)) = fit_tse(&resid, None, 21) {
        let p = tse.params;
        starts.push([
            b0_ols + p.mu(),
            b1_ols,
            p.sigma().max(1e-10).ln(),
            R_BOUND.to_internal(p.r().clamp(-0.99, 0.99)),
            ALPHA_BOUND.to_internal(p.alpha().clamp(0.06, 59.0)),
            BETA_BOUND.to_internal(p.beta().clamp(0.11, 29.0)),
        ]);
    }
    for (a0, b0s) in [(2.0, 2.0), (1.0, 3.0), (8.0, 1.2)] {
        starts.push([
            b0_ols,
            b1_ols,
            resid_sd.ln(),
            R_BOUND.to_internal(0.0),
            ALPHA_BOUND.to_internal(a0),
            BETA_BOUND.to_internal(b0s),
        ]);
    }
    let objective = |p: &[f64]| {
        let (b0, b1, sigma, mut r, alpha, beta) = unpack(p);
        if let Some(rf) = fix_r {
            r = rf;
        }
        -total_loglik(x, y, b0, b1, sigma, r, alpha, beta)
    };
    let mut best: Option<(Vec<f64>, f64, bool)> = None;
    for s in &starts {
        let res = bfgs(objective, s, 1e-9, 500);
        if !res.value.is_finite() {
            continue;
        }
        let better = match &best {
            Some((_, v, _)) => res.value < *v,
            None => true,
        };
        if better {
            best = Some((res.x, res.value, res.converged));
        }
    }
    let (p, neg_ll, converged) =
        best.ok_or(Error::OptimFailed { context: "fit_regression", message: "all starts diverged".into() })?;
    let (b0, b1, sigma, mut r, alpha, beta) = unpack(&p);
    if let Some(rf) = fix_r {
        r = rf;
    }
    let loglik = -neg_ll;
    let boundary = r.abs() > 0.99 || alpha < 0.055 || alpha > 59.0 || beta < 0.11 || beta > 29.0;
    let mut warnings = Vec::new();
    if boundary {
        warnings.push("estimate near a search boundary".to_string());
    }

    // empirical information: average outer product of per-observation
    // numeric scores in the natural parameterization
    let theta = [b0, b1, sigma, r, alpha, beta];
    let standard_errors = empirical_se(x, y, &theta);
    let err_params = SkeGtdParams::new(0.0, sigma, r, alpha, beta)?;
    let adjusted_intercept = err_params.summary().mean.map(|m| b0 + m);
    Ok(RegressionFit {
        beta0: b0,
        beta1: b1,
        sigma,
        r,
        alpha,
        beta,
        loglik,
        n,
        standard_errors,
        adjusted_intercept,
        converged,
        boundary,
        warnings,
    })
}

pub fn fit_regression(x: &[f64], y: &[f64]) -> Result<RegressionFit> {
    fit_regression_with(x, y, None)
}

fn empirical_se(x: &[f64], y: &[f64], theta: &[f64; 6]) -> Option<[f64; 6]> {
    let n = x.len();
    let h = 1e-5;
    let logpdf_i = |t: &[f64; 6], xi: f64, yi: f64| -> f64 {
        match SkeGtdParams::new(0.0, t[2], t[3].clamp(-1.0, 1.0), t[4].max(1e-8), t[5].max(1e-8)) {
            Ok(p) => p.logpdf(yi - t[0] - t[1] * xi),
            Err(_) => f64::NEG_INFINITY,
        }
    };
    let mut info = vec![vec![0.0f64; 6]; 6];
    for i in 0..n {
        let mut score = [0.0; 6];
        for k in 0..6 {
            let step = h * (1.0 + theta[k].abs());
            let mut tp = *theta;
            tp[k] += step;
            let mut tm = *theta;
            tm[k] -= step;
            let fp = logpdf_i(&tp, x[i], y[i]);
            let fm = logpdf_i(&tm, x[i], y[i]);
            if !(fp.is_finite() && fm.is_finite()) {
                return None;
            }
            score[k] = (fp - fm) / (2.0 * step);
        }
        for a in 0..6 {
            for b in 0..6 {
                info[a][b] += score[a] * score[b];
            }
        }
    }
    let inv = invert_matrix(&info)?;
    let mut se = [0.0; 6];
    for (k, item) in se.iter_mut().enumerate() {
        if inv[k][k] <= 0.0 {
            return None;
        }
        *item = inv[k][k].sqrt();
    }
    Some(se)
}

/// Residuals and a fitted-density grid for the histogram overlay.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResidualReport {
    pub residuals: Vec<f64>,
    pub grid_x: Vec<f64>,
    pub grid_density: Vec<f64>,
}

pub fn residual_report(fit: &RegressionFit, x: &[f64], y: &[f64]) -> Result<ResidualReport> {
    let residuals: Vec<f64> = x.iter().zip(y).map(|(&xi, &yi)| yi - fit.beta0 - fit.beta1 * xi).collect();
    let lo = residuals.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = residuals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let pad = 0.1 * (hi - lo).max(1e-12);
    let (a, b) = (lo - pad, hi + pad);
    let err = SkeGtdParams::new(0.0, fit.sigma, fit.r, fit.alpha, fit.beta)?;
    let m = 512;
    let mut grid_x = Vec::with_capacity(m);
    let mut grid_density = Vec::with_capacity(m);
    for i in 0..m {
        let t = a + (b - a) * i as f64 / (m - 1) as f64;
        grid_x.push(t);
        grid_density.push(err.pdf(t));
    }
    Ok(ResidualReport { residuals, grid_x, grid_density })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use approx::assert_abs_diff_eq;

    fn synth(n: usize, seed: u64, b0: f64, b1: f64, err: &SkeGtdParams) -> (Vec<f64>, Vec<f64>) {
        let mut rng = RngStream::new(seed);
        let x: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
        let y: Vec<f64> = x.iter().map(|&xi| b0 + b1 * xi + err.draw(&mut rng)).collect();
        (x, y)
    }

    #[test]
    fn recovers_known_line_within_three_se() {
        let err = SkeGtdParams::new(0.0, 0.1, 0.0, 8.0, 2.0).unwrap();
        let (x, y) = synth(2000, 12, 1.0, 2.0, &err);
        let fit = fit_regression(&x, &y).unwrap();
        let se = fit.standard_errors.expect("standard errors available");
        assert!((fit.beta0 - 1.0).abs() < 3.0 * se[0], "b0 = {} se {}", fit.beta0, se[0]);
        assert!((fit.beta1 - 2.0).abs() < 3.0 * se[1], "b1 = {} se {}", fit.beta1, se[1]);
        assert!((fit.sigma - 0.1).abs() < 0.05);
        // numeric gradient at the optimum is small
        let g = |f: &dyn Fn(&RegressionFit) -> f64, h: f64, k: usize| {
            let mut tp = [fit.beta0, fit.beta1, fit.sigma, fit.r, fit.alpha, fit.beta];
            tp[k] += h;
            let up = total_loglik(&x, &y, tp[0], tp[1], tp[2], tp[3], tp[4], tp[5]);
            tp[k] -= 2.0 * h;
            let dn = total_loglik(&x, &y, tp[0], tp[1], tp[2], tp[3], tp[4], tp[5]);
            let _ = f;
            (up - dn) / (2.0 * h)
        };
        let id = |f: &RegressionFit| f.beta0;
        for k in 0..6 {
            let grad = g(&id, 1e-5, k);
            assert!(grad.abs() < 1e-3 * x.len() as f64, "param {k} gradient {grad}");
        }
    }

    #[test]
    fn near_exact_affine_data() {
        let n = 60;
        let mut rng = RngStream::new(3);
        let x: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
        let y: Vec<f64> = x.iter().enumerate().map(|(i, &xi)| 0.5 + 3.0 * xi + 1e-9 * ((i % 7) as f64 - 3.0)).collect();
        let fit = fit_regression(&x, &y).unwrap();
        assert!((fit.beta1 - 3.0).abs() < 1e-6, "b1 = {}", fit.beta1);
        // residuals of the exact fit all vanish
        let rep = residual_report(&fit, &x, &y).unwrap();
        assert!(rep.residuals.iter().all(|e| e.abs() < 1e-5));
    }

    #[test]
    fn intercept_shift_equivariance() {
        let err = SkeGtdParams::new(0.0, 0.5, 0.4, 2.0, 2.0).unwrap();
        let (x, y) = synth(400, 7, -1.0, 0.7, &err);
        let fit1 = fit_regression(&x, &y).unwrap();
        let y2: Vec<f64> = y.iter().map(|v| v + 5.0).collect();
        let fit2 = fit_regression(&x, &y2).unwrap();
        assert_abs_diff_eq!(fit2.beta0, fit1.beta0 + 5.0, epsilon = 1e-4);
        assert_abs_diff_eq!(fit2.beta1, fit1.beta1, epsilon = 1e-5);
        assert_abs_diff_eq!(fit2.sigma, fit1.sigma, epsilon = 1e-5);
        assert_abs_diff_eq!(fit2.r, fit1.r, epsilon = 1e-4);
    }

    #[test]
    fn skewed_fit_dominates_nested_symmetric() {
        let err = SkeGtdParams::new(0.0, 0.3, 0.6, 2.0, 2.0).unwrap();
        let (x, y) = synth(300, 19, 0.2, 1.1, &err);
        let full = fit_regression(&x, &y).unwrap();
        let sym = fit_regression_with(&x, &y, Some(0.0)).unwrap();
        assert!(full.loglik >= sym.loglik - 1e-6, "{} vs {}", full.loglik, sym.loglik);
    }

    #[test]
    fn residual_density_grid_mass() {
        let err = SkeGtdParams::new(0.0, 0.5, 0.3, 3.0, 2.0).unwrap();
        let (x, y) = synth(500, 23, 1.0, -0.5, &err);
        let fit = fit_regression(&x, &y).unwrap();
        let rep = residual_report(&fit, &x, &y).unwrap();
        // trapezoid mass of the density grid covers nearly everything
        let mut mass = 0.0;
        for i in 1..rep.grid_x.len() {
            mass += 0.5 * (rep.grid_density[i] + rep.grid_density[i - 1]) * (rep.grid_x[i] - rep.grid_x[i - 1]);
        }
        assert!(mass >= 0.99, "grid mass {mass}");
        // residual mean minus fitted E(e) is near zero
        let rmean = rep.residuals.iter().sum::<f64>() / rep.residuals.len() as f64;
        let emean = fit.adjusted_intercept.unwrap() - fit.beta0;
        let sd = (rep.residuals.iter().map(|e| (e - rmean) * (e - rmean)).sum::<f64>() / (rep.residuals.len() as f64 - 1.0)).sqrt();
        let se = sd / (rep.residuals.len() as f64).sqrt();
        assert!((rmean - emean).abs() < 3.0 * se, "residual mean {rmean} vs E(e) {emean} (se {se})");
    }

    #[test]
    fn input_validation() {
        assert!(fit_regression(&[1.0; 12], &[1.0; 12]).is_err()); // constant covariate
        assert!(fit_regression(&[1.0, 2.0], &[1.0, 2.0]).is_err()); // too small
        assert!(fit_regression(&[1.0, 2.0, 3.0], &[1.0, 2.0]).is_err()); // length mismatch
    }
}
