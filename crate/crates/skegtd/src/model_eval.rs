//! Competitor densities (normal, Student t, skew-normal, skew-t,
//! skew-Cauchy), their maximum-likelihood fits, and the information
//! criteria used for model comparison. All heavy-tailed competitors are
//! fitted as location-scale families; the free-parameter counts used in
//! the criteria reflect that (t: 3, SN: 3, SC: 3, ST: 4, SkeGTD: 5).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optim::bfgs;
use crate::report::Criteria;
use crate::rng::RngStream;
use crate::specfun::{ln_gamma, ln_normal_cdf};
use crate::tse::fit_tse;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    Normal,
    StudentT,
    SkewNormal,
    SkewT,
    SkewCauchy,
    SkeGtd,
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Normal => "normal",
            Family::StudentT => "t",
            Family::SkewNormal => "sn",
            Family::SkewT => "st",
            Family::SkewCauchy => "sc",
            Family::SkeGtd => "skegtd",
        }
    }

    pub fn rho(&self) -> usize {
        match self {
            Family::Normal => 2,
            Family::StudentT | Family::SkewNormal | Family::SkewCauchy => 3,
            Family::SkewT => 4,
            Family::SkeGtd => 5,
        }
    }

    pub fn from_name(s: &str) -> Option<Family> {
        Some(match s.to_ascii_lowercase().as_str() {
            "normal" | "n" => Family::Normal,
            "t" | "student" | "studentt" => Family::StudentT,
            "sn" | "skewnormal" => Family::SkewNormal,
            "st" | "skewt" => Family::SkewT,
            "sc" | "skewcauchy" => Family::SkewCauchy,
            "skegtd" => Family::SkeGtd,
            _ => return None,
        })
    }
}

/// A fitted candidate: family, its parameter vector (family-specific
/// layout) and the attained log-likelihood.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CandidateModel {
    pub family: Family,
    pub params: Vec<f64>,
    pub loglik: f64,
    pub rho: usize,
    pub n: usize,
}

/// AIC / BIC / EDC for a fitted candidate.
pub fn criteria(m: &CandidateModel, n: usize) -> Criteria {
    Criteria::from_loglik(m.loglik, m.rho, n)
}

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

pub fn normal_logpdf(mean: f64, sd: f64, x: f64) -> f64 {
    let z = (x - mean) / sd;
    -0.5 * z * z - sd.ln() - HALF_LN_2PI
}

/// Student-t density with `nu` degrees of freedom (standardized form).
pub fn t_logpdf(nu: f64, x: f64) -> f64 {
    ln_gamma((nu + 1.0) / 2.0) - ln_gamma(nu / 2.0) - 0.5 * (nu * std::f64::consts::PI).ln()
        - (nu + 1.0) / 2.0 * (x * x / nu).ln_1p()
}

/// Azzalini skew-normal log-density with shape `lambda`.
pub fn sn_logpdf(xi: f64, omega: f64, lambda: f64, x: f64) -> f64 {
    let z = (x - xi) / omega;
    2f64.ln() - omega.ln() - 0.5 * z * z - HALF_LN_2PI + ln_normal_cdf(lambda * z)
}

/// Fernandez-Steel skew-t log-density (normalized form, two branches
/// with the 2/(gamma + 1/gamma) factor).
pub fn st_logpdf(nu: f64, gamma: f64, x: f64) -> f64 {
    let norm = 2f64.ln() - (gamma + 1.0 / gamma).ln();
    if x <= 0.0 {
        norm + t_logpdf(nu, gamma * x)
    } else {
        norm + t_logpdf(nu, x / gamma)
    }
}

/// Skew-Cauchy log-density.
pub fn sc_logpdf(xi: f64, omega: f64, alpha: f64, x: f64) -> f64 {
    let z = (x - xi) / omega;
    let skew = 1.0 + alpha * z / (1.0 + z * z * (1.0 + alpha * alpha)).sqrt();
    -(std::f64::consts::PI * omega).ln() - (z * z).ln_1p() + skew.max(1e-300).ln()
}

/// Closed-form skew-Cauchy cdf (arctan form; derived by integrating the
/// odd part of the density in the variable sqrt(1 + (1+a^2) z^2)).
pub fn sc_cdf(xi: f64, omega: f64, alpha: f64, x: f64) -> f64 {
    let z = (x - xi) / omega;
    use std::f64::consts::PI;
    if alpha == 0.0 {
        return 0.5 + z.atan() / PI;
    }
    let u = (1.0 + (1.0 + alpha * alpha) * z * z).sqrt();
    let base = 0.5 - 0.5 * alpha.signum();
    (base + (z.atan() + (u / alpha).atan()) / PI).clamp(0.0, 1.0)
}

/// Skew-Cauchy quantile by monotone inversion of the closed-form cdf.
pub fn sc_quantile(xi: f64, omega: f64, alpha: f64, p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::domain("sc_quantile", format!("p must lie in (0,1), got {p}")));
    }
    // bracket in z by geometric widening around the Cauchy quantile
    let base = (std::f64::consts::PI * (p - 0.5)).tan();
    let mut lo = base - 1.0;
    let mut hi = base + 1.0;
    let f = |z: f64| sc_cdf(0.0, 1.0, alpha, z) - p;
    let mut step = 1.0;
    let mut k = 0;
    while f(lo) > 0.0 && k < 200 {
        step *= 2.0;
        lo -= step;
        k += 1;
    }
    step = 1.0;
    k = 0;
    while f(hi) < 0.0 && k < 200 {
        step *= 2.0;
        hi += step;
        k += 1;
    }
    let z = crate::optim::bracketed_root(f, lo, hi, 1e-13).ok_or(Error::NonConvergence {
        context: "sc_quantile",
        partial: lo,
    })?;
    Ok(xi + omega * z)
}

/// Inverse-cdf sampler for the skew-Cauchy.
pub fn sc_sample(xi: f64, omega: f64, alpha: f64, n: usize, rng: &mut RngStream) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let u = rng.uniform_open();
            sc_quantile(xi, omega, alpha, u).unwrap_or(xi)
        })
        .collect()
}

fn robust_location_scale(data: &[f64]) -> (f64, f64) {
    let n = data.len();
    let mut sorted = data.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = sorted[n / 2];
    let mut dev: Vec<f64> = sorted.iter().map(|x| (x - median).abs()).collect();
    dev.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mad = dev[n / 2].max(1e-12);
    (median, 1.4826 * mad)
}

fn maximize<F: Fn(&[f64]) -> f64 + Sync>(starts: &[Vec<f64>], nll: F) -> Result<(Vec<f64>, f64)> {
    let mut best: Option<(Vec<f64>, f64)> = None;
    for s in starts {
        let res = bfgs(|p| nll(p), s, 1e-8, 300);
        if !res.value.is_finite() {
            continue;
        }
        let better = match &best {
            Some((_, v)) => res.value < *v,
            None => true,
        };
        if better {
            best = Some((res.x, res.value));
        }
    }
    best.ok_or(Error::OptimFailed { context: "fit_candidate", message: "all starts diverged".into() })
}

/// Maximum-likelihood fit of one candidate family.
pub fn fit_candidate(family: Family, data: &[f64]) -> Result<CandidateModel> {
    let n = data.len();
    if n < 10 {
        return Err(Error::InsufficientSample { context: "fit_candidate", needed: 10, got: n });
    }
    let (med, rob_s) = robust_location_scale(data);
    let mean = data.iter().sum::<f64>() / n as f64;
    let sd = (data.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64).sqrt();
    let model = match family {
        Family::Normal => CandidateModel {
            family,
            params: vec![mean, sd],
            loglik: data.iter().map(|&x| normal_logpdf(mean, sd, x)).sum(),
            rho: 2,
            n,
        },
        Family::StudentT => {
            let starts = vec![
                vec![med, rob_s.ln(), 3f64.ln()],
                vec![med, rob_s.ln(), 8f64.ln()],
                vec![mean, sd.ln(), 2f64.ln()],
                vec![mean, sd.ln(), 30f64.ln()],
            ];
            let (p, v) = maximize(&starts, |p| {
                let (m, s, nu) = (p[0], p[1].exp(), p[2].exp().clamp(0.05, 1e3));
                -data.iter().map(|&x| t_logpdf(nu, (x - m) / s) - s.ln()).sum::<f64>()
            })?;
            CandidateModel {
                family,
                params: vec![p[0], p[1].exp(), p[2].exp().clamp(0.05, 1e3)],
                loglik: -v,
                rho: 3,
                n,
            }
        }
        Family::SkewNormal => {
            let starts = vec![
                vec![mean, sd.ln(), 1.0],
                vec![mean, sd.ln(), -1.0],
                vec![med, rob_s.ln(), 5.0],
                vec![med, rob_s.ln(), -5.0],
            ];
            // the shape is capped at |lambda| = 50 to tame the one-sided
            // boundary divergence of the SN likelihood
            let (p, v) = maximize(&starts, |p| {
                let (xi, om, la) = (p[0], p[1].exp(), p[2].clamp(-50.0, 50.0));
                -data.iter().map(|&x| sn_logpdf(xi, om, la, x)).sum::<f64>()
            })?;
            CandidateModel {
                family,
                params: vec![p[0], p[1].exp(), p[2].clamp(-50.0, 50.0)],
                loglik: -v,
                rho: 3,
                n,
            }
        }
        Family::SkewT => {
            let starts = vec![
                vec![med, rob_s.ln(), 3f64.ln(), 0.0],
                vec![med, rob_s.ln(), 8f64.ln(), 0.4],
                vec![med, rob_s.ln(), 3f64.ln(), -0.4],
                vec![mean, sd.ln(), 15f64.ln(), 0.0],
            ];
            let (p, v) = maximize(&starts, |p| {
                let (m, s, nu, g) = (p[0], p[1].exp(), p[2].exp().clamp(0.05, 1e3), p[3].exp().clamp(1e-3, 1e3));
                -data.iter().map(|&x| st_logpdf(nu, g, (x - m) / s) - s.ln()).sum::<f64>()
            })?;
            CandidateModel {
                family,
                params: vec![p[0], p[1].exp(), p[2].exp().clamp(0.05, 1e3), p[3].exp().clamp(1e-3, 1e3)],
                loglik: -v,
                rho: 4,
                n,
            }
        }
        Family::SkewCauchy => {
            let starts = vec![
                vec![med, rob_s.ln(), 0.0],
                vec![med, rob_s.ln(), 4.0],
                vec![med, rob_s.ln(), -4.0],
                vec![med, rob_s.ln(), 20.0],
            ];
            let (p, v) = maximize(&starts, |p| {
                let (xi, om, al) = (p[0], p[1].exp(), p[2].clamp(-200.0, 200.0));
                -data.iter().map(|&x| sc_logpdf(xi, om, al, x)).sum::<f64>()
            })?;
            CandidateModel {
                family,
                params: vec![p[0], p[1].exp(), p[2].clamp(-200.0, 200.0)],
                loglik: -v,
                rho: 3,
                n,
            }
        }
        Family::SkeGtd => {
            let (rep, _) = fit_tse(data, None, 41)?;
            CandidateModel {
                family,
                params: vec![
                    rep.params.mu(),
                    rep.params.sigma(),
                    rep.params.r(),
                    rep.params.alpha(),
                    rep.params.beta(),
                ],
                loglik: rep.loglik,
                rho: 5,
                n,
            }
        }
    };
    if !model.loglik.is_finite() {
        return Err(Error::OptimFailed { context: "fit_candidate", message: format!("{} fit non-finite", family.name()) });
    }
    Ok(model)
}

/// Recompute the log-likelihood of a fitted candidate at its reported
/// parameters (consistency check used by tests and reports).
pub fn recompute_loglik(m: &CandidateModel, data: &[f64]) -> f64 {
    match m.family {
        Family::Normal => data.iter().map(|&x| normal_logpdf(m.params[0], m.params[1], x)).sum(),
        Family::StudentT => data
            .iter()
            .map(|&x| t_logpdf(m.params[2], (x - m.params[0]) / m.params[1]) - m.params[1].ln())
            .sum(),
        Family::SkewNormal => data.iter().map(|&x| sn_logpdf(m.params[0], m.params[1], m.params[2], x)).sum(),
        Family::SkewT => data
            .iter()
            .map(|&x| st_logpdf(m.params[2], m.params[3], (x - m.params[0]) / m.params[1]) - m.params[1].ln())
            .sum(),
        Family::SkewCauchy => data.iter().map(|&x| sc_logpdf(m.params[0], m.params[1], m.params[2], x)).sum(),
        Family::SkeGtd => {
            let p = crate::dist::SkeGtdParams::new(m.params[0], m.params[1], m.params[2], m.params[3], m.params[4])
                .expect("stored parameters are valid");
            data.iter().map(|&x| p.logpdf(x)).sum()
        }
    }
}
