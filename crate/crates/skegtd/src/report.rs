//! Fit reports, information criteria and the dataset container used by
//! the CLI front end.

use serde::{Deserialize, Serialize};

use crate::dist::SkeGtdParams;
use crate::error::{Error, Result};

/// Penalized-likelihood criteria: AIC = -2l + 2p, BIC = -2l + ln(n) p,
/// EDC = -2l + 0.2 sqrt(n) p.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Criteria {
    pub aic: f64,
    pub bic: f64,
    pub edc: f64,
}

impl Criteria {
    pub fn from_loglik(loglik: f64, rho: usize, n: usize) -> Self {
        let p = rho as f64;
        let n = n as f64;
        Criteria {
            aic: -2.0 * loglik + 2.0 * p,
            bic: -2.0 * loglik + n.ln() * p,
            edc: -2.0 * loglik + 0.2 * n.sqrt() * p,
        }
    }
}

/// Output of one parameter-estimation run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitReport {
    pub method: String,
    pub params: SkeGtdParams,
    pub n: usize,
    pub loglik: f64,
    /// Number of free parameters counted in the criteria.
    pub rho: usize,
    pub criteria: Criteria,
    /// Asymptotic standard errors for (r, alpha, beta), when available.
    pub standard_errors: Option<[f64; 3]>,
    pub iterations: usize,
    pub converged: bool,
    /// An estimate sits on the search boundary.
    pub boundary: bool,
    /// Residual of the estimating equations at the reported solution.
    pub residual_norm: Option<f64>,
    /// Log-likelihood after each accepted iteration (EM only).
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub loglik_trace: Vec<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub warnings: Vec<String>,
}

/// Column data parsed from a delimited text file. Rows that fail to
/// parse are skipped and counted rather than aborting the load.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Dataset {
    pub values: Vec<f64>,
    pub covariate: Option<Vec<f64>>,
    pub source: String,
    pub rows_skipped: usize,
    pub skip_reasons: Vec<String>,
}

impl Dataset {
    /// Parse one- or two-column CSV text. `want_covariate` demands two
    /// columns (covariate first, response second, matching `x,y`).
    pub fn parse_csv(text: &str, source: &str, want_covariate: bool) -> Result<Dataset> {
        let mut values = Vec::new();
        let mut cov = Vec::new();
        let mut skipped = 0usize;
        let mut reasons = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim().trim_start_matches('\u{feff}');
            if line.is_empty() {
                skipped += 1;
                reasons.push(format!("line {}: blank", lineno + 1));
                continue;
            }
            let fields: Vec<&str> = line.split(&[',', ';', '\t', ' ']).filter(|f| !f.is_empty()).collect();
            let parse = |s: &str| s.trim().parse::<f64>().ok().filter(|v| v.is_finite());
            if want_covariate {
                let pair = if fields.len() >= 2 { (parse(fields[0]), parse(fields[1])) } else { (None, None) };
                match pair {
                    (Some(x), Some(y)) => {
                        cov.push(x);
                        values.push(y);
                    }
                    _ => {
                        skipped += 1;
                        reasons.push(format!("line {}: not two numeric columns", lineno + 1));
                    }
                }
            } else {
                match fields.first().and_then(|f| parse(f)) {
                    Some(v) => values.push(v),
                    None => {
                        skipped += 1;
                        reasons.push(format!("line {}: not numeric", lineno + 1));
                    }
                }
            }
        }
        if values.is_empty() {
            return Err(Error::Data(format!("{source}: no usable rows")));
        }
        Ok(Dataset {
            values,
            covariate: if want_covariate { Some(cov) } else { None },
            source: source.to_string(),
            rows_skipped: skipped,
            skip_reasons: reasons,
        })
    }

    pub fn load(path: &std::path::Path, want_covariate: bool) -> Result<Dataset> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::parse_csv(&text, &path.display().to_string(), want_covariate)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn criteria_arithmetic() {
        let c = Criteria::from_loglik(-100.0, 3, 100);
        assert_eq!(c.aic, 206.0);
        assert_eq!(c.edc, 206.0); // 0.2 * 10 * 3 = 6
        assert!((c.bic - (200.0 + 3.0 * (100f64).ln())).abs() < 1e-12);
    }

    #[test]
    fn csv_skips_bad_rows_with_diagnostics() {
        let text = "1.5\n\nnot_a_number\n2.5\n3.5\n";
        let d = Dataset::parse_csv(text, "mem", false).unwrap();
        assert_eq!(d.values, vec![1.5, 2.5, 3.5]);
        assert_eq!(d.rows_skipped, 2);
        // header line is skipped, not fatal
        let d = Dataset::parse_csv("height\n1.0\n2.0\n", "mem", false).unwrap();
        assert_eq!(d.values.len(), 2);
        assert_eq!(d.rows_skipped, 1);
    }

    #[test]
    fn csv_rejects_non_finite_and_empty() {
        let d = Dataset::parse_csv("1.0\ninf\nnan\n2.0\n", "mem", false).unwrap();
        assert_eq!(d.values, vec![1.0, 2.0]);
        assert_eq!(d.rows_skipped, 2);
        assert!(Dataset::parse_csv("junk\n", "mem", false).is_err());
    }

    #[test]
    fn csv_two_column_mode() {
        let d = Dataset::parse_csv("x,y\n0.1,0.2\n0.3,0.4\n", "mem", true).unwrap();
        assert_eq!(d.covariate.as_ref().unwrap(), &vec![0.1, 0.3]);
        assert_eq!(d.values, vec![0.2, 0.4]);
        assert_eq!(d.rows_skipped, 1);
    }
}
