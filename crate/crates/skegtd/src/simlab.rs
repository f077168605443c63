//! Seeded Monte Carlo experiment engine: parameter-recovery studies
//! (average, relative bias and MSE per estimator and sample size) and
//! model-selection studies against skew-Cauchy data. Replicates run in
//! parallel on split RNG streams keyed by replicate index, so results
//! are identical for any thread count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist::SkeGtdParams;
use crate::error::{Error, Result};
use crate::lmom::fit_lme;
use crate::mle::fit_mle;
use crate::model_eval::{criteria, fit_candidate, sc_sample, Family};
use crate::rng::RngStream;
use crate::tse::fit_tse;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Estimator {
    Mle,
    Lme,
    Tse,
}

impl Estimator {
    pub fn name(&self) -> &'static str {
        match self {
            Estimator::Mle => "mle",
            Estimator::Lme => "lme",
            Estimator::Tse => "tse",
        }
    }

    pub fn from_name(s: &str) -> Option<Estimator> {
        Some(match s.trim().to_ascii_lowercase().as_str() {
            "mle" => Estimator::Mle,
            "lme" => Estimator::Lme,
            "tse" => Estimator::Tse,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExperimentKind {
    Recovery,
    Selection,
}

/// Declarative experiment configuration; `seed` fixes everything.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub truth: SkeGtdParams,
    pub sample_sizes: Vec<usize>,
    pub replicates: usize,
    pub estimators: Vec<Estimator>,
    pub seed: u64,
    /// Skew-Cauchy truth for selection studies (xi, omega, alpha).
    pub sc_truth: (f64, f64, f64),
    pub competitors: Vec<Family>,
}

impl ExperimentSpec {
    pub fn recovery(truth: SkeGtdParams, sample_sizes: Vec<usize>, replicates: usize, estimators: Vec<Estimator>, seed: u64) -> Self {
        ExperimentSpec {
            kind: ExperimentKind::Recovery,
            truth,
            sample_sizes,
            replicates,
            estimators,
            seed,
            sc_truth: (-1.8, 0.8, 18.0),
            competitors: vec![],
        }
    }

    pub fn selection(sc_truth: (f64, f64, f64), sample_sizes: Vec<usize>, replicates: usize, competitors: Vec<Family>, seed: u64) -> Self {
        ExperimentSpec {
            kind: ExperimentKind::Selection,
            truth: SkeGtdParams::normalized(0.0, 1.0, 2.0).expect("placeholder params"),
            sample_sizes,
            replicates,
            estimators: vec![],
            seed,
            sc_truth,
            competitors,
        }
    }

    /// Parse the plain-text `key = value` experiment format.
    pub fn parse(text: &str) -> Result<ExperimentSpec> {
        let mut map = std::collections::BTreeMap::new();
        for raw in text.lines() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Data(format!("experiment spec line is not `key = value`: {line}")))?;
            map.insert(k.trim().to_ascii_lowercase(), v.trim().to_string());
        }
        let get_f = |k: &str, d: f64| -> Result<f64> {
            match map.get(k) {
                Some(v) => v.parse::<f64>().map_err(|_| Error::Data(format!("bad number for {k}: {v}"))),
                None => Ok(d),
            }
        };
        let kind = match map.get("kind").map(|s| s.as_str()) {
            Some("recovery") | None => ExperimentKind::Recovery,
            Some("selection") => ExperimentKind::Selection,
            Some(other) => return Err(Error::Data(format!("unknown experiment kind {other}"))),
        };
        let sample_sizes: Vec<usize> = map
            .get("n")
            .map(|s| {
                s.split(',')
                    .map(|t| t.trim().parse::<usize>().map_err(|_| Error::Data(format!("bad sample size {t}"))))
                    .collect::<Result<Vec<_>>>()
            })
            .transpose()?
            .unwrap_or_else(|| vec![100]);
        if sample_sizes.iter().any(|&n| n == 0) {
            return Err(Error::Data("sample sizes must be positive".into()));
        }
        let replicates = map
            .get("replicates")
            .map(|s| s.parse::<usize>().map_err(|_| Error::Data(format!("bad replicates {s}"))))
            .transpose()?
            .unwrap_or(500);
        if replicates == 0 {
            return Err(Error::Data("replicates must be >= 1".into()));
        }
        let seed = map
            .get("seed")
            .map(|s| s.parse::<u64>().map_err(|_| Error::Data(format!("bad seed {s}"))))
            .transpose()?
            .unwrap_or(1);
        match kind {
            ExperimentKind::Recovery => {
                let truth = SkeGtdParams::new(
                    get_f("mu", 0.0)?,
                    get_f("sigma", 1.0)?,
                    get_f("r", 0.0)?,
                    get_f("alpha", 2.0)?,
                    get_f("beta", 2.0)?,
                )?;
                let estimators = map
                    .get("estimators")
                    .map(|s| {
                        s.split(',')
                            .map(|t| Estimator::from_name(t).ok_or_else(|| Error::Data(format!("unknown estimator {t}"))))
                            .collect::<Result<Vec<_>>>()
                    })
                    .transpose()?
                    .unwrap_or_else(|| vec![Estimator::Mle]);
                Ok(ExperimentSpec::recovery(truth, sample_sizes, replicates, estimators, seed))
            }
            ExperimentKind::Selection => {
                let sc = (get_f("xi", -1.8)?, get_f("omega", 0.8)?, get_f("sc_alpha", 18.0)?);
                if !(sc.1 > 0.0) {
                    return Err(Error::Data("omega must be positive".into()));
                }
                let competitors = map
                    .get("competitors")
                    .map(|s| {
                        s.split(',')
                            .map(|t| Family::from_name(t.trim()).ok_or_else(|| Error::Data(format!("unknown family {t}"))))
                            .collect::<Result<Vec<_>>>()
                    })
                    .transpose()?
                    .unwrap_or_else(|| vec![Family::Normal, Family::StudentT, Family::SkewNormal, Family::SkewT]);
                Ok(ExperimentSpec::selection(sc, sample_sizes, replicates, competitors, seed))
            }
        }
    }
}

/// One recovery-table row: summary of an estimator's sampling behavior
/// for one parameter at one sample size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryRow {
    pub n: usize,
    pub estimator: String,
    pub parameter: String,
    pub truth: f64,
    pub average: f64,
    /// Mean absolute relative error; NaN when the true value is zero.
    pub rbias: f64,
    pub mse: f64,
    pub replicates_used: usize,
    pub exclusion_rate: f64,
}

/// One selection-table row: how often the SkeGTD beats one competitor
/// under one criterion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionRow {
    pub n: usize,
    pub criterion: String,
    pub competitor: String,
    pub percent: f64,
    pub replicates_used: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ExperimentTable {
    Recovery(Vec<RecoveryRow>),
    Selection(Vec<SelectionRow>),
}

fn summarize(n: usize, estimator: Estimator, names: &[&str], truths: &[f64], draws: &[Vec<f64>], total: usize) -> Vec<RecoveryRow> {
    let used = draws.len();
    names
        .iter()
        .zip(truths)
        .enumerate()
        .map(|(j, (name, &truth))| {
            let avg = draws.iter().map(|d| d[j]).sum::<f64>() / used.max(1) as f64;
            let mse = draws.iter().map(|d| (d[j] - truth) * (d[j] - truth)).sum::<f64>() / used.max(1) as f64;
            let rbias = if truth != 0.0 {
                draws.iter().map(|d| ((d[j] - truth) / truth).abs()).sum::<f64>() / used.max(1) as f64
            } else {
                f64::NAN
            };
            RecoveryRow {
                n,
                estimator: estimator.name().to_string(),
                parameter: name.to_string(),
                truth,
                average: avg,
                rbias,
                mse,
                replicates_used: used,
                exclusion_rate: 1.0 - used as f64 / total as f64,
            }
        })
        .collect()
}

/// Experiment I: draw replicates from the truth, fit with each
/// estimator, tabulate average / Rbias / MSE. Failed fits are excluded
/// and the exclusion rate reported.
pub fn run_recovery(spec: &ExperimentSpec) -> Result<ExperimentTable> {
    let root = RngStream::new(spec.seed);
    let mut rows = Vec::new();
    let normalized = SkeGtdParams::normalized(spec.truth.r(), spec.truth.alpha(), spec.truth.beta())?;
    for (ni, &n) in spec.sample_sizes.iter().enumerate() {
        for (ei, &est) in spec.estimators.iter().enumerate() {
            let results: Vec<Option<Vec<f64>>> = (0..spec.replicates)
                .into_par_iter()
                .map(|rep| {
                    let mut rng = root.split(((ni * 16 + ei) as u64) << 32 | rep as u64);
                    match est {
                        Estimator::Mle => {
                            let data = normalized.sample(n, &mut rng);
                            fit_mle(&data, None, 500).ok().map(|f| vec![f.params.r(), f.params.alpha(), f.params.beta()])
                        }
                        Estimator::Lme => {
                            let data = normalized.sample(n, &mut rng);
                            fit_lme(&data).ok().map(|f| vec![f.params.r(), f.params.alpha(), f.params.beta()])
                        }
                        Estimator::Tse => {
                            let data = spec.truth.sample(n, &mut rng);
                            fit_tse(&data, None, 41).ok().map(|(f, _)| {
                                vec![f.params.mu(), f.params.sigma(), f.params.r(), f.params.alpha(), f.params.beta()]
                            })
                        }
                    }
                })
                .collect();
            let ok: Vec<Vec<f64>> = results.into_iter().flatten().collect();
            let (names, truths): (Vec<&str>, Vec<f64>) = match est {
                Estimator::Tse => (
                    vec!["mu", "sigma", "r", "alpha", "beta"],
                    vec![spec.truth.mu(), spec.truth.sigma(), spec.truth.r(), spec.truth.alpha(), spec.truth.beta()],
                ),
                _ => (vec!["r", "alpha", "beta"], vec![spec.truth.r(), spec.truth.alpha(), spec.truth.beta()]),
            };
            rows.extend(summarize(n, est, &names, &truths, &ok, spec.replicates));
        }
    }
    Ok(ExperimentTable::Recovery(rows))
}

/// Experiment II: skew-Cauchy data, SkeGTD fitted against each
/// competitor, pairwise comparison under AIC / BIC / EDC. Ties count
/// against the SkeGTD (a strict improvement is required).
pub fn run_selection(spec: &ExperimentSpec) -> Result<ExperimentTable> {
    let root = RngStream::new(spec.seed);
    let (xi, omega, al) = spec.sc_truth;
    let mut rows = Vec::new();
    for (ni, &n) in spec.sample_sizes.iter().enumerate() {
        // per replicate: SkeGTD criteria and per-competitor criteria
        let results: Vec<(Option<[f64; 3]>, Vec<Option<[f64; 3]>>)> = (0..spec.replicates)
            .into_par_iter()
            .map(|rep| {
                let mut rng = root.split((ni as u64) << 40 | rep as u64);
                let data = sc_sample(xi, omega, al, n, &mut rng);
                let ske = fit_candidate(Family::SkeGtd, &data)
                    .ok()
                    .map(|m| {
                        let c = criteria(&m, n);
                        [c.aic, c.bic, c.edc]
                    });
                let comps = spec
                    .competitors
                    .iter()
                    .map(|&fam| {
                        fit_candidate(fam, &data).ok().map(|m| {
                            let c = criteria(&m, n);
                            [c.aic, c.bic, c.edc]
                        })
                    })
                    .collect();
                (ske, comps)
            })
            .collect();
        for (ci, &fam) in spec.competitors.iter().enumerate() {
            for (k, crit) in ["aic", "bic", "edc"].iter().enumerate() {
                let mut wins = 0usize;
                let mut used = 0usize;
                for (ske, comps) in &results {
                    if let (Some(s), Some(c)) = (ske, &comps[ci]) {
                        used += 1;
                        if s[k] < c[k] {
                            wins += 1;
                        }
                    }
                }
                rows.push(SelectionRow {
                    n,
                    criterion: crit.to_string(),
                    competitor: fam.name().to_string(),
                    percent: 100.0 * wins as f64 / used.max(1) as f64,
                    replicates_used: used,
                });
            }
        }
    }
    Ok(ExperimentTable::Selection(rows))
}

pub fn run(spec: &ExperimentSpec) -> Result<ExperimentTable> {
    match spec.kind {
        ExperimentKind::Recovery => run_recovery(spec),
        ExperimentKind::Selection => run_selection(spec),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_parsing_round_trip() {
        let text = "kind = recovery\nr = 0.7\nalpha = 3\nbeta = 2.5\nn = 50, 100\nreplicates = 10\nestimators = mle, lme\nseed = 9\n";
        let spec = ExperimentSpec::parse(text).unwrap();
        assert_eq!(spec.kind, ExperimentKind::Recovery);
        assert_eq!(spec.sample_sizes, vec![50, 100]);
        assert_eq!(spec.replicates, 10);
        assert_eq!(spec.estimators, vec![Estimator::Mle, Estimator::Lme]);
        assert_eq!(spec.seed, 9);
        assert!(ExperimentSpec::parse("kind = sorcery\n").is_err());
        assert!(ExperimentSpec::parse("n = 0\n").is_err());
        // comments and defaults
        let sel = ExperimentSpec::parse("kind = selection # the paper's setting\nreplicates = 5\n").unwrap();
        assert_eq!(sel.sc_truth, (-1.8, 0.8, 18.0));
        assert_eq!(sel.competitors.len(), 4);
    }

    #[test]
    fn single_replicate_equals_direct_fit() {
        let truth = SkeGtdParams::normalized(0.5, 3.0, 2.0).unwrap();
        let spec = ExperimentSpec::recovery(truth, vec![120], 1, vec![Estimator::Mle], 33);
        let table = run_recovery(&spec).unwrap();
        let ExperimentTable::Recovery(rows) = table else { panic!() };
        // reproduce the same stream by hand
        let mut rng = RngStream::new(33).split(0);
        let data = truth.sample(120, &mut rng);
        let fit = fit_mle(&data, None, 500).unwrap();
        let r_row = rows.iter().find(|r| r.parameter == "r").unwrap();
        assert_eq!(r_row.average, fit.params.r());
        assert_eq!(r_row.replicates_used, 1);
        // Rbias of an estimator that returns the truth is zero
        assert!(((r_row.average - 0.5) / 0.5).abs() >= 0.0); // sanity
        let exact = summarize(120, Estimator::Mle, &["r"], &[0.5], &[vec![0.5]], 1);
        assert_eq!(exact[0].rbias, 0.0);
        assert_eq!(exact[0].mse, 0.0);
    }

    #[test]
    fn determinism_across_runs_and_thread_counts() {
        let truth = SkeGtdParams::normalized(0.4, 2.0, 2.0).unwrap();
        let spec = ExperimentSpec::recovery(truth, vec![60], 8, vec![Estimator::Lme], 7);
        let a = run_recovery(&spec).unwrap();
        let b = run_recovery(&spec).unwrap();
        assert_eq!(a, b);
        // single-thread pool gives the identical table
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let c = pool.install(|| run_recovery(&spec)).unwrap();
        assert_eq!(a, c);
    }

    #[test]
    fn selection_ties_lose() {
        // SkeGTD against itself ties on every criterion, so the strict
        // rule scores zero wins
        let spec = ExperimentSpec::selection((-1.8, 0.8, 18.0), vec![60], 3, vec![Family::SkeGtd], 5);
        let table = run_selection(&spec).unwrap();
        let ExperimentTable::Selection(rows) = table else { panic!() };
        assert!(rows.iter().all(|r| r.percent == 0.0), "{rows:?}");
    }

    #[test]
    fn smoke_selection_small() {
        let spec = ExperimentSpec::selection((-1.8, 0.8, 18.0), vec![80], 4, vec![Family::Normal], 11);
        let table = run_selection(&spec).unwrap();
        let ExperimentTable::Selection(rows) = table else { panic!() };
        assert_eq!(rows.len(), 3);
        for r in rows {
            assert!((0.0..=100.0).contains(&r.percent));
            assert!(r.replicates_used <= 4);
        }
    }
}
