//! Scenario generator for clustered right-censored survival data and a
//! Monte Carlo study harness reporting empirical mean and RMSE.

use crate::baseline::WeibullBaseline;
use crate::data::{Cluster, Dataset, Subject};
use crate::distributions::{frailty_variance_standardized, sample_frailty, FrailtyLaw};
use crate::em::{fit_em, EmConfig};
use crate::error::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Distribution of one covariate column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum CovariateSpec {
    Bernoulli(f64),
    Uniform(f64, f64),
}

impl CovariateSpec {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            CovariateSpec::Bernoulli(p) => {
                if rng.gen_bool(p) {
                    1.0
                } else {
                    0.0
                }
            }
            CovariateSpec::Uniform(lo, hi) => rng.gen_range(lo..hi),
        }
    }
}

/// Data-generating scenario: Weibull event and censoring hazards, a
/// cluster-level frailty law, and per-subject covariates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub frailty: FrailtyLaw,
    pub n_clusters: usize,
    pub cluster_size: usize,
    pub event_weibull: WeibullBaseline,
    pub censor_weibull: WeibullBaseline,
    pub beta_true: Vec<f64>,
    pub covariates: Vec<CovariateSpec>,
    pub seed: u64,
}

impl Scenario {
    /// Default study design: Weibull(sigma=0.25, gamma=2) events,
    /// Weibull(sigma=0.05, gamma=2) censoring (about 30% censored),
    /// beta = (1.5, -1.0), Bernoulli(0.5) and Uniform(-1,1) covariates.
    pub fn standard(frailty: FrailtyLaw, n_clusters: usize, cluster_size: usize, seed: u64) -> Self {
        Scenario {
            frailty,
            n_clusters,
            cluster_size,
            event_weibull: WeibullBaseline { sigma: 0.25, gamma: 2.0 },
            censor_weibull: WeibullBaseline { sigma: 0.05, gamma: 2.0 },
            beta_true: vec![1.5, -1.0],
            covariates: vec![CovariateSpec::Bernoulli(0.5), CovariateSpec::Uniform(-1.0, 1.0)],
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_clusters == 0 || self.cluster_size == 0 {
            return Err(Error::InvalidData("scenario needs n_clusters >= 1 and cluster_size >= 1".into()));
        }
        if self.beta_true.len() != self.covariates.len() {
            return Err(Error::DimensionMismatch {
                expected: self.covariates.len(),
                actual: self.beta_true.len(),
            });
        }
        Ok(())
    }
}

/// Draw one clustered dataset. Within a cluster all subjects share one
/// frailty `Z`; the latent event time solves `Z e^{x'beta} sigma T^gamma
/// = -ln U`. The censoring time is an independent Weibull draw whose
/// hazard carries the same covariate effect but no frailty; this keeps
/// censoring non-informative for `Z` while making the censoring fraction
/// `E[sigma_c / (sigma_c + sigma_e Z)]` (about 30% under the defaults)
/// regardless of the covariate distribution.
pub fn generate<R: Rng + ?Sized>(scn: &Scenario, rng: &mut R) -> Result<Dataset> {
    scn.validate()?;
    let names = (1..=scn.covariates.len()).map(|j| format!("x{j}")).collect();
    let mut clusters = Vec::with_capacity(scn.n_clusters);
    for i in 0..scn.n_clusters {
        let z = sample_frailty(&scn.frailty, rng);
        let mut subjects = Vec::with_capacity(scn.cluster_size);
        for _ in 0..scn.cluster_size {
            let covariates: Vec<f64> = scn.covariates.iter().map(|c| c.sample(rng)).collect();
            let xb: f64 = scn.beta_true.iter().zip(&covariates).map(|(b, x)| b * x).sum();
            let u: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
            let t0 = (-u.ln() / (scn.event_weibull.sigma * z * xb.exp()))
                .powf(1.0 / scn.event_weibull.gamma);
            let v: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
            let c = (-v.ln() / (scn.censor_weibull.sigma * xb.exp()))
                .powf(1.0 / scn.censor_weibull.gamma);
            subjects.push(Subject { time: t0.min(c), event: t0 <= c, covariates });
        }
        clusters.push(Cluster { id: (i + 1).to_string(), subjects });
    }
    Dataset::new(clusters, names)
}

/// One cell of the study summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub scenario: String,
    pub lambda: f64,
    pub k: usize,
    pub param: String,
    pub mean: f64,
    pub rmse: f64,
    pub n_ok: usize,
    pub n_fail: usize,
}

/// Monte Carlo study: for each `(lambda, k)` fit spec, generate
/// `n_replicas` datasets from `scn` (deterministic per-replica streams of
/// one ChaCha seed) and report the empirical mean and RMSE of the
/// regression coefficients and the standardized frailty variance.
/// Replicas whose fit does not converge are excluded and counted.
pub fn run_study(
    scn: &Scenario,
    fit_specs: &[(f64, usize)],
    n_replicas: usize,
    cfg: &EmConfig,
) -> Result<Vec<StudyRow>> {
    scn.validate()?;
    if n_replicas == 0 {
        return Err(Error::InvalidData("n_replicas must be >= 1".into()));
    }
    let label = scenario_label(scn);
    let var_truth = frailty_variance_standardized(&scn.frailty)?;
    let p = scn.beta_true.len();
    let mut rows = Vec::new();
    for &(lambda, k) in fit_specs {
        let mut cfg = cfg.clone();
        cfg.lambda = lambda;
        cfg.k_cuts = k;
        // estimates[j] collects replica values of parameter j
        // (beta_1..beta_p then the standardized variance)
        let mut estimates: Vec<Vec<f64>> = vec![Vec::new(); p + 1];
        let mut n_fail = 0usize;
        for r in 0..n_replicas {
            let mut rng = ChaCha8Rng::seed_from_u64(scn.seed);
            rng.set_stream(r as u64 + 1);
            let data = generate(scn, &mut rng)?;
            match fit_em(&data, &cfg) {
                Ok(fit) if fit.converged => {
                    for j in 0..p {
                        estimates[j].push(fit.params.beta[j]);
                    }
                    estimates[p].push(fit.standardized_frailty_variance);
                }
                _ => n_fail += 1,
            }
        }
        let n_ok = estimates[0].len();
        if n_ok == 0 {
            return Err(Error::AllReplicatesFailed(n_replicas));
        }
        for j in 0..=p {
            let truth = if j < p { scn.beta_true[j] } else { var_truth };
            let mean = estimates[j].iter().sum::<f64>() / n_ok as f64;
            let mse =
                estimates[j].iter().map(|v| (v - truth).powi(2)).sum::<f64>() / n_ok as f64;
            rows.push(StudyRow {
                scenario: label.clone(),
                lambda,
                k,
                param: if j < p { format!("beta{}", j + 1) } else { "var".into() },
                mean,
                rmse: mse.sqrt(),
                n_ok,
                n_fail,
            });
        }
    }
    Ok(rows)
}

/// Write study rows as CSV with the schema
/// `scenario,lambda,k,param,mean,rmse,n_ok,n_fail`.
pub fn write_study_csv<W: std::io::Write>(rows: &[StudyRow], writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["scenario", "lambda", "k", "param", "mean", "rmse", "n_ok", "n_fail"])
        .map_err(|e| Error::Csv { row: 0, detail: e.to_string() })?;
    for r in rows {
        wtr.write_record([
            r.scenario.clone(),
            format!("{}", r.lambda),
            format!("{}", r.k),
            r.param.clone(),
            format!("{}", r.mean),
            format!("{}", r.rmse),
            format!("{}", r.n_ok),
            format!("{}", r.n_fail),
        ])
        .map_err(|e| Error::Csv { row: 0, detail: e.to_string() })?;
    }
    wtr.flush()?;
    Ok(())
}

fn scenario_label(scn: &Scenario) -> String {
    let law = match scn.frailty {
        FrailtyLaw::Gig { lambda, .. } => format!("gig({lambda})"),
        FrailtyLaw::Gamma { .. } => "gamma".into(),
        FrailtyLaw::GeneralizedExponential { .. } => "ge".into(),
        FrailtyLaw::LogNormal { .. } => "lognormal".into(),
    };
    format!("{law}-m{}-n{}", scn.n_clusters, scn.cluster_size)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn censoring_fraction_near_thirty_percent() {
        let scn = Scenario::standard(FrailtyLaw::Gamma { alpha: 1.0 }, 200, 2, 11);
        let mut censored = 0usize;
        let mut total = 0usize;
        for r in 0..20 {
            let mut g = rng(11);
            g.set_stream(r);
            let d = generate(&scn, &mut g).unwrap();
            total += d.n_subjects();
            censored += d.n_subjects() - d.n_events();
        }
        let frac = censored as f64 / total as f64;
        assert!((frac - 0.30).abs() < 0.03, "censoring fraction {frac}");
    }

    #[test]
    fn degenerate_frailty_gives_weibull_margin() {
        // Z forced to ~1 (tiny-variance gamma), beta = 0: latent event times
        // are Weibull(0.25, 2); check via KS against the closed-form CDF
        // using an effectively censoring-free configuration.
        let mut scn = Scenario::standard(FrailtyLaw::Gamma { alpha: 1e-10 }, 2000, 1, 5);
        scn.beta_true = vec![0.0, 0.0];
        scn.censor_weibull = WeibullBaseline { sigma: 1e-12, gamma: 2.0 };
        let d = generate(&scn, &mut rng(5)).unwrap();
        let (mut times, events) = d.times_events();
        assert!(events.iter().all(|&e| e));
        times.sort_by(f64::total_cmp);
        let n = times.len() as f64;
        let mut ks = 0.0f64;
        for (i, &t) in times.iter().enumerate() {
            let cdf = 1.0 - (-0.25 * t * t).exp();
            ks = ks.max((cdf - i as f64 / n).abs()).max(((i + 1) as f64 / n - cdf).abs());
        }
        // 1% critical value 1.63/sqrt(n)
        assert!(ks < 1.63 / n.sqrt(), "ks={ks}");
    }

    #[test]
    fn generate_is_deterministic() {
        let scn = Scenario::standard(FrailtyLaw::Gig { alpha: 1.0, lambda: 0.5 }, 30, 3, 42);
        let a = generate(&scn, &mut rng(42)).unwrap();
        let b = generate(&scn, &mut rng(42)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn covariates_match_spec() {
        let scn = Scenario::standard(FrailtyLaw::Gamma { alpha: 1.0 }, 100, 2, 3);
        let d = generate(&scn, &mut rng(3)).unwrap();
        for s in d.subjects() {
            assert!(s.covariates[0] == 0.0 || s.covariates[0] == 1.0);
            assert!(s.covariates[1] > -1.0 && s.covariates[1] < 1.0);
        }
    }

    #[test]
    fn single_replica_rmse_is_abs_error() {
        let scn = Scenario::standard(FrailtyLaw::Gamma { alpha: 1.0 }, 60, 2, 9);
        let cfg = EmConfig { tol: 1e-4, max_iter: 200, ..EmConfig::default() };
        let rows = run_study(&scn, &[(0.5, 2)], 1, &cfg).unwrap();
        for row in &rows {
            let truth = match row.param.as_str() {
                "beta1" => 1.5,
                "beta2" => -1.0,
                _ => 1.0,
            };
            approx::assert_relative_eq!(row.rmse, (row.mean - truth).abs(), epsilon = 1e-12);
        }
    }
}
