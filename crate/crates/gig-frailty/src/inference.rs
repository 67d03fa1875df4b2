//! Post-fit inference: parametric Weibull maximum likelihood, bootstrap
//! standard errors, profile likelihood over the GIG index, AIC-based cut
//! selection, relative-frailty-variance curves and Kaplan-Meier estimates.

use crate::baseline::WeibullBaseline;
use crate::data::Dataset;
use crate::distributions::{frailty_variance_standardized, gig_moment, FrailtyLaw, GigParams};
use crate::em::{e_step, fit_em, EmConfig, FitResult};
use crate::error::{Error, Result};
use crate::likelihood::{observed_log_likelihood, BaselineParams, ModelParams};
use crate::optim::{maximize, Optimizer};
use crate::special::{log_psi, log_psi_derivative};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Bootstrap summary over cluster resamples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapResult {
    pub parameter_names: Vec<String>,
    /// Empirical standard deviation of each parameter over the converged
    /// replicates (zero when only one replicate is available).
    pub standard_errors: Vec<f64>,
    /// Converged replicate estimates, one row per replicate.
    pub replicates: Vec<Vec<f64>>,
    pub n_resamples: usize,
    pub n_failed: usize,
    pub seed: u64,
}

/// One grid point of the profile likelihood in lambda.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfilePoint {
    pub lambda: f64,
    pub loglik: f64,
    pub params: ModelParams,
}

/// Maximize the observed-data log-likelihood of the Weibull-baseline GIG
/// model directly over `(beta, log sigma, log gamma, log alpha)`.
pub fn fit_parametric_weibull(data: &Dataset, lambda: f64, cfg: &EmConfig) -> Result<FitResult> {
    let p = data.n_covariates();
    let (times, events) = data.times_events();
    let total_time: f64 = times.iter().sum();
    let n_events = events.iter().filter(|&&e| e).count() as f64;
    let mut start = vec![0.0; p];
    start.push((n_events / total_time).ln()); // log sigma
    start.push(0.0); // log gamma
    start.push(0.0); // log alpha
    let objective = |x: &[f64]| {
        let params = weibull_point(x, p, lambda);
        observed_log_likelihood(&params, data).unwrap_or(f64::NEG_INFINITY)
    };
    let mut r = maximize(&objective, &start, cfg.optimizer, 1e-7, 2000)?;
    if !r.converged {
        // derivative-free fallback from the best point found so far
        r = maximize(&objective, &r.x, Optimizer::SimplexSearch, 1e-12, 5000)?;
    }
    let params = weibull_point(&r.x, p, lambda);
    let loglik = observed_log_likelihood(&params, data)?;
    let variance = frailty_variance_standardized(&FrailtyLaw::Gig { alpha: params.alpha, lambda })?;
    let omega = e_step(&params, data)?.0;
    Ok(FitResult {
        params,
        loglik,
        loglik_trace: vec![loglik],
        n_iter: r.iterations,
        converged: r.converged,
        standardized_frailty_variance: variance,
        posterior_frailty_means: omega,
    })
}

fn weibull_point(x: &[f64], p: usize, lambda: f64) -> ModelParams {
    ModelParams {
        beta: x[..p].to_vec(),
        baseline: BaselineParams::Weibull(WeibullBaseline {
            sigma: x[p].exp(),
            gamma: x[p + 1].exp(),
        }),
        alpha: x[p + 2].exp(),
        lambda,
    }
}

/// Cluster bootstrap: resample `m` clusters with replacement `B` times,
/// refit, and report empirical standard deviations of the regression
/// coefficients, `alpha` and the standardized frailty variance.
/// Replicates that fail or do not converge are excluded and counted.
pub fn bootstrap_se(data: &Dataset, cfg: &EmConfig, b: usize, seed: u64) -> Result<BootstrapResult> {
    if b == 0 {
        return Err(Error::InvalidData("bootstrap needs B >= 1".into()));
    }
    let m = data.n_clusters();
    let p = data.n_covariates();
    let mut names: Vec<String> =
        data.covariate_names().iter().map(|n| format!("beta_{n}")).collect();
    names.push("alpha".into());
    names.push("frailty_variance".into());
    let mut replicates = Vec::new();
    let mut n_failed = 0usize;
    for r in 0..b {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(r as u64 + 1);
        let indices: Vec<usize> = (0..m).map(|_| rng.gen_range(0..m)).collect();
        let resampled = match data.resample_clusters(&indices) {
            Ok(d) => d,
            Err(_) => {
                n_failed += 1;
                continue;
            }
        };
        match fit_em(&resampled, cfg) {
            Ok(fit) if fit.converged => {
                let mut row = fit.params.beta.clone();
                row.push(fit.params.alpha);
                row.push(fit.standardized_frailty_variance);
                replicates.push(row);
            }
            _ => n_failed += 1,
        }
    }
    if replicates.is_empty() {
        return Err(Error::AllReplicatesFailed(b));
    }
    let n_ok = replicates.len();
    let mut standard_errors = vec![0.0; p + 2];
    if n_ok > 1 {
        for j in 0..p + 2 {
            let mean: f64 = replicates.iter().map(|r| r[j]).sum::<f64>() / n_ok as f64;
            let ss: f64 = replicates.iter().map(|r| (r[j] - mean).powi(2)).sum();
            standard_errors[j] = (ss / (n_ok - 1) as f64).sqrt();
        }
    }
    Ok(BootstrapResult {
        parameter_names: names,
        standard_errors,
        replicates,
        n_resamples: b,
        n_failed,
        seed,
    })
}

/// Profile likelihood over a lambda grid: fit the model at each value and
/// return the maximized log-likelihood. Grid points whose fit fails are
/// returned separately instead of aborting the sweep.
pub fn profile_lambda(
    data: &Dataset,
    grid: &[f64],
    cfg: &EmConfig,
) -> Result<(Vec<ProfilePoint>, Vec<f64>)> {
    if grid.is_empty() {
        return Err(Error::InvalidData("profile grid is empty".into()));
    }
    let mut points = Vec::new();
    let mut failed = Vec::new();
    for &lambda in grid {
        let mut cfg = cfg.clone();
        cfg.lambda = lambda;
        match fit_em(data, &cfg) {
            Ok(fit) if fit.converged => points.push(ProfilePoint {
                lambda,
                loglik: fit.loglik,
                params: fit.params,
            }),
            _ => failed.push(lambda),
        }
    }
    if points.is_empty() {
        return Err(Error::AllReplicatesFailed(grid.len()));
    }
    Ok((points, failed))
}

/// AIC of a converged PE fit: `2 (p + k + 1 + 1) - 2 loglik` (p regression
/// coefficients, k+1 rates, one alpha).
pub fn aic(fit: &FitResult, k: usize) -> f64 {
    2.0 * (fit.params.beta.len() + k + 2) as f64 - 2.0 * fit.loglik
}

/// Fit at each candidate cut count and return the AIC-minimizing one.
pub fn select_cuts_aic(
    data: &Dataset,
    lambda: f64,
    k_range: &[usize],
    cfg: &EmConfig,
) -> Result<(usize, FitResult)> {
    if k_range.is_empty() {
        return Err(Error::InvalidData("cut-count range is empty".into()));
    }
    let mut best: Option<(usize, FitResult, f64)> = None;
    let mut attempted = 0usize;
    for &k in k_range {
        attempted += 1;
        let mut cfg = cfg.clone();
        cfg.lambda = lambda;
        cfg.k_cuts = k;
        if let Ok(fit) = fit_em(data, &cfg) {
            if fit.converged {
                let a = aic(&fit, k);
                if best.as_ref().is_none_or(|(_, _, b)| a < *b) {
                    best = Some((k, fit, a));
                }
            }
        }
    }
    best.map(|(k, fit, _)| (k, fit))
        .ok_or(Error::AllReplicatesFailed(attempted))
}

/// First and second derivatives of `J(u) = ln L(-u)` of the GIG frailty
/// Laplace transform, via the Psi-kernel derivatives of Lemma 1:
/// with `y(u) = a (a - 2u)` for `a = 1/alpha`,
/// `J' = -2a Psi'(y)/Psi(y)` and `J'' = 4a^2 [Psi''/Psi - (Psi'/Psi)^2]`.
pub fn rfv_j_derivatives(alpha: f64, lambda: f64, u: f64) -> Result<(f64, f64)> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::Domain { context: "rfv alpha", value: alpha });
    }
    let a = 1.0 / alpha;
    let y = a * (a - 2.0 * u);
    if !(y > 0.0) {
        return Err(Error::Domain { context: "rfv argument", value: u });
    }
    let log_psi0 = log_psi(lambda, y)?;
    let (s1, lm1) = log_psi_derivative(lambda, 1, y)?;
    let (s2, lm2) = log_psi_derivative(lambda, 2, y)?;
    let r1 = s1 * (lm1 - log_psi0).exp();
    let r2 = s2 * (lm2 - log_psi0).exp();
    Ok((-2.0 * a * r1, 4.0 * a * a * (r2 - r1 * r1)))
}

/// Relative frailty variance `RFV(s) = J''(-s/mu) / J'(-s/mu)^2` with
/// `mu = E(Z)`; defined here for the GIG law where the Laplace transform
/// is closed-form.
pub fn rfv(law: &FrailtyLaw, s: f64) -> Result<f64> {
    let FrailtyLaw::Gig { alpha, lambda } = *law else {
        return Err(Error::InvalidData("rfv requires a GIG frailty law".into()));
    };
    if !(s >= 0.0) || !s.is_finite() {
        return Err(Error::Domain { context: "rfv s", value: s });
    }
    let mu = gig_moment(&GigParams::frailty(alpha, lambda)?, 1.0)?;
    let (j1, j2) = rfv_j_derivatives(alpha, lambda, -s / mu)?;
    Ok(j2 / (j1 * j1))
}

/// Solve `RFV(0) = target` for alpha by bisection (absolute tolerance
/// 1e-8 on alpha).
pub fn rfv_alpha_for_target(lambda: f64, target: f64) -> Result<f64> {
    if !(target > 0.0) || !target.is_finite() {
        return Err(Error::Domain { context: "rfv target", value: target });
    }
    let f = |alpha: f64| rfv(&FrailtyLaw::Gig { alpha, lambda }, 0.0);
    // RFV(0) = Var/E^2 is increasing in alpha; expand a bracket around 1
    let mut lo = 1.0f64;
    let mut hi = 1.0f64;
    let mut f_lo = f(lo)?;
    let mut f_hi = f_lo;
    let mut tries = 0;
    while f_lo > target {
        lo /= 4.0;
        f_lo = f(lo)?;
        tries += 1;
        if tries > 200 {
            return Err(Error::Bracketing { context: "rfv_alpha_for_target", lo, hi });
        }
    }
    while f_hi < target {
        hi *= 4.0;
        f_hi = f(hi)?;
        tries += 1;
        if tries > 200 {
            return Err(Error::Bracketing { context: "rfv_alpha_for_target", lo, hi });
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-8 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Product-limit (Kaplan-Meier) estimate. Returns a right-continuous step
/// function as `(t, S(t))` pairs starting at `(0, 1)`, with one step per
/// distinct event time.
pub fn kaplan_meier(times: &[f64], events: &[bool]) -> Result<Vec<(f64, f64)>> {
    if times.is_empty() || times.len() != events.len() {
        return Err(Error::InvalidData("kaplan_meier needs matching nonempty inputs".into()));
    }
    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by(|&a, &b| times[a].total_cmp(&times[b]));
    let mut curve = vec![(0.0, 1.0)];
    let mut s = 1.0;
    let mut at_risk = times.len();
    let mut i = 0;
    while i < order.len() {
        let t = times[order[i]];
        let mut deaths = 0usize;
        let mut leaving = 0usize;
        while i < order.len() && times[order[i]] == t {
            if events[order[i]] {
                deaths += 1;
            }
            leaving += 1;
            i += 1;
        }
        if deaths > 0 {
            s *= 1.0 - deaths as f64 / at_risk as f64;
            curve.push((t, s));
        }
        at_risk -= leaving;
    }
    Ok(curve)
}
