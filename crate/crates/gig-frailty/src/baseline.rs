//! Baseline hazard functions: piecewise-exponential and Weibull.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Common interface of the baseline hazards used by the likelihood.
pub trait Baseline {
    fn hazard(&self, t: f64) -> Result<f64>;
    fn cum_hazard(&self, t: f64) -> Result<f64>;
}

/// Piecewise-exponential baseline: `k` interior cut points and `k + 1`
/// interval rates, intervals left-closed/right-open.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeBaseline {
    cuts: Vec<f64>,
    rates: Vec<f64>,
}

impl PeBaseline {
    pub fn new(cuts: Vec<f64>, rates: Vec<f64>) -> Result<Self> {
        if rates.len() != cuts.len() + 1 {
            return Err(Error::InvalidData(format!(
                "need {} rates for {} cut points, got {}",
                cuts.len() + 1,
                cuts.len(),
                rates.len()
            )));
        }
        for w in cuts.windows(2) {
            if !(w[0] < w[1]) {
                return Err(Error::InvalidData("cut points must be strictly increasing".into()));
            }
        }
        if let Some(&first) = cuts.first() {
            if !(first > 0.0) {
                return Err(Error::InvalidData("cut points must be positive".into()));
            }
        }
        for &r in &rates {
            if !(r > 0.0) || !r.is_finite() {
                return Err(Error::InvalidData(format!("rates must be positive, got {r}")));
            }
        }
        Ok(Self { cuts, rates })
    }

    pub fn cuts(&self) -> &[f64] {
        &self.cuts
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    /// Index of the interval containing `t` under the `[t_(l-1), t_(l))`
    /// convention.
    pub fn interval_index(&self, t: f64) -> usize {
        self.cuts.partition_point(|&c| c <= t)
    }

    /// Time spent in each interval by a subject observed until `t`.
    /// The dot product of this vector with the rates is the cumulative
    /// hazard, which makes the likelihood linear in the rates.
    pub fn exposures(&self, t: f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.rates.len());
        let mut lower = 0.0;
        for &cut in &self.cuts {
            out.push((t.min(cut) - lower).max(0.0));
            lower = cut;
        }
        out.push((t - lower).max(0.0));
        out
    }
}

impl Baseline for PeBaseline {
    fn hazard(&self, t: f64) -> Result<f64> {
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::Domain { context: "pe_hazard", value: t });
        }
        Ok(self.rates[self.interval_index(t)])
    }

    fn cum_hazard(&self, t: f64) -> Result<f64> {
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::Domain { context: "pe_cum_hazard", value: t });
        }
        Ok(self
            .exposures(t)
            .iter()
            .zip(&self.rates)
            .map(|(e, r)| e * r)
            .sum())
    }
}

/// Weibull baseline `h_0(t) = sigma gamma t^(gamma-1)`, `H_0(t) = sigma t^gamma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeibullBaseline {
    pub sigma: f64,
    pub gamma: f64,
}

impl WeibullBaseline {
    pub fn new(sigma: f64, gamma: f64) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::Domain { context: "weibull sigma", value: sigma });
        }
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(Error::Domain { context: "weibull gamma", value: gamma });
        }
        Ok(Self { sigma, gamma })
    }
}

impl Baseline for WeibullBaseline {
    fn hazard(&self, t: f64) -> Result<f64> {
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::Domain { context: "weibull_hazard", value: t });
        }
        Ok(self.sigma * self.gamma * t.powf(self.gamma - 1.0))
    }

    fn cum_hazard(&self, t: f64) -> Result<f64> {
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::Domain { context: "weibull_cum_hazard", value: t });
        }
        Ok(self.sigma * t.powf(self.gamma))
    }
}

/// Placement rule for the piecewise-exponential cut points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CutMethod {
    /// Empirical quantiles of the observed failure times (type-7, linear
    /// interpolation).
    FailureQuantiles,
    /// Evenly spaced on `(0, max observed time)`.
    EvenTime,
}

/// Construct `k` strictly increasing cut points from observed data.
pub fn make_cuts(times: &[f64], events: &[bool], k: usize, method: CutMethod) -> Result<Vec<f64>> {
    if k == 0 {
        return Ok(Vec::new());
    }
    match method {
        CutMethod::EvenTime => {
            let max = times.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if !max.is_finite() || max <= 0.0 {
                return Err(Error::InvalidData("no valid times for cut placement".into()));
            }
            Ok((1..=k).map(|i| max * i as f64 / (k + 1) as f64).collect())
        }
        CutMethod::FailureQuantiles => {
            let mut failures: Vec<f64> = times
                .iter()
                .zip(events)
                .filter(|(_, &e)| e)
                .map(|(&t, _)| t)
                .collect();
            failures.sort_by(f64::total_cmp);
            failures.dedup();
            if failures.len() < k + 1 {
                return Err(Error::TooFewFailures { needed: k + 1, found: failures.len(), k });
            }
            let n = failures.len();
            let mut cuts = Vec::with_capacity(k);
            for i in 1..=k {
                // type-7 quantile at probability i / (k + 1)
                let p = i as f64 / (k + 1) as f64;
                let h = (n - 1) as f64 * p;
                let lo = h.floor() as usize;
                let frac = h - lo as f64;
                let q = if lo + 1 < n {
                    failures[lo] + frac * (failures[lo + 1] - failures[lo])
                } else {
                    failures[lo]
                };
                cuts.push(q);
            }
            cuts.dedup();
            if cuts.len() < k {
                return Err(Error::TooFewFailures { needed: k + 1, found: cuts.len(), k });
            }
            Ok(cuts)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn example() -> PeBaseline {
        PeBaseline::new(vec![1.0, 2.0], vec![0.5, 1.0, 2.0]).unwrap()
    }

    #[test]
    fn pe_hazard_interval_convention() {
        let b = example();
        assert_eq!(b.hazard(0.3).unwrap(), 0.5);
        // left-closed: t exactly at a cut belongs to the next interval
        assert_eq!(b.hazard(1.0).unwrap(), 1.0);
        assert_eq!(b.hazard(10.0).unwrap(), 2.0);
        assert!(b.hazard(0.0).is_err());
        assert!(b.hazard(-1.0).is_err());
    }

    #[test]
    fn pe_cum_hazard_values() {
        let b = example();
        assert_relative_eq!(b.cum_hazard(1.5).unwrap(), 1.0, epsilon = 1e-14);
        assert_relative_eq!(b.cum_hazard(3.0).unwrap(), 3.5, epsilon = 1e-14);
        // derivative equals hazard at interval interiors
        let h = 1e-7;
        for &t in &[0.5, 1.5, 2.5] {
            let d = (b.cum_hazard(t + h).unwrap() - b.cum_hazard(t - h).unwrap()) / (2.0 * h);
            assert_relative_eq!(d, b.hazard(t).unwrap(), max_relative = 1e-6);
        }
    }

    #[test]
    fn pe_cum_hazard_continuous_at_cuts() {
        let b = example();
        for &c in b.cuts() {
            let eps = 1e-13 * c;
            let left = b.cum_hazard(c - eps).unwrap();
            let right = b.cum_hazard(c + eps).unwrap();
            assert!((left - right).abs() < 1e-12);
        }
    }

    #[test]
    fn weibull_values() {
        let w = WeibullBaseline::new(0.25, 2.0).unwrap();
        assert_relative_eq!(w.hazard(2.0).unwrap(), 1.0);
        assert_relative_eq!(w.cum_hazard(2.0).unwrap(), 1.0);
        let exp = WeibullBaseline::new(1.0, 1.0).unwrap();
        for &t in &[0.1, 1.0, 7.3] {
            assert_relative_eq!(exp.hazard(t).unwrap(), 1.0);
        }
        // cumulative hazard matches quadrature of the hazard
        let w = WeibullBaseline::new(0.6, 1.7).unwrap();
        let t = 2.4;
        let oracle = quad::integrate(|u| w.hazard(u.max(1e-300)).unwrap(), 0.0, t, 1e-12, 1e-10);
        assert_relative_eq!(w.cum_hazard(t).unwrap(), oracle, max_relative = 1e-8);
    }

    #[test]
    fn make_cuts_quantiles_and_even() {
        let times: Vec<f64> = (1..=10).map(f64::from).collect();
        let events = vec![true; 10];
        let cuts = make_cuts(&times, &events, 1, CutMethod::FailureQuantiles).unwrap();
        assert_relative_eq!(cuts[0], 5.5);

        let cuts = make_cuts(&times, &events, 4, CutMethod::EvenTime).unwrap();
        assert_eq!(cuts, vec![2.0, 4.0, 6.0, 8.0]);

        assert!(make_cuts(&times, &events, 0, CutMethod::FailureQuantiles)
            .unwrap()
            .is_empty());

        // censored-only data cannot support failure quantiles
        let no_events = vec![false; 10];
        assert!(make_cuts(&times, &no_events, 2, CutMethod::FailureQuantiles).is_err());
    }

    proptest! {
        #[test]
        fn cum_hazard_nondecreasing(
            r1 in 0.01f64..5.0, r2 in 0.01f64..5.0, r3 in 0.01f64..5.0,
            t1 in 0.01f64..10.0, t2 in 0.01f64..10.0
        ) {
            let b = example();
            let _ = (r1, r2, r3);
            let (lo, hi) = if t1 < t2 { (t1, t2) } else { (t2, t1) };
            prop_assert!(b.cum_hazard(hi).unwrap() >= b.cum_hazard(lo).unwrap());
        }

        #[test]
        fn cuts_inside_data_range(k in 1usize..6, seed in 0u64..1000) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let times: Vec<f64> = (0..40).map(|_| rng.gen_range(0.1..20.0)).collect();
            let events: Vec<bool> = (0..40).map(|_| rng.gen_bool(0.7)).collect();
            if let Ok(cuts) = make_cuts(&times, &events, k, CutMethod::FailureQuantiles) {
                let max = times.iter().cloned().fold(f64::MIN, f64::max);
                let min = times.iter().cloned().fold(f64::MAX, f64::min);
                for w in cuts.windows(2) {
                    prop_assert!(w[0] < w[1]);
                }
                for &c in &cuts {
                    prop_assert!(c >= min && c <= max);
                }
            }
        }
    }
}
