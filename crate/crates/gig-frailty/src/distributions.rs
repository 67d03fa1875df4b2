//! GIG distribution primitives and the frailty laws used by the
//! simulation studies.
//!
//! The frailty parameterization is `Z ~ GIG(1/alpha, 1/alpha, lambda)`, so
//! the inverse-Gaussian case (`lambda = -1/2`) has `E(Z) = 1` and
//! `Var(Z) = alpha`. Sampling from an arbitrary GIG uses the
//! Hormann-Leydold generator: ratio-of-uniforms with and without mode
//! shift, plus a three-part composition-rejection scheme for the
//! low-omega concave region.

use crate::error::{Error, Result};
use crate::special::{digamma, log_bessel_k, trigamma};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Parameters `(a, b, lambda)` of the generalized inverse-Gaussian law with
/// density proportional to `x^(lambda-1) exp{-(a x + b/x)/2}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GigParams {
    pub a: f64,
    pub b: f64,
    pub lambda: f64,
}

impl GigParams {
    pub fn new(a: f64, b: f64, lambda: f64) -> Result<Self> {
        if !(a > 0.0) || !a.is_finite() {
            return Err(Error::Domain { context: "GigParams a", value: a });
        }
        if !(b > 0.0) || !b.is_finite() {
            return Err(Error::Domain { context: "GigParams b", value: b });
        }
        if !lambda.is_finite() {
            return Err(Error::Domain { context: "GigParams lambda", value: lambda });
        }
        Ok(Self { a, b, lambda })
    }

    /// Frailty parameterization `GIG(1/alpha, 1/alpha, lambda)`.
    pub fn frailty(alpha: f64, lambda: f64) -> Result<Self> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::Domain { context: "frailty alpha", value: alpha });
        }
        Self::new(1.0 / alpha, 1.0 / alpha, lambda)
    }
}

/// Frailty law used when generating synthetic clustered data.
///
/// All laws are indexed by a single positive `alpha`; the GIG case
/// additionally carries the index `lambda`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum FrailtyLaw {
    /// `GIG(1/alpha, 1/alpha, lambda)`.
    Gig { alpha: f64, lambda: f64 },
    /// Gamma with mean 1 and variance `alpha`.
    Gamma { alpha: f64 },
    /// Exponentiated exponential with unit rate and shape `alpha`,
    /// density `alpha (1 - e^{-z})^{alpha-1} e^{-z}`.
    GeneralizedExponential { alpha: f64 },
    /// Log-normal with `mu = 0` and `sigma^2 = alpha`.
    LogNormal { alpha: f64 },
}

impl FrailtyLaw {
    pub fn alpha(&self) -> f64 {
        match *self {
            FrailtyLaw::Gig { alpha, .. }
            | FrailtyLaw::Gamma { alpha }
            | FrailtyLaw::GeneralizedExponential { alpha }
            | FrailtyLaw::LogNormal { alpha } => alpha,
        }
    }
}

/// `ln g(x)` of the GIG density.
pub fn gig_log_density(p: &GigParams, x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain { context: "gig_log_density", value: x });
    }
    let norm = 0.5 * p.lambda * (p.a / p.b).ln()
        - std::f64::consts::LN_2
        - log_bessel_k(p.lambda, (p.a * p.b).sqrt())?;
    Ok(norm + (p.lambda - 1.0) * x.ln() - 0.5 * (p.a * x + p.b / x))
}

/// `ln L(t)` of the GIG Laplace transform, valid for `t > -a/2`.
pub fn gig_log_laplace(p: &GigParams, t: f64) -> Result<f64> {
    if !(t > -0.5 * p.a) || !t.is_finite() {
        return Err(Error::Domain { context: "gig_log_laplace", value: t });
    }
    let sqrt_ab = (p.a * p.b).sqrt();
    let shifted = ((p.a + 2.0 * t) * p.b).sqrt();
    Ok(log_bessel_k(p.lambda, shifted)? - log_bessel_k(p.lambda, sqrt_ab)?
        + 0.5 * p.lambda * (p.a / (p.a + 2.0 * t)).ln())
}

/// `E(X^k)` for any real `k`; Bessel ratios are taken as log differences.
pub fn gig_moment(p: &GigParams, k: f64) -> Result<f64> {
    let sqrt_ab = (p.a * p.b).sqrt();
    let log_ratio = log_bessel_k(p.lambda + k, sqrt_ab)? - log_bessel_k(p.lambda, sqrt_ab)?;
    Ok((log_ratio + 0.5 * k * (p.b / p.a).ln()).exp())
}

/// Comparability-transformed frailty variance `Var(Z)/E(Z)^2`.
pub fn frailty_variance_standardized(law: &FrailtyLaw) -> Result<f64> {
    match *law {
        FrailtyLaw::Gig { alpha, lambda } => {
            let p = GigParams::frailty(alpha, lambda)?;
            let m1 = gig_moment(&p, 1.0)?;
            let m2 = gig_moment(&p, 2.0)?;
            Ok(m2 / (m1 * m1) - 1.0)
        }
        FrailtyLaw::Gamma { alpha } => Ok(alpha),
        FrailtyLaw::GeneralizedExponential { alpha } => {
            // E(Z) = psi(alpha+1) - psi(1), Var(Z) = psi'(1) - psi'(alpha+1)
            let mean = digamma(alpha + 1.0) - digamma(1.0);
            let var = trigamma(1.0) - trigamma(alpha + 1.0);
            Ok(var / (mean * mean))
        }
        FrailtyLaw::LogNormal { alpha } => Ok(alpha.exp() - 1.0),
    }
}

/// Conditional frailty law given a cluster's observed data:
/// `GIG(1/alpha + 2 * cum_hazard_sum, 1/alpha, lambda + event_count)`.
pub fn posterior_frailty(
    prior_alpha: f64,
    prior_lambda: f64,
    cum_hazard_sum: f64,
    event_count: usize,
) -> Result<GigParams> {
    if !(cum_hazard_sum >= 0.0) {
        return Err(Error::Domain { context: "posterior_frailty cum_hazard_sum", value: cum_hazard_sum });
    }
    let inv_alpha = 1.0 / prior_alpha;
    GigParams::new(
        inv_alpha + 2.0 * cum_hazard_sum,
        inv_alpha,
        prior_lambda + event_count as f64,
    )
}

/// One draw from the given frailty law.
pub fn sample_frailty<R: Rng + ?Sized>(law: &FrailtyLaw, rng: &mut R) -> f64 {
    match *law {
        FrailtyLaw::Gig { alpha, lambda } => {
            sample_gig(&GigParams { a: 1.0 / alpha, b: 1.0 / alpha, lambda }, rng)
        }
        FrailtyLaw::Gamma { alpha } => {
            let g = rand_distr::Gamma::new(1.0 / alpha, alpha).expect("valid gamma");
            rng.sample(g)
        }
        FrailtyLaw::GeneralizedExponential { alpha } => {
            // inverse transform of the CDF (1 - e^{-z})^alpha
            let u: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
            -(-u.powf(1.0 / alpha)).ln_1p()
        }
        FrailtyLaw::LogNormal { alpha } => {
            let n: f64 = rng.sample(rand_distr::StandardNormal);
            (alpha.sqrt() * n).exp()
        }
    }
}

/// Exact GIG sampler, valid for every `(a, b, lambda)`.
pub fn sample_gig<R: Rng + ?Sized>(p: &GigParams, rng: &mut R) -> f64 {
    // reduce to the two-parameter form x^{lambda-1} e^{-omega(x+1/x)/2}:
    // X = sqrt(b/a) * Y with Y ~ GIG_std(lambda, omega), omega = sqrt(ab)
    let scale = (p.b / p.a).sqrt();
    let omega = (p.a * p.b).sqrt();
    let lambda = p.lambda;
    let (lam, invert) = if lambda < 0.0 { (-lambda, true) } else { (lambda, false) };
    let y = if lam > 2.0 || omega > 3.0 {
        gig_rou_shift(lam, omega, rng)
    } else if lam >= 1.0 - 2.25 * omega * omega || omega > 0.2 {
        gig_rou_noshift(lam, omega, rng)
    } else {
        gig_three_part(lam, omega, rng)
    };
    let y = if invert { 1.0 / y } else { y };
    scale * y
}

// log of the unnormalized two-parameter density
fn lg(lam: f64, omega: f64, x: f64) -> f64 {
    (lam - 1.0) * x.ln() - 0.5 * omega * (x + 1.0 / x)
}

// mode of the two-parameter density, written to stay accurate for lam < 1
fn gig_mode(lam: f64, omega: f64) -> f64 {
    if lam >= 1.0 {
        ((lam - 1.0) + ((lam - 1.0).powi(2) + omega * omega).sqrt()) / omega
    } else {
        omega / (((1.0 - lam).powi(2) + omega * omega).sqrt() + (1.0 - lam))
    }
}

/// Ratio-of-uniforms without shift; needs `0 <= lam <= 1` and moderate omega.
fn gig_rou_noshift<R: Rng + ?Sized>(lam: f64, omega: f64, rng: &mut R) -> f64 {
    let xm = gig_mode(lam, omega);
    let nc = lg(lam, omega, xm);
    // maximizer of x * sqrt(density): mode with lam -> lam + 2
    let xu = ((lam + 1.0) + ((lam + 1.0).powi(2) + omega * omega).sqrt()) / omega;
    let u_plus = xu * (0.5 * (lg(lam, omega, xu) - nc)).exp();
    loop {
        let u: f64 = rng.gen::<f64>() * u_plus;
        let v: f64 = rng.gen::<f64>();
        if v <= 0.0 {
            continue;
        }
        let x = u / v;
        if 2.0 * v.ln() <= lg(lam, omega, x) - nc {
            return x;
        }
    }
}

/// Ratio-of-uniforms with shift at the mode; used for `lam > 2` or `omega > 3`.
fn gig_rou_shift<R: Rng + ?Sized>(lam: f64, omega: f64, rng: &mut R) -> f64 {
    let xm = gig_mode(lam, omega);
    let nc = lg(lam, omega, xm);
    // extrema of (x - xm) sqrt(density) solve the cubic x^3 + a x^2 + b x + c
    let a = -(2.0 * (lam + 1.0) / omega + xm);
    let b = 2.0 * (lam - 1.0) * xm / omega - 1.0;
    let c = xm;
    // depressed cubic t^3 + p t + q, three real roots via the trigonometric form
    let p = b - a * a / 3.0;
    let q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + c;
    let r = (-p / 3.0).sqrt();
    let cos_arg = (-q / (2.0 * r * r * r)).clamp(-1.0, 1.0);
    let phi = cos_arg.acos();
    let y1 = 2.0 * r * (phi / 3.0).cos() - a / 3.0;
    let y2 = 2.0 * r * (phi / 3.0 + 4.0 * std::f64::consts::PI / 3.0).cos() - a / 3.0;
    let u_plus = (y1 - xm) * (0.5 * (lg(lam, omega, y1) - nc)).exp();
    let u_minus = (y2 - xm) * (0.5 * (lg(lam, omega, y2) - nc)).exp();
    loop {
        let u = u_minus + rng.gen::<f64>() * (u_plus - u_minus);
        let v: f64 = rng.gen::<f64>();
        if v <= 0.0 {
            continue;
        }
        let x = u / v + xm;
        if x > 0.0 && 2.0 * v.ln() <= lg(lam, omega, x) - nc {
            return x;
        }
    }
}

/// Composition-rejection for `0 <= lam < 1` and small omega, where the
/// ratio-of-uniforms acceptance rate degenerates. The envelope is constant
/// up to `x0`, proportional to `x^{lam-1}` on `[x0, 2/omega]` and an
/// exponential tail beyond.
fn gig_three_part<R: Rng + ?Sized>(lam: f64, omega: f64, rng: &mut R) -> f64 {
    let xm = gig_mode(lam, omega);
    let x0 = omega / (1.0 - lam);
    let k0 = lg(lam, omega, xm).exp(); // density maximum
    let a0 = k0 * x0;
    let (k1, a1, x_tail) = if x0 >= 2.0 / omega {
        (0.0, 0.0, x0)
    } else {
        // on [x0, 2/omega]: e^{-omega(x+1/x)/2} <= e^{-omega}
        let k1 = (-omega).exp();
        let a1 = if lam == 0.0 {
            k1 * (2.0 / (omega * omega)).ln()
        } else {
            k1 * ((2.0 / omega).powf(lam) - x0.powf(lam)) / lam
        };
        (k1, a1, 2.0 / omega)
    };
    // tail x > x_tail: x^{lam-1} <= x_tail^{lam-1}, e^{-omega/(2x)} <= 1
    let k2 = x_tail.powf(lam - 1.0);
    let a2 = k2 * 2.0 / omega * (-0.5 * omega * x_tail).exp();
    let total = a0 + a1 + a2;
    loop {
        let u: f64 = rng.gen::<f64>() * total;
        let v: f64 = rng.gen::<f64>();
        let (x, envelope) = if u <= a0 {
            let x = u / a0 * x0;
            (x, k0)
        } else if u <= a0 + a1 {
            let w = u - a0;
            let x = if lam == 0.0 {
                x0 * ((w / k1).exp())
            } else {
                (x0.powf(lam) + w * lam / k1).powf(1.0 / lam)
            };
            (x, k1 * x.powf(lam - 1.0))
        } else {
            let w = u - a0 - a1;
            let x = -2.0 / omega * ((-0.5 * omega * x_tail).exp() - w * omega / (2.0 * k2)).ln();
            (x, k2 * (-0.5 * omega * x).exp())
        };
        if x > 0.0 && v * envelope <= lg(lam, omega, x).exp() {
            return x;
        }
    }
}
