//! Adaptive Gauss-Kronrod quadrature.
//!
//! Globally adaptive bisection with the 15-point Kronrod / 7-point Gauss
//! pair on each subinterval. Used throughout the test suites as an
//! integration oracle; nothing in the likelihood path depends on it.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

// QUADPACK dqk15 abscissae and weights (positive half).
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn kronrod15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut result_gauss = WG[3] * fc;
    let mut result_kronrod = WGK[7] * fc;
    for (j, &x) in XGK.iter().enumerate().take(7) {
        let dx = half * x;
        let fsum = f(center - dx) + f(center + dx);
        result_kronrod += WGK[j] * fsum;
        if j % 2 == 1 {
            result_gauss += WG[j / 2] * fsum;
        }
    }
    let integral = result_kronrod * half;
    let err = ((result_kronrod - result_gauss) * half).abs();
    (integral, err)
}

#[derive(Debug)]
struct Segment {
    a: f64,
    b: f64,
    integral: f64,
    err: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err)
    }
}

/// Integrate `f` over the finite interval `[a, b]`.
///
/// Subdivides until the accumulated error estimate drops below
/// `abs_tol + rel_tol * |integral|` or the segment budget is exhausted.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> f64 {
    let mut heap = BinaryHeap::new();
    let (integral, err) = kronrod15(&f, a, b);
    heap.push(Segment { a, b, integral, err });
    let mut total = integral;
    let mut total_err = err;
    for _ in 0..2000 {
        if total_err <= abs_tol + rel_tol * total.abs() {
            break;
        }
        let worst = match heap.pop() {
            Some(s) => s,
            None => break,
        };
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // interval at floating point resolution, give up on it
            continue;
        }
        let (il, el) = kronrod15(&f, worst.a, mid);
        let (ir, er) = kronrod15(&f, mid, worst.b);
        total += il + ir - worst.integral;
        total_err += el + er - worst.err;
        heap.push(Segment { a: worst.a, b: mid, integral: il, err: el });
        heap.push(Segment { a: mid, b: worst.b, integral: ir, err: er });
    }
    total
}

/// Integrate `f` over `(0, inf)` via the substitution `x = t / (1 - t)`.
pub fn integrate_zero_inf<F: Fn(f64) -> f64>(f: F, abs_tol: f64, rel_tol: f64) -> f64 {
    integrate(
        |t| {
            let one_minus = 1.0 - t;
            let x = t / one_minus;
            let v = f(x);
            if v == 0.0 || !v.is_finite() {
                0.0
            } else {
                v / (one_minus * one_minus)
            }
        },
        0.0,
        1.0,
        abs_tol,
        rel_tol,
    )
}
