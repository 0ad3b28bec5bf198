//! Double-exponential (tanh-sinh) quadrature.
//!
//! Integrable endpoint singularities such as `|x|^{-γ}` with `γ < 1` are
//! handled without special treatment, provided the singular point is an
//! endpoint. [`integrate_pieces`] splits an interval at caller-supplied
//! breakpoints so interior singularities become endpoints.

use core::f64::consts::FRAC_PI_2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    pub error: f64,
}

const MAX_LEVEL: u32 = 8;
const T_MAX: f64 = 5.0;

/// `∫_a^b f(x) dx` to an absolute tolerance `tol` (best effort).
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Quadrature {
    if a == b {
        return Quadrature { value: 0.0, error: 0.0 };
    }
    if b < a {
        let q = integrate(f, b, a, tol);
        return Quadrature {
            value: -q.value,
            error: q.error,
        };
    }
    let half = 0.5 * (b - a);
    let centre = 0.5 * (a + b);

    // Weighted contribution of abscissa t (and its mirror -t).
    let pair = |t: f64| -> f64 {
        let u = FRAC_PI_2 * libm::sinh(t);
        let c = libm::cosh(u);
        let w = FRAC_PI_2 * libm::cosh(t) / (c * c);
        if t == 0.0 {
            return w * f(centre);
        }
        let d = half / (libm::exp(u) * c);
        if d <= 0.0 || w == 0.0 {
            return 0.0;
        }
        let left = a + d;
        let right = b - d;
        let mut s = 0.0;
        if left > a && left < b {
            s += f(left);
        }
        if right < b && right > a {
            s += f(right);
        }
        w * s
    };

    let mut h = 1.0;
    let mut sum = pair(0.0);
    let mut k = 1;
    while k as f64 * h <= T_MAX {
        sum += pair(k as f64 * h);
        k += 1;
    }
    let mut estimate = sum * h * half;
    let mut error = f64::INFINITY;
    for _ in 1..=MAX_LEVEL {
        h *= 0.5;
        let mut fresh = 0.0;
        let mut k = 1;
        while k as f64 * h <= T_MAX {
            fresh += pair(k as f64 * h);
            k += 2;
        }
        sum += fresh;
        let next = sum * h * half;
        error = libm::fabs(next - estimate);
        estimate = next;
        if error <= tol.max(1e-15 * libm::fabs(estimate)) {
            break;
        }
    }
    Quadrature {
        value: estimate,
        error,
    }
}

/// Integrates over `[a, b]` split at every breakpoint strictly inside it.
pub fn integrate_pieces<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, breakpoints: &[f64], tol: f64) -> Quadrature {
    let mut cuts: [f64; 16] = [0.0; 16];
    let mut n = 0;
    cuts[n] = a;
    n += 1;
    let mut inner: [f64; 14] = [f64::NAN; 14];
    let mut m = 0;
    for &p in breakpoints {
        if p > a && p < b && m < inner.len() {
            inner[m] = p;
            m += 1;
        }
    }
    let inner = &mut inner[..m];
    inner.sort_unstable_by(|x, y| x.partial_cmp(y).unwrap_or(core::cmp::Ordering::Equal));
    for &p in inner.iter() {
        cuts[n] = p;
        n += 1;
    }
    cuts[n] = b;
    n += 1;
    let mut total = Quadrature { value: 0.0, error: 0.0 };
    for w in cuts[..n].windows(2) {
        let q = integrate(&f, w[0], w[1], tol);
        total.value += q.value;
        total.error += q.error;
    }
    total
}

/// `∫_{-∞}^{∞} f`, splitting at the breakpoints and mapping the two tails
/// onto finite intervals via `x = c ± s/(1-s)`.
pub fn integrate_real_line<F: Fn(f64) -> f64>(f: F, breakpoints: &[f64], tol: f64) -> Quadrature {
    let (lo, hi) = breakpoints
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &p| (l.min(p), h.max(p)));
    let (lo, hi) = if lo.is_finite() { (lo, hi) } else { (0.0, 0.0) };
    let mut total = if hi > lo {
        integrate_pieces(&f, lo, hi, breakpoints, tol)
    } else {
        Quadrature { value: 0.0, error: 0.0 }
    };
    let right = integrate(
        |s: f64| {
            let q = 1.0 - s;
            f(hi + s / q) / (q * q)
        },
        0.0,
        1.0,
        tol,
    );
    let left = integrate(
        |s: f64| {
            let q = 1.0 - s;
            f(lo - s / q) / (q * q)
        },
        0.0,
        1.0,
        tol,
    );
    total.value += right.value + left.value;
    total.error += right.error + left.error;
    total
}
