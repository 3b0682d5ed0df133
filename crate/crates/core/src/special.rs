use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Value of a hypergeometric evaluation together with convergence bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HypergeometricResult {
    pub value: f64,
    pub terms_used: usize,
    pub converged: bool,
}

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

fn is_nonpositive_integer(x: f64) -> bool {
    x <= 0.0 && x == x.round()
}

/// `sin(pi x)` with exact zeros at the integers.
fn sin_pi(x: f64) -> f64 {
    let n = x.round();
    let r = x - n;
    let s = (PI * r).sin();
    if (n as i64) % 2 == 0 {
        s
    } else {
        -s
    }
}

fn gamma_positive(x: f64) -> f64 {
    let z = x - 1.0;
    let mut a = LANCZOS[0];
    for (k, c) in LANCZOS.iter().enumerate().skip(1) {
        a += c / (z + k as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    // t^(z+1/2) split in two factors to stay finite near the overflow limit.
    let half = t.powf(0.5 * (z + 0.5));
    (2.0 * PI).sqrt() * half * (half * (-t).exp()) * a
}

pub fn gamma_fn(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::param(format!("gamma argument must be finite, got {x}")));
    }
    if is_nonpositive_integer(x) {
        return Err(Error::Pole(format!("gamma has a pole at {x}")));
    }
    if x < 0.5 {
        Ok(PI / (sin_pi(x) * gamma_positive(1.0 - x)))
    } else {
        Ok(gamma_positive(x))
    }
}

/// `1 / Gamma(x)`, zero at the poles.
pub fn rgamma(x: f64) -> f64 {
    if is_nonpositive_integer(x) {
        0.0
    } else if x < 0.5 {
        sin_pi(x) * gamma_positive(1.0 - x) / PI
    } else {
        1.0 / gamma_positive(x)
    }
}

/// Sum of `sum_k (a)_k (b)_k / ((c)_k k!) w^k` for `0 <= w < 1`.
fn series_2f1(a: f64, b: f64, c: f64, w: f64, max_terms: usize) -> HypergeometricResult {
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut scale: f64 = 1.0;
    for k in 0..max_terms {
        let kf = k as f64;
        term *= (a + kf) * (b + kf) / ((c + kf) * (kf + 1.0)) * w;
        sum += term;
        scale = scale.max(sum.abs());
        if term == 0.0 || term.abs() <= 1e-17 * scale {
            return HypergeometricResult { value: sum, terms_used: k + 2, converged: true };
        }
    }
    HypergeometricResult { value: sum, terms_used: max_terms + 1, converged: false }
}

/// `sum_k (a)_k / ((b)_k k!) x^k` for `x >= 0`.
fn series_1f1(a: f64, b: f64, x: f64, max_terms: usize) -> HypergeometricResult {
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut scale: f64 = 1.0;
    for k in 0..max_terms {
        let kf = k as f64;
        term *= (a + kf) / ((b + kf) * (kf + 1.0)) * x;
        sum += term;
        scale = scale.max(sum.abs());
        // Terms can grow before they decay, so only stop once k exceeds x.
        if term == 0.0 || (kf > x && term.abs() <= 1e-17 * scale) {
            return HypergeometricResult { value: sum, terms_used: k + 2, converged: true };
        }
    }
    HypergeometricResult { value: sum, terms_used: max_terms + 1, converged: false }
}

/// Truncated asymptotic series `sum_k (p)_k (q)_k / k! x^{-k}`, stopped at its
/// smallest term. Returns the sum, the terms used and the size of the first
/// omitted term relative to the sum.
fn asymptotic_sum(p: f64, q: f64, x: f64) -> (f64, usize, f64) {
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 0..500 {
        let kf = k as f64;
        let next = term * (p + kf) * (q + kf) / ((kf + 1.0) * x);
        if next == 0.0 {
            return (sum, k + 1, 0.0);
        }
        if next.abs() >= term.abs() {
            return (sum, k + 1, next.abs() / sum.abs());
        }
        if next.abs() <= 1e-17 * sum.abs() {
            sum += next;
            return (sum, k + 2, 0.0);
        }
        sum += next;
        term = next;
    }
    (sum, 501, term.abs() / sum.abs())
}

/// Switch-over point between the Kummer series and the large-argument expansion.
pub const HYP1F1_ASYMPTOTIC_THRESHOLD: f64 = 50.0;

/// Confluent hypergeometric function `1F1(a; b; z)` for `b > 0`, `z <= 0`.
pub fn hyp1f1(a: f64, b: f64, z: f64) -> Result<HypergeometricResult> {
    if !(b > 0.0) || !a.is_finite() || !b.is_finite() {
        return Err(Error::param(format!("1F1 needs finite a and b > 0, got a={a}, b={b}")));
    }
    if !(z <= 0.0) {
        return Err(Error::param(format!("1F1 is implemented for z <= 0, got {z}")));
    }
    if z == 0.0 {
        return Ok(HypergeometricResult { value: 1.0, terms_used: 1, converged: true });
    }
    let x = -z;
    let c = b - a;
    if is_nonpositive_integer(a) {
        // Polynomial in z.
        let r = series_1f1(a, b, z, (-a) as usize + 2);
        return Ok(HypergeometricResult { converged: true, ..r });
    }
    if is_nonpositive_integer(c) {
        let r = series_1f1(c, b, x, (-c) as usize + 2);
        return Ok(HypergeometricResult { value: (-x).exp() * r.value, terms_used: r.terms_used, converged: true });
    }
    if x > HYP1F1_ASYMPTOTIC_THRESHOLD {
        let (s1, n1, rel) = asymptotic_sum(a, a - b + 1.0, x);
        let gb = gamma_fn(b)?;
        let lead = gb * rgamma(c) * x.powf(-a) * s1;
        // Exponentially small companion term.
        let (s2, n2, _) = asymptotic_sum(c, 1.0 - a, x);
        let tail = gb * rgamma(a) * (-x).exp() * x.powf(a - b) * s2;
        if rel <= 1e-15 {
            return Ok(HypergeometricResult { value: lead + tail, terms_used: n1 + n2, converged: true });
        }
    }
    if x < 700.0 {
        let r = series_1f1(c, b, x, 20_000);
        if r.converged {
            return Ok(HypergeometricResult { value: (-x).exp() * r.value, ..r });
        }
    }
    Err(Error::NoConvergence(format!("1F1({a}; {b}; {z})")))
}

fn near_integer(x: f64) -> bool {
    (x - x.round()).abs() < 1e-8
}

/// Gauss hypergeometric function `2F1(a, b; c; z)` for `c > 0`, `z <= 0`.
pub fn hyp2f1(a: f64, b: f64, c: f64, z: f64) -> Result<HypergeometricResult> {
    if !(c > 0.0) || !a.is_finite() || !b.is_finite() || !c.is_finite() {
        return Err(Error::param(format!("2F1 needs finite a, b and c > 0, got a={a}, b={b}, c={c}")));
    }
    if !(z <= 0.0) {
        return Err(Error::param(format!("2F1 is implemented for z <= 0, got {z}")));
    }
    if z == 0.0 {
        return Ok(HypergeometricResult { value: 1.0, terms_used: 1, converged: true });
    }
    // Symmetric in a and b; put a terminating parameter in the Pfaff slot.
    let (a, b) = if is_nonpositive_integer(c - a) && !is_nonpositive_integer(c - b) { (b, a) } else { (a, b) };
    let terminating = is_nonpositive_integer(c - b) || is_nonpositive_integer(a);
    let w = z / (z - 1.0);
    if z >= -1.0 || terminating {
        let cap = if terminating { 1_000_000 } else { 10_000 };
        let r = series_2f1(a, c - b, c, w, cap);
        return finish(r, (1.0 - z).powf(-a), a, b, c, z);
    }
    if !near_integer(a - b) {
        let y = 1.0 / (1.0 - z);
        let gc = gamma_fn(c)?;
        let r1 = series_2f1(a, c - b, a - b + 1.0, y, 10_000);
        let r2 = series_2f1(b, c - a, b - a + 1.0, y, 10_000);
        let t1 = gc * gamma_fn(b - a)? * rgamma(b) * rgamma(c - a) * (1.0 - z).powf(-a) * r1.value;
        let t2 = gc * gamma_fn(a - b)? * rgamma(a) * rgamma(c - b) * (1.0 - z).powf(-b) * r2.value;
        let r = HypergeometricResult {
            value: t1 + t2,
            terms_used: r1.terms_used + r2.terms_used,
            converged: r1.converged && r2.converged,
        };
        return finish(r, 1.0, a, b, c, z);
    }
    // Integer a - b makes the connection coefficients singular; fall back to
    // the slowly converging Pfaff series.
    let r = series_2f1(a, c - b, c, w, 2_000_000);
    finish(r, (1.0 - z).powf(-a), a, b, c, z)
}

fn finish(r: HypergeometricResult, factor: f64, a: f64, b: f64, c: f64, z: f64) -> Result<HypergeometricResult> {
    if !r.converged || !r.value.is_finite() {
        return Err(Error::NoConvergence(format!("2F1({a}, {b}; {c}; {z}) after {} terms", r.terms_used)));
    }
    Ok(HypergeometricResult { value: factor * r.value, ..r })
}
