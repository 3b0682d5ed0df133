use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::special::{gamma_fn, hyp1f1, hyp2f1};

/// `(-Delta)^s exp(-|x|^2)` in n dimensions at `|x|^2 = r2`.
pub fn exact_fraclap_gaussian(s: f64, n: usize, r2: f64) -> Result<f64> {
    check_common(s, n, r2)?;
    let h = n as f64 / 2.0;
    let pre = 2f64.powf(2.0 * s) * gamma_fn(s + h)? / gamma_fn(h)?;
    Ok(pre * hyp1f1(s + h, h, -r2)?.value)
}

/// `(-Delta)^s (1 + |x|^2)^{-r}` in n dimensions at `|x|^2 = r2`.
pub fn exact_fraclap_algebraic(s: f64, r: f64, n: usize, r2: f64) -> Result<f64> {
    check_common(s, n, r2)?;
    if !(r > 0.0) {
        return Err(Error::param(format!("algebraic decay exponent must be positive, got {r}")));
    }
    let h = n as f64 / 2.0;
    let pre = 2f64.powf(2.0 * s) * gamma_fn(s + r)? * gamma_fn(s + h)? / (gamma_fn(r)? * gamma_fn(h)?);
    Ok(pre * hyp2f1(s + r, s + h, h, -r2)?.value)
}

fn check_common(s: f64, n: usize, r2: f64) -> Result<()> {
    if !(s >= 0.0) || n == 0 || !(r2 >= 0.0) || !r2.is_finite() {
        return Err(Error::param(format!("need s >= 0, n >= 1, r2 >= 0; got s={s}, n={n}, r2={r2}")));
    }
    Ok(())
}

/// Quadrature value next to its closed form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LemmaCheck {
    pub numeric: f64,
    pub closed: f64,
}

impl LemmaCheck {
    pub fn rel_error(&self) -> f64 {
        ((self.numeric - self.closed) / self.closed).abs()
    }
}

const LEVELS: usize = 60;
const PANELS_PER_LEVEL: usize = 1000;

fn midpoint(f: &impl Fn(f64) -> f64, a: f64, b: f64, m: usize) -> f64 {
    let h = (b - a) / m as f64;
    (0..m).map(|k| f(a + (k as f64 + 0.5) * h)).sum::<f64>() * h
}

/// Integral of `f` over `(0, 1/2]` where `f(y) ~ c y^e` as `y -> 0` with `e > -1`:
/// midpoint panels on dyadic intervals plus the leading-order tail below.
fn graded_from_zero(f: &impl Fn(f64) -> f64, c: f64, e: f64) -> f64 {
    let mut total = 0.0;
    let mut hi = 0.5;
    for _ in 0..LEVELS {
        let lo = hi / 2.0;
        total += midpoint(f, lo, hi, PANELS_PER_LEVEL);
        hi = lo;
    }
    total + c * hi.powf(e + 1.0) / (e + 1.0)
}

fn check_lemma_args(mu: f64, s: f64) -> Result<()> {
    if !(mu < 0.0) || !mu.is_finite() || !(s > 0.0 && s < 1.0) {
        return Err(Error::param(format!("lemma oracles need mu < 0 and s in (0,1), got mu={mu}, s={s}")));
    }
    Ok(())
}

fn finite(v: f64, what: &str) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NoConvergence(format!("{what} quadrature produced {v}")))
    }
}

/// `int_0^inf mu t^{s-1} / (t - mu) dt` by quadrature, against `-pi csc(pi s) (-mu)^s`.
pub fn lemma_i1_oracle(mu: f64, s: f64) -> Result<LemmaCheck> {
    check_lemma_args(mu, s)?;
    // t = x / (1 - x) maps (0, inf) to (0, 1).
    let g = |x: f64| mu * x.powf(s - 1.0) * (1.0 - x).powf(-s) / (x - mu * (1.0 - x));
    let left = graded_from_zero(&g, -1.0, s - 1.0);
    // Near x = 1 the integrand is written in y = 1 - x to keep y exact.
    let h = |y: f64| mu * (1.0 - y).powf(s - 1.0) * y.powf(-s) / ((1.0 - y) - mu * y);
    let right = graded_from_zero(&h, mu, -s);
    let numeric = finite(left + right, "I1")?;
    let closed = -PI / (PI * s).sin() * (-mu).powf(s);
    Ok(LemmaCheck { numeric, closed })
}

/// `int_0^inf (e^{mu t} - 1) / t^{1+s} dt` by series plus quadrature, against
/// `Gamma(-s) (-mu)^s`.
pub fn lemma_i2_oracle(mu: f64, s: f64) -> Result<LemmaCheck> {
    check_lemma_args(mu, s)?;
    // On (0, 1]: termwise integration of the exponential series.
    let mut head = 0.0;
    let mut pw = 1.0;
    let mut converged = false;
    for k in 1..400 {
        pw *= mu / k as f64;
        let term = pw / (k as f64 - s);
        head += term;
        if k as f64 > -mu && term.abs() <= 1e-17 * head.abs() {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NoConvergence("I2 series on (0,1]".into()));
    }
    // On [1, inf): t = 1/x gives int_0^1 (e^{mu/x} - 1) x^{s-1} dx.
    let g = |x: f64| ((mu / x).exp() - 1.0) * x.powf(s - 1.0);
    let tail = graded_from_zero(&g, -1.0, s - 1.0) + midpoint(&g, 0.5, 1.0, 4 * PANELS_PER_LEVEL);
    let numeric = finite(head + tail, "I2")?;
    let closed = gamma_fn(-s)? * (-mu).powf(s);
    Ok(LemmaCheck { numeric, closed })
}
