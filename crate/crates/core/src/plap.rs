use std::f64::consts::PI;
use std::sync::Arc;

use faer::Par;
use rayon::prelude::*;

use crate::eigen::SpectralFactor;
use crate::error::{Error, Result};
use crate::fraclap::{check_factors, power_tensor, transform_all};
use crate::special::gamma_fn;
use crate::tensor::{contract_rows, tuple_iter, NdArray};

/// Default byte budget for the square buffer of the batched evaluation.
pub const DEFAULT_MEMORY_BUDGET: u128 = 2 << 30;

/// `sgn(t) |t|^{p-1}` with `sgn(0) = 0`.
pub fn phi_p(t: f64, p: f64) -> f64 {
    if t == 0.0 {
        0.0
    } else if p == 2.0 {
        t
    } else {
        t.signum() * t.abs().powf(p - 1.0)
    }
}

fn check_sp(s: f64, p: f64) -> Result<()> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::param(format!("s must lie in (0,1), got {s}")));
    }
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::param(format!("p must be >= 1, got {p}")));
    }
    let h = s * p / 2.0;
    let k = h.round();
    if k >= 1.0 && (h - k).abs() <= 1e-12 {
        return Err(Error::Pole(format!("sp/2 is a positive integer (s={s}, p={p}, sp/2={h})")));
    }
    Ok(())
}

/// Normalising constant `C(n, s, p)`; it does not depend on `n` and equals -1 at `p = 2`.
pub fn constant_c(n: usize, s: f64, p: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::param("dimension must be at least 1"));
    }
    check_sp(s, p)?;
    let num = -PI.sqrt() * 2f64.powf(2.0 * s - s * p - 1.0) * gamma_fn(1.0 - s * p / 2.0)?;
    Ok(num / (gamma_fn((p + 1.0) / 2.0)? * gamma_fn(1.0 - s)?))
}

/// Fractional p-Laplacian `(-Delta)^s_p` on a tensor grid.
#[derive(Debug, Clone)]
pub struct FracPOperator {
    pub factors: Vec<Arc<SpectralFactor>>,
    pub scales: Vec<f64>,
    pub s: f64,
    pub p: f64,
    /// `(-Lambda)^{sp/2}` over the scaled eigenvalue sums.
    pub pow_tensor: NdArray,
    pub c_const: f64,
    pub memory_budget: u128,
    /// Rows of each `P_j`, row-major.
    p_rows: Vec<Vec<f64>>,
}

impl FracPOperator {
    pub fn build(factors: Vec<Arc<SpectralFactor>>, scales: Vec<f64>, s: f64, p: f64) -> Result<Self> {
        check_factors(&factors, &scales)?;
        let c_const = constant_c(factors.len(), s, p)?;
        let pow_tensor = power_tensor(&factors, &scales, s * p / 2.0)?;
        let p_rows = factors
            .iter()
            .map(|f| (0..f.n).flat_map(|i| f.p_row(i)).collect())
            .collect();
        Ok(Self { factors, scales, s, p, pow_tensor, c_const, memory_budget: DEFAULT_MEMORY_BUDGET, p_rows })
    }

    pub fn with_memory_budget(mut self, bytes: u128) -> Self {
        self.memory_budget = bytes;
        self
    }

    pub fn shape(&self) -> &[usize] {
        self.pow_tensor.shape()
    }

    /// True when `sp >= 2`, where the formula is evaluated but no longer
    /// known to represent the operator.
    pub fn beyond_order_two(&self) -> bool {
        self.s * self.p >= 2.0
    }

    /// Bytes of one square buffer used by the batched path.
    pub fn batch_bytes(&self) -> u128 {
        let total = self.pow_tensor.len() as u128;
        total * total * 8
    }

    pub fn batch_fits(&self) -> bool {
        self.batch_bytes() <= self.memory_budget
    }

    /// Batched evaluation when the memory guard allows, pointwise otherwise.
    pub fn apply(&self, u: &NdArray) -> Result<NdArray> {
        if self.batch_fits() {
            self.apply_batched(u)
        } else {
            self.apply_pointwise(u)
        }
    }

    fn rows_at<'a>(&'a self, idx: &[usize]) -> Vec<&'a [f64]> {
        idx.iter()
            .enumerate()
            .map(|(d, &i)| {
                let n = self.factors[d].n;
                &self.p_rows[d][i * n..(i + 1) * n]
            })
            .collect()
    }

    /// One order-`sp/2` fractional Laplacian per grid point, run in parallel
    /// over the points of the current rayon pool.
    pub fn apply_pointwise(&self, u: &NdArray) -> Result<NdArray> {
        u.check_shape(self.shape())?;
        let shape = self.shape().to_vec();
        let total = u.len();
        let ud = u.data();
        let points: Vec<(Vec<usize>, usize)> = tuple_iter(&shape).collect();
        let values: Vec<(usize, f64)> = points
            .par_iter()
            .map_init(
                || (vec![0.0; total], vec![0.0; total], Vec::with_capacity(total)),
                |(buf, tmp, scratch), (idx, flat)| {
                    let at = flat - 1;
                    let u0 = ud[at];
                    for (b, &v) in buf.iter_mut().zip(ud) {
                        *b = phi_p(u0 - v, self.p);
                    }
                    transform_all(&self.factors, &shape, true, buf, tmp, Par::Seq);
                    for (b, w) in buf.iter_mut().zip(self.pow_tensor.data()) {
                        *b *= w;
                    }
                    let zero: Vec<usize> = idx.iter().map(|i| i - 1).collect();
                    let rows = self.rows_at(&zero);
                    (at, self.c_const * contract_rows(buf, &shape, &rows, scratch))
                },
            )
            .collect();
        let mut out = vec![0.0; total];
        for (at, v) in values {
            out[at] = v;
        }
        NdArray::new(shape, out)
    }

    /// All points at once through a square table of differences.
    pub fn apply_batched(&self, u: &NdArray) -> Result<NdArray> {
        u.check_shape(self.shape())?;
        let needed = self.batch_bytes();
        if needed > self.memory_budget {
            return Err(Error::MemoryGuard { needed, budget: self.memory_budget });
        }
        let shape = self.shape().to_vec();
        let total = u.len();
        let ud = u.data();
        // Column c holds phi_p(U_c - U) over the grid.
        let mut buf = Vec::with_capacity(total * total);
        for &uc in ud {
            buf.extend(ud.iter().map(|&v| phi_p(uc - v, self.p)));
        }
        let mut tmp = vec![0.0; total * total];
        let mut wide = shape.clone();
        wide.push(total);
        transform_all(&self.factors, &wide, true, &mut buf, &mut tmp, faer::get_global_parallelism());
        drop(tmp);
        let pow = self.pow_tensor.data();
        let mut scratch = Vec::with_capacity(total);
        let mut out = vec![0.0; total];
        let mut idx = vec![0usize; shape.len()];
        for (c, col) in buf.chunks_exact_mut(total).enumerate() {
            for (x, w) in col.iter_mut().zip(pow) {
                *x *= w;
            }
            let rows = self.rows_at(&idx);
            out[c] = self.c_const * contract_rows(col, &shape, &rows, &mut scratch);
            for (d, i) in idx.iter_mut().enumerate() {
                *i += 1;
                if *i < shape[d] {
                    break;
                }
                *i = 0;
            }
        }
        NdArray::new(shape, out)
    }
}
