use std::sync::Arc;

use faer::Par;

use crate::eigen::SpectralFactor;
use crate::error::{Error, Result};
use crate::tensor::{eigen_sum_tensor, hadamard_pow_neg, mode_product_into, NdArray};

/// Linear fractional Laplacian `(-Delta)^s` on a tensor grid.
#[derive(Debug, Clone)]
pub struct FracLapOperator {
    pub factors: Vec<Arc<SpectralFactor>>,
    pub scales: Vec<f64>,
    pub s: f64,
    pub pow_tensor: NdArray,
}

pub(crate) fn check_factors(factors: &[Arc<SpectralFactor>], scales: &[f64]) -> Result<Vec<usize>> {
    if factors.is_empty() {
        return Err(Error::param("at least one dimension is required"));
    }
    if factors.len() != scales.len() {
        return Err(Error::param(format!("{} factors but {} scales", factors.len(), scales.len())));
    }
    Ok(factors.iter().map(|f| f.n).collect())
}

/// `(-Lambda)^{order}` for the scaled eigenvalue sums of `factors`.
pub(crate) fn power_tensor(factors: &[Arc<SpectralFactor>], scales: &[f64], order: f64) -> Result<NdArray> {
    let lambdas: Vec<&[f64]> = factors.iter().map(|f| f.lambda.as_slice()).collect();
    hadamard_pow_neg(&eigen_sum_tensor(&lambdas, scales)?, order)
}

/// Applies `P_j^{-1}` (or `P_j`) along every dimension in turn, dimension 1
/// first. `buf` and `tmp` must have the same length as the data; the result
/// ends in `buf`.
pub(crate) fn transform_all(
    factors: &[Arc<SpectralFactor>],
    shape: &[usize],
    inverse: bool,
    buf: &mut Vec<f64>,
    tmp: &mut Vec<f64>,
    par: Par,
) {
    for (axis, f) in factors.iter().enumerate() {
        let m = if inverse { f.pinv.as_ref() } else { f.p.as_ref() };
        mode_product_into(m, buf, shape, axis, tmp, par);
        std::mem::swap(buf, tmp);
    }
}

impl FracLapOperator {
    pub fn build(factors: Vec<Arc<SpectralFactor>>, scales: Vec<f64>, s: f64) -> Result<Self> {
        check_factors(&factors, &scales)?;
        if !(s > 0.0 && s < 1.0) {
            return Err(Error::param(format!("s must lie in (0,1), got {s}")));
        }
        let pow_tensor = power_tensor(&factors, &scales, s)?;
        Ok(Self { factors, scales, s, pow_tensor })
    }

    pub fn shape(&self) -> &[usize] {
        self.pow_tensor.shape()
    }

    pub fn apply(&self, u: &NdArray) -> Result<NdArray> {
        u.check_shape(self.shape())?;
        let shape = self.shape().to_vec();
        let par = faer::get_global_parallelism();
        let mut buf = u.data().to_vec();
        let mut tmp = vec![0.0; buf.len()];
        transform_all(&self.factors, &shape, true, &mut buf, &mut tmp, par);
        for (b, w) in buf.iter_mut().zip(self.pow_tensor.data()) {
            *b *= w;
        }
        transform_all(&self.factors, &shape, false, &mut buf, &mut tmp, par);
        NdArray::new(shape, buf)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use faer::Mat;

    fn toy_factor(lambda: Vec<f64>) -> Arc<SpectralFactor> {
        let n = lambda.len();
        Arc::new(SpectralFactor {
            n,
            p: Mat::identity(n, n),
            pinv: Mat::identity(n, n),
            zero_index: n - 1,
            raw_zero_lambda: 0.0,
            lambda,
        })
    }

    #[test]
    fn build_examples() {
        let op = FracLapOperator::build(vec![toy_factor(vec![-1.0, 0.0])], vec![1.0], 0.5).unwrap();
        assert_eq!(op.pow_tensor.data(), &[1.0, 0.0]);
        let op = FracLapOperator::build(vec![toy_factor(vec![-4.0, 0.0])], vec![2.0], 0.5).unwrap();
        assert_eq!(op.pow_tensor.data(), &[1.0, 0.0]);
        let f = toy_factor(vec![-2.0, 0.0]);
        assert!(FracLapOperator::build(vec![f.clone(), f.clone()], vec![1.0, 1.0], 1.0).is_err());
        assert!(FracLapOperator::build(vec![f.clone()], vec![1.0, 1.0], 0.5).is_err());
        assert!(FracLapOperator::build(vec![f], vec![1.0], 0.0).is_err());
    }

    #[test]
    fn constants_are_annihilated() {
        let fx = Arc::new(SpectralFactor::for_size(12).unwrap());
        let fy = Arc::new(SpectralFactor::for_size(9).unwrap());
        let op = FracLapOperator::build(vec![fx, fy], vec![2.0, 3.0], 0.4).unwrap();
        let one = NdArray::from_fn(vec![12, 9], |_| 1.0).unwrap();
        let r = op.apply(&one).unwrap();
        assert!(r.max_abs() <= 1e-8);
        let bad = NdArray::zeros(vec![9, 12]).unwrap();
        assert!(matches!(op.apply(&bad), Err(Error::ShapeMismatch { .. })));
    }
}
