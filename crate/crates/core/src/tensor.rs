use faer::linalg::matmul::matmul;
use faer::{Accum, MatMut, MatRef, Par};

use crate::error::{Error, Result};

/// Dense real n-dimensional array. The first index varies fastest in `data`.
#[derive(Debug, Clone, PartialEq)]
pub struct NdArray {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl NdArray {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        validate_shape(&shape)?;
        let len: usize = shape.iter().product();
        if data.len() != len {
            return Err(Error::param(format!(
                "data length {} does not match shape {:?} ({} entries)",
                data.len(),
                shape,
                len
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Result<Self> {
        validate_shape(&shape)?;
        let len = shape.iter().product();
        Ok(Self { shape, data: vec![0.0; len] })
    }

    /// Builds an array from a function of the 0-based index tuple.
    pub fn from_fn(shape: Vec<usize>, mut f: impl FnMut(&[usize]) -> f64) -> Result<Self> {
        validate_shape(&shape)?;
        let len: usize = shape.iter().product();
        let mut idx = vec![0usize; shape.len()];
        let mut data = Vec::with_capacity(len);
        for _ in 0..len {
            data.push(f(&idx));
            for (d, i) in idx.iter_mut().enumerate() {
                *i += 1;
                if *i < shape[d] {
                    break;
                }
                *i = 0;
            }
        }
        Ok(Self { shape, data })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn ndim(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Flat offset of a 0-based index tuple.
    pub fn offset(&self, idx: &[usize]) -> usize {
        flat_offset(&self.shape, idx)
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.data[self.offset(idx)]
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { shape: self.shape.clone(), data: self.data.iter().map(|&v| f(v)).collect() }
    }

    /// `self + a * other`.
    pub fn axpy(&self, a: f64, other: &Self) -> Result<Self> {
        self.check_same_shape(other)?;
        let data = self.data.iter().zip(&other.data).map(|(x, y)| x + a * y).collect();
        Ok(Self { shape: self.shape.clone(), data })
    }

    pub fn hadamard(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other)?;
        let data = self.data.iter().zip(&other.data).map(|(x, y)| x * y).collect();
        Ok(Self { shape: self.shape.clone(), data })
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        self.check_same_shape(other)?;
        Ok(self.data.iter().zip(&other.data).fold(0.0, |m, (x, y)| m.max((x - y).abs())))
    }

    pub fn check_shape(&self, expected: &[usize]) -> Result<()> {
        if self.shape != expected {
            return Err(Error::ShapeMismatch { expected: expected.to_vec(), found: self.shape.clone() });
        }
        Ok(())
    }

    fn check_same_shape(&self, other: &Self) -> Result<()> {
        other.check_shape(&self.shape)
    }
}

fn validate_shape(shape: &[usize]) -> Result<()> {
    if shape.is_empty() || shape.contains(&0) {
        return Err(Error::param(format!("shape must be non-empty with positive sizes, got {shape:?}")));
    }
    Ok(())
}

pub(crate) fn flat_offset(shape: &[usize], idx: &[usize]) -> usize {
    let mut off = 0;
    let mut stride = 1;
    for (d, &i) in idx.iter().enumerate() {
        off += i * stride;
        stride *= shape[d];
    }
    off
}

/// Mode product on raw buffers. `axis` is 0-based; `dst` must hold the output
/// with `shape[axis]` replaced by `a.nrows()`.
pub(crate) fn mode_product_into(
    a: MatRef<'_, f64>,
    src: &[f64],
    shape: &[usize],
    axis: usize,
    dst: &mut [f64],
    par: Par,
) {
    let prefix: usize = shape[..axis].iter().product();
    let nj = shape[axis];
    let suffix: usize = shape[axis + 1..].iter().product();
    let m = a.nrows();
    debug_assert_eq!(a.ncols(), nj);
    debug_assert_eq!(src.len(), prefix * nj * suffix);
    debug_assert_eq!(dst.len(), prefix * m * suffix);
    if prefix == 1 {
        let v = MatRef::from_column_major_slice(src, nj, suffix);
        let out = MatMut::from_column_major_slice_mut(dst, m, suffix);
        matmul(out, Accum::Replace, a, v, 1.0, par);
    } else {
        for b in 0..suffix {
            let ub = MatRef::from_column_major_slice(&src[b * prefix * nj..(b + 1) * prefix * nj], prefix, nj);
            let ob = MatMut::from_column_major_slice_mut(&mut dst[b * prefix * m..(b + 1) * prefix * m], prefix, m);
            matmul(ob, Accum::Replace, ub, a.transpose(), 1.0, par);
        }
    }
}

/// `A □_j U`: contracts the columns of `a` against dimension `j` (1-based) of `u`.
pub fn mode_product(a: MatRef<'_, f64>, u: &NdArray, j: usize) -> Result<NdArray> {
    mode_product_par(a, u, j, faer::get_global_parallelism())
}

pub fn mode_product_par(a: MatRef<'_, f64>, u: &NdArray, j: usize, par: Par) -> Result<NdArray> {
    if j == 0 || j > u.ndim() {
        return Err(Error::param(format!("dimension index {j} outside 1..={}", u.ndim())));
    }
    let axis = j - 1;
    if a.ncols() != u.shape[axis] {
        return Err(Error::param(format!(
            "matrix has {} columns but dimension {j} has size {}",
            a.ncols(),
            u.shape[axis]
        )));
    }
    if a.nrows() == 0 {
        return Err(Error::param("matrix has no rows"));
    }
    let mut shape = u.shape.clone();
    shape[axis] = a.nrows();
    let mut data = vec![0.0; shape.iter().product()];
    mode_product_into(a, &u.data, &u.shape, axis, &mut data, par);
    Ok(NdArray { shape, data })
}

/// Contracts `v` (shape `shape`) against one row vector per dimension,
/// dimension 1 first. Returns the resulting scalar.
pub(crate) fn contract_rows(v: &[f64], shape: &[usize], rows: &[&[f64]], scratch: &mut Vec<f64>) -> f64 {
    let mut len = v.len();
    scratch.clear();
    scratch.extend_from_slice(v);
    for (d, row) in rows.iter().enumerate() {
        let nd = shape[d];
        let rest = len / nd;
        for r in 0..rest {
            let chunk = &scratch[r * nd..(r + 1) * nd];
            let mut acc = 0.0;
            for k in 0..nd {
                acc += row[k] * chunk[k];
            }
            scratch[r] = acc;
        }
        len = rest;
    }
    scratch[0]
}

/// Sequential generator of index tuples, counting the flat index down from
/// `prod N_j` to 1. Tuples and flat indices are 1-based.
#[derive(Debug, Clone)]
pub struct TupleIter {
    shape: Vec<usize>,
    current: Vec<usize>,
    remaining: usize,
}

pub fn tuple_iter(shape: &[usize]) -> TupleIter {
    TupleIter { shape: shape.to_vec(), current: shape.to_vec(), remaining: shape.iter().product() }
}

impl Iterator for TupleIter {
    type Item = (Vec<usize>, usize);

    fn next(&mut self) -> Option<Self::Item> {
        if self.remaining == 0 {
            return None;
        }
        let item = (self.current.clone(), self.remaining);
        self.remaining -= 1;
        for (d, i) in self.current.iter_mut().enumerate() {
            if *i > 1 {
                *i -= 1;
                break;
            }
            *i = self.shape[d];
        }
        Some(item)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        (self.remaining, Some(self.remaining))
    }
}

impl ExactSizeIterator for TupleIter {}

/// Tensor with entries `sum_j lambda_{j, i_j} / L_j^2`.
pub fn eigen_sum_tensor(lambdas: &[&[f64]], scales: &[f64]) -> Result<NdArray> {
    if lambdas.is_empty() || lambdas.len() != scales.len() {
        return Err(Error::param(format!(
            "{} eigenvalue vectors but {} scales",
            lambdas.len(),
            scales.len()
        )));
    }
    if let Some(l) = scales.iter().find(|&&l| !(l > 0.0 && l.is_finite())) {
        return Err(Error::param(format!("scales must be positive, got {l}")));
    }
    let shape: Vec<usize> = lambdas.iter().map(|l| l.len()).collect();
    let inv: Vec<f64> = scales.iter().map(|l| 1.0 / (l * l)).collect();
    NdArray::from_fn(shape, |idx| {
        idx.iter().enumerate().map(|(d, &i)| lambdas[d][i] * inv[d]).sum()
    })
}

/// Entrywise `(-T)^e`, with `0^e = 0`.
pub fn hadamard_pow_neg(t: &NdArray, e: f64) -> Result<NdArray> {
    if !(e > 0.0 && e.is_finite()) {
        return Err(Error::param(format!("exponent must be positive, got {e}")));
    }
    let tol = 1e-12 * t.max_abs();
    let mut data = Vec::with_capacity(t.len());
    for (k, &v) in t.data.iter().enumerate() {
        if v > tol {
            return Err(Error::PositiveEntry { index: k, value: v });
        }
        data.push(if v >= 0.0 { 0.0 } else { (-v).powf(e) });
    }
    Ok(NdArray { shape: t.shape.clone(), data })
}

#[cfg(test)]
mod tests {
    use super::*;
    use faer::Mat;
    use proptest::prelude::*;

    #[test]
    fn swap_example() {
        // U_11 = 1, U_21 = 3, U_12 = 2, U_22 = 4
        let u = NdArray::new(vec![2, 2], vec![1.0, 3.0, 2.0, 4.0]).unwrap();
        let a = Mat::from_fn(2, 2, |i, j| if i != j { 1.0 } else { 0.0 });
        let r = mode_product(a.as_ref(), &u, 1).unwrap();
        assert_eq!(r.get(&[0, 0]), 3.0);
        assert_eq!(r.get(&[1, 0]), 1.0);
        assert_eq!(r.get(&[0, 1]), 4.0);
        assert_eq!(r.get(&[1, 1]), 2.0);
    }

    #[test]
    fn identity_and_matrix_products() {
        let u = NdArray::from_fn(vec![3, 4], |i| (i[0] * 5 + i[1] * 2) as f64 - 3.5).unwrap();
        let id = Mat::<f64>::identity(3, 3);
        assert_eq!(mode_product(id.as_ref(), &u, 1).unwrap(), u);
        let a = Mat::from_fn(2, 3, |i, j| (i + 2 * j) as f64 - 1.0);
        let b = Mat::from_fn(5, 4, |i, j| (i * j) as f64 * 0.5 - 1.0);
        let ua = mode_product(a.as_ref(), &u, 1).unwrap();
        let ub = mode_product(b.as_ref(), &u, 2).unwrap();
        assert_eq!(ua.shape(), &[2, 4]);
        assert_eq!(ub.shape(), &[3, 5]);
        let um = Mat::from_fn(3, 4, |i, j| u.get(&[i, j]));
        let au = &a * &um;
        let ubt = &um * b.transpose();
        for i in 0..2 {
            for j in 0..4 {
                assert!((au[(i, j)] - ua.get(&[i, j])).abs() < 1e-13);
            }
        }
        for i in 0..3 {
            for j in 0..5 {
                assert!((ubt[(i, j)] - ub.get(&[i, j])).abs() < 1e-13);
            }
        }
        assert!(mode_product(a.as_ref(), &u, 2).is_err());
        assert!(mode_product(a.as_ref(), &u, 0).is_err());
        assert!(mode_product(a.as_ref(), &u, 3).is_err());
    }

    #[test]
    fn tuple_order() {
        let t: Vec<_> = tuple_iter(&[2, 2]).collect();
        assert_eq!(
            t,
            vec![(vec![2, 2], 4), (vec![1, 2], 3), (vec![2, 1], 2), (vec![1, 1], 1)]
        );
        let t: Vec<_> = tuple_iter(&[3]).map(|(i, _)| i[0]).collect();
        assert_eq!(t, vec![3, 2, 1]);
        let set: std::collections::HashSet<_> = tuple_iter(&[2, 3]).map(|(i, _)| i).collect();
        assert_eq!(set.len(), 6);
    }

    #[test]
    fn eigen_sums() {
        let t = eigen_sum_tensor(&[&[-1.0, -2.0, 0.0]], &[1.0]).unwrap();
        assert_eq!(t.data(), &[-1.0, -2.0, 0.0]);
        let t = eigen_sum_tensor(&[&[-1.0, 0.0], &[-2.0, 0.0]], &[1.0, 1.0]).unwrap();
        assert_eq!(t.get(&[0, 0]), -3.0);
        assert_eq!(t.get(&[0, 1]), -1.0);
        assert_eq!(t.get(&[1, 0]), -2.0);
        assert_eq!(t.get(&[1, 1]), 0.0);
        let t = eigen_sum_tensor(&[&[-4.0]], &[2.0]).unwrap();
        assert_eq!(t.data(), &[-1.0]);
        assert!(eigen_sum_tensor(&[&[-4.0]], &[0.0]).is_err());
        assert!(eigen_sum_tensor(&[&[-4.0]], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn powers() {
        let z = NdArray::new(vec![1], vec![0.0]).unwrap();
        assert_eq!(hadamard_pow_neg(&z, 0.3).unwrap().data(), &[0.0]);
        let t = NdArray::new(vec![1], vec![-4.0]).unwrap();
        assert_eq!(hadamard_pow_neg(&t, 0.5).unwrap().data(), &[2.0]);
        let t = NdArray::new(vec![2], vec![-1.0, -8.0]).unwrap();
        let r = hadamard_pow_neg(&t, 1.0 / 3.0).unwrap();
        assert!((r.data()[0] - 1.0).abs() < 1e-15 && (r.data()[1] - 2.0).abs() < 1e-15);
        let t = NdArray::new(vec![2], vec![-1.0, 0.5]).unwrap();
        assert!(matches!(hadamard_pow_neg(&t, 0.5), Err(Error::PositiveEntry { index: 1, .. })));
    }

    #[test]
    fn contraction_matches_direct_sum() {
        let v = NdArray::from_fn(vec![3, 2, 4], |i| (i[0] + 3 * i[1]) as f64 * 0.25 - i[2] as f64).unwrap();
        let r0 = [1.0, -2.0, 0.5];
        let r1 = [0.3, 0.7];
        let r2 = [1.0, 0.0, -1.0, 2.0];
        let mut direct = 0.0;
        for a in 0..3 {
            for b in 0..2 {
                for c in 0..4 {
                    direct += r0[a] * r1[b] * r2[c] * v.get(&[a, b, c]);
                }
            }
        }
        let mut scratch = Vec::new();
        let got = contract_rows(v.data(), v.shape(), &[&r0, &r1, &r2], &mut scratch);
        assert!((got - direct).abs() < 1e-13);
    }

    fn shape_strategy() -> impl Strategy<Value = Vec<usize>> {
        prop::collection::vec(1usize..6, 1..4)
    }

    proptest! {
        #![proptest_config(ProptestConfig { cases: 64, rng_seed: proptest::test_runner::RngSeed::Fixed(11), ..ProptestConfig::default() })]

        #[test]
        fn tuple_iter_is_a_permutation(shape in prop::collection::vec(1usize..12, 1..5)) {
            let total: usize = shape.iter().product();
            prop_assume!(total <= 10_000);
            let mut seen = vec![false; total];
            let mut expected = total;
            for (idx, flat) in tuple_iter(&shape) {
                prop_assert_eq!(flat, expected);
                expected -= 1;
                let zero: Vec<usize> = idx.iter().map(|i| i - 1).collect();
                prop_assert_eq!(flat_offset(&shape, &zero) + 1, flat);
                prop_assert!(!seen[flat - 1]);
                seen[flat - 1] = true;
            }
            prop_assert!(seen.iter().all(|&s| s));
        }

        #[test]
        fn mode_products_commute(
            shape in shape_strategy(),
            pool in prop::collection::vec(-1.0f64..1.0, 97),
            ma in 1usize..5,
            mb in 1usize..5,
        ) {
            prop_assume!(shape.len() >= 2);
            let mut k = 0usize;
            let mut rnd = move || {
                k += 1;
                pool[k % pool.len()]
            };
            let u = NdArray::from_fn(shape.clone(), |_| rnd()).unwrap();
            let a = Mat::from_fn(ma, shape[0], |_, _| rnd());
            let b = Mat::from_fn(mb, shape[1], |_, _| rnd());
            let x = mode_product(a.as_ref(), &mode_product(b.as_ref(), &u, 2).unwrap(), 1).unwrap();
            let y = mode_product(b.as_ref(), &mode_product(a.as_ref(), &u, 1).unwrap(), 2).unwrap();
            let scale = x.max_abs().max(1.0);
            prop_assert!(x.max_abs_diff(&y).unwrap() <= 1e-13 * scale);
        }
    }
}
