use faer::linalg::solvers::Solve;
use faer::Mat;

use crate::error::{Error, Result};
use crate::grid::{build_diff_matrices, make_grid, ExtensionKind};

/// Eigen-decomposition `Dxx = P diag(lambda) P^{-1}` with the zero mode repaired.
#[derive(Debug, Clone)]
pub struct SpectralFactor {
    pub n: usize,
    pub p: Mat<f64>,
    pub pinv: Mat<f64>,
    pub lambda: Vec<f64>,
    pub zero_index: usize,
    /// Eigenvalue of smallest modulus as returned by the solver, before rounding.
    pub raw_zero_lambda: f64,
}

impl SpectralFactor {
    /// Factor of the unscaled even-extension `Dxx` with `n` nodes. The result
    /// does not depend on the grid scale.
    pub fn for_size(n: usize) -> Result<Self> {
        let grid = make_grid(n, 1.0)?;
        let dm = build_diff_matrices(&grid, ExtensionKind::Even)?;
        factorize(&dm.dxx)
    }

    /// Row `i` of `P` as a contiguous vector.
    pub fn p_row(&self, i: usize) -> Vec<f64> {
        (0..self.n).map(|k| self.p[(i, k)]).collect()
    }
}

pub fn factorize(dxx: &Mat<f64>) -> Result<SpectralFactor> {
    let n = dxx.nrows();
    if n == 0 || dxx.ncols() != n {
        return Err(Error::ShapeMismatch { expected: vec![n, n], found: vec![dxx.nrows(), dxx.ncols()] });
    }
    let evd = dxx
        .eigen()
        .map_err(|e| Error::NoConvergence(format!("eigensolver failed: {e:?}")))?;
    let u = evd.U();
    let s = evd.S().column_vector();

    let max_mod = (0..n).map(|k| s[k].re.hypot(s[k].im)).fold(0.0, f64::max);
    let tol = 1e-6 * max_mod;
    let max_imag = (0..n).map(|k| s[k].im.abs()).fold(0.0, f64::max);
    if max_imag > tol {
        return Err(Error::NonRealSpectrum { imag: max_imag, tol });
    }

    // Rotate each eigenvector so that its largest component is real and
    // positive, then keep the real part.
    let mut cols: Vec<(f64, Vec<f64>)> = Vec::with_capacity(n);
    for k in 0..n {
        let mut m = 0;
        let mut best = -1.0;
        for i in 0..n {
            let a = u[(i, k)].re.hypot(u[(i, k)].im);
            if a > best {
                best = a;
                m = i;
            }
        }
        let (pr, pi) = if best > 0.0 {
            (u[(m, k)].re / best, -u[(m, k)].im / best)
        } else {
            (1.0, 0.0)
        };
        let mut v: Vec<f64> = (0..n).map(|i| u[(i, k)].re * pr - u[(i, k)].im * pi).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            v.iter_mut().for_each(|x| *x /= norm);
        }
        cols.push((s[k].re, v));
    }

    let zero = (0..n)
        .min_by(|&a, &b| cols[a].0.abs().total_cmp(&cols[b].0.abs()))
        .unwrap();
    let raw_zero_lambda = cols[zero].0;
    cols[zero].0 = 0.0;
    cols[zero].1 = vec![1.0 / (n as f64).sqrt(); n];
    if let Some(&(pos, _)) = cols.iter().find(|(l, _)| *l > 0.0) {
        return Err(Error::PositiveEigenvalue(pos));
    }
    cols.sort_by(|a, b| a.0.total_cmp(&b.0));
    let zero_index = n - 1;
    debug_assert_eq!(cols[zero_index].0, 0.0);

    let lambda: Vec<f64> = cols.iter().map(|c| c.0).collect();
    let p = Mat::from_fn(n, n, |i, k| cols[k].1[i]);
    // Solving against the identity keeps P^{-1} 1 much closer to a multiple
    // of the zero-mode unit vector than the LU's own inverse().
    let pinv = p.partial_piv_lu().solve(Mat::<f64>::identity(n, n));

    let ident_err = residual_identity(&p, &pinv);
    if !ident_err.is_finite() || ident_err > 1e-6 {
        return Err(Error::SingularEigenvectors(format!("|P Pinv - I|_max = {ident_err:e}")));
    }
    Ok(SpectralFactor { n, p, pinv, lambda, zero_index, raw_zero_lambda })
}

fn residual_identity(p: &Mat<f64>, pinv: &Mat<f64>) -> f64 {
    let prod = p * pinv;
    let n = p.nrows();
    let mut err: f64 = 0.0;
    for j in 0..n {
        for i in 0..n {
            let target = if i == j { 1.0 } else { 0.0 };
            let d = prod[(i, j)] - target;
            err = if d.is_nan() { f64::NAN } else { err.max(d.abs()) };
        }
    }
    err
}

/// `max |P Pinv - I|`.
pub fn inverse_residual(f: &SpectralFactor) -> f64 {
    residual_identity(&f.p, &f.pinv)
}

/// `max |Dxx - P diag(lambda) Pinv| / max |Dxx|`.
pub fn reconstruction_residual(dxx: &Mat<f64>, f: &SpectralFactor) -> f64 {
    let n = f.n;
    let scaled = Mat::from_fn(n, n, |i, k| f.p[(i, k)] * f.lambda[k]);
    let rec = &scaled * &f.pinv;
    let mut err: f64 = 0.0;
    let mut norm: f64 = 0.0;
    for j in 0..n {
        for i in 0..n {
            err = err.max((dxx[(i, j)] - rec[(i, j)]).abs());
            norm = norm.max(dxx[(i, j)].abs());
        }
    }
    err / norm
}

/// Spectral-norm condition number `sigma_max / sigma_min`.
pub fn condition_number(p: &Mat<f64>) -> Result<f64> {
    if p.nrows() != p.ncols() || p.nrows() == 0 {
        return Err(Error::ShapeMismatch {
            expected: vec![p.nrows(), p.nrows()],
            found: vec![p.nrows(), p.ncols()],
        });
    }
    let sv = p
        .singular_values()
        .map_err(|e| Error::NoConvergence(format!("singular values: {e:?}")))?;
    let max = sv.iter().copied().fold(0.0, f64::max);
    let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        return Err(Error::SingularMatrix);
    }
    Ok(max / min)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn condition_of_simple_matrices() {
        let id = Mat::<f64>::identity(4, 4);
        assert!((condition_number(&id).unwrap() - 1.0).abs() < 1e-14);
        let d = Mat::from_fn(2, 2, |i, j| if i == j { 2.0 - i as f64 } else { 0.0 });
        assert!((condition_number(&d).unwrap() - 2.0).abs() < 1e-14);
        let z = Mat::<f64>::zeros(3, 3);
        assert_eq!(condition_number(&z), Err(Error::SingularMatrix));
    }

    #[test]
    fn factor_invariants_over_sweep() {
        for &n in &[8usize, 16, 32, 64, 128, 256] {
            let g = make_grid(n, 1.0).unwrap();
            let dm = build_diff_matrices(&g, ExtensionKind::Even).unwrap();
            let f = factorize(&dm.dxx).unwrap();
            assert_eq!(f.zero_index, n - 1);
            assert_eq!(f.lambda[n - 1], 0.0);
            assert_eq!(f.lambda.iter().filter(|&&l| l == 0.0).count(), 1);
            assert_eq!(f.lambda.iter().filter(|&&l| l < 0.0).count(), n - 1);
            let c = 1.0 / (n as f64).sqrt();
            assert!((0..n).all(|i| f.p[(i, n - 1)] == c));
            let rec = reconstruction_residual(&dm.dxx, &f);
            assert!(rec <= 1e-7, "n={n} reconstruction {rec:e}");
            let inv = inverse_residual(&f);
            assert!(inv <= 1e-9, "n={n} inverse {inv:e}");
        }
    }

    #[test]
    fn repair_is_deterministic() {
        let g = make_grid(40, 1.0).unwrap();
        let dm = build_diff_matrices(&g, ExtensionKind::Even).unwrap();
        let a = factorize(&dm.dxx).unwrap();
        let b = factorize(&dm.dxx).unwrap();
        assert!(a.lambda.iter().zip(&b.lambda).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn rejects_complex_spectrum() {
        let rot = Mat::from_fn(2, 2, |i, j| match (i, j) {
            (0, 1) => -1.0,
            (1, 0) => 1.0,
            _ => 0.0,
        });
        assert!(matches!(factorize(&rot), Err(Error::NonRealSpectrum { .. })));
    }

    #[test]
    fn rejects_positive_eigenvalue() {
        let d = Mat::from_fn(2, 2, |i, j| if i == j { [3.0, 0.0][i] } else { 0.0 });
        assert!(matches!(factorize(&d), Err(Error::PositiveEigenvalue(_))));
    }
}
