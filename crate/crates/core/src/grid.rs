use std::f64::consts::PI;

use faer::Mat;

use crate::error::{Error, Result};

/// Mapped Chebyshev nodes for one coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid1D {
    pub n: usize,
    pub scale: f64,
    pub xi: Vec<f64>,
    pub x: Vec<f64>,
}

/// Behaviour imposed on the transformed function at `xi = pi`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExtensionKind {
    #[default]
    Even,
    Odd,
    Periodic,
}

/// Unscaled differentiation matrices: `dx ~ L d/dx`, `dxx ~ L^2 d^2/dx^2`.
#[derive(Debug, Clone)]
pub struct DiffMatrices {
    pub dx: Mat<f64>,
    pub dxx: Mat<f64>,
    pub extension: ExtensionKind,
}

impl DiffMatrices {
    pub fn n(&self) -> usize {
        self.dx.nrows()
    }
}

pub fn make_grid(n: usize, scale: f64) -> Result<Grid1D> {
    if n < 2 {
        return Err(Error::param(format!("grid needs N >= 2, got {n}")));
    }
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::param(format!("grid scale must be positive, got {scale}")));
    }
    let xi: Vec<f64> = (1..=n)
        .map(|j| PI * ((2 * j - 1) as f64 / (2 * n) as f64))
        .collect();
    let mut x = vec![0.0; n];
    // Only the upper half is evaluated; the lower half is its mirror image so
    // that antisymmetry holds exactly and an odd middle node is exactly zero.
    for j in 0..n / 2 {
        let v = scale / xi[j].tan();
        x[j] = v;
        x[n - 1 - j] = -v;
    }
    Ok(Grid1D { n, scale, xi, x })
}

fn check_order(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::param(format!("first-row vectors need N >= 2, got {n}")));
    }
    Ok(())
}

fn sign(j: usize) -> f64 {
    if j % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// First row of the periodic first-derivative matrix in `xi`, extended to 3N
/// entries. Index 0 of the returned vector is `c_1`.
pub fn first_row_dxi(n: usize) -> Result<Vec<f64>> {
    check_order(n)?;
    let h = PI / (2 * n) as f64;
    let mut c = vec![0.0; 3 * n];
    for j in 2..=n {
        c[j - 1] = 0.5 * sign(j) / ((j - 1) as f64 * h).tan();
    }
    for j in n + 2..=2 * n {
        c[j - 1] = -c[2 * n - j + 1];
    }
    for j in 2 * n + 1..=3 * n {
        c[j - 1] = c[j - 2 * n - 1];
    }
    Ok(c)
}

/// First row of the periodic second-derivative matrix in `xi`, 3N entries.
pub fn first_row_dxixi(n: usize) -> Result<Vec<f64>> {
    check_order(n)?;
    let h = PI / (2 * n) as f64;
    let nf = n as f64;
    let mut c = vec![0.0; 3 * n];
    c[0] = -(2.0 * nf * nf + 1.0) / 6.0;
    for j in 2..=n {
        let sn = ((j - 1) as f64 * h).sin();
        c[j - 1] = 0.5 * sign(j) / (sn * sn);
    }
    c[n] = -0.5 * sign(n);
    for j in n + 2..=2 * n {
        c[j - 1] = c[2 * n - j + 1];
    }
    for j in 2 * n + 1..=3 * n {
        c[j - 1] = c[j - 2 * n - 1];
    }
    Ok(c)
}

fn fold(c: &[f64], extension: ExtensionKind, n: usize, rows: usize) -> Mat<f64> {
    // 1-based recipe: c_{2N+1+(j-1)-(i-1)} + sigma c_{2N-(j-1)-(i-1)}; the
    // periodic variant keeps the second term un-reversed at c_{N+1+(j-1)-(i-1)}.
    Mat::from_fn(rows, n, |i, j| {
        let first = c[2 * n + j - i];
        match extension {
            ExtensionKind::Even => first + c[2 * n - 1 - j - i],
            ExtensionKind::Odd => first - c[2 * n - 1 - j - i],
            ExtensionKind::Periodic => first + c[n + j - i],
        }
    })
}

/// First `ceil(N/2)` rows of `D * I~` for the chosen extension.
pub fn folded_rows(c: &[f64], extension: ExtensionKind, n: usize) -> Result<Mat<f64>> {
    check_order(n)?;
    if c.len() != 3 * n {
        return Err(Error::param(format!(
            "first-row vector has length {}, expected {}",
            c.len(),
            3 * n
        )));
    }
    Ok(fold(c, extension, n, n.div_ceil(2)))
}

pub fn build_diff_matrices(grid: &Grid1D, extension: ExtensionKind) -> Result<DiffMatrices> {
    let n = grid.n;
    let c1 = first_row_dxi(n)?;
    let c2 = first_row_dxixi(n)?;
    // The reflection relations between top and bottom rows hold for the even
    // extension; the other extensions are folded over every row.
    let rows = match extension {
        ExtensionKind::Even => n.div_ceil(2),
        _ => n,
    };
    let a1 = fold(&c1, extension, n, rows);
    let a2 = fold(&c2, extension, n, rows);

    let mut dx = Mat::<f64>::zeros(n, n);
    let mut dxx = Mat::<f64>::zeros(n, n);
    for i in 0..rows {
        let sn = grid.xi[i].sin();
        let s2 = sn * sn;
        let s4 = s2 * s2;
        let s2x = (2.0 * grid.xi[i]).sin();
        for j in 0..n {
            let d1 = -s2 * a1[(i, j)];
            dx[(i, j)] = d1;
            dxx[(i, j)] = s4 * a2[(i, j)] - s2x * d1;
        }
    }
    if extension == ExtensionKind::Even {
        if n % 2 == 1 {
            // The middle row maps onto itself; mirror its right half so the
            // reflection relations hold bit for bit.
            let m = n / 2;
            for j in m + 1..n {
                dx[(m, j)] = -dx[(m, n - 1 - j)];
                dxx[(m, j)] = dxx[(m, n - 1 - j)];
            }
        }
        for i in rows..n {
            for j in 0..n {
                dx[(i, j)] = -dx[(n - 1 - i, n - 1 - j)];
                dxx[(i, j)] = dxx[(n - 1 - i, n - 1 - j)];
            }
        }
    }
    Ok(DiffMatrices { dx, dxx, extension })
}

/// Scaled first and second derivatives of nodal samples.
pub fn differentiate(dm: &DiffMatrices, samples: &[f64], scale: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = dm.n();
    if samples.len() != n {
        return Err(Error::ShapeMismatch { expected: vec![n], found: vec![samples.len()] });
    }
    if !(scale > 0.0) {
        return Err(Error::param(format!("scale must be positive, got {scale}")));
    }
    let mut ux = vec![0.0; n];
    let mut uxx = vec![0.0; n];
    for i in 0..n {
        let mut a = 0.0;
        let mut b = 0.0;
        for j in 0..n {
            a += dm.dx[(i, j)] * samples[j];
            b += dm.dxx[(i, j)] * samples[j];
        }
        ux[i] = a / scale;
        uxx[i] = b / (scale * scale);
    }
    Ok((ux, uxx))
}
