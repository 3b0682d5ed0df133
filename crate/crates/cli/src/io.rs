use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use fraclap::tensor::tuple_iter;
use fraclap::NdArray;
use serde::{Deserialize, Serialize};

/// 17 significant digits, enough to round-trip any double.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    shape: Vec<usize>,
}

/// Shape sidecar that accompanies `path`: `field.csv` pairs with `field.shape.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("shape.json")
}

/// Writes `i1,...,in,value` rows in tuple order plus the shape sidecar.
/// Returns both paths.
pub fn write_ndarray(path: &Path, a: &NdArray) -> std::io::Result<Vec<PathBuf>> {
    let n = a.ndim();
    let mut out = String::new();
    for d in 1..=n {
        let _ = write!(out, "i{d},");
    }
    out.push_str("value\n");
    for (idx, flat) in tuple_iter(a.shape()) {
        for i in idx {
            let _ = write!(out, "{i},");
        }
        out.push_str(&fmt_f64(a.data()[flat - 1]));
        out.push('\n');
    }
    fs::write(path, out)?;
    let side = sidecar_path(path);
    fs::write(&side, serde_json::to_string(&Sidecar { shape: a.shape().to_vec() })? + "\n")?;
    Ok(vec![path.to_path_buf(), side])
}

pub fn read_ndarray(path: &Path) -> Result<NdArray, String> {
    let side = sidecar_path(path);
    let meta: Sidecar = serde_json::from_str(
        &fs::read_to_string(&side).map_err(|e| format!("reading {}: {e}", side.display()))?,
    )
    .map_err(|e| format!("parsing {}: {e}", side.display()))?;
    let mut a = NdArray::zeros(meta.shape.clone()).map_err(|e| e.to_string())?;
    let text = fs::read_to_string(path).map_err(|e| format!("reading {}: {e}", path.display()))?;
    let n = meta.shape.len();
    let mut seen = 0usize;
    for (lineno, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != n + 1 {
            return Err(format!("{}:{}: expected {} columns", path.display(), lineno + 1, n + 1));
        }
        let mut idx = Vec::with_capacity(n);
        for (d, c) in cols[..n].iter().enumerate() {
            let i: usize = c.trim().parse().map_err(|_| format!("{}:{}: bad index", path.display(), lineno + 1))?;
            if i == 0 || i > meta.shape[d] {
                return Err(format!("{}:{}: index out of range", path.display(), lineno + 1));
            }
            idx.push(i - 1);
        }
        let v: f64 = cols[n].trim().parse().map_err(|_| format!("{}:{}: bad value", path.display(), lineno + 1))?;
        let off = a.offset(&idx);
        a.data_mut()[off] = v;
        seen += 1;
    }
    if seen != a.len() {
        return Err(format!("{}: {} rows for {} entries", path.display(), seen, a.len()));
    }
    Ok(a)
}

/// Writes a CSV with a header and equally long columns.
pub fn write_columns(path: &Path, header: &[&str], cols: &[&[f64]]) -> std::io::Result<()> {
    let mut out = header.join(",");
    out.push('\n');
    let rows = cols.first().map_or(0, |c| c.len());
    for r in 0..rows {
        let line: Vec<String> = cols.iter().map(|c| fmt_f64(c[r])).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    fs::write(path, out)
}
