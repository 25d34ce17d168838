//! Small dense linear-algebra helpers shared by the engine modules.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Minimal eigenvalue of the Hermitian matrix `re + i·im`.
pub fn min_eigenvalue_hermitian(re: &DMatrix<f64>, im: &DMatrix<f64>) -> f64 {
    let dim = re.nrows();
    if dim == 0 {
        return 0.0;
    }
    let h = DMatrix::from_fn(dim, dim, |i, j| Complex64::new(re[(i, j)], im[(i, j)]));
    h.symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// Phase-space indices `(q..., p...)` of the listed modes inside an `n`-mode system.
pub fn quadrature_indices(n: usize, modes: &[usize]) -> Vec<usize> {
    modes
        .iter()
        .copied()
        .chain(modes.iter().map(|m| m + n))
        .collect()
}

pub fn submatrix(m: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

pub fn subvector(v: &DVector<f64>, idx: &[usize]) -> DVector<f64> {
    DVector::from_fn(idx.len(), |i, _| v[idx[i]])
}

/// Log density of `N(mean, cov)` at `x`. Fails if `cov` is not positive definite.
pub fn gaussian_log_density(x: &DVector<f64>, mean: &DVector<f64>, cov: &DMatrix<f64>) -> Result<f64> {
    let chol = cov.clone().cholesky().ok_or(Error::DegenerateMeasurement)?;
    let d = x - mean;
    let solved = chol.solve(&d);
    let quad = d.dot(&solved);
    let log_det: f64 = chol.l().diagonal().iter().map(|v| 2.0 * v.ln()).sum();
    let k = x.len() as f64;
    Ok(-0.5 * (quad + log_det + k * (2.0 * std::f64::consts::PI).ln()))
}

pub(crate) mod serde_matrix {
    use nalgebra::DMatrix;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
        m.row_iter().map(|r| r.iter().copied().collect()).collect()
    }

    pub fn from_rows(rows: &[Vec<f64>], ncols: usize) -> Option<DMatrix<f64>> {
        if rows.iter().any(|r| r.len() != ncols) {
            return None;
        }
        Some(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
    }

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
        to_rows(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        let ncols = rows.first().map_or(0, Vec::len);
        from_rows(&rows, ncols).ok_or_else(|| serde::de::Error::custom("ragged matrix rows"))
    }
}
