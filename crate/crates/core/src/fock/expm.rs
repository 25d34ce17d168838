//! Dense complex matrix exponential by scaling and squaring with a Taylor core.

use nalgebra::DMatrix;
use num_complex::Complex64;

fn one_norm(m: &DMatrix<Complex64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|v| v.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `exp(m)`. The matrix is scaled by `2^{-s}` until its 1-norm is at most 1/2, the exponential of
/// the scaled matrix is summed as a Taylor series to machine precision, and the result is
/// squared `s` times.
pub fn expm(m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    assert!(m.is_square(), "expm needs a square matrix");
    let dim = m.nrows();
    let norm = one_norm(m);
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as i32 } else { 0 };
    let scaled = m * Complex64::new(2f64.powi(-squarings), 0.0);

    let mut result = DMatrix::<Complex64>::identity(dim, dim);
    let mut term = DMatrix::<Complex64>::identity(dim, dim);
    for j in 1..=40 {
        term = &term * &scaled * Complex64::new(1.0 / j as f64, 0.0);
        result += &term;
        if one_norm(&term) <= f64::EPSILON * 0.25 * one_norm(&result) {
            break;
        }
    }
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn rotation_generator() {
        for t in [0.0, 0.1, 1.0, 7.5] {
            let k = DMatrix::from_row_slice(2, 2, &[c(0.0), c(-t), c(t), c(0.0)]);
            let u = expm(&k);
            let want = DMatrix::from_row_slice(2, 2, &[c(t.cos()), c(-t.sin()), c(t.sin()), c(t.cos())]);
            assert!((u - want).iter().all(|v| v.norm() < 1e-13), "t = {t}");
        }
    }

    #[test]
    fn diagonal_and_nilpotent() {
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(1.5), Complex64::new(0.0, 2.0)]));
        let u = expm(&d);
        assert!((u[(0, 0)] - c(1.5f64.exp())).norm() < 1e-13);
        assert!((u[(1, 1)] - Complex64::from_polar(1.0, 2.0)).norm() < 1e-14);
        let n = DMatrix::from_row_slice(2, 2, &[c(0.0), c(3.0), c(0.0), c(0.0)]);
        let u = expm(&n);
        assert!((u[(0, 1)] - c(3.0)).norm() < 1e-14);
        assert!((u[(0, 0)] - c(1.0)).norm() < 1e-14);
    }

    #[test]
    fn anti_hermitian_gives_unitary() {
        let dim = 6;
        let mut k = DMatrix::<Complex64>::zeros(dim, dim);
        for i in 0..dim {
            for j in 0..i {
                let v = Complex64::new((i * 7 + j) as f64 * 0.13 - 1.0, (i + 3 * j) as f64 * 0.21 - 0.5);
                k[(i, j)] = v;
                k[(j, i)] = -v.conj();
            }
            k[(i, i)] = Complex64::new(0.0, i as f64 * 0.4);
        }
        let u = expm(&k);
        let uu = u.adjoint() * &u;
        let id = DMatrix::<Complex64>::identity(dim, dim);
        assert!((uu - id).iter().all(|v| v.norm() < 1e-12));
    }
}
