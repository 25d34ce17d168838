//! Random physical states and channels for property tests.
#![allow(dead_code)]

use cvsim::channel::GaussianChannel;
use cvsim::phase_space::{GaussianState, SymplecticForm};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

pub fn gaussian_matrix<R: Rng>(rng: &mut R, r: usize, c: usize, scale: f64) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| scale * rng.sample::<f64, _>(StandardNormal))
}

/// `exp(Σ H)` for a random symmetric `H`.
pub fn random_symplectic<R: Rng>(rng: &mut R, n: usize, scale: f64) -> DMatrix<f64> {
    let x = gaussian_matrix(rng, 2 * n, 2 * n, scale);
    let h = (&x + x.transpose()) * 0.5;
    (SymplecticForm::new(n).into_matrix() * h).exp()
}

/// `S D Sᵀ + ξ` with symplectic eigenvalues `ν ≥ 1`: physical by construction.
pub fn random_state<R: Rng>(rng: &mut R, n: usize) -> GaussianState {
    let s = random_symplectic(rng, n, 0.4);
    let nus: Vec<f64> = (0..n).map(|_| 1.0 + rng.random_range(0.0..1.5)).collect();
    let d = DMatrix::from_diagonal(&DVector::from_fn(2 * n, |i, _| nus[i % n]));
    let gamma = &s * d * s.transpose();
    let xi = DVector::from_fn(2 * n, |_, _| rng.random_range(-2.0..2.0));
    GaussianState::from_moments_unchecked(xi, gamma).expect("shapes")
}

/// Symmetric PSD square root.
pub fn psd_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let e = m.clone().symmetric_eigen();
    let d = DMatrix::from_diagonal(&e.eigenvalues.map(|v| v.max(0.0).sqrt()));
    &e.eigenvectors * d * e.eigenvectors.transpose()
}

/// A random CP channel. `G = |i(Σ_out − AᵀΣ_in A)| + R`, which satisfies the CP condition; with
/// `tight` the extra PSD term `R` is zero and the channel sits on the boundary of the CP cone.
pub fn random_cp_channel<R: Rng>(rng: &mut R, n_in: usize, n_out: usize, tight: bool) -> GaussianChannel {
    let a = gaussian_matrix(rng, 2 * n_in, 2 * n_out, 0.7 / ((2 * n_in) as f64).sqrt());
    let k = SymplecticForm::new(n_out).into_matrix() - a.transpose() * SymplecticForm::new(n_in).into_matrix() * &a;
    // i K is Hermitian with the same spectrum magnitudes as the real PSD matrix KᵀK.
    let mut g = psd_sqrt(&(k.transpose() * &k));
    if !tight {
        let x = gaussian_matrix(rng, 2 * n_out, 2 * n_out, 0.3);
        g += &x * x.transpose();
    }
    let g = (&g + g.transpose()) * 0.5;
    let alpha = DVector::from_fn(2 * n_out, |_, _| rng.random_range(-1.0..1.0));
    GaussianChannel::new(n_in, n_out, alpha, a, g).expect("shapes")
}
