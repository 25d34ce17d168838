//! Phase-space representation of Gaussian states.
//!
//! Quadratures are ordered `(q₁…qₙ, p₁…pₙ)` and the vacuum covariance is the identity, so a
//! covariance matrix `γ` is physical iff the Hermitian matrix `γ + iΣ` is positive semidefinite.
//! Modes are indexed from zero.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, serde_matrix};

/// Absolute tolerance on the smallest eigenvalue in physicality and CP checks.
pub const PSD_TOLERANCE: f64 = 1e-9;

/// The antisymmetric form `Σ_ij = δ_{i+n,j} − δ_{i,j+n}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymplecticForm {
    n: usize,
    matrix: DMatrix<f64>,
}

impl SymplecticForm {
    pub fn new(n: usize) -> Self {
        let mut matrix = DMatrix::zeros(2 * n, 2 * n);
        for i in 0..n {
            matrix[(i, i + n)] = 1.0;
            matrix[(i + n, i)] = -1.0;
        }
        SymplecticForm { n, matrix }
    }

    pub fn modes(&self) -> usize {
        self.n
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.matrix
    }
}

/// Result of a positive-semidefiniteness check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PsdReport {
    pub min_eigenvalue: f64,
    pub passes: bool,
}

impl PsdReport {
    pub(crate) fn from_min(min_eigenvalue: f64, tol: f64) -> Self {
        PsdReport {
            min_eigenvalue,
            passes: min_eigenvalue >= -tol,
        }
    }
}

/// A Gaussian state given by its means `ξ`, covariance `γ` and accumulated post-selection
/// log-weight.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianState {
    pub(crate) xi: DVector<f64>,
    pub(crate) gamma: DMatrix<f64>,
    pub(crate) log_weight: f64,
}

fn check_mode(n: usize, mode: usize) -> Result<()> {
    if mode >= n {
        return Err(Error::invalid(format!("mode {mode} out of range for {n} modes")));
    }
    Ok(())
}

impl GaussianState {
    pub fn vacuum(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("a state needs at least one mode"));
        }
        Ok(GaussianState {
            xi: DVector::zeros(2 * n),
            gamma: DMatrix::identity(2 * n, 2 * n),
            log_weight: 0.0,
        })
    }

    pub fn coherent(n: usize, mode: usize, q0: f64, p0: f64) -> Result<Self> {
        let mut s = Self::vacuum(n)?;
        check_mode(n, mode)?;
        s.xi[mode] = q0;
        s.xi[mode + n] = p0;
        Ok(s)
    }

    /// Vacuum squeezed in `q` by `e^{-r}` on one mode.
    pub fn squeezed_vacuum(n: usize, mode: usize, r: f64) -> Result<Self> {
        let mut s = Self::vacuum(n)?;
        check_mode(n, mode)?;
        s.gamma[(mode, mode)] = (-2.0 * r).exp();
        s.gamma[(mode + n, mode + n)] = (2.0 * r).exp();
        Ok(s)
    }

    /// Two-mode squeezed vacuum: q–q correlations `+sinh 2r`, p–p correlations `−sinh 2r`.
    pub fn two_mode_squeezed_vacuum(r: f64) -> Self {
        let c = (2.0 * r).cosh();
        let s = (2.0 * r).sinh();
        let gamma = DMatrix::from_row_slice(
            4,
            4,
            &[
                c, s, 0.0, 0.0, //
                s, c, 0.0, 0.0, //
                0.0, 0.0, c, -s, //
                0.0, 0.0, -s, c,
            ],
        );
        GaussianState {
            xi: DVector::zeros(4),
            gamma,
            log_weight: 0.0,
        }
    }

    pub fn thermal(n: usize, mode: usize, nbar: f64) -> Result<Self> {
        if !(nbar >= 0.0) {
            return Err(Error::invalid(format!("mean photon number must be ≥ 0, got {nbar}")));
        }
        let mut s = Self::vacuum(n)?;
        check_mode(n, mode)?;
        let v = 2.0 * nbar + 1.0;
        s.gamma[(mode, mode)] = v;
        s.gamma[(mode + n, mode + n)] = v;
        Ok(s)
    }

    /// Builds a state from explicit moments. `γ` is symmetrized and must be physical.
    pub fn from_moments(xi: DVector<f64>, gamma: DMatrix<f64>) -> Result<Self> {
        let state = Self::from_moments_unchecked(xi, gamma)?;
        let report = state.check_physical();
        if !report.passes {
            return Err(Error::Unphysical {
                min_eigenvalue: report.min_eigenvalue,
            });
        }
        Ok(state)
    }

    /// Like [`GaussianState::from_moments`] but skips the physicality check, so the checker
    /// itself can be exercised on invalid covariances.
    pub fn from_moments_unchecked(xi: DVector<f64>, mut gamma: DMatrix<f64>) -> Result<Self> {
        let dim = xi.len();
        if dim == 0 || dim % 2 != 0 {
            return Err(Error::invalid(format!("mean vector length {dim} is not 2n with n ≥ 1")));
        }
        if gamma.shape() != (dim, dim) {
            return Err(Error::invalid(format!(
                "covariance shape {:?} does not match mean length {dim}",
                gamma.shape()
            )));
        }
        linalg::symmetrize(&mut gamma);
        Ok(GaussianState {
            xi,
            gamma,
            log_weight: 0.0,
        })
    }

    pub fn n(&self) -> usize {
        self.xi.len() / 2
    }

    pub fn xi(&self) -> &DVector<f64> {
        &self.xi
    }

    pub fn gamma(&self) -> &DMatrix<f64> {
        &self.gamma
    }

    pub fn log_weight(&self) -> f64 {
        self.log_weight
    }

    pub fn with_log_weight(mut self, log_weight: f64) -> Self {
        self.log_weight = log_weight;
        self
    }

    /// Number of scalars needed to describe the state: `(means, independent covariance entries)`.
    pub fn parameter_count(&self) -> (usize, usize) {
        let dim = self.gamma.nrows();
        (self.xi.len(), dim * (dim + 1) / 2)
    }

    /// Upper triangle of `γ`, row by row. Together with `ξ` this is the full description.
    pub fn packed_covariance(&self) -> Vec<f64> {
        let dim = self.gamma.nrows();
        let mut out = Vec::with_capacity(dim * (dim + 1) / 2);
        for i in 0..dim {
            for j in i..dim {
                out.push(self.gamma[(i, j)]);
            }
        }
        out
    }

    pub fn check_physical(&self) -> PsdReport {
        self.check_physical_with(PSD_TOLERANCE)
    }

    pub fn check_physical_with(&self, tol: f64) -> PsdReport {
        let sigma = SymplecticForm::new(self.n());
        PsdReport::from_min(linalg::min_eigenvalue_hermitian(&self.gamma, sigma.matrix()), tol)
    }

    /// Purity-style overlap `Tr(ρ_a ρ_b) = 2ⁿ / √det(γ_a+γ_b) · exp(−½ δᵀ(γ_a+γ_b)⁻¹δ)`.
    pub fn overlap(&self, other: &GaussianState) -> Result<f64> {
        if self.n() != other.n() {
            return Err(Error::invalid(format!(
                "overlap of {}-mode and {}-mode states",
                self.n(),
                other.n()
            )));
        }
        let sum = &self.gamma + &other.gamma;
        let delta = &self.xi - &other.xi;
        let chol = sum.cholesky().ok_or(Error::DegenerateMeasurement)?;
        let quad = delta.dot(&chol.solve(&delta));
        let log_det: f64 = chol.l().diagonal().iter().map(|v| 2.0 * v.ln()).sum();
        let n = self.n() as f64;
        Ok((n * 2f64.ln() - 0.5 * log_det - 0.5 * quad).exp())
    }

    /// Marginal state of the listed modes, in the listed order.
    pub fn reduce(&self, modes: &[usize]) -> Result<GaussianState> {
        let n = self.n();
        check_distinct(n, modes)?;
        if modes.is_empty() {
            return Err(Error::invalid("cannot reduce to zero modes"));
        }
        let idx = linalg::quadrature_indices(n, modes);
        Ok(GaussianState {
            xi: linalg::subvector(&self.xi, &idx),
            gamma: linalg::submatrix(&self.gamma, &idx, &idx),
            log_weight: self.log_weight,
        })
    }

    /// Tensor product `self ⊗ other`; the modes of `other` follow those of `self`.
    pub fn tensor(&self, other: &GaussianState) -> GaussianState {
        let (n1, n2) = (self.n(), other.n());
        let n = n1 + n2;
        let mut xi = DVector::zeros(2 * n);
        let mut gamma = DMatrix::zeros(2 * n, 2 * n);
        let map1: Vec<usize> = (0..n1).chain(n..n + n1).collect();
        let map2: Vec<usize> = (n1..n).chain(n + n1..2 * n).collect();
        for (src, map) in [(self, &map1), (other, &map2)] {
            for (i, &gi) in map.iter().enumerate() {
                xi[gi] = src.xi[i];
                for (j, &gj) in map.iter().enumerate() {
                    gamma[(gi, gj)] = src.gamma[(i, j)];
                }
            }
        }
        GaussianState {
            xi,
            gamma,
            log_weight: self.log_weight + other.log_weight,
        }
    }

    /// Reorders modes so that new mode `k` is old mode `order[k]`.
    pub fn permute(&self, order: &[usize]) -> Result<GaussianState> {
        if order.len() != self.n() {
            return Err(Error::invalid("permutation must list every mode"));
        }
        self.reduce(order)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(StateJson::from(self)).expect("state serializes")
    }
}

pub(crate) fn check_distinct(n: usize, modes: &[usize]) -> Result<()> {
    for (k, &m) in modes.iter().enumerate() {
        check_mode(n, m)?;
        if modes[..k].contains(&m) {
            return Err(Error::invalid(format!("mode {m} listed twice")));
        }
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct StateJson {
    n: usize,
    xi: Vec<f64>,
    #[serde(with = "serde_matrix")]
    gamma: DMatrix<f64>,
    log_weight: f64,
}

impl From<&GaussianState> for StateJson {
    fn from(s: &GaussianState) -> Self {
        StateJson {
            n: s.n(),
            xi: s.xi.iter().copied().collect(),
            gamma: s.gamma.clone(),
            log_weight: s.log_weight,
        }
    }
}

impl Serialize for GaussianState {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        StateJson::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for GaussianState {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw = StateJson::deserialize(d)?;
        if raw.xi.len() != 2 * raw.n {
            return Err(D::Error::custom(format!(
                "xi has length {} but n = {}",
                raw.xi.len(),
                raw.n
            )));
        }
        let state = GaussianState::from_moments(DVector::from_vec(raw.xi), raw.gamma)
            .map_err(D::Error::custom)?;
        Ok(state.with_log_weight(raw.log_weight))
    }
}
