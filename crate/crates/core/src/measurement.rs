//! Gaussian measurements: general-dyne conditioning, outcome sampling and the vacuum
//! ("no absorption") branch of threshold photodetection.
//!
//! Outcomes are phase-space points in the units of `ξ`. Projecting the measured block `B` onto
//! displaced copies of a pure Gaussian state with covariance `γ_M`, the outcome density is
//! `N(ξ_B, γ_B + γ_M)` and the remaining modes `A` collapse to
//!
//! ```text
//! γ' = γ_A − C (γ_B + γ_M)⁻¹ Cᵀ
//! ξ' = ξ_A + C (γ_B + γ_M)⁻¹ (m − ξ_B)
//! ```
//!
//! Measured modes are removed from the state.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::phase_space::{check_distinct, GaussianState, SymplecticForm, PSD_TOLERANCE};

/// Outcomes with log probability (density) below this are treated as impossible.
pub const LOG_UNDERFLOW: f64 = -700.0;

/// Smallest squeezing accepted for finite-squeezing homodyne.
pub const HOMODYNE_MIN_SQUEEZING: f64 = 5.0;
pub const HOMODYNE_DEFAULT_SQUEEZING: f64 = 15.0;

const LOG_4PI: f64 = 2.531_024_246_969_290_6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Quadrature {
    Q,
    P,
}

#[derive(Debug, Clone, PartialEq)]
pub enum MeasurementKind {
    /// Coherent-state projection, `γ_M = I`.
    Heterodyne,
    /// Projection onto a squeezed state, `γ_M = diag(e^{−2s}, e^{2s})` for `q`; approaches a
    /// quadrature eigenstate as `s → ∞`.
    Homodyne { quadrature: Quadrature, squeezing: f64 },
    /// Projection of two modes onto a displaced two-mode squeezed state.
    Epr { squeezing: f64 },
    /// Projection onto an arbitrary pure or mixed Gaussian with covariance `γ_M`.
    GeneralDyne { gamma_m: DMatrix<f64> },
    VacuumProjection,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSpec {
    modes: Vec<usize>,
    kind: MeasurementKind,
}

impl MeasurementSpec {
    pub fn heterodyne(modes: Vec<usize>) -> Result<Self> {
        Self::checked(modes, MeasurementKind::Heterodyne)
    }

    pub fn homodyne(mode: usize, quadrature: Quadrature, squeezing: f64) -> Result<Self> {
        if !(squeezing >= HOMODYNE_MIN_SQUEEZING) {
            return Err(Error::invalid(format!(
                "homodyne squeezing must be ≥ {HOMODYNE_MIN_SQUEEZING}, got {squeezing}"
            )));
        }
        Self::checked(vec![mode], MeasurementKind::Homodyne { quadrature, squeezing })
    }

    /// Homodyne at an arbitrary squeezing; `s = 0` is heterodyne. Used to study convergence.
    pub fn squeezed_projection(mode: usize, quadrature: Quadrature, squeezing: f64) -> Result<Self> {
        Self::checked(vec![mode], MeasurementKind::Homodyne { quadrature, squeezing })
    }

    pub fn epr(mode_i: usize, mode_j: usize, squeezing: f64) -> Result<Self> {
        Self::checked(vec![mode_i, mode_j], MeasurementKind::Epr { squeezing })
    }

    pub fn general_dyne(modes: Vec<usize>, gamma_m: DMatrix<f64>) -> Result<Self> {
        let m = modes.len();
        if gamma_m.shape() != (2 * m, 2 * m) {
            return Err(Error::invalid(format!("measurement covariance must be {0}x{0}", 2 * m)));
        }
        let mut g = gamma_m;
        if linalg::max_abs(&(&g - g.transpose())) > 1e-9 * (1.0 + linalg::max_abs(&g)) {
            return Err(Error::invalid("measurement covariance is not symmetric"));
        }
        linalg::symmetrize(&mut g);
        let sigma = SymplecticForm::new(m).into_matrix();
        let min = linalg::min_eigenvalue_hermitian(&g, &sigma);
        if min < -PSD_TOLERANCE {
            return Err(Error::invalid(format!(
                "measurement covariance violates the uncertainty relation (min eigenvalue {min:.3e})"
            )));
        }
        Self::checked(modes, MeasurementKind::GeneralDyne { gamma_m: g })
    }

    pub fn vacuum_projection(mode: usize) -> Result<Self> {
        Self::checked(vec![mode], MeasurementKind::VacuumProjection)
    }

    fn checked(modes: Vec<usize>, kind: MeasurementKind) -> Result<Self> {
        if modes.is_empty() {
            return Err(Error::invalid("a measurement needs at least one mode"));
        }
        for (k, m) in modes.iter().enumerate() {
            if modes[..k].contains(m) {
                return Err(Error::invalid(format!("mode {m} measured twice")));
            }
        }
        Ok(MeasurementSpec { modes, kind })
    }

    pub fn modes(&self) -> &[usize] {
        &self.modes
    }

    pub fn kind(&self) -> &MeasurementKind {
        &self.kind
    }

    pub fn kind_label(&self) -> &'static str {
        match self.kind {
            MeasurementKind::Heterodyne => "heterodyne",
            MeasurementKind::Homodyne { .. } => "homodyne",
            MeasurementKind::Epr { .. } => "eprdyne",
            MeasurementKind::GeneralDyne { .. } => "dyne",
            MeasurementKind::VacuumProjection => "vacuum_projection",
        }
    }

    /// Covariance `γ_M` of the projector family, in `(q…, p…)` order over the measured modes.
    pub fn measurement_covariance(&self) -> DMatrix<f64> {
        let m = self.modes.len();
        match &self.kind {
            MeasurementKind::Heterodyne | MeasurementKind::VacuumProjection => DMatrix::identity(2 * m, 2 * m),
            MeasurementKind::Homodyne { quadrature, squeezing } => {
                let (small, large) = ((-2.0 * squeezing).exp(), (2.0 * squeezing).exp());
                match quadrature {
                    Quadrature::Q => DMatrix::from_diagonal(&DVector::from_vec(vec![small, large])),
                    Quadrature::P => DMatrix::from_diagonal(&DVector::from_vec(vec![large, small])),
                }
            }
            MeasurementKind::Epr { squeezing } => GaussianState::two_mode_squeezed_vacuum(*squeezing).gamma,
            MeasurementKind::GeneralDyne { gamma_m } => gamma_m.clone(),
        }
    }

    /// Number of real values a caller supplies as the outcome.
    pub fn outcome_len(&self) -> usize {
        match self.kind {
            MeasurementKind::Homodyne { .. } => 1,
            MeasurementKind::VacuumProjection => 0,
            _ => 2 * self.modes.len(),
        }
    }
}

/// What a measurement produced.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementRecord {
    /// Measured phase-space point (length `2m`).
    pub outcome: Vec<f64>,
    /// Log probability density of `outcome` under the pre-measurement state; for the vacuum
    /// projection, the log probability of no absorption.
    pub log_density: f64,
    pub spec: MeasurementSpec,
}

impl Serialize for MeasurementRecord {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr<'a> {
            modes: &'a [usize],
            kind: &'a str,
            outcome: &'a [f64],
            log_density: f64,
        }
        Repr {
            modes: &self.spec.modes,
            kind: self.spec.kind_label(),
            outcome: &self.outcome,
            log_density: self.log_density,
        }
        .serialize(s)
    }
}

struct Partition {
    measured: Vec<usize>,
    kept: Vec<usize>,
}

impl Partition {
    fn new(state: &GaussianState, modes: &[usize]) -> Result<Self> {
        let n = state.n();
        check_distinct(n, modes)?;
        let kept_modes: Vec<usize> = (0..n).filter(|m| !modes.contains(m)).collect();
        Ok(Partition {
            measured: linalg::quadrature_indices(n, modes),
            kept: linalg::quadrature_indices(n, &kept_modes),
        })
    }
}

/// Schur-complement collapse. Returns the post-measurement state (log weight untouched) and the
/// factorized outcome covariance `γ_B + γ_M`.
fn collapse(
    state: &GaussianState,
    part: &Partition,
    gamma_m: &DMatrix<f64>,
    outcome: &DVector<f64>,
) -> Result<GaussianState> {
    let gb = linalg::submatrix(&state.gamma, &part.measured, &part.measured);
    let ga = linalg::submatrix(&state.gamma, &part.kept, &part.kept);
    let c = linalg::submatrix(&state.gamma, &part.kept, &part.measured);
    let xb = linalg::subvector(&state.xi, &part.measured);
    let xa = linalg::subvector(&state.xi, &part.kept);
    let chol = (gb + gamma_m).cholesky().ok_or(Error::DegenerateMeasurement)?;
    // K = C S⁻¹, computed as (S⁻¹ Cᵀ)ᵀ.
    let gain = chol.solve(&c.transpose()).transpose();
    let xi = xa + &gain * (outcome - xb);
    let mut gamma = ga - &gain * c.transpose();
    linalg::symmetrize(&mut gamma);
    Ok(GaussianState {
        xi,
        gamma,
        log_weight: state.log_weight,
    })
}

fn outcome_covariance(state: &GaussianState, part: &Partition, gamma_m: &DMatrix<f64>) -> DMatrix<f64> {
    linalg::submatrix(&state.gamma, &part.measured, &part.measured) + gamma_m
}

fn check_log(log_p: f64) -> Result<f64> {
    if !(log_p >= LOG_UNDERFLOW) {
        return Err(Error::ImpossibleOutcome { log_probability: log_p });
    }
    Ok(log_p)
}

/// Conditions `state` on a measurement outcome and removes the measured modes.
///
/// Homodyne takes the single measured quadrature value; the conjugate quadrature is pinned at its
/// prior mean and the recorded density is the marginal density of the measured quadrature.
/// Vacuum projections take an empty outcome.
pub fn condition(
    state: &GaussianState,
    spec: &MeasurementSpec,
    outcome: &[f64],
) -> Result<(GaussianState, MeasurementRecord)> {
    if outcome.len() != spec.outcome_len() {
        return Err(Error::invalid(format!(
            "{} measurement on {} modes expects {} outcome values, got {}",
            spec.kind_label(),
            spec.modes.len(),
            spec.outcome_len(),
            outcome.len()
        )));
    }
    if let MeasurementKind::VacuumProjection = spec.kind {
        return condition_no_absorption(state, spec.modes[0]);
    }
    let part = Partition::new(state, &spec.modes)?;
    let gamma_m = spec.measurement_covariance();
    let cov = outcome_covariance(state, &part, &gamma_m);
    let xb = linalg::subvector(&state.xi, &part.measured);

    let (full, log_density) = match spec.kind {
        MeasurementKind::Homodyne { quadrature, .. } => {
            let (hit, other) = match quadrature {
                Quadrature::Q => (0, 1),
                Quadrature::P => (1, 0),
            };
            let mut full = DVector::zeros(2);
            full[hit] = outcome[0];
            full[other] = xb[other];
            let var = cov[(hit, hit)];
            if !(var > 0.0) {
                return Err(Error::DegenerateMeasurement);
            }
            let d = outcome[0] - xb[hit];
            let ld = -0.5 * (d * d / var + var.ln() + (2.0 * std::f64::consts::PI).ln());
            (full, ld)
        }
        _ => {
            let full = DVector::from_column_slice(outcome);
            let ld = linalg::gaussian_log_density(&full, &xb, &cov)?;
            (full, ld)
        }
    };
    let log_density = check_log(log_density)?;
    let mut post = collapse(state, &part, &gamma_m, &full)?;
    post.log_weight += log_density;
    let record = MeasurementRecord {
        outcome: full.iter().copied().collect(),
        log_density,
        spec: spec.clone(),
    };
    Ok((post, record))
}

/// Draws an outcome from the measurement's distribution and conditions on it.
pub fn sample<R: Rng + ?Sized>(
    state: &GaussianState,
    spec: &MeasurementSpec,
    rng: &mut R,
) -> Result<(GaussianState, MeasurementRecord)> {
    let outcome = draw_outcome(state, spec, rng)?;
    condition(state, spec, &outcome)
}

/// Outcome drawn from `N(ξ_B, γ_B + γ_M)` (or its measured-quadrature marginal for homodyne),
/// in the format [`condition`] accepts.
pub fn draw_outcome<R: Rng + ?Sized>(state: &GaussianState, spec: &MeasurementSpec, rng: &mut R) -> Result<Vec<f64>> {
    let part = Partition::new(state, &spec.modes)?;
    let gamma_m = spec.measurement_covariance();
    let cov = outcome_covariance(state, &part, &gamma_m);
    let xb = linalg::subvector(&state.xi, &part.measured);
    match spec.kind {
        MeasurementKind::VacuumProjection => Ok(Vec::new()),
        MeasurementKind::Homodyne { quadrature, .. } => {
            let hit = match quadrature {
                Quadrature::Q => 0,
                Quadrature::P => 1,
            };
            let z: f64 = rng.sample(StandardNormal);
            Ok(vec![xb[hit] + cov[(hit, hit)].sqrt() * z])
        }
        _ => {
            let chol = cov.cholesky().ok_or(Error::DegenerateMeasurement)?;
            let z = DVector::from_fn(xb.len(), |_, _| rng.sample::<f64, _>(StandardNormal));
            Ok((xb + chol.l() * z).iter().copied().collect())
        }
    }
}

/// Finite-squeezing homodyne with a fixed outcome.
pub fn homodyne(
    state: &GaussianState,
    mode: usize,
    quadrature: Quadrature,
    outcome: f64,
    squeezing: f64,
) -> Result<(GaussianState, MeasurementRecord)> {
    condition(state, &MeasurementSpec::homodyne(mode, quadrature, squeezing)?, &[outcome])
}

pub fn homodyne_sampled<R: Rng + ?Sized>(
    state: &GaussianState,
    mode: usize,
    quadrature: Quadrature,
    squeezing: f64,
    rng: &mut R,
) -> Result<(GaussianState, MeasurementRecord)> {
    sample(state, &MeasurementSpec::homodyne(mode, quadrature, squeezing)?, rng)
}

/// `Tr(ρ |0⟩⟨0|)` on one mode: the reduced state's overlap with vacuum.
pub fn vacuum_probability(state: &GaussianState, mode: usize) -> Result<f64> {
    Ok(log_vacuum_probability(state, mode)?.exp())
}

fn log_vacuum_probability(state: &GaussianState, mode: usize) -> Result<f64> {
    let part = Partition::new(state, &[mode])?;
    let cov = outcome_covariance(state, &part, &DMatrix::identity(2, 2));
    let xb = linalg::subvector(&state.xi, &part.measured);
    Ok(linalg::gaussian_log_density(&DVector::zeros(2), &xb, &cov)? + LOG_4PI)
}

/// Post-selects the "no absorption" outcome of a threshold detector on `mode`.
pub fn condition_no_absorption(state: &GaussianState, mode: usize) -> Result<(GaussianState, MeasurementRecord)> {
    let log_p = check_log(log_vacuum_probability(state, mode)?)?;
    let part = Partition::new(state, &[mode])?;
    let mut post = collapse(state, &part, &DMatrix::identity(2, 2), &DVector::zeros(2))?;
    post.log_weight += log_p;
    let record = MeasurementRecord {
        outcome: vec![0.0, 0.0],
        log_density: log_p,
        spec: MeasurementSpec::vacuum_projection(mode)?,
    };
    Ok((post, record))
}

/// Conditioning on absorption is not a Gaussian CP map, so it always fails. The error carries
/// the probability `1 − P(0)` of the branch that was refused.
pub fn condition_absorption(state: &GaussianState, mode: usize) -> Error {
    match vacuum_probability(state, mode) {
        Ok(p0) => Error::NonGaussianOutcome {
            mode,
            absorption_probability: (1.0 - p0).max(0.0),
        },
        Err(e) => e,
    }
}

/// Samples a threshold detector. "No absorption" conditions the state; "absorption" returns the
/// non-Gaussian-outcome error.
pub fn sample_photodetection<R: Rng + ?Sized>(
    state: &GaussianState,
    mode: usize,
    rng: &mut R,
) -> Result<(GaussianState, MeasurementRecord)> {
    let p0 = vacuum_probability(state, mode)?;
    let u: f64 = rng.random();
    if u < p0 {
        condition_no_absorption(state, mode)
    } else {
        Err(condition_absorption(state, mode))
    }
}

/// Appends `ancilla_count` vacuum modes, the first step of realizing a POVM as a projective
/// measurement on a larger system.
pub fn neumark_extend(state: &GaussianState, ancilla_count: usize) -> Result<GaussianState> {
    if ancilla_count == 0 {
        return Err(Error::invalid("need at least one ancilla mode"));
    }
    Ok(state.tensor(&GaussianState::vacuum(ancilla_count)?))
}

/// Seedable, splittable generator: stream `k` of `seed` is independent of every other stream.
pub fn rng_stream(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
