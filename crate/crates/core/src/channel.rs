//! Gaussian completely positive maps `T(α, A, G)`.
//!
//! A channel acts on the canonical operators as `ẑ'_i = Σ_k ẑ_k a_{ki} + α_i + η̂_i`, so the
//! columns of `A` index output quadratures. On moments this gives `ξ' = Aᵀξ + α` and
//! `γ' = AᵀγA + G`. The reservoir behind the noise operators `η̂` is never materialized; only its
//! second moments, collected in `G`, are needed.

use std::f64::consts::FRAC_PI_4;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, serde_matrix};
use crate::phase_space::{check_distinct, GaussianState, PsdReport, SymplecticForm, PSD_TOLERANCE};

/// A Clifford-semigroup element mapping `n_in` modes to `n_out` modes.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianChannel {
    n_in: usize,
    n_out: usize,
    alpha: DVector<f64>,
    a: DMatrix<f64>,
    g: DMatrix<f64>,
}

impl GaussianChannel {
    /// Builds a channel from raw parts. Shapes and the symmetry of `G` are checked; the CP
    /// condition is not, so invalid channels can be constructed and inspected with
    /// [`GaussianChannel::validate_cp`].
    pub fn new(
        n_in: usize,
        n_out: usize,
        alpha: DVector<f64>,
        a: DMatrix<f64>,
        mut g: DMatrix<f64>,
    ) -> Result<Self> {
        if n_in == 0 || n_out == 0 {
            return Err(Error::invalid("channels need at least one input and output mode"));
        }
        if alpha.len() != 2 * n_out {
            return Err(Error::invalid(format!("alpha must have length {}", 2 * n_out)));
        }
        if a.shape() != (2 * n_in, 2 * n_out) {
            return Err(Error::invalid(format!(
                "A must be {}x{}, got {:?}",
                2 * n_in,
                2 * n_out,
                a.shape()
            )));
        }
        if g.shape() != (2 * n_out, 2 * n_out) {
            return Err(Error::invalid(format!("G must be {0}x{0}", 2 * n_out)));
        }
        let asym = linalg::max_abs(&(&g - g.transpose()));
        if asym > 1e-9 * (1.0 + linalg::max_abs(&g)) {
            return Err(Error::invalid(format!("G is not symmetric (asymmetry {asym:.3e})")));
        }
        linalg::symmetrize(&mut g);
        Ok(GaussianChannel {
            n_in,
            n_out,
            alpha,
            a,
            g,
        })
    }

    pub fn identity(n: usize) -> Result<Self> {
        Self::new(
            n,
            n,
            DVector::zeros(2 * n),
            DMatrix::identity(2 * n, 2 * n),
            DMatrix::zeros(2 * n, 2 * n),
        )
    }

    /// Unitary channel from a symplectic `S` with `ẑ' = S ẑ` (so `A = Sᵀ`).
    pub fn from_symplectic(s: DMatrix<f64>) -> Result<Self> {
        if !s.is_square() || s.nrows() % 2 != 0 {
            return Err(Error::invalid("symplectic matrix must be square with even size"));
        }
        let n = s.nrows() / 2;
        Self::new(
            n,
            n,
            DVector::zeros(2 * n),
            s.transpose(),
            DMatrix::zeros(2 * n, 2 * n),
        )
    }

    pub fn n_in(&self) -> usize {
        self.n_in
    }

    pub fn n_out(&self) -> usize {
        self.n_out
    }

    pub fn alpha(&self) -> &DVector<f64> {
        &self.alpha
    }

    pub fn a_matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn g_matrix(&self) -> &DMatrix<f64> {
        &self.g
    }

    /// Smallest eigenvalue of `G + iΣ_out − iAᵀΣ_in A`.
    pub fn validate_cp(&self) -> PsdReport {
        self.validate_cp_with(PSD_TOLERANCE)
    }

    pub fn validate_cp_with(&self, tol: f64) -> PsdReport {
        let s_in = SymplecticForm::new(self.n_in).into_matrix();
        let s_out = SymplecticForm::new(self.n_out).into_matrix();
        let im = s_out - self.a.transpose() * s_in * &self.a;
        PsdReport::from_min(linalg::min_eigenvalue_hermitian(&self.g, &im), tol)
    }

    pub fn is_symplectic(&self) -> bool {
        self.n_in == self.n_out && is_symplectic(&self.a).unwrap_or(false)
    }

    /// Applies the channel to a state (moment update). Rejects non-CP channels.
    pub fn apply(&self, state: &GaussianState) -> Result<GaussianState> {
        self.apply_with(state, PSD_TOLERANCE)
    }

    pub fn apply_with(&self, state: &GaussianState, tol: f64) -> Result<GaussianState> {
        if state.n() != self.n_in {
            return Err(Error::invalid(format!(
                "channel expects {} modes, state has {}",
                self.n_in,
                state.n()
            )));
        }
        let rep = self.validate_cp_with(tol);
        if !rep.passes {
            return Err(Error::RejectedChannel {
                min_eigenvalue: rep.min_eigenvalue,
            });
        }
        Ok(self.apply_unchecked(state))
    }

    pub(crate) fn apply_unchecked(&self, state: &GaussianState) -> GaussianState {
        let at = self.a.transpose();
        let xi = &at * &state.xi + &self.alpha;
        let mut gamma = &at * &state.gamma * &self.a + &self.g;
        linalg::symmetrize(&mut gamma);
        GaussianState {
            xi,
            gamma,
            log_weight: state.log_weight,
        }
    }

    /// `second ∘ first`: applying the result equals applying `first` then `second`.
    pub fn compose(second: &GaussianChannel, first: &GaussianChannel) -> Result<GaussianChannel> {
        if first.n_out != second.n_in {
            return Err(Error::invalid(format!(
                "cannot compose: first outputs {} modes, second takes {}",
                first.n_out, second.n_in
            )));
        }
        let a2t = second.a.transpose();
        let a = &first.a * &second.a;
        let alpha = &a2t * &first.alpha + &second.alpha;
        let mut g = &a2t * &first.g * &second.a + &second.g;
        linalg::symmetrize(&mut g);
        Ok(GaussianChannel {
            n_in: first.n_in,
            n_out: second.n_out,
            alpha,
            a,
            g,
        })
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("channel serializes")
    }
}

/// `‖AᵀΣA − Σ‖_max ≤ tol` for a square `A`.
pub fn is_symplectic(a: &DMatrix<f64>) -> Result<bool> {
    if !a.is_square() || a.nrows() % 2 != 0 {
        return Err(Error::invalid(format!(
            "symplectic test needs a square even-sized matrix, got {:?}",
            a.shape()
        )));
    }
    let sigma = SymplecticForm::new(a.nrows() / 2).into_matrix();
    let diff = a.transpose() * &sigma * a - sigma;
    Ok(linalg::max_abs(&diff) <= PSD_TOLERANCE)
}

#[derive(Serialize, Deserialize)]
struct ChannelJson {
    n_in: usize,
    n_out: usize,
    alpha: Vec<f64>,
    #[serde(rename = "A", with = "serde_matrix")]
    a: DMatrix<f64>,
    #[serde(rename = "G", with = "serde_matrix")]
    g: DMatrix<f64>,
}

impl Serialize for GaussianChannel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ChannelJson {
            n_in: self.n_in,
            n_out: self.n_out,
            alpha: self.alpha.iter().copied().collect(),
            a: self.a.clone(),
            g: self.g.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for GaussianChannel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw = ChannelJson::deserialize(d)?;
        // An empty `[]` deserializes as 0x0; report it as a shape problem below.
        GaussianChannel::new(raw.n_in, raw.n_out, DVector::from_vec(raw.alpha), raw.a, raw.g)
            .map_err(D::Error::custom)
    }
}

/// Real symplectic matrix `S` (with `ẑ' = S ẑ`) of the Bogoliubov map
/// `â'_k = Σ_l μ_kl â_l + ν_kl â_l†`, using `â = (q̂ + i p̂)/2`.
pub fn symplectic_from_bogoliubov(mu: &DMatrix<Complex64>, nu: &DMatrix<Complex64>) -> DMatrix<f64> {
    let k = mu.nrows();
    let mut s = DMatrix::zeros(2 * k, 2 * k);
    for r in 0..k {
        for c in 0..k {
            let plus = mu[(r, c)] + nu[(r, c)];
            let minus = mu[(r, c)] - nu[(r, c)];
            s[(r, c)] = plus.re;
            s[(r, c + k)] = -minus.im;
            s[(r + k, c)] = plus.im;
            s[(r + k, c + k)] = minus.re;
        }
    }
    s
}

/// A channel on a few modes of a larger system; identity elsewhere.
///
/// Applying it touches only the rows and columns of the acted-on modes, so a layer of local gates
/// costs `O(n²)` instead of the `O(n³)` of a dense product.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalChannel {
    modes: Vec<usize>,
    channel: GaussianChannel,
}

impl LocalChannel {
    pub fn new(modes: Vec<usize>, channel: GaussianChannel) -> Result<Self> {
        if channel.n_in != modes.len() || channel.n_out != modes.len() {
            return Err(Error::invalid(format!(
                "local channel on {} modes must map {0} → {0} modes",
                modes.len()
            )));
        }
        for (k, m) in modes.iter().enumerate() {
            if modes[..k].contains(m) {
                return Err(Error::invalid(format!("mode {m} listed twice")));
            }
        }
        Ok(LocalChannel { modes, channel })
    }

    pub fn modes(&self) -> &[usize] {
        &self.modes
    }

    pub fn block(&self) -> &GaussianChannel {
        &self.channel
    }

    /// The same map as a dense `n`-mode channel.
    pub fn to_dense(&self, n: usize) -> Result<GaussianChannel> {
        check_distinct(n, &self.modes)?;
        let k = self.modes.len();
        let idx = linalg::quadrature_indices(n, &self.modes);
        let mut a = DMatrix::identity(2 * n, 2 * n);
        let mut g = DMatrix::zeros(2 * n, 2 * n);
        let mut alpha = DVector::zeros(2 * n);
        for i in 0..2 * k {
            alpha[idx[i]] = self.channel.alpha[i];
            for j in 0..2 * k {
                a[(idx[i], idx[j])] = self.channel.a[(i, j)];
                g[(idx[i], idx[j])] = self.channel.g[(i, j)];
            }
        }
        GaussianChannel::new(n, n, alpha, a, g)
    }

    pub fn validate_cp(&self) -> PsdReport {
        self.channel.validate_cp()
    }

    pub fn apply(&self, state: &GaussianState) -> Result<GaussianState> {
        self.apply_with(state, PSD_TOLERANCE)
    }

    pub fn apply_with(&self, state: &GaussianState, tol: f64) -> Result<GaussianState> {
        let mut out = state.clone();
        self.apply_in_place_with(&mut out, tol)?;
        Ok(out)
    }

    /// Updates `state` without copying it; on error the state is left untouched.
    pub fn apply_in_place_with(&self, state: &mut GaussianState, tol: f64) -> Result<()> {
        let n = state.n();
        check_distinct(n, &self.modes)?;
        let rep = self.channel.validate_cp_with(tol);
        if !rep.passes {
            return Err(Error::RejectedChannel {
                min_eigenvalue: rep.min_eigenvalue,
            });
        }
        let idx = linalg::quadrature_indices(n, &self.modes);
        let a = &self.channel.a;
        let kk = idx.len();
        let dim = 2 * n;

        let old: Vec<f64> = idx.iter().map(|&k| state.xi[k]).collect();
        for i in 0..kk {
            state.xi[idx[i]] = (0..kk).map(|k| a[(k, i)] * old[k]).sum::<f64>() + self.channel.alpha[i];
        }

        let gamma = &mut state.gamma;
        // Rows: γ[idx, :] ← Aᵀ γ[idx, :]
        let mut rows = DMatrix::zeros(kk, dim);
        for c in 0..dim {
            for i in 0..kk {
                rows[(i, c)] = (0..kk).map(|k| a[(k, i)] * gamma[(idx[k], c)]).sum();
            }
        }
        for c in 0..dim {
            for i in 0..kk {
                gamma[(idx[i], c)] = rows[(i, c)];
            }
        }
        // Columns: γ[:, idx] ← γ[:, idx] A, using the row-updated matrix.
        let mut cols = DMatrix::zeros(dim, kk);
        for j in 0..kk {
            for r in 0..dim {
                cols[(r, j)] = (0..kk).map(|k| gamma[(r, idx[k])] * a[(k, j)]).sum();
            }
        }
        for j in 0..kk {
            for r in 0..dim {
                gamma[(r, idx[j])] = cols[(r, j)];
            }
        }
        for i in 0..kk {
            for j in 0..kk {
                gamma[(idx[i], idx[j])] += self.channel.g[(i, j)];
            }
        }
        for &i in &idx {
            for c in 0..dim {
                let v = 0.5 * (gamma[(i, c)] + gamma[(c, i)]);
                gamma[(i, c)] = v;
                gamma[(c, i)] = v;
            }
        }
        Ok(())
    }
}

/// Single- and two-mode building blocks, each a channel on exactly the modes it touches.
pub mod blocks {
    use super::*;

    fn unitary(s: DMatrix<f64>) -> GaussianChannel {
        GaussianChannel::from_symplectic(s).expect("block symplectic is well-formed")
    }

    pub fn displacement(q: f64, p: f64) -> GaussianChannel {
        GaussianChannel::new(
            1,
            1,
            DVector::from_vec(vec![q, p]),
            DMatrix::identity(2, 2),
            DMatrix::zeros(2, 2),
        )
        .expect("well-formed")
    }

    /// `exp(iθ n̂)`: counter-clockwise rotation of phase space by `θ`.
    pub fn phase_rotation(theta: f64) -> GaussianChannel {
        let mu = DMatrix::from_element(1, 1, Complex64::from_polar(1.0, theta));
        unitary(symplectic_from_bogoliubov(&mu, &DMatrix::zeros(1, 1)))
    }

    /// `exp(θ(e^{iφ} â b̂† − e^{−iφ} â† b̂))`; `θ = π/4` is balanced, `θ = π/2` swaps the modes.
    pub fn beamsplitter(theta: f64, phi: f64) -> GaussianChannel {
        let (s, c) = theta.sin_cos();
        let e = Complex64::from_polar(1.0, phi);
        let mu = DMatrix::from_row_slice(
            2,
            2,
            &[Complex64::new(c, 0.0), -e.conj() * s, e * s, Complex64::new(c, 0.0)],
        );
        unitary(symplectic_from_bogoliubov(&mu, &DMatrix::zeros(2, 2)))
    }

    /// `exp(r/2 (e^{−iφ} â² − e^{iφ} â†²))`; at `φ = 0` it squeezes `q` by `e^{−r}`.
    pub fn squeezer(r: f64, phi: f64) -> GaussianChannel {
        let mu = DMatrix::from_element(1, 1, Complex64::new(r.cosh(), 0.0));
        let nu = DMatrix::from_element(1, 1, -Complex64::from_polar(r.sinh(), phi));
        unitary(symplectic_from_bogoliubov(&mu, &nu))
    }

    /// `exp(r(â†b̂† − â b̂))`, the parametric down-conversion map.
    pub fn two_mode_squeezer(r: f64) -> GaussianChannel {
        let (ch, sh) = (Complex64::new(r.cosh(), 0.0), Complex64::new(r.sinh(), 0.0));
        let z = Complex64::new(0.0, 0.0);
        let mu = DMatrix::from_row_slice(2, 2, &[ch, z, z, ch]);
        let nu = DMatrix::from_row_slice(2, 2, &[z, sh, sh, z]);
        unitary(symplectic_from_bogoliubov(&mu, &nu))
    }

    pub fn loss(eta: f64) -> Result<GaussianChannel> {
        if !(0.0..=1.0).contains(&eta) {
            return Err(Error::invalid(format!("transmissivity must lie in [0, 1], got {eta}")));
        }
        Ok(loss_unchecked(eta))
    }

    /// `A = √η I`, `G = (1 − η) I` with no range check on `η`.
    pub fn loss_unchecked(eta: f64) -> GaussianChannel {
        GaussianChannel::new(
            1,
            1,
            DVector::zeros(2),
            DMatrix::identity(2, 2) * eta.max(0.0).sqrt(),
            DMatrix::identity(2, 2) * (1.0 - eta),
        )
        .expect("well-formed")
    }

    /// Quantum-limited phase-insensitive amplifier: `A = √g I`, `G = (g − 1) I`.
    pub fn amplifier(gain: f64) -> Result<GaussianChannel> {
        if !(gain >= 1.0) {
            return Err(Error::invalid(format!("gain must be ≥ 1, got {gain}")));
        }
        GaussianChannel::new(
            1,
            1,
            DVector::zeros(2),
            DMatrix::identity(2, 2) * gain.sqrt(),
            DMatrix::identity(2, 2) * (gain - 1.0),
        )
    }

    /// Random displacement noise with covariance `g_block` (must be PSD).
    pub fn classical_noise(g_block: DMatrix<f64>) -> Result<GaussianChannel> {
        if g_block.shape() != (2, 2) {
            return Err(Error::invalid("noise block must be 2x2"));
        }
        let ch = GaussianChannel::new(1, 1, DVector::zeros(2), DMatrix::identity(2, 2), g_block)?;
        let min = ch.g.symmetric_eigenvalues().min();
        if min < -PSD_TOLERANCE {
            return Err(Error::invalid(format!("noise covariance is not PSD (min eigenvalue {min:.3e})")));
        }
        Ok(ch)
    }
}

/// A named physical channel on specific modes of a larger system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NamedChannel {
    Displacement { mode: usize, q: f64, p: f64 },
    Rotation { mode: usize, theta: f64 },
    Beamsplitter { mode_i: usize, mode_j: usize, theta: f64, phi: f64 },
    Squeezer { mode: usize, r: f64, phi: f64 },
    TwoModeSqueezer { mode_i: usize, mode_j: usize, r: f64 },
    Loss { mode: usize, eta: f64 },
    Amplifier { mode: usize, gain: f64 },
    /// Additive Gaussian noise with covariance `[[qq, qp], [qp, pp]]`.
    ClassicalNoise { mode: usize, qq: f64, qp: f64, pp: f64 },
}

impl NamedChannel {
    pub fn modes(&self) -> Vec<usize> {
        use NamedChannel::*;
        match *self {
            Displacement { mode, .. }
            | Rotation { mode, .. }
            | Squeezer { mode, .. }
            | Loss { mode, .. }
            | Amplifier { mode, .. }
            | ClassicalNoise { mode, .. } => vec![mode],
            Beamsplitter { mode_i, mode_j, .. } | TwoModeSqueezer { mode_i, mode_j, .. } => vec![mode_i, mode_j],
        }
    }

    /// True for the channels that are unitary (`G = 0`).
    pub fn is_unitary(&self) -> bool {
        use NamedChannel::*;
        matches!(
            self,
            Displacement { .. } | Rotation { .. } | Beamsplitter { .. } | Squeezer { .. } | TwoModeSqueezer { .. }
        )
    }

    pub fn block(&self) -> Result<GaussianChannel> {
        use NamedChannel::*;
        Ok(match *self {
            Displacement { q, p, .. } => blocks::displacement(q, p),
            Rotation { theta, .. } => blocks::phase_rotation(theta),
            Beamsplitter { theta, phi, .. } => blocks::beamsplitter(theta, phi),
            Squeezer { r, phi, .. } => blocks::squeezer(r, phi),
            TwoModeSqueezer { r, .. } => blocks::two_mode_squeezer(r),
            Loss { eta, .. } => blocks::loss(eta)?,
            Amplifier { gain, .. } => blocks::amplifier(gain)?,
            ClassicalNoise { qq, qp, pp, .. } => {
                blocks::classical_noise(DMatrix::from_row_slice(2, 2, &[qq, qp, qp, pp]))?
            }
        })
    }

    pub fn local(&self) -> Result<LocalChannel> {
        LocalChannel::new(self.modes(), self.block()?)
    }

    pub fn dense(&self, n: usize) -> Result<GaussianChannel> {
        self.local()?.to_dense(n)
    }
}

fn local(n: usize, modes: Vec<usize>, block: GaussianChannel) -> Result<GaussianChannel> {
    LocalChannel::new(modes, block)?.to_dense(n)
}

pub fn displacement(n: usize, alpha: DVector<f64>) -> Result<GaussianChannel> {
    GaussianChannel::new(
        n,
        n,
        alpha,
        DMatrix::identity(2 * n, 2 * n),
        DMatrix::zeros(2 * n, 2 * n),
    )
}

pub fn phase_rotation(n: usize, mode: usize, theta: f64) -> Result<GaussianChannel> {
    local(n, vec![mode], blocks::phase_rotation(theta))
}

pub fn beamsplitter(n: usize, mode_i: usize, mode_j: usize, theta: f64, phi: f64) -> Result<GaussianChannel> {
    local(n, vec![mode_i, mode_j], blocks::beamsplitter(theta, phi))
}

pub fn squeezer(n: usize, mode: usize, r: f64, phi: f64) -> Result<GaussianChannel> {
    local(n, vec![mode], blocks::squeezer(r, phi))
}

pub fn two_mode_squeezer(n: usize, mode_i: usize, mode_j: usize, r: f64) -> Result<GaussianChannel> {
    local(n, vec![mode_i, mode_j], blocks::two_mode_squeezer(r))
}

pub fn loss(n: usize, mode: usize, eta: f64) -> Result<GaussianChannel> {
    local(n, vec![mode], blocks::loss(eta)?)
}

pub fn amplifier(n: usize, mode: usize, gain: f64) -> Result<GaussianChannel> {
    local(n, vec![mode], blocks::amplifier(gain)?)
}

pub fn classical_noise(n: usize, mode: usize, g_block: DMatrix<f64>) -> Result<GaussianChannel> {
    local(n, vec![mode], blocks::classical_noise(g_block)?)
}

/// Appends `extra` vacuum modes after the existing `n` modes.
pub fn append_vacuum(n: usize, extra: usize) -> Result<GaussianChannel> {
    let n_out = n + extra;
    let mut a = DMatrix::zeros(2 * n, 2 * n_out);
    for i in 0..n {
        a[(i, i)] = 1.0;
        a[(i + n, i + n_out)] = 1.0;
    }
    let mut g = DMatrix::zeros(2 * n_out, 2 * n_out);
    for i in n..n_out {
        g[(i, i)] = 1.0;
        g[(i + n_out, i + n_out)] = 1.0;
    }
    GaussianChannel::new(n, n_out, DVector::zeros(2 * n_out), a, g)
}

/// Optimal symmetric 1 → 2 cloner for coherent states: gain-2 quantum-limited amplification,
/// then a balanced beamsplitter against a fresh vacuum mode. Output mode 0 is the original
/// mode, output mode 1 the appended one.
pub fn cloner_1to2() -> GaussianChannel {
    let amp = blocks::amplifier(2.0).expect("gain 2 is valid");
    let extend = append_vacuum(1, 1).expect("valid");
    let bs = blocks::beamsplitter(FRAC_PI_4, 0.0);
    let first = GaussianChannel::compose(&extend, &amp).expect("dims match");
    GaussianChannel::compose(&bs, &first).expect("dims match")
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn close(a: &DMatrix<f64>, b: &DMatrix<f64>, tol: f64) -> bool {
        linalg::max_abs(&(a - b)) <= tol
    }

    #[test]
    fn identity_channel_is_marginal_cp() {
        let rep = GaussianChannel::identity(2).unwrap().validate_cp();
        assert!(rep.passes);
        assert!(rep.min_eigenvalue.abs() < 1e-14);
    }

    #[test]
    fn scaled_identity_fails_cp() {
        let ch = GaussianChannel::new(
            1,
            1,
            DVector::zeros(2),
            DMatrix::identity(2, 2) * 2.0,
            DMatrix::zeros(2, 2),
        )
        .unwrap();
        let rep = ch.validate_cp();
        assert!(!rep.passes);
        assert!((rep.min_eigenvalue + 3.0).abs() < 1e-12);
        assert!(!is_symplectic(ch.a_matrix()).unwrap());
    }

    #[test]
    fn amplifier_is_quantum_limited() {
        // The 2x2 block is (g−1)(I − iΣ) with eigenvalues 0 and 2(g−1).
        for gain in [1.0, 1.5, 2.0, 10.0] {
            let rep = amplifier(1, 0, gain).unwrap().validate_cp();
            assert!(rep.passes);
            assert!(rep.min_eigenvalue.abs() < 1e-12);
        }
        assert!(amplifier(1, 0, 0.5).is_err());
    }

    #[test]
    fn symplectic_checks() {
        assert!(is_symplectic(&DMatrix::identity(4, 4)).unwrap());
        for theta in [0.0, 0.3, FRAC_PI_4, 2.0] {
            assert!(beamsplitter(2, 0, 1, theta, 0.7).unwrap().is_symplectic());
            assert!(squeezer(1, 0, theta, 0.4).unwrap().is_symplectic());
            assert!(two_mode_squeezer(3, 2, 0, theta).unwrap().is_symplectic());
            assert!(phase_rotation(2, 1, theta).unwrap().is_symplectic());
        }
        assert!(!is_symplectic(&(DMatrix::identity(2, 2) * 2.0)).unwrap());
        assert!(is_symplectic(&DMatrix::identity(2, 3)).is_err());
    }

    #[test]
    fn named_constructor_identities() {
        let id = GaussianChannel::identity(2).unwrap();
        assert!(close(beamsplitter(2, 0, 1, 0.0, 0.3).unwrap().a_matrix(), id.a_matrix(), 1e-15));
        let sq = GaussianChannel::compose(&squeezer(1, 0, -0.7, 0.2).unwrap(), &squeezer(1, 0, 0.7, 0.2).unwrap()).unwrap();
        assert!(close(sq.a_matrix(), &DMatrix::identity(2, 2), 1e-12));
        assert!(close(loss(1, 0, 1.0).unwrap().a_matrix(), &DMatrix::identity(2, 2), 0.0));
        assert!(close(loss(1, 0, 1.0).unwrap().g_matrix(), &DMatrix::zeros(2, 2), 0.0));
    }

    #[test]
    fn beamsplitter_swaps_at_half_pi() {
        let s = GaussianState::coherent(2, 0, 1.0, 2.0).unwrap();
        let out = beamsplitter(2, 0, 1, FRAC_PI_2, 0.0).unwrap().apply(&s).unwrap();
        assert!((out.xi()[1] - 1.0).abs() < 1e-15);
        assert!((out.xi()[3] - 2.0).abs() < 1e-15);
        assert!(out.xi()[0].abs() < 1e-15);
    }

    #[test]
    fn rotation_turns_q_into_p() {
        let s = GaussianState::coherent(1, 0, 1.0, 0.0).unwrap();
        let out = phase_rotation(1, 0, FRAC_PI_2).unwrap().apply(&s).unwrap();
        assert!(out.xi()[0].abs() < 1e-15);
        assert!((out.xi()[1] - 1.0).abs() < 1e-15);
        let full = phase_rotation(1, 0, 2.0 * PI).unwrap();
        assert!(close(full.a_matrix(), &DMatrix::identity(2, 2), 1e-12));
    }

    #[test]
    fn displacement_on_vacuum() {
        let alpha = DVector::from_vec(vec![0.5, -1.5]);
        let out = displacement(1, alpha.clone()).unwrap().apply(&GaussianState::vacuum(1).unwrap()).unwrap();
        assert_eq!(out.xi(), &alpha);
        assert_eq!(out.gamma(), &DMatrix::identity(2, 2));
    }

    #[test]
    fn tmss_channel_matches_state_constructor() {
        let out = two_mode_squeezer(2, 0, 1, 0.3)
            .unwrap()
            .apply(&GaussianState::vacuum(2).unwrap())
            .unwrap();
        let direct = GaussianState::two_mode_squeezed_vacuum(0.3);
        assert!(close(out.gamma(), direct.gamma(), 1e-14));
    }

    #[test]
    fn squeezer_matches_state_constructor() {
        let out = squeezer(1, 0, 0.5, 0.0).unwrap().apply(&GaussianState::vacuum(1).unwrap()).unwrap();
        let direct = GaussianState::squeezed_vacuum(1, 0, 0.5).unwrap();
        assert!(close(out.gamma(), direct.gamma(), 1e-14));
    }

    #[test]
    fn loss_on_coherent() {
        let s = GaussianState::coherent(1, 0, 2.0, 0.0).unwrap();
        let out = loss(1, 0, 0.5).unwrap().apply(&s).unwrap();
        assert!((out.xi()[0] - 0.5f64.sqrt() * 2.0).abs() < 1e-15);
        assert!(close(out.gamma(), &DMatrix::identity(2, 2), 1e-15));
        let sq = GaussianState::two_mode_squeezed_vacuum(0.8);
        let out = loss(2, 1, 0.0).unwrap().apply(&sq).unwrap();
        assert_eq!(out.reduce(&[1]).unwrap(), GaussianState::vacuum(1).unwrap());
        assert!(loss(1, 0, 1.2).is_err());
    }

    #[test]
    fn loss_cp_sweep() {
        for k in 0..=20 {
            let eta = k as f64 / 20.0;
            assert!(blocks::loss_unchecked(eta).validate_cp().passes, "eta {eta}");
        }
        for eta in [1.01, 1.1, 1.5, 3.0] {
            let rep = blocks::loss_unchecked(eta).validate_cp();
            assert!(!rep.passes, "eta {eta}");
            // Block is (1−η)(I + iΣ): eigenvalues 0 and 2(1−η).
            assert!((rep.min_eigenvalue - 2.0 * (1.0 - eta)).abs() < 1e-12);
        }
    }

    #[test]
    fn loss_semigroup_closure() {
        let c = GaussianChannel::compose(&loss(1, 0, 0.3).unwrap(), &loss(1, 0, 0.6).unwrap()).unwrap();
        let d = loss(1, 0, 0.18).unwrap();
        assert!(close(c.a_matrix(), d.a_matrix(), 1e-12));
        assert!(close(c.g_matrix(), d.g_matrix(), 1e-12));
    }

    #[test]
    fn rejected_channel_cannot_be_applied() {
        let bad = blocks::loss_unchecked(1.5);
        assert!(matches!(
            bad.apply(&GaussianState::vacuum(1).unwrap()),
            Err(Error::RejectedChannel { .. })
        ));
        assert!(matches!(
            loss(2, 0, 0.5).unwrap().apply(&GaussianState::vacuum(1).unwrap()),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn cloner_adds_one_vacuum_unit() {
        let c = cloner_1to2();
        assert_eq!((c.n_in(), c.n_out()), (1, 2));
        assert!(c.validate_cp().passes);
        let input = GaussianState::coherent(1, 0, 1.2, -0.4).unwrap();
        let out = c.apply(&input).unwrap();
        for m in 0..2 {
            let clone = out.reduce(&[m]).unwrap();
            assert!(close(clone.gamma(), &(DMatrix::identity(2, 2) * 2.0), 1e-12));
            assert!((clone.xi() - input.xi()).amax() < 1e-12);
        }
        let vac = c.apply(&GaussianState::vacuum(1).unwrap()).unwrap();
        let (c0, c1) = (vac.reduce(&[0]).unwrap(), vac.reduce(&[1]).unwrap());
        assert!(close(c0.gamma(), c1.gamma(), 1e-14));
        assert_eq!(c0.xi(), c1.xi());
    }

    #[test]
    fn local_apply_matches_dense() {
        let state = GaussianState::two_mode_squeezed_vacuum(0.4)
            .tensor(&GaussianState::coherent(1, 0, 0.3, 0.9).unwrap());
        let block = GaussianChannel::compose(&blocks::loss(0.7).unwrap(), &blocks::squeezer(0.3, 1.1)).unwrap();
        let lc = LocalChannel::new(vec![1], block).unwrap();
        let fast = lc.apply(&state).unwrap();
        let slow = lc.to_dense(3).unwrap().apply(&state).unwrap();
        assert!((fast.xi() - slow.xi()).amax() < 1e-14);
        assert!(close(fast.gamma(), slow.gamma(), 1e-14));
        let lc = LocalChannel::new(vec![2, 0], blocks::beamsplitter(0.4, 0.2)).unwrap();
        let fast = lc.apply(&state).unwrap();
        let slow = lc.to_dense(3).unwrap().apply(&state).unwrap();
        assert!(close(fast.gamma(), slow.gamma(), 1e-14));
    }

    #[test]
    fn channel_json_shape() {
        let ch = loss(1, 0, 0.25).unwrap();
        let v = ch.to_json();
        assert_eq!(v["n_in"], 1);
        assert_eq!(v["A"][0][0], 0.5);
        let back: GaussianChannel = serde_json::from_value(v).unwrap();
        assert_eq!(back, ch);
        let bad = serde_json::json!({"n_in":1,"n_out":1,"alpha":[0,0],"A":[[1,0],[0,1]],"G":[[0,1],[0,0]]});
        assert!(serde_json::from_value::<GaussianChannel>(bad).is_err());
    }
}
