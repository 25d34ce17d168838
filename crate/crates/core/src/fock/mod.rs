//! Brute-force simulator in the truncated photon-number basis (at most three modes).
//!
//! The oracle shares no code path with the covariance-matrix engine beyond the channel
//! descriptors: states are dense amplitude tensors or density matrices, unitaries are
//! exponentials of truncated quadratic generators, and noisy single-mode channels are Kraus maps
//! obtained from explicit dilations. It checks the engine on small systems and exhibits the
//! heralded non-Gaussian states the engine refuses to produce.
//!
//! Quadratures use the same vacuum-unit convention as the engine: `q̂ = â + â†`,
//! `p̂ = −i(â − â†)`.

mod expm;
mod ops;

pub use expm::expm;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::channel::NamedChannel;
use crate::error::{Error, Result};
use crate::phase_space::GaussianState;
use ops::{apply_blocks, apply_mode_matrix, c, sandwich, Generator, Layout, Term};

pub const MAX_MODES: usize = 3;
pub const MAX_CUTOFF: usize = 64;
/// Largest norm deficit accepted from closed-form preparations.
pub const PREPARATION_DEFICIT: f64 = 1e-10;
/// Largest norm deficit accepted after applying an operation.
pub const OPERATION_DEFICIT: f64 = 1e-6;

fn zero() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

/// Extra levels used while applying an operation, before truncating back.
fn padding(cutoff: usize) -> usize {
    (cutoff / 2).max(8)
}

fn check_shape(modes: usize, cutoff: usize) -> Result<()> {
    if modes > MAX_MODES {
        return Err(Error::invalid(format!("the Fock oracle handles at most {MAX_MODES} modes")));
    }
    if cutoff == 0 || cutoff > MAX_CUTOFF {
        return Err(Error::invalid(format!("cutoff must lie in 1..={MAX_CUTOFF}, got {cutoff}")));
    }
    Ok(())
}

fn check_mode(modes: usize, mode: usize) -> Result<()> {
    if mode >= modes {
        return Err(Error::invalid(format!("mode {mode} out of range for {modes} modes")));
    }
    Ok(())
}

/// Closed-form pure states the oracle can prepare directly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Preparation {
    Vacuum { modes: usize },
    Coherent { modes: usize, mode: usize, q: f64, p: f64 },
    Squeezed { modes: usize, mode: usize, r: f64 },
    TwoModeSqueezed { r: f64 },
}

/// Single-mode amplitudes of the coherent state with means `(q, p)`.
pub fn coherent_amplitudes(q: f64, p: f64, cutoff: usize) -> Vec<Complex64> {
    let beta = Complex64::new(q / 2.0, p / 2.0);
    let mut amp = Vec::with_capacity(cutoff + 1);
    let mut cur = c((-beta.norm_sqr() / 2.0).exp());
    for k in 0..=cutoff {
        amp.push(cur);
        cur = cur * beta / ((k + 1) as f64).sqrt();
    }
    amp
}

/// Single-mode amplitudes of `exp(r/2 (â² − â†²))|0⟩` (even photon numbers only).
fn squeezed_amplitudes(r: f64, cutoff: usize) -> Vec<Complex64> {
    let mut amp = vec![zero(); cutoff + 1];
    let t = r.tanh();
    let mut cur = 1.0 / r.cosh().sqrt();
    let mut m = 0;
    while 2 * m <= cutoff {
        amp[2 * m] = c(cur);
        let (a, b) = ((2 * m + 1) as f64, (2 * m + 2) as f64);
        cur *= -t * (a * b).sqrt() / (2.0 * (m + 1) as f64);
        m += 1;
    }
    amp
}

/// A pure state as a dense amplitude tensor of shape `(cutoff+1)^modes`.
#[derive(Debug, Clone, PartialEq)]
pub struct FockState {
    layout: Layout,
    amps: Vec<Complex64>,
}

/// A mixed state as a dense density matrix over the same basis.
#[derive(Debug, Clone, PartialEq)]
pub struct FockDensity {
    layout: Layout,
    rho: DMatrix<Complex64>,
}

impl FockState {
    pub fn vacuum(modes: usize, cutoff: usize) -> Result<Self> {
        check_shape(modes, cutoff)?;
        let layout = Layout::new(modes, cutoff);
        let mut amps = vec![zero(); layout.dim()];
        amps[0] = c(1.0);
        Ok(FockState { layout, amps })
    }

    /// Builds one of the closed-form pure states. Fails if more than
    /// [`PREPARATION_DEFICIT`] of the norm falls beyond the cutoff.
    pub fn from_gaussian(prep: Preparation, cutoff: usize) -> Result<Self> {
        let state = match prep {
            Preparation::Vacuum { modes } => Self::vacuum(modes, cutoff)?,
            Preparation::Coherent { modes, mode, q, p } => {
                Self::product_with(modes, mode, cutoff, coherent_amplitudes(q, p, cutoff))?
            }
            Preparation::Squeezed { modes, mode, r } => {
                Self::product_with(modes, mode, cutoff, squeezed_amplitudes(r, cutoff))?
            }
            Preparation::TwoModeSqueezed { r } => {
                let mut s = Self::vacuum(2, cutoff)?;
                s.amps[0] = zero();
                let t = r.tanh();
                let mut cur = 1.0 / r.cosh();
                for k in 0..=cutoff {
                    let i = s.layout.index(&[k, k]);
                    s.amps[i] = c(cur);
                    cur *= t;
                }
                s
            }
        };
        let deficit = state.norm_deficit();
        if deficit > PREPARATION_DEFICIT {
            return Err(Error::CutoffTooSmall { norm_deficit: deficit });
        }
        Ok(state)
    }

    fn product_with(modes: usize, mode: usize, cutoff: usize, local: Vec<Complex64>) -> Result<Self> {
        check_shape(modes, cutoff)?;
        check_mode(modes, mode)?;
        let layout = Layout::new(modes, cutoff);
        let mut amps = vec![zero(); layout.dim()];
        for (k, a) in local.into_iter().enumerate() {
            amps[k * layout.stride(mode)] = a;
        }
        Ok(FockState { layout, amps })
    }

    pub fn modes(&self) -> usize {
        self.layout.modes
    }

    pub fn cutoff(&self) -> usize {
        self.layout.levels - 1
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    /// Amplitude of the number state `|n₀, n₁, …⟩`.
    pub fn amplitude(&self, occupations: &[usize]) -> Complex64 {
        assert_eq!(occupations.len(), self.modes());
        if occupations.iter().any(|&n| n > self.cutoff()) {
            return zero();
        }
        self.amps[self.layout.index(occupations)]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// `1 − ⟨ψ|ψ⟩`: weight lost to truncation.
    pub fn norm_deficit(&self) -> f64 {
        (1.0 - self.norm_sqr()).max(0.0)
    }

    /// `|⟨a|b⟩|²` with both states taken as they are (not renormalized).
    pub fn overlap(&self, other: &FockState) -> Result<f64> {
        if self.layout != other.layout {
            return Err(Error::invalid("overlap needs states with equal modes and cutoff"));
        }
        let ip: Complex64 = self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum();
        Ok(ip.norm_sqr())
    }

    /// Same state on `extra` more vacuum modes appended at the end.
    pub fn extend_vacuum(&self, extra: usize) -> Result<FockState> {
        let layout = Layout::new(self.modes() + extra, self.cutoff());
        let scale = layout.levels.pow(extra as u32);
        let mut amps = vec![zero(); layout.dim()];
        for (i, a) in self.amps.iter().enumerate() {
            amps[i * scale] = *a;
        }
        Ok(FockState { layout, amps })
    }

    pub fn to_density(&self) -> FockDensity {
        let v = DVector::from_column_slice(&self.amps);
        FockDensity {
            layout: self.layout,
            rho: &v * v.adjoint(),
        }
    }

    fn padded(&self) -> (Layout, Vec<Complex64>) {
        let big = Layout::new(self.modes(), self.cutoff() + padding(self.cutoff()));
        (big, self.layout.remap(&self.amps, big))
    }

    fn truncated(&self, big: Layout, data: &[Complex64]) -> Result<FockState> {
        let out = FockState {
            layout: self.layout,
            amps: big.remap(data, self.layout),
        };
        let deficit = out.norm_deficit();
        if deficit > OPERATION_DEFICIT {
            return Err(Error::CutoffTooSmall { norm_deficit: deficit });
        }
        Ok(out)
    }

    /// Applies one of the unitary named channels by exponentiating its generator in the number
    /// basis (on a padded cutoff, then truncating and re-measuring the norm).
    pub fn apply_gaussian_unitary(&self, channel: &NamedChannel) -> Result<FockState> {
        let modes = channel.modes();
        for &m in &modes {
            check_mode(self.modes(), m)?;
        }
        let generator = unitary_generator(channel)?;
        let (big, mut data) = self.padded();
        let blocks = generator.exp_blocks(big.levels);
        apply_blocks(&mut data, big, &modes, &blocks);
        self.truncated(big, &data)
    }

    /// `⟨φ|_mode ψ⟩` for a single-mode vector `φ`, as a state on the remaining modes.
    fn project(&self, mode: usize, phi: &[Complex64]) -> FockState {
        let rest = self.layout.without();
        let mut amps = vec![zero(); rest.dim()];
        for (i, a) in self.amps.iter().enumerate() {
            let (r, k) = self.layout.split(i, mode);
            amps[r] += phi[k].conj() * a;
        }
        FockState { layout: rest, amps }
    }

    /// Projects `mode` onto the coherent state centred at `(q, p)`. Returns the collapsed state
    /// on the remaining modes (renormalized to the prior norm) and the outcome density per
    /// `dq dp`.
    pub fn condition_coherent(&self, mode: usize, q: f64, p: f64) -> Result<(FockState, f64)> {
        check_mode(self.modes(), mode)?;
        let phi = coherent_amplitudes(q, p, self.cutoff());
        let projected = self.project(mode, &phi);
        let norm = self.norm_sqr();
        let p_un = projected.norm_sqr();
        if p_un <= 0.0 {
            return Err(Error::ZeroProbability);
        }
        let density = p_un / norm / (4.0 * std::f64::consts::PI);
        Ok((projected.rescaled(norm / p_un), density))
    }

    fn rescaled(mut self, factor: f64) -> FockState {
        let s = factor.sqrt();
        self.amps.iter_mut().for_each(|a| *a *= s);
        self
    }
}

impl FockDensity {
    /// Thermal state with mean photon number `nbar` on one mode, vacuum elsewhere.
    pub fn thermal(modes: usize, mode: usize, nbar: f64, cutoff: usize) -> Result<Self> {
        check_shape(modes, cutoff)?;
        check_mode(modes, mode)?;
        if !(nbar >= 0.0) {
            return Err(Error::invalid("mean photon number must be ≥ 0"));
        }
        let layout = Layout::new(modes, cutoff);
        let mut rho = DMatrix::zeros(layout.dim(), layout.dim());
        let ratio = nbar / (nbar + 1.0);
        let mut p = 1.0 / (nbar + 1.0);
        for k in 0..=cutoff {
            let i = k * layout.stride(mode);
            rho[(i, i)] = c(p);
            p *= ratio;
        }
        let d = FockDensity { layout, rho };
        if d.norm_deficit() > PREPARATION_DEFICIT {
            return Err(Error::CutoffTooSmall {
                norm_deficit: d.norm_deficit(),
            });
        }
        Ok(d)
    }

    pub fn modes(&self) -> usize {
        self.layout.modes
    }

    pub fn cutoff(&self) -> usize {
        self.layout.levels - 1
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.rho
    }

    pub fn trace(&self) -> f64 {
        self.rho.diagonal().iter().map(|v| v.re).sum()
    }

    pub fn norm_deficit(&self) -> f64 {
        (1.0 - self.trace()).max(0.0)
    }

    fn padded(&self) -> (Layout, DMatrix<Complex64>) {
        let big = Layout::new(self.modes(), self.cutoff() + padding(self.cutoff()));
        let map: Vec<usize> = (0..self.layout.dim())
            .map(|i| big.index(&self.layout.digits(i)))
            .collect();
        let mut rho = DMatrix::zeros(big.dim(), big.dim());
        for j in 0..self.layout.dim() {
            for i in 0..self.layout.dim() {
                rho[(map[i], map[j])] = self.rho[(i, j)];
            }
        }
        (big, rho)
    }

    fn truncated(&self, big: Layout, rho: &DMatrix<Complex64>) -> Result<FockDensity> {
        let map: Vec<usize> = (0..self.layout.dim())
            .map(|i| big.index(&self.layout.digits(i)))
            .collect();
        let dim = self.layout.dim();
        let out = FockDensity {
            layout: self.layout,
            rho: DMatrix::from_fn(dim, dim, |i, j| rho[(map[i], map[j])]),
        };
        let deficit = out.norm_deficit();
        if deficit > OPERATION_DEFICIT {
            return Err(Error::CutoffTooSmall { norm_deficit: deficit });
        }
        Ok(out)
    }

    pub fn apply_gaussian_unitary(&self, channel: &NamedChannel) -> Result<FockDensity> {
        let modes = channel.modes();
        for &m in &modes {
            check_mode(self.modes(), m)?;
        }
        let generator = unitary_generator(channel)?;
        let (big, rho) = self.padded();
        let blocks = generator.exp_blocks(big.levels);
        let out = sandwich(&rho, |v| {
            let mut w = v.to_vec();
            apply_blocks(&mut w, big, &modes, &blocks);
            w
        });
        self.truncated(big, &out)
    }

    /// Vectors `√λ_i |v_i⟩` with `ρ = Σ_i |·⟩⟨·|`, dropping eigenvalues below `1e-15`.
    fn purifying_ensemble(&self) -> Vec<Vec<Complex64>> {
        let eig = self.rho.clone().symmetric_eigen();
        eig.eigenvalues
            .iter()
            .enumerate()
            .filter(|(_, &l)| l > 1e-15)
            .map(|(i, &l)| eig.eigenvectors.column(i).iter().map(|z| z * l.sqrt()).collect())
            .collect()
    }

    fn project(&self, mode: usize, phi: &[Complex64]) -> FockDensity {
        let rest = self.layout.without();
        let mut rho = DMatrix::zeros(rest.dim(), rest.dim());
        let dim = self.layout.dim();
        for j in 0..dim {
            let (s, l) = self.layout.split(j, mode);
            let wl = phi[l];
            if wl.norm_sqr() == 0.0 {
                continue;
            }
            for i in 0..dim {
                let (r, k) = self.layout.split(i, mode);
                rho[(r, s)] += phi[k].conj() * self.rho[(i, j)] * wl;
            }
        }
        FockDensity { layout: rest, rho }
    }

    fn rescaled(mut self, factor: f64) -> FockDensity {
        self.rho *= c(factor);
        self
    }
}

/// Anti-Hermitian generator `K` with `U = exp(K)` for each unitary named channel, matching the
/// engine's symplectic blocks.
fn unitary_generator(channel: &NamedChannel) -> Result<Generator> {
    use NamedChannel::*;
    let i = Complex64::i();
    let (local_modes, terms) = match *channel {
        Displacement { q, p, .. } => {
            let beta = Complex64::new(q / 2.0, p / 2.0);
            (1, vec![Term::new(beta, &[(0, true)]), Term::new(-beta.conj(), &[(0, false)])])
        }
        Rotation { theta, .. } => (1, vec![Term::new(i * theta, &[(0, true), (0, false)])]),
        Squeezer { r, phi, .. } => (
            1,
            vec![
                Term::new(Complex64::from_polar(r / 2.0, -phi), &[(0, false), (0, false)]),
                Term::new(-Complex64::from_polar(r / 2.0, phi), &[(0, true), (0, true)]),
            ],
        ),
        Beamsplitter { theta, phi, .. } => (
            2,
            vec![
                Term::new(Complex64::from_polar(theta, phi), &[(0, false), (1, true)]),
                Term::new(-Complex64::from_polar(theta, -phi), &[(0, true), (1, false)]),
            ],
        ),
        TwoModeSqueezer { r, .. } => (
            2,
            vec![
                Term::new(c(r), &[(0, true), (1, true)]),
                Term::new(c(-r), &[(0, false), (1, false)]),
            ],
        ),
        other => {
            return Err(Error::Unsupported(format!(
                "{other:?} is not unitary; use the channel entry point"
            )))
        }
    };
    Ok(Generator { local_modes, terms })
}

/// Kraus operators `K_k = ⟨k|_anc U |0⟩_anc` of a two-mode unitary dilation `U = exp(K)` on
/// (system, ancilla), truncated at `levels` per mode.
fn dilation_kraus(generator: &Generator, levels: usize) -> Vec<DMatrix<Complex64>> {
    let local = Layout::new(2, levels - 1);
    let blocks = generator.exp_blocks(levels);
    let mut kraus = vec![DMatrix::<Complex64>::zeros(levels, levels); levels];
    for j in 0..levels {
        let mut v = vec![zero(); local.dim()];
        v[local.index(&[j, 0])] = c(1.0);
        apply_blocks(&mut v, local, &[0, 1], &blocks);
        for (idx, a) in v.iter().enumerate() {
            if a.norm_sqr() == 0.0 {
                continue;
            }
            let (i, k) = (local.digit(idx, 0), local.digit(idx, 1));
            kraus[k][(i, j)] = *a;
        }
    }
    kraus
}

/// Single-mode displacement operator on `levels` levels.
fn displacement_matrix(q: f64, p: f64, levels: usize) -> DMatrix<Complex64> {
    let g = unitary_generator(&NamedChannel::Displacement { mode: 0, q, p }).expect("unitary");
    let blocks = g.exp_blocks(levels);
    let mut m = DMatrix::identity(levels, levels);
    for b in blocks {
        for (r, &i) in b.indices.iter().enumerate() {
            for (cidx, &j) in b.indices.iter().enumerate() {
                m[(i, j)] = b.u[(r, cidx)];
            }
        }
    }
    m
}

/// Nodes and weights of the five-point Gauss–Hermite rule for `N(0, 1)`, exact for polynomials
/// up to degree 9. Nodes are the roots of `He₅(x) = x⁵ − 10x³ + 15x`, weights
/// `5! / (25 He₄(x)²)`.
fn gauss_hermite_5() -> [(f64, f64); 5] {
    let he4 = |x: f64| x.powi(4) - 6.0 * x * x + 3.0;
    let w = |x: f64| 120.0 / (25.0 * he4(x).powi(2));
    let a = (5.0 - 10f64.sqrt()).sqrt();
    let b = (5.0 + 10f64.sqrt()).sqrt();
    [(-b, w(b)), (-a, w(a)), (0.0, w(0.0)), (a, w(a)), (b, w(b))]
}

/// Kraus operators of a noisy single-mode channel, realized on `levels` levels.
fn channel_kraus(channel: &NamedChannel, levels: usize) -> Result<Vec<DMatrix<Complex64>>> {
    use NamedChannel::*;
    match *channel {
        Loss { eta, .. } => {
            if !(0.0..=1.0).contains(&eta) {
                return Err(Error::invalid("transmissivity must lie in [0, 1]"));
            }
            // Beamsplitter with a vacuum ancilla, transmissivity cos²θ = η.
            let theta = eta.sqrt().acos();
            let g = unitary_generator(&Beamsplitter { mode_i: 0, mode_j: 1, theta, phi: 0.0 })?;
            Ok(dilation_kraus(&g, levels))
        }
        Amplifier { gain, .. } => {
            if !(gain >= 1.0) {
                return Err(Error::invalid("gain must be ≥ 1"));
            }
            // Two-mode squeezing with a vacuum ancilla, cosh²r = gain.
            let r = gain.sqrt().acosh();
            let g = unitary_generator(&TwoModeSqueezer { mode_i: 0, mode_j: 1, r })?;
            Ok(dilation_kraus(&g, levels))
        }
        ClassicalNoise { qq, qp, pp, .. } => {
            // Gaussian mixture of displacements, integrated along the principal axes.
            let g = nalgebra::Matrix2::new(qq, qp, qp, pp).symmetric_eigen();
            if g.eigenvalues.min() < -1e-12 {
                return Err(Error::invalid("noise covariance is not PSD"));
            }
            let rule = gauss_hermite_5();
            let mut kraus = Vec::new();
            for &(x1, w1) in &rule {
                for &(x2, w2) in &rule {
                    let s = nalgebra::Vector2::new(
                        g.eigenvalues[0].max(0.0).sqrt() * x1,
                        g.eigenvalues[1].max(0.0).sqrt() * x2,
                    );
                    let d = g.eigenvectors * s;
                    kraus.push(displacement_matrix(d[0], d[1], levels) * c((w1 * w2).sqrt()));
                }
            }
            Ok(kraus)
        }
        other => Err(Error::Unsupported(format!("{other:?} has no Kraus realization here"))),
    }
}

/// State of the oracle: pure until a noisy channel or a mixed-outcome measurement is applied.
#[derive(Debug, Clone, PartialEq)]
pub enum OracleState {
    Pure(FockState),
    Mixed(FockDensity),
}

/// Moments of an oracle state in the engine's convention.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Moments {
    pub xi: Vec<f64>,
    pub gamma: Vec<Vec<f64>>,
    pub norm_deficit: f64,
}

impl Moments {
    pub fn xi_vector(&self) -> DVector<f64> {
        DVector::from_vec(self.xi.clone())
    }

    pub fn gamma_matrix(&self) -> DMatrix<f64> {
        let n = self.gamma.len();
        DMatrix::from_fn(n, n, |i, j| self.gamma[i][j])
    }

    /// Largest absolute difference from an engine state's `(ξ, γ)`.
    pub fn max_diff(&self, state: &GaussianState) -> f64 {
        if state.n() * 2 != self.xi.len() {
            return f64::INFINITY;
        }
        let dx = (self.xi_vector() - state.xi()).amax();
        let dg = (self.gamma_matrix() - state.gamma()).amax();
        dx.max(dg)
    }
}

/// Outcome of conditioning in the oracle.
#[derive(Debug, Clone, PartialEq)]
pub struct Conditioned {
    pub state: OracleState,
    /// Probability (photodetection) or probability density per `dq dp` (coherent projection).
    pub probability: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Photodetection {
    NoAbsorption,
    Absorption,
}

/// Lowering operator on `mode`: `(â ψ)[n] = √(n+1) ψ[n+1]`.
fn lower(data: &[Complex64], layout: Layout, mode: usize) -> Vec<Complex64> {
    let stride = layout.stride(mode);
    let mut out = vec![zero(); data.len()];
    for (i, o) in out.iter_mut().enumerate() {
        let n = layout.digit(i, mode);
        if n + 1 < layout.levels {
            *o = data[i + stride] * ((n + 1) as f64).sqrt();
        }
    }
    out
}

impl OracleState {
    pub fn from_gaussian(prep: Preparation, cutoff: usize) -> Result<Self> {
        Ok(OracleState::Pure(FockState::from_gaussian(prep, cutoff)?))
    }

    pub fn modes(&self) -> usize {
        match self {
            OracleState::Pure(s) => s.modes(),
            OracleState::Mixed(d) => d.modes(),
        }
    }

    pub fn cutoff(&self) -> usize {
        match self {
            OracleState::Pure(s) => s.cutoff(),
            OracleState::Mixed(d) => d.cutoff(),
        }
    }

    fn layout(&self) -> Layout {
        match self {
            OracleState::Pure(s) => s.layout,
            OracleState::Mixed(d) => d.layout,
        }
    }

    pub fn norm_deficit(&self) -> f64 {
        match self {
            OracleState::Pure(s) => s.norm_deficit(),
            OracleState::Mixed(d) => d.norm_deficit(),
        }
    }

    fn trace(&self) -> f64 {
        match self {
            OracleState::Pure(s) => s.norm_sqr(),
            OracleState::Mixed(d) => d.trace(),
        }
    }

    pub fn to_density(&self) -> FockDensity {
        match self {
            OracleState::Pure(s) => s.to_density(),
            OracleState::Mixed(d) => d.clone(),
        }
    }

    /// Applies any named channel: unitaries through their generators, loss and amplification
    /// through beamsplitter / two-mode-squeezer dilations, classical noise as a displacement
    /// mixture. Noisy channels produce a mixed state.
    pub fn apply(&self, channel: &NamedChannel) -> Result<OracleState> {
        if channel.is_unitary() {
            return Ok(match self {
                OracleState::Pure(s) => OracleState::Pure(s.apply_gaussian_unitary(channel)?),
                OracleState::Mixed(d) => OracleState::Mixed(d.apply_gaussian_unitary(channel)?),
            });
        }
        let mode = channel.modes()[0];
        check_mode(self.modes(), mode)?;
        let layout = self.layout();
        let big = Layout::new(layout.modes, layout.levels - 1 + padding(layout.levels - 1));
        let kraus = channel_kraus(channel, big.levels)?;
        // Work on a pure-state ensemble so the dense density is only formed at the original cutoff.
        let ensemble: Vec<Vec<Complex64>> = match self {
            OracleState::Pure(s) => vec![layout.remap(&s.amps, big)],
            OracleState::Mixed(d) => d.purifying_ensemble().into_iter().map(|v| layout.remap(&v, big)).collect(),
        };
        let dim = layout.dim();
        let mut rho = DMatrix::<Complex64>::zeros(dim, dim);
        for psi in &ensemble {
            for k in &kraus {
                let v = DVector::from_vec(big.remap(&apply_mode_matrix(psi, big, mode, k), layout));
                rho.ger(Complex64::new(1.0, 0.0), &v, &v.conjugate(), Complex64::new(1.0, 0.0));
            }
        }
        let out = FockDensity { layout, rho };
        let deficit = out.norm_deficit();
        if deficit > OPERATION_DEFICIT {
            return Err(Error::CutoffTooSmall { norm_deficit: deficit });
        }
        Ok(OracleState::Mixed(out))
    }

    /// Pure-loss channel on `mode` via its beamsplitter dilation; always returns a density.
    pub fn apply_loss(&self, mode: usize, eta: f64) -> Result<FockDensity> {
        match self.apply(&NamedChannel::Loss { mode, eta })? {
            OracleState::Mixed(d) => Ok(d),
            OracleState::Pure(s) => Ok(s.to_density()),
        }
    }

    /// `⟨a_k⟩`, `⟨a_k a_l⟩` and `⟨a_k† a_l⟩`, normalized by the trace.
    fn ladder_expectations(&self) -> (Vec<Complex64>, DMatrix<Complex64>, DMatrix<Complex64>) {
        let layout = self.layout();
        let n = layout.modes;
        let mut first = vec![zero(); n];
        let mut pair = DMatrix::zeros(n, n);
        let mut number = DMatrix::zeros(n, n);
        let tr = self.trace();
        match self {
            OracleState::Pure(s) => {
                let inner = |a: &[Complex64], b: &[Complex64]| -> Complex64 {
                    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
                };
                let lowered: Vec<Vec<Complex64>> = (0..n).map(|k| lower(&s.amps, layout, k)).collect();
                for k in 0..n {
                    first[k] = inner(&s.amps, &lowered[k]);
                    for l in 0..n {
                        pair[(k, l)] = inner(&s.amps, &lower(&lowered[l], layout, k));
                        number[(k, l)] = inner(&lowered[k], &lowered[l]);
                    }
                }
            }
            OracleState::Mixed(d) => {
                let dim = layout.dim();
                for j in 0..dim {
                    let col: Vec<Complex64> = d.rho.column(j).iter().copied().collect();
                    if col.iter().all(|v| v.norm_sqr() == 0.0) {
                        continue;
                    }
                    let lowered: Vec<Vec<Complex64>> = (0..n).map(|k| lower(&col, layout, k)).collect();
                    for k in 0..n {
                        first[k] += lowered[k][j];
                        let nk = layout.digit(j, k);
                        for l in 0..n {
                            pair[(k, l)] += lower(&lowered[l], layout, k)[j];
                            // ⟨j| a_k† (a_l ρ)|j⟩ = √n_k(j) · (a_l ρ)[j − e_k]
                            if nk > 0 {
                                number[(k, l)] += lowered[l][j - layout.stride(k)] * (nk as f64).sqrt();
                            }
                        }
                    }
                }
            }
        }
        let inv = c(1.0 / tr);
        (
            first.into_iter().map(|v| v * inv).collect(),
            pair * inv,
            number * inv,
        )
    }

    /// First moments and symmetric-ordered second moments of `(q̂…, p̂…)`.
    pub fn moments(&self) -> Moments {
        let n = self.modes();
        let (first, pair, number) = self.ladder_expectations();
        // ẑ_i = c_i â_k + c̄_i â_k†, with c = 1 for q and c = −i for p.
        let coef = |i: usize| -> (usize, Complex64) {
            if i < n {
                (i, c(1.0))
            } else {
                (i - n, Complex64::new(0.0, -1.0))
            }
        };
        let xi: Vec<f64> = (0..2 * n)
            .map(|i| {
                let (k, ci) = coef(i);
                2.0 * (ci * first[k]).re
            })
            .collect();
        let mut gamma = vec![vec![0.0; 2 * n]; 2 * n];
        for i in 0..2 * n {
            for j in 0..2 * n {
                let (k, ci) = coef(i);
                let (l, cj) = coef(j);
                let mut sym = 2.0 * (ci * cj * pair[(k, l)]).re + 2.0 * (ci.conj() * cj * number[(k, l)]).re;
                if k == l {
                    sym += (ci * cj.conj()).re;
                }
                gamma[i][j] = sym - xi[i] * xi[j];
            }
        }
        Moments {
            xi,
            gamma,
            norm_deficit: self.norm_deficit(),
        }
    }

    /// Marginal `P(n)` of one mode for `n = 0..=cutoff`; sums to `1 − norm_deficit`.
    pub fn photon_number_distribution(&self, mode: usize) -> Result<Vec<f64>> {
        check_mode(self.modes(), mode)?;
        let layout = self.layout();
        let mut dist = vec![0.0; layout.levels];
        match self {
            OracleState::Pure(s) => {
                for (i, a) in s.amps.iter().enumerate() {
                    dist[layout.digit(i, mode)] += a.norm_sqr();
                }
            }
            OracleState::Mixed(d) => {
                for i in 0..layout.dim() {
                    dist[layout.digit(i, mode)] += d.rho[(i, i)].re;
                }
            }
        }
        Ok(dist)
    }

    /// Threshold photodetection on `mode`, removing it. "No absorption" projects onto `|0⟩`;
    /// "absorption" projects onto `Σ_{n≥1} |n⟩⟨n|` and yields the heralded (generally
    /// non-Gaussian) state of the other modes.
    pub fn condition_photodetection(&self, mode: usize, outcome: Photodetection) -> Result<Conditioned> {
        check_mode(self.modes(), mode)?;
        let levels = self.layout().levels;
        let total = self.trace();
        let mut vacuum = vec![zero(); levels];
        vacuum[0] = c(1.0);
        let (state, weight) = match (self, outcome) {
            (OracleState::Pure(s), Photodetection::NoAbsorption) => {
                let p = s.project(mode, &vacuum);
                let w = p.norm_sqr();
                (OracleState::Pure(p), w)
            }
            (OracleState::Mixed(d), Photodetection::NoAbsorption) => {
                let p = d.project(mode, &vacuum);
                let w = p.trace();
                (OracleState::Mixed(p), w)
            }
            (_, Photodetection::Absorption) => {
                let d = self.to_density();
                let rest = d.layout.without();
                let mut acc = FockDensity {
                    layout: rest,
                    rho: DMatrix::zeros(rest.dim(), rest.dim()),
                };
                for k in 1..levels {
                    let mut e = vec![zero(); levels];
                    e[k] = c(1.0);
                    acc.rho += d.project(mode, &e).rho;
                }
                let w = acc.trace();
                (OracleState::Mixed(acc), w)
            }
        };
        if !(weight > 0.0) {
            return Err(Error::ZeroProbability);
        }
        let probability = weight / total;
        let scale = total / weight;
        let state = match state {
            OracleState::Pure(s) => OracleState::Pure(s.rescaled(scale)),
            OracleState::Mixed(d) => OracleState::Mixed(d.rescaled(scale)),
        };
        Ok(Conditioned { state, probability })
    }

    /// Heterodyne with a fixed outcome: projects `mode` onto the coherent state at `(q, p)`.
    pub fn condition_coherent(&self, mode: usize, q: f64, p: f64) -> Result<Conditioned> {
        check_mode(self.modes(), mode)?;
        match self {
            OracleState::Pure(s) => {
                let (state, probability) = s.condition_coherent(mode, q, p)?;
                Ok(Conditioned {
                    state: OracleState::Pure(state),
                    probability,
                })
            }
            OracleState::Mixed(d) => {
                let phi = coherent_amplitudes(q, p, d.cutoff());
                let projected = d.project(mode, &phi);
                let w = projected.trace();
                if !(w > 0.0) {
                    return Err(Error::ZeroProbability);
                }
                let total = d.trace();
                Ok(Conditioned {
                    probability: w / total / (4.0 * std::f64::consts::PI),
                    state: OracleState::Mixed(projected.rescaled(total / w)),
                })
            }
        }
    }

    /// Appends `extra` vacuum modes.
    pub fn extend_vacuum(&self, extra: usize) -> Result<OracleState> {
        if self.modes() + extra > MAX_MODES {
            return Err(Error::invalid(format!("the Fock oracle handles at most {MAX_MODES} modes")));
        }
        let pure = match self {
            OracleState::Pure(s) => return Ok(OracleState::Pure(s.extend_vacuum(extra)?)),
            OracleState::Mixed(d) => d,
        };
        let layout = Layout::new(pure.modes() + extra, pure.cutoff());
        let scale = layout.levels.pow(extra as u32);
        let dim = pure.layout.dim();
        let mut rho = DMatrix::zeros(layout.dim(), layout.dim());
        for j in 0..dim {
            for i in 0..dim {
                rho[(i * scale, j * scale)] = pure.rho[(i, j)];
            }
        }
        Ok(OracleState::Mixed(FockDensity { layout, rho }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn vacuum_amplitude() {
        let v = FockState::from_gaussian(Preparation::Vacuum { modes: 2 }, 5).unwrap();
        assert_eq!(v.amplitude(&[0, 0]), c(1.0));
        assert_eq!(v.norm_sqr(), 1.0);
        let m = OracleState::Pure(v).moments();
        assert_eq!(m.xi, vec![0.0; 4]);
        for i in 0..4 {
            for j in 0..4 {
                assert!((m.gamma[i][j] - if i == j { 1.0 } else { 0.0 }).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn tmss_series_ratio() {
        let s = FockState::from_gaussian(Preparation::TwoModeSqueezed { r: 0.3 }, 30).unwrap();
        for k in 0..29 {
            let ratio = s.amplitude(&[k + 1, k + 1]) / s.amplitude(&[k, k]);
            assert!((ratio.re - 0.3f64.tanh()).abs() < 1e-14);
        }
    }

    #[test]
    fn coherent_is_poisson() {
        // |α|² = 1 ⇔ q² + p² = 4.
        let s = OracleState::from_gaussian(Preparation::Coherent { modes: 1, mode: 0, q: 2.0, p: 0.0 }, 40).unwrap();
        let dist = s.photon_number_distribution(0).unwrap();
        let mut poisson = (-1.0f64).exp();
        let mut chi2 = 0.0;
        for (n, p) in dist.iter().enumerate() {
            if poisson > 1e-300 {
                chi2 += (p - poisson).powi(2) / poisson;
            }
            poisson /= (n + 1) as f64;
        }
        assert!(chi2 < 1e-20, "chi2 {chi2}");
    }

    #[test]
    fn cutoff_too_small_is_reported() {
        let r = FockState::from_gaussian(Preparation::Coherent { modes: 1, mode: 0, q: 6.0, p: 0.0 }, 5);
        assert!(matches!(r, Err(Error::CutoffTooSmall { .. })));
        assert!(FockState::vacuum(4, 3).is_err());
        assert!(FockState::vacuum(1, 65).is_err());
    }

    #[test]
    fn beamsplitter_moves_single_photon() {
        let mut s = FockState::vacuum(2, 4).unwrap();
        s.amps[0] = zero();
        let i = s.layout.index(&[1, 0]);
        s.amps[i] = c(1.0);
        let out = s
            .apply_gaussian_unitary(&NamedChannel::Beamsplitter { mode_i: 0, mode_j: 1, theta: FRAC_PI_2, phi: 0.0 })
            .unwrap();
        assert!(out.amplitude(&[1, 0]).norm() < 1e-14);
        assert!((out.amplitude(&[0, 1]).norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn identity_unitary_is_noop() {
        let s = FockState::from_gaussian(Preparation::Squeezed { modes: 1, mode: 0, r: 0.4 }, 30).unwrap();
        let out = s.apply_gaussian_unitary(&NamedChannel::Rotation { mode: 0, theta: 0.0 }).unwrap();
        assert_eq!(out, s);
    }

    #[test]
    fn tmss_generator_matches_series() {
        let v = FockState::vacuum(2, 30).unwrap();
        let a = v
            .apply_gaussian_unitary(&NamedChannel::TwoModeSqueezer { mode_i: 0, mode_j: 1, r: 0.3 })
            .unwrap();
        let b = FockState::from_gaussian(Preparation::TwoModeSqueezed { r: 0.3 }, 30).unwrap();
        assert!(1.0 - a.overlap(&b).unwrap() < 1e-8);
    }

    #[test]
    fn squeezed_q_variance() {
        let s = OracleState::from_gaussian(Preparation::Squeezed { modes: 1, mode: 0, r: 0.5 }, 40).unwrap();
        let m = s.moments();
        assert!((m.gamma[0][0] - (-1.0f64).exp()).abs() < 1e-6);
    }

    #[test]
    fn thermal_mean_photon_number() {
        let d = OracleState::Mixed(FockDensity::thermal(1, 0, 0.7, 60).unwrap());
        let m = d.moments();
        // γ = (2 n̄ + 1) I.
        assert!(((m.gamma[0][0] - 1.0) / 2.0 - 0.7).abs() < 1e-9);
    }

    #[test]
    fn loss_extremes() {
        let s = OracleState::from_gaussian(Preparation::Coherent { modes: 1, mode: 0, q: 1.0, p: 0.5 }, 30).unwrap();
        let same = s.apply_loss(0, 1.0).unwrap();
        assert!((same.matrix() - s.to_density().matrix()).iter().all(|v| v.norm() < 1e-12));
        let gone = s.apply_loss(0, 0.0).unwrap();
        assert!((gone.matrix()[(0, 0)].re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pdc_heralding_branches() {
        let r = 0.3f64;
        let t2 = r.tanh().powi(2);
        let s = OracleState::from_gaussian(Preparation::TwoModeSqueezed { r }, 30).unwrap();
        let none = s.condition_photodetection(0, Photodetection::NoAbsorption).unwrap();
        assert!((none.probability - 1.0 / r.cosh().powi(2)).abs() < 1e-12);
        let m = none.state.moments();
        assert!((m.gamma[0][0] - 1.0).abs() < 1e-12 && (m.gamma[1][1] - 1.0).abs() < 1e-12);

        let hit = s.condition_photodetection(0, Photodetection::Absorption).unwrap();
        assert!((hit.probability - t2).abs() < 1e-12);
        let dist = hit.state.photon_number_distribution(0).unwrap();
        assert!(dist[0].abs() < 1e-15);
        for n in 1..10 {
            assert!((dist[n] - (1.0 - t2) * t2.powi(n as i32 - 1)).abs() < 1e-12);
        }
    }

    #[test]
    fn gauss_hermite_moments() {
        let rule = gauss_hermite_5();
        let m = |k: i32| rule.iter().map(|(x, w)| w * x.powi(k)).sum::<f64>();
        assert!((m(0) - 1.0).abs() < 1e-14);
        assert!(m(1).abs() < 1e-14);
        assert!((m(2) - 1.0).abs() < 1e-13);
        assert!((m(4) - 3.0).abs() < 1e-12);
    }
}
