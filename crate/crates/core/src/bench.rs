//! Scaling benchmark: brickwork circuits of random two-mode symplectic gates followed by a layer
//! of random loss, applied with the local (row/column) update.

use std::time::Instant;

use rand::Rng;
use serde::Serialize;

use crate::channel::{self, GaussianChannel, LocalChannel, NamedChannel};
use crate::error::Result;
use crate::measurement::rng_stream;
use crate::phase_space::{GaussianState, PSD_TOLERANCE};

/// Largest `n` for which the final state's uncertainty relation is also checked.
pub const PHYSICALITY_CHECK_LIMIT: usize = 128;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchPoint {
    pub modes: usize,
    pub depth: usize,
    pub seconds: f64,
    pub seconds_per_layer: f64,
    /// Bytes held by the means and covariance matrix.
    pub state_bytes: usize,
    /// Smallest eigenvalue of `γ + iΣ` after the circuit, when `n` is small enough to check.
    pub min_eigenvalue: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub seed: u64,
    pub points: Vec<BenchPoint>,
    /// Least-squares slope of `log(seconds_per_layer)` against `log(modes)`.
    pub fitted_exponent: Option<f64>,
}

fn random_two_mode<R: Rng>(rng: &mut R) -> Result<GaussianChannel> {
    let mut u = |lo: f64, hi: f64| rng.random_range(lo..hi);
    let pi = std::f64::consts::PI;
    let s1 = channel::squeezer(2, 0, u(0.0, 0.1), u(0.0, pi))?;
    let s2 = channel::squeezer(2, 1, u(0.0, 0.1), u(0.0, pi))?;
    let bs = channel::beamsplitter(2, 0, 1, u(0.0, pi), u(0.0, 2.0 * pi))?;
    let rot = channel::phase_rotation(2, 0, u(0.0, 2.0 * pi))?;
    let first = GaussianChannel::compose(&s2, &s1)?;
    let second = GaussianChannel::compose(&bs, &first)?;
    GaussianChannel::compose(&rot, &second)
}

/// Gates of layer `layer` on `n` modes: two-mode symplectics on pairs `(2k+o, 2k+o+1)` with
/// offset `o = layer mod 2`, then loss with `η ∈ [0.9, 1)` on every mode.
pub fn random_layer<R: Rng>(n: usize, layer: usize, rng: &mut R) -> Result<Vec<LocalChannel>> {
    let mut gates = Vec::with_capacity(n + n / 2);
    let mut i = layer % 2;
    while i + 1 < n {
        gates.push(LocalChannel::new(vec![i, i + 1], random_two_mode(rng)?)?);
        i += 2;
    }
    for m in 0..n {
        gates.push(NamedChannel::Loss { mode: m, eta: rng.random_range(0.9..1.0) }.local()?);
    }
    Ok(gates)
}

/// Times one random circuit. Gate generation is excluded from the timing.
pub fn run_point(n: usize, depth: usize, seed: u64) -> Result<BenchPoint> {
    let mut rng = rng_stream(seed, n as u64);
    let layers: Vec<Vec<LocalChannel>> = (0..depth).map(|l| random_layer(n, l, &mut rng)).collect::<Result<_>>()?;
    let mut state = GaussianState::vacuum(n)?;
    let start = Instant::now();
    for layer in &layers {
        for g in layer {
            g.apply_in_place_with(&mut state, PSD_TOLERANCE)?;
        }
    }
    let seconds = start.elapsed().as_secs_f64();
    let min_eigenvalue = (n <= PHYSICALITY_CHECK_LIMIT).then(|| state.check_physical().min_eigenvalue);
    Ok(BenchPoint {
        modes: n,
        depth,
        seconds,
        seconds_per_layer: seconds / depth.max(1) as f64,
        state_bytes: (2 * n + 4 * n * n) * std::mem::size_of::<f64>(),
        min_eigenvalue,
    })
}

/// Least-squares slope of `log y` against `log x`.
pub fn fit_exponent(xy: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = xy
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

pub fn run(modes: &[usize], depth: usize, seed: u64) -> Result<BenchReport> {
    let points: Vec<BenchPoint> = modes.iter().map(|&n| run_point(n, depth, seed)).collect::<Result<_>>()?;
    let xy: Vec<(f64, f64)> = points.iter().map(|p| (p.modes as f64, p.seconds_per_layer)).collect();
    Ok(BenchReport {
        seed,
        fitted_exponent: fit_exponent(&xy),
        points,
    })
}

/// `8, 16, …, 512`.
pub fn default_modes() -> Vec<usize> {
    (3..=9).map(|k| 1usize << k).collect()
}
