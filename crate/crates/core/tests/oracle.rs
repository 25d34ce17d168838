//! Fock-space oracle against closed forms, and the places where the Gaussian picture stops.

use cvsim::channel::NamedChannel;
use cvsim::fock::{coherent_amplitudes, OracleState, Photodetection, Preparation};
use cvsim::measurement::{self, MeasurementSpec, Quadrature};
use cvsim::phase_space::GaussianState;

#[test]
fn coherent_state_convention() {
    // ⟨a⟩ = (q + ip)/2, so ⟨n⟩ = (q² + p²)/4 and amplitudes are Poissonian.
    let (q, p) = (1.2, -0.8);
    let o = OracleState::from_gaussian(Preparation::Coherent { modes: 1, mode: 0, q, p }, 30).unwrap();
    let dist = o.photon_number_distribution(0).unwrap();
    let nbar = (q * q + p * p) / 4.0;
    let mean: f64 = dist.iter().enumerate().map(|(n, w)| n as f64 * w).sum();
    assert!((mean - nbar).abs() < 1e-12);
    let amps = coherent_amplitudes(q, p, 30);
    assert!((amps[1].re - (-nbar / 2.0).exp() * q / 2.0).abs() < 1e-14);
    assert!((amps[1].im - (-nbar / 2.0).exp() * p / 2.0).abs() < 1e-14);
    let m = o.moments();
    assert!(m.max_diff(&GaussianState::coherent(1, 0, q, p).unwrap()) < 1e-12);
}

#[test]
fn squeezing_sign_convention() {
    // r > 0 squeezes q.
    let o = OracleState::from_gaussian(Preparation::Squeezed { modes: 1, mode: 0, r: 0.4 }, 40).unwrap();
    let g = o.moments().gamma_matrix();
    assert!((g[(0, 0)] - (-0.8f64).exp()).abs() < 1e-10);
    assert!((g[(1, 1)] - 0.8f64.exp()).abs() < 1e-10);
}

#[test]
fn truncation_error_shrinks_with_cutoff() {
    let prep = || Preparation::Coherent { modes: 1, mode: 0, q: 5.0, p: 0.0 };
    let mut last = f64::INFINITY;
    for cutoff in [20, 25, 30, 40] {
        let o = match OracleState::from_gaussian(prep(), cutoff) {
            Ok(o) => o,
            // A too-small cutoff is an error, never a silently wrong answer.
            Err(cvsim::Error::CutoffTooSmall { norm_deficit }) => {
                assert!(norm_deficit > 1e-10);
                continue;
            }
            Err(e) => panic!("{e}"),
        };
        let diff = o.moments().max_diff(&GaussianState::coherent(1, 0, 5.0, 0.0).unwrap());
        assert!(diff <= last + 1e-13, "cutoff {cutoff}: {diff} > {last}");
        last = diff;
    }
    assert!(last < 1e-10);
}

#[test]
fn loss_matches_engine_on_squeezed_input() {
    let o = OracleState::from_gaussian(Preparation::Squeezed { modes: 1, mode: 0, r: 0.5 }, 40).unwrap();
    let ch = NamedChannel::Loss { mode: 0, eta: 0.6 };
    let e = ch.local().unwrap().apply(&GaussianState::squeezed_vacuum(1, 0, 0.5).unwrap()).unwrap();
    let out = o.apply(&ch).unwrap();
    assert!(out.moments().max_diff(&e) < 1e-8);
    // A second noisy channel goes through the mixed-state path.
    let ch2 = NamedChannel::Amplifier { mode: 0, gain: 1.2 };
    let e2 = ch2.local().unwrap().apply(&e).unwrap();
    assert!(out.apply(&ch2).unwrap().moments().max_diff(&e2) < 1e-6);
}

#[test]
fn heralded_photon_is_not_gaussian() {
    let r: f64 = 0.3;
    let lambda2 = r.tanh().powi(2);
    let o = OracleState::from_gaussian(Preparation::TwoModeSqueezed { r }, 40).unwrap();
    let heralded = o.condition_photodetection(0, Photodetection::Absorption).unwrap();
    let dist = heralded.state.photon_number_distribution(0).unwrap();
    // Thermal distribution conditioned on n ≥ 1: p_n = (1 − λ²) λ^{2(n−1)}.
    assert!(dist[0] < 1e-12);
    assert!((dist[2] - (1.0 - lambda2) * lambda2).abs() < 1e-10);

    // A Gaussian with the same moments is thermal with the same ⟨n⟩ and predicts far more two-photon weight.
    let nbar: f64 = dist.iter().enumerate().map(|(n, w)| n as f64 * w).sum();
    assert!((nbar - 1.0 / (1.0 - lambda2)).abs() < 1e-10);
    let thermal_p2 = nbar * nbar / (1.0 + nbar).powi(3);
    assert!((thermal_p2 - 0.130).abs() < 1e-3, "{thermal_p2}");
    assert!((dist[2] - 0.0776).abs() < 1e-3, "{}", dist[2]);

    // The engine refuses the branch but reports its probability.
    let e = GaussianState::two_mode_squeezed_vacuum(r);
    match measurement::condition_absorption(&e, 0) {
        cvsim::Error::NonGaussianOutcome { absorption_probability, .. } => {
            assert!((absorption_probability - heralded.probability).abs() < 1e-10)
        }
        other => panic!("{other}"),
    }
}

#[test]
fn homodyne_approaches_ideal_limit() {
    // Measuring q on one arm of a TMSS leaves the other with q variance 1/cosh 2r.
    let r: f64 = 0.7;
    let state = GaussianState::two_mode_squeezed_vacuum(r);
    let ideal = 1.0 / (2.0 * r).cosh();
    let mut last = f64::INFINITY;
    for s in [0.0, 1.0, 2.0, 4.0, 8.0, 15.0] {
        let spec = MeasurementSpec::squeezed_projection(1, Quadrature::Q, s).unwrap();
        let (post, _) = measurement::condition(&state, &spec, &[0.3]).unwrap();
        let err = (post.gamma()[(0, 0)] - ideal).abs();
        assert!(err < last, "s={s}: {err}");
        last = err;
    }
    assert!(last < 1e-10, "{last}");
    // s = 0 is heterodyne.
    let (het, _) = measurement::condition(&state, &MeasurementSpec::heterodyne(vec![1]).unwrap(), &[0.3, 0.0]).unwrap();
    let (s0, _) = measurement::condition(&state, &MeasurementSpec::squeezed_projection(1, Quadrature::Q, 0.0).unwrap(), &[0.3]).unwrap();
    assert!((het.gamma() - s0.gamma()).amax() < 1e-12);
}
