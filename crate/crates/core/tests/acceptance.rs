//! Acceptance suite. Prints one PASS/FAIL line per criterion and fails if any criterion fails.

mod common;

use std::path::PathBuf;
use std::time::Instant;

use cvsim::channel::{self, NamedChannel};
use cvsim::circuit::{self, Outcomes, RunMode};
use cvsim::fock::{FockDensity, OracleState, Photodetection, Preparation};
use cvsim::measurement::{self, rng_stream, MeasurementSpec};
use cvsim::phase_space::GaussianState;
use cvsim::{bench, Error};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

const ORACLE_TOL: f64 = 1e-5;
const ORACLE_DEFICIT: f64 = 1e-10;
const ORACLE_RUNTIME_S: f64 = 120.0;
const PDC_R: f64 = 0.3;
const PDC_VACUUM_TOL: f64 = 1e-9;
const PDC_WEIGHT_TOL: f64 = 1e-6;
const PDC_SINGLE_PHOTON_MIN: f64 = 0.9;
const BENCH_DEPTH: usize = 100;
const BENCH_MAX_SECONDS: f64 = 60.0;
const BENCH_MAX_EXPONENT: f64 = 3.5;
const PSD_FLOOR: f64 = -1e-9;
const CP_FUZZ: usize = 10_000;
const SYMPLECTIC_FUZZ: usize = 1_000;
const CLONE_FIDELITY: f64 = 2.0 / 3.0;
const CLONE_TOL: f64 = 1e-6;
const SHOTS: usize = 100_000;
const SIGMAS: f64 = 5.0;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.amax()
}

/// Engine and oracle on the same preparation and operation; returns (max moment diff, max deficit).
fn compare(engine: &GaussianState, oracle: &OracleState) -> (f64, f64) {
    let m = oracle.moments();
    (m.max_diff(engine), m.norm_deficit)
}

fn criterion_oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let cutoff = 40;
    let mut worst = 0.0f64;
    let mut worst_deficit = 0.0f64;
    let mut cases = 0;
    let mut note = |name: &str, e: &GaussianState, o: &OracleState, worst: &mut f64, wd: &mut f64| {
        let (d, def) = compare(e, o);
        if d > ORACLE_TOL || def > ORACLE_DEFICIT {
            eprintln!("  oracle mismatch in {name}: diff {d:.3e}, deficit {def:.3e}");
        }
        *worst = worst.max(d);
        *wd = wd.max(def);
        cases += 1;
    };

    // Constructors.
    let constructors: Vec<(&str, GaussianState, OracleState)> = vec![
        (
            "vacuum",
            GaussianState::vacuum(2).unwrap(),
            OracleState::from_gaussian(Preparation::Vacuum { modes: 2 }, cutoff).unwrap(),
        ),
        (
            "coherent",
            GaussianState::coherent(2, 1, 2.0, -1.5).unwrap(),
            OracleState::from_gaussian(Preparation::Coherent { modes: 2, mode: 1, q: 2.0, p: -1.5 }, cutoff).unwrap(),
        ),
        (
            "squeezed+",
            GaussianState::squeezed_vacuum(1, 0, 0.5).unwrap(),
            OracleState::from_gaussian(Preparation::Squeezed { modes: 1, mode: 0, r: 0.5 }, cutoff).unwrap(),
        ),
        (
            "squeezed-",
            GaussianState::squeezed_vacuum(2, 0, -0.4).unwrap(),
            OracleState::from_gaussian(Preparation::Squeezed { modes: 2, mode: 0, r: -0.4 }, cutoff).unwrap(),
        ),
        (
            "tmss",
            GaussianState::two_mode_squeezed_vacuum(0.5),
            OracleState::from_gaussian(Preparation::TwoModeSqueezed { r: 0.5 }, cutoff).unwrap(),
        ),
        (
            "thermal",
            GaussianState::thermal(1, 0, 0.4).unwrap(),
            OracleState::Mixed(FockDensity::thermal(1, 0, 0.4, cutoff).unwrap()),
        ),
    ];
    for (name, e, o) in &constructors {
        note(name, e, o, &mut worst, &mut worst_deficit);
    }

    // Every named channel on a displaced, squeezed, entangled two-mode input.
    let prep = |_: ()| {
        let e = GaussianState::two_mode_squeezed_vacuum(0.3);
        let o = OracleState::from_gaussian(Preparation::TwoModeSqueezed { r: 0.3 }, cutoff).unwrap();
        let d = NamedChannel::Displacement { mode: 0, q: 0.8, p: -0.6 };
        (d.local().unwrap().apply(&e).unwrap(), o.apply(&d).unwrap())
    };
    let channels = [
        NamedChannel::Displacement { mode: 1, q: -1.0, p: 0.7 },
        NamedChannel::Rotation { mode: 0, theta: 0.9 },
        NamedChannel::Beamsplitter { mode_i: 0, mode_j: 1, theta: 0.6, phi: 0.4 },
        NamedChannel::Squeezer { mode: 1, r: 0.35, phi: 0.7 },
        NamedChannel::TwoModeSqueezer { mode_i: 0, mode_j: 1, r: -0.2 },
        NamedChannel::Loss { mode: 0, eta: 0.7 },
        NamedChannel::Amplifier { mode: 1, gain: 1.3 },
        NamedChannel::ClassicalNoise { mode: 0, qq: 0.3, qp: 0.1, pp: 0.2 },
    ];
    for ch in channels {
        let (e, o) = prep(());
        let e2 = ch.local().unwrap().apply(&e).unwrap();
        let o2 = o.apply(&ch).unwrap();
        note(&format!("{ch:?}"), &e2, &o2, &mut worst, &mut worst_deficit);
    }

    // Heterodyne conditioning with a fixed outcome, and vacuum projection.
    let (e, o) = prep(());
    let spec = MeasurementSpec::heterodyne(vec![1]).unwrap();
    let (e_het, rec) = measurement::condition(&e, &spec, &[0.4, -0.9]).unwrap();
    let o_het = o.condition_coherent(1, 0.4, -0.9).unwrap();
    note("heterodyne", &e_het, &o_het.state, &mut worst, &mut worst_deficit);
    worst = worst.max((rec.log_density.exp() - o_het.probability).abs());

    let (e_vac, rec) = measurement::condition_no_absorption(&e, 0).unwrap();
    let o_vac = o.condition_photodetection(0, Photodetection::NoAbsorption).unwrap();
    note("vacuum projection", &e_vac, &o_vac.state, &mut worst, &mut worst_deficit);
    worst = worst.max((rec.log_density.exp() - o_vac.probability).abs());

    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst <= ORACLE_TOL && worst_deficit < ORACLE_DEFICIT && secs < ORACLE_RUNTIME_S,
        format!(
            "{cases} cases at cutoff {cutoff}: max |Δ| {worst:.2e} (tol {ORACLE_TOL:.0e}), max norm deficit {worst_deficit:.1e}, {secs:.1} s"
        ),
    )
}

fn criterion_pdc_boundary() -> Outcome {
    let e = GaussianState::two_mode_squeezed_vacuum(PDC_R);
    let o = OracleState::from_gaussian(Preparation::TwoModeSqueezed { r: PDC_R }, 40).unwrap();

    let (post, rec) = measurement::condition_no_absorption(&e, 0).unwrap();
    let xi_norm = post.xi().norm();
    let gamma_dev = max_abs(&(post.gamma() - DMatrix::identity(2, 2)));
    let oracle_p0 = o.condition_photodetection(0, Photodetection::NoAbsorption).unwrap().probability;
    let weight_err = (rec.log_density.exp() - oracle_p0).abs();
    let a = xi_norm < PDC_VACUUM_TOL && gamma_dev < PDC_VACUUM_TOL && weight_err < PDC_WEIGHT_TOL;

    let refused = measurement::condition_absorption(&e, 0);
    let heralded = o.condition_photodetection(0, Photodetection::Absorption).unwrap();
    let dist = heralded.state.photon_number_distribution(0).unwrap();
    let fraction = dist[1] / (1.0 - dist[0]);
    let b = match refused {
        Error::NonGaussianOutcome {
            absorption_probability, ..
        } => (absorption_probability - heralded.probability).abs() < PDC_WEIGHT_TOL && fraction > PDC_SINGLE_PHOTON_MIN,
        _ => false,
    };
    outcome(
        a && b,
        format!(
            "no-absorption: ‖ξ‖ {xi_norm:.1e}, ‖γ−I‖ {gamma_dev:.1e}, |P0 − oracle| {weight_err:.1e}; \
             absorption refused by engine, oracle single-photon fraction {fraction:.4}"
        ),
    )
}

fn criterion_resource_count() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for n in [1usize, 5, 50] {
        let s = GaussianState::vacuum(n).unwrap();
        let (means, cov) = s.parameter_count();
        let packed = s.packed_covariance();
        let good = means == 2 * n && cov == 2 * n * n + n && packed.len() == cov && means + cov == 2 * n * n + 3 * n;
        ok &= good;
        parts.push(format!("n={n}: {means}+{cov}={}", means + cov));
    }
    outcome(ok, parts.join(", "))
}

fn criterion_scaling() -> Outcome {
    let report = match bench::run(&bench::default_modes(), BENCH_DEPTH, 2002) {
        Ok(r) => r,
        Err(e) => return outcome(false, format!("benchmark failed: {e}")),
    };
    let last = report.points.last().expect("points");
    let exponent = report.fitted_exponent.unwrap_or(f64::INFINITY);
    let physical = report
        .points
        .iter()
        .filter_map(|p| p.min_eigenvalue)
        .all(|m| m >= PSD_FLOOR);
    outcome(
        last.modes == 512 && last.seconds < BENCH_MAX_SECONDS && exponent <= BENCH_MAX_EXPONENT && physical,
        format!(
            "n=512 depth {BENCH_DEPTH}: {:.2} s (limit {BENCH_MAX_SECONDS} s), fitted exponent {exponent:.2} (limit {BENCH_MAX_EXPONENT})",
            last.seconds
        ),
    )
}

fn criterion_cp_fuzz() -> Outcome {
    let mut rng = rng_stream(5, 0);
    let mut worst = f64::INFINITY;
    let mut rejected = 0;
    for k in 0..CP_FUZZ {
        let n_in = rng.random_range(1..=3);
        let n_out = rng.random_range(1..=3);
        let ch = common::random_cp_channel(&mut rng, n_in, n_out, k % 2 == 0);
        let st = common::random_state(&mut rng, n_in);
        match ch.apply(&st) {
            Ok(out) => worst = worst.min(out.check_physical().min_eigenvalue),
            Err(_) => rejected += 1,
        }
    }
    let mut mismatches = 0;
    let mut symplectic = 0;
    for k in 0..SYMPLECTIC_FUZZ {
        let n = rng.random_range(1..=3);
        let a = match k % 4 {
            0 | 1 => common::random_symplectic(&mut rng, n, 0.5),
            2 => common::random_symplectic(&mut rng, n, 0.5) + common::gaussian_matrix(&mut rng, 2 * n, 2 * n, 1e-3),
            _ => common::gaussian_matrix(&mut rng, 2 * n, 2 * n, 1.0),
        };
        let ch = channel::GaussianChannel::new(n, n, DVector::zeros(2 * n), a.clone(), DMatrix::zeros(2 * n, 2 * n)).unwrap();
        let cp = ch.validate_cp().passes;
        let sym = channel::is_symplectic(&a).unwrap();
        symplectic += sym as usize;
        mismatches += (cp != sym) as usize;
    }
    outcome(
        worst >= PSD_FLOOR && rejected == 0 && mismatches == 0,
        format!(
            "{CP_FUZZ} CP channels: min eigenvalue of γ+iΣ {worst:.2e}, {rejected} wrongly rejected; \
             {SYMPLECTIC_FUZZ} G=0 channels ({symplectic} symplectic): {mismatches} CP/symplectic disagreements"
        ),
    )
}

fn criterion_cloning() -> Outcome {
    let cloner = channel::cloner_1to2();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for q in [-2.0, -1.0, 0.0, 1.0, 2.0] {
        for p in [-2.0, -1.0, 0.0, 1.0, 2.0] {
            let input = GaussianState::coherent(1, 0, q, p).unwrap();
            let out = cloner.apply(&input).unwrap();
            for m in 0..2 {
                let f = out.reduce(&[m]).unwrap().overlap(&input).unwrap();
                lo = lo.min(f);
                hi = hi.max(f);
            }
        }
    }
    let dev = (lo - CLONE_FIDELITY).abs().max((hi - CLONE_FIDELITY).abs());

    // Independent check in Fock space: F = ⟨α|ρ_clone|α⟩ = 4π × heterodyne density at the input point.
    let (q, p) = (1.0, -0.5);
    let c = circuit::parse(&format!("modes 1; init coherent 1 q={q} p={p}; clone 1;")).unwrap();
    let run = circuit::run_oracle(&c, &Outcomes::new(), 30).unwrap();
    let oracle_f: Vec<f64> = (0..2)
        .map(|m| 4.0 * std::f64::consts::PI * run.state.condition_coherent(m, q, p).unwrap().probability)
        .collect();
    let oracle_dev = oracle_f.iter().map(|f| (f - CLONE_FIDELITY).abs()).fold(0.0, f64::max);
    outcome(
        dev <= CLONE_TOL && oracle_dev <= CLONE_TOL,
        format!(
            "25 coherent inputs × 2 clones: fidelity in [{lo:.9}, {hi:.9}], max |F − 2/3| {dev:.1e}; \
             Fock oracle at cutoff 30: |F − 2/3| {oracle_dev:.1e}"
        ),
    )
}

fn criterion_statistics() -> Outcome {
    // Heterodyne of mode 0 of a displaced, correlated two-mode state.
    let mut rng = rng_stream(77, 0);
    let state = common::random_state(&mut rng, 2);
    let spec = MeasurementSpec::heterodyne(vec![0]).unwrap();
    let idx = [0usize, 2];
    let mean = DVector::from_fn(2, |i, _| state.xi()[idx[i]]);
    let cov = DMatrix::from_fn(2, 2, |i, j| state.gamma()[(idx[i], idx[j])]) + DMatrix::identity(2, 2);

    let mut samples = Vec::with_capacity(SHOTS);
    let mut cond_means = Vec::with_capacity(SHOTS);
    let mut cond_gamma = None;
    for _ in 0..SHOTS {
        let (post, rec) = measurement::sample(&state, &spec, &mut rng).unwrap();
        samples.push(DVector::from_column_slice(&rec.outcome));
        cond_means.push(post.xi().clone());
        cond_gamma.get_or_insert_with(|| post.gamma().clone());
    }
    let n = SHOTS as f64;
    let emp_mean = samples.iter().fold(DVector::zeros(2), |a, s| a + s) / n;
    let emp_cov = samples
        .iter()
        .fold(DMatrix::zeros(2, 2), |a, s| a + (s - &emp_mean) * (s - &emp_mean).transpose())
        / (n - 1.0);
    let mut worst_z = 0.0f64;
    for i in 0..2 {
        worst_z = worst_z.max((emp_mean[i] - mean[i]).abs() / (cov[(i, i)] / n).sqrt());
        for j in 0..2 {
            let sd = ((cov[(i, i)] * cov[(j, j)] + cov[(i, j)].powi(2)) / n).sqrt();
            worst_z = worst_z.max((emp_cov[(i, j)] - cov[(i, j)]).abs() / sd);
        }
    }

    // Law of total variance on the unmeasured mode: γ_A = E[γ'] + Cov(ξ').
    let kept = [1usize, 3];
    let prior = DMatrix::from_fn(2, 2, |i, j| state.gamma()[(kept[i], kept[j])]);
    let prior_mean = DVector::from_fn(2, |i, _| state.xi()[kept[i]]);
    let cm_mean = cond_means.iter().fold(DVector::zeros(2), |a, s| a + s) / n;
    let cm_cov = cond_means
        .iter()
        .fold(DMatrix::zeros(2, 2), |a, s| a + (s - &cm_mean) * (s - &cm_mean).transpose())
        / (n - 1.0);
    let explained = cm_cov.clone();
    let recon = cond_gamma.unwrap() + &explained;
    let mut ltv_z = 0.0f64;
    for i in 0..2 {
        ltv_z = ltv_z.max((cm_mean[i] - prior_mean[i]).abs() / (explained[(i, i)] / n).sqrt());
        for j in 0..2 {
            let sd = ((explained[(i, i)] * explained[(j, j)] + explained[(i, j)].powi(2)) / n).sqrt();
            ltv_z = ltv_z.max((recon[(i, j)] - prior[(i, j)]).abs() / sd);
        }
    }

    // Seeded shots: identical across repeated, serial and differently sized parallel runs.
    let c = circuit::parse(
        "modes 3; init tmss 1 2 r=0.7; bs 2 3 theta=0.5; measure het 1 -> a; measure hom 1 quad=p -> b; \
         disp 1 q=(0.3*a[0] - 0.2*b) p=(a[1]);",
    )
    .unwrap();
    let serial = circuit::run_shots_serial(&c, 2000, 31).unwrap();
    let parallel = circuit::run_shots(&c, 2000, 31).unwrap();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
    let pooled = pool.install(|| circuit::run_shots(&c, 2000, 31)).unwrap();
    let lines = |rs: &[circuit::RunResult]| rs.iter().map(|r| r.to_json_line()).collect::<Vec<_>>();
    let reproducible = lines(&serial) == lines(&parallel) && lines(&serial) == lines(&pooled);

    outcome(
        worst_z < SIGMAS && ltv_z < SIGMAS && reproducible,
        format!(
            "{SHOTS} heterodyne shots: worst moment deviation {worst_z:.2}σ, law-of-total-variance deviation {ltv_z:.2}σ \
             (limit {SIGMAS}σ); serial/parallel/4-thread shots bit-identical: {reproducible}"
        ),
    )
}

fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

fn criterion_corpus() -> Outcome {
    let dir = corpus_dir();
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap();
    let entries = manifest.as_array().unwrap();
    let mut failures = Vec::new();
    for e in entries {
        let file = e["circuit"].as_str().unwrap();
        let text = std::fs::read_to_string(dir.join(file)).unwrap();
        let c = match circuit::parse(&text) {
            Ok(c) => c,
            Err(err) => {
                failures.push(format!("{file}: {err}"));
                continue;
            }
        };
        if circuit::parse(&circuit::serialize(&c)).as_ref() != Ok(&c) {
            failures.push(format!("{file}: round trip"));
        }
        let expected = std::fs::read_to_string(dir.join(e["expected"].as_str().unwrap())).unwrap();
        let produced = match e["mode"].as_str().unwrap() {
            "posterior" => {
                let out: Outcomes = circuit::outcomes_from_json(&e["outcomes"]).unwrap();
                circuit::run(&c, RunMode::Posterior(&out)).map(|r| vec![r])
            }
            _ => circuit::run_shots(&c, e["shots"].as_u64().unwrap(), e["seed"].as_u64().unwrap()),
        };
        let got = match produced {
            Ok(rs) => rs.iter().map(|r| r.to_json_line() + "\n").collect::<String>(),
            Err(err) => match err.root() {
                Error::NonGaussianOutcome {
                    absorption_probability, ..
                } => {
                    let v: serde_json::Value = serde_json::from_str(expected.trim()).unwrap();
                    if v["absorption_probability"].as_f64() == Some(*absorption_probability) && e["exit"] == 3 {
                        expected.clone()
                    } else {
                        format!("{err}")
                    }
                }
                _ => format!("{err}"),
            },
        };
        if got != expected {
            failures.push(format!("{file}: output differs"));
        }
    }
    outcome(
        entries.len() >= 10 && failures.is_empty(),
        if failures.is_empty() {
            format!("{} circuits parse, round-trip and reproduce their stored JSON bit-for-bit", entries.len())
        } else {
            failures.join("; ")
        },
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("oracle equivalence", criterion_oracle_equivalence),
        ("PDC boundary pair", criterion_pdc_boundary),
        ("resource count", criterion_resource_count),
        ("scaling benchmark", criterion_scaling),
        ("CP/uncertainty fuzzing", criterion_cp_fuzz),
        ("cloning fidelity", criterion_cloning),
        ("statistical suite", criterion_statistics),
        ("DSL golden corpus", criterion_corpus),
    ];
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let o = f();
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("{tag} [{}] {name}: {}", k + 1, o.detail);
        failed += !o.pass as usize;
    }
    println!("acceptance: {}/{} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
