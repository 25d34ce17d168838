//! `cvsim`: run, sample, validate, benchmark and cross-check Gaussian optical circuits.
//!
//! Exit codes:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success |
//! | 1 | usage, I/O or JSON input error |
//! | 2 | circuit parse error (syntax or semantic) |
//! | 3 | non-Gaussian outcome: conditioning on photon absorption was requested |
//! | 4 | runtime rejection (non-CP channel, impossible outcome, bad outcome data) |
//!
//! Standard output carries JSON only (one document per line); diagnostics go to standard error.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use cvsim::circuit::{self, Circuit, Outcomes, RunMode, RunOptions};
use cvsim::fock::MAX_CUTOFF;
use cvsim::phase_space::PSD_TOLERANCE;
use cvsim::{bench, channel::GaussianChannel, Error};
use serde_json::{json, Value};

const DEFAULT_COMPARE_TOLERANCE: f64 = 1e-5;
const BENCH_EXPONENT_BOUND: f64 = 3.5;

const BOUNDARY_EXPLANATION: &str = "\
conditioning on photon absorption is not a Gaussian completely positive map: the heralded state \
is not Gaussian, so it has no covariance-matrix description and this simulator cannot continue. \
The 'no absorption' branch (vacuum projection) remains Gaussian and is supported.";

#[derive(Parser)]
#[command(name = "cvsim", version, about = "Covariance-matrix simulation of Gaussian optical circuits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a circuit with fixed measurement outcomes and print the result.
    Run {
        circuit: PathBuf,
        /// File holding a JSON object of outcomes by register, e.g. {"m0": [0.1, -0.4]}.
        #[arg(long)]
        outcomes: Option<PathBuf>,
        /// Tolerance for the complete-positivity check.
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Sample shots with seeded outcomes; prints one JSON line per shot.
    Sample {
        circuit: PathBuf,
        #[arg(long)]
        shots: u64,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Check a channel JSON ({"n_in","n_out","alpha","A","G"}) for complete positivity.
    Validate {
        channel: PathBuf,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Time random symplectic-plus-loss circuits at growing mode counts.
    Bench {
        /// Comma-separated mode counts.
        #[arg(long, value_delimiter = ',')]
        modes: Option<Vec<usize>>,
        #[arg(long, default_value_t = 100)]
        depth: usize,
        #[arg(long)]
        seed: u64,
    },
    /// Run a small circuit in both the engine and the Fock-space oracle and diff the moments.
    Compare {
        circuit: PathBuf,
        #[arg(long)]
        cutoff: usize,
        #[arg(long)]
        outcomes: Option<PathBuf>,
        /// Largest accepted absolute difference of any mean or covariance entry.
        #[arg(long)]
        tol: Option<f64>,
    },
}

/// A failure with its exit code and, for circuit errors, a JSON payload for stdout.
struct Failure {
    code: u8,
    message: String,
    payload: Option<Value>,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: 1,
            message: message.into(),
            payload: None,
        }
    }
}

fn error_payload(e: &Error) -> Value {
    let mut v = json!({
        "schema": "v1",
        "status": "error",
        "message": e.root().to_string(),
        "instruction": e.instruction_index(),
    });
    match e.root() {
        Error::NonGaussianOutcome {
            mode,
            absorption_probability,
        } => {
            v["status"] = json!("non_gaussian_outcome");
            v["mode"] = json!(mode);
            v["absorption_probability"] = json!(absorption_probability);
        }
        Error::RejectedChannel { min_eigenvalue } => {
            v["status"] = json!("rejected_channel");
            v["min_eigenvalue"] = json!(min_eigenvalue);
        }
        Error::ImpossibleOutcome { log_probability } => {
            v["status"] = json!("impossible_outcome");
            v["log_probability"] = json!(log_probability);
        }
        Error::Parse(p) => {
            v["status"] = json!("parse_error");
            v["line"] = json!(p.line);
            v["column"] = json!(p.column);
        }
        _ => {}
    }
    v
}

fn failure(e: Error) -> Failure {
    let code = match e.root() {
        Error::NonGaussianOutcome { .. } => 3,
        Error::Parse(_) => 2,
        Error::Json(_) => 1,
        _ => 4,
    };
    let message = if code == 3 {
        format!("{e}\n{BOUNDARY_EXPLANATION}")
    } else {
        e.to_string()
    };
    Failure {
        code,
        message,
        payload: Some(error_payload(&e)),
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn load_circuit(path: &Path) -> Result<Circuit, Failure> {
    let text = read(path)?;
    circuit::parse(&text).map_err(|p| Failure {
        code: 2,
        message: format!("{}:{p}", path.display()),
        payload: Some(error_payload(&Error::Parse(p))),
    })
}

fn load_outcomes(path: Option<&Path>) -> Result<Outcomes, Failure> {
    let Some(path) = path else {
        return Ok(Outcomes::new());
    };
    let v: Value = serde_json::from_str(&read(path)?).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
    circuit::outcomes_from_json(&v).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn tolerance(tol: Option<f64>) -> Result<f64, Failure> {
    match tol {
        Some(t) if !(t >= 0.0 && t.is_finite()) => Err(Failure::usage("--tol must be a finite non-negative number")),
        Some(t) => Ok(t),
        None => Ok(PSD_TOLERANCE),
    }
}

fn emit(lines: &[Value], output: Option<&Path>) -> Result<(), Failure> {
    let mut text = String::new();
    for l in lines {
        text.push_str(&l.to_string());
        text.push('\n');
    }
    match output {
        Some(p) => fs::write(p, text).map_err(|e| Failure::usage(format!("{}: {e}", p.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| Failure::usage(format!("stdout: {e}")))
        }
    }
}

fn with_tolerance(mut v: Value, tol: Option<f64>) -> Value {
    if let Some(t) = tol {
        v["tolerance"] = json!({ "psd": t });
    }
    v
}

fn cmd_run(path: &Path, outcomes: Option<&Path>, tol: Option<f64>, output: Option<&Path>) -> Result<(), Failure> {
    let c = load_circuit(path)?;
    let outcomes = load_outcomes(outcomes)?;
    let opts = RunOptions {
        psd_tolerance: tolerance(tol)?,
    };
    let r = circuit::run_with(&c, RunMode::Posterior(&outcomes), &opts).map_err(failure)?;
    emit(&[with_tolerance(r.to_json(), tol)], output)
}

fn cmd_sample(path: &Path, shots: u64, seed: u64, tol: Option<f64>, output: Option<&Path>) -> Result<(), Failure> {
    if shots == 0 {
        return Err(Failure::usage("--shots must be at least 1"));
    }
    let c = load_circuit(path)?;
    let opts = RunOptions {
        psd_tolerance: tolerance(tol)?,
    };
    let results = circuit::run_shots_with(&c, shots, seed, &opts).map_err(failure)?;
    let lines: Vec<Value> = results.iter().map(|r| with_tolerance(r.to_json(), tol)).collect();
    emit(&lines, output)
}

fn cmd_validate(path: &Path, tol: Option<f64>) -> Result<(), Failure> {
    let text = read(path)?;
    let ch: GaussianChannel = serde_json::from_str(&text).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
    let t = tolerance(tol)?;
    let report = ch.validate_cp_with(t);
    emit(
        &[json!({
            "schema": "v1",
            "n_in": ch.n_in(),
            "n_out": ch.n_out(),
            "completely_positive": report,
            "symplectic": ch.is_symplectic(),
            "noiseless": ch.g_matrix().iter().all(|x| *x == 0.0),
            "tolerance": { "psd": t },
        })],
        None,
    )
}

fn cmd_bench(modes: Option<Vec<usize>>, depth: usize, seed: u64) -> Result<(), Failure> {
    let modes = modes.unwrap_or_else(bench::default_modes);
    if modes.iter().any(|&n| n < 2) || depth == 0 {
        return Err(Failure::usage("bench needs mode counts ≥ 2 and depth ≥ 1"));
    }
    let report = bench::run(&modes, depth, seed).map_err(failure)?;
    let mut v = serde_json::to_value(&report).expect("serializable");
    v["schema"] = json!("v1");
    v["exponent_bound"] = json!(BENCH_EXPONENT_BOUND);
    v["within_bound"] = json!(report.fitted_exponent.map(|e| e <= BENCH_EXPONENT_BOUND));
    emit(&[v], None)
}

fn cmd_compare(path: &Path, cutoff: usize, outcomes: Option<&Path>, tol: Option<f64>) -> Result<(), Failure> {
    if cutoff == 0 || cutoff > MAX_CUTOFF {
        return Err(Failure::usage(format!("--cutoff must lie in 1..={MAX_CUTOFF}")));
    }
    let tol = tol.unwrap_or(DEFAULT_COMPARE_TOLERANCE);
    let c = load_circuit(path)?;
    let outcomes = load_outcomes(outcomes)?;
    let oracle = circuit::run_oracle(&c, &outcomes, cutoff).map_err(failure)?;
    let moments = oracle.state.moments();
    let photon_numbers: Vec<Vec<f64>> = (0..oracle.state.modes())
        .map(|m| oracle.state.photon_number_distribution(m).expect("mode in range"))
        .collect();
    let oracle_json = json!({
        "moments": moments,
        "log_weight": oracle.log_weight,
        "photon_number_distributions": photon_numbers,
    });
    let engine = circuit::run(&c, RunMode::Posterior(&outcomes));
    let mut report = json!({
        "schema": "v1",
        "cutoff": cutoff,
        "tolerance": { "moments": tol },
        "oracle": oracle_json,
    });
    match engine {
        Ok(r) => {
            let diff = moments.max_diff(&r.final_state);
            let weight_diff = (r.total_log_weight - oracle.log_weight).abs();
            report["engine"] = r.to_json();
            report["max_moment_diff"] = json!(diff);
            report["log_weight_diff"] = json!(weight_diff);
            report["agree"] = json!(diff <= tol && weight_diff <= tol);
            emit(&[report], None)
        }
        Err(e) => {
            let mut f = failure(e);
            report["engine"] = f.payload.take().unwrap_or(Value::Null);
            report["agree"] = json!(false);
            f.payload = Some(report);
            Err(f)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Run {
            circuit,
            outcomes,
            tol,
            output,
        } => cmd_run(&circuit, outcomes.as_deref(), tol, output.as_deref()),
        Command::Sample {
            circuit,
            shots,
            seed,
            tol,
            output,
        } => cmd_sample(&circuit, shots, seed, tol, output.as_deref()),
        Command::Validate { channel, tol } => cmd_validate(&channel, tol),
        Command::Bench { modes, depth, seed } => cmd_bench(modes, depth, seed),
        Command::Compare {
            circuit,
            cutoff,
            outcomes,
            tol,
        } => cmd_compare(&circuit, cutoff, outcomes.as_deref(), tol),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            if let Some(p) = f.payload {
                println!("{p}");
            }
            eprintln!("cvsim: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
