//! Execution: posterior (fixed outcomes) and sampled runs, and seeded multi-shot sampling.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_4;

use rayon::prelude::*;
use serde::Serialize;

use super::{Action, Circuit, Instruction, MeasureKind, Measurement};
use crate::channel::NamedChannel;
use crate::error::{Error, Result};
use crate::measurement::{self, MeasurementRecord};
use crate::phase_space::{GaussianState, PSD_TOLERANCE};

/// Outcomes by register name, in the layout the register stores.
pub type Outcomes = BTreeMap<String, Vec<f64>>;

#[derive(Debug, Clone, Copy)]
pub enum RunMode<'a> {
    /// Condition on the given outcomes; the weight is the log density of that record.
    Posterior(&'a Outcomes),
    /// Draw outcomes from stream `shot` of `seed`.
    Sampled { seed: u64, shot: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    /// Tolerance for the complete-positivity check on every applied channel.
    pub psd_tolerance: f64,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            psd_tolerance: PSD_TOLERANCE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunResult {
    pub schema: &'static str,
    pub shot_index: Option<u64>,
    pub seed: Option<u64>,
    pub final_state: GaussianState,
    /// Register contents. Homodyne stores the measured quadrature; heterodyne, EPR and
    /// general-dyne store the full outcome; photodetection kinds store 0 (no click) or 1.
    pub registers: BTreeMap<String, Vec<f64>>,
    pub records: Vec<MeasurementRecord>,
    pub total_log_weight: f64,
}

impl RunResult {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("serializable")
    }

    /// One JSON line with keys in sorted order, no trailing newline. This is the format of the
    /// CLI and of the golden corpus.
    pub fn to_json_line(&self) -> String {
        self.to_json().to_string()
    }
}

/// Reads an outcomes object: `{"m0": [0.1, -0.3], "x": 1.2}`.
pub fn outcomes_from_json(v: &serde_json::Value) -> Result<Outcomes> {
    let obj = v
        .as_object()
        .ok_or_else(|| Error::Json("outcomes must be a JSON object".into()))?;
    let mut out = Outcomes::new();
    for (k, val) in obj {
        let vals = match val {
            serde_json::Value::Number(n) => vec![n.as_f64().unwrap_or(f64::NAN)],
            serde_json::Value::Array(a) => a
                .iter()
                .map(|x| x.as_f64().ok_or_else(|| Error::Json(format!("outcome {k} must hold numbers"))))
                .collect::<Result<_>>()?,
            _ => return Err(Error::Json(format!("outcome {k} must be a number or array"))),
        };
        out.insert(k.clone(), vals);
    }
    Ok(out)
}

pub fn run(circuit: &Circuit, mode: RunMode<'_>) -> Result<RunResult> {
    run_with(circuit, mode, &RunOptions::default())
}

pub fn run_with(circuit: &Circuit, mode: RunMode<'_>, opts: &RunOptions) -> Result<RunResult> {
    let mut state = circuit.initial_state.prepare(circuit.n_modes)?;
    let mut registers = BTreeMap::new();
    let mut records = Vec::new();
    let mut rng = match mode {
        RunMode::Sampled { seed, shot } => Some(measurement::rng_stream(seed, shot)),
        RunMode::Posterior(_) => None,
    };
    for (index, inst) in circuit.instructions.iter().enumerate() {
        let step = match inst {
            Instruction::Channel(g) | Instruction::ConditionalChannel(g) => g
                .instantiate(&registers)
                .and_then(|a| apply_action(&state, &a, opts.psd_tolerance)),
            Instruction::Measure(m) => measure(&state, m, mode, rng.as_mut()).map(|(s, rec, value)| {
                registers.insert(m.register.clone(), value);
                if let Some(r) = rec {
                    records.push(r);
                }
                s
            }),
        };
        state = step.map_err(|e| Error::AtInstruction {
            index,
            source: Box::new(e),
        })?;
    }
    let (seed, shot_index) = match mode {
        RunMode::Sampled { seed, shot } => (Some(seed), Some(shot)),
        RunMode::Posterior(_) => (None, None),
    };
    Ok(RunResult {
        schema: "v1",
        shot_index,
        seed,
        total_log_weight: state.log_weight(),
        final_state: state,
        registers,
        records,
    })
}

fn apply_action(state: &GaussianState, action: &Action, tol: f64) -> Result<GaussianState> {
    match action {
        Action::Named(c) => c.local()?.apply_with(state, tol),
        Action::Local(l) => l.apply_with(state, tol),
        Action::Clone(mode) => {
            let extended = state.tensor(&GaussianState::vacuum(1)?);
            let new = state.n();
            let amplified = NamedChannel::Amplifier { mode: *mode, gain: 2.0 }
                .local()?
                .apply_with(&extended, tol)?;
            NamedChannel::Beamsplitter {
                mode_i: *mode,
                mode_j: new,
                theta: FRAC_PI_4,
                phi: 0.0,
            }
            .local()?
            .apply_with(&amplified, tol)
        }
    }
}

type Measured = (GaussianState, Option<MeasurementRecord>, Vec<f64>);

fn supplied<'a>(outcomes: &'a Outcomes, m: &Measurement) -> Result<Option<&'a Vec<f64>>> {
    let v = outcomes.get(&m.register);
    if let Some(v) = v {
        if v.len() != m.register_len() {
            return Err(Error::invalid(format!(
                "outcome for register {} needs {} values, got {}",
                m.register,
                m.register_len(),
                v.len()
            )));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid(format!("outcome for register {} is not finite", m.register)));
        }
    } else if m.needs_outcome() {
        return Err(Error::invalid(format!("no outcome supplied for register {}", m.register)));
    }
    Ok(v)
}

fn click(v: f64, register: &str) -> Result<bool> {
    match v {
        x if x == 0.0 => Ok(false),
        x if x == 1.0 => Ok(true),
        _ => Err(Error::invalid(format!(
            "photodetection outcome for {register} must be 0 (no click) or 1 (click)"
        ))),
    }
}

fn measure(
    state: &GaussianState,
    m: &Measurement,
    mode: RunMode<'_>,
    rng: Option<&mut rand_chacha::ChaCha20Rng>,
) -> Result<Measured> {
    let no_click = |state: &GaussianState| -> Result<Measured> {
        let (s, r) = measurement::condition_no_absorption(state, m.modes[0])?;
        Ok((s, Some(r), vec![0.0]))
    };
    match (&m.kind, mode) {
        (MeasureKind::Absorption, RunMode::Posterior(out)) => {
            if let Some(v) = supplied(out, m)? {
                if !click(v[0], &m.register)? {
                    return Err(Error::invalid(format!("absorb register {} can only hold 1", m.register)));
                }
            }
            Err(measurement::condition_absorption(state, m.modes[0]))
        }
        (MeasureKind::Absorption, RunMode::Sampled { .. }) => Err(measurement::condition_absorption(state, m.modes[0])),
        (MeasureKind::VacuumProjection, RunMode::Posterior(out)) => {
            if let Some(v) = supplied(out, m)? {
                if click(v[0], &m.register)? {
                    return Err(Error::invalid(format!("vacuumproj register {} can only hold 0", m.register)));
                }
            }
            no_click(state)
        }
        (MeasureKind::VacuumProjection, RunMode::Sampled { .. }) => no_click(state),
        (MeasureKind::Photodetection, RunMode::Posterior(out)) => {
            let v = supplied(out, m)?.expect("required");
            if click(v[0], &m.register)? {
                Err(measurement::condition_absorption(state, m.modes[0]))
            } else {
                no_click(state)
            }
        }
        (MeasureKind::Photodetection, RunMode::Sampled { .. }) => {
            let rng = rng.expect("sampled runs carry a generator");
            let (s, r) = measurement::sample_photodetection(state, m.modes[0], rng)?;
            Ok((s, Some(r), vec![0.0]))
        }
        (_, run_mode) => {
            let spec = m.spec()?.expect("Gaussian measurement");
            let outcome = match run_mode {
                RunMode::Posterior(out) => supplied(out, m)?.expect("required").clone(),
                RunMode::Sampled { .. } => {
                    measurement::draw_outcome(state, &spec, rng.expect("sampled runs carry a generator"))?
                }
            };
            let (s, r) = measurement::condition(state, &spec, &outcome)?;
            Ok((s, Some(r), outcome))
        }
    }
}

/// `n_shots` sampled runs, shot `k` using stream `k` of `base_seed`. Shots run in parallel;
/// the result order and contents do not depend on scheduling.
pub fn run_shots(circuit: &Circuit, n_shots: u64, base_seed: u64) -> Result<Vec<RunResult>> {
    run_shots_with(circuit, n_shots, base_seed, &RunOptions::default())
}

pub fn run_shots_with(circuit: &Circuit, n_shots: u64, base_seed: u64, opts: &RunOptions) -> Result<Vec<RunResult>> {
    (0..n_shots)
        .into_par_iter()
        .map(|shot| run_with(circuit, RunMode::Sampled { seed: base_seed, shot }, opts))
        .collect()
}

/// Same as [`run_shots`] on the calling thread.
pub fn run_shots_serial(circuit: &Circuit, n_shots: u64, base_seed: u64) -> Result<Vec<RunResult>> {
    (0..n_shots)
        .map(|shot| run(circuit, RunMode::Sampled { seed: base_seed, shot }))
        .collect()
}
