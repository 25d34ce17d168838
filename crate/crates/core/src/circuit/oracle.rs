//! Runs a circuit in the Fock-space oracle, for cross-checking the engine on small systems.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_4;

use super::{Action, Circuit, InitialState, Instruction, MeasureKind, Outcomes};
use crate::channel::NamedChannel;
use crate::error::{Error, Result};
use crate::fock::{FockDensity, FockState, OracleState, Photodetection, Preparation};

#[derive(Debug, Clone)]
pub struct OracleRun {
    pub state: OracleState,
    /// Sum of log probabilities (densities, for heterodyne) of the conditioned outcomes.
    pub log_weight: f64,
    pub registers: BTreeMap<String, Vec<f64>>,
}

fn prepare(circuit: &Circuit, cutoff: usize) -> Result<OracleState> {
    let n = circuit.n_modes;
    Ok(match circuit.initial_state {
        InitialState::Vacuum => OracleState::Pure(FockState::vacuum(n, cutoff)?),
        InitialState::Coherent { mode, q, p } => {
            OracleState::from_gaussian(Preparation::Coherent { modes: n, mode, q, p }, cutoff)?
        }
        InitialState::Squeezed { mode, r } => {
            OracleState::from_gaussian(Preparation::Squeezed { modes: n, mode, r }, cutoff)?
        }
        InitialState::Thermal { mode, nbar } => OracleState::Mixed(FockDensity::thermal(n, mode, nbar, cutoff)?),
        InitialState::TwoModeSqueezed { mode_i, mode_j, r } => {
            if n == 2 {
                OracleState::from_gaussian(Preparation::TwoModeSqueezed { r }, cutoff)?
            } else {
                OracleState::Pure(FockState::vacuum(n, cutoff)?).apply(&NamedChannel::TwoModeSqueezer {
                    mode_i,
                    mode_j,
                    r,
                })?
            }
        }
        InitialState::Explicit(_) => {
            return Err(Error::Unsupported("explicit initial states have no number-basis preparation".into()))
        }
    })
}

/// Executes `circuit` in the truncated number basis with posterior outcomes. Supports the named
/// channels, cloning, heterodyne and the photodetection kinds, including the absorption branch
/// the Gaussian engine refuses.
pub fn run_oracle(circuit: &Circuit, outcomes: &Outcomes, cutoff: usize) -> Result<OracleRun> {
    let mut state = prepare(circuit, cutoff)?;
    let mut registers = BTreeMap::new();
    let mut log_weight = 0.0;
    for (index, inst) in circuit.instructions.iter().enumerate() {
        let at = |e: Error| Error::AtInstruction {
            index,
            source: Box::new(e),
        };
        match inst {
            Instruction::Channel(g) | Instruction::ConditionalChannel(g) => {
                state = match g.instantiate(&registers).map_err(at)? {
                    Action::Named(c) => state.apply(&c),
                    Action::Clone(mode) => state.extend_vacuum(1).and_then(|s| {
                        let new = s.modes() - 1;
                        s.apply(&NamedChannel::Amplifier { mode, gain: 2.0 })?
                            .apply(&NamedChannel::Beamsplitter {
                                mode_i: mode,
                                mode_j: new,
                                theta: FRAC_PI_4,
                                phi: 0.0,
                            })
                    }),
                    Action::Local(_) => Err(Error::Unsupported("raw channels".into())),
                }
                .map_err(at)?;
            }
            Instruction::Measure(m) => {
                let given = outcomes.get(&m.register);
                let (next, lw, value) = match &m.kind {
                    MeasureKind::VacuumProjection => {
                        let c = state.condition_photodetection(m.modes[0], Photodetection::NoAbsorption);
                        c.map(|c| (c.state, c.probability.ln(), vec![0.0]))
                    }
                    MeasureKind::Absorption => {
                        let c = state.condition_photodetection(m.modes[0], Photodetection::Absorption);
                        c.map(|c| (c.state, c.probability.ln(), vec![1.0]))
                    }
                    MeasureKind::Photodetection => match given.map(|v| v.as_slice()) {
                        Some([x]) if *x == 0.0 || *x == 1.0 => {
                            let branch = if *x == 0.0 {
                                Photodetection::NoAbsorption
                            } else {
                                Photodetection::Absorption
                            };
                            state
                                .condition_photodetection(m.modes[0], branch)
                                .map(|c| (c.state, c.probability.ln(), vec![*x]))
                        }
                        _ => Err(Error::invalid(format!("photodetection outcome for {} must be 0 or 1", m.register))),
                    },
                    MeasureKind::Heterodyne => {
                        let k = m.modes.len();
                        match given {
                            Some(v) if v.len() == 2 * k => {
                                // Project the highest-numbered modes first so lower indices stay put.
                                let mut order: Vec<usize> = (0..k).collect();
                                order.sort_by(|a, b| m.modes[*b].cmp(&m.modes[*a]));
                                let mut s = state.clone();
                                let mut lw = 0.0;
                                let mut failed = None;
                                for j in order {
                                    match s.condition_coherent(m.modes[j], v[j], v[k + j]) {
                                        Ok(c) => {
                                            lw += c.probability.ln();
                                            s = c.state;
                                        }
                                        Err(e) => {
                                            failed = Some(e);
                                            break;
                                        }
                                    }
                                }
                                match failed {
                                    Some(e) => Err(e),
                                    None => Ok((s, lw, v.clone())),
                                }
                            }
                            _ => Err(Error::invalid(format!(
                                "heterodyne outcome for {} needs {} values",
                                m.register,
                                2 * k
                            ))),
                        }
                    }
                    other => Err(Error::Unsupported(format!("{other:?} measurements"))),
                }
                .map_err(at)?;
                state = next;
                log_weight += lw;
                registers.insert(m.register.clone(), value);
            }
        }
    }
    Ok(OracleRun {
        state,
        log_weight,
        registers,
    })
}
