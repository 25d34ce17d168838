//! Circuit intermediate representation, the `.gcirc` text format and the execution engine.
//!
//! Modes are 0-based here and 1-based in the text format. Measurements remove the measured
//! modes and the survivors are renumbered in order, so a mode index always refers to the state
//! as it exists at that instruction. Clone instructions append their second copy as a new last
//! mode.

mod engine;
mod oracle;
mod parser;
mod serialize;

pub use engine::{outcomes_from_json, run, run_shots, run_shots_serial, run_shots_with, run_with, Outcomes, RunMode, RunOptions, RunResult};
pub use oracle::{run_oracle, OracleRun};
pub use parser::parse;
pub use serialize::serialize;

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::DMatrix;

use crate::channel::{GaussianChannel, LocalChannel, NamedChannel};
use crate::error::{Error, Result};
use crate::measurement::{MeasurementSpec, Quadrature};
use crate::phase_space::GaussianState;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParseErrorKind {
    /// Malformed text: unexpected token, unknown keyword or parameter, bad literal.
    Syntax,
    /// Well-formed text that references something invalid: an unknown mode or register, a
    /// register read before it is written, an unphysical constant parameter.
    Semantic,
}

/// Parse or static-validation failure. `line` and `column` are 1-based; both are 0 when the
/// circuit was built in code rather than parsed.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{line}:{column}: {} error: {message}", match .kind { ParseErrorKind::Syntax => "syntax", ParseErrorKind::Semantic => "semantic" })]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl ParseError {
    pub(crate) fn syntax(pos: Pos, message: impl Into<String>) -> Self {
        ParseError {
            kind: ParseErrorKind::Syntax,
            line: pos.line,
            column: pos.column,
            message: message.into(),
        }
    }

    pub(crate) fn semantic(pos: Pos, message: impl Into<String>) -> Self {
        ParseError {
            kind: ParseErrorKind::Semantic,
            line: pos.line,
            column: pos.column,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub(crate) struct Pos {
    pub line: usize,
    pub column: usize,
}

/// Component `index` of a classical register.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct RegRef {
    pub register: String,
    pub index: usize,
}

/// `constant + Σ coeff · register[index]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Affine {
    pub constant: f64,
    pub terms: Vec<(f64, RegRef)>,
}

impl Affine {
    pub fn constant(value: f64) -> Self {
        Affine {
            constant: value,
            terms: Vec::new(),
        }
    }

    pub fn is_constant(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn eval(&self, registers: &BTreeMap<String, Vec<f64>>) -> Result<f64> {
        let mut v = self.constant;
        for (c, r) in &self.terms {
            let x = registers
                .get(&r.register)
                .and_then(|vals| vals.get(r.index))
                .ok_or_else(|| Error::invalid(format!("register {}[{}] has no value", r.register, r.index)))?;
            v += c * x;
        }
        Ok(v)
    }
}

impl From<f64> for Affine {
    fn from(v: f64) -> Self {
        Affine::constant(v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialState {
    Vacuum,
    Coherent { mode: usize, q: f64, p: f64 },
    Squeezed { mode: usize, r: f64 },
    Thermal { mode: usize, nbar: f64 },
    TwoModeSqueezed { mode_i: usize, mode_j: usize, r: f64 },
    Explicit(GaussianState),
}

impl InitialState {
    fn modes(&self) -> Vec<usize> {
        match *self {
            InitialState::Coherent { mode, .. } | InitialState::Squeezed { mode, .. } | InitialState::Thermal { mode, .. } => {
                vec![mode]
            }
            InitialState::TwoModeSqueezed { mode_i, mode_j, .. } => vec![mode_i, mode_j],
            InitialState::Vacuum | InitialState::Explicit(_) => Vec::new(),
        }
    }

    /// The `n`-mode state: the named preparation on its modes, vacuum elsewhere.
    pub fn prepare(&self, n: usize) -> Result<GaussianState> {
        match self {
            InitialState::Vacuum => GaussianState::vacuum(n),
            InitialState::Coherent { mode, q, p } => GaussianState::coherent(n, *mode, *q, *p),
            InitialState::Squeezed { mode, r } => GaussianState::squeezed_vacuum(n, *mode, *r),
            InitialState::Thermal { mode, nbar } => GaussianState::thermal(n, *mode, *nbar),
            InitialState::TwoModeSqueezed { mode_i, mode_j, r } => NamedChannel::TwoModeSqueezer {
                mode_i: *mode_i,
                mode_j: *mode_j,
                r: *r,
            }
            .local()?
            .apply(&GaussianState::vacuum(n)?),
            InitialState::Explicit(s) => {
                if s.n() != n {
                    return Err(Error::invalid(format!("explicit state has {} modes, circuit has {n}", s.n())));
                }
                Ok(s.clone())
            }
        }
    }
}

/// A channel whose real parameters may depend on earlier measurement outcomes.
#[derive(Debug, Clone, PartialEq)]
pub enum Gate {
    Displacement { mode: usize, q: Affine, p: Affine },
    Rotation { mode: usize, theta: Affine },
    Beamsplitter { mode_i: usize, mode_j: usize, theta: Affine, phi: Affine },
    Squeezer { mode: usize, r: Affine, phi: Affine },
    TwoModeSqueezer { mode_i: usize, mode_j: usize, r: Affine },
    Loss { mode: usize, eta: Affine },
    Amplifier { mode: usize, gain: Affine },
    ClassicalNoise { mode: usize, qq: Affine, qp: Affine, pp: Affine },
    /// Explicit `(A, G, α)` acting on the listed modes.
    Raw { modes: Vec<usize>, channel: GaussianChannel },
    /// Optimal symmetric 1→2 Gaussian cloner; the second copy becomes a new last mode.
    Clone { mode: usize },
}

/// A gate with all parameters evaluated.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Action {
    Named(NamedChannel),
    Local(LocalChannel),
    Clone(usize),
}

impl Gate {
    pub fn modes(&self) -> Vec<usize> {
        use Gate::*;
        match self {
            Displacement { mode, .. }
            | Rotation { mode, .. }
            | Squeezer { mode, .. }
            | Loss { mode, .. }
            | Amplifier { mode, .. }
            | ClassicalNoise { mode, .. }
            | Clone { mode } => vec![*mode],
            Beamsplitter { mode_i, mode_j, .. } | TwoModeSqueezer { mode_i, mode_j, .. } => vec![*mode_i, *mode_j],
            Raw { modes, .. } => modes.clone(),
        }
    }

    pub fn params(&self) -> Vec<&Affine> {
        use Gate::*;
        match self {
            Displacement { q, p, .. } => vec![q, p],
            Rotation { theta, .. } => vec![theta],
            Beamsplitter { theta, phi, .. } => vec![theta, phi],
            Squeezer { r, phi, .. } => vec![r, phi],
            TwoModeSqueezer { r, .. } => vec![r],
            Loss { eta, .. } => vec![eta],
            Amplifier { gain, .. } => vec![gain],
            ClassicalNoise { qq, qp, pp, .. } => vec![qq, qp, pp],
            Raw { .. } | Clone { .. } => Vec::new(),
        }
    }

    pub fn is_conditional(&self) -> bool {
        self.params().iter().any(|a| !a.is_constant())
    }

    fn mode_delta(&self) -> isize {
        match self {
            Gate::Clone { .. } => 1,
            _ => 0,
        }
    }

    pub(crate) fn instantiate(&self, registers: &BTreeMap<String, Vec<f64>>) -> Result<Action> {
        use Gate::*;
        let e = |a: &Affine| a.eval(registers);
        let named = match self {
            Displacement { mode, q, p } => NamedChannel::Displacement { mode: *mode, q: e(q)?, p: e(p)? },
            Rotation { mode, theta } => NamedChannel::Rotation { mode: *mode, theta: e(theta)? },
            Beamsplitter { mode_i, mode_j, theta, phi } => NamedChannel::Beamsplitter {
                mode_i: *mode_i,
                mode_j: *mode_j,
                theta: e(theta)?,
                phi: e(phi)?,
            },
            Squeezer { mode, r, phi } => NamedChannel::Squeezer { mode: *mode, r: e(r)?, phi: e(phi)? },
            TwoModeSqueezer { mode_i, mode_j, r } => NamedChannel::TwoModeSqueezer {
                mode_i: *mode_i,
                mode_j: *mode_j,
                r: e(r)?,
            },
            Loss { mode, eta } => NamedChannel::Loss { mode: *mode, eta: e(eta)? },
            Amplifier { mode, gain } => NamedChannel::Amplifier { mode: *mode, gain: e(gain)? },
            ClassicalNoise { mode, qq, qp, pp } => NamedChannel::ClassicalNoise {
                mode: *mode,
                qq: e(qq)?,
                qp: e(qp)?,
                pp: e(pp)?,
            },
            Raw { modes, channel } => return Ok(Action::Local(LocalChannel::new(modes.clone(), channel.clone())?)),
            Clone { mode } => return Ok(Action::Clone(*mode)),
        };
        Ok(Action::Named(named))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MeasureKind {
    Heterodyne,
    /// Finite-squeezing homodyne; the register holds the measured quadrature only.
    Homodyne { quadrature: Quadrature, squeezing: f64 },
    /// Projection of two modes onto displaced two-mode squeezed states of parameter `r`.
    Epr { r: f64 },
    /// General-dyne with an explicit measurement covariance.
    Dyne { cov: DMatrix<f64> },
    /// "No absorption" branch of a threshold detector, post-selected.
    VacuumProjection,
    /// Absorption branch of a threshold detector. Always rejected by the Gaussian engine.
    Absorption,
    /// Threshold detector whose branch is sampled or supplied (0 = no click, 1 = click).
    Photodetection,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    pub kind: MeasureKind,
    pub modes: Vec<usize>,
    pub register: String,
}

impl Measurement {
    /// Number of values written to the register.
    pub fn register_len(&self) -> usize {
        match self.kind {
            MeasureKind::Heterodyne | MeasureKind::Dyne { .. } => 2 * self.modes.len(),
            MeasureKind::Epr { .. } => 4,
            _ => 1,
        }
    }

    /// Whether posterior runs must be told the outcome.
    pub fn needs_outcome(&self) -> bool {
        !matches!(self.kind, MeasureKind::VacuumProjection | MeasureKind::Absorption)
    }

    /// Gaussian measurement spec, or `None` for the photodetection kinds.
    pub(crate) fn spec(&self) -> Result<Option<MeasurementSpec>> {
        let m = &self.modes;
        let single = || -> Result<usize> {
            if m.len() != 1 {
                return Err(Error::invalid("measurement takes exactly one mode"));
            }
            Ok(m[0])
        };
        Ok(Some(match &self.kind {
            MeasureKind::Heterodyne => MeasurementSpec::heterodyne(m.clone())?,
            MeasureKind::Homodyne { quadrature, squeezing } => MeasurementSpec::homodyne(single()?, *quadrature, *squeezing)?,
            MeasureKind::Epr { r } => {
                if m.len() != 2 {
                    return Err(Error::invalid("epr measurement takes exactly two modes"));
                }
                MeasurementSpec::epr(m[0], m[1], *r)?
            }
            MeasureKind::Dyne { cov } => MeasurementSpec::general_dyne(m.clone(), cov.clone())?,
            MeasureKind::VacuumProjection => MeasurementSpec::vacuum_projection(single()?)?,
            MeasureKind::Absorption | MeasureKind::Photodetection => {
                single()?;
                return Ok(None);
            }
        }))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Instruction {
    Channel(Gate),
    /// A channel with at least one parameter computed from measurement records.
    ConditionalChannel(Gate),
    Measure(Measurement),
}

impl Instruction {
    /// Wraps a gate, choosing the conditional variant when any parameter reads a register.
    pub fn gate(g: Gate) -> Self {
        if g.is_conditional() {
            Instruction::ConditionalChannel(g)
        } else {
            Instruction::Channel(g)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    pub n_modes: usize,
    pub initial_state: InitialState,
    pub instructions: Vec<Instruction>,
}

impl Circuit {
    pub fn new(n_modes: usize) -> Self {
        Circuit {
            n_modes,
            initial_state: InitialState::Vacuum,
            instructions: Vec::new(),
        }
    }

    /// Registers in the order they are written, with their lengths.
    pub fn registers(&self) -> Vec<(String, usize)> {
        self.instructions
            .iter()
            .filter_map(|i| match i {
                Instruction::Measure(m) => Some((m.register.clone(), m.register_len())),
                _ => None,
            })
            .collect()
    }

    /// Mode count after the last instruction.
    pub fn final_modes(&self) -> usize {
        let mut n = self.n_modes as isize;
        for i in &self.instructions {
            match i {
                Instruction::Channel(g) | Instruction::ConditionalChannel(g) => n += g.mode_delta(),
                Instruction::Measure(m) => n -= m.modes.len() as isize,
            }
        }
        n.max(0) as usize
    }

    /// Forward scan checking every mode and register reference. A circuit that passes never
    /// fails at run time on a mode or register lookup.
    pub fn validate(&self) -> std::result::Result<(), ParseError> {
        validate(self, None)
    }
}

fn check_modes(n: usize, modes: &[usize], pos: Pos) -> std::result::Result<(), ParseError> {
    for (k, &m) in modes.iter().enumerate() {
        if m >= n {
            return Err(ParseError::semantic(
                pos,
                format!("unknown mode {} (the state has {n} modes here)", m + 1),
            ));
        }
        if modes[..k].contains(&m) {
            return Err(ParseError::semantic(pos, format!("mode {} listed twice", m + 1)));
        }
    }
    Ok(())
}

/// Static validation. `positions` maps instructions to source positions when known.
pub(crate) fn validate(circuit: &Circuit, positions: Option<&[Pos]>) -> std::result::Result<(), ParseError> {
    let pos_of = |k: Option<usize>| match (positions, k) {
        (Some(p), Some(k)) => p[k + 1],
        (Some(p), None) => p[0],
        _ => Pos::default(),
    };
    let tag = |k: usize, msg: String| {
        if positions.is_some() {
            msg
        } else {
            format!("instruction {k}: {msg}")
        }
    };
    let mut n = circuit.n_modes;
    check_modes(n, &circuit.initial_state.modes(), pos_of(None))?;
    circuit
        .initial_state
        .prepare(n)
        .map_err(|e| ParseError::semantic(pos_of(None), format!("invalid initial state: {e}")))?;

    let mut written: BTreeMap<&str, usize> = BTreeMap::new();
    for (k, inst) in circuit.instructions.iter().enumerate() {
        let pos = pos_of(Some(k));
        match inst {
            Instruction::Channel(g) | Instruction::ConditionalChannel(g) => {
                check_modes(n, &g.modes(), pos).map_err(|mut e| {
                    e.message = tag(k, e.message);
                    e
                })?;
                for a in g.params() {
                    for (_, r) in &a.terms {
                        match written.get(r.register.as_str()) {
                            None => {
                                return Err(ParseError::semantic(
                                    pos,
                                    tag(k, format!("register {} is used before it is written", r.register)),
                                ))
                            }
                            Some(&len) if r.index >= len => {
                                return Err(ParseError::semantic(
                                    pos,
                                    tag(k, format!("register {} has {len} components, index {} is out of range", r.register, r.index)),
                                ))
                            }
                            _ => {}
                        }
                    }
                }
                let conditional = g.is_conditional();
                if matches!(inst, Instruction::Channel(_)) == conditional {
                    return Err(ParseError::semantic(
                        pos,
                        tag(k, "conditional flag does not match the gate's parameters".into()),
                    ));
                }
                if !conditional {
                    let checked = g.instantiate(&BTreeMap::new()).and_then(|a| match a {
                        Action::Named(c) => c.local().map(|_| ()),
                        Action::Local(l) => {
                            let rep = l.validate_cp();
                            if rep.passes {
                                Ok(())
                            } else {
                                Err(Error::RejectedChannel {
                                    min_eigenvalue: rep.min_eigenvalue,
                                })
                            }
                        }
                        Action::Clone(_) => Ok(()),
                    });
                    checked.map_err(|e| ParseError::semantic(pos, tag(k, e.to_string())))?;
                }
                n = (n as isize + g.mode_delta()) as usize;
            }
            Instruction::Measure(m) => {
                check_modes(n, &m.modes, pos).map_err(|mut e| {
                    e.message = tag(k, e.message);
                    e
                })?;
                m.spec().map_err(|e| ParseError::semantic(pos, tag(k, e.to_string())))?;
                if written.contains_key(m.register.as_str()) {
                    return Err(ParseError::semantic(
                        pos,
                        tag(k, format!("register {} is written twice", m.register)),
                    ));
                }
                written.insert(&m.register, m.register_len());
                n -= m.modes.len();
            }
        }
    }
    Ok(())
}

impl fmt::Display for Circuit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&serialize(self))
    }
}

impl std::str::FromStr for Circuit {
    type Err = ParseError;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        parse(s)
    }
}
