//! Canonical `.gcirc` formatting. Floats use the shortest representation that parses back to
//! the same bits, so `parse(serialize(c)) == c`.

use std::fmt::Write;

use nalgebra::{DMatrix, DVector};

use super::{Affine, Circuit, Gate, InitialState, Instruction, MeasureKind};
use crate::measurement::Quadrature;

fn num(v: f64) -> String {
    format!("{v:?}")
}

fn vector(v: &DVector<f64>) -> String {
    let parts: Vec<String> = v.iter().map(|x| num(*x)).collect();
    format!("[{}]", parts.join(", "))
}

fn matrix(m: &DMatrix<f64>) -> String {
    let rows: Vec<String> = (0..m.nrows())
        .map(|i| {
            let parts: Vec<String> = (0..m.ncols()).map(|j| num(m[(i, j)])).collect();
            format!("[{}]", parts.join(", "))
        })
        .collect();
    format!("[{}]", rows.join(", "))
}

fn affine(a: &Affine) -> String {
    if a.is_constant() {
        return num(a.constant);
    }
    let mut s = String::from("(");
    let mut first = true;
    if a.constant != 0.0 {
        s.push_str(&num(a.constant));
        first = false;
    }
    for (c, r) in &a.terms {
        let neg = c.is_sign_negative();
        let mag = num(c.abs());
        match (first, neg) {
            (true, false) => {}
            (true, true) => s.push('-'),
            (false, false) => s.push_str(" + "),
            (false, true) => s.push_str(" - "),
        }
        let _ = write!(s, "{mag}*{}[{}]", r.register, r.index);
        first = false;
    }
    s.push(')');
    s
}

fn modes(ms: &[usize]) -> String {
    ms.iter().map(|m| (m + 1).to_string()).collect::<Vec<_>>().join(" ")
}

fn gate(g: &Gate) -> String {
    use Gate::*;
    let m = modes(&g.modes());
    match g {
        Displacement { q, p, .. } => format!("disp {m} q={} p={}", affine(q), affine(p)),
        Rotation { theta, .. } => format!("rot {m} theta={}", affine(theta)),
        Beamsplitter { theta, phi, .. } => format!("bs {m} theta={} phi={}", affine(theta), affine(phi)),
        Squeezer { r, phi, .. } => format!("sq {m} r={} phi={}", affine(r), affine(phi)),
        TwoModeSqueezer { r, .. } => format!("tmss {m} r={}", affine(r)),
        Loss { eta, .. } => format!("loss {m} eta={}", affine(eta)),
        Amplifier { gain, .. } => format!("amp {m} gain={}", affine(gain)),
        ClassicalNoise { qq, qp, pp, .. } => {
            format!("noise {m} qq={} qp={} pp={}", affine(qq), affine(qp), affine(pp))
        }
        Raw { channel, .. } => format!(
            "raw {m} A={} G={} alpha={}",
            matrix(channel.a_matrix()),
            matrix(channel.g_matrix()),
            vector(channel.alpha())
        ),
        Clone { .. } => format!("clone {m}"),
    }
}

/// Formats a circuit in canonical form: one statement per line, every parameter explicit.
pub fn serialize(c: &Circuit) -> String {
    let mut out = format!("modes {};\n", c.n_modes);
    let init = match &c.initial_state {
        InitialState::Vacuum => None,
        InitialState::Coherent { mode, q, p } => Some(format!("coherent {} q={} p={}", mode + 1, num(*q), num(*p))),
        InitialState::Squeezed { mode, r } => Some(format!("squeezed {} r={}", mode + 1, num(*r))),
        InitialState::Thermal { mode, nbar } => Some(format!("thermal {} nbar={}", mode + 1, num(*nbar))),
        InitialState::TwoModeSqueezed { mode_i, mode_j, r } => {
            Some(format!("tmss {} {} r={}", mode_i + 1, mode_j + 1, num(*r)))
        }
        InitialState::Explicit(s) => Some(format!("explicit xi={} gamma={}", vector(s.xi()), matrix(s.gamma()))),
    };
    if let Some(i) = init {
        let _ = writeln!(out, "init {i};");
    }
    for inst in &c.instructions {
        let line = match inst {
            Instruction::Channel(g) | Instruction::ConditionalChannel(g) => gate(g),
            Instruction::Measure(m) => {
                let ms = modes(&m.modes);
                let kind = match &m.kind {
                    MeasureKind::Heterodyne => format!("het {ms}"),
                    MeasureKind::Homodyne { quadrature, squeezing } => {
                        let q = match quadrature {
                            Quadrature::Q => "q",
                            Quadrature::P => "p",
                        };
                        format!("hom {ms} quad={q} s={}", num(*squeezing))
                    }
                    MeasureKind::Epr { r } => format!("epr {ms} r={}", num(*r)),
                    MeasureKind::Dyne { cov } => format!("dyne {ms} cov={}", matrix(cov)),
                    MeasureKind::VacuumProjection => format!("vacuumproj {ms}"),
                    MeasureKind::Absorption => format!("absorb {ms}"),
                    MeasureKind::Photodetection => format!("photodetect {ms}"),
                };
                format!("measure {kind} -> {}", m.register)
            }
        };
        let _ = writeln!(out, "{line};");
    }
    out
}
