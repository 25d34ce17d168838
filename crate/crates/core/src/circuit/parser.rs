//! Hand-written lexer and recursive-descent parser for `.gcirc` text.

use nalgebra::{DMatrix, DVector};

use super::{
    validate, Affine, Circuit, Gate, InitialState, Instruction, MeasureKind, Measurement, ParseError, Pos, RegRef,
};
use crate::channel::GaussianChannel;
use crate::measurement::{Quadrature, HOMODYNE_DEFAULT_SQUEEZING};
use crate::phase_space::GaussianState;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    /// Numeric literal with its source text (integers are recognised from the text).
    Num(f64, String),
    Semi,
    Eq,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Star,
    Plus,
    Minus,
    Arrow,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("'{s}'"),
            Tok::Num(_, s) => format!("number {s}"),
            Tok::Semi => "';'".into(),
            Tok::Eq => "'='".into(),
            Tok::LParen => "'('".into(),
            Tok::RParen => "')'".into(),
            Tok::LBracket => "'['".into(),
            Tok::RBracket => "']'".into(),
            Tok::Comma => "','".into(),
            Tok::Star => "'*'".into(),
            Tok::Plus => "'+'".into(),
            Tok::Minus => "'-'".into(),
            Tok::Arrow => "'->'".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

fn lex(text: &str) -> Result<Vec<(Tok, Pos)>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0, 1, 1);
    while i < chars.len() {
        let c = chars[i];
        let pos = Pos { line, column: col };
        let take = |n: usize, i: &mut usize, col: &mut usize| {
            *i += n;
            *col += n;
        };
        match c {
            '\n' => {
                i += 1;
                line += 1;
                col = 1;
            }
            c if c.is_whitespace() => take(1, &mut i, &mut col),
            '#' => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
            }
            ';' | '=' | '(' | ')' | '[' | ']' | ',' | '*' | '+' => {
                let t = match c {
                    ';' => Tok::Semi,
                    '=' => Tok::Eq,
                    '(' => Tok::LParen,
                    ')' => Tok::RParen,
                    '[' => Tok::LBracket,
                    ']' => Tok::RBracket,
                    ',' => Tok::Comma,
                    '*' => Tok::Star,
                    _ => Tok::Plus,
                };
                out.push((t, pos));
                take(1, &mut i, &mut col);
            }
            '-' => {
                if chars.get(i + 1) == Some(&'>') {
                    out.push((Tok::Arrow, pos));
                    take(2, &mut i, &mut col);
                } else {
                    out.push((Tok::Minus, pos));
                    take(1, &mut i, &mut col);
                }
            }
            c if c.is_ascii_digit() || c == '.' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                    i += 1;
                }
                if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                    let mut j = i + 1;
                    if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                        j += 1;
                    }
                    if j < chars.len() && chars[j].is_ascii_digit() {
                        i = j;
                        while i < chars.len() && chars[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let s: String = chars[start..i].iter().collect();
                col += i - start;
                let v: f64 = s
                    .parse()
                    .map_err(|_| ParseError::syntax(pos, format!("malformed number '{s}'")))?;
                out.push((Tok::Num(v, s), pos));
            }
            c if c.is_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                col += i - start;
                out.push((Tok::Ident(chars[start..i].iter().collect()), pos));
            }
            other => return Err(ParseError::syntax(pos, format!("unexpected character '{other}'"))),
        }
    }
    out.push((Tok::Eof, Pos { line, column: col }));
    Ok(out)
}

/// Right-hand side of `key=value`.
#[derive(Debug, Clone)]
enum Value {
    Expr(Affine),
    Word(String),
    Vector(Vec<f64>),
    Matrix(Vec<Vec<f64>>),
}

struct Args {
    modes: Vec<(usize, Pos)>,
    params: Vec<(String, Value, Pos)>,
}

impl Args {
    fn take(&mut self, key: &str) -> Option<(Value, Pos)> {
        let k = self.params.iter().position(|(n, _, _)| n == key)?;
        let (_, v, p) = self.params.remove(k);
        Some((v, p))
    }

    fn finish(&self) -> Result<(), ParseError> {
        match self.params.first() {
            Some((k, _, p)) => Err(ParseError::syntax(*p, format!("unexpected parameter '{k}'"))),
            None => Ok(()),
        }
    }

    fn expr(&mut self, key: &str, default: Option<f64>, at: Pos) -> Result<Affine, ParseError> {
        match self.take(key) {
            Some((Value::Expr(a), _)) => Ok(a),
            Some((_, p)) => Err(ParseError::syntax(p, format!("parameter '{key}' expects a number or (expression)"))),
            None => default
                .map(Affine::constant)
                .ok_or_else(|| ParseError::syntax(at, format!("missing parameter '{key}'"))),
        }
    }

    fn number(&mut self, key: &str, default: Option<f64>, at: Pos) -> Result<f64, ParseError> {
        let a = self.expr(key, default, at)?;
        if !a.is_constant() {
            return Err(ParseError::syntax(at, format!("parameter '{key}' must be a constant")));
        }
        Ok(a.constant)
    }

    fn vector(&mut self, key: &str) -> Result<Option<Vec<f64>>, ParseError> {
        match self.take(key) {
            None => Ok(None),
            Some((Value::Vector(v), _)) => Ok(Some(v)),
            Some((_, p)) => Err(ParseError::syntax(p, format!("parameter '{key}' expects a vector [..]"))),
        }
    }

    fn matrix(&mut self, key: &str, at: Pos) -> Result<DMatrix<f64>, ParseError> {
        match self.take(key) {
            Some((Value::Matrix(rows), p)) => {
                let r = rows.len();
                let c = rows.first().map_or(0, |x| x.len());
                if rows.iter().any(|x| x.len() != c) {
                    return Err(ParseError::syntax(p, format!("rows of '{key}' have different lengths")));
                }
                Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
            }
            Some((_, p)) => Err(ParseError::syntax(p, format!("parameter '{key}' expects a matrix [[..], ..]"))),
            None => Err(ParseError::syntax(at, format!("missing parameter '{key}'"))),
        }
    }

    fn word(&mut self, key: &str) -> Result<Option<(String, Pos)>, ParseError> {
        match self.take(key) {
            None => Ok(None),
            Some((Value::Word(w), p)) => Ok(Some((w, p))),
            Some((_, p)) => Err(ParseError::syntax(p, format!("parameter '{key}' expects a word"))),
        }
    }

    fn mode_list(&self, at: Pos, count: Option<usize>) -> Result<Vec<usize>, ParseError> {
        if let Some(c) = count {
            if self.modes.len() != c {
                return Err(ParseError::syntax(
                    at,
                    format!("expected {c} mode{}, found {}", if c == 1 { "" } else { "s" }, self.modes.len()),
                ));
            }
        } else if self.modes.is_empty() {
            return Err(ParseError::syntax(at, "expected at least one mode"));
        }
        Ok(self.modes.iter().map(|(m, _)| *m).collect())
    }
}

struct Parser {
    toks: Vec<(Tok, Pos)>,
    at: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn pos(&self) -> Pos {
        self.toks[self.at].1
    }

    fn bump(&mut self) -> (Tok, Pos) {
        let t = self.toks[self.at].clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn unexpected<T>(&self, expected: &str) -> Result<T, ParseError> {
        Err(ParseError::syntax(
            self.pos(),
            format!("expected {expected}, found {}", self.peek().describe()),
        ))
    }

    fn expect(&mut self, t: Tok, expected: &str) -> Result<Pos, ParseError> {
        if *self.peek() == t {
            Ok(self.bump().1)
        } else {
            self.unexpected(expected)
        }
    }

    fn ident(&mut self, expected: &str) -> Result<(String, Pos), ParseError> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                let p = self.bump().1;
                Ok((s, p))
            }
            _ => self.unexpected(expected),
        }
    }

    fn integer(&mut self) -> Result<(usize, Pos), ParseError> {
        match self.peek().clone() {
            Tok::Num(_, s) if s.bytes().all(|b| b.is_ascii_digit()) => {
                let p = self.bump().1;
                let v = s
                    .parse()
                    .map_err(|_| ParseError::syntax(p, format!("integer '{s}' is too large")))?;
                Ok((v, p))
            }
            _ => self.unexpected("an integer"),
        }
    }

    fn signed_number(&mut self) -> Result<f64, ParseError> {
        let neg = match self.peek() {
            Tok::Minus => {
                self.bump();
                true
            }
            Tok::Plus => {
                self.bump();
                false
            }
            _ => false,
        };
        match self.peek().clone() {
            Tok::Num(v, _) => {
                self.bump();
                Ok(if neg { -v } else { v })
            }
            _ => self.unexpected("a number"),
        }
    }

    fn vector(&mut self) -> Result<Vec<f64>, ParseError> {
        self.expect(Tok::LBracket, "'['")?;
        let mut v = Vec::new();
        if *self.peek() != Tok::RBracket {
            loop {
                v.push(self.signed_number()?);
                if *self.peek() == Tok::Comma {
                    self.bump();
                } else {
                    break;
                }
            }
        }
        self.expect(Tok::RBracket, "',' or ']'")?;
        Ok(v)
    }

    fn vector_or_matrix(&mut self) -> Result<Value, ParseError> {
        if self.toks.get(self.at + 1).map(|t| &t.0) == Some(&Tok::LBracket) {
            self.bump();
            let mut rows = Vec::new();
            loop {
                rows.push(self.vector()?);
                if *self.peek() == Tok::Comma {
                    self.bump();
                } else {
                    break;
                }
            }
            self.expect(Tok::RBracket, "',' or ']'")?;
            Ok(Value::Matrix(rows))
        } else {
            Ok(Value::Vector(self.vector()?))
        }
    }

    /// `name` or `name[index]`.
    fn reg_ref(&mut self) -> Result<RegRef, ParseError> {
        let (register, _) = self.ident("a register name")?;
        let index = if *self.peek() == Tok::LBracket {
            self.bump();
            let (i, _) = self.integer()?;
            self.expect(Tok::RBracket, "']'")?;
            i
        } else {
            0
        };
        Ok(RegRef { register, index })
    }

    /// One signed term of an affine expression, accumulated into `acc`.
    fn term(&mut self, sign: f64, acc: &mut Affine) -> Result<(), ParseError> {
        match self.peek().clone() {
            Tok::Num(v, _) => {
                self.bump();
                if *self.peek() == Tok::Star {
                    self.bump();
                    let r = self.reg_ref()?;
                    acc.terms.push((sign * v, r));
                } else {
                    acc.constant += sign * v;
                }
            }
            Tok::Ident(_) => {
                let r = self.reg_ref()?;
                let mut coeff = sign;
                if *self.peek() == Tok::Star {
                    self.bump();
                    coeff *= self.signed_number()?;
                }
                acc.terms.push((coeff, r));
            }
            _ => return self.unexpected("a number or register"),
        }
        Ok(())
    }

    /// `( [-] term (('+'|'-') term)* )`
    fn affine(&mut self) -> Result<Affine, ParseError> {
        self.expect(Tok::LParen, "'('")?;
        let mut acc = Affine::constant(0.0);
        let mut sign = 1.0;
        match self.peek() {
            Tok::Minus => {
                self.bump();
                sign = -1.0;
            }
            Tok::Plus => {
                self.bump();
            }
            _ => {}
        }
        self.term(sign, &mut acc)?;
        loop {
            match self.peek() {
                Tok::Plus => sign = 1.0,
                Tok::Minus => sign = -1.0,
                Tok::RParen => {
                    self.bump();
                    return Ok(acc);
                }
                _ => return self.unexpected("'+', '-' or ')'"),
            }
            self.bump();
            self.term(sign, &mut acc)?;
        }
    }

    fn value(&mut self) -> Result<Value, ParseError> {
        match self.peek().clone() {
            Tok::LParen => Ok(Value::Expr(self.affine()?)),
            Tok::LBracket => self.vector_or_matrix(),
            Tok::Ident(w) => {
                self.bump();
                Ok(Value::Word(w))
            }
            Tok::Num(..) | Tok::Minus | Tok::Plus => Ok(Value::Expr(Affine::constant(self.signed_number()?))),
            _ => self.unexpected("a value"),
        }
    }

    /// Modes (1-based integers) and `key=value` pairs in any order, up to `stop`.
    fn args(&mut self, stop: &Tok) -> Result<Args, ParseError> {
        let mut args = Args {
            modes: Vec::new(),
            params: Vec::new(),
        };
        loop {
            let t = self.peek().clone();
            if t == *stop {
                return Ok(args);
            }
            match t {
                Tok::Num(..) => {
                    let (m, p) = self.integer()?;
                    if m == 0 {
                        return Err(ParseError::semantic(p, "modes are numbered from 1"));
                    }
                    args.modes.push((m - 1, p));
                }
                Tok::Ident(key) => {
                    let p = self.bump().1;
                    self.expect(Tok::Eq, "'='")?;
                    if args.params.iter().any(|(k, _, _)| *k == key) {
                        return Err(ParseError::syntax(p, format!("parameter '{key}' given twice")));
                    }
                    let v = self.value()?;
                    args.params.push((key, v, p));
                }
                _ => return self.unexpected(&format!("a mode, parameter or {}", stop.describe())),
            }
        }
    }

    fn init(&mut self, n: usize) -> Result<InitialState, ParseError> {
        let (kind, at) = self.ident("an initial-state name")?;
        let mut a = self.args(&Tok::Semi)?;
        let st = match kind.as_str() {
            "vacuum" => {
                a.mode_list(at, Some(0))?;
                InitialState::Vacuum
            }
            "coherent" => {
                let m = a.mode_list(at, Some(1))?;
                InitialState::Coherent {
                    mode: m[0],
                    q: a.number("q", None, at)?,
                    p: a.number("p", None, at)?,
                }
            }
            "squeezed" => {
                let m = a.mode_list(at, Some(1))?;
                InitialState::Squeezed {
                    mode: m[0],
                    r: a.number("r", None, at)?,
                }
            }
            "thermal" => {
                let m = a.mode_list(at, Some(1))?;
                InitialState::Thermal {
                    mode: m[0],
                    nbar: a.number("nbar", None, at)?,
                }
            }
            "tmss" => {
                let m = a.mode_list(at, Some(2))?;
                InitialState::TwoModeSqueezed {
                    mode_i: m[0],
                    mode_j: m[1],
                    r: a.number("r", None, at)?,
                }
            }
            "explicit" => {
                a.mode_list(at, Some(0))?;
                let xi = a
                    .vector("xi")?
                    .ok_or_else(|| ParseError::syntax(at, "missing parameter 'xi'"))?;
                let gamma = a.matrix("gamma", at)?;
                if xi.len() != 2 * n || gamma.shape() != (2 * n, 2 * n) {
                    return Err(ParseError::semantic(
                        at,
                        format!("explicit state must have {} means and a {0}x{0} covariance", 2 * n),
                    ));
                }
                let s = GaussianState::from_moments(DVector::from_vec(xi), gamma)
                    .map_err(|e| ParseError::semantic(at, format!("invalid explicit state: {e}")))?;
                InitialState::Explicit(s)
            }
            other => return Err(ParseError::syntax(at, format!("unknown initial state '{other}'"))),
        };
        a.finish()?;
        Ok(st)
    }

    fn gate(&mut self, name: &str, at: Pos) -> Result<Gate, ParseError> {
        let mut a = self.args(&Tok::Semi)?;
        let one = |a: &Args| a.mode_list(at, Some(1)).map(|m| m[0]);
        let two = |a: &Args| a.mode_list(at, Some(2)).map(|m| (m[0], m[1]));
        let g = match name {
            "disp" => Gate::Displacement {
                mode: one(&a)?,
                q: a.expr("q", Some(0.0), at)?,
                p: a.expr("p", Some(0.0), at)?,
            },
            "rot" => Gate::Rotation {
                mode: one(&a)?,
                theta: a.expr("theta", None, at)?,
            },
            "bs" => {
                let (i, j) = two(&a)?;
                Gate::Beamsplitter {
                    mode_i: i,
                    mode_j: j,
                    theta: a.expr("theta", None, at)?,
                    phi: a.expr("phi", Some(0.0), at)?,
                }
            }
            "sq" => Gate::Squeezer {
                mode: one(&a)?,
                r: a.expr("r", None, at)?,
                phi: a.expr("phi", Some(0.0), at)?,
            },
            "tmss" => {
                let (i, j) = two(&a)?;
                Gate::TwoModeSqueezer {
                    mode_i: i,
                    mode_j: j,
                    r: a.expr("r", None, at)?,
                }
            }
            "loss" => Gate::Loss {
                mode: one(&a)?,
                eta: a.expr("eta", None, at)?,
            },
            "amp" => Gate::Amplifier {
                mode: one(&a)?,
                gain: a.expr("gain", None, at)?,
            },
            "noise" => Gate::ClassicalNoise {
                mode: one(&a)?,
                qq: a.expr("qq", None, at)?,
                qp: a.expr("qp", Some(0.0), at)?,
                pp: a.expr("pp", None, at)?,
            },
            "raw" => {
                let modes = a.mode_list(at, None)?;
                let k = 2 * modes.len();
                let am = a.matrix("A", at)?;
                let gm = a.matrix("G", at)?;
                let alpha = a.vector("alpha")?.unwrap_or_else(|| vec![0.0; k]);
                if am.shape() != (k, k) || gm.shape() != (k, k) || alpha.len() != k {
                    return Err(ParseError::semantic(
                        at,
                        format!("raw channel on {} modes needs {k}x{k} A and G and {k} alpha entries", modes.len()),
                    ));
                }
                let channel = GaussianChannel::new(modes.len(), modes.len(), DVector::from_vec(alpha), am, gm)
                    .map_err(|e| ParseError::semantic(at, e.to_string()))?;
                Gate::Raw { modes, channel }
            }
            "clone" => Gate::Clone { mode: one(&a)? },
            other => return Err(ParseError::syntax(at, format!("unknown instruction '{other}'"))),
        };
        a.finish()?;
        Ok(g)
    }

    fn measure(&mut self, at: Pos) -> Result<Measurement, ParseError> {
        let (kind_name, kpos) = self.ident("a measurement kind")?;
        let mut a = self.args(&Tok::Arrow)?;
        self.expect(Tok::Arrow, "'->'")?;
        let (register, _) = self.ident("a register name")?;
        let (modes, kind) = match kind_name.as_str() {
            "het" => (a.mode_list(at, None)?, MeasureKind::Heterodyne),
            "hom" => {
                let m = a.mode_list(at, Some(1))?;
                let quadrature = match a.word("quad")? {
                    None => Quadrature::Q,
                    Some((w, p)) => match w.as_str() {
                        "q" => Quadrature::Q,
                        "p" => Quadrature::P,
                        _ => return Err(ParseError::syntax(p, format!("quadrature must be q or p, found '{w}'"))),
                    },
                };
                let squeezing = a.number("s", Some(HOMODYNE_DEFAULT_SQUEEZING), at)?;
                (m, MeasureKind::Homodyne { quadrature, squeezing })
            }
            "epr" => (
                a.mode_list(at, Some(2))?,
                MeasureKind::Epr {
                    r: a.number("r", None, at)?,
                },
            ),
            "dyne" => (a.mode_list(at, None)?, MeasureKind::Dyne { cov: a.matrix("cov", at)? }),
            "vacuumproj" => (a.mode_list(at, Some(1))?, MeasureKind::VacuumProjection),
            "absorb" => (a.mode_list(at, Some(1))?, MeasureKind::Absorption),
            "photodetect" => (a.mode_list(at, Some(1))?, MeasureKind::Photodetection),
            other => return Err(ParseError::syntax(kpos, format!("unknown measurement kind '{other}'"))),
        };
        a.finish()?;
        Ok(Measurement { kind, modes, register })
    }
}

/// Parses `.gcirc` text and validates it statically.
pub fn parse(text: &str) -> Result<Circuit, ParseError> {
    let mut p = Parser { toks: lex(text)?, at: 0 };
    let (kw, at) = p.ident("'modes'")?;
    if kw != "modes" {
        return Err(ParseError::syntax(at, format!("expected 'modes', found '{kw}'")));
    }
    let (n, _) = p.integer()?;
    p.expect(Tok::Semi, "';'")?;
    let mut circuit = Circuit::new(n);
    let mut positions = vec![at];
    let mut seen_init = false;
    loop {
        let (word, pos) = match p.peek().clone() {
            Tok::Eof => break,
            Tok::Ident(_) => p.ident("an instruction")?,
            _ => return p.unexpected("an instruction"),
        };
        match word.as_str() {
            "init" => {
                if seen_init || !circuit.instructions.is_empty() {
                    return Err(ParseError::syntax(pos, "'init' must appear once, right after 'modes'"));
                }
                seen_init = true;
                circuit.initial_state = p.init(n)?;
                positions[0] = pos;
            }
            "measure" => {
                let m = p.measure(pos)?;
                circuit.instructions.push(Instruction::Measure(m));
                positions.push(pos);
            }
            "modes" => return Err(ParseError::syntax(pos, "'modes' may appear only once")),
            name => {
                let g = p.gate(name, pos)?;
                circuit.instructions.push(Instruction::gate(g));
                positions.push(pos);
            }
        }
        p.expect(Tok::Semi, "';'")?;
    }
    validate(&circuit, Some(&positions))?;
    Ok(circuit)
}
