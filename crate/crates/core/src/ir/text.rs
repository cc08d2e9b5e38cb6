//! Line-oriented text syntax.
//!
//! ```text
//! # teleportation
//! Input 0
//! PrepList [1, 2]
//! J 0.0 0 1
//! J 0.0 1 2
//! ```
//!
//! Commas and parentheses are treated as whitespace, so the call style
//! `Measure(1, 0.0, [0], []);` parses too. Angles accept decimals and `pi`
//! expressions such as `pi/2` or `-3*pi/4`.

use std::fmt::Write as _;

use num_complex::Complex64;
use thiserror::Error;

use super::{group_declarations, Angle, Basis, Command, DeclGroup, Program, Qubit, Signal};

#[derive(Debug, Error, PartialEq)]
#[error("line {line}, column {column}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Number(String),
    LBracket,
    RBracket,
    Star,
    Slash,
    Plus,
    Minus,
    Semi,
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    column: usize,
}

fn lex_line(line: &str, line_no: usize) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = line.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let column = i + 1;
        let single = match c {
            '#' => break,
            c if c.is_whitespace() || c == ',' || c == '(' || c == ')' => {
                i += 1;
                continue;
            }
            '[' => Some(Tok::LBracket),
            ']' => Some(Tok::RBracket),
            '*' => Some(Tok::Star),
            '/' => Some(Tok::Slash),
            '+' => Some(Tok::Plus),
            '-' => Some(Tok::Minus),
            ';' => Some(Tok::Semi),
            _ => None,
        };
        if let Some(tok) = single {
            out.push(Token { tok, column });
            i += 1;
            continue;
        }
        if c.is_ascii_digit() || c == '.' {
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
            out.push(Token {
                tok: Tok::Number(chars[start..i].iter().collect()),
                column,
            });
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Token {
                tok: Tok::Ident(chars[start..i].iter().collect()),
                column,
            });
            continue;
        }
        return Err(ParseError {
            line: line_no,
            column,
            message: format!("unexpected character '{c}'"),
        });
    }
    Ok(out)
}

struct Cursor<'a> {
    toks: &'a [Token],
    pos: usize,
    line: usize,
    end_column: usize,
}

impl<'a> Cursor<'a> {
    fn peek(&self) -> Option<&'a Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn column(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end_column, |t| t.column)
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError {
            line: self.line,
            column: self.column(),
            message: message.into(),
        })
    }

    fn next(&mut self) -> Option<&'a Tok> {
        let t = self.peek();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn at_command_end(&self) -> bool {
        matches!(self.peek(), None | Some(Tok::Semi))
    }

    fn qubit(&mut self) -> Result<Qubit, ParseError> {
        match self.peek() {
            Some(Tok::Number(s)) => match s.parse::<Qubit>() {
                Ok(q) => {
                    self.pos += 1;
                    Ok(q)
                }
                Err(_) => self.err(format!("expected a qubit label, found '{s}'")),
            },
            Some(t) => self.err(format!("expected a qubit label, found {}", describe(t))),
            None => self.err("expected a qubit label, found end of line"),
        }
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<(), ParseError> {
        match self.peek() {
            Some(t) if *t == want => {
                self.pos += 1;
                Ok(())
            }
            Some(t) => self.err(format!("expected {what}, found {}", describe(t))),
            None => self.err(format!("expected {what}, found end of line")),
        }
    }

    fn qubit_list(&mut self) -> Result<Vec<Qubit>, ParseError> {
        self.expect(Tok::LBracket, "'['")?;
        let mut qs = Vec::new();
        while self.peek() != Some(&Tok::RBracket) {
            if self.peek().is_none() {
                return self.err("unterminated list");
            }
            qs.push(self.qubit()?);
        }
        self.pos += 1;
        Ok(qs)
    }

    fn signal(&mut self) -> Result<Signal, ParseError> {
        Ok(self.qubit_list()?.into_iter().collect())
    }

    // expr := term (('+' | '-') term)*
    fn expr(&mut self) -> Result<f64, ParseError> {
        let mut v = self.term()?;
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.pos += 1;
                    v += self.term()?;
                }
                Some(Tok::Minus) => {
                    self.pos += 1;
                    v -= self.term()?;
                }
                _ => return Ok(v),
            }
        }
    }

    // term := unary (('*' | '/') unary)*
    fn term(&mut self) -> Result<f64, ParseError> {
        let mut v = self.unary()?;
        loop {
            match self.peek() {
                Some(Tok::Star) => {
                    self.pos += 1;
                    v *= self.unary()?;
                }
                Some(Tok::Slash) => {
                    self.pos += 1;
                    let d = self.unary()?;
                    if d == 0.0 {
                        return self.err("division by zero in angle");
                    }
                    v /= d;
                }
                _ => return Ok(v),
            }
        }
    }

    fn unary(&mut self) -> Result<f64, ParseError> {
        match self.peek() {
            Some(Tok::Minus) => {
                self.pos += 1;
                Ok(-self.unary()?)
            }
            Some(Tok::Number(s)) => match s.parse::<f64>() {
                Ok(x) => {
                    self.pos += 1;
                    Ok(x)
                }
                Err(_) => self.err(format!("invalid number '{s}'")),
            },
            Some(Tok::Ident(s)) if s.eq_ignore_ascii_case("pi") => {
                self.pos += 1;
                Ok(std::f64::consts::PI)
            }
            Some(t) => self.err(format!("expected an angle, found {}", describe(t))),
            None => self.err("expected an angle, found end of line"),
        }
    }

    fn angle(&mut self) -> Result<Angle, ParseError> {
        Ok(Angle::new(self.expr()?))
    }

    // components are single terms so that `[0.5, -0.5]` keeps its sign
    fn complex(&mut self) -> Result<Complex64, ParseError> {
        if self.peek() == Some(&Tok::LBracket) {
            self.pos += 1;
            let re = self.term()?;
            let im = self.term()?;
            self.expect(Tok::RBracket, "']'")?;
            Ok(Complex64::new(re, im))
        } else {
            Ok(Complex64::new(self.term()?, 0.0))
        }
    }

    fn basis(&mut self) -> Result<Basis, ParseError> {
        match self.next() {
            Some(Tok::Ident(s)) => match s.as_str() {
                "X" => Ok(Basis::X),
                "Y" => Ok(Basis::Y),
                "Z" => Ok(Basis::Z),
                "FromAngle" => Ok(Basis::FromAngle(self.angle()?)),
                "FromTuples" => {
                    let a = [self.complex()?, self.complex()?];
                    let b = [self.complex()?, self.complex()?];
                    Ok(Basis::FromTuples(a, b))
                }
                other => {
                    self.pos -= 1;
                    self.err(format!("unknown basis '{other}'"))
                }
            },
            Some(t) => {
                self.pos -= 1;
                self.err(format!("expected a basis, found {}", describe(t)))
            }
            None => self.err("expected a basis, found end of line"),
        }
    }

    fn command(&mut self, out: &mut Vec<Command>) -> Result<(), ParseError> {
        let name = match self.next() {
            Some(Tok::Ident(s)) => s.as_str(),
            Some(t) => {
                self.pos -= 1;
                return self.err(format!("expected a command name, found {}", describe(t)));
            }
            None => return Ok(()),
        };
        match name {
            "Input" => out.push(Command::Input(self.qubit()?)),
            "Prep" => out.push(Command::Prep(self.qubit()?)),
            "InputList" => out.extend(self.qubit_list()?.into_iter().map(Command::Input)),
            "PrepList" => out.extend(self.qubit_list()?.into_iter().map(Command::Prep)),
            "Entangle" => out.push(Command::Entangle(self.qubit()?, self.qubit()?)),
            "CZ" => out.push(Command::CZ(self.qubit()?, self.qubit()?)),
            "Measure" => {
                let qubit = self.qubit()?;
                let angle = self.angle()?;
                let s_domain = self.signal()?;
                let t_domain = self.signal()?;
                out.push(Command::Measure {
                    qubit,
                    angle,
                    s_domain,
                    t_domain,
                });
            }
            "XCorrect" => {
                let qubit = self.qubit()?;
                out.push(Command::XCorrect {
                    qubit,
                    signal: self.signal()?,
                });
            }
            "ZCorrect" => {
                let qubit = self.qubit()?;
                out.push(Command::ZCorrect {
                    qubit,
                    signal: self.signal()?,
                });
            }
            "ReadOut" => {
                let qubit = self.qubit()?;
                out.push(Command::ReadOut {
                    qubit,
                    basis: self.basis()?,
                });
            }
            "J" => {
                let angle = self.angle()?;
                let source = self.qubit()?;
                let target = self.qubit()?;
                out.push(Command::J { angle, source, target });
            }
            other => {
                self.pos -= 1;
                return self.err(format!("unknown command '{other}'"));
            }
        }
        if !self.at_command_end() {
            let t = self.peek().expect("not at end");
            return self.err(format!("unexpected {} after command", describe(t)));
        }
        Ok(())
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Ident(s) => format!("'{s}'"),
        Tok::Number(s) => format!("'{s}'"),
        Tok::LBracket => "'['".into(),
        Tok::RBracket => "']'".into(),
        Tok::Star => "'*'".into(),
        Tok::Slash => "'/'".into(),
        Tok::Plus => "'+'".into(),
        Tok::Minus => "'-'".into(),
        Tok::Semi => "';'".into(),
    }
}

/// Parses a program in the text syntax.
pub fn parse_text(text: &str) -> Result<Program, ParseError> {
    let mut commands = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let toks = lex_line(line, line_no)?;
        let mut cur = Cursor {
            toks: &toks,
            pos: 0,
            line: line_no,
            end_column: line.chars().count() + 1,
        };
        while cur.peek().is_some() {
            if cur.peek() == Some(&Tok::Semi) {
                cur.pos += 1;
                continue;
            }
            cur.command(&mut commands)?;
        }
    }
    Ok(Program::new(commands))
}

/// Parses a standalone angle expression such as `3*pi/4`.
pub fn parse_angle(text: &str) -> Result<Angle, ParseError> {
    let toks = lex_line(text, 1)?;
    let mut cur = Cursor {
        toks: &toks,
        pos: 0,
        line: 1,
        end_column: text.chars().count() + 1,
    };
    let a = cur.angle()?;
    if cur.peek().is_some() {
        return cur.err("trailing input after angle");
    }
    Ok(a)
}

fn list(qs: impl IntoIterator<Item = Qubit>) -> String {
    let items: Vec<String> = qs.into_iter().map(|q| q.to_string()).collect();
    format!("[{}]", items.join(", "))
}

fn complex(c: Complex64) -> String {
    format!("[{:?}, {:?}]", c.re, c.im)
}

pub(crate) fn basis_text(b: &Basis) -> String {
    match b {
        Basis::X => "X".into(),
        Basis::Y => "Y".into(),
        Basis::Z => "Z".into(),
        Basis::FromAngle(a) => format!("FromAngle {a}"),
        Basis::FromTuples(a, b) => format!(
            "FromTuples {} {} {} {}",
            complex(a[0]),
            complex(a[1]),
            complex(b[0]),
            complex(b[1])
        ),
    }
}

pub(crate) fn command_text(cmd: &Command) -> String {
    match cmd {
        Command::Input(q) => format!("Input {q}"),
        Command::Prep(q) => format!("Prep {q}"),
        Command::Entangle(a, b) => format!("Entangle {a} {b}"),
        Command::CZ(a, b) => format!("CZ {a} {b}"),
        Command::Measure {
            qubit,
            angle,
            s_domain,
            t_domain,
        } => format!(
            "Measure {qubit} {angle} {} {}",
            list(s_domain.iter()),
            list(t_domain.iter())
        ),
        Command::XCorrect { qubit, signal } => format!("XCorrect {qubit} {}", list(signal.iter())),
        Command::ZCorrect { qubit, signal } => format!("ZCorrect {qubit} {}", list(signal.iter())),
        Command::ReadOut { qubit, basis } => format!("ReadOut {qubit} {}", basis_text(basis)),
        Command::J { angle, source, target } => format!("J {angle} {source} {target}"),
    }
}

/// Prints one command per line; declaration runs collapse to list form.
pub fn print_text(program: &Program) -> String {
    let mut out = String::new();
    for g in group_declarations(program.commands()) {
        let line = match g {
            DeclGroup::Single(c) => command_text(c),
            DeclGroup::Inputs(qs) => format!("InputList {}", list(qs)),
            DeclGroup::Preps(qs) => format!("PrepList {}", list(qs)),
        };
        let _ = writeln!(out, "{line}");
    }
    out
}

impl std::fmt::Display for Command {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&command_text(self))
    }
}

impl std::fmt::Display for Program {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&print_text(self))
    }
}
