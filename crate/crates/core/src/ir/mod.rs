//! Command IR for measurement-calculus programs.
//!
//! A [`Program`] is an ordered list of [`Command`]s. List declarations
//! (`InputList`, `PrepList`) are syntax only: both front ends expand them into
//! one `Input`/`Prep` per qubit, so nothing downstream ever sees a list.

mod json;
mod text;
mod validate;

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::{PI, TAU};
use std::fmt;

use num_complex::Complex64;

pub use json::{from_json, to_json, JsonError};
pub use text::{parse_angle, parse_text, print_text, ParseError};
pub use validate::{validate, Constraint, ValidationReport, Violation};

/// Qubit labels are plain natural numbers.
pub type Qubit = usize;

/// Tolerance used when comparing angles.
pub const ANGLE_TOLERANCE: f64 = 1e-12;

/// Tolerance for orthonormality of user supplied bases.
pub const BASIS_TOLERANCE: f64 = 1e-9;

/// Measurement angle in radians, always normalized to `[0, 2π)`.
#[derive(Clone, Copy, Default)]
pub struct Angle(f64);

impl Angle {
    pub const ZERO: Angle = Angle(0.0);
    pub const PI: Angle = Angle(PI);

    pub fn new(radians: f64) -> Self {
        let mut r = radians.rem_euclid(TAU);
        // rem_euclid can round up to exactly 2π for tiny negative inputs
        if r >= TAU || !r.is_finite() {
            r = 0.0;
        }
        Angle(r)
    }

    pub fn radians(self) -> f64 {
        self.0
    }

    /// The same angle expressed in `(-π, π]`.
    pub fn signed(self) -> f64 {
        if self.0 > PI {
            self.0 - TAU
        } else {
            self.0
        }
    }

    /// `k*π/d` with small `d`, if this angle is (within tolerance) such a multiple.
    pub(crate) fn as_pi_fraction(self) -> Option<(i64, i64)> {
        for den in [1i64, 2, 3, 4, 6, 8] {
            let k = (self.0 * den as f64 / PI).round();
            if (k * PI / den as f64 - self.0).abs() < ANGLE_TOLERANCE {
                return Some((k as i64, den));
            }
        }
        None
    }
}

impl PartialEq for Angle {
    fn eq(&self, other: &Self) -> bool {
        let d = (self.0 - other.0).abs();
        d.min(TAU - d) < ANGLE_TOLERANCE
    }
}

impl std::ops::Neg for Angle {
    type Output = Angle;
    fn neg(self) -> Angle {
        Angle::new(-self.0)
    }
}

impl std::ops::Add for Angle {
    type Output = Angle;
    fn add(self, rhs: Angle) -> Angle {
        Angle::new(self.0 + rhs.0)
    }
}

impl std::ops::Sub for Angle {
    type Output = Angle;
    fn sub(self, rhs: Angle) -> Angle {
        Angle::new(self.0 - rhs.0)
    }
}

impl From<f64> for Angle {
    fn from(radians: f64) -> Self {
        Angle::new(radians)
    }
}

impl fmt::Debug for Angle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}

impl fmt::Display for Angle {
    /// Multiples of small fractions of π print as `pi` expressions, anything
    /// else as a round-trippable decimal.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.as_pi_fraction() {
            Some((0, _)) => write!(f, "0.0"),
            Some((1, 1)) => write!(f, "pi"),
            Some((k, 1)) => write!(f, "{k}*pi"),
            Some((1, d)) => write!(f, "pi/{d}"),
            Some((k, d)) => write!(f, "{k}*pi/{d}"),
            None => write!(f, "{:?}", self.0),
        }
    }
}

/// Domain of a signal: the outcomes of these qubits are XOR-ed together.
///
/// Construction from an iterator collapses repeated labels pairwise, since
/// `s ⊕ s = 0`.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Signal(BTreeSet<Qubit>);

impl Signal {
    pub fn empty() -> Self {
        Signal(BTreeSet::new())
    }

    pub fn single(q: Qubit) -> Self {
        Signal(BTreeSet::from([q]))
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn contains(&self, q: Qubit) -> bool {
        self.0.contains(&q)
    }

    pub fn iter(&self) -> impl Iterator<Item = Qubit> + '_ {
        self.0.iter().copied()
    }

    /// Signal addition: symmetric difference of the domains.
    pub fn xor(&self, other: &Signal) -> Signal {
        Signal(self.0.symmetric_difference(&other.0).copied().collect())
    }

    /// XOR of the recorded outcomes; `None` if some domain qubit has no outcome yet.
    pub fn evaluate(&self, outcomes: &BTreeMap<Qubit, u8>) -> Option<u8> {
        self.0
            .iter()
            .try_fold(0u8, |acc, q| outcomes.get(q).map(|b| acc ^ (b & 1)))
    }
}

impl FromIterator<Qubit> for Signal {
    fn from_iter<I: IntoIterator<Item = Qubit>>(iter: I) -> Self {
        let mut set = BTreeSet::new();
        for q in iter {
            if !set.remove(&q) {
                set.insert(q);
            }
        }
        Signal(set)
    }
}

impl<const N: usize> From<[Qubit; N]> for Signal {
    fn from(qs: [Qubit; N]) -> Self {
        qs.into_iter().collect()
    }
}

/// Basis of a read-out measurement. The first vector is outcome 0.
#[derive(Clone, Debug, PartialEq)]
pub enum Basis {
    X,
    Y,
    Z,
    FromTuples([Complex64; 2], [Complex64; 2]),
    FromAngle(Angle),
}

impl Basis {
    /// Whether a `FromTuples` basis is orthonormal; the named bases always are.
    pub fn is_orthonormal(&self) -> bool {
        match self {
            Basis::FromTuples(a, b) => {
                let na = a[0].norm_sqr() + a[1].norm_sqr();
                let nb = b[0].norm_sqr() + b[1].norm_sqr();
                let ip = a[0].conj() * b[0] + a[1].conj() * b[1];
                (na - 1.0).abs() < BASIS_TOLERANCE && (nb - 1.0).abs() < BASIS_TOLERANCE && ip.norm() < BASIS_TOLERANCE
            }
            _ => true,
        }
    }
}

/// One measurement-calculus command.
#[derive(Clone, Debug, PartialEq)]
pub enum Command {
    /// Declares an input qubit whose state is supplied at run time.
    Input(Qubit),
    /// Prepares a qubit in `|+⟩`.
    Prep(Qubit),
    /// Controlled-Z between two qubits.
    Entangle(Qubit, Qubit),
    /// Destructive measurement at angle `(-1)^s·α + t·π` in the `|±_α⟩` plane.
    Measure {
        qubit: Qubit,
        angle: Angle,
        s_domain: Signal,
        t_domain: Signal,
    },
    XCorrect {
        qubit: Qubit,
        signal: Signal,
    },
    ZCorrect {
        qubit: Qubit,
        signal: Signal,
    },
    ReadOut {
        qubit: Qubit,
        basis: Basis,
    },
    /// `J(α)(source, target) := E; M_source^{-α}; X_target^{s_source}`.
    J {
        angle: Angle,
        source: Qubit,
        target: Qubit,
    },
    /// `CZ(a, b) := E_ab`.
    CZ(Qubit, Qubit),
}

/// Coarse command classes, ranked in standard order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum CommandKind {
    Declaration,
    Entangle,
    Measure,
    Correction,
    ReadOut,
    HighLevel,
}

impl Command {
    pub fn measure(qubit: Qubit, angle: impl Into<Angle>) -> Command {
        Command::Measure {
            qubit,
            angle: angle.into(),
            s_domain: Signal::empty(),
            t_domain: Signal::empty(),
        }
    }

    pub fn measure_dep(
        qubit: Qubit,
        angle: impl Into<Angle>,
        s_domain: impl Into<Signal>,
        t_domain: impl Into<Signal>,
    ) -> Command {
        Command::Measure {
            qubit,
            angle: angle.into(),
            s_domain: s_domain.into(),
            t_domain: t_domain.into(),
        }
    }

    pub fn x(qubit: Qubit, signal: impl Into<Signal>) -> Command {
        Command::XCorrect {
            qubit,
            signal: signal.into(),
        }
    }

    pub fn z(qubit: Qubit, signal: impl Into<Signal>) -> Command {
        Command::ZCorrect {
            qubit,
            signal: signal.into(),
        }
    }

    pub fn j(angle: impl Into<Angle>, source: Qubit, target: Qubit) -> Command {
        Command::J {
            angle: angle.into(),
            source,
            target,
        }
    }

    pub fn readout(qubit: Qubit, basis: Basis) -> Command {
        Command::ReadOut { qubit, basis }
    }

    pub fn kind(&self) -> CommandKind {
        match self {
            Command::Input(_) | Command::Prep(_) => CommandKind::Declaration,
            Command::Entangle(..) => CommandKind::Entangle,
            Command::Measure { .. } => CommandKind::Measure,
            Command::XCorrect { .. } | Command::ZCorrect { .. } => CommandKind::Correction,
            Command::ReadOut { .. } => CommandKind::ReadOut,
            Command::J { .. } | Command::CZ(..) => CommandKind::HighLevel,
        }
    }

    pub fn is_declaration(&self) -> bool {
        self.kind() == CommandKind::Declaration
    }

    /// Qubits the command acts on (signal domains excluded).
    pub fn qubits(&self) -> Vec<Qubit> {
        match self {
            Command::Input(q) | Command::Prep(q) => vec![*q],
            Command::Entangle(a, b) | Command::CZ(a, b) => vec![*a, *b],
            Command::Measure { qubit, .. }
            | Command::XCorrect { qubit, .. }
            | Command::ZCorrect { qubit, .. }
            | Command::ReadOut { qubit, .. } => vec![*qubit],
            Command::J { source, target, .. } => vec![*source, *target],
        }
    }

    /// Every signal domain attached to the command.
    pub fn signals(&self) -> Vec<&Signal> {
        match self {
            Command::Measure { s_domain, t_domain, .. } => vec![s_domain, t_domain],
            Command::XCorrect { signal, .. } | Command::ZCorrect { signal, .. } => vec![signal],
            _ => Vec::new(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Command::Input(_) => "Input",
            Command::Prep(_) => "Prep",
            Command::Entangle(..) => "Entangle",
            Command::Measure { .. } => "Measure",
            Command::XCorrect { .. } => "XCorrect",
            Command::ZCorrect { .. } => "ZCorrect",
            Command::ReadOut { .. } => "ReadOut",
            Command::J { .. } => "J",
            Command::CZ(..) => "CZ",
        }
    }
}

/// Computation, input and output spaces of a program.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Spaces {
    pub computation: BTreeSet<Qubit>,
    pub inputs: BTreeSet<Qubit>,
    pub outputs: BTreeSet<Qubit>,
}

/// An ordered command sequence.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Program {
    commands: Vec<Command>,
}

impl Program {
    pub fn new(commands: Vec<Command>) -> Self {
        Program { commands }
    }

    pub fn commands(&self) -> &[Command] {
        &self.commands
    }

    pub fn into_commands(self) -> Vec<Command> {
        self.commands
    }

    pub fn len(&self) -> usize {
        self.commands.len()
    }

    pub fn is_empty(&self) -> bool {
        self.commands.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Command> {
        self.commands.iter()
    }

    /// Whether the program still contains `J` or `CZ`.
    pub fn has_high_level(&self) -> bool {
        self.commands.iter().any(|c| c.kind() == CommandKind::HighLevel)
    }

    /// Derived spaces `(V, I, O)`. The source of a `J` counts as measured.
    pub fn spaces(&self) -> Spaces {
        let mut computation = BTreeSet::new();
        let mut inputs = BTreeSet::new();
        let mut measured = BTreeSet::new();
        for cmd in &self.commands {
            computation.extend(cmd.qubits());
            match cmd {
                Command::Input(q) => {
                    inputs.insert(*q);
                }
                Command::Measure { qubit, .. } => {
                    measured.insert(*qubit);
                }
                Command::J { source, .. } => {
                    measured.insert(*source);
                }
                _ => {}
            }
        }
        let outputs = computation.difference(&measured).copied().collect();
        Spaces {
            computation,
            inputs,
            outputs,
        }
    }

    /// Labels of qubits read out by `ReadOut`, ascending.
    pub fn readout_qubits(&self) -> BTreeSet<Qubit> {
        self.commands
            .iter()
            .filter_map(|c| match c {
                Command::ReadOut { qubit, .. } => Some(*qubit),
                _ => None,
            })
            .collect()
    }

    /// Number of destructive measurements (`Measure`, `J`, `ReadOut`).
    pub fn measurement_count(&self) -> usize {
        self.commands
            .iter()
            .filter(|c| matches!(c, Command::Measure { .. } | Command::J { .. } | Command::ReadOut { .. }))
            .count()
    }

    /// Renumbers qubits onto `0..n` in ascending order of their original
    /// labels. Returns the relabeled program and the old → new mapping.
    pub fn relabel(&self) -> (Program, BTreeMap<Qubit, Qubit>) {
        let mut labels: BTreeSet<Qubit> = BTreeSet::new();
        for cmd in &self.commands {
            labels.extend(cmd.qubits());
            for s in cmd.signals() {
                labels.extend(s.iter());
            }
        }
        let map: BTreeMap<Qubit, Qubit> = labels.into_iter().enumerate().map(|(i, q)| (q, i)).collect();
        let m = |q: &Qubit| map[q];
        let ms = |s: &Signal| s.iter().map(|q| map[&q]).collect::<Signal>();
        let commands = self
            .commands
            .iter()
            .map(|c| match c {
                Command::Input(q) => Command::Input(m(q)),
                Command::Prep(q) => Command::Prep(m(q)),
                Command::Entangle(a, b) => Command::Entangle(m(a), m(b)),
                Command::CZ(a, b) => Command::CZ(m(a), m(b)),
                Command::Measure {
                    qubit,
                    angle,
                    s_domain,
                    t_domain,
                } => Command::Measure {
                    qubit: m(qubit),
                    angle: *angle,
                    s_domain: ms(s_domain),
                    t_domain: ms(t_domain),
                },
                Command::XCorrect { qubit, signal } => Command::XCorrect {
                    qubit: m(qubit),
                    signal: ms(signal),
                },
                Command::ZCorrect { qubit, signal } => Command::ZCorrect {
                    qubit: m(qubit),
                    signal: ms(signal),
                },
                Command::ReadOut { qubit, basis } => Command::ReadOut {
                    qubit: m(qubit),
                    basis: basis.clone(),
                },
                Command::J { angle, source, target } => Command::J {
                    angle: *angle,
                    source: m(source),
                    target: m(target),
                },
            })
            .collect();
        (Program::new(commands), map)
    }
}

impl From<Vec<Command>> for Program {
    fn from(commands: Vec<Command>) -> Self {
        Program::new(commands)
    }
}

impl FromIterator<Command> for Program {
    fn from_iter<I: IntoIterator<Item = Command>>(iter: I) -> Self {
        Program::new(iter.into_iter().collect())
    }
}

impl<'a> IntoIterator for &'a Program {
    type Item = &'a Command;
    type IntoIter = std::slice::Iter<'a, Command>;
    fn into_iter(self) -> Self::IntoIter {
        self.commands.iter()
    }
}

/// Groups maximal runs of consecutive `Input`/`Prep` declarations (length ≥ 2)
/// so the printers can emit `InputList`/`PrepList`.
pub(crate) enum DeclGroup<'a> {
    Single(&'a Command),
    Inputs(Vec<Qubit>),
    Preps(Vec<Qubit>),
}

pub(crate) fn group_declarations(commands: &[Command]) -> Vec<DeclGroup<'_>> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < commands.len() {
        let run_of = |pred: fn(&Command) -> Option<Qubit>| commands[i..].iter().map_while(pred).collect::<Vec<_>>();
        let inputs = run_of(|c| match c {
            Command::Input(q) => Some(*q),
            _ => None,
        });
        let preps = run_of(|c| match c {
            Command::Prep(q) => Some(*q),
            _ => None,
        });
        if inputs.len() >= 2 {
            i += inputs.len();
            out.push(DeclGroup::Inputs(inputs));
        } else if preps.len() >= 2 {
            i += preps.len();
            out.push(DeclGroup::Preps(preps));
        } else {
            out.push(DeclGroup::Single(&commands[i]));
            i += 1;
        }
    }
    out
}
