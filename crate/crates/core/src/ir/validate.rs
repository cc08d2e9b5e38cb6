use std::collections::BTreeSet;
use std::fmt;

use super::{Command, Program, Qubit};

/// Well-formedness rule a program can break.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Constraint {
    /// (1) A signal depends on an outcome not yet measured.
    SignalNotMeasured,
    /// (2) A command acts on a qubit that was already measured.
    ActsOnMeasured,
    /// (3) A command acts on a qubit that was never declared.
    Undeclared,
    /// (4) A read-out targets a qubit outside the output space.
    ReadOutNotOutput,
    /// Qubit labels do not form `0..n`.
    NonContiguous,
    /// A declaration appears after an operational command.
    DeclarationOrder,
    /// A qubit is declared twice.
    DuplicateDeclaration,
    /// A two-qubit command names the same qubit twice.
    RepeatedQubit,
    /// A `FromTuples` basis is not orthonormal.
    NonOrthonormalBasis,
}

impl Constraint {
    /// Numeric id; the four calculus constraints are 1-4, structural checks follow.
    pub fn id(self) -> u8 {
        match self {
            Constraint::SignalNotMeasured => 1,
            Constraint::ActsOnMeasured => 2,
            Constraint::Undeclared => 3,
            Constraint::ReadOutNotOutput => 4,
            Constraint::NonContiguous => 5,
            Constraint::DeclarationOrder => 6,
            Constraint::DuplicateDeclaration => 7,
            Constraint::RepeatedQubit => 8,
            Constraint::NonOrthonormalBasis => 9,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub constraint: Constraint,
    /// Offending command index; `None` for whole-program checks.
    pub index: Option<usize>,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.index {
            Some(i) => write!(
                f,
                "constraint {} violated at command {}: {}",
                self.constraint.id(),
                i,
                self.message
            ),
            None => write!(f, "constraint {} violated: {}", self.constraint.id(), self.message),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, constraint: Constraint) -> bool {
        self.violations.iter().any(|v| v.constraint == constraint)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.ok() {
            return write!(f, "ok");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Checks every well-formedness constraint and reports all violations.
pub fn validate(program: &Program) -> ValidationReport {
    let mut violations = Vec::new();
    let mut push = |constraint, index: Option<usize>, message: String| {
        violations.push(Violation {
            constraint,
            index,
            message,
        })
    };

    let mut declared: BTreeSet<Qubit> = BTreeSet::new();
    // measured by Measure or as the source of J
    let mut measured: BTreeSet<Qubit> = BTreeSet::new();
    let mut read_out: BTreeSet<Qubit> = BTreeSet::new();
    let mut seen_operation = false;

    for (i, cmd) in program.iter().enumerate() {
        let at = Some(i);
        if cmd.is_declaration() {
            let q = cmd.qubits()[0];
            if seen_operation {
                push(
                    Constraint::DeclarationOrder,
                    at,
                    format!("{} {q} after the first operational command", cmd.name()),
                );
            }
            if !declared.insert(q) {
                push(
                    Constraint::DuplicateDeclaration,
                    at,
                    format!("qubit {q} declared more than once"),
                );
            }
            continue;
        }
        seen_operation = true;

        for s in cmd.signals() {
            for q in s.iter() {
                if read_out.contains(&q) {
                    push(
                        Constraint::SignalNotMeasured,
                        at,
                        format!("signal depends on read-out qubit {q}"),
                    );
                } else if !measured.contains(&q) {
                    push(
                        Constraint::SignalNotMeasured,
                        at,
                        format!("signal depends on qubit {q}, which has not been measured"),
                    );
                }
            }
        }

        let qubits = cmd.qubits();
        if qubits.len() == 2 && qubits[0] == qubits[1] {
            push(
                Constraint::RepeatedQubit,
                at,
                format!("{} acts twice on qubit {}", cmd.name(), qubits[0]),
            );
        }
        for &q in &qubits {
            if !declared.contains(&q) {
                push(
                    Constraint::Undeclared,
                    at,
                    format!("{} acts on undeclared qubit {q}", cmd.name()),
                );
            } else if measured.contains(&q) {
                if matches!(cmd, Command::ReadOut { .. }) {
                    push(
                        Constraint::ReadOutNotOutput,
                        at,
                        format!("qubit {q} is measured, so it is not an output and cannot be read out"),
                    );
                } else {
                    push(
                        Constraint::ActsOnMeasured,
                        at,
                        format!("{} acts on already measured qubit {q}", cmd.name()),
                    );
                }
            } else if read_out.contains(&q) {
                push(
                    Constraint::ActsOnMeasured,
                    at,
                    format!("{} acts on qubit {q} after its read-out", cmd.name()),
                );
            }
        }

        match cmd {
            Command::Measure { qubit, .. } => {
                measured.insert(*qubit);
            }
            Command::J { source, .. } => {
                measured.insert(*source);
            }
            Command::ReadOut { qubit, basis } => {
                if !basis.is_orthonormal() {
                    push(
                        Constraint::NonOrthonormalBasis,
                        at,
                        format!("read-out basis of qubit {qubit} is not orthonormal"),
                    );
                }
                read_out.insert(*qubit);
            }
            _ => {}
        }
    }

    if let Some(&max) = declared.iter().next_back() {
        if declared.len() != max + 1 {
            let missing: Vec<String> = (0..=max)
                .filter(|q| !declared.contains(q))
                .map(|q| q.to_string())
                .collect();
            push(
                Constraint::NonContiguous,
                None,
                format!("qubit labels must be 0..{}; missing {}", max + 1, missing.join(", ")),
            );
        }
    }

    ValidationReport { violations }
}
