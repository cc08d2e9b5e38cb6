//! Desugaring of `J`/`CZ` and standardization by local rewriting.
//!
//! Standard form is declarations, entanglement, measurements, corrections,
//! then read-outs. The engine rewrites adjacent pairs until no rule applies.

use thiserror::Error;

use crate::ir::{validate, Command, CommandKind, Program, Qubit, Signal, ValidationReport};

#[derive(Debug, Error)]
pub enum RewriteError {
    #[error("program is not well formed:\n{0}")]
    Invalid(ValidationReport),
    #[error("rewriting did not reach a fixpoint within {budget} steps")]
    BudgetExceeded { budget: usize },
}

/// One rule application: the two-command window at `index` became `after`.
#[derive(Clone, Debug, PartialEq)]
pub struct RewriteStep {
    pub rule: u8,
    pub index: usize,
    pub before: [Command; 2],
    pub after: Vec<Command>,
}

/// Rule applications in order. Indices refer to `start`, the desugared input
/// with empty corrections dropped and read-outs moved to the end; replaying
/// the steps on `start` reproduces the standardized program.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RewriteTrace {
    pub start: Program,
    pub steps: Vec<RewriteStep>,
}

impl RewriteTrace {
    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn replay(&self) -> Program {
        let mut cmds = self.start.commands().to_vec();
        for s in &self.steps {
            cmds.splice(s.index..s.index + 2, s.after.iter().cloned());
        }
        Program::new(cmds)
    }

    /// One `{"rule": k, "at": i}` object per line.
    pub fn json_lines(&self) -> String {
        self.steps
            .iter()
            .map(|s| serde_json::json!({"rule": s.rule, "at": s.index}).to_string() + "\n")
            .collect()
    }
}

/// Expands `J` and `CZ` into primitive commands in place.
pub fn desugar(program: &Program) -> Program {
    let mut out = Vec::with_capacity(program.len() + 2 * program.commands().len());
    for cmd in program {
        match cmd {
            Command::J { angle, source, target } => {
                out.push(Command::Entangle(*source, *target));
                out.push(Command::measure(*source, -*angle));
                out.push(Command::x(*target, Signal::single(*source)));
            }
            Command::CZ(a, b) => out.push(Command::Entangle(*a, *b)),
            other => out.push(other.clone()),
        }
    }
    Program::new(out)
}

/// Whether command kinds appear in standard order. High-level commands are
/// never standard.
pub fn is_standard(program: &Program) -> bool {
    let mut last = CommandKind::Declaration;
    for cmd in program {
        let k = cmd.kind();
        if k == CommandKind::HighLevel || k < last {
            return false;
        }
        last = k;
    }
    true
}

/// Desugars and standardizes a well-formed program.
pub fn standardize(program: &Program) -> Result<(Program, RewriteTrace), RewriteError> {
    let report = validate(program);
    if !report.ok() {
        return Err(RewriteError::Invalid(report));
    }
    let desugared = desugar(program);

    let mut decls = Vec::new();
    let mut ops = Vec::new();
    let mut readouts = Vec::new();
    for cmd in desugared.into_commands() {
        match cmd.kind() {
            CommandKind::Declaration => decls.push(cmd),
            CommandKind::ReadOut => readouts.push(cmd),
            _ if is_empty_correction(&cmd) => {}
            _ => ops.push(cmd),
        }
    }
    let offset = decls.len();
    let start = Program::new(decls.iter().chain(&ops).chain(&readouts).cloned().collect());

    let n = start.len();
    let budget = (10 * n * n).max(10);
    let mut steps = Vec::new();
    while let Some((k, rule, after)) = find_rewrite(&ops) {
        if steps.len() >= budget {
            return Err(RewriteError::BudgetExceeded { budget });
        }
        let before = [ops[k].clone(), ops[k + 1].clone()];
        ops.splice(k..k + 2, after.iter().cloned());
        steps.push(RewriteStep {
            rule,
            index: offset + k,
            before,
            after,
        });
    }
    log::debug!("standardized {} commands in {} steps", n, steps.len());

    let out = Program::new(decls.into_iter().chain(ops).chain(readouts).collect());
    Ok((out, RewriteTrace { start, steps }))
}

fn is_empty_correction(cmd: &Command) -> bool {
    matches!(cmd, Command::XCorrect { signal, .. } | Command::ZCorrect { signal, .. } if signal.is_empty())
}

fn disjoint(a: &Command, b: &Command) -> bool {
    let qa = a.qubits();
    b.qubits().iter().all(|q| !qa.contains(q))
}

/// Leftmost window where rules 1-6 apply, else leftmost for rules 7-9.
fn find_rewrite(ops: &[Command]) -> Option<(usize, u8, Vec<Command>)> {
    let windows = || (0..ops.len().saturating_sub(1)).map(|k| (k, &ops[k], &ops[k + 1]));
    windows()
        .find_map(|(k, a, b)| interaction(a, b).map(|(r, w)| (k, r, w)))
        .or_else(|| windows().find_map(|(k, a, b)| commutation(a, b).map(|(r, w)| (k, r, w))))
}

fn entangle_partner(e: &Command, q: Qubit) -> Option<(bool, Qubit)> {
    match e {
        Command::Entangle(i, j) if *i == q => Some((true, *j)),
        Command::Entangle(i, j) if *j == q => Some((false, *i)),
        _ => None,
    }
}

/// Rules 1-6: a correction meeting an entangler or a measurement on its qubit.
fn interaction(a: &Command, b: &Command) -> Option<(u8, Vec<Command>)> {
    match (a, b) {
        (Command::XCorrect { qubit, signal }, Command::Entangle(..)) => {
            let (first, other) = entangle_partner(b, *qubit)?;
            let rule = if first { 1 } else { 2 };
            Some((rule, vec![b.clone(), Command::z(other, signal.clone()), a.clone()]))
        }
        (Command::ZCorrect { qubit, .. }, Command::Entangle(..)) => {
            let (first, _) = entangle_partner(b, *qubit)?;
            let rule = if first { 3 } else { 4 };
            Some((rule, vec![b.clone(), a.clone()]))
        }
        (
            Command::XCorrect { qubit: q, signal: r },
            Command::Measure {
                qubit,
                angle,
                s_domain,
                t_domain,
            },
        ) if q == qubit => Some((
            5,
            vec![Command::Measure {
                qubit: *qubit,
                angle: *angle,
                s_domain: s_domain.xor(r),
                t_domain: t_domain.clone(),
            }],
        )),
        (
            Command::ZCorrect { qubit: q, signal: r },
            Command::Measure {
                qubit,
                angle,
                s_domain,
                t_domain,
            },
        ) if q == qubit => Some((
            6,
            vec![Command::Measure {
                qubit: *qubit,
                angle: *angle,
                s_domain: s_domain.clone(),
                t_domain: t_domain.xor(r),
            }],
        )),
        _ => None,
    }
}

/// Rules 7-9: free commutation of commands on disjoint qubits.
fn commutation(a: &Command, b: &Command) -> Option<(u8, Vec<Command>)> {
    if !disjoint(a, b) {
        return None;
    }
    let swapped = || vec![b.clone(), a.clone()];
    let ka = a.kind();
    let kb = b.kind();
    if kb == CommandKind::Entangle && ka != CommandKind::Entangle {
        return Some((7, swapped()));
    }
    if ka == CommandKind::Correction && kb != CommandKind::Correction {
        let rule = if matches!(a, Command::XCorrect { .. }) { 8 } else { 9 };
        return Some((rule, swapped()));
    }
    None
}
