//! Translation of programs to gate circuits, OpenQASM 2.0 emission and a
//! small circuit interpreter used to check the translation.
//!
//! Circuit qubit `q` is program qubit `q`. Every destructively measured qubit
//! owns one classical bit; clbits are numbered in ascending qubit order.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;
use std::fmt::Write as _;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ir::{parse_angle, validate, Angle, Basis, Command, Program, Qubit, ValidationReport};
use crate::kernel::{self, KernelError, Ket, Mat2, Pauli, StateVector};
use crate::rewrite::{self, RewriteError};
use crate::rng::substream;
use crate::simulator::InputAssignment;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "gate", rename_all = "UPPERCASE")]
pub enum Gate {
    H { q: usize },
    X { q: usize },
    Z { q: usize },
    RZ { theta: f64, q: usize },
    RY { theta: f64, q: usize },
    CX { c: usize, t: usize },
    CZ { a: usize, b: usize },
    Measure { q: usize, clbit: usize },
    CondX { clbit: usize, q: usize },
    CondZ { clbit: usize, q: usize },
}

impl Gate {
    pub fn is_unitary(&self) -> bool {
        !matches!(self, Gate::Measure { .. } | Gate::CondX { .. } | Gate::CondZ { .. })
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GateCircuit {
    pub n_qubits: usize,
    /// Qubit that owns each classical bit.
    pub clbit_owner: Vec<Qubit>,
    pub gates: Vec<Gate>,
    /// Read-out qubit → clbit holding its result.
    pub readout_clbits: BTreeMap<Qubit, usize>,
}

impl GateCircuit {
    pub fn n_clbits(&self) -> usize {
        self.clbit_owner.len()
    }

    /// Inserts `pre`'s gates before this circuit's own.
    pub fn prepend(&mut self, pre: &GateCircuit) -> Result<(), CompileError> {
        if pre.n_qubits > self.n_qubits || !pre.gates.iter().all(Gate::is_unitary) {
            return Err(CompileError::BadPreCircuit);
        }
        self.gates.splice(0..0, pre.gates.iter().cloned());
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("circuit serializes")
    }
}

#[derive(Debug, Error)]
pub enum CompileError {
    #[error("program is not well formed:\n{0}")]
    Invalid(ValidationReport),
    #[error("read-out basis of qubit {0} is not orthonormal")]
    NotOrthonormal(Qubit),
    #[error("matrix is not unitary")]
    NonUnitary,
    #[error("pre-circuit must be unitary and fit the compiled circuit")]
    BadPreCircuit,
    #[error(transparent)]
    Rewrite(#[from] RewriteError),
}

/// Euler angles `(θ₁, θ₂, θ₃)` with `u ≐ RZ(θ₁)·RY(θ₂)·RZ(θ₃)` up to global phase.
pub fn decompose_unitary_1q(u: &Mat2<f64>) -> Result<(f64, f64, f64), CompileError> {
    let uu = kernel::mat_mul(&dagger(u), u);
    let id_err = (uu[0][0] - 1.0).norm() + (uu[1][1] - 1.0).norm() + uu[0][1].norm() + uu[1][0].norm();
    if id_err > 1e-9 {
        return Err(CompileError::NonUnitary);
    }
    // RZ(a)RY(b)RZ(c) = [[cos b/2, -e^{ic} sin b/2], [e^{ia} sin b/2, e^{i(a+c)} cos b/2]]
    let b = 2.0 * u[1][0].norm().atan2(u[0][0].norm());
    if u[0][0].norm() > 1e-12 {
        let v = scale(u, Complex64::from_polar(1.0, -u[0][0].arg()));
        let a = if v[1][0].norm() > 1e-12 { v[1][0].arg() } else { 0.0 };
        Ok((a, b, v[1][1].arg() - a))
    } else {
        // b = π: only the off-diagonal phases matter
        let v = scale(u, Complex64::from_polar(1.0, -u[1][0].arg()));
        Ok((0.0, b, (-v[0][1]).arg()))
    }
}

fn dagger(u: &Mat2<f64>) -> Mat2<f64> {
    [[u[0][0].conj(), u[1][0].conj()], [u[0][1].conj(), u[1][1].conj()]]
}

fn scale(u: &Mat2<f64>, s: Complex64) -> Mat2<f64> {
    [[u[0][0] * s, u[0][1] * s], [u[1][0] * s, u[1][1] * s]]
}

/// Gates taking `|0⟩` to `ket` up to global phase: `RY(θ)` then `RZ(φ)`.
pub fn state_prep_gates(q: Qubit, ket: &Ket<f64>) -> Vec<Gate> {
    let theta = 2.0 * ket[1].norm().atan2(ket[0].norm());
    let phi = ket[1].arg() - ket[0].arg();
    let mut out = Vec::new();
    if theta.abs() > 1e-15 {
        out.push(Gate::RY { theta, q });
    }
    if phi.abs() > 1e-15 && ket[1].norm() > 1e-15 {
        out.push(Gate::RZ { theta: phi, q });
    }
    out
}

/// Circuit preparing the given input states from `|0…0⟩`.
pub fn input_circuit(n_qubits: usize, inputs: &InputAssignment) -> GateCircuit {
    GateCircuit {
        n_qubits,
        gates: inputs.iter().flat_map(|(q, k)| state_prep_gates(*q, k)).collect(),
        ..GateCircuit::default()
    }
}

/// Gates rotating the read-out basis onto the computational one.
fn basis_change(q: Qubit, basis: &Basis) -> Result<Vec<Gate>, CompileError> {
    let plane = |a: Angle| vec![Gate::RZ { theta: -a.radians(), q }, Gate::H { q }];
    Ok(match basis {
        Basis::Z => Vec::new(),
        Basis::X => vec![Gate::H { q }],
        Basis::Y => plane(Angle::new(PI / 2.0)),
        Basis::FromAngle(a) => plane(*a),
        Basis::FromTuples(k0, k1) => {
            if !basis.is_orthonormal() {
                return Err(CompileError::NotOrthonormal(q));
            }
            let u = [[k0[0].conj(), k0[1].conj()], [k1[0].conj(), k1[1].conj()]];
            let (t1, t2, t3) = decompose_unitary_1q(&u)?;
            vec![
                Gate::RZ { theta: t3, q },
                Gate::RY { theta: t2, q },
                Gate::RZ { theta: t1, q },
            ]
        }
    })
}

struct Layout {
    n_qubits: usize,
    clbit: BTreeMap<Qubit, usize>,
    readouts: BTreeSet<Qubit>,
}

impl Layout {
    fn new(program: &Program) -> Self {
        let measured: BTreeSet<Qubit> = program
            .iter()
            .filter_map(|c| match c {
                Command::Measure { qubit, .. } | Command::ReadOut { qubit, .. } => Some(*qubit),
                _ => None,
            })
            .collect();
        Layout {
            n_qubits: program.iter().filter(|c| c.is_declaration()).count(),
            clbit: measured.into_iter().enumerate().map(|(i, q)| (q, i)).collect(),
            readouts: program.readout_qubits(),
        }
    }

    fn finish(self, gates: Vec<Gate>) -> GateCircuit {
        GateCircuit {
            n_qubits: self.n_qubits,
            clbit_owner: self.clbit.keys().copied().collect(),
            readout_clbits: self.readouts.iter().map(|q| (*q, self.clbit[q])).collect(),
            gates,
        }
    }
}

fn checked_desugar(program: &Program) -> Result<Program, CompileError> {
    let report = validate(program);
    if !report.ok() {
        return Err(CompileError::Invalid(report));
    }
    Ok(rewrite::desugar(program))
}

/// Measurements become mid-circuit measurements; every dependency becomes a
/// classically conditioned Pauli, one per domain bit.
pub fn compile_classical_ctrl(program: &Program) -> Result<GateCircuit, CompileError> {
    let program = checked_desugar(program)?;
    let layout = Layout::new(&program);
    let mut gates = Vec::new();
    for cmd in &program {
        match cmd {
            Command::Input(_) => {}
            Command::Prep(q) => gates.push(Gate::H { q: *q }),
            Command::Entangle(a, b) => gates.push(Gate::CZ { a: *a, b: *b }),
            Command::Measure {
                qubit,
                angle,
                s_domain,
                t_domain,
            } => {
                let q = *qubit;
                gates.extend(s_domain.iter().map(|s| Gate::CondX {
                    clbit: layout.clbit[&s],
                    q,
                }));
                gates.extend(t_domain.iter().map(|t| Gate::CondZ {
                    clbit: layout.clbit[&t],
                    q,
                }));
                gates.push(Gate::RZ {
                    theta: -angle.radians(),
                    q,
                });
                gates.push(Gate::H { q });
                gates.push(Gate::Measure {
                    q,
                    clbit: layout.clbit[&q],
                });
            }
            Command::XCorrect { qubit, signal } => {
                gates.extend(signal.iter().map(|s| Gate::CondX {
                    clbit: layout.clbit[&s],
                    q: *qubit,
                }));
            }
            Command::ZCorrect { qubit, signal } => {
                gates.extend(signal.iter().map(|s| Gate::CondZ {
                    clbit: layout.clbit[&s],
                    q: *qubit,
                }));
            }
            Command::ReadOut { qubit, basis } => {
                gates.extend(basis_change(*qubit, basis)?);
                gates.push(Gate::Measure {
                    q: *qubit,
                    clbit: layout.clbit[qubit],
                });
            }
            Command::J { .. } | Command::CZ(..) => unreachable!("desugared"),
        }
    }
    Ok(layout.finish(gates))
}

/// Deferred-measurement translation: each dependency on `s_j` becomes a
/// quantum control from qubit `j` (already rotated into its measurement
/// frame) and all measurements move to the end.
pub fn compile_deferred(program: &Program) -> Result<GateCircuit, CompileError> {
    let (program, _) = rewrite::standardize(program)?;
    let layout = Layout::new(&program);
    let mut gates = Vec::new();
    for cmd in &program {
        match cmd {
            Command::Input(_) => {}
            Command::Prep(q) => gates.push(Gate::H { q: *q }),
            Command::Entangle(a, b) => gates.push(Gate::CZ { a: *a, b: *b }),
            Command::Measure {
                qubit,
                angle,
                s_domain,
                t_domain,
            } => {
                let q = *qubit;
                gates.extend(s_domain.iter().map(|s| Gate::CX { c: s, t: q }));
                gates.extend(t_domain.iter().map(|t| Gate::CZ { a: t, b: q }));
                gates.push(Gate::RZ {
                    theta: -angle.radians(),
                    q,
                });
                gates.push(Gate::H { q });
            }
            Command::XCorrect { qubit, signal } => {
                gates.extend(signal.iter().map(|s| Gate::CX { c: s, t: *qubit }));
            }
            Command::ZCorrect { qubit, signal } => {
                gates.extend(signal.iter().map(|s| Gate::CZ { a: s, b: *qubit }));
            }
            Command::ReadOut { qubit, basis } => gates.extend(basis_change(*qubit, basis)?),
            Command::J { .. } | Command::CZ(..) => unreachable!("desugared"),
        }
    }
    gates.extend(layout.clbit.iter().map(|(q, c)| Gate::Measure { q: *q, clbit: *c }));
    Ok(layout.finish(gates))
}

fn qasm_angle(theta: f64) -> String {
    let a = Angle::new(theta);
    if let Some((mut k, d)) = a.as_pi_fraction() {
        if k > d {
            k -= 2 * d;
        }
        let sign = if k < 0 { "-" } else { "" };
        let body = match (k.abs(), d) {
            (0, _) => return "0".into(),
            (1, 1) => "pi".to_string(),
            (k, 1) => format!("{k}*pi"),
            (1, d) => format!("pi/{d}"),
            (k, d) => format!("{k}*pi/{d}"),
        };
        return format!("{sign}{body}");
    }
    format!("{:?}", a.signed())
}

/// OpenQASM 2.0 text, one instruction per line.
pub fn emit_qasm(circuit: &GateCircuit) -> String {
    let mut out = String::from("OPENQASM 2.0;\ninclude \"qelib1.inc\";\n");
    let _ = writeln!(out, "qreg q[{}];", circuit.n_qubits);
    for q in &circuit.clbit_owner {
        let _ = writeln!(out, "creg c{q}[1];");
    }
    if !circuit.readout_clbits.is_empty() {
        let qs: Vec<String> = circuit.readout_clbits.keys().map(|q| format!("q[{q}]")).collect();
        let _ = writeln!(out, "// readout {}", qs.join(" "));
    }
    let reg = |c: &usize| circuit.clbit_owner[*c];
    for g in &circuit.gates {
        let line = match g {
            Gate::H { q } => format!("h q[{q}];"),
            Gate::X { q } => format!("x q[{q}];"),
            Gate::Z { q } => format!("z q[{q}];"),
            Gate::RZ { theta, q } => {
                if Angle::new(*theta) == Angle::ZERO {
                    continue;
                }
                format!("rz({}) q[{q}];", qasm_angle(*theta))
            }
            Gate::RY { theta, q } => format!("ry({}) q[{q}];", qasm_angle(*theta)),
            Gate::CX { c, t } => format!("cx q[{c}],q[{t}];"),
            Gate::CZ { a, b } => format!("cz q[{a}],q[{b}];"),
            Gate::Measure { q, clbit } => format!("measure q[{q}] -> c{}[0];", reg(clbit)),
            Gate::CondX { clbit, q } => format!("if (c{}==1) x q[{q}];", reg(clbit)),
            Gate::CondZ { clbit, q } => format!("if (c{}==1) z q[{q}];", reg(clbit)),
        };
        out.push_str(&line);
        out.push('\n');
    }
    out
}

#[derive(Debug, Error, PartialEq)]
#[error("line {line}: {message}")]
pub struct QasmError {
    pub line: usize,
    pub message: String,
}

/// Parses the OpenQASM 2.0 subset produced by [`emit_qasm`]; also serves as
/// a grammar check for emitted text. Classical registers must be `c<q>[1]`.
pub fn parse_qasm(text: &str) -> Result<GateCircuit, QasmError> {
    let mut circuit = GateCircuit::default();
    let mut reg_index: BTreeMap<String, usize> = BTreeMap::new();
    let mut saw_header = false;
    let mut saw_qreg = false;
    let mut readouts: Vec<Qubit> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let err = |m: &str| QasmError {
            line: line_no,
            message: m.to_string(),
        };
        let mut line = raw.trim();
        if let Some(rest) = line.strip_prefix("// readout") {
            for tok in rest.split_whitespace() {
                readouts.push(qubit_ref(tok).ok_or_else(|| err("bad readout annotation"))?);
            }
            continue;
        }
        if let Some(i) = line.find("//") {
            line = line[..i].trim();
        }
        if line.is_empty() {
            continue;
        }
        let Some(stmt) = line.strip_suffix(';') else {
            return Err(err("missing ';'"));
        };
        let stmt = stmt.trim();
        if !saw_header {
            if stmt != "OPENQASM 2.0" {
                return Err(err("expected 'OPENQASM 2.0;' header"));
            }
            saw_header = true;
            continue;
        }
        if stmt == "include \"qelib1.inc\"" {
            continue;
        }
        if let Some(rest) = stmt.strip_prefix("qreg ") {
            let n = register_size(rest, "q").ok_or_else(|| err("expected 'qreg q[n]'"))?;
            if saw_qreg {
                return Err(err("only one quantum register is supported"));
            }
            saw_qreg = true;
            circuit.n_qubits = n;
            continue;
        }
        if let Some(rest) = stmt.strip_prefix("creg ") {
            let (name, size) = rest.split_once('[').ok_or_else(|| err("expected 'creg c<q>[1]'"))?;
            let owner: Qubit = name
                .strip_prefix('c')
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| err("classical registers must be named c<qubit>"))?;
            if size.trim() != "1]" {
                return Err(err("classical registers must have one bit"));
            }
            reg_index.insert(name.to_string(), circuit.clbit_owner.len());
            circuit.clbit_owner.push(owner);
            continue;
        }
        if !saw_qreg {
            return Err(err("gate before qreg declaration"));
        }
        let gate = parse_gate(stmt, &reg_index).map_err(|m| err(&m))?;
        let n = circuit.n_qubits;
        let in_range = match &gate {
            Gate::H { q } | Gate::X { q } | Gate::Z { q } | Gate::RZ { q, .. } | Gate::RY { q, .. } => *q < n,
            Gate::Measure { q, .. } | Gate::CondX { q, .. } | Gate::CondZ { q, .. } => *q < n,
            Gate::CX { c, t } => *c < n && *t < n && c != t,
            Gate::CZ { a, b } => *a < n && *b < n && a != b,
        };
        if !in_range {
            return Err(err("qubit index out of range"));
        }
        circuit.gates.push(gate);
    }
    if !saw_header {
        return Err(QasmError {
            line: 1,
            message: "expected 'OPENQASM 2.0;' header".into(),
        });
    }
    for q in readouts {
        let c = circuit.clbit_owner.iter().position(|&o| o == q).ok_or(QasmError {
            line: 0,
            message: format!("readout qubit {q} has no classical register"),
        })?;
        circuit.readout_clbits.insert(q, c);
    }
    Ok(circuit)
}

fn register_size(s: &str, name: &str) -> Option<usize> {
    s.trim()
        .strip_prefix(name)?
        .strip_prefix('[')?
        .strip_suffix(']')?
        .parse()
        .ok()
}

fn qubit_ref(s: &str) -> Option<usize> {
    register_size(s, "q")
}

fn parse_gate(stmt: &str, regs: &BTreeMap<String, usize>) -> Result<Gate, String> {
    if let Some(rest) = stmt.strip_prefix("if") {
        let rest = rest.trim_start().strip_prefix('(').ok_or("expected '(' after if")?;
        let (cond, body) = rest.split_once(')').ok_or("unclosed condition")?;
        let (reg, val) = cond.split_once("==").ok_or("condition must be 'c<q>==1'")?;
        if val.trim() != "1" {
            return Err("condition must compare with 1".into());
        }
        let clbit = *regs
            .get(reg.trim())
            .ok_or_else(|| format!("unknown register '{}'", reg.trim()))?;
        return match parse_gate(body.trim(), regs)? {
            Gate::X { q } => Ok(Gate::CondX { clbit, q }),
            Gate::Z { q } => Ok(Gate::CondZ { clbit, q }),
            _ => Err("only x and z may be conditioned".into()),
        };
    }
    if let Some(rest) = stmt.strip_prefix("measure ") {
        let (q, c) = rest.split_once("->").ok_or("expected 'measure q[i] -> c<q>[0]'")?;
        let q = qubit_ref(q).ok_or("bad qubit reference")?;
        let name = c.trim().strip_suffix("[0]").ok_or("expected c<q>[0]")?;
        let clbit = *regs.get(name).ok_or_else(|| format!("unknown register '{name}'"))?;
        return Ok(Gate::Measure { q, clbit });
    }
    let (head, args) = match stmt.find(|ch: char| ch.is_whitespace()) {
        Some(i) if !stmt[..i].contains('(') => (&stmt[..i], stmt[i..].trim()),
        _ => {
            let close = stmt.find(')').ok_or("expected gate arguments")?;
            (&stmt[..=close], stmt[close + 1..].trim())
        }
    };
    let (name, param) = match head.split_once('(') {
        Some((n, p)) => (n, Some(p.strip_suffix(')').ok_or("unclosed parameter")?)),
        None => (head, None),
    };
    let qs: Vec<usize> = args
        .split(',')
        .map(|a| qubit_ref(a).ok_or_else(|| format!("bad qubit reference '{}'", a.trim())))
        .collect::<Result<_, _>>()?;
    let theta = || -> Result<f64, String> {
        let p = param.ok_or_else(|| format!("{name} needs an angle"))?;
        Ok(parse_angle(p).map_err(|e| e.to_string())?.signed())
    };
    let one = |g: fn(usize) -> Gate| {
        if qs.len() == 1 {
            Ok(g(qs[0]))
        } else {
            Err(format!("{name} takes one qubit"))
        }
    };
    let two = |g: fn(usize, usize) -> Gate| {
        if qs.len() == 2 {
            Ok(g(qs[0], qs[1]))
        } else {
            Err(format!("{name} takes two qubits"))
        }
    };
    match name {
        "h" => one(|q| Gate::H { q }),
        "x" => one(|q| Gate::X { q }),
        "z" => one(|q| Gate::Z { q }),
        "rz" | "ry" if qs.len() != 1 => Err(format!("{name} takes one qubit")),
        "rz" => Ok(Gate::RZ {
            theta: theta()?,
            q: qs[0],
        }),
        "ry" => Ok(Gate::RY {
            theta: theta()?,
            q: qs[0],
        }),
        "cx" => two(|c, t| Gate::CX { c, t }),
        "cz" => two(|a, b| Gate::CZ { a, b }),
        other => Err(format!("unsupported gate '{other}'")),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GateSimMode {
    Exact,
    Shots { shots: usize, seed: u64 },
}

#[derive(Debug, Error)]
pub enum GateSimError {
    #[error("{count} measurements exceed the branch budget of {budget}")]
    BranchBudget { count: usize, budget: usize },
    #[error("gate {0:?} is not unitary")]
    NotUnitary(Gate),
    #[error("conditional reads classical bit {0} before it is written")]
    UnwrittenClbit(usize),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

struct Run<'a> {
    circuit: &'a GateCircuit,
    clbits: Vec<Option<u8>>,
}

impl Run<'_> {
    fn bit(&self, c: usize) -> Result<u8, GateSimError> {
        self.clbits[c].ok_or(GateSimError::UnwrittenClbit(c))
    }

    fn key(&self) -> String {
        self.circuit
            .readout_clbits
            .values()
            .map(|c| if self.clbits[*c] == Some(1) { '1' } else { '0' })
            .collect()
    }

    /// Applies gates from `at` until the next measurement; returns its index.
    fn advance(&self, psi: &mut StateVector<f64>, mut at: usize) -> Result<Option<usize>, GateSimError> {
        while let Some(g) = self.circuit.gates.get(at) {
            match g {
                Gate::H { q } => psi.apply_single(&kernel::hadamard(), *q)?,
                Gate::X { q } => psi.apply_pauli(Pauli::X, *q)?,
                Gate::Z { q } => psi.apply_pauli(Pauli::Z, *q)?,
                Gate::RZ { theta, q } => psi.apply_single(&kernel::rz(*theta), *q)?,
                Gate::RY { theta, q } => psi.apply_single(&kernel::ry(*theta), *q)?,
                Gate::CX { c, t } => psi.apply_cx(*c, *t)?,
                Gate::CZ { a, b } => psi.apply_cz(*a, *b)?,
                Gate::CondX { clbit, q } => {
                    if self.bit(*clbit)? == 1 {
                        psi.apply_pauli(Pauli::X, *q)?;
                    }
                }
                Gate::CondZ { clbit, q } => {
                    if self.bit(*clbit)? == 1 {
                        psi.apply_pauli(Pauli::Z, *q)?;
                    }
                }
                Gate::Measure { .. } => return Ok(Some(at)),
            }
            at += 1;
        }
        Ok(None)
    }

    fn exact(
        &mut self,
        mut psi: StateVector<f64>,
        at: usize,
        dist: &mut BTreeMap<String, f64>,
    ) -> Result<(), GateSimError> {
        let Some(m) = self.advance(&mut psi, at)? else {
            if !self.circuit.readout_clbits.is_empty() {
                *dist.entry(self.key()).or_insert(0.0) += psi.norm_sqr();
            }
            return Ok(());
        };
        let Gate::Measure { q, clbit } = self.circuit.gates[m] else {
            unreachable!()
        };
        let saved = self.clbits[clbit];
        for bit in 0..2u8 {
            let mut branch = psi.clone();
            if branch.collapse(q, bit)? < crate::simulator::PRUNE_WEIGHT {
                continue;
            }
            self.clbits[clbit] = Some(bit);
            self.exact(branch, m + 1, dist)?;
        }
        self.clbits[clbit] = saved;
        Ok(())
    }

    fn sample<R: Rng>(&mut self, mut psi: StateVector<f64>, rng: &mut R) -> Result<String, GateSimError> {
        let mut at = 0;
        while let Some(m) = self.advance(&mut psi, at)? {
            let Gate::Measure { q, clbit } = self.circuit.gates[m] else {
                unreachable!()
            };
            let p1 = psi.prob_one(q)? / psi.norm_sqr();
            let bit = u8::from(rng.random::<f64>() < p1);
            psi.collapse(q, bit)?;
            psi.normalize();
            self.clbits[clbit] = Some(bit);
            at = m + 1;
        }
        Ok(self.key())
    }
}

/// Applies a measurement-free circuit to `psi` in place.
pub fn apply_unitary_circuit(circuit: &GateCircuit, psi: &mut StateVector<f64>) -> Result<(), GateSimError> {
    if let Some(g) = circuit.gates.iter().find(|g| !g.is_unitary()) {
        return Err(GateSimError::NotUnitary(g.clone()));
    }
    let run = Run {
        circuit,
        clbits: Vec::new(),
    };
    run.advance(psi, 0)?;
    Ok(())
}

/// Read-out distribution of a circuit started in `|0…0⟩` with `inputs`
/// prepared first. Empty when nothing is read out.
pub fn gate_simulate(
    circuit: &GateCircuit,
    inputs: &InputAssignment,
    mode: GateSimMode,
    branch_budget: usize,
) -> Result<BTreeMap<String, f64>, GateSimError> {
    let mut full = circuit.clone();
    full.gates.splice(0..0, input_circuit(circuit.n_qubits, inputs).gates);
    let mut dist = BTreeMap::new();
    match mode {
        GateSimMode::Exact => {
            let count = full.gates.iter().filter(|g| matches!(g, Gate::Measure { .. })).count();
            if count > branch_budget {
                return Err(GateSimError::BranchBudget {
                    count,
                    budget: branch_budget,
                });
            }
            let mut run = Run {
                circuit: &full,
                clbits: vec![None; full.n_clbits()],
            };
            run.exact(StateVector::zeros(full.n_qubits), 0, &mut dist)?;
        }
        GateSimMode::Shots { shots, seed } => {
            if full.readout_clbits.is_empty() {
                return Ok(dist);
            }
            for k in 0..shots as u64 {
                let mut run = Run {
                    circuit: &full,
                    clbits: vec![None; full.n_clbits()],
                };
                let key = run.sample(StateVector::zeros(full.n_qubits), &mut substream(seed, k))?;
                *dist.entry(key).or_insert(0.0) += 1.0 / shots as f64;
            }
        }
    }
    Ok(dist)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rand_unitary(rng: &mut ChaCha8Rng) -> Mat2<f64> {
        let (a, b, c, d): (f64, f64, f64, f64) = (rng.random(), rng.random(), rng.random(), rng.random());
        let rz = kernel::rz::<f64>(a * 7.0);
        let ry = kernel::ry::<f64>(b * 7.0);
        let rz2 = kernel::rz::<f64>(c * 7.0);
        scale(
            &kernel::mat_mul(&rz, &kernel::mat_mul(&ry, &rz2)),
            Complex64::from_polar(1.0, d * 7.0),
        )
    }

    fn equal_up_to_phase(a: &Mat2<f64>, b: &Mat2<f64>) -> bool {
        let ip: Complex64 = (0..2)
            .flat_map(|r| (0..2).map(move |c| (r, c)))
            .map(|(r, c)| a[r][c].conj() * b[r][c])
            .sum();
        (ip.norm() - 2.0).abs() < 1e-9
    }

    fn rebuild((t1, t2, t3): (f64, f64, f64)) -> Mat2<f64> {
        kernel::mat_mul(&kernel::rz(t1), &kernel::mat_mul(&kernel::ry(t2), &kernel::rz(t3)))
    }

    #[test]
    fn decompose_reconstructs() {
        let id = [
            [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)],
            [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)],
        ];
        assert!(equal_up_to_phase(&rebuild(decompose_unitary_1q(&id).unwrap()), &id));
        let h = kernel::hadamard::<f64>();
        assert!(equal_up_to_phase(&rebuild(decompose_unitary_1q(&h).unwrap()), &h));
        let x = kernel::pauli_matrix::<f64>(Pauli::X);
        assert!(equal_up_to_phase(&rebuild(decompose_unitary_1q(&x).unwrap()), &x));
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..100 {
            let u = rand_unitary(&mut rng);
            assert!(equal_up_to_phase(&rebuild(decompose_unitary_1q(&u).unwrap()), &u));
        }
        let bad = [[Complex64::new(1.0, 0.0); 2]; 2];
        assert!(matches!(decompose_unitary_1q(&bad), Err(CompileError::NonUnitary)));
    }

    #[test]
    fn measurement_frame_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let alpha = Angle::new(rng.random::<f64>() * 7.0);
            let k = [
                Complex64::new(rng.random(), rng.random()),
                Complex64::new(rng.random(), rng.random()),
            ];
            let psi = StateVector::product(&[k]);
            let (p, _) = kernel::measurement_bras::<f64>(alpha);
            let (direct, _) = psi.project_and_remove(&p, 0).unwrap();
            let mut rotated = psi.clone();
            rotated.apply_single(&kernel::rz(-alpha.radians()), 0).unwrap();
            rotated.apply_single(&kernel::hadamard(), 0).unwrap();
            let (via, _) = rotated.project_and_remove(&kernel::ket_zero(), 0).unwrap();
            assert!((direct.amplitudes()[0] - via.amplitudes()[0]).norm() < 1e-12);
        }
    }

    #[test]
    fn dependency_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let x = kernel::pauli_matrix::<f64>(Pauli::X);
        let z = kernel::pauli_matrix::<f64>(Pauli::Z);
        let times = |b: &Ket<f64>, m: &Mat2<f64>| [b[0] * m[0][0] + b[1] * m[1][0], b[0] * m[0][1] + b[1] * m[1][1]];
        let proportional = |a: &Ket<f64>, b: &Ket<f64>| (a[0] * b[1] - a[1] * b[0]).norm() < 1e-12;
        for _ in 0..50 {
            let alpha = Angle::new(rng.random::<f64>() * 7.0);
            let (p, _) = kernel::measurement_bras::<f64>(alpha);
            let (pn, _) = kernel::measurement_bras::<f64>(-alpha);
            let (pp, _) = kernel::measurement_bras::<f64>(alpha + Angle::PI);
            assert!(proportional(&times(&p, &x), &pn));
            let pz = times(&p, &z);
            assert!((pz[0] - pp[0]).norm() < 1e-12 && (pz[1] - pp[1]).norm() < 1e-12);
        }
    }

    #[test]
    fn basic_translations() {
        let p = Program::new(vec![Command::Prep(0), Command::Prep(1), Command::Entangle(0, 1)]);
        let c = compile_classical_ctrl(&p).unwrap();
        assert_eq!(c.gates[2], Gate::CZ { a: 0, b: 1 });
        let p = Program::new(vec![Command::Prep(0), Command::measure(0, 0.0)]);
        let c = compile_classical_ctrl(&p).unwrap();
        assert_eq!(
            c.gates[1..],
            [
                Gate::RZ { theta: 0.0, q: 0 },
                Gate::H { q: 0 },
                Gate::Measure { q: 0, clbit: 0 }
            ]
        );
    }

    #[test]
    fn qasm_lines() {
        let c = GateCircuit {
            n_qubits: 3,
            clbit_owner: vec![0],
            gates: vec![
                Gate::CZ { a: 0, b: 1 },
                Gate::Measure { q: 0, clbit: 0 },
                Gate::CondX { clbit: 0, q: 2 },
            ],
            readout_clbits: BTreeMap::new(),
        };
        let text = emit_qasm(&c);
        assert!(text.starts_with("OPENQASM 2.0;\ninclude \"qelib1.inc\";\nqreg q[3];\ncreg c0[1];\n"));
        assert!(text.contains("cz q[0],q[1];\n"));
        assert!(text.contains("if (c0==1) x q[2];\n"));
        assert_eq!(parse_qasm(&text).unwrap(), c);
    }

    #[test]
    fn qasm_angles() {
        assert_eq!(qasm_angle(-PI / 2.0), "-pi/2");
        assert_eq!(qasm_angle(PI), "pi");
        assert_eq!(qasm_angle(3.0 * PI / 4.0), "3*pi/4");
        assert_eq!(qasm_angle(0.25), "0.25");
    }

    #[test]
    fn qasm_parser_rejects_garbage() {
        assert!(parse_qasm("qreg q[1];").is_err());
        assert!(parse_qasm("OPENQASM 2.0;\nqreg q[1];\nfoo q[0];").is_err());
        assert!(parse_qasm("OPENQASM 2.0;\nqreg q[1];\nh q[3];").is_err());
        assert!(parse_qasm("OPENQASM 2.0;\nqreg q[1];\nh q[0]").is_err());
    }

    #[test]
    fn hadamard_measure_exact() {
        let c = GateCircuit {
            n_qubits: 1,
            clbit_owner: vec![0],
            gates: vec![Gate::H { q: 0 }, Gate::Measure { q: 0, clbit: 0 }],
            readout_clbits: [(0, 0)].into_iter().collect(),
        };
        let d = gate_simulate(&c, &InputAssignment::new(), GateSimMode::Exact, 20).unwrap();
        assert!((d["0"] - 0.5).abs() < 1e-12 && (d["1"] - 0.5).abs() < 1e-12);
        assert!(
            gate_simulate(&GateCircuit::default(), &InputAssignment::new(), GateSimMode::Exact, 20)
                .unwrap()
                .is_empty()
        );
    }

    #[test]
    fn state_prep_reaches_target() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..50 {
            let mut k = StateVector::product(&[[
                Complex64::new(rng.random(), rng.random()),
                Complex64::new(rng.random(), rng.random()),
            ]]);
            k.normalize();
            let ket = [k.amplitudes()[0], k.amplitudes()[1]];
            let mut psi = StateVector::<f64>::zeros(1);
            for g in state_prep_gates(0, &ket) {
                match g {
                    Gate::RY { theta, q } => psi.apply_single(&kernel::ry(theta), q).unwrap(),
                    Gate::RZ { theta, q } => psi.apply_single(&kernel::rz(theta), q).unwrap(),
                    _ => unreachable!(),
                }
            }
            assert!(psi.fidelity(&k) > 1.0 - 1e-12);
        }
    }

    #[test]
    fn deferred_measures_last() {
        let p = Program::new(vec![
            Command::Input(0),
            Command::Prep(1),
            Command::Prep(2),
            Command::j(0.0, 0, 1),
            Command::j(0.0, 1, 2),
            Command::readout(2, Basis::Z),
        ]);
        let c = compile_deferred(&p).unwrap();
        let first_measure = c.gates.iter().position(|g| !g.is_unitary()).unwrap();
        assert!(c.gates[first_measure..]
            .iter()
            .all(|g| matches!(g, Gate::Measure { .. })));
        let cc = compile_classical_ctrl(&p).unwrap();
        let mut inputs = InputAssignment::new();
        inputs.insert(0, [Complex64::new(0.6, 0.0), Complex64::new(0.8, 0.0)]);
        let a = gate_simulate(&c, &inputs, GateSimMode::Exact, 20).unwrap();
        let b = gate_simulate(&cc, &inputs, GateSimMode::Exact, 20).unwrap();
        for k in ["0", "1"] {
            assert!((a[k] - b[k]).abs() < 1e-9);
        }
        assert!((a["0"] - 0.36).abs() < 1e-9);
    }
}
