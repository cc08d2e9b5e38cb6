//! Builders for the standard example programs.

use std::collections::BTreeSet;
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::compiler::{Gate, GateCircuit};
use crate::distributed::PartitionPlan;
use crate::ir::{Angle, Basis, Command, Program, Qubit};
use crate::rewrite;
use crate::simulator::InputAssignment;

/// `[Input 0; Prep 1; Prep 2; J 0 0 1; J 0 1 2]`: moves the state of qubit 0 to qubit 2.
pub fn teleport_program() -> Program {
    Program::new(vec![
        Command::Input(0),
        Command::Prep(1),
        Command::Prep(2),
        Command::j(0.0, 0, 1),
        Command::j(0.0, 1, 2),
    ])
}

/// Small cluster patterns with a known circuit equivalent. Labels are
/// 0-based; inputs come first, outputs last.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ClusterSpec {
    Linear3(Angle, Angle),
    Linear4(Angle, Angle, Angle),
    Horseshoe(Angle, Angle),
    ReverseHorseshoe(Angle, Angle),
    Box(Angle, Angle),
}

impl ClusterSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ClusterSpec::Linear3(..) => "linear3",
            ClusterSpec::Linear4(..) => "linear4",
            ClusterSpec::Horseshoe(..) => "horseshoe",
            ClusterSpec::ReverseHorseshoe(..) => "reverse-horseshoe",
            ClusterSpec::Box(..) => "box",
        }
    }

    /// Builds a variant from its name and angle list.
    pub fn from_name(name: &str, angles: &[f64]) -> Option<ClusterSpec> {
        let a = |i: usize| angles.get(i).copied().map(Angle::new);
        let need = if name == "linear4" { 3 } else { 2 };
        if angles.len() != need {
            return None;
        }
        Some(match name {
            "linear3" => ClusterSpec::Linear3(a(0)?, a(1)?),
            "linear4" => ClusterSpec::Linear4(a(0)?, a(1)?, a(2)?),
            "horseshoe" => ClusterSpec::Horseshoe(a(0)?, a(1)?),
            "reverse-horseshoe" => ClusterSpec::ReverseHorseshoe(a(0)?, a(1)?),
            "box" => ClusterSpec::Box(a(0)?, a(1)?),
            _ => return None,
        })
    }

    pub fn inputs(&self) -> Vec<Qubit> {
        match self {
            ClusterSpec::Linear3(..) | ClusterSpec::Linear4(..) => vec![0],
            _ => vec![0, 1],
        }
    }

    pub fn outputs(&self) -> Vec<Qubit> {
        match self {
            ClusterSpec::Linear3(..) => vec![2],
            ClusterSpec::Linear4(..) => vec![3],
            _ => vec![2, 3],
        }
    }
}

fn with_declarations(n: usize, inputs: &[Qubit], body: Vec<Command>) -> Program {
    let mut cmds: Vec<Command> = (0..n)
        .map(|q| {
            if inputs.contains(&q) {
                Command::Input(q)
            } else {
                Command::Prep(q)
            }
        })
        .collect();
    cmds.extend(body);
    Program::new(cmds)
}

pub fn cluster_program(spec: ClusterSpec) -> Program {
    let inputs = spec.inputs();
    match spec {
        ClusterSpec::Linear3(a, b) => with_declarations(3, &inputs, vec![Command::j(a, 0, 1), Command::j(b, 1, 2)]),
        ClusterSpec::Linear4(a, b, c) => with_declarations(
            4,
            &inputs,
            vec![Command::j(a, 0, 1), Command::j(b, 1, 2), Command::j(c, 2, 3)],
        ),
        ClusterSpec::Horseshoe(a, b) => with_declarations(
            4,
            &inputs,
            vec![Command::CZ(0, 1), Command::j(a, 0, 2), Command::j(b, 1, 3)],
        ),
        ClusterSpec::ReverseHorseshoe(a, b) => with_declarations(
            4,
            &inputs,
            vec![Command::j(a, 0, 2), Command::j(b, 1, 3), Command::CZ(2, 3)],
        ),
        ClusterSpec::Box(a, b) => with_declarations(
            4,
            &inputs,
            vec![
                Command::CZ(0, 1),
                Command::j(a, 0, 2),
                Command::j(b, 1, 3),
                Command::CZ(2, 3),
            ],
        ),
    }
}

/// Gate circuit on the cluster's inputs (circuit qubit `i` is input `i` and
/// output `i`) with the same action as [`cluster_program`]. Each `J(α)` edge
/// is `H·RZ(α)`.
pub fn cluster_circuit(spec: ClusterSpec) -> GateCircuit {
    let j = |a: Angle, q: usize| [Gate::RZ { theta: a.radians(), q }, Gate::H { q }];
    let mut gates: Vec<Gate> = Vec::new();
    let n_qubits = spec.inputs().len();
    match spec {
        ClusterSpec::Linear3(a, b) => {
            gates.extend(j(a, 0));
            gates.extend(j(b, 0));
        }
        ClusterSpec::Linear4(a, b, c) => {
            gates.extend(j(a, 0));
            gates.extend(j(b, 0));
            gates.extend(j(c, 0));
        }
        ClusterSpec::Horseshoe(a, b) => {
            gates.push(Gate::CZ { a: 0, b: 1 });
            gates.extend(j(a, 0));
            gates.extend(j(b, 1));
        }
        ClusterSpec::ReverseHorseshoe(a, b) => {
            gates.extend(j(a, 0));
            gates.extend(j(b, 1));
            gates.push(Gate::CZ { a: 0, b: 1 });
        }
        ClusterSpec::Box(a, b) => {
            gates.push(Gate::CZ { a: 0, b: 1 });
            gates.extend(j(a, 0));
            gates.extend(j(b, 1));
            gates.push(Gate::CZ { a: 0, b: 1 });
        }
    }
    GateCircuit {
        n_qubits,
        gates,
        ..GateCircuit::default()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Oracle {
    Balanced,
    Constant,
}

/// Deutsch-Jozsa on `n` input bits with read-out optimizations. Qubit 0
/// carries the query, qubit 1 the ancilla, qubits `2..=n+1` the inputs.
pub fn deutsch_jozsa(n: usize, oracle: Oracle) -> Option<Program> {
    if n < 2 {
        return None;
    }
    let last = n + 1;
    let mut cmds: Vec<Command> = (0..=last).map(Command::Prep).collect();
    cmds.push(Command::j(PI, 0, 1));
    if oracle == Oracle::Balanced {
        cmds.extend((2..=last).map(|k| Command::CZ(1, k)));
    }
    cmds.push(Command::readout(1, Basis::Z));
    cmds.extend((2..=last).map(|k| Command::readout(k, Basis::X)));
    Some(Program::new(cmds))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroverVariant {
    /// Two J layers, computational read-out of qubits 4 and 5.
    Six,
    /// One J layer, read-out of qubits 2 and 3 in the `{|−⟩, |+⟩}` basis.
    Four,
}

fn oracle_angle(bit: u8) -> Angle {
    if bit == 1 {
        Angle::ZERO
    } else {
        Angle::PI
    }
}

/// Two-bit Grover search for `oracle = [b0, b1]`. Angle 0 on query qubit
/// `i` marks a 1 on bit `i`, angle π marks a 0.
pub fn grover2(oracle: [u8; 2], variant: GroverVariant) -> Program {
    let (a, b) = (oracle_angle(oracle[0]), oracle_angle(oracle[1]));
    let n = match variant {
        GroverVariant::Six => 6,
        GroverVariant::Four => 4,
    };
    let mut cmds: Vec<Command> = (0..n).map(Command::Prep).collect();
    cmds.extend([
        Command::CZ(0, 1),
        Command::j(a, 0, 2),
        Command::j(b, 1, 3),
        Command::CZ(2, 3),
    ]);
    match variant {
        GroverVariant::Six => cmds.extend([
            Command::j(0.0, 2, 4),
            Command::j(0.0, 3, 5),
            Command::readout(4, Basis::Z),
            Command::readout(5, Basis::Z),
        ]),
        GroverVariant::Four => cmds.extend([
            Command::readout(2, Basis::FromAngle(Angle::PI)),
            Command::readout(3, Basis::FromAngle(Angle::PI)),
        ]),
    }
    Program::new(cmds)
}

/// Maps a raw read-out bitstring of [`grover2`] to the searched bits: the
/// four-qubit variant reads them in reverse, the six-qubit one reversed and
/// complemented.
pub fn grover2_decode(variant: GroverVariant, raw: &str) -> String {
    let rev = raw.chars().rev();
    match variant {
        GroverVariant::Four => rev.collect(),
        GroverVariant::Six => rev.map(|c| if c == '0' { '1' } else { '0' }).collect(),
    }
}

/// Parses `"10"`-style oracle bits.
pub fn parse_oracle_bits(s: &str) -> Option<[u8; 2]> {
    let b: Vec<u8> = s
        .chars()
        .map(|c| match c {
            '0' => Some(0),
            '1' => Some(1),
            _ => None,
        })
        .collect::<Option<_>>()?;
    (b.len() == 2).then(|| [b[0], b[1]])
}

/// `m` disjoint standardized linear clusters of `n` qubits, each built from
/// a chain of `J(π/4)` and read out in Z at its end, plus the plan that puts
/// one cluster on each node.
pub fn independent_linear_clusters(m: usize, n: usize) -> (Program, PartitionPlan) {
    assert!(n >= 1, "a cluster needs at least one qubit");
    let mut cmds: Vec<Command> = (0..m * n).map(Command::Prep).collect();
    for k in 0..m {
        let base = k * n;
        cmds.extend((base..base + n - 1).map(|q| Command::j(PI / 4.0, q, q + 1)));
    }
    for k in 0..m {
        cmds.push(Command::readout(k * n + n - 1, Basis::Z));
    }
    let (program, _) = rewrite::standardize(&Program::new(cmds)).expect("linear clusters are well formed");
    let groups = (0..m).map(|k| (k * n..(k + 1) * n).collect::<BTreeSet<_>>()).collect();
    (program, PartitionPlan::new(groups))
}

/// Column-wise regrouping of two 4-qubit clusters; every edge crosses nodes.
pub fn column_plan() -> PartitionPlan {
    PartitionPlan::new((0..4).map(|c| [c, c + 4].into_iter().collect()).collect())
}

/// Qubits the program uses.
pub fn qubit_count(program: &Program) -> usize {
    program.spaces().computation.len()
}

/// `J` and `CZ` commands.
pub fn high_level_count(program: &Program) -> usize {
    program
        .iter()
        .filter(|c| c.kind() == crate::ir::CommandKind::HighLevel)
        .count()
}

/// A named program with the input states it is normally run with.
#[derive(Clone, Debug)]
pub struct CorpusEntry {
    pub name: String,
    pub program: Program,
    pub inputs: InputAssignment,
}

pub fn teleport_input() -> InputAssignment {
    [(0, [Complex64::new(0.6, 0.0), Complex64::new(0.8, 0.0)])]
        .into_iter()
        .collect()
}

/// Every example program.
pub fn corpus() -> Vec<CorpusEntry> {
    let entry = |name: String, program: Program, inputs: InputAssignment| CorpusEntry { name, program, inputs };
    let mut out = vec![entry("teleport".into(), teleport_program(), teleport_input())];
    for n in [2, 3] {
        for (o, tag) in [(Oracle::Balanced, "balanced"), (Oracle::Constant, "constant")] {
            out.push(entry(
                format!("dj{n}-{tag}"),
                deutsch_jozsa(n, o).expect("n >= 2"),
                InputAssignment::new(),
            ));
        }
    }
    for (variant, tag) in [(GroverVariant::Four, "four"), (GroverVariant::Six, "six")] {
        for bits in ["00", "01", "10", "11"] {
            let oracle = parse_oracle_bits(bits).expect("literal bits");
            out.push(entry(
                format!("grover2-{tag}-{bits}"),
                grover2(oracle, variant),
                InputAssignment::new(),
            ));
        }
    }
    let q = Angle::new(PI / 3.0);
    let r = Angle::new(PI / 5.0);
    let plus_i = [
        Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0),
        Complex64::new(0.0, std::f64::consts::FRAC_1_SQRT_2),
    ];
    for spec in [
        ClusterSpec::Linear3(q, r),
        ClusterSpec::Linear4(q, r, Angle::new(PI / 7.0)),
        ClusterSpec::Horseshoe(q, r),
        ClusterSpec::ReverseHorseshoe(q, r),
        ClusterSpec::Box(q, r),
    ] {
        let mut inputs = teleport_input();
        if spec.inputs().len() == 2 {
            inputs.insert(1, plus_i);
        }
        out.push(entry(format!("cluster-{}", spec.name()), cluster_program(spec), inputs));
    }
    let (two, _) = independent_linear_clusters(2, 4);
    out.push(entry("linear-2x4".into(), two, InputAssignment::new()));
    out
}
