#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;

use mbqc::ir::{Angle, Basis, Command, Program, Qubit, Signal};
use mbqc::kernel::Ket;
use mbqc::simulator::InputAssignment;
use mbqc::C64;
use rand::Rng;

/// One raw choice per generated command; interpreted against the program
/// built so far so that every choice sequence yields a valid program.
pub type Choice = (u8, u8, u8, u8, u8);

pub fn random_ket<R: Rng>(rng: &mut R) -> Ket<f64> {
    let v = [
        C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
        C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
    ];
    let n = (v[0].norm_sqr() + v[1].norm_sqr()).sqrt();
    [v[0] / n, v[1] / n]
}

fn pick<T: Copy>(items: &[T], k: u8) -> Option<T> {
    if items.is_empty() {
        None
    } else {
        Some(items[k as usize % items.len()])
    }
}

fn subset(pool: &[Qubit], mask: u8, nonempty: bool) -> Signal {
    let mut s: Signal = pool
        .iter()
        .enumerate()
        .filter(|(i, _)| mask >> (i % 8) & 1 == 1)
        .map(|(_, q)| *q)
        .collect();
    if nonempty && s.is_empty() {
        if let Some(q) = pick(pool, mask) {
            s = Signal::single(q);
        }
    }
    s
}

fn angle(k: u8) -> Angle {
    // mostly multiples of π/4, occasionally irrational
    if k % 5 == 4 {
        Angle::new(0.37 * k as f64)
    } else {
        Angle::new(PI / 4.0 * (k % 8) as f64)
    }
}

fn basis(k: u8, j: u8) -> Basis {
    match k % 5 {
        0 => Basis::X,
        1 => Basis::Y,
        2 => Basis::Z,
        3 => Basis::FromAngle(angle(j)),
        _ => {
            let t = j as f64 * 0.3;
            let (s, c) = t.sin_cos();
            let ph = C64::from_polar(1.0, j as f64 * 0.7);
            Basis::FromTuples([C64::new(c, 0.0), ph * s], [C64::new(-s, 0.0), ph * c])
        }
    }
}

/// Builds a valid program with `n_qubits` declarations followed by at most
/// `max_commands - n_qubits` operations.
pub fn program_from_choices(n_qubits: usize, input_mask: u8, choices: &[Choice], max_commands: usize) -> Program {
    let mut cmds: Vec<Command> = (0..n_qubits)
        .map(|q| {
            if input_mask >> q & 1 == 1 {
                Command::Input(q)
            } else {
                Command::Prep(q)
            }
        })
        .collect();
    let mut alive: Vec<Qubit> = (0..n_qubits).collect();
    let mut measured: Vec<Qubit> = Vec::new();
    for &(op, a, b, c, d) in choices {
        if cmds.len() >= max_commands {
            break;
        }
        let two = |alive: &[Qubit]| -> Option<(Qubit, Qubit)> {
            if alive.len() < 2 {
                return None;
            }
            let i = a as usize % alive.len();
            let j = (i + 1 + b as usize % (alive.len() - 1)) % alive.len();
            Some((alive[i], alive[j]))
        };
        let cmd = match op % 9 {
            0 | 1 => two(&alive).map(|(x, y)| Command::Entangle(x, y)),
            2 | 3 => pick(&alive, a)
                .map(|q| Command::measure_dep(q, angle(b), subset(&measured, c, false), subset(&measured, d, false))),
            4 => pick(&alive, a).map(|q| Command::x(q, subset(&measured, c, true))),
            5 => pick(&alive, a).map(|q| Command::z(q, subset(&measured, c, true))),
            6 => two(&alive).map(|(x, y)| Command::j(angle(c), x, y)),
            7 => two(&alive).map(|(x, y)| Command::CZ(x, y)),
            _ => pick(&alive, a).map(|q| Command::readout(q, basis(b, c))),
        };
        let Some(cmd) = cmd else { continue };
        // corrections with an empty domain are legal but carry no information
        if matches!(&cmd, Command::XCorrect { signal, .. } | Command::ZCorrect { signal, .. } if signal.is_empty()) {
            continue;
        }
        match &cmd {
            Command::Measure { qubit, .. } => {
                alive.retain(|x| x != qubit);
                measured.push(*qubit);
            }
            Command::J { source, .. } => {
                alive.retain(|x| x != source);
                measured.push(*source);
            }
            Command::ReadOut { qubit, .. } => alive.retain(|x| x != qubit),
            _ => {}
        }
        cmds.push(cmd);
    }
    Program::new(cmds)
}

pub fn random_program<R: Rng>(rng: &mut R, max_qubits: usize, max_commands: usize) -> Program {
    let n = rng.random_range(1..=max_qubits);
    let mask: u8 = rng.random();
    let choices: Vec<Choice> = (0..2 * max_commands).map(|_| rng.random()).collect();
    program_from_choices(n, mask, &choices, max_commands)
}

pub fn random_inputs<R: Rng>(rng: &mut R, program: &Program) -> InputAssignment {
    program
        .spaces()
        .inputs
        .into_iter()
        .map(|q| (q, random_ket(rng)))
        .collect()
}

pub fn tv_distance(a: &BTreeMap<String, f64>, b: &BTreeMap<String, f64>) -> f64 {
    let keys: BTreeSet<&String> = a.keys().chain(b.keys()).collect();
    0.5 * keys
        .into_iter()
        .map(|k| (a.get(k).unwrap_or(&0.0) - b.get(k).unwrap_or(&0.0)).abs())
        .sum::<f64>()
}

pub fn max_dist_diff(a: &BTreeMap<String, f64>, b: &BTreeMap<String, f64>) -> f64 {
    let keys: BTreeSet<&String> = a.keys().chain(b.keys()).collect();
    keys.into_iter()
        .map(|k| (a.get(k).unwrap_or(&0.0) - b.get(k).unwrap_or(&0.0)).abs())
        .fold(0.0, f64::max)
}
