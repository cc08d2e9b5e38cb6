//! Weak (sampled) and strong (branch-exhaustive) execution.
//!
//! Qubits live in a dense state whose positions follow `order`; a destructive
//! measurement removes the qubit's entry and shifts later positions down.

use std::collections::{BTreeMap, BTreeSet};

use num_complex::Complex;
use rand::Rng;
use rayon::prelude::*;
use serde_json::{json, Value};
use thiserror::Error;

use crate::ir::{validate, Angle, Command, Program, Qubit, Signal, ValidationReport};
use crate::kernel::{self, DensityMatrix, KernelError, Ket, Pauli, StateVector};
use crate::rng::substream;
use crate::scalar::Real;

/// Branches lighter than this are dropped during strong simulation.
pub const PRUNE_WEIGHT: f64 = 1e-14;

pub type QubitOrder = Vec<Qubit>;
pub type OutcomeMap = BTreeMap<Qubit, u8>;
pub type InputAssignment<T = f64> = BTreeMap<Qubit, Ket<T>>;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("program is not well formed:\n{0}")]
    Invalid(ValidationReport),
    #[error("no state supplied for input qubit {0}")]
    MissingInput(Qubit),
    #[error("qubit {0} is not an input but was given a state")]
    UnexpectedInput(Qubit),
    #[error("state for input qubit {0} is not unit norm")]
    NonUnitInput(Qubit),
    #[error("signal references qubit {0}, which has not been measured")]
    UnmeasuredSignal(Qubit),
    #[error("qubit {0} is not present in the state")]
    NotAlive(Qubit),
    #[error("{count} measurements exceed the branch budget of {budget}")]
    BranchBudget { count: usize, budget: usize },
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

#[derive(Clone, Debug)]
pub struct SimOptions {
    /// Missing input states are an error instead of defaulting to `|+⟩`.
    pub strict_inputs: bool,
    /// Maximum number of destructive measurements strong simulation explores.
    pub branch_budget: usize,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            strict_inputs: false,
            branch_budget: 20,
        }
    }
}

/// State of one trajectory.
#[derive(Clone, Debug)]
pub struct SimState<T> {
    pub vector: StateVector<T>,
    pub order: QubitOrder,
    pub outcomes: OutcomeMap,
    pub readouts: OutcomeMap,
}

impl<T: Real> SimState<T> {
    fn position(&self, q: Qubit) -> Result<usize, SimError> {
        self.order.iter().position(|&x| x == q).ok_or(SimError::NotAlive(q))
    }

    fn signal(&self, s: &Signal) -> Result<u8, SimError> {
        s.iter().try_fold(0u8, |acc, q| {
            self.outcomes
                .get(&q)
                .map(|b| acc ^ b)
                .ok_or(SimError::UnmeasuredSignal(q))
        })
    }

    fn record(&mut self, q: Qubit, bit: u8, readout: bool, next: StateVector<T>) {
        let pos = self
            .order
            .iter()
            .position(|&x| x == q)
            .expect("measured qubit is alive");
        self.order.remove(pos);
        self.vector = next;
        self.outcomes.insert(q, bit);
        if readout {
            self.readouts.insert(q, bit);
        }
    }
}

/// Bitstring of read-out outcomes in ascending qubit order.
pub fn readout_bits(readouts: &OutcomeMap) -> String {
    readouts.values().map(|b| if *b == 0 { '0' } else { '1' }).collect()
}

/// `(-1)^{s}·α + t·π` under the given outcomes.
pub fn adapted_angle(angle: Angle, s: u8, t: u8) -> Angle {
    let a = if s == 1 { -angle } else { angle };
    if t == 1 {
        a + Angle::PI
    } else {
        a
    }
}

/// Tensor product over ascending labels of supplied input states and `|+⟩`.
pub fn init<T: Real>(
    program: &Program,
    inputs: &InputAssignment<T>,
    opts: &SimOptions,
) -> Result<SimState<T>, SimError> {
    let spaces = program.spaces();
    for q in inputs.keys() {
        if !spaces.inputs.contains(q) {
            return Err(SimError::UnexpectedInput(*q));
        }
    }
    let declared: BTreeSet<Qubit> = program
        .iter()
        .filter(|c| c.is_declaration())
        .flat_map(|c| c.qubits())
        .collect();
    let mut kets = Vec::with_capacity(declared.len());
    for &q in &declared {
        let ket = if spaces.inputs.contains(&q) {
            match inputs.get(&q) {
                Some(k) => {
                    let n = (k[0].norm_sqr() + k[1].norm_sqr()).to_f64_lossy();
                    if (n - 1.0).abs() > 1e-9 {
                        return Err(SimError::NonUnitInput(q));
                    }
                    *k
                }
                None if opts.strict_inputs => return Err(SimError::MissingInput(q)),
                None => {
                    log::warn!("input qubit {q} has no state; using |+>");
                    kernel::ket_plus()
                }
            }
        } else {
            kernel::ket_plus()
        };
        kets.push(ket);
    }
    Ok(SimState {
        vector: StateVector::product(&kets),
        order: declared.into_iter().collect(),
        outcomes: OutcomeMap::new(),
        readouts: OutcomeMap::new(),
    })
}

/// Measured qubit, bras for outcomes 0 and 1, and whether it is a read-out.
type Destructive<T> = (Qubit, [Ket<T>; 2], bool);

/// Outcome bras for a destructive command, or `None` for a non-measuring one.
fn outcome_bras<T: Real>(state: &SimState<T>, cmd: &Command) -> Result<Option<Destructive<T>>, SimError> {
    Ok(match cmd {
        Command::Measure {
            qubit,
            angle,
            s_domain,
            t_domain,
        } => {
            let a = adapted_angle(*angle, state.signal(s_domain)?, state.signal(t_domain)?);
            let (p, m) = kernel::measurement_bras(a);
            Some((*qubit, [p, m], false))
        }
        Command::ReadOut { qubit, basis } => {
            let (k0, k1) = kernel::basis_vectors(basis)?;
            Some((*qubit, [kernel::bra(&k0), kernel::bra(&k1)], true))
        }
        _ => None,
    })
}

/// Applies a non-measuring primitive command.
fn apply_unitary<T: Real>(state: &mut SimState<T>, cmd: &Command) -> Result<(), SimError> {
    match cmd {
        Command::Input(_) | Command::Prep(_) => {}
        Command::Entangle(a, b) | Command::CZ(a, b) => {
            let (i, j) = (state.position(*a)?, state.position(*b)?);
            state.vector.apply_cz(i, j)?;
        }
        Command::XCorrect { qubit, signal } | Command::ZCorrect { qubit, signal } => {
            if state.signal(signal)? == 1 {
                let p = if matches!(cmd, Command::XCorrect { .. }) {
                    Pauli::X
                } else {
                    Pauli::Z
                };
                let i = state.position(*qubit)?;
                state.vector.apply_pauli(p, i)?;
            }
        }
        _ => unreachable!("measuring commands are handled by the caller"),
    }
    Ok(())
}

/// One sampled step. `J` is expanded on the fly.
pub fn step_weak<T: Real, R: Rng + ?Sized>(
    state: &mut SimState<T>,
    cmd: &Command,
    rng: &mut R,
) -> Result<(), SimError> {
    if let Command::J { angle, source, target } = cmd {
        step_weak(state, &Command::Entangle(*source, *target), rng)?;
        step_weak(state, &Command::measure(*source, -*angle), rng)?;
        return step_weak(state, &Command::x(*target, Signal::single(*source)), rng);
    }
    let Some((q, bras, readout)) = outcome_bras(state, cmd)? else {
        return apply_unitary(state, cmd);
    };
    let pos = state.position(q)?;
    let (s0, w0) = state.vector.project_unchecked(&bras[0], pos)?;
    let (s1, w1) = state.vector.project_unchecked(&bras[1], pos)?;
    let total = (w0 + w1).to_f64_lossy();
    let u: f64 = rng.random();
    let (bit, mut next) = if u * total < w0.to_f64_lossy() {
        (0, s0)
    } else {
        (1, s1)
    };
    next.normalize();
    state.record(q, bit, readout, next);
    Ok(())
}

fn prepare(program: &Program) -> Result<(), SimError> {
    let report = validate(program);
    if report.ok() {
        Ok(())
    } else {
        Err(SimError::Invalid(report))
    }
}

/// Outcome of one sampled run.
#[derive(Clone, Debug)]
pub struct WeakResult<T> {
    pub state: StateVector<T>,
    pub order: QubitOrder,
    pub outcomes: OutcomeMap,
    pub readouts: OutcomeMap,
}

impl<T: Real> WeakResult<T> {
    pub fn readout_bits(&self) -> String {
        readout_bits(&self.readouts)
    }

    pub fn to_json(&self) -> Value {
        let readouts: serde_json::Map<String, Value> =
            self.readouts.iter().map(|(q, b)| (q.to_string(), json!(b))).collect();
        json!({
            "qubit_order": self.order,
            "state": self.state.amplitudes().iter().map(complex_json).collect::<Vec<_>>(),
            "readouts": readouts,
        })
    }
}

fn complex_json<T: Real>(z: &Complex<T>) -> Value {
    json!([z.re.to_f64_lossy(), z.im.to_f64_lossy()])
}

fn run_trajectory<T: Real, R: Rng + ?Sized>(
    program: &Program,
    inputs: &InputAssignment<T>,
    opts: &SimOptions,
    rng: &mut R,
) -> Result<WeakResult<T>, SimError> {
    let mut state = init(program, inputs, opts)?;
    for cmd in program.iter().filter(|c| !c.is_declaration()) {
        step_weak(&mut state, cmd, rng)?;
    }
    Ok(WeakResult {
        state: state.vector,
        order: state.order,
        outcomes: state.outcomes,
        readouts: state.readouts,
    })
}

/// Runs every command once, sampling outcomes from stream 0 of `seed`.
pub fn weak_simulate<T: Real>(
    program: &Program,
    inputs: &InputAssignment<T>,
    seed: u64,
    opts: &SimOptions,
) -> Result<WeakResult<T>, SimError> {
    prepare(program)?;
    run_trajectory(program, inputs, opts, &mut substream(seed, 0))
}

/// Read-out frequencies over `shots` independent runs; shot `k` uses stream `k`.
/// Empty when the program reads nothing out.
pub fn empirical_distribution<T: Real>(
    program: &Program,
    inputs: &InputAssignment<T>,
    shots: usize,
    seed: u64,
    opts: &SimOptions,
) -> Result<BTreeMap<String, f64>, SimError> {
    prepare(program)?;
    if program.readout_qubits().is_empty() || shots == 0 {
        return Ok(BTreeMap::new());
    }
    let counts = (0..shots as u64)
        .into_par_iter()
        .map(|k| {
            run_trajectory(program, inputs, opts, &mut substream(seed, k)).map(|r| {
                let mut m = BTreeMap::new();
                m.insert(r.readout_bits(), 1usize);
                m
            })
        })
        .try_reduce(BTreeMap::new, |mut a, b| {
            for (k, v) in b {
                *a.entry(k).or_insert(0) += v;
            }
            Ok(a)
        })?;
    Ok(counts.into_iter().map(|(k, v)| (k, v as f64 / shots as f64)).collect())
}

/// Output density over surviving qubits and the joint read-out distribution.
#[derive(Clone, Debug)]
pub struct StrongResult<T> {
    pub density: DensityMatrix<T>,
    pub order: QubitOrder,
    pub readout_dist: BTreeMap<String, f64>,
    /// Leaves reached after pruning.
    pub leaves: usize,
}

impl<T: Real> StrongResult<T> {
    pub fn to_json(&self) -> Value {
        let dim = self.density.dim();
        let rows: Vec<Value> = (0..dim)
            .map(|r| Value::Array((0..dim).map(|c| complex_json(&self.density.get(r, c))).collect()))
            .collect();
        json!({
            "qubit_order": self.order,
            "density": rows,
            "readouts": self.readout_dist,
        })
    }
}

struct Explorer<'a, T> {
    commands: Vec<&'a Command>,
    density: Option<DensityMatrix<T>>,
    dist: BTreeMap<String, f64>,
    order: Option<QubitOrder>,
    leaves: usize,
}

impl<T: Real> Explorer<'_, T> {
    fn explore(&mut self, mut state: SimState<T>, mut at: usize) -> Result<(), SimError> {
        while at < self.commands.len() {
            let cmd = self.commands[at];
            at += 1;
            let Some((q, bras, readout)) = outcome_bras(&state, cmd)? else {
                apply_unitary(&mut state, cmd)?;
                continue;
            };
            let pos = state.position(q)?;
            for (bit, bra) in bras.iter().enumerate() {
                let (next, w) = state.vector.project_unchecked(bra, pos)?;
                if w.to_f64_lossy() < PRUNE_WEIGHT {
                    continue;
                }
                let mut child = state.clone();
                child.record(q, bit as u8, readout, next);
                self.explore(child, at)?;
            }
            return Ok(());
        }
        let w = state.vector.norm_sqr().to_f64_lossy();
        if !state.readouts.is_empty() {
            *self.dist.entry(readout_bits(&state.readouts)).or_insert(0.0) += w;
        }
        match &mut self.density {
            Some(rho) => rho.accumulate(&state.vector),
            None => self.density = Some(DensityMatrix::from_pure(&state.vector)),
        }
        self.order.get_or_insert(state.order);
        self.leaves += 1;
        Ok(())
    }
}

/// Explores both outcomes of every measurement. Leaves stay unnormalized, so
/// the density is the weighted sum `Σ p |ψ⟩⟨ψ|` directly.
pub fn strong_simulate<T: Real>(
    program: &Program,
    inputs: &InputAssignment<T>,
    opts: &SimOptions,
) -> Result<StrongResult<T>, SimError> {
    prepare(program)?;
    let count = program.measurement_count();
    if count > opts.branch_budget {
        return Err(SimError::BranchBudget {
            count,
            budget: opts.branch_budget,
        });
    }
    let desugared = crate::rewrite::desugar(program);
    let state = init(&desugared, inputs, opts)?;
    let mut ex = Explorer {
        commands: desugared.iter().filter(|c| !c.is_declaration()).collect(),
        density: None,
        dist: BTreeMap::new(),
        order: None,
        leaves: 0,
    };
    ex.explore(state, 0)?;
    let order = ex.order.unwrap_or_default();
    let density = ex.density.unwrap_or_else(|| DensityMatrix::zeros(order.len()));
    Ok(StrongResult {
        density,
        order,
        readout_dist: ex.dist,
        leaves: ex.leaves,
    })
}
