//! Partitioning a program across simulated nodes that share only classical
//! measurement outcomes.
//!
//! Each node owns the state of its own qubits. Entanglement between groups
//! cannot be simulated this way; such commands go to a central record and a
//! strict run refuses them.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::corpus;
use crate::ir::{validate, Command, Program, Qubit, ValidationReport};
use crate::kernel::StateVector;
use crate::rewrite;
use crate::rng::{substream, SimRng};
use crate::simulator::{self, InputAssignment, OutcomeMap, QubitOrder, SimError, SimOptions, SimState};

/// Ordered list of disjoint qubit groups, one per node.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PartitionPlan {
    pub groups: Vec<BTreeSet<Qubit>>,
}

impl PartitionPlan {
    pub fn new(groups: Vec<BTreeSet<Qubit>>) -> Self {
        PartitionPlan { groups }
    }

    /// One group holding every qubit of `program`.
    pub fn single(program: &Program) -> Self {
        PartitionPlan::new(vec![program.spaces().computation])
    }

    /// Parses a JSON array of arrays of qubit labels.
    pub fn from_json(text: &str) -> Result<Self, DistError> {
        let groups: Vec<Vec<Qubit>> = serde_json::from_str(text)
            .map_err(|e| DistError::Plan(format!("plan must be an array of arrays of qubits: {e}")))?;
        Ok(PartitionPlan::new(
            groups.into_iter().map(|g| g.into_iter().collect()).collect(),
        ))
    }

    fn node_of(&self) -> BTreeMap<Qubit, usize> {
        self.groups
            .iter()
            .enumerate()
            .flat_map(|(i, g)| g.iter().map(move |q| (*q, i)))
            .collect()
    }

    /// Checks that the groups partition the computation space of `program`.
    pub fn check(&self, program: &Program) -> Result<(), DistError> {
        let mut seen = BTreeSet::new();
        for (i, g) in self.groups.iter().enumerate() {
            if g.is_empty() {
                return Err(DistError::Plan(format!("group {i} is empty")));
            }
            for q in g {
                if !seen.insert(*q) {
                    return Err(DistError::Plan(format!("qubit {q} appears in more than one group")));
                }
            }
        }
        let v = program.spaces().computation;
        if let Some(q) = v.difference(&seen).next() {
            return Err(DistError::Plan(format!("qubit {q} is not assigned to any group")));
        }
        if let Some(q) = seen.difference(&v).next() {
            return Err(DistError::Plan(format!("qubit {q} is not used by the program")));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum DistError {
    #[error("invalid plan: {0}")]
    Plan(String),
    #[error("program is not well formed:\n{0}")]
    Invalid(ValidationReport),
    #[error("plan is not separable: {} entangling command(s) cross groups", .0.len())]
    NotSeparable(Vec<(usize, Command)>),
    #[error("node {node} timed out waiting for the outcome of qubit {qubit}")]
    Timeout { node: usize, qubit: Qubit },
    #[error("node {0} stopped because another node failed")]
    Aborted(usize),
    #[error("node {node}: {source}")]
    Sim { node: usize, source: SimError },
}

/// Commands of one node, tagged with their index in the desugared program.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeProgram {
    pub node: usize,
    pub qubits: BTreeSet<Qubit>,
    pub commands: Vec<(usize, Command)>,
    /// Qubits measured elsewhere whose outcomes this node's signals read.
    pub foreign_signals: BTreeSet<Qubit>,
}

impl NodeProgram {
    pub fn program(&self) -> Program {
        self.commands.iter().map(|(_, c)| c.clone()).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DistributedProgram {
    pub nodes: Vec<NodeProgram>,
    /// Entanglers whose endpoints lie on different nodes.
    pub central: Vec<(usize, Command)>,
}

impl DistributedProgram {
    /// Interleaves node streams and the central record by original index.
    pub fn merge(&self) -> Program {
        let mut all: Vec<&(usize, Command)> = self
            .nodes
            .iter()
            .flat_map(|n| &n.commands)
            .chain(&self.central)
            .collect();
        all.sort_by_key(|(i, _)| *i);
        all.into_iter().map(|(_, c)| c.clone()).collect()
    }

    pub fn is_separable(&self) -> bool {
        self.central.is_empty()
    }
}

fn prepared(program: &Program, plan: &PartitionPlan) -> Result<Program, DistError> {
    let report = validate(program);
    if !report.ok() {
        return Err(DistError::Invalid(report));
    }
    plan.check(program)?;
    Ok(rewrite::desugar(program))
}

/// Entanglers crossing groups, with their index in the desugared program.
pub fn check_separable(program: &Program, plan: &PartitionPlan) -> Result<Vec<(usize, Command)>, DistError> {
    Ok(build_dist_prog(program, plan)?.central)
}

/// Splits a program into per-node streams plus the central entangler record.
pub fn build_dist_prog(program: &Program, plan: &PartitionPlan) -> Result<DistributedProgram, DistError> {
    let program = prepared(program, plan)?;
    let node_of = plan.node_of();
    let mut nodes: Vec<NodeProgram> = plan
        .groups
        .iter()
        .enumerate()
        .map(|(node, g)| NodeProgram {
            node,
            qubits: g.clone(),
            commands: Vec::new(),
            foreign_signals: BTreeSet::new(),
        })
        .collect();
    let mut central = Vec::new();
    for (i, cmd) in program.into_commands().into_iter().enumerate() {
        let owners: BTreeSet<usize> = cmd.qubits().iter().map(|q| node_of[q]).collect();
        if owners.len() > 1 {
            central.push((i, cmd));
            continue;
        }
        let node = &mut nodes[*owners.first().expect("every command acts on a qubit")];
        for s in cmd.signals() {
            node.foreign_signals
                .extend(s.iter().filter(|q| !node.qubits.contains(q)));
        }
        node.commands.push((i, cmd));
    }
    Ok(DistributedProgram { nodes, central })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Schedule {
    /// One thread per node; outcomes travel over channels.
    Concurrent,
    /// One thread steps every node in global command order.
    Sequential,
}

#[derive(Clone, Debug)]
pub struct DistOptions {
    /// Refuse non-separable plans instead of falling back to one node.
    pub strict: bool,
    /// Deadlock guard for a blocking signal read.
    pub timeout: Duration,
    pub schedule: Schedule,
    pub sim: SimOptions,
}

impl Default for DistOptions {
    fn default() -> Self {
        DistOptions {
            strict: false,
            timeout: Duration::from_secs(30),
            schedule: Schedule::Concurrent,
            sim: SimOptions::default(),
        }
    }
}

/// Outcome of a measured qubit, broadcast to every node.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SignalMessage {
    pub source_qubit: Qubit,
    pub outcome: u8,
}

enum Msg {
    Signal(SignalMessage),
    Abort,
}

#[derive(Clone, Debug)]
pub struct NodeResult {
    pub node: usize,
    pub state: StateVector<f64>,
    pub order: QubitOrder,
    pub outcomes: OutcomeMap,
    pub readouts: OutcomeMap,
    pub wall_clock: Duration,
}

#[derive(Clone, Debug)]
pub struct DistributedResult {
    pub nodes: Vec<NodeResult>,
    /// Read-outs of every node merged by qubit label.
    pub readouts: OutcomeMap,
    pub wall_clock: Duration,
    /// Set when a non-separable plan was replaced by a single node.
    pub fallback: bool,
}

impl DistributedResult {
    pub fn readout_bits(&self) -> String {
        simulator::readout_bits(&self.readouts)
    }
}

/// Local simulation of one node.
struct Worker {
    node: usize,
    state: SimState<f64>,
    rng: SimRng,
    /// Signals received from other nodes and not yet consumed.
    inbox: BTreeMap<Qubit, u8>,
    elapsed: Duration,
}

impl Worker {
    fn new(np: &NodeProgram, inputs: &InputAssignment, seed: u64, opts: &SimOptions) -> Result<Self, DistError> {
        let decls: Program = np
            .commands
            .iter()
            .map(|(_, c)| c)
            .filter(|c| c.is_declaration())
            .cloned()
            .collect();
        let local: InputAssignment = inputs
            .iter()
            .filter(|(q, _)| np.qubits.contains(q))
            .map(|(q, k)| (*q, *k))
            .collect();
        let state = simulator::init(&decls, &local, opts).map_err(|source| DistError::Sim { node: np.node, source })?;
        Ok(Worker {
            node: np.node,
            state,
            rng: substream(seed, np.node as u64),
            inbox: BTreeMap::new(),
            elapsed: Duration::ZERO,
        })
    }

    /// Foreign qubits `cmd` needs that have not yet been delivered.
    fn missing(&self, cmd: &Command) -> Option<Qubit> {
        cmd.signals()
            .into_iter()
            .flat_map(|s| s.iter())
            .find(|q| !self.state.outcomes.contains_key(q) && !self.inbox.contains_key(q))
    }

    /// Executes one local command; returns the outcome it produced, if any.
    fn step(&mut self, cmd: &Command) -> Result<Option<SignalMessage>, DistError> {
        let start = Instant::now();
        for s in cmd.signals() {
            for q in s.iter() {
                if let Some(b) = self.inbox.remove(&q) {
                    self.state.outcomes.insert(q, b);
                }
            }
        }
        simulator::step_weak(&mut self.state, cmd, &mut self.rng).map_err(|source| DistError::Sim {
            node: self.node,
            source,
        })?;
        self.elapsed += start.elapsed();
        Ok(match cmd {
            Command::Measure { qubit, .. } | Command::ReadOut { qubit, .. } => Some(SignalMessage {
                source_qubit: *qubit,
                outcome: self.state.outcomes[qubit],
            }),
            _ => None,
        })
    }

    fn finish(self) -> NodeResult {
        let mut outcomes = self.state.outcomes;
        outcomes.extend(self.inbox);
        NodeResult {
            node: self.node,
            state: self.state.vector,
            order: self.state.order,
            outcomes,
            readouts: self.state.readouts,
            wall_clock: self.elapsed,
        }
    }
}

fn run_node(
    np: &NodeProgram,
    mut worker: Worker,
    inbox: Receiver<Msg>,
    peers: &[Sender<Msg>],
    timeout: Duration,
) -> Result<NodeResult, DistError> {
    let abort = |peers: &[Sender<Msg>]| {
        for p in peers {
            let _ = p.send(Msg::Abort);
        }
    };
    for (_, cmd) in np.commands.iter().filter(|(_, c)| !c.is_declaration()) {
        while let Some(q) = worker.missing(cmd) {
            let waited = Instant::now();
            match inbox.recv_timeout(timeout) {
                Ok(Msg::Signal(m)) => {
                    worker.inbox.insert(m.source_qubit, m.outcome);
                }
                Ok(Msg::Abort) => return Err(DistError::Aborted(np.node)),
                Err(RecvTimeoutError::Timeout | RecvTimeoutError::Disconnected) => {
                    abort(peers);
                    return Err(DistError::Timeout {
                        node: np.node,
                        qubit: q,
                    });
                }
            }
            log::trace!("node {} waited {:?} for qubit {q}", np.node, waited.elapsed());
        }
        match worker.step(cmd) {
            Ok(Some(m)) => {
                for p in peers {
                    let _ = p.send(Msg::Signal(m));
                }
            }
            Ok(None) => {}
            Err(e) => {
                abort(peers);
                return Err(e);
            }
        }
    }
    Ok(worker.finish())
}

fn run_concurrent(
    prog: &DistributedProgram,
    workers: Vec<Worker>,
    timeout: Duration,
) -> Result<Vec<NodeResult>, DistError> {
    let (senders, receivers): (Vec<Sender<Msg>>, Vec<Receiver<Msg>>) =
        prog.nodes.iter().map(|_| mpsc::channel()).unzip();
    std::thread::scope(|scope| {
        let handles: Vec<_> = prog
            .nodes
            .iter()
            .zip(workers)
            .zip(receivers)
            .enumerate()
            .map(|(i, ((np, w), rx))| {
                let peers: Vec<Sender<Msg>> = senders
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| *j != i)
                    .map(|(_, s)| s.clone())
                    .collect();
                scope.spawn(move || run_node(np, w, rx, &peers, timeout))
            })
            .collect();
        drop(senders);
        let results: Vec<Result<NodeResult, DistError>> = handles
            .into_iter()
            .map(|h| h.join().expect("node worker panicked"))
            .collect();
        // report the root failure rather than a peer's abort
        let mut out = Vec::with_capacity(results.len());
        let mut aborted = None;
        for r in results {
            match r {
                Ok(n) => out.push(n),
                Err(DistError::Aborted(n)) => aborted = aborted.or(Some(DistError::Aborted(n))),
                Err(e) => return Err(e),
            }
        }
        match aborted {
            Some(e) => Err(e),
            None => Ok(out),
        }
    })
}

fn run_sequential(prog: &DistributedProgram, mut workers: Vec<Worker>) -> Result<Vec<NodeResult>, DistError> {
    let mut queue: Vec<(usize, usize, &Command)> = prog
        .nodes
        .iter()
        .flat_map(|np| np.commands.iter().map(move |(i, c)| (*i, np.node, c)))
        .filter(|(_, _, c)| !c.is_declaration())
        .collect();
    queue.sort_by_key(|(i, _, _)| *i);
    for (_, node, cmd) in queue {
        if let Some(m) = workers[node].step(cmd)? {
            for (j, w) in workers.iter_mut().enumerate() {
                if j != node {
                    w.inbox.insert(m.source_qubit, m.outcome);
                }
            }
        }
    }
    Ok(workers.into_iter().map(Worker::finish).collect())
}

/// Runs every node's weak simulation; node `k` samples from stream `k` of
/// `seed`, so a single node reproduces `weak_simulate` exactly.
pub fn run_distributed(
    program: &Program,
    plan: &PartitionPlan,
    inputs: &InputAssignment,
    seed: u64,
    opts: &DistOptions,
) -> Result<DistributedResult, DistError> {
    let mut prog = build_dist_prog(program, plan)?;
    let mut fallback = false;
    if !prog.is_separable() {
        if opts.strict {
            return Err(DistError::NotSeparable(prog.central));
        }
        log::warn!(
            "{} entangling command(s) cross nodes; simulating on a single node",
            prog.central.len()
        );
        prog = build_dist_prog(program, &PartitionPlan::single(program))?;
        fallback = true;
    }
    let start = Instant::now();
    let workers = prog
        .nodes
        .iter()
        .map(|np| Worker::new(np, inputs, seed, &opts.sim))
        .collect::<Result<Vec<_>, _>>()?;
    let nodes = match opts.schedule {
        Schedule::Concurrent => run_concurrent(&prog, workers, opts.timeout)?,
        Schedule::Sequential => run_sequential(&prog, workers)?,
    };
    let readouts = nodes.iter().flat_map(|n| n.readouts.clone()).collect();
    Ok(DistributedResult {
        nodes,
        readouts,
        wall_clock: start.elapsed(),
        fallback,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalingRow {
    pub nodes: usize,
    pub qubits_per_node: usize,
    pub trial: usize,
    pub wall_clock_seconds: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ScalingReport {
    pub rows: Vec<ScalingRow>,
}

impl ScalingReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("nodes,qubits_per_node,trial,wall_clock_seconds\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{:.9}\n",
                r.nodes, r.qubits_per_node, r.trial, r.wall_clock_seconds
            ));
        }
        out
    }

    /// Mean wall clock per node count, ascending.
    pub fn means(&self) -> Vec<(usize, f64)> {
        let mut acc: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
        for r in &self.rows {
            let e = acc.entry(r.nodes).or_insert((0.0, 0));
            e.0 += r.wall_clock_seconds;
            e.1 += 1;
        }
        acc.into_iter().map(|(m, (s, c))| (m, s / c as f64)).collect()
    }

    /// Least-squares line through the means: `(slope, intercept, r²)`.
    pub fn linear_fit(&self) -> (f64, f64, f64) {
        let pts = self.means();
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0 as f64).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 as f64 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 as f64 - mx).powi(2)).sum();
        let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
        let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
        let r2 = if sxx > 0.0 && syy > 0.0 {
            sxy * sxy / (sxx * syy)
        } else {
            1.0
        };
        (slope, my - slope * mx, r2)
    }
}

/// Times sequential-worker runs of `m` independent linear clusters of
/// `qubits_per_node` qubits, one cluster per node. Each trial sums
/// `runs_per_trial` runs to lift the signal above timer noise.
pub fn scaling_report(
    qubits_per_node: usize,
    node_counts: &[usize],
    trials: usize,
    runs_per_trial: usize,
    seed: u64,
) -> Result<ScalingReport, DistError> {
    let opts = DistOptions {
        strict: true,
        schedule: Schedule::Sequential,
        ..DistOptions::default()
    };
    let mut rows = Vec::new();
    for &m in node_counts {
        let (program, plan) = corpus::independent_linear_clusters(m, qubits_per_node);
        for trial in 0..trials {
            let start = Instant::now();
            for r in 0..runs_per_trial {
                run_distributed(&program, &plan, &InputAssignment::new(), seed ^ (r as u64), &opts)?;
            }
            rows.push(ScalingRow {
                nodes: m,
                qubits_per_node,
                trial,
                wall_clock_seconds: start.elapsed().as_secs_f64(),
            });
        }
    }
    Ok(ScalingReport { rows })
}
