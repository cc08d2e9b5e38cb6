use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use mbqc::compiler::{compile_classical_ctrl, compile_deferred, emit_qasm, parse_qasm};
use mbqc::corpus::{self, ClusterSpec, GroverVariant, Oracle};
use mbqc::distributed::{run_distributed, DistOptions, PartitionPlan, Schedule};
use mbqc::ir::{from_json, parse_text, print_text, to_json, validate};
use mbqc::rewrite::standardize;
use mbqc::simulator::{empirical_distribution, strong_simulate, weak_simulate, InputAssignment, SimOptions};
use mbqc::{Program, C64};
use serde_json::{json, Value};

#[derive(Parser)]
#[command(
    name = "mbqc",
    version,
    about = "Measurement-based quantum programs: check, rewrite, simulate, compile"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check a program against the well-formedness constraints.
    Validate { file: PathBuf },
    /// Rewrite a program into standard form.
    Standardize {
        file: PathBuf,
        /// Write each rule application to stderr as a JSON line.
        #[arg(long)]
        trace: bool,
        #[arg(long, value_enum, default_value_t = ProgramFormat::Text)]
        format: ProgramFormat,
    },
    /// Run a weak (sampled) or strong (exhaustive) simulation.
    Simulate {
        file: PathBuf,
        #[arg(long, value_enum)]
        mode: SimMode,
        /// Weak mode only: sample this many runs and print their distribution.
        #[arg(long)]
        shots: Option<usize>,
        #[command(flatten)]
        run: RunArgs,
        /// Strong mode: most destructive measurements to branch on.
        #[arg(long, default_value_t = 20)]
        branch_budget: usize,
    },
    /// Translate a program into a gate circuit.
    Compile {
        file: PathBuf,
        #[arg(long, value_enum)]
        mode: CompileMode,
        #[arg(long, value_enum, default_value_t = CircuitFormat::Qasm)]
        format: CircuitFormat,
        /// Unitary OpenQASM circuit to run before the compiled one.
        #[arg(long)]
        pre_circuit: Option<PathBuf>,
    },
    /// Simulate a program split over several nodes.
    Distribute {
        file: PathBuf,
        /// JSON array of qubit groups, inline or as a file path.
        #[arg(long)]
        plan: String,
        /// Fail on plans whose entanglers cross nodes instead of falling back to one node.
        #[arg(long)]
        strict: bool,
        /// Step all nodes on one thread instead of one thread per node.
        #[arg(long)]
        sequential: bool,
        /// Write per-node timings as CSV.
        #[arg(long)]
        report: Option<PathBuf>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Print a built-in example program.
    Examples {
        #[command(subcommand)]
        example: Example,
        #[arg(long, value_enum, default_value_t = ProgramFormat::Text, global = true)]
        format: ProgramFormat,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, env = "MCBETH_SEED", default_value_t = 0)]
    seed: u64,
    /// JSON file mapping input qubits to states: {"0": [[re, im], [re, im]]}.
    #[arg(long)]
    inputs: Option<PathBuf>,
    /// Reject programs whose inputs are not all given instead of using |+>.
    #[arg(long)]
    strict_inputs: bool,
}

#[derive(Subcommand)]
enum Example {
    Teleport,
    /// Deutsch-Jozsa on `bits` query bits.
    Dj {
        #[arg(long, default_value_t = 2)]
        bits: usize,
        #[arg(long, value_enum, default_value_t = OracleArg::Balanced)]
        oracle: OracleArg,
    },
    /// Two-qubit Grover search.
    Grover2 {
        /// Searched bitstring, e.g. 10.
        #[arg(long)]
        oracle: String,
        #[arg(long, value_enum, default_value_t = VariantArg::Four)]
        variant: VariantArg,
    },
    /// One of the small cluster patterns.
    Cluster {
        /// linear3, linear4, horseshoe, reverse-horseshoe or box.
        kind: String,
        /// Comma-separated angles, e.g. pi/2,0.3.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        angles: Vec<String>,
    },
    /// Independent linear clusters, one per node.
    Linear {
        #[arg(long, default_value_t = 2)]
        nodes: usize,
        #[arg(long, default_value_t = 4)]
        qubits: usize,
        /// Also write the matching partition plan here.
        #[arg(long)]
        plan_out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ProgramFormat {
    Text,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum SimMode {
    Weak,
    Strong,
}

#[derive(Clone, Copy, ValueEnum)]
enum CompileMode {
    Cc,
    Deferred,
}

#[derive(Clone, Copy, ValueEnum)]
enum CircuitFormat {
    Qasm,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum OracleArg {
    Balanced,
    Constant,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Four,
    Six,
}

/// Failure classes, mapped to exit codes 1 and 2.
enum Failure {
    Invalid(anyhow::Error),
    Usage(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Invalid(e)
    }
}

type CliResult<T> = Result<T, Failure>;

fn usage<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Usage(e.into())
}

fn read_source(path: &Path) -> CliResult<String> {
    if path == Path::new("-") {
        let mut s = String::new();
        io::stdin()
            .read_to_string(&mut s)
            .context("reading stdin")
            .map_err(usage)?;
        return Ok(s);
    }
    fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(usage)
}

/// Parses by extension; stdin and unknown extensions are sniffed.
fn load_program(path: &Path) -> CliResult<Program> {
    let text = read_source(path)?;
    let is_json = match path.extension().and_then(|e| e.to_str()) {
        Some("json") => true,
        Some("mcb") => false,
        _ => text.trim_start().starts_with(['[', '{']),
    };
    let program = if is_json {
        from_json(&text).map_err(|e| anyhow!("{}: {e}", path.display()))?
    } else {
        parse_text(&text).map_err(|e| anyhow!("{}: {e}", path.display()))?
    };
    Ok(program)
}

fn checked_program(path: &Path) -> CliResult<Program> {
    let program = load_program(path)?;
    let report = validate(&program);
    if !report.ok() {
        return Err(Failure::Invalid(anyhow!("{report}")));
    }
    Ok(program)
}

fn load_inputs(path: Option<&Path>) -> CliResult<InputAssignment> {
    let Some(path) = path else {
        return Ok(InputAssignment::new());
    };
    let text = read_source(path)?;
    let raw: BTreeMap<String, [[f64; 2]; 2]> = serde_json::from_str(&text)
        .with_context(|| format!("{}: expected {{\"<qubit>\": [[re, im], [re, im]]}}", path.display()))
        .map_err(usage)?;
    raw.into_iter()
        .map(|(q, [a, b])| {
            let q = q
                .parse()
                .map_err(|_| usage(anyhow!("input key '{q}' is not a qubit label")))?;
            Ok((q, [C64::new(a[0], a[1]), C64::new(b[0], b[1])]))
        })
        .collect()
}

fn sim_options(run: &RunArgs, branch_budget: usize) -> SimOptions {
    SimOptions {
        strict_inputs: run.strict_inputs,
        branch_budget,
    }
}

fn write_program(out: &mut impl Write, program: &Program, format: ProgramFormat) -> io::Result<()> {
    match format {
        ProgramFormat::Text => write!(out, "{}", print_text(program)),
        ProgramFormat::Json => writeln!(out, "{}", to_json(program)),
    }
}

fn histogram(dist: &BTreeMap<String, f64>) -> String {
    const WIDTH: f64 = 40.0;
    let key_width = dist.keys().map(String::len).max().unwrap_or(0).max(1);
    dist.iter()
        .map(|(k, p)| {
            let bar = "#".repeat((p * WIDTH).round() as usize);
            format!("{k:>key_width$}  {p:.6}  {bar}\n")
        })
        .collect()
}

fn print_json(value: &Value) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(anyhow::Error::from)?;
    println!("{text}");
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    let stdout = io::stdout();
    match cli.command {
        Cmd::Validate { file } => {
            checked_program(&file)?;
            println!("ok");
        }
        Cmd::Standardize { file, trace, format } => {
            let program = checked_program(&file)?;
            let (standard, steps) = standardize(&program).map_err(anyhow::Error::from)?;
            if trace {
                eprint!("{}", steps.json_lines());
            }
            write_program(&mut stdout.lock(), &standard, format).map_err(anyhow::Error::from)?;
        }
        Cmd::Simulate {
            file,
            mode,
            shots,
            run,
            branch_budget,
        } => {
            let program = checked_program(&file)?;
            let inputs = load_inputs(run.inputs.as_deref())?;
            let opts = sim_options(&run, branch_budget);
            match (mode, shots) {
                (SimMode::Weak, None) => {
                    let r = weak_simulate(&program, &inputs, run.seed, &opts).map_err(anyhow::Error::from)?;
                    print_json(&r.to_json())?;
                }
                (SimMode::Weak, Some(shots)) => {
                    let dist = empirical_distribution(&program, &inputs, shots, run.seed, &opts)
                        .map_err(anyhow::Error::from)?;
                    print_json(&json!({ "shots": shots, "seed": run.seed, "readouts": dist }))?;
                    eprint!("{}", histogram(&dist));
                }
                (SimMode::Strong, Some(_)) => return Err(usage(anyhow!("--shots only applies to --mode weak"))),
                (SimMode::Strong, None) => {
                    let r = strong_simulate(&program, &inputs, &opts).map_err(anyhow::Error::from)?;
                    print_json(&r.to_json())?;
                    eprint!("{}", histogram(&r.readout_dist));
                }
            }
        }
        Cmd::Compile {
            file,
            mode,
            format,
            pre_circuit,
        } => {
            let program = checked_program(&file)?;
            let mut circuit = match mode {
                CompileMode::Cc => compile_classical_ctrl(&program),
                CompileMode::Deferred => compile_deferred(&program),
            }
            .map_err(anyhow::Error::from)?;
            if let Some(path) = pre_circuit {
                let text = read_source(&path)?;
                let pre = parse_qasm(&text).map_err(|e| anyhow!("{}: {e}", path.display()))?;
                circuit.prepend(&pre).map_err(anyhow::Error::from)?;
            }
            match format {
                CircuitFormat::Qasm => print!("{}", emit_qasm(&circuit)),
                CircuitFormat::Json => println!("{}", circuit.to_json()),
            }
        }
        Cmd::Distribute {
            file,
            plan,
            strict,
            sequential,
            report,
            run,
        } => {
            let program = checked_program(&file)?;
            let plan_text = if plan.trim_start().starts_with('[') {
                plan
            } else {
                read_source(Path::new(&plan))?
            };
            let plan = PartitionPlan::from_json(&plan_text).map_err(usage)?;
            let inputs = load_inputs(run.inputs.as_deref())?;
            let opts = DistOptions {
                strict,
                schedule: if sequential {
                    Schedule::Sequential
                } else {
                    Schedule::Concurrent
                },
                sim: sim_options(&run, 20),
                ..DistOptions::default()
            };
            let r = run_distributed(&program, &plan, &inputs, run.seed, &opts).map_err(anyhow::Error::from)?;
            if r.fallback {
                eprintln!("warning: plan is not separable; ran on a single node");
            }
            let nodes: Vec<Value> = r
                .nodes
                .iter()
                .map(|n| {
                    json!({
                        "node": n.node,
                        "qubit_order": n.order,
                        "outcomes": n.outcomes.iter().map(|(q, b)| (q.to_string(), json!(b))).collect::<serde_json::Map<_, _>>(),
                        "wall_clock_seconds": n.wall_clock.as_secs_f64(),
                    })
                })
                .collect();
            print_json(&json!({
                "readouts": r.readouts.iter().map(|(q, b)| (q.to_string(), json!(b))).collect::<serde_json::Map<_, _>>(),
                "fallback": r.fallback,
                "wall_clock_seconds": r.wall_clock.as_secs_f64(),
                "nodes": nodes,
            }))?;
            if let Some(path) = report {
                let mut csv = String::from("node,qubits,wall_clock_seconds\n");
                for n in &r.nodes {
                    let qubits = plan.groups.get(n.node).map_or(0, |g| g.len());
                    csv.push_str(&format!("{},{},{:.9}\n", n.node, qubits, n.wall_clock.as_secs_f64()));
                }
                fs::write(&path, csv)
                    .with_context(|| format!("writing {}", path.display()))
                    .map_err(usage)?;
            }
        }
        Cmd::Examples { example, format } => {
            let program = example_program(example)?;
            write_program(&mut stdout.lock(), &program, format).map_err(anyhow::Error::from)?;
        }
    }
    Ok(())
}

fn example_program(example: Example) -> CliResult<Program> {
    Ok(match example {
        Example::Teleport => corpus::teleport_program(),
        Example::Dj { bits, oracle } => {
            let oracle = match oracle {
                OracleArg::Balanced => Oracle::Balanced,
                OracleArg::Constant => Oracle::Constant,
            };
            corpus::deutsch_jozsa(bits, oracle).ok_or_else(|| usage(anyhow!("--bits must be at least 2")))?
        }
        Example::Grover2 { oracle, variant } => {
            let bits = corpus::parse_oracle_bits(&oracle)
                .ok_or_else(|| usage(anyhow!("--oracle must be two bits such as 10, got '{oracle}'")))?;
            let variant = match variant {
                VariantArg::Four => GroverVariant::Four,
                VariantArg::Six => GroverVariant::Six,
            };
            corpus::grover2(bits, variant)
        }
        Example::Cluster { kind, angles } => {
            let angles = angles
                .iter()
                .map(|a| mbqc::ir::parse_angle(a).map(|a| a.radians()))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| usage(anyhow!("bad angle: {e}")))?;
            let spec = ClusterSpec::from_name(&kind, &angles).ok_or_else(|| {
                usage(anyhow!(
                    "unknown cluster '{kind}' or wrong angle count (linear4 takes 3, the others 2)"
                ))
            })?;
            corpus::cluster_program(spec)
        }
        Example::Linear {
            nodes,
            qubits,
            plan_out,
        } => {
            if qubits == 0 {
                return Err(usage(anyhow!("--qubits must be at least 1")));
            }
            let (program, plan) = corpus::independent_linear_clusters(nodes, qubits);
            if let Some(path) = plan_out {
                let groups: Vec<Vec<usize>> = plan.groups.iter().map(|g| g.iter().copied().collect()).collect();
                fs::write(
                    &path,
                    serde_json::to_string(&groups).map_err(anyhow::Error::from)? + "\n",
                )
                .with_context(|| format!("writing {}", path.display()))
                .map_err(usage)?;
            }
            program
        }
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
