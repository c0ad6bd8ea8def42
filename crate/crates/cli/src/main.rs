//! Command-line front end: validate a POVM, run the full
//! synthesize-compile-simulate pipeline, reproduce the ideal bar values of
//! the two worked examples, or benchmark gate counts.
//!
//! Exit codes: 0 success, 1 domain failure (invalid POVM, fidelity miss),
//! 2 I/O or parse failure.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use povmc::compiler::CompileOptions;
use povmc::numerics::{c64, svd2};
use povmc::povm::{completeness_residual, RawPovm};
use povmc::*;

/// Hardware reference values quoted from published device runs.
const DEVICE_REFERENCE: &str = include_str!("../data/device_reference.json");

/// Branch fidelity below which the pipeline reports failure.
const FIDELITY_GATE: f64 = 1.0 - 1e-8;

#[derive(Parser)]
#[command(name = "povmc", version, about = "Synthesize, compile and simulate single-qubit POVM measurement circuits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a POVM file against the completeness relation.
    Validate {
        /// POVM JSON file: {"operators": [[[ [re,im],[re,im] ], ...], ...]}
        #[arg(long)]
        input: PathBuf,
        /// Completeness tolerance (max-norm of the residual).
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    /// Full pipeline: validate, synthesize, compile, simulate, compare.
    Run(RunArgs),
    /// Ideal bar values of the worked examples, next to the simulation.
    Repro {
        /// Which example: fig2 (2-element) or fig3 (trine).
        #[arg(value_enum)]
        figure: Figure,
        /// Write the table as JSON plot data.
        #[arg(long)]
        json_out: Option<PathBuf>,
    },
    /// Gate-count table over random POVMs of doubling size.
    Bench {
        #[arg(long, default_value_t = 32)]
        max_n: usize,
        /// Comma-separated subset of exp,linear.
        #[arg(long, default_value = "exp,linear")]
        modes: String,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
}

#[derive(Args)]
struct RunArgs {
    /// POVM JSON file.
    #[arg(long, conflicts_with = "random")]
    input: Option<PathBuf>,
    /// Generate a random n-element POVM instead of reading a file.
    #[arg(long)]
    random: Option<usize>,
    /// Seed for --random.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Lowering mode for multi-controlled rotations.
    #[arg(long, value_enum, default_value_t = ModeArg::Exp)]
    mode: ModeArg,
    /// Initial target state as a_re,a_im,b_re,b_im (normalized).
    #[arg(long, conflicts_with = "bloch")]
    state: Option<String>,
    /// Initial target state as Bloch angles theta,phi.
    #[arg(long)]
    bloch: Option<String>,
    /// Write the compiled circuit as OpenQASM 2.0.
    #[arg(long)]
    qasm_out: Option<PathBuf>,
    /// Write plan, circuit, cost and branch report as one JSON document.
    #[arg(long)]
    json_out: Option<PathBuf>,
    /// Completeness tolerance.
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Exp,
    Linear,
}

impl From<ModeArg> for LoweringMode {
    fn from(value: ModeArg) -> Self {
        match value {
            ModeArg::Exp => LoweringMode::Exponential,
            ModeArg::Linear => LoweringMode::Linear,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Figure {
    Fig2,
    Fig3,
}

/// Failures mapped to process exit codes.
enum CliError {
    /// Invalid POVM, synthesis failure or fidelity miss: exit 1.
    Domain(String),
    /// Unreadable input, bad JSON or bad flag value: exit 2.
    Input(String),
}

impl CliError {
    fn report(self) -> ExitCode {
        match self {
            CliError::Domain(message) => {
                eprintln!("error: {message}");
                ExitCode::from(1)
            }
            CliError::Input(message) => {
                eprintln!("error: {message}");
                ExitCode::from(2)
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Validate { input, tol } => cmd_validate(&input, tol),
        Command::Run(args) => cmd_run(&args),
        Command::Repro { figure, json_out } => cmd_repro(figure, json_out.as_deref()),
        Command::Bench { max_n, modes, seed } => cmd_bench(max_n, &modes, seed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(error) => error.report(),
    }
}

fn read_povm_file(path: &std::path::Path) -> Result<RawPovm, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Input(format!("cannot parse {}: {e}", path.display())))
}

fn write_file(path: &std::path::Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents)
        .map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))
}

// ---------------------------------------------------------------------------
// validate
// ---------------------------------------------------------------------------

fn cmd_validate(input: &std::path::Path, tol: f64) -> Result<(), CliError> {
    let raw = read_povm_file(input)?;
    let residual = completeness_residual(&raw.operators);
    let singulars: Vec<[f64; 2]> = raw.operators.iter().map(|m| svd2(m).singulars).collect();
    let outcome = raw.validate(tol);
    let report = json!({
        "n": singulars.len(),
        "residual": residual,
        "tolerance": tol,
        "valid": outcome.is_ok(),
        "operator_singular_values": singulars,
        "error": outcome.as_ref().err().map(|e| e.to_string()),
    });
    println!("{}", serde_json::to_string_pretty(&report).unwrap());
    outcome
        .map(|_| ())
        .map_err(|e| CliError::Domain(e.to_string()))
}

// ---------------------------------------------------------------------------
// run
// ---------------------------------------------------------------------------

fn parse_floats(text: &str, expect: usize, flag: &str) -> Result<Vec<f64>, CliError> {
    let values: Result<Vec<f64>, _> = text.split(',').map(|s| s.trim().parse::<f64>()).collect();
    match values {
        Ok(v) if v.len() == expect => Ok(v),
        Ok(v) => Err(CliError::Input(format!(
            "--{flag} needs {expect} comma-separated numbers, got {}",
            v.len()
        ))),
        Err(e) => Err(CliError::Input(format!("--{flag}: {e}"))),
    }
}

fn initial_state(args: &RunArgs) -> Result<Qubit1State, CliError> {
    if let Some(text) = &args.state {
        let v = parse_floats(text, 4, "state")?;
        Qubit1State::new(c64(v[0], v[1]), c64(v[2], v[3]))
            .map_err(|e| CliError::Input(format!("--state: {e}")))
    } else if let Some(text) = &args.bloch {
        let v = parse_floats(text, 2, "bloch")?;
        Ok(Qubit1State::from_bloch(v[0], v[1]))
    } else {
        Ok(Qubit1State::zero())
    }
}

fn load_or_generate(args: &RunArgs) -> Result<KrausSet, CliError> {
    match (&args.input, args.random) {
        (Some(path), None) => read_povm_file(path)?
            .validate(args.tol)
            .map_err(|e| CliError::Domain(e.to_string())),
        (None, Some(n)) => {
            if n < 2 {
                return Err(CliError::Input("--random needs n >= 2".into()));
            }
            Ok(random_povm(n, args.seed))
        }
        _ => Err(CliError::Input("exactly one of --input or --random is required".into())),
    }
}

#[derive(Serialize)]
struct PipelineDocument<'a> {
    povm: RawPovm,
    plan: &'a SynthesisPlan,
    circuit: &'a Circuit,
    cost: CostReport,
    report: &'a BranchReport,
}

fn cmd_run(args: &RunArgs) -> Result<(), CliError> {
    let povm = load_or_generate(args)?;
    let psi = initial_state(args)?;
    let plan = extract_modules(&povm).map_err(|e| CliError::Domain(e.to_string()))?;
    let options = CompileOptions::new(args.mode.into());
    let circuit = compile_with(&plan, &options).map_err(|e| CliError::Domain(e.to_string()))?;
    let state = run(&circuit, &psi).map_err(|e| CliError::Domain(e.to_string()))?;
    let report =
        compare_to_analytic(&state, &povm, &psi, &plan).map_err(|e| CliError::Domain(e.to_string()))?;
    let cost = circuit.cost();

    if let Some(path) = &args.qasm_out {
        write_file(path, &circuit.to_qasm())?;
    }
    if let Some(path) = &args.json_out {
        let document = PipelineDocument {
            povm: RawPovm::from(&povm),
            plan: &plan,
            circuit: &circuit,
            cost: cost.clone(),
            report: &report,
        };
        write_file(path, &serde_json::to_string_pretty(&document).unwrap())?;
    }

    println!(
        "n = {}, qubits = {} (1 target + {} ancilla + {} work)",
        povm.n(),
        circuit.qubit_count(),
        circuit.layout.ancilla_count,
        circuit.layout.work_count
    );
    println!(
        "gates: {} CNOT, {} rotations, {} X, depth {}",
        cost.cnot_count, cost.rotation_count, cost.x_count, cost.total_depth
    );
    println!("outcome  probability  expected     fidelity");
    for branch in &report.branches {
        println!(
            "{:>7}  {:>11.9}  {:>11.9}  {:.12}",
            branch.outcome + 1,
            branch.probability,
            branch.expected_probability,
            branch.fidelity
        );
    }
    println!(
        "leakage {:.3e}, max amplitude error {:.3e}",
        report.leakage, report.max_amplitude_error
    );

    let min_fidelity = report.min_fidelity();
    if min_fidelity < FIDELITY_GATE {
        return Err(CliError::Domain(format!(
            "branch fidelity {min_fidelity} below {FIDELITY_GATE}"
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// repro
// ---------------------------------------------------------------------------

/// Little-endian bit string of a basis index: target first, then the
/// ancilla qubits in register order.
fn state_label(index: usize, qubits: usize) -> String {
    (0..qubits).map(|b| if index >> b & 1 == 1 { '1' } else { '0' }).collect()
}

fn cmd_repro(figure: Figure, json_out: Option<&std::path::Path>) -> Result<(), CliError> {
    let (name, povm) = match figure {
        Figure::Fig2 => ("fig2", KrausSet::symmetric_pair()),
        Figure::Fig3 => ("fig3", KrausSet::trine()),
    };
    let psi = Qubit1State::zero();
    let plan = extract_modules(&povm).map_err(|e| CliError::Domain(e.to_string()))?;
    let circuit =
        compile(&plan, LoweringMode::Exponential).map_err(|e| CliError::Domain(e.to_string()))?;
    let state = run(&circuit, &psi).map_err(|e| CliError::Domain(e.to_string()))?;

    let ideal: Vec<f64> = dilation_state(&povm, &psi).iter().map(|z| z.norm_sqr()).collect();
    let simulated = state.probabilities();
    let qubits = circuit.qubit_count();

    let reference: serde_json::Value = serde_json::from_str(DEVICE_REFERENCE).unwrap();
    let figure_reference = &reference[name];

    println!("{name}: ideal vs simulated measurement probabilities");
    println!("state  ideal         simulated");
    let mut rows = Vec::new();
    for (index, (ideal_p, sim_p)) in ideal.iter().zip(&simulated).enumerate() {
        let label = state_label(index, qubits);
        println!("|{label}>  {ideal_p:<12.10}  {sim_p:<12.10}");
        rows.push(json!({ "state": label, "ideal": ideal_p, "simulated": sim_p }));
    }
    println!();
    println!("hardware reference (measured on physical devices; not reproducible here):");
    for device in figure_reference["devices"].as_array().unwrap() {
        println!(
            "  {}: fidelity {} over {} runs",
            device["name"].as_str().unwrap(),
            device["fidelity"],
            device["shots"]
        );
    }

    if let Some(path) = json_out {
        let document = json!({
            "figure": name,
            "description": figure_reference["description"],
            "states": rows,
            "device_reference": figure_reference["devices"],
            "device_note": reference["note"],
        });
        write_file(path, &serde_json::to_string_pretty(&document).unwrap())?;
    }

    // Self-check: the simulation must match the analytic bars exactly.
    let worst = ideal
        .iter()
        .zip(&simulated)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    if worst > 1e-9 {
        return Err(CliError::Domain(format!("simulated bars deviate by {worst}")));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// bench
// ---------------------------------------------------------------------------

fn cmd_bench(max_n: usize, modes: &str, seed: u64) -> Result<(), CliError> {
    if max_n < 2 {
        return Err(CliError::Input("--max-n must be at least 2".into()));
    }
    if max_n > 256 {
        return Err(CliError::Input("--max-n above 256 exceeds the benchmark cap".into()));
    }
    let modes: Vec<LoweringMode> = modes
        .split(',')
        .map(|m| match m.trim() {
            "exp" => Ok(LoweringMode::Exponential),
            "linear" => Ok(LoweringMode::Linear),
            other => Err(CliError::Input(format!("unknown mode '{other}'"))),
        })
        .collect::<Result<_, _>>()?;

    let sizes: Vec<usize> = std::iter::successors(Some(2usize), |n| Some(n * 2))
        .take_while(|&n| n <= max_n)
        .collect();

    let mut table = String::new();
    writeln!(table, "n,mode,qubits,cnots,rotations,x_gates,depth,per_module_cnots").unwrap();
    let mut totals: Vec<(usize, LoweringMode, usize)> = Vec::new();
    for &n in &sizes {
        let povm = random_povm(n, seed.wrapping_add(n as u64));
        let plan = extract_modules(&povm).map_err(|e| CliError::Domain(e.to_string()))?;
        for &mode in &modes {
            let circuit = compile(&plan, mode).map_err(|e| CliError::Domain(e.to_string()))?;
            let cost = circuit.cost();
            let per_module: Vec<String> =
                cost.per_module_cnots.iter().map(|c| c.to_string()).collect();
            let mode_name = match mode {
                LoweringMode::Exponential => "exp",
                LoweringMode::Linear => "linear",
            };
            writeln!(
                table,
                "{n},{mode_name},{},{},{},{},{},\"{}\"",
                circuit.qubit_count(),
                cost.cnot_count,
                cost.rotation_count,
                cost.x_count,
                cost.total_depth,
                per_module.join(";")
            )
            .unwrap();
            totals.push((n, mode, cost.cnot_count));
        }
    }
    print!("{table}");

    // Growth summaries, one comment line per mode.
    for &mode in &modes {
        let series: Vec<(usize, usize)> = totals
            .iter()
            .filter(|(_, m, _)| *m == mode)
            .map(|&(n, _, c)| (n, c))
            .collect();
        match mode {
            LoweringMode::Exponential => {
                let ratios: Vec<String> = series
                    .windows(2)
                    .map(|w| format!("count({})/count({}) = {:.3}", w[1].0, w[0].0, w[1].1 as f64 / w[0].1 as f64))
                    .collect();
                println!("# exp growth: {}", ratios.join(", "));
            }
            LoweringMode::Linear => {
                let normalized: Vec<String> = series
                    .iter()
                    .map(|&(n, c)| {
                        format!("c({n}) = {:.3}", c as f64 / (n as f64 * (n as f64).log2()))
                    })
                    .collect();
                println!("# linear count/(n*log2 n): {}", normalized.join(", "));
            }
        }
    }
    Ok(())
}
