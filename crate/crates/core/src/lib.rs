//! Synthesis, compilation and exact simulation of single-qubit
//! generalized measurements (POVMs) on gate-based quantum computers.
//!
//! An `n`-element POVM acting on one target qubit becomes a projective
//! measurement on a register of `ceil(log2 n)` ancilla qubits: the joint
//! unitary entangles each measurement branch `M_i |psi>` with ancilla
//! label `i`, so reading the register in the computational basis realizes
//! the POVM and leaves the target in the correct post-measurement state.
//! The dilation unitary is built as a chain of `n - 1` two-outcome
//! modules, each consisting of a pair of controlled y-rotations and two
//! controlled outcome unitaries.
//!
//! Pipeline:
//!
//! 1. [`povm`] — validate measurement operators ([`KrausSet`]), compute
//!    outcome probabilities and post-measurement states.
//! 2. [`synthesis`] — extract per-module parameters ([`SynthesisPlan`])
//!    from the operators, or rebuild operators from a plan.
//! 3. [`compiler`] — lower a plan to `{X, Ry, Rz, CNOT}` gates, with an
//!    exponential (no extra qubits) or linear (work-ancilla) strategy for
//!    multi-controlled rotations.
//! 4. [`sim`] — run the circuit exactly and compare against the analytic
//!    branches.
//!
//! ```
//! use povmc::{compile, extract_modules, run, compare_to_analytic};
//! use povmc::{KrausSet, LoweringMode, Qubit1State};
//!
//! let povm = KrausSet::trine();
//! let plan = extract_modules(&povm).unwrap();
//! let circuit = compile(&plan, LoweringMode::Exponential).unwrap();
//! let psi = Qubit1State::zero();
//! let state = run(&circuit, &psi).unwrap();
//! let report = compare_to_analytic(&state, &povm, &psi, &plan).unwrap();
//! assert!(report.min_fidelity() > 1.0 - 1e-9);
//! ```

pub mod circuit;
pub mod compiler;
pub mod numerics;
pub mod povm;
pub mod sim;
pub mod synthesis;

pub use circuit::{cost, emit_qasm, circuit_unitary, Circuit, CostReport, Gate, QubitLayout};
pub use compiler::{
    compile, compile_with, compile_with_steps, lower_controlled_unitary, lower_mc_rotation, Axis,
    CompileError, CompileOptions, Control, LoweringMode, ModuleStep,
};
pub use numerics::{fidelity, random_unitary, svd2, zyz_decompose, Mat2, Svd2Result, ZyzAngles};
pub use povm::{
    outcome_probabilities, post_measurement_state, random_povm, KrausSet, PovmError, Qubit1State,
};
pub use sim::{
    ancilla_distribution, compare_to_analytic, conditional_target_state, run, AncillaDistribution,
    BranchReport, SimError, Statevector,
};
pub use synthesis::{
    dilation_state, extract_modules, outcome_labels, reconstruct_kraus, trine_plan, ModuleParams,
    SynthesisError, SynthesisPlan,
};
