//! Gate-level circuit representation, cost accounting and OpenQASM output.
//!
//! The gate set is fixed to `{X, Ry, Rz, CNOT}` plus a tracked global
//! phase. Qubit layout convention: qubit 0 is the measurement target,
//! qubits `1..=ancilla_count` form the ancilla register (ancilla qubit `k`
//! carries bit `k` of the outcome label), and any work qubits used by the
//! linear lowering mode come after the register. Basis-state indices are
//! little-endian: index bit `k` is qubit `k`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::{C64, CMat};

/// Hard cap for the dense unitary oracle.
pub const MAX_UNITARY_QUBITS: usize = 12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CircuitError {
    #[error("{qubits} qubits exceed the supported maximum of {max}")]
    TooManyQubits { qubits: usize, max: usize },
    #[error("gate {index} touches qubit {qubit}, but the circuit has {qubits} qubits")]
    QubitOutOfRange { index: usize, qubit: usize, qubits: usize },
    #[error("gate {index} is a CNOT with control == target == {qubit}")]
    SelfControl { index: usize, qubit: usize },
}

/// One primitive gate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "gate", rename_all = "lowercase")]
pub enum Gate {
    X { qubit: usize },
    Ry { qubit: usize, angle: f64 },
    Rz { qubit: usize, angle: f64 },
    #[serde(rename = "cx")]
    Cnot { control: usize, target: usize },
}

impl Gate {
    /// Qubits the gate touches, in (control, target) order for CNOT.
    pub fn qubits(&self) -> Vec<usize> {
        match *self {
            Gate::X { qubit } | Gate::Ry { qubit, .. } | Gate::Rz { qubit, .. } => vec![qubit],
            Gate::Cnot { control, target } => vec![control, target],
        }
    }

    pub fn is_rotation(&self) -> bool {
        matches!(self, Gate::Ry { .. } | Gate::Rz { .. })
    }
}

/// Role assignment for the qubits of one circuit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QubitLayout {
    pub ancilla_count: usize,
    pub work_count: usize,
}

impl QubitLayout {
    pub fn qubit_count(&self) -> usize {
        1 + self.ancilla_count + self.work_count
    }

    pub fn target(&self) -> usize {
        0
    }

    /// Qubit index carrying bit `k` of the outcome label.
    pub fn ancilla(&self, k: usize) -> usize {
        assert!(k < self.ancilla_count);
        1 + k
    }

    pub fn work(&self, k: usize) -> usize {
        assert!(k < self.work_count);
        1 + self.ancilla_count + k
    }

    pub fn work_qubits(&self) -> Vec<usize> {
        (0..self.work_count).map(|k| self.work(k)).collect()
    }
}

/// A compiled circuit: layout, gate list and tracked global phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Circuit {
    pub layout: QubitLayout,
    pub gates: Vec<Gate>,
    /// Phase `phi` such that the implemented operator is
    /// `e^{i phi} * (product of gates)`.
    pub global_phase: f64,
    /// Gate-index ranges `[start, end)` per synthesis module; empty for
    /// hand-built circuits.
    #[serde(default)]
    pub module_spans: Vec<(usize, usize)>,
}

impl Circuit {
    pub fn new(layout: QubitLayout) -> Self {
        Self { layout, gates: Vec::new(), global_phase: 0.0, module_spans: Vec::new() }
    }

    pub fn qubit_count(&self) -> usize {
        self.layout.qubit_count()
    }

    /// Check that every gate stays inside the layout.
    pub fn check(&self) -> Result<(), CircuitError> {
        let qubits = self.qubit_count();
        for (index, gate) in self.gates.iter().enumerate() {
            if let Gate::Cnot { control, target } = gate {
                if control == target {
                    return Err(CircuitError::SelfControl { index, qubit: *control });
                }
            }
            for qubit in gate.qubits() {
                if qubit >= qubits {
                    return Err(CircuitError::QubitOutOfRange { index, qubit, qubits });
                }
            }
        }
        Ok(())
    }

    pub fn cost(&self) -> CostReport {
        cost(self)
    }

    pub fn to_qasm(&self) -> String {
        emit_qasm(self)
    }

    pub fn unitary(&self) -> Result<CMat, CircuitError> {
        circuit_unitary(self)
    }
}

// ---------------------------------------------------------------------------
// Cost accounting
// ---------------------------------------------------------------------------

/// Gate tallies and depth figures for one circuit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostReport {
    pub cnot_count: usize,
    pub rotation_count: usize,
    pub x_count: usize,
    /// Longest chain of gates sharing qubits, each gate counting once.
    pub total_depth: usize,
    /// Number of gates touching each qubit.
    pub per_qubit_gate_count: Vec<usize>,
    /// CNOTs inside each recorded module span.
    pub per_module_cnots: Vec<usize>,
}

/// Tally gates and schedule depth by longest path; gates on disjoint
/// qubits commute.
pub fn cost(circuit: &Circuit) -> CostReport {
    let qubits = circuit.qubit_count();
    let mut cnot_count = 0;
    let mut rotation_count = 0;
    let mut x_count = 0;
    let mut per_qubit_gate_count = vec![0usize; qubits];
    let mut qubit_depth = vec![0usize; qubits];

    for gate in &circuit.gates {
        match gate {
            Gate::Cnot { .. } => cnot_count += 1,
            Gate::Ry { .. } | Gate::Rz { .. } => rotation_count += 1,
            Gate::X { .. } => x_count += 1,
        }
        let touched = gate.qubits();
        let level = 1 + touched.iter().map(|&q| qubit_depth[q]).max().unwrap_or(0);
        for q in touched {
            per_qubit_gate_count[q] += 1;
            qubit_depth[q] = level;
        }
    }

    let per_module_cnots = circuit
        .module_spans
        .iter()
        .map(|&(start, end)| {
            circuit.gates[start..end]
                .iter()
                .filter(|g| matches!(g, Gate::Cnot { .. }))
                .count()
        })
        .collect();

    CostReport {
        cnot_count,
        rotation_count,
        x_count,
        total_depth: qubit_depth.into_iter().max().unwrap_or(0),
        per_qubit_gate_count,
        per_module_cnots,
    }
}

// ---------------------------------------------------------------------------
// OpenQASM 2.0 emission
// ---------------------------------------------------------------------------

/// Exact header required of every emitted program.
pub const QASM_HEADER: &str = "OPENQASM 2.0;\ninclude \"qelib1.inc\";\n";

fn format_angle(x: f64) -> String {
    // 17 significant digits round-trip any f64.
    format!("{x:.16e}")
}

/// Emit OpenQASM 2.0 text for a circuit.
///
/// One `qreg q[n]` covers the whole layout in simulator order (qubit 0 is
/// the target). A nonzero tracked global phase appears as a comment, since
/// QASM 2.0 has no gate for it.
pub fn emit_qasm(circuit: &Circuit) -> String {
    let mut out = String::from(QASM_HEADER);
    out.push_str(&format!("qreg q[{}];\n", circuit.qubit_count()));
    if circuit.global_phase != 0.0 {
        out.push_str(&format!("// global phase: {}\n", format_angle(circuit.global_phase)));
    }
    for gate in &circuit.gates {
        match *gate {
            Gate::X { qubit } => out.push_str(&format!("x q[{qubit}];\n")),
            Gate::Ry { qubit, angle } => {
                out.push_str(&format!("ry({}) q[{qubit}];\n", format_angle(angle)))
            }
            Gate::Rz { qubit, angle } => {
                out.push_str(&format!("rz({}) q[{qubit}];\n", format_angle(angle)))
            }
            Gate::Cnot { control, target } => {
                out.push_str(&format!("cx q[{control}],q[{target}];\n"))
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Dense unitary oracle
// ---------------------------------------------------------------------------

/// Single-qubit kernel applied to one column vector.
#[inline]
pub(crate) fn apply_single_qubit(amps: &mut [C64], qubit: usize, m: [[C64; 2]; 2]) {
    let step = 1 << qubit;
    let mut base = 0;
    while base < amps.len() {
        for offset in base..base + step {
            let i = offset;
            let j = offset + step;
            let (a, b) = (amps[i], amps[j]);
            amps[i] = m[0][0] * a + m[0][1] * b;
            amps[j] = m[1][0] * a + m[1][1] * b;
        }
        base += 2 * step;
    }
}

#[inline]
pub(crate) fn apply_cnot(amps: &mut [C64], control: usize, target: usize) {
    let cbit = 1 << control;
    let tbit = 1 << target;
    for i in 0..amps.len() {
        if i & cbit != 0 && i & tbit == 0 {
            amps.swap(i, i | tbit);
        }
    }
}

pub(crate) fn apply_gate(amps: &mut [C64], gate: &Gate) {
    match *gate {
        Gate::X { qubit } => {
            let m = [[C64::ZERO, C64::ONE], [C64::ONE, C64::ZERO]];
            apply_single_qubit(amps, qubit, m);
        }
        Gate::Ry { qubit, angle } => {
            let (s, c) = (angle / 2.0).sin_cos();
            let m = [
                [C64::new(c, 0.0), C64::new(-s, 0.0)],
                [C64::new(s, 0.0), C64::new(c, 0.0)],
            ];
            apply_single_qubit(amps, qubit, m);
        }
        Gate::Rz { qubit, angle } => {
            let half = angle / 2.0;
            let (lo, hi) = (C64::from_polar(1.0, -half), C64::from_polar(1.0, half));
            let bit = 1 << qubit;
            for (i, amp) in amps.iter_mut().enumerate() {
                *amp *= if i & bit == 0 { lo } else { hi };
            }
        }
        Gate::Cnot { control, target } => apply_cnot(amps, control, target),
    }
}

/// Dense matrix of the whole circuit, global phase included.
pub fn circuit_unitary(circuit: &Circuit) -> Result<CMat, CircuitError> {
    let qubits = circuit.qubit_count();
    if qubits > MAX_UNITARY_QUBITS {
        return Err(CircuitError::TooManyQubits { qubits, max: MAX_UNITARY_QUBITS });
    }
    circuit.check()?;
    let dim = 1usize << qubits;
    let mut u = CMat::identity(dim);
    for col in 0..dim {
        let amps = u.column_mut(col);
        for gate in &circuit.gates {
            apply_gate(amps, gate);
        }
        let phase = C64::from_polar(1.0, circuit.global_phase);
        for amp in amps.iter_mut() {
            *amp *= phase;
        }
    }
    Ok(u)
}
