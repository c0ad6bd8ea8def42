//! Exact dense statevector execution and comparison against the analytic
//! measurement outcomes.
//!
//! Bit convention (shared with the compiler): basis-state index bit `k` is
//! qubit `k`; qubit 0 is the target, ancilla qubit `k` carries bit `k` of
//! the outcome label, work qubits come last.

use serde::Serialize;
use thiserror::Error;

use crate::circuit::{apply_gate, Circuit, Gate};
use crate::numerics::{fidelity, C64};
use crate::povm::{outcome_probabilities, post_measurement_state, KrausSet, Qubit1State};
use crate::synthesis::{ancilla_count, dilation_state, SynthesisPlan};

/// Dense simulation cap; 2^24 amplitudes is 256 MiB of complex doubles.
pub const MAX_SIM_QUBITS: usize = 24;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("{qubits} qubits exceed the dense simulation cap of {max}")]
    TooManyQubits { qubits: usize, max: usize },
    #[error("statevector has {qubits} qubits but the plan needs at least {needed}")]
    LayoutMismatch { qubits: usize, needed: usize },
    #[error("outcome {index} has probability {probability:.3e}, below the reporting cutoff")]
    ZeroProbabilityOutcome { index: usize, probability: f64 },
}

/// Dense complex amplitude vector over `2^qubit_count` basis states.
#[derive(Debug, Clone, PartialEq)]
pub struct Statevector {
    amplitudes: Vec<C64>,
    qubit_count: usize,
}

impl Statevector {
    /// `|psi0>` on the target qubit, everything else `|0>`.
    pub fn prepare(qubit_count: usize, psi0: &Qubit1State) -> Result<Self, SimError> {
        if qubit_count > MAX_SIM_QUBITS {
            return Err(SimError::TooManyQubits { qubits: qubit_count, max: MAX_SIM_QUBITS });
        }
        let mut amplitudes = vec![C64::ZERO; 1 << qubit_count];
        amplitudes[0] = psi0.amp0();
        amplitudes[1] = psi0.amp1();
        Ok(Self { amplitudes, qubit_count })
    }

    pub fn qubit_count(&self) -> usize {
        self.qubit_count
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Apply one gate as a local amplitude update.
    pub fn apply(&mut self, gate: &Gate) {
        apply_gate(&mut self.amplitudes, gate);
    }

    /// Multiply every amplitude by `e^{i phase}`.
    pub fn apply_phase(&mut self, phase: f64) {
        if phase == 0.0 {
            return;
        }
        let factor = C64::from_polar(1.0, phase);
        for amp in &mut self.amplitudes {
            *amp *= factor;
        }
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|z| z.norm_sqr()).collect()
    }
}

/// Run a circuit on `|psi0> (x) |0...0>`, applying the tracked global
/// phase once at the end.
pub fn run(circuit: &Circuit, psi0: &Qubit1State) -> Result<Statevector, SimError> {
    let mut state = Statevector::prepare(circuit.qubit_count(), psi0)?;
    for gate in &circuit.gates {
        state.apply(gate);
    }
    state.apply_phase(circuit.global_phase);
    Ok(state)
}

/// Outcome-label marginal of a simulated state.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AncillaDistribution {
    /// Probability of each of the `n` outcome labels.
    pub probabilities: Vec<f64>,
    /// Total mass on ancilla register values `>= n` (must be ~0 for a
    /// correct circuit).
    pub leakage: f64,
}

/// Marginalize the target and work qubits away, reporting per-label mass.
pub fn ancilla_distribution(
    state: &Statevector,
    plan: &SynthesisPlan,
) -> Result<AncillaDistribution, SimError> {
    let ancillas = plan.ancilla_count();
    if state.qubit_count() < 1 + ancillas {
        return Err(SimError::LayoutMismatch {
            qubits: state.qubit_count(),
            needed: 1 + ancillas,
        });
    }
    let label_mask = (1usize << ancillas) - 1;
    let mut mass = vec![0.0f64; 1 << ancillas];
    for (index, amp) in state.amplitudes().iter().enumerate() {
        mass[(index >> 1) & label_mask] += amp.norm_sqr();
    }
    let probabilities = mass[..plan.n].to_vec();
    let leakage = mass[plan.n..].iter().sum();
    Ok(AncillaDistribution { probabilities, leakage })
}

/// Target state conditioned on the ancilla register reading `outcome`,
/// together with the probability of that outcome.
pub fn conditional_target_state(
    state: &Statevector,
    outcome: usize,
    plan: &SynthesisPlan,
) -> Result<(Qubit1State, f64), SimError> {
    let distribution = ancilla_distribution(state, plan)?;
    let probability = *distribution.probabilities.get(outcome).ok_or(
        SimError::LayoutMismatch { qubits: state.qubit_count(), needed: 1 + plan.ancilla_count() },
    )?;
    if probability <= 1e-14 {
        return Err(SimError::ZeroProbabilityOutcome { index: outcome, probability });
    }
    // Work qubits sit above the register and are |0> for a correct
    // circuit, so the work = 0 slice carries the branch.
    let c0 = state.amplitudes()[outcome << 1];
    let c1 = state.amplitudes()[(outcome << 1) | 1];
    let state = Qubit1State::normalized(c0, c1).map_err(|_| SimError::ZeroProbabilityOutcome {
        index: outcome,
        probability,
    })?;
    Ok((state, probability))
}

/// Per-outcome comparison of a simulated state against the analytic
/// measurement description.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BranchStats {
    pub outcome: usize,
    pub probability: f64,
    pub expected_probability: f64,
    /// Conditional target state amplitudes, `None` for empty branches.
    pub state: Option<Qubit1State>,
    /// `|<simulated|analytic>|^2`, phase insensitive; 1.0 by convention
    /// when both probabilities vanish.
    pub fidelity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BranchReport {
    pub branches: Vec<BranchStats>,
    pub leakage: f64,
    /// Global phase that best aligns the simulated vector with the
    /// analytic dilation output.
    pub aligned_phase: f64,
    /// Largest amplitude deviation after phase alignment.
    pub max_amplitude_error: f64,
}

impl BranchReport {
    pub fn min_fidelity(&self) -> f64 {
        self.branches.iter().map(|b| b.fidelity).fold(1.0, f64::min)
    }
}

/// Compare a simulated output state with the analytic branches of a POVM.
///
/// Phase alignment uses the largest-magnitude analytic amplitude as the
/// reference, which stays stable away from zero amplitudes.
pub fn compare_to_analytic(
    state: &Statevector,
    povm: &KrausSet,
    psi0: &Qubit1State,
    plan: &SynthesisPlan,
) -> Result<BranchReport, SimError> {
    let distribution = ancilla_distribution(state, plan)?;
    let expected_probs = outcome_probabilities(povm, psi0);
    let mut branches = Vec::with_capacity(povm.n());
    for outcome in 0..povm.n() {
        let probability = distribution.probabilities[outcome];
        let expected_probability = expected_probs[outcome];
        let (cond_state, branch_fidelity) = if probability > 1e-12 && expected_probability > 1e-12
        {
            let (sim_state, _) = conditional_target_state(state, outcome, plan)?;
            let (ideal_state, _) = post_measurement_state(povm, outcome, psi0)
                .expect("positive-probability branch");
            let f = fidelity(&sim_state.amplitudes(), &ideal_state.amplitudes())
                .expect("conditional states are normalized");
            (Some(sim_state), f)
        } else if probability <= 1e-12 && expected_probability <= 1e-12 {
            (None, 1.0)
        } else {
            (None, 0.0)
        };
        branches.push(BranchStats {
            outcome,
            probability,
            expected_probability,
            state: cond_state,
            fidelity: branch_fidelity,
        });
    }

    // Full-vector residual after one global phase.
    let analytic = dilation_state(povm, psi0);
    let ancillas = ancilla_count(povm.n());
    let reference = analytic
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let aligned_phase = if analytic[reference].norm() > 0.0 {
        (state.amplitudes()[reference] / analytic[reference]).arg()
    } else {
        0.0
    };
    let rotation = C64::from_polar(1.0, -aligned_phase);
    let mut max_amplitude_error = 0.0f64;
    let low_mask = (1usize << (1 + ancillas)) - 1;
    for (index, amp) in state.amplitudes().iter().enumerate() {
        let expected = if index >> (1 + ancillas) == 0 { analytic[index & low_mask] } else { C64::ZERO };
        max_amplitude_error = max_amplitude_error.max((amp * rotation - expected).norm());
    }

    Ok(BranchReport {
        branches,
        leakage: distribution.leakage,
        aligned_phase,
        max_amplitude_error,
    })
}
