//! Lowering of synthesis plans to the `{X, Ry, Rz, CNOT}` gate set.
//!
//! Two strategies exist for multi-controlled rotations:
//!
//! * [`LoweringMode::Exponential`] recursively splits an `m`-controlled
//!   rotation into two `(m-1)`-controlled halves around CNOTs. No extra
//!   qubits, `2^(m+1) - 2` CNOTs.
//! * [`LoweringMode::Linear`] accumulates the control conjunction into
//!   work ancillas with a Toffoli ladder, applies one singly-controlled
//!   rotation, and uncomputes. `12(m-1) + 2` CNOTs, `m - 1` work qubits.
//!
//! Ladder uncomputation emits the exact inverse gate sequence, so the
//! Toffoli pair cancels both in operator and in tracked phase; a lowered
//! rotation therefore equals the ideal multi-controlled rotation with no
//! phase residue. Controlled unitaries do carry a determinant phase, which
//! lands in [`Circuit::global_phase`].

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::{Circuit, Gate, QubitLayout};
use crate::numerics::{zyz_decompose, Mat2, NumericsError, ANGLE_EPSILON};
use crate::synthesis::{SynthesisError, SynthesisPlan};

/// Strategy for lowering multi-controlled operations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LoweringMode {
    /// No work ancillas; gate count exponential in the control count.
    Exponential,
    /// `ceil(log2 n) - 1` work ancillas; gate count linear in the control
    /// count.
    Linear,
}

/// Knobs for [`compile_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompileOptions {
    pub mode: LoweringMode,
    /// Use the compact two-CNOT forms: the module rotation pair is merged
    /// into `Ry((a1+a2)/2) . CNOT . Ry((a1-a2)/2) . CNOT`, and
    /// singly-controlled unitaries use the two-CNOT ABC construction.
    /// Disable to lower every controlled rotation independently.
    pub merged_rotations: bool,
}

impl CompileOptions {
    pub fn new(mode: LoweringMode) -> Self {
        Self { mode, merged_rotations: true }
    }

    /// Uniform per-rotation lowering, no merged forms.
    pub fn per_rotation(mode: LoweringMode) -> Self {
        Self { mode, merged_rotations: false }
    }
}

/// Rotation axis of a controlled rotation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Y,
    Z,
}

/// One control qubit with its polarity (`on = true` triggers on `|1>`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Control {
    pub qubit: usize,
    pub on: bool,
}

impl Control {
    pub fn on(qubit: usize) -> Self {
        Self { qubit, on: true }
    }

    pub fn off(qubit: usize) -> Self {
        Self { qubit, on: false }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CompileError {
    #[error("linear lowering needs {needed} work ancillas, only {available} available")]
    InsufficientAncillas { needed: usize, available: usize },
    #[error("qubit {qubit} appears as both control and target")]
    ControlOverlap { qubit: usize },
    #[error(transparent)]
    NotUnitary(#[from] NumericsError),
    #[error(transparent)]
    Plan(#[from] SynthesisError),
}

/// Construction step of one module, in emission order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModuleStep {
    /// The shared initial unitary on the target (first module only).
    Prepare,
    /// The theta1/theta2 controlled-y rotation pair onto the new ancilla.
    RotationPair,
    /// Multi-controlled X gates moving the second outcome to the smallest
    /// free label.
    Relabel,
    /// Controlled V1 on the target, selected by the first outcome label.
    Outcome1,
    /// Controlled V2 on the target, selected by the second outcome label.
    Outcome2,
}

/// Gate-list position reached after a construction step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepMark {
    pub module: usize,
    pub step: ModuleStep,
    pub gate_end: usize,
}

// ---------------------------------------------------------------------------
// Gate emission
// ---------------------------------------------------------------------------

/// Bookkeeping for an emitted Toffoli ladder: which qubit holds the
/// conjunction, which gates built it, and the phase they accumulated.
struct Ladder {
    acc: usize,
    range: (usize, usize),
    phase_delta: f64,
}

struct Emitter {
    gates: Vec<Gate>,
    phase: f64,
    mode: LoweringMode,
    merged: bool,
    work: Vec<usize>,
}

impl Emitter {
    fn new(mode: LoweringMode, merged: bool, work: Vec<usize>) -> Self {
        Self { gates: Vec::new(), phase: 0.0, mode, merged, work }
    }

    fn x(&mut self, qubit: usize) {
        self.gates.push(Gate::X { qubit });
    }

    fn cnot(&mut self, control: usize, target: usize) {
        self.gates.push(Gate::Cnot { control, target });
    }

    fn rotation(&mut self, axis: Axis, angle: f64, qubit: usize) {
        if angle.abs() < ANGLE_EPSILON {
            return;
        }
        self.gates.push(match axis {
            Axis::Y => Gate::Ry { qubit, angle },
            Axis::Z => Gate::Rz { qubit, angle },
        });
    }

    /// `T = e^{i pi/8} Rz(pi/4)`.
    fn t_gate(&mut self, qubit: usize, dagger: bool) {
        let sign = if dagger { -1.0 } else { 1.0 };
        self.rotation(Axis::Z, sign * std::f64::consts::FRAC_PI_4, qubit);
        self.phase += sign * std::f64::consts::PI / 8.0;
    }

    /// `H = e^{i pi/2} Ry(pi/2) Rz(pi)`.
    fn h_gate(&mut self, qubit: usize) {
        self.rotation(Axis::Z, std::f64::consts::PI, qubit);
        self.rotation(Axis::Y, std::f64::consts::FRAC_PI_2, qubit);
        self.phase += std::f64::consts::FRAC_PI_2;
    }

    /// Standard 6-CNOT Toffoli; exactly CCX once the tracked phase is
    /// accounted for.
    fn toffoli(&mut self, c1: usize, c2: usize, target: usize) {
        self.h_gate(target);
        self.cnot(c2, target);
        self.t_gate(target, true);
        self.cnot(c1, target);
        self.t_gate(target, false);
        self.cnot(c2, target);
        self.t_gate(target, true);
        self.cnot(c1, target);
        self.t_gate(target, false);
        self.t_gate(c2, false);
        self.h_gate(target);
        self.cnot(c1, c2);
        self.t_gate(c1, false);
        self.t_gate(c2, true);
        self.cnot(c1, c2);
    }

    /// `Rot(theta/2) . CNOT . Rot(-theta/2) . CNOT` in time order.
    fn controlled_rotation(&mut self, axis: Axis, theta: f64, control: usize, target: usize) {
        self.rotation(axis, theta / 2.0, target);
        self.cnot(control, target);
        self.rotation(axis, -theta / 2.0, target);
        self.cnot(control, target);
    }

    fn mc_rotation_exponential(&mut self, axis: Axis, theta: f64, controls: &[usize], target: usize) {
        match controls.split_first() {
            None => self.rotation(axis, theta, target),
            Some((&first, rest)) => {
                self.mc_rotation_exponential(axis, theta / 2.0, rest, target);
                self.cnot(first, target);
                self.mc_rotation_exponential(axis, -theta / 2.0, rest, target);
                self.cnot(first, target);
            }
        }
    }

    /// Toffoli ladder building the conjunction of `controls` into a work
    /// qubit.
    fn conjunction(&mut self, controls: &[usize]) -> Result<Ladder, CompileError> {
        let needed = controls.len() - 1;
        if self.work.len() < needed {
            return Err(CompileError::InsufficientAncillas {
                needed,
                available: self.work.len(),
            });
        }
        let start = self.gates.len();
        let phase0 = self.phase;
        let mut acc = controls[0];
        for (i, &c) in controls[1..].iter().enumerate() {
            let w = self.work[i];
            self.toffoli(acc, c, w);
            acc = w;
        }
        Ok(Ladder { acc, range: (start, self.gates.len()), phase_delta: self.phase - phase0 })
    }

    /// Append the exact inverse of a ladder's gate range, cancelling its
    /// operator and its tracked phase.
    fn uncompute(&mut self, ladder: Ladder) {
        let inverse: Vec<Gate> = self.gates[ladder.range.0..ladder.range.1]
            .iter()
            .rev()
            .map(|g| match *g {
                Gate::Ry { qubit, angle } => Gate::Ry { qubit, angle: -angle },
                Gate::Rz { qubit, angle } => Gate::Rz { qubit, angle: -angle },
                other => other,
            })
            .collect();
        self.gates.extend(inverse);
        self.phase -= ladder.phase_delta;
    }

    fn mc_rotation_linear(
        &mut self,
        axis: Axis,
        theta: f64,
        controls: &[usize],
        target: usize,
    ) -> Result<(), CompileError> {
        match controls.len() {
            0 => self.rotation(axis, theta, target),
            1 => self.controlled_rotation(axis, theta, controls[0], target),
            _ => {
                let ladder = self.conjunction(controls)?;
                self.controlled_rotation(axis, theta, ladder.acc, target);
                self.uncompute(ladder);
            }
        }
        Ok(())
    }

    fn mc_rotation_core(
        &mut self,
        axis: Axis,
        theta: f64,
        controls: &[usize],
        target: usize,
    ) -> Result<(), CompileError> {
        if theta.abs() < ANGLE_EPSILON {
            return Ok(());
        }
        match self.mode {
            LoweringMode::Exponential => {
                self.mc_rotation_exponential(axis, theta, controls, target);
                Ok(())
            }
            LoweringMode::Linear => self.mc_rotation_linear(axis, theta, controls, target),
        }
    }

    /// X-conjugate the polarity-0 controls, run `body` on the positive
    /// control list, then undo the conjugation.
    fn with_positive_controls<F>(
        &mut self,
        controls: &[Control],
        target: usize,
        body: F,
    ) -> Result<(), CompileError>
    where
        F: FnOnce(&mut Self, &[usize]) -> Result<(), CompileError>,
    {
        let mut seen = vec![target];
        for c in controls {
            if seen.contains(&c.qubit) {
                return Err(CompileError::ControlOverlap { qubit: c.qubit });
            }
            seen.push(c.qubit);
        }
        let negatives: Vec<usize> = controls.iter().filter(|c| !c.on).map(|c| c.qubit).collect();
        let positives: Vec<usize> = controls.iter().map(|c| c.qubit).collect();
        for &q in &negatives {
            self.x(q);
        }
        body(self, &positives)?;
        for &q in &negatives {
            self.x(q);
        }
        Ok(())
    }

    fn mc_rotation(
        &mut self,
        axis: Axis,
        theta: f64,
        controls: &[Control],
        target: usize,
    ) -> Result<(), CompileError> {
        if theta.abs() < ANGLE_EPSILON {
            return Ok(());
        }
        self.with_positive_controls(controls, target, |em, positives| {
            em.mc_rotation_core(axis, theta, positives, target)
        })
    }

    /// `m`-controlled phase `e^{i phi}` on the all-ones control subspace.
    fn controlled_phase(&mut self, phi: f64, controls: &[usize]) -> Result<(), CompileError> {
        if phi.abs() < ANGLE_EPSILON {
            return Ok(());
        }
        match self.mode {
            LoweringMode::Linear if controls.len() >= 2 => {
                let ladder = self.conjunction(controls)?;
                self.rotation(Axis::Z, phi, ladder.acc);
                self.phase += phi / 2.0;
                self.uncompute(ladder);
                Ok(())
            }
            _ => self.controlled_phase_cascade(phi, controls),
        }
    }

    /// Recursive Rz cascade: peel one control as the rotation target and
    /// recurse on the rest with half the phase.
    fn controlled_phase_cascade(&mut self, phi: f64, controls: &[usize]) -> Result<(), CompileError> {
        match controls.split_last() {
            None => {
                self.phase += phi;
                Ok(())
            }
            Some((&last, rest)) => {
                self.mc_rotation_core(Axis::Z, phi, rest, last)?;
                self.controlled_phase_cascade(phi / 2.0, rest)
            }
        }
    }

    /// Multi-controlled X. Plain CNOT and the 6-CNOT Toffoli cover one and
    /// two controls; beyond that an H-conjugated controlled phase flip.
    fn mcx(&mut self, controls: &[Control], target: usize) -> Result<(), CompileError> {
        self.with_positive_controls(controls, target, |em, positives| match positives.len() {
            0 => {
                em.x(target);
                Ok(())
            }
            1 => {
                em.cnot(positives[0], target);
                Ok(())
            }
            2 => {
                em.toffoli(positives[0], positives[1], target);
                Ok(())
            }
            _ => {
                let mut all = positives.to_vec();
                all.push(target);
                em.h_gate(target);
                em.controlled_phase(std::f64::consts::PI, &all)?;
                em.h_gate(target);
                Ok(())
            }
        })
    }

    /// Uncontrolled unitary on one qubit: ZYZ rotations plus phase.
    fn unitary(&mut self, u: &Mat2, qubit: usize) -> Result<(), CompileError> {
        if u.max_norm_diff(&Mat2::identity()) < ANGLE_EPSILON {
            return Ok(());
        }
        let angles = zyz_decompose(u)?;
        if angles.beta.abs() < ANGLE_EPSILON {
            self.rotation(Axis::Z, angles.alpha + angles.gamma, qubit);
        } else {
            self.rotation(Axis::Z, angles.gamma, qubit);
            self.rotation(Axis::Y, angles.beta, qubit);
            self.rotation(Axis::Z, angles.alpha, qubit);
        }
        self.phase += angles.delta;
        Ok(())
    }

    /// Two-CNOT ABC form of a singly-controlled unitary:
    /// `u = e^{i d} A X B X C` with `A B C = I`.
    fn abc_controlled_unitary(
        &mut self,
        u: &Mat2,
        control: usize,
        target: usize,
    ) -> Result<(), CompileError> {
        let angles = zyz_decompose(u)?;
        let (alpha, beta, gamma, delta) = (angles.alpha, angles.beta, angles.gamma, angles.delta);
        // C
        self.rotation(Axis::Z, (gamma - alpha) / 2.0, target);
        self.cnot(control, target);
        // B
        self.rotation(Axis::Z, -(alpha + gamma) / 2.0, target);
        self.rotation(Axis::Y, -beta / 2.0, target);
        self.cnot(control, target);
        // A
        self.rotation(Axis::Y, beta / 2.0, target);
        self.rotation(Axis::Z, alpha, target);
        // determinant phase on the control
        if delta.abs() >= ANGLE_EPSILON {
            self.rotation(Axis::Z, delta, control);
            self.phase += delta / 2.0;
        }
        Ok(())
    }

    /// Controlled unitary on `target`: ZYZ rotations lowered per mode plus
    /// the conditional determinant phase.
    fn controlled_unitary(
        &mut self,
        u: &Mat2,
        controls: &[Control],
        target: usize,
    ) -> Result<(), CompileError> {
        if u.max_norm_diff(&Mat2::identity()) < ANGLE_EPSILON {
            return Ok(());
        }
        if controls.is_empty() {
            return self.unitary(u, target);
        }
        let merged = self.merged;
        let mode = self.mode;
        self.with_positive_controls(controls, target, |em, positives| {
            if merged && positives.len() == 1 {
                return em.abc_controlled_unitary(u, positives[0], target);
            }
            if merged && mode == LoweringMode::Linear && positives.len() >= 2 {
                // One shared conjunction for the whole controlled unitary.
                let ladder = em.conjunction(positives)?;
                em.abc_controlled_unitary(u, ladder.acc, target)?;
                em.uncompute(ladder);
                return Ok(());
            }
            let angles = zyz_decompose(u)?;
            if angles.beta.abs() < ANGLE_EPSILON {
                em.mc_rotation_core(Axis::Z, angles.alpha + angles.gamma, positives, target)?;
            } else {
                em.mc_rotation_core(Axis::Z, angles.gamma, positives, target)?;
                em.mc_rotation_core(Axis::Y, angles.beta, positives, target)?;
                em.mc_rotation_core(Axis::Z, angles.alpha, positives, target)?;
            }
            em.controlled_phase(angles.delta, positives)
        })
    }
}

// ---------------------------------------------------------------------------
// Public lowering entry points
// ---------------------------------------------------------------------------

/// Lower an `m`-controlled rotation to the primitive gate set.
///
/// The returned gate list implements the ideal controlled rotation exactly
/// (no global-phase residue). `work` supplies scratch qubits for
/// [`LoweringMode::Linear`]; [`LoweringMode::Exponential`] ignores it.
pub fn lower_mc_rotation(
    axis: Axis,
    theta: f64,
    controls: &[Control],
    target: usize,
    mode: LoweringMode,
    work: &[usize],
) -> Result<Vec<Gate>, CompileError> {
    let mut em = Emitter::new(mode, true, work.to_vec());
    em.mc_rotation(axis, theta, controls, target)?;
    debug_assert!(em.phase.abs() < 1e-12, "rotation lowering must be phase free");
    Ok(em.gates)
}

/// Gates plus the global phase they must be paired with.
#[derive(Debug, Clone, PartialEq)]
pub struct LoweredUnitary {
    pub gates: Vec<Gate>,
    pub global_phase: f64,
}

/// Lower a controlled single-qubit unitary, determinant phase included.
pub fn lower_controlled_unitary(
    u: &Mat2,
    controls: &[Control],
    target: usize,
    options: &CompileOptions,
    work: &[usize],
) -> Result<LoweredUnitary, CompileError> {
    let mut em = Emitter::new(options.mode, options.merged_rotations, work.to_vec());
    em.controlled_unitary(u, controls, target)?;
    Ok(LoweredUnitary { gates: em.gates, global_phase: em.phase })
}

// ---------------------------------------------------------------------------
// Plan compilation
// ---------------------------------------------------------------------------

fn bit_len(x: usize) -> usize {
    usize::BITS as usize - x.leading_zeros() as usize
}

fn label_controls(layout: &QubitLayout, label: usize, bits: usize) -> Vec<Control> {
    (0..bits)
        .map(|b| Control { qubit: layout.ancilla(b), on: label >> b & 1 == 1 })
        .collect()
}

/// Compile a plan with default options (merged rotation forms).
pub fn compile(plan: &SynthesisPlan, mode: LoweringMode) -> Result<Circuit, CompileError> {
    compile_with(plan, &CompileOptions::new(mode))
}

pub fn compile_with(plan: &SynthesisPlan, options: &CompileOptions) -> Result<Circuit, CompileError> {
    Ok(compile_with_steps(plan, options)?.0)
}

/// Compile a plan, also reporting the gate-list position reached after
/// each construction step of each module.
///
/// Module `k` (0-based) reuses label `k` for its first outcome, entangles
/// its second outcome to `k | 2^d` (`d` the lowest unset bit of `k`),
/// rotates ancilla qubit `d` conditioned on the target and the shared
/// label bits, relabels the second outcome down to `k + 1`, and applies
/// the outcome unitaries selected by the final labels.
pub fn compile_with_steps(
    plan: &SynthesisPlan,
    options: &CompileOptions,
) -> Result<(Circuit, Vec<StepMark>), CompileError> {
    plan.check()?;
    let ancilla_count = plan.ancilla_count();
    let work_count = match options.mode {
        LoweringMode::Exponential => 0,
        LoweringMode::Linear => ancilla_count - 1,
    };
    let layout = QubitLayout { ancilla_count, work_count };
    let mut em = Emitter::new(options.mode, options.merged_rotations, layout.work_qubits());
    let mut marks = Vec::new();
    let mut spans = Vec::new();

    for (k, module) in plan.modules.iter().enumerate() {
        let span_start = em.gates.len();
        if k == 0 {
            em.unitary(&plan.u, layout.target())?;
            marks.push(StepMark { module: k, step: ModuleStep::Prepare, gate_end: em.gates.len() });
        }

        let o1 = k;
        let new_bit = (k.trailing_ones()) as usize;
        let o2_pre = o1 | (1 << new_bit);
        let active = bit_len(o2_pre.max(k + 1));
        debug_assert_eq!(active, bit_len(k + 1));

        // Rotation pair: ancilla `new_bit` rotated by 2*theta1 (target |0>)
        // or 2*theta2 (target |1>), conditioned on the shared label bits.
        let shared: Vec<Control> = (0..active)
            .filter(|&b| b != new_bit)
            .map(|b| Control { qubit: layout.ancilla(b), on: o1 >> b & 1 == 1 })
            .collect();
        let rotated = layout.ancilla(new_bit);
        let (a1, a2) = (2.0 * module.theta1, 2.0 * module.theta2);
        if options.merged_rotations {
            em.mc_rotation(Axis::Y, (a1 + a2) / 2.0, &shared, rotated)?;
            em.cnot(layout.target(), rotated);
            em.mc_rotation(Axis::Y, (a1 - a2) / 2.0, &shared, rotated)?;
            em.cnot(layout.target(), rotated);
        } else {
            let mut off = shared.clone();
            off.push(Control::off(layout.target()));
            em.mc_rotation(Axis::Y, a1, &off, rotated)?;
            let mut on = shared.clone();
            on.push(Control::on(layout.target()));
            em.mc_rotation(Axis::Y, a2, &on, rotated)?;
        }
        marks.push(StepMark { module: k, step: ModuleStep::RotationPair, gate_end: em.gates.len() });

        // Relabel o2_pre -> k + 1 by clearing the surplus low bits; the
        // final label's bit set is a subset of the temporary one.
        let final_label = k + 1;
        debug_assert_eq!(final_label & !o2_pre, 0);
        let mut current = o2_pre;
        for b in 0..active {
            if current >> b & 1 == 1 && final_label >> b & 1 == 0 {
                let controls: Vec<Control> = (0..active)
                    .filter(|&x| x != b)
                    .map(|x| Control { qubit: layout.ancilla(x), on: current >> x & 1 == 1 })
                    .collect();
                em.mcx(&controls, layout.ancilla(b))?;
                current ^= 1 << b;
            }
        }
        debug_assert_eq!(current, final_label);
        marks.push(StepMark { module: k, step: ModuleStep::Relabel, gate_end: em.gates.len() });

        // Outcome unitaries, selected by the full (active) labels.
        em.controlled_unitary(&module.v1, &label_controls(&layout, o1, active), layout.target())?;
        marks.push(StepMark { module: k, step: ModuleStep::Outcome1, gate_end: em.gates.len() });
        em.controlled_unitary(
            &module.v2,
            &label_controls(&layout, final_label, active),
            layout.target(),
        )?;
        marks.push(StepMark { module: k, step: ModuleStep::Outcome2, gate_end: em.gates.len() });

        spans.push((span_start, em.gates.len()));
    }

    let circuit = Circuit {
        layout,
        gates: em.gates,
        global_phase: crate::numerics::wrap_angle(em.phase),
        module_spans: spans,
    };
    debug_assert!(circuit.check().is_ok());
    Ok((circuit, marks))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{circuit_unitary, QubitLayout};
    use crate::numerics::{c64, random_unitary2, C64, CMat};
    use crate::synthesis::{extract_modules, trine_plan};

    fn gates_to_circuit(gates: Vec<Gate>, qubits: usize, phase: f64) -> Circuit {
        Circuit {
            layout: QubitLayout { ancilla_count: qubits - 1, work_count: 0 },
            gates,
            global_phase: phase,
            module_spans: Vec::new(),
        }
    }

    /// Ideal m-controlled rotation as a dense matrix over `qubits` qubits.
    fn ideal_mc_rotation(
        axis: Axis,
        theta: f64,
        controls: &[Control],
        target: usize,
        qubits: usize,
    ) -> CMat {
        let block = match axis {
            Axis::Y => Mat2::rotation_y(theta),
            Axis::Z => Mat2::rotation_z(theta),
        };
        let dim = 1 << qubits;
        let mut m = CMat::zeros(dim, dim);
        for col in 0..dim {
            let active = controls
                .iter()
                .all(|c| (col >> c.qubit & 1 == 1) == c.on);
            if active {
                let tbit = 1 << target;
                let base = col & !tbit;
                let b = (col >> target) & 1;
                m.set(base, col, block.at(0, b));
                m.set(base | tbit, col, block.at(1, b));
            } else {
                m.set(col, col, C64::ONE);
            }
        }
        m
    }

    #[test]
    fn toffoli_is_exactly_ccx() {
        let mut em = Emitter::new(LoweringMode::Exponential, true, vec![]);
        em.toffoli(0, 1, 2);
        let c = gates_to_circuit(em.gates, 3, em.phase);
        let u = circuit_unitary(&c).unwrap();
        let mut ccx = CMat::identity(8);
        ccx.set(3, 3, C64::ZERO);
        ccx.set(7, 7, C64::ZERO);
        ccx.set(7, 3, C64::ONE);
        ccx.set(3, 7, C64::ONE);
        assert!(u.max_norm_diff(&ccx) < 1e-12);
    }

    #[test]
    fn single_control_rotation_has_two_cnots() {
        let gates = lower_mc_rotation(
            Axis::Y,
            0.7,
            &[Control::on(1)],
            0,
            LoweringMode::Exponential,
            &[],
        )
        .unwrap();
        let cnots = gates.iter().filter(|g| matches!(g, Gate::Cnot { .. })).count();
        let rots = gates.iter().filter(|g| g.is_rotation()).count();
        assert_eq!((cnots, rots), (2, 2));
        let c = gates_to_circuit(gates, 2, 0.0);
        let ideal = ideal_mc_rotation(Axis::Y, 0.7, &[Control::on(1)], 0, 2);
        assert!(circuit_unitary(&c).unwrap().max_norm_diff(&ideal) < 1e-12);
    }

    #[test]
    fn two_control_exponential_counts() {
        let gates = lower_mc_rotation(
            Axis::Y,
            1.1,
            &[Control::on(1), Control::on(2)],
            0,
            LoweringMode::Exponential,
            &[],
        )
        .unwrap();
        let cnots = gates.iter().filter(|g| matches!(g, Gate::Cnot { .. })).count();
        let rots = gates.iter().filter(|g| g.is_rotation()).count();
        assert_eq!((cnots, rots), (6, 4));
    }

    #[test]
    fn zero_angle_lowers_to_nothing() {
        let gates = lower_mc_rotation(
            Axis::Z,
            0.0,
            &[Control::on(1)],
            0,
            LoweringMode::Exponential,
            &[],
        )
        .unwrap();
        assert!(gates.is_empty());
    }

    #[test]
    fn linear_rotation_restores_work_and_matches_ideal() {
        let controls = [Control::on(1), Control::off(2), Control::on(3)];
        let gates =
            lower_mc_rotation(Axis::Z, 0.9, &controls, 0, LoweringMode::Linear, &[4, 5]).unwrap();
        let c = Circuit {
            layout: QubitLayout { ancilla_count: 3, work_count: 2 },
            gates,
            global_phase: 0.0,
            module_spans: Vec::new(),
        };
        let u = circuit_unitary(&c).unwrap();
        // Restricted to work ancillas in |0>, the operator is the ideal
        // 3-controlled rotation; work columns must return to |0>.
        let ideal = ideal_mc_rotation(Axis::Z, 0.9, &controls, 0, 4);
        for col in 0..16 {
            for row in 0..64 {
                let expect = if row < 16 { ideal.at(row, col) } else { C64::ZERO };
                assert!((u.at(row, col) - expect).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn linear_mode_needs_work_ancillas() {
        let err = lower_mc_rotation(
            Axis::Y,
            0.4,
            &[Control::on(1), Control::on(2), Control::on(3)],
            0,
            LoweringMode::Linear,
            &[4],
        )
        .unwrap_err();
        assert!(matches!(err, CompileError::InsufficientAncillas { needed: 2, available: 1 }));
    }

    #[test]
    fn overlapping_control_is_rejected() {
        let err = lower_mc_rotation(
            Axis::Y,
            0.4,
            &[Control::on(0)],
            0,
            LoweringMode::Exponential,
            &[],
        )
        .unwrap_err();
        assert!(matches!(err, CompileError::ControlOverlap { qubit: 0 }));
    }

    #[test]
    fn identity_controlled_unitary_is_empty() {
        let lowered = lower_controlled_unitary(
            &Mat2::identity(),
            &[Control::on(1)],
            0,
            &CompileOptions::new(LoweringMode::Exponential),
            &[],
        )
        .unwrap();
        assert!(lowered.gates.is_empty());
        assert_eq!(lowered.global_phase, 0.0);
    }

    fn ideal_controlled_unitary(u: &Mat2, control: usize, target: usize, qubits: usize) -> CMat {
        let dim = 1 << qubits;
        let mut m = CMat::zeros(dim, dim);
        for col in 0..dim {
            if col >> control & 1 == 1 {
                let tbit = 1 << target;
                let base = col & !tbit;
                let b = (col >> target) & 1;
                m.set(base, col, u.at(0, b));
                m.set(base | tbit, col, u.at(1, b));
            } else {
                m.set(col, col, C64::ONE);
            }
        }
        m
    }

    #[test]
    fn controlled_hadamard_like_unitary_matches_block_form() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let v = Mat2::from_real([[s, s], [-s, s]]);
        for options in [
            CompileOptions::new(LoweringMode::Exponential),
            CompileOptions::per_rotation(LoweringMode::Exponential),
        ] {
            let lowered =
                lower_controlled_unitary(&v, &[Control::on(1)], 0, &options, &[]).unwrap();
            let c = gates_to_circuit(lowered.gates, 2, lowered.global_phase);
            let ideal = ideal_controlled_unitary(&v, 1, 0, 2);
            assert!(circuit_unitary(&c).unwrap().max_norm_diff(&ideal) < 1e-10);
        }
    }

    #[test]
    fn controlled_reflection_handles_determinant_phase() {
        // det = -1 forces a conditional phase.
        let s3 = 3.0_f64.sqrt();
        let v = Mat2::from_real([[0.5, 0.5 * s3], [0.5 * s3, -0.5]]);
        for options in [
            CompileOptions::new(LoweringMode::Exponential),
            CompileOptions::per_rotation(LoweringMode::Exponential),
            CompileOptions::new(LoweringMode::Linear),
        ] {
            let lowered =
                lower_controlled_unitary(&v, &[Control::on(1)], 0, &options, &[]).unwrap();
            let c = gates_to_circuit(lowered.gates, 2, lowered.global_phase);
            let ideal = ideal_controlled_unitary(&v, 1, 0, 2);
            assert!(circuit_unitary(&c).unwrap().max_norm_diff(&ideal) < 1e-10);
        }
    }

    #[test]
    fn random_multi_controlled_unitaries_match_ideal() {
        for seed in 0..12u64 {
            let u = random_unitary2(seed);
            let controls = [Control::on(1), Control::off(2)];
            for options in [
                CompileOptions::new(LoweringMode::Exponential),
                CompileOptions::per_rotation(LoweringMode::Exponential),
                CompileOptions::new(LoweringMode::Linear),
                CompileOptions::per_rotation(LoweringMode::Linear),
            ] {
                let lowered =
                    lower_controlled_unitary(&u, &controls, 0, &options, &[3]).unwrap();
                let circuit = Circuit {
                    layout: QubitLayout { ancilla_count: 2, work_count: 1 },
                    gates: lowered.gates,
                    global_phase: lowered.global_phase,
                    module_spans: Vec::new(),
                };
                let got = circuit_unitary(&circuit).unwrap();
                // Compare on the work = |0> subspace.
                let dim = 8;
                let ideal = {
                    let mut m = CMat::zeros(16, 16);
                    for col in 0..dim {
                        let active = col >> 1 & 1 == 1 && col >> 2 & 1 == 0;
                        if active {
                            let b = col & 1;
                            m.set(col & !1, col, u.at(0, b));
                            m.set(col | 1, col, u.at(1, b));
                        } else {
                            m.set(col, col, C64::ONE);
                        }
                    }
                    m
                };
                for col in 0..dim {
                    for row in 0..16 {
                        assert!(
                            (got.at(row, col) - ideal.at(row, col)).norm() < 1e-10,
                            "seed {seed} options {options:?}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn mcx_three_controls_is_a_permutation() {
        let mut em = Emitter::new(LoweringMode::Exponential, true, vec![]);
        em.mcx(&[Control::on(1), Control::on(2), Control::on(3)], 0).unwrap();
        let c = Circuit {
            layout: QubitLayout { ancilla_count: 3, work_count: 0 },
            gates: em.gates,
            global_phase: em.phase,
            module_spans: Vec::new(),
        };
        let u = circuit_unitary(&c).unwrap();
        let mut ideal = CMat::identity(16);
        ideal.set(14, 14, C64::ZERO);
        ideal.set(15, 15, C64::ZERO);
        ideal.set(15, 14, C64::ONE);
        ideal.set(14, 15, C64::ONE);
        assert!(u.max_norm_diff(&ideal) < 1e-10);
    }

    #[test]
    fn projective_z_circuit_acts_like_a_cnot() {
        let z = crate::povm::KrausSet::new(vec![
            Mat2::diag(C64::ONE, C64::ZERO),
            Mat2::diag(C64::ZERO, C64::ONE),
        ])
        .unwrap();
        let plan = extract_modules(&z).unwrap();
        let circuit = compile(&plan, LoweringMode::Exponential).unwrap();
        let u = circuit_unitary(&circuit).unwrap();
        // On the ancilla = |0> columns the action must match CNOT(target -> ancilla).
        for (col, expect_row) in [(0usize, 0usize), (1, 3)] {
            let mag = u.at(expect_row, col).norm();
            assert!((mag - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn symmetric_pair_compiles_to_six_cnots_when_merged() {
        let plan = extract_modules(&crate::povm::KrausSet::symmetric_pair()).unwrap();
        let merged = compile(&plan, LoweringMode::Exponential).unwrap();
        assert_eq!(merged.cost().cnot_count, 6);

        let naive =
            compile_with(&plan, &CompileOptions::per_rotation(LoweringMode::Exponential)).unwrap();
        let cost = naive.cost();
        assert!(cost.cnot_count <= 12, "got {}", cost.cnot_count);
        assert!(cost.rotation_count <= 14, "got {}", cost.rotation_count);
    }

    #[test]
    fn modes_agree_for_two_outcomes() {
        let plan = extract_modules(&crate::povm::KrausSet::symmetric_pair()).unwrap();
        let exp = compile(&plan, LoweringMode::Exponential).unwrap();
        let lin = compile(&plan, LoweringMode::Linear).unwrap();
        assert_eq!(exp.gates, lin.gates);
    }

    #[test]
    fn trine_compiles_and_records_spans() {
        let (circuit, marks) =
            compile_with_steps(&trine_plan(), &CompileOptions::new(LoweringMode::Exponential))
                .unwrap();
        assert_eq!(circuit.module_spans.len(), 2);
        assert_eq!(marks.iter().filter(|m| m.step == ModuleStep::RotationPair).count(), 2);
        let report = circuit.cost();
        assert_eq!(report.per_module_cnots.iter().sum::<usize>(), report.cnot_count);
    }

    #[test]
    fn linear_layout_allocates_work_ancillas() {
        let plan = extract_modules(&crate::povm::random_povm(5, 3)).unwrap();
        let lin = compile(&plan, LoweringMode::Linear).unwrap();
        assert_eq!(lin.layout.ancilla_count, 3);
        assert_eq!(lin.layout.work_count, 2);
        let exp = compile(&plan, LoweringMode::Exponential).unwrap();
        assert_eq!(exp.layout.work_count, 0);
    }

    #[test]
    fn exponential_counts_follow_the_recursion() {
        // T(m) = 2 T(m-1) + 2 CNOTs, doubling rotations.
        for m in 1..=5usize {
            let controls: Vec<Control> = (1..=m).map(Control::on).collect();
            let gates =
                lower_mc_rotation(Axis::Y, 0.3, &controls, 0, LoweringMode::Exponential, &[])
                    .unwrap();
            let cnots = gates.iter().filter(|g| matches!(g, Gate::Cnot { .. })).count();
            let rots = gates.iter().filter(|g| g.is_rotation()).count();
            assert_eq!(cnots, (1 << (m + 1)) - 2);
            assert_eq!(rots, 1 << m);
        }
    }

    #[test]
    fn linear_counts_grow_linearly() {
        for m in 2..=5usize {
            let controls: Vec<Control> = (1..=m).map(Control::on).collect();
            let work: Vec<usize> = (m + 1..2 * m).collect();
            let gates =
                lower_mc_rotation(Axis::Y, 0.3, &controls, 0, LoweringMode::Linear, &work).unwrap();
            let cnots = gates.iter().filter(|g| matches!(g, Gate::Cnot { .. })).count();
            assert_eq!(cnots, 12 * (m - 1) + 2);
        }
    }

    #[test]
    fn merged_pair_uses_plain_cnots_for_target_control() {
        // theta1 = theta2 collapses the second merged rotation to nothing,
        // leaving one Ry and the two bare CNOTs.
        let plan = extract_modules(&crate::povm::KrausSet::symmetric_pair()).unwrap();
        let circuit = compile(&plan, LoweringMode::Exponential).unwrap();
        let pair_gates: Vec<&Gate> = circuit.gates.iter().take(3).collect();
        assert!(matches!(pair_gates[0], Gate::Ry { .. }));
        assert!(matches!(pair_gates[1], Gate::Cnot { .. }));
        assert!(matches!(pair_gates[2], Gate::Cnot { .. }));
    }

    #[test]
    fn polarity_conjugation_counts_x_gates() {
        let gates = lower_mc_rotation(
            Axis::Y,
            0.8,
            &[Control::off(1), Control::off(2)],
            0,
            LoweringMode::Exponential,
            &[],
        )
        .unwrap();
        let xs = gates.iter().filter(|g| matches!(g, Gate::X { .. })).count();
        assert_eq!(xs, 4);
        let c = Circuit {
            layout: QubitLayout { ancilla_count: 2, work_count: 0 },
            gates,
            global_phase: 0.0,
            module_spans: Vec::new(),
        };
        let ideal = ideal_mc_rotation(Axis::Y, 0.8, &[Control::off(1), Control::off(2)], 0, 3);
        assert!(circuit_unitary(&c).unwrap().max_norm_diff(&ideal) < 1e-12);
    }

    #[test]
    fn controlled_phase_matches_diagonal() {
        for mode in [LoweringMode::Exponential, LoweringMode::Linear] {
            let mut em = Emitter::new(mode, true, vec![3, 4]);
            em.controlled_phase(0.77, &[0, 1, 2]).unwrap();
            let c = Circuit {
                layout: QubitLayout { ancilla_count: 2, work_count: 2 },
                gates: em.gates,
                global_phase: em.phase,
                module_spans: Vec::new(),
            };
            let u = circuit_unitary(&c).unwrap();
            for col in 0..8 {
                let expect = if col == 7 { C64::from_polar(1.0, 0.77) } else { C64::ONE };
                assert!((u.at(col, col) - expect).norm() < 1e-12, "mode {mode:?}");
                for row in 0..32 {
                    if row != col {
                        assert!(u.at(row, col).norm() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn compiled_symmetric_pair_maps_zero_to_expected_state() {
        let plan = extract_modules(&crate::povm::KrausSet::symmetric_pair()).unwrap();
        let circuit = compile(&plan, LoweringMode::Exponential).unwrap();
        let u = circuit_unitary(&circuit).unwrap();
        let f = 0.5 / 2.0_f64.sqrt();
        let expected = [f, f * 3.0_f64.sqrt(), f, f * 3.0_f64.sqrt()];
        // align on the largest expected amplitude
        let phase = u.at(1, 0) / u.at(1, 0).norm();
        for (row, e) in expected.iter().enumerate() {
            let aligned = u.at(row, 0) / phase;
            assert!((aligned - c64(*e, 0.0)).norm() < 1e-10);
        }
    }
}
