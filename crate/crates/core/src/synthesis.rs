//! Conversion between Kraus sets and the modular circuit parameterization.
//!
//! An `n`-element POVM is realized by a chain of `n - 1` two-outcome
//! modules. Module `i` is described by rotation angles `theta1, theta2`,
//! outcome unitaries `V1, V2`, and the ancilla labels of its two outcomes;
//! the first module additionally carries the shared initial unitary `U`.
//! The measurement operators factor as
//!
//! ```text
//! M_1 = V1(1) D1(1) U
//! M_i = V1(i) D1(i) V2(i-1) D2(i-1) ... V2(1) D2(1) U     (1 < i < n)
//! M_n =        V2(n-1) D2(n-1) ... V2(1) D2(1) U
//! ```
//!
//! with `D1 = diag(cos theta1, cos theta2)` and `D2` the sine analogue.
//! Extraction inverts this factorization by peeling singular value
//! decompositions off the running residual; it is validated by the
//! round-trip property rather than trusted.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::{c64, svd2, C64, Mat2, UNITARY_TOLERANCE};
use crate::povm::{KrausSet, PovmError, Qubit1State};

/// Singular values below this are treated as an exhausted residual
/// direction when forming pseudo-inverses.
pub const RESIDUAL_CUTOFF: f64 = 1e-12;

/// Budget by which a singular value may exceed 1 before extraction reports
/// an invalid (non-contractive) input instead of clamping.
pub const CONTRACTION_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthesisError {
    #[error("operator block has singular value {value} > 1; not a contraction")]
    NotContraction { value: f64 },
    #[error("plan has {modules} modules but n = {n} requires {expected}")]
    ModuleCountMismatch { modules: usize, n: usize, expected: usize },
    #[error("module {index} field {field} is not unitary (deviation {deviation:.3e})")]
    ModuleNotUnitary { index: usize, field: &'static str, deviation: f64 },
    #[error("module {index} angle {field} = {value} outside [0, pi/2]")]
    AngleOutOfRange { index: usize, field: &'static str, value: f64 },
    #[error("module {index} outcome labels ({o1}, {o2}) differ from the canonical ({index}, {next})", next = index + 1)]
    BadOutcomeLabels { index: usize, o1: usize, o2: usize },
    #[error(transparent)]
    Povm(#[from] PovmError),
}

/// Parameters of one two-outcome module.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModuleParams {
    pub theta1: f64,
    pub theta2: f64,
    pub v1: Mat2,
    pub v2: Mat2,
    /// Ancilla register value entangled to the module's first outcome.
    pub outcome1: usize,
    /// Ancilla register value entangled to the module's second outcome.
    pub outcome2: usize,
}

impl ModuleParams {
    /// `diag(cos theta1, cos theta2)`.
    pub fn d1(&self) -> Mat2 {
        Mat2::diag(c64(self.theta1.cos(), 0.0), c64(self.theta2.cos(), 0.0))
    }

    /// `diag(sin theta1, sin theta2)`.
    pub fn d2(&self) -> Mat2 {
        Mat2::diag(c64(self.theta1.sin(), 0.0), c64(self.theta2.sin(), 0.0))
    }
}

/// Full parameterization of an `n`-outcome measurement circuit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisPlan {
    /// Number of measurement outcomes.
    pub n: usize,
    /// Shared initial unitary applied to the target qubit.
    pub u: Mat2,
    /// The `n - 1` modules in application order.
    pub modules: Vec<ModuleParams>,
}

impl SynthesisPlan {
    /// Ancilla qubits needed to address `n` outcome labels.
    pub fn ancilla_count(&self) -> usize {
        ancilla_count(self.n)
    }

    /// Check structural invariants: module count, label order, unitarity
    /// and angle ranges.
    pub fn check(&self) -> Result<(), SynthesisError> {
        if self.n < 2 || self.modules.len() != self.n - 1 {
            return Err(SynthesisError::ModuleCountMismatch {
                modules: self.modules.len(),
                n: self.n,
                expected: self.n.saturating_sub(1),
            });
        }
        let half_pi = std::f64::consts::FRAC_PI_2;
        for (index, module) in self.modules.iter().enumerate() {
            for (field, matrix) in [("v1", &module.v1), ("v2", &module.v2)] {
                let deviation = matrix.unitarity_error();
                if deviation > UNITARY_TOLERANCE {
                    return Err(SynthesisError::ModuleNotUnitary { index, field, deviation });
                }
            }
            for (field, value) in [("theta1", module.theta1), ("theta2", module.theta2)] {
                if !(0.0..=half_pi + 1e-12).contains(&value) {
                    return Err(SynthesisError::AngleOutOfRange { index, field, value });
                }
            }
            if module.outcome1 != index || module.outcome2 != index + 1 {
                return Err(SynthesisError::BadOutcomeLabels {
                    index,
                    o1: module.outcome1,
                    o2: module.outcome2,
                });
            }
        }
        let u_dev = self.u.unitarity_error();
        if u_dev > UNITARY_TOLERANCE {
            return Err(SynthesisError::ModuleNotUnitary { index: 0, field: "u", deviation: u_dev });
        }
        Ok(())
    }
}

/// Ancilla qubits required for `n` outcome labels: `ceil(log2 n)`.
pub fn ancilla_count(n: usize) -> usize {
    assert!(n >= 2);
    usize::BITS as usize - (n - 1).leading_zeros() as usize
}

/// Canonical ancilla labels: outcome `i` (0-based) maps to register value `i`.
pub fn outcome_labels(n: usize) -> Vec<usize> {
    assert!(n >= 2);
    (0..n).collect()
}

/// Extract module parameters from a validated Kraus set.
///
/// Peels one SVD per module off the running residual `R_i`, which tracks
/// the not-yet-resolved part of the factorization; pseudo-inverses use
/// [`RESIDUAL_CUTOFF`] so fully consumed directions are completed freely.
pub fn extract_modules(povm: &KrausSet) -> Result<SynthesisPlan, SynthesisError> {
    let n = povm.n();
    let mut modules: Vec<ModuleParams> = Vec::with_capacity(n - 1);

    // Module 1 comes straight from the SVD of M_1.
    let first = svd2(povm.operator(0));
    let u = first.right;
    let (theta1, theta2) = angles_from_cosines(first.singulars)?;
    modules.push(ModuleParams {
        theta1,
        theta2,
        v1: first.left,
        v2: Mat2::identity(), // placeholder, fixed by the next peel
        outcome1: 0,
        outcome2: 1,
    });
    let d2 = modules[0].d2();
    let mut residual = d2.mul(&u);

    // Middle modules: B_i = M_i * pinv(R_{i-1}) = V1 D1 V2_prev.
    for i in 1..n - 1 {
        let residual_svd = svd2(&residual);
        let pinv = residual_svd.pseudo_inverse(RESIDUAL_CUTOFF);
        let block = povm.operator(i).mul(&pinv);
        let svd = svd2(&block);
        let (theta1, theta2) = angles_from_cosines(svd.singulars)?;
        modules[i - 1].v2 = svd.right;
        modules.push(ModuleParams {
            theta1,
            theta2,
            v1: svd.left,
            v2: Mat2::identity(),
            outcome1: i,
            outcome2: i + 1,
        });
        let d2 = modules[i].d2();
        residual = d2.mul(&svd.right).mul(&residual);
    }

    // Last outcome: M_n = V2(n-1) R_{n-1}, so V2 is the unitary polar
    // factor, completed on any null directions by the SVD itself.
    let residual_svd = svd2(&residual);
    let pinv = residual_svd.pseudo_inverse(RESIDUAL_CUTOFF);
    let block = povm.operator(n - 1).mul(&pinv);
    let polar = svd2(&block);
    if polar.singulars[0] > 1.0 + CONTRACTION_SLACK {
        return Err(SynthesisError::NotContraction { value: polar.singulars[0] });
    }
    modules[n - 2].v2 = polar.left.mul(&polar.right);

    let plan = SynthesisPlan { n, u, modules };
    debug_assert!(plan.check().is_ok());
    Ok(plan)
}

fn angles_from_cosines(singulars: [f64; 2]) -> Result<(f64, f64), SynthesisError> {
    let mut out = [0.0; 2];
    for (slot, s) in out.iter_mut().zip(singulars) {
        if s > 1.0 + CONTRACTION_SLACK {
            return Err(SynthesisError::NotContraction { value: s });
        }
        // acos amplifies rounding noise near the edge of its domain into a
        // ~1e-8 angle wobble; a cosine this close to 1 is an exact 1.
        let c = if s >= 1.0 - 1e-14 { 1.0 } else { s.clamp(0.0, 1.0) };
        *slot = c.acos();
    }
    Ok((out[0], out[1]))
}

/// Forward map: rebuild the measurement operators of a plan.
pub fn reconstruct_kraus(plan: &SynthesisPlan) -> Result<KrausSet, SynthesisError> {
    plan.check()?;
    let mut operators = Vec::with_capacity(plan.n);
    // Running product V2(i) D2(i) ... V2(1) D2(1) U, extended module by module.
    let mut tail = plan.u;
    for module in &plan.modules {
        operators.push(module.v1.mul(&module.d1()).mul(&tail));
        tail = module.v2.mul(&module.d2()).mul(&tail);
    }
    operators.push(tail);
    Ok(KrausSet::new(operators)?)
}

/// Joint (target, ancilla) state the dilation unitary must produce:
/// `sum_i (M_i |psi>) |i>`, laid out in the simulator's bit order.
///
/// Qubit 0 (the least significant index bit) is the target; ancilla qubit
/// `k` carries bit `k` of the outcome label. The returned vector has
/// `2^(1 + ancilla_count)` amplitudes; labels at or above `n` stay zero.
pub fn dilation_state(povm: &KrausSet, psi: &Qubit1State) -> Vec<C64> {
    let n = povm.n();
    let ancillas = ancilla_count(n);
    let mut amps = vec![C64::ZERO; 1 << (1 + ancillas)];
    for (label, m) in povm.operators().iter().enumerate() {
        let branch = m.apply(psi.amplitudes());
        amps[label << 1] = branch[0];
        amps[(label << 1) | 1] = branch[1];
    }
    amps
}

/// Trine plan with the standard hand-picked parameters: `U = I`,
/// module 1 `(theta1, theta2) = (acos sqrt(2/3), pi/2)` with a Hadamard-like
/// `V2`, module 2 `(0, pi/2)` with rotation `V1` and reflected `V2`.
pub fn trine_plan() -> SynthesisPlan {
    let s2 = 2.0_f64.sqrt();
    let s3 = 3.0_f64.sqrt();
    let module1 = ModuleParams {
        theta1: (2.0_f64 / 3.0).sqrt().acos(),
        theta2: std::f64::consts::FRAC_PI_2,
        v1: Mat2::identity(),
        v2: Mat2::from_real([[1.0 / s2, 1.0 / s2], [-1.0 / s2, 1.0 / s2]]),
        outcome1: 0,
        outcome2: 1,
    };
    let module2 = ModuleParams {
        theta1: 0.0,
        theta2: std::f64::consts::FRAC_PI_2,
        v1: Mat2::from_real([[0.5, -0.5 * s3], [0.5 * s3, 0.5]]),
        v2: Mat2::from_real([[-0.5 * s3, 0.5], [-0.5, -0.5 * s3]]),
        outcome1: 1,
        outcome2: 2,
    };
    SynthesisPlan { n: 3, u: Mat2::identity(), modules: vec![module1, module2] }
}
