//! Generalized single-qubit measurements as sets of Kraus operators.
//!
//! A POVM is represented by its measurement operators `M_i`; the positive
//! elements are `E_i = M_i^H M_i` and must sum to the identity. Validation
//! happens at construction, so a [`KrausSet`] in hand is always complete to
//! within its recorded tolerance.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::{c64, random_isometry, C64, Mat2};

/// Default max-norm tolerance on the completeness residual.
pub const COMPLETENESS_TOLERANCE: f64 = 1e-9;

/// Probability below which a measurement outcome is treated as impossible.
pub const ZERO_PROBABILITY: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PovmError {
    #[error("a POVM needs at least two elements (got {got})")]
    TooFewElements { got: usize },
    #[error("operators do not satisfy the completeness relation (residual {residual:.3e})")]
    IncompletePovm { residual: f64 },
    #[error("operator {index} has a non-finite entry")]
    NonFiniteEntry { index: usize },
    #[error("state is not normalized (|a|^2 + |b|^2 = {norm_sq})")]
    NotNormalized { norm_sq: f64 },
    #[error("outcome {index} is out of range for a {n}-element POVM")]
    OutcomeOutOfRange { index: usize, n: usize },
    #[error("outcome {index} has probability below {ZERO_PROBABILITY:e}")]
    ZeroProbabilityOutcome { index: usize },
}

// ---------------------------------------------------------------------------
// Single-qubit pure states
// ---------------------------------------------------------------------------

/// Normalized single-qubit state `a|0> + b|1>`.
///
/// Serializes as `[[re_a, im_a], [re_b, im_b]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Qubit1State {
    a: C64,
    b: C64,
}

impl Serialize for Qubit1State {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        [[self.a.re, self.a.im], [self.b.re, self.b.im]].serialize(serializer)
    }
}

impl Qubit1State {
    /// Build from amplitudes; they must already be normalized to 1e-9.
    pub fn new(a: C64, b: C64) -> Result<Self, PovmError> {
        let norm_sq = a.norm_sqr() + b.norm_sqr();
        if (norm_sq - 1.0).abs() > 1e-9 {
            return Err(PovmError::NotNormalized { norm_sq });
        }
        Ok(Self { a, b })
    }

    /// Build from amplitudes of any nonzero length, rescaling to unit norm.
    pub fn normalized(a: C64, b: C64) -> Result<Self, PovmError> {
        let norm = (a.norm_sqr() + b.norm_sqr()).sqrt();
        if norm < 1e-9 {
            return Err(PovmError::NotNormalized { norm_sq: norm * norm });
        }
        Ok(Self { a: a / norm, b: b / norm })
    }

    /// `cos(theta/2)|0> + e^{i phi} sin(theta/2)|1>`.
    pub fn from_bloch(theta: f64, phi: f64) -> Self {
        let (s, c) = (theta / 2.0).sin_cos();
        Self { a: c64(c, 0.0), b: C64::from_polar(s, phi) }
    }

    pub fn zero() -> Self {
        Self { a: C64::ONE, b: C64::ZERO }
    }

    pub fn amp0(&self) -> C64 {
        self.a
    }

    pub fn amp1(&self) -> C64 {
        self.b
    }

    pub fn amplitudes(&self) -> [C64; 2] {
        [self.a, self.b]
    }
}

// ---------------------------------------------------------------------------
// Kraus sets
// ---------------------------------------------------------------------------

/// Validated ordered set of measurement operators.
///
/// The order is significant: outcome `i` is tied to ancilla register value
/// `i` throughout synthesis and simulation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KrausSet {
    operators: Vec<Mat2>,
    #[serde(skip)]
    residual: f64,
}

impl KrausSet {
    /// Validate a candidate operator list against the completeness relation.
    pub fn validate(operators: Vec<Mat2>, tolerance: f64) -> Result<Self, PovmError> {
        if operators.len() < 2 {
            return Err(PovmError::TooFewElements { got: operators.len() });
        }
        for (index, m) in operators.iter().enumerate() {
            if !m.is_finite() {
                return Err(PovmError::NonFiniteEntry { index });
            }
        }
        let residual = completeness_residual(&operators);
        if residual > tolerance {
            return Err(PovmError::IncompletePovm { residual });
        }
        Ok(Self { operators, residual })
    }

    /// Validate with the default tolerance.
    pub fn new(operators: Vec<Mat2>) -> Result<Self, PovmError> {
        Self::validate(operators, COMPLETENESS_TOLERANCE)
    }

    pub fn n(&self) -> usize {
        self.operators.len()
    }

    pub fn operators(&self) -> &[Mat2] {
        &self.operators
    }

    pub fn operator(&self, i: usize) -> &Mat2 {
        &self.operators[i]
    }

    /// Completeness residual recorded at validation time.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    /// The symmetric 2-element example: two equal non-projective operators
    /// `M = (1/(2 sqrt 2)) [[1, sqrt 3], [sqrt 3, -1]]`, whose two outcomes
    /// leave the target in the same state `(|0> + sqrt(3)|1>)/2`.
    pub fn symmetric_pair() -> Self {
        let s3 = 3.0_f64.sqrt();
        let f = 0.5 / 2.0_f64.sqrt();
        let m = Mat2::from_real([[f, f * s3], [f * s3, -f]]);
        Self::new(vec![m, m]).expect("symmetric pair is complete")
    }

    /// The trine POVM: three elements projecting onto states separated by
    /// 2*pi/3 in the x-z plane of the Bloch sphere, each scaled by
    /// sqrt(2/3). Built from its module parameterization, so outcome 3
    /// carries an overall minus sign relative to the bare projector.
    pub fn trine() -> Self {
        let s3 = 3.0_f64.sqrt();
        let scale = (2.0_f64 / 3.0).sqrt();
        let m1 = Mat2::diag(c64(scale, 0.0), C64::ZERO);
        // |phi_+> = (|0> + sqrt(3)|1>)/2 and |phi_-> = (|0> - sqrt(3)|1>)/2
        let m2 = Mat2::from_real([[0.25, 0.25 * s3], [0.25 * s3, 0.75]]).scale(c64(scale, 0.0));
        let m3 = Mat2::from_real([[0.25, -0.25 * s3], [-0.25 * s3, 0.75]]).scale(c64(-scale, 0.0));
        Self::new(vec![m1, m2, m3]).expect("trine set is complete")
    }
}

/// Document form of the POVM JSON interchange format:
/// `{"operators": [mat2, ...]}` with each operator a row-major 2x2 of
/// `[re, im]` pairs. Unlike [`KrausSet`], this type carries no validity
/// guarantee; call [`RawPovm::validate`] to get one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawPovm {
    pub operators: Vec<Mat2>,
}

impl RawPovm {
    pub fn validate(self, tolerance: f64) -> Result<KrausSet, PovmError> {
        KrausSet::validate(self.operators, tolerance)
    }
}

impl From<&KrausSet> for RawPovm {
    fn from(set: &KrausSet) -> Self {
        Self { operators: set.operators().to_vec() }
    }
}

/// `max |(sum_i M_i^H M_i - I)_jk|` for a raw operator list.
pub fn completeness_residual(operators: &[Mat2]) -> f64 {
    let mut sum = Mat2::zero();
    for m in operators {
        sum = sum.add(&m.adjoint().mul(m));
    }
    sum.max_norm_diff(&Mat2::identity())
}

/// Outcome probabilities `p_i = <psi| M_i^H M_i |psi>`.
pub fn outcome_probabilities(povm: &KrausSet, psi: &Qubit1State) -> Vec<f64> {
    let v = psi.amplitudes();
    povm.operators()
        .iter()
        .map(|m| {
            let w = m.apply(v);
            w[0].norm_sqr() + w[1].norm_sqr()
        })
        .collect()
}

/// Post-measurement state `M_i|psi>/sqrt(p_i)` together with `p_i`.
pub fn post_measurement_state(
    povm: &KrausSet,
    outcome: usize,
    psi: &Qubit1State,
) -> Result<(Qubit1State, f64), PovmError> {
    if outcome >= povm.n() {
        return Err(PovmError::OutcomeOutOfRange { index: outcome, n: povm.n() });
    }
    let w = povm.operator(outcome).apply(psi.amplitudes());
    let p = w[0].norm_sqr() + w[1].norm_sqr();
    if p <= ZERO_PROBABILITY {
        return Err(PovmError::ZeroProbabilityOutcome { index: outcome });
    }
    let sqrt_p = p.sqrt();
    let state = Qubit1State { a: w[0] / sqrt_p, b: w[1] / sqrt_p };
    Ok((state, p))
}

/// Random valid `n`-element POVM, deterministic per seed.
///
/// A random `2n x 2` isometry is sliced into `n` stacked 2x2 blocks; the
/// blocks satisfy the completeness relation by construction.
pub fn random_povm(n: usize, seed: u64) -> KrausSet {
    assert!(n >= 2, "a POVM needs at least two elements");
    let w = random_isometry(2 * n, 2, seed);
    let operators: Vec<Mat2> = (0..n).map(|i| w.block2(2 * i)).collect();
    KrausSet::validate(operators, 1e-12).expect("sliced isometry is complete by construction")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::svd2;
    use proptest::prelude::*;

    #[test]
    fn trine_is_complete() {
        let set = KrausSet::trine();
        assert_eq!(set.n(), 3);
        assert!(set.residual() < 1e-12);
    }

    #[test]
    fn symmetric_pair_is_complete_and_matches_output_amplitudes() {
        let set = KrausSet::symmetric_pair();
        assert!(set.residual() < 1e-12);
        // branch amplitude M|0> = (|0> + sqrt(3)|1>) / (2 sqrt 2)
        let col = set.operator(0).apply([C64::ONE, C64::ZERO]);
        let f = 0.5 / 2.0_f64.sqrt();
        assert!((col[0] - c64(f, 0.0)).norm() < 1e-15);
        assert!((col[1] - c64(f * 3.0_f64.sqrt(), 0.0)).norm() < 1e-15);
    }

    #[test]
    fn two_identities_are_rejected() {
        let err = KrausSet::new(vec![Mat2::identity(), Mat2::identity()]).unwrap_err();
        match err {
            PovmError::IncompletePovm { residual } => assert!((residual - 1.0).abs() < 1e-12),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn half_diag_pair_is_incomplete() {
        // Two copies of (1/2) diag(1, sqrt 3) sum to diag(1/2, 3/2), so the
        // set cannot pass validation.
        let m = Mat2::diag(c64(0.5, 0.0), c64(3.0_f64.sqrt() / 2.0, 0.0));
        let err = KrausSet::new(vec![m, m]).unwrap_err();
        match err {
            PovmError::IncompletePovm { residual } => assert!((residual - 0.5).abs() < 1e-12),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn single_element_is_rejected() {
        assert!(matches!(
            KrausSet::new(vec![Mat2::identity()]),
            Err(PovmError::TooFewElements { got: 1 })
        ));
    }

    #[test]
    fn trine_probabilities_on_zero_state() {
        let probs = outcome_probabilities(&KrausSet::trine(), &Qubit1State::zero());
        assert!((probs[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!((probs[1] - 1.0 / 6.0).abs() < 1e-12);
        assert!((probs[2] - 1.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn symmetric_pair_probabilities_on_zero_state() {
        let probs = outcome_probabilities(&KrausSet::symmetric_pair(), &Qubit1State::zero());
        assert!((probs[0] - 0.5).abs() < 1e-12);
        assert!((probs[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn projective_measurement_on_basis_state() {
        let z = KrausSet::new(vec![
            Mat2::diag(C64::ONE, C64::ZERO),
            Mat2::diag(C64::ZERO, C64::ONE),
        ])
        .unwrap();
        let probs = outcome_probabilities(&z, &Qubit1State::zero());
        assert_eq!(probs.len(), 2);
        assert!((probs[0] - 1.0).abs() < 1e-15);
        assert!(probs[1].abs() < 1e-15);

        let (state, p) = post_measurement_state(&z, 0, &Qubit1State::zero()).unwrap();
        assert!((p - 1.0).abs() < 1e-12);
        assert!((state.amp0().norm() - 1.0).abs() < 1e-12);

        assert!(matches!(
            post_measurement_state(&z, 1, &Qubit1State::zero()),
            Err(PovmError::ZeroProbabilityOutcome { index: 1 })
        ));
    }

    #[test]
    fn trine_second_outcome_collapse() {
        let (state, p) = post_measurement_state(&KrausSet::trine(), 1, &Qubit1State::zero()).unwrap();
        assert!((p - 1.0 / 6.0).abs() < 1e-12);
        assert!((state.amp0() - c64(0.5, 0.0)).norm() < 1e-12);
        assert!((state.amp1() - c64(3.0_f64.sqrt() / 2.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn random_povm_is_valid_and_deterministic() {
        let set = random_povm(2, 11);
        assert!(set.residual() < 1e-12);

        let eight = random_povm(8, 7);
        assert_eq!(eight.n(), 8);
        for m in eight.operators() {
            let svd = svd2(m);
            assert!(svd.singulars[0] <= 1.0 + 1e-12);
        }

        assert_eq!(random_povm(5, 123), random_povm(5, 123));
    }

    #[test]
    fn scaled_operator_breaks_completeness() {
        for seed in 0..20 {
            let set = random_povm(3, seed);
            let mut ops = set.operators().to_vec();
            ops[1] = ops[1].scale(c64(1.01, 0.0));
            assert!(matches!(
                KrausSet::new(ops),
                Err(PovmError::IncompletePovm { .. })
            ));
        }
    }

    #[test]
    fn operators_of_valid_sets_are_contractions() {
        for seed in 0..50 {
            let set = random_povm(2 + (seed as usize % 7), seed);
            for m in set.operators() {
                assert!(svd2(m).singulars[0] <= 1.0 + 1e-9);
            }
        }
    }

    proptest! {
        #[test]
        fn probabilities_sum_to_one(seed in 0u64..100, n in 2usize..9, state_seed in 0u64..100) {
            let set = random_povm(n, seed);
            let u = crate::numerics::random_unitary(2, state_seed);
            let psi = Qubit1State::new(u.at(0, 0), u.at(1, 0)).unwrap();
            let total: f64 = outcome_probabilities(&set, &psi).iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-9);
        }
    }
}
