//! Exact small-scale complex linear algebra.
//!
//! Everything in here is sized for the 2x2 operators that single-qubit
//! measurement synthesis manipulates: singular value decomposition,
//! ZYZ Euler angles, state fidelity and seeded random unitaries. The only
//! larger structure is [`CMat`], a plain dense complex matrix used for
//! isometry generation and as the verification oracle for circuits.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Complex double-precision scalar used throughout the crate.
pub type C64 = Complex64;

/// Shorthand constructor for a complex number.
#[inline]
pub fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Tolerance below which a rotation angle is treated as exactly zero.
pub const ANGLE_EPSILON: f64 = 1e-12;

/// Unitarity tolerance for inputs that must be unitary.
pub const UNITARY_TOLERANCE: f64 = 1e-10;

/// Errors produced by the numeric kernels.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumericsError {
    #[error("matrix is not unitary (deviation {deviation:.3e})")]
    NotUnitary { deviation: f64 },
    #[error("vector dimensions differ ({left} vs {right})")]
    DimensionMismatch { left: usize, right: usize },
    #[error("vector is not normalized (norm^2 = {norm_sq})")]
    NotNormalized { norm_sq: f64 },
}

// ---------------------------------------------------------------------------
// Mat2
// ---------------------------------------------------------------------------

/// Dense complex 2x2 matrix.
///
/// Row-major entries; `m.at(r, c)` addresses row `r`, column `c`. The JSON
/// form is `[[ [re,im], [re,im] ], [ [re,im], [re,im] ]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat2 {
    e: [[C64; 2]; 2],
}

impl Mat2 {
    pub fn new(entries: [[C64; 2]; 2]) -> Self {
        debug_assert!(
            entries.iter().flatten().all(|z| z.re.is_finite() && z.im.is_finite()),
            "Mat2 entries must be finite"
        );
        Self { e: entries }
    }

    /// Build from real entries, row major.
    pub fn from_real(entries: [[f64; 2]; 2]) -> Self {
        Self::new([
            [c64(entries[0][0], 0.0), c64(entries[0][1], 0.0)],
            [c64(entries[1][0], 0.0), c64(entries[1][1], 0.0)],
        ])
    }

    pub fn zero() -> Self {
        Self::new([[C64::ZERO; 2]; 2])
    }

    pub fn identity() -> Self {
        Self::diag(C64::ONE, C64::ONE)
    }

    pub fn diag(d0: C64, d1: C64) -> Self {
        Self::new([[d0, C64::ZERO], [C64::ZERO, d1]])
    }

    /// Y-rotation by `theta`: `[[cos(t/2), -sin(t/2)], [sin(t/2), cos(t/2)]]`.
    pub fn rotation_y(theta: f64) -> Self {
        let (s, c) = (theta / 2.0).sin_cos();
        Self::from_real([[c, -s], [s, c]])
    }

    /// Z-rotation by `theta`: `diag(e^{-i t/2}, e^{i t/2})`.
    pub fn rotation_z(theta: f64) -> Self {
        let half = theta / 2.0;
        Self::diag(C64::from_polar(1.0, -half), C64::from_polar(1.0, half))
    }

    /// Pauli X.
    pub fn pauli_x() -> Self {
        Self::from_real([[0.0, 1.0], [1.0, 0.0]])
    }

    #[inline]
    pub fn at(&self, row: usize, col: usize) -> C64 {
        self.e[row][col]
    }

    pub fn entries(&self) -> [[C64; 2]; 2] {
        self.e
    }

    pub fn is_finite(&self) -> bool {
        self.e.iter().flatten().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn adjoint(&self) -> Self {
        Self::new([
            [self.e[0][0].conj(), self.e[1][0].conj()],
            [self.e[0][1].conj(), self.e[1][1].conj()],
        ])
    }

    pub fn mul(&self, rhs: &Self) -> Self {
        let mut out = [[C64::ZERO; 2]; 2];
        for (r, row) in out.iter_mut().enumerate() {
            for (c, cell) in row.iter_mut().enumerate() {
                *cell = self.e[r][0] * rhs.e[0][c] + self.e[r][1] * rhs.e[1][c];
            }
        }
        Self { e: out }
    }

    pub fn add(&self, rhs: &Self) -> Self {
        let mut out = *self;
        for r in 0..2 {
            for c in 0..2 {
                out.e[r][c] += rhs.e[r][c];
            }
        }
        out
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        let mut out = *self;
        for r in 0..2 {
            for c in 0..2 {
                out.e[r][c] -= rhs.e[r][c];
            }
        }
        out
    }

    pub fn scale(&self, factor: C64) -> Self {
        let mut out = *self;
        for row in out.e.iter_mut() {
            for z in row.iter_mut() {
                *z *= factor;
            }
        }
        out
    }

    pub fn determinant(&self) -> C64 {
        self.e[0][0] * self.e[1][1] - self.e[0][1] * self.e[1][0]
    }

    /// Apply to a column vector `(v0, v1)`.
    pub fn apply(&self, v: [C64; 2]) -> [C64; 2] {
        [
            self.e[0][0] * v[0] + self.e[0][1] * v[1],
            self.e[1][0] * v[0] + self.e[1][1] * v[1],
        ]
    }

    /// Largest entry magnitude.
    pub fn max_norm(&self) -> f64 {
        self.e.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `max |(self - rhs)_ij|`.
    pub fn max_norm_diff(&self, rhs: &Self) -> f64 {
        self.sub(rhs).max_norm()
    }

    /// `max |(U^H U - I)_ij|`; zero for a perfect unitary.
    pub fn unitarity_error(&self) -> f64 {
        self.adjoint().mul(self).max_norm_diff(&Self::identity())
    }
}

impl std::ops::Mul for &Mat2 {
    type Output = Mat2;
    fn mul(self, rhs: &Mat2) -> Mat2 {
        self.mul(rhs)
    }
}

/// Serde shadow: row-major 2x2 of `[re, im]` pairs.
type Mat2Raw = [[[f64; 2]; 2]; 2];

impl Serialize for Mat2 {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut raw: Mat2Raw = [[[0.0; 2]; 2]; 2];
        for (row, src) in raw.iter_mut().zip(&self.e) {
            for (cell, z) in row.iter_mut().zip(src) {
                *cell = [z.re, z.im];
            }
        }
        raw.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Mat2 {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = Mat2Raw::deserialize(deserializer)?;
        let mut e = [[C64::ZERO; 2]; 2];
        for r in 0..2 {
            for c in 0..2 {
                let [re, im] = raw[r][c];
                if !(re.is_finite() && im.is_finite()) {
                    return Err(serde::de::Error::custom("non-finite matrix entry"));
                }
                e[r][c] = c64(re, im);
            }
        }
        Ok(Mat2 { e })
    }
}

// ---------------------------------------------------------------------------
// 2x2 SVD
// ---------------------------------------------------------------------------

/// Result of [`svd2`]: `input = left * diag(singulars) * right`.
#[derive(Debug, Clone, Copy)]
pub struct Svd2Result {
    /// Unitary left factor (columns are left singular vectors).
    pub left: Mat2,
    /// Singular values in descending order, both nonnegative.
    pub singulars: [f64; 2],
    /// Unitary right factor, already adjointed so the product above holds.
    pub right: Mat2,
}

impl Svd2Result {
    /// Rebuild `left * diag(singulars) * right`.
    pub fn reconstruct(&self) -> Mat2 {
        let d = Mat2::diag(c64(self.singulars[0], 0.0), c64(self.singulars[1], 0.0));
        self.left.mul(&d).mul(&self.right)
    }

    /// Moore-Penrose pseudo-inverse with an absolute singular-value cutoff.
    pub fn pseudo_inverse(&self, cutoff: f64) -> Mat2 {
        let inv = |s: f64| if s > cutoff { c64(1.0 / s, 0.0) } else { C64::ZERO };
        let d = Mat2::diag(inv(self.singulars[0]), inv(self.singulars[1]));
        self.right.adjoint().mul(&d).mul(&self.left.adjoint())
    }
}

/// Orthogonal complement of a unit 2-vector: `(x, y) -> (-conj(y), conj(x))`.
fn orthogonal_complement(v: [C64; 2]) -> [C64; 2] {
    [-v[1].conj(), v[0].conj()]
}

fn normalize2(v: [C64; 2]) -> ([C64; 2], f64) {
    let n = (v[0].norm_sqr() + v[1].norm_sqr()).sqrt();
    if n == 0.0 {
        ([C64::ZERO; 2], 0.0)
    } else {
        ([v[0] / n, v[1] / n], n)
    }
}

/// Exact singular value decomposition of a 2x2 complex matrix.
///
/// Deterministic for a given input. Phase convention: each column of the
/// left factor has its first entry of significant magnitude real and
/// nonnegative, with the compensating phase folded into the right factor.
/// Singular values within [`ANGLE_EPSILON`] of each other keep the basis
/// order produced by the eigenvector construction (no re-sorting).
pub fn svd2(m: &Mat2) -> Svd2Result {
    // Hermitian Gram matrix B = m^H m = [[a, b], [conj(b), d]].
    let b_mat = m.adjoint().mul(m);
    let a = b_mat.at(0, 0).re;
    let d = b_mat.at(1, 1).re;
    let b = b_mat.at(0, 1);

    let half_trace = 0.5 * (a + d);
    let disc = (0.25 * (a - d) * (a - d) + b.norm_sqr()).sqrt();
    let lambda_max = half_trace + disc;

    // Eigenvector of the dominant eigenvalue. Pick the row formula without
    // cancellation (decided by which diagonal entry is larger).
    let v_raw = if a >= d {
        [c64(lambda_max - d, 0.0), b.conj()]
    } else {
        [b, c64(lambda_max - a, 0.0)]
    };
    let (mut v1, v_norm) = normalize2(v_raw);
    if v_norm == 0.0 {
        // Gram matrix is a scalar multiple of the identity; keep basis order.
        v1 = [C64::ONE, C64::ZERO];
    }
    let v2 = orthogonal_complement(v1);

    // Left vectors from the images; re-orthogonalized so both factors stay
    // unitary even when the Gram eigenproblem is near-degenerate.
    let t1 = m.apply(v1);
    let (u1_unit, sigma1) = normalize2(t1);
    let u1 = if sigma1 > 0.0 { u1_unit } else { [C64::ONE, C64::ZERO] };

    let t2 = m.apply(v2);
    let overlap = u1[0].conj() * t2[0] + u1[1].conj() * t2[1];
    let t2_orth = [t2[0] - overlap * u1[0], t2[1] - overlap * u1[1]];
    let (u2_unit, sigma2) = normalize2(t2_orth);
    let u2 = if sigma2 > 0.0 { u2_unit } else { orthogonal_complement(u1) };
    let sigma2 = sigma2.min(sigma1);

    let mut left = Mat2::new([[u1[0], u2[0]], [u1[1], u2[1]]]);
    let mut right = Mat2::new([[v1[0].conj(), v1[1].conj()], [v2[0].conj(), v2[1].conj()]]);

    // Phase convention on the left columns, compensated in the right rows.
    for k in 0..2 {
        let lead = if left.at(0, k).norm() > 1e-12 { left.at(0, k) } else { left.at(1, k) };
        if lead.norm() > 0.0 {
            let phase = lead / lead.norm();
            let mut l = left.entries();
            let mut r = right.entries();
            for row in 0..2 {
                l[row][k] *= phase.conj();
                r[k][row] *= phase;
            }
            left = Mat2::new(l);
            right = Mat2::new(r);
        }
    }

    Svd2Result { left, singulars: [sigma1, sigma2], right }
}

// ---------------------------------------------------------------------------
// ZYZ decomposition
// ---------------------------------------------------------------------------

/// Euler angles with explicit global phase:
/// `u = e^{i delta} Rz(alpha) Ry(beta) Rz(gamma)`.
///
/// `beta` lies in `[0, pi]`; the other three angles in `(-pi, pi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZyzAngles {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
}

impl ZyzAngles {
    /// Reconstruct the unitary this set of angles encodes.
    pub fn to_matrix(&self) -> Mat2 {
        let m = Mat2::rotation_z(self.alpha)
            .mul(&Mat2::rotation_y(self.beta))
            .mul(&Mat2::rotation_z(self.gamma));
        m.scale(C64::from_polar(1.0, self.delta))
    }
}

/// Wrap an angle into `(-pi, pi]`.
pub fn wrap_angle(x: f64) -> f64 {
    let tau = std::f64::consts::TAU;
    let mut y = x % tau;
    if y <= -std::f64::consts::PI {
        y += tau;
    } else if y > std::f64::consts::PI {
        y -= tau;
    }
    y
}

/// ZYZ Euler decomposition of a single-qubit unitary.
///
/// Fails with [`NumericsError::NotUnitary`] when `u^H u` deviates from the
/// identity by more than [`UNITARY_TOLERANCE`] in max-norm.
pub fn zyz_decompose(u: &Mat2) -> Result<ZyzAngles, NumericsError> {
    let deviation = u.unitarity_error();
    if deviation > UNITARY_TOLERANCE {
        return Err(NumericsError::NotUnitary { deviation });
    }

    let det_arg = u.determinant().arg();
    let mut delta = 0.5 * det_arg;
    let beta = 2.0 * u.at(1, 0).norm().atan2(u.at(0, 0).norm());
    let ang1 = u.at(1, 1).arg();
    let ang2 = u.at(1, 0).arg();
    let alpha_raw = ang1 + ang2 - det_arg;
    let gamma_raw = ang1 - ang2;

    // Wrapping alpha or gamma by 2*pi flips the sign of its Rz factor; fold
    // the accumulated sign into the global phase.
    let tau = std::f64::consts::TAU;
    let alpha = wrap_angle(alpha_raw);
    let gamma = wrap_angle(gamma_raw);
    let wraps = ((alpha_raw - alpha) / tau).round() as i64 + ((gamma_raw - gamma) / tau).round() as i64;
    if wraps.rem_euclid(2) == 1 {
        delta += std::f64::consts::PI;
    }
    delta = wrap_angle(delta);

    Ok(ZyzAngles { alpha, beta, gamma, delta })
}

// ---------------------------------------------------------------------------
// Fidelity
// ---------------------------------------------------------------------------

/// Overlap `|<psi|phi>|^2` of two normalized pure states.
pub fn fidelity(psi: &[C64], phi: &[C64]) -> Result<f64, NumericsError> {
    if psi.len() != phi.len() {
        return Err(NumericsError::DimensionMismatch { left: psi.len(), right: phi.len() });
    }
    for v in [psi, phi] {
        let norm_sq: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        if (norm_sq - 1.0).abs() > 1e-9 {
            return Err(NumericsError::NotNormalized { norm_sq });
        }
    }
    let overlap: C64 = psi.iter().zip(phi).map(|(p, q)| p.conj() * q).sum();
    Ok(overlap.norm_sqr().min(1.0))
}

// ---------------------------------------------------------------------------
// Dense complex matrices (isometries and circuit oracles)
// ---------------------------------------------------------------------------

/// Dense column-major complex matrix.
///
/// Deliberately minimal: only what isometry generation and the circuit
/// unitary oracle need. Not a general linear-algebra type.
#[derive(Debug, Clone, PartialEq)]
pub struct CMat {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl CMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![C64::ZERO; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, C64::ONE);
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn at(&self, row: usize, col: usize) -> C64 {
        self.data[col * self.rows + row]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: C64) {
        self.data[col * self.rows + row] = value;
    }

    pub fn column(&self, col: usize) -> &[C64] {
        &self.data[col * self.rows..(col + 1) * self.rows]
    }

    pub fn column_mut(&mut self, col: usize) -> &mut [C64] {
        &mut self.data[col * self.rows..(col + 1) * self.rows]
    }

    pub fn adjoint(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for c in 0..self.cols {
            for r in 0..self.rows {
                out.set(c, r, self.at(r, c).conj());
            }
        }
        out
    }

    pub fn mul(&self, rhs: &Self) -> Self {
        assert_eq!(self.cols, rhs.rows, "dimension mismatch in CMat::mul");
        let mut out = Self::zeros(self.rows, rhs.cols);
        for c in 0..rhs.cols {
            for k in 0..self.cols {
                let f = rhs.at(k, c);
                if f == C64::ZERO {
                    continue;
                }
                for r in 0..self.rows {
                    let v = out.at(r, c) + self.at(r, k) * f;
                    out.set(r, c, v);
                }
            }
        }
        out
    }

    pub fn max_norm_diff(&self, rhs: &Self) -> f64 {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        self.data
            .iter()
            .zip(&rhs.data)
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max)
    }

    /// `max |(A^H A - I)_ij|`; zero when the columns are orthonormal.
    pub fn isometry_error(&self) -> f64 {
        self.adjoint().mul(self).max_norm_diff(&Self::identity(self.cols))
    }

    /// Extract a 2x2 block starting at `row` (for slicing stacked operators).
    pub fn block2(&self, row: usize) -> Mat2 {
        Mat2::new([
            [self.at(row, 0), self.at(row, 1)],
            [self.at(row + 1, 0), self.at(row + 1, 1)],
        ])
    }
}

/// Standard-normal sample via Box-Muller, fed from a seeded stream.
fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    loop {
        let u1: f64 = rng.gen();
        if u1 > f64::MIN_POSITIVE {
            let u2: f64 = rng.gen();
            return (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
        }
    }
}

/// Random matrix with orthonormal columns, deterministic per seed.
///
/// Columns come from a complex Gaussian sample orthonormalized by two passes
/// of modified Gram-Schmidt, which is Haar-distributed for square shapes.
pub fn random_isometry(rows: usize, cols: usize, seed: u64) -> CMat {
    assert!(cols >= 1 && cols <= rows, "need 1 <= cols <= rows");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = CMat::zeros(rows, cols);

    let mut col = 0;
    while col < cols {
        for r in 0..rows {
            let z = c64(standard_normal(&mut rng), standard_normal(&mut rng));
            m.set(r, col, z);
        }
        // Two projection passes keep orthogonality at machine precision.
        for _pass in 0..2 {
            for prev in 0..col {
                let mut overlap = C64::ZERO;
                for r in 0..rows {
                    overlap += m.at(r, prev).conj() * m.at(r, col);
                }
                for r in 0..rows {
                    let v = m.at(r, col) - overlap * m.at(r, prev);
                    m.set(r, col, v);
                }
            }
        }
        let norm: f64 = m.column(col).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm < 1e-8 {
            // Degenerate draw; take a fresh sample for this column.
            continue;
        }
        for r in 0..rows {
            let v = m.at(r, col) / norm;
            m.set(r, col, v);
        }
        col += 1;
    }
    m
}

/// Haar-like random unitary of the given dimension, deterministic per seed.
pub fn random_unitary(dim: usize, seed: u64) -> CMat {
    random_isometry(dim, dim, seed)
}

/// Seeded random 2x2 unitary as a [`Mat2`].
pub fn random_unitary2(seed: u64) -> Mat2 {
    let u = random_unitary(2, seed);
    Mat2::new([[u.at(0, 0), u.at(0, 1)], [u.at(1, 0), u.at(1, 1)]])
}
