//! Dense statevector simulation for small registers (1 to 4 qubits).
//!
//! Qubit 0 is the most significant bit of the basis index: on a 3-qubit
//! register the basis state `|q0 q1 q2>` sits at index `q0*4 + q1*2 + q2`.
//! Every module in the crate relies on this ordering.
//!
//! Rotations follow `R_A(theta) = exp(-i theta A / 2)`.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type C64 = Complex64;

pub const MAX_QUBITS: usize = 4;

const NORM_TOL: f64 = 1e-10;
const HERMITIAN_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StateError {
    #[error("qubit count {0} outside supported range 1..=4")]
    QubitCount(usize),
    #[error("qubit index {index} out of range for {n_qubits}-qubit register")]
    QubitOutOfRange { index: usize, n_qubits: usize },
    #[error("dimension mismatch: expected {expected} qubits, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("amplitude vector of length {0} is not a power of two within range")]
    BadLength(usize),
    #[error("state is not normalized (norm {0})")]
    NotNormalized(f64),
    #[error("non-finite rotation angle")]
    NonFiniteAngle,
    #[error("operator is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl From<Axis> for Pauli {
    fn from(a: Axis) -> Self {
        match a {
            Axis::X => Pauli::X,
            Axis::Y => Pauli::Y,
            Axis::Z => Pauli::Z,
        }
    }
}

impl Pauli {
    pub fn symbol(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }

    /// Single-qubit product `self * other = phase * result`.
    pub fn mul(self, other: Pauli) -> (C64, Pauli) {
        use Pauli::*;
        let i = C64::i();
        let one = C64::new(1.0, 0.0);
        match (self, other) {
            (I, p) | (p, I) => (one, p),
            (X, X) | (Y, Y) | (Z, Z) => (one, I),
            (X, Y) => (i, Z),
            (Y, X) => (-i, Z),
            (Y, Z) => (i, X),
            (Z, Y) => (-i, X),
            (Z, X) => (i, Y),
            (X, Z) => (-i, Y),
        }
    }
}

fn check_qubits(n: usize) -> Result<(), StateError> {
    if (1..=MAX_QUBITS).contains(&n) {
        Ok(())
    } else {
        Err(StateError::QubitCount(n))
    }
}

#[inline]
fn bit_of(n_qubits: usize, qubit: usize) -> usize {
    1 << (n_qubits - 1 - qubit)
}

/// A pure state on `n_qubits` qubits.
#[derive(Clone, PartialEq)]
pub struct Statevector {
    n_qubits: usize,
    amps: Vec<C64>,
}

impl fmt::Debug for Statevector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Statevector")
            .field("n_qubits", &self.n_qubits)
            .field("amps", &self.amps)
            .finish()
    }
}

impl Statevector {
    /// The computational basis state with index `index`.
    pub fn basis(n_qubits: usize, index: usize) -> Result<Self, StateError> {
        check_qubits(n_qubits)?;
        let dim = 1 << n_qubits;
        if index >= dim {
            return Err(StateError::BadLength(index));
        }
        let mut amps = vec![C64::new(0.0, 0.0); dim];
        amps[index] = C64::new(1.0, 0.0);
        Ok(Self { n_qubits, amps })
    }

    pub fn zero(n_qubits: usize) -> Result<Self, StateError> {
        Self::basis(n_qubits, 0)
    }

    /// Wraps an amplitude vector that must already be unit norm.
    pub fn from_amplitudes(amps: Vec<C64>) -> Result<Self, StateError> {
        let n_qubits = qubits_for_len(amps.len())?;
        let norm = norm_of(&amps);
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(StateError::NotNormalized(norm));
        }
        Ok(Self { n_qubits, amps })
    }

    /// Normalizes an arbitrary nonzero amplitude vector.
    pub fn normalized(mut amps: Vec<C64>) -> Result<Self, StateError> {
        let n_qubits = qubits_for_len(amps.len())?;
        let norm = norm_of(&amps);
        if !(norm.is_finite() && norm > 0.0) {
            return Err(StateError::NotNormalized(norm));
        }
        amps.iter_mut().for_each(|a| *a /= norm);
        Ok(Self { n_qubits, amps })
    }

    pub fn from_real(values: &[f64]) -> Result<Self, StateError> {
        Self::normalized(values.iter().map(|&v| C64::new(v, 0.0)).collect())
    }

    /// Haar-random state drawn from normal amplitudes.
    pub fn random<R: Rng + ?Sized>(n_qubits: usize, rng: &mut R) -> Result<Self, StateError> {
        check_qubits(n_qubits)?;
        let dim = 1usize << n_qubits;
        let amps = (0..dim)
            .map(|_| C64::new(gaussian(rng), gaussian(rng)))
            .collect();
        Self::normalized(amps)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amps
    }

    pub fn norm(&self) -> f64 {
        norm_of(&self.amps)
    }

    pub fn inner(&self, other: &Statevector) -> Result<C64, StateError> {
        self.same_dims(other)?;
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    pub fn scaled_phase(&self, phase: f64) -> Statevector {
        let w = C64::from_polar(1.0, phase);
        Statevector {
            n_qubits: self.n_qubits,
            amps: self.amps.iter().map(|a| a * w).collect(),
        }
    }

    pub fn max_abs_diff(&self, other: &Statevector) -> f64 {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    fn same_dims(&self, other: &Statevector) -> Result<(), StateError> {
        if self.n_qubits != other.n_qubits {
            return Err(StateError::DimensionMismatch {
                expected: self.n_qubits,
                found: other.n_qubits,
            });
        }
        Ok(())
    }

    fn check_qubit(&self, qubit: usize) -> Result<(), StateError> {
        if qubit >= self.n_qubits {
            Err(StateError::QubitOutOfRange {
                index: qubit,
                n_qubits: self.n_qubits,
            })
        } else {
            Ok(())
        }
    }

    /// In-place `R_axis(angle)` on `qubit`.
    pub fn rotate_in_place(
        &mut self,
        axis: Axis,
        qubit: usize,
        angle: f64,
    ) -> Result<(), StateError> {
        self.check_qubit(qubit)?;
        if !angle.is_finite() {
            return Err(StateError::NonFiniteAngle);
        }
        let (s, c) = (angle / 2.0).sin_cos();
        let mask = bit_of(self.n_qubits, qubit);
        let amps = &mut self.amps;
        match axis {
            Axis::X => {
                let mis = C64::new(0.0, -s);
                for b in 0..amps.len() {
                    if b & mask == 0 {
                        let (a0, a1) = (amps[b], amps[b | mask]);
                        amps[b] = a0 * c + a1 * mis;
                        amps[b | mask] = a0 * mis + a1 * c;
                    }
                }
            }
            Axis::Y => {
                for b in 0..amps.len() {
                    if b & mask == 0 {
                        let (a0, a1) = (amps[b], amps[b | mask]);
                        amps[b] = a0 * c - a1 * s;
                        amps[b | mask] = a0 * s + a1 * c;
                    }
                }
            }
            Axis::Z => {
                let lo = C64::new(c, -s);
                let hi = C64::new(c, s);
                for (b, a) in amps.iter_mut().enumerate() {
                    *a *= if b & mask == 0 { lo } else { hi };
                }
            }
        }
        Ok(())
    }

    /// In-place application of a dense unitary of matching dimension.
    pub fn apply_matrix_in_place(&mut self, m: &DMatrix<C64>) {
        let v = DVector::from_column_slice(&self.amps);
        let out = m * v;
        self.amps.copy_from_slice(out.as_slice());
    }

    pub fn tensor(&self, other: &Statevector) -> Result<Statevector, StateError> {
        let n = self.n_qubits + other.n_qubits;
        check_qubits(n)?;
        let mut amps = Vec::with_capacity(1 << n);
        for a in &self.amps {
            for b in &other.amps {
                amps.push(a * b);
            }
        }
        Ok(Statevector { n_qubits: n, amps })
    }
}

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    // Box-Muller
    let u1: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
    let u2: f64 = rng.random::<f64>();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

fn qubits_for_len(len: usize) -> Result<usize, StateError> {
    if !len.is_power_of_two() || len < 2 {
        return Err(StateError::BadLength(len));
    }
    let n = len.trailing_zeros() as usize;
    check_qubits(n).map_err(|_| StateError::BadLength(len))?;
    Ok(n)
}

fn norm_of(amps: &[C64]) -> f64 {
    amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
}

/// Returns a rotated copy of `state`.
pub fn apply_rotation(
    state: &Statevector,
    axis: Axis,
    qubit: usize,
    angle: f64,
) -> Result<Statevector, StateError> {
    let mut out = state.clone();
    out.rotate_in_place(axis, qubit, angle)?;
    Ok(out)
}

/// A weighted tensor product of single-qubit Paulis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PauliString {
    pub ops: Vec<Pauli>,
    pub coeff: f64,
}

impl PauliString {
    pub fn new(ops: Vec<Pauli>, coeff: f64) -> Self {
        Self { ops, coeff }
    }

    pub fn identity(n_qubits: usize, coeff: f64) -> Self {
        Self::new(vec![Pauli::I; n_qubits], coeff)
    }

    /// `coeff * P` acting on one qubit, identity elsewhere.
    pub fn single(n_qubits: usize, qubit: usize, p: Pauli, coeff: f64) -> Self {
        let mut ops = vec![Pauli::I; n_qubits];
        ops[qubit] = p;
        Self::new(ops, coeff)
    }

    /// Parses a label such as `"XIZY"` (qubit 0 first).
    pub fn from_label(label: &str, coeff: f64) -> Option<Self> {
        let ops = label
            .chars()
            .map(|c| match c {
                'I' => Some(Pauli::I),
                'X' => Some(Pauli::X),
                'Y' => Some(Pauli::Y),
                'Z' => Some(Pauli::Z),
                _ => None,
            })
            .collect::<Option<Vec<_>>>()?;
        Some(Self::new(ops, coeff))
    }

    pub fn label(&self) -> String {
        self.ops.iter().map(|p| p.symbol()).collect()
    }

    pub fn n_qubits(&self) -> usize {
        self.ops.len()
    }

    fn masks(&self) -> (usize, usize, usize) {
        let n = self.ops.len();
        let (mut x, mut z, mut ny) = (0, 0, 0);
        for (q, p) in self.ops.iter().enumerate() {
            let b = bit_of(n, q);
            match p {
                Pauli::I => {}
                Pauli::X => x |= b,
                Pauli::Z => z |= b,
                Pauli::Y => {
                    x |= b;
                    z |= b;
                    ny += 1;
                }
            }
        }
        (x, z, ny)
    }

    /// Adds `scale * coeff * P |state>` into `out`.
    pub(crate) fn accumulate(&self, scale: C64, state: &[C64], out: &mut [C64]) {
        let (x, z, ny) = self.masks();
        // Y = i X Z, so P = i^ny X^x Z^z
        let iy = [
            C64::new(1.0, 0.0),
            C64::new(0.0, 1.0),
            C64::new(-1.0, 0.0),
            C64::new(0.0, -1.0),
        ][ny % 4];
        let w = scale * iy * self.coeff;
        for (b, a) in state.iter().enumerate() {
            let sign = if (b & z).count_ones() % 2 == 0 {
                1.0
            } else {
                -1.0
            };
            out[b ^ x] += w * sign * a;
        }
    }

    pub fn to_matrix(&self) -> DMatrix<C64> {
        let dim = 1 << self.n_qubits();
        let mut m = DMatrix::zeros(dim, dim);
        let mut col = vec![C64::new(0.0, 0.0); dim];
        let mut out = vec![C64::new(0.0, 0.0); dim];
        for j in 0..dim {
            col.iter_mut().for_each(|c| *c = C64::new(0.0, 0.0));
            out.iter_mut().for_each(|c| *c = C64::new(0.0, 0.0));
            col[j] = C64::new(1.0, 0.0);
            self.accumulate(C64::new(1.0, 0.0), &col, &mut out);
            for i in 0..dim {
                m[(i, j)] = out[i];
            }
        }
        m
    }
}

/// Real-weighted sum of Pauli strings over a common register.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PauliSum {
    n_qubits: usize,
    terms: Vec<PauliString>,
}

impl PauliSum {
    pub fn new(n_qubits: usize, terms: Vec<PauliString>) -> Result<Self, StateError> {
        check_qubits(n_qubits)?;
        for t in &terms {
            if t.n_qubits() != n_qubits {
                return Err(StateError::DimensionMismatch {
                    expected: n_qubits,
                    found: t.n_qubits(),
                });
            }
        }
        Ok(Self { n_qubits, terms })
    }

    pub fn empty(n_qubits: usize) -> Result<Self, StateError> {
        Self::new(n_qubits, Vec::new())
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn terms(&self) -> &[PauliString] {
        &self.terms
    }

    pub fn push(&mut self, term: PauliString) -> Result<(), StateError> {
        if term.n_qubits() != self.n_qubits {
            return Err(StateError::DimensionMismatch {
                expected: self.n_qubits,
                found: term.n_qubits(),
            });
        }
        self.terms.push(term);
        Ok(())
    }

    /// Merges duplicate strings and drops terms with `|coeff| < tol`.
    pub fn simplified(&self, tol: f64) -> PauliSum {
        let mut merged: Vec<PauliString> = Vec::new();
        for t in &self.terms {
            match merged.iter_mut().find(|m| m.ops == t.ops) {
                Some(m) => m.coeff += t.coeff,
                None => merged.push(t.clone()),
            }
        }
        merged.retain(|t| t.coeff.abs() >= tol);
        PauliSum {
            n_qubits: self.n_qubits,
            terms: merged,
        }
    }

    pub fn scaled(&self, s: f64) -> PauliSum {
        PauliSum {
            n_qubits: self.n_qubits,
            terms: self
                .terms
                .iter()
                .map(|t| PauliString::new(t.ops.clone(), t.coeff * s))
                .collect(),
        }
    }

    pub fn apply(&self, state: &Statevector) -> Result<Vec<C64>, StateError> {
        self.check(state)?;
        let mut out = vec![C64::new(0.0, 0.0); state.dim()];
        for t in &self.terms {
            t.accumulate(C64::new(1.0, 0.0), state.amplitudes(), &mut out);
        }
        Ok(out)
    }

    pub fn to_matrix(&self) -> DMatrix<C64> {
        let dim = 1 << self.n_qubits;
        let mut m = DMatrix::zeros(dim, dim);
        for t in &self.terms {
            m += t.to_matrix();
        }
        m
    }

    fn check(&self, state: &Statevector) -> Result<(), StateError> {
        if state.n_qubits() != self.n_qubits {
            return Err(StateError::DimensionMismatch {
                expected: self.n_qubits,
                found: state.n_qubits(),
            });
        }
        Ok(())
    }
}

/// `<state| op |state>`.
pub fn expectation(state: &Statevector, op: &PauliSum) -> Result<f64, StateError> {
    let h_psi = op.apply(state)?;
    let v: C64 = state
        .amplitudes()
        .iter()
        .zip(&h_psi)
        .map(|(a, b)| a.conj() * b)
        .sum();
    debug_assert!(
        v.im.abs() < 1e-10 * (1.0 + v.re.abs()),
        "imaginary residue {}",
        v.im
    );
    Ok(v.re)
}

/// `|<a|b>|^2`.
pub fn fidelity(a: &Statevector, b: &Statevector) -> Result<f64, StateError> {
    Ok(a.inner(b)?.norm_sqr().clamp(0.0, 1.0))
}

/// Eigendecomposition of a Hermitian operator (ascending eigenvalues), reusable for
/// `exp(-i s H)` at any `s`.
#[derive(Debug, Clone)]
pub struct HermitianSpectrum {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: DMatrix<C64>,
}

impl HermitianSpectrum {
    pub fn of_matrix(m: &DMatrix<C64>) -> Result<Self, StateError> {
        let dev = (m - m.adjoint())
            .iter()
            .map(|c| c.norm())
            .fold(0.0, f64::max);
        if dev > HERMITIAN_TOL * (1.0 + m.iter().map(|c| c.norm()).fold(0.0, f64::max)) {
            return Err(StateError::NotHermitian(dev));
        }
        let herm = (m + m.adjoint()).scale(0.5);
        let eig = herm.symmetric_eigen();
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        Ok(Self {
            eigenvalues: order.iter().map(|&j| eig.eigenvalues[j]).collect(),
            eigenvectors: eig.eigenvectors.select_columns(&order),
        })
    }

    pub fn of_sum(h: &PauliSum) -> Result<Self, StateError> {
        Self::of_matrix(&h.to_matrix())
    }

    /// Dense `exp(-i scale H)`.
    pub fn unitary(&self, scale: f64) -> DMatrix<C64> {
        let v = &self.eigenvectors;
        let mut vd = v.clone();
        for (j, &l) in self.eigenvalues.iter().enumerate() {
            let p = C64::from_polar(1.0, -scale * l);
            vd.column_mut(j).iter_mut().for_each(|c| *c *= p);
        }
        vd * v.adjoint()
    }

    pub fn ground(&self) -> (f64, DVector<C64>) {
        let (idx, &e) = self
            .eigenvalues
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .expect("nonempty spectrum");
        (e, self.eigenvectors.column(idx).into_owned())
    }
}

/// Applies `exp(-i scale H)` to `state`.
pub fn exp_apply(h: &PauliSum, scale: f64, state: &Statevector) -> Result<Statevector, StateError> {
    h.check(state)?;
    let spec = HermitianSpectrum::of_sum(h)?;
    let mut out = state.clone();
    out.apply_matrix_in_place(&spec.unitary(scale));
    Ok(out)
}

/// Single-qubit Bloch vector `(<X_q>, <Y_q>, <Z_q>)`.
pub fn reduced_bloch(state: &Statevector, qubit: usize) -> Result<(f64, f64, f64), StateError> {
    state.check_qubit(qubit)?;
    let n = state.n_qubits();
    let mask = bit_of(n, qubit);
    let amps = state.amplitudes();
    let (mut rho01, mut p0, mut p1) = (C64::new(0.0, 0.0), 0.0, 0.0);
    for b in 0..amps.len() {
        if b & mask == 0 {
            let (a0, a1) = (amps[b], amps[b | mask]);
            p0 += a0.norm_sqr();
            p1 += a1.norm_sqr();
            rho01 += a0 * a1.conj();
        }
    }
    // rho = [[p0, rho01], [conj(rho01), p1]]; <X> = 2 Re rho01, <Y> = -2 Im rho01
    Ok((2.0 * rho01.re, -2.0 * rho01.im, p0 - p1))
}
