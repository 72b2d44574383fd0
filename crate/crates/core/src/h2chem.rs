//! H2 electronic structure in the STO-3G basis, mapped to a 4-qubit Hamiltonian.
//!
//! Pipeline: contracted 1s Gaussian integrals (Boys function for the Coulomb
//! terms), closed-form restricted Hartree-Fock, second quantization over the
//! spin orbitals `(g up, g down, u up, u down)` and the Jordan-Wigner map
//! `a_p = (Z_0 .. Z_{p-1}) (X_p + i Y_p) / 2`. With qubit 0 as the most
//! significant bit the Hartree-Fock determinant is `|1100>`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::statevec::{
    HermitianSpectrum, Pauli, PauliString, PauliSum, StateError, Statevector, C64,
};

pub const BOHR_PER_ANGSTROM: f64 = 1.0 / 0.529_177_210_903;
pub const MIN_DISTANCE: f64 = 0.725;
pub const MAX_DISTANCE: f64 = 2.5;
pub const N_QUBITS: usize = 4;
/// Basis index of the Hartree-Fock determinant `|1100>`.
pub const HF_INDEX: usize = 0b1100;

/// STO-3G hydrogen 1s (zeta = 1.24): exponents and contraction coefficients.
const STO3G_EXPONENTS: [f64; 3] = [3.425_250_91, 0.623_913_73, 0.168_855_40];
const STO3G_COEFFS: [f64; 3] = [0.154_328_97, 0.535_328_14, 0.444_634_54];

const PRUNE_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChemError {
    #[error("bond distance {0} Å outside supported range [0.725, 2.5]")]
    DistanceOutOfRange(f64),
    #[error("unsupported molecule {0:?}; only H2 is available")]
    Molecule(String),
    #[error(transparent)]
    State(#[from] StateError),
    #[error("Jordan-Wigner Hamiltonian has complex coefficient on {label} ({imag:e})")]
    ComplexCoefficient { label: String, imag: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoleculeSpec {
    pub name: String,
    /// Ångström.
    pub bond_distance: f64,
    pub basis: String,
}

impl MoleculeSpec {
    pub fn h2(bond_distance: f64) -> Result<Self, ChemError> {
        if !(MIN_DISTANCE..=MAX_DISTANCE).contains(&bond_distance) {
            return Err(ChemError::DistanceOutOfRange(bond_distance));
        }
        Ok(Self {
            name: "H2".into(),
            bond_distance,
            basis: "STO-3G".into(),
        })
    }
}

/// AO integrals over the two contracted 1s functions, in Hartree atomic units.
#[derive(Debug, Clone, PartialEq)]
pub struct Integrals {
    pub distance_bohr: f64,
    pub overlap: [[f64; 2]; 2],
    pub kinetic: [[f64; 2]; 2],
    /// Attraction to both nuclei.
    pub nuclear: [[f64; 2]; 2],
    /// Chemist's notation `(ij|kl)`.
    pub two_electron: [[[[f64; 2]; 2]; 2]; 2],
    pub nuclear_repulsion: f64,
}

impl Integrals {
    pub fn core_hamiltonian(&self) -> [[f64; 2]; 2] {
        let mut h = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                h[i][j] = self.kinetic[i][j] + self.nuclear[i][j];
            }
        }
        h
    }
}

/// `F0(t) = (1/2) sqrt(pi/t) erf(sqrt t)`.
pub fn boys_f0(t: f64) -> f64 {
    if t < 1e-8 {
        1.0 - t / 3.0
    } else {
        0.5 * (PI / t).sqrt() * libm::erf(t.sqrt())
    }
}

#[derive(Debug, Clone, Copy)]
struct Primitive {
    alpha: f64,
    // contraction coefficient times primitive normalization
    weight: f64,
    center: f64,
}

fn contracted(center: f64) -> [Primitive; 3] {
    std::array::from_fn(|k| {
        let alpha = STO3G_EXPONENTS[k];
        Primitive {
            alpha,
            weight: STO3G_COEFFS[k] * (2.0 * alpha / PI).powf(0.75),
            center,
        }
    })
}

fn prim_overlap(a: &Primitive, b: &Primitive) -> f64 {
    let p = a.alpha + b.alpha;
    let r2 = (a.center - b.center).powi(2);
    (PI / p).powf(1.5) * (-a.alpha * b.alpha / p * r2).exp()
}

fn prim_kinetic(a: &Primitive, b: &Primitive) -> f64 {
    let p = a.alpha + b.alpha;
    let mu = a.alpha * b.alpha / p;
    let r2 = (a.center - b.center).powi(2);
    mu * (3.0 - 2.0 * mu * r2) * (PI / p).powf(1.5) * (-mu * r2).exp()
}

fn prim_nuclear(a: &Primitive, b: &Primitive, nucleus: f64) -> f64 {
    let p = a.alpha + b.alpha;
    let r2 = (a.center - b.center).powi(2);
    let center = (a.alpha * a.center + b.alpha * b.center) / p;
    -2.0 * PI / p * (-a.alpha * b.alpha / p * r2).exp() * boys_f0(p * (center - nucleus).powi(2))
}

fn prim_eri(a: &Primitive, b: &Primitive, c: &Primitive, d: &Primitive) -> f64 {
    let p = a.alpha + b.alpha;
    let q = c.alpha + d.alpha;
    let pc = (a.alpha * a.center + b.alpha * b.center) / p;
    let qc = (c.alpha * c.center + d.alpha * d.center) / q;
    let kab = (-a.alpha * b.alpha / p * (a.center - b.center).powi(2)).exp();
    let kcd = (-c.alpha * d.alpha / q * (c.center - d.center).powi(2)).exp();
    2.0 * PI.powf(2.5) / (p * q * (p + q).sqrt())
        * kab
        * kcd
        * boys_f0(p * q / (p + q) * (pc - qc).powi(2))
}

/// Closed-form STO-3G integrals for H2 at `distance` Ångström (nuclei on the z axis).
pub fn sto3g_integrals(distance: f64) -> Integrals {
    let r = distance * BOHR_PER_ANGSTROM;
    let centers = [0.0, r];
    let basis = [contracted(centers[0]), contracted(centers[1])];

    let pair = |i: usize, j: usize, f: &dyn Fn(&Primitive, &Primitive) -> f64| -> f64 {
        let mut s = 0.0;
        for a in &basis[i] {
            for b in &basis[j] {
                s += a.weight * b.weight * f(a, b);
            }
        }
        s
    };

    let mut overlap = [[0.0; 2]; 2];
    let mut kinetic = [[0.0; 2]; 2];
    let mut nuclear = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            overlap[i][j] = pair(i, j, &prim_overlap);
            kinetic[i][j] = pair(i, j, &prim_kinetic);
            nuclear[i][j] = centers
                .iter()
                .map(|&c| pair(i, j, &|a, b| prim_nuclear(a, b, c)))
                .sum();
        }
    }

    let mut two_electron = [[[[0.0; 2]; 2]; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    let mut s = 0.0;
                    for a in &basis[i] {
                        for b in &basis[j] {
                            for c in &basis[k] {
                                for d in &basis[l] {
                                    s += a.weight
                                        * b.weight
                                        * c.weight
                                        * d.weight
                                        * prim_eri(a, b, c, d);
                                }
                            }
                        }
                    }
                    two_electron[i][j][k][l] = s;
                }
            }
        }
    }

    Integrals {
        distance_bohr: r,
        overlap,
        kinetic,
        nuclear,
        two_electron,
        nuclear_repulsion: 1.0 / r,
    }
}

/// Restricted Hartree-Fock solution for the two-electron ground state.
#[derive(Debug, Clone, PartialEq)]
pub struct HartreeFock {
    pub integrals: Integrals,
    /// Columns are the bonding (g) and antibonding (u) orbitals in the AO basis.
    pub coefficients: [[f64; 2]; 2],
    pub orbital_energies: [f64; 2],
    /// Total energy including nuclear repulsion (Hartree).
    pub hf_energy: f64,
    /// MO-basis core Hamiltonian.
    pub h_mo: [[f64; 2]; 2],
    /// MO-basis `(pq|rs)`.
    pub eri_mo: [[[[f64; 2]; 2]; 2]; 2],
}

/// Symmetric orthogonalization of the homonuclear pair fixes the orbitals:
/// `g = (chi_1 + chi_2)/sqrt(2(1+S))`, `u = (chi_1 - chi_2)/sqrt(2(1-S))`.
pub fn hartree_fock(spec: &MoleculeSpec) -> Result<HartreeFock, ChemError> {
    if spec.name != "H2" {
        return Err(ChemError::Molecule(spec.name.clone()));
    }
    Ok(hartree_fock_at(spec.bond_distance))
}

pub(crate) fn hartree_fock_at(distance: f64) -> HartreeFock {
    let ints = sto3g_integrals(distance);
    let s = ints.overlap[0][1];
    let ng = 1.0 / (2.0 * (1.0 + s)).sqrt();
    let nu = 1.0 / (2.0 * (1.0 - s)).sqrt();
    // c[ao][mo]
    let c = [[ng, nu], [ng, -nu]];

    let hcore = ints.core_hamiltonian();
    let mut h_mo = [[0.0; 2]; 2];
    for p in 0..2 {
        for q in 0..2 {
            let mut v = 0.0;
            for m in 0..2 {
                for n in 0..2 {
                    v += c[m][p] * c[n][q] * hcore[m][n];
                }
            }
            h_mo[p][q] = v;
        }
    }

    let mut eri_mo = [[[[0.0; 2]; 2]; 2]; 2];
    for p in 0..2 {
        for q in 0..2 {
            for r in 0..2 {
                for s_ in 0..2 {
                    let mut v = 0.0;
                    for a in 0..2 {
                        for b in 0..2 {
                            for cc in 0..2 {
                                for d in 0..2 {
                                    v += c[a][p]
                                        * c[b][q]
                                        * c[cc][r]
                                        * c[d][s_]
                                        * ints.two_electron[a][b][cc][d];
                                }
                            }
                        }
                    }
                    eri_mo[p][q][r][s_] = v;
                }
            }
        }
    }

    let j_gg = eri_mo[0][0][0][0];
    let j_gu = eri_mo[0][0][1][1];
    let k_gu = eri_mo[0][1][1][0];
    let orbital_energies = [h_mo[0][0] + j_gg, h_mo[1][1] + 2.0 * j_gu - k_gu];
    let hf_energy = 2.0 * h_mo[0][0] + j_gg + ints.nuclear_repulsion;

    HartreeFock {
        integrals: ints,
        coefficients: c,
        orbital_energies,
        hf_energy,
        h_mo,
        eri_mo,
    }
}

/// Pauli sum with complex coefficients, used while assembling fermionic products.
#[derive(Debug, Clone, Default)]
pub(crate) struct ComplexPauliSum {
    terms: Vec<(Vec<Pauli>, C64)>,
}

impl ComplexPauliSum {
    fn single(ops: Vec<Pauli>, coeff: C64) -> Self {
        Self {
            terms: vec![(ops, coeff)],
        }
    }

    fn add_assign(&mut self, other: &ComplexPauliSum, scale: C64) {
        for (ops, c) in &other.terms {
            self.add_term(ops.clone(), c * scale);
        }
    }

    fn add_term(&mut self, ops: Vec<Pauli>, coeff: C64) {
        match self.terms.iter_mut().find(|(o, _)| *o == ops) {
            Some((_, c)) => *c += coeff,
            None => self.terms.push((ops, coeff)),
        }
    }

    fn mul(&self, other: &ComplexPauliSum) -> ComplexPauliSum {
        let mut out = ComplexPauliSum::default();
        for (a, ca) in &self.terms {
            for (b, cb) in &other.terms {
                let mut phase = ca * cb;
                let ops = a
                    .iter()
                    .zip(b)
                    .map(|(&x, &y)| {
                        let (ph, p) = x.mul(y);
                        phase *= ph;
                        p
                    })
                    .collect();
                out.add_term(ops, phase);
            }
        }
        out
    }

    fn adjoint(&self) -> ComplexPauliSum {
        ComplexPauliSum {
            terms: self
                .terms
                .iter()
                .map(|(o, c)| (o.clone(), c.conj()))
                .collect(),
        }
    }

    /// Converts to a real `PauliSum`, failing if a surviving term is complex.
    fn into_real(self, n_qubits: usize, tol: f64) -> Result<PauliSum, ChemError> {
        let mut sum = PauliSum::empty(n_qubits)?;
        for (ops, c) in self.terms {
            if c.norm() < tol {
                continue;
            }
            if c.im.abs() > tol {
                return Err(ChemError::ComplexCoefficient {
                    label: ops.iter().map(|p| p.symbol()).collect(),
                    imag: c.im,
                });
            }
            sum.push(PauliString::new(ops, c.re))?;
        }
        Ok(sum)
    }
}

/// Jordan-Wigner image of `a_p` (`create = false`) or `a_p^dagger`.
pub(crate) fn jw_ladder(p: usize, n_qubits: usize, create: bool) -> ComplexPauliSum {
    let mut x = vec![Pauli::I; n_qubits];
    let mut y = vec![Pauli::I; n_qubits];
    for q in 0..p {
        x[q] = Pauli::Z;
        y[q] = Pauli::Z;
    }
    x[p] = Pauli::X;
    y[p] = Pauli::Y;
    let iy = if create {
        C64::new(0.0, -0.5)
    } else {
        C64::new(0.0, 0.5)
    };
    let mut s = ComplexPauliSum::single(x, C64::new(0.5, 0.0));
    s.add_term(y, iy);
    s
}

/// Product of ladder operators, e.g. `[(2, true), (0, false)]` is `a_2^dagger a_0`.
pub(crate) fn ladder_product(ops: &[(usize, bool)], n_qubits: usize) -> ComplexPauliSum {
    let mut acc = ComplexPauliSum::single(vec![Pauli::I; n_qubits], C64::new(1.0, 0.0));
    for &(p, create) in ops {
        acc = acc.mul(&jw_ladder(p, n_qubits, create));
    }
    acc
}

/// Hermitian generator `K = i (T - T^dagger)` so that `exp(theta (T - T^dagger)) = exp(-i theta K)`.
pub(crate) fn excitation_generator(
    ops: &[(usize, bool)],
    n_qubits: usize,
) -> Result<PauliSum, ChemError> {
    let t = ladder_product(ops, n_qubits);
    let mut g = t.clone();
    g.add_assign(&t.adjoint(), C64::new(-1.0, 0.0));
    let mut k = ComplexPauliSum::default();
    k.add_assign(&g, C64::i());
    k.into_real(n_qubits, PRUNE_TOL)
}

/// JW number operator `sum_p (1 - Z_p)/2`.
pub fn number_operator() -> PauliSum {
    let mut terms = vec![PauliString::identity(N_QUBITS, N_QUBITS as f64 / 2.0)];
    for p in 0..N_QUBITS {
        terms.push(PauliString::single(N_QUBITS, p, Pauli::Z, -0.5));
    }
    PauliSum::new(N_QUBITS, terms).expect("4 qubits")
}

#[derive(Debug, Clone, PartialEq)]
pub struct QubitHamiltonian {
    pub distance: f64,
    pub pauli_sum: PauliSum,
    pub nuclear_repulsion: f64,
    pub hf_energy: f64,
}

impl QubitHamiltonian {
    pub fn hf_state(&self) -> Statevector {
        Statevector::basis(N_QUBITS, HF_INDEX).expect("4-qubit basis state")
    }
}

/// Spin-orbital one-electron integral; spin orbital `p` is spatial `p / 2` with spin `p % 2`.
fn h_spin(hf: &HartreeFock, p: usize, q: usize) -> f64 {
    if p % 2 != q % 2 {
        0.0
    } else {
        hf.h_mo[p / 2][q / 2]
    }
}

/// Physicist's `<pq|rs> = (pr|qs)` over spin orbitals.
fn g_spin(hf: &HartreeFock, p: usize, q: usize, r: usize, s: usize) -> f64 {
    if p % 2 != r % 2 || q % 2 != s % 2 {
        0.0
    } else {
        hf.eri_mo[p / 2][r / 2][q / 2][s / 2]
    }
}

pub fn jordan_wigner(spec: &MoleculeSpec) -> Result<QubitHamiltonian, ChemError> {
    let hf = hartree_fock(spec)?;
    qubit_hamiltonian_from(&hf, spec.bond_distance)
}

pub(crate) fn qubit_hamiltonian_from(
    hf: &HartreeFock,
    distance: f64,
) -> Result<QubitHamiltonian, ChemError> {
    let n = N_QUBITS;
    let one = C64::new(1.0, 0.0);
    let mut h = ComplexPauliSum::single(
        vec![Pauli::I; n],
        C64::new(hf.integrals.nuclear_repulsion, 0.0),
    );
    for p in 0..n {
        for q in 0..n {
            let v = h_spin(hf, p, q);
            if v.abs() > PRUNE_TOL {
                h.add_assign(&ladder_product(&[(p, true), (q, false)], n), one * v);
            }
        }
    }
    for p in 0..n {
        for q in 0..n {
            for r in 0..n {
                for s in 0..n {
                    let v = g_spin(hf, p, q, r, s);
                    if v.abs() > PRUNE_TOL {
                        h.add_assign(
                            &ladder_product(&[(p, true), (q, true), (s, false), (r, false)], n),
                            one * (0.5 * v),
                        );
                    }
                }
            }
        }
    }
    let pauli_sum = h.into_real(n, PRUNE_TOL)?.simplified(PRUNE_TOL);
    Ok(QubitHamiltonian {
        distance,
        pauli_sum,
        nuclear_repulsion: hf.integrals.nuclear_repulsion,
        hf_energy: hf.hf_energy,
    })
}

#[derive(Debug, Clone)]
pub struct GroundState {
    pub energy: f64,
    pub state: Statevector,
}

/// Exact diagonalization of the 16x16 Hamiltonian.
pub fn exact_ground(h: &QubitHamiltonian) -> Result<GroundState, ChemError> {
    let spectrum = HermitianSpectrum::of_sum(&h.pauli_sum)?;
    let (energy, v) = spectrum.ground();
    let state = Statevector::normalized(v.iter().copied().collect())?;
    Ok(GroundState { energy, state })
}
