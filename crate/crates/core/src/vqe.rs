//! Disentangled UCC ansatz for H2 and a monotone VQE that records its trajectory.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::h2chem::{exact_ground, excitation_generator, ChemError, QubitHamiltonian, N_QUBITS};
use crate::statevec::{expectation, HermitianSpectrum, StateError, Statevector, C64};

pub const SCHEMA_VERSION: u32 = 1;
pub const TRAJECTORY_CAP: usize = 256;
pub const N_PARAMS: usize = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VqeError {
    #[error(transparent)]
    Chem(#[from] ChemError),
    #[error(transparent)]
    State(#[from] StateError),
    #[error("non-finite energy at iteration {iteration} for parameters {params:?}")]
    NonFiniteEnergy { iteration: usize, params: Vec<f64> },
    #[error("expected {N_PARAMS} ansatz parameters, got {0}")]
    ParameterCount(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Excitation {
    Single { from: usize, to: usize },
    Double { from: [usize; 2], to: [usize; 2] },
}

impl Excitation {
    /// Ladder string of `T`, rightmost operator acting first.
    fn ladder(&self) -> Vec<(usize, bool)> {
        match *self {
            Excitation::Single { from, to } => vec![(to, true), (from, false)],
            Excitation::Double { from, to } => {
                vec![
                    (to[0], true),
                    (to[1], true),
                    (from[1], false),
                    (from[0], false),
                ]
            }
        }
    }
}

/// Product of `exp(theta_j (T_j - T_j^dagger))` in the fixed standard order:
/// single 0->2, single 1->3, double 01->23.
#[derive(Debug, Clone)]
pub struct DuccAnsatz {
    excitations: Vec<Excitation>,
    generators: Vec<HermitianSpectrum>,
}

impl DuccAnsatz {
    pub fn standard() -> Self {
        let excitations = vec![
            Excitation::Single { from: 0, to: 2 },
            Excitation::Single { from: 1, to: 3 },
            Excitation::Double {
                from: [0, 1],
                to: [2, 3],
            },
        ];
        let generators = excitations
            .iter()
            .map(|e| {
                let k = excitation_generator(&e.ladder(), N_QUBITS).expect("real generator");
                HermitianSpectrum::of_sum(&k).expect("Hermitian generator")
            })
            .collect();
        Self {
            excitations,
            generators,
        }
    }

    pub fn excitations(&self) -> &[Excitation] {
        &self.excitations
    }

    pub fn apply(&self, params: &[f64], reference: &Statevector) -> Result<Statevector, VqeError> {
        if params.len() != self.generators.len() {
            return Err(VqeError::ParameterCount(params.len()));
        }
        if reference.n_qubits() != N_QUBITS {
            return Err(StateError::DimensionMismatch {
                expected: N_QUBITS,
                found: reference.n_qubits(),
            }
            .into());
        }
        let mut state = reference.clone();
        for (theta, g) in params.iter().zip(&self.generators) {
            state.apply_matrix_in_place(&g.unitary(*theta));
        }
        Ok(state)
    }

    /// Dense `16 x 16` matrix of `U(params)`.
    pub fn unitary(&self, params: &[f64]) -> Result<DMatrix<C64>, VqeError> {
        if params.len() != self.generators.len() {
            return Err(VqeError::ParameterCount(params.len()));
        }
        let dim = 1 << N_QUBITS;
        let mut u = DMatrix::<C64>::identity(dim, dim);
        for (theta, g) in params.iter().zip(&self.generators) {
            u = g.unitary(*theta) * u;
        }
        Ok(u)
    }

    /// Inverse circuit: factors reversed with negated angles.
    pub fn apply_inverse(
        &self,
        params: &[f64],
        state: &Statevector,
    ) -> Result<Statevector, VqeError> {
        if params.len() != self.generators.len() {
            return Err(VqeError::ParameterCount(params.len()));
        }
        let mut out = state.clone();
        for (theta, g) in params.iter().zip(&self.generators).rev() {
            out.apply_matrix_in_place(&g.unitary(-*theta));
        }
        Ok(out)
    }
}

impl Default for DuccAnsatz {
    fn default() -> Self {
        Self::standard()
    }
}

/// Applies the standard DUCC circuit `U(params)` to `reference`.
pub fn apply_ansatz(params: &[f64], reference: &Statevector) -> Result<Statevector, VqeError> {
    DuccAnsatz::standard().apply(params, reference)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VqeConfig {
    pub max_iters: usize,
    pub grad_tol: f64,
    /// Recorded in the family metadata; the optimizer itself draws no random numbers.
    pub seed: u64,
    pub fd_step: f64,
    pub initial_step: f64,
}

impl Default for VqeConfig {
    fn default() -> Self {
        Self {
            max_iters: 200,
            grad_tol: 1e-7,
            seed: 0,
            fd_step: 1e-6,
            initial_step: 1.0,
        }
    }
}

/// One VQE run: the parameter trajectory and its energies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircuitFamily {
    pub schema_version: u32,
    pub molecule: String,
    pub distance: f64,
    pub basis: String,
    pub mapping: String,
    pub ansatz: String,
    pub n_qubits: usize,
    pub parameters: Vec<Vec<f64>>,
    pub energies: Vec<f64>,
    pub hf_energy: f64,
    pub exact_e0: f64,
    pub config: VqeConfig,
}

impl CircuitFamily {
    pub fn len(&self) -> usize {
        self.parameters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parameters.is_empty()
    }

    pub fn final_energy(&self) -> f64 {
        *self.energies.last().expect("nonempty family")
    }

    /// Checks the structural and physical invariants of a family.
    pub fn validate(&self) -> Result<(), FamilyFormatError> {
        let bad = |field: &str, msg: String| FamilyFormatError::Field {
            field: field.to_string(),
            message: msg,
        };
        if self.schema_version != SCHEMA_VERSION {
            return Err(bad(
                "schema_version",
                format!("unsupported version {}", self.schema_version),
            ));
        }
        if self.molecule != "H2" {
            return Err(bad(
                "molecule",
                format!("unsupported molecule {:?}", self.molecule),
            ));
        }
        if self.n_qubits != N_QUBITS {
            return Err(bad(
                "n_qubits",
                format!("expected {N_QUBITS}, got {}", self.n_qubits),
            ));
        }
        if self.parameters.is_empty() {
            return Err(bad("parameters", "empty trajectory".into()));
        }
        if let Some(p) = self.parameters.iter().find(|p| p.len() != N_PARAMS) {
            return Err(bad(
                "parameters",
                format!("entry of length {} (expected {N_PARAMS})", p.len()),
            ));
        }
        if self.energies.len() != self.parameters.len() {
            return Err(bad(
                "energies",
                format!(
                    "{} energies for {} parameter vectors",
                    self.energies.len(),
                    self.parameters.len()
                ),
            ));
        }
        if self.energies.windows(2).any(|w| w[1] > w[0]) {
            return Err(bad("energies", "sequence is not non-increasing".into()));
        }
        if self.energies.iter().any(|&e| e < self.exact_e0 - 1e-9) {
            return Err(bad(
                "energies",
                "energy below the exact ground energy".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum FamilyFormatError {
    #[error("family JSON parse error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid family field `{field}`: {message}")]
    Field { field: String, message: String },
}

fn energy_of(h: &QubitHamiltonian, ansatz: &DuccAnsatz, params: &[f64]) -> Result<f64, VqeError> {
    let psi = ansatz.apply(params, &h.hf_state())?;
    Ok(expectation(&psi, &h.pauli_sum)?)
}

fn fd_gradient(
    h: &QubitHamiltonian,
    ansatz: &DuccAnsatz,
    params: &[f64],
    step: f64,
) -> Result<Vec<f64>, VqeError> {
    (0..params.len())
        .map(|j| {
            let mut plus = params.to_vec();
            let mut minus = params.to_vec();
            plus[j] += step;
            minus[j] -= step;
            Ok((energy_of(h, ansatz, &plus)? - energy_of(h, ansatz, &minus)?) / (2.0 * step))
        })
        .collect()
}

/// Uniformly thins `items` to at most `cap` entries, keeping both ends.
fn downsample<T: Clone>(items: &[T], cap: usize) -> Vec<T> {
    if items.len() <= cap {
        return items.to_vec();
    }
    (0..cap)
        .map(|k| {
            let idx = (k as f64 * (items.len() - 1) as f64 / (cap - 1) as f64).round() as usize;
            items[idx].clone()
        })
        .collect()
}

/// Gradient descent from the HF point with backtracking (Armijo) line search.
/// Only energy-decreasing steps are accepted, so recorded energies never increase.
pub fn run_vqe(h: &QubitHamiltonian, config: &VqeConfig) -> Result<CircuitFamily, VqeError> {
    const ARMIJO: f64 = 0.5;
    const MAX_HALVINGS: usize = 60;

    let ansatz = DuccAnsatz::standard();
    let exact_e0 = exact_ground(h)?.energy;
    let mut params = vec![0.0; N_PARAMS];
    let mut energy = energy_of(h, &ansatz, &params)?;
    if !energy.is_finite() {
        return Err(VqeError::NonFiniteEnergy {
            iteration: 0,
            params,
        });
    }
    let mut trajectory = vec![(params.clone(), energy)];

    for iteration in 1..=config.max_iters {
        let grad = fd_gradient(h, &ansatz, &params, config.fd_step)?;
        let gnorm2: f64 = grad.iter().map(|g| g * g).sum();
        if gnorm2.sqrt() < config.grad_tol {
            break;
        }
        let mut step = config.initial_step;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let trial: Vec<f64> = params
                .iter()
                .zip(&grad)
                .map(|(p, g)| p - step * g)
                .collect();
            let e = energy_of(h, &ansatz, &trial)?;
            if !e.is_finite() {
                return Err(VqeError::NonFiniteEnergy {
                    iteration,
                    params: trial,
                });
            }
            if e < energy && e <= energy - ARMIJO * step * gnorm2 {
                accepted = Some((trial, e));
                break;
            }
            step *= 0.5;
        }
        match accepted {
            Some((p, e)) => {
                params = p;
                energy = e;
                trajectory.push((params.clone(), energy));
            }
            None => break,
        }
    }

    let trajectory = downsample(&trajectory, TRAJECTORY_CAP);
    Ok(CircuitFamily {
        schema_version: SCHEMA_VERSION,
        molecule: "H2".into(),
        distance: h.distance,
        basis: "STO-3G".into(),
        mapping: "jordan-wigner".into(),
        ansatz: "ducc-standard".into(),
        n_qubits: N_QUBITS,
        parameters: trajectory.iter().map(|(p, _)| p.clone()).collect(),
        energies: trajectory.iter().map(|(_, e)| *e).collect(),
        hf_energy: h.hf_energy,
        exact_e0,
        config: config.clone(),
    })
}

/// Writes floats with 17 significant digits so every value round-trips bitwise.
struct SeventeenDigits(serde_json::ser::PrettyFormatter<'static>);

impl serde_json::ser::Formatter for SeventeenDigits {
    fn write_f64<W: ?Sized + std::io::Write>(
        &mut self,
        writer: &mut W,
        value: f64,
    ) -> std::io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn begin_array<W: ?Sized + std::io::Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + std::io::Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + std::io::Write>(
        &mut self,
        w: &mut W,
        first: bool,
    ) -> std::io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + std::io::Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + std::io::Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + std::io::Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + std::io::Write>(
        &mut self,
        w: &mut W,
        first: bool,
    ) -> std::io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + std::io::Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + std::io::Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_object_value(w)
    }
}

/// Serializes any value with the family float format.
pub(crate) fn to_json_17<T: Serialize>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(
        &mut buf,
        SeventeenDigits(serde_json::ser::PrettyFormatter::new()),
    );
    value.serialize(&mut ser).expect("in-memory serialization");
    buf.push(b'\n');
    String::from_utf8(buf).expect("utf-8 JSON")
}

pub fn serialize_family(family: &CircuitFamily) -> String {
    to_json_17(family)
}

pub fn deserialize_family(doc: &str) -> Result<CircuitFamily, FamilyFormatError> {
    let family: CircuitFamily = serde_json::from_str(doc)?;
    family.validate()?;
    Ok(family)
}
