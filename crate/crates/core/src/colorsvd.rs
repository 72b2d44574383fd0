//! SVD color encoding of RGBA regions.
//!
//! A region with `m` pixels is the `m x 4` matrix `C = U S V`. The state holds
//! the log-singular values `s = log S` followed by `V s`, `V^2 s`, `V^3 s` as
//! far as the qubit count allows (4, 8 or 16 amplitudes).

use nalgebra::{DMatrix, Matrix4, Vector4};
use thiserror::Error;

use crate::statevec::{StateError, Statevector, C64};

pub const CHANNELS: usize = 4;
pub const MIN_PIXELS: usize = 4;
/// Singular values are clamped to this floor before taking the log.
pub const SINGULAR_FLOOR: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ColorError {
    #[error("region has {0} pixels; at least 4 are required")]
    RegionTooSmall(usize),
    #[error("region is entirely zero and has no color information")]
    Degenerate,
    #[error("color encoding supports 2, 3 or 4 qubits, got {0}")]
    QubitCount(usize),
    #[error("pixel {row} channel {channel} is {value}, outside [0, 255]")]
    OutOfRange {
        row: usize,
        channel: usize,
        value: f64,
    },
    #[error("evolved state has {found} qubits, encoding has {expected}")]
    StateMismatch { expected: usize, found: usize },
    #[error("target shape must have at least one pixel")]
    EmptyTarget,
    #[error(transparent)]
    State(#[from] StateError),
}

/// `m x 4` RGBA values in `[0, 255]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelMatrix {
    rows: Vec<[f64; CHANNELS]>,
}

impl PixelMatrix {
    pub fn new(rows: Vec<[f64; CHANNELS]>) -> Result<Self, ColorError> {
        for (row, px) in rows.iter().enumerate() {
            for (channel, &value) in px.iter().enumerate() {
                if !(0.0..=255.0).contains(&value) {
                    return Err(ColorError::OutOfRange {
                        row,
                        channel,
                        value,
                    });
                }
            }
        }
        Ok(Self { rows })
    }

    pub fn from_bytes(pixels: &[[u8; CHANNELS]]) -> Self {
        Self {
            rows: pixels.iter().map(|p| p.map(f64::from)).collect(),
        }
    }

    /// Rounds to the nearest 8-bit value.
    pub fn to_bytes(&self) -> Vec<[u8; CHANNELS]> {
        self.rows
            .iter()
            .map(|p| p.map(|v| v.round().clamp(0.0, 255.0) as u8))
            .collect()
    }

    pub fn rows(&self) -> &[[f64; CHANNELS]] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows.len(), CHANNELS, |i, j| self.rows[i][j])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvdEncoding {
    pub n_qubits: usize,
    pub state: Statevector,
    /// `m x 4`, orthonormal columns.
    pub u: DMatrix<f64>,
    /// Right factor in `C = U S V` (rows are right singular vectors).
    pub v: Matrix4<f64>,
    /// Log of the clamped singular values, descending.
    pub log_singular: Vector4<f64>,
    pub norm_factor: f64,
}

impl SvdEncoding {
    pub fn n_pixels(&self) -> usize {
        self.u.nrows()
    }

    /// Unnormalized amplitudes `[s; V s; V^2 s; ...]`.
    pub fn blocks(&self) -> Vec<f64> {
        stacked_blocks(&self.v, &self.log_singular, self.n_qubits)
    }
}

fn stacked_blocks(v: &Matrix4<f64>, s: &Vector4<f64>, n_qubits: usize) -> Vec<f64> {
    let n_blocks = 1 << (n_qubits - 2);
    let mut out = Vec::with_capacity(4 * n_blocks);
    let mut b = *s;
    for _ in 0..n_blocks {
        out.extend(b.iter());
        b = v * b;
    }
    out
}

fn check_qubits(n_qubits: usize) -> Result<(), ColorError> {
    if (2..=4).contains(&n_qubits) {
        Ok(())
    } else {
        Err(ColorError::QubitCount(n_qubits))
    }
}

pub fn encode(pixels: &PixelMatrix, n_qubits: usize) -> Result<SvdEncoding, ColorError> {
    check_qubits(n_qubits)?;
    if pixels.len() < MIN_PIXELS {
        return Err(ColorError::RegionTooSmall(pixels.len()));
    }
    if pixels.rows.iter().all(|p| p.iter().all(|&v| v == 0.0)) {
        return Err(ColorError::Degenerate);
    }
    let svd = pixels.to_matrix().svd(true, true);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested V^T");
    let log_singular = Vector4::from_iterator(
        svd.singular_values
            .iter()
            .map(|s| s.max(SINGULAR_FLOOR).ln()),
    );
    let v = Matrix4::from_fn(|i, j| v_t[(i, j)]);

    let blocks = stacked_blocks(&v, &log_singular, n_qubits);
    let norm_factor = blocks.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(norm_factor > 0.0) {
        // every log-singular value is exactly 0, i.e. S = I
        return Err(ColorError::Degenerate);
    }
    let state =
        Statevector::from_real(&blocks.iter().map(|x| x / norm_factor).collect::<Vec<_>>())?;
    Ok(SvdEncoding {
        n_qubits,
        state,
        u,
        v,
        log_singular,
        norm_factor,
    })
}

/// Removes the global phase so the amplitudes are as close to real as possible,
/// then fixes the sign by making the leading log-singular value non-negative.
fn real_parts(amps: &[C64]) -> Vec<f64> {
    let square_sum: C64 = amps.iter().map(|a| a * a).sum();
    let phase = C64::from_polar(1.0, -0.5 * square_sum.arg());
    let mut out: Vec<f64> = amps.iter().map(|a| (a * phase).re).collect();
    if out[0] < 0.0 {
        out.iter_mut().for_each(|x| *x = -*x);
    }
    out
}

/// Nearest unitary (orthogonal) factor of `m`.
pub fn polar_unitary(m: &Matrix4<f64>) -> Matrix4<f64> {
    let svd = m.svd(true, true);
    svd.u.expect("requested U") * svd.v_t.expect("requested V^T")
}

/// Decodes `evolved` into `target_rows` pixels using the encoding's `U`, `V` and scale.
pub fn decode(
    encoding: &SvdEncoding,
    evolved: &Statevector,
    target_rows: usize,
) -> Result<PixelMatrix, ColorError> {
    if evolved.n_qubits() != encoding.n_qubits {
        return Err(ColorError::StateMismatch {
            expected: encoding.n_qubits,
            found: evolved.n_qubits(),
        });
    }
    if target_rows == 0 {
        return Err(ColorError::EmptyTarget);
    }
    let values: Vec<f64> = real_parts(evolved.amplitudes())
        .into_iter()
        .map(|x| x * encoding.norm_factor)
        .collect();
    let s_hat = Vector4::from_column_slice(&values[..4]);
    let singular = s_hat.map(f64::exp);

    let v = if encoding.n_qubits == 2 {
        encoding.v
    } else {
        // Smallest change to V that maps s' onto the evolved second block.
        let b1 = Vector4::from_column_slice(&values[4..8]);
        let ss = s_hat.norm_squared();
        if ss > 1e-12 {
            polar_unitary(&(encoding.v + (b1 - encoding.v * s_hat) * s_hat.transpose() / ss))
        } else {
            encoding.v
        }
    };

    let m = encoding.u.nrows();
    let sv = Matrix4::from_diagonal(&singular) * v;
    let rows = (0..target_rows)
        .map(|i| {
            let src = if target_rows == m {
                i
            } else {
                i * m / target_rows
            };
            let row = encoding.u.row(src);
            std::array::from_fn(|c| {
                let x: f64 = (0..4).map(|k| row[k] * sv[(k, c)]).sum();
                if x.is_nan() {
                    0.0
                } else {
                    x.clamp(0.0, 255.0)
                }
            })
        })
        .collect();
    Ok(PixelMatrix { rows })
}
