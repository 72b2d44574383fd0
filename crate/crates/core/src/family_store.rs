//! Directory of precomputed circuit families on a uniform bond-distance grid.
//!
//! Layout: one `H2_STO-3G_<distance:.6>.json` per grid point plus `index.json`
//! listing the distances and file names in ascending order.

use std::collections::HashMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::h2chem::{jordan_wigner, MoleculeSpec, MAX_DISTANCE, MIN_DISTANCE};
use crate::vqe::{
    deserialize_family, run_vqe, serialize_family, to_json_17, CircuitFamily, FamilyFormatError,
    VqeConfig, VqeError,
};

pub const DEFAULT_GRID_SIZE: usize = 1000;
pub const INDEX_FILE: &str = "index.json";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("family store at {0} is empty; run `qbrush precompute --data-dir {0}` first")]
    Empty(String),
    #[error("bond distance {0} Å outside supported range [0.725, 2.5]")]
    DistanceOutOfRange(f64),
    #[error("grid needs at least 2 points and min < max (got {n} points over [{min}, {max}])")]
    BadGrid { n: usize, min: f64, max: f64 },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("{path}: {source}")]
    Format {
        path: String,
        #[source]
        source: FamilyFormatError,
    },
    #[error("invalid index {path}: {message}")]
    Index { path: String, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.display().to_string(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n: usize,
    pub min: f64,
    pub max: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            n: DEFAULT_GRID_SIZE,
            min: MIN_DISTANCE,
            max: MAX_DISTANCE,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<(), StoreError> {
        let bad = StoreError::BadGrid {
            n: self.n,
            min: self.min,
            max: self.max,
        };
        if self.n < 2 || !(self.min < self.max) {
            return Err(bad);
        }
        MoleculeSpec::h2(self.min).map_err(|_| StoreError::DistanceOutOfRange(self.min))?;
        MoleculeSpec::h2(self.max).map_err(|_| StoreError::DistanceOutOfRange(self.max))?;
        Ok(())
    }

    pub fn spacing(&self) -> f64 {
        (self.max - self.min) / (self.n - 1) as f64
    }

    /// `d_k = min + k (max - min) / (n - 1)`, with the last point exactly `max`.
    pub fn distances(&self) -> Vec<f64> {
        (0..self.n)
            .map(|k| {
                if k + 1 == self.n {
                    self.max
                } else {
                    self.min + k as f64 * (self.max - self.min) / (self.n - 1) as f64
                }
            })
            .collect()
    }
}

pub fn family_file_name(distance: f64) -> String {
    format!("H2_STO-3G_{distance:.6}.json")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StoreIndex {
    pub molecule: String,
    pub basis: String,
    pub distances: Vec<f64>,
    pub files: Vec<String>,
}

/// Runs the VQE for one bond distance.
pub fn compute_family(distance: f64, config: &VqeConfig) -> Result<CircuitFamily, VqeError> {
    let h = jordan_wigner(&MoleculeSpec::h2(distance)?)?;
    run_vqe(&h, config)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Computed { m: usize, final_energy: f64 },
    Skipped { m: usize, final_energy: f64 },
    Failed(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistanceOutcome {
    pub distance: f64,
    pub file: String,
    pub outcome: Outcome,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PrecomputeReport {
    pub outcomes: Vec<DistanceOutcome>,
}

impl PrecomputeReport {
    pub fn failures(&self) -> impl Iterator<Item = &DistanceOutcome> {
        self.outcomes
            .iter()
            .filter(|o| matches!(o.outcome, Outcome::Failed(_)))
    }

    pub fn computed(&self) -> usize {
        self.outcomes
            .iter()
            .filter(|o| matches!(o.outcome, Outcome::Computed { .. }))
            .count()
    }
}

fn read_family(path: &Path) -> Result<CircuitFamily, StoreError> {
    let doc = fs::read_to_string(path).map_err(io_err(path))?;
    deserialize_family(&doc).map_err(|source| StoreError::Format {
        path: path.display().to_string(),
        source,
    })
}

/// Writes through a temporary file so an interrupted run never leaves a truncated family.
fn write_atomic(path: &Path, contents: &str) -> Result<(), StoreError> {
    let tmp = path.with_extension("json.tmp");
    fs::write(&tmp, contents).map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(io_err(path))
}

fn precompute_one(dir: &Path, distance: f64, config: &VqeConfig) -> DistanceOutcome {
    let file = family_file_name(distance);
    let path = dir.join(&file);
    if let Ok(f) = read_family(&path) {
        if f.distance == distance {
            return DistanceOutcome {
                distance,
                file,
                outcome: Outcome::Skipped {
                    m: f.len(),
                    final_energy: f.final_energy(),
                },
            };
        }
    }
    let outcome = match compute_family(distance, config) {
        Ok(f) => match write_atomic(&path, &serialize_family(&f)) {
            Ok(()) => Outcome::Computed {
                m: f.len(),
                final_energy: f.final_energy(),
            },
            Err(e) => Outcome::Failed(e.to_string()),
        },
        Err(e) => Outcome::Failed(e.to_string()),
    };
    DistanceOutcome {
        distance,
        file,
        outcome,
    }
}

/// Fills `dir` with one family per grid distance and rewrites the index.
///
/// Existing valid files are kept, so an interrupted run can be resumed.
/// `on_done` is called once per distance, possibly from worker threads.
pub fn precompute(
    dir: &Path,
    grid: &GridSpec,
    config: &VqeConfig,
    parallel: bool,
    on_done: &(dyn Fn(&DistanceOutcome) + Sync),
) -> Result<PrecomputeReport, StoreError> {
    grid.validate()?;
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let distances = grid.distances();
    let run = |d: &f64| {
        let o = precompute_one(dir, *d, config);
        on_done(&o);
        o
    };
    let outcomes: Vec<DistanceOutcome> = if parallel {
        distances.par_iter().map(run).collect()
    } else {
        distances.iter().map(run).collect()
    };

    let present: Vec<&DistanceOutcome> = outcomes
        .iter()
        .filter(|o| !matches!(o.outcome, Outcome::Failed(_)))
        .collect();
    let index = StoreIndex {
        molecule: "H2".into(),
        basis: "STO-3G".into(),
        distances: present.iter().map(|o| o.distance).collect(),
        files: present.iter().map(|o| o.file.clone()).collect(),
    };
    write_atomic(&dir.join(INDEX_FILE), &to_json_17(&index))?;
    Ok(PrecomputeReport { outcomes })
}

/// Lazily loading view of a family directory.
#[derive(Debug)]
pub struct FamilyStore {
    dir: PathBuf,
    index: StoreIndex,
    cache: Mutex<HashMap<usize, Arc<CircuitFamily>>>,
}

impl FamilyStore {
    /// Opens `dir`; a missing index yields an empty store.
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let dir = dir.into();
        let path = dir.join(INDEX_FILE);
        let index = match fs::read_to_string(&path) {
            Ok(doc) => {
                let index: StoreIndex =
                    serde_json::from_str(&doc).map_err(|e| StoreError::Index {
                        path: path.display().to_string(),
                        message: e.to_string(),
                    })?;
                check_index(&index).map_err(|message| StoreError::Index {
                    path: path.display().to_string(),
                    message,
                })?;
                index
            }
            Err(e) if e.kind() == io::ErrorKind::NotFound => StoreIndex {
                molecule: "H2".into(),
                basis: "STO-3G".into(),
                distances: Vec::new(),
                files: Vec::new(),
            },
            Err(e) => return Err(io_err(&path)(e)),
        };
        Ok(Self {
            dir,
            index,
            cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn is_empty(&self) -> bool {
        self.index.distances.is_empty()
    }

    pub fn len(&self) -> usize {
        self.index.distances.len()
    }

    pub fn distances(&self) -> &[f64] {
        &self.index.distances
    }

    fn empty_error(&self) -> StoreError {
        StoreError::Empty(self.dir.display().to_string())
    }

    /// Index of the grid distance closest to `distance`.
    pub fn nearest_index(&self, distance: f64) -> Result<usize, StoreError> {
        MoleculeSpec::h2(distance).map_err(|_| StoreError::DistanceOutOfRange(distance))?;
        nearest(&self.index.distances, distance).ok_or_else(|| self.empty_error())
    }

    pub fn nearest_distance(&self, distance: f64) -> Result<f64, StoreError> {
        Ok(self.index.distances[self.nearest_index(distance)?])
    }

    /// Family at the grid point closest to `distance`.
    pub fn load_nearest(&self, distance: f64) -> Result<Arc<CircuitFamily>, StoreError> {
        let i = self.nearest_index(distance)?;
        self.load_at(i)
    }

    pub fn load_at(&self, i: usize) -> Result<Arc<CircuitFamily>, StoreError> {
        if let Some(f) = self.cache.lock().expect("cache lock").get(&i) {
            return Ok(f.clone());
        }
        let family = Arc::new(read_family(&self.dir.join(&self.index.files[i]))?);
        self.cache
            .lock()
            .expect("cache lock")
            .insert(i, family.clone());
        Ok(family)
    }
}

fn check_index(index: &StoreIndex) -> Result<(), String> {
    if index.distances.len() != index.files.len() {
        return Err("distances and files differ in length".into());
    }
    if index.distances.windows(2).any(|w| w[1] <= w[0]) {
        return Err("distances are not strictly increasing".into());
    }
    if index
        .files
        .iter()
        .any(|f| f.contains('/') || f.contains('\\'))
    {
        return Err("file entries must be plain names".into());
    }
    Ok(())
}

/// Position of the closest entry of an ascending slice.
pub fn nearest(sorted: &[f64], x: f64) -> Option<usize> {
    if sorted.is_empty() {
        return None;
    }
    let hi = sorted.partition_point(|&d| d < x);
    if hi == 0 {
        return Some(0);
    }
    if hi == sorted.len() {
        return Some(sorted.len() - 1);
    }
    Some(if x - sorted[hi - 1] <= sorted[hi] - x {
        hi - 1
    } else {
        hi
    })
}
