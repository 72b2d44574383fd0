use std::collections::{HashMap, VecDeque};
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use qbrush_core::brushes::{CanvasImage, Region, SteerableModel, SteerableParams};
use qbrush_core::family_store::{FamilyStore, StoreError};
use serde::Serialize;
use serde_json::Value;
use tokio::sync::Semaphore;

pub const UNDO_DEPTH: usize = 16;
pub const TRAINED_PER_SESSION: usize = 4;

#[derive(Debug, Clone)]
pub struct Config {
    pub data_dir: PathBuf,
    pub port: u16,
    pub max_dim: u32,
    pub workers: usize,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            data_dir: PathBuf::from("data"),
            port: 8080,
            max_dim: 4096,
            workers: std::thread::available_parallelism().map_or(1, |n| n.get()),
        }
    }
}

impl Config {
    /// Defaults overridden by `QBRUSH_DATA_DIR`, `QBRUSH_PORT`, `QBRUSH_MAX_DIM`
    /// and `QBRUSH_WORKERS`.
    pub fn from_env() -> Result<Self, String> {
        fn parsed<T: std::str::FromStr>(name: &str) -> Result<Option<T>, String> {
            match std::env::var(name) {
                Ok(v) => v
                    .parse()
                    .map(Some)
                    .map_err(|_| format!("{name}: cannot parse `{v}`")),
                Err(_) => Ok(None),
            }
        }
        let mut c = Self::default();
        if let Ok(dir) = std::env::var("QBRUSH_DATA_DIR") {
            c.data_dir = dir.into();
        }
        if let Some(p) = parsed("QBRUSH_PORT")? {
            c.port = p;
        }
        if let Some(d) = parsed("QBRUSH_MAX_DIM")? {
            c.max_dim = d;
        }
        if let Some(w) = parsed::<usize>("QBRUSH_WORKERS")? {
            c.workers = w.max(1);
        }
        Ok(c)
    }
}

/// Canvas plus undo history; only touched under the session lock.
#[derive(Debug)]
pub struct Canvas {
    pub image: CanvasImage,
    pub undo: VecDeque<CanvasImage>,
    /// Train id of the evaluate call that produced `image`, if any.
    pub last_evaluate: Option<String>,
}

impl Canvas {
    pub fn commit(&mut self, image: CanvasImage) {
        let prior = std::mem::replace(&mut self.image, image);
        if self.undo.len() == UNDO_DEPTH {
            self.undo.pop_front();
        }
        self.undo.push_back(prior);
        self.last_evaluate = None;
    }
}

#[derive(Debug)]
pub struct TrainedEntry {
    pub model: SteerableModel,
    pub paste: Option<Region>,
    pub params: SteerableParams,
    /// Canvas the effect was first applied to; evaluations render against it.
    pub base: CanvasImage,
}

#[derive(Debug)]
pub struct Session {
    pub canvas: tokio::sync::Mutex<Canvas>,
    trained: Mutex<VecDeque<(String, Arc<TrainedEntry>)>>,
}

impl Session {
    pub fn new(image: CanvasImage) -> Self {
        Self {
            canvas: tokio::sync::Mutex::new(Canvas {
                image,
                undo: VecDeque::new(),
                last_evaluate: None,
            }),
            trained: Mutex::new(VecDeque::new()),
        }
    }

    pub fn remember(&self, id: String, entry: TrainedEntry) {
        let mut lru = self.trained.lock().expect("lru lock");
        lru.retain(|(k, _)| *k != id);
        if lru.len() == TRAINED_PER_SESSION {
            lru.pop_front();
        }
        lru.push_back((id, Arc::new(entry)));
    }

    pub fn trained(&self, id: &str) -> Option<Arc<TrainedEntry>> {
        let mut lru = self.trained.lock().expect("lru lock");
        let pos = lru.iter().position(|(k, _)| k == id)?;
        let item = lru.remove(pos)?;
        let entry = item.1.clone();
        lru.push_back(item);
        Some(entry)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum JobKind {
    SteerableTrain,
    ChemicalApply,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum JobStatus {
    Queued,
    Running,
    Done,
    Failed,
}

impl JobStatus {
    pub fn is_terminal(self) -> bool {
        matches!(self, Self::Done | Self::Failed)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Job {
    pub job_id: String,
    pub session_id: String,
    pub kind: JobKind,
    pub status: JobStatus,
    pub progress: f64,
    pub result: Option<Value>,
    pub error: Option<Value>,
}

#[derive(Debug, Default)]
pub struct Jobs {
    map: Mutex<HashMap<String, Job>>,
}

impl Jobs {
    pub fn insert(&self, job: Job) {
        self.map
            .lock()
            .expect("jobs lock")
            .insert(job.job_id.clone(), job);
    }

    pub fn get(&self, id: &str) -> Option<Job> {
        self.map.lock().expect("jobs lock").get(id).cloned()
    }

    fn update(&self, id: &str, f: impl FnOnce(&mut Job)) {
        if let Some(job) = self.map.lock().expect("jobs lock").get_mut(id) {
            if !job.status.is_terminal() {
                f(job);
            }
        }
    }

    pub fn start(&self, id: &str) {
        self.update(id, |j| j.status = JobStatus::Running);
    }

    /// Progress only moves forward.
    pub fn progress(&self, id: &str, fraction: f64) {
        self.update(id, |j| {
            j.progress = j.progress.max(fraction.clamp(0.0, 1.0))
        });
    }

    pub fn finish(&self, id: &str, outcome: Result<Value, Value>) {
        self.update(id, |j| match outcome {
            Ok(v) => {
                j.status = JobStatus::Done;
                j.progress = 1.0;
                j.result = Some(v);
            }
            Err(e) => {
                j.status = JobStatus::Failed;
                j.error = Some(e);
            }
        });
    }
}

#[derive(Debug)]
pub struct Inner {
    pub config: Config,
    pub sessions: Mutex<HashMap<String, Arc<Session>>>,
    pub jobs: Jobs,
    pub workers: Arc<Semaphore>,
    store: Mutex<Arc<FamilyStore>>,
}

/// Shared service state; cheap to clone.
#[derive(Debug, Clone)]
pub struct AppState(pub Arc<Inner>);

impl AppState {
    pub fn new(config: Config) -> Result<Self, StoreError> {
        let store = FamilyStore::open(&config.data_dir)?;
        Ok(Self(Arc::new(Inner {
            workers: Arc::new(Semaphore::new(config.workers.max(1))),
            config,
            sessions: Mutex::new(HashMap::new()),
            jobs: Jobs::default(),
            store: Mutex::new(Arc::new(store)),
        })))
    }

    pub fn session(&self, id: &str) -> Option<Arc<Session>> {
        self.0
            .sessions
            .lock()
            .expect("sessions lock")
            .get(id)
            .cloned()
    }

    pub fn add_session(&self, image: CanvasImage) -> String {
        let id = uuid::Uuid::new_v4().simple().to_string();
        self.0
            .sessions
            .lock()
            .expect("sessions lock")
            .insert(id.clone(), Arc::new(Session::new(image)));
        id
    }

    /// The family store, re-read from disk while it is still empty so a
    /// precompute run after startup is picked up.
    pub fn store(&self) -> Result<Arc<FamilyStore>, StoreError> {
        let mut guard = self.0.store.lock().expect("store lock");
        if guard.is_empty() {
            *guard = Arc::new(FamilyStore::open(&self.0.config.data_dir)?);
        }
        Ok(guard.clone())
    }
}
