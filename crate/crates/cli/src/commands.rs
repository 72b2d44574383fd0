use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use num_complex::Complex64;
use qbrush_core::brushes::{
    apply_chemical, apply_steerable, BrushError, CanvasImage, ChemicalParams, Region,
    SteerableParams, Stroke,
};
use qbrush_core::control::{Controller, SteeringProblem, TrainedSteering};
use qbrush_core::family_store::{self, FamilyStore, GridSpec, Outcome, StoreError};
use qbrush_core::statevec::Statevector;
use qbrush_core::vqe::VqeConfig;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::plot::{self, Series};
use crate::{ChemArgs, CurveKind, CurvesArgs, PrecomputeArgs, SteerArgs};

#[derive(Debug)]
pub enum Failure {
    /// Bad flags or inputs; exit code 2.
    Usage(String),
    /// Exit code 1.
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Self::Runtime(e)
    }
}

impl From<BrushError> for Failure {
    fn from(e: BrushError) -> Self {
        match e {
            BrushError::Region { .. } | BrushError::Stroke(_) | BrushError::Param { .. } => {
                Self::Usage(e.to_string())
            }
            other => Self::Runtime(other.into()),
        }
    }
}

type CmdResult = Result<(), Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn read_image(path: &Path) -> Result<CanvasImage, Failure> {
    let bytes =
        fs::read(path).map_err(|e| usage(format!("cannot read image {}: {e}", path.display())))?;
    CanvasImage::from_png(&bytes).map_err(|e| usage(format!("{}: {e}", path.display())))
}

/// Parses `arg` as inline JSON when it starts with `{`, else as a file path.
fn read_json<T: DeserializeOwned>(arg: &str, what: &str) -> Result<T, Failure> {
    let (doc, origin) = if arg.trim_start().starts_with('{') {
        (arg.to_string(), "inline JSON".to_string())
    } else {
        let doc =
            fs::read_to_string(arg).map_err(|e| usage(format!("cannot read {what} {arg}: {e}")))?;
        (doc, arg.to_string())
    };
    serde_json::from_str(&doc).map_err(|e| usage(format!("invalid {what} in {origin}: {e}")))
}

fn write_file(path: &Path, bytes: &[u8]) -> CmdResult {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn sidecar_path(out: &Path) -> PathBuf {
    out.with_extension("json")
}

/// Training record written next to a `steer` output.
#[derive(Debug, Serialize, Deserialize)]
pub struct Sidecar {
    pub final_fidelity: f64,
    pub loss_history: Vec<f64>,
    pub t: f64,
    pub timestep: usize,
    pub controls: usize,
    pub seed: u64,
    pub max_iters: usize,
    pub controller: Controller,
    /// Amplitudes as `[re, im]`.
    pub source_state: Vec<[f64; 2]>,
    pub target_state: Vec<[f64; 2]>,
}

fn amplitudes(s: &Statevector) -> Vec<[f64; 2]> {
    s.amplitudes().iter().map(|a| [a.re, a.im]).collect()
}

fn state_from(pairs: &[[f64; 2]]) -> anyhow::Result<Statevector> {
    Ok(Statevector::from_amplitudes(
        pairs.iter().map(|p| Complex64::new(p[0], p[1])).collect(),
    )?)
}

impl Sidecar {
    fn trained(&self) -> anyhow::Result<TrainedSteering> {
        let problem = SteeringProblem::new(
            state_from(&self.source_state)?,
            state_from(&self.target_state)?,
            self.timestep,
        )?;
        Ok(TrainedSteering {
            problem,
            controller: self.controller.clone(),
            final_fidelity: self.final_fidelity,
            loss_history: self.loss_history.clone(),
        })
    }
}

pub fn steer(a: SteerArgs) -> CmdResult {
    let image = read_image(&a.image)?;
    let source: Region = read_json(&a.source, "source region")?;
    let target: Region = read_json(&a.target, "target region")?;
    let paste: Option<Region> = a
        .paste
        .as_deref()
        .map(|p| read_json(p, "paste region"))
        .transpose()?;
    let params = SteerableParams {
        timestep: a.timestep as usize,
        controls: a.controls as usize,
        source_equals_paste: paste.is_none(),
        show_source_target: a.show_source_target,
        seed: a.seed,
        max_iters: a.max_iters,
        ..SteerableParams::with_t(a.t)
    };
    let outcome = apply_steerable(&image, &source, &target, paste.as_ref(), &params)?;
    write_file(&a.out, &outcome.image.to_png())?;

    let trained = &outcome.model.trained;
    let sidecar = Sidecar {
        final_fidelity: trained.final_fidelity,
        loss_history: trained.loss_history.clone(),
        t: a.t,
        timestep: params.timestep,
        controls: params.controls,
        seed: a.seed,
        max_iters: a.max_iters,
        controller: trained.controller.clone(),
        source_state: amplitudes(&trained.problem.source),
        target_state: amplitudes(&trained.problem.target),
    };
    let doc = serde_json::to_string_pretty(&sidecar).context("encoding sidecar")?;
    write_file(&sidecar_path(&a.out), doc.as_bytes())?;
    println!("final fidelity {:.6}", trained.final_fidelity);
    Ok(())
}

fn open_store(dir: &Path) -> Result<FamilyStore, Failure> {
    let store = FamilyStore::open(dir).map_err(|e| Failure::Runtime(e.into()))?;
    if store.is_empty() {
        return Err(Failure::Runtime(
            StoreError::Empty(dir.display().to_string()).into(),
        ));
    }
    Ok(store)
}

pub fn chem(a: ChemArgs) -> CmdResult {
    let image = read_image(&a.image)?;
    let stroke: Stroke = read_json(&a.stroke, "stroke")?;
    let params = ChemicalParams {
        bond_distance: a.distance,
        repetitions: a.reps as usize,
        radius: a.radius,
    };
    stroke.validate()?;
    params.validate()?;
    let store = open_store(&a.data_dir)?;
    let family = store
        .load_nearest(a.distance)
        .map_err(|e| Failure::Runtime(e.into()))?;
    let outcome = apply_chemical(&image, &stroke, &params, &family)?;
    write_file(&a.out, &outcome.image.to_png())?;
    println!(
        "used distance {:.6} Å (requested {})",
        family.distance, a.distance
    );
    println!(
        "{} samples, {} groups, {} left unchanged",
        outcome.samples.len(),
        outcome.groups.len(),
        outcome.leftover_samples()
    );
    Ok(())
}

pub fn precompute(a: PrecomputeArgs) -> CmdResult {
    let grid = GridSpec {
        n: a.grid,
        min: a.min,
        max: a.max,
    };
    grid.validate().map_err(|e| usage(e.to_string()))?;
    let report = family_store::precompute(
        &a.data_dir,
        &grid,
        &VqeConfig::default(),
        a.parallel,
        &|_| {},
    )
    .map_err(|e| Failure::Runtime(e.into()))?;
    for o in &report.outcomes {
        match &o.outcome {
            Outcome::Computed { m, final_energy } => {
                println!(
                    "{:.6}  M={m:<3}  E={final_energy:.10}  computed",
                    o.distance
                )
            }
            Outcome::Skipped { m, final_energy } => {
                println!("{:.6}  M={m:<3}  E={final_energy:.10}  skipped", o.distance)
            }
            Outcome::Failed(msg) => println!("{:.6}  FAILED: {msg}", o.distance),
        }
    }
    let failed = report.failures().count();
    println!(
        "{} distances: {} computed, {} skipped, {failed} failed",
        report.outcomes.len(),
        report.computed(),
        report.outcomes.len() - report.computed() - failed
    );
    if failed > 0 {
        return Err(Failure::Runtime(anyhow!(
            "{failed} distance(s) failed; rerun to retry them"
        )));
    }
    Ok(())
}

fn write_csv(path: &Path, header: &[String], rows: &[Vec<f64>]) -> CmdResult {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).context("writing CSV")?;
    for r in rows {
        w.write_record(r.iter().map(|v| format!("{v:.12}")))
            .context("writing CSV")?;
    }
    let bytes = w.into_inner().map_err(|e| anyhow!("writing CSV: {e}"))?;
    write_file(path, &bytes)
}

fn read_sidecar(path: Option<&Path>) -> Result<Sidecar, Failure> {
    let path =
        path.ok_or_else(|| usage("this curve needs --sidecar (written by `qbrush steer`)"))?;
    let doc = fs::read_to_string(path)
        .map_err(|e| usage(format!("cannot read sidecar {}: {e}", path.display())))?;
    serde_json::from_str(&doc)
        .map_err(|e| usage(format!("invalid sidecar {}: {e}", path.display())))
}

pub fn curves(a: CurvesArgs) -> CmdResult {
    let (header, rows): (Vec<String>, Vec<Vec<f64>>) = match a.kind {
        CurveKind::Dissociation => {
            let dir = a
                .data_dir
                .as_deref()
                .ok_or_else(|| usage("dissociation curves need --data-dir"))?;
            let store = FamilyStore::open(dir).map_err(|e| usage(e.to_string()))?;
            if store.is_empty() {
                return Err(usage(
                    StoreError::Empty(dir.display().to_string()).to_string(),
                ));
            }
            let mut rows = Vec::with_capacity(store.len());
            for i in 0..store.len() {
                let f = store.load_at(i).map_err(|e| Failure::Runtime(e.into()))?;
                rows.push(vec![f.distance, f.hf_energy, f.final_energy(), f.exact_e0]);
            }
            let header = ["distance", "hf", "vqe", "exact"];
            (header.map(String::from).to_vec(), rows)
        }
        CurveKind::Fidelity => {
            let trained = read_sidecar(a.sidecar.as_deref())?.trained()?;
            let n = a.samples as usize;
            let ts: Vec<f64> = (0..n)
                .map(|k| a.t_max * k as f64 / (n - 1) as f64)
                .collect();
            let fs = trained.fidelity_curve(&ts).map_err(anyhow::Error::from)?;
            let rows = ts.iter().zip(fs).map(|(&t, f)| vec![t, f]).collect();
            (vec!["t".into(), "fidelity".into()], rows)
        }
        CurveKind::Controls => {
            let sidecar = read_sidecar(a.sidecar.as_deref())?;
            let n = sidecar.timestep;
            let rows = (0..n)
                .map(|k| {
                    let t = (k as f64 + 0.5) / n as f64;
                    let mut row = vec![k as f64, t];
                    row.extend(sidecar.controller.evaluate(t));
                    row
                })
                .collect();
            let mut header = vec!["step".to_string(), "t".to_string()];
            header.extend((1..=sidecar.controller.n_outputs()).map(|i| format!("u{i}")));
            (header, rows)
        }
    };
    write_csv(&a.out, &header, &rows)?;

    // x is column 0 except for controls, where it is t
    let x = usize::from(a.kind == CurveKind::Controls);
    let series: Vec<Series> = (x + 1..header.len())
        .map(|c| Series {
            points: rows.iter().map(|r| (r[x], r[c])).collect(),
        })
        .collect();
    let plot_path = a.plot.unwrap_or_else(|| a.out.with_extension("png"));
    write_file(&plot_path, &plot::render(&series))?;
    println!(
        "{} rows -> {} and {}",
        rows.len(),
        a.out.display(),
        plot_path.display()
    );
    Ok(())
}
