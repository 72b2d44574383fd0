//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use axum::body::{Body, Bytes};
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use qbrush_core::brushes::{
    aggregate_stroke, apply_chemical, CanvasImage, ChemicalParams, Region, Stroke,
};
use qbrush_core::colorsvd::{decode, encode, PixelMatrix, SINGULAR_FLOOR};
use qbrush_core::control::{
    evolve, gradient, loss, train, Architecture, ControlSystem, Controller, SteeringProblem,
    TrainConfig,
};
use qbrush_core::family_store::{FamilyStore, INDEX_FILE};
use qbrush_core::h2chem::{exact_ground, jordan_wigner, MoleculeSpec};
use qbrush_core::statevec::Statevector;
use qbrush_service::{router, AppState, Config};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use tower::ServiceExt;

type Verdict = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

struct Fixture {
    dir: tempfile::TempDir,
    store: PathBuf,
}

impl Fixture {
    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn s(&self, name: &str) -> String {
        self.path(name).display().to_string()
    }

    fn steer(&self, t: &str, seed: &str, out: &str) -> Output {
        qbrush(&[
            "steer",
            "--image",
            &self.s("in.png"),
            "--source",
            &self.s("src.json"),
            "--target",
            &self.s("tgt.json"),
            "--paste",
            &self.s("paste.json"),
            "--t",
            t,
            "--seed",
            seed,
            "--out",
            &self.s(out),
        ])
    }

    fn chem(&self, distance: &str, out: &str) -> Output {
        qbrush(&[
            "chem",
            "--image",
            &self.s("in.png"),
            "--stroke",
            &self.s("stroke.json"),
            "--distance",
            distance,
            "--reps",
            "3",
            "--data-dir",
            &self.store.display().to_string(),
            "--out",
            &self.s(out),
        ])
    }
}

fn qbrush(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qbrush"))
        .args(args)
        .output()
        .expect("spawning qbrush")
}

fn ok(o: &Output) -> Result<(), String> {
    if o.status.success() {
        Ok(())
    } else {
        Err(format!(
            "qbrush exited {:?}: {}",
            o.status.code(),
            String::from_utf8_lossy(&o.stderr)
        ))
    }
}

fn fixture_image(w: u32, h: u32) -> CanvasImage {
    let mut rgba = Vec::new();
    for y in 0..h {
        for x in 0..w {
            rgba.extend([
                (x * 7 + 20) as u8,
                (y * 5 + 40) as u8,
                ((x * y) % 200 + 30) as u8,
                255,
            ]);
        }
    }
    CanvasImage::new(w, h, rgba).unwrap()
}

fn read_png(path: &Path) -> CanvasImage {
    CanvasImage::from_png(&std::fs::read(path).unwrap()).unwrap()
}

fn setup() -> Result<(Fixture, Duration), String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let fx = Fixture {
        store: dir.path().join("families"),
        dir,
    };
    std::fs::write(fx.path("in.png"), fixture_image(32, 32).to_png()).unwrap();
    for (name, x, y) in [("src", 8, 8), ("tgt", 24, 24), ("paste", 8, 24)] {
        let region = format!(r#"{{"kind": "circle", "center": [{x}, {y}], "radius": 5}}"#);
        std::fs::write(fx.path(&format!("{name}.json")), region).unwrap();
    }
    std::fs::write(
        fx.path("stroke.json"),
        r#"{"polyline": [[2, 8], [30, 8], [30, 26]], "radius": 2}"#,
    )
    .unwrap();
    let start = Instant::now();
    ok(&qbrush(&[
        "precompute",
        "--grid",
        "1000",
        "--min",
        "0.725",
        "--max",
        "2.5",
        "--data-dir",
        &fx.store.display().to_string(),
        "--parallel",
    ]))?;
    Ok((fx, start.elapsed()))
}

// ---- numerics ----

fn scaled_controller(n_outputs: usize, seed: u64, scale: f64) -> Controller {
    let base = Controller::init_random(Architecture::default_for(n_outputs), seed);
    let params = base.params().iter().map(|p| p * scale).collect();
    Controller::from_params(base.architecture.clone(), params).unwrap()
}

fn splitting_order() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let s = Statevector::random(2, &mut rng).unwrap();
    let sys = ControlSystem::heisenberg(2).unwrap();
    let c = scaled_controller(2, 3, 10.0);
    let reference = evolve(&sys, 4096, &c, &s, 0.0, 1.0).unwrap();
    let pts: Vec<(f64, f64)> = [16usize, 32, 64, 128]
        .iter()
        .map(|&n| {
            let e = evolve(&sys, n, &c, &s, 0.0, 1.0)
                .unwrap()
                .max_abs_diff(&reference);
            ((n as f64).ln(), e.ln())
        })
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let slope = -sxy / sxx;
    ensure!((slope - 2.0).abs() <= 0.2, "log-log slope {slope:.3}");
    Ok(format!("slope {slope:.3}"))
}

fn gradient_check() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut worst: f64 = 0.0;
    for i in 0..20u64 {
        let n = 2 + (i as usize % 2);
        let problem = SteeringProblem::new(
            Statevector::random(n, &mut rng).unwrap(),
            Statevector::random(n, &mut rng).unwrap(),
            rng.random_range(5..30),
        )
        .unwrap()
        .with_energy_weight(rng.random_range(0.0..0.5));
        let c = scaled_controller(n, 100 + i, rng.random_range(1.0..6.0));
        let adjoint = gradient(&problem, &c).unwrap();
        let h = 1e-5;
        let p0 = c.params().to_vec();
        let at = |p: Vec<f64>| {
            loss(
                &problem,
                &Controller::from_params(c.architecture.clone(), p).unwrap(),
            )
            .unwrap()
        };
        let fd: Vec<f64> = (0..p0.len())
            .map(|j| {
                let (mut plus, mut minus) = (p0.clone(), p0.clone());
                plus[j] += h;
                minus[j] -= h;
                (at(plus) - at(minus)) / (2.0 * h)
            })
            .collect();
        let diff = adjoint
            .iter()
            .zip(&fd)
            .map(|(a, f)| (a - f).powi(2))
            .sum::<f64>()
            .sqrt();
        let norm = fd.iter().map(|f| f * f).sum::<f64>().sqrt();
        let rel = diff / norm;
        worst = worst.max(rel);
        ensure!(
            rel < 1e-5,
            "instance {i} ({n} qubits): relative error {rel:.2e}"
        );
    }
    Ok(format!("20 instances, worst relative error {worst:.2e}"))
}

fn steering_quality() -> Verdict {
    let mut fids = Vec::new();
    for seed in 0..5u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let src = Statevector::random(2, &mut rng).unwrap();
        let tgt = Statevector::random(2, &mut rng).unwrap();
        let problem = SteeringProblem::new(src, tgt, SteeringProblem::DEFAULT_TIMESTEPS).unwrap();
        let config = TrainConfig {
            seed,
            ..TrainConfig::default()
        };
        ensure!(
            config.max_iters == 500,
            "default iterations {}",
            config.max_iters
        );
        fids.push(train(&problem, &config).unwrap().final_fidelity);
    }
    let mut sorted = fids.clone();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[2];
    let list: Vec<String> = fids.iter().map(|f| format!("{f:.4}")).collect();
    ensure!(
        median >= 0.90,
        "median fidelity {median:.4} from [{}]",
        list.join(", ")
    );
    Ok(format!("median {median:.4} from [{}]", list.join(", ")))
}

fn sub_grid(store: &FamilyStore, n: usize) -> Vec<usize> {
    let last = store.len() - 1;
    (0..n).map(|k| k * last / (n - 1)).collect()
}

fn h2_fci(fx: &Fixture) -> Verdict {
    let h = jordan_wigner(&MoleculeSpec::h2(0.7414).unwrap()).unwrap();
    let e0 = exact_ground(&h).unwrap().energy;
    ensure!((e0 - -1.137).abs() < 5e-4, "E0(0.7414) = {e0:.10}");
    let store = FamilyStore::open(&fx.store).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for i in sub_grid(&store, 5) {
        let f = store.load_at(i).unwrap();
        let exact = exact_ground(&jordan_wigner(&MoleculeSpec::h2(f.distance).unwrap()).unwrap())
            .unwrap()
            .energy;
        let err = (f.final_energy() - exact).abs();
        worst = worst.max(err);
        ensure!(err < 1e-6, "VQE off by {err:.2e} at {} Å", f.distance);
    }
    let (mut dmin, mut emin) = (0.0, f64::INFINITY);
    for i in sub_grid(&store, 50) {
        let f = store.load_at(i).unwrap();
        if f.final_energy() < emin {
            (dmin, emin) = (f.distance, f.final_energy());
        }
    }
    ensure!(dmin > 0.70 && dmin < 0.80, "50-point minimum at {dmin} Å");
    Ok(format!(
        "E0(0.7414) = {e0:.10}, VQE worst error {worst:.1e} over 5 distances, 50-point minimum at {dmin:.4} Å"
    ))
}

fn vqe_invariants(fx: &Fixture) -> Verdict {
    let store = FamilyStore::open(&fx.store).map_err(|e| e.to_string())?;
    let mut lengths = Vec::new();
    for i in sub_grid(&store, 20) {
        let f = store.load_at(i).unwrap();
        let d = f.distance;
        ensure!(
            (f.energies[0] - f.hf_energy).abs() <= 1e-10,
            "energies[0] != hf at {d}"
        );
        ensure!(
            f.energies.windows(2).all(|w| w[1] <= w[0]),
            "energy increases at {d}"
        );
        ensure!(
            f.energies.iter().all(|&e| e >= f.exact_e0 - 1e-9),
            "below exact at {d}"
        );
        lengths.push(f.len());
    }
    Ok(format!(
        "20 families, trajectory lengths {}..={}",
        lengths.iter().min().unwrap(),
        lengths.iter().max().unwrap()
    ))
}

fn color_roundtrip(fx: &Fixture) -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0;
    for _ in 0..50 {
        let m = rng.random_range(4..80);
        let rows: Vec<[u8; 4]> = (0..m).map(|_| rng.random()).collect();
        let patch = PixelMatrix::from_bytes(&rows);
        for n in 2..=4 {
            let e = encode(&patch, n).unwrap();
            ensure!(
                e.log_singular.iter().all(|&l| l > SINGULAR_FLOOR.ln()),
                "patch is rank deficient"
            );
            let out = decode(&e, &e.state, m).unwrap().to_bytes();
            for (a, b) in rows.iter().zip(&out) {
                for c in 0..4 {
                    worst = worst.max((a[c] as i32 - b[c] as i32).abs());
                }
            }
            let evolved = Statevector::random(n, &mut rng).unwrap();
            let wild = decode(&e, &evolved, m).unwrap();
            ensure!(
                wild.rows()
                    .iter()
                    .flatten()
                    .all(|v| (0.0..=255.0).contains(v)),
                "decoded channel outside [0, 255]"
            );
        }
    }
    ensure!(worst <= 1, "roundtrip deviation {worst}");

    // geometry locality of both effects
    ok(&fx.steer("1.5", "3", "far.png"))?;
    let (before, after) = (read_png(&fx.path("in.png")), read_png(&fx.path("far.png")));
    let paste = Region::Circle {
        center: [8.0, 24.0],
        radius: 5.0,
    }
    .pixels(32, 32);
    let mut outside = 0;
    for y in 0..32 {
        for x in 0..32 {
            if !paste.contains(&(x, y)) {
                ensure!(
                    before.pixel((x, y)) == after.pixel((x, y)),
                    "steer touched ({x},{y})"
                );
                outside += 1;
            }
        }
    }
    let stroke: Stroke =
        serde_json::from_str(&std::fs::read_to_string(fx.path("stroke.json")).unwrap()).unwrap();
    let store = FamilyStore::open(&fx.store).map_err(|e| e.to_string())?;
    let family = store.load_nearest(1.2).unwrap();
    let params = ChemicalParams {
        bond_distance: 1.2,
        repetitions: 5,
        radius: None,
    };
    let chem = apply_chemical(&before, &stroke, &params, &family).map_err(|e| e.to_string())?;
    let touched: Vec<(u32, u32)> = aggregate_stroke(&before, &stroke)
        .map_err(|e| e.to_string())?
        .into_iter()
        .flat_map(|s| s.pixels)
        .collect();
    for y in 0..32 {
        for x in 0..32 {
            if !touched.contains(&(x, y)) {
                ensure!(
                    before.pixel((x, y)) == chem.image.pixel((x, y)),
                    "chem touched ({x},{y})"
                );
            }
        }
    }
    ensure!(chem.image != before, "chem left the canvas unchanged");
    Ok(format!(
        "50 patches x 3 widths, max deviation {worst}; {outside} pixels outside paste and all pixels outside the stroke unchanged"
    ))
}

fn steer_t_zero(fx: &Fixture) -> Verdict {
    ok(&fx.steer("0", "5", "t0.png"))?;
    let (a, b) = (read_png(&fx.path("in.png")), read_png(&fx.path("t0.png")));
    let paste = Region::Circle {
        center: [8.0, 24.0],
        radius: 5.0,
    }
    .pixels(32, 32);
    let mut worst = 0;
    for &p in &paste {
        for c in 0..4 {
            worst = worst.max((a.pixel(p)[c] as i32 - b.pixel(p)[c] as i32).abs());
        }
    }
    ensure!(worst <= 1, "paste region moved by {worst}");
    Ok(format!(
        "{} paste pixels, max deviation {worst}",
        paste.len()
    ))
}

fn distance_projection(fx: &Fixture) -> Verdict {
    let store = FamilyStore::open(&fx.store).map_err(|e| e.to_string())?;
    ensure!(store.len() == 1000, "store holds {} families", store.len());
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let d = rng.random_range(0.725..=2.5);
        let used = store.nearest_distance(d).map_err(|e| e.to_string())?;
        worst = worst.max((used - d).abs());
    }
    ensure!(worst <= 0.000889, "worst offset {worst}");
    let o = fx.chem("0.735", "c735.png");
    ok(&o)?;
    let out = String::from_utf8_lossy(&o.stdout);
    let used: f64 = out
        .split_whitespace()
        .nth(2)
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| format!("no distance in `{out}`"))?;
    ensure!(
        (used - 0.735).abs() <= 0.000889,
        "CLI used {used} for 0.735"
    );
    Ok(format!(
        "worst offset {worst:.6} Å over 100 draws; CLI maps 0.735 to {used:.6}"
    ))
}

fn determinism(fx: &Fixture) -> Verdict {
    ok(&fx.steer("1", "9", "d1.png"))?;
    ok(&fx.steer("1", "9", "d2.png"))?;
    ok(&fx.chem("1.6", "c1.png"))?;
    ok(&fx.chem("1.6", "c2.png"))?;
    let read = |n: &str| std::fs::read(fx.path(n)).unwrap();
    for (a, b) in [
        ("d1.png", "d2.png"),
        ("d1.json", "d2.json"),
        ("c1.png", "c2.png"),
    ] {
        ensure!(read(a) == read(b), "{a} and {b} differ");
    }
    let again = fx.path("families2");
    ok(&qbrush(&[
        "precompute",
        "--grid",
        "1000",
        "--data-dir",
        &again.display().to_string(),
    ]))?;
    let mut files = 0;
    for entry in std::fs::read_dir(&fx.store).unwrap() {
        let name = entry.unwrap().file_name();
        let a = std::fs::read(fx.store.join(&name)).unwrap();
        let b = std::fs::read(again.join(&name)).map_err(|e| format!("{name:?}: {e}"))?;
        ensure!(a == b, "{name:?} differs between runs");
        files += 1;
    }
    ensure!(fx.store.join(INDEX_FILE).exists(), "no index written");
    Ok(format!(
        "steer PNG + sidecar, chem PNG and {files} store files byte-identical"
    ))
}

// ---- service ----

async fn call(app: &Router, method: &str, uri: &str, body: impl Into<Body>) -> (StatusCode, Bytes) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .body(body.into())
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    (status, resp.into_body().collect().await.unwrap().to_bytes())
}

fn js(b: &Bytes) -> Value {
    serde_json::from_slice(b).unwrap_or(Value::Null)
}

fn app(data_dir: &Path, max_dim: u32) -> Router {
    router(
        AppState::new(Config {
            data_dir: data_dir.to_path_buf(),
            max_dim,
            workers: 2,
            ..Config::default()
        })
        .unwrap(),
    )
}

async fn service_contract(fx: &Fixture) -> Verdict {
    let svc = app(&fx.store, 4096);
    let img = fixture_image(32, 32);
    let png = img.to_png();

    let (s, b) = call(&svc, "POST", "/sessions", png.clone()).await;
    ensure!(s == StatusCode::CREATED, "create session: {s}");
    let id = js(&b)["session_id"].as_str().unwrap().to_string();
    let canvas_uri = format!("/sessions/{id}/canvas");
    let (s, b) = call(&svc, "GET", &canvas_uri, Body::empty()).await;
    ensure!(
        s == StatusCode::OK && b.as_ref() == png.as_slice(),
        "canvas roundtrip"
    );

    let expect = |what: &str, s: StatusCode, b: &Bytes, want: StatusCode| -> Result<(), String> {
        let v = js(b);
        ensure!(s == want, "{what}: got {s}, want {want}");
        ensure!(
            v["code"].is_string() && v["message"].is_string() && v.get("detail").is_some(),
            "{what}: body {v}"
        );
        Ok(())
    };
    let (s, b) = call(&svc, "GET", "/sessions/missing/canvas", Body::empty()).await;
    expect("unknown session", s, &b, StatusCode::NOT_FOUND)?;
    let (s, b) = call(&svc, "POST", "/sessions", "plain text").await;
    expect("non-PNG upload", s, &b, StatusCode::UNSUPPORTED_MEDIA_TYPE)?;
    let (s, b) = call(&app(&fx.store, 16), "POST", "/sessions", png.clone()).await;
    expect("oversized upload", s, &b, StatusCode::PAYLOAD_TOO_LARGE)?;

    let circle = |x: f64, y: f64| json!({ "kind": "circle", "center": [x, y], "radius": 5.0 });
    let body = json!({
        "source": circle(8.0, 8.0), "target": circle(24.0, 24.0), "paste": circle(8.0, 24.0),
        "params": { "t": 1.0, "seed": 1, "max_iters": 80 },
    });
    let steer_uri = format!("/sessions/{id}/effects/steerable");
    let mut bad = body.clone();
    bad["source"] =
        json!({ "kind": "lasso-polygon", "vertices": [[2, 2], [12, 12], [12, 2], [2, 12]] });
    let (s, b) = call(&svc, "POST", &steer_uri, bad.to_string()).await;
    expect(
        "self-intersecting lasso",
        s,
        &b,
        StatusCode::UNPROCESSABLE_ENTITY,
    )?;

    let (s, b) = call(&svc, "POST", &steer_uri, body.to_string()).await;
    ensure!(s == StatusCode::ACCEPTED, "steerable submit: {s}");
    let job = js(&b)["job_id"].as_str().unwrap().to_string();
    let rank = |s: &str| {
        ["queued", "running", "done", "failed"]
            .iter()
            .position(|x| *x == s)
    };
    let (mut last_rank, mut last_progress, mut polls) = (0, 0.0, 0);
    loop {
        let (_, b) = call(&svc, "GET", &format!("/jobs/{job}"), Body::empty()).await;
        let v = js(&b);
        let r = rank(v["status"].as_str().unwrap_or("")).ok_or("bad status")?;
        let p = v["progress"].as_f64().unwrap();
        ensure!(
            r >= last_rank && p >= last_progress,
            "job went backwards: {v}"
        );
        (last_rank, last_progress) = (r, p);
        polls += 1;
        if r == 3 {
            return Err(format!("training failed: {v}"));
        }
        if r == 2 {
            break;
        }
        tokio::time::sleep(Duration::from_millis(2)).await;
    }
    let (_, trained) = call(&svc, "GET", &canvas_uri, Body::empty()).await;

    let eval = format!("/sessions/{id}/effects/steerable/{job}/evaluate");
    let (s, b) = call(&svc, "POST", &eval, json!({ "t": 0.0 }).to_string()).await;
    ensure!(s == StatusCode::OK, "evaluate t=0: {s}");
    let at0 = CanvasImage::from_png(&b).unwrap();
    let paste = Region::Circle {
        center: [8.0, 24.0],
        radius: 5.0,
    }
    .pixels(32, 32);
    for p in paste {
        let (a, c) = (img.pixel(p), at0.pixel(p));
        ensure!(
            a.iter()
                .zip(c)
                .all(|(u, v)| (*u as i32 - v as i32).abs() <= 1),
            "t=0 moved {p:?}"
        );
    }
    let (s, _) = call(&svc, "POST", &eval, json!({ "t": 1.2 }).to_string()).await;
    ensure!(s == StatusCode::OK, "evaluate t=1.2: {s}");

    let (s, b) = call(&svc, "POST", &format!("/sessions/{id}/undo"), Body::empty()).await;
    ensure!(
        s == StatusCode::OK && b == trained,
        "undo did not restore the trained canvas"
    );
    let (s, b) = call(&svc, "POST", &format!("/sessions/{id}/undo"), Body::empty()).await;
    ensure!(
        s == StatusCode::OK && b.as_ref() == png.as_slice(),
        "undo did not restore the upload"
    );

    let chem_uri = format!("/sessions/{id}/effects/chemical");
    let chem = |d: f64| {
        json!({
            "stroke": { "polyline": [[2.0, 8.0], [30.0, 8.0]], "radius": 2.0 },
            "params": { "bond_distance": d, "repetitions": 2 },
        })
    };
    let (s, b) = call(&svc, "POST", &chem_uri, chem(0.7249).to_string()).await;
    expect(
        "distance below range",
        s,
        &b,
        StatusCode::UNPROCESSABLE_ENTITY,
    )?;
    let bare = app(&fx.path("no-families"), 4096);
    let (s, b) = call(&bare, "POST", "/sessions", png.clone()).await;
    ensure!(s == StatusCode::CREATED, "session on empty store: {s}");
    let other = js(&b)["session_id"].as_str().unwrap().to_string();
    let uri = format!("/sessions/{other}/effects/chemical");
    let (s, b) = call(&bare, "POST", &uri, chem(1.0).to_string()).await;
    expect("chemical on empty store", s, &b, StatusCode::CONFLICT)?;
    let (s, b) = call(&bare, "GET", "/families/index", Body::empty()).await;
    expect("empty store index", s, &b, StatusCode::CONFLICT)?;

    let (s, b) = call(&svc, "POST", &chem_uri, chem(0.735).to_string()).await;
    ensure!(s == StatusCode::ACCEPTED, "chemical submit: {s}");
    let used = js(&b)["used_distance"].as_f64().unwrap();
    ensure!((used - 0.735).abs() <= 0.000889, "used distance {used}");

    let (s, b) = call(&svc, "GET", "/families/index", Body::empty()).await;
    let d = js(&b)["distances"].as_array().cloned().unwrap_or_default();
    ensure!(
        s == StatusCode::OK && d.len() == 1000,
        "index length {}",
        d.len()
    );
    ensure!(
        d[0] == json!(0.725) && d[999] == json!(2.5),
        "grid ends {} {}",
        d[0],
        d[999]
    );
    let (_, b) = call(&svc, "GET", "/families?distance=1.6", Body::empty()).await;
    let near = js(&b)["distance"].as_f64().unwrap_or(f64::NAN);
    ensure!(
        (near - 1.6).abs() <= 0.000889,
        "families?distance=1.6 -> {near}"
    );

    Ok(format!("roundtrip, 7 error cases, job monotone over {polls} polls, evaluate, undo x2, chemical and family endpoints"))
}

fn main() {
    let mut results: Vec<(String, bool)> = Vec::new();
    let mut report = |name: &str, budget: Option<Duration>, run: &mut dyn FnMut() -> Verdict| {
        let start = Instant::now();
        let verdict = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let took = start.elapsed();
        let verdict = match (verdict, budget) {
            (Ok(msg), Some(b)) if took > b => {
                Err(format!("{msg}; exceeded {} s budget", b.as_secs()))
            }
            (v, _) => v,
        };
        let (pass, msg) = match verdict {
            Ok(m) => (true, m),
            Err(m) => (false, m),
        };
        println!(
            "{} {name}: {msg} [{:.2} s]",
            if pass { "PASS" } else { "FAIL" },
            took.as_secs_f64()
        );
        results.push((name.to_string(), pass));
    };

    let (fx, precompute_time) = match setup() {
        Ok(s) => s,
        Err(e) => {
            println!("FAIL setup: {e}");
            std::process::exit(1);
        }
    };
    println!(
        "setup: 1000-point family store precomputed in {:.2} s",
        precompute_time.as_secs_f64()
    );
    let rt = tokio::runtime::Runtime::new().unwrap();

    let secs = Duration::from_secs;
    report("splitting order", Some(secs(10)), &mut splitting_order);
    report("gradient correctness", Some(secs(30)), &mut gradient_check);
    report("steering quality", Some(secs(300)), &mut steering_quality);
    report("H2 FCI match", Some(secs(120)), &mut || h2_fci(&fx));
    report("VQE trajectory invariants", Some(secs(120)), &mut || {
        vqe_invariants(&fx)
    });
    report("color roundtrip", None, &mut || color_roundtrip(&fx));
    report("steerable t=0 no-op", None, &mut || steer_t_zero(&fx));
    report("distance projection", None, &mut || {
        distance_projection(&fx)
    });
    report("determinism", None, &mut || determinism(&fx));
    report("service contract", None, &mut || {
        rt.block_on(service_contract(&fx))
    });

    let failed: Vec<&str> = results
        .iter()
        .filter(|r| !r.1)
        .map(|r| r.0.as_str())
        .collect();
    println!(
        "acceptance: {} passed, {} failed",
        results.len() - failed.len(),
        failed.len()
    );
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
