//! The Steerable and Chemical effects on RGBA canvases.
//!
//! Coordinates are continuous pixel units: pixel `(i, j)` covers
//! `[i, i + 1) x [j, j + 1)` and a region or disk contains it when its centre
//! `(i + 0.5, j + 0.5)` is inside.

use std::f64::consts::{PI, TAU};
use std::io::Cursor;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::colorsvd::{self, ColorError, PixelMatrix, SvdEncoding};
use crate::control::{
    train_with_progress, ControlError, SteeringProblem, TrainConfig, TrainedSteering,
};
use crate::h2chem::{MAX_DISTANCE, MIN_DISTANCE};
use crate::statevec::{reduced_bloch, Axis, StateError, Statevector, C64};
use crate::vqe::{CircuitFamily, DuccAnsatz, VqeError};

pub const MAX_REPETITIONS: usize = 100;
/// Qubits per Chemical group (the H2 circuit width).
pub const GROUP_SIZE: usize = 4;
const POLE_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum BrushError {
    #[error("invalid {role} region: {message}")]
    Region { role: String, message: String },
    #[error("invalid stroke: {0}")]
    Stroke(String),
    #[error("invalid parameter `{name}`: {message}")]
    Param { name: &'static str, message: String },
    #[error("image: {0}")]
    Image(String),
    #[error(transparent)]
    Color(#[from] ColorError),
    #[error(transparent)]
    Control(#[from] ControlError),
    #[error(transparent)]
    Vqe(#[from] VqeError),
    #[error(transparent)]
    State(#[from] StateError),
}

fn param_err(name: &'static str, message: impl Into<String>) -> BrushError {
    BrushError::Param {
        name,
        message: message.into(),
    }
}

fn region_err(role: &str, message: impl Into<String>) -> BrushError {
    BrushError::Region {
        role: role.to_string(),
        message: message.into(),
    }
}

/// Row-major 8-bit RGBA canvas.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CanvasImage {
    pub width: u32,
    pub height: u32,
    pub rgba: Vec<u8>,
}

impl CanvasImage {
    pub fn new(width: u32, height: u32, rgba: Vec<u8>) -> Result<Self, BrushError> {
        if rgba.len() != width as usize * height as usize * 4 {
            return Err(BrushError::Image(format!(
                "{} bytes for a {width}x{height} RGBA image",
                rgba.len()
            )));
        }
        Ok(Self {
            width,
            height,
            rgba,
        })
    }

    pub fn filled(width: u32, height: u32, color: [u8; 4]) -> Self {
        Self {
            width,
            height,
            rgba: color.repeat(width as usize * height as usize),
        }
    }

    pub fn from_png(bytes: &[u8]) -> Result<Self, BrushError> {
        let img = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)
            .map_err(|e| BrushError::Image(e.to_string()))?
            .to_rgba8();
        let (width, height) = img.dimensions();
        Self::new(width, height, img.into_raw())
    }

    pub fn to_png(&self) -> Vec<u8> {
        let img = image::RgbaImage::from_raw(self.width, self.height, self.rgba.clone())
            .expect("buffer length checked on construction");
        let mut out = Cursor::new(Vec::new());
        img.write_to(&mut out, image::ImageFormat::Png)
            .expect("PNG encoding into memory");
        out.into_inner()
    }

    fn offset(&self, (x, y): (u32, u32)) -> usize {
        (y as usize * self.width as usize + x as usize) * 4
    }

    pub fn pixel(&self, p: (u32, u32)) -> [u8; 4] {
        let o = self.offset(p);
        self.rgba[o..o + 4].try_into().expect("4 channels")
    }

    pub fn set_pixel(&mut self, p: (u32, u32), color: [u8; 4]) {
        let o = self.offset(p);
        self.rgba[o..o + 4].copy_from_slice(&color);
    }

    pub fn contains(&self, x: i64, y: i64) -> bool {
        x >= 0 && y >= 0 && x < self.width as i64 && y < self.height as i64
    }
}

/// Region drawn on the canvas. JSON: `{"kind": "lasso-polygon", "vertices": [[x, y], ...]}`,
/// `{"kind": "circle", "center": [x, y], "radius": r}` or `{"kind": "point", "center": [x, y]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Region {
    LassoPolygon { vertices: Vec<[f64; 2]> },
    Circle { center: [f64; 2], radius: f64 },
    Point { center: [f64; 2] },
}

fn finite(p: &[f64; 2]) -> bool {
    p[0].is_finite() && p[1].is_finite()
}

fn orient(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

fn on_segment(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> bool {
    p[0] >= a[0].min(b[0])
        && p[0] <= a[0].max(b[0])
        && p[1] >= a[1].min(b[1])
        && p[1] <= a[1].max(b[1])
}

fn segments_intersect(a: [f64; 2], b: [f64; 2], c: [f64; 2], d: [f64; 2]) -> bool {
    let (o1, o2, o3, o4) = (
        orient(a, b, c),
        orient(a, b, d),
        orient(c, d, a),
        orient(c, d, b),
    );
    if o1 * o2 < 0.0 && o3 * o4 < 0.0 {
        return true;
    }
    (o1 == 0.0 && on_segment(a, b, c))
        || (o2 == 0.0 && on_segment(a, b, d))
        || (o3 == 0.0 && on_segment(c, d, a))
        || (o4 == 0.0 && on_segment(c, d, b))
}

/// True when two non-adjacent edges of the closed polygon touch or cross.
pub fn is_self_intersecting(vertices: &[[f64; 2]]) -> bool {
    let n = vertices.len();
    for i in 0..n {
        let (a, b) = (vertices[i], vertices[(i + 1) % n]);
        for j in i + 1..n {
            if j == i + 1 || (i == 0 && j == n - 1) {
                continue;
            }
            let (c, d) = (vertices[j], vertices[(j + 1) % n]);
            if segments_intersect(a, b, c, d) {
                return true;
            }
        }
    }
    false
}

fn point_in_polygon(vertices: &[[f64; 2]], x: f64, y: f64) -> bool {
    let mut inside = false;
    let n = vertices.len();
    let mut j = n - 1;
    for i in 0..n {
        let (xi, yi) = (vertices[i][0], vertices[i][1]);
        let (xj, yj) = (vertices[j][0], vertices[j][1]);
        if (yi > y) != (yj > y) && x < (xj - xi) * (y - yi) / (yj - yi) + xi {
            inside = !inside;
        }
        j = i;
    }
    inside
}

fn clipped_range(lo: f64, hi: f64, size: u32) -> std::ops::Range<u32> {
    let a = lo.floor().max(0.0).min(size as f64) as u32;
    let b = (hi.ceil() + 1.0).max(0.0).min(size as f64) as u32;
    a..b
}

fn disk_pixels(center: [f64; 2], radius: f64, width: u32, height: u32) -> Vec<(u32, u32)> {
    let mut out = Vec::new();
    for y in clipped_range(center[1] - radius, center[1] + radius, height) {
        for x in clipped_range(center[0] - radius, center[0] + radius, width) {
            let (dx, dy) = (x as f64 + 0.5 - center[0], y as f64 + 0.5 - center[1]);
            if dx * dx + dy * dy <= radius * radius {
                out.push((x, y));
            }
        }
    }
    out
}

impl Region {
    pub fn validate(&self, role: &str) -> Result<(), BrushError> {
        match self {
            Region::LassoPolygon { vertices } => {
                if vertices.len() < 3 {
                    return Err(region_err(role, "a lasso needs at least 3 vertices"));
                }
                if !vertices.iter().all(finite) {
                    return Err(region_err(role, "non-finite vertex"));
                }
                if is_self_intersecting(vertices) {
                    return Err(region_err(role, "lasso polygon intersects itself"));
                }
            }
            Region::Circle { center, radius } => {
                if !finite(center) || !radius.is_finite() || *radius <= 0.0 {
                    return Err(region_err(
                        role,
                        "circle needs a finite center and radius > 0",
                    ));
                }
            }
            Region::Point { center } => {
                if !finite(center) {
                    return Err(region_err(role, "non-finite point"));
                }
            }
        }
        Ok(())
    }

    /// Covered canvas pixels in row-major order. A point covers its own pixel.
    pub fn pixels(&self, width: u32, height: u32) -> Vec<(u32, u32)> {
        match self {
            Region::LassoPolygon { vertices } => {
                let (mut x0, mut y0, mut x1, mut y1) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
                for v in vertices {
                    x0 = x0.min(v[0]);
                    x1 = x1.max(v[0]);
                    y0 = y0.min(v[1]);
                    y1 = y1.max(v[1]);
                }
                let mut out = Vec::new();
                for y in clipped_range(y0, y1, height) {
                    for x in clipped_range(x0, x1, width) {
                        if point_in_polygon(vertices, x as f64 + 0.5, y as f64 + 0.5) {
                            out.push((x, y));
                        }
                    }
                }
                out
            }
            Region::Circle { center, radius } => disk_pixels(*center, *radius, width, height),
            Region::Point { center } => {
                let (x, y) = (center[0].floor() as i64, center[1].floor() as i64);
                if x >= 0 && y >= 0 && x < width as i64 && y < height as i64 {
                    vec![(x as u32, y as u32)]
                } else {
                    Vec::new()
                }
            }
        }
    }
}

/// Integer-rounded pixel centroid.
pub fn barycenter(pixels: &[(u32, u32)]) -> (i64, i64) {
    let n = pixels.len() as f64;
    let sx: f64 = pixels.iter().map(|p| p.0 as f64).sum();
    let sy: f64 = pixels.iter().map(|p| p.1 as f64).sum();
    ((sx / n).round() as i64, (sy / n).round() as i64)
}

/// Polyline with a brush radius. JSON: `{"polyline": [[x, y], ...], "radius": r}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Stroke {
    pub polyline: Vec<[f64; 2]>,
    pub radius: f64,
}

impl Stroke {
    pub fn validate(&self) -> Result<(), BrushError> {
        if self.polyline.len() < 2 {
            return Err(BrushError::Stroke("needs at least 2 points".into()));
        }
        if !self.polyline.iter().all(finite) {
            return Err(BrushError::Stroke("non-finite point".into()));
        }
        if !(self.radius >= 1.0) || !self.radius.is_finite() {
            return Err(BrushError::Stroke(format!(
                "radius must be at least 1 pixel, got {}",
                self.radius
            )));
        }
        Ok(())
    }

    /// Points along the polyline every `spacing` pixels of arc length, from the start.
    pub fn resample(&self, spacing: f64) -> Vec<[f64; 2]> {
        let mut out = vec![self.polyline[0]];
        let mut carried = 0.0;
        for w in self.polyline.windows(2) {
            let (a, b) = (w[0], w[1]);
            let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
            let mut s = spacing - carried;
            while s <= len {
                let f = s / len;
                out.push([a[0] + f * (b[0] - a[0]), a[1] + f * (b[1] - a[1])]);
                s += spacing;
            }
            carried = len - (s - spacing);
        }
        out
    }
}

fn default_timestep() -> usize {
    SteeringProblem::DEFAULT_TIMESTEPS
}
fn default_controls() -> usize {
    2
}
fn default_boundary_color() -> [u8; 4] {
    [255, 255, 255, 255]
}
fn default_boundary_thickness() -> f64 {
    2.0
}
fn default_max_iters() -> usize {
    TrainConfig::default().max_iters
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SteerableParams {
    pub t: f64,
    #[serde(default = "default_timestep")]
    pub timestep: usize,
    #[serde(default = "default_controls")]
    pub controls: usize,
    #[serde(default)]
    pub source_equals_paste: bool,
    #[serde(default)]
    pub show_source_target: bool,
    #[serde(default = "default_boundary_color")]
    pub boundary_color: [u8; 4],
    #[serde(default = "default_boundary_thickness")]
    pub boundary_thickness: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
}

impl SteerableParams {
    pub fn with_t(t: f64) -> Self {
        Self {
            t,
            timestep: default_timestep(),
            controls: default_controls(),
            source_equals_paste: false,
            show_source_target: false,
            boundary_color: default_boundary_color(),
            boundary_thickness: default_boundary_thickness(),
            seed: 0,
            max_iters: default_max_iters(),
        }
    }

    pub fn validate(&self) -> Result<(), BrushError> {
        if !(self.t >= 0.0) || !self.t.is_finite() {
            return Err(param_err(
                "t",
                format!("must be finite and >= 0, got {}", self.t),
            ));
        }
        if self.timestep < 1 {
            return Err(param_err("timestep", "must be at least 1"));
        }
        if !(2..=4).contains(&self.controls) {
            return Err(param_err(
                "controls",
                format!("must be 2, 3 or 4, got {}", self.controls),
            ));
        }
        if !(self.boundary_thickness > 0.0) || !self.boundary_thickness.is_finite() {
            return Err(param_err("boundary_thickness", "must be > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChemicalParams {
    /// Ångström.
    pub bond_distance: f64,
    #[serde(default)]
    pub repetitions: usize,
    /// Overrides the stroke's own radius when set.
    #[serde(default)]
    pub radius: Option<f64>,
}

impl ChemicalParams {
    pub fn validate(&self) -> Result<(), BrushError> {
        if !(MIN_DISTANCE..=MAX_DISTANCE).contains(&self.bond_distance) {
            return Err(param_err(
                "bond_distance",
                format!(
                    "{} Å outside [{MIN_DISTANCE}, {MAX_DISTANCE}]",
                    self.bond_distance
                ),
            ));
        }
        if self.repetitions > MAX_REPETITIONS {
            return Err(param_err(
                "repetitions",
                format!("must be in 0..=100, got {}", self.repetitions),
            ));
        }
        if let Some(r) = self.radius {
            if !(r >= 1.0) || !r.is_finite() {
                return Err(param_err("radius", format!("must be at least 1, got {r}")));
            }
        }
        Ok(())
    }
}

// ---- HSL ----

/// `(hue in [0, 2pi), saturation, lightness)` of an 8-bit RGB triple.
pub fn rgb_to_hsl(rgb: [u8; 3]) -> (f64, f64, f64) {
    let [r, g, b] = rgb.map(|c| c as f64 / 255.0);
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let l = 0.5 * (max + min);
    let d = max - min;
    if d == 0.0 {
        return (0.0, 0.0, l);
    }
    let s = d / (1.0 - (2.0 * l - 1.0).abs());
    let sector = if max == r {
        ((g - b) / d).rem_euclid(6.0)
    } else if max == g {
        (b - r) / d + 2.0
    } else {
        (r - g) / d + 4.0
    };
    (sector * PI / 3.0, s, l)
}

pub fn hsl_to_rgb(h: f64, s: f64, l: f64) -> [u8; 3] {
    let l = l.clamp(0.0, 1.0);
    let s = s.clamp(0.0, 1.0);
    let c = (1.0 - (2.0 * l - 1.0).abs()) * s;
    let hp = h.rem_euclid(TAU) / (PI / 3.0);
    let x = c * (1.0 - (hp.rem_euclid(2.0) - 1.0).abs());
    let (r, g, b) = match hp as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = l - 0.5 * c;
    [r, g, b].map(|v| ((v + m) * 255.0).round().clamp(0.0, 255.0) as u8)
}

/// Circular mean of angles, in `[0, 2pi)`.
pub fn circular_mean(angles: impl IntoIterator<Item = f64>) -> f64 {
    let (s, c) = angles
        .into_iter()
        .fold((0.0, 0.0), |(s, c), a| (s + a.sin(), c + a.cos()));
    s.atan2(c).rem_euclid(TAU)
}

// ---- Steerable ----

fn region_colors(image: &CanvasImage, pixels: &[(u32, u32)]) -> PixelMatrix {
    PixelMatrix::from_bytes(&pixels.iter().map(|&p| image.pixel(p)).collect::<Vec<_>>())
}

fn steer_region(
    image: &CanvasImage,
    region: &Region,
    role: &str,
) -> Result<Vec<(u32, u32)>, BrushError> {
    region.validate(role)?;
    if matches!(region, Region::Point { .. }) {
        return Err(region_err(role, "must be a lasso or circle, not a point"));
    }
    let px = region.pixels(image.width, image.height);
    if px.len() < colorsvd::MIN_PIXELS {
        return Err(region_err(
            role,
            format!("covers {} pixels; at least 4 are required", px.len()),
        ));
    }
    Ok(px)
}

/// Trained steering between two regions of one canvas.
#[derive(Debug, Clone)]
pub struct SteerableModel {
    pub source: Region,
    pub target: Region,
    pub source_pixels: Vec<(u32, u32)>,
    pub source_encoding: SvdEncoding,
    pub target_encoding: SvdEncoding,
    pub trained: TrainedSteering,
}

pub fn train_steerable(
    image: &CanvasImage,
    source: &Region,
    target: &Region,
    params: &SteerableParams,
    progress: impl FnMut(usize, f64),
) -> Result<SteerableModel, BrushError> {
    params.validate()?;
    let source_pixels = steer_region(image, source, "source")?;
    let target_pixels = steer_region(image, target, "target")?;
    let source_encoding = colorsvd::encode(&region_colors(image, &source_pixels), params.controls)?;
    let target_encoding = colorsvd::encode(&region_colors(image, &target_pixels), params.controls)?;
    let problem = SteeringProblem::new(
        source_encoding.state.clone(),
        target_encoding.state.clone(),
        params.timestep,
    )?;
    let config = TrainConfig {
        max_iters: params.max_iters,
        seed: params.seed,
        ..TrainConfig::default()
    };
    let trained = train_with_progress(&problem, &config, progress)?;
    Ok(SteerableModel {
        source: source.clone(),
        target: target.clone(),
        source_pixels,
        source_encoding,
        target_encoding,
        trained,
    })
}

/// Paste geometry resolved against a model: destination pixels (possibly off-canvas)
/// and the encoding whose state is evolved.
fn paste_plan(
    image: &CanvasImage,
    model: &SteerableModel,
    paste: Option<&Region>,
    params: &SteerableParams,
) -> Result<(Vec<(i64, i64)>, SvdEncoding), BrushError> {
    let paste = match (params.source_equals_paste, paste) {
        (true, _) => &model.source,
        (false, Some(p)) => p,
        (false, None) => {
            return Err(region_err(
                "paste",
                "missing; supply one or set source_equals_paste",
            ))
        }
    };
    paste.validate("paste")?;
    if let Region::Point { center } = paste {
        let (bx, by) = barycenter(&model.source_pixels);
        let (dx, dy) = (center[0].floor() as i64 - bx, center[1].floor() as i64 - by);
        let dest = model
            .source_pixels
            .iter()
            .map(|&(x, y)| (x as i64 + dx, y as i64 + dy))
            .collect();
        return Ok((dest, model.source_encoding.clone()));
    }
    let px = paste.pixels(image.width, image.height);
    if px.len() < colorsvd::MIN_PIXELS {
        return Err(region_err(
            "paste",
            format!("covers {} pixels; at least 4 are required", px.len()),
        ));
    }
    let enc = colorsvd::encode(&region_colors(image, &px), params.controls)?;
    Ok((px.iter().map(|&(x, y)| (x as i64, y as i64)).collect(), enc))
}

/// Evaluates a trained model at `params.t` onto `image`.
pub fn render_steerable(
    image: &CanvasImage,
    model: &SteerableModel,
    paste: Option<&Region>,
    params: &SteerableParams,
) -> Result<CanvasImage, BrushError> {
    params.validate()?;
    if params.controls != model.source_encoding.n_qubits {
        return Err(param_err(
            "controls",
            format!(
                "model was trained with {} controls",
                model.source_encoding.n_qubits
            ),
        ));
    }
    let (dest, encoding) = paste_plan(image, model, paste, params)?;
    let evolved = model.trained.evolve_from(&encoding.state, params.t)?;
    let colors = colorsvd::decode(&encoding, &evolved, dest.len())?.to_bytes();
    let mut out = image.clone();
    for (&(x, y), c) in dest.iter().zip(colors) {
        if out.contains(x, y) {
            out.set_pixel((x as u32, y as u32), c);
        }
    }
    if params.show_source_target {
        for r in [&model.source, &model.target] {
            draw_boundary(
                &mut out,
                r,
                params.boundary_color,
                params.boundary_thickness,
            );
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct SteerableOutcome {
    pub image: CanvasImage,
    pub model: SteerableModel,
}

pub fn apply_steerable(
    image: &CanvasImage,
    source: &Region,
    target: &Region,
    paste: Option<&Region>,
    params: &SteerableParams,
) -> Result<SteerableOutcome, BrushError> {
    let model = train_steerable(image, source, target, params, |_, _| {})?;
    let image = render_steerable(image, &model, paste, params)?;
    Ok(SteerableOutcome { image, model })
}

fn segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let (vx, vy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = vx * vx + vy * vy;
    let f = if len2 == 0.0 {
        0.0
    } else {
        (((p[0] - a[0]) * vx + (p[1] - a[1]) * vy) / len2).clamp(0.0, 1.0)
    };
    ((p[0] - a[0] - f * vx).powi(2) + (p[1] - a[1] - f * vy).powi(2)).sqrt()
}

/// Paints the outline of `region` with the given line thickness.
pub fn draw_boundary(image: &mut CanvasImage, region: &Region, color: [u8; 4], thickness: f64) {
    let half = 0.5 * thickness;
    let (w, h) = (image.width, image.height);
    match region {
        Region::LassoPolygon { vertices } => {
            let n = vertices.len();
            for i in 0..n {
                let (a, b) = (vertices[i], vertices[(i + 1) % n]);
                for y in clipped_range(a[1].min(b[1]) - half, a[1].max(b[1]) + half, h) {
                    for x in clipped_range(a[0].min(b[0]) - half, a[0].max(b[0]) + half, w) {
                        if segment_distance([x as f64 + 0.5, y as f64 + 0.5], a, b) <= half {
                            image.set_pixel((x, y), color);
                        }
                    }
                }
            }
        }
        Region::Circle { center, radius } => {
            for (x, y) in disk_pixels(*center, radius + half, w, h) {
                let d = ((x as f64 + 0.5 - center[0]).powi(2)
                    + (y as f64 + 0.5 - center[1]).powi(2))
                .sqrt();
                if (d - radius).abs() <= half {
                    image.set_pixel((x, y), color);
                }
            }
        }
        Region::Point { .. } => {}
    }
}

// ---- Chemical ----

/// Aggregated hue and lightness of one brush disk.
#[derive(Debug, Clone, PartialEq)]
pub struct StrokeSample {
    pub center: [f64; 2],
    /// Circular mean hue in `[0, 2pi)`.
    pub phi: f64,
    /// `pi (1 - L)` for the mean lightness `L`.
    pub theta: f64,
    pub pixels: Vec<(u32, u32)>,
}

fn aggregate_with_radius(image: &CanvasImage, stroke: &Stroke, radius: f64) -> Vec<StrokeSample> {
    stroke
        .resample(radius)
        .into_iter()
        .filter_map(|center| {
            let pixels = disk_pixels(center, radius, image.width, image.height);
            if pixels.is_empty() {
                return None;
            }
            let hsl: Vec<_> = pixels
                .iter()
                .map(|&p| {
                    let [r, g, b, _] = image.pixel(p);
                    rgb_to_hsl([r, g, b])
                })
                .collect();
            let phi = circular_mean(hsl.iter().map(|c| c.0));
            let l = hsl.iter().map(|c| c.2).sum::<f64>() / hsl.len() as f64;
            Some(StrokeSample {
                center,
                phi,
                theta: PI * (1.0 - l),
                pixels,
            })
        })
        .collect()
}

/// Stroke samples every `radius` pixels, skipping disks that miss the canvas.
pub fn aggregate_stroke(
    image: &CanvasImage,
    stroke: &Stroke,
) -> Result<Vec<StrokeSample>, BrushError> {
    stroke.validate()?;
    Ok(aggregate_with_radius(image, stroke, stroke.radius))
}

/// `R_Z(phi) R_Y(theta) |0>` on each qubit, qubit 0 first.
pub fn encode_angles(angles: &[(f64, f64)]) -> Result<Statevector, StateError> {
    let mut state = Statevector::zero(angles.len())?;
    for (q, &(phi, theta)) in angles.iter().enumerate() {
        state.rotate_in_place(Axis::Y, q, theta)?;
        state.rotate_in_place(Axis::Z, q, phi)?;
    }
    Ok(state)
}

/// Per-qubit `(phi, theta)`; `phi` is `None` where the Bloch vector sits on the z axis.
pub fn decode_angles(state: &Statevector) -> Result<Vec<(Option<f64>, f64)>, StateError> {
    (0..state.n_qubits())
        .map(|q| {
            let (x, y, z) = reduced_bloch(state, q)?;
            let phi = (x * x + y * y >= POLE_TOL).then(|| y.atan2(x).rem_euclid(TAU));
            Ok((phi, z.clamp(-1.0, 1.0).acos()))
        })
        .collect()
}

/// Family indices applied to group `j` of `groups`, in application order.
pub fn circuit_window(
    j: usize,
    groups: usize,
    family_len: usize,
    repetitions: usize,
) -> std::ops::RangeInclusive<usize> {
    let idx = j * family_len / groups;
    idx.saturating_sub(repetitions)..=idx
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupResult {
    pub circuits: std::ops::RangeInclusive<usize>,
    pub decoded: Vec<(Option<f64>, f64)>,
}

#[derive(Debug, Clone)]
pub struct ChemicalOutcome {
    pub image: CanvasImage,
    pub samples: Vec<StrokeSample>,
    pub groups: Vec<GroupResult>,
}

impl ChemicalOutcome {
    /// Samples after the last full group, left unchanged.
    pub fn leftover_samples(&self) -> usize {
        self.samples.len() - self.groups.len() * GROUP_SIZE
    }
}

pub fn apply_chemical(
    image: &CanvasImage,
    stroke: &Stroke,
    params: &ChemicalParams,
    family: &CircuitFamily,
) -> Result<ChemicalOutcome, BrushError> {
    stroke.validate()?;
    params.validate()?;
    let radius = params.radius.unwrap_or(stroke.radius);
    let samples = aggregate_with_radius(image, stroke, radius);
    let n_groups = samples.len() / GROUP_SIZE;

    let ansatz = DuccAnsatz::standard();
    let mut unitaries: Vec<Option<DMatrix<C64>>> = vec![None; family.len()];
    let mut out = image.clone();
    let mut groups = Vec::with_capacity(n_groups);

    for j in 0..n_groups {
        let chunk = &samples[j * GROUP_SIZE..(j + 1) * GROUP_SIZE];
        let angles: Vec<(f64, f64)> = chunk.iter().map(|s| (s.phi, s.theta)).collect();
        let mut state = encode_angles(&angles)?;
        let circuits = circuit_window(j, n_groups, family.len(), params.repetitions);
        for k in circuits.clone() {
            if unitaries[k].is_none() {
                unitaries[k] = Some(ansatz.unitary(&family.parameters[k])?);
            }
            state.apply_matrix_in_place(unitaries[k].as_ref().expect("filled above"));
        }
        let decoded = decode_angles(&state)?;
        for (sample, &(phi, theta)) in chunk.iter().zip(&decoded) {
            let lightness = 1.0 - theta / PI;
            for &p in &sample.pixels {
                let [r, g, b, a] = image.pixel(p);
                let (own_hue, s, _) = rgb_to_hsl([r, g, b]);
                let [r, g, b] = hsl_to_rgb(phi.unwrap_or(own_hue), s, lightness);
                out.set_pixel(p, [r, g, b, a]);
            }
        }
        groups.push(GroupResult { circuits, decoded });
    }
    Ok(ChemicalOutcome {
        image: out,
        samples,
        groups,
    })
}
