//! Minimal line plots: frame, grid and one colored polyline per series.

use std::io::Cursor;

use image::{ImageFormat, Rgba, RgbaImage};

const WIDTH: u32 = 800;
const HEIGHT: u32 = 500;
const MARGIN: f64 = 40.0;
const PALETTE: [[u8; 3]; 6] = [
    [31, 119, 180],
    [255, 127, 14],
    [44, 160, 44],
    [214, 39, 40],
    [148, 103, 189],
    [140, 86, 75],
];

pub struct Series {
    pub points: Vec<(f64, f64)>,
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        });
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        return (lo - 0.5, hi + 0.5);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

fn dot(img: &mut RgbaImage, x: f64, y: f64, half: i64, color: Rgba<u8>) {
    let (cx, cy) = (x.round() as i64, y.round() as i64);
    for py in cy - half..=cy + half {
        for px in cx - half..=cx + half {
            if px >= 0 && py >= 0 && (px as u32) < img.width() && (py as u32) < img.height() {
                img.put_pixel(px as u32, py as u32, color);
            }
        }
    }
}

fn line(img: &mut RgbaImage, a: (f64, f64), b: (f64, f64), half: i64, color: Rgba<u8>) {
    let steps = ((b.0 - a.0).abs().max((b.1 - a.1).abs()).ceil() as usize).max(1);
    for s in 0..=steps {
        let f = s as f64 / steps as f64;
        dot(
            img,
            a.0 + f * (b.0 - a.0),
            a.1 + f * (b.1 - a.1),
            half,
            color,
        );
    }
}

/// PNG bytes of all series on shared axes.
pub fn render(series: &[Series]) -> Vec<u8> {
    let mut img = RgbaImage::from_pixel(WIDTH, HEIGHT, Rgba([255, 255, 255, 255]));
    let all = || series.iter().flat_map(|s| s.points.iter());
    let (x0, x1) = bounds(all().map(|p| p.0));
    let (y0, y1) = bounds(all().map(|p| p.1));
    let (w, h) = (WIDTH as f64 - 2.0 * MARGIN, HEIGHT as f64 - 2.0 * MARGIN);
    let map = |(x, y): (f64, f64)| {
        (
            MARGIN + (x - x0) / (x1 - x0) * w,
            MARGIN + (1.0 - (y - y0) / (y1 - y0)) * h,
        )
    };

    let grid = Rgba([225, 225, 225, 255]);
    for k in 1..5 {
        let f = k as f64 / 5.0;
        line(
            &mut img,
            (MARGIN + f * w, MARGIN),
            (MARGIN + f * w, MARGIN + h),
            0,
            grid,
        );
        line(
            &mut img,
            (MARGIN, MARGIN + f * h),
            (MARGIN + w, MARGIN + f * h),
            0,
            grid,
        );
    }
    let black = Rgba([0, 0, 0, 255]);
    let corners = [
        (MARGIN, MARGIN),
        (MARGIN + w, MARGIN),
        (MARGIN + w, MARGIN + h),
        (MARGIN, MARGIN + h),
    ];
    for i in 0..4 {
        line(&mut img, corners[i], corners[(i + 1) % 4], 0, black);
    }

    for (i, s) in series.iter().enumerate() {
        let [r, g, b] = PALETTE[i % PALETTE.len()];
        let color = Rgba([r, g, b, 255]);
        let pts: Vec<(f64, f64)> = s
            .points
            .iter()
            .filter(|p| p.0.is_finite() && p.1.is_finite())
            .map(|&p| map(p))
            .collect();
        match pts.as_slice() {
            [only] => dot(&mut img, only.0, only.1, 2, color),
            _ => {
                for pair in pts.windows(2) {
                    line(&mut img, pair[0], pair[1], 1, color);
                }
            }
        }
    }

    let mut out = Cursor::new(Vec::new());
    img.write_to(&mut out, ImageFormat::Png)
        .expect("PNG encoding into memory");
    out.into_inner()
}
