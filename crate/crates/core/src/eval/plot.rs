//! Minimal line-plot rendering of a sweep report (metric vs shadow width),
//! written as an RGB PNG. Axis ticks use a built-in 3x5 digit font; the
//! method-to-color mapping follows the order of the report's cells.

use std::collections::BTreeSet;
use std::path::Path;

use image::{Rgb, RgbImage};

use super::sweep::{Method, SweepReport};
use crate::io::IoError;

pub const METHOD_COLORS: [[u8; 3]; 3] = [
    [31, 119, 180],  // blue
    [214, 39, 40],   // red
    [44, 160, 44],   // green
];

pub fn method_color(method: Method) -> [u8; 3] {
    match method {
        Method::Proposed => METHOD_COLORS[0],
        Method::BaselineInterp => METHOD_COLORS[1],
        Method::ProposedNoMultiscale => METHOD_COLORS[2],
    }
}

const GLYPHS: [(char, [u8; 5]); 18] = [
    ('0', [0b111, 0b101, 0b101, 0b101, 0b111]),
    ('1', [0b010, 0b110, 0b010, 0b010, 0b111]),
    ('2', [0b111, 0b001, 0b111, 0b100, 0b111]),
    ('3', [0b111, 0b001, 0b111, 0b001, 0b111]),
    ('4', [0b101, 0b101, 0b111, 0b001, 0b001]),
    ('5', [0b111, 0b100, 0b111, 0b001, 0b111]),
    ('6', [0b111, 0b100, 0b111, 0b101, 0b111]),
    ('7', [0b111, 0b001, 0b010, 0b010, 0b010]),
    ('8', [0b111, 0b101, 0b111, 0b101, 0b111]),
    ('9', [0b111, 0b101, 0b111, 0b001, 0b111]),
    ('.', [0b000, 0b000, 0b000, 0b000, 0b010]),
    ('-', [0b000, 0b000, 0b111, 0b000, 0b000]),
    ('P', [0b111, 0b101, 0b111, 0b100, 0b100]),
    ('S', [0b111, 0b100, 0b111, 0b001, 0b111]),
    ('N', [0b101, 0b111, 0b111, 0b111, 0b101]),
    ('M', [0b101, 0b111, 0b111, 0b101, 0b101]),
    ('R', [0b111, 0b101, 0b110, 0b101, 0b101]),
    ('I', [0b111, 0b010, 0b010, 0b010, 0b111]),
];

fn draw_text(img: &mut RgbImage, x0: i64, y0: i64, text: &str, color: [u8; 3]) {
    let mut cx = x0;
    for ch in text.chars() {
        if let Some((_, rows)) = GLYPHS.iter().find(|(c, _)| *c == ch) {
            for (ry, bits) in rows.iter().enumerate() {
                for rx in 0..3 {
                    if bits & (0b100 >> rx) != 0 {
                        put(img, cx + rx as i64, y0 + ry as i64, color);
                    }
                }
            }
        }
        cx += 4;
    }
}

fn put(img: &mut RgbImage, x: i64, y: i64, color: [u8; 3]) {
    if x >= 0 && y >= 0 && (x as u32) < img.width() && (y as u32) < img.height() {
        img.put_pixel(x as u32, y as u32, Rgb(color));
    }
}

fn draw_line(img: &mut RgbImage, x0: f64, y0: f64, x1: f64, y1: f64, color: [u8; 3]) {
    let steps = ((x1 - x0).abs().max((y1 - y0).abs()).ceil() as usize).max(1);
    for i in 0..=steps {
        let t = i as f64 / steps as f64;
        put(
            img,
            (x0 + t * (x1 - x0)).round() as i64,
            (y0 + t * (y1 - y0)).round() as i64,
            color,
        );
    }
}

struct Panel {
    x0: f64,
    y0: f64,
    w: f64,
    h: f64,
    wmin: f64,
    wmax: f64,
    vmin: f64,
    vmax: f64,
}

impl Panel {
    fn map(&self, width: f64, value: f64) -> (f64, f64) {
        let tx = (width - self.wmin) / (self.wmax - self.wmin).max(1e-9);
        let ty = (value - self.vmin) / (self.vmax - self.vmin).max(1e-9);
        (self.x0 + tx * self.w, self.y0 + self.h - ty * self.h)
    }
}

fn render_panel(
    img: &mut RgbImage,
    report: &SweepReport,
    metric: impl Fn(&super::sweep::SweepCell) -> f64,
    label: &str,
    top: u32,
    height: u32,
) {
    let margin = 42.0;
    let widths: BTreeSet<usize> = report.cells.iter().map(|c| c.width).collect();
    if widths.is_empty() {
        return;
    }
    let values: Vec<f64> = report
        .cells
        .iter()
        .map(&metric)
        .filter(|v| v.is_finite())
        .collect();
    if values.is_empty() {
        return;
    }
    let (mut vmin, mut vmax) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let pad = ((vmax - vmin) * 0.08).max(1e-6);
    vmin -= pad;
    vmax += pad;

    let panel = Panel {
        x0: margin,
        y0: top as f64 + 12.0,
        w: img.width() as f64 - margin - 14.0,
        h: height as f64 - 34.0,
        wmin: *widths.iter().next().unwrap() as f64,
        wmax: *widths.iter().last().unwrap() as f64,
        vmin,
        vmax,
    };

    let axis = [90u8, 90, 90];
    draw_line(img, panel.x0, panel.y0, panel.x0, panel.y0 + panel.h, axis);
    draw_line(
        img,
        panel.x0,
        panel.y0 + panel.h,
        panel.x0 + panel.w,
        panel.y0 + panel.h,
        axis,
    );
    draw_text(img, 4, top as i64 + 2, label, [0, 0, 0]);

    for &w in widths.iter() {
        let (x, y) = panel.map(w as f64, panel.vmin);
        draw_line(img, x, y, x, y + 3.0, axis);
        draw_text(img, x as i64 - 3, y as i64 + 5, &w.to_string(), axis);
    }
    for (t, v) in [(0.0, panel.vmin + pad), (1.0, panel.vmax - pad)] {
        let y = panel.y0 + panel.h - t * panel.h;
        draw_text(img, 4, y as i64 + 8, &format!("{v:.2}"), axis);
    }

    let methods: Vec<Method> = {
        let mut seen = Vec::new();
        for c in &report.cells {
            if !seen.contains(&c.method) {
                seen.push(c.method);
            }
        }
        seen
    };
    for method in methods {
        let color = method_color(method);
        let mut prev: Option<(f64, f64)> = None;
        for &w in widths.iter() {
            let Some(cell) = report.cell(method, w) else {
                continue;
            };
            let v = metric(cell);
            if !v.is_finite() {
                prev = None;
                continue;
            }
            let (x, y) = panel.map(w as f64, v);
            if let Some((px, py)) = prev {
                draw_line(img, px, py, x, y, color);
            }
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    put(img, x as i64 + dx, y as i64 + dy, color);
                }
            }
            prev = Some((x, y));
        }
    }
}

/// Renders PSNR (top panel) and SSIM (bottom panel) against shadow width.
pub fn render(report: &SweepReport) -> RgbImage {
    let (w, h) = (560u32, 460u32);
    let mut img = RgbImage::from_pixel(w, h, Rgb([255, 255, 255]));
    render_panel(&mut img, report, |c| c.psnr_mean, "PSNR", 0, h / 2);
    render_panel(&mut img, report, |c| c.ssim_mean, "SSIM", h / 2, h / 2);
    img
}

/// Renders the report and writes it as a PNG.
pub fn save(report: &SweepReport, path: impl AsRef<Path>) -> Result<(), IoError> {
    let img = render(report);
    img.save_with_format(path.as_ref(), image::ImageFormat::Png)
        .map_err(|e| IoError::CorruptFile(e.to_string()))
}
