//! Evaluation harness: PSNR/SSIM over a region, a row-interpolation baseline
//! inpainter, synthetic shadow generation, and the width-sweep experiment.

pub mod phantom;
pub mod plot;
mod sweep;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::raster::{Image, ShadowMask};

pub use sweep::{width_sweep, Method, SweepCell, SweepParams, SweepReport};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("images are {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
    #[error("metric region is empty")]
    EmptyRegion,
    #[error("row {0} has no reliable column to interpolate from")]
    NoReliableColumns(usize),
    #[error("cannot place {count} shadows of width up to {max_width} with gap {gap} in {width} columns")]
    PlacementInfeasible {
        count: usize,
        max_width: usize,
        gap: usize,
        width: usize,
    },
    #[error("invalid width range [{0}, {1}]")]
    BadWidthRange(usize, usize),
    #[error("pipeline failure: {0}")]
    Pipeline(String),
}

/// Pixel set a metric is computed over.
#[derive(Debug, Clone, Copy)]
pub enum Region<'a> {
    Full,
    /// Shadowed pixels (mask bit 0) of the given mask.
    Masked(&'a ShadowMask),
}

impl Region<'_> {
    fn includes(&self, x: usize, y: usize) -> bool {
        match self {
            Region::Full => true,
            Region::Masked(m) => !m.is_reliable(x, y),
        }
    }
}

fn check_dims(a: &Image, b: &Image) -> Result<(), EvalError> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(EvalError::DimensionMismatch(
            a.width(),
            a.height(),
            b.width(),
            b.height(),
        ));
    }
    Ok(())
}

/// Peak signal-to-noise ratio in dB over the region, on [0,1] data.
/// Identical inputs yield `f64::INFINITY`.
pub fn psnr(reference: &Image, test: &Image, region: Region) -> Result<f64, EvalError> {
    check_dims(reference, test)?;
    let mut sum = 0.0f64;
    let mut n = 0usize;
    for y in 0..reference.height() {
        for x in 0..reference.width() {
            if region.includes(x, y) {
                let d = reference.get(x, y) - test.get(x, y);
                sum += d * d;
                n += 1;
            }
        }
    }
    if n == 0 {
        return Err(EvalError::EmptyRegion);
    }
    let mse = sum / n as f64;
    if mse == 0.0 {
        Ok(f64::INFINITY)
    } else {
        Ok(10.0 * (1.0 / mse).log10())
    }
}

const SSIM_WINDOW: usize = 8;
const SSIM_C1: f64 = 0.01 * 0.01;
const SSIM_C2: f64 = 0.03 * 0.03;

/// Summed-area table with a 1-pixel zero border.
struct Sat {
    w: usize,
    data: Vec<f64>,
}

impl Sat {
    fn build(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Sat {
        let w = width + 1;
        let mut data = vec![0.0f64; w * (height + 1)];
        for y in 0..height {
            let mut row = 0.0;
            for x in 0..width {
                row += f(x, y);
                data[(y + 1) * w + (x + 1)] = data[y * w + (x + 1)] + row;
            }
        }
        Sat { w, data }
    }

    fn window(&self, x0: usize, y0: usize, ww: usize, wh: usize) -> f64 {
        let (x1, y1) = (x0 + ww, y0 + wh);
        self.data[y1 * self.w + x1] + self.data[y0 * self.w + x0]
            - self.data[y0 * self.w + x1]
            - self.data[y1 * self.w + x0]
    }
}

/// Mean structural similarity over all 8x8 stride-1 windows intersecting the
/// region. Symmetric in its image arguments; 1.0 for identical inputs.
pub fn ssim(reference: &Image, test: &Image, region: Region) -> Result<f64, EvalError> {
    check_dims(reference, test)?;
    let w = reference.width();
    let h = reference.height();
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(EvalError::EmptyRegion);
    }

    let sx = Sat::build(w, h, |x, y| reference.get(x, y));
    let sy = Sat::build(w, h, |x, y| test.get(x, y));
    let sxx = Sat::build(w, h, |x, y| reference.get(x, y) * reference.get(x, y));
    let syy = Sat::build(w, h, |x, y| test.get(x, y) * test.get(x, y));
    let sxy = Sat::build(w, h, |x, y| reference.get(x, y) * test.get(x, y));
    let in_region = Sat::build(w, h, |x, y| if region.includes(x, y) { 1.0 } else { 0.0 });

    let npix = (SSIM_WINDOW * SSIM_WINDOW) as f64;
    let mut total = 0.0f64;
    let mut windows = 0usize;
    for y0 in 0..=(h - SSIM_WINDOW) {
        for x0 in 0..=(w - SSIM_WINDOW) {
            if in_region.window(x0, y0, SSIM_WINDOW, SSIM_WINDOW) < 0.5 {
                continue;
            }
            let mx = sx.window(x0, y0, SSIM_WINDOW, SSIM_WINDOW) / npix;
            let my = sy.window(x0, y0, SSIM_WINDOW, SSIM_WINDOW) / npix;
            let vx = sxx.window(x0, y0, SSIM_WINDOW, SSIM_WINDOW) / npix - mx * mx;
            let vy = syy.window(x0, y0, SSIM_WINDOW, SSIM_WINDOW) / npix - my * my;
            let cov = sxy.window(x0, y0, SSIM_WINDOW, SSIM_WINDOW) / npix - mx * my;
            let s = ((2.0 * mx * my + SSIM_C1) * (2.0 * cov + SSIM_C2))
                / ((mx * mx + my * my + SSIM_C1) * (vx + vy + SSIM_C2));
            total += s;
            windows += 1;
        }
    }
    if windows == 0 {
        return Err(EvalError::EmptyRegion);
    }
    Ok(total / windows as f64)
}

/// Fills shadowed pixels by per-row linear interpolation between the nearest
/// reliable columns; one-sided gaps extend the nearest reliable value.
pub fn inpaint_baseline_interp(img: &Image, mask: &ShadowMask) -> Result<Image, EvalError> {
    if !mask.same_dims(img) {
        return Err(EvalError::DimensionMismatch(
            img.width(),
            img.height(),
            mask.width(),
            mask.height(),
        ));
    }
    if mask.is_all_reliable() {
        return Ok(img.clone());
    }
    let w = img.width();
    let mut out = img.clone();
    for y in 0..img.height() {
        let reliable: Vec<usize> = (0..w).filter(|&x| mask.is_reliable(x, y)).collect();
        if reliable.is_empty() {
            return Err(EvalError::NoReliableColumns(y));
        }
        for x in 0..w {
            if mask.is_reliable(x, y) {
                continue;
            }
            let pos = reliable.partition_point(|&r| r < x);
            let v = if pos == 0 {
                img.get(reliable[0], y)
            } else if pos == reliable.len() {
                img.get(reliable[reliable.len() - 1], y)
            } else {
                let (a, b) = (reliable[pos - 1], reliable[pos]);
                let t = (x - a) as f64 / (b - a) as f64;
                img.get(a, y) * (1.0 - t) + img.get(b, y) * t
            };
            out.set(x, y, v);
        }
    }
    Ok(out)
}

/// Default minimum spacing between synthetic shadows (twice the pipeline's
/// default context margin).
pub const DEFAULT_SHADOW_GAP: usize = 16;

/// Paints `count` non-overlapping black vertical shadows with widths drawn
/// uniformly from `[width_lo, width_hi]`. Shadows keep `min_gap` columns
/// between each other and `min_gap / 2` from the image edges. Deterministic
/// for a fixed seed.
pub fn synth_shadows(
    img: &Image,
    count: usize,
    width_lo: usize,
    width_hi: usize,
    min_gap: usize,
    seed: u64,
) -> Result<(Image, ShadowMask), EvalError> {
    if count == 0 {
        return Ok((img.clone(), ShadowMask::all_reliable(img.width(), img.height())));
    }
    if width_lo == 0 || width_lo > width_hi {
        return Err(EvalError::BadWidthRange(width_lo, width_hi));
    }
    let w = img.width();
    let infeasible = EvalError::PlacementInfeasible {
        count,
        max_width: width_hi,
        gap: min_gap,
        width: w,
    };
    if count * (width_hi + min_gap) > w {
        return Err(infeasible);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let edge = min_gap / 2;
    let mut placed: Vec<(usize, usize)> = Vec::with_capacity(count);
    for _ in 0..count {
        let width = rng.random_range(width_lo..=width_hi);
        if w < width + 2 * edge {
            return Err(infeasible);
        }
        let mut ok = false;
        for _ in 0..200 {
            let start = rng.random_range(edge..=(w - width - edge));
            let clear = placed.iter().all(|&(s, wd)| {
                start + width + min_gap <= s || s + wd + min_gap <= start
            });
            if clear {
                placed.push((start, width));
                ok = true;
                break;
            }
        }
        if !ok {
            return Err(infeasible);
        }
    }
    placed.sort_unstable();

    let mut cols = vec![true; w];
    for &(s, wd) in &placed {
        for c in cols.iter_mut().skip(s).take(wd) {
            *c = false;
        }
    }
    let mask = ShadowMask::from_columns(img.height(), &cols);
    let mut shadowed = img.clone();
    for y in 0..img.height() {
        for x in 0..w {
            if !mask.is_reliable(x, y) {
                shadowed.set(x, y, 0.0);
            }
        }
    }
    Ok((shadowed, mask))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preproc::shadow_intervals;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_image(seed: u64, w: usize, h: usize) -> Image {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Image::from_fn(w, h, |_, _| rng.random::<f64>())
    }

    #[test]
    fn psnr_identical_is_infinite() {
        let img = random_image(1, 20, 12);
        assert_eq!(psnr(&img, &img, Region::Full).unwrap(), f64::INFINITY);
    }

    #[test]
    fn psnr_uniform_difference_closed_form() {
        let a = Image::from_fn(16, 16, |_, _| 0.5);
        let b = Image::from_fn(16, 16, |_, _| 0.5 + 16.0 / 255.0);
        let got = psnr(&a, &b, Region::Full).unwrap();
        let expect = 20.0 * (255.0f64 / 16.0).log10();
        assert!((got - expect).abs() < 1e-9, "got {got}, expect {expect}");
    }

    #[test]
    fn psnr_matches_direct_summation_oracle() {
        let a = random_image(3, 33, 21);
        let b = random_image(4, 33, 21);
        let got = psnr(&a, &b, Region::Full).unwrap();
        let mut sum = 0.0;
        for (x, y) in a.data().iter().zip(b.data()) {
            sum += (x - y) * (x - y);
        }
        let expect = 10.0 * (1.0 / (sum / (33.0 * 21.0))).log10();
        assert!((got - expect).abs() < 1e-9);
        // Symmetry.
        assert_eq!(got, psnr(&b, &a, Region::Full).unwrap());
    }

    #[test]
    fn psnr_masked_region_only() {
        let a = Image::from_fn(20, 10, |_, _| 0.5);
        let mut b = a.clone();
        // Perfect inside the masked region, wrong outside: masked PSNR inf.
        for y in 0..10 {
            b.set(0, y, 0.9);
        }
        let mut cols = vec![true; 20];
        for c in 10..13 {
            cols[c] = false;
        }
        let mask = ShadowMask::from_columns(10, &cols);
        assert_eq!(psnr(&a, &b, Region::Masked(&mask)).unwrap(), f64::INFINITY);
        assert!(psnr(&a, &b, Region::Full).unwrap() < f64::INFINITY);
    }

    #[test]
    fn empty_region_rejected() {
        let a = random_image(5, 12, 12);
        let mask = ShadowMask::all_reliable(12, 12);
        assert!(matches!(
            psnr(&a, &a, Region::Masked(&mask)),
            Err(EvalError::EmptyRegion)
        ));
    }

    #[test]
    fn ssim_identical_is_one() {
        let img = random_image(6, 24, 16);
        let s = ssim(&img, &img, Region::Full).unwrap();
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ssim_constant_zero_vs_one() {
        let a = Image::from_fn(16, 16, |_, _| 0.0);
        let b = Image::from_fn(16, 16, |_, _| 1.0);
        let s = ssim(&a, &b, Region::Full).unwrap();
        let expect = SSIM_C1 / (1.0 + SSIM_C1);
        assert!((s - expect).abs() < 1e-5, "got {s}, expect {expect}");
    }

    #[test]
    fn ssim_matches_windowed_oracle() {
        let a = random_image(7, 26, 19);
        let b = random_image(8, 26, 19);
        let got = ssim(&a, &b, Region::Full).unwrap();

        // Direct per-window statistics.
        let mut total = 0.0;
        let mut n = 0;
        for y0 in 0..=(19 - 8) {
            for x0 in 0..=(26 - 8) {
                let (mut sx, mut sy, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
                for dy in 0..8 {
                    for dx in 0..8 {
                        let xv = a.get(x0 + dx, y0 + dy);
                        let yv = b.get(x0 + dx, y0 + dy);
                        sx += xv;
                        sy += yv;
                        sxx += xv * xv;
                        syy += yv * yv;
                        sxy += xv * yv;
                    }
                }
                let np = 64.0;
                let (mx, my) = (sx / np, sy / np);
                let vx = sxx / np - mx * mx;
                let vy = syy / np - my * my;
                let cov = sxy / np - mx * my;
                total += ((2.0 * mx * my + SSIM_C1) * (2.0 * cov + SSIM_C2))
                    / ((mx * mx + my * my + SSIM_C1) * (vx + vy + SSIM_C2));
                n += 1;
            }
        }
        let expect = total / n as f64;
        assert!((got - expect).abs() < 1e-9);
        // Symmetry.
        let swapped = ssim(&b, &a, Region::Full).unwrap();
        assert!((got - swapped).abs() < 1e-12);
    }

    #[test]
    fn baseline_interp_cases() {
        let img = Image::from_fn(5, 3, |x, _| match x {
            0 => 0.2,
            4 => 0.4,
            _ => 0.0,
        });

        // Identity on all-reliable masks.
        let all = ShadowMask::all_reliable(5, 3);
        assert_eq!(inpaint_baseline_interp(&img, &all).unwrap(), img);

        // Single shadowed column midway between 0.2 and 0.4.
        let cols = vec![true, true, false, true, true];
        let one = ShadowMask::from_columns(3, &cols);
        let img1 = Image::from_fn(5, 3, |x, _| if x == 2 { 0.0 } else { 0.2 + 0.05 * x as f64 });
        let out = inpaint_baseline_interp(&img1, &one).unwrap();
        assert!((out.get(2, 1) - 0.3).abs() < 1e-12);

        // 3-wide shadow between 0.0 and 0.4 -> ramp 0.1, 0.2, 0.3.
        let cols = vec![true, false, false, false, true];
        let m3 = ShadowMask::from_columns(3, &cols);
        let img3 = Image::from_fn(5, 3, |x, _| if x == 0 { 0.0 } else if x == 4 { 0.4 } else { 0.9 });
        let out = inpaint_baseline_interp(&img3, &m3).unwrap();
        for (i, expect) in [(1, 0.1), (2, 0.2), (3, 0.3)] {
            assert!((out.get(i, 0) - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn baseline_rejects_fully_shadowed_row() {
        let img = Image::from_fn(4, 2, |_, _| 0.5);
        let mask = ShadowMask::from_columns(2, &[false, false, false, false]);
        assert!(matches!(
            inpaint_baseline_interp(&img, &mask),
            Err(EvalError::NoReliableColumns(0))
        ));
    }

    #[test]
    fn synth_zero_count_is_identity() {
        let img = random_image(9, 40, 20);
        let (out, mask) = synth_shadows(&img, 0, 7, 24, 16, 5).unwrap();
        assert_eq!(out, img);
        assert!(mask.is_all_reliable());
    }

    #[test]
    fn synth_deterministic_for_seed() {
        let img = random_image(10, 200, 40);
        let a = synth_shadows(&img, 3, 7, 24, 16, 123).unwrap();
        let b = synth_shadows(&img, 3, 7, 24, 16, 123).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
        let c = synth_shadows(&img, 3, 7, 24, 16, 124).unwrap();
        assert!(c.1 != a.1 || c.0 != a.0);
    }

    #[test]
    fn synth_masks_exactly_the_painted_columns() {
        let img = Image::from_fn(300, 30, |_, _| 0.5);
        let (out, mask) = synth_shadows(&img, 4, 7, 24, 16, 77).unwrap();
        let intervals = shadow_intervals(&mask).unwrap();
        assert_eq!(intervals.len(), 4);
        let total: usize = intervals.iter().map(|&(_, w)| w).sum();
        assert_eq!(mask.shadowed_count(), total * 30);
        // Gaps respected and shadows black.
        for win in intervals.windows(2) {
            let (s0, w0) = win[0];
            let (s1, _) = win[1];
            assert!(s1 >= s0 + w0 + 16);
        }
        for y in 0..30 {
            for x in 0..300 {
                if mask.is_reliable(x, y) {
                    assert_eq!(out.get(x, y), 0.5);
                } else {
                    assert_eq!(out.get(x, y), 0.0);
                }
            }
        }
    }

    #[test]
    fn synth_infeasible_rejected() {
        let img = Image::from_fn(100, 10, |_, _| 0.5);
        assert!(matches!(
            synth_shadows(&img, 4, 20, 24, 16, 1),
            Err(EvalError::PlacementInfeasible { .. })
        ));
    }
}
