//! B-scan preprocessing: brightest-layer (membrane) detection, robust LOESS
//! fitting of its depth profile, column flattening, and shadow-mask
//! construction.

pub mod loess;

use thiserror::Error;

use crate::raster::{Image, ShadowMask};
use loess::LoessError;

#[derive(Debug, Error)]
pub enum PreprocError {
    #[error(transparent)]
    Loess(#[from] LoessError),
    #[error("dimension mismatch: image is {0}x{1}, record covers {2} columns")]
    DimensionMismatch(usize, usize, usize),
    #[error("mask is not column-constant at column {0}")]
    NonColumnarMask(usize),
    #[error("profile has no fitted curve; run loess_fit first")]
    MissingFit,
    #[error("target depth {0} outside image height {1}")]
    BadTargetDepth(usize, usize),
}

/// Per-column depth profile of the brightest retinal layer.
#[derive(Debug, Clone)]
pub struct BmProfile {
    /// Row index of the maximum-intensity pixel per column.
    pub depths: Vec<usize>,
    /// Columns whose every pixel sits at or below the darkness floor; their
    /// depth is interpolated from neighbors.
    pub degenerate: Vec<bool>,
    /// Smoothed depth per column (empty until [`loess_fit`] runs).
    pub fitted: Vec<f64>,
    /// Bisquare robustness weight per column from the final LOESS pass.
    pub robust_weights: Vec<f64>,
}

impl BmProfile {
    pub fn width(&self) -> usize {
        self.depths.len()
    }
}

/// Per-column integer shifts applied by [`flatten`].
#[derive(Debug, Clone)]
pub struct FlattenRecord {
    pub shifts: Vec<i64>,
    pub target_depth: usize,
}

/// Tuning knobs for [`detect_shadows`].
#[derive(Debug, Clone)]
pub struct ShadowParams {
    /// Columns with robust weight below this are shadowed.
    pub weight_min: f64,
    /// Columns whose tissue mean falls below this fraction of the rolling
    /// median are shadowed.
    pub intensity_factor: f64,
    /// Half-height of the tissue band around the fitted depth used for the
    /// column mean.
    pub tissue_half_height: usize,
    /// Window (columns) of the rolling median of column means.
    pub median_window: usize,
    /// Dilation radius; merges nearby shadowed columns and broadens every
    /// detected interval by this many pixels per side.
    pub dilation: usize,
}

impl Default for ShadowParams {
    fn default() -> Self {
        ShadowParams {
            weight_min: 0.2,
            intensity_factor: 0.7,
            tissue_half_height: 100,
            median_window: 51,
            dilation: 2,
        }
    }
}

/// Default LOESS span over image width.
pub const DEFAULT_LOESS_SPAN: f64 = 0.15;
/// Default number of bisquare reweighting passes.
pub const DEFAULT_ROBUST_ITERS: usize = 2;
/// Columns whose maximum intensity is at or below this are degenerate.
pub const DEFAULT_DARKNESS_FLOOR: f64 = 1.0 / 255.0;

/// Finds the brightest pixel per column; ties resolve to the smallest row.
/// Columns at or below `darkness_floor` everywhere are flagged degenerate
/// and given depths interpolated from their neighbors.
pub fn detect_bm(img: &Image, darkness_floor: f64) -> BmProfile {
    let w = img.width();
    let h = img.height();
    let mut depths = vec![0usize; w];
    let mut degenerate = vec![false; w];
    for x in 0..w {
        let mut best = f64::NEG_INFINITY;
        let mut best_row = 0;
        for y in 0..h {
            let v = img.get(x, y);
            if v > best {
                best = v;
                best_row = y;
            }
        }
        if best <= darkness_floor {
            degenerate[x] = true;
        }
        depths[x] = best_row;
    }
    interpolate_degenerate(&mut depths, &degenerate);
    BmProfile {
        depths,
        degenerate,
        fitted: Vec::new(),
        robust_weights: Vec::new(),
    }
}

fn interpolate_degenerate(depths: &mut [usize], degenerate: &[bool]) {
    let anchors: Vec<usize> = (0..depths.len()).filter(|&i| !degenerate[i]).collect();
    if anchors.is_empty() {
        return;
    }
    for i in 0..depths.len() {
        if !degenerate[i] {
            continue;
        }
        let pos = anchors.partition_point(|&a| a < i);
        let val = if pos == 0 {
            depths[anchors[0]] as f64
        } else if pos == anchors.len() {
            depths[anchors[anchors.len() - 1]] as f64
        } else {
            let (a, b) = (anchors[pos - 1], anchors[pos]);
            let t = (i - a) as f64 / (b - a) as f64;
            depths[a] as f64 + t * (depths[b] as f64 - depths[a] as f64)
        };
        depths[i] = val.round().max(0.0) as usize;
    }
}

/// Smooths the depth profile with robust LOESS. Degenerate columns are
/// excluded as data points and carry robust weight 0.
pub fn loess_fit(
    profile: &BmProfile,
    span: f64,
    robust_iters: usize,
) -> Result<BmProfile, PreprocError> {
    let values: Vec<f64> = profile.depths.iter().map(|&d| d as f64).collect();
    let valid: Vec<bool> = profile.degenerate.iter().map(|&d| !d).collect();
    let fit = loess::fit_series(&values, &valid, span, robust_iters)?;
    Ok(BmProfile {
        depths: profile.depths.clone(),
        degenerate: profile.degenerate.clone(),
        fitted: fit.fitted,
        robust_weights: fit.robust_weights,
    })
}

/// Marks shadowed columns. A column is shadowed when its robust weight falls
/// below `weight_min` or its tissue mean drops below `intensity_factor`
/// times the rolling median of column means; the flags are then dilated so
/// every interval gains `dilation` pixels of margin per side, and shadowed
/// columns are masked over the full height.
pub fn detect_shadows(img: &Image, profile: &BmProfile, params: &ShadowParams) -> ShadowMask {
    let w = img.width();
    let h = img.height();
    assert_eq!(profile.width(), w, "profile width mismatch");
    assert!(!profile.fitted.is_empty(), "profile must be fitted");

    // Mean intensity of the tissue band around the fitted depth, per column.
    let mut col_means = vec![0.0f64; w];
    for x in 0..w {
        let center = profile.fitted[x].round();
        let lo = (center - params.tissue_half_height as f64).max(0.0) as usize;
        let hi = ((center + params.tissue_half_height as f64) as usize).min(h - 1);
        let mut sum = 0.0;
        for y in lo..=hi {
            sum += img.get(x, y);
        }
        col_means[x] = sum / (hi - lo + 1) as f64;
    }

    let rolling = rolling_median(&col_means, params.median_window);

    let mut shadowed = vec![false; w];
    for x in 0..w {
        let weight_low = profile.robust_weights[x] < params.weight_min;
        let intensity_low = col_means[x] < params.intensity_factor * rolling[x];
        shadowed[x] = weight_low || intensity_low;
    }

    let dilated = dilate(&shadowed, params.dilation);
    let cols: Vec<bool> = dilated.iter().map(|&s| !s).collect();
    ShadowMask::from_columns(h, &cols)
}

fn rolling_median(values: &[f64], window: usize) -> Vec<f64> {
    let n = values.len();
    let half = window.max(1) / 2;
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half).min(n - 1);
            let mut v: Vec<f64> = values[lo..=hi].to_vec();
            v.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let m = v.len() / 2;
            if v.len() % 2 == 1 {
                v[m]
            } else {
                0.5 * (v[m - 1] + v[m])
            }
        })
        .collect()
}

fn dilate(flags: &[bool], radius: usize) -> Vec<bool> {
    let n = flags.len();
    let mut out = vec![false; n];
    for i in 0..n {
        if flags[i] {
            let lo = i.saturating_sub(radius);
            let hi = (i + radius).min(n - 1);
            for o in out.iter_mut().take(hi + 1).skip(lo) {
                *o = true;
            }
        }
    }
    out
}

/// Shifts each column so the fitted depth lands on `target_depth`. Pixels
/// shifted out of frame are discarded; vacated pixels are filled with 0.
pub fn flatten(
    img: &Image,
    profile: &BmProfile,
    target_depth: usize,
) -> Result<(Image, FlattenRecord), PreprocError> {
    if profile.fitted.is_empty() {
        return Err(PreprocError::MissingFit);
    }
    if target_depth >= img.height() {
        return Err(PreprocError::BadTargetDepth(target_depth, img.height()));
    }
    let shifts: Vec<i64> = profile
        .fitted
        .iter()
        .map(|&f| f.round() as i64 - target_depth as i64)
        .collect();
    let out = shift_columns(img, &shifts);
    Ok((
        out,
        FlattenRecord {
            shifts,
            target_depth,
        },
    ))
}

/// Applies the negated shifts of `record`; inverse of [`flatten`] on all
/// retained pixels.
pub fn unflatten(img: &Image, record: &FlattenRecord) -> Result<Image, PreprocError> {
    if record.shifts.len() != img.width() {
        return Err(PreprocError::DimensionMismatch(
            img.width(),
            img.height(),
            record.shifts.len(),
        ));
    }
    let neg: Vec<i64> = record.shifts.iter().map(|&s| -s).collect();
    Ok(shift_columns(img, &neg))
}

fn shift_columns(img: &Image, shifts: &[i64]) -> Image {
    let w = img.width();
    let h = img.height();
    let mut out = Image::zeros(w, h);
    for x in 0..w {
        let s = shifts[x];
        for y in 0..h {
            let src = y as i64 + s;
            if src >= 0 && (src as usize) < h {
                out.set(x, y, img.get(x, src as usize));
            }
        }
    }
    out
}

/// Maximal runs of shadowed columns as `(start, width)` pairs, sorted by
/// start column.
pub fn shadow_intervals(mask: &ShadowMask) -> Result<Vec<(usize, usize)>, PreprocError> {
    let w = mask.width();
    for x in 0..w {
        let first = mask.is_reliable(x, 0);
        for y in 1..mask.height() {
            if mask.is_reliable(x, y) != first {
                return Err(PreprocError::NonColumnarMask(x));
            }
        }
    }
    let cols = mask.column_flags();
    Ok(runs_of_shadow(&cols))
}

/// Runs of `false` (shadowed) in per-column reliability flags.
pub fn runs_of_shadow(cols: &[bool]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = None;
    for (x, &reliable) in cols.iter().enumerate() {
        match (reliable, start) {
            (false, None) => start = Some(x),
            (true, Some(s)) => {
                out.push((s, x - s));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((s, cols.len() - s));
    }
    out
}

/// Formats intervals as `start,width` CSV lines.
pub fn intervals_to_csv(intervals: &[(usize, usize)]) -> String {
    let mut s = String::from("start,width\n");
    for (start, width) in intervals {
        s.push_str(&format!("{start},{width}\n"));
    }
    s
}
