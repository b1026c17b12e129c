//! End-to-end inpainting of a flattened image: shadow intervals are routed
//! by width into a direct dictionary-inpainting branch (narrow) or a
//! downsample / inpaint / upsample / regularize branch (wide); clean columns
//! pass through untouched.

pub mod resample;

use thiserror::Error;

use crate::patch::{PatchError, PatchGrid};
use crate::preproc;
use crate::raster::{Image, Rect, ShadowMask};
use crate::sparse::{inpaint_strip, regularize_strip, Dictionary};
use crate::sparse::strip::StripError;

pub use resample::{downsample, downsample_mask, upsample, Upsampler, UpsamplerError, UPSAMPLER_ENV};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("mask problem: {0}")]
    Mask(String),
    #[error(transparent)]
    Strip(#[from] StripError),
    #[error(transparent)]
    Patch(#[from] PatchError),
    #[error(transparent)]
    Upsampler(#[from] UpsamplerError),
}

/// Tunable parameters of the inpainting pipeline.
#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub patch_w: usize,
    pub patch_h: usize,
    /// Sparsity level L of every pursuit.
    pub sparsity: usize,
    /// Dictionary size M used when training.
    pub n_atoms: usize,
    /// Downsample factor N of the wide branch.
    pub downsample: usize,
    /// Shadows at least this wide go to the multi-scale branch.
    pub width_threshold: usize,
    pub stride_x: usize,
    pub stride_y: usize,
    /// Reliable columns included on each side of a shadow strip.
    pub context_margin: usize,
    /// Widest shadow the configuration promises to handle.
    pub max_shadow_width: usize,
    /// Route every shadow through the narrow branch (multi-scale ablation).
    pub force_narrow: bool,
    pub upsampler: Upsampler,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            patch_w: 8,
            patch_h: 8,
            sparsity: 2,
            n_atoms: 128,
            downsample: 4,
            width_threshold: 8,
            stride_x: 1,
            stride_y: 1,
            context_margin: 8,
            max_shadow_width: 24,
            force_narrow: false,
            upsampler: Upsampler::Bicubic,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |msg: String| Err(PipelineError::Config(msg));
        if self.patch_w == 0 || self.patch_h == 0 {
            return bad("patch dimensions must be positive".into());
        }
        if self.sparsity == 0 {
            return bad("sparsity must be at least 1".into());
        }
        if self.downsample == 0 {
            return bad("downsample factor must be at least 1".into());
        }
        if self.stride_x == 0 || self.stride_y == 0 {
            return bad("stride must be at least 1".into());
        }
        if self.width_threshold == 0 {
            return bad("width threshold must be at least 1".into());
        }
        if !self.force_narrow {
            let reduced = self.max_shadow_width.div_ceil(self.downsample) + 2;
            if reduced > self.width_threshold {
                return bad(format!(
                    "max shadow width {} downsampled by {} still spans {} columns, \
                     above the width threshold {}",
                    self.max_shadow_width, self.downsample, reduced, self.width_threshold
                ));
            }
        }
        Ok(())
    }
}

/// Routing class of a strip.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StripClass {
    Clean,
    Narrow,
    Wide,
}

/// A contiguous column range handled as one unit.
#[derive(Debug, Clone)]
pub struct Strip {
    pub start: usize,
    pub end: usize,
    pub class: StripClass,
    /// Shadow intervals inside this strip, in absolute columns.
    pub shadows: Vec<(usize, usize)>,
}

impl Strip {
    pub fn width(&self) -> usize {
        self.end - self.start
    }
}

/// Column partition of an image into clean and shadow strips.
#[derive(Debug, Clone)]
pub struct StripPlan {
    pub strips: Vec<Strip>,
}

impl StripPlan {
    pub fn count(&self, class: StripClass) -> usize {
        self.strips.iter().filter(|s| s.class == class).count()
    }
}

/// Splits the image columns into clean strips and shadow strips. Every
/// shadow interval is padded by `context_margin` reliable columns per side
/// (clipped at the edges); overlapping shadow strips merge and take the
/// wider class.
pub fn route_strips(mask: &ShadowMask, cfg: &PipelineConfig) -> Result<StripPlan, PipelineError> {
    let intervals =
        preproc::shadow_intervals(mask).map_err(|e| PipelineError::Mask(e.to_string()))?;
    let width = mask.width();
    let classify = |w: usize| {
        if cfg.force_narrow || w < cfg.width_threshold {
            StripClass::Narrow
        } else {
            StripClass::Wide
        }
    };

    let mut shadow_strips: Vec<Strip> = Vec::new();
    for (s, w) in intervals {
        let start = s.saturating_sub(cfg.context_margin);
        let end = (s + w + cfg.context_margin).min(width);
        let class = classify(w);
        match shadow_strips.last_mut() {
            Some(prev) if start < prev.end => {
                prev.end = prev.end.max(end);
                if class == StripClass::Wide {
                    prev.class = StripClass::Wide;
                }
                prev.shadows.push((s, w));
            }
            _ => shadow_strips.push(Strip {
                start,
                end,
                class,
                shadows: vec![(s, w)],
            }),
        }
    }

    let mut strips = Vec::new();
    let mut cursor = 0usize;
    for s in shadow_strips {
        if s.start > cursor {
            strips.push(Strip {
                start: cursor,
                end: s.start,
                class: StripClass::Clean,
                shadows: Vec::new(),
            });
        }
        cursor = s.end;
        strips.push(s);
    }
    if cursor < width {
        strips.push(Strip {
            start: cursor,
            end: width,
            class: StripClass::Clean,
            shadows: Vec::new(),
        });
    }
    Ok(StripPlan { strips })
}

/// Result of [`inpaint_image`] with per-run diagnostics.
#[derive(Debug, Clone)]
pub struct InpaintOutcome {
    pub image: Image,
    /// Patches that fell back to a row-interpolated fill for coding.
    pub fallback_patches: usize,
    pub clean_strips: usize,
    pub narrow_strips: usize,
    pub wide_strips: usize,
}

fn check_scale_tag(dict: &Dictionary, expected: u32, role: &str) -> Result<(), PipelineError> {
    if dict.scale_tag() != expected {
        return Err(PipelineError::Config(format!(
            "{role} dictionary has scale tag {}, expected {expected}",
            dict.scale_tag()
        )));
    }
    Ok(())
}

/// Inpaints every shadowed column of a flattened image.
///
/// Clean strips are copied verbatim. Narrow strips run masked pursuit
/// against `dict_full`. Wide strips are downsampled by the configured
/// factor, inpainted against `dict_down`, upsampled back, center-cropped to
/// the strip rectangle, and regularized against `dict_full`. Pixels marked
/// reliable in `mask` are bit-identical between input and output.
pub fn inpaint_image(
    img: &Image,
    mask: &ShadowMask,
    cfg: &PipelineConfig,
    dict_full: &Dictionary,
    dict_down: Option<&Dictionary>,
) -> Result<InpaintOutcome, PipelineError> {
    cfg.validate()?;
    if !mask.same_dims(img) {
        return Err(PipelineError::Mask(format!(
            "mask is {}x{}, image is {}x{}",
            mask.width(),
            mask.height(),
            img.width(),
            img.height()
        )));
    }
    check_scale_tag(dict_full, 1, "full-resolution")?;

    let plan = route_strips(mask, cfg)?;
    let mut outcome = InpaintOutcome {
        image: img.clone(),
        fallback_patches: 0,
        clean_strips: plan.count(StripClass::Clean),
        narrow_strips: plan.count(StripClass::Narrow),
        wide_strips: plan.count(StripClass::Wide),
    };
    if outcome.narrow_strips + outcome.wide_strips == 0 {
        return Ok(outcome);
    }
    let upsampler = cfg.upsampler.resolve_env();

    let h = img.height();
    for strip in &plan.strips {
        if strip.class == StripClass::Clean {
            continue;
        }
        let rect = Rect::new(strip.start, 0, strip.width(), h);
        let sub = img.crop(rect);
        let sub_mask = mask.crop(rect);

        let result = match strip.class {
            StripClass::Narrow => {
                let grid = PatchGrid::cover(
                    sub.width(),
                    sub.height(),
                    cfg.patch_w,
                    cfg.patch_h,
                    cfg.stride_x,
                    cfg.stride_y,
                )?;
                let r = inpaint_strip(&sub, &sub_mask, dict_full, &grid, cfg.sparsity)?;
                outcome.fallback_patches += r.fallback_patches;
                r.image
            }
            StripClass::Wide => {
                let dict_down = dict_down.ok_or_else(|| {
                    PipelineError::Config(
                        "wide shadow present but no downsampled dictionary supplied".into(),
                    )
                })?;
                check_scale_tag(dict_down, cfg.downsample as u32, "downsampled")?;

                let small = downsample(&sub, cfg.downsample);
                let small_mask = downsample_mask(&sub_mask, cfg.downsample);
                let widest = preproc::runs_of_shadow(&small_mask.column_flags())
                    .into_iter()
                    .map(|(_, w)| w)
                    .max()
                    .unwrap_or(0);
                if widest >= cfg.width_threshold {
                    return Err(PipelineError::Config(format!(
                        "shadow still spans {widest} columns after downsampling by {}",
                        cfg.downsample
                    )));
                }

                let grid_low = PatchGrid::cover(
                    small.width(),
                    small.height(),
                    cfg.patch_w,
                    cfg.patch_h,
                    cfg.stride_x,
                    cfg.stride_y,
                )?;
                let r = inpaint_strip(&small, &small_mask, dict_down, &grid_low, cfg.sparsity)?;
                outcome.fallback_patches += r.fallback_patches;

                let up = upsample(&r.image, cfg.downsample, &upsampler)?;
                let cropped = center_crop(&up, sub.width(), sub.height());

                let grid_full = PatchGrid::cover(
                    sub.width(),
                    sub.height(),
                    cfg.patch_w,
                    cfg.patch_h,
                    cfg.stride_x,
                    cfg.stride_y,
                )?;
                let mut reg =
                    regularize_strip(&cropped, &sub_mask, dict_full, &grid_full, cfg.sparsity)?;
                // Regularization restored from the upsampled strip; the true
                // originals come from the input.
                for y in 0..h {
                    for x in 0..sub.width() {
                        if sub_mask.is_reliable(x, y) {
                            reg.set(x, y, sub.get(x, y));
                        }
                    }
                }
                reg
            }
            StripClass::Clean => unreachable!(),
        };
        outcome.image.blit(&result, strip.start, 0);
    }
    Ok(outcome)
}

fn center_crop(img: &Image, w: usize, h: usize) -> Image {
    assert!(img.width() >= w && img.height() >= h);
    let x0 = (img.width() - w) / 2;
    let y0 = (img.height() - h) / 2;
    img.crop(Rect::new(x0, y0, w, h))
}
