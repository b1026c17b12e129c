//! Patch-wise inpainting (masked coding + reconstruction) and regularizing
//! (unmasked re-coding) of an image strip.

use nalgebra::DVector;
use rayon::prelude::*;
use thiserror::Error;

use crate::patch::{aggregate_patches, read_patch, PatchError, PatchGrid};
use crate::raster::{Image, Rect, ShadowMask};

use super::{masked_omp, omp, reconstruct, Dictionary, SparseError};

#[derive(Debug, Error)]
pub enum StripError {
    #[error("strip is {0}x{1} but mask is {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
    #[error("grid patch {0}x{1} does not match dictionary atom length {2}")]
    AtomShape(usize, usize, usize),
    #[error(transparent)]
    Sparse(#[from] SparseError),
    #[error(transparent)]
    Patch(#[from] PatchError),
    #[error("baseline fill failed: {0}")]
    Baseline(String),
}

/// Inpainted strip plus diagnostics.
#[derive(Debug, Clone)]
pub struct StripResult {
    pub image: Image,
    /// Patches whose kept rows fell below the pursuit support floor and were
    /// re-coded from a row-interpolated fill instead.
    pub fallback_patches: usize,
}

fn check_dims(
    strip: &Image,
    mask: &ShadowMask,
    dict: &Dictionary,
    grid: &PatchGrid,
) -> Result<(), StripError> {
    if !mask.same_dims(strip) {
        return Err(StripError::DimensionMismatch(
            strip.width(),
            strip.height(),
            mask.width(),
            mask.height(),
        ));
    }
    if grid.atom_len() != dict.atom_len() {
        return Err(StripError::AtomShape(
            grid.patch_w,
            grid.patch_h,
            dict.atom_len(),
        ));
    }
    Ok(())
}

fn mask_patch(mask: &ShadowMask, grid: &PatchGrid, px: usize, py: usize) -> Vec<bool> {
    let mut keep = Vec::with_capacity(grid.atom_len());
    for r in 0..grid.patch_h {
        for c in 0..grid.patch_w {
            keep.push(mask.is_reliable(px + c, py + r));
        }
    }
    keep
}

/// Restores `source` values wherever `mask` marks the pixel reliable.
fn restore_reliable(target: &mut Image, source: &Image, mask: &ShadowMask) {
    for y in 0..target.height() {
        for x in 0..target.width() {
            if mask.is_reliable(x, y) {
                target.set(x, y, source.get(x, y));
            }
        }
    }
}

/// Inpaints the masked pixels of a strip.
///
/// Every patch containing a masked pixel is coded against the dictionary
/// with its masked rows removed and replaced by its reconstruction; clean
/// patches pass through as their own reconstruction. Overlaps aggregate by
/// unweighted mean, then reliable pixels are restored verbatim so only
/// masked pixels take inpainted values.
pub fn inpaint_strip(
    strip: &Image,
    mask: &ShadowMask,
    dict: &Dictionary,
    grid: &PatchGrid,
    sparsity: usize,
) -> Result<StripResult, StripError> {
    check_dims(strip, mask, dict, grid)?;
    if mask.is_all_reliable() {
        return Ok(StripResult {
            image: strip.clone(),
            fallback_patches: 0,
        });
    }

    // Row-interpolated fill for patches without enough reliable support;
    // built lazily since most strips never need it.
    let needs_fallback = grid.positions.iter().any(|&(px, py)| {
        let keep = mask_patch(mask, grid, px, py);
        let kept = keep.iter().filter(|&&k| k).count();
        kept < super::support_floor(sparsity) && kept < keep.len()
    });
    let fill = if needs_fallback {
        Some(
            crate::eval::inpaint_baseline_interp(strip, mask)
                .map_err(|e| StripError::Baseline(e.to_string()))?,
        )
    } else {
        None
    };

    let region = strip.bounds();
    let coded: Vec<(((usize, usize), DVector<f64>), bool)> = grid
        .positions
        .par_iter()
        .map(|&(px, py)| {
            let y = read_patch(strip, region, grid, px, py);
            let keep = mask_patch(mask, grid, px, py);
            if keep.iter().all(|&k| k) {
                return (((px, py), y), false);
            }
            match masked_omp(dict, &y, &keep, sparsity) {
                Ok(code) => {
                    let recon = reconstruct(dict, &code).expect("indices from pursuit");
                    (((px, py), recon), false)
                }
                Err(SparseError::InsufficientSupport { .. }) => {
                    let fill = fill.as_ref().expect("fallback fill precomputed");
                    let mut y_fill = y.clone();
                    for r in 0..grid.patch_h {
                        for c in 0..grid.patch_w {
                            let i = r * grid.patch_w + c;
                            if !keep[i] {
                                y_fill[i] = fill.get(px + c, py + r);
                            }
                        }
                    }
                    let code = omp(dict, &y_fill, sparsity).expect("validated dims");
                    let recon = reconstruct(dict, &code).expect("indices from pursuit");
                    (((px, py), recon), true)
                }
                Err(e) => panic!("unexpected pursuit failure: {e}"),
            }
        })
        .collect();

    let fallback_patches = coded.iter().filter(|(_, fb)| *fb).count();
    let patches: Vec<((usize, usize), DVector<f64>)> =
        coded.into_iter().map(|(p, _)| p).collect();
    let mut image = aggregate_patches(
        &patches,
        grid.patch_w,
        grid.patch_h,
        Rect::new(0, 0, strip.width(), strip.height()),
    )?;
    restore_reliable(&mut image, strip, mask);
    Ok(StripResult {
        image,
        fallback_patches,
    })
}

/// Re-codes every patch that contains inpainted pixels (mask bit 0) against
/// the full-resolution dictionary and replaces it by its reconstruction;
/// untouched patches pass through. Reliable pixels are restored verbatim
/// from the input strip.
pub fn regularize_strip(
    strip: &Image,
    mask: &ShadowMask,
    dict: &Dictionary,
    grid: &PatchGrid,
    sparsity: usize,
) -> Result<Image, StripError> {
    check_dims(strip, mask, dict, grid)?;
    if mask.is_all_reliable() {
        return Ok(strip.clone());
    }

    let region = strip.bounds();
    let patches: Vec<((usize, usize), DVector<f64>)> = grid
        .positions
        .par_iter()
        .map(|&(px, py)| {
            let y = read_patch(strip, region, grid, px, py);
            let keep = mask_patch(mask, grid, px, py);
            if keep.iter().all(|&k| k) {
                return ((px, py), y);
            }
            let code = omp(dict, &y, sparsity).expect("validated dims");
            let recon = reconstruct(dict, &code).expect("indices from pursuit");
            ((px, py), recon)
        })
        .collect();

    let mut image = aggregate_patches(
        &patches,
        grid.patch_w,
        grid.patch_h,
        Rect::new(0, 0, strip.width(), strip.height()),
    )?;
    restore_reliable(&mut image, strip, mask);
    Ok(image)
}
