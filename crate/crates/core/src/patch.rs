//! Overlapping patch grids: extraction from a region and overlap-averaged
//! aggregation back into an image.
//!
//! Vectorization order is fixed to row-major within a patch: pixel
//! (row r, col c) maps to index `r * patch_w + c`.

use nalgebra::DVector;
use thiserror::Error;

use crate::raster::{Image, Rect};

#[derive(Debug, Error)]
pub enum PatchError {
    #[error("region {rw}x{rh} smaller than one {pw}x{ph} patch")]
    RegionTooSmall {
        rw: usize,
        rh: usize,
        pw: usize,
        ph: usize,
    },
    #[error("region out of image bounds")]
    RegionOutOfBounds,
    #[error("patch at ({0}, {1}) lies outside the target shape")]
    PatchOutOfBounds(usize, usize),
    #[error("pixel ({0}, {1}) covered by no patch")]
    CoverageGap(usize, usize),
}

/// Placement of overlapping patches over a rectangular region.
///
/// Positions are relative to the region's top-left corner plus `origin`.
/// The last patch along each axis is snapped flush to the region boundary so
/// every pixel is covered without padding.
#[derive(Debug, Clone)]
pub struct PatchGrid {
    pub patch_w: usize,
    pub patch_h: usize,
    pub stride_x: usize,
    pub stride_y: usize,
    pub origin: (usize, usize),
    pub positions: Vec<(usize, usize)>,
}

fn axis_positions(extent: usize, patch: usize, stride: usize) -> Vec<usize> {
    let last = extent - patch;
    let mut xs: Vec<usize> = (0..=last).step_by(stride.max(1)).collect();
    if *xs.last().unwrap() != last {
        xs.push(last);
    }
    xs
}

impl PatchGrid {
    /// Grid covering a `region_w` x `region_h` region with the given patch
    /// size and stride.
    pub fn cover(
        region_w: usize,
        region_h: usize,
        patch_w: usize,
        patch_h: usize,
        stride_x: usize,
        stride_y: usize,
    ) -> Result<Self, PatchError> {
        if region_w < patch_w || region_h < patch_h || patch_w == 0 || patch_h == 0 {
            return Err(PatchError::RegionTooSmall {
                rw: region_w,
                rh: region_h,
                pw: patch_w,
                ph: patch_h,
            });
        }
        let xs = axis_positions(region_w, patch_w, stride_x);
        let ys = axis_positions(region_h, patch_h, stride_y);
        let mut positions = Vec::with_capacity(xs.len() * ys.len());
        for &y in &ys {
            for &x in &xs {
                positions.push((x, y));
            }
        }
        Ok(PatchGrid {
            patch_w,
            patch_h,
            stride_x,
            stride_y,
            origin: (0, 0),
            positions,
        })
    }

    pub fn atom_len(&self) -> usize {
        self.patch_w * self.patch_h
    }
}

/// Reads the patch at region-relative position `(px, py)` as a row-major
/// vector of length `patch_w * patch_h`.
pub fn read_patch(img: &Image, region: Rect, grid: &PatchGrid, px: usize, py: usize) -> DVector<f64> {
    let x0 = region.x + grid.origin.0 + px;
    let y0 = region.y + grid.origin.1 + py;
    let mut v = DVector::zeros(grid.atom_len());
    for r in 0..grid.patch_h {
        for c in 0..grid.patch_w {
            v[r * grid.patch_w + c] = img.get(x0 + c, y0 + r);
        }
    }
    v
}

/// Extracts one vector per grid position from `region` of `img`.
pub fn extract_patches(
    img: &Image,
    region: Rect,
    grid: &PatchGrid,
) -> Result<Vec<((usize, usize), DVector<f64>)>, PatchError> {
    if !img.bounds().contains(&region) {
        return Err(PatchError::RegionOutOfBounds);
    }
    if region.w < grid.patch_w || region.h < grid.patch_h {
        return Err(PatchError::RegionTooSmall {
            rw: region.w,
            rh: region.h,
            pw: grid.patch_w,
            ph: grid.patch_h,
        });
    }
    Ok(grid
        .positions
        .iter()
        .map(|&(px, py)| ((px, py), read_patch(img, region, grid, px, py)))
        .collect())
}

/// Reassembles patches into a `shape.w` x `shape.h` image; each pixel is the
/// unweighted mean of all patch values covering it.
///
/// The mean is accumulated incrementally (`m += (x - m) / n`) so overlapping
/// patches that agree on a pixel reproduce that value bit-exactly.
pub fn aggregate_patches(
    patches: &[((usize, usize), DVector<f64>)],
    patch_w: usize,
    patch_h: usize,
    shape: Rect,
) -> Result<Image, PatchError> {
    let mut mean = vec![0.0f64; shape.w * shape.h];
    let mut count = vec![0u32; shape.w * shape.h];
    for ((px, py), v) in patches {
        if px + patch_w > shape.w || py + patch_h > shape.h {
            return Err(PatchError::PatchOutOfBounds(*px, *py));
        }
        debug_assert_eq!(v.len(), patch_w * patch_h);
        for r in 0..patch_h {
            for c in 0..patch_w {
                let idx = (py + r) * shape.w + (px + c);
                count[idx] += 1;
                let x = v[r * patch_w + c];
                mean[idx] += (x - mean[idx]) / count[idx] as f64;
            }
        }
    }
    if let Some(i) = count.iter().position(|&n| n == 0) {
        return Err(PatchError::CoverageGap(i % shape.w, i / shape.w));
    }
    for m in &mut mean {
        *m = m.clamp(0.0, 1.0);
    }
    Image::from_vec(shape.w, shape.h, mean).map_err(|_| PatchError::CoverageGap(0, 0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid(rw: usize, rh: usize, pw: usize, ph: usize, s: usize) -> PatchGrid {
        PatchGrid::cover(rw, rh, pw, ph, s, s).unwrap()
    }

    #[test]
    fn single_cell_grid() {
        let g = grid(8, 8, 8, 8, 1);
        assert_eq!(g.positions, vec![(0, 0)]);
    }

    #[test]
    fn stride_one_positions() {
        let g = grid(10, 8, 8, 8, 1);
        assert_eq!(g.positions, vec![(0, 0), (1, 0), (2, 0)]);
    }

    #[test]
    fn stride_four_flush_exact() {
        // 12x12 region, 8x8 patch, stride 4: {0,4} x {0,4}; 4+8=12 so the
        // flush rule adds nothing.
        let g = grid(12, 12, 8, 8, 4);
        assert_eq!(g.positions, vec![(0, 0), (4, 0), (0, 4), (4, 4)]);
    }

    #[test]
    fn flush_rule_snaps_last_patch() {
        let g = grid(13, 8, 8, 8, 4);
        let xs: Vec<usize> = g.positions.iter().map(|p| p.0).collect();
        assert_eq!(xs, vec![0, 4, 5]);
    }

    #[test]
    fn region_too_small() {
        assert!(matches!(
            PatchGrid::cover(7, 8, 8, 8, 1, 1),
            Err(PatchError::RegionTooSmall { .. })
        ));
    }

    #[test]
    fn vectorization_round_trip_all_indices() {
        // Every one-hot 8x8 patch maps to the expected vector index and back.
        for r in 0..8 {
            for c in 0..8 {
                let img = Image::from_fn(8, 8, |x, y| if (x, y) == (c, r) { 1.0 } else { 0.0 });
                let g = grid(8, 8, 8, 8, 1);
                let v = &extract_patches(&img, img.bounds(), &g).unwrap()[0].1;
                for i in 0..64 {
                    let expect = if i == r * 8 + c { 1.0 } else { 0.0 };
                    assert_eq!(v[i], expect);
                }
            }
        }
    }

    #[test]
    fn aggregate_single_patch_identity() {
        let img = Image::from_fn(8, 8, |x, y| (x * 8 + y) as f64 / 64.0);
        let g = grid(8, 8, 8, 8, 1);
        let patches = extract_patches(&img, img.bounds(), &g).unwrap();
        let out = aggregate_patches(&patches, 8, 8, Rect::new(0, 0, 8, 8)).unwrap();
        assert_eq!(out, img);
    }

    #[test]
    fn aggregate_two_overlapping_constants() {
        let patches = vec![
            ((0, 0), DVector::from_element(64, 0.2)),
            ((0, 0), DVector::from_element(64, 0.4)),
        ];
        let out = aggregate_patches(&patches, 8, 8, Rect::new(0, 0, 8, 8)).unwrap();
        for &v in out.data() {
            assert!((v - 0.3).abs() < 1e-15);
        }
    }

    #[test]
    fn aggregate_staggered_matches_brute_force() {
        // Three staggered 8x8 patches with distinct constants over a 10x8
        // strip, checked against direct sum/count accumulation.
        let vals = [0.1, 0.5, 0.9];
        let patches: Vec<((usize, usize), DVector<f64>)> = (0..3)
            .map(|i| ((i, 0), DVector::from_element(64, vals[i])))
            .collect();
        let shape = Rect::new(0, 0, 10, 8);
        let out = aggregate_patches(&patches, 8, 8, shape).unwrap();

        let mut sum = vec![0.0; 80];
        let mut n = vec![0usize; 80];
        for (i, val) in vals.iter().enumerate() {
            for r in 0..8 {
                for c in 0..8 {
                    sum[r * 10 + i + c] += val;
                    n[r * 10 + i + c] += 1;
                }
            }
        }
        for idx in 0..80 {
            let expect = sum[idx] / n[idx] as f64;
            assert!((out.data()[idx] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn coverage_gap_detected() {
        let patches = vec![((0, 0), DVector::from_element(64, 0.2))];
        let err = aggregate_patches(&patches, 8, 8, Rect::new(0, 0, 10, 8)).unwrap_err();
        assert!(matches!(err, PatchError::CoverageGap(8, 0)));
    }

    #[test]
    fn extract_then_aggregate_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for case in 0..20 {
            let w = rng.random_range(8..40);
            let h = rng.random_range(8..40);
            let img = Image::from_fn(w, h, |_, _| rng.random::<f64>());
            let s = rng.random_range(1..6);
            let g = grid(w, h, 8, 8, s);
            let patches = extract_patches(&img, img.bounds(), &g).unwrap();
            let out = aggregate_patches(&patches, 8, 8, Rect::new(0, 0, w, h)).unwrap();
            assert_eq!(out, img, "case {case}: identity must be exact");
        }
    }
}
