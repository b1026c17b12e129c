//! Grayscale raster data model: images, shadow masks, rectangular regions.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum RasterError {
    #[error("data length {got} does not match {width}x{height}")]
    LengthMismatch {
        width: usize,
        height: usize,
        got: usize,
    },
    #[error("dimension mismatch: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
    #[error("value at index {0} is not finite or outside [0,1]")]
    InvalidValue(usize),
}

/// Axis-aligned rectangle in pixel coordinates (top-left origin).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rect {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

impl Rect {
    pub fn new(x: usize, y: usize, w: usize, h: usize) -> Self {
        Rect { x, y, w, h }
    }

    pub fn contains(&self, other: &Rect) -> bool {
        other.x >= self.x
            && other.y >= self.y
            && other.x + other.w <= self.x + self.w
            && other.y + other.h <= self.y + self.h
    }
}

/// 2-D grayscale image, row-major, values in [0,1].
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl Image {
    /// All-zero image.
    pub fn zeros(width: usize, height: usize) -> Self {
        Image {
            width,
            height,
            data: vec![0.0; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Image {
            width,
            height,
            data,
        }
    }

    /// Builds an image from row-major samples, validating range and length.
    pub fn from_vec(width: usize, height: usize, data: Vec<f64>) -> Result<Self, RasterError> {
        if data.len() != width * height {
            return Err(RasterError::LengthMismatch {
                width,
                height,
                got: data.len(),
            });
        }
        for (i, v) in data.iter().enumerate() {
            if !v.is_finite() || *v < 0.0 || *v > 1.0 {
                return Err(RasterError::InvalidValue(i));
            }
        }
        Ok(Image {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bounds(&self) -> Rect {
        Rect::new(0, 0, self.width, self.height)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        debug_assert!(x < self.width && y < self.height);
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        debug_assert!(x < self.width && y < self.height);
        self.data[y * self.width + x] = v;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, y: usize) -> &[f64] {
        &self.data[y * self.width..(y + 1) * self.width]
    }

    /// Copies a rectangular region into a new image.
    pub fn crop(&self, r: Rect) -> Image {
        assert!(self.bounds().contains(&r), "crop rectangle out of bounds");
        let mut out = Image::zeros(r.w, r.h);
        for y in 0..r.h {
            for x in 0..r.w {
                out.set(x, y, self.get(r.x + x, r.y + y));
            }
        }
        out
    }

    /// Writes `src` into this image with its top-left corner at (x0, y0).
    pub fn blit(&mut self, src: &Image, x0: usize, y0: usize) {
        assert!(x0 + src.width <= self.width && y0 + src.height <= self.height);
        for y in 0..src.height {
            for x in 0..src.width {
                self.set(x0 + x, y0 + y, src.get(x, y));
            }
        }
    }

    pub fn mean(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }
}

/// Per-pixel reliability map paired with an [`Image`]: `true` = reliable,
/// `false` = shadowed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShadowMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl ShadowMask {
    /// All-reliable mask.
    pub fn all_reliable(width: usize, height: usize) -> Self {
        ShadowMask {
            width,
            height,
            bits: vec![true; width * height],
        }
    }

    pub fn from_bits(width: usize, height: usize, bits: Vec<bool>) -> Result<Self, RasterError> {
        if bits.len() != width * height {
            return Err(RasterError::LengthMismatch {
                width,
                height,
                got: bits.len(),
            });
        }
        Ok(ShadowMask {
            width,
            height,
            bits,
        })
    }

    /// Columnar mask from per-column reliability flags.
    pub fn from_columns(height: usize, cols: &[bool]) -> Self {
        let width = cols.len();
        let mut bits = Vec::with_capacity(width * height);
        for _ in 0..height {
            bits.extend_from_slice(cols);
        }
        ShadowMask {
            width,
            height,
            bits,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn is_reliable(&self, x: usize, y: usize) -> bool {
        debug_assert!(x < self.width && y < self.height);
        self.bits[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, reliable: bool) {
        self.bits[y * self.width + x] = reliable;
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn is_all_reliable(&self) -> bool {
        self.bits.iter().all(|&b| b)
    }

    pub fn shadowed_count(&self) -> usize {
        self.bits.iter().filter(|&&b| !b).count()
    }

    /// True when every column is uniformly reliable or uniformly shadowed.
    pub fn is_columnar(&self) -> bool {
        (0..self.width).all(|x| {
            let first = self.is_reliable(x, 0);
            (1..self.height).all(|y| self.is_reliable(x, y) == first)
        })
    }

    /// Per-column reliability of a columnar mask (uses row 0).
    pub fn column_flags(&self) -> Vec<bool> {
        (0..self.width).map(|x| self.is_reliable(x, 0)).collect()
    }

    pub fn crop(&self, r: Rect) -> ShadowMask {
        assert!(
            r.x + r.w <= self.width && r.y + r.h <= self.height,
            "crop rectangle out of bounds"
        );
        let mut bits = Vec::with_capacity(r.w * r.h);
        for y in 0..r.h {
            for x in 0..r.w {
                bits.push(self.is_reliable(r.x + x, r.y + y));
            }
        }
        ShadowMask {
            width: r.w,
            height: r.h,
            bits,
        }
    }

    pub fn same_dims(&self, img: &Image) -> bool {
        self.width == img.width() && self.height == img.height()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_vec_checks_length_and_range() {
        assert!(Image::from_vec(2, 2, vec![0.0; 4]).is_ok());
        assert!(matches!(
            Image::from_vec(2, 2, vec![0.0; 3]),
            Err(RasterError::LengthMismatch { .. })
        ));
        assert!(matches!(
            Image::from_vec(2, 1, vec![0.0, 1.5]),
            Err(RasterError::InvalidValue(1))
        ));
        assert!(matches!(
            Image::from_vec(2, 1, vec![f64::NAN, 0.0]),
            Err(RasterError::InvalidValue(0))
        ));
    }

    #[test]
    fn crop_and_blit_round_trip() {
        let img = Image::from_fn(6, 4, |x, y| (x + y * 6) as f64 / 24.0);
        let r = Rect::new(2, 1, 3, 2);
        let sub = img.crop(r);
        assert_eq!(sub.get(0, 0), img.get(2, 1));
        let mut out = img.clone();
        out.blit(&sub, 2, 1);
        assert_eq!(out, img);
    }

    #[test]
    fn columnar_mask_checks() {
        let mut m = ShadowMask::from_columns(3, &[true, false, true, true]);
        assert!(m.is_columnar());
        assert_eq!(m.column_flags(), vec![true, false, true, true]);
        assert_eq!(m.shadowed_count(), 3);
        m.set(2, 1, false);
        assert!(!m.is_columnar());
    }
}
