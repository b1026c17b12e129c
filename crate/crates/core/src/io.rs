//! Grayscale image file I/O: binary PGM (P5, 8/16-bit big-endian samples)
//! and 8/16-bit grayscale PNG. Values are normalized to [0,1] on load and
//! quantized on save.

use std::fs;
use std::io::Cursor;
use std::path::Path;

use thiserror::Error;

use crate::raster::{Image, ShadowMask};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),
    #[error("corrupt file: {0}")]
    CorruptFile(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Output sample depth.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BitDepth {
    Eight,
    Sixteen,
}

impl BitDepth {
    pub fn max_value(self) -> u32 {
        match self {
            BitDepth::Eight => 255,
            BitDepth::Sixteen => 65535,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Format {
    Pgm,
    Png,
}

fn format_for(path: &Path) -> Result<Format, IoError> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
        .unwrap_or_default();
    match ext.as_str() {
        "pgm" | "pnm" => Ok(Format::Pgm),
        "png" => Ok(Format::Png),
        other => Err(IoError::UnsupportedFormat(format!(
            "extension '{other}' (expected pgm, pnm or png)"
        ))),
    }
}

/// Loads a grayscale image and normalizes samples to [0,1].
pub fn load_image(path: impl AsRef<Path>) -> Result<Image, IoError> {
    let path = path.as_ref();
    let bytes = fs::read(path)?;
    match format_for(path)? {
        Format::Pgm => decode_pgm(&bytes),
        Format::Png => decode_png(&bytes),
    }
}

/// Saves an image, quantizing to the requested bit depth. Format is chosen
/// from the file extension.
pub fn save_image(img: &Image, path: impl AsRef<Path>, depth: BitDepth) -> Result<(), IoError> {
    let path = path.as_ref();
    let bytes = match format_for(path)? {
        Format::Pgm => encode_pgm(img, depth),
        Format::Png => encode_png(img, depth)?,
    };
    fs::write(path, bytes)?;
    Ok(())
}

/// Loads a shadow mask stored as a grayscale image: 0 = shadowed, anything
/// above half range = reliable.
pub fn load_mask(path: impl AsRef<Path>) -> Result<ShadowMask, IoError> {
    let img = load_image(path)?;
    let bits = img.data().iter().map(|&v| v >= 0.5).collect();
    ShadowMask::from_bits(img.width(), img.height(), bits)
        .map_err(|e| IoError::CorruptFile(e.to_string()))
}

/// Saves a shadow mask as a grayscale image (0 = shadowed, max = reliable).
pub fn save_mask(mask: &ShadowMask, path: impl AsRef<Path>, depth: BitDepth) -> Result<(), IoError> {
    let img = Image::from_fn(mask.width(), mask.height(), |x, y| {
        if mask.is_reliable(x, y) {
            1.0
        } else {
            0.0
        }
    });
    save_image(&img, path, depth)
}

// ---------------------------------------------------------------------------
// PGM codec
// ---------------------------------------------------------------------------

fn encode_pgm(img: &Image, depth: BitDepth) -> Vec<u8> {
    let maxval = depth.max_value();
    let mut out = format!("P5\n{} {}\n{}\n", img.width(), img.height(), maxval).into_bytes();
    for &v in img.data() {
        let code = (v * maxval as f64).round().clamp(0.0, maxval as f64) as u32;
        match depth {
            BitDepth::Eight => out.push(code as u8),
            BitDepth::Sixteen => out.extend_from_slice(&(code as u16).to_be_bytes()),
        }
    }
    out
}

struct HeaderScanner<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> HeaderScanner<'a> {
    fn next_token(&mut self) -> Result<&'a [u8], IoError> {
        loop {
            while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
                self.pos += 1;
            }
            if self.pos < self.bytes.len() && self.bytes[self.pos] == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
                continue;
            }
            break;
        }
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(IoError::CorruptFile("truncated header".into()));
        }
        Ok(&self.bytes[start..self.pos])
    }

    fn next_usize(&mut self) -> Result<usize, IoError> {
        let tok = self.next_token()?;
        std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| IoError::CorruptFile("bad header field".into()))
    }
}

fn decode_pgm(bytes: &[u8]) -> Result<Image, IoError> {
    let mut sc = HeaderScanner { bytes, pos: 0 };
    let magic = sc.next_token()?;
    if magic != b"P5" {
        return Err(IoError::UnsupportedFormat(
            "not a binary PGM (expected P5)".into(),
        ));
    }
    let width = sc.next_usize()?;
    let height = sc.next_usize()?;
    let maxval = sc.next_usize()?;
    if width == 0 || height == 0 {
        return Err(IoError::CorruptFile("zero image dimension".into()));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(IoError::CorruptFile(format!("bad maxval {maxval}")));
    }
    // Exactly one whitespace byte separates the header from the raster.
    if sc.pos >= bytes.len() || !bytes[sc.pos].is_ascii_whitespace() {
        return Err(IoError::CorruptFile("missing raster separator".into()));
    }
    let raster = &bytes[sc.pos + 1..];
    let n = width * height;
    let wide = maxval > 255;
    let needed = if wide { 2 * n } else { n };
    if raster.len() < needed {
        return Err(IoError::CorruptFile(format!(
            "raster holds {} bytes, need {needed}",
            raster.len()
        )));
    }
    let scale = 1.0 / maxval as f64;
    let mut data = Vec::with_capacity(n);
    if wide {
        for ch in raster[..needed].chunks_exact(2) {
            let code = u16::from_be_bytes([ch[0], ch[1]]);
            if code as usize > maxval {
                return Err(IoError::CorruptFile("sample exceeds maxval".into()));
            }
            data.push(code as f64 * scale);
        }
    } else {
        for &b in &raster[..needed] {
            if b as usize > maxval {
                return Err(IoError::CorruptFile("sample exceeds maxval".into()));
            }
            data.push(b as f64 * scale);
        }
    }
    Image::from_vec(width, height, data).map_err(|e| IoError::CorruptFile(e.to_string()))
}

// ---------------------------------------------------------------------------
// PNG codec (via the image crate)
// ---------------------------------------------------------------------------

fn decode_png(bytes: &[u8]) -> Result<Image, IoError> {
    let dyn_img = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)
        .map_err(|e| IoError::CorruptFile(e.to_string()))?;
    let (w, h) = (dyn_img.width() as usize, dyn_img.height() as usize);
    let data: Vec<f64> = match dyn_img {
        image::DynamicImage::ImageLuma8(buf) => {
            buf.into_raw().iter().map(|&v| v as f64 / 255.0).collect()
        }
        image::DynamicImage::ImageLuma16(buf) => buf
            .into_raw()
            .iter()
            .map(|&v| v as f64 / 65535.0)
            .collect(),
        other => {
            // Non-grayscale PNGs are flattened to luma.
            let buf = other.into_luma16();
            buf.into_raw()
                .iter()
                .map(|&v| v as f64 / 65535.0)
                .collect()
        }
    };
    Image::from_vec(w, h, data).map_err(|e| IoError::CorruptFile(e.to_string()))
}

fn encode_png(img: &Image, depth: BitDepth) -> Result<Vec<u8>, IoError> {
    let mut out = Cursor::new(Vec::new());
    let w = img.width() as u32;
    let h = img.height() as u32;
    match depth {
        BitDepth::Eight => {
            let raw: Vec<u8> = img
                .data()
                .iter()
                .map(|&v| (v * 255.0).round().clamp(0.0, 255.0) as u8)
                .collect();
            let buf = image::GrayImage::from_raw(w, h, raw)
                .ok_or_else(|| IoError::CorruptFile("buffer size mismatch".into()))?;
            buf.write_to(&mut out, image::ImageFormat::Png)
                .map_err(|e| IoError::CorruptFile(e.to_string()))?;
        }
        BitDepth::Sixteen => {
            let raw: Vec<u16> = img
                .data()
                .iter()
                .map(|&v| (v * 65535.0).round().clamp(0.0, 65535.0) as u16)
                .collect();
            let buf = image::ImageBuffer::<image::Luma<u16>, _>::from_raw(w, h, raw)
                .ok_or_else(|| IoError::CorruptFile("buffer size mismatch".into()))?;
            buf.write_to(&mut out, image::ImageFormat::Png)
                .map_err(|e| IoError::CorruptFile(e.to_string()))?;
        }
    }
    Ok(out.into_inner())
}

// Used by tests that need in-memory round trips.
#[cfg(test)]
pub(crate) fn pgm_bytes(img: &Image, depth: BitDepth) -> Vec<u8> {
    encode_pgm(img, depth)
}

#[cfg(test)]
pub(crate) fn read_pgm_bytes(bytes: &[u8]) -> Result<Image, IoError> {
    decode_pgm(bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn pgm_round_trip_zero_image() {
        let img = Image::zeros(4, 4);
        let back = read_pgm_bytes(&pgm_bytes(&img, BitDepth::Eight)).unwrap();
        assert_eq!(back, img);
    }

    #[test]
    fn constant_one_maps_to_max_code() {
        let img = Image::from_fn(3, 2, |_, _| 1.0);
        let bytes = pgm_bytes(&img, BitDepth::Eight);
        assert_eq!(&bytes[bytes.len() - 6..], &[255u8; 6]);
        let bytes16 = pgm_bytes(&img, BitDepth::Sixteen);
        assert_eq!(&bytes16[bytes16.len() - 2..], &0xffffu16.to_be_bytes());
    }

    #[test]
    fn sixteen_bit_round_trip_error_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let img = Image::from_fn(32, 16, |_, _| rng.random::<f64>());
        let back = read_pgm_bytes(&pgm_bytes(&img, BitDepth::Sixteen)).unwrap();
        let max_err = img
            .data()
            .iter()
            .zip(back.data())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(max_err <= 0.5 / 65535.0, "max_err={max_err}");
    }

    #[test]
    fn png_round_trip_16bit() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.png");
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let img = Image::from_fn(20, 10, |_, _| rng.random::<f64>());
        save_image(&img, &p, BitDepth::Sixteen).unwrap();
        let back = load_image(&p).unwrap();
        let max_err = img
            .data()
            .iter()
            .zip(back.data())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(max_err <= 0.5 / 65535.0);
    }

    #[test]
    fn unsupported_extension_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.tiff");
        let img = Image::zeros(2, 2);
        assert!(matches!(
            save_image(&img, &p, BitDepth::Eight),
            Err(IoError::UnsupportedFormat(_))
        ));
    }

    #[test]
    fn corrupt_pgm_rejected() {
        assert!(matches!(
            read_pgm_bytes(b"P5\n4 4\n255\n"),
            Err(IoError::CorruptFile(_))
        ));
        assert!(matches!(
            read_pgm_bytes(b"P6\n1 1\n255\n0"),
            Err(IoError::UnsupportedFormat(_))
        ));
    }

    #[test]
    fn mask_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.pgm");
        let mask = ShadowMask::from_columns(4, &[true, false, true, false, true]);
        save_mask(&mask, &p, BitDepth::Eight).unwrap();
        assert_eq!(load_mask(&p).unwrap(), mask);
    }
}
