//! Dictionary file format.
//!
//! Layout: magic `OCTD`, version `u16` = 1, `atom_len: u32`, `n_atoms: u32`,
//! `scale_tag: u32` (downsample factor, 1 = full resolution), then
//! `atom_len * n_atoms` IEEE-754 `f32` values, little-endian, column-major
//! (one atom contiguous after another). Integer fields are little-endian.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use thiserror::Error;

use super::Dictionary;

pub const MAGIC: &[u8; 4] = b"OCTD";
pub const VERSION: u16 = 1;

#[derive(Debug, Error)]
pub enum DictFileError {
    #[error("not a dictionary file (bad magic)")]
    BadMagic,
    #[error("unsupported dictionary file version {0}")]
    BadVersion(u16),
    #[error("corrupt dictionary file: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub fn encode(dict: &Dictionary) -> Vec<u8> {
    let atom_len = dict.atom_len();
    let n_atoms = dict.n_atoms();
    let mut out = Vec::with_capacity(18 + 4 * atom_len * n_atoms);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(atom_len as u32).to_le_bytes());
    out.extend_from_slice(&(n_atoms as u32).to_le_bytes());
    out.extend_from_slice(&dict.scale_tag().to_le_bytes());
    for j in 0..n_atoms {
        for i in 0..atom_len {
            out.extend_from_slice(&(dict.atoms()[(i, j)] as f32).to_le_bytes());
        }
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<Dictionary, DictFileError> {
    if bytes.len() < 18 {
        return Err(DictFileError::Corrupt("truncated header".into()));
    }
    if &bytes[0..4] != MAGIC {
        return Err(DictFileError::BadMagic);
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != VERSION {
        return Err(DictFileError::BadVersion(version));
    }
    let atom_len = u32::from_le_bytes(bytes[6..10].try_into().unwrap()) as usize;
    let n_atoms = u32::from_le_bytes(bytes[10..14].try_into().unwrap()) as usize;
    let scale_tag = u32::from_le_bytes(bytes[14..18].try_into().unwrap());
    if atom_len == 0 || n_atoms == 0 {
        return Err(DictFileError::Corrupt("zero dimension".into()));
    }
    let need = 18 + 4 * atom_len * n_atoms;
    if bytes.len() != need {
        return Err(DictFileError::Corrupt(format!(
            "expected {need} bytes, file holds {}",
            bytes.len()
        )));
    }
    let mut atoms = DMatrix::zeros(atom_len, n_atoms);
    let mut off = 18;
    for j in 0..n_atoms {
        for i in 0..atom_len {
            let v = f32::from_le_bytes(bytes[off..off + 4].try_into().unwrap());
            if !v.is_finite() {
                return Err(DictFileError::Corrupt(format!(
                    "non-finite value in atom {j}"
                )));
            }
            atoms[(i, j)] = v as f64;
            off += 4;
        }
    }
    // f32 round trips perturb norms below the unit-norm tolerance used by
    // Dictionary::new, so renormalize on load.
    Dictionary::from_unnormalized(atoms, scale_tag)
        .map_err(|e| DictFileError::Corrupt(e.to_string()))
}

pub fn save(dict: &Dictionary, path: impl AsRef<Path>) -> Result<(), DictFileError> {
    fs::write(path, encode(dict))?;
    Ok(())
}

pub fn load(path: impl AsRef<Path>) -> Result<Dictionary, DictFileError> {
    decode(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sample_dict(seed: u64, atom_len: usize, n_atoms: usize, tag: u32) -> Dictionary {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let atoms =
            DMatrix::from_fn(atom_len, n_atoms, |_, _| rng.random::<f64>() * 2.0 - 1.0);
        Dictionary::from_unnormalized(atoms, tag).unwrap()
    }

    #[test]
    fn round_trip_preserves_layout_and_tag() {
        let dict = sample_dict(1, 16, 24, 4);
        let bytes = encode(&dict);
        assert_eq!(&bytes[0..4], b"OCTD");
        assert_eq!(bytes.len(), 18 + 4 * 16 * 24);
        let back = decode(&bytes).unwrap();
        assert_eq!(back.atom_len(), 16);
        assert_eq!(back.n_atoms(), 24);
        assert_eq!(back.scale_tag(), 4);
        for j in 0..24 {
            for i in 0..16 {
                assert!((back.atoms()[(i, j)] - dict.atoms()[(i, j)]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn encode_is_deterministic() {
        let d1 = sample_dict(7, 8, 12, 1);
        let d2 = sample_dict(7, 8, 12, 1);
        assert_eq!(encode(&d1), encode(&d2));
    }

    #[test]
    fn column_major_atom_contiguous() {
        // Atom 0 = e0, atom 1 = e1: first 8 floats are atom 0's entries.
        let atoms = DMatrix::<f64>::identity(2, 2);
        let dict = Dictionary::new(atoms, 1).unwrap();
        let bytes = encode(&dict);
        let f = |k: usize| {
            f32::from_le_bytes(bytes[18 + 4 * k..18 + 4 * k + 4].try_into().unwrap())
        };
        assert_eq!((f(0), f(1), f(2), f(3)), (1.0, 0.0, 0.0, 1.0));
    }

    #[test]
    fn bad_inputs_rejected() {
        assert!(matches!(decode(b"XXXX"), Err(DictFileError::Corrupt(_))));
        let dict = sample_dict(2, 4, 6, 1);
        let mut bytes = encode(&dict);
        bytes[0] = b'X';
        assert!(matches!(decode(&bytes), Err(DictFileError::BadMagic)));
        let mut bytes = encode(&dict);
        bytes[4] = 9;
        assert!(matches!(decode(&bytes), Err(DictFileError::BadVersion(9))));
        let mut bytes = encode(&dict);
        bytes.pop();
        assert!(matches!(decode(&bytes), Err(DictFileError::Corrupt(_))));
    }

    #[test]
    fn reconstruction_consistent_after_round_trip() {
        let dict = sample_dict(3, 16, 20, 1);
        let back = decode(&encode(&dict)).unwrap();
        let y: DVector<f64> = dict.atom(5);
        let code = super::super::omp(&back, &y, 1).unwrap();
        assert_eq!(code.indices, vec![5]);
        assert!((code.coeffs[0] - 1.0).abs() < 1e-5);
    }
}
