//! Sparse representation over a learned dictionary: orthogonal matching
//! pursuit (plain and with masked rows), reconstruction, K-SVD training,
//! and the strip-level inpainting / regularizing operators.

pub mod file;
pub mod ksvd;
pub mod strip;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

pub use ksvd::{train_dictionary, TrainParams, Trained};
pub use strip::{inpaint_strip, regularize_strip, StripResult};

/// Residual threshold at which pursuit stops early.
pub const OMP_RESIDUAL_TOL: f64 = 1e-9;
/// Ridge added to the normal equations when a selected support is degenerate.
pub const LS_RIDGE: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum SparseError {
    #[error("dimension mismatch: expected vector of length {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("insufficient support: {kept} kept rows, need at least {floor}")]
    InsufficientSupport { kept: usize, floor: usize },
    #[error("atom index {0} out of range for dictionary with {1} atoms")]
    IndexOutOfRange(usize, usize),
    #[error("atom length {0} does not divide into patches of {1}x{2}")]
    BadPatchShape(usize, usize, usize),
    #[error("atom {0} does not have unit norm (norm = {1})")]
    NotUnitNorm(usize, f64),
    #[error("need at least {need} usable training patches, have {have}")]
    TooFewPatches { need: usize, have: usize },
    #[error("sparsity must be at least 1")]
    ZeroSparsity,
}

/// Overcomplete atom matrix with unit-norm columns.
///
/// `scale_tag` records the pixel scale the dictionary was trained at:
/// 1 = full resolution, N = trained on images downsampled by N.
#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    atoms: DMatrix<f64>,
    scale_tag: u32,
}

impl Dictionary {
    /// Wraps an atom matrix, verifying every column has unit norm (±1e-9).
    pub fn new(atoms: DMatrix<f64>, scale_tag: u32) -> Result<Self, SparseError> {
        for j in 0..atoms.ncols() {
            let norm = atoms.column(j).norm();
            if (norm - 1.0).abs() > 1e-9 {
                return Err(SparseError::NotUnitNorm(j, norm));
            }
        }
        Ok(Dictionary { atoms, scale_tag })
    }

    /// Wraps an atom matrix, normalizing each column.
    pub fn from_unnormalized(mut atoms: DMatrix<f64>, scale_tag: u32) -> Result<Self, SparseError> {
        for j in 0..atoms.ncols() {
            let norm = atoms.column(j).norm();
            if norm <= 0.0 {
                return Err(SparseError::NotUnitNorm(j, norm));
            }
            atoms.column_mut(j).scale_mut(1.0 / norm);
        }
        Ok(Dictionary { atoms, scale_tag })
    }

    pub fn atom_len(&self) -> usize {
        self.atoms.nrows()
    }

    pub fn n_atoms(&self) -> usize {
        self.atoms.ncols()
    }

    pub fn scale_tag(&self) -> u32 {
        self.scale_tag
    }

    pub fn atoms(&self) -> &DMatrix<f64> {
        &self.atoms
    }

    pub fn atom(&self, k: usize) -> DVector<f64> {
        DVector::from(self.atoms.column(k))
    }
}

/// Sparse coefficient vector stored as aligned (index, coefficient) lists.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseCode {
    pub indices: Vec<usize>,
    pub coeffs: Vec<f64>,
}

impl SparseCode {
    pub fn empty() -> Self {
        SparseCode {
            indices: Vec::new(),
            coeffs: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Least squares min ||a x - b|| via QR; falls back to ridge-regularized
/// normal equations when the triangular factor is singular.
fn least_squares(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let k = a.ncols();
    let qr = a.clone().qr();
    let r = qr.r();
    let singular = (0..k).any(|i| r[(i, i)].abs() < 1e-12);
    if !singular {
        let qtb = qr.q().transpose() * b;
        if let Some(x) = r.solve_upper_triangular(&qtb) {
            return x;
        }
    }
    let mut gram = a.transpose() * a;
    for i in 0..k {
        gram[(i, i)] += LS_RIDGE;
    }
    let atb = a.transpose() * b;
    gram.cholesky()
        .map(|ch| ch.solve(&atb))
        .unwrap_or_else(|| DVector::zeros(k))
}

/// Greedy pursuit over the rows listed in `keep_rows`.
///
/// Atom selection scores correlations against columns re-normalized over the
/// kept rows; the returned coefficients come from an un-normalized least
/// squares fit so `D * code` is directly valid on all rows.
fn pursuit(
    dict: &Dictionary,
    y: &DVector<f64>,
    keep_rows: &[usize],
    sparsity: usize,
) -> SparseCode {
    let m = dict.n_atoms();
    let atoms = dict.atoms();

    // Column norms restricted to the kept rows; atoms that vanish there are
    // never selected.
    let norms: Vec<f64> = (0..m)
        .map(|j| {
            keep_rows
                .iter()
                .map(|&i| atoms[(i, j)] * atoms[(i, j)])
                .sum::<f64>()
                .sqrt()
        })
        .collect();

    let y_kept = DVector::from_iterator(keep_rows.len(), keep_rows.iter().map(|&i| y[i]));
    let mut residual = y_kept.clone();
    let mut selected: Vec<usize> = Vec::with_capacity(sparsity);
    let mut coeffs = DVector::zeros(0);

    while selected.len() < sparsity && residual.norm() >= OMP_RESIDUAL_TOL {
        let mut best = 0usize;
        let mut best_score = -1.0f64;
        for j in 0..m {
            if norms[j] < 1e-12 || selected.contains(&j) {
                continue;
            }
            let corr: f64 = keep_rows
                .iter()
                .enumerate()
                .map(|(r, &i)| atoms[(i, j)] * residual[r])
                .sum();
            let score = corr.abs() / norms[j];
            if score > best_score {
                best_score = score;
                best = j;
            }
        }
        if best_score < 1e-12 {
            break;
        }
        selected.push(best);

        let sub = DMatrix::from_fn(keep_rows.len(), selected.len(), |r, c| {
            atoms[(keep_rows[r], selected[c])]
        });
        coeffs = least_squares(&sub, &y_kept);
        residual = &y_kept - &sub * &coeffs;
    }

    SparseCode {
        indices: selected,
        coeffs: coeffs.iter().copied().collect(),
    }
}

/// Plain orthogonal matching pursuit at the given sparsity level.
pub fn omp(dict: &Dictionary, y: &DVector<f64>, sparsity: usize) -> Result<SparseCode, SparseError> {
    if sparsity == 0 {
        return Err(SparseError::ZeroSparsity);
    }
    if y.len() != dict.atom_len() {
        return Err(SparseError::DimensionMismatch {
            expected: dict.atom_len(),
            got: y.len(),
        });
    }
    let keep: Vec<usize> = (0..dict.atom_len()).collect();
    Ok(pursuit(dict, y, &keep, sparsity))
}

/// Minimum kept rows required by [`masked_omp`].
pub fn support_floor(sparsity: usize) -> usize {
    (2 * sparsity).max(8)
}

/// Pursuit with shadowed rows removed: entries of `y` where `keep` is false
/// are ignored, as are the matching dictionary rows.
pub fn masked_omp(
    dict: &Dictionary,
    y: &DVector<f64>,
    keep: &[bool],
    sparsity: usize,
) -> Result<SparseCode, SparseError> {
    if sparsity == 0 {
        return Err(SparseError::ZeroSparsity);
    }
    if y.len() != dict.atom_len() || keep.len() != dict.atom_len() {
        return Err(SparseError::DimensionMismatch {
            expected: dict.atom_len(),
            got: y.len().max(keep.len()),
        });
    }
    let keep_rows: Vec<usize> = (0..keep.len()).filter(|&i| keep[i]).collect();
    let floor = support_floor(sparsity);
    if keep_rows.len() < floor {
        return Err(SparseError::InsufficientSupport {
            kept: keep_rows.len(),
            floor,
        });
    }
    Ok(pursuit(dict, y, &keep_rows, sparsity))
}

/// Dense reconstruction `D * code` over the full atom length.
pub fn reconstruct(dict: &Dictionary, code: &SparseCode) -> Result<DVector<f64>, SparseError> {
    let mut out = DVector::zeros(dict.atom_len());
    for (&idx, &c) in code.indices.iter().zip(&code.coeffs) {
        if idx >= dict.n_atoms() {
            return Err(SparseError::IndexOutOfRange(idx, dict.n_atoms()));
        }
        out.axpy(c, &dict.atoms().column(idx).clone_owned(), 1.0);
    }
    Ok(out)
}

/// Squared residual of a code against a target vector.
pub fn residual_sq(dict: &Dictionary, y: &DVector<f64>, code: &SparseCode) -> f64 {
    let mut r = y.clone();
    for (&idx, &c) in code.indices.iter().zip(&code.coeffs) {
        r.axpy(-c, &dict.atoms().column(idx).clone_owned(), 1.0);
    }
    r.norm_squared()
}
