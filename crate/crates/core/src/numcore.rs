//! Dense matrices, row normalization, cosine similarity, log-sum-exp and seeded randomness.
//!
//! All reductions run in `f64` in ascending index order so results are bitwise
//! reproducible for a given build.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row norms below this are treated as degenerate.
pub const ZERO_NORM: f64 = 1e-12;

/// Tolerance on row norms for a matrix to count as unit-norm.
pub const UNIT_NORM_TOL: f64 = 1e-6;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::LengthMismatch {
                expected: rows * cols,
                got: data.len(),
            });
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// Largest absolute entry, 0 for an empty matrix.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

/// N×D embedding matrix with at least one row and one column and only finite entries.
///
/// The `unit_norm` flag is set by [`l2_normalize`] and preserved by row selection.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    inner: Matrix,
    unit_norm: bool,
}

impl FeatureMatrix {
    pub fn new(n: usize, d: usize, data: Vec<f64>) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(Error::ShapeMismatch(format!(
                "feature matrix must be non-empty, got {n}x{d}"
            )));
        }
        let inner = Matrix::from_vec(n, d, data)?;
        if let Some(pos) = inner.data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: pos / d,
                col: pos % d,
            });
        }
        Ok(FeatureMatrix {
            inner,
            unit_norm: false,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let d = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(n * d);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != d {
                return Err(Error::ShapeMismatch(format!(
                    "row {i} has {} columns, expected {d}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Self::new(n, d, data)
    }

    /// Wraps rows that the caller guarantees are unit-norm. Verified within
    /// [`UNIT_NORM_TOL`].
    pub fn new_unit(n: usize, d: usize, data: Vec<f64>) -> Result<Self> {
        let mut m = Self::new(n, d, data)?;
        for i in 0..n {
            let norm = dot(m.row(i), m.row(i)).sqrt();
            if (norm - 1.0).abs() > UNIT_NORM_TOL {
                return Err(Error::ShapeMismatch(format!(
                    "row {i} has norm {norm}, expected unit norm"
                )));
            }
        }
        m.unit_norm = true;
        Ok(m)
    }

    pub fn n(&self) -> usize {
        self.inner.rows
    }

    pub fn d(&self) -> usize {
        self.inner.cols
    }

    pub fn is_unit_norm(&self) -> bool {
        self.unit_norm
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        self.inner.row(i)
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.inner
    }

    pub fn as_slice(&self) -> &[f64] {
        self.inner.as_slice()
    }

    pub fn into_matrix(self) -> Matrix {
        self.inner
    }

    /// Gathers the listed rows (repeats allowed), keeping the unit-norm flag.
    pub fn select_rows(&self, indices: &[usize]) -> Result<FeatureMatrix> {
        if indices.is_empty() {
            return Err(Error::ShapeMismatch("empty row selection".into()));
        }
        let mut data = Vec::with_capacity(indices.len() * self.d());
        for &i in indices {
            if i >= self.n() {
                return Err(Error::IndexOutOfRange {
                    index: i,
                    len: self.n(),
                });
            }
            data.extend_from_slice(self.row(i));
        }
        Ok(FeatureMatrix {
            inner: Matrix {
                rows: indices.len(),
                cols: self.d(),
                data,
            },
            unit_norm: self.unit_norm,
        })
    }

    pub(crate) fn row_mut_unchecked(&mut self, i: usize) -> &mut [f64] {
        self.inner.row_mut(i)
    }

    pub(crate) fn with_unit_flag(mut self, unit_norm: bool) -> Self {
        self.unit_norm = unit_norm;
        self
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        s += x * y;
    }
    s
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Divides every row by its Euclidean norm.
pub fn l2_normalize(m: &FeatureMatrix) -> Result<FeatureMatrix> {
    let mut out = m.clone();
    for i in 0..out.n() {
        normalize_row(out.row_mut_unchecked(i)).map_err(|norm| Error::ZeroRow { row: i, norm })?;
    }
    out.unit_norm = true;
    Ok(out)
}

/// Normalizes a row in place; returns the offending norm when it is degenerate.
pub(crate) fn normalize_row(row: &mut [f64]) -> std::result::Result<f64, f64> {
    let n = norm(row);
    if n.is_nan() || n < ZERO_NORM {
        return Err(n);
    }
    for v in row.iter_mut() {
        *v /= n;
    }
    Ok(n)
}

/// Pairwise inner products of the rows of two unit-norm matrices.
pub fn cosine_similarity(a: &FeatureMatrix, b: &FeatureMatrix) -> Result<Matrix> {
    if a.d() != b.d() {
        return Err(Error::DimMismatch {
            expected: a.d(),
            got: b.d(),
        });
    }
    let mut out = Matrix::zeros(a.n(), b.n());
    for i in 0..a.n() {
        let ai = a.row(i);
        let row = out.row_mut(i);
        for (j, slot) in row.iter_mut().enumerate() {
            *slot = dot(ai, b.row(j));
        }
    }
    Ok(out)
}

/// `log Σ exp(v)` with max subtraction.
pub fn log_sum_exp(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyList);
    }
    Ok(lse_nonempty(values))
}

#[inline]
pub(crate) fn lse_nonempty(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut s = 0.0;
    for v in values {
        s += (v - max).exp();
    }
    max + s.ln()
}

/// Root of every random stream in the crate.
///
/// Child streams are derived with [`Seed::derive`], so components never share
/// generator state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Seed(pub u64);

impl Seed {
    pub fn rng(self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }

    /// Deterministic child seed for a named stream.
    pub fn derive(self, stream: u64) -> Seed {
        Seed(splitmix64(self.0 ^ splitmix64(stream.wrapping_add(0x51ED_270B_2A8C_3F17))))
    }
}

impl From<u64> for Seed {
    fn from(v: u64) -> Self {
        Seed(v)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
