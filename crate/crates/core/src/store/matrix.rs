use crate::error::{Error, Result};

/// Tolerance on the unit-norm check for rows flagged as normalized.
pub const NORM_TOLERANCE: f64 = 1e-5;

/// Which payload a stored matrix carries. The discriminant is the `kind`
/// byte of the binary header.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixKind {
    Embeddings = 0,
    Logits = 1,
}

impl MatrixKind {
    pub fn from_byte(b: u8) -> Option<Self> {
        match b {
            0 => Some(MatrixKind::Embeddings),
            1 => Some(MatrixKind::Logits),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            MatrixKind::Embeddings => "embeddings",
            MatrixKind::Logits => "logits",
        }
    }
}

/// Row-major `f32` storage shared by embedding and logit matrices.
pub trait StoredMatrix {
    const KIND: MatrixKind;
    fn rows(&self) -> usize;
    fn cols(&self) -> usize;
    fn as_slice(&self) -> &[f32];

    fn row(&self, i: usize) -> &[f32] {
        let c = self.cols();
        &self.as_slice()[i * c..(i + 1) * c]
    }
}

fn validate(rows: usize, cols: usize, data: &[f32]) -> Result<()> {
    if rows == 0 || cols == 0 {
        return Err(Error::Validation(format!(
            "matrix must have at least one row and one column, got {rows}x{cols}"
        )));
    }
    let expected = rows
        .checked_mul(cols)
        .ok_or_else(|| Error::Validation(format!("{rows}x{cols} overflows")))?;
    if data.len() != expected {
        return Err(Error::Validation(format!(
            "{rows}x{cols} matrix needs {expected} values, got {}",
            data.len()
        )));
    }
    if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
        return Err(Error::Validation(format!(
            "non-finite value {} at row {}, column {}",
            data[pos],
            pos / cols,
            pos % cols
        )));
    }
    Ok(())
}

fn flatten(rows: &[Vec<f32>]) -> Result<(usize, usize, Vec<f32>)> {
    let cols = rows.first().map_or(0, Vec::len);
    if let Some(bad) = rows.iter().position(|r| r.len() != cols) {
        return Err(Error::Shape(format!(
            "row {bad} has {} columns, expected {cols}",
            rows[bad].len()
        )));
    }
    Ok((rows.len(), cols, rows.concat()))
}

pub(crate) fn row_norm(row: &[f32]) -> f64 {
    row.iter()
        .map(|&v| f64::from(v) * f64::from(v))
        .sum::<f64>()
        .sqrt()
}

/// Dense matrix of feature vectors, one sample per row.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f32>,
    normalized: bool,
}

impl EmbeddingMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f32>) -> Result<Self> {
        validate(rows, cols, &data)?;
        Ok(Self {
            rows,
            cols,
            data,
            normalized: false,
        })
    }

    pub fn from_rows(rows: &[Vec<f32>]) -> Result<Self> {
        let (r, c, data) = flatten(rows)?;
        Self::new(r, c, data)
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// Sets the normalized flag after checking every row is unit length
    /// within [`NORM_TOLERANCE`].
    pub fn into_normalized_checked(mut self) -> Result<Self> {
        for i in 0..self.rows {
            let n = row_norm(self.row(i));
            if (n - 1.0).abs() > NORM_TOLERANCE {
                return Err(Error::Validation(format!(
                    "row {i} has L2 norm {n}, expected 1"
                )));
            }
        }
        self.normalized = true;
        Ok(self)
    }

    /// Scales every row to unit Euclidean length. Norms are accumulated in
    /// `f64`; a zero-norm row is rejected.
    pub fn l2_normalize(&self) -> Result<Self> {
        let mut data = Vec::with_capacity(self.data.len());
        for i in 0..self.rows {
            let row = self.row(i);
            let n = row_norm(row);
            if n == 0.0 {
                return Err(Error::Validation(format!(
                    "row {i} has zero norm and cannot be normalized"
                )));
            }
            data.extend(row.iter().map(|&v| (f64::from(v) / n) as f32));
        }
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data,
            normalized: true,
        })
    }

    pub fn into_vec(self) -> Vec<f32> {
        self.data
    }
}

impl StoredMatrix for EmbeddingMatrix {
    const KIND: MatrixKind = MatrixKind::Embeddings;
    fn rows(&self) -> usize {
        self.rows
    }
    fn cols(&self) -> usize {
        self.cols
    }
    fn as_slice(&self) -> &[f32] {
        &self.data
    }
}

/// Classifier outputs, one row of `cols` class logits per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct LogitMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f32>,
}

impl LogitMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f32>) -> Result<Self> {
        validate(rows, cols, &data)?;
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f32>]) -> Result<Self> {
        let (r, c, data) = flatten(rows)?;
        Self::new(r, c, data)
    }

    pub fn classes(&self) -> usize {
        self.cols
    }
}

impl StoredMatrix for LogitMatrix {
    const KIND: MatrixKind = MatrixKind::Logits;
    fn rows(&self) -> usize {
        self.rows
    }
    fn cols(&self) -> usize {
        self.cols
    }
    fn as_slice(&self) -> &[f32] {
        &self.data
    }
}

/// A matrix whose kind was taken from the file it was read from.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyMatrix {
    Embeddings(EmbeddingMatrix),
    Logits(LogitMatrix),
}

impl AnyMatrix {
    pub fn kind(&self) -> MatrixKind {
        match self {
            AnyMatrix::Embeddings(_) => MatrixKind::Embeddings,
            AnyMatrix::Logits(_) => MatrixKind::Logits,
        }
    }

    pub(crate) fn from_parts(kind: MatrixKind, rows: usize, cols: usize, data: Vec<f32>) -> Result<Self> {
        Ok(match kind {
            MatrixKind::Embeddings => AnyMatrix::Embeddings(EmbeddingMatrix::new(rows, cols, data)?),
            MatrixKind::Logits => AnyMatrix::Logits(LogitMatrix::new(rows, cols, data)?),
        })
    }
}
