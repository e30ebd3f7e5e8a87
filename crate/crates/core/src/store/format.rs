//! On-disk matrix formats.
//!
//! The binary layout is fixed and little-endian:
//!
//! | offset | size | field                               |
//! |--------|------|-------------------------------------|
//! | 0      | 4    | magic `OODE`                        |
//! | 4      | 2    | version, `u16` = 1                  |
//! | 6      | 1    | kind, `u8` (0 embeddings, 1 logits) |
//! | 7      | 1    | reserved, must be zero              |
//! | 8      | 8    | rows, `u64`                         |
//! | 16     | 4    | cols, `u32`                         |
//! | 20     | 4·rows·cols | payload, `f32`, row-major    |
//!
//! CSV is accepted on read for hand-authored fixtures: comma-separated
//! decimals, one sample per line, optional header row.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::matrix::{AnyMatrix, EmbeddingMatrix, LogitMatrix, MatrixKind, StoredMatrix};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"OODE";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 20;

/// Serializes a matrix into the binary format.
pub fn encode<M: StoredMatrix>(m: &M) -> Result<Vec<u8>> {
    if let Some(pos) = m.as_slice().iter().position(|v| !v.is_finite()) {
        return Err(Error::Validation(format!(
            "non-finite value at row {}",
            pos / m.cols()
        )));
    }
    let cols = u32::try_from(m.cols())
        .map_err(|_| Error::Validation(format!("{} columns exceed the u32 header field", m.cols())))?;
    let mut buf = Vec::with_capacity(HEADER_LEN + 4 * m.as_slice().len());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.push(M::KIND as u8);
    buf.push(0);
    buf.extend_from_slice(&(m.rows() as u64).to_le_bytes());
    buf.extend_from_slice(&cols.to_le_bytes());
    for v in m.as_slice() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    Ok(buf)
}

/// Parses the binary format, checking header, length and finiteness.
pub fn decode(bytes: &[u8]) -> Result<AnyMatrix> {
    if bytes.len() < MAGIC.len() && MAGIC.starts_with(bytes) {
        return Err(Error::Corrupt(format!("file truncated to {} bytes", bytes.len())));
    }
    if bytes.len() < MAGIC.len() || &bytes[..4] != MAGIC {
        return Err(Error::Format("bad magic, expected \"OODE\"".into()));
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::Corrupt(format!(
            "header truncated: {} of {HEADER_LEN} bytes",
            bytes.len()
        )));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let kind = MatrixKind::from_byte(bytes[6])
        .ok_or_else(|| Error::Format(format!("unknown matrix kind {}", bytes[6])))?;
    if bytes[7] != 0 {
        return Err(Error::Format("reserved header byte is not zero".into()));
    }
    let rows = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
    let cols = u32::from_le_bytes(bytes[16..20].try_into().unwrap());
    let payload = &bytes[HEADER_LEN..];
    let expected = rows
        .checked_mul(u64::from(cols))
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| Error::Corrupt(format!("{rows}x{cols} overflows")))?;
    if payload.len() as u64 != expected {
        return Err(Error::Corrupt(format!(
            "{rows}x{cols} header needs {expected} payload bytes, found {}",
            payload.len()
        )));
    }
    let data = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    AnyMatrix::from_parts(kind, rows as usize, cols as usize, data)
}

pub fn write_matrix<M: StoredMatrix>(m: &M, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode(m)?;
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(&bytes)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

fn is_csv(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

/// Reads a matrix file. `.csv` files are parsed as embeddings; anything
/// else must be in the binary format.
pub fn read_matrix(path: impl AsRef<Path>) -> Result<AnyMatrix> {
    let path = path.as_ref();
    if is_csv(path) {
        let (rows, cols, data) = read_csv(path)?;
        return AnyMatrix::from_parts(MatrixKind::Embeddings, rows, cols, data);
    }
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes).map_err(|e| match e {
        Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
        Error::Corrupt(m) => Error::Corrupt(format!("{}: {m}", path.display())),
        Error::Validation(m) => Error::Validation(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn read_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingMatrix> {
    let path = path.as_ref();
    match read_matrix(path)? {
        AnyMatrix::Embeddings(m) => Ok(m),
        AnyMatrix::Logits(_) => Err(Error::Format(format!(
            "{} holds logits, expected embeddings",
            path.display()
        ))),
    }
}

pub fn read_logits(path: impl AsRef<Path>) -> Result<LogitMatrix> {
    let path = path.as_ref();
    if is_csv(path) {
        let (rows, cols, data) = read_csv(path)?;
        return LogitMatrix::new(rows, cols, data);
    }
    match read_matrix(path)? {
        AnyMatrix::Logits(m) => Ok(m),
        AnyMatrix::Embeddings(_) => Err(Error::Format(format!(
            "{} holds embeddings, expected logits",
            path.display()
        ))),
    }
}

fn read_csv(path: &Path) -> Result<(usize, usize, Vec<f32>)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_csv(&text).map_err(|e| match e {
        Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub(crate) fn parse_csv(text: &str) -> Result<(usize, usize, Vec<f32>)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0usize;
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Format(format!("csv: {e}")))?;
        if record.iter().all(str::is_empty) {
            continue;
        }
        let parsed: Result<Vec<f32>, _> = record.iter().map(str::parse::<f32>).collect();
        let values = match parsed {
            Ok(v) => v,
            // A first line that is not numeric is a header.
            Err(_) if line == 0 => continue,
            Err(e) => {
                return Err(Error::Format(format!("csv line {}: {e}", line + 1)));
            }
        };
        match cols {
            None => cols = Some(values.len()),
            Some(c) if c != values.len() => {
                return Err(Error::Format(format!(
                    "csv line {} has {} fields, expected {c}",
                    line + 1,
                    values.len()
                )));
            }
            _ => {}
        }
        data.extend(values);
        rows += 1;
    }
    Ok((rows, cols.unwrap_or(0), data))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_row_file_is_header_plus_payload() {
        let m = EmbeddingMatrix::from_rows(&[vec![1.0, 0.0, 0.0]]).unwrap();
        let bytes = encode(&m).unwrap();
        assert_eq!(bytes.len(), 4 + 2 + 1 + 1 + 8 + 4 + 3 * 4);
        assert_eq!(&bytes[..4], b"OODE");
        assert_eq!(&bytes[4..8], &[1, 0, 0, 0]);
        assert_eq!(&bytes[8..16], &1u64.to_le_bytes());
        assert_eq!(&bytes[16..20], &3u32.to_le_bytes());
        assert_eq!(&bytes[20..24], &1.0f32.to_le_bytes());
        assert_eq!(decode(&bytes).unwrap(), AnyMatrix::Embeddings(m));
    }

    #[test]
    fn logits_carry_kind_byte() {
        let m = LogitMatrix::from_rows(&[vec![0.5, -0.5]]).unwrap();
        let bytes = encode(&m).unwrap();
        assert_eq!(bytes[6], 1);
        assert!(matches!(decode(&bytes).unwrap(), AnyMatrix::Logits(_)));
    }

    #[test]
    fn truncation_is_corruption() {
        let m = EmbeddingMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let bytes = encode(&m).unwrap();
        for cut in [1, 4, bytes.len() - HEADER_LEN] {
            let err = decode(&bytes[..bytes.len() - cut]).unwrap_err();
            assert!(matches!(err, Error::Corrupt(_)), "cut {cut}: {err}");
        }
        let mut longer = bytes.clone();
        longer.push(0);
        assert!(matches!(decode(&longer), Err(Error::Corrupt(_))));
    }

    #[test]
    fn header_errors() {
        let m = EmbeddingMatrix::from_rows(&[vec![1.0]]).unwrap();
        let good = encode(&m).unwrap();

        let mut bad = good.clone();
        bad[0] = b'X';
        assert!(matches!(decode(&bad), Err(Error::Format(_))));

        let mut bad = good.clone();
        bad[4] = 2;
        assert!(matches!(decode(&bad), Err(Error::Format(_))));

        let mut bad = good.clone();
        bad[6] = 7;
        assert!(matches!(decode(&bad), Err(Error::Format(_))));

        let mut bad = good;
        bad[7] = 1;
        assert!(matches!(decode(&bad), Err(Error::Format(_))));
    }

    #[test]
    fn zero_rows_rejected_on_decode() {
        let mut bytes = Vec::from(&MAGIC[..]);
        bytes.extend_from_slice(&VERSION.to_le_bytes());
        bytes.extend_from_slice(&[0, 0]);
        bytes.extend_from_slice(&0u64.to_le_bytes());
        bytes.extend_from_slice(&3u32.to_le_bytes());
        assert!(matches!(decode(&bytes), Err(Error::Validation(_))));
    }

    #[test]
    fn nan_payload_names_row() {
        let m = EmbeddingMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let mut bytes = encode(&m).unwrap();
        let off = HEADER_LEN + 3 * 4;
        bytes[off..off + 4].copy_from_slice(&f32::NAN.to_le_bytes());
        let err = decode(&bytes).unwrap_err();
        assert!(matches!(err, Error::Validation(ref s) if s.contains("row 1")), "{err}");
    }

    #[test]
    fn csv_with_and_without_header() {
        let (r, c, d) = parse_csv("a,b,c\n1.5, 2, -3e-1\n4,5,6\n").unwrap();
        assert_eq!((r, c), (2, 3));
        assert_eq!(d, vec![1.5, 2.0, -0.3, 4.0, 5.0, 6.0]);
        let (r, c, _) = parse_csv("1,2,3\n4,5,6\n").unwrap();
        assert_eq!((r, c), (2, 3));
    }

    #[test]
    fn csv_ragged_or_garbage_is_format_error() {
        assert!(matches!(parse_csv("1,2\n3\n"), Err(Error::Format(_))));
        assert!(matches!(parse_csv("1,2\nx,y\n"), Err(Error::Format(_))));
    }
}
