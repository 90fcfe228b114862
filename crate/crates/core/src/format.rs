//! Binary embedding files and small text fixtures.
//!
//! Binary layout, all little-endian:
//!
//! | offset | size | field                                   |
//! |--------|------|-----------------------------------------|
//! | 0      | 4    | magic `CGET`                            |
//! | 4      | 2    | version, currently 1                    |
//! | 6      | 2    | flags; bit 0 marks a similarity payload |
//! | 8      | 4    | n                                       |
//! | 12     | 4    | d (equals n for similarity payloads)    |
//! | 16     | 4·n·d| row-major `f32` values                  |

use crate::error::{Error, Result};
use crate::numerics::{SimilarityMatrix, TokenMatrix};

pub const MAGIC: [u8; 4] = *b"CGET";
pub const VERSION: u16 = 1;
pub const FLAG_SIMILARITY: u16 = 1;
pub const HEADER_LEN: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Embeddings(TokenMatrix),
    /// Always has `diagonal_excluded` set when parsed.
    Similarity(SimilarityMatrix),
}

impl Payload {
    pub fn n(&self) -> usize {
        match self {
            Payload::Embeddings(t) => t.n_tokens(),
            Payload::Similarity(s) => s.n(),
        }
    }
}

fn u16_at(bytes: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([bytes[at], bytes[at + 1]])
}

fn u32_at(bytes: &[u8], at: usize) -> usize {
    u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap()) as usize
}

pub fn parse_embedding_file(bytes: &[u8]) -> Result<Payload> {
    if bytes.len() < HEADER_LEN {
        if bytes.len() >= 4 && bytes[..4] != MAGIC {
            return Err(Error::BadMagic(bytes[..4].try_into().unwrap()));
        }
        return Err(Error::TruncatedPayload {
            expected: HEADER_LEN,
            found: bytes.len(),
        });
    }
    let magic: [u8; 4] = bytes[..4].try_into().unwrap();
    if magic != MAGIC {
        return Err(Error::BadMagic(magic));
    }
    let version = u16_at(bytes, 4);
    if version != VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let flags = u16_at(bytes, 6);
    if flags & !FLAG_SIMILARITY != 0 {
        return Err(Error::UnsupportedFlags(flags));
    }
    let n = u32_at(bytes, 8);
    let d = u32_at(bytes, 12);
    let similarity = flags & FLAG_SIMILARITY != 0;
    if similarity && d != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: d,
        });
    }
    let expected = n
        .checked_mul(d)
        .and_then(|c| c.checked_mul(4))
        .ok_or_else(|| Error::InvalidShape(format!("{n}x{d} payload overflows")))?;
    let body = &bytes[HEADER_LEN..];
    if body.len() < expected {
        return Err(Error::TruncatedPayload {
            expected,
            found: body.len(),
        });
    }
    if body.len() > expected {
        return Err(Error::TrailingBytes(body.len() - expected));
    }
    let values: Vec<f64> = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    if similarity {
        SimilarityMatrix::new(n, values, true).map(Payload::Similarity)
    } else {
        TokenMatrix::new(n, d, values).map(Payload::Embeddings)
    }
}

/// Serializes a payload; values are narrowed to `f32`.
pub fn write_embedding_file(payload: &Payload) -> Result<Vec<u8>> {
    let (flags, n, d, values) = match payload {
        Payload::Embeddings(t) => (0, t.n_tokens(), t.dim(), t.as_slice()),
        Payload::Similarity(s) => (FLAG_SIMILARITY, s.n(), s.n(), s.raw()),
    };
    let narrow = |v: usize| u32::try_from(v).map_err(|_| Error::InvalidShape(format!("{v} exceeds u32")));
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * values.len());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&flags.to_le_bytes());
    out.extend_from_slice(&narrow(n)?.to_le_bytes());
    out.extend_from_slice(&narrow(d)?.to_le_bytes());
    for (pos, &v) in values.iter().enumerate() {
        let f = v as f32;
        if !f.is_finite() {
            return Err(Error::NonFinite(pos));
        }
        out.extend_from_slice(&f.to_le_bytes());
    }
    Ok(out)
}

fn parse_reals(line: &str, line_no: usize) -> Result<Vec<f64>> {
    line.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>().map_err(|e| Error::Parse {
                line: line_no,
                message: format!("{s:?}: {e}"),
            })
        })
        .collect()
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

/// One token per line, comma-separated reals. Blank lines and lines
/// starting with `#` are skipped.
pub fn parse_csv_tokens(text: &str) -> Result<TokenMatrix> {
    let mut rows = Vec::new();
    for (line_no, line) in content_lines(text) {
        let row = parse_reals(line, line_no)?;
        if let Some(first) = rows.first().map(Vec::len) {
            if row.len() != first {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("expected {first} values, found {}", row.len()),
                });
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::EmptyInput);
    }
    TokenMatrix::from_rows(&rows)
}

/// Importance scores separated by commas, whitespace or newlines.
pub fn parse_importance(text: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (line_no, line) in content_lines(text) {
        out.extend(parse_reals(line, line_no)?);
    }
    if out.is_empty() {
        return Err(Error::EmptyInput);
    }
    if let Some(pos) = out.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(pos));
    }
    Ok(out)
}

/// Binary if the bytes carry the magic or are not UTF-8, CSV otherwise.
pub fn load_payload(bytes: &[u8]) -> Result<Payload> {
    if bytes.starts_with(&MAGIC) {
        return parse_embedding_file(bytes);
    }
    match std::str::from_utf8(bytes) {
        Ok(text) => parse_csv_tokens(text).map(Payload::Embeddings),
        Err(_) => parse_embedding_file(bytes),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cases;

    fn header(flags: u16, n: u32, d: u32) -> Vec<u8> {
        let mut h = b"CGET".to_vec();
        h.extend_from_slice(&1u16.to_le_bytes());
        h.extend_from_slice(&flags.to_le_bytes());
        h.extend_from_slice(&n.to_le_bytes());
        h.extend_from_slice(&d.to_le_bytes());
        h
    }

    fn floats(values: &[f32]) -> Vec<u8> {
        values.iter().flat_map(|v| v.to_le_bytes()).collect()
    }

    #[test]
    fn identity_embeddings() {
        let mut bytes = header(0, 2, 2);
        bytes.extend(floats(&[1.0, 0.0, 0.0, 1.0]));
        let Payload::Embeddings(t) = parse_embedding_file(&bytes).unwrap() else {
            panic!("expected embeddings");
        };
        assert_eq!(t, TokenMatrix::from_rows(&[[1.0, 0.0], [0.0, 1.0]]).unwrap());
        assert_eq!(write_embedding_file(&Payload::Embeddings(t)).unwrap(), bytes);
    }

    #[test]
    fn similarity_payload() {
        let d = cases::case2();
        let bytes = write_embedding_file(&Payload::Similarity(d.clone())).unwrap();
        assert_eq!(&bytes[..HEADER_LEN], &header(1, 4, 4)[..]);
        let Payload::Similarity(s) = parse_embedding_file(&bytes).unwrap() else {
            panic!("expected similarity");
        };
        assert!(s.diagonal_excluded());
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    assert!((s.get(i, j) - d.get(i, j)).abs() < 1e-7);
                }
            }
        }
    }

    #[test]
    fn header_errors() {
        let mut bytes = header(0, 2, 2);
        bytes.extend(floats(&[1.0, 0.0, 0.0]));
        assert_eq!(
            parse_embedding_file(&bytes),
            Err(Error::TruncatedPayload {
                expected: 16,
                found: 12
            })
        );
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert_eq!(parse_embedding_file(&bad), Err(Error::BadMagic(*b"XGET")));
        let mut v2 = bytes.clone();
        v2[4] = 2;
        assert_eq!(parse_embedding_file(&v2), Err(Error::UnsupportedVersion(2)));
        assert!(matches!(
            parse_embedding_file(&bytes[..10]),
            Err(Error::TruncatedPayload { .. })
        ));
        let mut nan = header(0, 1, 1);
        nan.extend(floats(&[f32::NAN]));
        assert_eq!(parse_embedding_file(&nan), Err(Error::NonFinite(0)));
        let mut wrong_d = header(1, 2, 3);
        wrong_d.extend(floats(&[0.0; 6]));
        assert!(matches!(
            parse_embedding_file(&wrong_d),
            Err(Error::DimensionMismatch { .. })
        ));
        let mut trailing = header(0, 1, 1);
        trailing.extend(floats(&[1.0, 2.0]));
        assert_eq!(parse_embedding_file(&trailing), Err(Error::TrailingBytes(4)));
        let mut flags = header(6, 1, 1);
        flags.extend(floats(&[1.0]));
        assert_eq!(parse_embedding_file(&flags), Err(Error::UnsupportedFlags(6)));
    }

    #[test]
    fn csv_and_importance() {
        let t = parse_csv_tokens("# tokens\n1, 2\n\n3,4\n").unwrap();
        assert_eq!(t.as_slice(), &[1.0, 2.0, 3.0, 4.0]);
        assert!(matches!(
            parse_csv_tokens("1,2\n3\n"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(
            parse_csv_tokens("1,x\n"),
            Err(Error::Parse { line: 1, .. })
        ));
        assert_eq!(parse_csv_tokens(""), Err(Error::EmptyInput));
        assert_eq!(
            parse_importance("0.5, 1\n-2 3").unwrap(),
            vec![0.5, 1.0, -2.0, 3.0]
        );
        assert_eq!(parse_importance("inf"), Err(Error::NonFinite(0)));
    }

    #[test]
    fn load_detects_format() {
        assert!(matches!(load_payload(b"1,0\n0,1\n"), Ok(Payload::Embeddings(_))));
        let bytes = write_embedding_file(&Payload::Similarity(cases::case1())).unwrap();
        assert!(matches!(load_payload(&bytes), Ok(Payload::Similarity(_))));
        assert!(matches!(
            load_payload(&[0xff, 0xfe, 0, 0]),
            Err(Error::BadMagic(_))
        ));
    }
}
