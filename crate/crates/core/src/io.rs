//! File formats: DiaQ binary, DiaQ JSON and Matrix Market coordinate.

use std::io::{BufRead, Read, Write};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::diagmat::{diag_length, DenseMatrix, DiagMatrix, Diagonal, Scalar, ZERO};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 5] = b"DIAQ1";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Binary,
    Json,
    MatrixMarket,
}

impl Format {
    /// Guesses from the extension: `.json`, `.mtx`, anything else is binary.
    pub fn from_path(path: &std::path::Path) -> Format {
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => Format::Json,
            Some("mtx") | Some("mm") => Format::MatrixMarket,
            _ => Format::Binary,
        }
    }
}

pub fn write_binary<W: Write>(m: &DiagMatrix, mut w: W) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&(m.dim() as u64).to_le_bytes())?;
    w.write_all(&(m.nnzd() as u64).to_le_bytes())?;
    for d in m.diagonals() {
        w.write_all(&(d.offset as i64).to_le_bytes())?;
        for v in &d.values {
            w.write_all(&v.re.to_le_bytes())?;
            w.write_all(&v.im.to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)
        .map_err(|_| Error::Format("truncated DiaQ header".into()))?;
    Ok(u64::from_le_bytes(buf))
}

pub fn read_binary<R: Read>(mut r: R) -> Result<DiagMatrix> {
    let mut magic = [0u8; 5];
    r.read_exact(&mut magic)
        .map_err(|_| Error::Format("file too short for DiaQ magic".into()))?;
    if &magic != MAGIC {
        return Err(Error::Format("bad magic, expected DIAQ1".into()));
    }
    let n = read_u64(&mut r)? as usize;
    let count = read_u64(&mut r)? as usize;
    if n == 0 {
        return Err(Error::Format("dimension must be positive".into()));
    }
    if count > 2 * n - 1 {
        return Err(Error::Format(format!("{count} diagonals for dimension {n}")));
    }
    let mut diagonals = Vec::with_capacity(count);
    let mut buf = [0u8; 16];
    for _ in 0..count {
        let offset = read_u64(&mut r)? as i64 as isize;
        let len = diag_length(n, offset).map_err(|e| Error::Format(e.to_string()))?;
        let mut values = Vec::with_capacity(len);
        for _ in 0..len {
            r.read_exact(&mut buf)
                .map_err(|_| Error::Format(format!("truncated values on diagonal {offset}")))?;
            let re = f64::from_le_bytes(buf[..8].try_into().unwrap());
            let im = f64::from_le_bytes(buf[8..].try_into().unwrap());
            values.push(Complex64::new(re, im));
        }
        diagonals.push(Diagonal { offset, values });
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::Format("trailing bytes after last diagonal".into()));
    }
    DiagMatrix::new(n, diagonals)
}

#[derive(Serialize, Deserialize)]
struct JsonDiag {
    offset: isize,
    values: Vec<[f64; 2]>,
}

#[derive(Serialize, Deserialize)]
struct JsonMatrix {
    n: usize,
    diags: Vec<JsonDiag>,
}

pub fn write_json<W: Write>(m: &DiagMatrix, w: W) -> Result<()> {
    let doc = JsonMatrix {
        n: m.dim(),
        diags: m
            .diagonals()
            .iter()
            .map(|d| JsonDiag {
                offset: d.offset,
                values: d.values.iter().map(|v| [v.re, v.im]).collect(),
            })
            .collect(),
    };
    serde_json::to_writer(w, &doc)?;
    Ok(())
}

pub fn read_json<R: Read>(r: R) -> Result<DiagMatrix> {
    let doc: JsonMatrix = serde_json::from_reader(r)?;
    let diagonals = doc
        .diags
        .into_iter()
        .map(|d| Diagonal {
            offset: d.offset,
            values: d.values.into_iter().map(|[re, im]| Complex64::new(re, im)).collect(),
        })
        .collect();
    DiagMatrix::new(doc.n, diagonals).map_err(|e| Error::Format(e.to_string()))
}

/// Coordinate format, `complex general`, one line per stored nonzero.
pub fn write_matrix_market<W: Write>(m: &DiagMatrix, mut w: W) -> Result<()> {
    writeln!(w, "%%MatrixMarket matrix coordinate complex general")?;
    let entries: Vec<(usize, usize, Scalar)> = m
        .diagonals()
        .iter()
        .flat_map(|d| d.entries())
        .filter(|(_, _, v)| *v != ZERO)
        .collect();
    writeln!(w, "{} {} {}", m.dim(), m.dim(), entries.len())?;
    for (i, j, v) in entries {
        writeln!(w, "{} {} {:e} {:e}", i + 1, j + 1, v.re, v.im)?;
    }
    Ok(())
}

/// Accepts `real`, `integer`, `pattern` and `complex` fields with
/// `general`, `symmetric` or `hermitian` symmetry.
pub fn read_matrix_market<R: BufRead>(r: R) -> Result<DiagMatrix> {
    let mut lines = r.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Format("empty Matrix Market file".into()))??;
    let words: Vec<String> = header.split_whitespace().map(str::to_ascii_lowercase).collect();
    if words.len() < 5 || words[0] != "%%matrixmarket" || words[1] != "matrix" {
        return Err(Error::Format("missing %%MatrixMarket matrix header".into()));
    }
    if words[2] != "coordinate" {
        return Err(Error::Format("only coordinate Matrix Market files are supported".into()));
    }
    let field = words[3].as_str();
    if !matches!(field, "real" | "integer" | "pattern" | "complex") {
        return Err(Error::Format(format!("unsupported field `{field}`")));
    }
    let symmetry = words[4].as_str();
    if !matches!(symmetry, "general" | "symmetric" | "hermitian") {
        return Err(Error::Format(format!("unsupported symmetry `{symmetry}`")));
    }

    let mut body = lines.filter(|l| match l {
        Ok(l) => !l.trim().is_empty() && !l.starts_with('%'),
        Err(_) => true,
    });
    let size_line = body
        .next()
        .ok_or_else(|| Error::Format("missing size line".into()))??;
    let size: Vec<usize> = size_line
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| Error::Format(format!("bad size line `{size_line}`"))))
        .collect::<Result<_>>()?;
    if size.len() != 3 {
        return Err(Error::Format(format!("bad size line `{size_line}`")));
    }
    if size[0] != size[1] {
        return Err(Error::Shape(format!("{}x{} matrix is not square", size[0], size[1])));
    }
    let n = size[0];
    let mut dense = DenseMatrix::zeros(n);
    let mut seen = 0;
    for line in body {
        let line = line?;
        let tok: Vec<&str> = line.split_whitespace().collect();
        let bad = || Error::Format(format!("bad entry line `{line}`"));
        let want = match field {
            "pattern" => 2,
            "complex" => 4,
            _ => 3,
        };
        if tok.len() < want {
            return Err(bad());
        }
        let i: usize = tok[0].parse().map_err(|_| bad())?;
        let j: usize = tok[1].parse().map_err(|_| bad())?;
        if i == 0 || j == 0 || i > n || j > n {
            return Err(Error::Format(format!("entry ({i}, {j}) outside {n}x{n}")));
        }
        let num = |k: usize| tok[k].parse::<f64>().map_err(|_| bad());
        let v = match field {
            "pattern" => Complex64::new(1.0, 0.0),
            "complex" => Complex64::new(num(2)?, num(3)?),
            _ => Complex64::new(num(2)?, 0.0),
        };
        let (i, j) = (i - 1, j - 1);
        dense[(i, j)] += v;
        if i != j {
            match symmetry {
                "symmetric" => dense[(j, i)] += v,
                "hermitian" => dense[(j, i)] += v.conj(),
                _ => {}
            }
        }
        seen += 1;
    }
    if seen != size[2] {
        return Err(Error::Format(format!("expected {} entries, found {seen}", size[2])));
    }
    DiagMatrix::from_dense(&dense)
}

pub fn read_path(path: &std::path::Path) -> Result<DiagMatrix> {
    let file = std::io::BufReader::new(std::fs::File::open(path)?);
    match Format::from_path(path) {
        Format::Binary => read_binary(file),
        Format::Json => read_json(file),
        Format::MatrixMarket => read_matrix_market(file),
    }
}

pub fn write_format<W: Write>(m: &DiagMatrix, format: Format, w: W) -> Result<()> {
    match format {
        Format::Binary => write_binary(m, w),
        Format::Json => write_json(m, w),
        Format::MatrixMarket => write_matrix_market(m, w),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> DiagMatrix {
        DiagMatrix::new(
            4,
            vec![
                Diagonal { offset: -3, values: vec![Complex64::new(5.0, -1.0)] },
                Diagonal {
                    offset: 0,
                    values: vec![
                        Complex64::new(1.0, 0.0),
                        Complex64::new(0.0, 0.0),
                        Complex64::new(-2.5, 0.25),
                        Complex64::new(1e-300, 3.0),
                    ],
                },
                Diagonal { offset: 2, values: vec![Complex64::new(0.1, 0.2); 2] },
            ],
        )
        .unwrap()
    }

    #[test]
    fn binary_round_trip_and_layout() {
        let m = sample();
        let mut buf = Vec::new();
        write_binary(&m, &mut buf).unwrap();
        assert_eq!(&buf[..5], b"DIAQ1");
        assert_eq!(u64::from_le_bytes(buf[5..13].try_into().unwrap()), 4);
        assert_eq!(u64::from_le_bytes(buf[13..21].try_into().unwrap()), 3);
        assert_eq!(i64::from_le_bytes(buf[21..29].try_into().unwrap()), -3);
        assert_eq!(buf.len(), 21 + 3 * 8 + (1 + 4 + 2) * 16);
        assert_eq!(read_binary(&buf[..]).unwrap(), m);
    }

    #[test]
    fn binary_rejects_garbage() {
        assert!(read_binary(&b"DIAQ2"[..]).is_err());
        let mut buf = Vec::new();
        write_binary(&sample(), &mut buf).unwrap();
        assert!(read_binary(&buf[..buf.len() - 1]).is_err());
        buf.push(0);
        assert!(read_binary(&buf[..]).is_err());
    }

    #[test]
    fn json_round_trip() {
        let m = sample();
        let mut buf = Vec::new();
        write_json(&m, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("{\"n\":4,\"diags\":[{\"offset\":-3,\"values\":[[5.0,-1.0]]}"));
        assert_eq!(read_json(&buf[..]).unwrap(), m);
    }

    #[test]
    fn matrix_market_round_trip() {
        let m = sample();
        let mut buf = Vec::new();
        write_matrix_market(&m, &mut buf).unwrap();
        assert_eq!(read_matrix_market(&buf[..]).unwrap(), m);
    }

    #[test]
    fn matrix_market_real_symmetric() {
        let text = "%%MatrixMarket matrix coordinate real symmetric\n% comment\n3 3 2\n1 1 2.0\n3 1 -1\n";
        let m = read_matrix_market(text.as_bytes()).unwrap();
        assert_eq!(m.offsets(), vec![-2, 0, 2]);
        assert_eq!(m.get(0, 2).unwrap(), Complex64::new(-1.0, 0.0));
        assert!(read_matrix_market("%%MatrixMarket matrix coordinate real general\n2 3 0\n".as_bytes()).is_err());
        assert!(read_matrix_market("%%MatrixMarket matrix array real general\n2 2\n".as_bytes()).is_err());
    }
}
