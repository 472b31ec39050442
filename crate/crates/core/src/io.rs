//! Reading and writing feature matrices as NPY (v1.0) or headerless CSV.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;

const NPY_MAGIC: &[u8; 6] = b"\x93NUMPY";
const NPY_ALIGN: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Npy,
    Csv,
}

impl Format {
    /// Guesses the format from a file extension (`.npy` or `.csv`).
    pub fn from_path(path: &Path) -> Option<Format> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "npy" => Some(Format::Npy),
            "csv" => Some(Format::Csv),
            _ => None,
        }
    }
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "npy" => Ok(Format::Npy),
            "csv" => Ok(Format::Csv),
            other => Err(Error::InvalidConfig(format!("unknown matrix format '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct LoadOptions {
    /// Skip the first line of a CSV file.
    pub csv_header: bool,
}

pub fn load_matrix(path: impl AsRef<Path>, format: Format, opts: LoadOptions) -> Result<FeatureMatrix> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    match format {
        Format::Npy => parse_npy(&bytes),
        Format::Csv => {
            let text = std::str::from_utf8(&bytes).map_err(|e| Error::Parse {
                line: 0,
                message: format!("not valid UTF-8: {e}"),
            })?;
            parse_csv(text, opts.csv_header)
        }
    }
}

pub fn save_matrix(path: impl AsRef<Path>, matrix: &FeatureMatrix, format: Format) -> Result<()> {
    let path = path.as_ref();
    let bytes = match format {
        Format::Npy => to_npy_bytes(matrix),
        Format::Csv => to_csv_string(matrix).into_bytes(),
    };
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&bytes).map_err(|e| Error::io(path, e))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Element {
    F4,
    F8,
}

impl Element {
    fn size(self) -> usize {
        match self {
            Element::F4 => 4,
            Element::F8 => 8,
        }
    }
}

struct NpyHeader {
    element: Element,
    shape: Vec<usize>,
}

pub fn parse_npy(bytes: &[u8]) -> Result<FeatureMatrix> {
    if bytes.len() < 10 || &bytes[..6] != NPY_MAGIC {
        return Err(Error::MalformedHeader("missing NPY magic string".into()));
    }
    if bytes[6] != 1 || bytes[7] != 0 {
        return Err(Error::MalformedHeader(format!(
            "unsupported NPY version {}.{}",
            bytes[6], bytes[7]
        )));
    }
    let header_len = u16::from_le_bytes([bytes[8], bytes[9]]) as usize;
    let payload_start = 10 + header_len;
    if bytes.len() < payload_start {
        return Err(Error::MalformedHeader("header length exceeds file size".into()));
    }
    let header = std::str::from_utf8(&bytes[10..payload_start])
        .map_err(|_| Error::MalformedHeader("header is not ASCII".into()))?;
    let NpyHeader { element, shape } = parse_header(header)?;
    if shape.len() != 2 {
        return Err(Error::NotTwoDimensional(shape));
    }
    let (n, d) = (shape[0], shape[1]);
    let payload = &bytes[payload_start..];
    let expected = n
        .checked_mul(d)
        .and_then(|c| c.checked_mul(element.size()))
        .ok_or_else(|| Error::MalformedHeader("shape overflows".into()))?;
    if payload.len() != expected {
        return Err(Error::MalformedHeader(format!(
            "payload has {} bytes, shape ({n}, {d}) needs {expected}",
            payload.len()
        )));
    }
    let data: Vec<f64> = match element {
        Element::F8 => payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect(),
        Element::F4 => payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect(),
    };
    FeatureMatrix::from_flat(data, n, d)
}

fn parse_header(header: &str) -> Result<NpyHeader> {
    let body = header.trim_end_matches(['\n', ' ', '\0']).trim();
    let body = body
        .strip_prefix('{')
        .and_then(|b| b.strip_suffix('}'))
        .ok_or_else(|| Error::MalformedHeader(format!("header is not a dict: {header:?}")))?;

    let mut descr = None;
    let mut fortran = None;
    let mut shape = None;
    let mut rest = body.trim();
    while !rest.is_empty() {
        let (key, after) = take_quoted(rest)?;
        let after = after
            .trim_start()
            .strip_prefix(':')
            .ok_or_else(|| Error::MalformedHeader(format!("expected ':' after key '{key}'")))?
            .trim_start();
        let consumed = match key {
            "descr" => {
                let (value, after) = take_quoted(after)?;
                descr = Some(value.to_string());
                after
            }
            "fortran_order" => {
                if let Some(a) = after.strip_prefix("False") {
                    fortran = Some(false);
                    a
                } else if let Some(a) = after.strip_prefix("True") {
                    fortran = Some(true);
                    a
                } else {
                    return Err(Error::MalformedHeader("fortran_order is not a bool".into()));
                }
            }
            "shape" => {
                let close = after
                    .find(')')
                    .ok_or_else(|| Error::MalformedHeader("unterminated shape tuple".into()))?;
                let inner = after
                    .strip_prefix('(')
                    .ok_or_else(|| Error::MalformedHeader("shape is not a tuple".into()))?;
                let dims = inner[..close - 1]
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| {
                        s.trim_end_matches('L').parse::<usize>().map_err(|_| {
                            Error::MalformedHeader(format!("bad shape entry '{s}'"))
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                shape = Some(dims);
                &after[close + 1..]
            }
            other => return Err(Error::MalformedHeader(format!("unexpected key '{other}'"))),
        };
        rest = consumed.trim_start();
        rest = rest.strip_prefix(',').unwrap_or(rest).trim_start();
    }

    let descr = descr.ok_or_else(|| Error::MalformedHeader("missing 'descr'".into()))?;
    let fortran = fortran.ok_or_else(|| Error::MalformedHeader("missing 'fortran_order'".into()))?;
    let shape = shape.ok_or_else(|| Error::MalformedHeader("missing 'shape'".into()))?;
    let element = match descr.as_str() {
        "<f8" => Element::F8,
        "<f4" => Element::F4,
        other => return Err(Error::UnsupportedElementType(other.to_string())),
    };
    if fortran {
        return Err(Error::UnsupportedLayout(
            "fortran_order=True is not supported".into(),
        ));
    }
    Ok(NpyHeader { element, shape })
}

fn take_quoted(s: &str) -> Result<(&str, &str)> {
    let quote = s
        .chars()
        .next()
        .filter(|c| *c == '\'' || *c == '"')
        .ok_or_else(|| Error::MalformedHeader(format!("expected quoted string at {s:?}")))?;
    let inner = &s[1..];
    let end = inner
        .find(quote)
        .ok_or_else(|| Error::MalformedHeader("unterminated string".into()))?;
    Ok((&inner[..end], &inner[end + 1..]))
}

pub fn to_npy_bytes(matrix: &FeatureMatrix) -> Vec<u8> {
    let mut header = format!(
        "{{'descr': '<f8', 'fortran_order': False, 'shape': ({}, {}), }}",
        matrix.n(),
        matrix.dim()
    );
    let unpadded = 10 + header.len() + 1;
    let pad = (NPY_ALIGN - unpadded % NPY_ALIGN) % NPY_ALIGN;
    header.extend(std::iter::repeat_n(' ', pad));
    header.push('\n');

    let mut out = Vec::with_capacity(10 + header.len() + matrix.footprint_bytes());
    out.extend_from_slice(NPY_MAGIC);
    out.extend_from_slice(&[1, 0]);
    out.extend_from_slice(&(header.len() as u16).to_le_bytes());
    out.extend_from_slice(header.as_bytes());
    for v in matrix.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn parse_csv(text: &str, skip_header: bool) -> Result<FeatureMatrix> {
    let mut data = Vec::new();
    let mut d = None;
    let mut n = 0;
    for (lineno, line) in text.lines().enumerate().skip(usize::from(skip_header)) {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let before = data.len();
        for (col, field) in line.split(',').enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| Error::Parse {
                line: lineno + 1,
                message: format!("column {col}: '{}' is not a number", field.trim()),
            })?;
            if !v.is_finite() {
                return Err(Error::NonFinite { row: n, col });
            }
            data.push(v);
        }
        let width = data.len() - before;
        match d {
            None => d = Some(width),
            Some(d) if d != width => {
                return Err(Error::Parse {
                    line: lineno + 1,
                    message: format!("expected {d} columns, found {width}"),
                })
            }
            _ => {}
        }
        n += 1;
    }
    let d = d.ok_or_else(|| Error::InvalidMatrix("CSV contains no rows".into()))?;
    FeatureMatrix::from_flat(data, n, d)
}

pub fn to_csv_string(matrix: &FeatureMatrix) -> String {
    let mut out = String::new();
    for row in matrix.rows() {
        let line: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}
