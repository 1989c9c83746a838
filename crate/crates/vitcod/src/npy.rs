//! Reading and writing the `.npy` v1.0 array format, restricted subset.
//!
//! Accepted files: magic `\x93NUMPY`, version 1.0, a header dict with
//! `descr` of `<f4` or `<f8`, `fortran_order: False`, and a shape tuple of
//! at most 4 dims; payload little-endian row-major. Anything else is
//! rejected rather than silently converted. [`write_array`] emits the same
//! subset with a canonical header (fixed key order, 64-byte alignment), so
//! write -> load -> write reproduces files byte for byte.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::{DType, DenseTensor};

const MAGIC: &[u8; 6] = b"\x93NUMPY";

/// Loads a tensor from a `.npy` file.
pub fn load_array(path: &Path) -> Result<DenseTensor> {
    let file = File::open(path)?;
    let mut reader = BufReader::new(file);
    read_array(&mut reader)
}

/// Writes a tensor as a canonical `.npy` file.
pub fn write_array(path: &Path, tensor: &DenseTensor) -> Result<()> {
    let file = File::create(path)?;
    let mut writer = BufWriter::new(file);
    emit_array(&mut writer, tensor)?;
    writer.flush()?;
    Ok(())
}

/// Reads one array from a stream positioned at the magic bytes.
pub fn read_array<R: Read>(reader: &mut R) -> Result<DenseTensor> {
    let mut magic = [0u8; 6];
    reader
        .read_exact(&mut magic)
        .map_err(|_| Error::Format("file shorter than the magic prefix".into()))?;
    if &magic != MAGIC {
        return Err(Error::Format("bad magic bytes, not an npy file".into()));
    }
    let mut version = [0u8; 2];
    reader
        .read_exact(&mut version)
        .map_err(|_| Error::Format("missing version bytes".into()))?;
    if version != [1, 0] {
        return Err(Error::Unsupported(format!(
            "npy version {}.{} (only 1.0 supported)",
            version[0], version[1]
        )));
    }
    let mut len_bytes = [0u8; 2];
    reader
        .read_exact(&mut len_bytes)
        .map_err(|_| Error::Format("missing header length".into()))?;
    let header_len = u16::from_le_bytes(len_bytes) as usize;
    let mut header = vec![0u8; header_len];
    reader
        .read_exact(&mut header)
        .map_err(|_| Error::Format("header shorter than declared".into()))?;
    let header = std::str::from_utf8(&header)
        .map_err(|_| Error::Format("header is not valid ASCII/UTF-8".into()))?;

    let (dtype, shape) = parse_header(header)?;
    let count: usize = shape.iter().product();
    let mut payload = Vec::with_capacity(count * dtype.size());
    reader.read_to_end(&mut payload)?;
    if payload.len() != count * dtype.size() {
        return Err(Error::Corrupt(format!(
            "payload holds {} bytes, header promises {} elements of {} bytes",
            payload.len(),
            count,
            dtype.size()
        )));
    }

    let data: Vec<f64> = match dtype {
        DType::F32 => payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect(),
        DType::F64 => payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes([c[0], c[1], c[2], c[3], c[4], c[5], c[6], c[7]]))
            .collect(),
    };
    DenseTensor::with_dtype(shape, data, dtype)
}

/// Writes one array to a stream (canonical header).
pub fn emit_array<W: Write>(writer: &mut W, tensor: &DenseTensor) -> Result<()> {
    let shape_str = match tensor.shape() {
        [d] => format!("({d},)"),
        dims => {
            let joined: Vec<String> = dims.iter().map(|d| d.to_string()).collect();
            format!("({})", joined.join(", "))
        }
    };
    let dict = format!(
        "{{'descr': '{}', 'fortran_order': False, 'shape': {}, }}",
        tensor.dtype().descr(),
        shape_str
    );
    // Pad with spaces so magic + version + length + dict + '\n' is a
    // multiple of 64, then terminate with a newline.
    let unpadded = MAGIC.len() + 2 + 2 + dict.len() + 1;
    let pad = (64 - unpadded % 64) % 64;
    let header_len = dict.len() + pad + 1;
    if header_len > u16::MAX as usize {
        return Err(Error::Format("header too large".into()));
    }

    writer.write_all(MAGIC)?;
    writer.write_all(&[1, 0])?;
    writer.write_all(&(header_len as u16).to_le_bytes())?;
    writer.write_all(dict.as_bytes())?;
    writer.write_all(&b" ".repeat(pad))?;
    writer.write_all(b"\n")?;

    match tensor.dtype() {
        DType::F32 => {
            for &x in tensor.data() {
                writer.write_all(&(x as f32).to_le_bytes())?;
            }
        }
        DType::F64 => {
            for &x in tensor.data() {
                writer.write_all(&x.to_le_bytes())?;
            }
        }
    }
    Ok(())
}

/// Parses the python-literal header dict of the supported subset.
fn parse_header(header: &str) -> Result<(DType, Vec<usize>)> {
    let body = header.trim();
    let body = body
        .strip_prefix('{')
        .and_then(|s| s.strip_suffix('}'))
        .ok_or_else(|| Error::Format("header dict missing braces".into()))?;

    let mut descr = None;
    let mut fortran = None;
    let mut shape = None;
    for (key, value) in iter_dict_entries(body) {
        match key {
            "descr" => {
                let v = value.trim_matches(|c| c == '\'' || c == '"');
                descr = Some(match v {
                    "<f4" => DType::F32,
                    "<f8" => DType::F64,
                    other => {
                        return Err(Error::Unsupported(format!(
                            "element type '{other}' (only '<f4'/'<f8' supported)"
                        )))
                    }
                });
            }
            "fortran_order" => {
                fortran = Some(match value {
                    "False" => false,
                    "True" => {
                        return Err(Error::Unsupported(
                            "fortran_order arrays are not supported".into(),
                        ))
                    }
                    other => return Err(Error::Format(format!("bad fortran_order '{other}'"))),
                });
            }
            "shape" => {
                let inner = value
                    .strip_prefix('(')
                    .and_then(|s| s.strip_suffix(')'))
                    .ok_or_else(|| Error::Format("shape is not a tuple".into()))?;
                let mut dims = Vec::new();
                for part in inner.split(',') {
                    let part = part.trim();
                    if part.is_empty() {
                        continue; // trailing comma of 1-tuples
                    }
                    let d: usize = part
                        .parse()
                        .map_err(|_| Error::Format(format!("bad shape entry '{part}'")))?;
                    dims.push(d);
                }
                if dims.is_empty() || dims.len() > 4 {
                    return Err(Error::Unsupported(format!(
                        "shape with {} dims (1..=4 supported)",
                        dims.len()
                    )));
                }
                shape = Some(dims);
            }
            other => return Err(Error::Format(format!("unexpected header key '{other}'"))),
        }
    }

    match (descr, fortran, shape) {
        (Some(d), Some(false), Some(s)) => Ok((d, s)),
        _ => Err(Error::Format(
            "header missing descr/fortran_order/shape".into(),
        )),
    }
}

/// Splits `'k': v` entries of the flat header dict, respecting the one
/// nesting level introduced by the shape tuple.
fn iter_dict_entries(body: &str) -> Vec<(&str, &str)> {
    let mut entries = Vec::new();
    let mut depth = 0usize;
    let mut start = 0usize;
    let bytes = body.as_bytes();
    for (i, &b) in bytes.iter().enumerate() {
        match b {
            b'(' => depth += 1,
            b')' => depth = depth.saturating_sub(1),
            b',' if depth == 0 => {
                push_entry(&mut entries, &body[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    push_entry(&mut entries, &body[start..]);
    entries
}

fn push_entry<'a>(entries: &mut Vec<(&'a str, &'a str)>, chunk: &'a str) {
    let chunk = chunk.trim();
    if chunk.is_empty() {
        return;
    }
    if let Some(colon) = chunk.find(':') {
        let key = chunk[..colon]
            .trim()
            .trim_matches(|c| c == '\'' || c == '"');
        let value = chunk[colon + 1..].trim();
        entries.push((key, value));
    }
}
