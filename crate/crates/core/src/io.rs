//! Image files: binary/ASCII graymaps (P5/P2) and plain-text real grids.
//!
//! Real-valued fields are stored losslessly as text grids, one row per line,
//! values separated by single spaces in shortest round-trip decimal form. The
//! 16-bit graymap is for viewing; integer fields in `0..=65535` are written
//! verbatim, anything else is rescaled and the factor recorded in a
//! `# scale <s>` comment that [`read_image`] honours.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{Mask, ScalarField};

const SCALE_TAG: &str = "scale";

fn is_raw_u16(field: &ScalarField) -> bool {
    field
        .iter()
        .all(|&v| v.fract() == 0.0 && (0.0..=65535.0).contains(&v))
}

/// Encodes a field as a 16-bit binary graymap.
pub fn encode_pgm16(field: &ScalarField) -> Vec<u8> {
    let (scale, comment) = if is_raw_u16(field) {
        (1.0, String::new())
    } else {
        let max = field.iter().fold(0.0f64, |m, &v| if v.is_finite() { m.max(v) } else { m });
        let s = if max > 0.0 { 65535.0 / max } else { 1.0 };
        (s, format!("# {SCALE_TAG} {s}\n"))
    };
    let mut out = format!("P5\n{comment}{} {}\n65535\n", field.width(), field.height()).into_bytes();
    out.reserve(field.len() * 2);
    for &v in field.iter() {
        let q = if v.is_finite() {
            (v * scale).round().clamp(0.0, 65535.0) as u16
        } else {
            0
        };
        out.extend_from_slice(&q.to_be_bytes());
    }
    out
}

/// Encodes a mask as an 8-bit binary graymap with values {0, 255}.
pub fn encode_mask_pgm(mask: &Mask) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", mask.width(), mask.height()).into_bytes();
    out.extend(mask.iter().map(|&b| if b { 255u8 } else { 0u8 }));
    out
}

pub fn encode_text_grid(field: &ScalarField) -> String {
    let mut out = String::new();
    for y in 0..field.height() {
        let row: Vec<String> = (0..field.width()).map(|x| format!("{}", field[(x, y)])).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

pub fn decode_text_grid(text: &str) -> Result<ScalarField> {
    let mut data = Vec::new();
    let mut width = None;
    let mut height = 0;
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Format(format!("line {}: {e}", ln + 1)))?;
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(Error::Format(format!(
                    "line {}: expected {w} values, found {}",
                    ln + 1,
                    row.len()
                )))
            }
            _ => {}
        }
        data.extend(row);
        height += 1;
    }
    let width = width.ok_or_else(|| Error::Format("empty grid".into()))?;
    ScalarField::from_vec(width, height, data).ok_or_else(|| Error::Format("ragged grid".into()))
}

struct Header {
    width: usize,
    height: usize,
    maxval: u32,
    scale: f64,
    /// Offset of the first raster byte (binary) or of the first sample token (ASCII).
    data_start: usize,
}

/// Parses a P2/P5 header, collecting `# scale` comments on the way.
fn parse_header(bytes: &[u8]) -> Result<Header> {
    let mut pos = 2;
    let mut fields = Vec::with_capacity(3);
    let mut scale = 1.0;
    while fields.len() < 3 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos >= bytes.len() {
            return Err(Error::Format("truncated graymap header".into()));
        }
        if bytes[pos] == b'#' {
            let end = bytes[pos..].iter().position(|&b| b == b'\n').map_or(bytes.len(), |e| pos + e);
            let comment = String::from_utf8_lossy(&bytes[pos + 1..end]);
            let mut parts = comment.split_whitespace();
            if parts.next() == Some(SCALE_TAG) {
                scale = parts
                    .next()
                    .and_then(|s| s.parse::<f64>().ok())
                    .filter(|s| *s > 0.0 && s.is_finite())
                    .ok_or_else(|| Error::Format("bad scale comment".into()))?;
            }
            pos = end;
            continue;
        }
        let start = pos;
        while pos < bytes.len() && bytes[pos].is_ascii_digit() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Format("malformed graymap header".into()));
        }
        let v: u64 = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Format("malformed graymap header".into()))?;
        fields.push(v);
    }
    let (width, height, maxval) = (fields[0] as usize, fields[1] as usize, fields[2]);
    if width == 0 || height == 0 || maxval == 0 || maxval > 65535 {
        return Err(Error::Format("unsupported graymap dimensions or maxval".into()));
    }
    // exactly one whitespace byte separates the header from the raster
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(Error::Format("truncated graymap header".into()));
    }
    Ok(Header {
        width,
        height,
        maxval: maxval as u32,
        scale,
        data_start: pos + 1,
    })
}

/// Decodes P5 (8- or 16-bit) and P2 graymaps. Sample values are returned as
/// stored, divided by the recorded scale if any.
pub fn decode_pgm(bytes: &[u8]) -> Result<ScalarField> {
    if bytes.len() < 2 || bytes[0] != b'P' || !(bytes[1] == b'5' || bytes[1] == b'2') {
        return Err(Error::Format("not a P2/P5 graymap".into()));
    }
    let h = parse_header(bytes)?;
    let n = h.width * h.height;
    let mut data = Vec::with_capacity(n);
    if bytes[1] == b'5' {
        let raster = &bytes[h.data_start..];
        if h.maxval < 256 {
            if raster.len() < n {
                return Err(Error::Format("truncated raster".into()));
            }
            data.extend(raster[..n].iter().map(|&b| b as f64));
        } else {
            if raster.len() < 2 * n {
                return Err(Error::Format("truncated raster".into()));
            }
            data.extend(
                raster[..2 * n]
                    .chunks_exact(2)
                    .map(|c| u16::from_be_bytes([c[0], c[1]]) as f64),
            );
        }
    } else {
        let text = std::str::from_utf8(&bytes[h.data_start..])
            .map_err(|_| Error::Format("non-ASCII P2 raster".into()))?;
        for tok in text.split_whitespace().take(n) {
            data.push(
                tok.parse::<u32>()
                    .map_err(|_| Error::Format(format!("bad sample '{tok}'")))? as f64,
            );
        }
        if data.len() < n {
            return Err(Error::Format("truncated raster".into()));
        }
    }
    if h.scale != 1.0 {
        for v in &mut data {
            *v /= h.scale;
        }
    }
    Ok(ScalarField::from_vec(h.width, h.height, data).expect("size checked"))
}

/// Decodes any supported image by sniffing its first bytes.
pub fn decode_image(bytes: &[u8]) -> Result<ScalarField> {
    if bytes.starts_with(b"P5") || bytes.starts_with(b"P2") {
        decode_pgm(bytes)
    } else {
        let text = std::str::from_utf8(bytes)
            .map_err(|_| Error::Format("neither a graymap nor a text grid".into()))?;
        decode_text_grid(text)
    }
}

pub fn read_image(path: &Path) -> Result<ScalarField> {
    let bytes = fs::read(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    decode_image(&bytes).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

/// Reads a mask image; any non-zero sample is foreground.
pub fn read_mask(path: &Path) -> Result<Mask> {
    Ok(read_image(path)?.map(|&v| v > 0.0))
}

pub fn write_pgm16(path: &Path, field: &ScalarField) -> Result<()> {
    fs::write(path, encode_pgm16(field)).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

pub fn write_mask(path: &Path, mask: &Mask) -> Result<()> {
    fs::write(path, encode_mask_pgm(mask)).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

pub fn write_text_grid(path: &Path, field: &ScalarField) -> Result<()> {
    fs::write(path, encode_text_grid(field))
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}
