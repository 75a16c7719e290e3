//! Binary graymap (P5) reading and writing.
//!
//! The writer always emits `P5\n<width> <height>\n255\n` followed by the
//! row-major bytes, so exported masks and reconstructions round-trip
//! bit-exactly. The reader also accepts `#` comments in the header.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, PgmError, Result};
use crate::image::Dims;

/// Parses a P5 graymap into its dimensions and pixel bytes.
pub fn decode(bytes: &[u8]) -> Result<(Dims, &[u8]), PgmError> {
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return Err(PgmError::BadMagic { offset: 0 });
    }
    let mut pos = 2;
    let (width, _) = header_token(bytes, &mut pos, "width")?;
    let (height, _) = header_token(bytes, &mut pos, "height")?;
    let (maxval, maxval_offset) = header_token(bytes, &mut pos, "maxval")?;
    if maxval == 0 {
        return Err(PgmError::MalformedHeader {
            offset: maxval_offset,
            reason: "maxval must be positive".into(),
        });
    }
    if maxval > 255 {
        return Err(PgmError::UnsupportedDepth {
            offset: maxval_offset,
            maxval,
        });
    }
    if width == 0 || height == 0 {
        return Err(PgmError::MalformedHeader {
            offset: pos,
            reason: format!("zero-sized image {width}x{height}"),
        });
    }
    // exactly one whitespace byte separates maxval from the raster
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => {
            return Err(PgmError::MalformedHeader {
                offset: pos,
                reason: "expected a single whitespace byte after maxval".into(),
            })
        }
    }
    let expected = width as usize * height as usize;
    let found = bytes.len() - pos;
    if found < expected {
        return Err(PgmError::Truncated {
            offset: bytes.len(),
            expected,
            found,
        });
    }
    Ok((
        Dims::new(width as usize, height as usize),
        &bytes[pos..pos + expected],
    ))
}

/// Reads one decimal header field, returning it with its starting offset.
fn header_token(bytes: &[u8], pos: &mut usize, what: &str) -> Result<(u32, usize), PgmError> {
    // skip whitespace and comments
    loop {
        match bytes.get(*pos) {
            Some(b) if b.is_ascii_whitespace() => *pos += 1,
            Some(b'#') => {
                while let Some(&b) = bytes.get(*pos) {
                    *pos += 1;
                    if b == b'\n' {
                        break;
                    }
                }
            }
            _ => break,
        }
    }
    let start = *pos;
    while bytes.get(*pos).is_some_and(u8::is_ascii_digit) {
        *pos += 1;
    }
    if start == *pos {
        let reason = if *pos >= bytes.len() {
            format!("unexpected end of file while reading {what}")
        } else {
            format!("expected a decimal {what}")
        };
        return Err(PgmError::MalformedHeader {
            offset: start,
            reason,
        });
    }
    std::str::from_utf8(&bytes[start..*pos])
        .ok()
        .and_then(|s| s.parse::<u32>().ok())
        .map(|v| (v, start))
        .ok_or_else(|| PgmError::MalformedHeader {
            offset: start,
            reason: format!("{what} does not fit in 32 bits"),
        })
}

/// Serializes a graymap in the canonical form.
pub fn encode(dims: Dims, pixels: &[u8]) -> Vec<u8> {
    assert_eq!(dims.len(), pixels.len(), "pixel count must match dims");
    let mut out = format!("P5\n{} {}\n255\n", dims.width, dims.height).into_bytes();
    out.extend_from_slice(pixels);
    out
}

pub fn write_pgm(path: impl AsRef<Path>, dims: Dims, pixels: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&encode(dims, pixels))
        .map_err(|e| Error::io(path, e))
}
