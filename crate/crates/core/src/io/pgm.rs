//! 16-bit binary PGM (P5) depth images, samples big-endian.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::fusion::DepthFrame;

/// Raw units per meter in the TUM depth convention.
pub const DEFAULT_DEPTH_SCALE: f64 = 5000.0;

struct Header {
    width: u32,
    height: u32,
    data_offset: usize,
}

fn parse_header(path: &Path, bytes: &[u8]) -> Result<Header> {
    let err = |offset: usize, msg: String| Error::Format {
        path: path.to_path_buf(),
        offset,
        msg,
    };
    if !bytes.starts_with(b"P5") {
        return Err(err(0, "missing P5 magic".into()));
    }
    let mut pos = 2;
    let mut fields = [0u64; 3];
    for (i, field) in fields.iter_mut().enumerate() {
        loop {
            match bytes.get(pos) {
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                _ => break,
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if start == pos {
            let name = ["width", "height", "maxval"][i];
            return Err(err(start, format!("expected {name}")));
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| err(start, "number out of range".into()))?;
    }
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(err(
            pos,
            "expected a single whitespace byte after maxval".into(),
        ));
    }
    let [width, height, maxval] = fields;
    if maxval != 65535 {
        return Err(err(pos, format!("maxval {maxval}, expected 65535")));
    }
    if width == 0 || height == 0 || width > u32::MAX as u64 || height > u32::MAX as u64 {
        return Err(err(pos, format!("bad image size {width}x{height}")));
    }
    Ok(Header {
        width: width as u32,
        height: height as u32,
        data_offset: pos + 1,
    })
}

/// Reads a depth image; pixel meters are `raw / depth_scale`, raw 0 is invalid.
pub fn read_depth(path: &Path, depth_scale: f64, frame_index: u32) -> Result<DepthFrame> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_depth(path, &bytes, depth_scale, frame_index)
}

pub fn decode_depth(
    path: &Path,
    bytes: &[u8],
    depth_scale: f64,
    frame_index: u32,
) -> Result<DepthFrame> {
    let h = parse_header(path, bytes)?;
    let n = h.width as usize * h.height as usize;
    let data = &bytes[h.data_offset..];
    if data.len() < 2 * n {
        return Err(Error::Format {
            path: path.to_path_buf(),
            offset: bytes.len(),
            msg: format!("expected {} bytes of samples, found {}", 2 * n, data.len()),
        });
    }
    let depth = data[..2 * n]
        .chunks_exact(2)
        .map(|b| (u16::from_be_bytes([b[0], b[1]]) as f64 / depth_scale) as f32)
        .collect();
    Ok(DepthFrame::new(h.width, h.height, depth, frame_index))
}

/// Quantizes to `round(meters * depth_scale)`; invalid and negative depths map to 0.
pub fn encode_depth(frame: &DepthFrame, depth_scale: f64) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n65535\n", frame.width, frame.height).into_bytes();
    out.reserve(frame.depth.len() * 2);
    for &d in &frame.depth {
        let raw = if d > 0.0 && d.is_finite() {
            (d as f64 * depth_scale).round().min(65535.0) as u16
        } else {
            0
        };
        out.extend_from_slice(&raw.to_be_bytes());
    }
    out
}

pub fn write_depth(path: &Path, frame: &DepthFrame, depth_scale: f64) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&encode_depth(frame, depth_scale))
        .map_err(|e| Error::io(path, e))
}
