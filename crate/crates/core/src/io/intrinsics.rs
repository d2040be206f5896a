//! Single-line intrinsics file: `fx fy cx cy width height`.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::fusion::Intrinsics;

pub fn read_intrinsics(path: &Path) -> Result<Intrinsics> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_intrinsics(path, &text)
}

pub fn parse_intrinsics(path: &Path, text: &str) -> Result<Intrinsics> {
    let (line_no, body) = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .find(|(_, l)| !l.is_empty())
        .ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            msg: "no intrinsics line".into(),
        })?;
    let err = |msg: String| Error::Parse {
        path: path.to_path_buf(),
        line: line_no,
        msg,
    };
    let t: Vec<&str> = body.split_whitespace().collect();
    if t.len() != 6 {
        return Err(err(format!("expected 6 fields, found {}", t.len())));
    }
    let f = |s: &str| s.parse::<f64>().map_err(|e| err(format!("{s:?}: {e}")));
    let u = |s: &str| s.parse::<u32>().map_err(|e| err(format!("{s:?}: {e}")));
    let k = Intrinsics {
        fx: f(t[0])?,
        fy: f(t[1])?,
        cx: f(t[2])?,
        cy: f(t[3])?,
        width: u(t[4])?,
        height: u(t[5])?,
    };
    k.validate().map_err(|e| err(e.to_string()))?;
    Ok(k)
}

pub fn write_intrinsics(path: &Path, k: &Intrinsics) -> Result<()> {
    let text = format!(
        "{} {} {} {} {} {}\n",
        k.fx, k.fy, k.cx, k.cy, k.width, k.height
    );
    fs::write(path, text).map_err(|e| Error::io(path, e))
}
