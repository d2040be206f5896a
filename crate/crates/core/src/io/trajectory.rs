//! TUM-style trajectories: `timestamp tx ty tz qx qy qz qw` per line.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::{Quaternion, UnitQuaternion};

use crate::error::{Error, Result};
use crate::fusion::Pose;

/// Quaternions whose norm is further than this from 1 are reported before normalizing.
pub const UNIT_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stamped {
    pub timestamp: f64,
    pub pose: Pose,
}

pub fn read_trajectory(path: &Path) -> Result<Vec<Stamped>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_trajectory(path, &text)
}

pub fn parse_trajectory(path: &Path, text: &str) -> Result<Vec<Stamped>> {
    let mut out: Vec<Stamped> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let err = |msg: String| Error::Parse {
            path: path.to_path_buf(),
            line: line_no,
            msg,
        };
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let v: Vec<f64> = body
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|e| err(format!("{t:?}: {e}"))))
            .collect::<Result<_>>()?;
        if v.len() != 8 {
            return Err(err(format!("expected 8 fields, found {}", v.len())));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(err("non-finite value".into()));
        }
        let q = Quaternion::new(v[7], v[4], v[5], v[6]);
        let norm = q.norm();
        if norm == 0.0 {
            return Err(err("zero quaternion".into()));
        }
        if (norm - 1.0).abs() > UNIT_TOLERANCE {
            log::warn!(
                "{}:{line_no}: quaternion norm {norm}, normalizing",
                path.display()
            );
        }
        if let Some(prev) = out.last() {
            if v[0] <= prev.timestamp {
                return Err(err(format!(
                    "timestamp {} does not increase (previous {})",
                    v[0], prev.timestamp
                )));
            }
        }
        out.push(Stamped {
            timestamp: v[0],
            pose: Pose::from_quaternion([v[1], v[2], v[3]], UnitQuaternion::from_quaternion(q)),
        });
    }
    Ok(out)
}

pub fn format_trajectory(poses: &[Stamped]) -> String {
    let mut s = String::from("# timestamp tx ty tz qx qy qz qw\n");
    for p in poses {
        let t = p.pose.translation;
        let q = p.pose.quaternion();
        let _ = writeln!(
            s,
            "{} {} {} {} {} {} {} {}",
            p.timestamp, t.x, t.y, t.z, q.i, q.j, q.k, q.w
        );
    }
    s
}

pub fn write_trajectory(path: &Path, poses: &[Stamped]) -> Result<()> {
    fs::write(path, format_trajectory(poses)).map_err(|e| Error::io(path, e))
}
