//! Dataset directories: `depth/NNNNNN.pgm`, `trajectory.txt`, `intrinsics.txt`.

use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use super::intrinsics::read_intrinsics;
use super::pgm::read_depth;
use super::trajectory::{read_trajectory, Stamped};
use crate::error::{Error, Result};
use crate::fusion::{DepthFrame, Intrinsics};

pub const DEPTH_DIR: &str = "depth";
pub const TRAJECTORY_FILE: &str = "trajectory.txt";
pub const INTRINSICS_FILE: &str = "intrinsics.txt";

#[derive(Debug, Clone)]
pub struct Dataset {
    pub root: PathBuf,
    pub intrinsics: Intrinsics,
    pub poses: Vec<Stamped>,
    pub depth_files: Vec<PathBuf>,
    pub depth_scale: f64,
}

impl Dataset {
    /// Opens a dataset and checks that frames and poses pair up one to one.
    pub fn open(root: &Path, depth_scale: f64) -> Result<Self> {
        if depth_scale.is_nan() || depth_scale <= 0.0 {
            return Err(Error::Config(format!(
                "depth scale must be positive, got {depth_scale}"
            )));
        }
        let intrinsics = read_intrinsics(&root.join(INTRINSICS_FILE))?;
        let poses = read_trajectory(&root.join(TRAJECTORY_FILE))?;
        let depth_dir = root.join(DEPTH_DIR);
        let mut depth_files = Vec::new();
        if depth_dir.exists() {
            for entry in std::fs::read_dir(&depth_dir).map_err(|e| Error::io(&depth_dir, e))? {
                let path = entry.map_err(|e| Error::io(&depth_dir, e))?.path();
                if path.extension().is_some_and(|x| x == "pgm") {
                    depth_files.push(path);
                }
            }
        }
        depth_files.sort();
        if depth_files.len() != poses.len() {
            return Err(Error::Dataset(format!(
                "{}: {} depth frames but {} poses",
                root.display(),
                depth_files.len(),
                poses.len()
            )));
        }
        Ok(Self {
            root: root.to_path_buf(),
            intrinsics,
            poses,
            depth_files,
            depth_scale,
        })
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    pub fn frame(&self, i: usize) -> Result<DepthFrame> {
        let f = read_depth(&self.depth_files[i], self.depth_scale, i as u32)?;
        if (f.width, f.height) != (self.intrinsics.width, self.intrinsics.height) {
            return Err(Error::Dataset(format!(
                "{}: {}x{} image, intrinsics say {}x{}",
                self.depth_files[i].display(),
                f.width,
                f.height,
                self.intrinsics.width,
                self.intrinsics.height
            )));
        }
        Ok(f)
    }

    /// SHA-256 over the relative path and contents of every input file.
    pub fn content_hash(&self) -> Result<String> {
        let mut h = Sha256::new();
        let mut files = vec![
            self.root.join(INTRINSICS_FILE),
            self.root.join(TRAJECTORY_FILE),
        ];
        files.extend(self.depth_files.iter().cloned());
        for f in files {
            let rel = f.strip_prefix(&self.root).unwrap_or(&f);
            h.update(rel.to_string_lossy().as_bytes());
            h.update([0]);
            let bytes = std::fs::read(&f).map_err(|e| Error::io(&f, e))?;
            h.update((bytes.len() as u64).to_le_bytes());
            h.update(&bytes);
        }
        Ok(h.finalize().iter().map(|b| format!("{b:02x}")).collect())
    }
}
