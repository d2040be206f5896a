//! Block collection along depth rays and weighted TSDF integration.

use nalgebra::{Point3, Rotation3, UnitQuaternion, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::store::local_from_index;
use crate::store::{
    BlockCoord, BlockId, CornerSample, CubeCoord, Store, BLOCK_SIDE, CUBES_PER_BLOCK,
};

/// Pinhole intrinsics. Integer pixel coordinates are pixel centers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl Intrinsics {
    pub fn validate(&self) -> Result<()> {
        if !(self.fx > 0.0 && self.fy > 0.0) || self.width == 0 || self.height == 0 {
            return Err(Error::Config(format!("invalid intrinsics {self:?}")));
        }
        Ok(())
    }

    /// Pixel coordinates of a camera-frame point; `None` behind the camera.
    pub fn project(&self, p: &Vector3<f64>) -> Option<(f64, f64)> {
        (p.z > 0.0).then(|| (self.fx * p.x / p.z + self.cx, self.fy * p.y / p.z + self.cy))
    }

    /// Camera-frame point at depth `z` along the ray through pixel `(u, v)`.
    pub fn backproject(&self, u: f64, v: f64, z: f64) -> Vector3<f64> {
        Vector3::new((u - self.cx) / self.fx * z, (v - self.cy) / self.fy * z, z)
    }

    /// Nearest pixel to an image-plane position, if inside the image.
    pub fn nearest_pixel(&self, u: f64, v: f64) -> Option<(u32, u32)> {
        let (px, py) = ((u + 0.5).floor(), (v + 0.5).floor());
        (px >= 0.0 && py >= 0.0 && px < self.width as f64 && py < self.height as f64)
            .then_some((px as u32, py as u32))
    }
}

/// Rigid sensor-to-world transform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub rotation: Rotation3<f64>,
    pub translation: Vector3<f64>,
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose {
    pub fn identity() -> Self {
        Self {
            rotation: Rotation3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn new(rotation: Rotation3<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn from_quaternion(translation: [f64; 3], q: UnitQuaternion<f64>) -> Self {
        Self::new(q.to_rotation_matrix(), Vector3::from(translation))
    }

    pub fn quaternion(&self) -> UnitQuaternion<f64> {
        UnitQuaternion::from_rotation_matrix(&self.rotation)
    }

    /// Camera at `eye` looking at `target`; camera axes x right, y down, z forward.
    pub fn look_at(eye: [f64; 3], target: [f64; 3], up: [f64; 3]) -> Self {
        let eye = Vector3::from(eye);
        let forward = (Vector3::from(target) - eye).normalize();
        let mut right = forward.cross(&Vector3::from(up));
        if right.norm() < 1e-9 {
            right = forward.cross(&Vector3::x()).normalize();
            if right.norm() < 1e-9 {
                right = forward.cross(&Vector3::y());
            }
        }
        let right = right.normalize();
        let down = forward.cross(&right);
        let m = nalgebra::Matrix3::from_columns(&[right, down, forward]);
        Self::new(Rotation3::from_matrix_unchecked(m), eye)
    }

    pub fn inverse(&self) -> Self {
        let r = self.rotation.inverse();
        Self::new(r, -(r * self.translation))
    }

    pub fn compose(&self, other: &Pose) -> Pose {
        Pose::new(
            self.rotation * other.rotation,
            self.rotation * other.translation + self.translation,
        )
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    /// World point expressed in the sensor frame.
    pub fn to_sensor(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.inverse() * (p - self.translation)
    }

    pub fn position(&self) -> Point3<f64> {
        Point3::from(self.translation)
    }
}

/// Depth image in meters; 0 marks an invalid pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthFrame {
    pub width: u32,
    pub height: u32,
    pub depth: Vec<f32>,
    pub frame_index: u32,
}

impl DepthFrame {
    pub fn new(width: u32, height: u32, depth: Vec<f32>, frame_index: u32) -> Self {
        assert_eq!(depth.len(), (width * height) as usize);
        Self {
            width,
            height,
            depth,
            frame_index,
        }
    }

    pub fn filled(width: u32, height: u32, value: f32, frame_index: u32) -> Self {
        Self::new(
            width,
            height,
            vec![value; (width * height) as usize],
            frame_index,
        )
    }

    pub fn at(&self, u: u32, v: u32) -> f32 {
        self.depth[(v * self.width + u) as usize]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FusionParams {
    /// Cube side length in meters.
    pub cube_size: f64,
    /// Truncation band half-width in meters.
    pub truncation: f64,
    /// Depth readings beyond this are ignored.
    pub max_range: f64,
    pub max_weight: u16,
}

impl FusionParams {
    pub fn new(cube_size: f64) -> Self {
        Self {
            cube_size,
            truncation: 3.0 * cube_size,
            max_range: 5.0,
            max_weight: 128,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.cube_size.is_nan() || self.cube_size <= 0.0 {
            return Err(Error::Config(format!(
                "cube size must be positive, got {}",
                self.cube_size
            )));
        }
        if self.truncation.is_nan() || self.truncation < self.cube_size {
            return Err(Error::Config(format!(
                "truncation {} must be at least the cube size {}",
                self.truncation, self.cube_size
            )));
        }
        if self.max_range.is_nan() || self.max_range <= 0.0 || self.max_weight == 0 {
            return Err(Error::Config(
                "max range and max weight must be positive".into(),
            ));
        }
        Ok(())
    }

    fn valid_depth(&self, d: f32) -> bool {
        d > 0.0 && (d as f64) <= self.max_range
    }
}

/// Clamp-scale truncation to `[-1, 1]`.
pub fn truncate(sdf: f64, truncation: f64) -> f64 {
    (sdf / truncation).clamp(-1.0, 1.0)
}

/// Running weighted average with unit observation weight, capped at `max_weight`.
pub fn fold_sample(s: CornerSample, d: f64, max_weight: u16) -> CornerSample {
    let w = s.weight as f64;
    CornerSample {
        tsdf: (w * s.tsdf + d) / (w + 1.0),
        weight: s.weight.saturating_add(1).min(max_weight),
    }
}

/// Blocks traversed by the truncation band around every valid depth reading,
/// sorted and deduplicated.
///
/// The ray `t + lambda * R * D(p) * K^-1 p` is sampled over
/// `lambda in [1 - tau/D(p), 1 + tau/D(p)]` with a step of at most half a block.
pub fn collect_blocks(
    frame: &DepthFrame,
    pose: &Pose,
    k: &Intrinsics,
    params: &FusionParams,
) -> Vec<BlockCoord> {
    let half_block = 0.5 * params.cube_size * BLOCK_SIDE as f64;
    let rows: Vec<Vec<BlockCoord>> = (0..frame.height)
        .into_par_iter()
        .map(|v| {
            let mut out = Vec::new();
            for u in 0..frame.width {
                let d = frame.at(u, v);
                if !params.valid_depth(d) {
                    continue;
                }
                let d = d as f64;
                let dir = pose.rotation * k.backproject(u as f64, v as f64, d);
                let delta = params.truncation / d;
                let (lo, hi) = (1.0 - delta, 1.0 + delta);
                let steps = (((hi - lo) * dir.norm()) / half_block).ceil().max(1.0) as usize;
                let mut last = None;
                for i in 0..=steps {
                    let lambda = lo + (hi - lo) * i as f64 / steps as f64;
                    let p = pose.translation + dir * lambda;
                    let b = BlockCoord::containing([p.x, p.y, p.z], params.cube_size);
                    if last != Some(b) {
                        out.push(b);
                        last = Some(b);
                    }
                }
            }
            out.sort_unstable();
            out.dedup();
            out
        })
        .collect();
    let mut all: Vec<BlockCoord> = rows.into_iter().flatten().collect();
    all.par_sort_unstable();
    all.dedup();
    all
}

/// Allocates every collected block; safe under concurrent callers.
pub fn allocate_blocks(
    store: &Store,
    coords: &[BlockCoord],
    parallel: bool,
) -> Result<Vec<BlockId>> {
    if parallel {
        coords
            .par_iter()
            .map(|&c| store.get_or_allocate_block(c))
            .collect()
    } else {
        coords
            .iter()
            .map(|&c| store.get_or_allocate_block(c))
            .collect()
    }
}

/// Fuses the frame into every corner of the given blocks. Returns the number of
/// corners updated.
pub fn integrate_frame(
    store: &Store,
    blocks: &[BlockId],
    frame: &DepthFrame,
    pose: &Pose,
    k: &Intrinsics,
    params: &FusionParams,
    parallel: bool,
) -> usize {
    let world_to_sensor = pose.inverse();
    let work = |&id: &BlockId| -> usize {
        let block = store.block(id);
        let mut updated = 0;
        for (i, cube) in block.cubes().iter().enumerate().take(CUBES_PER_BLOCK) {
            let c = CubeCoord::new(block.coord(), local_from_index(i))
                .corner_position(params.cube_size);
            let pc = world_to_sensor.transform_point(&Vector3::from(c));
            let Some((u, v)) = k.project(&pc) else {
                continue;
            };
            let Some((px, py)) = k.nearest_pixel(u, v) else {
                continue;
            };
            if px >= frame.width || py >= frame.height {
                continue;
            }
            let d = frame.at(px, py);
            if !params.valid_depth(d) {
                continue;
            }
            let raw = d as f64 - pc.z;
            if raw < -params.truncation {
                continue;
            }
            let s = fold_sample(
                cube.sample(),
                truncate(raw, params.truncation),
                params.max_weight,
            );
            cube.set_sample(s);
            updated += 1;
        }
        updated
    };
    if parallel {
        blocks.par_iter().map(work).sum()
    } else {
        blocks.iter().map(work).sum()
    }
}

/// View frustum used to restrict meshing to visible blocks.
#[derive(Debug, Clone, Copy)]
pub struct Frustum {
    pub pose: Pose,
    pub intrinsics: Intrinsics,
}

impl Frustum {
    /// True if any block corner projects into the image in front of the camera,
    /// or the block contains the camera.
    pub fn intersects_block(&self, b: BlockCoord, cube_size: f64) -> bool {
        let extent = cube_size * BLOCK_SIDE as f64;
        let origin = Vector3::new(b.x as f64, b.y as f64, b.z as f64) * extent;
        if BlockCoord::containing(self.pose.translation.into(), cube_size) == b {
            return true;
        }
        let inv = self.pose.inverse();
        (0..8).any(|i| {
            let corner = origin
                + Vector3::new((i & 1) as f64, ((i >> 1) & 1) as f64, ((i >> 2) & 1) as f64)
                    * extent;
            let pc = inv.transform_point(&corner);
            self.intrinsics
                .project(&pc)
                .and_then(|(u, v)| self.intrinsics.nearest_pixel(u, v))
                .is_some()
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::Capacity;

    fn k() -> Intrinsics {
        Intrinsics {
            fx: 100.0,
            fy: 100.0,
            cx: 50.0,
            cy: 40.0,
            width: 101,
            height: 81,
        }
    }

    #[test]
    fn truncation_examples() {
        assert_eq!(truncate(0.0, 0.06), 0.0);
        assert!((truncate(0.03, 0.06) - 0.5).abs() < 1e-15);
        assert_eq!(truncate(-0.2, 0.06), -1.0);
        assert_eq!(truncate(-0.03, 0.06), -truncate(0.03, 0.06));
    }

    #[test]
    fn fold_examples() {
        let s = fold_sample(CornerSample::UNOBSERVED, 0.5, 128);
        assert_eq!(
            s,
            CornerSample {
                tsdf: 0.5,
                weight: 1
            }
        );
        let s = fold_sample(s, -0.5, 128);
        assert_eq!(
            s,
            CornerSample {
                tsdf: 0.0,
                weight: 2
            }
        );
        let sat = fold_sample(
            CornerSample {
                tsdf: 0.2,
                weight: 128,
            },
            0.2,
            128,
        );
        assert_eq!(sat.weight, 128);
    }

    #[test]
    fn projection_round_trip() {
        let k = k();
        let p = k.backproject(12.0, 70.0, 1.7);
        let (u, v) = k.project(&p).unwrap();
        assert!((u - 12.0).abs() < 1e-12 && (v - 70.0).abs() < 1e-12);
    }

    #[test]
    fn pose_inverse_composes_to_identity() {
        let q = UnitQuaternion::from_euler_angles(0.3, -1.1, 2.0);
        let p = Pose::from_quaternion([0.5, -2.0, 1.25], q);
        let id = p.inverse().compose(&p);
        assert!(
            (id.rotation.matrix() - nalgebra::Matrix3::identity())
                .abs()
                .max()
                < 1e-9
        );
        assert!(id.translation.norm() < 1e-9);
        assert!((p.rotation.matrix().determinant() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn principal_ray_collects_two_blocks() {
        let k = Intrinsics {
            cx: 2.0,
            cy: 2.0,
            width: 5,
            height: 5,
            ..k()
        };
        let mut f = DepthFrame::filled(5, 5, 0.0, 0);
        f.depth[2 * 5 + 2] = 1.0;
        let params = FusionParams {
            truncation: 0.06,
            ..FusionParams::new(0.03)
        };
        let blocks = collect_blocks(&f, &Pose::identity(), &k, &params);
        assert_eq!(
            blocks,
            vec![BlockCoord::new(0, 0, 3), BlockCoord::new(0, 0, 4)]
        );
    }

    #[test]
    fn invalid_frame_collects_nothing() {
        let f = DepthFrame::filled(8, 8, 0.0, 0);
        let params = FusionParams::new(0.03);
        let k = Intrinsics {
            width: 8,
            height: 8,
            ..k()
        };
        assert!(collect_blocks(&f, &Pose::identity(), &k, &params).is_empty());
        let far = DepthFrame::filled(8, 8, 99.0, 0);
        assert!(collect_blocks(&far, &Pose::identity(), &k, &params).is_empty());
    }

    #[test]
    fn recollecting_a_frame_allocates_nothing_new() {
        let store = Store::new(Capacity {
            table_bits: 14,
            max_blocks: 4096,
            ..Capacity::default()
        });
        let f = DepthFrame::filled(101, 81, 1.0, 0);
        let params = FusionParams::new(0.02);
        let a = collect_blocks(&f, &Pose::identity(), &k(), &params);
        allocate_blocks(&store, &a, true).unwrap();
        let n = store.table().len();
        let b = collect_blocks(&f, &Pose::identity(), &k(), &params);
        allocate_blocks(&store, &b, true).unwrap();
        assert_eq!(a, b);
        assert_eq!(store.table().len(), n);
    }

    #[test]
    fn wall_corner_converges_to_zero() {
        // fronto-parallel wall at exactly 1 m; corners on the wall plane read 0
        let store = Store::new(Capacity {
            table_bits: 14,
            max_blocks: 4096,
            ..Capacity::default()
        });
        let params = FusionParams::new(0.02);
        let f = DepthFrame::filled(101, 81, 1.0, 0);
        for _ in 0..10 {
            let blocks = collect_blocks(&f, &Pose::identity(), &k(), &params);
            let ids = allocate_blocks(&store, &blocks, true).unwrap();
            integrate_frame(&store, &ids, &f, &Pose::identity(), &k(), &params, true);
        }
        let s = store.corner_sample(CubeCoord::from_global([0, 0, 50]));
        assert_eq!(s.weight, 10);
        assert!(s.tsdf.abs() < 1e-6, "{s:?}");
        // camera side positive, far side negative
        assert!(store.corner_sample(CubeCoord::from_global([0, 0, 49])).tsdf > 0.0);
        assert!(store.corner_sample(CubeCoord::from_global([0, 0, 51])).tsdf < 0.0);
    }
}
