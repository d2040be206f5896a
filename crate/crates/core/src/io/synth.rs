//! Synthetic depth sequences ray-marched from analytic signed distance scenes.

use std::path::Path;

use nalgebra::{Rotation3, Unit, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dataset::{DEPTH_DIR, INTRINSICS_FILE, TRAJECTORY_FILE};
use super::intrinsics::write_intrinsics;
use super::pgm::write_depth;
use super::trajectory::{write_trajectory, Stamped};
use crate::error::{Error, Result};
use crate::fusion::{DepthFrame, Intrinsics, Pose};

/// Analytic surfaces; distances are positive in free space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Primitive {
    /// Points `p` with `normal . p = offset`; free space on the side `normal` points to.
    Plane {
        normal: [f64; 3],
        offset: f64,
    },
    Sphere {
        center: [f64; 3],
        radius: f64,
    },
    /// Inside of an axis-aligned box; free space is the interior.
    Room {
        min: [f64; 3],
        max: [f64; 3],
    },
    /// Solid axis-aligned box.
    Cuboid {
        min: [f64; 3],
        max: [f64; 3],
    },
}

impl Primitive {
    pub fn distance(&self, p: &Vector3<f64>) -> f64 {
        match *self {
            Primitive::Plane { normal, offset } => {
                let n = Vector3::from(normal).normalize();
                n.dot(p) - offset
            }
            Primitive::Sphere { center, radius } => (p - Vector3::from(center)).norm() - radius,
            Primitive::Room { min, max } => (0..3)
                .map(|a| (p[a] - min[a]).min(max[a] - p[a]))
                .fold(f64::INFINITY, f64::min),
            Primitive::Cuboid { min, max } => {
                let c = (Vector3::from(min) + Vector3::from(max)) * 0.5;
                let h = (Vector3::from(max) - Vector3::from(min)) * 0.5;
                let q = (p - c).abs() - h;
                q.map(|x| x.max(0.0)).norm() + q.max().min(0.0)
            }
        }
    }
}

/// Camera trajectory. Cameras look with x right, y down, z forward; world up is +y.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum CameraPath {
    Fixed {
        eye: [f64; 3],
        target: [f64; 3],
    },
    /// Helix around `center`: azimuth advances by `step_deg` per frame while
    /// the elevation climbs from `-elevation_deg` to `elevation_deg`.
    Orbit {
        center: [f64; 3],
        radius: f64,
        step_deg: f64,
        elevation_deg: f64,
    },
    /// Straight-line translation with a fixed viewing direction.
    Sweep {
        start: [f64; 3],
        end: [f64; 3],
        direction: [f64; 3],
    },
    /// Rotation in place about the vertical axis.
    Spin {
        eye: [f64; 3],
        step_deg: f64,
    },
}

impl CameraPath {
    pub fn pose(&self, i: usize, frames: usize) -> Pose {
        let up = [0.0, 1.0, 0.0];
        let f = if frames > 1 {
            i as f64 / (frames - 1) as f64
        } else {
            0.0
        };
        match *self {
            CameraPath::Fixed { eye, target } => Pose::look_at(eye, target, up),
            CameraPath::Orbit {
                center,
                radius,
                step_deg,
                elevation_deg,
            } => {
                let theta = (step_deg * i as f64).to_radians();
                let phi = elevation_deg.to_radians() * (2.0 * f - 1.0);
                let eye = [
                    center[0] + radius * phi.cos() * theta.sin(),
                    center[1] + radius * phi.sin(),
                    center[2] - radius * phi.cos() * theta.cos(),
                ];
                Pose::look_at(eye, center, up)
            }
            CameraPath::Sweep {
                start,
                end,
                direction,
            } => {
                let eye: [f64; 3] = std::array::from_fn(|a| start[a] + f * (end[a] - start[a]));
                let target = std::array::from_fn(|a| eye[a] + direction[a]);
                Pose::look_at(eye, target, up)
            }
            CameraPath::Spin { eye, step_deg } => {
                let a = (step_deg * i as f64).to_radians();
                Pose::look_at(eye, [eye[0] + a.sin(), eye[1], eye[2] + a.cos()], up)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub primitives: Vec<Primitive>,
    pub camera: CameraPath,
    pub frames: usize,
    pub intrinsics: Intrinsics,
    /// Standard deviation of additive depth noise, meters.
    pub noise_sigma: f64,
    pub seed: u64,
    pub max_depth: f64,
    /// Seconds between frames in the trajectory file.
    pub frame_interval: f64,
}

impl SceneSpec {
    pub fn new(primitives: Vec<Primitive>, camera: CameraPath, frames: usize) -> Self {
        Self {
            primitives,
            camera,
            frames,
            intrinsics: Intrinsics {
                fx: 200.0,
                fy: 200.0,
                cx: 159.5,
                cy: 119.5,
                width: 320,
                height: 240,
            },
            noise_sigma: 0.0,
            seed: 0,
            max_depth: 8.0,
            frame_interval: 1.0 / 30.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.intrinsics.validate()?;
        if self.primitives.is_empty() {
            return Err(Error::Config("scene has no primitives".into()));
        }
        if self.noise_sigma.is_nan()
            || self.noise_sigma < 0.0
            || self.max_depth.is_nan()
            || self.max_depth <= 0.0
        {
            return Err(Error::Config(
                "noise must be non-negative and max depth positive".into(),
            ));
        }
        Ok(())
    }

    pub fn distance(&self, p: &Vector3<f64>) -> f64 {
        self.primitives
            .iter()
            .map(|s| s.distance(p))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn pose(&self, i: usize) -> Pose {
        self.camera.pose(i, self.frames)
    }

    /// Depth image for frame `i`, noise included.
    pub fn render(&self, i: usize) -> DepthFrame {
        let pose = self.pose(i);
        let k = &self.intrinsics;
        let mut depth: Vec<f32> = (0..k.height)
            .into_par_iter()
            .flat_map_iter(|v| {
                let pose = &pose;
                (0..k.width).map(move |u| {
                    let ray = k.backproject(u as f64, v as f64, 1.0);
                    let dir = pose.rotation * ray.normalize();
                    match march(
                        self,
                        &pose.translation,
                        &dir,
                        self.max_depth / ray.normalize().z,
                    ) {
                        Some(t) => (t * ray.normalize().z) as f32,
                        None => 0.0,
                    }
                })
            })
            .collect();
        if self.noise_sigma > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(
                self.seed ^ (i as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15),
            );
            let normal = Normal::new(0.0, self.noise_sigma).expect("finite sigma");
            for d in depth.iter_mut() {
                let n = normal.sample(&mut rng) as f32;
                if *d > 0.0 {
                    *d = (*d + n).max(0.0);
                }
            }
        }
        DepthFrame::new(k.width, k.height, depth, i as u32)
    }
}

const MARCH_STEPS: usize = 1024;
const HIT_EPS: f64 = 1e-9;

/// Sphere tracing; distance along the unit ray `dir` to the first surface.
pub fn march(
    scene: &SceneSpec,
    origin: &Vector3<f64>,
    dir: &Vector3<f64>,
    max_t: f64,
) -> Option<f64> {
    let mut t = 0.0;
    for _ in 0..MARCH_STEPS {
        let d = scene.distance(&(origin + dir * t));
        if d.abs() < HIT_EPS {
            return Some(t);
        }
        if d < 0.0 {
            // started inside geometry
            return None;
        }
        t += d;
        if t > max_t {
            return None;
        }
    }
    None
}

/// Plane through `point` tilted by `tilt_deg` about `axis` from facing `-z`.
pub fn tilted_plane(point: [f64; 3], tilt_deg: f64, axis: [f64; 3]) -> Primitive {
    let rot = Rotation3::from_axis_angle(
        &Unit::new_normalize(Vector3::from(axis)),
        tilt_deg.to_radians(),
    );
    let n = rot * Vector3::new(0.0, 0.0, -1.0);
    Primitive::Plane {
        normal: n.into(),
        offset: n.dot(&Vector3::from(point)),
    }
}

/// Writes `depth/NNNNNN.pgm`, the trajectory and the intrinsics under `outdir`.
pub fn synth_sequence(spec: &SceneSpec, outdir: &Path, depth_scale: f64) -> Result<()> {
    spec.validate()?;
    let depth_dir = outdir.join(DEPTH_DIR);
    std::fs::create_dir_all(&depth_dir).map_err(|e| Error::io(&depth_dir, e))?;
    let mut poses = Vec::with_capacity(spec.frames);
    for i in 0..spec.frames {
        let frame = spec.render(i);
        write_depth(&depth_dir.join(format!("{i:06}.pgm")), &frame, depth_scale)?;
        poses.push(Stamped {
            timestamp: i as f64 * spec.frame_interval,
            pose: spec.pose(i),
        });
    }
    write_trajectory(&outdir.join(TRAJECTORY_FILE), &poses)?;
    write_intrinsics(&outdir.join(INTRINSICS_FILE), &spec.intrinsics)?;
    let scene = outdir.join("scene.json");
    std::fs::write(&scene, serde_json::to_string_pretty(spec)?).map_err(|e| Error::io(&scene, e))
}
