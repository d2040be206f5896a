//! Command implementations behind the `incremesh` binary.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::engine::{Engine, EngineConfig, FrameReport};
use crate::error::{Error, Result};
use crate::fusion::FusionParams;
use crate::io::synth::tilted_plane;
use crate::io::{self, CameraPath, ColorMode, Dataset, Primitive, SceneSpec, StatsRow};
use crate::mesher::{MeshMode, Strategy};
use crate::refiner::RefineParams;
use crate::store::{Capacity, CompactMesh, Cube};

/// Everything that determines a reconstruction; written to the run manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub cube_size: f64,
    /// Defaults to three cube widths.
    pub truncation: Option<f64>,
    pub epsilon: f64,
    pub refine: bool,
    pub strategy: Strategy,
    pub baseline: bool,
    pub max_range: f64,
    pub frustum_only: bool,
    pub workers: usize,
    pub seed: u64,
    pub depth_scale: f64,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            cube_size: 0.03,
            truncation: None,
            epsilon: 0.1,
            refine: false,
            strategy: Strategy::Claim,
            baseline: false,
            max_range: 5.0,
            frustum_only: false,
            workers: 0,
            seed: 0,
            depth_scale: io::DEFAULT_DEPTH_SCALE,
            out: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    pub fn engine_config(&self) -> Result<EngineConfig> {
        let mut fusion = FusionParams::new(self.cube_size);
        if let Some(t) = self.truncation {
            fusion.truncation = t;
        }
        fusion.max_range = self.max_range;
        let cfg = EngineConfig {
            fusion,
            strategy: self.strategy,
            mode: if self.baseline {
                MeshMode::Loose
            } else {
                MeshMode::Shared
            },
            refine: RefineParams {
                enabled: self.refine,
                epsilon: self.epsilon,
            },
            frustum_only: self.frustum_only,
            workers: self.workers,
            capacity: Capacity::default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Stats row for a processed frame.
pub fn stats_row(engine: &Engine, r: &FrameReport, compact_ms: f64) -> StatsRow {
    let store = engine.store();
    StatsRow {
        frame: r.frame,
        blocks_active: r.mesh.blocks_meshed,
        vertices_live: store.vertices_live(),
        triangles_live: store.triangles_live(),
        vertices_allocated_total: store.vertex_pool().high_water() as u64,
        vertices_recycled_total: store.vertex_pool().frees_total(),
        irregular_cube_count: r.mesh.irregular_cubes,
        fusion_ms: r.fusion_ms,
        meshing_ms: r.meshing_ms,
        compact_ms,
    }
}

/// Memory layout figures recorded in the manifest.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Footprint {
    pub cube_bytes: usize,
    /// Single-handle cube layout: sample, weight, types and one slot handle.
    pub compact_cube_bytes: usize,
    pub blocks: usize,
    pub cube_storage_bytes: usize,
    pub compact_cube_storage_bytes: usize,
}

impl Footprint {
    pub const COMPACT_CUBE_BYTES: usize = 24;

    pub fn of(engine: &Engine) -> Self {
        let blocks = engine.store().table().len();
        let cubes = blocks * crate::store::CUBES_PER_BLOCK;
        Self {
            cube_bytes: std::mem::size_of::<Cube>(),
            compact_cube_bytes: Self::COMPACT_CUBE_BYTES,
            blocks,
            cube_storage_bytes: cubes * std::mem::size_of::<Cube>(),
            compact_cube_storage_bytes: cubes * Self::COMPACT_CUBE_BYTES,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub frames: usize,
    pub vertices: usize,
    pub triangles: usize,
    pub degenerate_edges: u64,
    pub footprint: Footprint,
}

#[derive(Serialize)]
struct Manifest<'a> {
    config: &'a RunConfig,
    engine: &'a EngineConfig,
    workers: usize,
    dataset: String,
    input_sha256: String,
    summary: &'a RunSummary,
}

/// Replays a dataset through a fresh engine.
pub fn run_dataset(
    config: &RunConfig,
    dataset: &Dataset,
    mut on_frame: impl FnMut(&Engine, &FrameReport) -> Result<()>,
) -> Result<Engine> {
    let mut engine = Engine::new(config.engine_config()?, dataset.intrinsics)?;
    for (i, stamped) in dataset.poses.iter().enumerate() {
        let frame = dataset.frame(i)?;
        let report = engine.process_frame(&frame, &stamped.pose)?;
        on_frame(&engine, &report)?;
    }
    Ok(engine)
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// Reconstructs a dataset, writing `mesh.obj`, `mesh.ply`, `stats.csv` and
/// `manifest.json` under the output directory.
pub fn cmd_reconstruct(config: &RunConfig, dataset_dir: &Path) -> Result<RunSummary> {
    let dataset = Dataset::open(dataset_dir, config.depth_scale)?;
    let input_sha256 = dataset.content_hash()?;
    create_dir(&config.out)?;

    let mut rows = Vec::with_capacity(dataset.len());
    let mut degenerate = 0;
    let mut mesh = CompactMesh::default();
    let engine = run_dataset(config, &dataset, |engine, report| {
        let t = Instant::now();
        mesh = engine.compact_mesh();
        let compact_ms = t.elapsed().as_secs_f64() * 1e3;
        degenerate += report.mesh.degenerate_edges;
        rows.push(stats_row(engine, report, compact_ms));
        log::info!(
            "frame {}: {} blocks meshed, {} vertices, {} triangles",
            report.frame,
            report.mesh.blocks_meshed,
            mesh.vertex_count(),
            mesh.triangle_count()
        );
        Ok(())
    })?;

    io::write_obj(&config.out.join("mesh.obj"), &mesh)?;
    io::write_ply(&config.out.join("mesh.ply"), &mesh, ColorMode::Age)?;
    io::write_stats(&config.out.join("stats.csv"), &rows)?;
    let summary = RunSummary {
        frames: dataset.len(),
        vertices: mesh.vertex_count(),
        triangles: mesh.triangle_count(),
        degenerate_edges: degenerate,
        footprint: Footprint::of(&engine),
    };
    let manifest = Manifest {
        config,
        engine: engine.config(),
        workers: engine.workers(),
        dataset: dataset_dir.display().to_string(),
        input_sha256,
        summary: &summary,
    };
    let path = config.out.join("manifest.json");
    std::fs::write(&path, serde_json::to_string_pretty(&manifest)?)
        .map_err(|e| Error::io(&path, e))?;
    Ok(summary)
}

/// One row of the compact versus loose comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub frame: u32,
    pub compact_vertices: usize,
    pub compact_triangles: usize,
    pub loose_vertices: usize,
    pub loose_triangles: usize,
}

/// Runs shared and loose meshing side by side; writes `compare.csv` and
/// returns the final compact/loose vertex ratio (1 when both are empty).
pub fn cmd_compare(config: &RunConfig, dataset_dir: &Path) -> Result<f64> {
    let dataset = Dataset::open(dataset_dir, config.depth_scale)?;
    create_dir(&config.out)?;
    let compact_cfg = RunConfig {
        baseline: false,
        ..config.clone()
    };
    let loose_cfg = RunConfig {
        baseline: true,
        ..config.clone()
    };
    let mut compact = Engine::new(compact_cfg.engine_config()?, dataset.intrinsics)?;
    let mut loose = Engine::new(loose_cfg.engine_config()?, dataset.intrinsics)?;
    let mut rows = Vec::with_capacity(dataset.len());
    for (i, stamped) in dataset.poses.iter().enumerate() {
        let frame = dataset.frame(i)?;
        compact.process_frame(&frame, &stamped.pose)?;
        loose.process_frame(&frame, &stamped.pose)?;
        rows.push(CompareRow {
            frame: i as u32,
            compact_vertices: compact.store().vertices_live(),
            compact_triangles: compact.store().triangles_live(),
            loose_vertices: loose.store().vertices_live(),
            loose_triangles: loose.store().triangles_live(),
        });
    }
    let path = config.out.join("compare.csv");
    let mut w = csv::Writer::from_path(&path)?;
    for r in &rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    let ratio = match rows.last() {
        Some(r) if r.loose_vertices > 0 => r.compact_vertices as f64 / r.loose_vertices as f64,
        _ => 1.0,
    };
    log::info!("final compact/loose vertex ratio {ratio:.4}");
    Ok(ratio)
}

/// Built-in synthetic scenes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenePreset {
    Plane,
    Sphere,
    Room,
}

impl std::str::FromStr for ScenePreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plane" => Ok(ScenePreset::Plane),
            "sphere" => Ok(ScenePreset::Sphere),
            "room" => Ok(ScenePreset::Room),
            other => Err(Error::Config(format!("unknown scene {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthArgs {
    pub scene: ScenePreset,
    pub frames: usize,
    pub tilt_deg: f64,
    pub radius: f64,
    pub noise: f64,
    pub seed: u64,
}

impl Default for SynthArgs {
    fn default() -> Self {
        Self {
            scene: ScenePreset::Sphere,
            frames: 60,
            tilt_deg: 8.0,
            radius: 0.5,
            noise: 0.0,
            seed: 0,
        }
    }
}

/// Scene description for a preset.
pub fn preset_scene(a: &SynthArgs) -> SceneSpec {
    let frames = a.frames.max(1);
    let (primitives, camera) = match a.scene {
        ScenePreset::Plane => (
            vec![tilted_plane([0.0, 0.0, 1.0], a.tilt_deg, [1.0, 1.0, 0.0])],
            CameraPath::Sweep {
                start: [-0.2, -0.1, 0.0],
                end: [0.2, 0.1, 0.0],
                direction: [0.0, 0.0, 1.0],
            },
        ),
        ScenePreset::Sphere => (
            vec![Primitive::Sphere {
                center: [0.0; 3],
                radius: a.radius,
            }],
            CameraPath::Orbit {
                center: [0.0; 3],
                radius: a.radius + 1.0,
                step_deg: 720.0 / frames as f64,
                elevation_deg: 60.0,
            },
        ),
        ScenePreset::Room => (
            vec![
                Primitive::Room {
                    min: [-2.0, -1.2, -2.0],
                    max: [2.0, 1.2, 2.0],
                },
                Primitive::Cuboid {
                    min: [0.6, -1.2, 0.6],
                    max: [1.2, -0.4, 1.4],
                },
                Primitive::Sphere {
                    center: [-0.8, -0.6, 1.0],
                    radius: 0.35,
                },
            ],
            CameraPath::Spin {
                eye: [0.0, 0.0, 0.0],
                step_deg: 360.0 / frames as f64,
            },
        ),
    };
    let mut spec = SceneSpec::new(primitives, camera, frames);
    spec.noise_sigma = a.noise;
    spec.seed = a.seed;
    spec
}

pub fn cmd_synth(args: &SynthArgs, outdir: &Path, depth_scale: f64) -> Result<SceneSpec> {
    let spec = preset_scene(args);
    io::synth_sequence(&spec, outdir, depth_scale)?;
    Ok(spec)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ExportFormats {
    pub obj: bool,
    pub ply: bool,
    pub color: ColorMode,
}

/// Reruns a reconstruction and writes only the requested mesh formats.
pub fn cmd_export(
    config: &RunConfig,
    dataset_dir: &Path,
    formats: ExportFormats,
) -> Result<CompactMesh> {
    if !formats.obj && !formats.ply {
        return Err(Error::Config(
            "choose at least one of --obj and --ply".into(),
        ));
    }
    let dataset = Dataset::open(dataset_dir, config.depth_scale)?;
    let engine = run_dataset(config, &dataset, |_, _| Ok(()))?;
    let mesh = engine.compact_mesh();
    create_dir(&config.out)?;
    if formats.obj {
        io::write_obj(&config.out.join("mesh.obj"), &mesh)?;
    }
    if formats.ply {
        io::write_ply(&config.out.join("mesh.ply"), &mesh, formats.color)?;
    }
    Ok(mesh)
}
