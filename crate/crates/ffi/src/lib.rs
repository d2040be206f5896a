//! C interface to the incremesh engine.
//!
//! Engines and meshes are opaque handles created and destroyed through this
//! API. Every fallible call returns an [`ImStatus`]; the message of the most
//! recent failure on the calling thread is available from
//! [`im_last_error_message`]. Panics are caught at the boundary and reported as
//! [`ImStatus::Internal`].

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use incremesh::{
    CompactMesh, DepthFrame, Engine, EngineConfig, Error, Intrinsics, MeshMode, Pose, Strategy,
};
use nalgebra::{Quaternion, UnitQuaternion};

/// Result codes. Values match the command line exit codes where they overlap.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImStatus {
    Ok = 0,
    /// Null pointer, bad enum value or invalid configuration.
    InvalidArgument = 1,
    /// Malformed input data.
    Input = 2,
    /// A pool or table ran out of space.
    Capacity = 3,
    /// Consistency failure or caught panic.
    Internal = 4,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImStrategy {
    Serial = 0,
    Claim = 1,
    Partition = 2,
}

/// Engine settings. Obtain defaults from [`im_config_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct ImConfig {
    /// Cube side length, meters.
    pub cube_size: f64,
    /// Truncation band half-width, meters.
    pub truncation: f64,
    pub max_range: f64,
    pub max_weight: u16,
    /// An `ImStrategy` value.
    pub strategy: u32,
    /// Selects the loose baseline (three private vertices per triangle).
    pub loose: bool,
    pub refine: bool,
    pub epsilon: f64,
    pub frustum_only: bool,
    /// 0 uses all cores.
    pub workers: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct ImIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

/// Sensor-to-world pose: translation and unit quaternion (x, y, z, w).
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct ImPose {
    pub translation: [f64; 3],
    pub rotation: [f64; 4],
}

/// Counters for one processed frame.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct ImFrameStats {
    pub frame: u32,
    pub blocks_meshed: usize,
    pub vertices_live: usize,
    pub triangles_live: usize,
    pub vertices_allocated_total: u64,
    pub vertices_recycled_total: u64,
    pub irregular_cubes: usize,
    pub fusion_ms: f64,
    pub meshing_ms: f64,
}

/// Opaque engine handle.
pub struct ImEngine {
    inner: Engine,
}

/// Opaque snapshot of a compacted mesh.
pub struct ImMesh {
    inner: CompactMesh,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> ImStatus {
    match e {
        Error::Capacity { .. } => ImStatus::Capacity,
        Error::Config(_) => ImStatus::InvalidArgument,
        Error::Internal(_)
        | Error::DoubleFree(_)
        | Error::MissingEdgeVertex { .. }
        | Error::BlockNotFound(_) => ImStatus::Internal,
        _ => ImStatus::Input,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (ImStatus, String)>) -> ImStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ImStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("panic: {msg}"));
            ImStatus::Internal
        }
    }
}

fn engine_err(e: Error) -> (ImStatus, String) {
    (status_of(&e), e.to_string())
}

fn null_arg(name: &str) -> (ImStatus, String) {
    (ImStatus::InvalidArgument, format!("{name} is null"))
}

/// Message for the last failed call on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn im_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn im_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Default settings for the given cube size.
#[no_mangle]
pub extern "C" fn im_config_default(cube_size: f64) -> ImConfig {
    let c = EngineConfig::new(cube_size);
    ImConfig {
        cube_size,
        truncation: c.fusion.truncation,
        max_range: c.fusion.max_range,
        max_weight: c.fusion.max_weight,
        strategy: ImStrategy::Claim as u32,
        loose: false,
        refine: c.refine.enabled,
        epsilon: c.refine.epsilon,
        frustum_only: c.frustum_only,
        workers: c.workers,
    }
}

fn engine_config(c: &ImConfig) -> Result<EngineConfig, (ImStatus, String)> {
    let mut cfg = EngineConfig::new(c.cube_size);
    cfg.fusion.truncation = c.truncation;
    cfg.fusion.max_range = c.max_range;
    cfg.fusion.max_weight = c.max_weight;
    cfg.strategy = match c.strategy {
        s if s == ImStrategy::Serial as u32 => Strategy::Serial,
        s if s == ImStrategy::Claim as u32 => Strategy::Claim,
        s if s == ImStrategy::Partition as u32 => Strategy::Partition,
        s => return Err((ImStatus::InvalidArgument, format!("unknown strategy {s}"))),
    };
    cfg.mode = if c.loose {
        MeshMode::Loose
    } else {
        MeshMode::Shared
    };
    cfg.refine.enabled = c.refine;
    cfg.refine.epsilon = c.epsilon;
    cfg.frustum_only = c.frustum_only;
    cfg.workers = c.workers;
    Ok(cfg)
}

/// Creates an engine. On success `*out` receives a handle to release with
/// [`im_engine_free`].
///
/// # Safety
/// `config` and `intrinsics` must be valid for reads; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn im_engine_new(
    config: *const ImConfig,
    intrinsics: *const ImIntrinsics,
    out: *mut *mut ImEngine,
) -> ImStatus {
    guard(|| {
        let config = config.as_ref().ok_or_else(|| null_arg("config"))?;
        let k = intrinsics.as_ref().ok_or_else(|| null_arg("intrinsics"))?;
        if out.is_null() {
            return Err(null_arg("out"));
        }
        let k = Intrinsics {
            fx: k.fx,
            fy: k.fy,
            cx: k.cx,
            cy: k.cy,
            width: k.width,
            height: k.height,
        };
        let engine = Engine::new(engine_config(config)?, k).map_err(engine_err)?;
        *out = Box::into_raw(Box::new(ImEngine { inner: engine }));
        Ok(())
    })
}

/// Releases an engine. Null is ignored.
///
/// # Safety
/// `engine` must come from [`im_engine_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn im_engine_free(engine: *mut ImEngine) {
    if !engine.is_null() {
        drop(Box::from_raw(engine));
    }
}

/// Fuses one depth image (meters, row-major, 0 = invalid) and updates the mesh.
/// `stats` may be null.
///
/// # Safety
/// `depth` must hold `width * height` floats; other pointers valid or null as documented.
#[no_mangle]
pub unsafe extern "C" fn im_engine_process_frame(
    engine: *mut ImEngine,
    depth: *const f32,
    width: u32,
    height: u32,
    pose: *const ImPose,
    stats: *mut ImFrameStats,
) -> ImStatus {
    guard(|| {
        let engine = &mut engine.as_mut().ok_or_else(|| null_arg("engine"))?.inner;
        let pose = pose.as_ref().ok_or_else(|| null_arg("pose"))?;
        if depth.is_null() {
            return Err(null_arg("depth"));
        }
        let n = width as usize * height as usize;
        let pixels = std::slice::from_raw_parts(depth, n).to_vec();
        let [x, y, z, w] = pose.rotation;
        let q = Quaternion::new(w, x, y, z);
        if q.norm().is_nan() || q.norm() <= 0.0 {
            return Err((
                ImStatus::InvalidArgument,
                "rotation quaternion is zero".into(),
            ));
        }
        let pose = Pose::from_quaternion(pose.translation, UnitQuaternion::from_quaternion(q));
        let frame = DepthFrame::new(width, height, pixels, engine.frame_count());
        let r = engine.process_frame(&frame, &pose).map_err(engine_err)?;
        if let Some(s) = stats.as_mut() {
            let store = engine.store();
            *s = ImFrameStats {
                frame: r.frame,
                blocks_meshed: r.mesh.blocks_meshed,
                vertices_live: store.vertices_live(),
                triangles_live: store.triangles_live(),
                vertices_allocated_total: store.vertex_pool().high_water() as u64,
                vertices_recycled_total: store.vertex_pool().frees_total(),
                irregular_cubes: r.mesh.irregular_cubes,
                fusion_ms: r.fusion_ms,
                meshing_ms: r.meshing_ms,
            };
        }
        Ok(())
    })
}

/// Runs the full store consistency scan.
///
/// # Safety
/// `engine` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn im_engine_audit(engine: *const ImEngine) -> ImStatus {
    guard(|| {
        let engine = &engine.as_ref().ok_or_else(|| null_arg("engine"))?.inner;
        engine.audit().map(|_| ()).map_err(engine_err)
    })
}

/// Copies the live mesh into a new snapshot; release it with [`im_mesh_free`].
///
/// # Safety
/// `engine` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn im_engine_compact(
    engine: *const ImEngine,
    out: *mut *mut ImMesh,
) -> ImStatus {
    guard(|| {
        let engine = &engine.as_ref().ok_or_else(|| null_arg("engine"))?.inner;
        if out.is_null() {
            return Err(null_arg("out"));
        }
        *out = Box::into_raw(Box::new(ImMesh {
            inner: engine.compact_mesh(),
        }));
        Ok(())
    })
}

/// # Safety
/// `mesh` must come from [`im_engine_compact`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn im_mesh_free(mesh: *mut ImMesh) {
    if !mesh.is_null() {
        drop(Box::from_raw(mesh));
    }
}

/// # Safety
/// `mesh` must be a live handle or null (returns 0).
#[no_mangle]
pub unsafe extern "C" fn im_mesh_vertex_count(mesh: *const ImMesh) -> usize {
    mesh.as_ref().map_or(0, |m| m.inner.vertex_count())
}

/// # Safety
/// `mesh` must be a live handle or null (returns 0).
#[no_mangle]
pub unsafe extern "C" fn im_mesh_triangle_count(mesh: *const ImMesh) -> usize {
    mesh.as_ref().map_or(0, |m| m.inner.triangle_count())
}

/// Interleaved xyz positions, `3 * vertex_count` floats, owned by the mesh.
///
/// # Safety
/// `mesh` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn im_mesh_positions(mesh: *const ImMesh) -> *const f32 {
    mesh.as_ref()
        .map_or(ptr::null(), |m| m.inner.positions.as_ptr().cast())
}

/// Interleaved unit normals, `3 * vertex_count` floats.
///
/// # Safety
/// `mesh` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn im_mesh_normals(mesh: *const ImMesh) -> *const f32 {
    mesh.as_ref()
        .map_or(ptr::null(), |m| m.inner.normals.as_ptr().cast())
}

/// Frames since each vertex was created, `vertex_count` entries.
///
/// # Safety
/// `mesh` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn im_mesh_ages(mesh: *const ImMesh) -> *const u32 {
    mesh.as_ref().map_or(ptr::null(), |m| m.inner.ages.as_ptr())
}

/// Triangle vertex indices, `3 * triangle_count` entries.
///
/// # Safety
/// `mesh` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn im_mesh_indices(mesh: *const ImMesh) -> *const u32 {
    mesh.as_ref()
        .map_or(ptr::null(), |m| m.inner.indices.as_ptr())
}
