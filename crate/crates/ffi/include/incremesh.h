#ifndef INCREMESH_H
#define INCREMESH_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes. Values match the command line exit codes where they overlap.
 */
typedef enum ImStatus {
  IM_STATUS_OK = 0,
  /**
   * Null pointer, bad enum value or invalid configuration.
   */
  IM_STATUS_INVALID_ARGUMENT = 1,
  /**
   * Malformed input data.
   */
  IM_STATUS_INPUT = 2,
  /**
   * A pool or table ran out of space.
   */
  IM_STATUS_CAPACITY = 3,
  /**
   * Consistency failure or caught panic.
   */
  IM_STATUS_INTERNAL = 4,
} ImStatus;

/**
 * Opaque engine handle.
 */
typedef struct ImEngine ImEngine;

/**
 * Opaque snapshot of a compacted mesh.
 */
typedef struct ImMesh ImMesh;

/**
 * Engine settings. Obtain defaults from [`im_config_default`].
 */
typedef struct ImConfig {
  /**
   * Cube side length, meters.
   */
  double cube_size;
  /**
   * Truncation band half-width, meters.
   */
  double truncation;
  double max_range;
  uint16_t max_weight;
  /**
   * An `ImStrategy` value.
   */
  uint32_t strategy;
  /**
   * Selects the loose baseline (three private vertices per triangle).
   */
  bool loose;
  bool refine;
  double epsilon;
  bool frustum_only;
  /**
   * 0 uses all cores.
   */
  size_t workers;
} ImConfig;

typedef struct ImIntrinsics {
  double fx;
  double fy;
  double cx;
  double cy;
  uint32_t width;
  uint32_t height;
} ImIntrinsics;

/**
 * Sensor-to-world pose: translation and unit quaternion (x, y, z, w).
 */
typedef struct ImPose {
  double translation[3];
  double rotation[4];
} ImPose;

/**
 * Counters for one processed frame.
 */
typedef struct ImFrameStats {
  uint32_t frame;
  size_t blocks_meshed;
  size_t vertices_live;
  size_t triangles_live;
  uint64_t vertices_allocated_total;
  uint64_t vertices_recycled_total;
  size_t irregular_cubes;
  double fusion_ms;
  double meshing_ms;
} ImFrameStats;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. Valid until the
 * next failing call on the same thread.
 */
const char *im_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *im_version(void);

/**
 * Default settings for the given cube size.
 */
struct ImConfig im_config_default(double cube_size);

/**
 * Creates an engine. On success `*out` receives a handle to release with
 * [`im_engine_free`].
 *
 * # Safety
 * `config` and `intrinsics` must be valid for reads; `out` valid for writes.
 */
enum ImStatus im_engine_new(const struct ImConfig *config,
                            const struct ImIntrinsics *intrinsics,
                            struct ImEngine **out);

/**
 * Releases an engine. Null is ignored.
 *
 * # Safety
 * `engine` must come from [`im_engine_new`] and not be used afterwards.
 */
void im_engine_free(struct ImEngine *engine);

/**
 * Fuses one depth image (meters, row-major, 0 = invalid) and updates the mesh.
 * `stats` may be null.
 *
 * # Safety
 * `depth` must hold `width * height` floats; other pointers valid or null as documented.
 */
enum ImStatus im_engine_process_frame(struct ImEngine *engine,
                                      const float *depth,
                                      uint32_t width,
                                      uint32_t height,
                                      const struct ImPose *pose,
                                      struct ImFrameStats *stats);

/**
 * Runs the full store consistency scan.
 *
 * # Safety
 * `engine` must be a live handle.
 */
enum ImStatus im_engine_audit(const struct ImEngine *engine);

/**
 * Copies the live mesh into a new snapshot; release it with [`im_mesh_free`].
 *
 * # Safety
 * `engine` must be a live handle and `out` valid for writes.
 */
enum ImStatus im_engine_compact(const struct ImEngine *engine, struct ImMesh **out);

/**
 * # Safety
 * `mesh` must come from [`im_engine_compact`] and not be used afterwards.
 */
void im_mesh_free(struct ImMesh *mesh);

/**
 * # Safety
 * `mesh` must be a live handle or null (returns 0).
 */
size_t im_mesh_vertex_count(const struct ImMesh *mesh);

/**
 * # Safety
 * `mesh` must be a live handle or null (returns 0).
 */
size_t im_mesh_triangle_count(const struct ImMesh *mesh);

/**
 * Interleaved xyz positions, `3 * vertex_count` floats, owned by the mesh.
 *
 * # Safety
 * `mesh` must be a live handle or null.
 */
const float *im_mesh_positions(const struct ImMesh *mesh);

/**
 * Interleaved unit normals, `3 * vertex_count` floats.
 *
 * # Safety
 * `mesh` must be a live handle or null.
 */
const float *im_mesh_normals(const struct ImMesh *mesh);

/**
 * Frames since each vertex was created, `vertex_count` entries.
 *
 * # Safety
 * `mesh` must be a live handle or null.
 */
const uint32_t *im_mesh_ages(const struct ImMesh *mesh);

/**
 * Triangle vertex indices, `3 * triangle_count` entries.
 *
 * # Safety
 * `mesh` must be a live handle or null.
 */
const uint32_t *im_mesh_indices(const struct ImMesh *mesh);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* INCREMESH_H */
