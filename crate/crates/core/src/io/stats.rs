//! Per-frame statistics as CSV.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One CSV row per frame, columns in declaration order.
///
/// In loose mode `vertices_live` counts the private vertices, three per triangle.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StatsRow {
    pub frame: u32,
    pub blocks_active: usize,
    pub vertices_live: usize,
    pub triangles_live: usize,
    pub vertices_allocated_total: u64,
    pub vertices_recycled_total: u64,
    pub irregular_cube_count: usize,
    pub fusion_ms: f64,
    pub meshing_ms: f64,
    pub compact_ms: f64,
}

pub const STATS_COLUMNS: [&str; 10] = [
    "frame",
    "blocks_active",
    "vertices_live",
    "triangles_live",
    "vertices_allocated_total",
    "vertices_recycled_total",
    "irregular_cube_count",
    "fusion_ms",
    "meshing_ms",
    "compact_ms",
];

pub fn write_stats(path: &Path, rows: &[StatsRow]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_stats_to(file, rows)
}

pub fn write_stats_to<W: std::io::Write>(w: W, rows: &[StatsRow]) -> Result<()> {
    let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    out.write_record(STATS_COLUMNS)?;
    for r in rows {
        out.serialize(r)?;
    }
    out.flush().map_err(|e| Error::io("<stats>", e))
}

pub fn read_stats(path: &Path) -> Result<Vec<StatsRow>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize()
        .map(|row| row.map_err(Error::from))
        .collect()
}
