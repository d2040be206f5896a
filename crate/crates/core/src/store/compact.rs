use super::{Axis, Store, TriangleId, VertexId};

/// Contiguous export of the live mesh.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CompactMesh {
    pub positions: Vec<[f32; 3]>,
    pub normals: Vec<[f32; 3]>,
    /// Frames since each vertex was created.
    pub ages: Vec<u32>,
    /// Three entries per triangle, indexing `positions`.
    pub indices: Vec<u32>,
}

impl CompactMesh {
    pub fn vertex_count(&self) -> usize {
        self.positions.len()
    }

    pub fn triangle_count(&self) -> usize {
        self.indices.len() / 3
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty() && self.indices.is_empty()
    }

    pub fn triangles(&self) -> impl Iterator<Item = [u32; 3]> + '_ {
        self.indices.chunks_exact(3).map(|t| [t[0], t[1], t[2]])
    }
}

// Blocks in coordinate order, cubes in local index order, edge slots X, Y, Z,
// then triangle slots in order. Vertices not bound to an edge are numbered at
// their first use by a triangle.
pub(super) fn compact(store: &Store, current_frame: u32) -> CompactMesh {
    let mut mesh = CompactMesh::default();
    let mut remap = vec![u32::MAX; store.vertex_pool().high_water() as usize];
    let blocks = store.sorted_block_ids();

    let push = |mesh: &mut CompactMesh, v: VertexId, remap: &mut Vec<u32>| -> u32 {
        let slot = &mut remap[v.0 as usize];
        if *slot == u32::MAX {
            let vert = store.vertex(v);
            *slot = mesh.positions.len() as u32;
            mesh.positions.push(vert.position());
            mesh.normals.push(vert.normal());
            mesh.ages
                .push(current_frame.saturating_sub(vert.birth_frame()));
        }
        *slot
    };

    for &id in &blocks {
        for cube in store.block(id).cubes() {
            for axis in Axis::ALL {
                if let Some(h) = cube.edge_vertex(axis) {
                    push(&mut mesh, VertexId(h), &mut remap);
                }
            }
        }
    }
    for &id in &blocks {
        for cube in store.block(id).cubes() {
            for t in cube.triangle_handles() {
                for v in store.triangle(TriangleId(t)).vertices() {
                    let i = push(&mut mesh, v, &mut remap);
                    mesh.indices.push(i);
                }
            }
        }
    }
    mesh
}
