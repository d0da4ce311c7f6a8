use std::collections::{BTreeMap, BTreeSet};

use super::{Aabb, BoxUnion, GridLookup};
use crate::error::{Error, Result};
use crate::scalar::{Real, Vec3};

/// Corner offsets of the hex8 reference ordering.
pub const HEX_CORNERS: [[i64; 3]; 8] = [
    [0, 0, 0],
    [1, 0, 0],
    [1, 1, 0],
    [0, 1, 0],
    [0, 0, 1],
    [1, 0, 1],
    [1, 1, 1],
    [0, 1, 1],
];

/// Local node indices of each face, in cyclic order: -x, +x, -y, +y, -z, +z.
pub const FACE_NODES: [[usize; 4]; 6] = [
    [0, 3, 7, 4],
    [1, 2, 6, 5],
    [0, 1, 5, 4],
    [3, 2, 6, 7],
    [0, 1, 2, 3],
    [4, 5, 6, 7],
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Face {
    pub cell: usize,
    /// 0..6 in the order of [`FACE_NODES`].
    pub local: u8,
}

#[derive(Debug, Clone)]
pub struct HexMesh<T> {
    pub nodes: Vec<Vec3<T>>,
    pub cells: Vec<[usize; 8]>,
    pub node_sets: BTreeMap<String, Vec<usize>>,
    pub face_sets: BTreeMap<String, Vec<Face>>,
    pub spacing: T,
    pub origin: Vec3<T>,
    pub(crate) cell_grid: Vec<[i64; 3]>,
    pub(crate) cell_lookup: GridLookup,
}

impl<T: Real> HexMesh<T> {
    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn node_set(&self, name: &str) -> Result<&[usize]> {
        self.node_sets
            .get(name)
            .map(|v| v.as_slice())
            .ok_or_else(|| Error::Validation(format!("unknown node set `{name}`")))
    }

    pub fn face_set(&self, name: &str) -> Result<&[Face]> {
        self.face_sets
            .get(name)
            .map(|v| v.as_slice())
            .ok_or_else(|| Error::Validation(format!("unknown face set `{name}`")))
    }

    pub fn face_node_indices(&self, f: Face) -> [usize; 4] {
        let c = &self.cells[f.cell];
        FACE_NODES[f.local as usize].map(|k| c[k])
    }

    /// True when no cell lies across the face.
    pub fn is_boundary_face(&self, f: Face) -> bool {
        let axis = (f.local / 2) as usize;
        let dir = if f.local % 2 == 0 { -1 } else { 1 };
        let mut s = self.cell_grid[f.cell];
        s[axis] += dir;
        self.cell_lookup.get(s).is_none()
    }

    pub fn nodes_in(&self, boxes: &[Aabb<T>]) -> Vec<usize> {
        let tol = self.tolerance();
        (0..self.nodes.len())
            .filter(|&n| super::contains_any(boxes, self.nodes[n], tol))
            .collect()
    }

    /// Boundary faces whose four nodes all lie in `boxes`.
    pub fn faces_in(&self, boxes: &[Aabb<T>]) -> Result<Vec<Face>> {
        let tol = self.tolerance();
        let mut out = Vec::new();
        for cell in 0..self.cells.len() {
            for local in 0..6u8 {
                let f = Face { cell, local };
                let inside = self
                    .face_node_indices(f)
                    .iter()
                    .all(|&n| super::contains_any(boxes, self.nodes[n], tol));
                if !inside {
                    continue;
                }
                if !self.is_boundary_face(f) {
                    return Err(Error::Topology(format!(
                        "face {local} of cell {cell} is interior to the mesh"
                    )));
                }
                out.push(f);
            }
        }
        Ok(out)
    }

    pub(crate) fn tolerance(&self) -> T {
        T::lit(1e-9) * self.spacing
    }
}

/// Structured hex8 mesh on the grid anchored at the first box's lower corner.
pub fn generate_hex_mesh<T: Real>(domain: &BoxUnion<T>, h: T) -> Result<HexMesh<T>> {
    let ranges = domain.lattice_ranges(h)?;
    let mut cell_sites = BTreeSet::new();
    for r in &ranges {
        for i in r[0].0..r[0].1 {
            for j in r[1].0..r[1].1 {
                for k in r[2].0..r[2].1 {
                    cell_sites.insert([i, j, k]);
                }
            }
        }
    }
    let mut node_sites = BTreeSet::new();
    for c in &cell_sites {
        for o in HEX_CORNERS {
            node_sites.insert([c[0] + o[0], c[1] + o[1], c[2] + o[2]]);
        }
    }
    let node_grid: Vec<[i64; 3]> = node_sites.into_iter().collect();
    let node_lookup = GridLookup::build(&node_grid);
    let cell_grid: Vec<[i64; 3]> = cell_sites.into_iter().collect();
    let cell_lookup = GridLookup::build(&cell_grid);
    let origin = domain.boxes[0].lo;
    let nodes = node_grid
        .iter()
        .map(|s| [0, 1, 2].map(|a| origin[a] + T::lit(s[a] as f64) * h))
        .collect();
    let cells = cell_grid
        .iter()
        .map(|c| {
            HEX_CORNERS.map(|o| {
                node_lookup
                    .get([c[0] + o[0], c[1] + o[1], c[2] + o[2]])
                    .expect("corner node generated")
            })
        })
        .collect();
    Ok(HexMesh {
        nodes,
        cells,
        node_sets: BTreeMap::new(),
        face_sets: BTreeMap::new(),
        spacing: h,
        origin,
        cell_grid,
        cell_lookup,
    })
}

/// Cell containing `x` and its trilinear reference coordinates.
pub fn locate_in_mesh<T: Real>(mesh: &HexMesh<T>, x: Vec3<T>) -> Result<(usize, Vec3<T>)> {
    let h = mesh.spacing;
    let tol = T::lit(1e-9);
    let mut candidates: [Vec<i64>; 3] = Default::default();
    for a in 0..3 {
        let t = (x[a] - mesh.origin[a]) / h;
        let r = t.round();
        let ri = r.to_i64().unwrap_or(i64::MAX / 2);
        if (t - r).abs() <= tol {
            candidates[a] = vec![ri, ri - 1];
        } else {
            candidates[a] = vec![t.floor().to_i64().unwrap_or(i64::MAX / 2)];
        }
    }
    for &i in &candidates[0] {
        for &j in &candidates[1] {
            for &k in &candidates[2] {
                if let Some(cell) = mesh.cell_lookup.get([i, j, k]) {
                    let lo = mesh.nodes[mesh.cells[cell][0]];
                    let xi = [0, 1, 2].map(|a| {
                        let v = T::lit(2.0) * (x[a] - lo[a]) / h - T::one();
                        v.max(-T::one()).min(T::one())
                    });
                    return Ok((cell, xi));
                }
            }
        }
    }
    Err(Error::Location {
        x: x[0].as_f64(),
        y: x[1].as_f64(),
        z: x[2].as_f64(),
    })
}
