use crate::error::{Error, Result};
use crate::fem::hex8;
use crate::geometry::{locate_in_mesh, HexMesh, PointCloud, Region};
use crate::scalar::{Real, Vec3};

/// Overlap samples: `S_n` picks a cloud point, `S_l` interpolates the mesh there.
#[derive(Debug, Clone)]
pub struct SelectionOps<T> {
    pub points: Vec<usize>,
    pub cells: Vec<usize>,
    pub nodes: Vec<[usize; 8]>,
    pub weights: Vec<[T; 8]>,
    /// Ṽ_i = V_i
    pub volumes: Vec<T>,
}

impl<T: Real> SelectionOps<T> {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `S_n u_n - S_l u_l` per sample.
    pub fn residuals(&self, un: &[T], ul: &[T]) -> Vec<Vec3<T>> {
        (0..self.len())
            .map(|k| {
                let p = self.points[k];
                let mut r = [un[3 * p], un[3 * p + 1], un[3 * p + 2]];
                for (&n, &w) in self.nodes[k].iter().zip(&self.weights[k]) {
                    for c in 0..3 {
                        r[c] -= w * ul[3 * n + c];
                    }
                }
                r
            })
            .collect()
    }
}

/// One sample per overlap point. η_c points are sampled only when `sample_controls` is set.
pub fn build_selection_ops<T: Real>(cloud: &PointCloud<T>, mesh: &HexMesh<T>, sample_controls: bool) -> Result<SelectionOps<T>> {
    let mut s = SelectionOps {
        points: Vec::new(),
        cells: Vec::new(),
        nodes: Vec::new(),
        weights: Vec::new(),
        volumes: Vec::new(),
    };
    for i in 0..cloud.len() {
        if !cloud.overlap[i] || (!sample_controls && cloud.tags[i] == Region::Control) {
            continue;
        }
        let x = cloud.positions[i];
        let (cell, xi) = locate_in_mesh(mesh, x).map_err(|_| Error::Coverage {
            point: i,
            x: x[0].as_f64(),
            y: x[1].as_f64(),
            z: x[2].as_f64(),
        })?;
        s.points.push(i);
        s.cells.push(cell);
        s.nodes.push(mesh.cells[cell]);
        s.weights.push(hex8::shape(xi));
        s.volumes.push(cloud.volumes[i]);
    }
    Ok(s)
}
