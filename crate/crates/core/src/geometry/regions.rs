use serde::{Deserialize, Serialize};

use super::{contains_any, Aabb, HexMesh, PointCloud, Region};
use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "T: Real + Serialize + serde::de::DeserializeOwned")]
pub struct NamedBoxes<T> {
    pub name: String,
    pub boxes: Vec<Aabb<T>>,
}

/// Box descriptions of the coupled configuration. All membership tests use closed boxes.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "T: Real + Serialize + serde::de::DeserializeOwned")]
pub struct Decomposition<T> {
    pub omega_n: Vec<Aabb<T>>,
    pub eta_d: Vec<Aabb<T>>,
    pub eta_c: Vec<Aabb<T>>,
    pub overlap: Vec<Aabb<T>>,
    pub gamma_d: Vec<Aabb<T>>,
    pub gamma_c: Vec<Aabb<T>>,
    /// Extra node sets, e.g. rigid-body fix edges or named Dirichlet ends.
    #[serde(default)]
    pub node_sets: Vec<NamedBoxes<T>>,
    #[serde(default)]
    pub face_sets: Vec<NamedBoxes<T>>,
}

pub const GAMMA_D: &str = "gamma_d";
pub const GAMMA_C: &str = "gamma_c";

/// Tags cloud points (η_D > η_c > interior) and fills the mesh's node and face sets.
///
/// `gamma_c` receives nodes of the Γ_c boxes that are not in Γ_D.
pub fn classify_regions<T: Real>(
    cloud: &mut PointCloud<T>,
    mesh: &mut HexMesh<T>,
    d: &Decomposition<T>,
) -> Result<()> {
    let tol = T::lit(1e-9) * cloud.spacing;
    for i in 0..cloud.len() {
        let x = cloud.positions[i];
        cloud.tags[i] = if contains_any(&d.eta_d, x, tol) {
            Region::Dirichlet
        } else if contains_any(&d.eta_c, x, tol) {
            Region::Control
        } else if contains_any(&d.omega_n, x, tol) {
            Region::Interior
        } else {
            return Err(Error::Classification {
                x: x[0].as_f64(),
                y: x[1].as_f64(),
                z: x[2].as_f64(),
            });
        };
        cloud.overlap[i] = contains_any(&d.overlap, x, tol);
    }

    let gd = mesh.nodes_in(&d.gamma_d);
    let gc: Vec<usize> = mesh
        .nodes_in(&d.gamma_c)
        .into_iter()
        .filter(|n| gd.binary_search(n).is_err())
        .collect();
    mesh.node_sets.insert(GAMMA_D.into(), gd);
    mesh.node_sets.insert(GAMMA_C.into(), gc);
    for ns in &d.node_sets {
        let nodes = mesh.nodes_in(&ns.boxes);
        mesh.node_sets.insert(ns.name.clone(), nodes);
    }
    for fs in &d.face_sets {
        let faces = mesh.faces_in(&fs.boxes)?;
        mesh.face_sets.insert(fs.name.clone(), faces);
    }
    Ok(())
}
