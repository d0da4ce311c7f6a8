//! Trilinear hexahedral discretization of Navier–Cauchy elasticity.

pub mod hex8;

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::HexMesh;
use crate::lps::MaterialParams;
use crate::scalar::{Real, Vec3};
use crate::sparse::{split_columns, zero_block, Block, BlockCsr, Csr, Slot};

pub type VectorField<T> = Arc<dyn Fn(Vec3<T>) -> Vec3<T> + Send + Sync>;

#[derive(Clone)]
pub struct DirichletSpec<T> {
    pub node_set: String,
    pub mask: [bool; 3],
    pub value: VectorField<T>,
}

/// Loads and essential conditions on the local model.
#[derive(Clone, Default)]
pub struct LoadSpec<T> {
    pub body: Option<VectorField<T>>,
    /// (face set, traction in MPa)
    pub tractions: Vec<(String, Vec3<T>)>,
    pub dirichlet: Vec<DirichletSpec<T>>,
}

impl<T> std::fmt::Debug for LoadSpec<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LoadSpec")
            .field("body", &self.body.is_some())
            .field("tractions", &self.tractions.len())
            .field("dirichlet", &self.dirichlet.len())
            .finish()
    }
}

pub fn constant_field<T: Real>(v: Vec3<T>) -> VectorField<T> {
    Arc::new(move |_| v)
}

fn cell_coords<T: Real>(mesh: &HexMesh<T>, c: usize) -> [Vec3<T>; 8] {
    mesh.cells[c].map(|n| mesh.nodes[n])
}

fn node_pattern<T: Real>(mesh: &HexMesh<T>) -> Vec<Vec<u32>> {
    let mut adj: Vec<Vec<u32>> = vec![Vec::new(); mesh.num_nodes()];
    for cell in &mesh.cells {
        for &a in cell {
            adj[a].extend(cell.iter().map(|&b| b as u32));
        }
    }
    for row in &mut adj {
        row.sort_unstable();
        row.dedup();
    }
    adj
}

/// Galerkin stiffness with 2x2x2 Gauss quadrature.
pub fn assemble_stiffness<T: Real>(mesh: &HexMesh<T>, params: &MaterialParams<T>) -> Result<BlockCsr<T>> {
    let pattern = node_pattern(mesh);
    let mut rows: Vec<Vec<(u32, Block<T>)>> = pattern
        .iter()
        .map(|r| r.iter().map(|&c| (c, zero_block())).collect())
        .collect();
    let (lambda, mu) = (params.lambda(), params.mu());
    let mut cached: Option<([Vec3<T>; 8], Vec<[T; 24]>)> = None;
    for (c, cell) in mesh.cells.iter().enumerate() {
        let x = cell_coords(mesh, c);
        let rel = x.map(|p| [p[0] - x[0][0], p[1] - x[0][1], p[2] - x[0][2]]);
        let reuse = matches!(&cached, Some((r, _)) if *r == rel);
        if !reuse {
            cached = Some((rel, hex8::element_stiffness(&x, lambda, mu, c)?));
        }
        let ke = &cached.as_ref().unwrap().1;
        for (a, &na) in cell.iter().enumerate() {
            let row = &mut rows[na];
            for (b, &nb) in cell.iter().enumerate() {
                let k = row.binary_search_by_key(&(nb as u32), |e| e.0).expect("pattern");
                let blk = &mut row[k].1;
                for i in 0..3 {
                    for j in 0..3 {
                        blk[i][j] += ke[3 * a + i][3 * b + j];
                    }
                }
            }
        }
    }
    let mut k = BlockCsr::from_rows(mesh.num_nodes(), rows);
    k.check_symmetry(T::lit(1e-12));
    Ok(k)
}

pub fn assemble_body_load<T: Real>(mesh: &HexMesh<T>, b: &dyn Fn(Vec3<T>) -> Vec3<T>) -> Result<Vec<T>> {
    let mut f = vec![T::zero(); 3 * mesh.num_nodes()];
    for (c, cell) in mesh.cells.iter().enumerate() {
        let fe = hex8::element_body_load(&cell_coords(mesh, c), b, c)?;
        for (a, &n) in cell.iter().enumerate() {
            for d in 0..3 {
                f[3 * n + d] += fe[a][d];
            }
        }
    }
    Ok(f)
}

pub fn assemble_traction_load<T: Real>(mesh: &HexMesh<T>, face_set: &str, tau: Vec3<T>) -> Result<Vec<T>> {
    let mut f = vec![T::zero(); 3 * mesh.num_nodes()];
    for &face in mesh.face_set(face_set)? {
        if !mesh.is_boundary_face(face) {
            return Err(Error::Topology(format!(
                "face {} of cell {} in set `{face_set}` is interior",
                face.local, face.cell
            )));
        }
        let ids = mesh.face_node_indices(face);
        let fe = hex8::face_traction_load(&ids.map(|n| mesh.nodes[n]), tau);
        for (a, &n) in ids.iter().enumerate() {
            for d in 0..3 {
                f[3 * n + d] += fe[a][d];
            }
        }
    }
    Ok(f)
}

/// Full load vector: body force plus all tractions.
pub fn assemble_loads<T: Real>(mesh: &HexMesh<T>, spec: &LoadSpec<T>) -> Result<Vec<T>> {
    let mut f = match &spec.body {
        Some(b) => assemble_body_load(mesh, b.as_ref())?,
        None => vec![T::zero(); 3 * mesh.num_nodes()],
    };
    for (name, tau) in &spec.tractions {
        let ft = assemble_traction_load(mesh, name, *tau)?;
        for (a, b) in f.iter_mut().zip(ft) {
            *a += b;
        }
    }
    Ok(f)
}

/// Constrained dof → prescribed value. Rejects conflicting values on one dof.
pub fn constrained_dofs<T: Real>(mesh: &HexMesh<T>, spec: &LoadSpec<T>) -> Result<BTreeMap<usize, T>> {
    let mut out: BTreeMap<usize, T> = BTreeMap::new();
    for d in &spec.dirichlet {
        for &n in mesh.node_set(&d.node_set)? {
            let v = (d.value)(mesh.nodes[n]);
            for c in 0..3 {
                if !d.mask[c] {
                    continue;
                }
                let dof = 3 * n + c;
                if let Some(&old) = out.get(&dof) {
                    let tol = T::lit(1e-12) * T::one().max(old.abs()).max(v[c].abs());
                    if (old - v[c]).abs() > tol {
                        return Err(Error::Validation(format!(
                            "node {n} component {c} constrained to both {old} and {}",
                            v[c]
                        )));
                    }
                }
                out.insert(dof, v[c]);
            }
        }
    }
    Ok(out)
}

/// System on the free dofs after eliminating the constrained ones.
#[derive(Debug, Clone)]
pub struct ReducedSystem<T> {
    pub matrix: Csr<T>,
    pub rhs: Vec<T>,
    pub free: Vec<usize>,
    pub fixed: Vec<(usize, T)>,
    pub ndofs: usize,
}

impl<T: Real> ReducedSystem<T> {
    /// Full-length vector from free values and the stored lift.
    pub fn expand(&self, free_values: &[T]) -> Vec<T> {
        let mut u = vec![T::zero(); self.ndofs];
        for (&d, &v) in self.free.iter().zip(free_values) {
            u[d] = v;
        }
        for &(d, v) in &self.fixed {
            u[d] = v;
        }
        u
    }
}

pub fn apply_dirichlet<T: Real>(k: &BlockCsr<T>, f: &[T], constraints: &BTreeMap<usize, T>) -> Result<ReducedSystem<T>> {
    let ndofs = k.dim();
    if f.len() != ndofs {
        return Err(Error::Shape { expected: ndofs, got: f.len() });
    }
    let mut slots = vec![Slot { part: 0, index: 0 }; ndofs];
    let mut free = Vec::new();
    let mut fixed = Vec::new();
    for d in 0..ndofs {
        if let Some(&v) = constraints.get(&d) {
            slots[d] = Slot { part: 1, index: fixed.len() as u32 };
            fixed.push((d, v));
        } else {
            slots[d] = Slot { part: 0, index: free.len() as u32 };
            free.push(d);
        }
    }
    let mut parts = split_columns(k, &free, &slots, &[free.len(), fixed.len()]);
    let kfd = parts.pop().unwrap();
    let mut kff = parts.pop().unwrap();
    kff.symmetric = k.symmetric;
    let g: Vec<T> = fixed.iter().map(|e| e.1).collect();
    let lift = kfd.apply(&g);
    let rhs = free.iter().zip(lift).map(|(&d, l)| f[d] - l).collect();
    Ok(ReducedSystem { matrix: kff, rhs, free, fixed, ndofs })
}

/// `K u - f` restricted to `dofs`: the support reactions.
pub fn reactions<T: Real>(k: &BlockCsr<T>, f: &[T], u: &[T], dofs: &[usize]) -> Vec<T> {
    let ku = k.apply(u);
    dofs.iter().map(|&d| ku[d] - f[d]).collect()
}
