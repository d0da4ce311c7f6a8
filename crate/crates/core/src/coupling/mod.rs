//! Optimization-based coupling: partitioned state systems, overlap mismatch
//! objective, adjoint gradient, and the LBFGS driver.

mod selection;

pub use selection::{build_selection_ops, SelectionOps};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{self, LoadSpec, VectorField};
use crate::geometry::{contains_any, Aabb, BoxUnion, Family, HexMesh, PointCloud, Region, GAMMA_C};
use crate::linsolve::{PreparedSolver, SolverConfig};
use crate::lps::{self, InfluenceFunction, MaterialParams};
use crate::optim::{lbfgs, IterationRecord, OptimizerConfig, Termination};
use crate::scalar::{norm2, Real, Vec3};
use crate::sparse::{split_columns, BlockCsr, Csr, Slot};

/// Virtual controls. The flat layout is `ν_n` (three components per η_c point,
/// in cloud order) followed by `ν_l` (the Γ_c node dofs in mesh order).
#[derive(Debug, Clone, PartialEq)]
pub struct ControlVector<T> {
    pub nonlocal: Vec<T>,
    pub local: Vec<T>,
}

impl<T: Real> ControlVector<T> {
    pub fn zeros(n_nonlocal: usize, n_local: usize) -> Self {
        Self { nonlocal: vec![T::zero(); n_nonlocal], local: vec![T::zero(); n_local] }
    }

    pub fn len(&self) -> usize {
        self.nonlocal.len() + self.local.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn to_flat(&self) -> Vec<T> {
        let mut v = self.nonlocal.clone();
        v.extend_from_slice(&self.local);
        v
    }

    pub fn from_flat(v: &[T], n_nonlocal: usize) -> Self {
        Self { nonlocal: v[..n_nonlocal].to_vec(), local: v[n_nonlocal..].to_vec() }
    }
}

/// Everything needed to set up a coupled problem.
pub struct CouplingInput<'a, T> {
    pub cloud: &'a PointCloud<T>,
    pub family: &'a Family<T>,
    pub params: MaterialParams<T>,
    pub influence: InfluenceFunction<T>,
    pub mesh: &'a HexMesh<T>,
    /// Body force density on ω_n.
    pub nonlocal_body: Option<VectorField<T>>,
    /// Volume-constraint data on η_D.
    pub nonlocal_data: Option<VectorField<T>>,
    pub local_loads: LoadSpec<T>,
    pub solver: SolverConfig,
    /// Material body used to tell free surfaces from missing layer points.
    pub body: Option<&'a BoxUnion<T>>,
    /// Neighborhood radius every ω_n point must see inside the cloud.
    pub coverage_reach: T,
    /// Whether η_c points inside Ω_o enter the objective.
    pub sample_controls: bool,
}

/// One discretized model split into interior, control and data dofs.
pub struct Side<T> {
    pub ndofs: usize,
    pub interior: Vec<usize>,
    pub control: Vec<usize>,
    pub data: Vec<usize>,
    pub data_values: Vec<T>,
    pub a_ii: PreparedSolver<T>,
    pub a_ic: Csr<T>,
    /// `b_I - A_ID g`
    pub rhs_fixed: Vec<T>,
}

impl<T: Real> Side<T> {
    fn new(
        op: &BlockCsr<T>,
        load: &[T],
        interior: Vec<usize>,
        control: Vec<usize>,
        data: Vec<(usize, T)>,
        solver: SolverConfig,
        coords: &[Vec3<T>],
        which: &'static str,
    ) -> Result<Self> {
        let ndofs = op.dim();
        let mut slots = vec![Slot { part: u8::MAX, index: 0 }; ndofs];
        for (k, &d) in interior.iter().enumerate() {
            slots[d] = Slot { part: 0, index: k as u32 };
        }
        for (k, &d) in control.iter().enumerate() {
            slots[d] = Slot { part: 1, index: k as u32 };
        }
        for (k, &(d, _)) in data.iter().enumerate() {
            slots[d] = Slot { part: 2, index: k as u32 };
        }
        let mut parts = split_columns(op, &interior, &slots, &[interior.len(), control.len(), data.len()]);
        let a_id = parts.pop().unwrap();
        let a_ic = parts.pop().unwrap();
        let mut a_ii = parts.pop().unwrap();
        let tol = T::lit(1e-12).max(T::epsilon() * T::lit(100.0));
        a_ii.check_symmetry(tol);
        let data_values: Vec<T> = data.iter().map(|e| e.1).collect();
        let lift = a_id.apply(&data_values);
        let rhs_fixed = interior.iter().zip(lift).map(|(&d, l)| load[d] - l).collect();
        let orderings = sweep_orderings(&interior, coords);
        let a_ii = PreparedSolver::with_orderings(a_ii, solver, &orderings).map_err(|source| Error::State { state: which, source })?;
        Ok(Self {
            ndofs,
            interior,
            control,
            data: data.iter().map(|e| e.0).collect(),
            data_values,
            a_ii,
            a_ic,
            rhs_fixed,
        })
    }

    fn solve(&self, controls: &[T], which: &'static str) -> Result<Vec<T>> {
        let lift = self.a_ic.apply(controls);
        let rhs: Vec<T> = self.rhs_fixed.iter().zip(lift).map(|(&r, l)| r - l).collect();
        let (ui, _) = self.a_ii.solve(&rhs).map_err(|source| Error::State { state: which, source })?;
        let mut u = vec![T::zero(); self.ndofs];
        for (&d, v) in self.interior.iter().zip(ui) {
            u[d] = v;
        }
        for (&d, &v) in self.control.iter().zip(controls) {
            u[d] = v;
        }
        for (&d, &v) in self.data.iter().zip(&self.data_values) {
            u[d] = v;
        }
        Ok(u)
    }

    /// `∂J/∂ν` given `w = ∂J/∂u` over all dofs of this side.
    fn reduced(&self, w: &[T], which: &'static str) -> Result<Vec<T>> {
        let wi: Vec<T> = self.interior.iter().map(|&d| w[d]).collect();
        let (lambda, _) = self.a_ii.solve_transpose(&wi).map_err(|source| Error::State { state: which, source })?;
        let back = self.a_ic.apply_transpose(&lambda);
        Ok(self.control.iter().zip(back).map(|(&d, b)| w[d] - b).collect())
    }
}

/// Orderings of the interior dofs that sweep the owning points plane by
/// plane, one per choice of sweep axis. On slab-shaped regions these beat RCM.
fn sweep_orderings<T: Real>(interior: &[usize], coords: &[Vec3<T>]) -> Vec<Vec<usize>> {
    (0..3)
        .map(|axis| {
            let key = |k: usize| {
                let x = coords[interior[k] / 3];
                [x[axis], x[(axis + 1) % 3], x[(axis + 2) % 3]]
            };
            let mut perm: Vec<usize> = (0..interior.len()).collect();
            perm.sort_by(|&a, &b| {
                let (ka, kb) = (key(a), key(b));
                (0..3)
                    .map(|c| ka[c].partial_cmp(&kb[c]).unwrap_or(std::cmp::Ordering::Equal))
                    .find(|o| o.is_ne())
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then(interior[a].cmp(&interior[b]))
            });
            perm
        })
        .collect()
}

pub struct CouplingProblem<T> {
    pub nonlocal: Side<T>,
    pub local: Side<T>,
    pub selection: SelectionOps<T>,
    /// Γ_c nodes owning the local control dofs (one entry per dof).
    pub local_control_nodes: Vec<usize>,
    pub nonlocal_control_points: Vec<usize>,
    pub stiffness: BlockCsr<T>,
    pub local_load: Vec<T>,
}

impl<T: Real> CouplingProblem<T> {
    pub fn build(input: CouplingInput<'_, T>) -> Result<Self> {
        let cloud = input.cloud;
        let mesh = input.mesh;
        if let Some(body) = input.body {
            lps::check_coverage(cloud, body, input.coverage_reach)?;
        }

        let interior_pts = cloud.indices_with(Region::Interior);
        let control_pts = cloud.indices_with(Region::Control);
        let data_pts = cloud.indices_with(Region::Dirichlet);
        let a = lps::assemble_lps_rows(cloud, input.family, &input.params, &input.influence, &interior_pts)?;
        let mut b_n = vec![T::zero(); 3 * cloud.len()];
        if let Some(b) = &input.nonlocal_body {
            for &p in &interior_pts {
                b_n[3 * p..3 * p + 3].copy_from_slice(&b(cloud.positions[p]));
            }
        }
        let dofs = |pts: &[usize]| -> Vec<usize> { pts.iter().flat_map(|&p| [3 * p, 3 * p + 1, 3 * p + 2]).collect() };
        let mut n_data = Vec::new();
        for &p in &data_pts {
            let v = input.nonlocal_data.as_ref().map_or([T::zero(); 3], |g| g(cloud.positions[p]));
            for c in 0..3 {
                n_data.push((3 * p + c, v[c]));
            }
        }
        let nonlocal = Side::new(&a, &b_n, dofs(&interior_pts), dofs(&control_pts), n_data, input.solver, &cloud.positions, "nonlocal")?;
        drop(a);

        let k = fem::assemble_stiffness(mesh, &input.params)?;
        let f = fem::assemble_loads(mesh, &input.local_loads)?;
        let fixed: BTreeMap<usize, T> = fem::constrained_dofs(mesh, &input.local_loads)?;
        let mut control = Vec::new();
        for &nd in mesh.node_set(GAMMA_C)? {
            for c in 0..3 {
                let d = 3 * nd + c;
                if !fixed.contains_key(&d) {
                    control.push(d);
                }
            }
        }
        control.sort_unstable();
        let is_control: std::collections::HashSet<usize> = control.iter().copied().collect();
        let interior: Vec<usize> = (0..k.dim())
            .filter(|d| !fixed.contains_key(d) && !is_control.contains(d))
            .collect();
        let data: Vec<(usize, T)> = fixed.into_iter().collect();
        let local = Side::new(&k, &f, interior, control.clone(), data, input.solver, &mesh.nodes, "local")?;
        let local_control_nodes = control.iter().map(|d| d / 3).collect();

        let selection = build_selection_ops(cloud, mesh, input.sample_controls)?;
        Ok(Self {
            nonlocal,
            local,
            selection,
            local_control_nodes,
            nonlocal_control_points: control_pts,
            stiffness: k,
            local_load: f,
        })
    }

    pub fn num_controls(&self) -> (usize, usize) {
        (self.nonlocal.control.len(), self.local.control.len())
    }

    pub fn zero_controls(&self) -> ControlVector<T> {
        let (a, b) = self.num_controls();
        ControlVector::zeros(a, b)
    }

    /// Controls equal to a prescribed field at the control points and nodes.
    pub fn controls_from_field(&self, cloud: &PointCloud<T>, mesh: &HexMesh<T>, u: &dyn Fn(Vec3<T>) -> Vec3<T>) -> ControlVector<T> {
        let nonlocal = self.nonlocal.control.iter().map(|&d| u(cloud.positions[d / 3])[d % 3]).collect();
        let local = self.local.control.iter().map(|&d| u(mesh.nodes[d / 3])[d % 3]).collect();
        ControlVector { nonlocal, local }
    }

    pub fn solve_states(&self, nu: &ControlVector<T>) -> Result<(Vec<T>, Vec<T>)> {
        self.check_controls(nu)?;
        let un = self.nonlocal.solve(&nu.nonlocal, "nonlocal")?;
        let ul = self.local.solve(&nu.local, "local")?;
        Ok((un, ul))
    }

    /// `J = ½ Σ_i Ṽ_i |S_n u_n - S_l u_l|_i²`
    pub fn objective(&self, un: &[T], ul: &[T]) -> T {
        let r = self.selection.residuals(un, ul);
        let half = T::lit(0.5);
        r.iter()
            .zip(&self.selection.volumes)
            .map(|(ri, &v)| half * v * (ri[0] * ri[0] + ri[1] * ri[1] + ri[2] * ri[2]))
            .sum()
    }

    /// Objective and reduced gradient at `nu`.
    pub fn evaluate(&self, nu: &ControlVector<T>) -> Result<(T, ControlVector<T>)> {
        let (un, ul) = self.solve_states(nu)?;
        let r = self.selection.residuals(&un, &ul);
        let half = T::lit(0.5);
        let mut j = T::zero();
        let mut wn = vec![T::zero(); self.nonlocal.ndofs];
        let mut wl = vec![T::zero(); self.local.ndofs];
        let sel = &self.selection;
        for (k, rk) in r.iter().enumerate() {
            let v = sel.volumes[k];
            j += half * v * (rk[0] * rk[0] + rk[1] * rk[1] + rk[2] * rk[2]);
            let p = sel.points[k];
            for c in 0..3 {
                wn[3 * p + c] += v * rk[c];
            }
            for (&nd, &w) in sel.nodes[k].iter().zip(&sel.weights[k]) {
                for c in 0..3 {
                    wl[3 * nd + c] -= w * v * rk[c];
                }
            }
        }
        let gn = self.nonlocal.reduced(&wn, "nonlocal adjoint")?;
        let gl = self.local.reduced(&wl, "local adjoint")?;
        Ok((j, ControlVector { nonlocal: gn, local: gl }))
    }

    pub fn reduced_gradient(&self, nu: &ControlVector<T>) -> Result<ControlVector<T>> {
        Ok(self.evaluate(nu)?.1)
    }

    pub fn optimize(&self, nu0: &ControlVector<T>, cfg: &OptimizerConfig) -> Result<OptimizationResult<T>> {
        self.check_controls(nu0)?;
        let nn = self.nonlocal.control.len();
        let min = lbfgs(nu0.to_flat(), cfg, |x| {
            let (j, g) = self.evaluate(&ControlVector::from_flat(x, nn))?;
            Ok((j, g.to_flat()))
        })?;
        let controls = ControlVector::from_flat(&min.x, nn);
        let (un, ul) = self.solve_states(&controls)?;
        Ok(OptimizationResult {
            objective: min.objective,
            gradient_norm: norm2(&min.gradient),
            controls,
            nonlocal: un,
            local: ul,
            history: min.history,
            termination: min.termination,
            converged: min.converged,
            evaluations: min.evaluations,
        })
    }

    fn check_controls(&self, nu: &ControlVector<T>) -> Result<()> {
        let (a, b) = self.num_controls();
        if nu.nonlocal.len() != a {
            return Err(Error::Shape { expected: a, got: nu.nonlocal.len() });
        }
        if nu.local.len() != b {
            return Err(Error::Shape { expected: b, got: nu.local.len() });
        }
        Ok(())
    }

    /// Overlap RMS mismatch `sqrt(2J / Σ Ṽ)`.
    pub fn mismatch_rms(&self, j: T) -> T {
        let total: T = self.selection.volumes.iter().copied().sum();
        if total == T::zero() {
            return T::zero();
        }
        (T::lit(2.0) * j / total).sqrt()
    }
}

#[derive(Debug, Clone)]
pub struct OptimizationResult<T> {
    pub controls: ControlVector<T>,
    pub nonlocal: Vec<T>,
    pub local: Vec<T>,
    pub objective: T,
    pub gradient_norm: T,
    pub history: Vec<IterationRecord>,
    pub termination: Termination,
    pub converged: bool,
    pub evaluations: usize,
}

/// Coupled field: the nonlocal solution on Ω_n and the local one on Ω_l \ Ω_o.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompositeField<T> {
    pub nonlocal_points: Vec<usize>,
    pub nonlocal_values: Vec<Vec3<T>>,
    pub local_nodes: Vec<usize>,
    pub local_values: Vec<Vec3<T>>,
    /// Local values inside Ω_o, kept for mismatch diagnostics.
    pub overlap_nodes: Vec<usize>,
    pub overlap_values: Vec<Vec3<T>>,
    pub mismatch_rms: T,
}

pub fn composite_solution<T: Real>(
    problem: &CouplingProblem<T>,
    cloud: &PointCloud<T>,
    mesh: &HexMesh<T>,
    overlap: &[Aabb<T>],
    un: &[T],
    ul: &[T],
) -> CompositeField<T> {
    let v3 = |u: &[T], i: usize| [u[3 * i], u[3 * i + 1], u[3 * i + 2]];
    let tol = T::lit(1e-9) * mesh.spacing;
    let mut out = CompositeField {
        nonlocal_points: (0..cloud.len()).collect(),
        nonlocal_values: (0..cloud.len()).map(|i| v3(un, i)).collect(),
        local_nodes: Vec::new(),
        local_values: Vec::new(),
        overlap_nodes: Vec::new(),
        overlap_values: Vec::new(),
        mismatch_rms: problem.mismatch_rms(problem.objective(un, ul)),
    };
    for n in 0..mesh.num_nodes() {
        if contains_any(overlap, mesh.nodes[n], tol) {
            out.overlap_nodes.push(n);
            out.overlap_values.push(v3(ul, n));
        } else {
            out.local_nodes.push(n);
            out.local_values.push(v3(ul, n));
        }
    }
    out
}

impl<T: Real> CouplingProblem<T> {
    /// Objective only: two state solves, no adjoints.
    pub fn evaluate_objective(&self, nu: &ControlVector<T>) -> Result<T> {
        let (un, ul) = self.solve_states(nu)?;
        Ok(self.objective(&un, &ul))
    }
}
