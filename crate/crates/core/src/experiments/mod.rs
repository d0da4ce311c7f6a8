//! Experiment drivers: building a coupled problem from a configuration,
//! running the optimizer, and writing results.

pub mod config;
pub mod layouts;

use std::collections::BTreeMap;
use std::path::Path;

use log::info;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use config::{canned_config, load_config, parse_config, ExperimentConfig, ExperimentKind, LayerRule};
pub use layouts::{GeometryConfig, Layout};

use crate::coupling::{ControlVector, CouplingInput, CouplingProblem, OptimizationResult};
use crate::error::{Error, Result};
use crate::fem::{self, constant_field, DirichletSpec, LoadSpec, VectorField};
use crate::geometry::{
    apply_prenotch_filter, build_families, classify_regions, generate_hex_mesh, generate_point_cloud, BoxUnion, Decomposition,
    Family, HexMesh, PointCloud, PrenotchPlane,
};
use crate::io;
use crate::lps::{InfluenceFunction, MaterialParams};
use crate::verification::{self, convergence_study, ConvergenceReport, ErrorNorm, GradientCheck, LevelResult, MmsCase};
use config::DirichletValue;

/// Discretized geometry and material at one resolution.
pub struct Setup {
    pub h: f64,
    pub delta: f64,
    pub geometry: GeometryConfig,
    pub cloud: PointCloud<f64>,
    pub mesh: HexMesh<f64>,
    pub family: Family<f64>,
    pub params: MaterialParams<f64>,
    pub influence: InfluenceFunction<f64>,
    pub body: BoxUnion<f64>,
    pub mms: Option<MmsCase<f64>>,
}

pub fn build_setup(cfg: &ExperimentConfig, h: f64, delta: f64) -> Result<Setup> {
    let geometry = cfg.geometry_at(h, delta)?;
    let params = cfg.material_params()?;
    let mut cloud = generate_point_cloud(&BoxUnion::new(geometry.nonlocal_domain.clone())?, h)?;
    let mut mesh = generate_hex_mesh(&BoxUnion::new(geometry.local_domain.clone())?, h)?;
    let decomposition = Decomposition {
        omega_n: geometry.omega_n.clone(),
        eta_d: geometry.eta_d.clone(),
        eta_c: geometry.eta_c.clone(),
        overlap: geometry.overlap.clone(),
        gamma_d: geometry.gamma_d.clone(),
        gamma_c: geometry.gamma_c.clone(),
        node_sets: geometry.node_sets.clone(),
        face_sets: geometry.face_sets.clone(),
    };
    classify_regions(&mut cloud, &mut mesh, &decomposition)?;
    let mut family = build_families(&cloud, delta, cfg.partial_volume)?;
    if let Some(p) = geometry.prenotch {
        family = apply_prenotch_filter(&family, &cloud, &PrenotchPlane::new(p.axis, p.value, p.bounds)?);
    }
    let body = if geometry.body.is_empty() {
        let mut b = geometry.nonlocal_domain.clone();
        b.extend_from_slice(&geometry.local_domain);
        BoxUnion::new(b)?
    } else {
        BoxUnion::new(geometry.body.clone())?
    };
    let mms = cfg.loads.manufactured.map(|m| verification::mms_case(m, params)).transpose()?;
    Ok(Setup {
        h,
        delta,
        geometry,
        cloud,
        mesh,
        family,
        params,
        influence: InfluenceFunction::new(cfg.influence, delta)?,
        body,
        mms,
    })
}

fn local_loads(cfg: &ExperimentConfig, mms: Option<&MmsCase<f64>>) -> LoadSpec<f64> {
    let body = match mms {
        Some(m) => Some(m.b.clone()),
        None => cfg.loads.local_body.map(constant_field),
    };
    let dirichlet = cfg
        .loads
        .dirichlet
        .iter()
        .map(|d| DirichletSpec {
            node_set: d.node_set.clone(),
            mask: d.components,
            value: match (&d.value, mms) {
                (DirichletValue::Constant(v), _) => constant_field(*v),
                (DirichletValue::Named(_), Some(m)) => m.g(),
                (DirichletValue::Named(_), None) => constant_field([0.0; 3]),
            },
        })
        .collect();
    LoadSpec {
        body,
        tractions: cfg.loads.tractions.iter().map(|t| (t.face_set.clone(), t.traction)).collect(),
        dirichlet,
    }
}

pub fn build_problem(cfg: &ExperimentConfig, s: &Setup) -> Result<CouplingProblem<f64>> {
    let (nonlocal_body, nonlocal_data): (Option<VectorField<f64>>, Option<VectorField<f64>>) = match &s.mms {
        Some(m) => (Some(m.b.clone()), Some(m.g())),
        None => (cfg.loads.nonlocal_body.map(constant_field), cfg.loads.nonlocal_data.map(constant_field)),
    };
    CouplingProblem::build(CouplingInput {
        cloud: &s.cloud,
        family: &s.family,
        params: s.params,
        influence: s.influence,
        mesh: &s.mesh,
        nonlocal_body,
        nonlocal_data,
        local_loads: local_loads(cfg, s.mms.as_ref()),
        solver: cfg.solver,
        body: Some(&s.body),
        coverage_reach: cfg.layer_rule.min_thickness(s.delta),
        sample_controls: cfg.sample_control_points,
    })
}

pub struct Solved {
    pub setup: Setup,
    pub problem: CouplingProblem<f64>,
    pub result: OptimizationResult<f64>,
    /// `(error_n, error_l)` against the manufactured solution, if any.
    pub errors: Option<(ErrorNorm, ErrorNorm)>,
}

impl Solved {
    pub fn initial_objective(&self) -> f64 {
        self.result.history.first().map_or(self.result.objective, |r| r.objective)
    }

    pub fn max_abs_displacement(&self) -> f64 {
        self.result.nonlocal.iter().chain(&self.result.local).fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Summed reaction `K u - f` over the constrained dofs of each Dirichlet node set.
    pub fn reactions(&self, cfg: &ExperimentConfig) -> Result<BTreeMap<String, [f64; 3]>> {
        let mut out = BTreeMap::new();
        for d in &cfg.loads.dirichlet {
            let nodes = self.setup.mesh.node_set(&d.node_set)?;
            let dofs: Vec<usize> = nodes
                .iter()
                .flat_map(|&n| (0..3).filter(|&c| d.components[c]).map(move |c| 3 * n + c))
                .collect();
            let r = fem::reactions(&self.problem.stiffness, &self.problem.local_load, &self.result.local, &dofs);
            let mut sum = [0.0; 3];
            for (&dof, v) in dofs.iter().zip(r) {
                sum[dof % 3] += v;
            }
            out.insert(d.node_set.clone(), sum);
        }
        Ok(out)
    }
}

/// Builds and optimizes the coupled problem at `(h, δ)` from `ν = 0`.
pub fn solve(cfg: &ExperimentConfig, h: f64, delta: f64) -> Result<Solved> {
    let setup = build_setup(cfg, h, delta)?;
    let problem = build_problem(cfg, &setup)?;
    let (nn, nl) = problem.num_controls();
    info!(
        "h = {h}, δ = {delta}: {} points, {} nodes, {} + {} controls, {} overlap samples",
        setup.cloud.len(),
        setup.mesh.num_nodes(),
        nn,
        nl,
        problem.selection.points.len()
    );
    let result = problem.optimize(&problem.zero_controls(), &cfg.optimizer)?;
    info!(
        "J = {:e} after {} iterations ({:?})",
        result.objective,
        result.history.len().saturating_sub(1),
        result.termination
    );
    let errors = match &setup.mms {
        Some(m) => Some(verification::error_norms(
            &result.nonlocal,
            &setup.cloud.positions,
            &setup.cloud.volumes,
            &result.local,
            &setup.mesh.nodes,
            m.u.as_ref(),
        )?),
        None => None,
    };
    Ok(Solved { setup, problem, result, errors })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    pub experiment: String,
    pub h: f64,
    pub horizon: f64,
    pub num_points: usize,
    pub num_nodes: usize,
    pub num_bonds: usize,
    pub nonlocal_controls: usize,
    pub local_controls: usize,
    pub overlap_samples: usize,
    pub initial_objective: f64,
    pub objective: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub termination: String,
    pub converged: bool,
    pub mismatch_rms: f64,
    pub max_abs_displacement: f64,
    /// Weights of the overlap objective: the nodal volumes `V_i`.
    pub objective_scaling: String,
    pub error_n: Option<f64>,
    pub error_l: Option<f64>,
    pub reactions: BTreeMap<String, [f64; 3]>,
    pub convergence: Option<ConvergenceReport>,
    pub config: ExperimentConfig,
}

fn summarize(cfg: &ExperimentConfig, s: &Solved, convergence: Option<ConvergenceReport>) -> Result<RunSummary> {
    let (nn, nl) = s.problem.num_controls();
    Ok(RunSummary {
        experiment: cfg.experiment.name().into(),
        h: s.setup.h,
        horizon: s.setup.delta,
        num_points: s.setup.cloud.len(),
        num_nodes: s.setup.mesh.num_nodes(),
        num_bonds: s.setup.family.num_bonds(),
        nonlocal_controls: nn,
        local_controls: nl,
        overlap_samples: s.problem.selection.points.len(),
        initial_objective: s.initial_objective(),
        objective: s.result.objective,
        gradient_norm: s.result.gradient_norm,
        iterations: s.result.history.len().saturating_sub(1),
        evaluations: s.result.evaluations,
        termination: format!("{:?}", s.result.termination),
        converged: s.result.converged,
        mismatch_rms: s.problem.mismatch_rms(s.result.objective),
        max_abs_displacement: s.max_abs_displacement(),
        objective_scaling: "volume".into(),
        error_n: s.errors.map(|e| e.0.relative()),
        error_l: s.errors.map(|e| e.1.relative()),
        reactions: s.reactions(cfg)?,
        convergence,
        config: cfg.resolved()?,
    })
}

fn write_fields(dir: &Path, s: &Solved) -> Result<()> {
    io::write_nonlocal_vtk(&dir.join("nonlocal.vtk"), &s.setup, &s.result.nonlocal)?;
    io::write_local_vtk(&dir.join("local.vtk"), &s.setup.mesh, &s.result.local)?;
    io::write_history_csv(&dir.join("history.csv"), &s.result.history)
}

/// Runs the configured experiment and writes its artifacts into `out_dir`.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: &Path) -> Result<RunSummary> {
    cfg.validate(None)?;
    std::fs::create_dir_all(out_dir).map_err(|source| Error::Io { path: out_dir.display().to_string(), source })?;
    let summary = if cfg.experiment == ExperimentKind::Converge {
        let conv = cfg.converge.clone().ok_or_else(|| Error::Parameter("missing [converge] table".into()))?;
        if cfg.loads.manufactured.is_none() {
            return Err(Error::Parameter("a convergence study needs a manufactured solution".into()));
        }
        // fails before any level runs if the manufactured body force is inconsistent
        verification::mms_case(cfg.loads.manufactured.unwrap(), cfg.material_params()?)?;
        let mut last = None;
        let report = convergence_study(&conv.h_levels, conv.delta_policy, conv.delta, conv.fit_rate, |h, delta| {
            let s = solve(cfg, h, delta)?;
            let (en, el) = s.errors.expect("manufactured case");
            let level = LevelResult {
                h,
                delta,
                error_n: en.relative(),
                error_l: el.relative(),
                objective: s.result.objective,
                iterations: s.result.history.len().saturating_sub(1),
            };
            last = Some(s);
            Ok(level)
        })?;
        io::write_convergence_csv(&out_dir.join("convergence.csv"), &report)?;
        let s = last.expect("at least one level");
        write_fields(out_dir, &s)?;
        summarize(cfg, &s, Some(report))?
    } else {
        let s = solve(cfg, cfg.h, cfg.horizon)?;
        write_fields(out_dir, &s)?;
        summarize(cfg, &s, None)?
    };
    io::write_json(&out_dir.join("summary.json"), &summary)?;
    Ok(summary)
}

/// Random controls for gradient checks, uniform in `[-amplitude, amplitude]`.
pub fn random_controls(problem: &CouplingProblem<f64>, amplitude: f64, seed: u64) -> ControlVector<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut nu = problem.zero_controls();
    for v in nu.nonlocal.iter_mut().chain(nu.local.iter_mut()) {
        *v = amplitude * rng.gen_range(-1.0..=1.0);
    }
    nu
}

/// Finite-difference check of the reduced gradient at random controls.
pub fn run_gradient_check(cfg: &ExperimentConfig) -> Result<GradientCheck> {
    cfg.validate(None)?;
    let (h, delta) = match (&cfg.converge, cfg.experiment) {
        (Some(c), ExperimentKind::Converge) => (
            c.h_levels[0],
            match c.delta_policy {
                verification::DeltaPolicy::FixedDelta => c.delta,
                verification::DeltaPolicy::FixedRatio => c.delta * c.h_levels[0],
            },
        ),
        _ => (cfg.h, cfg.horizon),
    };
    let setup = build_setup(cfg, h, delta)?;
    let problem = build_problem(cfg, &setup)?;
    let gc = &cfg.gradient_check;
    let nu = random_controls(&problem, gc.amplitude, gc.seed);
    let scale = nu.to_flat().iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    verification::gradient_check(&problem, &nu, gc.components, gc.relative_step * scale, gc.seed)
}
