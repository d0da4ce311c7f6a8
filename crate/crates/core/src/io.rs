//! Result files: legacy ASCII VTK, CSV tables and JSON summaries.
//!
//! Floats use Rust's shortest round-trip formatting, so output is byte-for-byte
//! reproducible for identical inputs.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::experiments::Setup;
use crate::geometry::HexMesh;
use crate::lps::lps_apply_oracle;
use crate::optim::IterationRecord;
use crate::scalar::Vec3;
use crate::verification::ConvergenceReport;

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |source| Error::Io { path: path.display().to_string(), source }
}

fn with_file(path: &Path, body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
    let f = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(f);
    body(&mut w).and_then(|_| w.flush()).map_err(io_err(path))
}

fn header(w: &mut impl Write, title: &str, points: &[Vec3<f64>]) -> std::io::Result<()> {
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "{title}")?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(w, "POINTS {} double", points.len())?;
    for p in points {
        writeln!(w, "{} {} {}", p[0], p[1], p[2])?;
    }
    Ok(())
}

fn vectors(w: &mut impl Write, name: &str, u: &[f64]) -> std::io::Result<()> {
    writeln!(w, "VECTORS {name} double")?;
    for c in u.chunks_exact(3) {
        writeln!(w, "{} {} {}", c[0], c[1], c[2])?;
    }
    Ok(())
}

fn scalars(w: &mut impl Write, name: &str, v: impl Iterator<Item = i32>) -> std::io::Result<()> {
    writeln!(w, "SCALARS {name} int 1")?;
    writeln!(w, "LOOKUP_TABLE default")?;
    for x in v {
        writeln!(w, "{x}")?;
    }
    Ok(())
}

/// Point cloud as vertex cells with displacement, force density `L^h[u]`,
/// region code (0 ω_n, 1 η_D, 2 η_c) and overlap flag.
pub fn write_nonlocal_vtk(path: &Path, s: &Setup, u: &[f64]) -> Result<()> {
    let cloud = &s.cloud;
    let uv: Vec<Vec3<f64>> = u.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
    let force = lps_apply_oracle(cloud, &s.family, &s.params, &s.influence, &uv)?;
    let force: Vec<f64> = force.iter().flatten().copied().collect();
    with_file(path, |w| {
        header(w, "nonlocal solution", &cloud.positions)?;
        let n = cloud.len();
        writeln!(w, "CELLS {n} {}", 2 * n)?;
        for i in 0..n {
            writeln!(w, "1 {i}")?;
        }
        writeln!(w, "CELL_TYPES {n}")?;
        for _ in 0..n {
            writeln!(w, "1")?;
        }
        writeln!(w, "POINT_DATA {n}")?;
        vectors(w, "displacement", u)?;
        vectors(w, "force_density", &force)?;
        scalars(w, "region", cloud.tags.iter().map(|t| t.code()))?;
        scalars(w, "overlap", cloud.overlap.iter().map(|&o| o as i32))
    })
}

/// Hex mesh (VTK cell type 12) with nodal displacement.
pub fn write_local_vtk(path: &Path, mesh: &HexMesh<f64>, u: &[f64]) -> Result<()> {
    with_file(path, |w| {
        header(w, "local solution", &mesh.nodes)?;
        let m = mesh.num_cells();
        writeln!(w, "CELLS {m} {}", 9 * m)?;
        for c in &mesh.cells {
            writeln!(w, "8 {} {} {} {} {} {} {} {}", c[0], c[1], c[2], c[3], c[4], c[5], c[6], c[7])?;
        }
        writeln!(w, "CELL_TYPES {m}")?;
        for _ in 0..m {
            writeln!(w, "12")?;
        }
        writeln!(w, "POINT_DATA {}", mesh.num_nodes())?;
        vectors(w, "displacement", u)
    })
}

pub fn write_history_csv(path: &Path, history: &[IterationRecord]) -> Result<()> {
    with_file(path, |w| {
        writeln!(w, "iteration,objective,gradient_norm,step,evaluations")?;
        for r in history {
            writeln!(w, "{},{},{},{},{}", r.iteration, r.objective, r.gradient_norm, r.step, r.evaluations)?;
        }
        Ok(())
    })
}

/// `h,error_n,error_l,rate_n,rate_l`; rates are between consecutive levels and
/// empty on the first row.
pub fn write_convergence_csv(path: &Path, report: &ConvergenceReport) -> Result<()> {
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    with_file(path, |w| {
        writeln!(w, "h,error_n,error_l,rate_n,rate_l")?;
        for (l, (rn, rl)) in report.levels.iter().zip(&report.step_rates) {
            writeln!(w, "{},{},{},{},{}", l.h, l.error_n, l.error_l, opt(*rn), opt(*rl))?;
        }
        Ok(())
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Validation(e.to_string()))?;
    with_file(path, |w| writeln!(w, "{text}"))
}
