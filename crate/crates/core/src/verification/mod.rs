//! Manufactured solutions, error norms, rate fitting and gradient checks.

mod mms;

pub use mms::{mms_case, navier_cauchy_body_force, Hessian, MmsCase, MmsName};

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::coupling::{ControlVector, CouplingProblem};
use crate::error::{Error, Result};
use crate::scalar::{norm2, Real, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorNorm {
    /// Plain ℓ² norm of the dof-vector difference.
    pub l2: f64,
    /// ℓ² norm of the exact dof vector, for relative errors.
    pub exact_l2: f64,
    /// `sqrt(Σ V_i |e_i|² / Σ V_i)`
    pub weighted_rms: f64,
}

impl ErrorNorm {
    pub fn relative(&self) -> f64 {
        if self.exact_l2 == 0.0 {
            self.l2
        } else {
            self.l2 / self.exact_l2
        }
    }
}

/// Norm of `u - exact(x_i)` over per-point triples `u` at coordinates `x`.
pub fn error_norm<T: Real>(u: &[T], x: &[Vec3<T>], weights: Option<&[T]>, exact: &dyn Fn(Vec3<T>) -> Vec3<T>) -> Result<ErrorNorm> {
    if u.len() != 3 * x.len() {
        return Err(Error::Shape { expected: 3 * x.len(), got: u.len() });
    }
    if let Some(w) = weights {
        if w.len() != x.len() {
            return Err(Error::Shape { expected: x.len(), got: w.len() });
        }
    }
    let (mut e2, mut x2, mut we2, mut wsum) = (0.0, 0.0, 0.0, 0.0);
    for (i, &xi) in x.iter().enumerate() {
        let ex = exact(xi);
        let w = weights.map_or(1.0, |w| w[i].as_f64());
        let mut local = 0.0;
        for c in 0..3 {
            let d = (u[3 * i + c] - ex[c]).as_f64();
            local += d * d;
            x2 += ex[c].as_f64().powi(2);
        }
        e2 += local;
        we2 += w * local;
        wsum += w;
    }
    Ok(ErrorNorm {
        l2: e2.sqrt(),
        exact_l2: x2.sqrt(),
        weighted_rms: if wsum > 0.0 { (we2 / wsum).sqrt() } else { 0.0 },
    })
}

/// `(error_n, error_l)` for a nonlocal point field and a local nodal field.
pub fn error_norms<T: Real>(
    un: &[T],
    points: &[Vec3<T>],
    volumes: &[T],
    ul: &[T],
    nodes: &[Vec3<T>],
    exact: &dyn Fn(Vec3<T>) -> Vec3<T>,
) -> Result<(ErrorNorm, ErrorNorm)> {
    Ok((error_norm(un, points, Some(volumes), exact)?, error_norm(ul, nodes, None, exact)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DeltaPolicy {
    #[default]
    FixedDelta,
    /// δ = ratio · h at every level.
    FixedRatio,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelResult {
    pub h: f64,
    pub delta: f64,
    pub error_n: f64,
    pub error_l: f64,
    pub objective: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub levels: Vec<LevelResult>,
    pub rate_n: Option<f64>,
    pub rate_l: Option<f64>,
    /// Rates between consecutive levels; `None` on the first level.
    pub step_rates: Vec<(Option<f64>, Option<f64>)>,
}

/// Least-squares slope of `log e` against `log h`.
pub fn fit_rate(h: &[f64], e: &[f64]) -> Option<f64> {
    if h.len() < 2 || h.len() != e.len() || e.iter().any(|&v| !(v > 0.0)) {
        return None;
    }
    let lx: Vec<f64> = h.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = e.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

impl ConvergenceReport {
    pub fn from_levels(levels: Vec<LevelResult>, fit: bool) -> Self {
        let h: Vec<f64> = levels.iter().map(|l| l.h).collect();
        let en: Vec<f64> = levels.iter().map(|l| l.error_n).collect();
        let el: Vec<f64> = levels.iter().map(|l| l.error_l).collect();
        let mut step_rates = vec![(None, None)];
        for k in 1..levels.len() {
            step_rates.push((fit_rate(&h[k - 1..=k], &en[k - 1..=k]), fit_rate(&h[k - 1..=k], &el[k - 1..=k])));
        }
        let fit = fit && levels.len() >= 3;
        Self {
            rate_n: if fit { fit_rate(&h, &en) } else { None },
            rate_l: if fit { fit_rate(&h, &el) } else { None },
            step_rates,
            levels,
        }
    }
}

/// Runs `run(h, δ)` on each level; any failure aborts with the partial report in the message.
pub fn convergence_study(
    h_levels: &[f64],
    policy: DeltaPolicy,
    delta_or_ratio: f64,
    fit: bool,
    mut run: impl FnMut(f64, f64) -> Result<LevelResult>,
) -> Result<ConvergenceReport> {
    if h_levels.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::Parameter("refinement levels must have strictly decreasing h".into()));
    }
    if fit && h_levels.len() < 3 {
        return Err(Error::Parameter("a fitted rate needs at least three levels".into()));
    }
    let mut done = Vec::new();
    for (k, &h) in h_levels.iter().enumerate() {
        let delta = match policy {
            DeltaPolicy::FixedDelta => delta_or_ratio,
            DeltaPolicy::FixedRatio => delta_or_ratio * h,
        };
        match run(h, delta) {
            Ok(r) => done.push(r),
            Err(e) => {
                return Err(Error::Study {
                    level: k,
                    message: format!("{e}; completed levels: {:?}", done),
                })
            }
        }
    }
    Ok(ConvergenceReport::from_levels(done, fit))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientCheck {
    pub max_relative_error: f64,
    pub max_abs_gradient: f64,
    /// (flat component, analytic, finite difference)
    pub entries: Vec<(usize, f64, f64)>,
}

/// Central differences of the reduced objective on `n_components` random components.
pub fn gradient_check<T: Real>(
    problem: &CouplingProblem<T>,
    at: &ControlVector<T>,
    n_components: usize,
    step: T,
    seed: u64,
) -> Result<GradientCheck> {
    let (_, g) = problem.evaluate(at)?;
    let g = g.to_flat();
    let x = at.to_flat();
    let nn = at.nonlocal.len();
    let n = x.len().min(n_components);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picks = sample(&mut rng, x.len(), n).into_vec();
    let gmax = g.iter().fold(0.0f64, |m, v| m.max(v.as_f64().abs()));
    let mut out = GradientCheck { max_relative_error: 0.0, max_abs_gradient: gmax, entries: Vec::new() };
    for k in picks {
        let mut xp = x.clone();
        xp[k] += step;
        let mut xm = x.clone();
        xm[k] -= step;
        let jp = problem.evaluate_objective(&ControlVector::from_flat(&xp, nn))?;
        let jm = problem.evaluate_objective(&ControlVector::from_flat(&xm, nn))?;
        let fd = ((jp - jm) / (step + step)).as_f64();
        let an = g[k].as_f64();
        let denom = an.abs().max(fd.abs()).max(1e-8 * gmax);
        let rel = if denom > 0.0 { (fd - an).abs() / denom } else { (fd - an).abs() };
        out.max_relative_error = out.max_relative_error.max(rel);
        out.entries.push((k, an, fd));
    }
    Ok(out)
}

/// Norm of the flat reduced gradient.
pub fn gradient_norm<T: Real>(g: &ControlVector<T>) -> T {
    norm2(&g.to_flat())
}
