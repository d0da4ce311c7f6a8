//! Limited-memory BFGS with a strong-Wolfe line search.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{axpy, dot_slices, norm2, Real};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerConfig {
    /// Stop when `‖g‖ <= gradient_tolerance · ‖g₀‖`.
    pub gradient_tolerance: f64,
    /// Stop when `J <= objective_tolerance · J₀`.
    pub objective_tolerance: f64,
    pub max_iterations: usize,
    pub memory: usize,
    pub c1: f64,
    pub c2: f64,
    pub initial_step: f64,
    pub max_line_search: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            gradient_tolerance: 1e-10,
            objective_tolerance: 1e-24,
            max_iterations: 2000,
            memory: 20,
            c1: 1e-4,
            c2: 0.9,
            initial_step: 1.0,
            max_line_search: 40,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.gradient_tolerance > 0.0
            && self.objective_tolerance > 0.0
            && self.memory >= 1
            && self.max_iterations >= 1
            && 0.0 < self.c1
            && self.c1 < self.c2
            && self.c2 < 1.0
            && self.initial_step > 0.0
            && self.max_line_search >= 1;
        if ok {
            Ok(())
        } else {
            Err(Error::Parameter(format!("invalid optimizer config {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub objective: f64,
    pub gradient_norm: f64,
    pub step: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    GradientTolerance,
    ObjectiveTolerance,
    /// The line search could no longer separate objective values from roundoff.
    Roundoff,
    MaxIterations,
}

#[derive(Debug, Clone)]
pub struct Minimum<T> {
    pub x: Vec<T>,
    pub objective: T,
    pub gradient: Vec<T>,
    pub history: Vec<IterationRecord>,
    pub termination: Termination,
    pub converged: bool,
    pub evaluations: usize,
}

struct Point<T> {
    x: Vec<T>,
    f: T,
    g: Vec<T>,
}

/// Minimizes `f` starting from `x0`; `eval` returns the value and gradient.
pub fn lbfgs<T: Real>(
    x0: Vec<T>,
    cfg: &OptimizerConfig,
    mut eval: impl FnMut(&[T]) -> Result<(T, Vec<T>)>,
) -> Result<Minimum<T>> {
    cfg.validate()?;
    let counter = std::cell::Cell::new(0usize);
    let mut call = |x: &[T]| {
        counter.set(counter.get() + 1);
        eval(x)
    };
    let (f0, g0) = call(&x0)?;
    let g0_norm = norm2(&g0);
    let mut cur = Point { x: x0, f: f0, g: g0 };
    let mut history = vec![IterationRecord {
        iteration: 0,
        objective: f0.as_f64(),
        gradient_norm: g0_norm.as_f64(),
        step: 0.0,
        evaluations: 1,
    }];
    let gtol = T::lit(cfg.gradient_tolerance) * g0_norm;
    let ftol = T::lit(cfg.objective_tolerance) * f0;
    let mut mem: VecDeque<(Vec<T>, Vec<T>, T)> = VecDeque::with_capacity(cfg.memory);

    let done = |p: &Point<T>| -> Option<Termination> {
        if norm2(&p.g) <= gtol {
            Some(Termination::GradientTolerance)
        } else if p.f <= ftol {
            Some(Termination::ObjectiveTolerance)
        } else {
            None
        }
    };
    if let Some(t) = done(&cur) {
        return Ok(finish(cur, history, t, 1));
    }

    for iter in 1..=cfg.max_iterations {
        let mut d = two_loop(&cur.g, &mem);
        let mut slope = dot_slices(&d, &cur.g);
        if !(slope < T::zero()) {
            mem.clear();
            d = cur.g.iter().map(|&v| -v).collect();
            slope = dot_slices(&d, &cur.g);
        }
        let before = counter.get();
        let search = strong_wolfe(&cur, &d, slope, cfg, &mut call)?;
        let next = match search {
            Some(p) => p,
            None => {
                if roundoff_limited(&cur, slope, &d) {
                    let n = counter.get();
                    return Ok(finish(cur, history, Termination::Roundoff, n));
                }
                return Err(Error::LineSearch {
                    iterations: iter,
                    objective: cur.f.as_f64(),
                    history,
                });
            }
        };
        let s: Vec<T> = next.x.iter().zip(&cur.x).map(|(&a, &b)| a - b).collect();
        let y: Vec<T> = next.g.iter().zip(&cur.g).map(|(&a, &b)| a - b).collect();
        let sy = dot_slices(&s, &y);
        let step = norm2(&s) / norm2(&d);
        if sy > T::epsilon() * norm2(&s) * norm2(&y) {
            if mem.len() == cfg.memory {
                mem.pop_front();
            }
            mem.push_back((s, y, T::one() / sy));
        }
        cur = next;
        history.push(IterationRecord {
            iteration: iter,
            objective: cur.f.as_f64(),
            gradient_norm: norm2(&cur.g).as_f64(),
            step: step.as_f64(),
            evaluations: counter.get() - before,
        });
        log::debug!("lbfgs {iter}: J = {:e}, |g| = {:e}", cur.f.as_f64(), norm2(&cur.g).as_f64());
        if let Some(t) = done(&cur) {
            let n = counter.get();
            return Ok(finish(cur, history, t, n));
        }
    }
    let n = counter.get();
    Ok(finish(cur, history, Termination::MaxIterations, n))
}

fn finish<T: Real>(p: Point<T>, history: Vec<IterationRecord>, t: Termination, evaluations: usize) -> Minimum<T> {
    Minimum {
        x: p.x,
        objective: p.f,
        gradient: p.g,
        history,
        termination: t,
        converged: matches!(t, Termination::GradientTolerance | Termination::ObjectiveTolerance),
        evaluations,
    }
}

/// The predicted decrease along `d` is below the rounding level of `f`.
fn roundoff_limited<T: Real>(p: &Point<T>, slope: T, d: &[T]) -> bool {
    let _ = d;
    (-slope) <= T::lit(64.0) * T::epsilon() * p.f.abs().max(T::min_positive_value())
}

fn two_loop<T: Real>(g: &[T], mem: &VecDeque<(Vec<T>, Vec<T>, T)>) -> Vec<T> {
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(mem.len());
    for (s, y, rho) in mem.iter().rev() {
        let a = *rho * dot_slices(s, &q);
        axpy(-a, y, &mut q);
        alphas.push(a);
    }
    if let Some((s, y, _)) = mem.back() {
        let gamma = dot_slices(s, y) / dot_slices(y, y);
        q.iter_mut().for_each(|v| *v *= gamma);
    }
    for ((s, y, rho), a) in mem.iter().zip(alphas.into_iter().rev()) {
        let b = *rho * dot_slices(y, &q);
        axpy(a - b, s, &mut q);
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}

struct Trial<T> {
    a: T,
    f: T,
    dphi: T,
    g: Vec<T>,
    x: Vec<T>,
}

fn strong_wolfe<T: Real>(
    cur: &Point<T>,
    d: &[T],
    slope0: T,
    cfg: &OptimizerConfig,
    call: &mut impl FnMut(&[T]) -> Result<(T, Vec<T>)>,
) -> Result<Option<Point<T>>> {
    let c1 = T::lit(cfg.c1);
    let c2 = T::lit(cfg.c2);
    let f0 = cur.f;
    let mut probe = |a: T| -> Result<Trial<T>> {
        let x: Vec<T> = cur.x.iter().zip(d).map(|(&xi, &di)| xi + a * di).collect();
        let (f, g) = call(&x)?;
        let dphi = dot_slices(&g, d);
        Ok(Trial { a, f, dphi, g, x })
    };
    let armijo = |t: &Trial<T>| t.f <= f0 + c1 * t.a * slope0;
    let curvature = |t: &Trial<T>| t.dphi.abs() <= -c2 * slope0;
    let accept = |t: Trial<T>| Some(Point { x: t.x, f: t.f, g: t.g });

    let mut prev = Trial { a: T::zero(), f: f0, dphi: slope0, g: cur.g.clone(), x: cur.x.clone() };
    let mut a = T::lit(cfg.initial_step);
    let mut evals = 0;
    let (mut lo, mut hi);
    loop {
        let t = probe(a)?;
        evals += 1;
        if !t.f.is_finite() || !armijo(&t) || (evals > 1 && t.f >= prev.f) {
            lo = prev;
            hi = t;
            break;
        }
        if curvature(&t) {
            return Ok(accept(t));
        }
        if t.dphi >= T::zero() {
            lo = t;
            hi = prev;
            break;
        }
        if evals >= cfg.max_line_search {
            return Ok(None);
        }
        let next = cubic_min(&prev, &t)
            .filter(|&c| c > t.a)
            .unwrap_or(T::lit(4.0) * t.a)
            .max(T::lit(1.1) * t.a)
            .min(T::lit(8.0) * t.a);
        prev = t;
        a = next;
    }
    while evals < cfg.max_line_search {
        let (l, h) = if lo.a < hi.a { (lo.a, hi.a) } else { (hi.a, lo.a) };
        let width = h - l;
        if width <= T::epsilon() * h.abs() {
            return Ok(None);
        }
        let guess = if hi.f.is_finite() { cubic_min(&lo, &hi) } else { None };
        let a = guess
            .filter(|&c| c > l + T::lit(0.1) * width && c < h - T::lit(0.1) * width)
            .unwrap_or(l + T::lit(0.5) * width);
        let t = probe(a)?;
        evals += 1;
        if !t.f.is_finite() || !armijo(&t) || t.f >= lo.f {
            hi = t;
        } else {
            if curvature(&t) {
                return Ok(accept(t));
            }
            if t.dphi * (hi.a - lo.a) >= T::zero() {
                hi = lo;
            }
            lo = t;
        }
    }
    // fall back on the best sufficient-decrease point seen
    if lo.a > T::zero() && armijo(&lo) && lo.f < f0 {
        return Ok(accept(lo));
    }
    Ok(None)
}

/// Minimizer of the cubic through two points with slopes.
fn cubic_min<T: Real>(p: &Trial<T>, q: &Trial<T>) -> Option<T> {
    let d1 = p.dphi + q.dphi - T::lit(3.0) * (p.f - q.f) / (p.a - q.a);
    let disc = d1 * d1 - p.dphi * q.dphi;
    if !(disc >= T::zero()) {
        return None;
    }
    let d2 = (q.a - p.a).signum() * disc.sqrt();
    let den = q.dphi - p.dphi + T::lit(2.0) * d2;
    if den == T::zero() {
        return None;
    }
    let a = q.a - (q.a - p.a) * (q.dphi + d2 - d1) / den;
    a.is_finite().then_some(a)
}
