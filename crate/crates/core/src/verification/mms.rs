use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::VectorField;
use crate::lps::MaterialParams;
use crate::scalar::{Real, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MmsName {
    #[serde(rename = "linear-I")]
    LinearI,
    #[serde(rename = "quadratic-II")]
    QuadraticII,
}

impl std::str::FromStr for MmsName {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear-I" => Ok(Self::LinearI),
            "quadratic-II" => Ok(Self::QuadraticII),
            other => Err(Error::Parameter(format!("unknown manufactured solution `{other}`"))),
        }
    }
}

/// Second derivatives `H[c][i][j] = ∂²u_c / ∂x_i ∂x_j`.
pub type Hessian<T> = [[[T; 3]; 3]; 3];

#[derive(Clone)]
pub struct MmsCase<T> {
    pub name: MmsName,
    pub params: MaterialParams<T>,
    pub u: VectorField<T>,
    pub b: VectorField<T>,
    hessian: Arc<dyn Fn(Vec3<T>) -> Hessian<T> + Send + Sync>,
}

impl<T> std::fmt::Debug for MmsCase<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "MmsCase({:?})", self.name)
    }
}

/// `-L_NC[u] = -((λ + μ) ∇(∇·u) + μ Δu)` from the second derivatives of `u`.
pub fn navier_cauchy_body_force<T: Real>(params: &MaterialParams<T>, h: &Hessian<T>) -> Vec3<T> {
    let (lambda, mu) = (params.lambda(), params.mu());
    [0, 1, 2].map(|i| {
        let grad_div: T = (0..3).map(|c| h[c][i][c]).sum();
        let lap: T = (0..3).map(|k| h[i][k][k]).sum();
        -((lambda + mu) * grad_div + mu * lap)
    })
}

impl<T: Real> MmsCase<T> {
    /// The trace `g`, identical to `u`.
    pub fn g(&self) -> VectorField<T> {
        self.u.clone()
    }

    /// Largest relative gap between `b` and a central-difference `-L_NC[u]` over `points`.
    pub fn finite_difference_gap(&self, points: &[Vec3<T>], step: T) -> T {
        let mut worst = T::zero();
        for &x in points {
            let h = fd_hessian(self.u.as_ref(), x, step);
            let fd = navier_cauchy_body_force(&self.params, &h);
            let b = (self.b)(x);
            let scale = (self.params.bulk + self.params.shear).max(T::one());
            for c in 0..3 {
                worst = worst.max((fd[c] - b[c]).abs() / scale.max(b[c].abs()));
            }
        }
        worst
    }
}

fn fd_hessian<T: Real>(u: &dyn Fn(Vec3<T>) -> Vec3<T>, x: Vec3<T>, s: T) -> Hessian<T> {
    let shift = |i: usize, di: T, j: usize, dj: T| {
        let mut y = x;
        y[i] += di;
        y[j] += dj;
        u(y)
    };
    let mut h = [[[T::zero(); 3]; 3]; 3];
    let four = T::lit(4.0);
    for i in 0..3 {
        for j in 0..3 {
            let v = if i == j {
                let p = shift(i, s, i, T::zero());
                let m = shift(i, -s, i, T::zero());
                let o = u(x);
                [0, 1, 2].map(|c| (p[c] - o[c] - o[c] + m[c]) / (s * s))
            } else {
                let pp = shift(i, s, j, s);
                let pm = shift(i, s, j, -s);
                let mp = shift(i, -s, j, s);
                let mm = shift(i, -s, j, -s);
                [0, 1, 2].map(|c| (pp[c] - pm[c] - mp[c] + mm[c]) / (four * s * s))
            };
            for c in 0..3 {
                h[c][i][j] = v[c];
            }
        }
    }
    h
}

/// Builds a manufactured case and runs its finite-difference self-check.
pub fn mms_case<T: Real>(name: MmsName, params: MaterialParams<T>) -> Result<MmsCase<T>> {
    let (u, hessian): (VectorField<T>, Arc<dyn Fn(Vec3<T>) -> Hessian<T> + Send + Sync>) = match name {
        MmsName::LinearI => (Arc::new(|x: Vec3<T>| [x[0], T::zero(), T::zero()]), Arc::new(|_| [[[T::zero(); 3]; 3]; 3])),
        MmsName::QuadraticII => (
            Arc::new(|x: Vec3<T>| [x[0] * x[0], T::zero(), T::zero()]),
            Arc::new(|_| {
                let mut h = [[[T::zero(); 3]; 3]; 3];
                h[0][0][0] = T::lit(2.0);
                h
            }),
        ),
    };
    let hs = hessian.clone();
    let b: VectorField<T> = Arc::new(move |x| navier_cauchy_body_force(&params, &hs(x)));
    let case = MmsCase { name, params, u, b, hessian };
    let probes = [
        [T::lit(0.1), T::lit(0.2), T::lit(0.3)],
        [T::lit(0.7), T::lit(0.4), T::lit(0.9)],
        [T::lit(-0.5), T::lit(0.5), T::lit(0.25)],
    ];
    let gap = case.finite_difference_gap(&probes, T::lit(1e-3));
    if !(gap <= T::lit(1e-6)) {
        return Err(Error::Validation(format!(
            "manufactured body force disagrees with the finite-difference operator (gap {gap})"
        )));
    }
    Ok(case)
}

impl<T: Real> MmsCase<T> {
    pub fn hessian_at(&self, x: Vec3<T>) -> Hessian<T> {
        (self.hessian)(x)
    }
}
