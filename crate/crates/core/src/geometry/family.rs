use serde::{Deserialize, Serialize};

use super::PointCloud;
use crate::error::{Error, Result};
use crate::scalar::{Real, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PartialVolumeRule {
    /// `V_j * clamp((δ + h/2 - r)/h, 0, 1)` over the radius `δ + h/2`.
    #[default]
    Linear,
    /// Full volume for `r <= δ`, nothing beyond.
    Full,
}

/// Neighbor lists and quadrature weights, stored row-compressed.
#[derive(Debug, Clone)]
pub struct Family<T> {
    pub horizon: T,
    pub spacing: T,
    pub rule: PartialVolumeRule,
    ptr: Vec<usize>,
    neighbors: Vec<u32>,
    weights: Vec<T>,
}

impl<T: Real> Family<T> {
    pub fn num_points(&self) -> usize {
        self.ptr.len() - 1
    }

    pub fn num_bonds(&self) -> usize {
        self.neighbors.len()
    }

    #[inline]
    pub fn neighbors(&self, i: usize) -> &[u32] {
        &self.neighbors[self.ptr[i]..self.ptr[i + 1]]
    }

    /// `V_j^(i)` aligned with [`Family::neighbors`].
    #[inline]
    pub fn weights(&self, i: usize) -> &[T] {
        &self.weights[self.ptr[i]..self.ptr[i + 1]]
    }

    pub fn len_of(&self, i: usize) -> usize {
        self.ptr[i + 1] - self.ptr[i]
    }

    pub fn weight_of(&self, i: usize, j: usize) -> Option<T> {
        self.neighbors(i)
            .iter()
            .position(|&n| n as usize == j)
            .map(|k| self.weights(i)[k])
    }

    /// Radius beyond which no stored neighbor lies.
    pub fn radius(&self) -> T {
        match self.rule {
            PartialVolumeRule::Linear => self.horizon + T::lit(0.5) * self.spacing,
            PartialVolumeRule::Full => self.horizon,
        }
    }

    fn filtered(&self, mut keep: impl FnMut(usize, usize) -> bool) -> Self {
        let mut ptr = Vec::with_capacity(self.ptr.len());
        let mut neighbors = Vec::with_capacity(self.neighbors.len());
        let mut weights = Vec::with_capacity(self.weights.len());
        ptr.push(0);
        for i in 0..self.num_points() {
            for (&j, &w) in self.neighbors(i).iter().zip(self.weights(i)) {
                if keep(i, j as usize) {
                    neighbors.push(j);
                    weights.push(w);
                }
            }
            ptr.push(neighbors.len());
        }
        Self {
            horizon: self.horizon,
            spacing: self.spacing,
            rule: self.rule,
            ptr,
            neighbors,
            weights,
        }
    }
}

/// Lattice offsets inside the family radius with their volume fractions.
pub(crate) fn stencil<T: Real>(h: T, delta: T, rule: PartialVolumeRule) -> Vec<([i64; 3], T)> {
    let half = T::lit(0.5);
    let reach = match rule {
        PartialVolumeRule::Linear => delta + half * h,
        PartialVolumeRule::Full => delta,
    };
    let n = (reach / h).ceil().to_i64().unwrap_or(0);
    let mut out = Vec::new();
    for i in -n..=n {
        for j in -n..=n {
            for k in -n..=n {
                if i == 0 && j == 0 && k == 0 {
                    continue;
                }
                let r = h * T::lit(((i * i + j * j + k * k) as f64).sqrt());
                let frac = match rule {
                    PartialVolumeRule::Linear => ((reach - r) / h).max(T::zero()).min(T::one()),
                    PartialVolumeRule::Full => {
                        if r <= delta * (T::one() + T::lit(1e-12)) {
                            T::one()
                        } else {
                            T::zero()
                        }
                    }
                };
                if frac > T::lit(1e-12) {
                    out.push(([i, j, k], frac));
                }
            }
        }
    }
    out
}

pub fn build_families<T: Real>(cloud: &PointCloud<T>, delta: T, rule: PartialVolumeRule) -> Result<Family<T>> {
    if !(delta > T::zero()) {
        return Err(Error::Parameter(format!("horizon must be positive, got {delta}")));
    }
    let st = stencil(cloud.spacing, delta, rule);
    let mut ptr = Vec::with_capacity(cloud.len() + 1);
    let mut neighbors = Vec::new();
    let mut weights = Vec::new();
    ptr.push(0);
    for i in 0..cloud.len() {
        let s = cloud.site(i);
        for (o, frac) in &st {
            if let Some(j) = cloud.index_of_site([s[0] + o[0], s[1] + o[1], s[2] + o[2]]) {
                neighbors.push(j as u32);
                weights.push(cloud.volumes[j] * *frac);
            }
        }
        ptr.push(neighbors.len());
    }
    Ok(Family {
        horizon: delta,
        spacing: cloud.spacing,
        rule,
        ptr,
        neighbors,
        weights,
    })
}

/// Planar rectangle `{x[axis] = value} × bounds[0] × bounds[1]`, the bounds
/// applying to the two remaining axes in increasing order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real + Serialize + serde::de::DeserializeOwned")]
pub struct PrenotchPlane<T> {
    pub axis: usize,
    pub value: T,
    pub bounds: [[T; 2]; 2],
}

impl<T: Real> PrenotchPlane<T> {
    pub fn new(axis: usize, value: T, bounds: [[T; 2]; 2]) -> Result<Self> {
        if axis > 2 {
            return Err(Error::Parameter(format!("prenotch axis {axis} out of range")));
        }
        if !(bounds[0][0] < bounds[0][1] && bounds[1][0] < bounds[1][1]) {
            return Err(Error::Parameter("prenotch rectangle is degenerate".into()));
        }
        Ok(Self { axis, value, bounds })
    }

    fn others(&self) -> [usize; 2] {
        match self.axis {
            0 => [1, 2],
            1 => [0, 2],
            _ => [0, 1],
        }
    }

    /// Closed segment-rectangle intersection; segments lying in the plane do not cut it.
    pub fn cuts(&self, a: Vec3<T>, b: Vec3<T>) -> bool {
        // fixed endpoint order keeps the test bitwise symmetric
        let (a, b) = if lex_less(b, a) { (b, a) } else { (a, b) };
        let sa = a[self.axis] - self.value;
        let sb = b[self.axis] - self.value;
        if sa * sb > T::zero() || (sa == T::zero() && sb == T::zero()) {
            return false;
        }
        let t = sa / (sa - sb);
        self.others().iter().zip(&self.bounds).all(|(&ax, bd)| {
            let p = a[ax] + t * (b[ax] - a[ax]);
            p >= bd[0] && p <= bd[1]
        })
    }
}

fn lex_less<T: Real>(a: Vec3<T>, b: Vec3<T>) -> bool {
    for k in 0..3 {
        if a[k] != b[k] {
            return a[k] < b[k];
        }
    }
    false
}

/// Drops every bond whose segment cuts the prenotch; removal is symmetric.
pub fn apply_prenotch_filter<T: Real>(family: &Family<T>, cloud: &PointCloud<T>, p: &PrenotchPlane<T>) -> Family<T> {
    family.filtered(|i, j| !p.cuts(cloud.positions[i], cloud.positions[j]))
}
