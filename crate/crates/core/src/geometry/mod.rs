//! Point clouds and hex meshes on unions of axis-aligned boxes.

mod cloud;
mod family;
mod mesh;
mod regions;

pub use cloud::{generate_point_cloud, PointCloud, Region};
pub use family::{apply_prenotch_filter, build_families, Family, PartialVolumeRule, PrenotchPlane};
pub use mesh::{generate_hex_mesh, locate_in_mesh, Face, HexMesh, FACE_NODES};
pub use regions::{classify_regions, Decomposition, NamedBoxes, GAMMA_C, GAMMA_D};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{Real, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "T: Real + Serialize + serde::de::DeserializeOwned")]
pub struct Aabb<T> {
    pub lo: Vec3<T>,
    pub hi: Vec3<T>,
}

impl<T: Real> Aabb<T> {
    pub fn new(lo: Vec3<T>, hi: Vec3<T>) -> Self {
        Self { lo, hi }
    }

    /// Box with `lo <= hi`; degenerate extents are allowed (planes, lines).
    pub fn is_ordered(&self) -> bool {
        (0..3).all(|a| self.lo[a] <= self.hi[a])
    }

    pub fn contains(&self, x: Vec3<T>, tol: T) -> bool {
        (0..3).all(|a| x[a] >= self.lo[a] - tol && x[a] <= self.hi[a] + tol)
    }

    pub fn extent(&self, axis: usize) -> T {
        self.hi[axis] - self.lo[axis]
    }

    pub fn min_extent(&self) -> T {
        self.extent(0).min(self.extent(1)).min(self.extent(2))
    }

    pub fn volume(&self) -> T {
        self.extent(0) * self.extent(1) * self.extent(2)
    }
}

pub fn contains_any<T: Real>(boxes: &[Aabb<T>], x: Vec3<T>, tol: T) -> bool {
    boxes.iter().any(|b| b.contains(x, tol))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "T: Real + Serialize + serde::de::DeserializeOwned")]
pub struct BoxUnion<T> {
    pub boxes: Vec<Aabb<T>>,
}

impl<T: Real> BoxUnion<T> {
    pub fn new(boxes: Vec<Aabb<T>>) -> Result<Self> {
        if boxes.is_empty() {
            return Err(Error::Parameter("box union is empty".into()));
        }
        for (i, b) in boxes.iter().enumerate() {
            if !(0..3).all(|a| b.lo[a] < b.hi[a]) {
                return Err(Error::Parameter(format!("box {i} has lo >= hi")));
            }
        }
        Ok(Self { boxes })
    }

    pub fn single(lo: Vec3<T>, hi: Vec3<T>) -> Result<Self> {
        Self::new(vec![Aabb::new(lo, hi)])
    }

    pub fn contains(&self, x: Vec3<T>, tol: T) -> bool {
        contains_any(&self.boxes, x, tol)
    }

    /// Lattice index ranges of every box relative to the first box's lower corner.
    pub(crate) fn lattice_ranges(&self, h: T) -> Result<Vec<[(i64, i64); 3]>> {
        if !(h > T::zero()) {
            return Err(Error::Parameter("grid spacing must be positive".into()));
        }
        let origin = self.boxes[0].lo;
        let tol = T::lit(1e-9).max(T::epsilon() * T::lit(64.0));
        let snap = |v: T, box_index: usize, axis: usize| -> Result<i64> {
            let r = v.round();
            if (v - r).abs() > tol * r.abs().max(T::one()) {
                return Err(Error::Alignment { box_index, axis });
            }
            r.to_i64().ok_or(Error::Alignment { box_index, axis })
        };
        self.boxes
            .iter()
            .enumerate()
            .map(|(bi, b)| {
                let mut out = [(0, 0); 3];
                for a in 0..3 {
                    let start = snap((b.lo[a] - origin[a]) / h, bi, a)?;
                    let n = snap(b.extent(a) / h, bi, a)?;
                    if n < 1 {
                        return Err(Error::Alignment { box_index: bi, axis: a });
                    }
                    out[a] = (start, start + n);
                }
                Ok(out)
            })
            .collect()
    }
}

/// Dense index over the bounding lattice box of a set of integer sites.
#[derive(Debug, Clone, Default)]
pub(crate) struct GridLookup {
    min: [i64; 3],
    dims: [usize; 3],
    slots: Vec<u32>,
}

impl GridLookup {
    const EMPTY: u32 = u32::MAX;

    pub fn build(sites: &[[i64; 3]]) -> Self {
        if sites.is_empty() {
            return Self::default();
        }
        let mut min = sites[0];
        let mut max = sites[0];
        for s in sites {
            for a in 0..3 {
                min[a] = min[a].min(s[a]);
                max[a] = max[a].max(s[a]);
            }
        }
        let dims = [0, 1, 2].map(|a| (max[a] - min[a] + 1) as usize);
        let mut slots = vec![Self::EMPTY; dims[0] * dims[1] * dims[2]];
        let mut out = Self { min, dims, slots: Vec::new() };
        for (i, s) in sites.iter().enumerate() {
            let k = out.slot(*s).expect("site inside bounds");
            slots[k] = i as u32;
        }
        out.slots = slots;
        out
    }

    #[inline]
    fn slot(&self, s: [i64; 3]) -> Option<usize> {
        let mut k = 0usize;
        for a in 0..3 {
            let d = s[a] - self.min[a];
            if d < 0 || d as usize >= self.dims[a] {
                return None;
            }
            k = k * self.dims[a] + d as usize;
        }
        Some(k)
    }

    #[inline]
    pub fn get(&self, s: [i64; 3]) -> Option<usize> {
        let k = self.slot(s)?;
        let v = self.slots[k];
        (v != Self::EMPTY).then_some(v as usize)
    }
}
