use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{BoxUnion, GridLookup};
use crate::error::Result;
use crate::scalar::{Real, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Region {
    /// ω_n: the nonlocal model is solved here.
    Interior,
    /// η_D: physical volume-constraint data.
    Dirichlet,
    /// η_c: virtual volume constraint driven by the optimizer.
    Control,
}

impl Region {
    pub fn code(self) -> i32 {
        match self {
            Region::Interior => 0,
            Region::Dirichlet => 1,
            Region::Control => 2,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PointCloud<T> {
    pub positions: Vec<Vec3<T>>,
    pub volumes: Vec<T>,
    pub tags: Vec<Region>,
    pub overlap: Vec<bool>,
    pub spacing: T,
    pub origin: Vec3<T>,
    pub(crate) grid: Vec<[i64; 3]>,
    pub(crate) lookup: GridLookup,
}

impl<T: Real> PointCloud<T> {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn total_volume(&self) -> T {
        self.volumes.iter().copied().sum()
    }

    /// Integer lattice index of point `i`.
    pub fn site(&self, i: usize) -> [i64; 3] {
        self.grid[i]
    }

    pub fn index_of_site(&self, s: [i64; 3]) -> Option<usize> {
        self.lookup.get(s)
    }

    pub fn site_center(&self, s: [i64; 3]) -> Vec3<T> {
        let h = self.spacing;
        let half = T::lit(0.5);
        [0, 1, 2].map(|a| self.origin[a] + (T::lit(s[a] as f64) + half) * h)
    }

    pub fn indices_with(&self, tag: Region) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.tags[i] == tag).collect()
    }
}

/// Cell-centred points of the uniform `h`-grid anchored at the first box's lower corner.
pub fn generate_point_cloud<T: Real>(domain: &BoxUnion<T>, h: T) -> Result<PointCloud<T>> {
    let ranges = domain.lattice_ranges(h)?;
    let mut sites = BTreeSet::new();
    for r in &ranges {
        for i in r[0].0..r[0].1 {
            for j in r[1].0..r[1].1 {
                for k in r[2].0..r[2].1 {
                    sites.insert([i, j, k]);
                }
            }
        }
    }
    let grid: Vec<[i64; 3]> = sites.into_iter().collect();
    let lookup = GridLookup::build(&grid);
    let origin = domain.boxes[0].lo;
    let vol = h * h * h;
    let n = grid.len();
    let mut cloud = PointCloud {
        positions: Vec::with_capacity(n),
        volumes: vec![vol; n],
        tags: vec![Region::Interior; n],
        overlap: vec![false; n],
        spacing: h,
        origin,
        grid,
        lookup,
    };
    cloud.positions = cloud.grid.iter().map(|&s| cloud.site_center(s)).collect();
    Ok(cloud)
}
