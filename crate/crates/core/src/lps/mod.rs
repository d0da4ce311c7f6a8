//! Linearized LPS operator: weighted volume, dilatation, assembly and a literal oracle.

mod material;

pub use material::{InfluenceFunction, InfluenceKind, MaterialParams};

use crate::error::{Error, Result};
use crate::geometry::{BoxUnion, Family, PointCloud, Region};
use crate::scalar::{dot, norm, sub, Real, Vec3};
use crate::sparse::{zero_block, Block, BlockCsr};

/// `m_i = Σ κ |ξ|² V_j^(i)`.
pub fn weighted_volume<T: Real>(cloud: &PointCloud<T>, family: &Family<T>, kappa: &InfluenceFunction<T>) -> Result<Vec<T>> {
    check_len(family.num_points(), cloud.len())?;
    (0..cloud.len())
        .map(|i| {
            if family.len_of(i) == 0 {
                return Err(Error::DegeneratePoint { point: i });
            }
            let xi = cloud.positions[i];
            Ok(bonds(cloud, family, i)
                .map(|(j, w)| {
                    let d = sub(cloud.positions[j], xi);
                    let r2 = dot(d, d);
                    kappa.bond(r2.sqrt()) * r2 * w
                })
                .sum())
        })
        .collect()
}

/// `θ_i = (3/m_i) Σ κ ξ·(u_j - u_i) V_j^(i)`.
pub fn dilatation<T: Real>(
    cloud: &PointCloud<T>,
    family: &Family<T>,
    kappa: &InfluenceFunction<T>,
    m: &[T],
    u: &[Vec3<T>],
) -> Result<Vec<T>> {
    check_len(m.len(), cloud.len())?;
    check_len(u.len(), cloud.len())?;
    check_len(family.num_points(), cloud.len())?;
    let three = T::lit(3.0);
    Ok((0..cloud.len())
        .map(|i| {
            let xi = cloud.positions[i];
            let s: T = bonds(cloud, family, i)
                .map(|(j, w)| {
                    let d = sub(cloud.positions[j], xi);
                    kappa.bond(norm(d)) * dot(d, sub(u[j], u[i])) * w
                })
                .sum();
            three * s / m[i]
        })
        .collect())
}

/// Force density `L^h[u](x_i)` evaluated term by term from the force state.
pub fn lps_apply_oracle<T: Real>(
    cloud: &PointCloud<T>,
    family: &Family<T>,
    params: &MaterialParams<T>,
    kappa: &InfluenceFunction<T>,
    u: &[Vec3<T>],
) -> Result<Vec<Vec3<T>>> {
    let m = weighted_volume(cloud, family, kappa)?;
    let theta = dilatation(cloud, family, kappa, &m, u)?;
    let c_dil = T::lit(3.0) * params.bulk - T::lit(5.0) * params.shear;
    let c_dev = T::lit(15.0) * params.shear;
    // T_p<ξ> with ξ = x_q - x_p
    let state = |p: usize, q: usize| -> Vec3<T> {
        let xi = sub(cloud.positions[q], cloud.positions[p]);
        let r2 = dot(xi, xi);
        let k = kappa.bond(r2.sqrt()) / m[p];
        let proj = dot(xi, sub(u[q], u[p])) / r2;
        [0, 1, 2].map(|a| k * (c_dil * theta[p] * xi[a] + c_dev * proj * xi[a]))
    };
    Ok((0..cloud.len())
        .map(|i| {
            let mut f = [T::zero(); 3];
            for (j, w) in bonds(cloud, family, i) {
                let tij = state(i, j);
                let tji = state(j, i);
                for a in 0..3 {
                    f[a] += (tij[a] - tji[a]) * w;
                }
            }
            f
        })
        .collect())
}

/// Assembled `A` with `(A u)_i = -L^h[u](x_i)` for every point.
pub fn assemble_lps_operator<T: Real>(
    cloud: &PointCloud<T>,
    family: &Family<T>,
    params: &MaterialParams<T>,
    kappa: &InfluenceFunction<T>,
) -> Result<BlockCsr<T>> {
    let rows: Vec<usize> = (0..cloud.len()).collect();
    assemble_lps_rows(cloud, family, params, kappa, &rows)
}

/// Like [`assemble_lps_operator`] but fills only the listed block rows; the rest stay empty.
///
/// The dilatation term is the product `E D` of the θ map `D` (N × 3N) with the
/// map `E` (3N × N) that spreads each θ over the bonds of a row.
pub fn assemble_lps_rows<T: Real>(
    cloud: &PointCloud<T>,
    family: &Family<T>,
    params: &MaterialParams<T>,
    kappa: &InfluenceFunction<T>,
    rows: &[usize],
) -> Result<BlockCsr<T>> {
    let n = cloud.len();
    let m = weighted_volume(cloud, family, kappa)?;
    let c_dil = T::lit(3.0) * params.bulk - T::lit(5.0) * params.shear;
    let c_dev = T::lit(15.0) * params.shear;
    let three = T::lit(3.0);

    let mut wanted = vec![false; n];
    for &r in rows {
        wanted[r] = true;
    }
    let mut acc: Vec<Block<T>> = vec![zero_block(); n];
    let mut seen = vec![false; n];
    let mut touched: Vec<u32> = Vec::new();
    let mut out: Vec<Vec<(u32, Block<T>)>> = vec![Vec::new(); n];

    let add = |acc: &mut Vec<Block<T>>, touched: &mut Vec<u32>, seen: &mut Vec<bool>, k: usize, b: &Block<T>| {
        if !seen[k] {
            seen[k] = true;
            touched.push(k as u32);
        }
        let t = &mut acc[k];
        for r in 0..3 {
            for c in 0..3 {
                t[r][c] += b[r][c];
            }
        }
    };

    for i in 0..n {
        if !wanted[i] {
            continue;
        }
        let xi = cloud.positions[i];
        add(&mut acc, &mut touched, &mut seen, i, &zero_block());

        // deviatoric pairwise part
        for (j, w) in bonds(cloud, family, i) {
            let d = sub(cloud.positions[j], xi);
            let r2 = dot(d, d);
            let coef = c_dev * kappa.bond(r2.sqrt()) * w * (T::one() / m[i] + T::one() / m[j]) / r2;
            let b = outer(scale3(d, coef), d);
            add(&mut acc, &mut touched, &mut seen, i, &b);
            add(&mut acc, &mut touched, &mut seen, j, &neg(&b));
        }

        // dilatation part: Σ_l E_il D_l, l ∈ {i} ∪ F_i
        let mut e_ii = [T::zero(); 3];
        for (j, w) in bonds(cloud, family, i) {
            let d = sub(cloud.positions[j], xi);
            let k = kappa.bond(norm(d)) * w;
            for a in 0..3 {
                e_ii[a] += k * d[a];
            }
        }
        let e_ii = scale3(e_ii, -c_dil / m[i]);
        if e_ii.iter().any(|v| *v != T::zero()) {
            theta_row_outer(cloud, family, kappa, &m, i, e_ii, three, &mut |k, b| {
                add(&mut acc, &mut touched, &mut seen, k, b)
            });
        }
        for (l, w) in bonds(cloud, family, i) {
            let d = sub(cloud.positions[l], xi);
            let e = scale3(d, -c_dil * kappa.bond(norm(d)) * w / m[l]);
            theta_row_outer(cloud, family, kappa, &m, l, e, three, &mut |k, b| {
                add(&mut acc, &mut touched, &mut seen, k, b)
            });
        }

        touched.sort_unstable();
        let row = &mut out[i];
        row.reserve(touched.len());
        for &k in &touched {
            row.push((k, acc[k as usize]));
            acc[k as usize] = zero_block();
            seen[k as usize] = false;
        }
        touched.clear();
    }
    Ok(BlockCsr::from_rows(n, out))
}

/// Adds `e ⊗ D_l` column block by column block.
#[allow(clippy::too_many_arguments)]
fn theta_row_outer<T: Real>(
    cloud: &PointCloud<T>,
    family: &Family<T>,
    kappa: &InfluenceFunction<T>,
    m: &[T],
    l: usize,
    e: Vec3<T>,
    three: T,
    sink: &mut impl FnMut(usize, &Block<T>),
) {
    let xl = cloud.positions[l];
    let s = three / m[l];
    let mut diag = [T::zero(); 3];
    for (k, w) in bonds(cloud, family, l) {
        let d = sub(cloud.positions[k], xl);
        let c = scale3(d, s * kappa.bond(norm(d)) * w);
        for a in 0..3 {
            diag[a] -= c[a];
        }
        sink(k, &outer(e, c));
    }
    sink(l, &outer(e, diag));
}

/// Fails if an interior point has a lattice site within `reach` that lies in
/// `body` but is missing from the cloud. Sites outside `body` are free surface.
pub fn check_coverage<T: Real>(cloud: &PointCloud<T>, body: &BoxUnion<T>, reach: T) -> Result<()> {
    let h = cloud.spacing;
    let n = (reach / h).ceil().to_i64().unwrap_or(0);
    let lim = (reach / h) * (T::one() + T::lit(1e-9));
    let lim2 = lim * lim;
    let tol = T::lit(1e-9) * h;
    let mut offsets = Vec::new();
    for i in -n..=n {
        for j in -n..=n {
            for k in -n..=n {
                if T::lit((i * i + j * j + k * k) as f64) <= lim2 {
                    offsets.push([i, j, k]);
                }
            }
        }
    }
    for p in 0..cloud.len() {
        if cloud.tags[p] != Region::Interior {
            continue;
        }
        let s = cloud.site(p);
        for o in &offsets {
            let q = [s[0] + o[0], s[1] + o[1], s[2] + o[2]];
            if cloud.index_of_site(q).is_some() {
                continue;
            }
            if body.contains(cloud.site_center(q), -tol) {
                let x = cloud.positions[p];
                return Err(Error::Coverage {
                    point: p,
                    x: x[0].as_f64(),
                    y: x[1].as_f64(),
                    z: x[2].as_f64(),
                });
            }
        }
    }
    Ok(())
}

#[inline]
fn bonds<'a, T: Real>(_cloud: &'a PointCloud<T>, family: &'a Family<T>, i: usize) -> impl Iterator<Item = (usize, T)> + 'a {
    family
        .neighbors(i)
        .iter()
        .zip(family.weights(i))
        .map(|(&j, &w)| (j as usize, w))
}

fn check_len(got: usize, expected: usize) -> Result<()> {
    if got != expected {
        return Err(Error::Shape { expected, got });
    }
    Ok(())
}

#[inline]
fn scale3<T: Real>(a: Vec3<T>, s: T) -> Vec3<T> {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[inline]
fn outer<T: Real>(a: Vec3<T>, b: Vec3<T>) -> Block<T> {
    [0, 1, 2].map(|r| [a[r] * b[0], a[r] * b[1], a[r] * b[2]])
}

#[inline]
fn neg<T: Real>(b: &Block<T>) -> Block<T> {
    b.map(|r| r.map(|v| -v))
}
