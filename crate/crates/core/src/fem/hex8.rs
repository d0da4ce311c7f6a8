use crate::error::{Error, Result};
use crate::scalar::{cross, norm, Real, Vec3};

/// Reference coordinates of the hex8 corners.
pub const CORNERS: [[f64; 3]; 8] = [
    [-1.0, -1.0, -1.0],
    [1.0, -1.0, -1.0],
    [1.0, 1.0, -1.0],
    [-1.0, 1.0, -1.0],
    [-1.0, -1.0, 1.0],
    [1.0, -1.0, 1.0],
    [1.0, 1.0, 1.0],
    [-1.0, 1.0, 1.0],
];

pub fn shape<T: Real>(xi: Vec3<T>) -> [T; 8] {
    let e = T::lit(0.125);
    CORNERS.map(|c| {
        e * (T::one() + T::lit(c[0]) * xi[0]) * (T::one() + T::lit(c[1]) * xi[1]) * (T::one() + T::lit(c[2]) * xi[2])
    })
}

pub fn shape_grad_ref<T: Real>(xi: Vec3<T>) -> [Vec3<T>; 8] {
    let e = T::lit(0.125);
    CORNERS.map(|c| {
        let f = [0, 1, 2].map(|a| T::one() + T::lit(c[a]) * xi[a]);
        [
            e * T::lit(c[0]) * f[1] * f[2],
            e * T::lit(c[1]) * f[0] * f[2],
            e * T::lit(c[2]) * f[0] * f[1],
        ]
    })
}

pub fn gauss_points<T: Real>() -> [Vec3<T>; 8] {
    let g = T::one() / T::lit(3.0).sqrt();
    CORNERS.map(|c| [T::lit(c[0]) * g, T::lit(c[1]) * g, T::lit(c[2]) * g])
}

pub fn map_to_physical<T: Real>(x: &[Vec3<T>; 8], xi: Vec3<T>) -> Vec3<T> {
    let n = shape(xi);
    let mut p = [T::zero(); 3];
    for a in 0..8 {
        for d in 0..3 {
            p[d] += n[a] * x[a][d];
        }
    }
    p
}

/// Physical shape gradients and `det J` at `xi`.
pub fn physical_gradients<T: Real>(x: &[Vec3<T>; 8], xi: Vec3<T>, cell: usize) -> Result<([Vec3<T>; 8], T)> {
    let g = shape_grad_ref(xi);
    let mut j = [[T::zero(); 3]; 3];
    for a in 0..8 {
        for r in 0..3 {
            for c in 0..3 {
                j[r][c] += x[a][r] * g[a][c];
            }
        }
    }
    let det = j[0][0] * (j[1][1] * j[2][2] - j[1][2] * j[2][1]) - j[0][1] * (j[1][0] * j[2][2] - j[1][2] * j[2][0])
        + j[0][2] * (j[1][0] * j[2][1] - j[1][1] * j[2][0]);
    if !(det > T::zero()) {
        return Err(Error::Assembly { cell });
    }
    let inv = [
        [
            (j[1][1] * j[2][2] - j[1][2] * j[2][1]) / det,
            (j[0][2] * j[2][1] - j[0][1] * j[2][2]) / det,
            (j[0][1] * j[1][2] - j[0][2] * j[1][1]) / det,
        ],
        [
            (j[1][2] * j[2][0] - j[1][0] * j[2][2]) / det,
            (j[0][0] * j[2][2] - j[0][2] * j[2][0]) / det,
            (j[0][2] * j[1][0] - j[0][0] * j[1][2]) / det,
        ],
        [
            (j[1][0] * j[2][1] - j[1][1] * j[2][0]) / det,
            (j[0][1] * j[2][0] - j[0][0] * j[2][1]) / det,
            (j[0][0] * j[1][1] - j[0][1] * j[1][0]) / det,
        ],
    ];
    // dN/dx_i = Σ_k dN/dξ_k (J^-1)_{k i}
    let grads = g.map(|gr| [0, 1, 2].map(|i| gr[0] * inv[0][i] + gr[1] * inv[1][i] + gr[2] * inv[2][i]));
    Ok((grads, det))
}

/// 24x24 element stiffness, node-major (`3a + i`).
pub fn element_stiffness<T: Real>(x: &[Vec3<T>; 8], lambda: T, mu: T, cell: usize) -> Result<Vec<[T; 24]>> {
    let mut k = vec![[T::zero(); 24]; 24];
    for gp in gauss_points::<T>() {
        let (dn, det) = physical_gradients(x, gp, cell)?;
        for a in 0..8 {
            for b in 0..8 {
                let gg = dn[a][0] * dn[b][0] + dn[a][1] * dn[b][1] + dn[a][2] * dn[b][2];
                for i in 0..3 {
                    for jj in 0..3 {
                        let mut v = lambda * dn[a][i] * dn[b][jj] + mu * dn[a][jj] * dn[b][i];
                        if i == jj {
                            v += mu * gg;
                        }
                        k[3 * a + i][3 * b + jj] += v * det;
                    }
                }
            }
        }
    }
    Ok(k)
}

/// Consistent nodal load of a body force density over one cell.
pub fn element_body_load<T: Real>(x: &[Vec3<T>; 8], b: &dyn Fn(Vec3<T>) -> Vec3<T>, cell: usize) -> Result<[Vec3<T>; 8]> {
    let mut f = [[T::zero(); 3]; 8];
    for gp in gauss_points::<T>() {
        let (_, det) = physical_gradients(x, gp, cell)?;
        let n = shape(gp);
        let bv = b(map_to_physical(x, gp));
        for a in 0..8 {
            for d in 0..3 {
                f[a][d] += n[a] * bv[d] * det;
            }
        }
    }
    Ok(f)
}

/// Consistent nodal load of a constant traction on a bilinear quad with corners in cyclic order.
pub fn face_traction_load<T: Real>(p: &[Vec3<T>; 4], tau: Vec3<T>) -> [Vec3<T>; 4] {
    let corners = [[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]];
    let g = T::one() / T::lit(3.0).sqrt();
    let q = T::lit(0.25);
    let mut f = [[T::zero(); 3]; 4];
    for gp in corners {
        let (s, t) = (T::lit(gp[0]) * g, T::lit(gp[1]) * g);
        let mut ds = [T::zero(); 3];
        let mut dt = [T::zero(); 3];
        let mut n = [T::zero(); 4];
        for (a, c) in corners.iter().enumerate() {
            let (cs, ct) = (T::lit(c[0]), T::lit(c[1]));
            n[a] = q * (T::one() + cs * s) * (T::one() + ct * t);
            let ns = q * cs * (T::one() + ct * t);
            let nt = q * ct * (T::one() + cs * s);
            for d in 0..3 {
                ds[d] += ns * p[a][d];
                dt[d] += nt * p[a][d];
            }
        }
        let da = norm(cross(ds, dt));
        for a in 0..4 {
            for d in 0..3 {
                f[a][d] += n[a] * tau[d] * da;
            }
        }
    }
    f
}
