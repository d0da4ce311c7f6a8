//! Canned geometries: the unit-cube manufactured-solution layout and the two
//! notched bars.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Aabb, NamedBoxes};

type B = Aabb<f64>;

fn bx(lo: [f64; 3], hi: [f64; 3]) -> B {
    Aabb::new(lo, hi)
}

fn named(name: &str, boxes: Vec<B>) -> NamedBoxes<f64> {
    NamedBoxes { name: name.into(), boxes }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Layout {
    /// Geometry given explicitly as boxes.
    #[default]
    Boxes,
    /// Generated from `h` and the horizon, see [`unit_cube`].
    UnitCube,
}

/// Prenotch rectangle as written in config files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrenotchConfig {
    pub axis: usize,
    pub value: f64,
    pub bounds: [[f64; 2]; 2],
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeometryConfig {
    pub layout: Layout,
    pub nonlocal_domain: Vec<B>,
    pub local_domain: Vec<B>,
    /// Material body for the coverage check; defaults to both domains.
    pub body: Vec<B>,
    pub omega_n: Vec<B>,
    pub eta_d: Vec<B>,
    pub eta_c: Vec<B>,
    pub overlap: Vec<B>,
    pub gamma_d: Vec<B>,
    pub gamma_c: Vec<B>,
    pub node_sets: Vec<NamedBoxes<f64>>,
    pub face_sets: Vec<NamedBoxes<f64>>,
    pub prenotch: Option<PrenotchConfig>,
}

/// Unit cube `[0,1]³` as the material body, split along x.
///
/// The η_D collar of thickness 2δ sits outside the cube on the x = 0 side and
/// around the four lateral faces of the nonlocal part. The nonlocal interior is
/// `[0, a]` with `a = 1 - 2δ`, η_c is `[a, 1]`, and the mesh covers `[x_l, 1]`
/// with `x_l` the grid plane closest to `a/2`. Γ_c is the `x = x_l` face and Γ_D
/// the other five.
pub fn unit_cube(h: f64, delta: f64) -> Result<GeometryConfig> {
    let t = 2.0 * delta;
    let a = 1.0 - t;
    if !(h > 0.0 && delta > 0.0) {
        return Err(Error::Parameter("unit cube needs positive h and horizon".into()));
    }
    if a < 2.0 * h - 1e-12 {
        return Err(Error::Parameter(format!(
            "horizon {delta} leaves no room for the nonlocal interior of the unit cube at h = {h}"
        )));
    }
    let xl = ((0.5 * a / h).round() * h).clamp(h, a - h);
    // Mesh nodes sit on the cell-centred nonlocal points.
    let (x0, c0, c1) = (xl + 0.5 * h, 0.5 * h, 1.0 - 0.5 * h);
    let (lo, hi) = (-t, 1.0 + t);
    let eta_d = vec![
        bx([lo, lo, lo], [0.0, hi, hi]),
        bx([0.0, lo, lo], [1.0, 0.0, hi]),
        bx([0.0, 1.0, lo], [1.0, hi, hi]),
        bx([0.0, 0.0, lo], [1.0, 1.0, 0.0]),
        bx([0.0, 0.0, 1.0], [1.0, 1.0, hi]),
    ];
    let local = bx([x0, c0, c0], [c1, c1, c1]);
    Ok(GeometryConfig {
        layout: Layout::Boxes,
        nonlocal_domain: vec![bx([lo, lo, lo], [1.0, hi, hi])],
        local_domain: vec![local],
        body: Vec::new(),
        omega_n: vec![bx([0.0, 0.0, 0.0], [a, 1.0, 1.0])],
        eta_d,
        eta_c: vec![bx([a, 0.0, 0.0], [1.0, 1.0, 1.0])],
        overlap: vec![local],
        gamma_d: vec![
            bx([c1, c0, c0], [c1, c1, c1]),
            bx([x0, c0, c0], [c1, c0, c1]),
            bx([x0, c1, c0], [c1, c1, c1]),
            bx([x0, c0, c0], [c1, c1, c0]),
            bx([x0, c0, c1], [c1, c1, c1]),
        ],
        gamma_c: vec![bx([x0, c0, c0], [x0, c1, c1])],
        node_sets: Vec::new(),
        face_sets: Vec::new(),
        prenotch: None,
    })
}

const NOTCH: PrenotchConfig = PrenotchConfig { axis: 0, value: 0.0, bounds: [[1.0, 4.0], [-2.0, 2.0]] };

fn fix_edges(x: f64) -> Vec<NamedBoxes<f64>> {
    vec![
        named(&format!("fix_y_{}", if x < 0.0 { "left" } else { "right" }), vec![bx([x, -4.0, -2.0], [x, -4.0, 2.0])]),
        named(&format!("fix_z_{}", if x < 0.0 { "left" } else { "right" }), vec![bx([x, -4.0, -2.0], [x, 4.0, -2.0])]),
    ]
}

/// Notched bar with prescribed end displacements, `[-18, 18] × [-4, 4] × [-2, 2]` mm.
pub fn bar_dirichlet() -> GeometryConfig {
    let mut node_sets = vec![
        named("left_end", vec![bx([-18.0, -4.0, -2.0], [-18.0, 4.0, 2.0])]),
        named("right_end", vec![bx([18.0, -4.0, -2.0], [18.0, 4.0, 2.0])]),
    ];
    node_sets.extend(fix_edges(-18.0));
    node_sets.extend(fix_edges(18.0));
    GeometryConfig {
        layout: Layout::Boxes,
        nonlocal_domain: vec![bx([-5.0, -4.0, -2.0], [5.0, 4.0, 2.0])],
        local_domain: vec![bx([-18.0, -4.0, -2.0], [-2.0, 4.0, 2.0]), bx([2.0, -4.0, -2.0], [18.0, 4.0, 2.0])],
        body: Vec::new(),
        omega_n: vec![bx([-3.5, -4.0, -2.0], [3.5, 4.0, 2.0])],
        eta_d: Vec::new(),
        eta_c: vec![bx([-5.0, -4.0, -2.0], [-3.5, 4.0, 2.0]), bx([3.5, -4.0, -2.0], [5.0, 4.0, 2.0])],
        overlap: vec![bx([-5.0, -4.0, -2.0], [-2.0, 4.0, 2.0]), bx([2.0, -4.0, -2.0], [5.0, 4.0, 2.0])],
        gamma_d: vec![bx([-18.0, -4.0, -2.0], [-18.0, 4.0, 2.0]), bx([18.0, -4.0, -2.0], [18.0, 4.0, 2.0])],
        gamma_c: vec![bx([-2.0, -4.0, -2.0], [-2.0, 4.0, 2.0]), bx([2.0, -4.0, -2.0], [2.0, 4.0, 2.0])],
        node_sets,
        face_sets: Vec::new(),
        prenotch: Some(NOTCH),
    }
}

/// Notched bar with a traction on the left end and the right end held, `[-16, 16] × [-4, 4] × [-2, 2]` mm.
pub fn bar_neumann() -> GeometryConfig {
    let mut node_sets = vec![named("right_end", vec![bx([16.0, -4.0, -2.0], [16.0, 4.0, 2.0])])];
    node_sets.extend(fix_edges(16.0));
    GeometryConfig {
        layout: Layout::Boxes,
        nonlocal_domain: vec![bx([-16.0, -4.0, -2.0], [16.0, 4.0, 2.0])],
        local_domain: vec![bx([-16.0, -4.0, -2.0], [-8.0, 4.0, 2.0]), bx([8.0, -4.0, -2.0], [16.0, 4.0, 2.0])],
        body: Vec::new(),
        omega_n: vec![bx([-14.5, -4.0, -2.0], [14.5, 4.0, 2.0])],
        eta_d: Vec::new(),
        eta_c: vec![bx([-16.0, -4.0, -2.0], [-14.5, 4.0, 2.0]), bx([14.5, -4.0, -2.0], [16.0, 4.0, 2.0])],
        overlap: vec![bx([-16.0, -4.0, -2.0], [-8.0, 4.0, 2.0]), bx([8.0, -4.0, -2.0], [16.0, 4.0, 2.0])],
        gamma_d: vec![bx([16.0, -4.0, -2.0], [16.0, 4.0, 2.0])],
        gamma_c: vec![bx([-8.0, -4.0, -2.0], [-8.0, 4.0, 2.0]), bx([8.0, -4.0, -2.0], [8.0, 4.0, 2.0])],
        node_sets,
        face_sets: vec![named("left_face", vec![bx([-16.0, -4.0, -2.0], [-16.0, 4.0, 2.0])])],
        prenotch: Some(NOTCH),
    }
}
