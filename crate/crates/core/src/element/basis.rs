//! Reference bases: scalar P1/P2 Lagrange and the lowest-order second-family
//! Nedelec edge element (full linear vector fields, two DOFs per edge).
//!
//! Everything is written in barycentric coordinates `l_0..l_3`. Local P2
//! nodes are the four vertices followed by the six edge midpoints in
//! [`LOCAL_EDGES`] order. Nedelec DOFs come in pairs per local edge
//! `(a, b)`, `a < b`: DOF `2e` is the tangential moment against `l_a`, DOF
//! `2e + 1` the moment against `l_b`, both with tangent `x_b - x_a` and unit
//! parameter measure along the edge.

use crate::geometry::{cross, scale, add, Point, Vec3};
use crate::mesh::LOCAL_EDGES;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum BasisKind {
    LagrangeP1,
    LagrangeP2,
    Nedelec2,
}

impl BasisKind {
    pub fn ndofs(self) -> usize {
        match self {
            BasisKind::LagrangeP1 => 4,
            BasisKind::LagrangeP2 => 10,
            BasisKind::Nedelec2 => 12,
        }
    }

    pub fn is_vector(self) -> bool {
        matches!(self, BasisKind::Nedelec2)
    }
}

/// Gradients of the reference barycentric coordinates.
pub const REF_BARY_GRADS: [Vec3; 4] = [
    [-1.0, -1.0, -1.0],
    [1.0, 0.0, 0.0],
    [0.0, 1.0, 0.0],
    [0.0, 0.0, 1.0],
];

pub fn barycentric(p: &Point) -> [f64; 4] {
    [1.0 - p[0] - p[1] - p[2], p[0], p[1], p[2]]
}

/// Basis tables at a list of points, indexed `[point * ndofs + dof]`.
///
/// Lagrange kinds fill `values` and `grads`; the Nedelec kind fills
/// `vec_values` and `curls`.
#[derive(Debug, Clone)]
pub struct BasisTables {
    pub kind: BasisKind,
    pub ndofs: usize,
    pub npoints: usize,
    pub values: Vec<f64>,
    pub grads: Vec<Vec3>,
    pub vec_values: Vec<Vec3>,
    pub curls: Vec<Vec3>,
}

impl BasisTables {
    #[inline]
    pub fn value(&self, q: usize, i: usize) -> f64 {
        self.values[q * self.ndofs + i]
    }

    #[inline]
    pub fn grad(&self, q: usize, i: usize) -> &Vec3 {
        &self.grads[q * self.ndofs + i]
    }

    #[inline]
    pub fn vec_value(&self, q: usize, i: usize) -> &Vec3 {
        &self.vec_values[q * self.ndofs + i]
    }

    #[inline]
    pub fn curl(&self, q: usize, i: usize) -> &Vec3 {
        &self.curls[q * self.ndofs + i]
    }
}

/// Lagrange P1/P2 values and gradients given barycentric coordinates and
/// their gradients (reference or physical).
fn lagrange_at(kind: BasisKind, l: &[f64; 4], dl: &[Vec3; 4], values: &mut Vec<f64>, grads: &mut Vec<Vec3>) {
    match kind {
        BasisKind::LagrangeP1 => {
            values.extend_from_slice(l);
            grads.extend_from_slice(dl);
        }
        BasisKind::LagrangeP2 => {
            for i in 0..4 {
                values.push(l[i] * (2.0 * l[i] - 1.0));
                grads.push(scale(4.0 * l[i] - 1.0, &dl[i]));
            }
            for &(a, b) in &LOCAL_EDGES {
                values.push(4.0 * l[a] * l[b]);
                grads.push(scale(4.0, &add(&scale(l[a], &dl[b]), &scale(l[b], &dl[a]))));
            }
        }
        BasisKind::Nedelec2 => unreachable!("not a Lagrange kind"),
    }
}

/// Nedelec values and curls given barycentric data.
///
/// Per edge `(a, b)`: `4 l_a grad l_b + 2 l_b grad l_a` and
/// `-2 l_a grad l_b - 4 l_b grad l_a`, the dual basis of the two moments.
fn nedelec_at(l: &[f64; 4], dl: &[Vec3; 4], values: &mut Vec<Vec3>, curls: &mut Vec<Vec3>) {
    for &(a, b) in &LOCAL_EDGES {
        let w = cross(&dl[a], &dl[b]);
        let la_gb = scale(l[a], &dl[b]);
        let lb_ga = scale(l[b], &dl[a]);
        values.push(add(&scale(4.0, &la_gb), &scale(2.0, &lb_ga)));
        values.push(add(&scale(-2.0, &la_gb), &scale(-4.0, &lb_ga)));
        curls.push(scale(2.0, &w));
        curls.push(scale(2.0, &w));
    }
}

/// Evaluate the reference basis of `kind` at reference `points`.
pub fn eval_basis(kind: BasisKind, points: &[Point]) -> BasisTables {
    let ndofs = kind.ndofs();
    let mut t = BasisTables {
        kind,
        ndofs,
        npoints: points.len(),
        values: Vec::new(),
        grads: Vec::new(),
        vec_values: Vec::new(),
        curls: Vec::new(),
    };
    for p in points {
        let l = barycentric(p);
        match kind {
            BasisKind::Nedelec2 => nedelec_at(&l, &REF_BARY_GRADS, &mut t.vec_values, &mut t.curls),
            _ => lagrange_at(kind, &l, &REF_BARY_GRADS, &mut t.values, &mut t.grads),
        }
    }
    t
}
