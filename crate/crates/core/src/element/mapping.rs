//! Affine maps from the reference tetrahedron to mesh cells.

use crate::element::basis::{BasisKind, BasisTables};
use crate::element::quadrature::QuadratureRule;
use crate::error::{MhdError, Result};
use crate::geometry::{det, inverse, mat_vec, transpose, Mat3, Point, Vec3};

/// `x = origin + jac * xhat`, with `jac` columns `x_1 - x_0`, `x_2 - x_0`,
/// `x_3 - x_0`.
#[derive(Debug, Clone, Copy)]
pub struct TetGeometry {
    pub origin: Point,
    pub jac: Mat3,
    pub det: f64,
    /// `jac^{-T}`.
    pub inv_t: Mat3,
}

impl TetGeometry {
    /// Build the map for cell `cell` with vertices `pts`. Rejects
    /// non-positive determinants.
    pub fn new(cell: usize, pts: &[Point; 4]) -> Result<Self> {
        let mut jac = [[0.0; 3]; 3];
        for c in 0..3 {
            for r in 0..3 {
                jac[r][c] = pts[c + 1][r] - pts[0][r];
            }
        }
        let d = det(&jac);
        if !(d > 0.0) {
            return Err(MhdError::DegenerateElement { cell, det: d });
        }
        let inv = inverse(&jac).ok_or(MhdError::DegenerateElement { cell, det: d })?;
        Ok(Self {
            origin: pts[0],
            jac,
            det: d,
            inv_t: transpose(&inv),
        })
    }

    pub fn to_physical(&self, xhat: &Point) -> Point {
        let v = mat_vec(&self.jac, xhat);
        [self.origin[0] + v[0], self.origin[1] + v[1], self.origin[2] + v[2]]
    }

    pub fn volume(&self) -> f64 {
        self.det / 6.0
    }
}

/// Basis tables on a physical cell together with scaled quadrature weights
/// and the physical quadrature points.
#[derive(Debug, Clone)]
pub struct PhysicalTables {
    pub tables: BasisTables,
    pub weights: Vec<f64>,
    pub points: Vec<Point>,
}

/// Push reference tables forward to a cell.
///
/// Lagrange gradients and Nedelec values transform with `jac^{-T}`
/// (covariant map), Nedelec curls with `jac / det`, weights scale by `|det|`.
pub fn map_to_physical(geom: &TetGeometry, reference: &BasisTables, rule: &QuadratureRule) -> PhysicalTables {
    let mut tables = reference.clone();
    map_tables_into(geom, reference, &mut tables);
    PhysicalTables {
        tables,
        weights: rule.weights.iter().map(|w| w * geom.det.abs()).collect(),
        points: rule.points.iter().map(|p| geom.to_physical(p)).collect(),
    }
}

/// In-place variant used by the assembly loops: `out` must have the same
/// shape as `reference`.
pub fn map_tables_into(geom: &TetGeometry, reference: &BasisTables, out: &mut BasisTables) {
    match reference.kind {
        BasisKind::LagrangeP1 | BasisKind::LagrangeP2 => {
            for (o, g) in out.grads.iter_mut().zip(&reference.grads) {
                *o = mat_vec(&geom.inv_t, g);
            }
        }
        BasisKind::Nedelec2 => {
            for (o, v) in out.vec_values.iter_mut().zip(&reference.vec_values) {
                *o = mat_vec(&geom.inv_t, v);
            }
            let inv_det = 1.0 / geom.det;
            for (o, c) in out.curls.iter_mut().zip(&reference.curls) {
                let m: Vec3 = mat_vec(&geom.jac, c);
                *o = [m[0] * inv_det, m[1] * inv_det, m[2] * inv_det];
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::element::basis::{barycentric, eval_basis};
    use crate::element::quadrature::quad_rule;
    use crate::geometry::{cross, dot};
    use crate::mesh::LOCAL_EDGES;

    const REF: [Point; 4] = [[0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

    #[test]
    fn identity_map_leaves_tables_unchanged() {
        let g = TetGeometry::new(0, &REF).unwrap();
        let rule = quad_rule(4).unwrap();
        for kind in [BasisKind::LagrangeP2, BasisKind::Nedelec2] {
            let r = eval_basis(kind, &rule.points);
            let p = map_to_physical(&g, &r, &rule);
            assert_eq!(p.tables.grads, r.grads);
            assert_eq!(p.tables.vec_values, r.vec_values);
            assert_eq!(p.tables.curls, r.curls);
            assert_eq!(p.weights, rule.weights);
        }
    }

    #[test]
    fn uniform_scaling() {
        let s = 2.5;
        let pts = REF.map(|p| [s * p[0], s * p[1], s * p[2]]);
        let g = TetGeometry::new(0, &pts).unwrap();
        let rule = quad_rule(2).unwrap();
        let r = eval_basis(BasisKind::Nedelec2, &rule.points);
        let p = map_to_physical(&g, &r, &rule);
        for (a, b) in p.tables.vec_values.iter().zip(&r.vec_values) {
            for d in 0..3 {
                assert!((a[d] - b[d] / s).abs() < 1e-14);
            }
        }
        for (a, b) in p.tables.curls.iter().zip(&r.curls) {
            for d in 0..3 {
                assert!((a[d] - b[d] / (s * s)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn rejects_inverted_cells() {
        let mut pts = REF;
        pts.swap(1, 2);
        assert!(matches!(TetGeometry::new(7, &pts), Err(MhdError::DegenerateElement { cell: 7, .. })));
        let flat = [[0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 1.0, 0.0]];
        assert!(TetGeometry::new(0, &flat).is_err());
    }

    /// Physical-space oracle: evaluate the Nedelec basis directly from the
    /// physical barycentric gradients and compare curl-curl integrals.
    #[test]
    fn random_affine_curl_energy_matches_physical_oracle() {
        let pts: [Point; 4] = [
            [0.3, -0.2, 0.1],
            [1.4, 0.1, -0.3],
            [0.2, 1.1, 0.4],
            [0.5, 0.3, 1.7],
        ];
        let g = TetGeometry::new(0, &pts).unwrap();
        let rule = quad_rule(4).unwrap();
        let r = eval_basis(BasisKind::Nedelec2, &rule.points);
        let p = map_to_physical(&g, &r, &rule);

        // Physical barycentric gradients: rows of the inverse of the 4x4
        // vertex matrix, computed here by solving for each face normal.
        let mut dl = [[0.0; 3]; 4];
        for (i, dli) in dl.iter_mut().enumerate() {
            let o: Vec<Point> = (0..4).filter(|&j| j != i).map(|j| pts[j]).collect();
            let n = cross(&crate::geometry::sub(&o[1], &o[0]), &crate::geometry::sub(&o[2], &o[0]));
            let h = dot(&n, &crate::geometry::sub(&pts[i], &o[0]));
            *dli = [n[0] / h, n[1] / h, n[2] / h];
        }
        let mut direct = vec![0.0; 144];
        let mut mapped = vec![0.0; 144];
        let mut mass_direct = vec![0.0; 144];
        let mut mass_mapped = vec![0.0; 144];
        for (q, xhat) in rule.points.iter().enumerate() {
            let l = barycentric(xhat);
            let mut vals = Vec::new();
            let mut curls = Vec::new();
            for &(a, b) in &LOCAL_EDGES {
                let w = cross(&dl[a], &dl[b]);
                let la = l[a];
                let lb = l[b];
                let v1 = (0..3).map(|d| 4.0 * la * dl[b][d] + 2.0 * lb * dl[a][d]).collect::<Vec<_>>();
                let v2 = (0..3).map(|d| -2.0 * la * dl[b][d] - 4.0 * lb * dl[a][d]).collect::<Vec<_>>();
                vals.push([v1[0], v1[1], v1[2]]);
                vals.push([v2[0], v2[1], v2[2]]);
                curls.push([2.0 * w[0], 2.0 * w[1], 2.0 * w[2]]);
                curls.push([2.0 * w[0], 2.0 * w[1], 2.0 * w[2]]);
            }
            let wq = rule.weights[q] * g.det;
            for i in 0..12 {
                for j in 0..12 {
                    direct[i * 12 + j] += wq * dot(&curls[i], &curls[j]);
                    mapped[i * 12 + j] += p.weights[q] * dot(p.tables.curl(q, i), p.tables.curl(q, j));
                    mass_direct[i * 12 + j] += wq * dot(&vals[i], &vals[j]);
                    mass_mapped[i * 12 + j] += p.weights[q] * dot(p.tables.vec_value(q, i), p.tables.vec_value(q, j));
                }
            }
        }
        for k in 0..144 {
            assert!((direct[k] - mapped[k]).abs() < 1e-12 * (1.0 + direct[k].abs()));
            assert!((mass_direct[k] - mass_mapped[k]).abs() < 1e-12 * (1.0 + mass_direct[k].abs()));
        }
    }
}
