//! Global degree-of-freedom maps for the four discrete spaces, interpolation
//! of analytic fields, and error norms.
//!
//! Numbering is deterministic: Lagrange nodes are the mesh vertices followed
//! by the edges (midpoints); vector P2 fields are component-major; Nedelec
//! DOFs are `2 * edge + k`, where `k = 0` is the moment against the hat
//! function of the edge's lower-index endpoint and `k = 1` the upper one,
//! with the tangent pointing from lower to upper endpoint.

use crate::element::basis::{BasisKind, BasisTables};
use crate::element::mapping::TetGeometry;
use crate::element::quadrature::{edge_rule, quad_rule, QuadratureRule};
use crate::element::{eval_basis, mapping::map_tables_into};
use crate::error::{MhdError, Result};
use crate::geometry::{add, curl_from_jacobian, dot, scale, sub, Mat3, Point, Vec3};
use crate::mesh::TetMesh;

/// Sentinel in [`DofMap::free_index`] for constrained DOFs.
pub const CONSTRAINED: usize = usize::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum SpaceKind {
    VelocityP2,
    PressureP1,
    MagneticNed2,
    MultiplierP2,
}

impl SpaceKind {
    pub fn basis(self) -> BasisKind {
        match self {
            SpaceKind::VelocityP2 | SpaceKind::MultiplierP2 => BasisKind::LagrangeP2,
            SpaceKind::PressureP1 => BasisKind::LagrangeP1,
            SpaceKind::MagneticNed2 => BasisKind::Nedelec2,
        }
    }

    /// Local DOFs per cell.
    pub fn cell_ndofs(self) -> usize {
        match self {
            SpaceKind::VelocityP2 => 30,
            SpaceKind::PressureP1 => 4,
            SpaceKind::MagneticNed2 => 12,
            SpaceKind::MultiplierP2 => 10,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DofMap {
    pub kind: SpaceKind,
    pub n_dofs: usize,
    pub cell_ndofs: usize,
    cell_dofs: Vec<usize>,
    cell_signs: Vec<f64>,
    /// DOFs fixed by Dirichlet data.
    pub boundary: Vec<bool>,
    /// Position of each DOF among the free (unconstrained) DOFs, or
    /// [`CONSTRAINED`].
    pub free_index: Vec<usize>,
    /// Free DOFs in ascending order.
    pub free_dofs: Vec<usize>,
}

impl DofMap {
    pub fn cell_dofs(&self, t: usize) -> &[usize] {
        &self.cell_dofs[t * self.cell_ndofs..(t + 1) * self.cell_ndofs]
    }

    /// Orientation signs of the local basis functions; all `1.0` for
    /// Lagrange spaces.
    pub fn cell_signs(&self, t: usize) -> &[f64] {
        &self.cell_signs[t * self.cell_ndofs..(t + 1) * self.cell_ndofs]
    }

    pub fn n_free(&self) -> usize {
        self.free_dofs.len()
    }

    /// Restrict a full-length vector to the free DOFs.
    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        self.free_dofs.iter().map(|&d| full[d]).collect()
    }

    /// Scatter a free-DOF vector into a full-length vector of zeros.
    pub fn extend(&self, free: &[f64]) -> Vec<f64> {
        let mut full = vec![0.0; self.n_dofs];
        for (&d, &v) in self.free_dofs.iter().zip(free) {
            full[d] = v;
        }
        full
    }
}

/// Build the DOF map of `kind` on `mesh`.
pub fn build_dofmap(mesh: &TetMesh, kind: SpaceKind) -> DofMap {
    let nv = mesh.n_vertices();
    let ne = mesh.n_edges();
    let ncell = kind.cell_ndofs();
    let mut cell_dofs = Vec::with_capacity(ncell * mesh.n_tets());
    let mut cell_signs = Vec::with_capacity(ncell * mesh.n_tets());
    let n_nodes = nv + ne;

    let (n_dofs, boundary) = match kind {
        SpaceKind::PressureP1 => (nv, vec![false; nv]),
        SpaceKind::MultiplierP2 => {
            let mut b = mesh.boundary.vertices.clone();
            b.extend_from_slice(&mesh.boundary.edges);
            (n_nodes, b)
        }
        SpaceKind::VelocityP2 => {
            let mut node = mesh.boundary.vertices.clone();
            node.extend_from_slice(&mesh.boundary.edges);
            (3 * n_nodes, node.repeat(3))
        }
        SpaceKind::MagneticNed2 => {
            let b = mesh.boundary.edges.iter().flat_map(|&b| [b, b]).collect();
            (2 * ne, b)
        }
    };

    for (t, tet) in mesh.tets.iter().enumerate() {
        match kind {
            SpaceKind::PressureP1 => {
                cell_dofs.extend_from_slice(tet);
                cell_signs.extend_from_slice(&[1.0; 4]);
            }
            SpaceKind::MultiplierP2 | SpaceKind::VelocityP2 => {
                let comps = if kind == SpaceKind::VelocityP2 { 3 } else { 1 };
                for c in 0..comps {
                    let off = c * n_nodes;
                    cell_dofs.extend(tet.iter().map(|&v| off + v));
                    cell_dofs.extend(mesh.tet_edges[t].iter().map(|&e| off + nv + e));
                    cell_signs.extend_from_slice(&[1.0; 10]);
                }
            }
            SpaceKind::MagneticNed2 => {
                for le in 0..6 {
                    let e = mesh.tet_edges[t][le];
                    let s = mesh.tet_edge_signs[t][le];
                    if s > 0.0 {
                        cell_dofs.extend_from_slice(&[2 * e, 2 * e + 1]);
                    } else {
                        cell_dofs.extend_from_slice(&[2 * e + 1, 2 * e]);
                    }
                    cell_signs.extend_from_slice(&[s, s]);
                }
            }
        }
    }

    let mut free_index = vec![CONSTRAINED; n_dofs];
    let mut free_dofs = Vec::new();
    for d in 0..n_dofs {
        if !boundary[d] {
            free_index[d] = free_dofs.len();
            free_dofs.push(d);
        }
    }
    DofMap {
        kind,
        n_dofs,
        cell_ndofs: ncell,
        cell_dofs,
        cell_signs,
        boundary,
        free_index,
        free_dofs,
    }
}

/// Coefficient vector of a finite element function.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldVector {
    pub kind: SpaceKind,
    pub coeffs: Vec<f64>,
}

impl FieldVector {
    pub fn zeros(dofmap: &DofMap) -> Self {
        Self {
            kind: dofmap.kind,
            coeffs: vec![0.0; dofmap.n_dofs],
        }
    }

    pub fn check(&self, dofmap: &DofMap) -> Result<()> {
        if self.kind != dofmap.kind {
            return Err(MhdError::InvalidArgument(format!(
                "field of kind {:?} used with {:?} dof map",
                self.kind, dofmap.kind
            )));
        }
        if self.coeffs.len() != dofmap.n_dofs {
            return Err(MhdError::DimensionMismatch {
                context: "field vector",
                expected: dofmap.n_dofs,
                got: self.coeffs.len(),
            });
        }
        Ok(())
    }
}

/// Lagrange P2 node location for node index `node` (`vertex` or
/// `n_vertices + edge`).
fn p2_node(mesh: &TetMesh, node: usize) -> Point {
    let nv = mesh.n_vertices();
    if node < nv {
        mesh.vertices[node]
    } else {
        mesh.edge_midpoint(node - nv)
    }
}

/// Interpolate a scalar field into a Lagrange space (nodal values).
pub fn interpolate_scalar(mesh: &TetMesh, dofmap: &DofMap, f: impl Fn(&Point) -> f64) -> FieldVector {
    let coeffs = match dofmap.kind {
        SpaceKind::PressureP1 => mesh.vertices.iter().map(&f).collect(),
        SpaceKind::MultiplierP2 => (0..dofmap.n_dofs).map(|n| f(&p2_node(mesh, n))).collect(),
        other => panic!("interpolate_scalar on vector space {other:?}"),
    };
    FieldVector {
        kind: dofmap.kind,
        coeffs,
    }
}

/// Interpolate a vector field into the P2 velocity space (nodal values) or
/// the Nedelec space (tangential edge moments, 3-point Gauss per edge).
pub fn interpolate_vector(mesh: &TetMesh, dofmap: &DofMap, f: impl Fn(&Point) -> Vec3) -> FieldVector {
    let mut coeffs = vec![0.0; dofmap.n_dofs];
    match dofmap.kind {
        SpaceKind::VelocityP2 => {
            let n_nodes = dofmap.n_dofs / 3;
            for node in 0..n_nodes {
                let v = f(&p2_node(mesh, node));
                for c in 0..3 {
                    coeffs[c * n_nodes + node] = v[c];
                }
            }
        }
        SpaceKind::MagneticNed2 => {
            let (s, w) = edge_rule();
            for (e, &[lo, hi]) in mesh.edges.iter().enumerate() {
                let (plo, phi) = (mesh.vertices[lo], mesh.vertices[hi]);
                let t = sub(&phi, &plo);
                let (mut m0, mut m1) = (0.0, 0.0);
                for (sq, wq) in s.iter().zip(&w) {
                    let x = add(&plo, &scale(*sq, &t));
                    let vt = dot(&f(&x), &t);
                    m0 += wq * vt * (1.0 - sq);
                    m1 += wq * vt * sq;
                }
                coeffs[2 * e] = m0;
                coeffs[2 * e + 1] = m1;
            }
        }
        other => panic!("interpolate_vector on scalar space {other:?}"),
    }
    FieldVector {
        kind: dofmap.kind,
        coeffs,
    }
}

/// Value of a finite element function and its first derivative at the
/// points of `tables` on one cell.
///
/// Scalar spaces return `(value, gradient)` packed as `value = [v, 0, 0]`;
/// the velocity space returns the value and the Jacobian rows; the Nedelec
/// space returns the value and the curl in row 0.
#[derive(Debug, Clone, Copy, Default)]
pub struct PointEval {
    pub value: Vec3,
    pub deriv: Mat3,
}

/// Evaluate `field` at quadrature point `q` of cell `t` from physical tables
/// of the matching basis.
pub fn eval_at(field: &FieldVector, dofmap: &DofMap, t: usize, tables: &BasisTables, q: usize) -> PointEval {
    let dofs = dofmap.cell_dofs(t);
    let signs = dofmap.cell_signs(t);
    let mut out = PointEval::default();
    match dofmap.kind {
        SpaceKind::PressureP1 | SpaceKind::MultiplierP2 => {
            for i in 0..tables.ndofs {
                let c = field.coeffs[dofs[i]];
                out.value[0] += c * tables.value(q, i);
                let g = tables.grad(q, i);
                for d in 0..3 {
                    out.deriv[0][d] += c * g[d];
                }
            }
        }
        SpaceKind::VelocityP2 => {
            for comp in 0..3 {
                for i in 0..10 {
                    let c = field.coeffs[dofs[comp * 10 + i]];
                    out.value[comp] += c * tables.value(q, i);
                    let g = tables.grad(q, i);
                    for d in 0..3 {
                        out.deriv[comp][d] += c * g[d];
                    }
                }
            }
        }
        SpaceKind::MagneticNed2 => {
            for i in 0..12 {
                let c = field.coeffs[dofs[i]] * signs[i];
                let v = tables.vec_value(q, i);
                let cu = tables.curl(q, i);
                for d in 0..3 {
                    out.value[d] += c * v[d];
                    out.deriv[0][d] += c * cu[d];
                }
            }
        }
    }
    out
}

/// Per-cell evaluation helper holding reference and mapped tables for one
/// quadrature rule.
pub struct CellEvaluator {
    pub rule: QuadratureRule,
    reference: BasisTables,
    pub mapped: BasisTables,
    pub weights: Vec<f64>,
    pub points: Vec<Point>,
    pub geom: Option<TetGeometry>,
}

impl CellEvaluator {
    pub fn new(kind: SpaceKind, rule: QuadratureRule) -> Self {
        let reference = eval_basis(kind.basis(), &rule.points);
        Self {
            mapped: reference.clone(),
            reference,
            weights: rule.weights.clone(),
            points: rule.points.clone(),
            rule,
            geom: None,
        }
    }

    /// Evaluate at explicit reference points instead of quadrature points.
    pub fn at_points(kind: SpaceKind, points: &[Point]) -> Self {
        let rule = QuadratureRule {
            points: points.to_vec(),
            weights: vec![0.0; points.len()],
            order: 0,
        };
        Self::new(kind, rule)
    }

    pub fn reinit(&mut self, mesh: &TetMesh, t: usize) -> Result<()> {
        let geom = TetGeometry::new(t, &mesh.tet_points(t))?;
        map_tables_into(&geom, &self.reference, &mut self.mapped);
        for (q, (w, p)) in self.rule.weights.iter().zip(&self.rule.points).enumerate() {
            self.weights[q] = w * geom.det;
            self.points[q] = geom.to_physical(p);
        }
        self.geom = Some(geom);
        Ok(())
    }

    pub fn npoints(&self) -> usize {
        self.rule.len()
    }
}

/// An analytic field with the derivative needed by its norm.
pub enum ExactField<'a> {
    /// Scalar value and optional gradient.
    Scalar {
        value: &'a dyn Fn(&Point) -> f64,
        grad: Option<&'a dyn Fn(&Point) -> Vec3>,
    },
    /// Vector value and optional Jacobian `d v_i / d x_j` (H1 norms).
    Vector {
        value: &'a dyn Fn(&Point) -> Vec3,
        jacobian: Option<&'a dyn Fn(&Point) -> Mat3>,
    },
    /// Vector value and optional curl (H(curl) norms).
    Curl {
        value: &'a dyn Fn(&Point) -> Vec3,
        curl: Option<&'a dyn Fn(&Point) -> Vec3>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ErrorNorms {
    pub l2: f64,
    /// H1 seminorm or curl L2 norm, when the exact derivative was given.
    pub deriv: Option<f64>,
    /// Full norm: `sqrt(l2^2 + deriv^2)` (or `l2` without a derivative).
    pub full: f64,
}

/// Quadrature (order 6) approximation of the error norms of `field`.
pub fn error_norms(mesh: &TetMesh, dofmap: &DofMap, field: &FieldVector, exact: &ExactField) -> Result<ErrorNorms> {
    field.check(dofmap)?;
    let mut ev = CellEvaluator::new(dofmap.kind, quad_rule(6)?);
    let mut l2 = 0.0;
    let mut der = 0.0;
    let has_deriv = match exact {
        ExactField::Scalar { grad, .. } => grad.is_some(),
        ExactField::Vector { jacobian, .. } => jacobian.is_some(),
        ExactField::Curl { curl, .. } => curl.is_some(),
    };
    for t in 0..mesh.n_tets() {
        ev.reinit(mesh, t)?;
        for q in 0..ev.npoints() {
            let x = ev.points[q];
            let w = ev.weights[q];
            let h = eval_at(field, dofmap, t, &ev.mapped, q);
            match exact {
                ExactField::Scalar { value, grad } => {
                    l2 += w * (value(&x) - h.value[0]).powi(2);
                    if let Some(g) = grad {
                        let g = g(&x);
                        der += w * (0..3).map(|d| (g[d] - h.deriv[0][d]).powi(2)).sum::<f64>();
                    }
                }
                ExactField::Vector { value, jacobian } => {
                    let v = value(&x);
                    l2 += w * (0..3).map(|d| (v[d] - h.value[d]).powi(2)).sum::<f64>();
                    if let Some(j) = jacobian {
                        let j = j(&x);
                        for r in 0..3 {
                            for c in 0..3 {
                                der += w * (j[r][c] - h.deriv[r][c]).powi(2);
                            }
                        }
                    }
                }
                ExactField::Curl { value, curl } => {
                    let v = value(&x);
                    l2 += w * (0..3).map(|d| (v[d] - h.value[d]).powi(2)).sum::<f64>();
                    if let Some(c) = curl {
                        let c = c(&x);
                        der += w * (0..3).map(|d| (c[d] - h.deriv[0][d]).powi(2)).sum::<f64>();
                    }
                }
            }
        }
    }
    let deriv = has_deriv.then(|| der.sqrt());
    Ok(ErrorNorms {
        l2: l2.sqrt(),
        deriv,
        full: (l2 + der).sqrt(),
    })
}

/// Evaluate `field` at physical points. Each point is located by a scan
/// over the cells, so this is meant for sampling, not for assembly.
/// Points outside the mesh give `None`.
pub fn sample_field(mesh: &TetMesh, dofmap: &DofMap, field: &FieldVector, points: &[Point]) -> Result<Vec<Option<PointEval>>> {
    field.check(dofmap)?;
    let tol = 1e-12;
    let mut out = Vec::with_capacity(points.len());
    for x in points {
        let mut found = None;
        for t in 0..mesh.n_tets() {
            let pts = mesh.tet_points(t);
            let lo = |d: usize| pts.iter().map(|p| p[d]).fold(f64::INFINITY, f64::min);
            let hi = |d: usize| pts.iter().map(|p| p[d]).fold(f64::NEG_INFINITY, f64::max);
            if (0..3).any(|d| x[d] < lo(d) - tol || x[d] > hi(d) + tol) {
                continue;
            }
            let geom = TetGeometry::new(t, &pts)?;
            let rel = sub(x, &geom.origin);
            // Reference coordinates: jac^{-1} (x - origin) = inv_t^T (x - origin).
            let r: Point = std::array::from_fn(|i| (0..3).map(|k| geom.inv_t[k][i] * rel[k]).sum());
            if r.iter().all(|&c| c >= -tol) && r.iter().sum::<f64>() <= 1.0 + tol {
                let mut ev = CellEvaluator::at_points(dofmap.kind, &[r]);
                ev.reinit(mesh, t)?;
                found = Some(eval_at(field, dofmap, t, &ev.mapped, 0));
                break;
            }
        }
        out.push(found);
    }
    Ok(out)
}

/// Curl of an analytic field from a Jacobian closure.
pub fn curl_of(jac: impl Fn(&Point) -> Mat3) -> impl Fn(&Point) -> Vec3 {
    move |x| curl_from_jacobian(&jac(x))
}

/// Mass-weighted mean of a P1 function, `int p / |Omega|`.
pub fn p1_mean(mesh: &TetMesh, p: &[f64]) -> f64 {
    let mut integral = 0.0;
    let mut volume = 0.0;
    for (t, tet) in mesh.tets.iter().enumerate() {
        let v = mesh.tet_volume(t);
        integral += v * tet.iter().map(|&i| p[i]).sum::<f64>() / 4.0;
        volume += v;
    }
    integral / volume
}
