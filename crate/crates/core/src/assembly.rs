//! Assembly of the linearized MHD blocks and nonlinear residuals.
//!
//! Unknowns are ordered `(B, r, u, p)`. System blocks act on free DOFs only:
//! Dirichlet values live in the state, so corrections are homogeneous and
//! the boundary data enters through the residuals.

use std::fmt;

use crate::element::quadrature::quad_rule;
use crate::error::{MhdError, Result};
use crate::geometry::{cross, dot, Point, Vec3};
use crate::mesh::{build_box_mesh, BoxDomain, TetMesh};
use crate::space::{build_dofmap, eval_at, interpolate_vector, CellEvaluator, DofMap, FieldVector, SpaceKind, CONSTRAINED};
use crate::sparse::SparseMatrix;

/// Quadrature order used for every bilinear form.
pub const ASSEMBLY_ORDER: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PhysParams {
    pub re: f64,
    pub rm: f64,
    pub s: f64,
    pub gamma: f64,
    /// Preconditioner shift; `None` means `S / Rm`.
    pub sigma: Option<f64>,
    pub theta: f64,
}

impl Default for PhysParams {
    fn default() -> Self {
        Self {
            re: 1.0,
            rm: 1.0,
            s: 1.0,
            gamma: 1.0,
            sigma: None,
            theta: 1.0,
        }
    }
}

impl PhysParams {
    pub fn sigma(&self) -> f64 {
        self.sigma.unwrap_or(self.s / self.rm)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(MhdError::InvalidArgument(m.to_string()));
        if !(self.re > 0.0 && self.rm > 0.0 && self.s > 0.0) {
            return bad("Re, Rm and S must be positive");
        }
        if !(self.gamma >= 0.0) {
            return bad("gamma must be non-negative");
        }
        if !(self.sigma() > 0.0) {
            return bad("sigma must be positive");
        }
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return bad("theta must lie in (0, 1]");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BlockKind {
    /// `S/Rm (curl phi_j, curl phi_i)`
    C,
    /// `(phi_j, phi_i)` on the edge space.
    M,
    /// `(phi_j, grad s_i)`
    G,
    /// `S (curl phi_j, B_k x v_i)`
    J,
    /// `1/Re (grad, grad) + (u_k . grad v_j, v_i) + gamma (div, div)`
    F,
    /// `-(div v_j, q_i)`
    B,
    /// `(grad s_j, grad s_i)`
    Lr,
    /// Pressure mass matrix.
    Qp,
    /// `F + S Rm (B_k x v_j, B_k x v_i)`
    Shat,
}

impl BlockKind {
    pub const ALL: [BlockKind; 9] = [
        BlockKind::C,
        BlockKind::M,
        BlockKind::G,
        BlockKind::J,
        BlockKind::F,
        BlockKind::B,
        BlockKind::Lr,
        BlockKind::Qp,
        BlockKind::Shat,
    ];

    /// (row space, column space).
    pub fn spaces(self) -> (SpaceKind, SpaceKind) {
        use SpaceKind::*;
        match self {
            BlockKind::C | BlockKind::M => (MagneticNed2, MagneticNed2),
            BlockKind::G => (MultiplierP2, MagneticNed2),
            BlockKind::J => (VelocityP2, MagneticNed2),
            BlockKind::F | BlockKind::Shat => (VelocityP2, VelocityP2),
            BlockKind::B => (PressureP1, VelocityP2),
            BlockKind::Lr => (MultiplierP2, MultiplierP2),
            BlockKind::Qp => (PressureP1, PressureP1),
        }
    }

    /// Whether the block depends on the Picard state.
    pub fn state_dependent(self) -> bool {
        matches!(self, BlockKind::J | BlockKind::F | BlockKind::Shat)
    }
}

impl fmt::Display for BlockKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// A mesh together with the four discrete spaces on it.
pub struct Discretization {
    pub mesh: TetMesh,
    pub magnetic: DofMap,
    pub multiplier: DofMap,
    pub velocity: DofMap,
    pub pressure: DofMap,
}

impl Discretization {
    pub fn new(mesh: TetMesh) -> Self {
        Self {
            magnetic: build_dofmap(&mesh, SpaceKind::MagneticNed2),
            multiplier: build_dofmap(&mesh, SpaceKind::MultiplierP2),
            velocity: build_dofmap(&mesh, SpaceKind::VelocityP2),
            pressure: build_dofmap(&mesh, SpaceKind::PressureP1),
            mesh,
        }
    }

    pub fn unit_cube(n: usize) -> Result<Self> {
        Ok(Self::new(build_box_mesh(n, BoxDomain::unit_cube())?))
    }

    pub fn dofmap(&self, kind: SpaceKind) -> &DofMap {
        match kind {
            SpaceKind::MagneticNed2 => &self.magnetic,
            SpaceKind::MultiplierP2 => &self.multiplier,
            SpaceKind::VelocityP2 => &self.velocity,
            SpaceKind::PressureP1 => &self.pressure,
        }
    }

    pub fn layout(&self) -> BlockLayout {
        BlockLayout {
            nb: self.magnetic.n_free(),
            nr: self.multiplier.n_free(),
            nu: self.velocity.n_free(),
            np: self.pressure.n_free(),
        }
    }
}

/// Sizes of the four free-DOF blocks of the monolithic vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct BlockLayout {
    pub nb: usize,
    pub nr: usize,
    pub nu: usize,
    pub np: usize,
}

impl BlockLayout {
    pub fn total(&self) -> usize {
        self.nb + self.nr + self.nu + self.np
    }

    /// Split a monolithic vector into `(b, r, u, p)` slices.
    pub fn split<'a>(&self, x: &'a [f64]) -> (&'a [f64], &'a [f64], &'a [f64], &'a [f64]) {
        let (b, rest) = x.split_at(self.nb);
        let (r, rest) = rest.split_at(self.nr);
        let (u, p) = rest.split_at(self.nu);
        (b, r, u, p)
    }

    pub fn split_mut<'a>(&self, x: &'a mut [f64]) -> (&'a mut [f64], &'a mut [f64], &'a mut [f64], &'a mut [f64]) {
        let (b, rest) = x.split_at_mut(self.nb);
        let (r, rest) = rest.split_at_mut(self.nr);
        let (u, p) = rest.split_at_mut(self.nu);
        (b, r, u, p)
    }

    pub fn join(&self, b: &[f64], r: &[f64], u: &[f64], p: &[f64]) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.total());
        x.extend_from_slice(b);
        x.extend_from_slice(r);
        x.extend_from_slice(u);
        x.extend_from_slice(p);
        x
    }
}

/// Full coefficient vectors of `(B_h, r_h, u_h, p_h)`, boundary values
/// included.
#[derive(Debug, Clone, PartialEq)]
pub struct MhdState {
    pub b: FieldVector,
    pub r: FieldVector,
    pub u: FieldVector,
    pub p: FieldVector,
}

impl MhdState {
    pub fn zeros(disc: &Discretization) -> Self {
        Self {
            b: FieldVector::zeros(&disc.magnetic),
            r: FieldVector::zeros(&disc.multiplier),
            u: FieldVector::zeros(&disc.velocity),
            p: FieldVector::zeros(&disc.pressure),
        }
    }

    /// Zero interior values with interpolated Dirichlet data on the
    /// boundary: velocity `g` at boundary nodes, tangential moments of
    /// `b_s` on boundary edges.
    pub fn from_boundary_data(disc: &Discretization, g: &dyn Fn(&Point) -> Vec3, b_s: &dyn Fn(&Point) -> Vec3) -> Self {
        let mut s = Self::zeros(disc);
        s.set_boundary(disc, g, b_s);
        s
    }

    pub fn set_boundary(&mut self, disc: &Discretization, g: &dyn Fn(&Point) -> Vec3, b_s: &dyn Fn(&Point) -> Vec3) {
        let ug = interpolate_vector(&disc.mesh, &disc.velocity, g);
        let bg = interpolate_vector(&disc.mesh, &disc.magnetic, b_s);
        for (d, &bd) in disc.velocity.boundary.iter().enumerate() {
            if bd {
                self.u.coeffs[d] = ug.coeffs[d];
            }
        }
        for (d, &bd) in disc.magnetic.boundary.iter().enumerate() {
            if bd {
                self.b.coeffs[d] = bg.coeffs[d];
            }
        }
    }

    /// Add `theta * delta` (free-DOF correction in block order) to the
    /// free DOFs; boundary values are untouched.
    pub fn add_free(&mut self, disc: &Discretization, delta: &[f64], theta: f64) -> Result<()> {
        let layout = disc.layout();
        if delta.len() != layout.total() {
            return Err(MhdError::DimensionMismatch {
                context: "state correction",
                expected: layout.total(),
                got: delta.len(),
            });
        }
        let (db, dr, du, dp) = layout.split(delta);
        for (field, map, d) in [
            (&mut self.b, &disc.magnetic, db),
            (&mut self.r, &disc.multiplier, dr),
            (&mut self.u, &disc.velocity, du),
            (&mut self.p, &disc.pressure, dp),
        ] {
            for (&dof, &v) in map.free_dofs.iter().zip(d) {
                field.coeffs[dof] += theta * v;
            }
        }
        Ok(())
    }
}

/// The assembled blocks, all restricted to free DOFs.
#[derive(Debug, Clone)]
pub struct BlockSystem {
    pub c: SparseMatrix,
    pub m: SparseMatrix,
    pub g: SparseMatrix,
    pub j: SparseMatrix,
    pub f: SparseMatrix,
    pub b: SparseMatrix,
    pub lr: SparseMatrix,
    pub qp: SparseMatrix,
    pub shat: SparseMatrix,
    pub params: PhysParams,
    pub layout: BlockLayout,
}

impl BlockSystem {
    pub fn block(&self, kind: BlockKind) -> &SparseMatrix {
        match kind {
            BlockKind::C => &self.c,
            BlockKind::M => &self.m,
            BlockKind::G => &self.g,
            BlockKind::J => &self.j,
            BlockKind::F => &self.f,
            BlockKind::B => &self.b,
            BlockKind::Lr => &self.lr,
            BlockKind::Qp => &self.qp,
            BlockKind::Shat => &self.shat,
        }
    }

    /// `y = A x` for the monolithic operator with rows
    /// `(C G' J' 0; G 0 0 0; -J 0 F B'; 0 0 B 0)`.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        let l = self.layout;
        let (xb, xr, xu, xp) = l.split(x);
        let (yb, yr, yu, yp) = l.split_mut(y);
        self.c.mul_acc(xb, yb, 0.0, 1.0);
        self.g.mul_transpose_acc(xr, yb, 1.0, 1.0);
        self.j.mul_transpose_acc(xu, yb, 1.0, 1.0);
        self.g.mul_acc(xb, yr, 0.0, 1.0);
        self.f.mul_acc(xu, yu, 0.0, 1.0);
        self.j.mul_acc(xb, yu, 1.0, -1.0);
        self.b.mul_transpose_acc(xp, yu, 1.0, 1.0);
        self.b.mul_acc(xu, yp, 0.0, 1.0);
    }

    /// Replace the state-dependent blocks.
    pub fn update_dynamic(&mut self, j: SparseMatrix, f: SparseMatrix, shat: SparseMatrix) {
        self.j = j;
        self.f = f;
        self.shat = shat;
    }
}

/// Per-cell basis data for the three element types on a common rule.
struct CellData {
    p2: CellEvaluator,
    p1: CellEvaluator,
    ned: CellEvaluator,
}

impl CellData {
    fn new(order: usize) -> Result<Self> {
        let rule = quad_rule(order)?;
        Ok(Self {
            p2: CellEvaluator::new(SpaceKind::MultiplierP2, rule.clone()),
            p1: CellEvaluator::new(SpaceKind::PressureP1, rule.clone()),
            ned: CellEvaluator::new(SpaceKind::MagneticNed2, rule),
        })
    }

    fn reinit(&mut self, mesh: &TetMesh, t: usize) -> Result<()> {
        self.p2.reinit(mesh, t)?;
        self.p1.reinit(mesh, t)?;
        self.ned.reinit(mesh, t)
    }

    fn nq(&self) -> usize {
        self.p2.npoints()
    }
}

/// Matrix index of each local DOF of cell `t`: the free index for
/// restricted assembly (constrained DOFs map to [`CONSTRAINED`]), the DOF
/// itself otherwise.
fn cell_indices(map: &DofMap, t: usize, restricted: bool, out: &mut Vec<usize>) {
    out.clear();
    for &d in map.cell_dofs(t) {
        out.push(if restricted { map.free_index[d] } else { d });
    }
}

fn matrix_dims(map: &DofMap, restricted: bool) -> usize {
    if restricted {
        map.n_free()
    } else {
        map.n_dofs
    }
}

/// Zero matrix with the element-connectivity pattern between two spaces.
pub fn block_pattern(disc: &Discretization, kind: BlockKind, restricted: bool) -> SparseMatrix {
    let (rs, cs) = kind.spaces();
    let (rmap, cmap) = (disc.dofmap(rs), disc.dofmap(cs));
    let nr = matrix_dims(rmap, restricted);
    let mut rows: Vec<Vec<usize>> = vec![Vec::new(); nr];
    let (mut ri, mut ci) = (Vec::new(), Vec::new());
    for t in 0..disc.mesh.n_tets() {
        cell_indices(rmap, t, restricted, &mut ri);
        cell_indices(cmap, t, restricted, &mut ci);
        for &i in &ri {
            if i == CONSTRAINED {
                continue;
            }
            rows[i].extend(ci.iter().copied().filter(|&j| j != CONSTRAINED));
        }
        if t % 64 == 63 {
            for r in rows.iter_mut() {
                if r.len() > 512 {
                    r.sort_unstable();
                    r.dedup();
                }
            }
        }
    }
    SparseMatrix::from_pattern(matrix_dims(cmap, restricted), rows)
}

fn scatter(mat: &mut SparseMatrix, ri: &[usize], ci: &[usize], local: &[f64]) {
    let nc = ci.len();
    for (a, &i) in ri.iter().enumerate() {
        if i == CONSTRAINED {
            continue;
        }
        let (lo, hi) = (mat.indptr[i], mat.indptr[i + 1]);
        let cols = &mat.indices[lo..hi];
        for (b, &j) in ci.iter().enumerate() {
            if j == CONSTRAINED {
                continue;
            }
            let v = local[a * nc + b];
            if v == 0.0 {
                continue;
            }
            let k = cols.binary_search(&j).expect("entry missing from pattern");
            mat.values[lo + k] += v;
        }
    }
}

/// Assembles blocks, caching sparsity patterns between calls.
pub struct Assembler<'a> {
    pub disc: &'a Discretization,
    pub order: usize,
    restricted: bool,
    patterns: std::collections::HashMap<BlockKind, SparseMatrix>,
}

impl<'a> Assembler<'a> {
    /// Assembler for free-DOF (Dirichlet-eliminated) blocks.
    pub fn new(disc: &'a Discretization) -> Self {
        Self {
            disc,
            order: ASSEMBLY_ORDER,
            restricted: true,
            patterns: Default::default(),
        }
    }

    /// Assembler over all DOFs, boundary rows and columns included.
    pub fn full(disc: &'a Discretization) -> Self {
        Self {
            restricted: false,
            ..Self::new(disc)
        }
    }

    fn pattern(&mut self, kind: BlockKind) -> SparseMatrix {
        // Blocks sharing spaces share patterns.
        let key = match kind {
            BlockKind::M => BlockKind::C,
            BlockKind::Shat => BlockKind::F,
            k => k,
        };
        let (disc, restricted) = (self.disc, self.restricted);
        self.patterns
            .entry(key)
            .or_insert_with(|| block_pattern(disc, key, restricted))
            .clone()
    }

    pub fn assemble_block(&mut self, params: &PhysParams, state: &MhdState, kind: BlockKind) -> Result<SparseMatrix> {
        Ok(self.assemble_blocks(params, state, &[kind])?.pop().unwrap())
    }

    /// Assemble several blocks in one sweep over the cells; results come
    /// back in the order requested.
    pub fn assemble_blocks(&mut self, params: &PhysParams, state: &MhdState, kinds: &[BlockKind]) -> Result<Vec<SparseMatrix>> {
        params.validate()?;
        let disc = self.disc;
        state.u.check(&disc.velocity)?;
        state.b.check(&disc.magnetic)?;
        let mut mats: Vec<SparseMatrix> = kinds.iter().map(|&k| self.pattern(k)).collect();
        let want = |k: BlockKind| kinds.contains(&k);
        let need_fluid = want(BlockKind::F) || want(BlockKind::Shat);
        let need_bk = want(BlockKind::J) || want(BlockKind::Shat);

        let mut cd = CellData::new(self.order)?;
        let nq = cd.nq();
        let mut uq = vec![[0.0; 3]; nq];
        let mut bq = vec![[0.0; 3]; nq];
        let mut idx: [Vec<usize>; 4] = Default::default();
        // Node-level (10x10) helpers for the vector P2 blocks.
        let mut lap = [0.0; 100];
        let mut conv = [0.0; 100];
        let mut divdiv = [0.0; 900];
        let mut coupling = [0.0; 900];
        let mut local = vec![0.0; 900];

        for t in 0..disc.mesh.n_tets() {
            cd.reinit(&disc.mesh, t)?;
            cell_indices(&disc.magnetic, t, self.restricted, &mut idx[0]);
            cell_indices(&disc.multiplier, t, self.restricted, &mut idx[1]);
            cell_indices(&disc.velocity, t, self.restricted, &mut idx[2]);
            cell_indices(&disc.pressure, t, self.restricted, &mut idx[3]);
            let signs = disc.magnetic.cell_signs(t);
            if need_fluid {
                for q in 0..nq {
                    uq[q] = eval_at(&state.u, &disc.velocity, t, &cd.p2.mapped, q).value;
                }
            }
            if need_bk {
                for q in 0..nq {
                    bq[q] = eval_at(&state.b, &disc.magnetic, t, &cd.ned.mapped, q).value;
                }
            }
            if need_fluid {
                lap.fill(0.0);
                conv.fill(0.0);
                divdiv.fill(0.0);
                for q in 0..nq {
                    let w = cd.p2.weights[q];
                    let tb = &cd.p2.mapped;
                    for a in 0..10 {
                        let ga = tb.grad(q, a);
                        let va = tb.value(q, a);
                        for b in 0..10 {
                            let gb = tb.grad(q, b);
                            lap[a * 10 + b] += w * dot(ga, gb);
                            conv[a * 10 + b] += w * dot(&uq[q], gb) * va;
                            for c in 0..3 {
                                for d in 0..3 {
                                    divdiv[(c * 3 + d) * 100 + a * 10 + b] += w * ga[c] * gb[d];
                                }
                            }
                        }
                    }
                }
            }
            if want(BlockKind::Shat) {
                coupling.fill(0.0);
                for q in 0..nq {
                    let w = cd.p2.weights[q] * params.s * params.rm;
                    let bb = bq[q];
                    let b2 = dot(&bb, &bb);
                    for c in 0..3 {
                        for d in 0..3 {
                            let k = if c == d { b2 } else { 0.0 } - bb[c] * bb[d];
                            if k == 0.0 {
                                continue;
                            }
                            for a in 0..10 {
                                let va = cd.p2.mapped.value(q, a) * w * k;
                                for b in 0..10 {
                                    coupling[(c * 3 + d) * 100 + a * 10 + b] += va * cd.p2.mapped.value(q, b);
                                }
                            }
                        }
                    }
                }
            }

            for (m, &kind) in mats.iter_mut().zip(kinds) {
                let (ri, ci) = match kind.spaces() {
                    (r, c) => (&idx[space_slot(r)], &idx[space_slot(c)]),
                };
                let (nr, nc) = (ri.len(), ci.len());
                let loc = &mut local[..nr * nc];
                loc.fill(0.0);
                match kind {
                    BlockKind::C | BlockKind::M => {
                        let scale = if kind == BlockKind::C { params.s / params.rm } else { 1.0 };
                        for q in 0..nq {
                            let w = cd.ned.weights[q] * scale;
                            let tb = &cd.ned.mapped;
                            for i in 0..12 {
                                let fi = if kind == BlockKind::C { tb.curl(q, i) } else { tb.vec_value(q, i) };
                                for j in 0..12 {
                                    let fj = if kind == BlockKind::C { tb.curl(q, j) } else { tb.vec_value(q, j) };
                                    loc[i * 12 + j] += w * dot(fi, fj) * signs[i] * signs[j];
                                }
                            }
                        }
                    }
                    BlockKind::G => {
                        for q in 0..nq {
                            let w = cd.p2.weights[q];
                            for i in 0..10 {
                                let gi = cd.p2.mapped.grad(q, i);
                                for j in 0..12 {
                                    loc[i * 12 + j] += w * dot(cd.ned.mapped.vec_value(q, j), gi) * signs[j];
                                }
                            }
                        }
                    }
                    BlockKind::J => {
                        for q in 0..nq {
                            let w = cd.p2.weights[q] * params.s;
                            for j in 0..12 {
                                let cb = cross(cd.ned.mapped.curl(q, j), &bq[q]);
                                for c in 0..3 {
                                    let f = w * cb[c] * signs[j];
                                    for a in 0..10 {
                                        loc[(c * 10 + a) * 12 + j] += f * cd.p2.mapped.value(q, a);
                                    }
                                }
                            }
                        }
                    }
                    BlockKind::F | BlockKind::Shat => {
                        let inv_re = 1.0 / params.re;
                        for c in 0..3 {
                            for d in 0..3 {
                                for a in 0..10 {
                                    for b in 0..10 {
                                        let mut v = params.gamma * divdiv[(c * 3 + d) * 100 + a * 10 + b];
                                        if c == d {
                                            v += inv_re * lap[a * 10 + b] + conv[a * 10 + b];
                                        }
                                        if kind == BlockKind::Shat {
                                            v += coupling[(c * 3 + d) * 100 + a * 10 + b];
                                        }
                                        loc[(c * 10 + a) * 30 + d * 10 + b] = v;
                                    }
                                }
                            }
                        }
                    }
                    BlockKind::B => {
                        for q in 0..nq {
                            let w = cd.p2.weights[q];
                            for i in 0..4 {
                                let qi = cd.p1.mapped.value(q, i);
                                for d in 0..3 {
                                    for b in 0..10 {
                                        loc[i * 30 + d * 10 + b] -= w * cd.p2.mapped.grad(q, b)[d] * qi;
                                    }
                                }
                            }
                        }
                    }
                    BlockKind::Lr => {
                        for q in 0..nq {
                            let w = cd.p2.weights[q];
                            for i in 0..10 {
                                for j in 0..10 {
                                    loc[i * 10 + j] += w * dot(cd.p2.mapped.grad(q, i), cd.p2.mapped.grad(q, j));
                                }
                            }
                        }
                    }
                    BlockKind::Qp => {
                        for q in 0..nq {
                            let w = cd.p1.weights[q];
                            for i in 0..4 {
                                for j in 0..4 {
                                    loc[i * 4 + j] += w * cd.p1.mapped.value(q, i) * cd.p1.mapped.value(q, j);
                                }
                            }
                        }
                    }
                }
                scatter(m, ri, ci, loc);
            }
        }
        Ok(mats)
    }

    /// All nine blocks for `state`.
    pub fn assemble_system(&mut self, params: &PhysParams, state: &MhdState) -> Result<BlockSystem> {
        let mut v = self.assemble_blocks(params, state, &BlockKind::ALL)?.into_iter();
        let mut next = || v.next().unwrap();
        Ok(BlockSystem {
            c: next(),
            m: next(),
            g: next(),
            j: next(),
            f: next(),
            b: next(),
            lr: next(),
            qp: next(),
            shat: next(),
            params: *params,
            layout: self.disc.layout(),
        })
    }

    /// Reassemble `J`, `F` and `Shat` in place for a new state.
    pub fn update_system(&mut self, sys: &mut BlockSystem, state: &MhdState) -> Result<()> {
        let params = sys.params;
        let mut v = self
            .assemble_blocks(&params, state, &[BlockKind::J, BlockKind::F, BlockKind::Shat])?
            .into_iter();
        let (j, f, s) = (v.next().unwrap(), v.next().unwrap(), v.next().unwrap());
        sys.update_dynamic(j, f, s);
        Ok(())
    }
}

fn space_slot(kind: SpaceKind) -> usize {
    match kind {
        SpaceKind::MagneticNed2 => 0,
        SpaceKind::MultiplierP2 => 1,
        SpaceKind::VelocityP2 => 2,
        SpaceKind::PressureP1 => 3,
    }
}

/// Volume sources: momentum forcing `f` and an optional source in the
/// induction equation (used by manufactured solutions).
pub struct Sources<'a> {
    pub momentum: &'a dyn Fn(&Point) -> Vec3,
    pub magnetic: Option<&'a dyn Fn(&Point) -> Vec3>,
}

/// Residual functionals at a state, restricted to free DOFs.
#[derive(Debug, Clone, PartialEq)]
pub struct Residuals {
    pub rb: Vec<f64>,
    pub rr: Vec<f64>,
    pub ru: Vec<f64>,
    pub rp: Vec<f64>,
}

impl Residuals {
    pub fn to_vector(&self, layout: &BlockLayout) -> Vec<f64> {
        layout.join(&self.rb, &self.rr, &self.ru, &self.rp)
    }

    pub fn norm(&self) -> f64 {
        [&self.rb, &self.rr, &self.ru, &self.rp]
            .iter()
            .flat_map(|v| v.iter())
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt()
    }
}

/// Evaluate the right-hand side `(R_b, R_r, R_u, R_p)` of the linearized
/// problem at `state`:
///
/// * `R_b(phi) = -S/Rm (curl B, curl phi) - (grad r, phi) - S (B x u, curl phi) + (g_B, phi)`
/// * `R_r(s) = -(B, grad s)`
/// * `R_u(v) = (f, v) - F(u; u, v) + S (curl B, B x v) + (p, div v)`
/// * `R_p(q) = (div u, q)`
pub fn assemble_residuals(disc: &Discretization, params: &PhysParams, state: &MhdState, sources: &Sources) -> Result<Residuals> {
    params.validate()?;
    let mut rb = vec![0.0; disc.magnetic.n_dofs];
    let mut rr = vec![0.0; disc.multiplier.n_dofs];
    let mut ru = vec![0.0; disc.velocity.n_dofs];
    let mut rp = vec![0.0; disc.pressure.n_dofs];
    let mut cd = CellData::new(ASSEMBLY_ORDER)?;
    let (s, inv_re, gamma) = (params.s, 1.0 / params.re, params.gamma);
    for t in 0..disc.mesh.n_tets() {
        cd.reinit(&disc.mesh, t)?;
        let bdofs = disc.magnetic.cell_dofs(t);
        let signs = disc.magnetic.cell_signs(t);
        let rdofs = disc.multiplier.cell_dofs(t);
        let udofs = disc.velocity.cell_dofs(t);
        let pdofs = disc.pressure.cell_dofs(t);
        for q in 0..cd.nq() {
            let w = cd.p2.weights[q];
            let x = cd.p2.points[q];
            let u = eval_at(&state.u, &disc.velocity, t, &cd.p2.mapped, q);
            let b = eval_at(&state.b, &disc.magnetic, t, &cd.ned.mapped, q);
            let r = eval_at(&state.r, &disc.multiplier, t, &cd.p2.mapped, q);
            let p = eval_at(&state.p, &disc.pressure, t, &cd.p1.mapped, q);
            let (uv, grad_u) = (u.value, u.deriv);
            let div_u = grad_u[0][0] + grad_u[1][1] + grad_u[2][2];
            let (bv, curl_b) = (b.value, b.deriv[0]);
            let grad_r = r.deriv[0];
            let pv = p.value[0];
            let bxu = cross(&bv, &uv);
            let gb = sources.magnetic.map(|f| f(&x)).unwrap_or([0.0; 3]);
            for i in 0..12 {
                let phi = cd.ned.mapped.vec_value(q, i);
                let cphi = cd.ned.mapped.curl(q, i);
                let v = -s / params.rm * dot(&curl_b, cphi) - dot(&grad_r, phi) - s * dot(&bxu, cphi) + dot(&gb, phi);
                rb[bdofs[i]] += w * v * signs[i];
            }
            for i in 0..10 {
                rr[rdofs[i]] -= w * dot(&bv, cd.p2.mapped.grad(q, i));
            }
            let f = (sources.momentum)(&x);
            let lorentz = cross(&curl_b, &bv);
            let mut conv = [0.0; 3];
            for c in 0..3 {
                conv[c] = dot(&uv, &grad_u[c]);
            }
            for c in 0..3 {
                let body = f[c] - conv[c] + s * lorentz[c];
                for a in 0..10 {
                    let va = cd.p2.mapped.value(q, a);
                    let ga = cd.p2.mapped.grad(q, a);
                    let v = body * va - inv_re * dot(&grad_u[c], ga) + (pv - gamma * div_u) * ga[c];
                    ru[udofs[c * 10 + a]] += w * v;
                }
            }
            for i in 0..4 {
                rp[pdofs[i]] += w * div_u * cd.p1.mapped.value(q, i);
            }
        }
    }
    Ok(Residuals {
        rb: disc.magnetic.restrict(&rb),
        rr: disc.multiplier.restrict(&rr),
        ru: disc.velocity.restrict(&ru),
        rp: disc.pressure.restrict(&rp),
    })
}

/// Symmetric Dirichlet elimination of a full (all-DOF) system
/// `A x = rhs` with prescribed values `bc` on the constrained DOFs of
/// `rows`/`cols`: returns `A_ff` and `rhs_f - A_fc bc_c`.
pub fn apply_dirichlet(full: &SparseMatrix, rhs: &[f64], rows: &DofMap, cols: &DofMap, bc: &[f64]) -> Result<(SparseMatrix, Vec<f64>)> {
    if full.n_rows != rows.n_dofs || full.n_cols != cols.n_dofs {
        return Err(MhdError::DimensionMismatch {
            context: "dirichlet matrix",
            expected: rows.n_dofs,
            got: full.n_rows,
        });
    }
    if bc.len() != cols.n_dofs {
        return Err(MhdError::DimensionMismatch {
            context: "dirichlet data",
            expected: cols.n_dofs,
            got: bc.len(),
        });
    }
    if rhs.len() != rows.n_dofs {
        return Err(MhdError::DimensionMismatch {
            context: "dirichlet rhs",
            expected: rows.n_dofs,
            got: rhs.len(),
        });
    }
    let reduced = full.submatrix(&rows.free_dofs, &cols.free_index, cols.n_free());
    let lift: Vec<f64> = (0..cols.n_dofs).map(|d| if cols.boundary[d] { bc[d] } else { 0.0 }).collect();
    let a_lift = full.spmv(&lift)?;
    let new_rhs = rows.free_dofs.iter().map(|&d| rhs[d] - a_lift[d]).collect();
    Ok((reduced, new_rhs))
}
