//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use mhd_core::assembly::{BlockKind, Discretization, MhdState, PhysParams};
use mhd_core::geometry::{cross, dot, Point, Vec3};
use mhd_core::space::{eval_at, sample_field, CellEvaluator, DofMap, FieldVector, PointEval};

/// Three-point Gauss-Legendre rule on `[0, 1]`.
pub fn gauss3() -> ([f64; 3], [f64; 3]) {
    let d = 0.5 * (0.6f64).sqrt();
    ([0.5 - d, 0.5, 0.5 + d], [5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0])
}

/// Collapsed (Duffy) product rule on the reference tetrahedron built from
/// `m`-point Gauss-Legendre rules. Exact for polynomials of degree
/// `2m - 3` and higher in most directions; `m = 6` covers every bilinear
/// form of the solver.
pub fn duffy_rule(m: usize) -> (Vec<Point>, Vec<f64>) {
    let (s, w) = gauss_legendre(m);
    let mut pts = Vec::new();
    let mut wts = Vec::new();
    for (a, wa) in s.iter().zip(&w) {
        for (b, wb) in s.iter().zip(&w) {
            for (c, wc) in s.iter().zip(&w) {
                let x = *a;
                let y = (1.0 - a) * b;
                let z = (1.0 - a) * (1.0 - b) * c;
                pts.push([x, y, z]);
                wts.push(wa * wb * wc * (1.0 - a) * (1.0 - a) * (1.0 - b));
            }
        }
    }
    (pts, wts)
}

/// Gauss-Legendre on `[0, 1]` by Newton iteration on the Legendre
/// polynomial.
fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=m {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pm = if m == 1 { 1.0 } else { p0 };
            let p = if m == 1 { x } else { p1 };
            dp = m as f64 * (x * p - pm) / (x * x - 1.0);
            let step = p / dp;
            x -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        nodes.push(0.5 * (1.0 - x));
        weights.push(1.0 / ((1.0 - x * x) * dp * dp));
    }
    (nodes, weights)
}

/// Values of every global basis function supported on cell `t` at point
/// `q` of `ev`, obtained by evaluating unit coefficient vectors.
fn cell_basis(dm: &DofMap, scratch: &mut FieldVector, t: usize, ev: &CellEvaluator, q: usize) -> Vec<(usize, PointEval)> {
    dm.cell_dofs(t)
        .iter()
        .map(|&g| {
            scratch.coeffs[g] = 1.0;
            let e = eval_at(scratch, dm, t, &ev.mapped, q);
            scratch.coeffs[g] = 0.0;
            (g, e)
        })
        .collect()
}

fn div(e: &PointEval) -> f64 {
    e.deriv[0][0] + e.deriv[1][1] + e.deriv[2][2]
}

fn frobenius(a: &PointEval, b: &PointEval) -> f64 {
    (0..3).map(|r| dot(&a.deriv[r], &b.deriv[r])).sum()
}

/// Integrand of block `kind` for row function `row`, column function
/// `col` and frozen fields `u_k`, `B_k` (value only).
fn integrand(kind: BlockKind, p: &PhysParams, row: &PointEval, col: &PointEval, uk: &Vec3, bk: &Vec3) -> f64 {
    let oseen = |row: &PointEval, col: &PointEval| {
        let conv: Vec3 = std::array::from_fn(|c| dot(&col.deriv[c], uk));
        frobenius(row, col) / p.re + dot(&conv, &row.value) + p.gamma * div(row) * div(col)
    };
    match kind {
        BlockKind::C => p.s / p.rm * dot(&col.deriv[0], &row.deriv[0]),
        BlockKind::M => dot(&col.value, &row.value),
        BlockKind::G => dot(&col.value, &row.deriv[0]),
        BlockKind::J => p.s * dot(&col.deriv[0], &cross(bk, &row.value)),
        BlockKind::F => oseen(row, col),
        BlockKind::Shat => oseen(row, col) + p.s * p.rm * dot(&cross(bk, &col.value), &cross(bk, &row.value)),
        BlockKind::B => -div(col) * row.value[0],
        BlockKind::Lr => dot(&col.deriv[0], &row.deriv[0]),
        BlockKind::Qp => col.value[0] * row.value[0],
    }
}

/// Dense matrix of block `kind` over all DOFs (boundary included), built
/// by brute-force quadrature of global basis functions.
pub fn dense_block(disc: &Discretization, params: &PhysParams, state: &MhdState, kind: BlockKind) -> Vec<Vec<f64>> {
    let (row_kind, col_kind) = kind.spaces();
    let (row_dm, col_dm) = (disc.dofmap(row_kind), disc.dofmap(col_kind));
    let (pts, wts) = duffy_rule(6);
    let mut row_ev = CellEvaluator::at_points(row_kind, &pts);
    let mut col_ev = CellEvaluator::at_points(col_kind, &pts);
    let mut u_ev = CellEvaluator::at_points(disc.velocity.kind, &pts);
    let mut b_ev = CellEvaluator::at_points(disc.magnetic.kind, &pts);
    let mut row_scratch = FieldVector::zeros(row_dm);
    let mut col_scratch = FieldVector::zeros(col_dm);
    let mut out = vec![vec![0.0; col_dm.n_dofs]; row_dm.n_dofs];
    for t in 0..disc.mesh.n_tets() {
        for ev in [&mut row_ev, &mut col_ev, &mut u_ev, &mut b_ev] {
            ev.reinit(&disc.mesh, t).unwrap();
        }
        let det = row_ev.geom.as_ref().unwrap().det;
        for (q, w) in wts.iter().enumerate() {
            let uk = eval_at(&state.u, &disc.velocity, t, &u_ev.mapped, q).value;
            let bk = eval_at(&state.b, &disc.magnetic, t, &b_ev.mapped, q).value;
            let rows = cell_basis(row_dm, &mut row_scratch, t, &row_ev, q);
            let cols = cell_basis(col_dm, &mut col_scratch, t, &col_ev, q);
            for (i, ri) in &rows {
                for (j, cj) in &cols {
                    out[*i][*j] += w * det * integrand(kind, params, ri, cj, &uk, &bk);
                }
            }
        }
    }
    out
}

/// Largest entrywise difference between `dense` and a sparse block, and
/// the largest dense entry.
pub fn dense_deviation(dense: &[Vec<f64>], sparse: &mhd_core::sparse::SparseMatrix) -> (f64, f64) {
    let s = sparse.to_dense();
    let mut diff = 0.0f64;
    let mut scale = 0.0f64;
    for (a, b) in dense.iter().zip(&s) {
        for (x, y) in a.iter().zip(b) {
            diff = diff.max((x - y).abs());
            scale = scale.max(x.abs());
        }
    }
    (diff, scale)
}

/// Matrix of edge moments `int_e (phi_j . t) lambda_k ds` of the global
/// edge basis functions, one row per `(edge, k)` functional, where `t` runs
/// from the lower to the higher vertex index and `lambda_0` is the
/// barycentric weight of the lower vertex.
pub fn edge_moment_matrix(disc: &Discretization) -> Vec<Vec<f64>> {
    let mesh = &disc.mesh;
    let dm = &disc.magnetic;
    let (s, w) = gauss3();
    let mut points = Vec::new();
    for &[lo, hi] in &mesh.edges {
        let (a, b) = (mesh.vertices[lo], mesh.vertices[hi]);
        for sq in s {
            points.push(std::array::from_fn::<f64, 3, _>(|d| a[d] + sq * (b[d] - a[d])));
        }
    }
    let mut out = vec![vec![0.0; dm.n_dofs]; 2 * mesh.n_edges()];
    let mut unit = FieldVector::zeros(dm);
    for j in 0..dm.n_dofs {
        unit.coeffs[j] = 1.0;
        let vals = sample_field(mesh, dm, &unit, &points).unwrap();
        unit.coeffs[j] = 0.0;
        for (e, &[lo, hi]) in mesh.edges.iter().enumerate() {
            let (a, b) = (mesh.vertices[lo], mesh.vertices[hi]);
            let tangent: Vec3 = std::array::from_fn(|d| b[d] - a[d]);
            for q in 0..3 {
                let v = vals[3 * e + q].expect("edge point inside mesh").value;
                let vt = dot(&v, &tangent);
                out[2 * e][j] += w[q] * vt * (1.0 - s[q]);
                out[2 * e + 1][j] += w[q] * vt * s[q];
            }
        }
    }
    out
}

/// Deterministic pseudo-random vector in `[-1, 1]`.
pub fn test_vector(n: usize, seed: u64) -> Vec<f64> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

/// A Picard state with linear velocity and a linear (or constant)
/// magnetic field. Every block integrand then has degree at most four, so
/// the assembly rule integrates it exactly.
pub fn polynomial_state(disc: &Discretization, linear_magnetic: bool) -> MhdState {
    use mhd_core::space::{interpolate_scalar, interpolate_vector};
    let mut st = MhdState::zeros(disc);
    st.u = interpolate_vector(&disc.mesh, &disc.velocity, |x| [0.3 + x[1], x[2] - 2.0 * x[0], 0.5 * x[0] + x[1]]);
    st.b = if linear_magnetic {
        interpolate_vector(&disc.mesh, &disc.magnetic, |x| [1.0 + x[2], 0.4 - x[0], 2.0 * x[1]])
    } else {
        interpolate_vector(&disc.mesh, &disc.magnetic, |_| [1.0, -0.5, 0.25])
    };
    st.p = interpolate_scalar(&disc.mesh, &disc.pressure, |x| x[0] - x[2]);
    st
}

/// `(max |C g|, max |C|)` where `g` interpolates the gradient of a
/// quadratic into the edge space.
pub fn curl_of_gradient(disc: &Discretization) -> (f64, f64) {
    use mhd_core::assembly::Assembler;
    use mhd_core::space::interpolate_vector;
    let params = PhysParams { s: 3.0, rm: 0.7, ..Default::default() };
    let c = Assembler::full(disc).assemble_block(&params, &MhdState::zeros(disc), BlockKind::C).unwrap();
    let grad = |x: &Point| [x[1] - 0.4, x[0] + 2.0 * x[2], 2.0 * x[1] + 1.0];
    let g = interpolate_vector(&disc.mesh, &disc.magnetic, grad);
    let cg = c.spmv(&g.coeffs).unwrap();
    (cg.iter().fold(0.0f64, |m, v| m.max(v.abs())), c.norm_inf())
}

/// Largest deviation of the global edge-moment matrix from the identity.
pub fn duality_defect(disc: &Discretization) -> f64 {
    let m = edge_moment_matrix(disc);
    let mut worst = 0.0f64;
    for (i, row) in m.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            let expect = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((v - expect).abs());
        }
    }
    worst
}

/// Relative deviation of every assembled block from the dense oracle.
pub fn block_oracle_deviations(disc: &Discretization) -> Vec<(BlockKind, f64)> {
    use mhd_core::assembly::Assembler;
    let params = PhysParams { re: 2.0, rm: 3.0, s: 5.0, gamma: 0.7, ..Default::default() };
    let linear = polynomial_state(disc, true);
    let constant = polynomial_state(disc, false);
    let mut asm = Assembler::full(disc);
    BlockKind::ALL
        .iter()
        .map(|&kind| {
            let state = if kind == BlockKind::Shat { &constant } else { &linear };
            let sparse = asm.assemble_block(&params, state, kind).unwrap();
            let dense = dense_block(disc, &params, state, kind);
            let (diff, scale) = dense_deviation(&dense, &sparse);
            (kind, diff / scale)
        })
        .collect()
}

/// Largest increase between consecutive FGMRES residual estimates on a
/// random nonsymmetric system with a preconditioner that changes at
/// every application.
pub fn fgmres_worst_increase(n: usize, seed: u64) -> (f64, bool) {
    use mhd_core::sparse::{fgmres, GmresOptions, SparseMatrix};
    let vals = test_vector(n * n, seed);
    let mut trip = Vec::new();
    for i in 0..n {
        trip.push((i, i, 4.0 + vals[i * n + i].abs()));
        for k in 1..4 {
            let j = (i * 7 + k * 13) % n;
            if j != i {
                trip.push((i, j, vals[i * n + j]));
            }
        }
    }
    let a = SparseMatrix::from_triplets(n, n, &trip).unwrap();
    let diag = a.diagonal();
    let b = test_vector(n, seed + 1);
    let mut calls = 0usize;
    let (_, rep) = fgmres(
        |x, y| a.spmv_into(x, y).unwrap(),
        &b,
        |r, z| {
            calls += 1;
            let damp = 1.0 + 0.3 * ((calls % 3) as f64);
            for i in 0..r.len() {
                z[i] = r[i] / (diag[i] * damp);
            }
        },
        &GmresOptions { tol: 1e-10, maxit: n, restart: None },
    );
    let worst = rep.residuals.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
    (worst, rep.converged)
}

/// Relative defect of preconditioner application followed by the
/// explicit upper-triangular operator, with exact sub-solves on an `n^3`
/// mesh with a coupled state.
pub fn back_substitution_defect(n: usize) -> f64 {
    use mhd_core::assembly::Assembler;
    use mhd_core::precond::{apply_precond, apply_upper_triangular, build_precond, SchurVariant, SubSolverConfig};
    let disc = Discretization::unit_cube(n).unwrap();
    let params = PhysParams { re: 5.0, rm: 2.0, s: 3.0, gamma: 1.5, ..Default::default() };
    let state = polynomial_state(&disc, true);
    let sys = Assembler::new(&disc).assemble_system(&params, &state).unwrap();
    let mut worst = 0.0f64;
    for variant in [SchurVariant::WithBubv, SchurVariant::WithoutBubv] {
        let ctx = build_precond(&sys, variant, SubSolverConfig::exact()).unwrap();
        let r = test_vector(sys.layout.total(), 11);
        let mut e = vec![0.0; r.len()];
        apply_precond(&ctx, &sys, &r, &mut e);
        let mut back = vec![0.0; r.len()];
        apply_upper_triangular(&ctx, &sys, &e, &mut back);
        let scale = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let diff = back.iter().zip(&r).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        worst = worst.max(diff / scale);
    }
    worst
}

/// Picard steps taken for zero forcing and zero boundary data.
pub fn trivial_fixed_point_steps() -> usize {
    use mhd_core::solver::{picard_solve, ProblemData, SolverOptions};
    let disc = Discretization::unit_cube(2).unwrap();
    let zero = |_: &Point| [0.0; 3];
    let data = ProblemData { momentum: &zero, magnetic: None, velocity_bc: &zero, magnetic_bc: &zero };
    let (state, report) = picard_solve(&disc, &PhysParams::default(), &data, &SolverOptions::default(), None).unwrap();
    assert!(state.u.coeffs.iter().chain(&state.b.coeffs).all(|v| *v == 0.0));
    report.picard_iterations
}
