//! Block upper-triangular preconditioner for the linearized MHD system,
//! applied by back substitution in the order `p -> u -> r -> B`.

use std::cell::Cell;

use crate::assembly::{Assembler, BlockKind, BlockSystem, Discretization, MhdState, PhysParams};
use crate::error::{MhdError, Result};
use crate::geometry::{Point, Vec3};
use crate::space::interpolate_vector;
use crate::sparse::{factorize, fgmres, pcg, DirectKind, DirectSolver, GmresOptions, Ilu0, Jacobi, KrylovReport, Preconditioner, SparseMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchurVariant {
    /// Velocity block `F + S Rm (B_k x u, B_k x v)`.
    WithBubv,
    /// Velocity block `F` alone.
    WithoutBubv,
}

impl std::str::FromStr for SchurVariant {
    type Err = MhdError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "with_bubv" => Ok(Self::WithBubv),
            "without_bubv" => Ok(Self::WithoutBubv),
            other => Err(MhdError::Parse(format!("unknown preconditioner variant '{other}' (with_bubv | without_bubv)"))),
        }
    }
}

impl std::fmt::Display for SchurVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::WithBubv => "with_bubv",
            Self::WithoutBubv => "without_bubv",
        })
    }
}

/// How a diagonal block is inverted inside the preconditioner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubSolverKind {
    /// Sparse direct factorization.
    Direct,
    /// ILU(0)-preconditioned GMRES (or Jacobi CG for the pressure mass
    /// matrix) to the configured tolerance.
    Krylov,
    /// Direct up to [`DIRECT_LIMIT`] unknowns, Krylov above. Sparse LU of
    /// the P2 velocity block on a 16^3 mesh needs more than 5 GB.
    Auto,
}

/// Largest block dimension factorized directly under [`SubSolverKind::Auto`].
pub const DIRECT_LIMIT: usize = 40_000;

impl SubSolverKind {
    pub fn resolve(self, dim: usize) -> SubSolverKind {
        match self {
            SubSolverKind::Auto if dim <= DIRECT_LIMIT => SubSolverKind::Direct,
            SubSolverKind::Auto => SubSolverKind::Krylov,
            k => k,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SubSolverConfig {
    /// Tolerance of the pressure, multiplier and magnetic solves.
    pub eps0: f64,
    /// Tolerance of the velocity (Schur) solve.
    pub schur_tol: f64,
    pub max_inner: usize,
    pub pressure: SubSolverKind,
    pub schur: SubSolverKind,
    pub multiplier: SubSolverKind,
    pub magnetic: SubSolverKind,
}

impl Default for SubSolverConfig {
    fn default() -> Self {
        Self {
            eps0: 1e-3,
            schur_tol: 1e-3,
            max_inner: 500,
            pressure: SubSolverKind::Krylov,
            schur: SubSolverKind::Auto,
            multiplier: SubSolverKind::Direct,
            magnetic: SubSolverKind::Direct,
        }
    }
}

impl SubSolverConfig {
    /// All blocks solved exactly.
    pub fn exact() -> Self {
        Self {
            pressure: SubSolverKind::Direct,
            schur: SubSolverKind::Direct,
            ..Default::default()
        }
    }
}

enum BlockSolver {
    Direct(DirectSolver),
    Ilu(Ilu0),
    Jacobi(Jacobi),
}

impl BlockSolver {
    fn build(a: &SparseMatrix, kind: SubSolverKind, symmetric: bool, name: &str) -> Result<Self> {
        Ok(match kind.resolve(a.n_rows) {
            SubSolverKind::Direct | SubSolverKind::Auto => {
                let dk = if symmetric { DirectKind::Cholesky } else { DirectKind::Lu };
                BlockSolver::Direct(factorize(a, dk, name)?)
            }
            SubSolverKind::Krylov => BlockSolver::Ilu(Ilu0::new(a)?),
        })
    }

    fn refresh(&mut self, a: &SparseMatrix, kind: SubSolverKind, symmetric: bool, name: &str) -> Result<()> {
        match self {
            BlockSolver::Direct(d) => d.refactor(a),
            _ => {
                *self = Self::build(a, kind, symmetric, name)?;
                Ok(())
            }
        }
    }

    /// Solve `a x = b`; returns whether the solve met its tolerance.
    fn solve(&self, a: &SparseMatrix, b: &[f64], x: &mut [f64], tol: f64, maxit: usize) -> bool {
        match self {
            BlockSolver::Direct(d) => {
                x.copy_from_slice(b);
                d.solve_in_place(x);
                true
            }
            BlockSolver::Jacobi(j) => match pcg(a, b, j, tol, maxit) {
                Ok((sol, rep)) => {
                    x.copy_from_slice(&sol);
                    rep.converged
                }
                Err(_) => false,
            },
            BlockSolver::Ilu(ilu) => {
                let opts = GmresOptions { tol, maxit, restart: Some(50) };
                let (sol, rep) = fgmres(|v, w| a.mul_acc(v, w, 0.0, 1.0), b, |r, z| ilu.apply(r, z), &opts);
                x.copy_from_slice(&sol);
                rep.converged
            }
        }
    }
}

/// The preconditioner state for one Picard step: the shifted magnetic
/// operator `C + sigma M` and solvers for the four diagonal blocks.
pub struct PrecondContext {
    pub sigma: f64,
    pub variant: SchurVariant,
    pub config: SubSolverConfig,
    /// `(Re^-1 + gamma)`, the pressure block scaling.
    pub pressure_scale: f64,
    pub magnetic_op: SparseMatrix,
    magnetic: BlockSolver,
    multiplier: BlockSolver,
    schur: BlockSolver,
    pressure: BlockSolver,
    /// Sub-solves that stopped before reaching their tolerance.
    pub inexact_solves: Cell<usize>,
    pub applications: Cell<usize>,
}

/// Build the preconditioner for `sys`. `sigma` defaults to `S / Rm`
/// through `sys.params`.
pub fn build_precond(sys: &BlockSystem, variant: SchurVariant, config: SubSolverConfig) -> Result<PrecondContext> {
    let p = &sys.params;
    p.validate()?;
    let sigma = p.sigma();
    let magnetic_op = sys.c.add(1.0, &sys.m, sigma)?;
    let magnetic = BlockSolver::build(&magnetic_op, config.magnetic, true, "C + sigma M")?;
    let multiplier = BlockSolver::build(&sys.lr, config.multiplier, true, "Lr")?;
    let schur_mat = schur_matrix(sys, variant);
    let schur = BlockSolver::build(schur_mat, config.schur, false, schur_name(variant))?;
    let pressure = match config.pressure {
        SubSolverKind::Krylov => BlockSolver::Jacobi(Jacobi::new(&sys.qp)?),
        _ => BlockSolver::build(&sys.qp, SubSolverKind::Direct, true, "Qp")?,
    };
    Ok(PrecondContext {
        sigma,
        variant,
        config,
        pressure_scale: 1.0 / p.re + p.gamma,
        magnetic_op,
        magnetic,
        multiplier,
        schur,
        pressure,
        inexact_solves: Cell::new(0),
        applications: Cell::new(0),
    })
}

fn schur_matrix(sys: &BlockSystem, variant: SchurVariant) -> &SparseMatrix {
    match variant {
        SchurVariant::WithBubv => &sys.shat,
        SchurVariant::WithoutBubv => &sys.f,
    }
}

fn schur_name(variant: SchurVariant) -> &'static str {
    match variant {
        SchurVariant::WithBubv => "Shat",
        SchurVariant::WithoutBubv => "F",
    }
}

impl PrecondContext {
    /// The matrix used for the velocity block.
    pub fn schur_block<'s>(&self, sys: &'s BlockSystem) -> &'s SparseMatrix {
        schur_matrix(sys, self.variant)
    }

    /// Refactor the velocity block after `J`, `F`, `Shat` were reassembled;
    /// the state-independent blocks keep their factorizations.
    pub fn refresh(&mut self, sys: &BlockSystem) -> Result<()> {
        let m = schur_matrix(sys, self.variant);
        self.schur.refresh(m, self.config.schur, false, schur_name(self.variant))
    }

    fn count(&self, ok: bool) {
        if !ok {
            self.inexact_solves.set(self.inexact_solves.get() + 1);
        }
    }
}

/// One application `e = P r` by back substitution:
///
/// 1. `Qp e_p = -(1/Re + gamma) r_p`
/// 2. `S e_u = r_u - B' e_p`
/// 3. `Lr e_r = -sigma r_r`
/// 4. `(C + sigma M) e_b = r_b - J' e_u - G' e_r`
pub fn apply_precond(ctx: &PrecondContext, sys: &BlockSystem, r: &[f64], e: &mut [f64]) {
    let l = sys.layout;
    let cfg = &ctx.config;
    ctx.applications.set(ctx.applications.get() + 1);
    let (rb, rr, ru, rp) = l.split(r);
    let (eb, er, eu, ep) = l.split_mut(e);

    let rhs_p: Vec<f64> = rp.iter().map(|v| -ctx.pressure_scale * v).collect();
    ctx.count(ctx.pressure.solve(&sys.qp, &rhs_p, ep, cfg.eps0, cfg.max_inner));

    let mut rhs_u = ru.to_vec();
    sys.b.mul_transpose_acc(ep, &mut rhs_u, 1.0, -1.0);
    ctx.count(ctx.schur.solve(ctx.schur_block(sys), &rhs_u, eu, cfg.schur_tol, cfg.max_inner));

    let rhs_r: Vec<f64> = rr.iter().map(|v| -ctx.sigma * v).collect();
    ctx.count(ctx.multiplier.solve(&sys.lr, &rhs_r, er, cfg.eps0, cfg.max_inner));

    let mut rhs_b = rb.to_vec();
    sys.j.mul_transpose_acc(eu, &mut rhs_b, 1.0, -1.0);
    sys.g.mul_transpose_acc(er, &mut rhs_b, 1.0, -1.0);
    ctx.count(ctx.magnetic.solve(&ctx.magnetic_op, &rhs_b, eb, cfg.eps0, cfg.max_inner));
}

/// Multiply by the explicit block upper-triangular operator whose inverse
/// the preconditioner applies (with exact sub-solves).
pub fn apply_upper_triangular(ctx: &PrecondContext, sys: &BlockSystem, e: &[f64], y: &mut [f64]) {
    let l = sys.layout;
    let (eb, er, eu, ep) = l.split(e);
    let (yb, yr, yu, yp) = l.split_mut(y);
    ctx.magnetic_op.mul_acc(eb, yb, 0.0, 1.0);
    sys.g.mul_transpose_acc(er, yb, 1.0, 1.0);
    sys.j.mul_transpose_acc(eu, yb, 1.0, 1.0);
    sys.lr.mul_acc(er, yr, 0.0, -1.0 / ctx.sigma);
    ctx.schur_block(sys).mul_acc(eu, yu, 0.0, 1.0);
    sys.b.mul_transpose_acc(ep, yu, 1.0, 1.0);
    sys.qp.mul_acc(ep, yp, 0.0, -1.0 / ctx.pressure_scale);
}

/// Parameters of the magnetic-velocity coupling test problem.
#[derive(Debug, Clone, Copy)]
pub struct CouplingProblem {
    pub params: PhysParams,
    pub sigma: f64,
    pub variant: SchurVariant,
    pub tol: f64,
    pub maxit: usize,
    pub config: SubSolverConfig,
}

impl CouplingProblem {
    /// `Re = 1`, `gamma = 1.2`, FGMRES to `1e-6`, sub-solves to `1e-3`.
    pub fn new(s: f64, rm: f64, sigma: f64) -> Self {
        Self {
            params: PhysParams {
                re: 1.0,
                rm,
                s,
                gamma: 1.2,
                sigma: Some(sigma),
                theta: 1.0,
            },
            sigma,
            variant: SchurVariant::WithBubv,
            tol: 1e-6,
            maxit: 200,
            config: SubSolverConfig::default(),
        }
    }
}

pub fn coupling_forcing(x: &Point) -> Vec3 {
    [1.0, x[0].sin(), 0.0]
}

pub fn coupling_velocity(x: &Point) -> Vec3 {
    [x[1], (x[0] + x[2]).sin(), 1.0]
}

pub fn coupling_magnetic(x: &Point) -> Vec3 {
    [x[1].sin() + x[2].cos(), 1.0 - x[0].sin(), 1.0]
}

/// Solve `[[C + sigma M, J'], [-J, F]] (b, u) = (0, (f, v))` with frozen
/// fields `u0`, `B0` by FGMRES, preconditioned by
/// `S e_u = r_u`, `(C + sigma M) e_b = r_b - J' e_u`.
pub fn coupling_block_solve(disc: &Discretization, prob: &CouplingProblem) -> Result<KrylovReport> {
    let mut params = prob.params;
    params.sigma = Some(prob.sigma);
    params.validate()?;
    let mut state = MhdState::zeros(disc);
    state.u = interpolate_vector(&disc.mesh, &disc.velocity, coupling_velocity);
    state.b = interpolate_vector(&disc.mesh, &disc.magnetic, coupling_magnetic);
    let mut asm = Assembler::new(disc);
    let kinds = [BlockKind::C, BlockKind::M, BlockKind::J, BlockKind::F, BlockKind::Shat];
    let mut blocks = asm.assemble_blocks(&params, &state, &kinds)?.into_iter();
    let (c, m, j, f, shat) = (
        blocks.next().unwrap(),
        blocks.next().unwrap(),
        blocks.next().unwrap(),
        blocks.next().unwrap(),
        blocks.next().unwrap(),
    );
    let k = c.add(1.0, &m, prob.sigma)?;
    let schur = match prob.variant {
        SchurVariant::WithBubv => &shat,
        SchurVariant::WithoutBubv => &f,
    };
    let cfg = prob.config;
    let k_solver = BlockSolver::build(&k, cfg.magnetic, true, "C + sigma M")?;
    let s_solver = BlockSolver::build(schur, cfg.schur, false, schur_name(prob.variant))?;

    let (nb, nu) = (k.n_rows, f.n_rows);
    let zero = |_: &Point| [0.0; 3];
    let load = assemble_load(disc, &coupling_forcing, &zero)?;
    let mut rhs = vec![0.0; nb];
    rhs.extend_from_slice(&load);

    let apply_a = |x: &[f64], y: &mut [f64]| {
        let (xb, xu) = x.split_at(nb);
        let (yb, yu) = y.split_at_mut(nb);
        k.mul_acc(xb, yb, 0.0, 1.0);
        j.mul_transpose_acc(xu, yb, 1.0, 1.0);
        f.mul_acc(xu, yu, 0.0, 1.0);
        j.mul_acc(xb, yu, 1.0, -1.0);
    };
    let apply_m = |r: &[f64], z: &mut [f64]| {
        let (rb, ru) = r.split_at(nb);
        let (zb, zu) = z.split_at_mut(nb);
        s_solver.solve(schur, ru, zu, cfg.schur_tol, cfg.max_inner);
        let mut rhs_b = rb.to_vec();
        j.mul_transpose_acc(zu, &mut rhs_b, 1.0, -1.0);
        k_solver.solve(&k, &rhs_b, zb, cfg.eps0, cfg.max_inner);
    };
    debug_assert_eq!(rhs.len(), nb + nu);
    let opts = GmresOptions {
        tol: prob.tol,
        maxit: prob.maxit,
        restart: None,
    };
    let (_, report) = fgmres(apply_a, &rhs, apply_m, &opts);
    Ok(report)
}

/// Load vector `(f, v)` on free velocity DOFs.
fn assemble_load(disc: &Discretization, f: &dyn Fn(&Point) -> Vec3, zero: &dyn Fn(&Point) -> Vec3) -> Result<Vec<f64>> {
    let state = MhdState::zeros(disc);
    let res = crate::assembly::assemble_residuals(
        disc,
        &PhysParams::default(),
        &state,
        &crate::assembly::Sources {
            momentum: f,
            magnetic: Some(zero),
        },
    )?;
    Ok(res.ru)
}
