//! Picard iteration for the stationary MHD system.

use crate::Instant;

use serde::Serialize;

use crate::assembly::{assemble_residuals, Assembler, BlockSystem, Discretization, MhdState, PhysParams, Residuals, Sources};
use crate::error::{MhdError, Result};
use crate::geometry::{Point, Vec3};
use crate::precond::{apply_precond, build_precond, PrecondContext, SchurVariant, SubSolverConfig};
use crate::sparse::{fgmres, GmresOptions, KrylovReport};

/// Volume sources and Dirichlet data of a boundary value problem.
pub struct ProblemData<'a> {
    pub momentum: &'a dyn Fn(&Point) -> Vec3,
    /// Source in the induction equation; `None` for physical problems.
    pub magnetic: Option<&'a dyn Fn(&Point) -> Vec3>,
    pub velocity_bc: &'a dyn Fn(&Point) -> Vec3,
    pub magnetic_bc: &'a dyn Fn(&Point) -> Vec3,
}

impl ProblemData<'_> {
    fn sources(&self) -> Sources<'_> {
        Sources {
            momentum: self.momentum,
            magnetic: self.magnetic,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct SolverOptions {
    /// Relative nonlinear residual at which Picard stops.
    pub nonlinear_tol: f64,
    /// Relative residual of each outer FGMRES solve.
    pub outer_tol: f64,
    pub max_picard: usize,
    pub max_outer: usize,
    pub restart: Option<usize>,
    /// Consecutive residual increases treated as divergence.
    pub divergence_window: usize,
    pub variant: SchurVariant,
    pub subsolver: SubSolverConfig,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            nonlinear_tol: 1e-4,
            outer_tol: 1e-6,
            max_picard: 30,
            max_outer: 200,
            restart: None,
            divergence_window: 3,
            variant: SchurVariant::WithBubv,
            subsolver: SubSolverConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NonlinearStatus {
    Converged,
    MaxSteps,
    Diverged,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct PhaseTimes {
    pub assembly: f64,
    pub preconditioner: f64,
    pub krylov: f64,
}

/// Progress record emitted after every Picard step.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepRecord {
    pub step: usize,
    pub gmres_iterations: usize,
    pub gmres_converged: bool,
    pub gmres_residual: f64,
    pub nonlinear_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NonlinearReport {
    pub status: NonlinearStatus,
    pub picard_iterations: usize,
    pub gmres_iterations: Vec<usize>,
    /// `||R(x_k)|| / ||R(x_0)||` after each step.
    pub residuals: Vec<f64>,
    pub initial_residual: f64,
    pub average_gmres: f64,
    /// Outer solves that hit the iteration cap.
    pub unconverged_linear_solves: usize,
    /// Inner block solves that stopped short of their tolerance.
    pub inexact_subsolves: usize,
    pub times: PhaseTimes,
}

impl NonlinearReport {
    pub fn converged(&self) -> bool {
        self.status == NonlinearStatus::Converged
    }

    /// Turn a failed run into the matching error.
    pub fn check(&self) -> Result<()> {
        let last = self.residuals.last().copied().unwrap_or(f64::NAN);
        match self.status {
            NonlinearStatus::Converged => Ok(()),
            NonlinearStatus::MaxSteps => Err(MhdError::NonlinearNotConverged {
                steps: self.picard_iterations,
                residual: last,
            }),
            NonlinearStatus::Diverged => Err(MhdError::NonlinearDivergence {
                step: self.picard_iterations,
                residual: last,
            }),
        }
    }
}

/// Remove the constant component of the pressure residual. Constants span
/// the kernel of `B'` when the velocity is prescribed on the whole
/// boundary, so only the zero-sum part is attainable.
fn project_pressure_residual(res: &mut Residuals) {
    let n = res.rp.len() as f64;
    let mean = res.rp.iter().sum::<f64>() / n;
    res.rp.iter_mut().for_each(|v| *v -= mean);
}

/// Shift a pressure vector (or correction) to zero mean in the `L2` sense.
pub fn project_pressure_mean(sys: &BlockSystem, p: &mut [f64]) {
    let weights = sys.qp.spmv_transpose(&vec![1.0; p.len()]).expect("pressure mass dimension");
    let volume: f64 = weights.iter().sum();
    let mean = weights.iter().zip(p.iter()).map(|(w, v)| w * v).sum::<f64>() / volume;
    p.iter_mut().for_each(|v| *v -= mean);
}

/// One outer FGMRES solve of the linearized system, right-preconditioned
/// by `ctx`, followed by the pressure mean projection.
pub fn solve_linearized(sys: &BlockSystem, rhs: &[f64], ctx: &PrecondContext, opts: &SolverOptions) -> (Vec<f64>, KrylovReport) {
    let gopts = GmresOptions {
        tol: opts.outer_tol,
        maxit: opts.max_outer,
        restart: opts.restart,
    };
    let (mut x, report) = fgmres(|v, w| sys.apply(v, w), rhs, |r, z| apply_precond(ctx, sys, r, z), &gopts);
    let (_, _, _, dp) = sys.layout.split_mut(&mut x);
    project_pressure_mean(sys, dp);
    (x, report)
}

/// Apply `theta * delta` to the free DOFs of `state`.
pub fn update_state(disc: &Discretization, state: &mut MhdState, delta: &[f64], theta: f64) -> Result<()> {
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(MhdError::InvalidArgument(format!("relaxation {theta} outside (0, 1]")));
    }
    state.add_free(disc, delta, theta)
}

/// Picard iteration from the boundary-lifted zero state. At least one
/// linear solve is performed; the run stops when the relative nonlinear
/// residual drops below `opts.nonlinear_tol`, after `opts.max_picard`
/// steps, or when the residual grows `opts.divergence_window` times in a
/// row. `progress` sees a record after every step.
pub fn picard_solve(
    disc: &Discretization,
    params: &PhysParams,
    data: &ProblemData,
    opts: &SolverOptions,
    progress: Option<&mut dyn FnMut(&StepRecord)>,
) -> Result<(MhdState, NonlinearReport)> {
    let state = MhdState::from_boundary_data(disc, data.velocity_bc, data.magnetic_bc);
    picard_solve_from(disc, params, data, opts, state, progress)
}

/// Picard iteration from a given initial state; its boundary values are
/// replaced by the Dirichlet data.
pub fn picard_solve_from(
    disc: &Discretization,
    params: &PhysParams,
    data: &ProblemData,
    opts: &SolverOptions,
    initial: MhdState,
    mut progress: Option<&mut dyn FnMut(&StepRecord)>,
) -> Result<(MhdState, NonlinearReport)> {
    params.validate()?;
    if opts.max_picard == 0 {
        return Err(MhdError::InvalidArgument("at least one Picard step is required".into()));
    }
    let layout = disc.layout();
    let mut times = PhaseTimes::default();

    let mut state = initial;
    for (field, map) in [(&state.u, &disc.velocity), (&state.b, &disc.magnetic), (&state.r, &disc.multiplier), (&state.p, &disc.pressure)] {
        field.check(map)?;
    }
    state.set_boundary(disc, data.velocity_bc, data.magnetic_bc);
    let t = Instant::now();
    let mut asm = Assembler::new(disc);
    let mut sys = asm.assemble_system(params, &state)?;
    let mut res = assemble_residuals(disc, params, &state, &data.sources())?;
    project_pressure_residual(&mut res);
    clock(&mut times.assembly, t);

    let t = Instant::now();
    let mut ctx = build_precond(&sys, opts.variant, opts.subsolver)?;
    clock(&mut times.preconditioner, t);

    let initial = res.norm();
    let scale = if initial > 0.0 { initial } else { 1.0 };
    let mut report = NonlinearReport {
        status: NonlinearStatus::MaxSteps,
        picard_iterations: 0,
        gmres_iterations: Vec::new(),
        residuals: Vec::new(),
        initial_residual: initial,
        average_gmres: 0.0,
        unconverged_linear_solves: 0,
        inexact_subsolves: 0,
        times: PhaseTimes::default(),
    };
    let mut increases = 0;
    let mut previous = 1.0;

    for step in 1..=opts.max_picard {
        if step > 1 {
            let t = Instant::now();
            asm.update_system(&mut sys, &state)?;
            clock(&mut times.assembly, t);
            let t = Instant::now();
            ctx.refresh(&sys)?;
            clock(&mut times.preconditioner, t);
        }
        let rhs = res.to_vector(&layout);
        let t = Instant::now();
        let (delta, lin) = solve_linearized(&sys, &rhs, &ctx, opts);
        clock(&mut times.krylov, t);
        update_state(disc, &mut state, &delta, params.theta)?;

        let t = Instant::now();
        res = assemble_residuals(disc, params, &state, &data.sources())?;
        project_pressure_residual(&mut res);
        clock(&mut times.assembly, t);

        let rel = res.norm() / scale;
        report.picard_iterations = step;
        report.gmres_iterations.push(lin.iterations);
        report.residuals.push(rel);
        if !lin.converged {
            report.unconverged_linear_solves += 1;
        }
        if let Some(cb) = progress.as_mut() {
            cb(&StepRecord {
                step,
                gmres_iterations: lin.iterations,
                gmres_converged: lin.converged,
                gmres_residual: lin.final_residual(),
                nonlinear_residual: rel,
            });
        }
        if rel <= opts.nonlinear_tol || res.norm() == 0.0 {
            report.status = NonlinearStatus::Converged;
            break;
        }
        if !rel.is_finite() {
            report.status = NonlinearStatus::Diverged;
            break;
        }
        increases = if rel > previous { increases + 1 } else { 0 };
        previous = rel;
        if increases >= opts.divergence_window {
            report.status = NonlinearStatus::Diverged;
            break;
        }
    }
    report.average_gmres = mean(&report.gmres_iterations);
    report.inexact_subsolves = ctx.inexact_solves.get();
    report.times = times;
    Ok((state, report))
}

fn clock(slot: &mut f64, start: Instant) {
    *slot += start.elapsed().as_secs_f64();
}

fn mean(v: &[usize]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<usize>() as f64 / v.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::p1_mean;

    fn zero(_: &Point) -> Vec3 {
        [0.0; 3]
    }

    #[test]
    fn zero_data_converges_in_one_step() {
        let disc = Discretization::unit_cube(2).unwrap();
        let data = ProblemData {
            momentum: &zero,
            magnetic: None,
            velocity_bc: &zero,
            magnetic_bc: &zero,
        };
        let (state, report) = picard_solve(&disc, &PhysParams::default(), &data, &SolverOptions::default(), None).unwrap();
        assert_eq!(report.picard_iterations, 1);
        assert!(report.converged());
        assert!(state.u.coeffs.iter().chain(&state.b.coeffs).all(|&v| v == 0.0));
    }

    #[test]
    fn stokes_like_flow_converges_with_progress() {
        let disc = Discretization::unit_cube(2).unwrap();
        let force = |x: &Point| [x[1].sin(), 0.0, x[0]];
        let b_s = |_: &Point| [1.0, 0.0, 0.0];
        let data = ProblemData {
            momentum: &force,
            magnetic: None,
            velocity_bc: &zero,
            magnetic_bc: &b_s,
        };
        let mut steps = Vec::new();
        let mut cb = |r: &StepRecord| steps.push(r.clone());
        let (state, report) = picard_solve(&disc, &PhysParams::default(), &data, &SolverOptions::default(), Some(&mut cb)).unwrap();
        report.check().unwrap();
        assert_eq!(steps.len(), report.picard_iterations);
        assert_eq!(report.gmres_iterations.len(), report.residuals.len());
        assert!(*report.residuals.last().unwrap() <= 1e-4);
        let avg = report.gmres_iterations.iter().sum::<usize>() as f64 / report.gmres_iterations.len() as f64;
        assert_eq!(report.average_gmres, avg);
        assert!(p1_mean(&disc.mesh, &state.p.coeffs).abs() < 1e-10);
    }

    #[test]
    fn relaxation_is_validated() {
        let disc = Discretization::unit_cube(1).unwrap();
        let mut state = MhdState::zeros(&disc);
        let delta = vec![1.0; disc.layout().total()];
        assert!(update_state(&disc, &mut state, &delta, 0.0).is_err());
        assert!(update_state(&disc, &mut state, &delta, 1.5).is_err());
        update_state(&disc, &mut state, &delta, 0.5).unwrap();
        let free = disc.velocity.free_dofs[0];
        assert_eq!(state.u.coeffs[free], 0.5);
    }

    #[test]
    fn status_maps_to_errors() {
        let mut r = NonlinearReport {
            status: NonlinearStatus::Diverged,
            picard_iterations: 4,
            gmres_iterations: vec![1; 4],
            residuals: vec![1.0, 2.0, 3.0, 4.0],
            initial_residual: 1.0,
            average_gmres: 1.0,
            unconverged_linear_solves: 0,
            inexact_subsolves: 0,
            times: PhaseTimes::default(),
        };
        assert!(matches!(r.check(), Err(MhdError::NonlinearDivergence { step: 4, .. })));
        r.status = NonlinearStatus::MaxSteps;
        assert!(matches!(r.check(), Err(MhdError::NonlinearNotConverged { .. })));
    }
}
