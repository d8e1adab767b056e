//! Experiment drivers producing CSV tables with a JSON config sidecar.

use std::path::{Path, PathBuf};
use crate::Instant;

use serde::Serialize;

use super::config::RunConfig;
use super::export::{export_vtk, point_fields};
use super::problems::{cavity, manufactured};
use crate::assembly::Discretization;
use crate::error::{MhdError, Result};
use crate::geometry::norm;
use crate::precond::{coupling_block_solve, CouplingProblem, SchurVariant};
use crate::solver::{picard_solve, NonlinearReport, ProblemData, StepRecord};
use crate::space::{error_norms, ExactField};

/// Longest edge of a cell in the `n^3` Freudenthal mesh of the unit cube.
pub fn mesh_size(n: usize) -> f64 {
    3f64.sqrt() / n as f64
}

/// `log2(coarse / fine)`; meaningful for consecutive halvings of `h`.
pub fn observed_order(coarse: f64, fine: f64) -> f64 {
    (coarse / fine).log2()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub h: f64,
    pub dofs_magnetic: usize,
    pub dofs_flow: usize,
    pub u_h1: f64,
    pub order_u: Option<f64>,
    pub p_l2: f64,
    pub order_p: Option<f64>,
    pub b_hcurl: f64,
    pub order_b: Option<f64>,
    pub picard_iterations: usize,
    pub average_gmres: f64,
    pub converged: bool,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CavityRow {
    pub n: usize,
    pub h: f64,
    pub variant: SchurVariant,
    pub picard_iterations: usize,
    pub average_gmres: f64,
    /// `N_picard x N_gmres`, prefixed with `>` when a solve hit the cap.
    pub summary: String,
    pub gmres_per_step: String,
    pub capped_solves: usize,
    pub final_residual: f64,
    pub converged: bool,
    pub max_velocity: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CouplingRow {
    pub n: usize,
    pub h: f64,
    pub s_rm: f64,
    pub sigma: f64,
    pub variant: SchurVariant,
    pub iterations: usize,
    pub converged: bool,
    pub final_residual: f64,
    pub seconds: f64,
}

/// Rows of one experiment; `failure` is set when a run aborted early.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport<R> {
    pub name: String,
    pub rows: Vec<R>,
    pub failure: Option<String>,
}

impl<R: Serialize> ExperimentReport<R> {
    /// Write `<name>.csv` and `<name>.config.json` into `dir`.
    pub fn write(&self, dir: &Path, config: &RunConfig) -> Result<PathBuf> {
        std::fs::create_dir_all(dir)?;
        let csv_path = dir.join(format!("{}.csv", self.name));
        let mut w = csv::Writer::from_path(&csv_path)?;
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.flush()?;
        let sidecar = serde_json::json!({
            "experiment": self.name,
            "config": config,
            "failure": self.failure,
        });
        std::fs::write(dir.join(format!("{}.config.json", self.name)), serde_json::to_string_pretty(&sidecar)?)?;
        Ok(csv_path)
    }
}

fn progress_printer(verbose: bool, context: serde_json::Value) -> impl FnMut(&StepRecord) {
    move |r: &StepRecord| {
        if verbose {
            let mut v = serde_json::to_value(r).unwrap_or_default();
            if let (Some(obj), Some(ctx)) = (v.as_object_mut(), context.as_object()) {
                obj.extend(ctx.clone());
            }
            println!("{v}");
        }
    }
}

/// Solve the manufactured problem on one level.
pub fn solve_manufactured(cfg: &RunConfig, n: usize) -> Result<(Discretization, crate::assembly::MhdState, NonlinearReport)> {
    let disc = Discretization::unit_cube(n)?;
    let f = manufactured::momentum_source(&cfg.params);
    let g = manufactured::magnetic_source(&cfg.params);
    let data = ProblemData {
        momentum: &f,
        magnetic: Some(&g),
        velocity_bc: &manufactured::velocity,
        magnetic_bc: &manufactured::magnetic,
    };
    let mut cb = progress_printer(cfg.verbose, serde_json::json!({"problem": "manufactured", "n": n}));
    let mut opts = cfg.solver;
    opts.variant = cfg.variants[0];
    let (state, report) = picard_solve(&disc, &cfg.params, &data, &opts, Some(&mut cb))?;
    Ok((disc, state, report))
}

/// Error table for the manufactured solution over `cfg.levels`.
pub fn run_convergence(cfg: &RunConfig) -> ExperimentReport<ConvergenceRow> {
    let mut report = ExperimentReport {
        name: "convergence".to_string(),
        rows: Vec::new(),
        failure: None,
    };
    for &n in &cfg.levels {
        let start = Instant::now();
        let outcome = solve_manufactured(cfg, n).and_then(|(disc, state, nl)| {
            let vel = ExactField::Vector {
                value: &manufactured::velocity,
                jacobian: Some(&manufactured::velocity_jacobian),
            };
            let pre = ExactField::Scalar {
                value: &manufactured::pressure,
                grad: None,
            };
            let mag = ExactField::Curl {
                value: &manufactured::magnetic,
                curl: Some(&manufactured::magnetic_curl),
            };
            let eu = error_norms(&disc.mesh, &disc.velocity, &state.u, &vel)?;
            let ep = error_norms(&disc.mesh, &disc.pressure, &state.p, &pre)?;
            let eb = error_norms(&disc.mesh, &disc.magnetic, &state.b, &mag)?;
            Ok((disc, nl, eu.full, ep.l2, eb.full))
        });
        match outcome {
            Ok((disc, nl, u_h1, p_l2, b_hcurl)) => {
                let prev = report.rows.last();
                let order = |f: fn(&ConvergenceRow) -> f64, e: f64| prev.map(|r| observed_order(f(r), e));
                let row = ConvergenceRow {
                    n,
                    h: mesh_size(n),
                    dofs_magnetic: disc.magnetic.n_dofs + disc.multiplier.n_dofs,
                    dofs_flow: disc.velocity.n_dofs + disc.pressure.n_dofs,
                    u_h1,
                    order_u: order(|r| r.u_h1, u_h1),
                    p_l2,
                    order_p: order(|r| r.p_l2, p_l2),
                    b_hcurl,
                    order_b: order(|r| r.b_hcurl, b_hcurl),
                    picard_iterations: nl.picard_iterations,
                    average_gmres: nl.average_gmres,
                    converged: nl.converged(),
                    seconds: start.elapsed().as_secs_f64(),
                };
                let ok = row.converged;
                report.rows.push(row);
                if !ok {
                    report.failure = Some(format!("level n={n}: {}", nl.check().unwrap_err()));
                    break;
                }
            }
            Err(e) => {
                report.failure = Some(format!("level n={n}: {e}"));
                break;
            }
        }
    }
    report
}

/// Picard runs on the lid-driven cavity for every level and variant.
/// Solutions are written as VTK when `cfg.vtk` is set.
pub fn run_cavity(cfg: &RunConfig) -> ExperimentReport<CavityRow> {
    let mut report = ExperimentReport {
        name: "cavity".to_string(),
        rows: Vec::new(),
        failure: None,
    };
    for &n in &cfg.levels {
        let disc = match Discretization::unit_cube(n) {
            Ok(d) => d,
            Err(e) => {
                report.failure = Some(format!("level n={n}: {e}"));
                break;
            }
        };
        let width = cfg.lid_width.unwrap_or_else(|| cavity::default_lid_width(n));
        let g = cavity::boundary_velocity(width);
        let data = ProblemData {
            momentum: &cavity::forcing,
            magnetic: None,
            velocity_bc: &g,
            magnetic_bc: &cavity::boundary_magnetic,
        };
        for &variant in &cfg.variants {
            let start = Instant::now();
            let mut opts = cfg.solver;
            opts.variant = variant;
            let mut cb = progress_printer(cfg.verbose, serde_json::json!({"problem": "cavity", "n": n, "variant": variant}));
            let run = picard_solve(&disc, &cfg.params, &data, &opts, Some(&mut cb)).and_then(|(state, nl)| {
                let fields = point_fields(&disc, &state)?;
                let max_velocity = fields.velocity.iter().map(norm).fold(0.0, f64::max);
                if cfg.vtk {
                    std::fs::create_dir_all(&cfg.out)?;
                    export_vtk(&disc, &state, cfg.out.join(format!("cavity_n{n}_{variant}.vtk")))?;
                }
                Ok((nl, max_velocity))
            });
            match run {
                Ok((nl, max_velocity)) => {
                    let capped = nl.unconverged_linear_solves;
                    report.rows.push(CavityRow {
                        n,
                        h: mesh_size(n),
                        variant,
                        picard_iterations: nl.picard_iterations,
                        average_gmres: nl.average_gmres,
                        summary: format!(
                            "{}{} x {:.1}",
                            if capped > 0 { ">" } else { "" },
                            nl.picard_iterations,
                            nl.average_gmres
                        ),
                        gmres_per_step: nl.gmres_iterations.iter().map(|g| g.to_string()).collect::<Vec<_>>().join(";"),
                        capped_solves: capped,
                        final_residual: nl.residuals.last().copied().unwrap_or(f64::NAN),
                        converged: nl.converged(),
                        max_velocity,
                        seconds: start.elapsed().as_secs_f64(),
                    });
                }
                Err(e) => {
                    report.failure = Some(format!("level n={n}, {variant}: {e}"));
                }
            }
        }
    }
    if report.failure.is_none() {
        if let Some(r) = report.rows.iter().find(|r| !r.converged) {
            report.failure = Some(format!("level n={}, {}: Picard did not converge", r.n, r.variant));
        }
    }
    report
}

/// Iteration counts of the coupling-block solve over the grid
/// `levels x coupling_values x sigmas x variants`. Failed cells are
/// recorded and the sweep continues.
pub fn run_coupling_study(cfg: &RunConfig) -> ExperimentReport<CouplingRow> {
    let mut report = ExperimentReport {
        name: "coupling".to_string(),
        rows: Vec::new(),
        failure: None,
    };
    let mut failures = Vec::new();
    for &n in &cfg.levels {
        let disc = match Discretization::unit_cube(n) {
            Ok(d) => d,
            Err(e) => {
                failures.push(format!("n={n}: {e}"));
                continue;
            }
        };
        for &srm in &cfg.coupling_values {
            for &sigma in &cfg.sigmas {
                for &variant in &cfg.variants {
                    let mut prob = CouplingProblem::new(srm, srm, sigma);
                    prob.params.re = cfg.params.re;
                    prob.params.gamma = cfg.params.gamma;
                    prob.variant = variant;
                    prob.tol = cfg.solver.outer_tol;
                    prob.maxit = cfg.solver.max_outer;
                    prob.config = cfg.solver.subsolver;
                    let start = Instant::now();
                    match coupling_block_solve(&disc, &prob) {
                        Ok(k) => {
                            if !k.converged {
                                failures.push(format!("n={n}, S=Rm={srm}, sigma={sigma}, {variant}: no convergence"));
                            }
                            let row = CouplingRow {
                                n,
                                h: mesh_size(n),
                                s_rm: srm,
                                sigma,
                                variant,
                                iterations: k.iterations,
                                converged: k.converged,
                                final_residual: k.final_residual(),
                                seconds: start.elapsed().as_secs_f64(),
                            };
                            if cfg.verbose {
                                println!("{}", serde_json::to_string(&row).unwrap_or_default());
                            }
                            report.rows.push(row);
                        }
                        Err(e) => failures.push(format!("n={n}, S=Rm={srm}, sigma={sigma}, {variant}: {e}")),
                    }
                }
            }
        }
    }
    if !failures.is_empty() {
        report.failure = Some(failures.join("; "));
    }
    report
}

/// Table layout of the coupling study for one `(sigma, variant)`: one row
/// per mesh, one column per `S = Rm`. Returns the CSV text.
pub fn coupling_pivot(rows: &[CouplingRow], sigma: f64, variant: SchurVariant) -> Result<String> {
    let mut levels: Vec<usize> = rows.iter().map(|r| r.n).collect();
    levels.dedup();
    let mut values: Vec<f64> = Vec::new();
    for r in rows {
        if !values.contains(&r.s_rm) {
            values.push(r.s_rm);
        }
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["h".to_string()];
    header.extend(values.iter().map(|v| format!("S=Rm={v}")));
    w.write_record(&header)?;
    for n in levels {
        let mut rec = vec![format!("{:.6}", mesh_size(n))];
        for v in &values {
            let cell = rows
                .iter()
                .find(|r| r.n == n && r.s_rm == *v && r.sigma == sigma && r.variant == variant)
                .map(|r| if r.converged { r.iterations.to_string() } else { format!(">{}", r.iterations) })
                .unwrap_or_default();
            rec.push(cell);
        }
        w.write_record(&rec)?;
    }
    let bytes = w.into_inner().map_err(|e| MhdError::InvalidArgument(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Write the per-`(sigma, variant)` table files of a coupling study.
pub fn write_coupling_tables(report: &ExperimentReport<CouplingRow>, cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(&cfg.out)?;
    let mut paths = Vec::new();
    for &sigma in &cfg.sigmas {
        for &variant in &cfg.variants {
            let path = cfg.out.join(format!("coupling_sigma{sigma:e}_{variant}.csv"));
            std::fs::write(&path, coupling_pivot(&report.rows, sigma, variant)?)?;
            paths.push(path);
        }
    }
    Ok(paths)
}

/// Single Picard run of the selected problem; used by the `solve` command.
pub fn solve_single(cfg: &RunConfig) -> Result<(NonlinearReport, Option<PathBuf>)> {
    let n = cfg.levels[0];
    let (disc, state, nl) = match cfg.problem {
        super::problems::ProblemKind::Manufactured => solve_manufactured(cfg, n)?,
        super::problems::ProblemKind::Cavity => {
            let disc = Discretization::unit_cube(n)?;
            let width = cfg.lid_width.unwrap_or_else(|| cavity::default_lid_width(n));
            let g = cavity::boundary_velocity(width);
            let data = ProblemData {
                momentum: &cavity::forcing,
                magnetic: None,
                velocity_bc: &g,
                magnetic_bc: &cavity::boundary_magnetic,
            };
            let mut opts = cfg.solver;
            opts.variant = cfg.variants[0];
            let mut cb = progress_printer(cfg.verbose, serde_json::json!({"problem": "cavity", "n": n}));
            let (state, nl) = picard_solve(&disc, &cfg.params, &data, &opts, Some(&mut cb))?;
            (disc, state, nl)
        }
        super::problems::ProblemKind::CouplingBlock => {
            return Err(MhdError::InvalidArgument(
                "the coupling block is a linear test; use the coupling study".into(),
            ))
        }
    };
    let path = if cfg.vtk {
        std::fs::create_dir_all(&cfg.out)?;
        let p = cfg.out.join(format!("{}_n{n}.vtk", cfg.problem));
        export_vtk(&disc, &state, &p)?;
        Some(p)
    } else {
        None
    };
    Ok((nl, path))
}
