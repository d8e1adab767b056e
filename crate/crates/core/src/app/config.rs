//! Run configuration with a line-oriented `key = value` file format.
//!
//! ```text
//! # cavity study
//! levels = 4, 8
//! re = 100
//! precond.variant = both
//! precond.sigma = auto
//! tol.nonlinear = 1e-4
//! ```
//!
//! Keys are case-insensitive; `.` and `-` are interchangeable with `_`.

use std::path::{Path, PathBuf};

use serde::Serialize;

use super::problems::{cavity, ProblemKind};
use crate::assembly::PhysParams;
use crate::error::{MhdError, Result};
use crate::precond::{SchurVariant, SubSolverKind};
use crate::solver::SolverOptions;

/// Nonlinear tolerance of the manufactured-solution study. At `1e-4` the
/// algebraic error still dominates the pressure error on a `16^3` mesh.
pub const MANUFACTURED_NONLINEAR_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub problem: ProblemKind,
    pub levels: Vec<usize>,
    pub params: PhysParams,
    pub solver: SolverOptions,
    /// Cavity lid ramp width; `None` means one cell layer.
    pub lid_width: Option<f64>,
    /// Values of `S = Rm` in the coupling study.
    pub coupling_values: Vec<f64>,
    /// Shifts in the coupling study.
    pub sigmas: Vec<f64>,
    pub variants: Vec<SchurVariant>,
    pub out: PathBuf,
    pub vtk: bool,
    pub verbose: bool,
}

impl RunConfig {
    pub fn for_problem(problem: ProblemKind) -> Self {
        let base = Self {
            problem,
            levels: vec![4, 8, 16],
            params: PhysParams::default(),
            solver: SolverOptions::default(),
            lid_width: None,
            coupling_values: vec![1.0, 10.0, 100.0],
            sigmas: vec![1.0, 1e-2, 1e-4],
            variants: vec![SchurVariant::WithBubv],
            out: PathBuf::from("out"),
            vtk: false,
            verbose: false,
        };
        match problem {
            ProblemKind::Manufactured => Self {
                solver: SolverOptions {
                    nonlinear_tol: MANUFACTURED_NONLINEAR_TOL,
                    ..SolverOptions::default()
                },
                ..base
            },
            ProblemKind::Cavity => Self {
                levels: vec![8],
                params: cavity::params(),
                variants: vec![SchurVariant::WithBubv, SchurVariant::WithoutBubv],
                ..base
            },
            ProblemKind::CouplingBlock => Self {
                levels: vec![8, 16],
                params: PhysParams {
                    re: 1.0,
                    gamma: 1.2,
                    ..Default::default()
                },
                ..base
            },
        }
    }

    /// Defaults for the problem named in `file` (if any), then the file,
    /// then `overrides` in order.
    pub fn load(problem: ProblemKind, file: Option<&Path>, overrides: &[(String, String)]) -> Result<Self> {
        let mut cfg = Self::for_problem(problem);
        if let Some(path) = file {
            let text = std::fs::read_to_string(path)?;
            for (line, key, value) in parse_lines(&text)? {
                cfg.set(&key, &value)
                    .map_err(|e| MhdError::Parse(format!("{}:{line}: {e}", path.display())))?;
            }
        }
        for (k, v) in overrides {
            cfg.set(k, v)?;
        }
        cfg.params.validate()?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.levels.is_empty() || self.levels.contains(&0) {
            return Err(MhdError::InvalidArgument("mesh levels must be positive".into()));
        }
        if self.variants.is_empty() {
            return Err(MhdError::InvalidArgument("no preconditioner variant selected".into()));
        }
        let s = &self.solver;
        if !(s.nonlinear_tol > 0.0 && s.outer_tol > 0.0 && s.subsolver.eps0 > 0.0) {
            return Err(MhdError::InvalidArgument("tolerances must be positive".into()));
        }
        if let Some(w) = self.lid_width {
            if !(w > 0.0 && w <= 1.0) {
                return Err(MhdError::InvalidArgument("lid width must lie in (0, 1]".into()));
            }
        }
        Ok(())
    }

    /// Apply one setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = normalize_key(key);
        let value = value.trim();
        match key.as_str() {
            "problem" => {
                let problem: ProblemKind = value.parse()?;
                if problem != self.problem {
                    return Err(MhdError::InvalidArgument(format!(
                        "configuration is for '{problem}' but the run is '{}'",
                        self.problem
                    )));
                }
            }
            "n" => self.levels = vec![parse_num(&key, value)?],
            "levels" => self.levels = parse_list(&key, value)?,
            "re" => self.params.re = parse_num(&key, value)?,
            "rm" => self.params.rm = parse_num(&key, value)?,
            "s" => self.params.s = parse_num(&key, value)?,
            "gamma" => self.params.gamma = parse_num(&key, value)?,
            "theta" => self.params.theta = parse_num(&key, value)?,
            "sigma" => {
                self.params.sigma = match value {
                    "auto" => None,
                    v => Some(parse_num(&key, v)?),
                }
            }
            "variant" => {
                self.variants = match value {
                    "both" => vec![SchurVariant::WithBubv, SchurVariant::WithoutBubv],
                    v => vec![v.parse()?],
                }
            }
            "tol_nonlinear" => self.solver.nonlinear_tol = parse_num(&key, value)?,
            "tol_outer" => self.solver.outer_tol = parse_num(&key, value)?,
            "tol_inner" => {
                let t = parse_num(&key, value)?;
                self.solver.subsolver.eps0 = t;
                self.solver.subsolver.schur_tol = t;
            }
            "max_picard" => self.solver.max_picard = parse_num(&key, value)?,
            "max_outer" => self.solver.max_outer = parse_num(&key, value)?,
            "max_inner" => self.solver.subsolver.max_inner = parse_num(&key, value)?,
            "restart" => {
                self.solver.restart = match value {
                    "none" | "0" => None,
                    v => Some(parse_num(&key, v)?),
                }
            }
            "schur_solver" => self.solver.subsolver.schur = parse_subsolver(value)?,
            "magnetic_solver" => self.solver.subsolver.magnetic = parse_subsolver(value)?,
            "multiplier_solver" => self.solver.subsolver.multiplier = parse_subsolver(value)?,
            "pressure_solver" => self.solver.subsolver.pressure = parse_subsolver(value)?,
            "lid_width" => {
                self.lid_width = match value {
                    "auto" => None,
                    v => Some(parse_num(&key, v)?),
                }
            }
            "coupling_values" => self.coupling_values = parse_list(&key, value)?,
            "sigmas" | "coupling_sigmas" => self.sigmas = parse_list(&key, value)?,
            "out" => self.out = PathBuf::from(value),
            "vtk" => self.vtk = parse_bool(&key, value)?,
            "verbose" => self.verbose = parse_bool(&key, value)?,
            _ => return Err(MhdError::Parse(format!("unknown configuration key '{key}'"))),
        }
        Ok(())
    }
}

/// Canonical key: lower case, separators folded to `_`, optional section
/// prefixes dropped (`precond.sigma` and `sigma` are the same key).
fn normalize_key(key: &str) -> String {
    let k = key.trim().to_ascii_lowercase().replace(['.', '-'], "_");
    for prefix in ["precond_", "physics_", "mesh_", "cavity_", "coupling_study_", "output_"] {
        if let Some(rest) = k.strip_prefix(prefix) {
            return rest.to_string();
        }
    }
    k
}

/// Split a config text into `(line number, key, value)` triples. Blank
/// lines and `#` comments are skipped.
pub fn parse_lines(text: &str) -> Result<Vec<(usize, String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| MhdError::Parse(format!("line {}: expected 'key = value', got '{line}'", i + 1)))?;
        if k.trim().is_empty() {
            return Err(MhdError::Parse(format!("line {}: empty key", i + 1)));
        }
        out.push((i + 1, k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| MhdError::Parse(format!("{key}: cannot parse '{v}'")))
}

fn parse_list<T: std::str::FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',').map(|s| parse_num(key, s.trim())).collect()
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(MhdError::Parse(format!("{key}: expected a boolean, got '{v}'"))),
    }
}

fn parse_subsolver(v: &str) -> Result<SubSolverKind> {
    match v {
        "direct" => Ok(SubSolverKind::Direct),
        "krylov" => Ok(SubSolverKind::Krylov),
        "auto" => Ok(SubSolverKind::Auto),
        _ => Err(MhdError::Parse(format!("unknown sub-solver '{v}' (direct | krylov | auto)"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_then_overrides() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        std::fs::write(
            &path,
            "# comment\nlevels = 4, 8\nprecond.sigma = 1e-4\nPrecond.Variant = both\n\ntol-nonlinear = 1e-5 # trailing\n",
        )
        .unwrap();
        let cfg = RunConfig::load(
            ProblemKind::Cavity,
            Some(&path),
            &[("n".into(), "2".into()), ("sigma".into(), "auto".into())],
        )
        .unwrap();
        assert_eq!(cfg.levels, vec![2]);
        assert_eq!(cfg.params.sigma, None);
        assert_eq!(cfg.params.re, 100.0);
        assert_eq!(cfg.variants.len(), 2);
        assert_eq!(cfg.solver.nonlinear_tol, 1e-5);
    }

    #[test]
    fn bad_input_is_reported_with_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.cfg");
        std::fs::write(&path, "re = 1\nre: 2\n").unwrap();
        let err = RunConfig::load(ProblemKind::Manufactured, Some(&path), &[]).unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
        std::fs::write(&path, "colour = red\n").unwrap();
        let err = RunConfig::load(ProblemKind::Manufactured, Some(&path), &[]).unwrap_err();
        assert!(err.to_string().contains("bad.cfg:1"), "{err}");
        assert!(RunConfig::load(ProblemKind::Manufactured, None, &[("theta".into(), "2".into())]).is_err());
        assert!(RunConfig::load(ProblemKind::Manufactured, None, &[("problem".into(), "cavity".into())]).is_err());
    }

    #[test]
    fn problem_defaults() {
        let c = RunConfig::for_problem(ProblemKind::CouplingBlock);
        assert_eq!((c.params.re, c.params.gamma), (1.0, 1.2));
        assert_eq!(c.levels, vec![8, 16]);
        let c = RunConfig::for_problem(ProblemKind::Cavity);
        assert_eq!((c.params.re, c.params.s, c.params.rm, c.params.gamma), (100.0, 100.0, 1.0, 1.5));
    }
}
