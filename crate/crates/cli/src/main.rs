use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mhd_core::app::{
    run_cavity, run_convergence, run_coupling_study, solve_single, write_coupling_tables, ExperimentReport, ProblemKind,
    RunConfig,
};

#[derive(Parser)]
#[command(name = "mhd", version, about = "Stationary incompressible MHD solver and experiment driver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Error table for the manufactured smooth solution.
    Convergence(Common),
    /// Lid-driven cavity Picard runs for each preconditioner variant.
    Cavity(Common),
    /// Iteration counts of the magnetic-velocity coupling block.
    Coupling(Common),
    /// A single nonlinear solve (manufactured or cavity).
    Solve {
        #[arg(long, default_value = "manufactured")]
        problem: ProblemKind,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args, Default)]
struct Common {
    /// Configuration file with `key = value` lines; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Single mesh level (cells per cube edge).
    #[arg(long)]
    n: Option<usize>,
    /// Comma-separated mesh levels.
    #[arg(long)]
    levels: Option<String>,
    #[arg(long)]
    re: Option<f64>,
    #[arg(long)]
    rm: Option<f64>,
    #[arg(long)]
    s: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    /// Picard relaxation in (0, 1].
    #[arg(long)]
    theta: Option<f64>,
    /// Preconditioner shift: `auto` (S/Rm) or a number.
    #[arg(long)]
    sigma: Option<String>,
    /// with_bubv, without_bubv or both.
    #[arg(long)]
    variant: Option<String>,
    #[arg(long)]
    tol_nonlinear: Option<f64>,
    #[arg(long)]
    tol_outer: Option<f64>,
    /// Tolerance of the inner block solves.
    #[arg(long)]
    tol_inner: Option<f64>,
    /// Output directory for CSV, JSON and VTK files.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write solution fields as VTK.
    #[arg(long)]
    vtk: bool,
    /// Print JSON-lines progress records on standard output.
    #[arg(long)]
    verbose: bool,
    /// Any other configuration key, as `key=value`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl Common {
    fn overrides(&self) -> Result<Vec<(String, String)>, String> {
        let mut o: Vec<(String, String)> = Vec::new();
        let mut push = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                o.push((k.to_string(), v));
            }
        };
        push("levels", self.levels.clone());
        push("n", self.n.map(|v| v.to_string()));
        push("re", self.re.map(|v| v.to_string()));
        push("rm", self.rm.map(|v| v.to_string()));
        push("s", self.s.map(|v| v.to_string()));
        push("gamma", self.gamma.map(|v| v.to_string()));
        push("theta", self.theta.map(|v| v.to_string()));
        push("sigma", self.sigma.clone());
        push("variant", self.variant.clone());
        push("tol_nonlinear", self.tol_nonlinear.map(|v| v.to_string()));
        push("tol_outer", self.tol_outer.map(|v| v.to_string()));
        push("tol_inner", self.tol_inner.map(|v| v.to_string()));
        push("out", self.out.as_ref().map(|p| p.display().to_string()));
        if self.vtk {
            push("vtk", Some("true".into()));
        }
        if self.verbose {
            push("verbose", Some("true".into()));
        }
        for kv in &self.set {
            let (k, v) = kv.split_once('=').ok_or_else(|| format!("--set expects KEY=VALUE, got '{kv}'"))?;
            o.push((k.trim().to_string(), v.trim().to_string()));
        }
        Ok(o)
    }

    fn load(&self, problem: ProblemKind) -> Result<RunConfig, String> {
        let overrides = self.overrides()?;
        RunConfig::load(problem, self.config.as_deref(), &overrides).map_err(|e| e.to_string())
    }
}

fn finish<R: serde::Serialize>(report: &ExperimentReport<R>, cfg: &RunConfig) -> Result<bool, String> {
    let path = report.write(&cfg.out, cfg).map_err(|e| e.to_string())?;
    eprintln!("wrote {}", path.display());
    if let Ok(text) = std::fs::read_to_string(&path) {
        eprint!("{text}");
    }
    if let Some(f) = &report.failure {
        eprintln!("not all runs converged: {f}");
    }
    Ok(report.failure.is_none())
}

fn run(cli: Cli) -> Result<bool, String> {
    match cli.command {
        Command::Convergence(c) => {
            let cfg = c.load(ProblemKind::Manufactured)?;
            finish(&run_convergence(&cfg), &cfg)
        }
        Command::Cavity(c) => {
            let cfg = c.load(ProblemKind::Cavity)?;
            finish(&run_cavity(&cfg), &cfg)
        }
        Command::Coupling(c) => {
            let cfg = c.load(ProblemKind::CouplingBlock)?;
            let report = run_coupling_study(&cfg);
            for p in write_coupling_tables(&report, &cfg).map_err(|e| e.to_string())? {
                eprintln!("wrote {}", p.display());
            }
            finish(&report, &cfg)
        }
        Command::Solve { problem, common } => {
            let cfg = common.load(problem)?;
            let (report, vtk) = solve_single(&cfg).map_err(|e| e.to_string())?;
            println!("{}", serde_json::to_string(&report).map_err(|e| e.to_string())?);
            if let Some(p) = vtk {
                eprintln!("wrote {}", p.display());
            }
            if let Err(e) = report.check() {
                eprintln!("{e}");
            }
            Ok(report.converged())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
