//! Problem catalog: a manufactured smooth solution, the lid-driven cavity,
//! and the frozen-coefficient coupling block.

use crate::assembly::PhysParams;
use crate::geometry::{Mat3, Point, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    Manufactured,
    Cavity,
    CouplingBlock,
}

impl std::str::FromStr for ProblemKind {
    type Err = crate::MhdError;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s.trim() {
            "manufactured" => Ok(Self::Manufactured),
            "cavity" => Ok(Self::Cavity),
            "coupling_block" | "coupling" => Ok(Self::CouplingBlock),
            other => Err(crate::MhdError::Parse(format!(
                "unknown problem '{other}' (manufactured | cavity | coupling_block)"
            ))),
        }
    }
}

impl std::fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Manufactured => "manufactured",
            Self::Cavity => "cavity",
            Self::CouplingBlock => "coupling_block",
        })
    }
}

/// Smooth solution `u = (sin z, 2 cos x, 0)`, `p = sin y + cos 1 - 1`,
/// `B = (cos y, 0, 0)`, `r = 0` on the unit cube. The pressure has zero
/// mean and both `u` and `B` are divergence free.
pub mod manufactured {
    use super::*;

    pub fn velocity(x: &Point) -> Vec3 {
        [x[2].sin(), 2.0 * x[0].cos(), 0.0]
    }

    pub fn velocity_jacobian(x: &Point) -> Mat3 {
        [[0.0, 0.0, x[2].cos()], [-2.0 * x[0].sin(), 0.0, 0.0], [0.0; 3]]
    }

    pub fn pressure(x: &Point) -> f64 {
        x[1].sin() + 1f64.cos() - 1.0
    }

    pub fn pressure_gradient(x: &Point) -> Vec3 {
        [0.0, x[1].cos(), 0.0]
    }

    pub fn magnetic(x: &Point) -> Vec3 {
        [x[1].cos(), 0.0, 0.0]
    }

    pub fn magnetic_curl(x: &Point) -> Vec3 {
        [0.0, 0.0, x[1].sin()]
    }

    pub fn multiplier(_: &Point) -> f64 {
        0.0
    }

    /// `f = -Re^-1 lap u + (u . grad) u + grad p - S curl B x B`.
    pub fn momentum_source(params: &PhysParams) -> impl Fn(&Point) -> Vec3 {
        let (inv_re, s) = (1.0 / params.re, params.s);
        move |x| {
            let (sx, cx) = x[0].sin_cos();
            let (sy, cy) = x[1].sin_cos();
            let sz = x[2].sin();
            [inv_re * sz, 2.0 * inv_re * cx - 2.0 * sx * sz + cy - s * sy * cy, 0.0]
        }
    }

    /// Source balancing the induction equation:
    /// `S Rm^-1 curl curl B + S curl (B x u)`.
    pub fn magnetic_source(params: &PhysParams) -> impl Fn(&Point) -> Vec3 {
        let (s, inv_rm) = (params.s, 1.0 / params.rm);
        move |x| {
            let (sx, cx) = x[0].sin_cos();
            let (sy, cy) = x[1].sin_cos();
            [s * (inv_rm * cy - 2.0 * cx * sy), s * 2.0 * sx * cy, 0.0]
        }
    }
}

/// Lid-driven cavity: `f = 0`, `B_s = (1, 0, 0)`, velocity `(g1(z), 0, 0)`
/// on the whole boundary.
pub mod cavity {
    use super::*;

    pub const REYNOLDS: f64 = 100.0;
    pub const COUPLING: f64 = 100.0;
    pub const GAMMA: f64 = 1.5;

    pub fn params() -> PhysParams {
        PhysParams {
            re: REYNOLDS,
            rm: 1.0,
            s: COUPLING,
            gamma: GAMMA,
            sigma: None,
            theta: 1.0,
        }
    }

    /// Lid profile: 0 below `1 - width`, rising linearly to 1 at `z = 1`.
    pub fn lid_profile(z: f64, width: f64) -> f64 {
        ((z - (1.0 - width)) / width).clamp(0.0, 1.0)
    }

    /// Default ramp width: one cell layer on an `n^3` grid.
    pub fn default_lid_width(n: usize) -> f64 {
        1.0 / n as f64
    }

    pub fn boundary_velocity(width: f64) -> impl Fn(&Point) -> Vec3 {
        move |x| [lid_profile(x[2], width), 0.0, 0.0]
    }

    pub fn boundary_magnetic(_: &Point) -> Vec3 {
        [1.0, 0.0, 0.0]
    }

    pub fn forcing(_: &Point) -> Vec3 {
        [0.0; 3]
    }
}
