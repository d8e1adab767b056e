//! WebAssembly bindings for the demo page in `www/`.
//!
//! Every exported function returns a JSON string so the page needs no
//! generated type glue. The `*_json` functions hold the logic and are
//! plain Rust, which keeps them testable off the browser.

use mhd_core::app::point_fields;
use mhd_core::app::problems::cavity;
use mhd_core::assembly::{Discretization, PhysParams};
use mhd_core::geometry::norm;
use mhd_core::precond::{coupling_block_solve, CouplingProblem, SchurVariant};
use mhd_core::solver::{picard_solve, ProblemData, SolverOptions};
use mhd_core::space::sample_field;
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

/// Largest mesh level the page may request; larger meshes take minutes
/// in a single browser thread.
pub const MAX_LEVEL: usize = 6;

fn check_level(n: usize) -> Result<(), String> {
    if n == 0 || n > MAX_LEVEL {
        return Err(format!("mesh level must be between 1 and {MAX_LEVEL}, got {n}"));
    }
    Ok(())
}

pub fn mesh_info_json(n: usize) -> Result<Value, String> {
    check_level(n)?;
    let disc = Discretization::unit_cube(n).map_err(|e| e.to_string())?;
    let l = disc.layout();
    Ok(json!({
        "n": n,
        "vertices": disc.mesh.n_vertices(),
        "edges": disc.mesh.n_edges(),
        "cells": disc.mesh.n_tets(),
        "dofs": {
            "magnetic": disc.magnetic.n_dofs,
            "multiplier": disc.multiplier.n_dofs,
            "velocity": disc.velocity.n_dofs,
            "pressure": disc.pressure.n_dofs,
        },
        "free": {"magnetic": l.nb, "multiplier": l.nr, "velocity": l.nu, "pressure": l.np},
        "unknowns": l.total(),
    }))
}

pub fn coupling_iterations_json(n: usize, coupling: f64, sigma: f64, variant: &str) -> Result<Value, String> {
    check_level(n)?;
    let variant: SchurVariant = variant.parse().map_err(|e: mhd_core::MhdError| e.to_string())?;
    let disc = Discretization::unit_cube(n).map_err(|e| e.to_string())?;
    let mut prob = CouplingProblem::new(coupling, coupling, sigma);
    prob.variant = variant;
    let report = coupling_block_solve(&disc, &prob).map_err(|e| e.to_string())?;
    Ok(json!({
        "n": n,
        "coupling": coupling,
        "sigma": sigma,
        "variant": variant.to_string(),
        "iterations": report.iterations,
        "converged": report.converged,
        "residuals": report.residuals,
    }))
}

/// Solve the lid-driven cavity and sample `|u|` on the plane `y = 0.5`
/// over a `resolution x resolution` grid in `(x, z)`.
pub fn cavity_slice_json(n: usize, reynolds: f64, coupling: f64, variant: &str, resolution: usize) -> Result<Value, String> {
    check_level(n)?;
    if !(2..=200).contains(&resolution) {
        return Err(format!("resolution must be between 2 and 200, got {resolution}"));
    }
    let variant: SchurVariant = variant.parse().map_err(|e: mhd_core::MhdError| e.to_string())?;
    let disc = Discretization::unit_cube(n).map_err(|e| e.to_string())?;
    let params = PhysParams {
        re: reynolds,
        s: coupling,
        ..cavity::params()
    };
    params.validate().map_err(|e| e.to_string())?;
    let lid = cavity::boundary_velocity(cavity::default_lid_width(n));
    let data = ProblemData {
        momentum: &cavity::forcing,
        magnetic: None,
        velocity_bc: &lid,
        magnetic_bc: &cavity::boundary_magnetic,
    };
    let opts = SolverOptions {
        variant,
        ..SolverOptions::default()
    };
    let (state, report) = picard_solve(&disc, &params, &data, &opts, None).map_err(|e| e.to_string())?;

    let coord = |i: usize| i as f64 / (resolution - 1) as f64;
    let points: Vec<[f64; 3]> = (0..resolution)
        .flat_map(|iz| (0..resolution).map(move |ix| [coord(ix), 0.5, coord(iz)]))
        .collect();
    let samples = sample_field(&disc.mesh, &disc.velocity, &state.u, &points).map_err(|e| e.to_string())?;
    let speed: Vec<f64> = samples.iter().map(|s| s.map_or(0.0, |e| norm(&e.value))).collect();
    let max_vertex_speed = point_fields(&disc, &state)
        .map_err(|e| e.to_string())?
        .velocity
        .iter()
        .map(norm)
        .fold(0.0, f64::max);
    Ok(json!({
        "n": n,
        "variant": variant.to_string(),
        "status": format!("{:?}", report.status),
        "picard_iterations": report.picard_iterations,
        "gmres_iterations": report.gmres_iterations,
        "average_gmres": report.average_gmres,
        "residuals": report.residuals,
        "resolution": resolution,
        "speed": speed,
        "max_speed": max_vertex_speed,
    }))
}

fn to_js(r: Result<Value, String>) -> Result<String, JsError> {
    r.map(|v| v.to_string()).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn mesh_info(n: usize) -> Result<String, JsError> {
    to_js(mesh_info_json(n))
}

#[wasm_bindgen]
pub fn coupling_iterations(n: usize, coupling: f64, sigma: f64, variant: &str) -> Result<String, JsError> {
    to_js(coupling_iterations_json(n, coupling, sigma, variant))
}

#[wasm_bindgen]
pub fn cavity_slice(n: usize, reynolds: f64, coupling: f64, variant: &str, resolution: usize) -> Result<String, JsError> {
    to_js(cavity_slice_json(n, reynolds, coupling, variant, resolution))
}
