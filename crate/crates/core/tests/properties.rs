mod common;

use mhd_core::assembly::{Assembler, BlockKind, Discretization, MhdState, PhysParams};
use mhd_core::geometry::{Mat3, Point, Vec3};
use mhd_core::mesh::{build_box_mesh, BoxDomain};
use mhd_core::solver::update_state;
use mhd_core::space::{error_norms, interpolate_scalar, interpolate_vector, ExactField};
use proptest::prelude::*;

fn coeff() -> impl Strategy<Value = f64> {
    -2.0f64..2.0
}

fn affine() -> impl Strategy<Value = (Mat3, Vec3)> {
    (prop::array::uniform3(prop::array::uniform3(coeff())), prop::array::uniform3(coeff()))
}

fn eval_affine(a: &Mat3, c: &Vec3, x: &Point) -> Vec3 {
    std::array::from_fn(|r| c[r] + (0..3).map(|k| a[r][k] * x[k]).sum::<f64>())
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn box_meshes_are_consistent(n in 1usize..=4, ext in prop::array::uniform3(0.2f64..3.0), lo in prop::array::uniform3(-1.0f64..1.0)) {
        let domain = BoxDomain { min: lo, max: std::array::from_fn(|d| lo[d] + ext[d]) };
        let m = build_box_mesh(n, domain).unwrap();
        let vol: f64 = (0..m.n_tets()).map(|t| m.tet_volume(t)).sum();
        prop_assert!((vol - domain.volume()).abs() <= 1e-12 * domain.volume());
        let euler = m.n_vertices() as i64 - m.n_edges() as i64 + m.n_faces() as i64 - m.n_tets() as i64;
        prop_assert_eq!(euler, 1);
        let mut seen = vec![0usize; m.n_edges()];
        for (t, tet) in m.tets.iter().enumerate() {
            for (k, &(a, b)) in mhd_core::mesh::LOCAL_EDGES.iter().enumerate() {
                let e = m.tet_edges[t][k];
                seen[e] += 1;
                let (ga, gb) = (tet[a], tet[b]);
                prop_assert_eq!(m.edges[e], [ga.min(gb), ga.max(gb)]);
                let expect = if ga < gb { 1.0 } else { -1.0 };
                prop_assert_eq!(m.tet_edge_signs[t][k], expect);
            }
        }
        prop_assert!(seen.iter().all(|&c| c > 0));
        let diag = (ext.iter().map(|e| (e / n as f64).powi(2)).sum::<f64>()).sqrt();
        prop_assert!((m.h_max - diag).abs() <= 1e-12 * diag);
    }

    #[test]
    fn linear_fields_are_reproduced_exactly((a, c) in affine()) {
        let disc = Discretization::unit_cube(2).unwrap();
        let f = move |x: &Point| eval_affine(&a, &c, x);
        let curl = move |_: &Point| [a[2][1] - a[1][2], a[0][2] - a[2][0], a[1][0] - a[0][1]];
        let b = interpolate_vector(&disc.mesh, &disc.magnetic, f);
        let e = error_norms(&disc.mesh, &disc.magnetic, &b, &ExactField::Curl { value: &f, curl: Some(&curl) }).unwrap();
        prop_assert!(e.full < 1e-12, "edge space: {:e}", e.full);
        let jac = move |_: &Point| a;
        let u = interpolate_vector(&disc.mesh, &disc.velocity, f);
        let e = error_norms(&disc.mesh, &disc.velocity, &u, &ExactField::Vector { value: &f, jacobian: Some(&jac) }).unwrap();
        prop_assert!(e.full < 1e-12, "velocity space: {:e}", e.full);
    }

    /// `G` applied to the edge interpolant of `grad s` equals `L_r s` for
    /// quadratic `s`.
    #[test]
    fn gradient_pairing_matches_multiplier_laplacian(q in prop::array::uniform3(coeff()), m in prop::array::uniform3(coeff()), l in prop::array::uniform3(coeff())) {
        let disc = Discretization::unit_cube(2).unwrap();
        let s = move |x: &Point| q[0] * x[0] * x[0] + q[1] * x[1] * x[2] + q[2] * x[2] * x[2]
            + m[0] * x[0] * x[1] + m[1] * x[1] * x[1] + m[2] * x[0] * x[2] + l[0] * x[0] + l[1] * x[1] + l[2];
        let grad = move |x: &Point| [
            2.0 * q[0] * x[0] + m[0] * x[1] + m[2] * x[2] + l[0],
            q[1] * x[2] + m[0] * x[0] + 2.0 * m[1] * x[1] + l[1],
            q[1] * x[1] + 2.0 * q[2] * x[2] + m[2] * x[0],
        ];
        let mut asm = Assembler::full(&disc);
        let zero = MhdState::zeros(&disc);
        let params = PhysParams::default();
        let g = asm.assemble_block(&params, &zero, BlockKind::G).unwrap();
        let lr = asm.assemble_block(&params, &zero, BlockKind::Lr).unwrap();
        let sv = interpolate_scalar(&disc.mesh, &disc.multiplier, s);
        let gv = interpolate_vector(&disc.mesh, &disc.magnetic, grad);
        let lhs = g.spmv(&gv.coeffs).unwrap();
        let rhs = lr.spmv(&sv.coeffs).unwrap();
        let scale = rhs.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for (x, y) in lhs.iter().zip(&rhs) {
            prop_assert!((x - y).abs() <= 1e-12 * scale, "{} vs {}", x, y);
        }
    }

    /// `<J w, v> = <w, J' v>` for the block applied with and without transpose.
    #[test]
    fn coupling_block_transpose_is_consistent(seed in 0u64..1000) {
        let disc = Discretization::unit_cube(2).unwrap();
        let state = common::polynomial_state(&disc, true);
        let params = PhysParams { s: 4.0, ..Default::default() };
        let j = Assembler::new(&disc).assemble_block(&params, &state, BlockKind::J).unwrap();
        let w = common::test_vector(j.n_cols, seed);
        let v = common::test_vector(j.n_rows, seed + 7);
        let jw = j.spmv(&w).unwrap();
        let jtv = j.spmv_transpose(&v).unwrap();
        let a: f64 = jw.iter().zip(&v).map(|(x, y)| x * y).sum();
        let b: f64 = w.iter().zip(&jtv).map(|(x, y)| x * y).sum();
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
    }

    #[test]
    fn relaxed_updates_are_linear_and_keep_boundary_values(seed in 0u64..1000) {
        let disc = Discretization::unit_cube(2).unwrap();
        let lid = |x: &Point| [x[2], 0.0, 1.0 - x[0]];
        let field = |_: &Point| [1.0, 0.0, 0.0];
        let start = MhdState::from_boundary_data(&disc, &lid, &field);
        let delta = common::test_vector(disc.layout().total(), seed);

        let mut once = start.clone();
        update_state(&disc, &mut once, &delta, 1.0).unwrap();
        let mut twice = start.clone();
        update_state(&disc, &mut twice, &delta, 0.5).unwrap();
        update_state(&disc, &mut twice, &delta, 0.5).unwrap();
        for (x, y) in once.u.coeffs.iter().chain(&once.b.coeffs).zip(twice.u.coeffs.iter().chain(&twice.b.coeffs)) {
            prop_assert!((x - y).abs() <= 1e-14 * x.abs().max(1.0));
        }
        for (d, &bd) in disc.velocity.boundary.iter().enumerate() {
            if bd {
                prop_assert_eq!(once.u.coeffs[d].to_bits(), start.u.coeffs[d].to_bits());
            }
        }
        for (d, &bd) in disc.magnetic.boundary.iter().enumerate() {
            if bd {
                prop_assert_eq!(once.b.coeffs[d].to_bits(), start.b.coeffs[d].to_bits());
            }
        }
        let mut same = start.clone();
        update_state(&disc, &mut same, &vec![0.0; delta.len()], 1.0).unwrap();
        prop_assert_eq!(same, start);
    }
}
