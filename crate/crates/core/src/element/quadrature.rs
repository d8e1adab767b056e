//! Quadrature rules on the reference tetrahedron with vertices
//! `(0,0,0), (1,0,0), (0,1,0), (0,0,1)`.

use crate::error::{MhdError, Result};
use crate::geometry::Point;

#[derive(Debug, Clone)]
pub struct QuadratureRule {
    /// Reference coordinates.
    pub points: Vec<Point>,
    /// Weights in reference-volume measure; they sum to 1/6.
    pub weights: Vec<f64>,
    /// Total polynomial degree integrated exactly.
    pub order: usize,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Rule exact for all polynomials of total degree `order`, `order` in 1..=6.
///
/// Orders 1 and 2 use the classical 1- and 4-point rules, orders 3 to 5 the
/// symmetric 14-point degree-5 rule, order 6 a collapsed Gauss-Legendre
/// product rule. All weights are positive.
pub fn quad_rule(order: usize) -> Result<QuadratureRule> {
    match order {
        1 => Ok(from_barycentric(&[([0.25; 4], 1.0)], 1)),
        2 => {
            let a = 0.585_410_196_624_968_5;
            let b = 0.138_196_601_125_010_5;
            let pts: Vec<([f64; 4], f64)> = s31(b, a).into_iter().map(|p| (p, 0.25)).collect();
            Ok(from_barycentric(&pts, 2))
        }
        3..=5 => {
            let mut pts = Vec::with_capacity(14);
            let a1 = 0.092_735_250_310_891_226_4;
            let a2 = 0.310_885_919_263_300_609_7;
            let c = 0.045_503_704_125_649_649_4;
            pts.extend(s31(a1, 1.0 - 3.0 * a1).into_iter().map(|p| (p, 0.073_493_043_116_361_949_5)));
            pts.extend(s31(a2, 1.0 - 3.0 * a2).into_iter().map(|p| (p, 0.112_687_925_718_015_850_7)));
            pts.extend(s22(c, 0.5 - c).into_iter().map(|p| (p, 0.042_546_020_777_081_466_4)));
            let mut rule = from_barycentric(&pts, order);
            rule.order = 5;
            Ok(rule)
        }
        6 => Ok(collapsed_gauss(5, 6)),
        _ => Err(MhdError::UnsupportedQuadrature(order)),
    }
}

/// Points with barycentric coordinates `(a, a, a, b)` and permutations.
fn s31(a: f64, b: f64) -> [[f64; 4]; 4] {
    [[b, a, a, a], [a, b, a, a], [a, a, b, a], [a, a, a, b]]
}

/// Points with barycentric coordinates `(a, a, b, b)` and permutations.
fn s22(a: f64, b: f64) -> [[f64; 4]; 6] {
    [
        [a, a, b, b],
        [a, b, a, b],
        [a, b, b, a],
        [b, a, a, b],
        [b, a, b, a],
        [b, b, a, a],
    ]
}

/// Build a rule from barycentric points with weights normalized to sum 1.
fn from_barycentric(pts: &[([f64; 4], f64)], order: usize) -> QuadratureRule {
    QuadratureRule {
        points: pts.iter().map(|(l, _)| [l[1], l[2], l[3]]).collect(),
        weights: pts.iter().map(|(_, w)| w / 6.0).collect(),
        order,
    }
}

/// Duffy-collapsed tensor product of `m`-point Gauss-Legendre rules.
///
/// With `x = s, y = (1-s) t, z = (1-s)(1-t) u` the Jacobian is
/// `(1-s)^2 (1-t)`, so `m` points per direction are exact up to total degree
/// `2m - 3`.
fn collapsed_gauss(m: usize, order: usize) -> QuadratureRule {
    let (nodes, weights) = gauss_legendre(m);
    let mut points = Vec::with_capacity(m * m * m);
    let mut w = Vec::with_capacity(m * m * m);
    for (i, &s) in nodes.iter().enumerate() {
        for (j, &t) in nodes.iter().enumerate() {
            for (k, &u) in nodes.iter().enumerate() {
                let x = s;
                let y = (1.0 - s) * t;
                let z = (1.0 - s) * (1.0 - t) * u;
                points.push([x, y, z]);
                w.push(weights[i] * weights[j] * weights[k] * (1.0 - s).powi(2) * (1.0 - t));
            }
        }
    }
    QuadratureRule {
        points,
        weights: w,
        order,
    }
}

/// Gauss-Legendre nodes and weights on `[0, 1]` (weights sum to 1).
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = Vec::with_capacity(m);
    let mut weights = Vec::with_capacity(m);
    for i in 0..m {
        // Newton on P_m starting from the Chebyshev-like guess.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre(m, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(m, x);
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes.push(0.5 * (1.0 - x));
        weights.push(0.5 * w);
    }
    (nodes, weights)
}

/// Legendre polynomial `P_m(x)` and its derivative.
fn legendre(m: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if m == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=m {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = m as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Gauss-Legendre rule on `[0, 1]` used for edge moments.
pub fn edge_rule() -> (Vec<f64>, Vec<f64>) {
    gauss_legendre(3)
}
