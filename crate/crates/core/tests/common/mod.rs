//! Helpers shared by the integration suites: test geometries, ring
//! quadrature and finite-difference tractions.

#![allow(dead_code)]

use std::f64::consts::PI;

use bie2d::quadrature::{eval_stokes_single, integrate_with, Density, EvalPlan};
use bie2d::scenarios::splash_curves;
use bie2d::{perp, Curve, Discretization, Point, Scheme};
use nalgebra::{Matrix2, Vector2};

pub fn unit_circle() -> Discretization {
    Discretization::from_curve(Curve::disc(Point::zeros(), 1.0), Scheme::Panel { panels: 16, order: 16 }).unwrap()
}

/// The first splash star on its own.
pub fn splash_star() -> Discretization {
    let curve = splash_curves().remove(0);
    Discretization::from_curve(curve, Scheme::Panel { panels: 128, order: 16 }).unwrap()
}

/// Both test geometries with a ring radius enclosing the body and one
/// inside it, both about the body center.
pub fn geometries() -> Vec<(&'static str, Discretization, f64, f64)> {
    vec![("circle", unit_circle(), 2.0, 0.5), ("star", splash_star(), 2.5, 0.25)]
}

/// Points, outward normals and trapezoid weights on a circle.
pub struct Ring {
    pub points: Vec<Point>,
    pub normals: Vec<Vector2<f64>>,
    pub weights: Vec<f64>,
}

pub fn ring(center: Point, radius: f64, m: usize) -> Ring {
    let normals: Vec<Vector2<f64>> = (0..m)
        .map(|k| {
            let t = 2.0 * PI * k as f64 / m as f64;
            Vector2::new(t.cos(), t.sin())
        })
        .collect();
    Ring {
        points: normals.iter().map(|n| center + radius * n).collect(),
        normals,
        weights: vec![2.0 * PI * radius / m as f64; m],
    }
}

/// A smooth scalar density built from low Fourier modes of the node angle
/// about the body center.
pub fn smooth_scalar(disc: &Discretization, coeffs: &[(f64, f64)]) -> Density {
    let c = disc.bodies[0].centroid;
    Density::from_fn_scalar(disc, |i| {
        let d = disc.points[i] - c;
        let t = d.y.atan2(d.x);
        coeffs
            .iter()
            .enumerate()
            .map(|(k, (a, b))| a * (k as f64 * t).cos() + b * (k as f64 * t).sin())
            .sum()
    })
}

pub fn smooth_vector(disc: &Discretization, cx: &[(f64, f64)], cy: &[(f64, f64)]) -> Density {
    let x = smooth_scalar(disc, cx);
    let y = smooth_scalar(disc, cy);
    Density::from_fn_vector(disc, |i| Vector2::new(x.values()[i], y.values()[i]))
}

/// Pressure of the Stokes single layer, from the pressure kernel
/// p(x) = (1/2π) ∫ (x − y)·μ / |x − y|² ds.
pub fn stokes_pressure(disc: &Discretization, mu: &Density, points: &[Point]) -> Vec<f64> {
    integrate_with(disc, mu, points, |r, _, d| [r.dot(&Vector2::new(d[0], d[1])) / (2.0 * PI * r.norm_squared())])
        .unwrap()
        .into_iter()
        .map(|v| v[0])
        .collect()
}

/// Velocity gradient ∂u_i/∂x_j of the Stokes single layer by central
/// differences with step `h`.
pub fn stokes_gradient(disc: &Discretization, mu: &Density, points: &[Point], h: f64) -> Vec<Matrix2<f64>> {
    let shifts = [Vector2::new(h, 0.0), Vector2::new(-h, 0.0), Vector2::new(0.0, h), Vector2::new(0.0, -h)];
    let stencil: Vec<Point> = points.iter().flat_map(|p| shifts.iter().map(move |s| p + s)).collect();
    let u = eval_stokes_single(disc, mu, &EvalPlan::off_surface(&stencil)).unwrap();
    u.chunks(4)
        .map(|c| {
            let dx = (c[0] - c[1]) / (2.0 * h);
            let dy = (c[2] - c[3]) / (2.0 * h);
            Matrix2::from_columns(&[dx, dy])
        })
        .collect()
}

/// Traction σ·n with σ = −pI + ∇u + ∇uᵀ.
pub fn stokes_traction(disc: &Discretization, mu: &Density, points: &[Point], normals: &[Vector2<f64>], h: f64) -> Vec<Vector2<f64>> {
    let p = stokes_pressure(disc, mu, points);
    stokes_gradient(disc, mu, points, h)
        .iter()
        .zip(&p)
        .zip(normals)
        .map(|((g, p), n)| (g + g.transpose() - Matrix2::identity() * *p) * n)
        .collect()
}

/// Net force and torque about `center` of a traction field on a ring.
pub fn ring_loads(r: &Ring, f: &[Vector2<f64>], center: Point) -> (Vector2<f64>, f64) {
    let mut force = Vector2::zeros();
    let mut torque = 0.0;
    for ((x, w), f) in r.points.iter().zip(&r.weights).zip(f) {
        force += f * *w;
        torque += perp(&(x - center)).dot(f) * w;
    }
    (force, torque)
}

/// ∫μ ds and ∫(x − c)^⊥·μ ds over the whole discretization.
pub fn density_moments(disc: &Discretization, mu: &Density, center: Point) -> (Vector2<f64>, f64) {
    let mut force = Vector2::zeros();
    let mut torque = 0.0;
    for i in 0..disc.len() {
        let m = mu.vec2(i) * disc.weights[i];
        force += m;
        torque += perp(&(disc.points[i] - center)).dot(&m);
    }
    (force, torque)
}

pub fn max_abs(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0, |m, x| m.max(x.abs()))
}
