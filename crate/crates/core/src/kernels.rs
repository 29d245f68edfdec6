//! Laplace and Stokes fundamental solutions and derived kernels.
//!
//! Conventions: r = x − y, G = −(1/2π) log|r|, outward normals.
//! The checked functions reject coincident points; the `raw` variants
//! skip the check and are used inside quadrature loops.

use std::f64::consts::PI;

use nalgebra::{Matrix2, Vector2};

use crate::geometry::{perp, Point};
use crate::{Error, Result};

const INV_2PI: f64 = 0.5 / PI;
const INV_4PI: f64 = 0.25 / PI;

/// Rotlet prefactor: a unit-strength rotlet exerts a torque of −1 on any
/// enclosing contour.
pub const ROTLET_STRENGTH: f64 = INV_4PI;

fn separation(x: &Point, y: &Point) -> Result<Vector2<f64>> {
    let r = x - y;
    if r.norm_squared() == 0.0 {
        return Err(Error::Coincident { x: x.x, y: x.y });
    }
    Ok(r)
}

pub fn laplace_g(x: &Point, y: &Point) -> Result<f64> {
    Ok(raw::laplace_g(&separation(x, y)?))
}

/// ∂G/∂n_x.
pub fn laplace_k_kernel(x: &Point, n_x: &Vector2<f64>, y: &Point) -> Result<f64> {
    Ok(raw::laplace_dn_target(&separation(x, y)?, n_x))
}

/// ∂G/∂n_y, the double-layer kernel.
pub fn laplace_kstar_kernel(y: &Point, n_y: &Vector2<f64>, x: &Point) -> Result<f64> {
    Ok(raw::laplace_dn_source(&separation(x, y)?, n_y))
}

/// Limit of either normal-derivative kernel as y → x along a curve.
pub fn laplace_k_diag_limit(curvature: f64) -> f64 {
    -curvature * INV_4PI
}

pub fn stokeslet(x: &Point, y: &Point) -> Result<Matrix2<f64>> {
    Ok(raw::stokeslet(&separation(x, y)?))
}

/// Stresslet T_ijk(x, y) = −(1/π) r_i r_j r_k / |r|⁴ as nested arrays.
pub fn stresslet(x: &Point, y: &Point) -> Result<[[[f64; 2]; 2]; 2]> {
    let r = separation(x, y)?;
    let r4 = r.norm_squared().powi(2);
    let mut t = [[[0.0; 2]; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                t[i][j][k] = -r[i] * r[j] * r[k] / (PI * r4);
            }
        }
    }
    Ok(t)
}

/// Traction kernel block n_{x,l} T_{k,m,l}(x, y).
pub fn stresslet_traction_kernel(x: &Point, n_x: &Vector2<f64>, y: &Point) -> Result<Matrix2<f64>> {
    Ok(raw::traction(&separation(x, y)?, n_x))
}

/// Double-layer block T_{j,i,k}(y, x) n_{y,k}.
pub fn stokes_dlp_kernel(y: &Point, n_y: &Vector2<f64>, x: &Point) -> Result<Matrix2<f64>> {
    Ok(raw::stokes_dlp(&separation(x, y)?, n_y))
}

/// Limit of the traction and double-layer blocks as y → x along a curve.
pub fn stokes_diag_limit(curvature: f64, tangent: &Vector2<f64>) -> Matrix2<f64> {
    -curvature * INV_2PI * tangent * tangent.transpose()
}

/// Rotlet velocity at `x` for a unit point torque at `c`.
pub fn rotlet(x: &Point, c: &Point) -> Result<Vector2<f64>> {
    Ok(raw::rotlet(&separation(x, c)?))
}

/// Unchecked kernels in terms of r = x − y.
pub mod raw {
    use super::*;

    #[inline]
    pub fn laplace_g(r: &Vector2<f64>) -> f64 {
        -INV_4PI * r.norm_squared().ln()
    }

    /// ∇_x G.
    #[inline]
    pub fn laplace_grad(r: &Vector2<f64>) -> Vector2<f64> {
        -INV_2PI * r / r.norm_squared()
    }

    #[inline]
    pub fn laplace_dn_target(r: &Vector2<f64>, n_x: &Vector2<f64>) -> f64 {
        -INV_2PI * r.dot(n_x) / r.norm_squared()
    }

    #[inline]
    pub fn laplace_dn_source(r: &Vector2<f64>, n_y: &Vector2<f64>) -> f64 {
        INV_2PI * r.dot(n_y) / r.norm_squared()
    }

    #[inline]
    pub fn stokeslet(r: &Vector2<f64>) -> Matrix2<f64> {
        let r2 = r.norm_squared();
        let l = -0.5 * r2.ln();
        let (a, b) = (r.x * r.x / r2, r.x * r.y / r2);
        INV_4PI * Matrix2::new(l + a, b, b, l + r.y * r.y / r2)
    }

    /// Smooth part r⊗r/|r|² of the Stokeslet, without the 1/4π factor.
    #[inline]
    pub fn stokeslet_smooth(r: &Vector2<f64>) -> Matrix2<f64> {
        let r2 = r.norm_squared();
        Matrix2::new(r.x * r.x, r.x * r.y, r.x * r.y, r.y * r.y) / r2
    }

    #[inline]
    pub fn traction(r: &Vector2<f64>, n_x: &Vector2<f64>) -> Matrix2<f64> {
        let r2 = r.norm_squared();
        let s = -r.dot(n_x) / (PI * r2 * r2);
        s * Matrix2::new(r.x * r.x, r.x * r.y, r.x * r.y, r.y * r.y)
    }

    #[inline]
    pub fn stokes_dlp(r: &Vector2<f64>, n_y: &Vector2<f64>) -> Matrix2<f64> {
        let r2 = r.norm_squared();
        let s = r.dot(n_y) / (PI * r2 * r2);
        s * Matrix2::new(r.x * r.x, r.x * r.y, r.x * r.y, r.y * r.y)
    }

    #[inline]
    pub fn rotlet(r: &Vector2<f64>) -> Vector2<f64> {
        ROTLET_STRENGTH * perp(r) / r.norm_squared()
    }
}
