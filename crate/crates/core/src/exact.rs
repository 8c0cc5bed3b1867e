//! Analytic solutions of the continuous MHD system and their source terms.
//!
//! The continuous equations, with `j = Rm⁻¹ ∇×B`, read
//!
//! ```text
//! u_t + (u·∇)u − Re⁻¹Δu + ∇p − S j×B = f,   ∇·u = 0,
//! j = E + u×B,   B_t + ∇×E = g,   ∇·B = 0.
//! ```

use std::f64::consts::PI;

use crate::geom::{self, Mat3, Vec3};

/// An analytic solution together with the sources that drive it.
///
/// Gradients follow the convention `J[a][b] = ∂_b v_a`.
pub trait ExactSolution: Sync {
    fn velocity(&self, x: &Vec3, t: f64) -> Vec3;
    fn velocity_gradient(&self, x: &Vec3, t: f64) -> Mat3;
    fn pressure(&self, x: &Vec3, t: f64) -> f64;
    fn magnetic(&self, x: &Vec3, t: f64) -> Vec3;
    fn magnetic_curl(&self, x: &Vec3, t: f64) -> Vec3;
    fn electric(&self, x: &Vec3, t: f64) -> Vec3;
    /// Momentum source `f`.
    fn momentum_source(&self, x: &Vec3, t: f64) -> Vec3;
    /// Faraday defect `g = B_t + ∇×E`; zero for a solution of the unforced
    /// induction equation.
    fn faraday_source(&self, x: &Vec3, t: f64) -> Vec3;
}

/// Manufactured solution on the unit cube:
///
/// ```text
/// u = cos t ∇×(0, 0, φ(x)φ(y)φ(z)),  φ(s) = s²(1−s)²
/// p = cos t (x−½)(y−½)(z−½)
/// B = cos t (π sin πx cos πy, −π cos πx sin πy, 0)
/// E = Rm⁻¹∇×B − u×B
/// ```
///
/// `u` vanishes on the boundary, `B·n` and `E×n` vanish on the boundary and
/// both `u` and `B` are divergence free.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManufacturedSolution {
    pub re: f64,
    pub rm: f64,
    pub s: f64,
}

impl ManufacturedSolution {
    pub fn new(re: f64, rm: f64, s: f64) -> Self {
        Self { re, rm, s }
    }
}

fn phi(s: f64) -> [f64; 4] {
    // φ, φ', φ'', φ'''
    [
        s * s * (1.0 - s) * (1.0 - s),
        2.0 * s - 6.0 * s * s + 4.0 * s * s * s,
        2.0 - 12.0 * s + 12.0 * s * s,
        -12.0 + 24.0 * s,
    ]
}

/// Time-independent profiles (all fields carry a `cos t` factor).
mod profile {
    use super::*;

    pub fn u(x: &Vec3) -> Vec3 {
        let (a, b, c) = (phi(x[0]), phi(x[1]), phi(x[2]));
        [a[0] * b[1] * c[0], -a[1] * b[0] * c[0], 0.0]
    }

    pub fn grad_u(x: &Vec3) -> Mat3 {
        let (a, b, c) = (phi(x[0]), phi(x[1]), phi(x[2]));
        [
            [a[1] * b[1] * c[0], a[0] * b[2] * c[0], a[0] * b[1] * c[1]],
            [-a[2] * b[0] * c[0], -a[1] * b[1] * c[0], -a[1] * b[0] * c[1]],
            [0.0; 3],
        ]
    }

    pub fn laplace_u(x: &Vec3) -> Vec3 {
        let (a, b, c) = (phi(x[0]), phi(x[1]), phi(x[2]));
        [
            a[2] * b[1] * c[0] + a[0] * b[3] * c[0] + a[0] * b[1] * c[2],
            -(a[3] * b[0] * c[0] + a[1] * b[2] * c[0] + a[1] * b[0] * c[2]),
            0.0,
        ]
    }

    pub fn p(x: &Vec3) -> f64 {
        (x[0] - 0.5) * (x[1] - 0.5) * (x[2] - 0.5)
    }

    pub fn grad_p(x: &Vec3) -> Vec3 {
        let (a, b, c) = (x[0] - 0.5, x[1] - 0.5, x[2] - 0.5);
        [b * c, a * c, a * b]
    }

    pub fn b(x: &Vec3) -> Vec3 {
        let (sx, cx) = (PI * x[0]).sin_cos();
        let (sy, cy) = (PI * x[1]).sin_cos();
        [PI * sx * cy, -PI * cx * sy, 0.0]
    }

    pub fn grad_b(x: &Vec3) -> Mat3 {
        let (sx, cx) = (PI * x[0]).sin_cos();
        let (sy, cy) = (PI * x[1]).sin_cos();
        let pp = PI * PI;
        [[pp * cx * cy, -pp * sx * sy, 0.0], [pp * sx * sy, -pp * cx * cy, 0.0], [0.0; 3]]
    }

    /// `∇×B`; note `∇×∇×B = 2π² B`.
    pub fn curl_b(x: &Vec3) -> Vec3 {
        [0.0, 0.0, 2.0 * PI * PI * (PI * x[0]).sin() * (PI * x[1]).sin()]
    }
}

impl ExactSolution for ManufacturedSolution {
    fn velocity(&self, x: &Vec3, t: f64) -> Vec3 {
        geom::scale(t.cos(), &profile::u(x))
    }

    fn velocity_gradient(&self, x: &Vec3, t: f64) -> Mat3 {
        let g = profile::grad_u(x);
        g.map(|row| geom::scale(t.cos(), &row))
    }

    fn pressure(&self, x: &Vec3, t: f64) -> f64 {
        t.cos() * profile::p(x)
    }

    fn magnetic(&self, x: &Vec3, t: f64) -> Vec3 {
        geom::scale(t.cos(), &profile::b(x))
    }

    fn magnetic_curl(&self, x: &Vec3, t: f64) -> Vec3 {
        geom::scale(t.cos(), &profile::curl_b(x))
    }

    fn electric(&self, x: &Vec3, t: f64) -> Vec3 {
        let c = t.cos();
        let ub = geom::cross(&profile::u(x), &profile::b(x));
        geom::sub(&geom::scale(c / self.rm, &profile::curl_b(x)), &geom::scale(c * c, &ub))
    }

    fn momentum_source(&self, x: &Vec3, t: f64) -> Vec3 {
        let (c, s) = (t.cos(), t.sin());
        let u = profile::u(x);
        let conv = geom::matvec(&profile::grad_u(x), &u);
        let lorentz = geom::cross(&profile::curl_b(x), &profile::b(x));
        let lap = profile::laplace_u(x);
        let gp = profile::grad_p(x);
        std::array::from_fn(|a| {
            -s * u[a] + c * c * conv[a] - c * lap[a] / self.re - self.s / self.rm * c * c * lorentz[a] + c * gp[a]
        })
    }

    fn faraday_source(&self, x: &Vec3, t: f64) -> Vec3 {
        let (c, s) = (t.cos(), t.sin());
        let u = profile::u(x);
        let b = profile::b(x);
        // ∇×(u×B) = (B·∇)u − (u·∇)B for solenoidal u, B
        let stretch = geom::matvec(&profile::grad_u(x), &b);
        let advect = geom::matvec(&profile::grad_b(x), &u);
        let k = 2.0 * PI * PI / self.rm;
        std::array::from_fn(|a| -s * b[a] + c * k * b[a] - c * c * (stretch[a] - advect[a]))
    }
}
