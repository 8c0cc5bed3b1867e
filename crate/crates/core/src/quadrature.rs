//! Grundmann–Möller simplex quadrature.
//!
//! The rules have negative weights for degree ≥ 3; only exactness is relied on.

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::geom::Vec3;

pub const MAX_DEGREE: usize = 10;

/// Quadrature on the reference tetrahedron with vertices 0, e₁, e₂, e₃.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub points: Vec<Vec3>,
    pub weights: Vec<f64>,
    /// Highest total degree integrated exactly.
    pub degree: usize,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Rule on the reference triangle `{s, t ≥ 0, s + t ≤ 1}` (area 1/2).
#[derive(Debug, Clone)]
pub struct TriangleRule {
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
}

/// Rule on `[0, 1]`.
#[derive(Debug, Clone)]
pub struct LineRule {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Shared tetrahedral rule exact for polynomials of total degree `degree`.
pub fn quadrature(degree: usize) -> Result<&'static QuadratureRule> {
    static RULES: [OnceLock<QuadratureRule>; MAX_DEGREE + 1] = [const { OnceLock::new() }; MAX_DEGREE + 1];
    if degree == 0 || degree > MAX_DEGREE {
        return Err(Error::UnsupportedDegree(degree));
    }
    Ok(RULES[degree].get_or_init(|| {
        let s = degree / 2;
        let (bary, weights) = grundmann_moller(3, s);
        QuadratureRule {
            points: bary.iter().map(|b| [b[1], b[2], b[3]]).collect(),
            weights,
            degree: 2 * s + 1,
        }
    }))
}

pub fn triangle_rule(degree: usize) -> TriangleRule {
    let (bary, weights) = grundmann_moller(2, degree / 2);
    TriangleRule {
        points: bary.iter().map(|b| [b[1], b[2]]).collect(),
        weights,
    }
}

pub fn line_rule(degree: usize) -> LineRule {
    let (bary, weights) = grundmann_moller(1, degree / 2);
    LineRule {
        points: bary.iter().map(|b| b[1]).collect(),
        weights,
    }
}

/// Points (barycentric) and weights of the degree `2s + 1` rule on the
/// `dim`-simplex of volume `1/dim!`.
fn grundmann_moller(dim: usize, s: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let d = 2 * s + 1;
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for i in 0..=s {
        let denom = (d + dim - 2 * i) as f64;
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        let w = sign * 2f64.powi(-2 * s as i32) * denom.powi(d as i32)
            / (factorial(i) * factorial(d + dim - i));
        for beta in compositions(s - i, dim + 1) {
            points.push(beta.iter().map(|&b| (2 * b + 1) as f64 / denom).collect());
            weights.push(w);
        }
    }
    (points, weights)
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// All ways to write `total` as an ordered sum of `parts` non-negative integers.
fn compositions(total: usize, parts: usize) -> Vec<Vec<usize>> {
    if parts == 1 {
        return vec![vec![total]];
    }
    let mut out = Vec::new();
    for first in (0..=total).rev() {
        for mut rest in compositions(total - first, parts - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}
