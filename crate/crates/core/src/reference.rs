//! Reference-tetrahedron bases for the four element families used by the
//! scheme (k = 1), their degree-of-freedom functionals and Piola maps.
//!
//! Reference vertices are `v̂₀ = 0, v̂ᵢ = eᵢ` with barycentric coordinates
//! `λ₀ = 1 - x - y - z, λᵢ = xᵢ`.
//!
//! Nédélec (second kind) dofs on edge `(a, b)`: `∫₀¹ φ·(v_b - v_a) q(s) ds`
//! with `q ∈ {1, 2s - 1}`. BDM dofs on face `(a, b, c)`: `∫ φ·N q` over the
//! unit parameter triangle with `N = (v_b - v_a) × (v_c - v_a)` and
//! `q ∈ {1, λ_b - λ_a, λ_c - λ_a}`. Both sets are invariant under the
//! matching Piola map, which is what makes the global dof maps conforming.

use crate::error::{Error, Result};
use crate::geom::{self, Mat3, Vec3};
use crate::mesh::{CellGeometry, LOCAL_EDGES, LOCAL_FACES};
use crate::quadrature::{line_rule, triangle_rule};

pub const REFERENCE_VERTICES: [Vec3; 4] = [
    [0.0, 0.0, 0.0],
    [1.0, 0.0, 0.0],
    [0.0, 1.0, 0.0],
    [0.0, 0.0, 1.0],
];

const GRAD_LAMBDA: [Vec3; 4] = [
    [-1.0, -1.0, -1.0],
    [1.0, 0.0, 0.0],
    [0.0, 1.0, 0.0],
    [0.0, 0.0, 1.0],
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ReferenceFamily {
    LagrangeP1,
    LagrangeP2,
    Nedelec2,
    Bdm1,
}

/// Where a dof lives and which moment/point it is.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DofDescriptor {
    /// 0 = vertex, 1 = edge, 2 = face.
    pub entity_dim: usize,
    pub entity: usize,
    pub index: usize,
}

impl ReferenceFamily {
    pub fn dim(self) -> usize {
        match self {
            Self::LagrangeP1 => 4,
            Self::LagrangeP2 => 10,
            Self::Nedelec2 | Self::Bdm1 => 12,
        }
    }

    pub fn is_vector(self) -> bool {
        matches!(self, Self::Nedelec2 | Self::Bdm1)
    }

    pub fn dofs(self) -> Vec<DofDescriptor> {
        let d = |entity_dim, entity, index| DofDescriptor { entity_dim, entity, index };
        match self {
            Self::LagrangeP1 => (0..4).map(|v| d(0, v, 0)).collect(),
            Self::LagrangeP2 => (0..4).map(|v| d(0, v, 0)).chain((0..6).map(|e| d(1, e, 0))).collect(),
            Self::Nedelec2 => (0..12).map(|i| d(1, i / 2, i % 2)).collect(),
            Self::Bdm1 => (0..12).map(|i| d(2, i / 3, i % 3)).collect(),
        }
    }
}

/// Basis values and first derivatives at a set of reference points.
///
/// Scalar families store values and gradients; vector families store values
/// and the full Jacobian `∂ⱼφᵢ` from which curl and divergence follow.
#[derive(Debug, Clone)]
pub struct Tabulation {
    pub family: ReferenceFamily,
    pub num_points: usize,
    pub num_basis: usize,
    scalar: Vec<f64>,
    vector: Vec<Vec3>,
    derivative: Vec<Mat3>,
    gradient: Vec<Vec3>,
}

impl Tabulation {
    #[inline]
    fn at(&self, point: usize, basis: usize) -> usize {
        point * self.num_basis + basis
    }

    pub fn scalar(&self, point: usize, basis: usize) -> f64 {
        self.scalar[self.at(point, basis)]
    }

    pub fn gradient(&self, point: usize, basis: usize) -> Vec3 {
        self.gradient[self.at(point, basis)]
    }

    pub fn vector(&self, point: usize, basis: usize) -> Vec3 {
        self.vector[self.at(point, basis)]
    }

    pub fn jacobian(&self, point: usize, basis: usize) -> Mat3 {
        self.derivative[self.at(point, basis)]
    }

    pub fn curl(&self, point: usize, basis: usize) -> Vec3 {
        curl_of(&self.derivative[self.at(point, basis)])
    }

    pub fn divergence(&self, point: usize, basis: usize) -> f64 {
        let m = &self.derivative[self.at(point, basis)];
        m[0][0] + m[1][1] + m[2][2]
    }
}

pub fn curl_of(m: &Mat3) -> Vec3 {
    [m[2][1] - m[1][2], m[0][2] - m[2][0], m[1][0] - m[0][1]]
}

pub fn barycentric(x: &Vec3) -> [f64; 4] {
    [1.0 - x[0] - x[1] - x[2], x[0], x[1], x[2]]
}

pub fn tabulate(family: ReferenceFamily, points: &[Vec3]) -> Tabulation {
    let nb = family.dim();
    let np = points.len();
    let mut t = Tabulation {
        family,
        num_points: np,
        num_basis: nb,
        scalar: Vec::new(),
        vector: Vec::new(),
        derivative: Vec::new(),
        gradient: Vec::new(),
    };
    if family.is_vector() {
        t.vector.reserve(np * nb);
        t.derivative.reserve(np * nb);
    } else {
        t.scalar.reserve(np * nb);
        t.gradient.reserve(np * nb);
    }
    for x in points {
        let l = barycentric(x);
        match family {
            ReferenceFamily::LagrangeP1 => {
                for (i, li) in l.iter().enumerate() {
                    t.scalar.push(*li);
                    t.gradient.push(GRAD_LAMBDA[i]);
                }
            }
            ReferenceFamily::LagrangeP2 => {
                for i in 0..4 {
                    t.scalar.push(l[i] * (2.0 * l[i] - 1.0));
                    t.gradient.push(geom::scale(4.0 * l[i] - 1.0, &GRAD_LAMBDA[i]));
                }
                for [a, b] in LOCAL_EDGES {
                    t.scalar.push(4.0 * l[a] * l[b]);
                    t.gradient.push(geom::add(
                        &geom::scale(4.0 * l[b], &GRAD_LAMBDA[a]),
                        &geom::scale(4.0 * l[a], &GRAD_LAMBDA[b]),
                    ));
                }
            }
            ReferenceFamily::Nedelec2 => {
                for [a, b] in LOCAL_EDGES {
                    let (ga, gb) = (&GRAD_LAMBDA[a], &GRAD_LAMBDA[b]);
                    // λ_a∇λ_b - λ_b∇λ_a
                    t.vector.push(geom::sub(&geom::scale(l[a], gb), &geom::scale(l[b], ga)));
                    t.derivative.push(outer_diff(gb, ga, ga, gb));
                    // -3∇(λ_a λ_b)
                    t.vector
                        .push(geom::scale(-3.0, &geom::add(&geom::scale(l[a], gb), &geom::scale(l[b], ga))));
                    let sym = outer_sum(gb, ga, ga, gb);
                    t.derivative.push(scale_mat(-3.0, &sym));
                }
            }
            ReferenceFamily::Bdm1 => {
                for [a, b, c] in LOCAL_FACES {
                    let idx = [a, b, c];
                    let w = [
                        geom::cross(&GRAD_LAMBDA[b], &GRAD_LAMBDA[c]),
                        geom::cross(&GRAD_LAMBDA[c], &GRAD_LAMBDA[a]),
                        geom::cross(&GRAD_LAMBDA[a], &GRAD_LAMBDA[b]),
                    ];
                    // η_k = λ_k w_k, flux density λ_k on the face
                    let eta: [Vec3; 3] = std::array::from_fn(|k| geom::scale(l[idx[k]], &w[k]));
                    let deta: [Mat3; 3] = std::array::from_fn(|k| outer(&w[k], &GRAD_LAMBDA[idx[k]]));
                    for coeffs in BDM_COMBINATIONS {
                        let mut v = [0.0; 3];
                        let mut d = [[0.0; 3]; 3];
                        for k in 0..3 {
                            v = geom::add(&v, &geom::scale(coeffs[k], &eta[k]));
                            d = add_mat(&d, &scale_mat(coeffs[k], &deta[k]));
                        }
                        t.vector.push(v);
                        t.derivative.push(d);
                    }
                }
            }
        }
    }
    t
}

/// Dual basis to the face moments, in terms of `η_a, η_b, η_c`.
const BDM_COMBINATIONS: [[f64; 3]; 3] = [[2.0, 2.0, 2.0], [-8.0, 16.0, -8.0], [-8.0, -8.0, 16.0]];

fn outer(a: &Vec3, b: &Vec3) -> Mat3 {
    std::array::from_fn(|i| std::array::from_fn(|j| a[i] * b[j]))
}

/// `a bᵀ - c dᵀ`
fn outer_diff(a: &Vec3, b: &Vec3, c: &Vec3, d: &Vec3) -> Mat3 {
    std::array::from_fn(|i| std::array::from_fn(|j| a[i] * b[j] - c[i] * d[j]))
}

/// `a bᵀ + c dᵀ`
fn outer_sum(a: &Vec3, b: &Vec3, c: &Vec3, d: &Vec3) -> Mat3 {
    std::array::from_fn(|i| std::array::from_fn(|j| a[i] * b[j] + c[i] * d[j]))
}

fn scale_mat(s: f64, m: &Mat3) -> Mat3 {
    std::array::from_fn(|i| std::array::from_fn(|j| s * m[i][j]))
}

fn add_mat(a: &Mat3, b: &Mat3) -> Mat3 {
    std::array::from_fn(|i| std::array::from_fn(|j| a[i][j] + b[i][j]))
}

/// Tangential moments `∫₀¹ f(x(s))·(p_b - p_a) q(s) ds` with `q ∈ {1, 2s - 1}`.
pub fn edge_moments(pa: &Vec3, pb: &Vec3, f: &dyn Fn(&Vec3) -> Vec3) -> [f64; 2] {
    let rule = line_rule(9);
    let t = geom::sub(pb, pa);
    let mut m = [0.0; 2];
    for (s, w) in rule.points.iter().zip(&rule.weights) {
        let x = geom::add(pa, &geom::scale(*s, &t));
        let ft = geom::dot(&f(&x), &t);
        m[0] += w * ft;
        m[1] += w * ft * (2.0 * s - 1.0);
    }
    m
}

/// Normal moments `∫ f·N q` over the parameter triangle, `q ∈ {1, λ_b - λ_a, λ_c - λ_a}`.
pub fn face_moments(pa: &Vec3, pb: &Vec3, pc: &Vec3, f: &dyn Fn(&Vec3) -> Vec3) -> [f64; 3] {
    let rule = triangle_rule(9);
    let eb = geom::sub(pb, pa);
    let ec = geom::sub(pc, pa);
    let normal = geom::cross(&eb, &ec);
    let mut m = [0.0; 3];
    for (p, w) in rule.points.iter().zip(&rule.weights) {
        let (s, t) = (p[0], p[1]);
        let x = geom::add(pa, &geom::add(&geom::scale(s, &eb), &geom::scale(t, &ec)));
        let fnrm = geom::dot(&f(&x), &normal);
        let la = 1.0 - s - t;
        m[0] += w * fnrm;
        m[1] += w * fnrm * (s - la);
        m[2] += w * fnrm * (t - la);
    }
    m
}

/// Applies dof functional `dof` of `family` on the tetrahedron with vertices
/// `verts` (in local order) to a vector field `f` (scalar fields use `f(x)[0]`).
pub fn apply_dof(
    family: ReferenceFamily,
    dof: usize,
    verts: &[Vec3; 4],
    f: &dyn Fn(&Vec3) -> Vec3,
) -> f64 {
    match family {
        ReferenceFamily::LagrangeP1 => f(&verts[dof])[0],
        ReferenceFamily::LagrangeP2 => {
            if dof < 4 {
                f(&verts[dof])[0]
            } else {
                let [a, b] = LOCAL_EDGES[dof - 4];
                f(&geom::scale(0.5, &geom::add(&verts[a], &verts[b])))[0]
            }
        }
        ReferenceFamily::Nedelec2 => {
            let [a, b] = LOCAL_EDGES[dof / 2];
            edge_moments(&verts[a], &verts[b], f)[dof % 2]
        }
        ReferenceFamily::Bdm1 => {
            let [a, b, c] = LOCAL_FACES[dof / 3];
            face_moments(&verts[a], &verts[b], &verts[c], f)[dof % 3]
        }
    }
}

/// Covariant (H(curl)) Piola map: `φ = J⁻ᵀ φ̂`, `∇×φ = J (∇̂×φ̂) / det J`.
#[derive(Debug, Clone, Copy)]
pub struct CovariantPiola {
    inverse_transpose: Mat3,
    curl_map: Mat3,
}

impl CovariantPiola {
    pub fn new(geo: &CellGeometry) -> Result<Self> {
        check_det(geo.det)?;
        Ok(Self {
            inverse_transpose: geo.inverse_transpose(),
            curl_map: scale_mat(1.0 / geo.det, &geo.jacobian),
        })
    }

    #[inline]
    pub fn value(&self, v: &Vec3) -> Vec3 {
        geom::matvec(&self.inverse_transpose, v)
    }

    #[inline]
    pub fn curl(&self, c: &Vec3) -> Vec3 {
        geom::matvec(&self.curl_map, c)
    }
}

/// Contravariant (H(div)) Piola map: `φ = J φ̂ / det J`, `∇·φ = ∇̂·φ̂ / det J`.
#[derive(Debug, Clone, Copy)]
pub struct ContravariantPiola {
    value_map: Mat3,
    inv_det: f64,
}

impl ContravariantPiola {
    pub fn new(geo: &CellGeometry) -> Result<Self> {
        check_det(geo.det)?;
        Ok(Self {
            value_map: scale_mat(1.0 / geo.det, &geo.jacobian),
            inv_det: 1.0 / geo.det,
        })
    }

    #[inline]
    pub fn value(&self, v: &Vec3) -> Vec3 {
        geom::matvec(&self.value_map, v)
    }

    #[inline]
    pub fn divergence(&self, d: f64) -> f64 {
        d * self.inv_det
    }

    /// Physical Jacobian `J (∂̂φ̂) J⁻¹ / det J`; needs `J⁻¹` from the geometry.
    pub fn jacobian(&self, geo: &CellGeometry, d: &Mat3) -> Mat3 {
        let left = mat_mul(&self.value_map, d);
        mat_mul(&left, &geo.inverse)
    }
}

fn check_det(det: f64) -> Result<()> {
    if det > 0.0 && det.is_finite() {
        Ok(())
    } else {
        Err(Error::DegenerateCell { cell: usize::MAX, det })
    }
}

pub fn mat_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    std::array::from_fn(|i| std::array::from_fn(|j| (0..3).map(|k| a[i][k] * b[k][j]).sum()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::quadrature;

    fn reference_geometry() -> CellGeometry {
        CellGeometry {
            origin: [0.0; 3],
            jacobian: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            det: 1.0,
            inverse: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
        }
    }

    /// Evaluates basis function `j` at an arbitrary point.
    fn basis_at(family: ReferenceFamily, j: usize) -> impl Fn(&Vec3) -> Vec3 {
        move |x: &Vec3| {
            let t = tabulate(family, &[*x]);
            if family.is_vector() {
                t.vector(0, j)
            } else {
                [t.scalar(0, j), 0.0, 0.0]
            }
        }
    }

    #[test]
    fn kronecker_duality() {
        for family in [
            ReferenceFamily::LagrangeP1,
            ReferenceFamily::LagrangeP2,
            ReferenceFamily::Nedelec2,
            ReferenceFamily::Bdm1,
        ] {
            for j in 0..family.dim() {
                let f = basis_at(family, j);
                for i in 0..family.dim() {
                    let v = apply_dof(family, i, &REFERENCE_VERTICES, &f);
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((v - want).abs() < 1e-12, "{family:?} dof {i} basis {j}: {v}");
                }
            }
        }
    }

    #[test]
    fn p1_mass_matrix() {
        let q = quadrature(4).unwrap();
        let t = tabulate(ReferenceFamily::LagrangeP1, &q.points);
        for i in 0..4 {
            for j in 0..4 {
                let m: f64 = (0..q.len()).map(|p| q.weights[p] * t.scalar(p, i) * t.scalar(p, j)).sum();
                let want = if i == j { 1.0 / 60.0 } else { 1.0 / 120.0 };
                assert!((m - want).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn p1_nodal() {
        let t = tabulate(ReferenceFamily::LagrangeP1, &REFERENCE_VERTICES);
        for p in 0..4 {
            for i in 0..4 {
                assert_eq!(t.scalar(p, i), if p == i { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn bdm_curl_and_divergence_are_constant() {
        let pts = [[0.1, 0.2, 0.3], [0.5, 0.1, 0.05], [0.0, 0.0, 0.0], [0.25, 0.25, 0.25]];
        let t = tabulate(ReferenceFamily::Bdm1, &pts);
        for i in 0..12 {
            for p in 1..pts.len() {
                assert!((t.divergence(p, i) - t.divergence(0, i)).abs() < 1e-14);
                let (c0, c) = (t.curl(0, i), t.curl(p, i));
                assert!(geom::norm(&geom::sub(&c, &c0)) < 1e-14);
            }
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let x = [0.17, 0.23, 0.31];
        let h = 1e-6;
        for family in [ReferenceFamily::LagrangeP2, ReferenceFamily::Nedelec2, ReferenceFamily::Bdm1] {
            let t0 = tabulate(family, &[x]);
            for dir in 0..3 {
                let mut xp = x;
                let mut xm = x;
                xp[dir] += h;
                xm[dir] -= h;
                let (tp, tm) = (tabulate(family, &[xp]), tabulate(family, &[xm]));
                for i in 0..family.dim() {
                    if family.is_vector() {
                        for c in 0..3 {
                            let fd = (tp.vector(0, i)[c] - tm.vector(0, i)[c]) / (2.0 * h);
                            assert!((fd - t0.jacobian(0, i)[c][dir]).abs() < 1e-7);
                        }
                    } else {
                        let fd = (tp.scalar(0, i) - tm.scalar(0, i)) / (2.0 * h);
                        assert!((fd - t0.gradient(0, i)[dir]).abs() < 1e-7);
                    }
                }
            }
        }
    }

    #[test]
    fn piola_identity_and_scaling() {
        let id = reference_geometry();
        let v = [0.3, -1.2, 2.0];
        let cov = CovariantPiola::new(&id).unwrap();
        assert_eq!(cov.value(&v), v);
        assert_eq!(cov.curl(&v), v);
        let con = ContravariantPiola::new(&id).unwrap();
        assert_eq!(con.value(&v), v);

        let s = 2.5;
        let scaled = CellGeometry {
            origin: [0.0; 3],
            jacobian: [[s, 0.0, 0.0], [0.0, s, 0.0], [0.0, 0.0, s]],
            det: s * s * s,
            inverse: [[1.0 / s, 0.0, 0.0], [0.0, 1.0 / s, 0.0], [0.0, 0.0, 1.0 / s]],
        };
        let cov = CovariantPiola::new(&scaled).unwrap();
        let w = cov.value(&v);
        for k in 0..3 {
            assert!((w[k] - v[k] / s).abs() < 1e-15);
        }
        let con = ContravariantPiola::new(&scaled).unwrap();
        assert!((con.divergence(3.0) - 3.0 / (s * s * s)).abs() < 1e-15);
    }

    #[test]
    fn piola_rejects_degenerate_jacobian() {
        let mut g = reference_geometry();
        g.det = 0.0;
        assert!(CovariantPiola::new(&g).is_err());
        assert!(ContravariantPiola::new(&g).is_err());
    }
}
