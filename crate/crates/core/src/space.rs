//! Global function spaces over a [`Mesh`]: dof maps, boundary dofs,
//! canonical interpolation and evaluation of finite element fields.
//!
//! Every local basis function maps to exactly one global basis function up to
//! a sign; see [`crate::mesh`] for the canonical cell ordering that makes
//! this possible for the edge and face families.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geom::{self, Mat3, Vec3};
use crate::mesh::{CellGeometry, Mesh};
use crate::reference::{
    self, edge_moments, face_moments, ContravariantPiola, CovariantPiola, ReferenceFamily, Tabulation,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SpaceFamily {
    /// Continuous vector P2 (`V_h`).
    VectorP2,
    /// Continuous scalar P1 (`Q_h`).
    ScalarP1,
    /// Lowest-order second-kind Nédélec (`C_h`).
    Nedelec2,
    /// Lowest-order Brezzi–Douglas–Marini (`D_h`).
    Bdm1,
}

impl SpaceFamily {
    pub fn reference(self) -> ReferenceFamily {
        match self {
            Self::VectorP2 => ReferenceFamily::LagrangeP2,
            Self::ScalarP1 => ReferenceFamily::LagrangeP1,
            Self::Nedelec2 => ReferenceFamily::Nedelec2,
            Self::Bdm1 => ReferenceFamily::Bdm1,
        }
    }

    pub fn local_dim(self) -> usize {
        match self {
            Self::VectorP2 => 30,
            Self::ScalarP1 => 4,
            Self::Nedelec2 | Self::Bdm1 => 12,
        }
    }

    pub fn is_scalar(self) -> bool {
        self == Self::ScalarP1
    }
}

impl fmt::Display for SpaceFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Self::VectorP2 => "V_h (vector P2)",
            Self::ScalarP1 => "Q_h (P1)",
            Self::Nedelec2 => "C_h (Nédélec, second kind)",
            Self::Bdm1 => "D_h (BDM1)",
        };
        f.write_str(name)
    }
}

pub struct FunctionSpace {
    mesh: Arc<Mesh>,
    family: SpaceFamily,
    dim: usize,
    cell_dofs: Vec<usize>,
    cell_signs: Vec<f64>,
    boundary: Vec<bool>,
}

impl fmt::Debug for FunctionSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FunctionSpace")
            .field("family", &self.family)
            .field("dim", &self.dim)
            .finish_non_exhaustive()
    }
}

/// Physical basis functions of one cell at a set of points, signs applied.
#[derive(Debug, Clone)]
pub struct CellBasis {
    pub num_basis: usize,
    pub num_points: usize,
    /// Scalar values are stored in component 0.
    pub values: Vec<Vec3>,
    /// `∂ⱼφᵢ`; scalar gradients are stored in row 0.
    pub jacobians: Vec<Mat3>,
    pub curls: Vec<Vec3>,
    pub divergences: Vec<f64>,
}

impl CellBasis {
    #[inline]
    pub fn at(&self, point: usize, basis: usize) -> usize {
        point * self.num_basis + basis
    }

    #[inline]
    pub fn value(&self, point: usize, basis: usize) -> &Vec3 {
        &self.values[self.at(point, basis)]
    }

    #[inline]
    pub fn scalar(&self, point: usize, basis: usize) -> f64 {
        self.values[self.at(point, basis)][0]
    }

    #[inline]
    pub fn gradient(&self, point: usize, basis: usize) -> &Vec3 {
        &self.jacobians[self.at(point, basis)][0]
    }

    #[inline]
    pub fn jacobian(&self, point: usize, basis: usize) -> &Mat3 {
        &self.jacobians[self.at(point, basis)]
    }

    #[inline]
    pub fn curl(&self, point: usize, basis: usize) -> &Vec3 {
        &self.curls[self.at(point, basis)]
    }

    #[inline]
    pub fn divergence(&self, point: usize, basis: usize) -> f64 {
        self.divergences[self.at(point, basis)]
    }
}

/// Prescribed values for essential boundary dofs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EssentialBc {
    pub dofs: Vec<usize>,
    pub values: Vec<f64>,
}

impl EssentialBc {
    /// Dense per-dof view: `Some(value)` for constrained dofs.
    pub fn as_dense(&self, dim: usize) -> Vec<Option<f64>> {
        let mut out = vec![None; dim];
        for (&d, &v) in self.dofs.iter().zip(&self.values) {
            out[d] = Some(v);
        }
        out
    }
}

impl FunctionSpace {
    pub fn new(mesh: Arc<Mesh>, family: SpaceFamily) -> Arc<Self> {
        let nv = mesh.num_vertices();
        let ne = mesh.num_edges();
        let nf = mesh.num_faces();
        let nc = mesh.num_cells();
        let ld = family.local_dim();
        let mut cell_dofs = Vec::with_capacity(nc * ld);
        let mut cell_signs = Vec::with_capacity(nc * ld);
        let (dim, boundary) = match family {
            SpaceFamily::ScalarP1 => {
                for tet in mesh.cells() {
                    cell_dofs.extend_from_slice(tet);
                    cell_signs.extend_from_slice(&[1.0; 4]);
                }
                (nv, (0..nv).map(|v| mesh.is_boundary_vertex(v)).collect::<Vec<_>>())
            }
            SpaceFamily::VectorP2 => {
                let nodes = nv + ne;
                for (c, tet) in mesh.cells().iter().enumerate() {
                    for comp in 0..3 {
                        for v in tet {
                            cell_dofs.push(comp * nodes + v);
                        }
                        for e in mesh.cell_edges(c) {
                            cell_dofs.push(comp * nodes + nv + e);
                        }
                    }
                    cell_signs.extend_from_slice(&[1.0; 30]);
                }
                let node_boundary: Vec<bool> = (0..nv)
                    .map(|v| mesh.is_boundary_vertex(v))
                    .chain((0..ne).map(|e| mesh.is_boundary_edge(e)))
                    .collect();
                (3 * nodes, node_boundary.repeat(3))
            }
            SpaceFamily::Nedelec2 => {
                for c in 0..nc {
                    let edges = mesh.cell_edges(c);
                    let signs = mesh.cell_edge_signs(c);
                    for (e, s) in edges.iter().zip(signs) {
                        // reversing an edge flips the constant moment only
                        cell_dofs.extend_from_slice(&[2 * e, 2 * e + 1]);
                        cell_signs.extend_from_slice(&[f64::from(*s), 1.0]);
                    }
                }
                let b = (0..ne).flat_map(|e| [mesh.is_boundary_edge(e); 2]).collect();
                (2 * ne, b)
            }
            SpaceFamily::Bdm1 => {
                for c in 0..nc {
                    let faces = mesh.cell_faces(c);
                    let signs = mesh.cell_face_signs(c);
                    for (f, s) in faces.iter().zip(signs) {
                        if *s > 0 {
                            cell_dofs.extend_from_slice(&[3 * f, 3 * f + 1, 3 * f + 2]);
                            cell_signs.extend_from_slice(&[1.0; 3]);
                        } else {
                            // local triple is the sorted triple with its last two
                            // vertices swapped: normal flips, weights 1 and 2 trade
                            cell_dofs.extend_from_slice(&[3 * f, 3 * f + 2, 3 * f + 1]);
                            cell_signs.extend_from_slice(&[-1.0; 3]);
                        }
                    }
                }
                let b = (0..nf).flat_map(|f| [mesh.is_boundary_face(f); 3]).collect();
                (3 * nf, b)
            }
        };
        Arc::new(Self {
            mesh,
            family,
            dim,
            cell_dofs,
            cell_signs,
            boundary,
        })
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn family(&self) -> SpaceFamily {
        self.family
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn local_dim(&self) -> usize {
        self.family.local_dim()
    }

    pub fn cell_dofs(&self, cell: usize) -> &[usize] {
        let ld = self.local_dim();
        &self.cell_dofs[cell * ld..(cell + 1) * ld]
    }

    pub fn cell_signs(&self, cell: usize) -> &[f64] {
        let ld = self.local_dim();
        &self.cell_signs[cell * ld..(cell + 1) * ld]
    }

    pub fn is_boundary_dof(&self, dof: usize) -> bool {
        self.boundary[dof]
    }

    pub fn boundary_dofs(&self) -> Vec<usize> {
        (0..self.dim).filter(|&d| self.boundary[d]).collect()
    }

    pub fn interior_dofs(&self) -> Vec<usize> {
        (0..self.dim).filter(|&d| !self.boundary[d]).collect()
    }

    pub fn tabulate(&self, points: &[Vec3]) -> Tabulation {
        reference::tabulate(self.family.reference(), points)
    }

    /// Pushes a reference tabulation forward to `cell`.
    pub fn cell_basis(&self, cell: usize, geo: &CellGeometry, tab: &Tabulation) -> CellBasis {
        debug_assert_eq!(tab.family, self.family.reference());
        let nb = self.local_dim();
        let np = tab.num_points;
        let signs = self.cell_signs(cell);
        let mut out = CellBasis {
            num_basis: nb,
            num_points: np,
            values: Vec::with_capacity(np * nb),
            jacobians: Vec::with_capacity(np * nb),
            curls: Vec::with_capacity(np * nb),
            divergences: Vec::with_capacity(np * nb),
        };
        let jit = geo.inverse_transpose();
        match self.family {
            SpaceFamily::ScalarP1 => {
                for p in 0..np {
                    for i in 0..nb {
                        let g = geom::matvec(&jit, &tab.gradient(p, i));
                        out.values.push([tab.scalar(p, i), 0.0, 0.0]);
                        out.jacobians.push([g, [0.0; 3], [0.0; 3]]);
                        out.curls.push([0.0; 3]);
                        out.divergences.push(0.0);
                    }
                }
            }
            SpaceFamily::VectorP2 => {
                for p in 0..np {
                    let grads: [Vec3; 10] = std::array::from_fn(|a| geom::matvec(&jit, &tab.gradient(p, a)));
                    for comp in 0..3 {
                        for a in 0..10 {
                            let mut v = [0.0; 3];
                            v[comp] = tab.scalar(p, a);
                            let mut jac = [[0.0; 3]; 3];
                            jac[comp] = grads[a];
                            out.values.push(v);
                            out.jacobians.push(jac);
                            out.curls.push(reference::curl_of(&jac));
                            out.divergences.push(grads[a][comp]);
                        }
                    }
                }
            }
            SpaceFamily::Nedelec2 => {
                let piola = CovariantPiola::new(geo).expect("valid cell geometry");
                for p in 0..np {
                    for i in 0..nb {
                        let s = signs[i];
                        let dref = tab.jacobian(p, i);
                        let jac = reference::mat_mul(&reference::mat_mul(&jit, &dref), &geo.inverse);
                        out.values.push(geom::scale(s, &piola.value(&tab.vector(p, i))));
                        out.jacobians.push(scale_mat(s, &jac));
                        out.curls.push(geom::scale(s, &piola.curl(&tab.curl(p, i))));
                        out.divergences.push(s * (jac[0][0] + jac[1][1] + jac[2][2]));
                    }
                }
            }
            SpaceFamily::Bdm1 => {
                let piola = ContravariantPiola::new(geo).expect("valid cell geometry");
                for p in 0..np {
                    for i in 0..nb {
                        let s = signs[i];
                        let jac = piola.jacobian(geo, &tab.jacobian(p, i));
                        out.values.push(geom::scale(s, &piola.value(&tab.vector(p, i))));
                        out.jacobians.push(scale_mat(s, &jac));
                        out.curls.push(geom::scale(s, &reference::curl_of(&jac)));
                        out.divergences.push(s * piola.divergence(tab.divergence(p, i)));
                    }
                }
            }
        }
        out
    }

    /// Canonical (dof-functional) interpolant of `f`. Scalar spaces read `f(x)[0]`.
    pub fn interpolate(self: &Arc<Self>, f: impl Fn(&Vec3) -> Vec3) -> FeField {
        let coeffs = self.interpolate_dofs(&f, |_| true);
        FeField::new(self.clone(), coeffs).expect("length matches")
    }

    pub fn interpolate_scalar(self: &Arc<Self>, f: impl Fn(&Vec3) -> f64) -> FeField {
        self.interpolate(|x| [f(x), 0.0, 0.0])
    }

    /// Dof values of `f`, computed only where `keep(dof)` holds (zero elsewhere).
    fn interpolate_dofs(&self, f: &dyn Fn(&Vec3) -> Vec3, keep: impl Fn(usize) -> bool) -> Vec<f64> {
        let mesh = &self.mesh;
        let nv = mesh.num_vertices();
        let mut c = vec![0.0; self.dim];
        match self.family {
            SpaceFamily::ScalarP1 => {
                for v in (0..nv).filter(|&v| keep(v)) {
                    c[v] = f(&mesh.vertex(v))[0];
                }
            }
            SpaceFamily::VectorP2 => {
                let nodes = nv + mesh.num_edges();
                for node in (0..nodes).filter(|&n| (0..3).any(|k| keep(k * nodes + n))) {
                    let x = if node < nv {
                        mesh.vertex(node)
                    } else {
                        let [a, b] = mesh.edges()[node - nv];
                        geom::scale(0.5, &geom::add(&mesh.vertex(a), &mesh.vertex(b)))
                    };
                    let val = f(&x);
                    for k in 0..3 {
                        c[k * nodes + node] = val[k];
                    }
                }
            }
            SpaceFamily::Nedelec2 => {
                for (e, [a, b]) in mesh.edges().iter().enumerate() {
                    if keep(2 * e) || keep(2 * e + 1) {
                        let m = edge_moments(&mesh.vertex(*a), &mesh.vertex(*b), f);
                        c[2 * e..2 * e + 2].copy_from_slice(&m);
                    }
                }
            }
            SpaceFamily::Bdm1 => {
                for (fi, [a, b, cc]) in mesh.faces().iter().enumerate() {
                    if (0..3).any(|k| keep(3 * fi + k)) {
                        let m = face_moments(&mesh.vertex(*a), &mesh.vertex(*b), &mesh.vertex(*cc), f);
                        c[3 * fi..3 * fi + 3].copy_from_slice(&m);
                    }
                }
            }
        }
        c
    }

    /// Boundary dofs and their values: zero when `data` is `None`, otherwise
    /// the canonical dof values of `data` (boundary lifting).
    pub fn essential_bc(&self, data: Option<&dyn Fn(&Vec3) -> Vec3>) -> Result<EssentialBc> {
        if self.family == SpaceFamily::ScalarP1 {
            return Err(Error::UnsupportedBoundaryCondition(
                "the pressure space; it carries a mean-zero constraint instead".into(),
            ));
        }
        let dofs = self.boundary_dofs();
        let values = match data {
            None => vec![0.0; dofs.len()],
            Some(f) => {
                let all = self.interpolate_dofs(f, |d| self.boundary[d]);
                dofs.iter().map(|&d| all[d]).collect()
            }
        };
        Ok(EssentialBc { dofs, values })
    }
}

fn scale_mat(s: f64, m: &Mat3) -> Mat3 {
    std::array::from_fn(|i| std::array::from_fn(|j| s * m[i][j]))
}

/// Values of a field (and its derivatives) at points of one cell.
#[derive(Debug, Clone, Default)]
pub struct FieldValues {
    pub values: Vec<Vec3>,
    pub jacobians: Vec<Mat3>,
    pub curls: Vec<Vec3>,
    pub divergences: Vec<f64>,
}

/// Coefficient vector bound to a [`FunctionSpace`].
#[derive(Clone)]
pub struct FeField {
    space: Arc<FunctionSpace>,
    pub coeffs: Vec<f64>,
}

impl fmt::Debug for FeField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FeField")
            .field("family", &self.space.family)
            .field("dim", &self.coeffs.len())
            .finish()
    }
}

impl FeField {
    pub fn new(space: Arc<FunctionSpace>, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != space.dim() {
            return Err(Error::SpaceMismatch(format!(
                "coefficient vector of length {} for {} of dimension {}",
                coeffs.len(),
                space.family(),
                space.dim()
            )));
        }
        Ok(Self { space, coeffs })
    }

    pub fn zeros(space: Arc<FunctionSpace>) -> Self {
        let coeffs = vec![0.0; space.dim()];
        Self { space, coeffs }
    }

    pub fn space(&self) -> &Arc<FunctionSpace> {
        &self.space
    }

    /// Local coefficients of `cell` in local basis order.
    pub fn local_coeffs(&self, cell: usize) -> Vec<f64> {
        self.space.cell_dofs(cell).iter().map(|&d| self.coeffs[d]).collect()
    }

    /// Combines a precomputed cell basis with this field's coefficients.
    pub fn evaluate_basis(&self, cell: usize, basis: &CellBasis) -> FieldValues {
        let local = self.local_coeffs(cell);
        let np = basis.num_points;
        let mut out = FieldValues {
            values: vec![[0.0; 3]; np],
            jacobians: vec![[[0.0; 3]; 3]; np],
            curls: vec![[0.0; 3]; np],
            divergences: vec![0.0; np],
        };
        for p in 0..np {
            for (i, &c) in local.iter().enumerate() {
                if c == 0.0 {
                    continue;
                }
                let k = basis.at(p, i);
                let v = &basis.values[k];
                let j = &basis.jacobians[k];
                let cu = &basis.curls[k];
                for a in 0..3 {
                    out.values[p][a] += c * v[a];
                    out.curls[p][a] += c * cu[a];
                    for b in 0..3 {
                        out.jacobians[p][a][b] += c * j[a][b];
                    }
                }
                out.divergences[p] += c * basis.divergences[k];
            }
        }
        out
    }

    /// Values, derivatives, curls and divergences at reference points of `cell`.
    pub fn evaluate(&self, cell: usize, points: &[Vec3]) -> FieldValues {
        let geo = self
            .space
            .mesh()
            .cell_geometry(cell)
            .expect("mesh cells are positively oriented");
        let tab = self.space.tabulate(points);
        let basis = self.space.cell_basis(cell, &geo, &tab);
        self.evaluate_basis(cell, &basis)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::triangle_rule;

    fn spaces(n: usize) -> (Arc<Mesh>, [Arc<FunctionSpace>; 4]) {
        let mesh = Arc::new(Mesh::structured_cube(n).unwrap());
        let s = [
            SpaceFamily::VectorP2,
            SpaceFamily::ScalarP1,
            SpaceFamily::Nedelec2,
            SpaceFamily::Bdm1,
        ]
        .map(|f| FunctionSpace::new(mesh.clone(), f));
        (mesh, s)
    }

    #[test]
    fn dimensions() {
        let (mesh, [v, q, c, d]) = spaces(1);
        assert_eq!(c.dim(), 38);
        assert_eq!(d.dim(), 54);
        assert_eq!(v.dim(), 3 * (8 + 19));
        assert_eq!(q.dim(), mesh.num_vertices());
        let (_, [_, q2, _, _]) = spaces(2);
        assert_eq!(q2.dim(), 27);
    }

    #[test]
    fn velocity_boundary_on_one_cube() {
        let (mesh, [v, q, c, _]) = spaces(1);
        let bc = v.essential_bc(None).unwrap();
        // the Kuhn body diagonal (0,0,0)-(1,1,1) is the only interior entity
        let interior: Vec<_> = (0..mesh.num_edges()).filter(|&e| !mesh.is_boundary_edge(e)).collect();
        assert_eq!(interior.len(), 1);
        assert_eq!(mesh.edges()[interior[0]], [0, 7]);
        assert_eq!(bc.dofs.len(), v.dim() - 3);
        assert!(bc.values.iter().all(|&x| x == 0.0));
        assert!(c.essential_bc(None).unwrap().values.iter().all(|&x| x == 0.0));
        assert!(matches!(
            q.essential_bc(None),
            Err(Error::UnsupportedBoundaryCondition(_))
        ));
    }

    #[test]
    fn lifting_matches_edge_moments() {
        let (mesh, [_, _, c, _]) = spaces(2);
        let e_field = |x: &Vec3| [x[1] * x[1] + 1.0, x[0].powi(3) - x[1], x[0] * x[2]];
        let bc = c.essential_bc(Some(&e_field)).unwrap();
        assert!(!bc.dofs.is_empty());
        let rule = crate::quadrature::line_rule(10);
        for (&dof, &val) in bc.dofs.iter().zip(&bc.values) {
            let [a, b] = mesh.edges()[dof / 2];
            let (pa, pb) = (mesh.vertex(a), mesh.vertex(b));
            let t = geom::sub(&pb, &pa);
            // direct quadrature of the edge moment
            let m: f64 = rule
                .points
                .iter()
                .zip(&rule.weights)
                .map(|(s, w)| {
                    let x = geom::add(&pa, &geom::scale(*s, &t));
                    let q = if dof % 2 == 0 { 1.0 } else { 2.0 * s - 1.0 };
                    w * geom::dot(&e_field(&x), &t) * q
                })
                .sum();
            assert!((m - val).abs() < 1e-12);
        }
    }

    #[test]
    fn interpolation_reproduces_polynomial_range() {
        let (mesh, [v, q, c, d]) = spaces(2);
        let lin = |x: &Vec3| [1.0 + 2.0 * x[0] - x[2], x[1] - 0.5 * x[0], 3.0 * x[2] + x[1]];
        let quad = |x: &Vec3| [x[0] * x[1], x[2] * x[2] - x[0], 1.0 + x[1] * x[2]];
        let pts = [[0.1, 0.2, 0.3], [0.25, 0.25, 0.25], [0.6, 0.1, 0.2]];
        let fields = [
            (v.interpolate(quad), &quad as &dyn Fn(&Vec3) -> Vec3, 3),
            (c.interpolate(lin), &lin as &dyn Fn(&Vec3) -> Vec3, 3),
            (d.interpolate(lin), &lin as &dyn Fn(&Vec3) -> Vec3, 3),
            (q.interpolate_scalar(|x| 2.0 * x[0] - x[1] + 0.5), &lin as &dyn Fn(&Vec3) -> Vec3, 1),
        ];
        for (k, (field, f, ncomp)) in fields.iter().enumerate() {
            for cell in 0..mesh.num_cells() {
                let geo = mesh.cell_geometry(cell).unwrap();
                let vals = field.evaluate(cell, &pts);
                for (p, xr) in pts.iter().enumerate() {
                    let x = geo.map(xr);
                    let want = if k == 3 { [2.0 * x[0] - x[1] + 0.5, 0.0, 0.0] } else { f(&x) };
                    for a in 0..*ncomp {
                        assert!((vals.values[p][a] - want[a]).abs() < 1e-12, "field {k}");
                    }
                }
            }
        }
    }

    #[test]
    fn bdm_divergence_of_interpolants() {
        let (mesh, [_, _, _, d]) = spaces(2);
        let constant = d.interpolate(|_| [1.0, 0.0, 0.0]);
        let linear = d.interpolate(|x| [x[0], 0.0, 0.0]);
        for cell in 0..mesh.num_cells() {
            let a = constant.evaluate(cell, &[[0.2, 0.2, 0.2]]);
            assert!(a.divergences[0].abs() < 1e-12);
            assert!((a.values[0][0] - 1.0).abs() < 1e-13);
            let b = linear.evaluate(cell, &[[0.1, 0.3, 0.2]]);
            assert!((b.divergences[0] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn evaluation_is_linear_and_matches_basis() {
        let (mesh, [_, _, c, _]) = spaces(1);
        let zero = FeField::zeros(c.clone());
        let pts = [[0.1, 0.1, 0.1]];
        assert!(zero.evaluate(0, &pts).values[0].iter().all(|&x| x == 0.0));
        let cell = 3;
        let dof = c.cell_dofs(cell)[7];
        let sign = c.cell_signs(cell)[7];
        let mut single = FeField::zeros(c.clone());
        single.coeffs[dof] = 1.0;
        let geo = mesh.cell_geometry(cell).unwrap();
        let basis = c.cell_basis(cell, &geo, &c.tabulate(&pts));
        let got = single.evaluate(cell, &pts).values[0];
        let want = basis.value(0, 7);
        for k in 0..3 {
            assert!((got[k] - want[k]).abs() < 1e-15);
        }
        assert_eq!(sign.abs(), 1.0);
    }

    /// Traces of random fields agree across every interior face.
    #[test]
    fn interface_continuity() {
        let (mesh, spaces) = spaces(2);
        let tri = triangle_rule(4);
        let mut seed = 12345u64;
        let mut rnd = move || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((seed >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        for space in spaces.iter() {
            let coeffs: Vec<f64> = (0..space.dim()).map(|_| rnd()).collect();
            let field = FeField::new(space.clone(), coeffs).unwrap();
            for f in 0..mesh.num_faces() {
                let (c0, Some(c1)) = mesh.face_cells(f) else { continue };
                let [a, b, c] = mesh.faces()[f];
                let (pa, pb, pc) = (mesh.vertex(a), mesh.vertex(b), mesh.vertex(c));
                let normal = geom::cross(&geom::sub(&pb, &pa), &geom::sub(&pc, &pa));
                let xs: Vec<Vec3> = tri
                    .points
                    .iter()
                    .map(|p| {
                        geom::add(
                            &pa,
                            &geom::add(&geom::scale(p[0], &geom::sub(&pb, &pa)), &geom::scale(p[1], &geom::sub(&pc, &pa))),
                        )
                    })
                    .collect();
                let eval = |cell: usize| {
                    let geo = mesh.cell_geometry(cell).unwrap();
                    let refs: Vec<Vec3> = xs.iter().map(|x| geo.pullback(x)).collect();
                    field.evaluate(cell, &refs).values
                };
                let (v0, v1) = (eval(c0), eval(c1));
                for (x0, x1) in v0.iter().zip(&v1) {
                    let diff = geom::sub(x0, x1);
                    let err = match space.family() {
                        SpaceFamily::Nedelec2 => geom::norm(&geom::cross(&diff, &normal)),
                        SpaceFamily::Bdm1 => geom::dot(&diff, &normal).abs(),
                        _ => geom::norm(&diff),
                    };
                    assert!(err < 1e-12, "{:?} face {f}: {err}", space.family());
                }
            }
        }
    }
}
