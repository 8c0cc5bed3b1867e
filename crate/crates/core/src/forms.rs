//! Assembly of the bilinear forms and load vectors of the scheme.
//!
//! Every form is integrated cell by cell with a fixed quadrature degree.
//! Cells are processed in parallel chunks whose triplets are concatenated in
//! cell order, so the assembled matrix does not depend on the thread count.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geom::{self, Mat3, Vec3};
use crate::quadrature::quadrature;
use crate::space::{CellBasis, FeField, FieldValues, FunctionSpace, SpaceFamily};
use crate::sparse::{CsrMatrix, Triplet};

/// Quadrature degree for mass, stiffness and coupling forms.
pub const LINEAR_DEGREE: usize = 4;
/// Quadrature degree for forms with a frozen coefficient field.
pub const TRILINEAR_DEGREE: usize = 6;
/// Quadrature degree for loads and errors against analytic fields.
pub const ANALYTIC_DEGREE: usize = 8;

const CHUNK: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FormKind {
    /// `(u, v)`
    Mass,
    /// `(∇u, ∇v)`
    Stiffness,
    /// `(p, ∇·v)` with scalar trial and vector test.
    DivPressure,
    /// `(B, ∇×F)` for a BDM trial and Nédélec test, or `(∇×E, Z)` for a
    /// Nédélec trial and BDM test.
    CurlCoupling,
    /// `½[(w·∇u, v) − (w·∇v, u)]` with `w` the coefficient field.
    ConvectionSkew,
    /// `(H × b, v)` with `b` the coefficient field.
    CrossLorentz,
    /// `(u × b, F)` with `b` the coefficient field.
    CrossOhm,
}

impl FormKind {
    pub fn quadrature_degree(self) -> usize {
        match self {
            FormKind::ConvectionSkew | FormKind::CrossLorentz | FormKind::CrossOhm => TRILINEAR_DEGREE,
            _ => LINEAR_DEGREE,
        }
    }

    fn needs_coefficient(self) -> bool {
        matches!(self, FormKind::ConvectionSkew | FormKind::CrossLorentz | FormKind::CrossOhm)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct FormDescriptor<'a> {
    pub kind: FormKind,
    pub trial: &'a Arc<FunctionSpace>,
    pub test: &'a Arc<FunctionSpace>,
    pub coefficient: Option<&'a FeField>,
    pub scale: f64,
}

impl<'a> FormDescriptor<'a> {
    pub fn new(kind: FormKind, trial: &'a Arc<FunctionSpace>, test: &'a Arc<FunctionSpace>) -> Self {
        Self { kind, trial, test, coefficient: None, scale: 1.0 }
    }

    pub fn with_coefficient(mut self, field: &'a FeField) -> Self {
        self.coefficient = Some(field);
        self
    }

    pub fn scaled(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }

    fn validate(&self) -> Result<()> {
        use SpaceFamily::*;
        let (tr, te) = (self.trial.family(), self.test.family());
        if !Arc::ptr_eq(self.trial.mesh(), self.test.mesh()) {
            return Err(Error::SpaceMismatch("trial and test spaces live on different meshes".into()));
        }
        let ok = match self.kind {
            FormKind::Mass => tr == te,
            FormKind::Stiffness => tr == te && matches!(tr, VectorP2 | ScalarP1),
            FormKind::DivPressure => tr == ScalarP1 && te == VectorP2,
            FormKind::CurlCoupling => matches!((tr, te), (Bdm1, Nedelec2) | (Nedelec2, Bdm1)),
            FormKind::ConvectionSkew => tr == VectorP2 && te == VectorP2,
            FormKind::CrossLorentz | FormKind::CrossOhm => !tr.is_scalar() && !te.is_scalar(),
        };
        if !ok {
            return Err(Error::SpaceMismatch(format!(
                "{:?} form cannot use trial {tr} and test {te}",
                self.kind
            )));
        }
        match (self.kind.needs_coefficient(), self.coefficient) {
            (true, None) => Err(Error::SpaceMismatch(format!("{:?} form needs a coefficient field", self.kind))),
            (true, Some(c)) => {
                if c.space().family().is_scalar() {
                    return Err(Error::SpaceMismatch("coefficient field must be vector valued".into()));
                }
                if !Arc::ptr_eq(c.space().mesh(), self.trial.mesh()) {
                    return Err(Error::SpaceMismatch("coefficient field lives on a different mesh".into()));
                }
                if c.coeffs.iter().any(|v| !v.is_finite()) {
                    return Err(Error::SpaceMismatch("coefficient field has non-finite entries".into()));
                }
                Ok(())
            }
            (false, _) => Ok(()),
        }
    }
}

/// Assembled block in triplet form; rows index the test space, columns the
/// trial space.
#[derive(Debug, Clone, Default)]
pub struct Block {
    pub nrows: usize,
    pub ncols: usize,
    pub triplets: Vec<Triplet>,
}

impl Block {
    pub fn to_csr(&self) -> CsrMatrix {
        CsrMatrix::from_triplets(self.nrows, self.ncols, &self.triplets).expect("assembled indices are in range")
    }

    pub fn transpose(&self) -> Block {
        Block {
            nrows: self.ncols,
            ncols: self.nrows,
            triplets: self.triplets.iter().map(|&(r, c, v)| (c, r, v)).collect(),
        }
    }

    /// Appends `factor ·` this block at offset `(row, col)`.
    pub fn append_to(&self, out: &mut Vec<Triplet>, row: usize, col: usize, factor: f64) {
        out.extend(self.triplets.iter().map(|&(r, c, v)| (r + row, c + col, factor * v)));
    }
}

pub fn assemble_bilinear(desc: &FormDescriptor) -> Result<Block> {
    desc.validate()?;
    let rule = quadrature(desc.kind.quadrature_degree())?;
    let mesh = desc.trial.mesh();
    let trial_tab = desc.trial.tabulate(&rule.points);
    let test_tab = desc.test.tabulate(&rule.points);
    let coef_tab = desc.coefficient.map(|c| c.space().tabulate(&rule.points));
    let (nt, ns) = (desc.trial.local_dim(), desc.test.local_dim());
    let curl_on_test = desc.test.family() == SpaceFamily::Nedelec2;
    let cells: Vec<usize> = (0..mesh.num_cells()).collect();

    let chunks: Vec<Result<Vec<Triplet>>> = cells
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut trip = Vec::with_capacity(chunk.len() * nt * ns);
            let mut local = vec![0.0; nt * ns];
            for &cell in chunk {
                let geo = mesh.cell_geometry(cell)?;
                let trial = desc.trial.cell_basis(cell, &geo, &trial_tab);
                let test = desc.test.cell_basis(cell, &geo, &test_tab);
                let coef = match (desc.coefficient, &coef_tab) {
                    (Some(c), Some(tab)) => {
                        let basis = c.space().cell_basis(cell, &geo, tab);
                        Some(c.evaluate_basis(cell, &basis))
                    }
                    _ => None,
                };
                let weights: Vec<f64> = rule.weights.iter().map(|w| w * geo.det).collect();
                local.iter_mut().for_each(|v| *v = 0.0);
                local_matrix(desc.kind, &trial, &test, coef.as_ref(), curl_on_test, &weights, &mut local);
                let rows = desc.test.cell_dofs(cell);
                let cols = desc.trial.cell_dofs(cell);
                for (i, &r) in rows.iter().enumerate() {
                    for (j, &c) in cols.iter().enumerate() {
                        let v = local[i * nt + j];
                        if v != 0.0 {
                            trip.push((r, c, desc.scale * v));
                        }
                    }
                }
            }
            Ok(trip)
        })
        .collect();

    let mut triplets = Vec::new();
    for chunk in chunks {
        triplets.extend(chunk?);
    }
    Ok(Block { nrows: desc.test.dim(), ncols: desc.trial.dim(), triplets })
}

pub fn assemble_matrix(desc: &FormDescriptor) -> Result<CsrMatrix> {
    Ok(assemble_bilinear(desc)?.to_csr())
}

/// Frozen-field cross product block `(trial × b, test)`.
pub fn cross_product_block(
    trial: &Arc<FunctionSpace>,
    test: &Arc<FunctionSpace>,
    frozen: &FeField,
) -> Result<Block> {
    let kind = match (trial.family(), test.family()) {
        (SpaceFamily::VectorP2, SpaceFamily::Nedelec2) => FormKind::CrossOhm,
        _ => FormKind::CrossLorentz,
    };
    assemble_bilinear(&FormDescriptor::new(kind, trial, test).with_coefficient(frozen))
}

/// Element matrix `local[i·nt + j] = ∫ integrand(trial j, test i)`.
fn local_matrix(
    kind: FormKind,
    trial: &CellBasis,
    test: &CellBasis,
    coef: Option<&FieldValues>,
    curl_on_test: bool,
    weights: &[f64],
    local: &mut [f64],
) {
    let (nt, ns) = (trial.num_basis, test.num_basis);
    for (p, &w) in weights.iter().enumerate() {
        match kind {
            FormKind::Mass => {
                for i in 0..ns {
                    let vi = test.value(p, i);
                    for j in 0..nt {
                        local[i * nt + j] += w * geom::dot(vi, trial.value(p, j));
                    }
                }
            }
            FormKind::Stiffness => {
                for i in 0..ns {
                    let gi = test.jacobian(p, i);
                    for j in 0..nt {
                        let gj = trial.jacobian(p, j);
                        let mut s = 0.0;
                        for a in 0..3 {
                            s += geom::dot(&gi[a], &gj[a]);
                        }
                        local[i * nt + j] += w * s;
                    }
                }
            }
            FormKind::DivPressure => {
                for i in 0..ns {
                    let di = test.divergence(p, i);
                    for j in 0..nt {
                        local[i * nt + j] += w * trial.scalar(p, j) * di;
                    }
                }
            }
            FormKind::CurlCoupling => {
                if curl_on_test {
                    for i in 0..ns {
                        let ci = test.curl(p, i);
                        for j in 0..nt {
                            local[i * nt + j] += w * geom::dot(trial.value(p, j), ci);
                        }
                    }
                } else {
                    for i in 0..ns {
                        let vi = test.value(p, i);
                        for j in 0..nt {
                            local[i * nt + j] += w * geom::dot(trial.curl(p, j), vi);
                        }
                    }
                }
            }
            FormKind::ConvectionSkew => {
                let wv = &coef.expect("validated").values[p];
                // (w·∇)φ = J φ w
                let trial_adv: Vec<Vec3> = (0..nt).map(|j| geom::matvec(trial.jacobian(p, j), wv)).collect();
                let test_adv: Vec<Vec3> = (0..ns).map(|i| geom::matvec(test.jacobian(p, i), wv)).collect();
                for i in 0..ns {
                    let vi = test.value(p, i);
                    for j in 0..nt {
                        let a = geom::dot(&trial_adv[j], vi) - geom::dot(&test_adv[i], trial.value(p, j));
                        local[i * nt + j] += 0.5 * w * a;
                    }
                }
            }
            FormKind::CrossLorentz | FormKind::CrossOhm => {
                let b = &coef.expect("validated").values[p];
                let crossed: Vec<Vec3> = (0..nt).map(|j| geom::cross(trial.value(p, j), b)).collect();
                for i in 0..ns {
                    let vi = test.value(p, i);
                    for j in 0..nt {
                        local[i * nt + j] += w * geom::dot(&crossed[j], vi);
                    }
                }
            }
        }
    }
}

/// What the analytic field is tested against in [`assemble_load`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoadTest {
    /// `(f, φᵢ)`; scalar spaces use `f[0]`.
    Value,
    /// `(f, ∇×φᵢ)`
    Curl,
    /// `(f[0], ∇·φᵢ)`
    Divergence,
}

/// Load vector `∫ f·φᵢ` by quadrature of the given degree.
pub fn assemble_load(
    space: &Arc<FunctionSpace>,
    f: &(dyn Fn(&Vec3) -> Vec3 + Sync),
    degree: usize,
) -> Result<Vec<f64>> {
    assemble_load_with(space, f, LoadTest::Value, degree)
}

pub fn assemble_load_with(
    space: &Arc<FunctionSpace>,
    f: &(dyn Fn(&Vec3) -> Vec3 + Sync),
    test: LoadTest,
    degree: usize,
) -> Result<Vec<f64>> {
    let rule = quadrature(degree)?;
    let mesh = space.mesh();
    let tab = space.tabulate(&rule.points);
    let nb = space.local_dim();
    let cells: Vec<usize> = (0..mesh.num_cells()).collect();
    let chunks: Vec<Result<Vec<(usize, f64)>>> = cells
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut out = Vec::with_capacity(chunk.len() * nb);
            for &cell in chunk {
                let geo = mesh.cell_geometry(cell)?;
                let basis = space.cell_basis(cell, &geo, &tab);
                let mut local = vec![0.0; nb];
                for (p, (xr, w)) in rule.points.iter().zip(&rule.weights).enumerate() {
                    let fx = f(&geo.map(xr));
                    let w = w * geo.det;
                    for (i, l) in local.iter_mut().enumerate() {
                        *l += w * match test {
                            LoadTest::Value => geom::dot(&fx, basis.value(p, i)),
                            LoadTest::Curl => geom::dot(&fx, basis.curl(p, i)),
                            LoadTest::Divergence => fx[0] * basis.divergence(p, i),
                        };
                    }
                }
                out.extend(space.cell_dofs(cell).iter().copied().zip(local));
            }
            Ok(out)
        })
        .collect();
    scatter(space.dim(), chunks)
}

/// Gradient load `∫ G : ∇φᵢ` for a matrix field `G[a][b] ≈ ∂_b u_a`.
/// Scalar spaces use row 0 of `G`.
pub fn assemble_gradient_load(
    space: &Arc<FunctionSpace>,
    g: &(dyn Fn(&Vec3) -> Mat3 + Sync),
    degree: usize,
) -> Result<Vec<f64>> {
    let rule = quadrature(degree)?;
    let mesh = space.mesh();
    let tab = space.tabulate(&rule.points);
    let nb = space.local_dim();
    let cells: Vec<usize> = (0..mesh.num_cells()).collect();
    let chunks: Vec<Result<Vec<(usize, f64)>>> = cells
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut out = Vec::with_capacity(chunk.len() * nb);
            for &cell in chunk {
                let geo = mesh.cell_geometry(cell)?;
                let basis = space.cell_basis(cell, &geo, &tab);
                let mut local = vec![0.0; nb];
                for (p, (xr, w)) in rule.points.iter().zip(&rule.weights).enumerate() {
                    let gx = g(&geo.map(xr));
                    let w = w * geo.det;
                    for (i, l) in local.iter_mut().enumerate() {
                        let j = basis.jacobian(p, i);
                        *l += w * (0..3).map(|a| geom::dot(&gx[a], &j[a])).sum::<f64>();
                    }
                }
                out.extend(space.cell_dofs(cell).iter().copied().zip(local));
            }
            Ok(out)
        })
        .collect();
    scatter(space.dim(), chunks)
}

/// Load `(field, φᵢ)` (or against `∇×φᵢ`, `∇·φᵢ`) for a finite element
/// field that may live in a different space on the same mesh.
pub fn assemble_field_load(space: &Arc<FunctionSpace>, field: &FeField, test: LoadTest) -> Result<Vec<f64>> {
    if !Arc::ptr_eq(space.mesh(), field.space().mesh()) {
        return Err(Error::SpaceMismatch("field and test space live on different meshes".into()));
    }
    let rule = quadrature(LINEAR_DEGREE)?;
    let mesh = space.mesh();
    let tab = space.tabulate(&rule.points);
    let field_tab = field.space().tabulate(&rule.points);
    let nb = space.local_dim();
    let cells: Vec<usize> = (0..mesh.num_cells()).collect();
    let chunks: Vec<Result<Vec<(usize, f64)>>> = cells
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut out = Vec::with_capacity(chunk.len() * nb);
            for &cell in chunk {
                let geo = mesh.cell_geometry(cell)?;
                let basis = space.cell_basis(cell, &geo, &tab);
                let fb = field.space().cell_basis(cell, &geo, &field_tab);
                let values = field.evaluate_basis(cell, &fb).values;
                let mut local = vec![0.0; nb];
                for (p, w) in rule.weights.iter().enumerate() {
                    let w = w * geo.det;
                    let fx = &values[p];
                    for (i, l) in local.iter_mut().enumerate() {
                        *l += w * match test {
                            LoadTest::Value => geom::dot(fx, basis.value(p, i)),
                            LoadTest::Curl => geom::dot(fx, basis.curl(p, i)),
                            LoadTest::Divergence => fx[0] * basis.divergence(p, i),
                        };
                    }
                }
                out.extend(space.cell_dofs(cell).iter().copied().zip(local));
            }
            Ok(out)
        })
        .collect();
    scatter(space.dim(), chunks)
}

fn scatter(dim: usize, chunks: Vec<Result<Vec<(usize, f64)>>>) -> Result<Vec<f64>> {
    let mut load = vec![0.0; dim];
    for chunk in chunks {
        for (d, v) in chunk? {
            load[d] += v;
        }
    }
    Ok(load)
}
