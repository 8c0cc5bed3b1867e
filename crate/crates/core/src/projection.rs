//! Projection operators: the discrete curl, the L² projection onto the
//! Nédélec space, the Stokes projection and the L² projection onto
//! divergence-free BDM fields.

use std::sync::Arc;

use crate::diagnostics::divergence_inf;
use crate::error::{Error, Result};
use crate::forms::{
    assemble_bilinear, assemble_field_load, assemble_gradient_load, assemble_load, assemble_load_with,
    assemble_matrix, FormDescriptor, FormKind, LoadTest, ANALYTIC_DEGREE,
};
use crate::geom::{Mat3, Vec3};
use crate::space::{FeField, FunctionSpace, SpaceFamily};
use crate::sparse::{eliminate_constraints, lu_factor, CsrMatrix, Factorization, Triplet};

pub type VectorFn<'a> = &'a (dyn Fn(&Vec3) -> Vec3 + Sync);
pub type MatrixFn<'a> = &'a (dyn Fn(&Vec3) -> Mat3 + Sync);
pub type ScalarFn<'a> = &'a (dyn Fn(&Vec3) -> f64 + Sync);

const REFINEMENT_STEPS: usize = 3;

/// Result of a projection together with its constraint and solver residuals.
#[derive(Debug, Clone)]
pub struct ProjectionReport {
    pub field: FeField,
    /// `max_K |∇·B_h|` for BDM outputs, `None` otherwise.
    pub divergence_inf: Option<f64>,
    /// Scaled residual of the linear system that was solved.
    pub residual: f64,
    pub system_size: usize,
}

fn require(space: &FunctionSpace, family: SpaceFamily) -> Result<()> {
    if space.family() != family {
        return Err(Error::SpaceMismatch(format!("expected {family}, got {}", space.family())));
    }
    Ok(())
}

/// L² projection onto the Nédélec space with vanishing tangential trace
/// (`C_h ⊂ H₀(curl)`), and the discrete curl `(∇_h×B, F) = (B, ∇×F)`.
///
/// The mass matrix on interior dofs is factored once.
pub struct DiscreteCurl {
    space: Arc<FunctionSpace>,
    interior: Vec<usize>,
    mass: CsrMatrix,
    lu: Factorization,
}

impl DiscreteCurl {
    pub fn new(space: &Arc<FunctionSpace>) -> Result<Self> {
        require(space, SpaceFamily::Nedelec2)?;
        let interior = space.interior_dofs();
        let full = assemble_matrix(&FormDescriptor::new(FormKind::Mass, space, space))?;
        let mass = full.select(&interior, &interior);
        let lu = lu_factor(&mass)?;
        Ok(Self { space: space.clone(), interior, mass, lu })
    }

    pub fn space(&self) -> &Arc<FunctionSpace> {
        &self.space
    }

    /// Solves `(X, F) = rhs(F)` for all interior `F`; `rhs` is indexed by
    /// global dofs and boundary entries are ignored.
    pub fn solve_full(&self, rhs: &[f64]) -> Result<(FeField, f64)> {
        let b: Vec<f64> = self.interior.iter().map(|&d| rhs[d]).collect();
        let x = self.lu.solve(&b)?;
        let residual = self.lu.relative_residual(&x, &b);
        let mut coeffs = vec![0.0; self.space.dim()];
        for (&d, v) in self.interior.iter().zip(x) {
            coeffs[d] = v;
        }
        Ok((FeField::new(self.space.clone(), coeffs)?, residual))
    }

    /// `∇_h × field` for a vector field in any space on the same mesh.
    pub fn apply(&self, field: &FeField) -> Result<FeField> {
        if field.space().family().is_scalar() {
            return Err(Error::SpaceMismatch("the discrete curl needs a vector field".into()));
        }
        let rhs = assemble_field_load(&self.space, field, LoadTest::Curl)?;
        Ok(self.solve_full(&rhs)?.0)
    }

    /// `∇_h × f` for an analytic field.
    pub fn apply_analytic(&self, f: VectorFn) -> Result<FeField> {
        let rhs = assemble_load_with(&self.space, f, LoadTest::Curl, ANALYTIC_DEGREE)?;
        Ok(self.solve_full(&rhs)?.0)
    }

    /// `Π_h f`
    pub fn project(&self, f: VectorFn) -> Result<FeField> {
        let rhs = assemble_load(&self.space, f, ANALYTIC_DEGREE)?;
        Ok(self.solve_full(&rhs)?.0)
    }

    /// `(a, b)` for fields of this space.
    pub fn inner(&self, a: &FeField, b: &FeField) -> f64 {
        let pick = |f: &FeField| self.interior.iter().map(|&d| f.coeffs[d]).collect::<Vec<_>>();
        self.mass.bilinear(&pick(a), &pick(b))
    }

    pub fn norm(&self, a: &FeField) -> f64 {
        self.inner(a, a).max(0.0).sqrt()
    }
}

/// `∇_h × field` with a one-off factorization.
pub fn discrete_curl(field: &FeField, c_space: &Arc<FunctionSpace>) -> Result<FeField> {
    DiscreteCurl::new(c_space)?.apply(field)
}

/// Output of [`StokesProjector`].
#[derive(Debug, Clone)]
pub struct StokesProjection {
    pub velocity: FeField,
    pub pressure: FeField,
    pub multiplier: f64,
    pub residual: f64,
}

/// Stokes projection `(Π_V u, Π_Q p)`:
///
/// ```text
/// Re⁻¹(∇Π_V u, ∇v) − (Π_Q p, ∇·v) = Re⁻¹(∇u, ∇v) − (p, ∇·v)
/// (∇·Π_V u, q) = (∇·u, q),   (Π_Q p, 1) = 0
/// ```
///
/// with `Π_V u = 0` on the boundary.
pub struct StokesProjector {
    v: Arc<FunctionSpace>,
    q: Arc<FunctionSpace>,
    re: f64,
    stiffness: CsrMatrix,
    div_pressure: CsrMatrix,
    constraints: Vec<Option<f64>>,
    lu: Factorization,
}

impl StokesProjector {
    pub fn new(v: &Arc<FunctionSpace>, q: &Arc<FunctionSpace>, re: f64) -> Result<Self> {
        require(v, SpaceFamily::VectorP2)?;
        require(q, SpaceFamily::ScalarP1)?;
        if !(re > 0.0 && re.is_finite()) {
            return Err(Error::InvalidParameter { name: "Re", reason: format!("must be positive, got {re}") });
        }
        let (nv, nq) = (v.dim(), q.dim());
        let n = nv + nq + 1;
        let stiffness = assemble_bilinear(&FormDescriptor::new(FormKind::Stiffness, v, v))?;
        let div_pressure = assemble_bilinear(&FormDescriptor::new(FormKind::DivPressure, q, v))?;
        let ones = assemble_load(q, &|_| [1.0, 0.0, 0.0], 2)?;

        let mut triplets: Vec<Triplet> = Vec::new();
        stiffness.append_to(&mut triplets, 0, 0, 1.0 / re);
        div_pressure.append_to(&mut triplets, 0, nv, -1.0);
        div_pressure.transpose().append_to(&mut triplets, nv, 0, 1.0);
        for (i, &m) in ones.iter().enumerate() {
            triplets.push((nv + i, nv + nq, m));
            triplets.push((nv + nq, nv + i, m));
        }
        let mut constraints = vec![None; n];
        for d in v.boundary_dofs() {
            constraints[d] = Some(0.0);
        }
        let mut dummy = vec![0.0; n];
        eliminate_constraints(&mut triplets, &mut dummy, &constraints);
        let lu = lu_factor(&CsrMatrix::from_triplets(n, n, &triplets)?)?;
        Ok(Self {
            v: v.clone(),
            q: q.clone(),
            re,
            stiffness: stiffness.to_csr(),
            div_pressure: div_pressure.to_csr(),
            constraints,
            lu,
        })
    }

    fn solve(&self, mut momentum: Vec<f64>, continuity: Vec<f64>) -> Result<StokesProjection> {
        let (nv, nq) = (self.v.dim(), self.q.dim());
        momentum.extend(continuity);
        momentum.push(0.0);
        let mut rhs = momentum;
        for (i, c) in self.constraints.iter().enumerate() {
            if let Some(g) = c {
                rhs[i] = *g;
            }
        }
        let x = self.lu.solve(&rhs)?;
        let residual = self.lu.relative_residual(&x, &rhs);
        Ok(StokesProjection {
            velocity: FeField::new(self.v.clone(), x[..nv].to_vec())?,
            pressure: FeField::new(self.q.clone(), x[nv..nv + nq].to_vec())?,
            multiplier: x[nv + nq],
            residual,
        })
    }

    /// Projection of an analytic pair; `grad_u[a][b] = ∂_b u_a`.
    pub fn project(&self, grad_u: MatrixFn, p: ScalarFn) -> Result<StokesProjection> {
        let mut momentum = assemble_gradient_load(&self.v, grad_u, ANALYTIC_DEGREE)?;
        let press = assemble_load_with(&self.v, &|x| [p(x), 0.0, 0.0], LoadTest::Divergence, ANALYTIC_DEGREE)?;
        for (m, pv) in momentum.iter_mut().zip(&press) {
            *m = *m / self.re - pv;
        }
        let continuity = assemble_load(&self.q, &|x| {
            let g = grad_u(x);
            [g[0][0] + g[1][1] + g[2][2], 0.0, 0.0]
        }, ANALYTIC_DEGREE)?;
        self.solve(momentum, continuity)
    }

    /// Projection of a discrete pair.
    pub fn project_fields(&self, u: &FeField, p: &FeField) -> Result<StokesProjection> {
        require(u.space(), SpaceFamily::VectorP2)?;
        require(p.space(), SpaceFamily::ScalarP1)?;
        let ku = self.stiffness.matvec(&u.coeffs);
        let gp = self.div_pressure.matvec(&p.coeffs);
        let momentum = ku.iter().zip(&gp).map(|(k, g)| k / self.re - g).collect();
        let continuity = self.div_pressure.transpose().matvec(&u.coeffs);
        self.solve(momentum, continuity)
    }
}

/// L² projection onto `D_h⁰ = {B ∈ D_h : ∇·B = 0, B·n = 0 on ∂Ω}` through
/// the saddle point system
///
/// ```text
/// (B_h, Z) + (λ, ∇·Z) = (B, Z)   ∀Z ∈ D_h
/// (∇·B_h, μ) = 0                 ∀μ ∈ W_h
/// ```
///
/// where `W_h` is the space of cellwise constants without the last cell
/// (the constant mode is redundant because boundary fluxes vanish).
pub struct DivFreeProjector {
    space: Arc<FunctionSpace>,
    mass: CsrMatrix,
    constraints: Vec<Option<f64>>,
    size: usize,
    lu: Factorization,
}

impl DivFreeProjector {
    pub fn new(space: &Arc<FunctionSpace>) -> Result<Self> {
        require(space, SpaceFamily::Bdm1)?;
        let mesh = space.mesh();
        let nd = space.dim();
        let nmult = mesh.num_cells() - 1;
        let size = nd + nmult;
        let mass = assemble_bilinear(&FormDescriptor::new(FormKind::Mass, space, space))?;
        let mut triplets = Vec::with_capacity(mass.triplets.len() + 24 * nmult);
        mass.append_to(&mut triplets, 0, 0, 1.0);
        let centroid = [[0.25, 0.25, 0.25]];
        let tab = space.tabulate(&centroid);
        for cell in 0..nmult {
            let geo = mesh.cell_geometry(cell)?;
            let basis = space.cell_basis(cell, &geo, &tab);
            for (i, &d) in space.cell_dofs(cell).iter().enumerate() {
                let v = basis.divergence(0, i) * geo.volume();
                triplets.push((d, nd + cell, v));
                triplets.push((nd + cell, d, v));
            }
        }
        let mut constraints = vec![None; size];
        for d in space.boundary_dofs() {
            constraints[d] = Some(0.0);
        }
        let mut dummy = vec![0.0; size];
        eliminate_constraints(&mut triplets, &mut dummy, &constraints);
        let lu = lu_factor(&CsrMatrix::from_triplets(size, size, &triplets)?)?;
        Ok(Self { space: space.clone(), mass: mass.to_csr(), constraints, size, lu })
    }

    pub fn space(&self) -> &Arc<FunctionSpace> {
        &self.space
    }

    /// Projection given the load `(B, Z)` for every basis function `Z`.
    pub fn project_load(&self, load: &[f64]) -> Result<ProjectionReport> {
        let nd = self.space.dim();
        let mut rhs = vec![0.0; self.size];
        rhs[..nd].copy_from_slice(load);
        for (i, c) in self.constraints.iter().enumerate() {
            if let Some(g) = c {
                rhs[i] = *g;
            }
        }
        let mut x = self.lu.solve(&rhs)?;
        let mut residual = self.lu.relative_residual(&x, &rhs);
        // a few steps of iterative refinement push the divergence rows to
        // roundoff of the divergence itself
        for _ in 0..REFINEMENT_STEPS {
            let r = self.lu.residual(&x, &rhs);
            let dx = self.lu.solve(&r)?;
            let candidate: Vec<f64> = x.iter().zip(&dx).map(|(a, d)| a - d).collect();
            let res = self.lu.relative_residual(&candidate, &rhs);
            if res >= residual {
                break;
            }
            x = candidate;
            residual = res;
        }
        let field = FeField::new(self.space.clone(), x[..nd].to_vec())?;
        Ok(ProjectionReport {
            divergence_inf: Some(divergence_inf(&field)?),
            field,
            residual,
            system_size: self.size,
        })
    }

    pub fn project(&self, f: VectorFn) -> Result<ProjectionReport> {
        self.project_load(&assemble_load(&self.space, f, ANALYTIC_DEGREE)?)
    }

    /// Projection of a discrete field (any vector space on the same mesh).
    pub fn project_field(&self, field: &FeField) -> Result<ProjectionReport> {
        if Arc::ptr_eq(field.space(), &self.space) {
            return self.project_load(&self.mass.matvec(&field.coeffs));
        }
        self.project_load(&assemble_field_load(&self.space, field, LoadTest::Value)?)
    }

    /// `(a, b)` for fields of this space.
    pub fn inner(&self, a: &FeField, b: &FeField) -> f64 {
        self.mass.bilinear(&a.coeffs, &b.coeffs)
    }
}
