//! The semi-implicit time stepper.
//!
//! Each step solves one sparse linear system for `(uⁿ, pⁿ, Eⁿ, Bⁿ, Hⁿ, λ)`,
//! where `Hⁿ = ∇_h×B̄ⁿ` is the auxiliary discrete curl and `λ` the multiplier
//! of the mean-zero pressure constraint. With `ū = (uⁿ + uⁿ⁻¹)/2`:
//!
//! ```text
//! (D_τu, v) + Re⁻¹(∇ū, ∇v) + ½[(uⁿ⁻¹·∇ū, v) − (uⁿ⁻¹·∇v, ū)]
//!     − S Rm⁻¹(Hⁿ×Bⁿ⁻¹, v) − (pⁿ, ∇·v) = (fⁿ, v)
//! (Eⁿ, F) + (ū×Bⁿ⁻¹, F) − Rm⁻¹(B̄, ∇×F) = 0
//! (D_τB, Z) + (∇×Eⁿ, Z) = (Π_D gⁿ, Z)
//! (∇·ū, q) + λ(1, q) = 0
//! (Hⁿ, F) − (B̄, ∇×F) = 0
//! (pⁿ, 1) = 0
//! ```
//!
//! Velocity, tangential `E`, normal `B` and tangential `H` are prescribed on
//! the boundary (zero unless a manufactured solution supplies traces).

use std::sync::Arc;

use crate::diagnostics::{divergence_inf, EnergyNorms};
use crate::error::{Error, Result};
use crate::exact::ExactSolution;
use crate::forms::{
    assemble_bilinear, assemble_load, cross_product_block, Block, FormDescriptor, FormKind, ANALYTIC_DEGREE,
};
use crate::geom::Vec3;
use crate::mesh::Mesh;
use crate::projection::{DiscreteCurl, DivFreeProjector, StokesProjector};
use crate::space::{FeField, FunctionSpace, SpaceFamily};
use crate::sparse::{eliminate_constraints, inf_norm, CsrMatrix, ReusedLu, SolveStats, Triplet};

/// Physical and discretization constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeParams {
    /// Hydrodynamic Reynolds number.
    pub re: f64,
    /// Magnetic Reynolds number.
    pub rm: f64,
    /// Coupling number; zero decouples the fluid from the magnetic field.
    pub s: f64,
    /// Time step.
    pub tau: f64,
    /// Final time.
    pub t_final: f64,
    /// Subdivisions per axis of the structured mesh.
    pub n: usize,
}

impl Default for SchemeParams {
    fn default() -> Self {
        Self { re: 1.0, rm: 1.0, s: 1.0, tau: 0.01, t_final: 0.1, n: 4 }
    }
}

impl SchemeParams {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &'static str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter { name, reason: format!("must be positive and finite, got {v}") })
            }
        };
        positive("Re", self.re)?;
        positive("Rm", self.rm)?;
        positive("tau", self.tau)?;
        if !(self.s >= 0.0 && self.s.is_finite()) {
            return Err(Error::InvalidParameter { name: "S", reason: format!("must be non-negative, got {}", self.s) });
        }
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "T",
                reason: format!("must be non-negative, got {}", self.t_final),
            });
        }
        if self.n == 0 {
            return Err(Error::InvalidParameter { name: "n", reason: "must be at least 1".into() });
        }
        self.num_steps().map(|_| ())
    }

    /// `N = T/τ`, which must be an integer up to 1e-12.
    pub fn num_steps(&self) -> Result<usize> {
        let n = (self.t_final / self.tau).round();
        if (n * self.tau - self.t_final).abs() > 1e-12 * self.t_final.max(1.0) {
            return Err(Error::InvalidParameter {
                name: "tau",
                reason: format!("T = {} is not an integer multiple of tau = {}", self.t_final, self.tau),
            });
        }
        Ok(n as usize)
    }

    /// Weight `S Rm⁻¹` of the magnetic energy.
    pub fn magnetic_weight(&self) -> f64 {
        self.s / self.rm
    }
}

/// The four finite element spaces on one mesh.
#[derive(Debug, Clone)]
pub struct Spaces {
    pub mesh: Arc<Mesh>,
    /// Velocity, vector P2.
    pub v: Arc<FunctionSpace>,
    /// Pressure, P1.
    pub q: Arc<FunctionSpace>,
    /// Electric field and auxiliary curl, Nédélec.
    pub c: Arc<FunctionSpace>,
    /// Magnetic field, BDM.
    pub d: Arc<FunctionSpace>,
}

impl Spaces {
    pub fn new(mesh: Arc<Mesh>) -> Self {
        Self {
            v: FunctionSpace::new(mesh.clone(), SpaceFamily::VectorP2),
            q: FunctionSpace::new(mesh.clone(), SpaceFamily::ScalarP1),
            c: FunctionSpace::new(mesh.clone(), SpaceFamily::Nedelec2),
            d: FunctionSpace::new(mesh.clone(), SpaceFamily::Bdm1),
            mesh,
        }
    }

    pub fn structured(n: usize) -> Result<Self> {
        Ok(Self::new(Arc::new(Mesh::structured_cube(n)?)))
    }

    /// Dimension of the monolithic step system.
    pub fn system_dim(&self) -> usize {
        self.v.dim() + self.q.dim() + 2 * self.c.dim() + self.d.dim() + 1
    }

    /// Offsets of `u, p, E, B, H, λ` in the monolithic vector.
    pub fn offsets(&self) -> [usize; 6] {
        let u = 0;
        let p = u + self.v.dim();
        let e = p + self.q.dim();
        let b = e + self.c.dim();
        let h = b + self.d.dim();
        let l = h + self.c.dim();
        [u, p, e, b, h, l]
    }
}

/// Discrete solution at one time level.
#[derive(Debug, Clone)]
pub struct MhdState {
    pub step: usize,
    pub time: f64,
    pub u: FeField,
    pub p: FeField,
    pub e: FeField,
    pub b: FeField,
    /// `∇_h × B̄ⁿ`
    pub h: FeField,
    /// Multiplier of the mean-pressure constraint.
    pub multiplier: f64,
}

impl MhdState {
    pub fn zeros(spaces: &Spaces) -> Self {
        Self {
            step: 0,
            time: 0.0,
            u: FeField::zeros(spaces.v.clone()),
            p: FeField::zeros(spaces.q.clone()),
            e: FeField::zeros(spaces.c.clone()),
            b: FeField::zeros(spaces.d.clone()),
            h: FeField::zeros(spaces.c.clone()),
            multiplier: 0.0,
        }
    }

    pub fn to_vector(&self, spaces: &Spaces) -> Vec<f64> {
        let mut x = Vec::with_capacity(spaces.system_dim());
        for f in [&self.u, &self.p, &self.e, &self.b, &self.h] {
            x.extend_from_slice(&f.coeffs);
        }
        x.push(self.multiplier);
        x
    }

    fn from_vector(spaces: &Spaces, x: &[f64], step: usize, time: f64) -> Result<Self> {
        let [ou, op, oe, ob, oh, ol] = spaces.offsets();
        Ok(Self {
            step,
            time,
            u: FeField::new(spaces.v.clone(), x[ou..op].to_vec())?,
            p: FeField::new(spaces.q.clone(), x[op..oe].to_vec())?,
            e: FeField::new(spaces.c.clone(), x[oe..ob].to_vec())?,
            b: FeField::new(spaces.d.clone(), x[ob..oh].to_vec())?,
            h: FeField::new(spaces.c.clone(), x[oh..ol].to_vec())?,
            multiplier: x[ol],
        })
    }
}

pub type TimeVectorFn<'a> = &'a (dyn Fn(&Vec3, f64) -> Vec3 + Sync);

/// Right-hand side data of a run.
#[derive(Clone, Copy)]
pub enum Forcing<'a> {
    /// `f = 0`, `g = 0`, homogeneous boundary conditions.
    None,
    /// User momentum source, `g = 0`, homogeneous boundary conditions.
    Momentum(TimeVectorFn<'a>),
    /// Sources and boundary traces of an analytic solution.
    Manufactured(&'a dyn ExactSolution),
}

impl Forcing<'_> {
    fn momentum(&self) -> Option<Box<dyn Fn(&Vec3, f64) -> Vec3 + Sync + '_>> {
        match *self {
            Forcing::None => None,
            Forcing::Momentum(f) => Some(Box::new(f)),
            Forcing::Manufactured(ex) => Some(Box::new(move |x: &Vec3, t| ex.momentum_source(x, t))),
        }
    }

    /// Whether the discrete energy identity applies (no Faraday source).
    pub fn conserves_energy_balance(&self) -> bool {
        !matches!(self, Forcing::Manufactured(_))
    }
}

/// Initial data: projected with the Stokes projection (velocity) and the
/// divergence-free L² projection (magnetic field).
#[derive(Clone, Copy)]
pub enum InitialData<'a> {
    Zero,
    /// Values of an analytic solution at `t = 0`.
    Exact(&'a dyn ExactSolution),
    /// Raw velocity gradient and magnetic field; the pressure is taken as 0
    /// and the electric field starts at 0.
    Fields {
        velocity_gradient: &'a (dyn Fn(&Vec3) -> crate::geom::Mat3 + Sync),
        magnetic: &'a (dyn Fn(&Vec3) -> Vec3 + Sync),
    },
}

/// Assembled step system (boundary conditions already imposed). The velocity
/// and magnetic unknowns are increments over the previous state; the other
/// fields are solved for directly.
#[derive(Debug, Clone)]
pub struct StepSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    /// `(fⁿ, v)` for every velocity basis function.
    pub momentum_load: Vec<f64>,
}

/// Outcome of a single step.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub state: MhdState,
    pub solver_residual: f64,
    pub solver: SolveStats,
    pub momentum_load: Vec<f64>,
}

/// Per-step diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub time: f64,
    /// `‖uⁿ‖² + S Rm⁻¹‖Bⁿ‖²`
    pub energy: f64,
    /// `max_K |∇·Bⁿ|`
    pub div_inf: f64,
    /// Energy identity residual relative to its largest term; `None` at
    /// step 0 and when a Faraday source is present.
    pub energy_residual: Option<f64>,
    /// Scaled residual of the linear solve; `None` at step 0.
    pub solver_residual: Option<f64>,
}

impl StepRecord {
    pub const CSV_HEADER: &'static str = "n,t,energy,div_inf,energy_residual,solver_residual";

    pub fn csv_row(&self) -> String {
        let opt = |v: Option<f64>| v.map(crate::diagnostics::format_float).unwrap_or_else(|| "NA".into());
        format!(
            "{},{},{},{},{},{}",
            self.step,
            crate::diagnostics::format_float(self.time),
            crate::diagnostics::format_float(self.energy),
            crate::diagnostics::format_float(self.div_inf),
            opt(self.energy_residual),
            opt(self.solver_residual)
        )
    }
}

/// Time-independent blocks reused by every step.
struct StaticBlocks {
    mass_v: Block,
    stiff_v: Block,
    /// `(p, ∇·v)`, rows V, columns Q.
    div_p: Block,
    ones_q: Vec<f64>,
    mass_c: Block,
    /// `(B, ∇×F)`, rows C, columns D.
    curl_bc: Block,
    mass_d: Block,
    mass_d_csr: CsrMatrix,
    stiff_v_csr: CsrMatrix,
    div_p_csr: CsrMatrix,
    curl_bc_csr: CsrMatrix,
}

/// The stepper: spaces, parameters and cached operators.
pub struct MhdScheme {
    spaces: Spaces,
    params: SchemeParams,
    blocks: StaticBlocks,
    div_free: DivFreeProjector,
    curl: DiscreteCurl,
    norms: EnergyNorms,
    solver: ReusedLu,
}

impl MhdScheme {
    pub fn new(spaces: Spaces, params: SchemeParams) -> Result<Self> {
        params.validate()?;
        let (v, q, c, d) = (&spaces.v, &spaces.q, &spaces.c, &spaces.d);
        let mass_v = assemble_bilinear(&FormDescriptor::new(FormKind::Mass, v, v))?;
        let stiff_v = assemble_bilinear(&FormDescriptor::new(FormKind::Stiffness, v, v))?;
        let div_p = assemble_bilinear(&FormDescriptor::new(FormKind::DivPressure, q, v))?;
        let ones_q = assemble_load(q, &|_| [1.0, 0.0, 0.0], 2)?;
        let mass_c = assemble_bilinear(&FormDescriptor::new(FormKind::Mass, c, c))?;
        let curl_bc = assemble_bilinear(&FormDescriptor::new(FormKind::CurlCoupling, d, c))?;
        let mass_d = assemble_bilinear(&FormDescriptor::new(FormKind::Mass, d, d))?;
        let blocks = StaticBlocks {
            mass_d_csr: mass_d.to_csr(),
            stiff_v_csr: stiff_v.to_csr(),
            div_p_csr: div_p.to_csr(),
            curl_bc_csr: curl_bc.to_csr(),
            mass_v,
            stiff_v,
            div_p,
            ones_q,
            mass_c,
            curl_bc,
            mass_d,
        };
        let div_free = DivFreeProjector::new(d)?;
        let curl = DiscreteCurl::new(c)?;
        let norms = EnergyNorms::new(&spaces)?;
        Ok(Self { spaces, params, blocks, div_free, curl, norms, solver: ReusedLu::new() })
    }

    /// Scheme on the structured mesh with `params.n` subdivisions.
    pub fn structured(params: SchemeParams) -> Result<Self> {
        params.validate()?;
        Self::new(Spaces::structured(params.n)?, params)
    }

    pub fn spaces(&self) -> &Spaces {
        &self.spaces
    }

    pub fn params(&self) -> &SchemeParams {
        &self.params
    }

    pub fn norms(&self) -> &EnergyNorms {
        &self.norms
    }

    pub fn discrete_curl(&self) -> &DiscreteCurl {
        &self.curl
    }

    pub fn div_free_projector(&self) -> &DivFreeProjector {
        &self.div_free
    }

    /// `u⁰ = Π_V u₀`, `B⁰ = Π_D B₀`, `H⁰ = ∇_h×B⁰`, `E⁰` the interpolant of
    /// the exact electric field (zero for raw data).
    pub fn initialize(&self, data: InitialData) -> Result<MhdState> {
        let sp = &self.spaces;
        let mut state = MhdState::zeros(sp);
        match data {
            InitialData::Zero => return Ok(state),
            InitialData::Exact(ex) => {
                let stokes = StokesProjector::new(&sp.v, &sp.q, self.params.re)?;
                let proj = stokes.project(&|x| ex.velocity_gradient(x, 0.0), &|x| ex.pressure(x, 0.0))?;
                state.u = proj.velocity;
                state.p = proj.pressure;
                state.b = self.div_free.project(&|x| ex.magnetic(x, 0.0))?.field;
                state.e = sp.c.interpolate(|x| ex.electric(x, 0.0));
            }
            InitialData::Fields { velocity_gradient, magnetic } => {
                let stokes = StokesProjector::new(&sp.v, &sp.q, self.params.re)?;
                let proj = stokes.project(velocity_gradient, &|_| 0.0)?;
                state.u = proj.velocity;
                state.p = proj.pressure;
                state.b = self.div_free.project(magnetic)?.field;
            }
        }
        state.h = self.curl.apply(&state.b)?;
        Ok(state)
    }

    fn constraints(&self, forcing: &Forcing, t: f64) -> Result<Vec<Option<f64>>> {
        let sp = &self.spaces;
        let [ou, _, oe, ob, oh, _] = sp.offsets();
        let mut out = vec![None; sp.system_dim()];
        let ex = match forcing {
            Forcing::Manufactured(ex) => Some(*ex),
            _ => None,
        };
        let u_data = ex.map(|ex| move |x: &Vec3| ex.velocity(x, t));
        let e_data = ex.map(|ex| move |x: &Vec3| ex.electric(x, t));
        let b_data = ex.map(|ex| move |x: &Vec3| ex.magnetic(x, t));
        let u_dyn = u_data.as_ref().map(|g| g as &dyn Fn(&Vec3) -> Vec3);
        let e_dyn = e_data.as_ref().map(|g| g as &dyn Fn(&Vec3) -> Vec3);
        let b_dyn = b_data.as_ref().map(|g| g as &dyn Fn(&Vec3) -> Vec3);
        let bcs = [
            (ou, sp.v.essential_bc(u_dyn)?),
            (oe, sp.c.essential_bc(e_dyn)?),
            (ob, sp.d.essential_bc(b_dyn)?),
            (oh, sp.c.essential_bc(None)?),
        ];
        for (offset, bc) in bcs {
            for (d, v) in bc.dofs.iter().zip(&bc.values) {
                out[offset + d] = Some(*v);
            }
        }
        Ok(out)
    }

    /// Builds the linear system advancing `prev` by one step.
    pub fn assemble_step_system(&self, prev: &MhdState, forcing: &Forcing) -> Result<StepSystem> {
        let sp = &self.spaces;
        let prm = &self.params;
        let bl = &self.blocks;
        let dim = sp.system_dim();
        let [ou, op, oe, ob, oh, ol] = sp.offsets();
        let t = (prev.step + 1) as f64 * prm.tau;
        let (tau, re_inv, rm_inv) = (prm.tau, 1.0 / prm.re, 1.0 / prm.rm);
        let coupling = prm.s * rm_inv;

        let convection = assemble_bilinear(
            &FormDescriptor::new(FormKind::ConvectionSkew, &sp.v, &sp.v).with_coefficient(&prev.u),
        )?;
        let lorentz = cross_product_block(&sp.c, &sp.v, &prev.b)?;
        // (ū×B, F) is minus the transpose of (H×B, v)
        let ohm = lorentz.transpose();

        let mut trip: Vec<Triplet> = Vec::with_capacity(
            2 * bl.mass_v.triplets.len()
                + convection.triplets.len()
                + 2 * lorentz.triplets.len()
                + 2 * bl.div_p.triplets.len()
                + 2 * bl.mass_c.triplets.len()
                + 3 * bl.curl_bc.triplets.len()
                + bl.mass_d.triplets.len()
                + 2 * bl.ones_q.len(),
        );
        // momentum
        bl.mass_v.append_to(&mut trip, ou, ou, 1.0 / tau);
        bl.stiff_v.append_to(&mut trip, ou, ou, 0.5 * re_inv);
        convection.append_to(&mut trip, ou, ou, 0.5);
        lorentz.append_to(&mut trip, ou, oh, -coupling);
        bl.div_p.append_to(&mut trip, ou, op, -1.0);
        // incompressibility with the mean multiplier
        bl.div_p.transpose().append_to(&mut trip, op, ou, 1.0);
        for (i, &m) in bl.ones_q.iter().enumerate() {
            trip.push((op + i, ol, m));
            trip.push((ol, op + i, m));
        }
        // Ohm's law
        bl.mass_c.append_to(&mut trip, oe, oe, 1.0);
        ohm.append_to(&mut trip, oe, ou, -0.5);
        bl.curl_bc.append_to(&mut trip, oe, ob, -0.5 * rm_inv);
        // Faraday
        bl.mass_d.append_to(&mut trip, ob, ob, 1.0 / tau);
        bl.curl_bc.transpose().append_to(&mut trip, ob, oe, 1.0);
        // auxiliary curl
        bl.mass_c.append_to(&mut trip, oh, oh, 1.0);
        bl.curl_bc.append_to(&mut trip, oh, ob, -0.5);

        // The unknowns for u and B are the increments uⁿ − uⁿ⁻¹ and Bⁿ − Bⁿ⁻¹;
        // the right-hand side below is the original one minus the matrix
        // applied to (uⁿ⁻¹, Bⁿ⁻¹), simplified by hand.
        let mut rhs = vec![0.0; dim];
        let (u0, b0) = (&prev.u.coeffs, &prev.b.coeffs);
        let ku = bl.stiff_v_csr.matvec(u0);
        let nu = convection.to_csr().matvec(u0);
        let momentum_load = match forcing.momentum() {
            Some(f) => assemble_load(&sp.v, &|x| f(x, t), ANALYTIC_DEGREE)?,
            None => vec![0.0; sp.v.dim()],
        };
        for i in 0..sp.v.dim() {
            rhs[ou + i] = momentum_load[i] - re_inv * ku[i] - nu[i];
        }
        let div_u = bl.div_p_csr.transpose().matvec(u0);
        for (i, d) in div_u.iter().enumerate() {
            rhs[op + i] = -2.0 * d;
        }
        let ou_prev = ohm.to_csr().matvec(u0);
        let cb = bl.curl_bc_csr.matvec(b0);
        for i in 0..sp.c.dim() {
            rhs[oe + i] = ou_prev[i] + rm_inv * cb[i];
            rhs[oh + i] = cb[i];
        }
        if let Forcing::Manufactured(ex) = forcing {
            let g = self.div_free.project(&|x| ex.faraday_source(x, t))?.field;
            let mg = bl.mass_d_csr.matvec(&g.coeffs);
            rhs[ob..ob + sp.d.dim()].copy_from_slice(&mg);
        }

        let mut constraints = self.constraints(forcing, t)?;
        for (offset, old) in [(ou, u0), (ob, b0)] {
            for (c, x) in constraints[offset..offset + old.len()].iter_mut().zip(old) {
                if let Some(v) = c {
                    *v -= x;
                }
            }
        }
        eliminate_constraints(&mut trip, &mut rhs, &constraints);
        let matrix = CsrMatrix::from_triplets(dim, dim, &trip)?;
        Ok(StepSystem { matrix, rhs, momentum_load })
    }

    /// Advances `prev` by one step.
    pub fn step(&self, prev: &MhdState, forcing: &Forcing) -> Result<StepOutcome> {
        let step = prev.step + 1;
        let wrap = |e: Error| Error::Step { step, source: Box::new(e) };
        let sys = self.assemble_step_system(prev, forcing).map_err(wrap)?;
        let (x, stats) = self.solver.solve(&sys.matrix, &sys.rhs).map_err(wrap)?;
        let mut state = MhdState::from_vector(&self.spaces, &x, step, step as f64 * self.params.tau)?;
        for (new, old) in [(&mut state.u, &prev.u), (&mut state.b, &prev.b)] {
            new.coeffs.iter_mut().zip(&old.coeffs).for_each(|(d, o)| *d += o);
        }
        Ok(StepOutcome { state, solver_residual: stats.residual, solver: stats, momentum_load: sys.momentum_load })
    }

    /// Diagnostics of `cur`, given the previous state when `cur` is not the
    /// initial one.
    pub fn record(
        &self,
        cur: &MhdState,
        prev: Option<(&MhdState, &[f64], f64)>,
        forcing: &Forcing,
    ) -> Result<StepRecord> {
        let (energy_residual, solver_residual) = match prev {
            Some((prev, load, solver)) => {
                let res = if forcing.conserves_energy_balance() {
                    Some(self.norms.balance(cur, prev, load, &self.params)?.relative())
                } else {
                    None
                };
                (res, Some(solver))
            }
            None => (None, None),
        };
        Ok(StepRecord {
            step: cur.step,
            time: cur.time,
            energy: self.norms.energy(cur, &self.params),
            div_inf: divergence_inf(&cur.b)?,
            energy_residual,
            solver_residual,
        })
    }

    /// Runs `N = T/τ` steps from `initial`, reporting every state (including
    /// the initial one) to `observe`. Returns the final state.
    pub fn run(
        &self,
        initial: MhdState,
        forcing: &Forcing,
        mut observe: impl FnMut(&StepRecord, &MhdState) -> Result<()>,
    ) -> Result<MhdState> {
        let steps = self.params.num_steps()?;
        observe(&self.record(&initial, None, forcing)?, &initial)?;
        let mut state = initial;
        for _ in 0..steps {
            let out = self.step(&state, forcing)?;
            let rec = self.record(&out.state, Some((&state, &out.momentum_load, out.solver_residual)), forcing)?;
            log::debug!(
                "step {} t={:.4} energy={:.6e} div={:.2e} solver={:.2e}",
                rec.step,
                rec.time,
                rec.energy,
                rec.div_inf,
                out.solver_residual
            );
            observe(&rec, &out.state)?;
            state = out.state;
        }
        Ok(state)
    }
}

/// `‖x‖∞` of the coefficients of all fields; used in sanity checks.
pub fn state_inf_norm(state: &MhdState) -> f64 {
    [&state.u, &state.p, &state.e, &state.b, &state.h]
        .iter()
        .map(|f| inf_norm(&f.coeffs))
        .fold(state.multiplier.abs(), f64::max)
}
