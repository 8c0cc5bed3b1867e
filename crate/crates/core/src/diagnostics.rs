//! Verification quantities: divergence norms, the discrete energy balance,
//! error norms against analytic solutions, convergence rates and an inf-sup
//! probe.

use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::exact::ExactSolution;
use crate::forms::{assemble_load, assemble_matrix, FormDescriptor, FormKind, ANALYTIC_DEGREE};
use crate::geom::{self, Mat3, Vec3};
use crate::projection::DiscreteCurl;
use crate::quadrature::quadrature;
use crate::reference::Tabulation;
use crate::scheme::{Forcing, InitialData, MhdScheme, MhdState, SchemeParams, Spaces};
use crate::space::{FeField, FunctionSpace, SpaceFamily};
use crate::sparse::CsrMatrix;

/// Per-cell divergence of a BDM field (constant on each cell).
pub fn cell_divergences(field: &FeField) -> Result<Vec<f64>> {
    let space = field.space();
    if space.family() != SpaceFamily::Bdm1 {
        return Err(Error::SpaceMismatch(format!("divergence norm needs a BDM field, got {}", space.family())));
    }
    let mesh = space.mesh();
    let tab = space.tabulate(&[[0.25, 0.25, 0.25]]);
    (0..mesh.num_cells())
        .map(|cell| {
            let geo = mesh.cell_geometry(cell)?;
            let basis = space.cell_basis(cell, &geo, &tab);
            Ok(space
                .cell_dofs(cell)
                .iter()
                .enumerate()
                .map(|(i, &d)| field.coeffs[d] * basis.divergence(0, i))
                .sum())
        })
        .collect()
}

/// `max_K |∇·B_h|`
pub fn divergence_inf(field: &FeField) -> Result<f64> {
    Ok(cell_divergences(field)?.iter().fold(0.0, |m, d| m.max(d.abs())))
}

/// Fixed-width float formatting for CSV output (17 significant digits).
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Matrices defining the discrete energy and dissipation.
pub struct EnergyNorms {
    mass_v: CsrMatrix,
    stiff_v: CsrMatrix,
    mass_c: CsrMatrix,
    mass_d: CsrMatrix,
}

/// Terms of the discrete energy identity
///
/// ```text
/// (‖uⁿ‖² − ‖uⁿ⁻¹‖²)/2τ + Re⁻¹‖∇ū‖² + S Rm⁻²‖Hⁿ‖² + S Rm⁻¹(‖Bⁿ‖² − ‖Bⁿ⁻¹‖²)/2τ = (fⁿ, ū)
/// ```
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyBalance {
    pub kinetic_rate: f64,
    pub viscous: f64,
    pub resistive: f64,
    pub magnetic_rate: f64,
    pub forcing: f64,
}

impl EnergyBalance {
    /// Left side minus right side.
    pub fn residual(&self) -> f64 {
        self.kinetic_rate + self.viscous + self.resistive + self.magnetic_rate - self.forcing
    }

    /// Magnitude of the largest term.
    pub fn scale(&self) -> f64 {
        [self.kinetic_rate, self.viscous, self.resistive, self.magnetic_rate, self.forcing]
            .iter()
            .fold(0.0, |m, t| m.max(t.abs()))
    }

    /// `|residual| / scale`, or 0 when every term vanishes.
    pub fn relative(&self) -> f64 {
        let s = self.scale();
        if s == 0.0 {
            0.0
        } else {
            self.residual().abs() / s
        }
    }
}

impl EnergyNorms {
    pub fn new(spaces: &Spaces) -> Result<Self> {
        let (v, c, d) = (&spaces.v, &spaces.c, &spaces.d);
        Ok(Self {
            mass_v: assemble_matrix(&FormDescriptor::new(FormKind::Mass, v, v))?,
            stiff_v: assemble_matrix(&FormDescriptor::new(FormKind::Stiffness, v, v))?,
            mass_c: assemble_matrix(&FormDescriptor::new(FormKind::Mass, c, c))?,
            mass_d: assemble_matrix(&FormDescriptor::new(FormKind::Mass, d, d))?,
        })
    }

    pub fn velocity_sq(&self, u: &FeField) -> f64 {
        self.mass_v.bilinear(&u.coeffs, &u.coeffs)
    }

    pub fn magnetic_sq(&self, b: &FeField) -> f64 {
        self.mass_d.bilinear(&b.coeffs, &b.coeffs)
    }

    /// `‖u‖² + S Rm⁻¹‖B‖²`
    pub fn energy(&self, state: &MhdState, params: &SchemeParams) -> f64 {
        self.velocity_sq(&state.u) + params.magnetic_weight() * self.magnetic_sq(&state.b)
    }

    /// Energy identity terms between consecutive states; `momentum_load` is
    /// `(fⁿ, v)` for every velocity basis function.
    pub fn balance(
        &self,
        cur: &MhdState,
        prev: &MhdState,
        momentum_load: &[f64],
        params: &SchemeParams,
    ) -> Result<EnergyBalance> {
        if cur.u.coeffs.len() != self.mass_v.nrows()
            || prev.u.coeffs.len() != self.mass_v.nrows()
            || momentum_load.len() != self.mass_v.nrows()
            || cur.b.coeffs.len() != self.mass_d.nrows()
            || prev.b.coeffs.len() != self.mass_d.nrows()
        {
            return Err(Error::SpaceMismatch("states do not belong to these spaces".into()));
        }
        let tau = params.tau;
        let ubar: Vec<f64> = cur.u.coeffs.iter().zip(&prev.u.coeffs).map(|(a, b)| 0.5 * (a + b)).collect();
        let w = params.magnetic_weight();
        Ok(EnergyBalance {
            kinetic_rate: difference_of_squares(&self.mass_v, &cur.u, &prev.u) / (2.0 * tau),
            viscous: self.stiff_v.bilinear(&ubar, &ubar) / params.re,
            resistive: w / params.rm * self.mass_c.bilinear(&cur.h.coeffs, &cur.h.coeffs),
            magnetic_rate: w * difference_of_squares(&self.mass_d, &cur.b, &prev.b) / (2.0 * tau),
            forcing: momentum_load.iter().zip(&ubar).map(|(a, b)| a * b).sum(),
        })
    }
}

/// `‖a‖² − ‖b‖²` as `(a − b, a + b)`, which avoids cancellation when both
/// norms are large compared to their difference.
fn difference_of_squares(mass: &CsrMatrix, a: &FeField, b: &FeField) -> f64 {
    let diff: Vec<f64> = a.coeffs.iter().zip(&b.coeffs).map(|(x, y)| x - y).collect();
    let sum: Vec<f64> = a.coeffs.iter().zip(&b.coeffs).map(|(x, y)| x + y).collect();
    mass.bilinear(&diff, &sum)
}

/// Energy identity terms for consecutive states of a run without Faraday
/// source; `f` is the momentum source at the new time level.
pub fn energy_residual(
    spaces: &Spaces,
    cur: &MhdState,
    prev: &MhdState,
    f: Option<&(dyn Fn(&Vec3) -> Vec3 + Sync)>,
    params: &SchemeParams,
) -> Result<EnergyBalance> {
    let load = match f {
        Some(f) => assemble_load(&spaces.v, f, ANALYTIC_DEGREE)?,
        None => vec![0.0; spaces.v.dim()],
    };
    EnergyNorms::new(spaces)?.balance(cur, prev, &load, params)
}

/// Errors of a discrete state against an analytic solution.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ErrorReport {
    pub time: f64,
    pub n: usize,
    pub tau: f64,
    /// `‖u − u_h‖`
    pub u_l2: f64,
    /// `‖∇(u − u_h)‖`
    pub u_grad: f64,
    /// `‖B − B_h‖`
    pub b_l2: f64,
    /// `‖∇_h×(B − B_h)‖`
    pub b_curl: f64,
    /// `‖E − E_h‖`
    pub e_l2: f64,
    /// `‖p − p_h‖`
    pub p_l2: f64,
}

/// Squared L² distances accumulated cell by cell.
#[derive(Default, Clone, Copy)]
struct Sums {
    u: f64,
    du: f64,
    b: f64,
    e: f64,
    p: f64,
}

impl std::ops::Add for Sums {
    type Output = Sums;
    fn add(self, o: Sums) -> Sums {
        Sums { u: self.u + o.u, du: self.du + o.du, b: self.b + o.b, e: self.e + o.e, p: self.p + o.p }
    }
}

fn sq_dist(a: &Vec3, b: &Vec3) -> f64 {
    let d = geom::sub(a, b);
    geom::dot(&d, &d)
}

/// Analytic or discrete reference fields for [`error_norms`].
struct Reference<'a> {
    u: Box<dyn Fn(usize, &Vec3, usize) -> (Vec3, Mat3) + Sync + 'a>,
    b: Box<dyn Fn(usize, &Vec3, usize) -> Vec3 + Sync + 'a>,
    e: Box<dyn Fn(usize, &Vec3, usize) -> Vec3 + Sync + 'a>,
    p: Box<dyn Fn(usize, &Vec3, usize) -> f64 + Sync + 'a>,
}

fn accumulate(state: &MhdState, reference: &Reference) -> Result<Sums> {
    let rule = quadrature(ANALYTIC_DEGREE)?;
    let mesh = state.u.space().mesh().clone();
    let tabs = [&state.u, &state.p, &state.e, &state.b].map(|f| f.space().tabulate(&rule.points));
    let cells: Vec<usize> = (0..mesh.num_cells()).collect();
    let partial: Vec<Result<Sums>> = cells
        .par_chunks(64)
        .map(|chunk| {
            let mut s = Sums::default();
            for &cell in chunk {
                let geo = mesh.cell_geometry(cell)?;
                let eval = |f: &FeField, tab| f.evaluate_basis(cell, &f.space().cell_basis(cell, &geo, tab));
                let u = eval(&state.u, &tabs[0]);
                let p = eval(&state.p, &tabs[1]);
                let e = eval(&state.e, &tabs[2]);
                let b = eval(&state.b, &tabs[3]);
                for (k, (xr, w)) in rule.points.iter().zip(&rule.weights).enumerate() {
                    let x = geo.map(xr);
                    let w = w * geo.det;
                    let (ue, ge) = (reference.u)(cell, &x, k);
                    s.u += w * sq_dist(&ue, &u.values[k]);
                    s.du += w * (0..3).map(|a| sq_dist(&ge[a], &u.jacobians[k][a])).sum::<f64>();
                    s.b += w * sq_dist(&(reference.b)(cell, &x, k), &b.values[k]);
                    s.e += w * sq_dist(&(reference.e)(cell, &x, k), &e.values[k]);
                    let dp = (reference.p)(cell, &x, k) - p.values[k][0];
                    s.p += w * dp * dp;
                }
            }
            Ok(s)
        })
        .collect();
    partial.into_iter().try_fold(Sums::default(), |acc, s| Ok(acc + s?))
}

/// Errors of `state` against `exact` at `state.time`, by degree 8
/// quadrature; the curl error is measured between discrete curls.
pub fn error_norms(
    state: &MhdState,
    exact: &dyn ExactSolution,
    curl: &DiscreteCurl,
    n: usize,
    tau: f64,
) -> Result<ErrorReport> {
    let t = state.time;
    let reference = Reference {
        u: Box::new(|_, x, _| (exact.velocity(x, t), exact.velocity_gradient(x, t))),
        b: Box::new(|_, x, _| exact.magnetic(x, t)),
        e: Box::new(|_, x, _| exact.electric(x, t)),
        p: Box::new(|_, x, _| exact.pressure(x, t)),
    };
    let sums = accumulate(state, &reference)?;
    let hb = curl.apply_analytic(&|x| exact.magnetic(x, t))?;
    let hh = curl.apply(&state.b)?;
    Ok(ErrorReport {
        time: t,
        n,
        tau,
        u_l2: sums.u.sqrt(),
        u_grad: sums.du.sqrt(),
        b_l2: sums.b.sqrt(),
        b_curl: curl_distance(curl, &hb, &hh),
        e_l2: sums.e.sqrt(),
        p_l2: sums.p.sqrt(),
    })
}

fn curl_distance(curl: &DiscreteCurl, a: &FeField, b: &FeField) -> f64 {
    let mut d = a.clone();
    d.coeffs.iter_mut().zip(&b.coeffs).for_each(|(x, y)| *x -= y);
    curl.norm(&d)
}

/// The same norms between two discrete states on the same spaces.
pub fn state_distance(a: &MhdState, b: &MhdState, curl: &DiscreteCurl) -> Result<ErrorReport> {
    if !Arc::ptr_eq(a.u.space(), b.u.space()) || !Arc::ptr_eq(a.b.space(), b.b.space()) {
        return Err(Error::SpaceMismatch("states live on different spaces".into()));
    }
    let rule = quadrature(ANALYTIC_DEGREE)?;
    let mesh = b.u.space().mesh().clone();
    let tabs = [&b.u, &b.p, &b.e, &b.b].map(|f| f.space().tabulate(&rule.points));
    // evaluates `b` at quadrature point `k` of `cell`
    let at = |f: &FeField, tab: &Tabulation, cell: usize| {
        let geo = mesh.cell_geometry(cell).expect("valid mesh");
        f.evaluate_basis(cell, &f.space().cell_basis(cell, &geo, tab))
    };
    let reference = Reference {
        u: Box::new(|cell, _, k| {
            let v = at(&b.u, &tabs[0], cell);
            (v.values[k], v.jacobians[k])
        }),
        b: Box::new(|cell, _, k| at(&b.b, &tabs[3], cell).values[k]),
        e: Box::new(|cell, _, k| at(&b.e, &tabs[2], cell).values[k]),
        p: Box::new(|cell, _, k| at(&b.p, &tabs[1], cell).values[k][0]),
    };
    let sums = accumulate(a, &reference)?;
    let (ha, hb) = (curl.apply(&a.b)?, curl.apply(&b.b)?);
    Ok(ErrorReport {
        time: a.time,
        n: 0,
        tau: 0.0,
        u_l2: sums.u.sqrt(),
        u_grad: sums.du.sqrt(),
        b_l2: sums.b.sqrt(),
        b_curl: curl_distance(curl, &ha, &hb),
        e_l2: sums.e.sqrt(),
        p_l2: sums.p.sqrt(),
    })
}

/// Least-squares slope of `log y` against `log x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::InsufficientData(format!("{} abscissae for {} errors", x.len(), y.len())));
    }
    if x.len() < 3 {
        return Err(Error::InsufficientData(format!("a rate needs at least 3 points, got {}", x.len())));
    }
    if x.iter().chain(y).any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::InsufficientData("rates need positive finite data".into()));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientData("all abscissae coincide".into()));
    }
    Ok(sxy / sxx)
}

/// Errors per norm over a sequence of mesh sizes or time steps.
#[derive(Debug, Clone, PartialEq)]
pub struct RateTable {
    /// `"h"` or `"tau"`.
    pub parameter: String,
    pub values: Vec<f64>,
    pub norms: Vec<(String, Vec<f64>)>,
}

impl RateTable {
    pub fn new(parameter: &str, values: Vec<f64>) -> Self {
        Self { parameter: parameter.into(), values, norms: Vec::new() }
    }

    pub fn add_norm(&mut self, name: &str, errors: Vec<f64>) -> Result<()> {
        if errors.len() != self.values.len() {
            return Err(Error::InsufficientData(format!(
                "{} errors for {} grid points",
                errors.len(),
                self.values.len()
            )));
        }
        self.norms.push((name.into(), errors));
        Ok(())
    }

    pub fn errors(&self, name: &str) -> Option<&[f64]> {
        self.norms.iter().find(|(n, _)| n == name).map(|(_, e)| e.as_slice())
    }

    pub fn slope(&self, name: &str) -> Result<f64> {
        let errors = self
            .errors(name)
            .ok_or_else(|| Error::InsufficientData(format!("no norm named {name}")))?;
        log_log_slope(&self.values, errors)
    }

    /// One row per grid point and norm, followed by `# slope` footer lines.
    pub fn to_csv(&self) -> String {
        let mut out = format!("{},norm,error\n", self.parameter);
        for (i, v) in self.values.iter().enumerate() {
            for (name, errors) in &self.norms {
                out.push_str(&format!("{},{},{}\n", format_float(*v), name, format_float(errors[i])));
            }
        }
        for (name, _) in &self.norms {
            match self.slope(name) {
                Ok(s) => out.push_str(&format!("# slope,{},{}\n", name, format_float(s))),
                Err(_) => out.push_str(&format!("# slope,{name},NA\n")),
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StudyKind {
    Spatial,
    Temporal,
}

/// Parameters of a manufactured-solution convergence study.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub kind: StudyKind,
    pub re: f64,
    pub rm: f64,
    pub s: f64,
    pub t_final: f64,
    /// Time step of a spatial study.
    pub tau: f64,
    /// Mesh of a temporal study.
    pub n: usize,
    /// Mesh subdivisions (spatial) or step counts (temporal).
    pub grid: Vec<usize>,
}

impl StudyConfig {
    pub fn spatial(re: f64, rm: f64, s: f64, tau: f64, t_final: f64, grid: Vec<usize>) -> Self {
        Self { kind: StudyKind::Spatial, re, rm, s, t_final, tau, n: 0, grid }
    }

    pub fn temporal(re: f64, rm: f64, s: f64, n: usize, t_final: f64, steps: Vec<usize>) -> Self {
        Self { kind: StudyKind::Temporal, re, rm, s, t_final, tau: 0.0, n, grid: steps }
    }
}

/// Names of the norms recorded by [`convergence_study`].
pub mod norm_names {
    pub const U_L2: &str = "u_l2";
    pub const B_L2: &str = "b_l2";
    pub const U_PLUS_B: &str = "u_l2+b_l2";
    pub const U_GRAD: &str = "u_grad";
    pub const B_CURL: &str = "b_curl";
    pub const GRAD_PLUS_CURL: &str = "u_grad+b_curl";
    /// `(τ Σ ‖∇(ū − ū_h)‖² + ‖∇_h×(B̄ − B̄_h)‖²)^{1/2}` over all steps.
    pub const TIME_SUMMED: &str = "time_summed_grad_curl";
    pub const E_L2: &str = "e_l2";
    pub const P_L2: &str = "p_l2";
}

#[derive(Debug, Clone)]
pub struct StudyResult {
    pub table: RateTable,
    /// Final-time errors per grid point.
    pub reports: Vec<ErrorReport>,
}

/// Runs the manufactured solution for each grid point and tabulates errors
/// at the final time.
pub fn convergence_study(cfg: &StudyConfig, exact: &dyn ExactSolution) -> Result<StudyResult> {
    if cfg.grid.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "a convergence study needs at least 3 grid points, got {}",
            cfg.grid.len()
        )));
    }
    let mut reports = Vec::new();
    let mut summed = Vec::new();
    let mut abscissae = Vec::new();
    for &g in &cfg.grid {
        let (n, tau) = match cfg.kind {
            StudyKind::Spatial => (g, cfg.tau),
            StudyKind::Temporal => (cfg.n, cfg.t_final / g as f64),
        };
        let params = SchemeParams { re: cfg.re, rm: cfg.rm, s: cfg.s, tau, t_final: cfg.t_final, n };
        let started = std::time::Instant::now();
        let scheme = MhdScheme::structured(params)?;
        let forcing = Forcing::Manufactured(exact);
        let initial = scheme.initialize(InitialData::Exact(exact))?;
        let mut acc = TimeSummedError::new(&scheme, exact);
        let mut prev: Option<MhdState> = None;
        let last = scheme.run(initial, &forcing, |_, state| {
            if let Some(p) = &prev {
                acc.add(p, state)?;
            }
            prev = Some(state.clone());
            Ok(())
        })?;
        let report = error_norms(&last, exact, scheme.discrete_curl(), n, tau)?;
        log::info!(
            "n={n} tau={tau:e}: |u-uh|={:.3e} |B-Bh|={:.3e} ({:.1}s)",
            report.u_l2,
            report.b_l2,
            started.elapsed().as_secs_f64()
        );
        abscissae.push(match cfg.kind {
            StudyKind::Spatial => scheme.spaces().mesh.h(),
            StudyKind::Temporal => tau,
        });
        summed.push(acc.total());
        reports.push(report);
    }
    let parameter = match cfg.kind {
        StudyKind::Spatial => "h",
        StudyKind::Temporal => "tau",
    };
    let mut table = RateTable::new(parameter, abscissae);
    let col = |f: fn(&ErrorReport) -> f64| reports.iter().map(f).collect::<Vec<_>>();
    table.add_norm(norm_names::U_L2, col(|r| r.u_l2))?;
    table.add_norm(norm_names::B_L2, col(|r| r.b_l2))?;
    table.add_norm(norm_names::U_PLUS_B, col(|r| r.u_l2 + r.b_l2))?;
    table.add_norm(norm_names::U_GRAD, col(|r| r.u_grad))?;
    table.add_norm(norm_names::B_CURL, col(|r| r.b_curl))?;
    table.add_norm(norm_names::GRAD_PLUS_CURL, col(|r| r.u_grad + r.b_curl))?;
    table.add_norm(norm_names::TIME_SUMMED, summed)?;
    table.add_norm(norm_names::E_L2, col(|r| r.e_l2))?;
    table.add_norm(norm_names::P_L2, col(|r| r.p_l2))?;
    Ok(StudyResult { table, reports })
}

/// Accumulates `τ Σ (‖∇(ū − ū_h)‖² + ‖∇_h×(B̄ − B̄_h)‖²)` along a run.
struct TimeSummedError<'a> {
    scheme: &'a MhdScheme,
    exact: &'a dyn ExactSolution,
    sum: f64,
}

impl<'a> TimeSummedError<'a> {
    fn new(scheme: &'a MhdScheme, exact: &'a dyn ExactSolution) -> Self {
        Self { scheme, exact, sum: 0.0 }
    }

    fn add(&mut self, prev: &MhdState, cur: &MhdState) -> Result<()> {
        let (t0, t1) = (prev.time, cur.time);
        let ex = self.exact;
        let mut avg = cur.clone();
        for (a, b) in [(&mut avg.u, &prev.u), (&mut avg.b, &prev.b)] {
            a.coeffs.iter_mut().zip(&b.coeffs).for_each(|(x, y)| *x = 0.5 * (*x + y));
        }
        let rule = quadrature(ANALYTIC_DEGREE)?;
        let mesh = avg.u.space().mesh().clone();
        let tab = avg.u.space().tabulate(&rule.points);
        let grad: f64 = (0..mesh.num_cells())
            .into_par_iter()
            .map(|cell| {
                let geo = mesh.cell_geometry(cell).expect("valid mesh");
                let vals = avg.u.evaluate_basis(cell, &avg.u.space().cell_basis(cell, &geo, &tab));
                let mut s = 0.0;
                for (k, (xr, w)) in rule.points.iter().zip(&rule.weights).enumerate() {
                    let x = geo.map(xr);
                    let (g0, g1) = (ex.velocity_gradient(&x, t0), ex.velocity_gradient(&x, t1));
                    for a in 0..3 {
                        let mean: Vec3 = std::array::from_fn(|b| 0.5 * (g0[a][b] + g1[a][b]));
                        s += w * geo.det * sq_dist(&mean, &vals.jacobians[k][a]);
                    }
                }
                s
            })
            .collect::<Vec<_>>()
            .iter()
            .sum();
        let curl = self.scheme.discrete_curl();
        let hb = curl.apply_analytic(&|x| geom::scale(0.5, &geom::add(&ex.magnetic(x, t0), &ex.magnetic(x, t1))))?;
        let hh = curl.apply(&avg.b)?;
        let c = curl_distance(curl, &hb, &hh);
        self.sum += (t1 - t0) * (grad + c * c);
        Ok(())
    }

    fn total(&self) -> f64 {
        self.sum.sqrt()
    }
}

/// Largest subspace dimension accepted by [`estimate_infsup`].
pub const INFSUP_DENSE_CAP: usize = 6000;

/// Discrete inf-sup constant of the velocity/pressure pair:
/// `κ² = min λ` with `B A⁻¹ Bᵀ x = λ M x` on mean-free pressures, where `A`
/// is the H¹ inner product on velocities vanishing on the boundary, `B` the
/// divergence coupling and `M` the pressure mass matrix.
pub fn estimate_infsup(v: &Arc<FunctionSpace>, q: &Arc<FunctionSpace>) -> Result<f64> {
    let ops = InfSupOperators::new(v, q)?;
    let (c, y1) = ops.reduced();
    // orthonormal basis of the complement of y1 (Householder reflection)
    let m = c.nrows();
    let mut hh = DVector::from_column_slice(y1.as_slice());
    hh[0] += if y1[0] >= 0.0 { 1.0 } else { -1.0 };
    let hn = hh.norm_squared();
    let reflector = DMatrix::<f64>::identity(m, m) - (&hh * hh.transpose()) * (2.0 / hn);
    let basis = reflector.columns(1, m - 1).into_owned();
    let restricted = basis.transpose() * &c * &basis;
    let eig = SymmetricEigen::new(restricted);
    let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(min.max(0.0).sqrt())
}

/// Same constant computed on the full pressure space, discarding the
/// eigenvector that is closest to the constant mode.
pub fn estimate_infsup_full_space(v: &Arc<FunctionSpace>, q: &Arc<FunctionSpace>) -> Result<f64> {
    let ops = InfSupOperators::new(v, q)?;
    let (c, y1) = ops.reduced();
    let eig = SymmetricEigen::new(c);
    let mut best = (0usize, -1.0);
    for k in 0..eig.eigenvalues.len() {
        let overlap = eig.eigenvectors.column(k).dot(&y1).abs();
        if overlap > best.1 {
            best = (k, overlap);
        }
    }
    let min = eig
        .eigenvalues
        .iter()
        .enumerate()
        .filter(|(k, _)| *k != best.0)
        .map(|(_, v)| *v)
        .fold(f64::INFINITY, f64::min);
    Ok(min.max(0.0).sqrt())
}

struct InfSupOperators {
    /// `B A⁻¹ Bᵀ`
    schur: DMatrix<f64>,
    mass: DMatrix<f64>,
    ones: DVector<f64>,
}

impl InfSupOperators {
    fn new(v: &Arc<FunctionSpace>, q: &Arc<FunctionSpace>) -> Result<Self> {
        if v.family() != SpaceFamily::VectorP2 || q.family() != SpaceFamily::ScalarP1 {
            return Err(Error::SpaceMismatch("inf-sup probe needs the Taylor-Hood pair".into()));
        }
        let interior = v.interior_dofs();
        if interior.len() > INFSUP_DENSE_CAP {
            return Err(Error::SizeCap { size: interior.len(), cap: INFSUP_DENSE_CAP });
        }
        let dense = |m: &CsrMatrix| {
            let d = m.to_dense();
            DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| d[i][j])
        };
        let a = {
            let mass = assemble_matrix(&FormDescriptor::new(FormKind::Mass, v, v))?;
            let stiff = assemble_matrix(&FormDescriptor::new(FormKind::Stiffness, v, v))?;
            let mut t = mass.triplets();
            t.extend(stiff.triplets());
            CsrMatrix::from_triplets(v.dim(), v.dim(), &t)?.select(&interior, &interior)
        };
        let all_q: Vec<usize> = (0..q.dim()).collect();
        let b = assemble_matrix(&FormDescriptor::new(FormKind::DivPressure, q, v))?
            .select(&interior, &all_q)
            .transpose();
        let a = dense(&a);
        let b = dense(&b);
        let chol = Cholesky::new(a).ok_or_else(|| Error::Solver("velocity H1 matrix is not SPD".into()))?;
        let ainv_bt = chol.solve(&b.transpose());
        let schur = &b * ainv_bt;
        let mass = dense(&assemble_matrix(&FormDescriptor::new(FormKind::Mass, q, q))?);
        let ones = DVector::from_element(q.dim(), 1.0);
        Ok(Self { schur, mass, ones })
    }

    /// `L⁻¹ S L⁻ᵀ` with `M = L Lᵀ`, and the unit constant direction `Lᵀ1`.
    fn reduced(&self) -> (DMatrix<f64>, DVector<f64>) {
        let chol = Cholesky::new(self.mass.clone()).expect("pressure mass matrix is SPD");
        let l = chol.l();
        let linv = l.clone().try_inverse().expect("triangular factor is invertible");
        let mut c = &linv * &self.schur * linv.transpose();
        c = (&c + c.transpose()) * 0.5;
        let y1 = l.transpose() * &self.ones;
        let y1 = &y1 / y1.norm();
        (c, y1)
    }
}
