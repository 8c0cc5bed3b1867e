//! Independent oracles shared by the integration tests and the acceptance
//! report. Every check returns the measured quantity so callers can both
//! assert on it and print it.

#![allow(dead_code)]

use std::sync::Arc;

use mhd_core::diagnostics::log_log_slope;
use mhd_core::forms::{assemble_matrix, FormDescriptor, FormKind};
use mhd_core::geom::{self, Mat3, Vec3};
use mhd_core::mesh::CellGeometry;
use mhd_core::projection::{DiscreteCurl, DivFreeProjector, StokesProjector};
use mhd_core::quadrature::{quadrature, MAX_DEGREE};
use mhd_core::reference::{apply_dof, ReferenceFamily};
use mhd_core::{ExactSolution, FeField, FunctionSpace, ManufacturedSolution, Mesh, SpaceFamily};
use nalgebra::{DMatrix, DVector};
use rand::rngs::StdRng;
use rand::{RngExt, SeedableRng};

pub const FAMILIES: [SpaceFamily; 4] =
    [SpaceFamily::ScalarP1, SpaceFamily::VectorP2, SpaceFamily::Nedelec2, SpaceFamily::Bdm1];

/// `a!b!c!/(a+b+c+3)!`, the integral of `x^a y^b z^c` over the unit simplex.
pub fn simplex_monomial_integral(a: u32, b: u32, c: u32) -> f64 {
    let fact = |k: u32| (1..=k).map(f64::from).product::<f64>();
    fact(a) * fact(b) * fact(c) / fact(a + b + c + 3)
}

/// Largest relative quadrature error over all monomials each rule claims to
/// integrate exactly.
pub fn quadrature_monomial_error() -> f64 {
    let mut worst = 0.0f64;
    for degree in 1..=MAX_DEGREE {
        let rule = quadrature(degree).expect("supported degree");
        let d = rule.degree as u32;
        for a in 0..=d {
            for b in 0..=d - a {
                for c in 0..=d - a - b {
                    let approx: f64 = rule
                        .points
                        .iter()
                        .zip(&rule.weights)
                        .map(|(p, w)| w * p[0].powi(a as i32) * p[1].powi(b as i32) * p[2].powi(c as i32))
                        .sum();
                    let exact = simplex_monomial_integral(a, b, c);
                    worst = worst.max((approx - exact).abs() / exact);
                }
            }
        }
    }
    worst
}

/// A tetrahedron with random, reasonably shaped vertices.
pub fn random_cell(seed: u64) -> Arc<Mesh> {
    let mut rng = StdRng::seed_from_u64(seed);
    let base = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    let scale = rng.random_range(0.3..1.5);
    let verts: Vec<Vec3> = base
        .iter()
        .map(|v| std::array::from_fn(|k| scale * (v[k] + rng.random_range(-0.2..0.2)) + 0.1 * k as f64))
        .collect();
    // any vertex order; the mesh sorts it
    Arc::new(Mesh::from_cells(verts, vec![[2, 0, 3, 1]]).expect("non-degenerate cell"))
}

pub fn cell_vertices(mesh: &Mesh, cell: usize) -> [Vec3; 4] {
    mesh.cells()[cell].map(|v| mesh.vertex(v))
}

/// Polynomial basis in coordinates centred at the cell centroid.
#[derive(Debug, Clone, Copy)]
struct Monomials {
    centre: Vec3,
    degree: usize,
}

impl Monomials {
    fn count(&self) -> usize {
        if self.degree == 1 {
            4
        } else {
            10
        }
    }

    fn eval(&self, x: &Vec3) -> Vec<(f64, Vec3)> {
        let y = geom::sub(x, &self.centre);
        let mut out = vec![(1.0, [0.0; 3])];
        for k in 0..3 {
            let mut g = [0.0; 3];
            g[k] = 1.0;
            out.push((y[k], g));
        }
        if self.degree == 2 {
            for k in 0..3 {
                let mut g = [0.0; 3];
                g[k] = 2.0 * y[k];
                out.push((y[k] * y[k], g));
            }
            for (i, j) in [(0, 1), (0, 2), (1, 2)] {
                let mut g = [0.0; 3];
                g[i] = y[j];
                g[j] = y[i];
                out.push((y[i] * y[j], g));
            }
        }
        out
    }
}

/// Nodal basis of one family on one cell computed from scratch: the dof
/// functionals are applied to a monomial basis and the resulting matrix is
/// inverted.
pub struct OracleBasis {
    family: SpaceFamily,
    monomials: Monomials,
    /// `coeffs[(j, i)]`: coefficient of monomial `j` in basis function `i`.
    coeffs: DMatrix<f64>,
}

/// Value and Jacobian (`jac[a][b] = ∂_b v_a`) of a basis function. Scalar
/// functions store their value in component 0 and their gradient in row 0.
#[derive(Debug, Clone, Copy)]
pub struct Sample {
    pub value: Vec3,
    pub jac: Mat3,
}

impl Sample {
    pub fn curl(&self) -> Vec3 {
        let j = &self.jac;
        [j[2][1] - j[1][2], j[0][2] - j[2][0], j[1][0] - j[0][1]]
    }

    pub fn div(&self) -> f64 {
        self.jac[0][0] + self.jac[1][1] + self.jac[2][2]
    }

    fn scaled(&self, s: f64) -> Sample {
        Sample {
            value: geom::scale(s, &self.value),
            jac: self.jac.map(|r| geom::scale(s, &r)),
        }
    }

    fn add(&mut self, o: &Sample) {
        for a in 0..3 {
            self.value[a] += o.value[a];
            for b in 0..3 {
                self.jac[a][b] += o.jac[a][b];
            }
        }
    }
}

impl OracleBasis {
    pub fn new(family: SpaceFamily, verts: &[Vec3; 4]) -> Self {
        let centre = geom::scale(0.25, &verts.iter().fold([0.0; 3], |a, v| geom::add(&a, v)));
        let (rf, degree) = match family {
            SpaceFamily::ScalarP1 => (ReferenceFamily::LagrangeP1, 1),
            SpaceFamily::VectorP2 => (ReferenceFamily::LagrangeP2, 2),
            SpaceFamily::Nedelec2 => (ReferenceFamily::Nedelec2, 1),
            SpaceFamily::Bdm1 => (ReferenceFamily::Bdm1, 1),
        };
        let monomials = Monomials { centre, degree };
        let vector = matches!(family, SpaceFamily::Nedelec2 | SpaceFamily::Bdm1);
        let nm = monomials.count() * if vector { 3 } else { 1 };
        let mut dofs = DMatrix::zeros(nm, nm);
        for j in 0..nm {
            let (comp, m) = (j / monomials.count(), j % monomials.count());
            let f = |x: &Vec3| {
                let mut v = [0.0; 3];
                v[comp] = monomials.eval(x)[m].0;
                v
            };
            for k in 0..nm {
                dofs[(k, j)] = apply_dof(rf, k, verts, &f);
            }
        }
        let coeffs = dofs.try_inverse().expect("unisolvent dofs");
        Self { family, monomials, coeffs }
    }

    pub fn len(&self) -> usize {
        self.family.local_dim()
    }

    /// All local basis functions at the physical point `x`.
    pub fn eval(&self, x: &Vec3) -> Vec<Sample> {
        let ms = self.monomials.eval(x);
        let nm = ms.len();
        let scalar = |i: usize| {
            let mut s = (0.0, [0.0; 3]);
            for (j, (v, g)) in ms.iter().enumerate() {
                let c = self.coeffs[(j, i)];
                s.0 += c * v;
                s.1 = geom::add(&s.1, &geom::scale(c, g));
            }
            s
        };
        match self.family {
            SpaceFamily::ScalarP1 => (0..4)
                .map(|i| {
                    let (v, g) = scalar(i);
                    Sample { value: [v, 0.0, 0.0], jac: [g, [0.0; 3], [0.0; 3]] }
                })
                .collect(),
            SpaceFamily::VectorP2 => {
                let nodal: Vec<_> = (0..10).map(scalar).collect();
                (0..30)
                    .map(|i| {
                        let (comp, a) = (i / 10, i % 10);
                        let mut s = Sample { value: [0.0; 3], jac: [[0.0; 3]; 3] };
                        s.value[comp] = nodal[a].0;
                        s.jac[comp] = nodal[a].1;
                        s
                    })
                    .collect()
            }
            SpaceFamily::Nedelec2 | SpaceFamily::Bdm1 => (0..12)
                .map(|i| {
                    let mut s = Sample { value: [0.0; 3], jac: [[0.0; 3]; 3] };
                    for comp in 0..3 {
                        for (j, (v, g)) in ms.iter().enumerate() {
                            let c = self.coeffs[(comp * nm + j, i)];
                            s.value[comp] += c * v;
                            s.jac[comp] = geom::add(&s.jac[comp], &geom::scale(c, g));
                        }
                    }
                    s
                })
                .collect(),
        }
    }
}

fn reference_family(family: SpaceFamily) -> ReferenceFamily {
    family.reference()
}

fn unit_field(space: &Arc<FunctionSpace>, dof: usize) -> FeField {
    let mut coeffs = vec![0.0; space.dim()];
    coeffs[dof] = 1.0;
    FeField::new(space.clone(), coeffs).expect("length matches")
}

fn eval_at(field: &FeField, geo: &CellGeometry, x: &Vec3) -> Sample {
    let vals = field.evaluate(0, &[geo.pullback(x)]);
    Sample { value: vals.values[0], jac: vals.jacobians[0] }
}

fn one_cell(seed: u64, family: SpaceFamily) -> (Arc<Mesh>, CellGeometry, [Vec3; 4], Arc<FunctionSpace>) {
    let mesh = random_cell(seed);
    let geo = mesh.cell_geometry(0).expect("positive cell");
    let verts = cell_vertices(&mesh, 0);
    let space = FunctionSpace::new(mesh.clone(), family);
    (mesh, geo, verts, space)
}

fn random_points(rng: &mut StdRng, geo: &CellGeometry, count: usize) -> Vec<Vec3> {
    (0..count)
        .map(|_| {
            let r: Vec3 = std::array::from_fn(|_| rng.random_range(-0.2..0.6));
            geo.map(&r)
        })
        .collect()
}

/// Largest deviation of `apply_dof(k, φ_i)` from `sign_i δ_ki` on a random cell.
pub fn duality_error(family: SpaceFamily, seed: u64) -> f64 {
    let (_mesh, geo, verts, space) = one_cell(seed, family);
    let rf = reference_family(family);
    let dofs = space.cell_dofs(0).to_vec();
    let signs = space.cell_signs(0).to_vec();
    let mut worst = 0.0f64;
    for (i, &g) in dofs.iter().enumerate() {
        let field = unit_field(&space, g);
        let f = |x: &Vec3| eval_at(&field, &geo, x).value;
        for k in 0..dofs.len() {
            let measured = if family == SpaceFamily::VectorP2 {
                let (comp, a) = (k / 10, k % 10);
                apply_dof(rf, a, &verts, &|x| [f(x)[comp], 0.0, 0.0])
            } else {
                apply_dof(rf, k, &verts, &f)
            };
            let expected = if k == i { signs[i] } else { 0.0 };
            worst = worst.max((measured - expected).abs());
        }
    }
    worst
}

/// Largest deviation of the implemented physical basis (values and
/// Jacobians) from the monomial oracle at random points, relative to the
/// largest oracle entry.
pub fn basis_oracle_error(family: SpaceFamily, seed: u64) -> f64 {
    let (_mesh, geo, verts, space) = one_cell(seed, family);
    let oracle = OracleBasis::new(family, &verts);
    let dofs = space.cell_dofs(0).to_vec();
    let signs = space.cell_signs(0).to_vec();
    let mut rng = StdRng::seed_from_u64(seed ^ 0x5eed);
    let (mut worst, mut scale) = (0.0f64, 0.0f64);
    for x in random_points(&mut rng, &geo, 5) {
        let ref_vals = oracle.eval(&x);
        for (i, &g) in dofs.iter().enumerate() {
            let got = eval_at(&unit_field(&space, g), &geo, &x);
            let want = ref_vals[i].scaled(signs[i]);
            for a in 0..3 {
                worst = worst.max((got.value[a] - want.value[a]).abs());
                scale = scale.max(want.value[a].abs());
                for b in 0..3 {
                    worst = worst.max((got.jac[a][b] - want.jac[a][b]).abs());
                    scale = scale.max(want.jac[a][b].abs());
                }
            }
        }
    }
    worst / scale.max(1.0)
}

/// P1 mass matrix on a random cell against `V/10` (diagonal) and `V/20`
/// (off-diagonal), relative to `V`.
pub fn p1_mass_error(seed: u64) -> f64 {
    let (_mesh, geo, _verts, space) = one_cell(seed, SpaceFamily::ScalarP1);
    let m = assemble_matrix(&FormDescriptor::new(FormKind::Mass, &space, &space)).expect("mass").to_dense();
    let vol = geo.volume();
    let mut worst = 0.0f64;
    for (i, row) in m.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            let expected = if i == j { vol / 10.0 } else { vol / 20.0 };
            worst = worst.max((v - expected).abs() / vol);
        }
    }
    worst
}

/// Least-squares residual of fitting the curl of every physical Nédélec
/// basis function with physical BDM basis functions, cell by cell.
pub fn de_rham_residual(n: usize) -> f64 {
    let mesh = Arc::new(Mesh::structured_cube(n).expect("mesh"));
    let c = FunctionSpace::new(mesh.clone(), SpaceFamily::Nedelec2);
    let d = FunctionSpace::new(mesh.clone(), SpaceFamily::Bdm1);
    let points = quadrature(4).expect("rule").points.clone();
    let (tc, td) = (c.tabulate(&points), d.tabulate(&points));
    let np = points.len();
    let mut worst = 0.0f64;
    for cell in 0..mesh.num_cells() {
        let geo = mesh.cell_geometry(cell).expect("positive cell");
        let bc = c.cell_basis(cell, &geo, &tc);
        let bd = d.cell_basis(cell, &geo, &td);
        let psi = DMatrix::from_fn(3 * np, 12, |r, j| bd.value(r / 3, j)[r % 3]);
        let svd = psi.clone().svd(true, true);
        for i in 0..12 {
            let rhs = DVector::from_fn(3 * np, |r, _| bc.curl(r / 3, i)[r % 3]);
            let coef = svd.solve(&rhs, 1e-14).expect("least squares");
            let res = (&psi * coef - &rhs).norm();
            worst = worst.max(res / rhs.norm().max(1.0));
        }
    }
    worst
}

/// Integrand of a bilinear form for trial sample `u`, test sample `v` and
/// coefficient value `w`.
fn integrand(kind: FormKind, trial: SpaceFamily, u: &Sample, v: &Sample, w: &Vec3) -> f64 {
    match kind {
        FormKind::Mass => geom::dot(&u.value, &v.value),
        FormKind::Stiffness => (0..3).map(|a| geom::dot(&u.jac[a], &v.jac[a])).sum(),
        FormKind::DivPressure => u.value[0] * v.div(),
        FormKind::CurlCoupling if trial == SpaceFamily::Nedelec2 => geom::dot(&u.curl(), &v.value),
        FormKind::CurlCoupling => geom::dot(&u.value, &v.curl()),
        FormKind::ConvectionSkew => {
            let wu = geom::matvec(&u.jac, w);
            let wv = geom::matvec(&v.jac, w);
            0.5 * (geom::dot(&wu, &v.value) - geom::dot(&wv, &u.value))
        }
        FormKind::CrossLorentz | FormKind::CrossOhm => geom::dot(&geom::cross(&u.value, w), &v.value),
    }
}

/// Every bilinear form on a random cell against a dense degree-8 quadrature
/// of the oracle basis; returns the worst relative entry error per form.
pub fn block_oracle_errors(seed: u64) -> Vec<(String, f64)> {
    use SpaceFamily::*;
    let mesh = random_cell(seed);
    let geo = mesh.cell_geometry(0).expect("positive cell");
    let verts = cell_vertices(&mesh, 0);
    let space = |f| FunctionSpace::new(mesh.clone(), f);
    let spaces: Vec<(SpaceFamily, Arc<FunctionSpace>)> = FAMILIES.iter().map(|&f| (f, space(f))).collect();
    let get = |f: SpaceFamily| spaces.iter().find(|(g, _)| *g == f).unwrap().1.clone();
    let oracles: Vec<(SpaceFamily, OracleBasis)> =
        FAMILIES.iter().map(|&f| (f, OracleBasis::new(f, &verts))).collect();
    let oracle = |f: SpaceFamily| &oracles.iter().find(|(g, _)| *g == f).unwrap().1;

    let mut rng = StdRng::seed_from_u64(seed ^ 0xb10c);
    let mut random_field = |f: SpaceFamily| {
        let s = get(f);
        let coeffs = (0..s.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
        FeField::new(s, coeffs).unwrap()
    };
    let w_p2 = random_field(VectorP2);
    let b_bdm = random_field(Bdm1);

    let cases: Vec<(FormKind, SpaceFamily, SpaceFamily, Option<&FeField>)> = vec![
        (FormKind::Mass, ScalarP1, ScalarP1, None),
        (FormKind::Mass, VectorP2, VectorP2, None),
        (FormKind::Mass, Nedelec2, Nedelec2, None),
        (FormKind::Mass, Bdm1, Bdm1, None),
        (FormKind::Stiffness, VectorP2, VectorP2, None),
        (FormKind::Stiffness, ScalarP1, ScalarP1, None),
        (FormKind::DivPressure, ScalarP1, VectorP2, None),
        (FormKind::CurlCoupling, Bdm1, Nedelec2, None),
        (FormKind::CurlCoupling, Nedelec2, Bdm1, None),
        (FormKind::ConvectionSkew, VectorP2, VectorP2, Some(&w_p2)),
        (FormKind::CrossLorentz, Nedelec2, VectorP2, Some(&b_bdm)),
        (FormKind::CrossOhm, VectorP2, Nedelec2, Some(&b_bdm)),
    ];

    let rule = quadrature(8).expect("rule");
    let eval_field = |field: &FeField, x: &Vec3| -> Vec3 {
        let f = field.space().family();
        let vals = oracle(f).eval(x);
        let (dofs, signs) = (field.space().cell_dofs(0), field.space().cell_signs(0));
        let mut acc = Sample { value: [0.0; 3], jac: [[0.0; 3]; 3] };
        for (i, s) in vals.iter().enumerate() {
            acc.add(&s.scaled(signs[i] * field.coeffs[dofs[i]]));
        }
        acc.value
    };

    let mut out = Vec::new();
    for (kind, tr, te, coef) in cases {
        let (trial, test) = (get(tr), get(te));
        let mut desc = FormDescriptor::new(kind, &trial, &test);
        if let Some(c) = coef {
            desc = desc.with_coefficient(c);
        }
        let assembled = assemble_matrix(&desc).expect("assembly").to_dense();
        let mut dense = vec![vec![0.0; trial.dim()]; test.dim()];
        for (p, wq) in rule.points.iter().zip(&rule.weights) {
            let x = geo.map(p);
            let w = coef.map(|c| eval_field(c, &x)).unwrap_or([0.0; 3]);
            let (ut, vt) = (oracle(tr).eval(&x), oracle(te).eval(&x));
            for (i, v) in vt.iter().enumerate() {
                let gi = test.cell_dofs(0)[i];
                let si = test.cell_signs(0)[i];
                for (j, u) in ut.iter().enumerate() {
                    let gj = trial.cell_dofs(0)[j];
                    let sj = trial.cell_signs(0)[j];
                    dense[gi][gj] += wq * geo.det * si * sj * integrand(kind, tr, u, v, &w);
                }
            }
        }
        let (mut err, mut scale) = (0.0f64, 0.0f64);
        for (ra, rd) in assembled.iter().zip(&dense) {
            for (a, d) in ra.iter().zip(rd) {
                err = err.max((a - d).abs());
                scale = scale.max(d.abs());
            }
        }
        out.push((format!("{kind:?} {tr:?}->{te:?}"), err / scale.max(1.0)));
    }
    out
}

/// Random vector field with polynomial components of total degree ≤ 3.
pub struct PolyField {
    /// `terms[comp]`: (coefficient, exponents)
    terms: [Vec<(f64, [i32; 3])>; 3],
}

impl PolyField {
    pub fn random(rng: &mut StdRng) -> Self {
        let mut exps = Vec::new();
        for a in 0..=3 {
            for b in 0..=3 - a {
                for c in 0..=3 - a - b {
                    exps.push([a, b, c]);
                }
            }
        }
        let terms = std::array::from_fn(|_| exps.iter().map(|e| (rng.random_range(-1.0..1.0), *e)).collect());
        Self { terms }
    }

    fn partial(&self, comp: usize, dir: usize, x: &Vec3) -> f64 {
        self.terms[comp]
            .iter()
            .filter(|(_, e)| e[dir] > 0)
            .map(|(c, e)| {
                let mut v = c * f64::from(e[dir]);
                for k in 0..3 {
                    let p = if k == dir { e[k] - 1 } else { e[k] };
                    v *= x[k].powi(p);
                }
                v
            })
            .sum()
    }

    pub fn value(&self, x: &Vec3) -> Vec3 {
        std::array::from_fn(|comp| {
            self.terms[comp].iter().map(|(c, e)| c * x[0].powi(e[0]) * x[1].powi(e[1]) * x[2].powi(e[2])).sum()
        })
    }

    pub fn curl(&self, x: &Vec3) -> Vec3 {
        [
            self.partial(2, 1, x) - self.partial(1, 2, x),
            self.partial(0, 2, x) - self.partial(2, 0, x),
            self.partial(1, 0, x) - self.partial(0, 1, x),
        ]
    }
}

/// `‖f‖` over the mesh with a degree-8 rule.
pub fn l2_norm(mesh: &Mesh, f: &dyn Fn(&Vec3) -> Vec3) -> f64 {
    let rule = quadrature(8).expect("rule");
    let mut sum = 0.0;
    for geo in mesh.geometries() {
        for (p, w) in rule.points.iter().zip(&rule.weights) {
            let v = f(&geo.map(p));
            sum += w * geo.det * geom::dot(&v, &v);
        }
    }
    sum.sqrt()
}

#[derive(Debug, Clone, Copy, Default)]
pub struct CurlChecks {
    /// `max(‖∇_h×C‖ − ‖∇×C‖)`
    pub norm_excess: f64,
    /// `max ‖∇_h×C − Π_h(∇×C)‖`
    pub commuting_gap: f64,
}

/// Discrete curl of `count` random cubic fields on the `n` mesh against the
/// projected exact curl.
pub fn curl_checks(n: usize, count: usize, seed: u64) -> CurlChecks {
    let mesh = Arc::new(Mesh::structured_cube(n).expect("mesh"));
    let c = FunctionSpace::new(mesh.clone(), SpaceFamily::Nedelec2);
    let dc = DiscreteCurl::new(&c).expect("discrete curl");
    let mut rng = StdRng::seed_from_u64(seed);
    let mut out = CurlChecks { norm_excess: f64::NEG_INFINITY, commuting_gap: 0.0 };
    for _ in 0..count {
        let field = PolyField::random(&mut rng);
        let hc = dc.apply_analytic(&|x| field.value(x)).expect("discrete curl");
        let pc = dc.project(&|x| field.curl(x)).expect("projection");
        let exact = l2_norm(&mesh, &|x| field.curl(x));
        out.norm_excess = out.norm_excess.max(dc.norm(&hc) - exact);
        let mut diff = hc.clone();
        diff.coeffs.iter_mut().zip(&pc.coeffs).for_each(|(a, b)| *a -= b);
        out.commuting_gap = out.commuting_gap.max(dc.norm(&diff));
    }
    out
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ProjectionChecks {
    /// Largest coefficient change when re-projecting a projection.
    pub idempotence: f64,
    /// `max_K |∇·Π_D B|`
    pub divergence: f64,
    /// `‖∇_h×(Π_D B − B)‖`
    pub curl_of_defect: f64,
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

/// Idempotence of the Stokes and divergence-free projections, solenoidality
/// of the latter and the vanishing discrete curl of its defect, for the
/// manufactured data at `t = 0` on the `n` mesh.
pub fn projection_checks(n: usize) -> ProjectionChecks {
    let mesh = Arc::new(Mesh::structured_cube(n).expect("mesh"));
    let [v, q, c, d] = [SpaceFamily::VectorP2, SpaceFamily::ScalarP1, SpaceFamily::Nedelec2, SpaceFamily::Bdm1]
        .map(|f| FunctionSpace::new(mesh.clone(), f));
    let ex = ManufacturedSolution::new(1.0, 1.0, 1.0);

    let stokes = StokesProjector::new(&v, &q, 1.0).expect("stokes");
    let first = stokes.project(&|x| ex.velocity_gradient(x, 0.0), &|x| ex.pressure(x, 0.0)).expect("stokes");
    let second = stokes.project_fields(&first.velocity, &first.pressure).expect("stokes");
    let mut idem = max_diff(&first.velocity.coeffs, &second.velocity.coeffs)
        .max(max_diff(&first.pressure.coeffs, &second.pressure.coeffs));

    let pd = DivFreeProjector::new(&d).expect("div-free projector");
    let b = |x: &Vec3| ex.magnetic(x, 0.0);
    let once = pd.project(&b).expect("projection");
    let twice = pd.project_field(&once.field).expect("projection");
    idem = idem.max(max_diff(&once.field.coeffs, &twice.field.coeffs));
    let divergence = once.divergence_inf.unwrap_or(f64::INFINITY).max(twice.divergence_inf.unwrap_or(f64::INFINITY));

    let dc = DiscreteCurl::new(&c).expect("discrete curl");
    let mut defect = dc.apply(&once.field).expect("curl");
    let exact = dc.apply_analytic(&b).expect("curl");
    defect.coeffs.iter_mut().zip(&exact.coeffs).for_each(|(a, e)| *a -= e);
    ProjectionChecks { idempotence: idem, divergence, curl_of_defect: dc.norm(&defect) }
}

/// `(‖∇(u − Π_V u)‖, ‖B − Π_D B‖)` for the manufactured data at `t = 0`.
pub fn initial_projection_errors(n: usize) -> (f64, f64) {
    let mesh = Arc::new(Mesh::structured_cube(n).expect("mesh"));
    let [v, q, d] = [SpaceFamily::VectorP2, SpaceFamily::ScalarP1, SpaceFamily::Bdm1]
        .map(|f| FunctionSpace::new(mesh.clone(), f));
    let ex = ManufacturedSolution::new(1.0, 1.0, 1.0);
    let u = StokesProjector::new(&v, &q, 1.0)
        .expect("stokes")
        .project(&|x| ex.velocity_gradient(x, 0.0), &|x| ex.pressure(x, 0.0))
        .expect("stokes")
        .velocity;
    let b = DivFreeProjector::new(&d).expect("projector").project(&|x| ex.magnetic(x, 0.0)).expect("projection").field;

    let rule = quadrature(8).expect("rule");
    let (mut eu, mut eb) = (0.0, 0.0);
    for cell in 0..mesh.num_cells() {
        let geo = mesh.cell_geometry(cell).expect("positive cell");
        let uv = u.evaluate(cell, &rule.points);
        let bv = b.evaluate(cell, &rule.points);
        for (k, (p, w)) in rule.points.iter().zip(&rule.weights).enumerate() {
            let x = geo.map(p);
            let g = ex.velocity_gradient(&x, 0.0);
            for a in 0..3 {
                for c in 0..3 {
                    eu += w * geo.det * (g[a][c] - uv.jacobians[k][a][c]).powi(2);
                }
            }
            let db = geom::sub(&ex.magnetic(&x, 0.0), &bv.values[k]);
            eb += w * geo.det * geom::dot(&db, &db);
        }
    }
    (eu.sqrt(), eb.sqrt())
}

/// Observed rates of [`initial_projection_errors`] over `grid`.
pub fn initial_projection_rates(grid: &[usize]) -> (f64, f64) {
    let errs: Vec<(f64, f64)> = grid.iter().map(|&n| initial_projection_errors(n)).collect();
    let h: Vec<f64> = grid.iter().map(|&n| 1.0 / n as f64).collect();
    let eu: Vec<f64> = errs.iter().map(|e| e.0).collect();
    let eb: Vec<f64> = errs.iter().map(|e| e.1).collect();
    (log_log_slope(&h, &eu).expect("slope"), log_log_slope(&h, &eb).expect("slope"))
}
