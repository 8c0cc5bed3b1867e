//! Compressed sparse row matrices and a direct LU solver.
//!
//! Factorization is delegated to faer's supernodal sparse LU (COLAMD column
//! ordering, partial row pivoting), always run sequentially so repeated
//! solves are bit-reproducible.

use std::io::Write;

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::sparse::linalg::lu::{factorize_symbolic_lu, LuRef, NumericLu, SymbolicLu};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};
use faer::{Conj, MatMut, Par};

use crate::error::{Error, Result};

/// Entries with magnitude below this are dropped by [`CsrMatrix::from_triplets`].
pub const DROP_TOLERANCE: f64 = 1e-300;

/// Residual contract: `‖Ax − b‖∞ ≤ RESIDUAL_TOLERANCE (‖A‖∞‖x‖∞ + ‖b‖∞)`.
pub const RESIDUAL_TOLERANCE: f64 = 1e-10;

pub type Triplet = (usize, usize, f64);

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Sums duplicates, sorts columns within each row and drops zeros.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[Triplet]) -> Result<Self> {
        let mut counts = vec![0usize; nrows + 1];
        for &(r, c, _) in triplets {
            if r >= nrows || c >= ncols {
                return Err(Error::IndexOutOfRange { row: r, col: c, nrows, ncols });
            }
            counts[r + 1] += 1;
        }
        for i in 0..nrows {
            counts[i + 1] += counts[i];
        }
        let mut next = counts.clone();
        let mut bucket = vec![(0usize, 0.0f64); triplets.len()];
        for &(r, c, v) in triplets {
            bucket[next[r]] = (c, v);
            next[r] += 1;
        }
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        row_ptr.push(0);
        for r in 0..nrows {
            let row = &mut bucket[counts[r]..counts[r + 1]];
            row.sort_by_key(|e| e.0);
            let mut k = 0;
            while k < row.len() {
                let c = row[k].0;
                let mut sum = 0.0;
                while k < row.len() && row[k].0 == c {
                    sum += row[k].1;
                    k += 1;
                }
                if sum.abs() >= DROP_TOLERANCE {
                    col_idx.push(c);
                    values.push(sum);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Ok(Self { nrows, ncols, row_ptr, col_idx, values })
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            row_ptr: vec![0; nrows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            nrows: n,
            ncols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Column indices and values of row `r`.
    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        (&self.col_idx[span.clone()], &self.values[span])
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (cols, vals) = self.row(r);
        cols.binary_search(&c).map(|k| vals[k]).unwrap_or(0.0)
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows)
            .map(|r| {
                let (cols, vals) = self.row(r);
                cols.iter().zip(vals).map(|(&c, &v)| v * x[c]).sum()
            })
            .collect()
    }

    /// `xᵀ A y`
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        x.iter().zip(self.matvec(y)).map(|(a, b)| a * b).sum()
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.ncols + 1];
        for &c in &self.col_idx {
            counts[c + 1] += 1;
        }
        for i in 0..self.ncols {
            counts[i + 1] += counts[i];
        }
        let mut next = counts.clone();
        let mut col_idx = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                col_idx[next[c]] = r;
                values[next[c]] = v;
                next[c] += 1;
            }
        }
        Self {
            nrows: self.ncols,
            ncols: self.nrows,
            row_ptr: counts,
            col_idx,
            values,
        }
    }

    /// Submatrix with the given rows and columns, renumbered in the order given.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> Self {
        let mut col_map = vec![usize::MAX; self.ncols];
        for (k, &c) in cols.iter().enumerate() {
            col_map[c] = k;
        }
        let mut triplets = Vec::new();
        for (i, &r) in rows.iter().enumerate() {
            let (cs, vs) = self.row(r);
            for (&c, &v) in cs.iter().zip(vs) {
                if col_map[c] != usize::MAX {
                    triplets.push((i, col_map[c], v));
                }
            }
        }
        Self::from_triplets(rows.len(), cols.len(), &triplets).expect("indices in range")
    }

    pub fn triplets(&self) -> Vec<Triplet> {
        let mut out = Vec::with_capacity(self.nnz());
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            out.extend(cols.iter().zip(vals).map(|(&c, &v)| (r, c, v)));
        }
        out
    }

    pub fn norm_inf(&self) -> f64 {
        (0..self.nrows)
            .map(|r| self.row(r).1.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.ncols]; self.nrows];
        for (r, c, v) in self.triplets() {
            d[r][c] = v;
        }
        d
    }

    /// MatrixMarket coordinate (real, general) dump for debugging.
    pub fn write_matrix_market<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "%%MatrixMarket matrix coordinate real general")?;
        writeln!(out, "{} {} {}", self.nrows, self.ncols, self.nnz())?;
        for (r, c, v) in self.triplets() {
            writeln!(out, "{} {} {:.17e}", r + 1, c + 1, v)?;
        }
        Ok(())
    }
}

/// Imposes `x[i] = g` for every `constraints[i] = Some(g)` on the system
/// given by `triplets` and `rhs`: constrained rows become identity rows and
/// constrained columns are moved to the right-hand side.
pub fn eliminate_constraints(triplets: &mut Vec<Triplet>, rhs: &mut [f64], constraints: &[Option<f64>]) {
    assert_eq!(rhs.len(), constraints.len());
    triplets.retain(|&(r, c, v)| {
        if constraints[r].is_some() {
            return false;
        }
        if let Some(g) = constraints[c] {
            rhs[r] -= v * g;
            return false;
        }
        true
    });
    for (i, g) in constraints.iter().enumerate() {
        if let Some(g) = g {
            triplets.push((i, i, 1.0));
            rhs[i] = *g;
        }
    }
}

/// LU factors of a square [`CsrMatrix`].
pub struct Factorization {
    n: usize,
    matrix: CsrMatrix,
    norm_inf: f64,
    symbolic: SymbolicLu<usize>,
    numeric: NumericLu<usize, f64>,
}

impl std::fmt::Debug for Factorization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Factorization")
            .field("n", &self.n)
            .field("nnz", &self.matrix.nnz())
            .finish_non_exhaustive()
    }
}

pub fn lu_factor(matrix: &CsrMatrix) -> Result<Factorization> {
    if matrix.nrows != matrix.ncols {
        return Err(Error::Solver(format!(
            "cannot factor a non-square {}x{} matrix",
            matrix.nrows, matrix.ncols
        )));
    }
    let n = matrix.nrows;
    // CSC storage of A is the CSR storage of Aᵀ
    let csc = matrix.transpose();
    let symbolic_ref = SymbolicSparseColMatRef::new_checked(n, n, &csc.row_ptr, None, &csc.col_idx);
    let a = SparseColMatRef::new(symbolic_ref, &csc.values);
    let symbolic = factorize_symbolic_lu(symbolic_ref, Default::default())
        .map_err(|e| Error::Solver(format!("symbolic factorization failed: {e:?}")))?;
    let mut numeric = NumericLu::new();
    {
        let mut mem = MemBuffer::new(symbolic.factorize_numeric_lu_scratch::<f64>(Par::Seq, Default::default()));
        symbolic
            .factorize_numeric_lu(&mut numeric, a, Par::Seq, MemStack::new(&mut mem), Default::default())
            .map_err(|e| match e {
                faer::sparse::linalg::LuError::SymbolicSingular { index } => Error::SingularPivot { row: index },
                other => Error::Solver(format!("{other:?}")),
            })?;
    }
    Ok(Factorization {
        n,
        norm_inf: matrix.norm_inf(),
        matrix: matrix.clone(),
        symbolic,
        numeric,
    })
}

impl Factorization {
    pub fn dim(&self) -> usize {
        self.n
    }

    fn solve_raw(&self, rhs: &mut [f64]) {
        let lu = LuRef::new_unchecked(&self.symbolic, &self.numeric);
        let mut mem = MemBuffer::new(self.symbolic.solve_in_place_scratch::<f64>(1, Par::Seq));
        let mat = MatMut::from_column_major_slice_mut(rhs, self.n, 1);
        lu.solve_in_place_with_conj(Conj::No, mat, Par::Seq, MemStack::new(&mut mem));
    }

    /// Solves `A x = b`, refining once if the residual contract is not met.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        assert_eq!(b.len(), self.n, "rhs length");
        let mut x = b.to_vec();
        self.solve_raw(&mut x);
        if let Some(row) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::SingularPivot { row });
        }
        let mut r = self.residual(&x, b);
        if !self.within_contract(&r, &x, b) {
            let mut dx = r.clone();
            self.solve_raw(&mut dx);
            for (xi, d) in x.iter_mut().zip(&dx) {
                *xi -= d;
            }
            r = self.residual(&x, b);
            if !self.within_contract(&r, &x, b) {
                let (row, _) = r
                    .iter()
                    .enumerate()
                    .fold((0, 0.0), |acc, (i, v)| if v.abs() > acc.1 { (i, v.abs()) } else { acc });
                return Err(Error::SingularPivot { row });
            }
        }
        Ok(x)
    }

    /// `A x − b`
    pub fn residual(&self, x: &[f64], b: &[f64]) -> Vec<f64> {
        self.matrix.matvec(x).iter().zip(b).map(|(ax, bi)| ax - bi).collect()
    }

    /// Scaled residual `‖Ax − b‖∞ / (‖A‖∞‖x‖∞ + ‖b‖∞)`.
    pub fn relative_residual(&self, x: &[f64], b: &[f64]) -> f64 {
        let r = inf_norm(&self.residual(x, b));
        let scale = self.norm_inf * inf_norm(x) + inf_norm(b);
        if scale == 0.0 {
            r
        } else {
            r / scale
        }
    }

    fn within_contract(&self, r: &[f64], x: &[f64], b: &[f64]) -> bool {
        inf_norm(r) <= RESIDUAL_TOLERANCE * (self.norm_inf * inf_norm(x) + inf_norm(b))
    }
}

/// `‖Ax − b‖∞ / (‖A‖∞‖x‖∞ + ‖b‖∞)`, or 0 for a zero system.
pub fn contract_residual(matrix: &CsrMatrix, x: &[f64], b: &[f64]) -> f64 {
    let r = matrix.matvec(x);
    let num = r.iter().zip(b).fold(0.0, |m: f64, (ax, bi)| m.max((ax - bi).abs()));
    let scale = matrix.norm_inf() * inf_norm(x) + inf_norm(b);
    if scale == 0.0 {
        0.0
    } else {
        num / scale
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Right-preconditioned GMRES for `A x = b`, starting from `x`, with the LU
/// factors `m` of a nearby matrix as preconditioner. Stops once the residual
/// estimate drops below `tol` (2-norm) or after `max_iter` iterations, and
/// returns the iteration count with a convergence flag.
pub fn gmres(
    a: &CsrMatrix,
    m: &Factorization,
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
) -> (usize, bool) {
    let n = b.len();
    let mut r: Vec<f64> = a.matvec(x).iter().zip(b).map(|(ax, bi)| bi - ax).collect();
    let beta = dot(&r, &r).sqrt();
    if beta <= tol {
        return (0, true);
    }
    r.iter_mut().for_each(|v| *v /= beta);
    let mut basis = vec![r];
    let mut h: Vec<Vec<f64>> = Vec::new();
    let (mut cs, mut sn) = (Vec::<f64>::new(), Vec::<f64>::new());
    let mut g = vec![beta];
    let mut k = 0;
    let mut converged = false;
    while k < max_iter {
        let mut z = basis[k].clone();
        m.solve_raw(&mut z);
        let mut w = a.matvec(&z);
        let mut col = vec![0.0; k + 2];
        for (i, v) in basis.iter().enumerate() {
            let hij = dot(&w, v);
            col[i] = hij;
            w.iter_mut().zip(v).for_each(|(wi, vi)| *wi -= hij * vi);
        }
        let norm = dot(&w, &w).sqrt();
        col[k + 1] = norm;
        for i in 0..k {
            let t = cs[i] * col[i] + sn[i] * col[i + 1];
            col[i + 1] = -sn[i] * col[i] + cs[i] * col[i + 1];
            col[i] = t;
        }
        let d = col[k].hypot(col[k + 1]);
        let (c, s) = if d == 0.0 { (1.0, 0.0) } else { (col[k] / d, col[k + 1] / d) };
        col[k] = d;
        col[k + 1] = 0.0;
        cs.push(c);
        sn.push(s);
        g.push(-s * g[k]);
        g[k] *= c;
        h.push(col);
        k += 1;
        if g[k].abs() <= tol || norm == 0.0 {
            converged = true;
            break;
        }
        w.iter_mut().for_each(|v| *v /= norm);
        basis.push(w);
    }
    // back substitution for the Krylov coefficients
    let mut y = vec![0.0; k];
    for i in (0..k).rev() {
        let s: f64 = ((i + 1)..k).map(|j| h[j][i] * y[j]).sum();
        y[i] = (g[i] - s) / h[i][i];
    }
    let mut update = vec![0.0; n];
    for (yi, v) in y.iter().zip(&basis) {
        update.iter_mut().zip(v).for_each(|(u, vi)| *u += yi * vi);
    }
    m.solve_raw(&mut update);
    x.iter_mut().zip(&update).for_each(|(xi, u)| *xi += u);
    (k, converged)
}

/// How a [`ReusedLu`] solve was obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveStats {
    pub refactored: bool,
    pub iterations: usize,
    pub residual: f64,
}

/// Solver for a sequence of nearby systems: the last LU factorization serves
/// as a preconditioner for later matrices and is refreshed whenever the
/// preconditioned iteration fails to meet the residual contract.
#[derive(Debug, Default)]
pub struct ReusedLu {
    lu: std::sync::Mutex<Option<Factorization>>,
}

/// Krylov iterations allowed before refactoring.
pub const REUSE_MAX_ITERATIONS: usize = 30;

/// Scaled residual the Krylov iteration aims for; the factorization is kept
/// as long as the result meets [`RESIDUAL_TOLERANCE`].
pub const REUSE_TARGET: f64 = 1e-15;

impl ReusedLu {
    pub fn new() -> Self {
        Self::default()
    }

    /// Drops the stored factorization.
    pub fn reset(&self) {
        *self.lu.lock().expect("solver lock") = None;
    }

    pub fn solve(&self, matrix: &CsrMatrix, b: &[f64]) -> Result<(Vec<f64>, SolveStats)> {
        let mut guard = self.lu.lock().expect("solver lock");
        if let Some(lu) = guard.as_ref().filter(|lu| lu.dim() == matrix.nrows()) {
            let mut x = b.to_vec();
            lu.solve_raw(&mut x);
            if x.iter().all(|v| v.is_finite()) {
                let scale = matrix.norm_inf() * inf_norm(&x) + inf_norm(b);
                let tol = REUSE_TARGET * scale;
                let (iterations, _) = gmres(matrix, lu, b, &mut x, tol, REUSE_MAX_ITERATIONS);
                let residual = contract_residual(matrix, &x, b);
                if residual <= RESIDUAL_TOLERANCE {
                    return Ok((x, SolveStats { refactored: false, iterations, residual }));
                }
            }
            log::debug!("stored factorization no longer adequate, refactoring");
        }
        let lu = lu_factor(matrix)?;
        let x = lu.solve(b)?;
        let residual = lu.relative_residual(&x, b);
        *guard = Some(lu);
        Ok((x, SolveStats { refactored: true, iterations: 0, residual }))
    }
}

pub fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}
