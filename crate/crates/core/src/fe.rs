//! Conforming piecewise-linear finite elements.
//!
//! Assembly is element-parallel; element contributions are merged in
//! element order so every matrix and vector is bit-reproducible, and the
//! stiffness matrix is bitwise symmetric.

use std::sync::Arc;

use faer::linalg::solvers::Solve;
use faer::sparse::{linalg::solvers::Llt, SparseColMat, Triplet};
use faer::{Mat, Side};
use rayon::prelude::*;

use crate::mesh::{Mesh, NodalField};
use crate::quadrature::{to_physical, TriangleRule};
use crate::{Error, Point, Result};

/// Continuous piecewise-linear finite element function (nodal values).
pub type DiscreteField = NodalField;

/// Scalar function of position.
pub type ScalarFn = Arc<dyn Fn(Point) -> f64 + Send + Sync>;
/// 2×2 matrix-valued function of position.
pub type TensorFn = Arc<dyn Fn(Point) -> [[f64; 2]; 2] + Send + Sync>;
/// Vector-valued function of position.
pub type VectorFn = Arc<dyn Fn(Point) -> [f64; 2] + Send + Sync>;

pub fn scalar_fn(f: impl Fn(Point) -> f64 + Send + Sync + 'static) -> ScalarFn {
    Arc::new(f)
}

pub fn constant(c: f64) -> ScalarFn {
    Arc::new(move |_| c)
}

/// Coefficients of `ℒy = -div(A ∇y) + a₀ y` and of its adjoint.
#[derive(Clone)]
pub struct CoefficientSet {
    pub a: TensorFn,
    pub a_adjoint: TensorFn,
    pub a0: ScalarFn,
    /// Row-wise divergence `(Σ_j ∂_j a_ij)_i` of `A`. When absent and `A` is
    /// not constant it is approximated by central differences.
    pub div_a: Option<VectorFn>,
    pub constant_a: bool,
}

impl std::fmt::Debug for CoefficientSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CoefficientSet")
            .field("constant_a", &self.constant_a)
            .field("div_a", &self.div_a.is_some())
            .finish_non_exhaustive()
    }
}

impl CoefficientSet {
    /// `A = I`, `a₀ = 0`: the Laplacian.
    pub fn laplace() -> Self {
        Self::constant([[1.0, 0.0], [0.0, 1.0]], 0.0)
    }

    pub fn constant(a: [[f64; 2]; 2], a0: f64) -> Self {
        Self {
            a: Arc::new(move |_| a),
            a_adjoint: Arc::new(move |_| [[a[0][0], a[1][0]], [a[0][1], a[1][1]]]),
            a0: constant(a0),
            div_a: Some(Arc::new(|_| [0.0, 0.0])),
            constant_a: true,
        }
    }

    /// Variable symmetric coefficients; the adjoint tensor is the transpose.
    pub fn variable(a: TensorFn, a0: ScalarFn, div_a: Option<VectorFn>) -> Self {
        let at = a.clone();
        Self {
            a,
            a_adjoint: Arc::new(move |x| {
                let m = at(x);
                [[m[0][0], m[1][0]], [m[0][1], m[1][1]]]
            }),
            a0,
            div_a,
            constant_a: false,
        }
    }

    /// Divergence of the coefficient tensor (or of its adjoint) at `x`, with
    /// central differences of step `step` when no analytic form is supplied.
    pub fn divergence(&self, x: Point, step: f64, adjoint: bool) -> [f64; 2] {
        if self.constant_a {
            return [0.0, 0.0];
        }
        if let Some(d) = &self.div_a {
            return d(x);
        }
        let tensor = if adjoint { &self.a_adjoint } else { &self.a };
        let dx1 = {
            let p = tensor([x[0] + step, x[1]]);
            let m = tensor([x[0] - step, x[1]]);
            [(p[0][0] - m[0][0]) / (2.0 * step), (p[1][0] - m[1][0]) / (2.0 * step)]
        };
        let dx2 = {
            let p = tensor([x[0], x[1] + step]);
            let m = tensor([x[0], x[1] - step]);
            [(p[0][1] - m[0][1]) / (2.0 * step), (p[1][1] - m[1][1]) / (2.0 * step)]
        };
        [dx1[0] + dx2[0], dx1[1] + dx2[1]]
    }

    /// Samples symmetry, positive definiteness and `a₀ ≥ 0` at the quadrature
    /// points of every element.
    pub fn validate(&self, mesh: &Mesh, rule: &TriangleRule) -> Result<()> {
        for t in 0..mesh.num_elements() {
            let v = mesh.element_vertices(t);
            for (l, _) in rule.iter() {
                let x = to_physical(&v, l);
                let m = (self.a)(x);
                let bad = (m[0][1] - m[1][0]).abs() > 1e-12 * (m[0][1].abs() + 1.0)
                    || !(m[0][0] > 0.0)
                    || !(m[0][0] * m[1][1] - m[0][1] * m[1][0] > 0.0)
                    || !((self.a0)(x) >= 0.0);
                if bad {
                    return Err(Error::InvalidArgument(format!(
                        "coefficients not symmetric positive definite (or a0 < 0) at {x:?} in element {t}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Sparse matrix in compressed row storage.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Square matrix from `(row, col, value)` triplets; duplicates are summed
    /// in input order.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by_key(|&(i, j, _)| (i, j));
        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx = Vec::with_capacity(triplets.len() / 4);
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len() / 4);
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in triplets {
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(j);
                values.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self {
            n,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_triplets(n, (0..n).map(|i| (i, i, 1.0)).collect())
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|&(c, _)| c == j).map_or(0.0, |(_, v)| v)
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.row(i).map(|(j, v)| v * x[j]).sum())
            .collect()
    }

    /// `max |K_ij - K_ji|` over stored entries.
    pub fn max_asymmetry(&self) -> f64 {
        self.entries()
            .map(|(i, j, v)| (v - self.get(j, i)).abs())
            .fold(0.0, f64::max)
    }

    pub fn transpose(&self) -> Self {
        Self::from_triplets(self.n, self.entries().map(|(i, j, v)| (j, i, v)).collect())
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// Quadratic form `xᵀ K x`.
    pub fn energy(&self, x: &[f64]) -> f64 {
        self.mul_vec(x).iter().zip(x).map(|(a, b)| a * b).sum()
    }
}

fn local_to_triplets(mesh: &Mesh, locals: &[[f64; 6]]) -> Vec<(usize, usize, f64)> {
    const IJ: [(usize, usize); 6] = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)];
    let mut trip = Vec::with_capacity(9 * locals.len());
    for (e, local) in mesh.elements().iter().zip(locals) {
        for (k, &(i, j)) in IJ.iter().enumerate() {
            trip.push((e[i], e[j], local[k]));
            if i != j {
                trip.push((e[j], e[i], local[k]));
            }
        }
    }
    trip
}

fn assemble_with(
    mesh: &Mesh,
    tensor: &TensorFn,
    a0: &ScalarFn,
    rule: &TriangleRule,
) -> Vec<[f64; 6]> {
    const IJ: [(usize, usize); 6] = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)];
    (0..mesh.num_elements())
        .into_par_iter()
        .map(|t| {
            let g = mesh.geometry(t);
            let mut local = [0.0; 6];
            for (l, w) in rule.iter() {
                let x = to_physical(&g.vertices, l);
                let m = tensor(x);
                let c = a0(x);
                let wa = w * g.area;
                for (k, &(i, j)) in IJ.iter().enumerate() {
                    let gi = g.grads[i];
                    let gj = g.grads[j];
                    let agj = [m[0][0] * gj[0] + m[0][1] * gj[1], m[1][0] * gj[0] + m[1][1] * gj[1]];
                    local[k] += wa * (agj[0] * gi[0] + agj[1] * gi[1] + c * l[i] * l[j]);
                }
            }
            local
        })
        .collect()
}

/// Matrix of `a(φ_j, φ_i) = (A∇φ_j, ∇φ_i) + (a₀φ_j, φ_i)`.
pub fn assemble_operator(mesh: &Mesh, coeff: &CoefficientSet, quad_order: usize) -> Result<CsrMatrix> {
    assemble_operator_with(mesh, &coeff.a, &coeff.a0, quad_order)
}

/// The same form with the adjoint tensor `A*`.
pub fn assemble_adjoint_operator(
    mesh: &Mesh,
    coeff: &CoefficientSet,
    quad_order: usize,
) -> Result<CsrMatrix> {
    assemble_operator_with(mesh, &coeff.a_adjoint, &coeff.a0, quad_order)
}

fn assemble_operator_with(
    mesh: &Mesh,
    tensor: &TensorFn,
    a0: &ScalarFn,
    quad_order: usize,
) -> Result<CsrMatrix> {
    if quad_order < 2 {
        return Err(Error::InvalidArgument("operator quadrature order must be >= 2".into()));
    }
    let rule = TriangleRule::with_degree(quad_order)?;
    let locals = assemble_with(mesh, tensor, a0, &rule);
    Ok(CsrMatrix::from_triplets(mesh.num_vertices(), local_to_triplets(mesh, &locals)))
}

/// Consistent P1 mass matrix `(φ_j, φ_i)`, integrated exactly.
pub fn assemble_mass(mesh: &Mesh) -> CsrMatrix {
    let locals: Vec<[f64; 6]> = (0..mesh.num_elements())
        .map(|t| {
            let a = mesh.area(t) / 12.0;
            [2.0 * a, a, a, 2.0 * a, a, 2.0 * a]
        })
        .collect();
    CsrMatrix::from_triplets(mesh.num_vertices(), local_to_triplets(mesh, &locals))
}

/// Load vector `∫ g φ_i` by the element rule of the given order. A
/// non-finite value of `g` at a quadrature point is a data error.
pub fn assemble_load(mesh: &Mesh, g: &ScalarFn, quad_order: usize) -> Result<Vec<f64>> {
    let rule = TriangleRule::with_degree(quad_order)?;
    let locals: Vec<Result<[f64; 3]>> = (0..mesh.num_elements())
        .into_par_iter()
        .map(|t| {
            let geo = mesh.geometry(t);
            let mut local = [0.0; 3];
            for (l, w) in rule.iter() {
                let x = to_physical(&geo.vertices, l);
                let value = g(x);
                if !value.is_finite() {
                    return Err(Error::Data {
                        element: t,
                        x: x[0],
                        y: x[1],
                        value,
                    });
                }
                for i in 0..3 {
                    local[i] += w * geo.area * value * l[i];
                }
            }
            Ok(local)
        })
        .collect();
    let mut load = vec![0.0; mesh.num_vertices()];
    for (e, local) in mesh.elements().iter().zip(locals) {
        let local = local?;
        for i in 0..3 {
            load[e[i]] += local[i];
        }
    }
    Ok(load)
}

/// Matrix, right-hand side and prescribed values of constrained unknowns.
#[derive(Debug, Clone)]
pub struct SparseSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    pub constrained: Vec<(usize, f64)>,
}

impl SparseSystem {
    pub fn new(matrix: CsrMatrix, rhs: Vec<f64>) -> Self {
        Self {
            matrix,
            rhs,
            constrained: Vec::new(),
        }
    }
}

fn constrained_mask(n: usize, constrained: &[(usize, f64)]) -> Vec<bool> {
    let mut mask = vec![false; n];
    for &(i, _) in constrained {
        mask[i] = true;
    }
    mask
}

/// Zeroes rows and columns of constrained unknowns and puts 1 on their
/// diagonal.
pub fn eliminate_matrix(matrix: &CsrMatrix, mask: &[bool]) -> CsrMatrix {
    let trip = matrix
        .entries()
        .filter_map(|(i, j, v)| {
            if mask[i] || mask[j] {
                (i == j).then_some((i, j, 1.0))
            } else {
                Some((i, j, v))
            }
        })
        .collect();
    CsrMatrix::from_triplets(matrix.dim(), trip)
}

fn lift_rhs(matrix: &CsrMatrix, rhs: &[f64], mask: &[bool], values: &[f64]) -> Vec<f64> {
    let kg = matrix.mul_vec(values);
    (0..rhs.len())
        .map(|i| if mask[i] { values[i] } else { rhs[i] - kg[i] })
        .collect()
}

/// Symmetric elimination of Dirichlet conditions: boundary vertices of the
/// mesh take the nodal values of `boundary_values`, the right-hand side is
/// lifted and constrained rows and columns are replaced by identity rows.
pub fn apply_dirichlet(system: SparseSystem, mesh: &Mesh, boundary_values: &ScalarFn) -> SparseSystem {
    let n = system.matrix.dim();
    let constrained: Vec<(usize, f64)> = (0..n)
        .filter(|&v| mesh.is_boundary_vertex(v))
        .map(|v| (v, boundary_values(mesh.vertices()[v])))
        .collect();
    let mask = constrained_mask(n, &constrained);
    let mut values = vec![0.0; n];
    for &(i, g) in &constrained {
        values[i] = g;
    }
    let rhs = lift_rhs(&system.matrix, &system.rhs, &mask, &values);
    SparseSystem {
        matrix: eliminate_matrix(&system.matrix, &mask),
        rhs,
        constrained,
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LinearSolverOptions {
    /// Required relative residual `‖b - Ax‖ / ‖b‖`.
    pub rel_tol: f64,
    /// Above this many unknowns, preconditioned CG replaces the sparse
    /// Cholesky factorization.
    pub direct_max_dofs: usize,
    pub cg_max_iter: usize,
}

impl Default for LinearSolverOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-12,
            direct_max_dofs: 2_000_000,
            cg_max_iter: 50_000,
        }
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn residual(matrix: &CsrMatrix, x: &[f64], b: &[f64]) -> Vec<f64> {
    matrix.mul_vec(x).iter().zip(b).map(|(ax, bi)| bi - ax).collect()
}

/// Jacobi-preconditioned conjugate gradients.
pub fn pcg(matrix: &CsrMatrix, b: &[f64], x0: Option<&[f64]>, rel_tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    let n = b.len();
    let bnorm = norm(b);
    if bnorm == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let diag = matrix.diagonal();
    if let Some(i) = diag.iter().position(|&d| !(d > 0.0)) {
        return Err(Error::LinearSolve(format!(
            "non-positive diagonal entry {} at row {i}",
            diag[i]
        )));
    }
    let mut x = x0.map_or_else(|| vec![0.0; n], <[f64]>::to_vec);
    let mut r = residual(matrix, &x, b);
    let mut z: Vec<f64> = r.iter().zip(&diag).map(|(ri, d)| ri / d).collect();
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    for it in 0..max_iter {
        if norm(&r) <= rel_tol * bnorm {
            log::trace!("pcg converged in {it} iterations");
            return Ok(x);
        }
        let ap = matrix.mul_vec(&p);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if !(pap > 0.0) {
            return Err(Error::LinearSolve(format!(
                "CG breakdown at iteration {it}: pᵀAp = {pap:e}, matrix not positive definite"
            )));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        for i in 0..n {
            z[i] = r[i] / diag[i];
        }
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    let rel = norm(&residual(matrix, &x, b)) / bnorm;
    if rel <= rel_tol {
        return Ok(x);
    }
    let diag_ratio = diag.iter().cloned().fold(0.0, f64::max) / diag.iter().cloned().fold(f64::INFINITY, f64::min);
    Err(Error::LinearSolve(format!(
        "CG reached {max_iter} iterations with relative residual {rel:e} (diagonal ratio {diag_ratio:e})"
    )))
}

enum Backend {
    Cholesky(Llt<usize, f64>),
    Cg,
}

/// A factorized SPD matrix that can be solved against many right-hand sides.
pub struct SpdSolver {
    matrix: CsrMatrix,
    backend: Backend,
    opts: LinearSolverOptions,
}

impl SpdSolver {
    pub fn new(matrix: CsrMatrix, opts: LinearSolverOptions) -> Result<Self> {
        let n = matrix.dim();
        let backend = if n <= opts.direct_max_dofs {
            let trip: Vec<Triplet<usize, usize, f64>> = matrix
                .entries()
                .filter(|&(i, j, _)| i >= j)
                .map(|(i, j, v)| Triplet::new(i, j, v))
                .collect();
            let sp = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &trip)
                .map_err(|e| Error::LinearSolve(format!("sparse matrix construction: {e:?}")))?;
            let llt = sp.sp_cholesky(Side::Lower).map_err(|e| {
                Error::LinearSolve(format!(
                    "Cholesky factorization failed ({e:?}); matrix is not SPD, check coefficients"
                ))
            })?;
            Backend::Cholesky(llt)
        } else {
            Backend::Cg
        };
        Ok(Self {
            matrix,
            backend,
            opts,
        })
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = b.len();
        let bnorm = norm(b);
        if bnorm == 0.0 {
            return Ok(vec![0.0; n]);
        }
        match &self.backend {
            Backend::Cg => pcg(&self.matrix, b, None, self.opts.rel_tol, self.opts.cg_max_iter),
            Backend::Cholesky(llt) => {
                let mut x = vec![0.0; n];
                let mut r = b.to_vec();
                let mut rel = 1.0;
                // Direct solve followed by at most two refinement sweeps.
                for _ in 0..3 {
                    let mut rhs = Mat::from_fn(n, 1, |i, _| r[i]);
                    llt.solve_in_place(rhs.as_mut());
                    for i in 0..n {
                        x[i] += rhs[(i, 0)];
                    }
                    r = residual(&self.matrix, &x, b);
                    rel = norm(&r) / bnorm;
                    if rel <= self.opts.rel_tol {
                        return Ok(x);
                    }
                }
                log::debug!("direct solve residual {rel:e}; continuing with CG");
                pcg(&self.matrix, b, Some(&x), self.opts.rel_tol, self.opts.cg_max_iter)
            }
        }
    }
}

/// Solves a (Dirichlet-eliminated) SPD system to the requested relative
/// residual.
pub fn solve_spd(system: &SparseSystem, opts: LinearSolverOptions) -> Result<DiscreteField> {
    let solver = SpdSolver::new(system.matrix.clone(), opts)?;
    Ok(NodalField::new(solver.solve(&system.rhs)?))
}

/// The operator of a Dirichlet problem on a fixed mesh, factorized once.
/// Boundary vertices are constrained; the data may change between solves.
pub struct DirichletSolver {
    matrix: CsrMatrix,
    mask: Vec<bool>,
    solver: SpdSolver,
}

impl DirichletSolver {
    pub fn new(mesh: &Mesh, matrix: CsrMatrix, opts: LinearSolverOptions) -> Result<Self> {
        let mask: Vec<bool> = (0..mesh.num_vertices()).map(|v| mesh.is_boundary_vertex(v)).collect();
        let eliminated = eliminate_matrix(&matrix, &mask);
        Ok(Self {
            matrix,
            mask,
            solver: SpdSolver::new(eliminated, opts)?,
        })
    }

    /// The operator before elimination.
    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn is_constrained(&self, v: usize) -> bool {
        self.mask[v]
    }

    /// Solves with load vector `load` and boundary values taken from
    /// `boundary` at constrained vertices (entries at free vertices are
    /// ignored); `None` means homogeneous data.
    pub fn solve(&self, load: &[f64], boundary: Option<&[f64]>) -> Result<Vec<f64>> {
        let rhs = match boundary {
            Some(g) => {
                let values: Vec<f64> = g
                    .iter()
                    .zip(&self.mask)
                    .map(|(&v, &m)| if m { v } else { 0.0 })
                    .collect();
                lift_rhs(&self.matrix, load, &self.mask, &values)
            }
            None => load
                .iter()
                .zip(&self.mask)
                .map(|(&v, &m)| if m { 0.0 } else { v })
                .collect(),
        };
        self.solver.solve(&rhs)
    }
}

/// Lagrange interpolant: nodal values of `g`.
pub fn interpolate_nodal(mesh: &Mesh, g: &ScalarFn) -> Result<DiscreteField> {
    let mut values = Vec::with_capacity(mesh.num_vertices());
    for (v, &x) in mesh.vertices().iter().enumerate() {
        let value = g(x);
        if !value.is_finite() {
            return Err(Error::Data {
                element: mesh
                    .elements()
                    .iter()
                    .position(|e| e.contains(&v))
                    .unwrap_or(usize::MAX),
                x: x[0],
                y: x[1],
                value,
            });
        }
        values.push(value);
    }
    Ok(NodalField::new(values))
}

/// `‖field - g‖_{0,Ω}` by element quadrature.
pub fn l2_norm_diff(mesh: &Mesh, field: &DiscreteField, g: &ScalarFn, quad_order: usize) -> Result<f64> {
    let rule = TriangleRule::with_degree(quad_order)?;
    let parts: Vec<f64> = (0..mesh.num_elements())
        .into_par_iter()
        .map(|t| {
            let geo = mesh.geometry(t);
            let vals = field.on_element(mesh, t);
            rule.iter()
                .map(|(l, w)| {
                    let x = to_physical(&geo.vertices, l);
                    let d = crate::quadrature::eval_linear(&vals, l) - g(x);
                    w * geo.area * d * d
                })
                .sum()
        })
        .collect();
    Ok(parts.iter().sum::<f64>().sqrt())
}

/// `‖field‖_{0,Ω}` through the exact mass matrix.
pub fn l2_norm(mass: &CsrMatrix, field: &[f64]) -> f64 {
    mass.energy(field).max(0.0).sqrt()
}

/// Mean value `(∫_T g) / |T|` of `g` on element `t`.
pub fn element_mean(mesh: &Mesh, g: &ScalarFn, t: usize, quad_order: usize) -> Result<f64> {
    let rule = TriangleRule::with_degree(quad_order)?;
    let v = mesh.element_vertices(t);
    Ok(rule.iter().map(|(l, w)| w * g(to_physical(&v, l))).sum())
}
