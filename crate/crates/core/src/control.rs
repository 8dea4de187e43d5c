//! Discrete optimality system with variationally discretized control.
//!
//! For a mesh, the state `y_T` and adjoint `p_T` are P1 functions satisfying
//!
//! ```text
//! a(y_T, v) = (f + u_T, v),   a(v, p_T) = (y_T - y_d, v),   u_T = max{a, min{b, -p_T/α}}
//! ```
//!
//! The control is never a finite element function: wherever it enters an
//! integral, the element is split along the straight lines `-p_T/α = a` and
//! `-p_T/α = b` so the clamped integrand is polynomial on every piece.

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;
use rayon::prelude::*;

use crate::fe::{
    assemble_load, assemble_mass, assemble_operator, l2_norm, CsrMatrix, DirichletSolver,
    LinearSolverOptions, ScalarFn,
};
use crate::fe::{CoefficientSet, DiscreteField};
use crate::mesh::{Mesh, NodalField};
use crate::problems::ExactTriple;
use crate::quadrature::{eval_linear, kink_adapted_nodes, to_physical, Bary, LevelCut, TriangleRule};
use crate::{Error, Result};

/// Data of the optimal control problem
/// `min ½‖y - y_d‖² + α/2 ‖u‖²` subject to `ℒy = f + u`, `a ≤ u ≤ b`.
#[derive(Clone)]
pub struct ProblemSpec {
    pub name: String,
    pub coeff: CoefficientSet,
    pub f: ScalarFn,
    pub y_d: ScalarFn,
    pub alpha: f64,
    pub lower: f64,
    pub upper: f64,
    /// Dirichlet data of the state; the adjoint is always homogeneous.
    pub state_boundary: ScalarFn,
    pub exact: Option<ExactTriple>,
}

impl std::fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("name", &self.name)
            .field("alpha", &self.alpha)
            .field("bounds", &(self.lower, self.upper))
            .field("exact", &self.exact.is_some())
            .finish_non_exhaustive()
    }
}

impl ProblemSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) {
            return Err(Error::InvalidArgument(format!("alpha must be positive, got {}", self.alpha)));
        }
        if !(self.lower < self.upper) {
            return Err(Error::InvalidArgument(format!(
                "control bounds must satisfy a < b, got [{}, {}]",
                self.lower, self.upper
            )));
        }
        Ok(())
    }

    /// `max{a, min{b, -p/α}}`.
    #[inline]
    pub fn clamp_control(&self, p_value: f64) -> f64 {
        clamp_control(p_value, self.alpha, self.lower, self.upper)
    }

    /// Cuts splitting an element along the kinks of the clamped control.
    pub fn kink_cuts(&self, p_vals: &[f64; 3]) -> [LevelCut; 2] {
        let values = p_vals.map(|p| -p / self.alpha);
        [
            LevelCut {
                values,
                level: self.lower,
            },
            LevelCut {
                values,
                level: self.upper,
            },
        ]
    }
}

#[inline]
pub fn clamp_control(p_value: f64, alpha: f64, lower: f64, upper: f64) -> f64 {
    lower.max(upper.min(-p_value / alpha))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OuterMethod {
    /// Damped iteration `p ← (1-ω) p + ω S*(S(P(p)) - y_d)`.
    FixedPoint,
    /// Primal-dual active set (semismooth Newton) on the coupled system.
    ActiveSet,
}

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Fixed-point damping; `None` picks 0.5 for `α < 0.05` and 1 otherwise.
    pub damping: Option<f64>,
    pub method: OuterMethod,
    pub quad_order: usize,
    pub linear: LinearSolverOptions,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 500,
            damping: None,
            method: OuterMethod::FixedPoint,
            quad_order: 5,
            linear: LinearSolverOptions::default(),
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::InvalidArgument("solver tolerance must be positive".into()));
        }
        if let Some(w) = self.damping {
            if !(w > 0.0 && w <= 1.0) {
                return Err(Error::InvalidArgument(format!("damping must lie in (0, 1], got {w}")));
            }
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidArgument("max outer iterations must be >= 1".into()));
        }
        Ok(())
    }

    pub fn damping_for(&self, alpha: f64) -> f64 {
        self.damping.unwrap_or(if alpha < 0.05 { 0.5 } else { 1.0 })
    }
}

/// Discrete state and adjoint; the control is derived pointwise from `p`.
#[derive(Debug, Clone)]
pub struct DiscreteSolution {
    pub y: DiscreteField,
    pub p: DiscreteField,
    pub alpha: f64,
    pub lower: f64,
    pub upper: f64,
    /// Adjoint iterate preceding `p` in the outer loop (equal to `p` when the
    /// solution was assembled directly).
    pub previous_p: DiscreteField,
    pub iterations: usize,
}

impl DiscreteSolution {
    pub fn new(y: DiscreteField, p: DiscreteField, spec: &ProblemSpec) -> Self {
        Self {
            previous_p: p.clone(),
            y,
            p,
            alpha: spec.alpha,
            lower: spec.lower,
            upper: spec.upper,
            iterations: 0,
        }
    }

    /// `u_T` at barycentric point `l` of element `t`.
    pub fn control_at(&self, mesh: &Mesh, t: usize, l: Bary) -> f64 {
        let p = eval_linear(&self.p.on_element(mesh, t), l);
        clamp_control(p, self.alpha, self.lower, self.upper)
    }
}

/// `∫ P(p_T) φ_i` with exact integration on the kink-split elements.
pub fn control_load(mesh: &Mesh, p: &DiscreteField, spec: &ProblemSpec) -> Vec<f64> {
    let rule = TriangleRule::with_degree(2).expect("degree 2 rule");
    let locals: Vec<[f64; 3]> = (0..mesh.num_elements())
        .into_par_iter()
        .map(|t| {
            let pv = p.on_element(mesh, t);
            let area = mesh.area(t);
            let mut local = [0.0; 3];
            for (l, w) in kink_adapted_nodes(area, &rule, &spec.kink_cuts(&pv)) {
                let u = spec.clamp_control(eval_linear(&pv, l));
                for i in 0..3 {
                    local[i] += w * u * l[i];
                }
            }
            local
        })
        .collect();
    let mut load = vec![0.0; mesh.num_vertices()];
    for (e, local) in mesh.elements().iter().zip(&locals) {
        for i in 0..3 {
            load[e[i]] += local[i];
        }
    }
    load
}

/// `∫_{inactive} φ_j φ_i` where the inactive set is `a < -p_T/α < b`.
fn inactive_mass(mesh: &Mesh, p: &DiscreteField, spec: &ProblemSpec) -> CsrMatrix {
    let rule = TriangleRule::with_degree(2).expect("degree 2 rule");
    let locals: Vec<[[f64; 3]; 3]> = (0..mesh.num_elements())
        .into_par_iter()
        .map(|t| {
            let pv = p.on_element(mesh, t);
            let mut local = [[0.0; 3]; 3];
            for (l, w) in kink_adapted_nodes(mesh.area(t), &rule, &spec.kink_cuts(&pv)) {
                let v = -eval_linear(&pv, l) / spec.alpha;
                if v > spec.lower && v < spec.upper {
                    for i in 0..3 {
                        for j in 0..3 {
                            local[i][j] += w * l[i] * l[j];
                        }
                    }
                }
            }
            local
        })
        .collect();
    let mut trip = Vec::with_capacity(9 * mesh.num_elements());
    for (e, local) in mesh.elements().iter().zip(&locals) {
        for i in 0..3 {
            for j in 0..3 {
                trip.push((e[i], e[j], local[i][j]));
            }
        }
    }
    CsrMatrix::from_triplets(mesh.num_vertices(), trip)
}

/// Where the state equation takes its control from.
pub enum ControlSource<'a> {
    /// Variational control `P(p_T)`.
    Adjoint(&'a DiscreteField),
    /// An explicitly given control function.
    Function(&'a ScalarFn),
}

/// The discrete optimal control problem on one mesh: operator factorized
/// once, data loads assembled once.
pub struct OcpSystem<'a> {
    mesh: &'a Mesh,
    spec: &'a ProblemSpec,
    opts: SolverOptions,
    stiffness: DirichletSolver,
    mass: CsrMatrix,
    load_f: Vec<f64>,
    load_yd: Vec<f64>,
    boundary: Vec<f64>,
}

impl<'a> OcpSystem<'a> {
    pub fn new(mesh: &'a Mesh, spec: &'a ProblemSpec, opts: SolverOptions) -> Result<Self> {
        spec.validate()?;
        opts.validate()?;
        let k = assemble_operator(mesh, &spec.coeff, opts.quad_order)?;
        let stiffness = DirichletSolver::new(mesh, k, opts.linear)?;
        let boundary = mesh
            .vertices()
            .iter()
            .enumerate()
            .map(|(v, &x)| if mesh.is_boundary_vertex(v) { (spec.state_boundary)(x) } else { 0.0 })
            .collect();
        Ok(Self {
            mesh,
            spec,
            opts,
            stiffness,
            mass: assemble_mass(mesh),
            load_f: assemble_load(mesh, &spec.f, opts.quad_order)?,
            load_yd: assemble_load(mesh, &spec.y_d, opts.quad_order)?,
            boundary,
        })
    }

    pub fn mesh(&self) -> &Mesh {
        self.mesh
    }

    pub fn mass(&self) -> &CsrMatrix {
        &self.mass
    }

    /// State and adjoint share the operator because `A = Aᵀ`.
    pub fn state_matrix(&self) -> &CsrMatrix {
        self.stiffness.matrix()
    }

    pub fn solve_state(&self, control: ControlSource<'_>) -> Result<DiscreteField> {
        let control_load = match control {
            ControlSource::Adjoint(p) => control_load(self.mesh, p, self.spec),
            ControlSource::Function(u) => assemble_load(self.mesh, u, self.opts.quad_order)?,
        };
        let load: Vec<f64> = self.load_f.iter().zip(&control_load).map(|(a, b)| a + b).collect();
        Ok(NodalField::new(self.stiffness.solve(&load, Some(&self.boundary))?))
    }

    pub fn solve_adjoint(&self, y: &DiscreteField) -> Result<DiscreteField> {
        let my = self.mass.mul_vec(y.values());
        let load: Vec<f64> = my.iter().zip(&self.load_yd).map(|(a, b)| a - b).collect();
        Ok(NodalField::new(self.stiffness.solve(&load, None)?))
    }

    /// `J(y, P(p)) = ½‖y - y_d‖² + α/2 ‖P(p)‖²` by kink-adapted quadrature.
    pub fn objective(&self, y: &DiscreteField, p: &DiscreteField) -> f64 {
        let rule = TriangleRule::with_degree(self.opts.quad_order).expect("validated order");
        let mesh = self.mesh;
        let parts: Vec<f64> = (0..mesh.num_elements())
            .into_par_iter()
            .map(|t| {
                let v = mesh.element_vertices(t);
                let pv = p.on_element(mesh, t);
                let yv = y.on_element(mesh, t);
                kink_adapted_nodes(mesh.area(t), &rule, &self.spec.kink_cuts(&pv))
                    .iter()
                    .map(|&(l, w)| {
                        let x = to_physical(&v, l);
                        let d = eval_linear(&yv, l) - (self.spec.y_d)(x);
                        let u = self.spec.clamp_control(eval_linear(&pv, l));
                        w * (0.5 * d * d + 0.5 * self.spec.alpha * u * u)
                    })
                    .sum()
            })
            .collect();
        parts.iter().sum()
    }

    pub fn solve(&self, initial_p: Option<&DiscreteField>) -> Result<DiscreteSolution> {
        let p0 = match initial_p {
            Some(p) if p.len() == self.mesh.num_vertices() => p.clone(),
            Some(p) => {
                return Err(Error::InvalidArgument(format!(
                    "initial adjoint has {} values for {} vertices",
                    p.len(),
                    self.mesh.num_vertices()
                )))
            }
            None => NodalField::zeros(self.mesh.num_vertices()),
        };
        match self.opts.method {
            OuterMethod::FixedPoint => self.fixed_point(p0),
            OuterMethod::ActiveSet => self.active_set(p0),
        }
    }

    fn fixed_point(&self, mut p: DiscreteField) -> Result<DiscreteSolution> {
        let omega = self.opts.damping_for(self.spec.alpha);
        let mut last_j = f64::INFINITY;
        let mut defect = f64::INFINITY;
        for it in 1..=self.opts.max_iter {
            let y = self.solve_state(ControlSource::Adjoint(&p))?;
            let p_new = self.solve_adjoint(&y)?;
            let j = self.objective(&y, &p);
            if j > last_j + 1e-10 * last_j.abs().max(1.0) {
                log::warn!("objective increased in outer iteration {it}: {last_j:e} -> {j:e}");
            }
            last_j = j;
            let next: Vec<f64> = p
                .values()
                .iter()
                .zip(p_new.values())
                .map(|(a, b)| (1.0 - omega) * a + omega * b)
                .collect();
            let next = NodalField::new(next);
            let change: Vec<f64> = next.values().iter().zip(p.values()).map(|(a, b)| a - b).collect();
            let dp = l2_norm(&self.mass, &change);
            let pn = l2_norm(&self.mass, next.values());
            let du = control_distance(self.mesh, &next, &p, self.spec);
            defect = du;
            log::trace!("outer {it}: |dp| = {dp:e}, |du| = {du:e}, J = {j:e}");
            let previous = std::mem::replace(&mut p, next);
            if dp <= self.opts.tol * (1.0 + pn) && du <= self.opts.tol {
                let y = self.solve_state(ControlSource::Adjoint(&p))?;
                return Ok(DiscreteSolution {
                    y,
                    p,
                    alpha: self.spec.alpha,
                    lower: self.spec.lower,
                    upper: self.spec.upper,
                    previous_p: previous,
                    iterations: it,
                });
            }
        }
        Err(Error::NotConverged {
            iterations: self.opts.max_iter,
            defect,
        })
    }

    /// Semismooth Newton on `(y, p)`. The derivative of `P(p)` is `-χ_I / α`
    /// with `I` the inactive set of the current iterate.
    fn active_set(&self, p0: DiscreteField) -> Result<DiscreteSolution> {
        let n = self.mesh.num_vertices();
        let mut p = p0;
        let mut y = self.solve_state(ControlSource::Adjoint(&p))?;
        let k = self.stiffness.matrix();
        let mut defect = f64::INFINITY;
        for it in 1..=self.opts.max_iter {
            let bu = control_load(self.mesh, &p, self.spec);
            let ky = k.mul_vec(y.values());
            let kp = k.mul_vec(p.values());
            let my = self.mass.mul_vec(y.values());
            let mut rhs = vec![0.0; 2 * n];
            for i in 0..n {
                if self.stiffness.is_constrained(i) {
                    rhs[i] = self.boundary[i] - y.values()[i];
                    rhs[n + i] = -p.values()[i];
                } else {
                    rhs[i] = -(ky[i] - self.load_f[i] - bu[i]);
                    rhs[n + i] = -(kp[i] - my[i] + self.load_yd[i]);
                }
            }
            let mi = inactive_mass(self.mesh, &p, self.spec);
            let mut trip = Vec::with_capacity(2 * k.nnz() + self.mass.nnz() + mi.nnz());
            for (i, j, v) in k.entries() {
                if !self.stiffness.is_constrained(i) {
                    trip.push(Triplet::new(i, j, v));
                    trip.push(Triplet::new(n + i, n + j, v));
                }
            }
            for (i, j, v) in mi.entries() {
                if !self.stiffness.is_constrained(i) {
                    trip.push(Triplet::new(i, n + j, v / self.spec.alpha));
                }
            }
            for (i, j, v) in self.mass.entries() {
                if !self.stiffness.is_constrained(i) {
                    trip.push(Triplet::new(n + i, j, -v));
                }
            }
            for i in (0..n).filter(|&i| self.stiffness.is_constrained(i)) {
                trip.push(Triplet::new(i, i, 1.0));
                trip.push(Triplet::new(n + i, n + i, 1.0));
            }
            let jac = SparseColMat::<usize, f64>::try_new_from_triplets(2 * n, 2 * n, &trip)
                .map_err(|e| Error::LinearSolve(format!("Newton matrix: {e:?}")))?;
            let lu = jac
                .sp_lu()
                .map_err(|e| Error::LinearSolve(format!("Newton LU failed: {e:?}")))?;
            let mut delta = Mat::from_fn(2 * n, 1, |i, _| rhs[i]);
            lu.solve_in_place(delta.as_mut());
            let y_next: Vec<f64> = (0..n).map(|i| y.values()[i] + delta[(i, 0)]).collect();
            let p_next: Vec<f64> = (0..n).map(|i| p.values()[i] + delta[(n + i, 0)]).collect();
            let dp: Vec<f64> = (0..n).map(|i| delta[(n + i, 0)]).collect();
            let p_next = NodalField::new(p_next);
            let dpn = l2_norm(&self.mass, &dp);
            let pn = l2_norm(&self.mass, p_next.values());
            let du = control_distance(self.mesh, &p_next, &p, self.spec);
            defect = du;
            log::trace!("newton {it}: |dp| = {dpn:e}, |du| = {du:e}");
            let previous = std::mem::replace(&mut p, p_next);
            y = NodalField::new(y_next);
            if dpn <= self.opts.tol * (1.0 + pn) && du <= self.opts.tol {
                // Final consistent pass so (y, p) satisfy the state and adjoint
                // equations to linear-solver accuracy.
                let y = self.solve_state(ControlSource::Adjoint(&p))?;
                let p_final = self.solve_adjoint(&y)?;
                return Ok(DiscreteSolution {
                    y,
                    p: p_final,
                    alpha: self.spec.alpha,
                    lower: self.spec.lower,
                    upper: self.spec.upper,
                    previous_p: previous,
                    iterations: it,
                });
            }
        }
        Err(Error::NotConverged {
            iterations: self.opts.max_iter,
            defect,
        })
    }
}

/// `‖P(p) - P(q)‖_{0,Ω}`, exact up to the element rule on pieces split along
/// the kinks of both controls.
pub fn control_distance(mesh: &Mesh, p: &DiscreteField, q: &DiscreteField, spec: &ProblemSpec) -> f64 {
    let rule = TriangleRule::with_degree(2).expect("degree 2 rule");
    let parts: Vec<f64> = (0..mesh.num_elements())
        .into_par_iter()
        .map(|t| {
            let pv = p.on_element(mesh, t);
            let qv = q.on_element(mesh, t);
            let [c1, c2] = spec.kink_cuts(&pv);
            let [c3, c4] = spec.kink_cuts(&qv);
            kink_adapted_nodes(mesh.area(t), &rule, &[c1, c2, c3, c4])
                .iter()
                .map(|&(l, w)| {
                    let d = spec.clamp_control(eval_linear(&pv, l)) - spec.clamp_control(eval_linear(&qv, l));
                    w * d * d
                })
                .sum()
        })
        .collect();
    parts.iter().sum::<f64>().sqrt()
}

/// Solves the discrete optimality system on `mesh`.
pub fn solve_ocp(
    mesh: &Mesh,
    spec: &ProblemSpec,
    opts: SolverOptions,
    initial_p: Option<&DiscreteField>,
) -> Result<DiscreteSolution> {
    OcpSystem::new(mesh, spec, opts)?.solve(initial_p)
}

/// Fixed-point defect of a solution: the pointwise mismatch between `u_T`
/// and `P(p_T)` (zero by construction) plus the L2 distance between the
/// controls of the last two outer iterates.
pub fn vi_residual(mesh: &Mesh, sol: &DiscreteSolution, spec: &ProblemSpec) -> f64 {
    control_distance(mesh, &sol.p, &sol.previous_p, spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fe::{constant, scalar_fn};

    fn box_spec(f: f64, yd: f64, lower: f64, upper: f64, alpha: f64) -> ProblemSpec {
        ProblemSpec {
            name: "test".into(),
            coeff: CoefficientSet::laplace(),
            f: constant(f),
            y_d: constant(yd),
            alpha,
            lower,
            upper,
            state_boundary: constant(0.0),
            exact: None,
        }
    }

    #[test]
    fn clamp_examples() {
        let s = box_spec(0.0, 0.0, -5.0, -1.0, 0.1);
        assert!((s.clamp_control(0.2) + 2.0).abs() < 1e-15);
        assert_eq!(s.clamp_control(1.0), -5.0);
        assert_eq!(s.clamp_control(-1.0), -1.0);
    }

    #[test]
    fn constant_clamped_control_load() {
        let m = Mesh::unit_square(4).unwrap();
        let s = box_spec(0.0, 0.0, 10.0, 15.0, 0.01);
        let load = control_load(&m, &NodalField::zeros(m.num_vertices()), &s);
        assert!((load.iter().sum::<f64>() - 10.0).abs() < 1e-13);
    }

    #[test]
    fn unclamped_control_load_is_mass_action() {
        let m = Mesh::unit_square(4).unwrap();
        let s = box_spec(0.0, 0.0, -1e9, 1e9, 0.5);
        let p = crate::fe::interpolate_nodal(&m, &scalar_fn(|x| x[0] - 2.0 * x[1])).unwrap();
        let load = control_load(&m, &p, &s);
        let mp = assemble_mass(&m).mul_vec(p.values());
        for (a, b) in load.iter().zip(&mp) {
            assert!((a + b / 0.5).abs() < 1e-14);
        }
    }

    #[test]
    fn all_zero_fixed_point() {
        let m = Mesh::unit_square(4).unwrap();
        let s = box_spec(0.0, 0.0, -1.0, 1.0, 0.1);
        let sol = solve_ocp(&m, &s, SolverOptions::default(), None).unwrap();
        assert!(sol.y.values().iter().all(|&v| v == 0.0));
        assert!(sol.p.values().iter().all(|&v| v == 0.0));
        assert_eq!(vi_residual(&m, &sol, &s), 0.0);
    }

    #[test]
    fn bad_options_rejected() {
        let m = Mesh::unit_square(2).unwrap();
        let s = box_spec(0.0, 0.0, 1.0, -1.0, 0.1);
        assert!(solve_ocp(&m, &s, SolverOptions::default(), None).is_err());
        let s = box_spec(0.0, 0.0, -1.0, 1.0, 0.0);
        assert!(solve_ocp(&m, &s, SolverOptions::default(), None).is_err());
        let s = box_spec(0.0, 0.0, -1.0, 1.0, 0.1);
        let opts = SolverOptions {
            damping: Some(1.5),
            ..Default::default()
        };
        assert!(solve_ocp(&m, &s, opts, None).is_err());
    }

    #[test]
    fn non_convergence_is_reported() {
        let m = Mesh::unit_square(4).unwrap();
        let s = box_spec(50.0, 3.0, -100.0, 100.0, 1e-4);
        let opts = SolverOptions {
            max_iter: 2,
            ..Default::default()
        };
        assert!(matches!(solve_ocp(&m, &s, opts, None), Err(Error::NotConverged { iterations: 2, .. })));
    }

    #[test]
    fn fixed_point_and_active_set_agree() {
        let m = Mesh::unit_square(8).unwrap();
        let mut s = box_spec(1.0, 0.0, -0.5, 20.0, 0.001);
        s.y_d = scalar_fn(|x| 0.3 * (x[0] * 7.0).sin());
        let fp = solve_ocp(&m, &s, SolverOptions::default(), None).unwrap();
        let opts = SolverOptions {
            method: OuterMethod::ActiveSet,
            ..Default::default()
        };
        let pdas = solve_ocp(&m, &s, opts, None).unwrap();
        assert!(pdas.iterations < 20);
        for (a, b) in fp.p.values().iter().zip(pdas.p.values()) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }
}
