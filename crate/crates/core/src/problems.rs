//! Built-in benchmark problems on the unit square.

use std::f64::consts::PI;
use rayon::prelude::*;

use crate::control::{DiscreteSolution, ProblemSpec};
use crate::fe::{constant, l2_norm_diff, scalar_fn, CoefficientSet, ScalarFn};
use crate::mesh::Mesh;
use crate::quadrature::{eval_linear, kink_adapted_nodes, to_physical, TriangleRule};
use crate::{Error, Point, Result};

/// Exact optimal triple together with `ℒy` and `ℒ*p`.
#[derive(Clone)]
pub struct ExactTriple {
    pub u: ScalarFn,
    pub y: ScalarFn,
    pub p: ScalarFn,
    pub l_y: ScalarFn,
    pub l_adj_p: ScalarFn,
}

/// A Dirichlet boundary value problem `ℒy = f`, `y = g` on the boundary.
#[derive(Clone)]
pub struct BvpSpec {
    pub coeff: CoefficientSet,
    pub f: ScalarFn,
    pub boundary: ScalarFn,
    pub exact: Option<ScalarFn>,
}

/// Names accepted by [`problem_by_name`].
pub const PROBLEM_NAMES: [&str; 3] = ["example1", "example2", "poisson"];

/// Optimal control problems by name. `poisson` is a boundary value problem
/// and is served by [`manufactured_poisson`] instead.
pub fn problem_by_name(name: &str) -> Result<ProblemSpec> {
    match name {
        "example1" => Ok(example1()),
        "example2" => Ok(example2()),
        other => Err(Error::InvalidArgument(format!(
            "unknown control problem '{other}' (expected example1 or example2)"
        ))),
    }
}

mod ex1 {
    use crate::Point;

    pub const ALPHA: f64 = 0.1;
    pub const LOWER: f64 = -5.0;
    pub const UPPER: f64 = -1.0;

    fn s(x: Point) -> f64 {
        -50.0 * x[0] + 100.0 * x[1] - 25.0
    }

    pub fn y(x: Point) -> f64 {
        s(x).atan()
    }

    /// Δ atan(s) = -2 s |∇s|² / (1 + s²)² with |∇s|² = 50² + 100².
    pub fn lap_y(x: Point) -> f64 {
        let s = s(x);
        -2.0 * 12_500.0 * s / (1.0 + s * s).powi(2)
    }

    fn t(x: Point) -> f64 {
        200.0 * (1.0 / 16.0 - (x[0] - 0.5).powi(2) - (x[1] - 0.5).powi(2))
    }

    pub fn p(x: Point) -> f64 {
        16.0 * x[0] * (1.0 - x[0]) * x[1] * (1.0 - x[1]) * (1.0 + t(x).atan())
    }

    /// Δ(G H) = ΔG H + 2 ∇G·∇H + G ΔH with G = 16 x1(1-x1) x2(1-x2) and
    /// H = 1 + atan(t).
    pub fn lap_p(x: Point) -> f64 {
        let (x1, x2) = (x[0], x[1]);
        let g = 16.0 * x1 * (1.0 - x1) * x2 * (1.0 - x2);
        let g1 = 16.0 * (1.0 - 2.0 * x1) * x2 * (1.0 - x2);
        let g2 = 16.0 * x1 * (1.0 - x1) * (1.0 - 2.0 * x2);
        let lap_g = -32.0 * (x2 * (1.0 - x2) + x1 * (1.0 - x1));
        let t = t(x);
        let t1 = -400.0 * (x1 - 0.5);
        let t2 = -400.0 * (x2 - 0.5);
        let q = 1.0 + t * t;
        let h = 1.0 + t.atan();
        let h1 = t1 / q;
        let h2 = t2 / q;
        let lap_h = -800.0 / q - 2.0 * t * (t1 * t1 + t2 * t2) / (q * q);
        lap_g * h + 2.0 * (g1 * h1 + g2 * h2) + g * lap_h
    }

    pub fn u(x: Point) -> f64 {
        LOWER.max(UPPER.min(-p(x) / ALPHA))
    }
}

/// Smooth problem with known solution: `α = 0.1`, `[a, b] = [-5, -1]`,
/// `y = atan(-50x₁ + 100x₂ - 25)`,
/// `p = 16x₁(1-x₁)x₂(1-x₂)(1 + atan(200(1/16 - (x₁-½)² - (x₂-½)²)))`,
/// `u = P(p)`, with `f = -Δy - u` and `y_d = y + Δp`. The state carries the
/// inhomogeneous boundary values of `y`.
pub fn example1() -> ProblemSpec {
    let exact = example1_exact();
    ProblemSpec {
        name: "example1".into(),
        coeff: CoefficientSet::laplace(),
        f: scalar_fn(|x| -ex1::lap_y(x) - ex1::u(x)),
        y_d: scalar_fn(|x| ex1::y(x) + ex1::lap_p(x)),
        alpha: ex1::ALPHA,
        lower: ex1::LOWER,
        upper: ex1::UPPER,
        state_boundary: scalar_fn(ex1::y),
        exact: Some(exact),
    }
}

pub fn example1_exact() -> ExactTriple {
    ExactTriple {
        u: scalar_fn(ex1::u),
        y: scalar_fn(ex1::y),
        p: scalar_fn(ex1::p),
        l_y: scalar_fn(|x| -ex1::lap_y(x)),
        l_adj_p: scalar_fn(|x| -ex1::lap_p(x)),
    }
}

/// `((x₁-1)² + (x₂-1)²)^{-3/4}`, i.e. distance to `(1,1)` to the power -1.5.
pub fn example2_f(x: Point) -> f64 {
    ((x[0] - 1.0).powi(2) + (x[1] - 1.0).powi(2)).powf(-0.75)
}

/// `(x₁² + x₂²)^{-0.95}`, i.e. distance to the origin to the power -1.9.
pub fn example2_yd(x: Point) -> f64 {
    (x[0] * x[0] + x[1] * x[1]).powf(-0.95)
}

/// Singular data without known solution: `α = 10⁻²`, `[a, b] = [10, 15]`,
/// zero boundary data. `f` blows up at `(1,1)` and `y_d` at `(0,0)`; both
/// points are mesh vertices and never quadrature nodes.
pub fn example2() -> ProblemSpec {
    ProblemSpec {
        name: "example2".into(),
        coeff: CoefficientSet::laplace(),
        f: scalar_fn(example2_f),
        y_d: scalar_fn(example2_yd),
        alpha: 1e-2,
        lower: 10.0,
        upper: 15.0,
        state_boundary: constant(0.0),
        exact: None,
    }
}

/// `-Δy = 2π² sin(πx₁) sin(πx₂)` with solution `y = sin(πx₁) sin(πx₂)`.
pub fn manufactured_poisson() -> BvpSpec {
    let y = |x: Point| (PI * x[0]).sin() * (PI * x[1]).sin();
    BvpSpec {
        coeff: CoefficientSet::laplace(),
        f: scalar_fn(move |x| 2.0 * PI * PI * y(x)),
        boundary: constant(0.0),
        exact: Some(scalar_fn(y)),
    }
}

/// Solves a boundary value problem on `mesh`.
pub fn solve_bvp(
    mesh: &Mesh,
    bvp: &BvpSpec,
    quad_order: usize,
    opts: crate::fe::LinearSolverOptions,
) -> Result<crate::fe::DiscreteField> {
    use crate::fe::{apply_dirichlet, assemble_load, assemble_operator, solve_spd, SparseSystem};
    let k = assemble_operator(mesh, &bvp.coeff, quad_order)?;
    let load = assemble_load(mesh, &bvp.f, quad_order)?;
    let sys = apply_dirichlet(SparseSystem::new(k, load), mesh, &bvp.boundary);
    solve_spd(&sys, opts)
}

/// L2 errors `(‖u - u_T‖, ‖y - y_T‖, ‖p - p_T‖)`. The control error uses
/// elements split along the kinks of the discrete control.
pub fn exact_errors(
    mesh: &Mesh,
    sol: &DiscreteSolution,
    triple: &ExactTriple,
    spec: &ProblemSpec,
    quad_order: usize,
) -> Result<(f64, f64, f64)> {
    let order = quad_order.max(5);
    let err_y = l2_norm_diff(mesh, &sol.y, &triple.y, order)?;
    let err_p = l2_norm_diff(mesh, &sol.p, &triple.p, order)?;
    let rule = TriangleRule::with_degree(order)?;
    let parts: Vec<f64> = (0..mesh.num_elements())
        .into_par_iter()
        .map(|t| {
            let v = mesh.element_vertices(t);
            let pv = sol.p.on_element(mesh, t);
            kink_adapted_nodes(mesh.area(t), &rule, &spec.kink_cuts(&pv))
                .iter()
                .map(|&(l, w)| {
                    let d = spec.clamp_control(eval_linear(&pv, l)) - (triple.u)(to_physical(&v, l));
                    w * d * d
                })
                .sum()
        })
        .collect();
    Ok((parts.iter().sum::<f64>().sqrt(), err_y, err_p))
}

/// Evaluates `f + u + Δy` and `y - y_d + Δp` for Example 1 at `x`; both vanish
/// for consistent data.
pub fn example1_consistency(x: Point) -> (f64, f64) {
    let spec = example1();
    let ex = spec.exact.as_ref().expect("example1 has an exact solution");
    let state = (spec.f)(x) + (ex.u)(x) - (ex.l_y)(x);
    let adjoint = (ex.y)(x) - (spec.y_d)(x) - (ex.l_adj_p)(x);
    (state, adjoint)
}
