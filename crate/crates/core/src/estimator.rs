//! L2-norm residual indicators and data oscillation.
//!
//! For an element `T` with `h_T = |T|^{1/2}`:
//!
//! ```text
//! η²_y(T) = h_T⁴ ‖f + u_T - ℒy_T‖²_T + Σ_{E ⊂ ∂T interior} h_E³ ‖[A∇y_T]·n_E‖²_E
//! η²_p(T) = h_T⁴ ‖y_T - y_d - ℒ*p_T‖²_T + Σ_{E ⊂ ∂T interior} h_E³ ‖[A*∇p_T]·n_E‖²_E
//! ```
//!
//! with `h_E = |E|`. Boundary edges carry no jump term. Element integrals use
//! the element rule on pieces split along the kinks of `u_T`; the data
//! oscillation is evaluated on the same nodes.

use rayon::prelude::*;

use crate::control::{DiscreteSolution, ProblemSpec};
use crate::fe::TensorFn;
use crate::mesh::{ElementGeometry, Mesh, Topology};
use crate::quadrature::{edge_gauss2, eval_linear, kink_adapted_nodes, to_physical, TriangleRule};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct EstimatorOptions {
    pub quad_order: usize,
    /// Relative step (times `h_T`) for differencing `div A` when no analytic
    /// form is available.
    pub div_step: f64,
}

impl Default for EstimatorOptions {
    fn default() -> Self {
        Self {
            quad_order: 5,
            div_step: 1e-6,
        }
    }
}

/// Per-element squared indicators and oscillations.
#[derive(Debug, Clone, Default)]
pub struct IndicatorSet {
    eta2_y: Vec<f64>,
    eta2_p: Vec<f64>,
    osc2_y: Vec<f64>,
    osc2_p: Vec<f64>,
}

impl IndicatorSet {
    pub fn from_parts(eta2_y: Vec<f64>, eta2_p: Vec<f64>, osc2_y: Vec<f64>, osc2_p: Vec<f64>) -> Self {
        assert!(eta2_y.len() == eta2_p.len() && osc2_y.len() == eta2_y.len() && osc2_p.len() == eta2_y.len());
        Self {
            eta2_y,
            eta2_p,
            osc2_y,
            osc2_p,
        }
    }

    /// Indicator set carrying only combined values (marking tests).
    pub fn from_eta2(eta2: Vec<f64>) -> Self {
        let n = eta2.len();
        Self::from_parts(eta2, vec![0.0; n], vec![0.0; n], vec![0.0; n])
    }

    pub fn len(&self) -> usize {
        self.eta2_y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eta2_y.is_empty()
    }

    pub fn eta2_y(&self) -> &[f64] {
        &self.eta2_y
    }

    pub fn eta2_p(&self) -> &[f64] {
        &self.eta2_p
    }

    pub fn osc2_y(&self) -> &[f64] {
        &self.osc2_y
    }

    pub fn osc2_p(&self) -> &[f64] {
        &self.osc2_p
    }

    /// `η²(T) = η²_y(T) + η²_p(T)`.
    pub fn eta2(&self, t: usize) -> f64 {
        self.eta2_y[t] + self.eta2_p[t]
    }

    pub fn eta2_all(&self) -> Vec<f64> {
        (0..self.len()).map(|t| self.eta2(t)).collect()
    }

    pub fn total_eta2_y(&self) -> f64 {
        self.eta2_y.iter().sum()
    }

    pub fn total_eta2_p(&self) -> f64 {
        self.eta2_p.iter().sum()
    }

    pub fn total_eta2(&self) -> f64 {
        self.total_eta2_y() + self.total_eta2_p()
    }

    pub fn eta(&self) -> f64 {
        self.total_eta2().sqrt()
    }

    pub fn eta_y(&self) -> f64 {
        self.total_eta2_y().sqrt()
    }

    pub fn eta_p(&self) -> f64 {
        self.total_eta2_p().sqrt()
    }

    pub fn osc_y(&self) -> f64 {
        self.osc2_y.iter().sum::<f64>().sqrt()
    }

    pub fn osc_p(&self) -> f64 {
        self.osc2_p.iter().sum::<f64>().sqrt()
    }

    /// `osc_T = (osc²_y + osc²_p)^{1/2}`.
    pub fn osc(&self) -> f64 {
        (self.osc2_y.iter().sum::<f64>() + self.osc2_p.iter().sum::<f64>()).sqrt()
    }

    /// Checks nonnegativity of every entry.
    pub fn check(&self) -> std::result::Result<(), String> {
        for (name, v) in [
            ("eta2_y", &self.eta2_y),
            ("eta2_p", &self.eta2_p),
            ("osc2_y", &self.osc2_y),
            ("osc2_p", &self.osc2_p),
        ] {
            if let Some(t) = v.iter().position(|x| !(*x >= 0.0)) {
                return Err(format!("{name}[{t}] = {} is not a nonnegative number", v[t]));
            }
        }
        Ok(())
    }
}

/// Element parts of the indicators: `(‖R_y‖², ‖R_p‖², ‖R_y - mean‖², ‖R_p - mean‖²)`.
struct ElementResiduals {
    res2_y: f64,
    res2_p: f64,
    dev2_y: f64,
    dev2_p: f64,
}

fn element_residuals(
    mesh: &Mesh,
    sol: &DiscreteSolution,
    spec: &ProblemSpec,
    rule: &TriangleRule,
    opts: &EstimatorOptions,
    t: usize,
) -> Result<ElementResiduals> {
    let g = mesh.geometry(t);
    let yv = sol.y.on_element(mesh, t);
    let pv = sol.p.on_element(mesh, t);
    let grad_y = g.gradient(&yv);
    let grad_p = g.gradient(&pv);
    let step = opts.div_step * g.size();
    let nodes = kink_adapted_nodes(g.area, rule, &spec.kink_cuts(&pv));
    let mut ry = Vec::with_capacity(nodes.len());
    let mut rp = Vec::with_capacity(nodes.len());
    for &(l, _) in &nodes {
        let x = to_physical(&g.vertices, l);
        let f = (spec.f)(x);
        let yd = (spec.y_d)(x);
        for value in [f, yd] {
            if !value.is_finite() {
                return Err(Error::Data {
                    element: t,
                    x: x[0],
                    y: x[1],
                    value,
                });
            }
        }
        let a0 = (spec.coeff.a0)(x);
        let y = eval_linear(&yv, l);
        let p = eval_linear(&pv, l);
        let u = spec.clamp_control(p);
        // ℒv = -(div A)·∇v + a₀ v for linear v.
        let da = spec.coeff.divergence(x, step, false);
        let dat = spec.coeff.divergence(x, step, true);
        let l_y = -(da[0] * grad_y[0] + da[1] * grad_y[1]) + a0 * y;
        let l_p = -(dat[0] * grad_p[0] + dat[1] * grad_p[1]) + a0 * p;
        ry.push(f + u - l_y);
        rp.push(y - yd - l_p);
    }
    let stats = |r: &[f64]| {
        let integral: f64 = nodes.iter().zip(r).map(|(&(_, w), v)| w * v).sum();
        let mean = integral / g.area;
        let res2: f64 = nodes.iter().zip(r).map(|(&(_, w), v)| w * v * v).sum();
        let dev2: f64 = nodes.iter().zip(r).map(|(&(_, w), v)| w * (v - mean) * (v - mean)).sum();
        (res2, dev2)
    };
    let (res2_y, dev2_y) = stats(&ry);
    let (res2_p, dev2_p) = stats(&rp);
    Ok(ElementResiduals {
        res2_y,
        res2_p,
        dev2_y,
        dev2_p,
    })
}

/// `h_E³ ∫_E ([A∇v]·n)²` for interior edge `e`.
fn edge_jump(mesh: &Mesh, topo: &Topology, e: usize, values: &[f64], tensor: &TensorFn) -> f64 {
    let (t1, t2) = topo.edge_elements[e];
    let t2 = match t2 {
        Some(t) => t,
        None => return 0.0,
    };
    let (a, b) = topo.edges[e];
    let (xa, xb) = (mesh.vertices()[a], mesh.vertices()[b]);
    let len = (xb[0] - xa[0]).hypot(xb[1] - xa[1]);
    let n = [(xb[1] - xa[1]) / len, -(xb[0] - xa[0]) / len];
    let grad = |t: usize, g: &ElementGeometry| {
        let el = mesh.elements()[t];
        g.gradient(&[values[el[0]], values[el[1]], values[el[2]]])
    };
    let g1 = grad(t1, &mesh.geometry(t1));
    let g2 = grad(t2, &mesh.geometry(t2));
    let integral: f64 = edge_gauss2()
        .iter()
        .map(|&(s, w)| {
            let x = [xa[0] + s * (xb[0] - xa[0]), xa[1] + s * (xb[1] - xa[1])];
            let m = tensor(x);
            let flux = |g: [f64; 2]| {
                let ag = [m[0][0] * g[0] + m[0][1] * g[1], m[1][0] * g[0] + m[1][1] * g[1]];
                ag[0] * n[0] + ag[1] * n[1]
            };
            let jump = flux(g1) - flux(g2);
            w * len * jump * jump
        })
        .sum();
    len.powi(3) * integral
}

/// All element indicators and oscillations.
pub fn total_indicators(
    mesh: &Mesh,
    sol: &DiscreteSolution,
    spec: &ProblemSpec,
    opts: &EstimatorOptions,
) -> Result<IndicatorSet> {
    let rule = TriangleRule::with_degree(opts.quad_order)?;
    let topo = mesh.topology();
    let jumps: Vec<(f64, f64)> = (0..topo.edges.len())
        .into_par_iter()
        .map(|e| {
            (
                edge_jump(mesh, &topo, e, sol.y.values(), &spec.coeff.a),
                edge_jump(mesh, &topo, e, sol.p.values(), &spec.coeff.a_adjoint),
            )
        })
        .collect();
    let elems: Vec<Result<ElementResiduals>> = (0..mesh.num_elements())
        .into_par_iter()
        .map(|t| element_residuals(mesh, sol, spec, &rule, opts, t))
        .collect();
    let n = mesh.num_elements();
    let (mut eta2_y, mut eta2_p) = (vec![0.0; n], vec![0.0; n]);
    let (mut osc2_y, mut osc2_p) = (vec![0.0; n], vec![0.0; n]);
    for (t, r) in elems.into_iter().enumerate() {
        let r = r?;
        let h4 = mesh.area(t).powi(2);
        eta2_y[t] = h4 * r.res2_y;
        eta2_p[t] = h4 * r.res2_p;
        osc2_y[t] = h4 * r.dev2_y;
        osc2_p[t] = h4 * r.dev2_p;
        for &e in &topo.element_edges[t] {
            eta2_y[t] += jumps[e].0;
            eta2_p[t] += jumps[e].1;
        }
    }
    Ok(IndicatorSet::from_parts(eta2_y, eta2_p, osc2_y, osc2_p))
}

fn single_element(
    mesh: &Mesh,
    sol: &DiscreteSolution,
    spec: &ProblemSpec,
    t: usize,
    opts: &EstimatorOptions,
) -> Result<(f64, f64)> {
    if t >= mesh.num_elements() {
        return Err(Error::InvalidArgument(format!("element {t} does not exist")));
    }
    let rule = TriangleRule::with_degree(opts.quad_order)?;
    let topo = mesh.topology();
    let r = element_residuals(mesh, sol, spec, &rule, opts, t)?;
    let h4 = mesh.area(t).powi(2);
    let (mut ey, mut ep) = (h4 * r.res2_y, h4 * r.res2_p);
    for &e in &topo.element_edges[t] {
        ey += edge_jump(mesh, &topo, e, sol.y.values(), &spec.coeff.a);
        ep += edge_jump(mesh, &topo, e, sol.p.values(), &spec.coeff.a_adjoint);
    }
    Ok((ey, ep))
}

/// `η²_y(T)` for one element.
pub fn state_indicator(
    mesh: &Mesh,
    sol: &DiscreteSolution,
    spec: &ProblemSpec,
    t: usize,
    opts: &EstimatorOptions,
) -> Result<f64> {
    Ok(single_element(mesh, sol, spec, t, opts)?.0)
}

/// `η²_p(T)` for one element.
pub fn adjoint_indicator(
    mesh: &Mesh,
    sol: &DiscreteSolution,
    spec: &ProblemSpec,
    t: usize,
    opts: &EstimatorOptions,
) -> Result<f64> {
    Ok(single_element(mesh, sol, spec, t, opts)?.1)
}

/// `(osc(f + u_T - ℒy_T, 𝒯), osc(y_T - y_d - ℒ*p_T, 𝒯))`.
pub fn data_oscillation(
    mesh: &Mesh,
    sol: &DiscreteSolution,
    spec: &ProblemSpec,
    opts: &EstimatorOptions,
) -> Result<(f64, f64)> {
    let ind = total_indicators(mesh, sol, spec, opts)?;
    Ok((ind.osc_y(), ind.osc_p()))
}

/// `η / (‖u - u_T‖ + ‖y - y_T‖ + ‖p - p_T‖)`, or `+∞` for a zero error.
pub fn effectivity_index(eta: f64, err_u: f64, err_y: f64, err_p: f64) -> f64 {
    let err = err_u + err_y + err_p;
    if err == 0.0 {
        f64::INFINITY
    } else {
        eta / err
    }
}
