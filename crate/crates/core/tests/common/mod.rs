//! Independent reference computations shared by the integration tests.
//!
//! Nothing here reuses the library's quadrature: elements are subdivided on a
//! barycentric lattice, pieces are clipped along kink lines with a separate
//! polygon clipper, and integrals use a collapsed (Duffy) Gauss-Legendre
//! product rule.

#![allow(dead_code)]

use std::collections::HashMap;

use afem_ocp::control::ProblemSpec;
use afem_ocp::mesh::Mesh;

pub type P = [f64; 2];

const GL4: [(f64, f64); 4] = [
    (-0.861_136_311_594_052_6, 0.347_854_845_137_453_8),
    (-0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
    (0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
    (0.861_136_311_594_052_6, 0.347_854_845_137_453_8),
];

fn area(a: P, b: P, c: P) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1])).abs()
}

/// `∫_T g` by the collapsed 4×4 Gauss rule (exact for degree 7).
pub fn duffy(tri: [P; 3], g: &mut impl FnMut(P) -> f64) -> f64 {
    let a2 = 2.0 * area(tri[0], tri[1], tri[2]);
    let mut s = 0.0;
    for &(xi, wi) in &GL4 {
        let u = 0.5 * (1.0 + xi);
        for &(xj, wj) in &GL4 {
            let t = 0.5 * (1.0 + xj);
            let v = t * (1.0 - u);
            let x = [
                tri[0][0] + u * (tri[1][0] - tri[0][0]) + v * (tri[2][0] - tri[0][0]),
                tri[0][1] + u * (tri[1][1] - tri[0][1]) + v * (tri[2][1] - tri[0][1]),
            ];
            s += 0.25 * wi * wj * (1.0 - u) * g(x);
        }
    }
    a2 * s
}

/// `m²` congruent sub-triangles from splitting every edge into `m` parts.
pub fn lattice(tri: [P; 3], m: usize) -> Vec<[P; 3]> {
    let pt = |i: usize, j: usize| {
        let (a, b) = (i as f64 / m as f64, j as f64 / m as f64);
        [
            tri[0][0] + a * (tri[1][0] - tri[0][0]) + b * (tri[2][0] - tri[0][0]),
            tri[0][1] + a * (tri[1][1] - tri[0][1]) + b * (tri[2][1] - tri[0][1]),
        ]
    };
    let mut out = Vec::with_capacity(m * m);
    for i in 0..m {
        for j in 0..m - i {
            out.push([pt(i, j), pt(i + 1, j), pt(i, j + 1)]);
            if i + j + 2 <= m {
                out.push([pt(i + 1, j), pt(i + 1, j + 1), pt(i, j + 1)]);
            }
        }
    }
    out
}

/// Splits a convex polygon by the sign of an affine function.
fn split(poly: &[P], h: &impl Fn(P) -> f64) -> Vec<Vec<P>> {
    let s: Vec<f64> = poly.iter().map(|&x| h(x)).collect();
    let (mut neg, mut pos) = (Vec::new(), Vec::new());
    for i in 0..poly.len() {
        let j = (i + 1) % poly.len();
        if s[i] <= 0.0 {
            neg.push(poly[i]);
        }
        if s[i] >= 0.0 {
            pos.push(poly[i]);
        }
        if s[i] * s[j] < 0.0 {
            let t = s[i] / (s[i] - s[j]);
            let x = [poly[i][0] + t * (poly[j][0] - poly[i][0]), poly[i][1] + t * (poly[j][1] - poly[i][1])];
            neg.push(x);
            pos.push(x);
        }
    }
    [neg, pos].into_iter().filter(|q| q.len() >= 3).collect()
}

/// `∫_T g` on `m`-fold subdivided `T`, with every piece further split along
/// the zero lines of the affine functions `cuts`.
pub fn integrate_split(tri: [P; 3], m: usize, cuts: &[&dyn Fn(P) -> f64], g: &mut impl FnMut(P) -> f64) -> f64 {
    let mut total = 0.0;
    for sub in lattice(tri, m) {
        let mut pieces = vec![sub.to_vec()];
        for h in cuts {
            pieces = pieces.iter().flat_map(|q| split(q, h)).collect();
        }
        for q in pieces {
            for k in 1..q.len() - 1 {
                total += duffy([q[0], q[k], q[k + 1]], g);
            }
        }
    }
    total
}

/// Affine interpolant on a triangle from vertex values.
pub fn affine(tri: [P; 3], v: [f64; 3]) -> impl Fn(P) -> f64 {
    let det = (tri[1][0] - tri[0][0]) * (tri[2][1] - tri[0][1]) - (tri[2][0] - tri[0][0]) * (tri[1][1] - tri[0][1]);
    move |x: P| {
        let dx = [x[0] - tri[0][0], x[1] - tri[0][1]];
        let l1 = (dx[0] * (tri[2][1] - tri[0][1]) - dx[1] * (tri[2][0] - tri[0][0])) / det;
        let l2 = ((tri[1][0] - tri[0][0]) * dx[1] - (tri[1][1] - tri[0][1]) * dx[0]) / det;
        v[0] * (1.0 - l1 - l2) + v[1] * l1 + v[2] * l2
    }
}

fn gradient(tri: [P; 3], v: [f64; 3]) -> P {
    let f = affine(tri, v);
    let base = f(tri[0]);
    // exact for affine f: solve with the two edge vectors
    let (e1, e2) = (
        [tri[1][0] - tri[0][0], tri[1][1] - tri[0][1]],
        [tri[2][0] - tri[0][0], tri[2][1] - tri[0][1]],
    );
    let (d1, d2) = (v[1] - base, v[2] - base);
    let det = e1[0] * e2[1] - e1[1] * e2[0];
    [(d1 * e2[1] - d2 * e1[1]) / det, (e1[0] * d2 - e2[0] * d1) / det]
}

fn tri_of(mesh: &Mesh, t: usize) -> [P; 3] {
    let e = mesh.elements()[t];
    [mesh.vertices()[e[0]], mesh.vertices()[e[1]], mesh.vertices()[e[2]]]
}

fn vals(mesh: &Mesh, f: &[f64], t: usize) -> [f64; 3] {
    let e = mesh.elements()[t];
    [f[e[0]], f[e[1]], f[e[2]]]
}

/// `(η²_y(T), η²_p(T))` for `A = I` and constant `a₀` by `m`-fold
/// subdivision quadrature.
pub fn reference_indicators(mesh: &Mesh, spec: &ProblemSpec, y: &[f64], p: &[f64], m: usize) -> Vec<(f64, f64)> {
    let a0 = (spec.coeff.a0)([0.5, 0.5]);
    let ne = mesh.num_elements();
    let mut out = vec![(0.0, 0.0); ne];
    for (t, slot) in out.iter_mut().enumerate() {
        let tri = tri_of(mesh, t);
        let yt = affine(tri, vals(mesh, y, t));
        let pt = affine(tri, vals(mesh, p, t));
        let w = |x: P| -pt(x) / spec.alpha;
        let lo = |x: P| w(x) - spec.lower;
        let hi = |x: P| w(x) - spec.upper;
        let cuts: [&dyn Fn(P) -> f64; 2] = [&lo, &hi];
        let u = |x: P| w(x).max(spec.lower).min(spec.upper);
        let ry = integrate_split(tri, m, &cuts, &mut |x| {
            let r = (spec.f)(x) + u(x) - a0 * yt(x);
            r * r
        });
        let rp = integrate_split(tri, m, &cuts, &mut |x| {
            let r = yt(x) - (spec.y_d)(x) - a0 * pt(x);
            r * r
        });
        let h4 = area(tri[0], tri[1], tri[2]).powi(2);
        *slot = (h4 * ry, h4 * rp);
    }
    // interior edges: the normal-flux jump of a P1 field is constant, still
    // integrated over m sub-segments
    let mut edges: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
    for (t, e) in mesh.elements().iter().enumerate() {
        for k in 0..3 {
            let (a, b) = (e[k], e[(k + 1) % 3]);
            edges.entry((a.min(b), a.max(b))).or_default().push(t);
        }
    }
    for ((a, b), ts) in edges {
        if ts.len() != 2 {
            continue;
        }
        let (xa, xb) = (mesh.vertices()[a], mesh.vertices()[b]);
        let len = ((xb[0] - xa[0]).powi(2) + (xb[1] - xa[1]).powi(2)).sqrt();
        let n = [(xb[1] - xa[1]) / len, -(xb[0] - xa[0]) / len];
        for (field, is_y) in [(y, true), (p, false)] {
            let g0 = gradient(tri_of(mesh, ts[0]), vals(mesh, field, ts[0]));
            let g1 = gradient(tri_of(mesh, ts[1]), vals(mesh, field, ts[1]));
            let jump = (g0[0] - g1[0]) * n[0] + (g0[1] - g1[1]) * n[1];
            let mut integral = 0.0;
            for _ in 0..m {
                for &(_, wq) in &GL4 {
                    integral += 0.5 * wq * (len / m as f64) * jump * jump;
                }
            }
            let contrib = len.powi(3) * integral;
            for &t in &ts {
                if is_y {
                    out[t].0 += contrib;
                } else {
                    out[t].1 += contrib;
                }
            }
        }
    }
    out
}

/// `∫ clamp(-p_T/α) φ_i` by subdivision quadrature.
pub fn reference_control_load(mesh: &Mesh, spec: &ProblemSpec, p: &[f64], m: usize) -> Vec<f64> {
    let mut load = vec![0.0; mesh.num_vertices()];
    for t in 0..mesh.num_elements() {
        let tri = tri_of(mesh, t);
        let pt = affine(tri, vals(mesh, p, t));
        let w = |x: P| -pt(x) / spec.alpha;
        let lo = |x: P| w(x) - spec.lower;
        let hi = |x: P| w(x) - spec.upper;
        let cuts: [&dyn Fn(P) -> f64; 2] = [&lo, &hi];
        let e = mesh.elements()[t];
        for i in 0..3 {
            let mut unit = [0.0; 3];
            unit[i] = 1.0;
            let phi = affine(tri, unit);
            load[e[i]] += integrate_split(tri, m, &cuts, &mut |x| w(x).max(spec.lower).min(spec.upper) * phi(x));
        }
    }
    load
}

/// Relative deviation `max_T |a_T - b_T| / max_T |b_T|`, and the relative
/// deviation of the totals.
pub fn deviation(a: &[f64], b: &[f64]) -> (f64, f64) {
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let max = a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())) / scale;
    let (sa, sb): (f64, f64) = (a.iter().sum(), b.iter().sum());
    (max, (sa - sb).abs() / sb.abs())
}
