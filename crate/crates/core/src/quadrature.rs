//! Quadrature on triangles and edges.
//!
//! Triangle rules are stored in barycentric coordinates with weights summing to
//! one, so `∫_T g ≈ |T| Σ w_q g(x_q)`. Piecewise-polynomial integrands with
//! straight kink lines (clamped linear functions) are handled by
//! [`kink_adapted_nodes`], which splits the element along the kink lines first.

use crate::{Error, Result};

/// Barycentric coordinates with respect to an element's three vertices.
pub type Bary = [f64; 3];

/// Symmetric Gauss rule on a triangle.
#[derive(Debug, Clone)]
pub struct TriangleRule {
    degree: usize,
    points: Vec<Bary>,
    weights: Vec<f64>,
}

fn orbit3(a: f64, w: f64, points: &mut Vec<Bary>, weights: &mut Vec<f64>) {
    let b = 1.0 - 2.0 * a;
    for p in [[b, a, a], [a, b, a], [a, a, b]] {
        points.push(p);
        weights.push(w);
    }
}

impl TriangleRule {
    /// Cheapest built-in rule integrating polynomials of total degree
    /// `degree` exactly. Degrees above 5 are not available.
    pub fn with_degree(degree: usize) -> Result<Self> {
        let mut points = Vec::new();
        let mut weights = Vec::new();
        let exact = match degree {
            0 | 1 => {
                points.push([1.0 / 3.0; 3]);
                weights.push(1.0);
                1
            }
            2 => {
                orbit3(1.0 / 6.0, 1.0 / 3.0, &mut points, &mut weights);
                2
            }
            3 | 4 => {
                orbit3(
                    0.445_948_490_915_964_886_32,
                    0.223_381_589_678_011_465_70,
                    &mut points,
                    &mut weights,
                );
                orbit3(
                    0.091_576_213_509_770_743_460,
                    0.109_951_743_655_321_867_64,
                    &mut points,
                    &mut weights,
                );
                4
            }
            5 => {
                let s15 = 15f64.sqrt();
                points.push([1.0 / 3.0; 3]);
                weights.push(9.0 / 40.0);
                orbit3((6.0 - s15) / 21.0, (155.0 - s15) / 1200.0, &mut points, &mut weights);
                orbit3((6.0 + s15) / 21.0, (155.0 + s15) / 1200.0, &mut points, &mut weights);
                5
            }
            d => {
                return Err(Error::InvalidArgument(format!(
                    "no triangle rule of degree {d} (maximum 5)"
                )))
            }
        };
        Ok(Self {
            degree: exact,
            points,
            weights,
        })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Bary, f64)> + '_ {
        self.points.iter().copied().zip(self.weights.iter().copied())
    }
}

/// Two-point Gauss–Legendre rule on the unit interval: `(t, weight)` pairs
/// with weights summing to one.
pub fn edge_gauss2() -> [(f64, f64); 2] {
    let d = 0.5 / 3f64.sqrt();
    [(0.5 - d, 0.5), (0.5 + d, 0.5)]
}

/// Maps barycentric coordinates to the physical point of triangle `v`.
#[inline]
pub fn to_physical(v: &[[f64; 2]; 3], l: Bary) -> [f64; 2] {
    [
        l[0] * v[0][0] + l[1] * v[1][0] + l[2] * v[2][0],
        l[0] * v[0][1] + l[1] * v[1][1] + l[2] * v[2][1],
    ]
}

/// Value at `l` of the linear function with vertex values `vals`.
#[inline]
pub fn eval_linear(vals: &[f64; 3], l: Bary) -> f64 {
    vals[0] * l[0] + vals[1] * l[1] + vals[2] * l[2]
}

/// Area fraction of the sub-triangle `(p, q, r)` given in barycentric
/// coordinates of its parent.
fn bary_area_fraction(p: Bary, q: Bary, r: Bary) -> f64 {
    let det = p[0] * (q[1] * r[2] - q[2] * r[1]) - p[1] * (q[0] * r[2] - q[2] * r[0])
        + p[2] * (q[0] * r[1] - q[1] * r[0]);
    det.abs()
}

fn polygon_fraction(poly: &[Bary]) -> f64 {
    (1..poly.len().saturating_sub(1))
        .map(|k| bary_area_fraction(poly[0], poly[k], poly[k + 1]))
        .sum()
}

/// A linear function (by vertex values) and a level at which it is cut.
#[derive(Debug, Clone, Copy)]
pub struct LevelCut {
    pub values: [f64; 3],
    pub level: f64,
}

fn clip(poly: &[Bary], cut: &LevelCut) -> (Vec<Bary>, Vec<Bary>) {
    let s: Vec<f64> = poly
        .iter()
        .map(|&l| eval_linear(&cut.values, l) - cut.level)
        .collect();
    let mut below = Vec::with_capacity(poly.len() + 2);
    let mut above = Vec::with_capacity(poly.len() + 2);
    for i in 0..poly.len() {
        let j = (i + 1) % poly.len();
        let (si, sj) = (s[i], s[j]);
        if si <= 0.0 {
            below.push(poly[i]);
        }
        if si >= 0.0 {
            above.push(poly[i]);
        }
        if (si < 0.0 && sj > 0.0) || (si > 0.0 && sj < 0.0) {
            let t = si / (si - sj);
            let (a, b) = (poly[i], poly[j]);
            let x = [
                a[0] + t * (b[0] - a[0]),
                a[1] + t * (b[1] - a[1]),
                a[2] + t * (b[2] - a[2]),
            ];
            below.push(x);
            above.push(x);
        }
    }
    (below, above)
}

/// Pieces below this fraction of the element area are dropped.
pub const DEGENERATE_FRACTION: f64 = 1e-14;

/// Splits the reference element into convex polygons on each of which every
/// cut function lies entirely on one side of its level.
pub fn split_by_levels(cuts: &[LevelCut]) -> Vec<Vec<Bary>> {
    let mut pieces = vec![vec![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]];
    for cut in cuts {
        let lo = cut.values.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = cut.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if lo >= cut.level || hi <= cut.level {
            continue;
        }
        let mut next = Vec::with_capacity(pieces.len() + 1);
        for poly in &pieces {
            let (below, above) = clip(poly, cut);
            for part in [below, above] {
                if part.len() >= 3 && polygon_fraction(&part) > DEGENERATE_FRACTION {
                    next.push(part);
                }
            }
        }
        pieces = next;
    }
    pieces
}

/// Quadrature nodes `(barycentric point, weight)` on an element of the given
/// area, with the element first split along the level lines of `cuts`.
/// Weights carry the element area, so `Σ w g(x) ≈ ∫_T g`.
pub fn kink_adapted_nodes(area: f64, rule: &TriangleRule, cuts: &[LevelCut]) -> Vec<(Bary, f64)> {
    let pieces = split_by_levels(cuts);
    let mut nodes = Vec::with_capacity(pieces.len() * rule.len());
    for poly in &pieces {
        for k in 1..poly.len() - 1 {
            let (p, q, r) = (poly[0], poly[k], poly[k + 1]);
            let frac = bary_area_fraction(p, q, r);
            if frac <= DEGENERATE_FRACTION {
                continue;
            }
            for (l, w) in rule.iter() {
                let x = [
                    l[0] * p[0] + l[1] * q[0] + l[2] * r[0],
                    l[0] * p[1] + l[1] * q[1] + l[2] * r[1],
                    l[0] * p[2] + l[1] * q[2] + l[2] * r[2],
                ];
                nodes.push((x, w * frac * area));
            }
        }
    }
    nodes
}
