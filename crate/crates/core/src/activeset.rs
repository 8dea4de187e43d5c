//! Boundaries of the control's active sets.
//!
//! For the variationally discretized control `u = clamp(-p_T/α, a, b)` the
//! sets `{u = a}` and `{u = b}` are bounded by the level lines
//! `-p_T/α = a, b`, which are straight inside every element and cut through
//! element interiors. For the nodal interpolant of the same clamp values (the
//! piecewise linear, fully discretized control) a point is active only where
//! a whole element is, so the boundary runs along mesh edges.

use std::fmt::Write as _;

use crate::control::{DiscreteSolution, ProblemSpec};
use crate::mesh::{edge_key, Mesh};
use crate::Point;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Bound {
    Lower,
    Upper,
}

impl Bound {
    pub fn label(self) -> &'static str {
        match self {
            Bound::Lower => "lower",
            Bound::Upper => "upper",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub bound: Bound,
    pub element: usize,
    pub start: Point,
    pub end: Point,
}

/// The part of the zero line of the linear function with vertex values
/// `s` inside the triangle `v`, or `None` when it misses the interior.
pub fn zero_segment(v: &[Point; 3], s: [f64; 3]) -> Option<(Point, Point)> {
    let mut pts: Vec<Point> = Vec::with_capacity(3);
    let mut push = |p: Point| {
        if !pts.iter().any(|q| (q[0] - p[0]).abs() < 1e-15 && (q[1] - p[1]).abs() < 1e-15) {
            pts.push(p);
        }
    };
    for i in 0..3 {
        let j = (i + 1) % 3;
        let (si, sj) = (s[i], s[j]);
        if si == 0.0 {
            push(v[i]);
        }
        if (si < 0.0 && sj > 0.0) || (si > 0.0 && sj < 0.0) {
            let t = si / (si - sj);
            push([v[i][0] + t * (v[j][0] - v[i][0]), v[i][1] + t * (v[j][1] - v[i][1])]);
        }
    }
    // a line through one vertex only, or lying along a whole edge with the
    // rest of the element on one side, does not separate the interior
    let separates = s.iter().any(|&x| x < 0.0) && s.iter().any(|&x| x > 0.0);
    if pts.len() == 2 && separates {
        Some((pts[0], pts[1]))
    } else {
        None
    }
}

/// Level-line boundaries of the variational control.
pub fn variational_boundary(mesh: &Mesh, sol: &DiscreteSolution, spec: &ProblemSpec) -> Vec<Segment> {
    let mut out = Vec::new();
    for t in 0..mesh.num_elements() {
        let pv = sol.p.on_element(mesh, t);
        let v = mesh.element_vertices(t);
        let w = pv.map(|p| -p / spec.alpha);
        for (bound, level) in [(Bound::Lower, spec.lower), (Bound::Upper, spec.upper)] {
            if let Some((a, b)) = zero_segment(&v, w.map(|x| x - level)) {
                out.push(Segment {
                    bound,
                    element: t,
                    start: a,
                    end: b,
                });
            }
        }
    }
    out
}

/// Nodal clamp values: the fully discrete comparison control.
pub fn nodal_control(sol: &DiscreteSolution, spec: &ProblemSpec) -> Vec<f64> {
    sol.p.values().iter().map(|&p| spec.clamp_control(p)).collect()
}

/// Edge boundaries of the active sets of the nodal interpolant: edges of
/// elements with all three vertex values at a bound whose neighbour across
/// the edge is not active at the same bound.
pub fn full_discretization_boundary(mesh: &Mesh, sol: &DiscreteSolution, spec: &ProblemSpec) -> Vec<Segment> {
    let u = nodal_control(sol, spec);
    let active = |t: usize, level: f64| mesh.elements()[t].iter().all(|&i| u[i] == level);
    let topo = mesh.topology();
    let mut out = Vec::new();
    for t in 0..mesh.num_elements() {
        for (bound, level) in [(Bound::Lower, spec.lower), (Bound::Upper, spec.upper)] {
            if !active(t, level) {
                continue;
            }
            for &e in &topo.element_edges[t] {
                let (t1, t2) = topo.edge_elements[e];
                let other = if t1 == t { t2 } else { Some(t1) };
                if other.is_some_and(|o| active(o, level)) {
                    continue;
                }
                let (a, b) = topo.edges[e];
                debug_assert_eq!(edge_key(a, b), topo.edges[e]);
                out.push(Segment {
                    bound,
                    element: t,
                    start: mesh.vertices()[a],
                    end: mesh.vertices()[b],
                });
            }
        }
    }
    out
}

/// Smallest barycentric coordinate of the segment midpoint: zero when the
/// segment lies on an element edge, positive when it crosses the interior.
pub fn interior_offset(mesh: &Mesh, seg: &Segment) -> f64 {
    let g = mesh.geometry(seg.element);
    let mid = [0.5 * (seg.start[0] + seg.end[0]), 0.5 * (seg.start[1] + seg.end[1])];
    let l = crate::mesh::barycentric(&g, mid);
    l.iter().cloned().fold(f64::INFINITY, f64::min).max(0.0)
}

pub const CSV_HEADER: &str = "bound,element,x0,y0,x1,y1";

pub fn to_csv(segments: &[Segment]) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for seg in segments {
        let _ = writeln!(
            s,
            "{},{},{:.17e},{:.17e},{:.17e},{:.17e}",
            seg.bound.label(),
            seg.element,
            seg.start[0],
            seg.start[1],
            seg.end[0],
            seg.end[1]
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fe::{constant, CoefficientSet};
    use crate::mesh::NodalField;

    fn spec() -> ProblemSpec {
        ProblemSpec {
            name: "t".into(),
            coeff: CoefficientSet::laplace(),
            f: constant(0.0),
            y_d: constant(0.0),
            alpha: 1.0,
            lower: -1.0,
            upper: 1.0,
            state_boundary: constant(0.0),
            exact: None,
        }
    }

    #[test]
    fn single_crossing() {
        // -p on the unit triangle: values 0, 2, 0 → level 1 cuts edges 01 and 12
        let m = Mesh::new(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], vec![[0, 1, 2]]).unwrap();
        let s = spec();
        let p = NodalField::new(vec![0.0, -2.0, 0.0]);
        let sol = DiscreteSolution::new(p.clone(), p, &s);
        let segs = variational_boundary(&m, &sol, &s);
        assert_eq!(segs.len(), 1);
        assert_eq!(segs[0].bound, Bound::Upper);
        let mut ends = [segs[0].start, segs[0].end];
        ends.sort_by(|a, b| a[1].total_cmp(&b[1]));
        assert!((ends[0][0] - 0.5).abs() < 1e-15 && ends[0][1].abs() < 1e-15);
        assert!((ends[1][0] - 0.5).abs() < 1e-15 && (ends[1][1] - 0.5).abs() < 1e-15);
        assert!((interior_offset(&m, &segs[0]) - 0.25).abs() < 1e-15);
        assert!(full_discretization_boundary(&m, &sol, &s).is_empty());
    }

    #[test]
    fn inactive_control_has_no_boundary() {
        let m = Mesh::unit_square(4).unwrap();
        let s = spec();
        let p = NodalField::new(m.vertices().iter().map(|x| 0.5 * x[0] - 0.2).collect());
        let sol = DiscreteSolution::new(p.clone(), p, &s);
        assert!(variational_boundary(&m, &sol, &s).is_empty());
        assert!(full_discretization_boundary(&m, &sol, &s).is_empty());
        assert_eq!(to_csv(&[]), "bound,element,x0,y0,x1,y1\n");
    }

    #[test]
    fn fully_active_region_follows_edges() {
        let m = Mesh::unit_square(4).unwrap();
        let s = spec();
        // u = clamp(3 - 6x₁) hits the upper bound for x₁ ≤ 1/3
        let p = NodalField::new(m.vertices().iter().map(|x| -(3.0 - 6.0 * x[0])).collect());
        let sol = DiscreteSolution::new(p.clone(), p, &s);
        let full = full_discretization_boundary(&m, &sol, &s);
        assert!(!full.is_empty());
        for seg in &full {
            assert!(interior_offset(&m, seg) < 1e-15);
        }
        let var = variational_boundary(&m, &sol, &s);
        assert!(var.iter().any(|seg| (seg.start[0] - 1.0 / 3.0).abs() < 1e-14));
        assert!(var.iter().any(|seg| interior_offset(&m, seg) > 1e-3));
    }
}
