//! Conforming triangle meshes refined by newest-vertex bisection.
//!
//! Every element is stored as `[newest, b, c]` in counter-clockwise order; the
//! edge `(b, c)` opposite the newest vertex is its refinement edge. Bisection
//! inserts the midpoint `m` of the refinement edge and produces the children
//! `[m, newest, b]` (left) and `[m, c, newest]` (right), so the new vertex is
//! the newest vertex of both children.

use std::collections::{BTreeSet, HashMap, HashSet};

use crate::{Error, Point, Result};

/// Sorted vertex pair identifying an edge.
pub type EdgeKey = (usize, usize);

#[inline]
pub fn edge_key(a: usize, b: usize) -> EdgeKey {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

/// One scalar per mesh vertex, read as a continuous piecewise-linear function.
#[derive(Debug, Clone, PartialEq)]
pub struct NodalField {
    values: Vec<f64>,
}

impl NodalField {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            values: vec![0.0; n],
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Vertex values restricted to element `t` of `mesh`.
    pub fn on_element(&self, mesh: &Mesh, t: usize) -> [f64; 3] {
        let e = mesh.elements[t];
        [self.values[e[0]], self.values[e[1]], self.values[e[2]]]
    }
}

/// A duplicate-free set of element identifiers.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ElementSet(BTreeSet<usize>);

impl ElementSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn all(mesh: &Mesh) -> Self {
        (0..mesh.num_elements()).collect()
    }

    pub fn insert(&mut self, t: usize) -> bool {
        self.0.insert(t)
    }

    pub fn contains(&self, t: usize) -> bool {
        self.0.contains(&t)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }
}

impl FromIterator<usize> for ElementSet {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        Self(iter.into_iter().collect())
    }
}

/// Per-element geometric data of a straight triangle.
#[derive(Debug, Clone, Copy)]
pub struct ElementGeometry {
    pub vertices: [Point; 3],
    pub area: f64,
    /// Gradients of the barycentric coordinates (the P1 shape functions).
    pub grads: [[f64; 2]; 3],
}

impl ElementGeometry {
    pub fn from_vertices(v: [Point; 3]) -> Self {
        let twice = (v[1][0] - v[0][0]) * (v[2][1] - v[0][1])
            - (v[2][0] - v[0][0]) * (v[1][1] - v[0][1]);
        let mut grads = [[0.0; 2]; 3];
        for (i, g) in grads.iter_mut().enumerate() {
            let j = (i + 1) % 3;
            let k = (i + 2) % 3;
            *g = [(v[j][1] - v[k][1]) / twice, (v[k][0] - v[j][0]) / twice];
        }
        Self {
            vertices: v,
            area: 0.5 * twice,
            grads,
        }
    }

    /// Element size `h_T = |T|^{1/2}`.
    pub fn size(&self) -> f64 {
        self.area.sqrt()
    }

    /// Gradient of the linear function with the given vertex values.
    pub fn gradient(&self, vals: &[f64; 3]) -> [f64; 2] {
        let mut g = [0.0; 2];
        for i in 0..3 {
            g[0] += vals[i] * self.grads[i][0];
            g[1] += vals[i] * self.grads[i][1];
        }
        g
    }

    /// Interior angles in degrees.
    pub fn angles(&self) -> [f64; 3] {
        let v = &self.vertices;
        let mut out = [0.0; 3];
        for (i, a) in out.iter_mut().enumerate() {
            let p = v[i];
            let q = v[(i + 1) % 3];
            let r = v[(i + 2) % 3];
            let u = [q[0] - p[0], q[1] - p[1]];
            let w = [r[0] - p[0], r[1] - p[1]];
            let cos = (u[0] * w[0] + u[1] * w[1]) / (u[0].hypot(u[1]) * w[0].hypot(w[1]));
            *a = cos.clamp(-1.0, 1.0).acos().to_degrees();
        }
        out
    }
}

/// Edge incidence of a mesh. Local edge `k` of an element is the edge
/// opposite its local vertex `k`.
#[derive(Debug, Clone)]
pub struct Topology {
    pub edges: Vec<EdgeKey>,
    /// The one or two elements containing each edge.
    pub edge_elements: Vec<(usize, Option<usize>)>,
    pub element_edges: Vec<[usize; 3]>,
}

impl Topology {
    pub fn is_interior(&self, e: usize) -> bool {
        self.edge_elements[e].1.is_some()
    }

    pub fn num_interior_edges(&self) -> usize {
        self.edge_elements.iter().filter(|x| x.1.is_some()).count()
    }
}

#[derive(Debug, Clone)]
pub struct Mesh {
    vertices: Vec<Point>,
    elements: Vec<[usize; 3]>,
    generation: Vec<u32>,
    boundary_edges: BTreeSet<EdgeKey>,
    boundary_vertex: Vec<bool>,
    parent: Vec<usize>,
    previous_vertex_count: usize,
    new_vertex_parents: Vec<EdgeKey>,
}

impl Mesh {
    /// Builds an initial mesh. Elements are `[newest, b, c]` with `(b, c)` the
    /// refinement edge; they must be counter-clockwise and form a conforming
    /// triangulation. Edges belonging to a single element become boundary edges.
    pub fn new(vertices: Vec<Point>, elements: Vec<[usize; 3]>) -> Result<Self> {
        let nv = vertices.len();
        for (t, e) in elements.iter().enumerate() {
            if e.iter().any(|&v| v >= nv) {
                return Err(Error::InvalidArgument(format!(
                    "element {t} references a missing vertex"
                )));
            }
            let g = ElementGeometry::from_vertices([vertices[e[0]], vertices[e[1]], vertices[e[2]]]);
            if !(g.area > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "element {t} is not counter-clockwise (signed area {})",
                    g.area
                )));
            }
        }
        let mut count: HashMap<EdgeKey, usize> = HashMap::new();
        for e in &elements {
            for k in 0..3 {
                *count.entry(edge_key(e[(k + 1) % 3], e[(k + 2) % 3])).or_default() += 1;
            }
        }
        if let Some((edge, _)) = count.iter().find(|(_, &c)| c > 2) {
            return Err(Error::InvalidArgument(format!(
                "edge {edge:?} is shared by more than two elements"
            )));
        }
        let boundary_edges: BTreeSet<EdgeKey> = count
            .into_iter()
            .filter(|&(_, c)| c == 1)
            .map(|(k, _)| k)
            .collect();
        let mut boundary_vertex = vec![false; nv];
        for &(a, b) in &boundary_edges {
            boundary_vertex[a] = true;
            boundary_vertex[b] = true;
        }
        let ne = elements.len();
        Ok(Self {
            vertices,
            elements,
            generation: vec![0; ne],
            boundary_edges,
            boundary_vertex,
            parent: (0..ne).collect(),
            previous_vertex_count: nv,
            new_vertex_parents: Vec::new(),
        })
    }

    /// Uniform mesh of the unit square with `n` cells per side, each cell
    /// split along its `(0,0)-(1,1)` diagonal. The right-angle vertex is the
    /// newest vertex, so every hypotenuse is a refinement edge shared by the
    /// two triangles of its cell.
    pub fn unit_square(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument(
                "unit square mesh needs at least one subdivision".into(),
            ));
        }
        let id = |i: usize, j: usize| j * (n + 1) + i;
        let h = 1.0 / n as f64;
        let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
        for j in 0..=n {
            for i in 0..=n {
                vertices.push([i as f64 * h, j as f64 * h]);
            }
        }
        let mut elements = Vec::with_capacity(2 * n * n);
        for j in 0..n {
            for i in 0..n {
                let (p00, p10, p11, p01) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
                elements.push([p10, p11, p00]);
                elements.push([p01, p00, p11]);
            }
        }
        Self::new(vertices, elements)
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn elements(&self) -> &[[usize; 3]] {
        &self.elements
    }

    pub fn generation(&self, t: usize) -> u32 {
        self.generation[t]
    }

    pub fn generations(&self) -> &[u32] {
        &self.generation
    }

    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        self.boundary_vertex[v]
    }

    pub fn boundary_edges(&self) -> &BTreeSet<EdgeKey> {
        &self.boundary_edges
    }

    /// Element of the previous mesh each element descends from (identity on
    /// an initial mesh).
    pub fn parent(&self, t: usize) -> usize {
        self.parent[t]
    }

    /// Vertex count of the mesh this one was refined from.
    pub fn previous_vertex_count(&self) -> usize {
        self.previous_vertex_count
    }

    /// Endpoints of the bisected edge for each vertex created by the last
    /// refinement, in creation order.
    pub fn new_vertex_parents(&self) -> &[EdgeKey] {
        &self.new_vertex_parents
    }

    pub fn refinement_edge(&self, t: usize) -> EdgeKey {
        let e = self.elements[t];
        edge_key(e[1], e[2])
    }

    pub fn element_vertices(&self, t: usize) -> [Point; 3] {
        let e = self.elements[t];
        [self.vertices[e[0]], self.vertices[e[1]], self.vertices[e[2]]]
    }

    pub fn geometry(&self, t: usize) -> ElementGeometry {
        ElementGeometry::from_vertices(self.element_vertices(t))
    }

    pub fn area(&self, t: usize) -> f64 {
        self.geometry(t).area
    }

    pub fn total_area(&self) -> f64 {
        (0..self.num_elements()).map(|t| self.area(t)).sum()
    }

    pub fn topology(&self) -> Topology {
        let mut index: HashMap<EdgeKey, usize> = HashMap::with_capacity(2 * self.elements.len());
        let mut edges = Vec::new();
        let mut edge_elements: Vec<(usize, Option<usize>)> = Vec::new();
        let mut element_edges = Vec::with_capacity(self.elements.len());
        for (t, e) in self.elements.iter().enumerate() {
            let mut local = [0; 3];
            for (k, slot) in local.iter_mut().enumerate() {
                let key = edge_key(e[(k + 1) % 3], e[(k + 2) % 3]);
                let id = *index.entry(key).or_insert_with(|| {
                    edges.push(key);
                    edge_elements.push((t, None));
                    edges.len() - 1
                });
                if edge_elements[id].0 != t {
                    edge_elements[id].1 = Some(t);
                }
                *slot = id;
            }
            element_edges.push(local);
        }
        Topology {
            edges,
            edge_elements,
            element_edges,
        }
    }

    /// Audits conformity: every edge lies in one or two elements, exactly the
    /// boundary edges lie in one, all elements are positively oriented and
    /// every vertex is used.
    pub fn check_conformity(&self) -> std::result::Result<(), String> {
        let mut count: HashMap<EdgeKey, usize> = HashMap::new();
        let mut used = vec![false; self.vertices.len()];
        for (t, e) in self.elements.iter().enumerate() {
            if !(self.area(t) > 0.0) {
                return Err(format!("element {t} has non-positive area"));
            }
            for k in 0..3 {
                used[e[k]] = true;
                *count.entry(edge_key(e[(k + 1) % 3], e[(k + 2) % 3])).or_default() += 1;
            }
        }
        if let Some(v) = used.iter().position(|u| !u) {
            return Err(format!("vertex {v} belongs to no element"));
        }
        for (edge, &c) in &count {
            let on_boundary = self.boundary_edges.contains(edge);
            match (c, on_boundary) {
                (1, true) | (2, false) => {}
                (1, false) => return Err(format!("hanging edge {edge:?}")),
                _ => return Err(format!("edge {edge:?} shared by {c} elements")),
            }
        }
        if count.len() < self.boundary_edges.len()
            || self.boundary_edges.iter().any(|e| !count.contains_key(e))
        {
            return Err("boundary edge missing from the triangulation".into());
        }
        Ok(())
    }

    /// Refines the marked elements by `r` rounds of newest-vertex bisection
    /// plus conforming closure. Returns the new mesh and the set of elements
    /// of `self` that were bisected at least once.
    pub fn refine(&self, marked: &ElementSet, r: usize) -> Result<(Mesh, ElementSet)> {
        if r == 0 {
            return Err(Error::InvalidArgument("bisection count r must be >= 1".into()));
        }
        if let Some(t) = marked.iter().find(|&t| t >= self.num_elements()) {
            return Err(Error::InvalidArgument(format!(
                "marked element {t} does not exist"
            )));
        }
        let mut mesh = self.clone();
        mesh.parent = (0..mesh.num_elements()).collect();
        mesh.previous_vertex_count = mesh.num_vertices();
        mesh.new_vertex_parents.clear();
        if marked.is_empty() {
            return Ok((mesh, ElementSet::new()));
        }
        let mut refined = vec![false; self.num_elements()];
        let base_generation: Vec<u32> = self.generation.clone();
        for round in 0..r as u32 {
            let targets: Vec<usize> = (0..mesh.num_elements())
                .filter(|&t| {
                    let origin = mesh.parent[t];
                    marked.contains(origin) && mesh.generation[t] <= base_generation[origin] + round
                })
                .collect();
            mesh.bisect_round(&targets)?;
            for t in 0..mesh.num_elements() {
                let origin = mesh.parent[t];
                if mesh.generation[t] > base_generation[origin] {
                    refined[origin] = true;
                }
            }
        }
        let refined_set = (0..self.num_elements()).filter(|&t| refined[t]).collect();
        Ok((mesh, refined_set))
    }

    /// Uniform refinement: every element bisected `r` times.
    pub fn refine_uniform(&self, r: usize) -> Result<Mesh> {
        Ok(self.refine(&ElementSet::all(self), r)?.0)
    }

    /// One round: bisect each target once, closing with extra bisections.
    /// `self.parent` is carried through so it keeps pointing at the mesh the
    /// refinement started from.
    fn bisect_round(&mut self, targets: &[usize]) -> Result<()> {
        let mut edge_elems: HashMap<EdgeKey, [usize; 2]> =
            HashMap::with_capacity(2 * self.elements.len());
        for (t, e) in self.elements.iter().enumerate() {
            for k in 0..3 {
                let key = edge_key(e[(k + 1) % 3], e[(k + 2) % 3]);
                edge_elems
                    .entry(key)
                    .and_modify(|s| s[1] = t)
                    .or_insert([t, usize::MAX]);
            }
        }
        let mut marked_edges: HashSet<EdgeKey> = HashSet::new();
        let mut queue: Vec<usize> = Vec::new();
        let guard = 100 * self.elements.len();
        let mut steps = 0usize;
        let mark = |edge: EdgeKey, marked_edges: &mut HashSet<EdgeKey>, queue: &mut Vec<usize>| {
            if marked_edges.insert(edge) {
                for &n in &edge_elems[&edge] {
                    if n != usize::MAX {
                        queue.push(n);
                    }
                }
            }
        };
        for &t in targets {
            mark(self.refinement_edge(t), &mut marked_edges, &mut queue);
        }
        while let Some(t) = queue.pop() {
            steps += 1;
            if steps > guard {
                return Err(Error::Refinement(format!(
                    "closure exceeded {guard} steps; refinement-edge labelling is not compatible"
                )));
            }
            let e = self.elements[t];
            let has_marked = (0..3).any(|k| marked_edges.contains(&edge_key(e[(k + 1) % 3], e[(k + 2) % 3])));
            if has_marked {
                mark(self.refinement_edge(t), &mut marked_edges, &mut queue);
            }
        }

        let mut midpoint: HashMap<EdgeKey, usize> = HashMap::with_capacity(marked_edges.len());
        let mut elements = Vec::with_capacity(self.elements.len() + 2 * marked_edges.len());
        let mut generation = Vec::with_capacity(elements.capacity());
        let mut parent = Vec::with_capacity(elements.capacity());
        let mut stack: Vec<([usize; 3], u32)> = Vec::new();
        for t in 0..self.elements.len() {
            stack.push((self.elements[t], self.generation[t]));
            while let Some((e, g)) = stack.pop() {
                let key = edge_key(e[1], e[2]);
                if !marked_edges.contains(&key) {
                    elements.push(e);
                    generation.push(g);
                    parent.push(self.parent[t]);
                    continue;
                }
                let m = *midpoint.entry(key).or_insert_with(|| {
                    let (a, b) = (self.vertices[e[1]], self.vertices[e[2]]);
                    self.vertices.push([0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]);
                    let on_boundary = self.boundary_edges.contains(&key);
                    self.boundary_vertex.push(on_boundary);
                    self.new_vertex_parents.push(key);
                    self.vertices.len() - 1
                });
                // Pushed in reverse so the left child is emitted first.
                stack.push(([m, e[2], e[0]], g + 1));
                stack.push(([m, e[0], e[1]], g + 1));
            }
        }
        for (&key, &m) in &midpoint {
            if self.boundary_edges.remove(&key) {
                self.boundary_edges.insert(edge_key(key.0, m));
                self.boundary_edges.insert(edge_key(m, key.1));
            }
        }
        self.elements = elements;
        self.generation = generation;
        self.parent = parent;
        Ok(())
    }

    /// Continuous piecewise-linear mesh-size function: the value at a vertex
    /// is the mean of `|T|^{1/2}` over the elements containing it.
    pub fn mesh_size_function(&self) -> NodalField {
        let mut sum = vec![0.0; self.num_vertices()];
        let mut count = vec![0usize; self.num_vertices()];
        for (t, e) in self.elements.iter().enumerate() {
            let h = self.area(t).sqrt();
            for &v in e {
                sum[v] += h;
                count[v] += 1;
            }
        }
        NodalField::new(
            sum.iter()
                .zip(&count)
                .map(|(s, &c)| if c > 0 { s / c as f64 } else { 0.0 })
                .collect(),
        )
    }

    /// `‖∇h_𝒯‖_∞`: the largest gradient norm of the mesh-size function.
    pub fn grading_norm(&self) -> f64 {
        let h = self.mesh_size_function();
        (0..self.num_elements())
            .map(|t| {
                let g = self.geometry(t).gradient(&h.on_element(self, t));
                g[0].hypot(g[1])
            })
            .fold(0.0, f64::max)
    }

    /// Extremes over all elements and their vertices of `h_𝒯(z) / h_T`.
    pub fn size_function_bounds(&self) -> (f64, f64) {
        let h = self.mesh_size_function();
        let mut lo = f64::INFINITY;
        let mut hi: f64 = 0.0;
        for t in 0..self.num_elements() {
            let ht = self.area(t).sqrt();
            for v in h.on_element(self, t) {
                lo = lo.min(v / ht);
                hi = hi.max(v / ht);
            }
        }
        (lo, hi)
    }

    /// Smallest interior angle over all elements, in degrees.
    pub fn shape_regularity(&self) -> f64 {
        (0..self.num_elements())
            .flat_map(|t| self.geometry(t).angles())
            .fold(f64::INFINITY, f64::min)
    }

    /// Values at the current vertices of a P1 field given on the mesh this
    /// one was refined from (exact for nested spaces).
    pub fn prolongate(&self, coarse: &NodalField) -> Result<NodalField> {
        if coarse.len() != self.previous_vertex_count {
            return Err(Error::InvalidArgument(format!(
                "field has {} values, previous mesh had {} vertices",
                coarse.len(),
                self.previous_vertex_count
            )));
        }
        let mut values = coarse.values().to_vec();
        values.reserve(self.new_vertex_parents.len());
        for &(a, b) in &self.new_vertex_parents {
            values.push(0.5 * (values[a] + values[b]));
        }
        Ok(NodalField::new(values))
    }

    /// Index of an element containing `x` (boundary points included), by linear
    /// search.
    pub fn locate(&self, x: crate::Point) -> Option<usize> {
        (0..self.num_elements()).find(|&t| {
            let g = self.geometry(t);
            let l = barycentric(&g, x);
            l.iter().all(|&c| c >= -1e-12)
        })
    }
}

/// Barycentric coordinates of `x` with respect to element geometry `g`.
pub fn barycentric(g: &ElementGeometry, x: Point) -> [f64; 3] {
    let v0 = g.vertices[0];
    let mut l = [0.0; 3];
    for i in 1..3 {
        l[i] = g.grads[i][0] * (x[0] - v0[0]) + g.grads[i][1] * (x[1] - v0[1]);
    }
    l[0] = 1.0 - l[1] - l[2];
    l
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_square_counts() {
        let m = Mesh::unit_square(1).unwrap();
        assert_eq!((m.num_elements(), m.num_vertices()), (2, 4));
        let m = Mesh::unit_square(4).unwrap();
        assert_eq!((m.num_elements(), m.num_vertices()), (32, 25));
        assert!(Mesh::unit_square(0).is_err());
        m.check_conformity().unwrap();
        assert_eq!(m.boundary_edges().len(), 16);
    }

    #[test]
    fn n2_elements_are_congruent_right_triangles() {
        let m = Mesh::unit_square(2).unwrap();
        for t in 0..m.num_elements() {
            assert!((m.area(t) - 0.125).abs() < 1e-15);
            let mut a = m.geometry(t).angles();
            a.sort_by(f64::total_cmp);
            assert!((a[0] - 45.0).abs() < 1e-12);
            // the newest vertex carries the right angle
            assert!((m.geometry(t).angles()[0] - 90.0).abs() < 1e-12);
        }
    }

    #[test]
    fn single_mark_bisects_neighbour_by_closure() {
        let m = Mesh::unit_square(1).unwrap();
        let (fine, refined) = m.refine(&[0].into_iter().collect(), 1).unwrap();
        assert_eq!(fine.num_elements(), 4);
        assert_eq!(fine.num_vertices(), 5);
        assert_eq!(refined.len(), 2);
        assert_eq!(fine.vertices()[4], [0.5, 0.5]);
        fine.check_conformity().unwrap();
        assert_eq!(fine.new_vertex_parents(), &[(0, 3)]);
        for t in 0..4 {
            assert_eq!(fine.generation(t), 1);
            assert!((fine.area(t) - 0.25).abs() < 1e-15);
        }
        // left child first
        assert_eq!(fine.elements()[0], [4, 1, 3]);
        assert_eq!(fine.parent(0), 0);
        assert_eq!(fine.parent(3), 1);
    }

    #[test]
    fn empty_marking_is_identity() {
        let m = Mesh::unit_square(3).unwrap();
        let (fine, refined) = m.refine(&ElementSet::new(), 1).unwrap();
        assert!(refined.is_empty());
        assert_eq!(fine.elements(), m.elements());
        assert_eq!(fine.vertices(), m.vertices());
    }

    #[test]
    fn uniform_refinements_of_one_cell() {
        let m = Mesh::unit_square(1).unwrap();
        let m1 = m.refine_uniform(1).unwrap();
        assert_eq!(m1.num_elements(), 4);
        let m2 = m1.refine_uniform(1).unwrap();
        assert_eq!(m2.num_elements(), 8);
        m2.check_conformity().unwrap();
        assert!((m2.shape_regularity() - 45.0).abs() < 1e-12);
        let m4 = m.refine_uniform(4).unwrap();
        assert_eq!(m4.num_elements(), 32);
    }

    #[test]
    fn r_rounds_give_at_least_two_to_the_r_children() {
        let m = Mesh::unit_square(2).unwrap();
        let (fine, _) = m.refine(&[3].into_iter().collect(), 3).unwrap();
        fine.check_conformity().unwrap();
        let children: Vec<usize> = (0..fine.num_elements()).filter(|&t| fine.parent(t) == 3).collect();
        assert!(children.len() >= 8);
        for &c in &children {
            assert!(fine.area(c) <= m.area(3) / 8.0 + 1e-15);
        }
    }

    #[test]
    fn bad_arguments() {
        let m = Mesh::unit_square(1).unwrap();
        assert!(m.refine(&[0].into_iter().collect(), 0).is_err());
        assert!(m.refine(&[5].into_iter().collect(), 1).is_err());
        let cw = Mesh::new(vec![[0.0, 0.0], [0.0, 1.0], [1.0, 0.0]], vec![[0, 1, 2]]);
        assert!(cw.is_err());
    }

    #[test]
    fn size_function_on_uniform_and_refined_meshes() {
        let m = Mesh::unit_square(2).unwrap();
        let h = m.mesh_size_function();
        for &v in h.values() {
            assert!((v - 0.125f64.sqrt()).abs() < 1e-15);
        }
        assert_eq!(m.grading_norm(), 0.0);

        // 4-triangle mesh from one cell: every element has area 1/4.
        let m = Mesh::unit_square(1).unwrap();
        let (fine, _) = m.refine(&[0].into_iter().collect(), 1).unwrap();
        let h = fine.mesh_size_function();
        for &v in h.values() {
            assert!((v - 0.5).abs() < 1e-15);
        }

        // Local refinement of the n=2 mesh: vertices touching both fine and
        // coarse elements carry intermediate values.
        let m = Mesh::unit_square(2).unwrap();
        let (fine, _) = m.refine(&[0].into_iter().collect(), 1).unwrap();
        let h = fine.mesh_size_function();
        let coarse = 0.125f64.sqrt();
        let finer = 0.0625f64.sqrt();
        let mut intermediate = 0;
        for v in 0..fine.num_vertices() {
            let x = h.values()[v];
            assert!(x >= finer - 1e-15 && x <= coarse + 1e-15);
            if x > finer + 1e-12 && x < coarse - 1e-12 {
                intermediate += 1;
            }
        }
        assert!(intermediate > 0);
        assert!(fine.grading_norm() > 0.0);
    }

    #[test]
    fn equilateral_min_angle() {
        let s = 3f64.sqrt() / 2.0;
        let m = Mesh::new(vec![[0.0, 0.0], [1.0, 0.0], [0.5, s]], vec![[0, 1, 2]]).unwrap();
        assert!((m.shape_regularity() - 60.0).abs() < 1e-12);
    }

    #[test]
    fn prolongation_reproduces_linear_functions() {
        let m = Mesh::unit_square(2).unwrap();
        let g = |x: Point| 3.0 * x[0] - 2.0 * x[1] + 0.5;
        let coarse = NodalField::new(m.vertices().iter().map(|&x| g(x)).collect());
        let (fine, _) = m.refine(&[1, 6].into_iter().collect(), 2).unwrap();
        let f = fine.prolongate(&coarse).unwrap();
        for (v, &x) in fine.vertices().iter().enumerate() {
            assert!((f.values()[v] - g(x)).abs() < 1e-14);
        }
    }

    #[test]
    fn boundary_vertices_follow_refinement() {
        let m = Mesh::unit_square(1).unwrap().refine_uniform(3).unwrap();
        for (v, x) in m.vertices().iter().enumerate() {
            let on = x[0] == 0.0 || x[0] == 1.0 || x[1] == 0.0 || x[1] == 1.0;
            assert_eq!(m.is_boundary_vertex(v), on, "vertex {v} at {x:?}");
        }
    }
}
