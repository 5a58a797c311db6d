//! Conforming triangulations of the square `(-1,1)^2` and their refinement.
//!
//! Meshes are built independently of any interface. Refinement is
//! longest-edge (hypotenuse) bisection with recursive conforming closure,
//! which maps right isoceles triangles onto similar right isoceles children,
//! so every mesh descended from [`uniform_mesh`] keeps a 45-degree minimum
//! angle and `h_T / rho_T = 1 + sqrt(2)`.

use crate::vec2::Vec2;
use std::collections::HashMap;
use std::io::Write;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("uniform_mesh requires n >= 2, got {0}")]
    TooCoarse(usize),
    #[error("triangle {0} is degenerate (signed area {1:.3e} <= 0)")]
    DegenerateTriangle(usize, f64),
    #[error("edge ({0},{1}) has {2} incident triangles; mesh is not conforming")]
    NonConforming(usize, usize, usize),
    #[error("triangle {0} violates shape regularity: h/rho = {1:.3} > {2}")]
    ShapeRegularity(usize, f64, f64),
    #[error("triangle index {0} out of range ({1} triangles)")]
    BadIndex(usize, usize),
}

/// An edge of the triangulation with its incident triangles.
#[derive(Clone, Copy, Debug)]
pub struct Edge {
    /// Endpoint vertex indices, `v[0] < v[1]`.
    pub v: [usize; 2],
    /// Incident triangles; `tris[1]` is `None` on the boundary.
    pub tris: [Option<usize>; 2],
}

impl Edge {
    pub fn is_boundary(&self) -> bool {
        self.tris[1].is_none()
    }
}

/// Conforming triangulation with adjacency and refinement bookkeeping.
///
/// Immutable after construction; [`bisect`] returns a new mesh.
#[derive(Clone, Debug)]
pub struct Mesh {
    pub vertices: Vec<Vec2>,
    /// Vertex index triples, counterclockwise.
    pub triangles: Vec<[usize; 3]>,
    pub edges: Vec<Edge>,
    /// Edge ids per triangle; local edge `k` joins vertices `k` and `(k+1)%3`.
    pub triangle_edges: Vec<[usize; 3]>,
    pub boundary_vertex: Vec<bool>,
    /// Local index of the edge split by bisection (the hypotenuse for
    /// meshes descended from `uniform_mesh`).
    pub refinement_edge: Vec<u8>,
}

/// Per-element size quantities.
#[derive(Clone, Copy, Debug)]
pub struct ElementGeometry {
    /// Diameter (longest edge).
    pub h: f64,
    /// Diameter of the inscribed circle, `4*area/perimeter`.
    pub rho: f64,
    pub area: f64,
    pub vertices: [Vec2; 3],
}

/// Default bound for `h_T / rho_T`; right isoceles triangles give
/// `1 + sqrt(2)` which is about 2.414.
pub const DEFAULT_SHAPE_SIGMA: f64 = 4.0;

impl Mesh {
    /// Assembles adjacency from raw vertices/triangles and validates the
    /// conformity and orientation invariants.
    pub fn build(
        vertices: Vec<Vec2>,
        triangles: Vec<[usize; 3]>,
        refinement_edge: Vec<u8>,
    ) -> Result<Mesh, MeshError> {
        let mut edge_ids: HashMap<(usize, usize), usize> = HashMap::new();
        let mut edges: Vec<Edge> = Vec::new();
        let mut triangle_edges = vec![[usize::MAX; 3]; triangles.len()];
        for (t, tri) in triangles.iter().enumerate() {
            let v = [vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]];
            let area2 = (v[1] - v[0]).cross(v[2] - v[0]);
            if area2 <= 0.0 {
                return Err(MeshError::DegenerateTriangle(t, 0.5 * area2));
            }
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                let key = (a.min(b), a.max(b));
                let id = *edge_ids.entry(key).or_insert_with(|| {
                    edges.push(Edge {
                        v: [key.0, key.1],
                        tris: [None, None],
                    });
                    edges.len() - 1
                });
                triangle_edges[t][k] = id;
                let e = &mut edges[id];
                if e.tris[0].is_none() {
                    e.tris[0] = Some(t);
                } else if e.tris[1].is_none() {
                    e.tris[1] = Some(t);
                } else {
                    return Err(MeshError::NonConforming(key.0, key.1, 3));
                }
            }
        }
        let mut boundary_vertex = vec![false; vertices.len()];
        for e in &edges {
            if e.is_boundary() {
                boundary_vertex[e.v[0]] = true;
                boundary_vertex[e.v[1]] = true;
            }
        }
        let mesh = Mesh {
            vertices,
            triangles,
            edges,
            triangle_edges,
            boundary_vertex,
            refinement_edge,
        };
        mesh.check_shape_regularity(DEFAULT_SHAPE_SIGMA)?;
        Ok(mesh)
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn triangle_points(&self, t: usize) -> [Vec2; 3] {
        let tri = self.triangles[t];
        [
            self.vertices[tri[0]],
            self.vertices[tri[1]],
            self.vertices[tri[2]],
        ]
    }

    pub fn centroid(&self, t: usize) -> Vec2 {
        let p = self.triangle_points(t);
        (p[0] + p[1] + p[2]) / 3.0
    }

    /// Neighbor of `t` across its local edge `k`, if any.
    pub fn neighbor(&self, t: usize, k: usize) -> Option<usize> {
        let e = &self.edges[self.triangle_edges[t][k]];
        match e.tris {
            [Some(a), b] if a == t => b,
            [a, Some(b)] if b == t => a,
            _ => None,
        }
    }

    pub fn check_shape_regularity(&self, sigma: f64) -> Result<(), MeshError> {
        for t in 0..self.n_triangles() {
            let g = element_geometry(self, t)?;
            if g.h / g.rho > sigma {
                return Err(MeshError::ShapeRegularity(t, g.h / g.rho, sigma));
            }
        }
        Ok(())
    }

    /// Audits edge incidence counts; returns the number of hanging nodes
    /// found (0 for a conforming mesh).
    pub fn conformity_defects(&self) -> usize {
        // A hanging node shows up as an edge of some triangle whose midpoint
        // is a vertex of the mesh but which is listed with a single incident
        // triangle while lying in the interior. Since `build` already forces
        // every edge to have 1 or 2 incident triangles, it suffices to check
        // that single-triangle edges lie on the boundary of the square.
        let mut defects = 0;
        for e in &self.edges {
            if e.is_boundary() {
                let a = self.vertices[e.v[0]];
                let b = self.vertices[e.v[1]];
                let on_boundary = |p: Vec2| {
                    (p.x.abs() - 1.0).abs() < 1e-12 || (p.y.abs() - 1.0).abs() < 1e-12
                };
                if !(on_boundary(a) && on_boundary(b)) {
                    defects += 1;
                }
            }
        }
        defects
    }

    /// Plain-text dump: one vertex per line `x y`, then one triangle per
    /// line `i j k` (0-based).
    pub fn write_dump<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{} {}", self.n_vertices(), self.n_triangles())?;
        for v in &self.vertices {
            writeln!(w, "{} {}", v.x, v.y)?;
        }
        for t in &self.triangles {
            writeln!(w, "{} {} {}", t[0], t[1], t[2])?;
        }
        Ok(())
    }
}

/// Uniform mesh of `(-1,1)^2`: `n x n` squares, each split into two right
/// isoceles triangles along the lower-left to upper-right diagonal.
/// Mesh size `h = 2/n`; `(n+1)^2` vertices and `2 n^2` triangles.
pub fn uniform_mesh(n: usize) -> Result<Mesh, MeshError> {
    if n < 2 {
        return Err(MeshError::TooCoarse(n));
    }
    let step = 2.0 / n as f64;
    let vid = |i: usize, j: usize| j * (n + 1) + i;
    let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            // single-expression coordinates so repeated runs are bit-identical
            vertices.push(Vec2::new(i as f64 * step - 1.0, j as f64 * step - 1.0));
        }
    }
    let mut triangles = Vec::with_capacity(2 * n * n);
    let mut refinement_edge = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            let (a, b, c, d) = (vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1));
            // lower triangle: hypotenuse c->a is local edge 2
            triangles.push([a, b, c]);
            refinement_edge.push(2);
            // upper triangle: hypotenuse a->c is local edge 0
            triangles.push([a, c, d]);
            refinement_edge.push(0);
        }
    }
    Mesh::build(vertices, triangles, refinement_edge)
}

pub fn element_geometry(mesh: &Mesh, t: usize) -> Result<ElementGeometry, MeshError> {
    if t >= mesh.n_triangles() {
        return Err(MeshError::BadIndex(t, mesh.n_triangles()));
    }
    let p = mesh.triangle_points(t);
    let area = 0.5 * (p[1] - p[0]).cross(p[2] - p[0]);
    if area <= 0.0 {
        return Err(MeshError::DegenerateTriangle(t, area));
    }
    let l = [p[0].dist(p[1]), p[1].dist(p[2]), p[2].dist(p[0])];
    let h = l[0].max(l[1]).max(l[2]);
    let perimeter = l[0] + l[1] + l[2];
    Ok(ElementGeometry {
        h,
        rho: 4.0 * area / perimeter,
        area,
        vertices: p,
    })
}

/// Longest-edge bisection of `marked` triangles plus recursive conforming
/// closure. Children of a right isoceles triangle are similar right isoceles
/// triangles with diameter `h/sqrt(2)`.
pub fn bisect(mesh: &Mesh, marked: &[usize]) -> Result<Mesh, MeshError> {
    for &t in marked {
        if t >= mesh.n_triangles() {
            return Err(MeshError::BadIndex(t, mesh.n_triangles()));
        }
    }
    let mut state = BisectState {
        vertices: mesh.vertices.clone(),
        tris: mesh.triangles.clone(),
        refs: mesh.refinement_edge.clone(),
        alive: vec![true; mesh.n_triangles()],
        edge_tris: HashMap::new(),
        midpoints: HashMap::new(),
    };
    for (t, tri) in state.tris.iter().enumerate() {
        for k in 0..3 {
            let key = ekey(tri[k], tri[(k + 1) % 3]);
            state.edge_tris.entry(key).or_default().push(t);
        }
    }
    let mut order: Vec<usize> = marked.to_vec();
    order.sort_unstable();
    order.dedup();
    for t in order {
        if state.alive[t] {
            state.split(t);
        }
    }
    let mut triangles = Vec::new();
    let mut refinement_edge = Vec::new();
    for t in 0..state.tris.len() {
        if state.alive[t] {
            triangles.push(state.tris[t]);
            refinement_edge.push(state.refs[t]);
        }
    }
    Mesh::build(state.vertices, triangles, refinement_edge)
}

fn ekey(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

struct BisectState {
    vertices: Vec<Vec2>,
    tris: Vec<[usize; 3]>,
    refs: Vec<u8>,
    alive: Vec<bool>,
    edge_tris: HashMap<(usize, usize), Vec<usize>>,
    midpoints: HashMap<(usize, usize), usize>,
}

impl BisectState {
    fn ref_edge(&self, t: usize) -> (usize, usize) {
        let k = self.refs[t] as usize;
        (self.tris[t][k], self.tris[t][(k + 1) % 3])
    }

    fn neighbor_across(&self, t: usize, key: (usize, usize)) -> Option<usize> {
        self.edge_tris
            .get(&key)?
            .iter()
            .copied()
            .find(|&o| o != t && self.alive[o])
    }

    fn split(&mut self, t0: usize) {
        // Iterative closure: descend through neighbors whose refinement edge
        // differs from the shared edge, then split pairs on the way back.
        let mut stack = vec![t0];
        while let Some(&t) = stack.last() {
            if !self.alive[t] {
                stack.pop();
                continue;
            }
            let key = ekey(self.ref_edge(t).0, self.ref_edge(t).1);
            match self.neighbor_across(t, key) {
                Some(nb) if ekey(self.ref_edge(nb).0, self.ref_edge(nb).1) != key => {
                    // incompatible neighbor must be split first
                    stack.push(nb);
                }
                nb => {
                    self.split_pair(t, nb);
                    stack.pop();
                }
            }
        }
    }

    /// Splits `t` (and its compatible neighbor, if present) along the shared
    /// refinement edge.
    fn split_pair(&mut self, t: usize, nb: Option<usize>) {
        let (a, b) = self.ref_edge(t);
        let key = ekey(a, b);
        let m = *self.midpoints.entry(key).or_insert_with(|| {
            let p = (self.vertices[a] + self.vertices[b]) * 0.5;
            self.vertices.push(p);
            self.vertices.len() - 1
        });
        self.split_one(t, m);
        if let Some(n) = nb {
            debug_assert_eq!(ekey(self.ref_edge(n).0, self.ref_edge(n).1), key);
            self.split_one(n, m);
        }
    }

    /// Replaces triangle `t` by its two bisection children. With the
    /// refinement edge rotated to (w0,w1) and peak w2, the children are
    /// (w2,w0,m) and (w1,w2,m); both keep counterclockwise orientation and
    /// their refinement edges are the parent legs (w2,w0) and (w1,w2).
    fn split_one(&mut self, t: usize, m: usize) {
        let k = self.refs[t] as usize;
        let tri = self.tris[t];
        let (w0, w1, w2) = (tri[k], tri[(k + 1) % 3], tri[(k + 2) % 3]);
        self.remove_from_edges(t);
        self.alive[t] = false;
        for child in [[w2, w0, m], [w1, w2, m]] {
            let id = self.tris.len();
            self.tris.push(child);
            self.refs.push(0);
            self.alive.push(true);
            for k in 0..3 {
                let key = ekey(child[k], child[(k + 1) % 3]);
                self.edge_tris.entry(key).or_default().push(id);
            }
        }
    }

    fn remove_from_edges(&mut self, t: usize) {
        let tri = self.tris[t];
        for k in 0..3 {
            let key = ekey(tri[k], tri[(k + 1) % 3]);
            if let Some(list) = self.edge_tris.get_mut(&key) {
                list.retain(|&o| o != t);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const RIGHT_ISO_RATIO: f64 = 1.0 + std::f64::consts::SQRT_2;

    #[test]
    fn uniform_mesh_counts() {
        let m = uniform_mesh(2).unwrap();
        assert_eq!(m.n_vertices(), 9);
        assert_eq!(m.n_triangles(), 8);
        let g = element_geometry(&m, 0).unwrap();
        assert!((g.h - std::f64::consts::SQRT_2).abs() < 1e-15); // h_T = sqrt(2)*1.0

        let m = uniform_mesh(16).unwrap();
        assert_eq!(m.n_vertices(), 289);
        assert_eq!(m.n_triangles(), 512);
        // mesh size 2/16
        assert!((m.vertices[1].x - m.vertices[0].x - 0.125).abs() < 1e-15);
    }

    #[test]
    fn uniform_mesh_rejects_small_n() {
        assert!(uniform_mesh(0).is_err());
        assert!(uniform_mesh(1).is_err());
    }

    #[test]
    fn uniform_mesh_shape_ratio() {
        let m = uniform_mesh(3).unwrap();
        for t in 0..m.n_triangles() {
            let g = element_geometry(&m, t).unwrap();
            assert!((g.h / g.rho - RIGHT_ISO_RATIO).abs() < 1e-12);
        }
    }

    #[test]
    fn element_geometry_unit_right_triangle() {
        let m = Mesh::build(
            vec![Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)],
            vec![[0, 1, 2]],
            vec![1],
        )
        .unwrap();
        let g = element_geometry(&m, 0).unwrap();
        assert!((g.h - 2f64.sqrt()).abs() < 1e-15);
        assert!((g.area - 0.5).abs() < 1e-15);
        assert!((g.rho - (2.0 - 2f64.sqrt())).abs() < 1e-12);
    }

    #[test]
    fn element_geometry_scales_linearly() {
        let m = Mesh::build(
            vec![Vec2::new(0.0, 0.0), Vec2::new(2.0, 0.0), Vec2::new(0.0, 2.0)],
            vec![[0, 1, 2]],
            vec![1],
        )
        .unwrap();
        let g = element_geometry(&m, 0).unwrap();
        assert!((g.h - 2.0 * 2f64.sqrt()).abs() < 1e-15);
        assert!((g.area - 2.0).abs() < 1e-15);
        assert!((g.rho - 2.0 * (2.0 - 2f64.sqrt())).abs() < 1e-12);
    }

    #[test]
    fn element_geometry_equilateral() {
        let s3 = 3f64.sqrt();
        let m = Mesh::build(
            vec![
                Vec2::new(0.0, 0.0),
                Vec2::new(1.0, 0.0),
                Vec2::new(0.5, s3 / 2.0),
            ],
            vec![[0, 1, 2]],
            vec![0],
        )
        .unwrap();
        let g = element_geometry(&m, 0).unwrap();
        assert!((g.h / g.rho - s3).abs() < 1e-12);
    }

    #[test]
    fn bisect_empty_marking_is_identity() {
        let m = uniform_mesh(2).unwrap();
        let m2 = bisect(&m, &[]).unwrap();
        assert_eq!(m2.n_triangles(), 8);
        assert_eq!(m2.n_vertices(), 9);
    }

    #[test]
    fn bisect_single_triangle_splits_pair() {
        let m = uniform_mesh(2).unwrap();
        let m2 = bisect(&m, &[0]).unwrap();
        // the marked triangle and its hypotenuse neighbor both split: 8 -> 10
        assert_eq!(m2.n_triangles(), 10);
        assert_eq!(m2.conformity_defects(), 0);
    }

    #[test]
    fn bisect_all_doubles_and_shrinks() {
        for n in [2usize, 4] {
            let m = uniform_mesh(n).unwrap();
            let all: Vec<usize> = (0..m.n_triangles()).collect();
            let m2 = bisect(&m, &all).unwrap();
            assert_eq!(m2.n_triangles(), 4 * n * n);
            assert_eq!(m2.conformity_defects(), 0);
            let h_parent = element_geometry(&m, 0).unwrap().h;
            for t in 0..m2.n_triangles() {
                let g = element_geometry(&m2, t).unwrap();
                assert!((g.h - h_parent / 2f64.sqrt()).abs() < 1e-13);
                assert!((g.h / g.rho - RIGHT_ISO_RATIO).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn repeated_bisection_stays_conforming_and_right_isoceles() {
        let mut m = uniform_mesh(4).unwrap();
        // deterministic pseudo-random marking
        let mut seed = 12345u64;
        for _ in 0..6 {
            let mut marked = Vec::new();
            for t in 0..m.n_triangles() {
                seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                if (seed >> 33) % 5 == 0 {
                    marked.push(t);
                }
            }
            m = bisect(&m, &marked).unwrap();
            assert_eq!(m.conformity_defects(), 0);
            for t in 0..m.n_triangles() {
                let g = element_geometry(&m, t).unwrap();
                assert!((g.h / g.rho - RIGHT_ISO_RATIO).abs() < 1e-12);
            }
        }
        // closure is idempotent: an empty second pass changes nothing
        let again = bisect(&m, &[]).unwrap();
        assert_eq!(again.n_triangles(), m.n_triangles());
    }

    #[test]
    fn uniform_mesh_deterministic() {
        let a = uniform_mesh(7).unwrap();
        let b = uniform_mesh(7).unwrap();
        for (u, v) in a.vertices.iter().zip(&b.vertices) {
            assert_eq!(u.x.to_bits(), v.x.to_bits());
            assert_eq!(u.y.to_bits(), v.y.to_bits());
        }
    }

    #[test]
    fn dump_format() {
        let m = uniform_mesh(2).unwrap();
        let mut buf = Vec::new();
        m.write_dump(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "9 8");
        assert_eq!(lines.next().unwrap(), "-1 -1");
    }
}
