//! The doubled linear finite element space on the two fictitious domains.
//!
//! Every vertex of an element covering side `i` carries a side-`i` degree of
//! freedom; vertices of cut elements therefore carry one DOF per side. DOFs
//! are numbered side 1 first, then side 2, each in mesh vertex order, so the
//! numbering is a pure function of (mesh, classification).

use crate::geometry::{Classification, Side};
use crate::mesh::Mesh;
use crate::vec2::Vec2;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SpaceError {
    #[error("element {0} carries no side-{1} basis")]
    MissingSide(usize, Side),
    #[error("field length {0} does not match dof count {1}")]
    LengthMismatch(usize, usize),
}

/// Degree-of-freedom map for the paired space.
#[derive(Clone, Debug)]
pub struct DofMap {
    /// `node_dof[side][vertex]`: global DOF index, if the vertex belongs to
    /// that side's fictitious domain.
    node_dof: [Vec<Option<u32>>; 2],
    /// Reverse map: DOF -> (side, vertex).
    dof_node: Vec<(Side, u32)>,
    /// Global DOF triples per (element, side) where present.
    element_dofs: Vec<[Option<[u32; 3]>; 2]>,
    /// DOFs whose vertex lies on the outer boundary, ascending.
    pub dirichlet_dofs: Vec<u32>,
    pub n_dofs: usize,
}

impl DofMap {
    pub fn dof(&self, side: Side, vertex: usize) -> Option<u32> {
        self.node_dof[side.index()][vertex]
    }

    pub fn node(&self, dof: u32) -> (Side, u32) {
        self.dof_node[dof as usize]
    }

    pub fn element_dofs(&self, element: usize, side: Side) -> Option<[u32; 3]> {
        self.element_dofs[element][side.index()]
    }

    /// All DOFs of one side, ascending (side 1 occupies a contiguous prefix).
    pub fn side_dofs(&self, side: Side) -> impl Iterator<Item = u32> + '_ {
        let s = side;
        self.dof_node
            .iter()
            .enumerate()
            .filter(move |(_, (sd, _))| *sd == s)
            .map(|(d, _)| d as u32)
    }

    pub fn n_side_dofs(&self, side: Side) -> usize {
        self.dof_node.iter().filter(|(s, _)| *s == side).count()
    }
}

/// Enumerates DOFs: for each side, every vertex incident to an element
/// covering that side, in vertex order.
pub fn build_dofmap(mesh: &Mesh, classification: &Classification) -> DofMap {
    let nv = mesh.n_vertices();
    let mut node_dof = [vec![None; nv], vec![None; nv]];
    let mut dof_node = Vec::new();
    let mut n = 0u32;
    for side in Side::BOTH {
        let mut used = vec![false; nv];
        for &t in classification.covers(side) {
            for &v in &mesh.triangles[t] {
                used[v] = true;
            }
        }
        for (v, &u) in used.iter().enumerate() {
            if u {
                node_dof[side.index()][v] = Some(n);
                dof_node.push((side, v as u32));
                n += 1;
            }
        }
    }
    let mut element_dofs = vec![[None, None]; mesh.n_triangles()];
    for side in Side::BOTH {
        for &t in classification.covers(side) {
            let tri = mesh.triangles[t];
            element_dofs[t][side.index()] = Some([
                node_dof[side.index()][tri[0]].unwrap(),
                node_dof[side.index()][tri[1]].unwrap(),
                node_dof[side.index()][tri[2]].unwrap(),
            ]);
        }
    }
    let mut dirichlet_dofs = Vec::new();
    for (d, &(_, v)) in dof_node.iter().enumerate() {
        if mesh.boundary_vertex[v as usize] {
            dirichlet_dofs.push(d as u32);
        }
    }
    DofMap {
        node_dof,
        dof_node,
        element_dofs,
        dirichlet_dofs,
        n_dofs: n as usize,
    }
}

/// Coefficient vector over the paired space.
#[derive(Clone, Debug)]
pub struct PairedField {
    pub coefficients: Vec<f64>,
}

impl PairedField {
    pub fn zeros(dofmap: &DofMap) -> Self {
        PairedField {
            coefficients: vec![0.0; dofmap.n_dofs],
        }
    }

    pub fn from_coefficients(dofmap: &DofMap, coefficients: Vec<f64>) -> Result<Self, SpaceError> {
        if coefficients.len() != dofmap.n_dofs {
            return Err(SpaceError::LengthMismatch(coefficients.len(), dofmap.n_dofs));
        }
        Ok(PairedField { coefficients })
    }
}

/// Constant P1 gradients of the three barycentric basis functions on a
/// triangle, plus the barycentric coordinates of a point.
pub fn p1_gradients(p: &[Vec2; 3]) -> [Vec2; 3] {
    let area2 = (p[1] - p[0]).cross(p[2] - p[0]);
    [
        (p[2] - p[1]).perp() / area2,
        (p[0] - p[2]).perp() / area2,
        (p[1] - p[0]).perp() / area2,
    ]
}

pub fn barycentric(p: &[Vec2; 3], x: Vec2) -> [f64; 3] {
    let area2 = (p[1] - p[0]).cross(p[2] - p[0]);
    let l0 = (p[2] - p[1]).cross(x - p[1]) / area2;
    let l1 = (p[0] - p[2]).cross(x - p[2]) / area2;
    [l0, l1, 1.0 - l0 - l1]
}

/// Value and (constant) gradient of one side of a paired field at a point
/// inside an element.
pub fn eval(
    mesh: &Mesh,
    dofmap: &DofMap,
    field: &PairedField,
    element: usize,
    side: Side,
    x: Vec2,
) -> Result<(f64, Vec2), SpaceError> {
    let dofs = dofmap
        .element_dofs(element, side)
        .ok_or(SpaceError::MissingSide(element, side))?;
    let p = mesh.triangle_points(element);
    let lam = barycentric(&p, x);
    let grads = p1_gradients(&p);
    let mut value = 0.0;
    let mut grad = Vec2::ZERO;
    for k in 0..3 {
        let c = field.coefficients[dofs[k] as usize];
        value += c * lam[k];
        grad += grads[k] * c;
    }
    Ok((value, grad))
}
