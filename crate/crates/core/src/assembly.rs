//! Assembly of the Nitsche bilinear form and right-hand side.
//!
//! The form couples the two fictitious-domain spaces on the interface:
//!
//! ```text
//! a(u,v) = sum_i (beta grad u_i, grad v_i)_{Omega_i}
//!          - <[u], {beta dn v}> - <[v], {beta dn u}> + h^-1 <gamma [u], [v]>
//! L(v)   = sum_i (f, v_i)_{Omega_i}
//!          - <q, {beta dn v}> + h^-1 <gamma q, [v]> + <g, {v}*>
//! ```
//!
//! with `[w] = w1 - w2`, `{w} = k1 w1 + k2 w2`, `{w}* = k2 w1 + k1 w2` and
//! the robust weights/stability parameter carried by each [`CutInfo`]. The
//! `h^-1` is the local element diameter. The `q` penalty term carries the
//! same `h^-1` as the bilinear form by default, which keeps the method
//! consistent for nonzero value jumps; the literal variant without it is
//! available behind [`QPenaltyScaling`].

use crate::geometry::{CutGeometry, ElementKind, Interface, Side};
use crate::geometry::quadrature::{polygon_rule, segment_rule, triangle_rule};
use crate::mesh::{element_geometry, Mesh};
use crate::space::{barycentric, p1_gradients, DofMap};
use crate::vec2::Vec2;
use std::sync::Arc;
use thiserror::Error;

pub type ScalarField = Arc<dyn Fn(Vec2) -> f64 + Send + Sync>;
pub type VectorField = Arc<dyn Fn(Vec2) -> Vec2 + Send + Sync>;

pub fn scalar_field(f: impl Fn(Vec2) -> f64 + Send + Sync + 'static) -> ScalarField {
    Arc::new(f)
}

pub fn vector_field(f: impl Fn(Vec2) -> Vec2 + Send + Sync + 'static) -> VectorField {
    Arc::new(f)
}

#[derive(Debug, Error)]
pub enum AssembleError {
    #[error("assembled value is not finite (element {0})")]
    NonFinite(usize),
    #[error("element {0} lacks side-{1} dofs")]
    MissingDofs(usize, Side),
    #[error(transparent)]
    Geometry(#[from] crate::geometry::GeometryError),
}

/// Exact solution branches, each evaluable on the whole domain (they play
/// the role of the smooth extensions of the two restrictions).
#[derive(Clone)]
pub struct ExactSolution {
    pub u: [ScalarField; 2],
    pub grad: [VectorField; 2],
}

impl ExactSolution {
    pub fn u(&self, side: Side, p: Vec2) -> f64 {
        (self.u[side.index()])(p)
    }

    pub fn grad(&self, side: Side, p: Vec2) -> Vec2 {
        (self.grad[side.index()])(p)
    }
}

/// Data of one interface problem: coefficients, source, jumps, boundary
/// values, and (optionally) the exact solution branches.
#[derive(Clone)]
pub struct ProblemSpec {
    pub name: String,
    pub interface: Interface,
    pub beta: [ScalarField; 2],
    /// Source branches; the side selects which branch is integrated.
    pub f: [ScalarField; 2],
    /// Value jump `u1 - u2` on the interface.
    pub q: ScalarField,
    /// Flux jump `beta1 dn u1 - beta2 dn u2` on the interface.
    pub g: ScalarField,
    /// Boundary values per side (side 2 owns the outer boundary unless the
    /// interface reaches it).
    pub dirichlet: [ScalarField; 2],
    pub exact: Option<ExactSolution>,
}

impl ProblemSpec {
    pub fn beta(&self, side: Side, p: Vec2) -> f64 {
        (self.beta[side.index()])(p)
    }

    pub fn f(&self, side: Side, p: Vec2) -> f64 {
        (self.f[side.index()])(p)
    }

    pub fn q(&self, p: Vec2) -> f64 {
        (self.q)(p)
    }

    pub fn g(&self, p: Vec2) -> f64 {
        (self.g)(p)
    }

    pub fn dirichlet(&self, side: Side, p: Vec2) -> f64 {
        (self.dirichlet[side.index()])(p)
    }

    /// Builds a problem from exact branches: q, g and boundary data are
    /// derived from the branches and the interface normal.
    #[allow(clippy::too_many_arguments)]
    pub fn from_exact(
        name: impl Into<String>,
        interface: Interface,
        beta1: ScalarField,
        beta2: ScalarField,
        u1: ScalarField,
        u2: ScalarField,
        grad_u1: VectorField,
        grad_u2: VectorField,
        f1: ScalarField,
        f2: ScalarField,
    ) -> ProblemSpec {
        let q = {
            let (u1, u2) = (u1.clone(), u2.clone());
            scalar_field(move |p| u1(p) - u2(p))
        };
        let g = {
            let (b1, b2) = (beta1.clone(), beta2.clone());
            let (g1, g2) = (grad_u1.clone(), grad_u2.clone());
            let iface = interface.clone();
            scalar_field(move |p| {
                let n = iface.grad_phi(p).normalized();
                b1(p) * g1(p).dot(n) - b2(p) * g2(p).dot(n)
            })
        };
        ProblemSpec {
            name: name.into(),
            interface,
            beta: [beta1, beta2],
            f: [f1, f2],
            q,
            g,
            dirichlet: [u1.clone(), u2.clone()],
            exact: Some(ExactSolution {
                u: [u1, u2],
                grad: [grad_u1, grad_u2],
            }),
        }
    }
}

/// Scaling of the `<gamma q, [v]>` right-hand-side term.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum QPenaltyScaling {
    /// `h^-1 <gamma q, [v]>`, matching the penalty in the bilinear form
    /// (consistent for piecewise-linear exact solutions with q != 0).
    #[default]
    WithHInv,
    /// `<gamma q, [v]>` as printed in the source formula.
    PaperLiteral,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct AssemblyOptions {
    pub q_penalty: QPenaltyScaling,
}

/// Symmetric sparse matrix in compressed row form plus right-hand side.
#[derive(Clone, Debug)]
pub struct SparseSystem {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<u32>,
    pub values: Vec<f64>,
    pub rhs: Vec<f64>,
}

impl SparseSystem {
    pub fn from_triplets(n: usize, mut triplets: Vec<(u32, u32, f64)>, rhs: Vec<f64>) -> Self {
        // stable sort keeps duplicate accumulation order deterministic
        triplets.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        let mut last: Option<(u32, u32)> = None;
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r as usize + 1] = col_idx.len();
                last = Some((r, c));
            }
        }
        // empty rows inherit the previous row end
        for i in 1..=n {
            if row_ptr[i] < row_ptr[i - 1] {
                row_ptr[i] = row_ptr[i - 1];
            }
        }
        SparseSystem {
            n,
            row_ptr,
            col_idx,
            values,
            rhs,
        }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for i in 0..self.n {
            let mut s = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.values[k] * x[self.col_idx[k] as usize];
            }
            y[i] = s;
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        for k in self.row_ptr[i]..self.row_ptr[i + 1] {
            if self.col_idx[k] as usize == j {
                return self.values[k];
            }
        }
        0.0
    }

    /// max |A - A^T| over all stored entries.
    pub fn symmetry_defect(&self) -> f64 {
        let mut defect: f64 = 0.0;
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.col_idx[k] as usize;
                defect = defect.max((self.values[k] - self.get(j, i)).abs());
            }
        }
        defect
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// Assembles the Nitsche system (without boundary-condition elimination;
/// see [`apply_dirichlet`]).
pub fn assemble(
    mesh: &Mesh,
    geom: &CutGeometry,
    dofmap: &DofMap,
    problem: &ProblemSpec,
    options: AssemblyOptions,
) -> Result<SparseSystem, AssembleError> {
    let n = dofmap.n_dofs;
    let mut triplets: Vec<(u32, u32, f64)> = Vec::new();
    let mut rhs = vec![0.0; n];
    let class = &geom.classification;

    // volume terms
    for t in 0..mesh.n_triangles() {
        let pts = mesh.triangle_points(t);
        let grads = p1_gradients(&pts);
        match class.element_kind[t] {
            ElementKind::Cut => {}
            kind => {
                let side = kind.interior_side().unwrap();
                let dofs = dofmap
                    .element_dofs(t, side)
                    .ok_or(AssembleError::MissingDofs(t, side))?;
                let quad = triangle_rule(&pts, 2)?;
                accumulate_volume(
                    &mut triplets,
                    &mut rhs,
                    &quad,
                    &pts,
                    &grads,
                    dofs,
                    |p| problem.beta(side, p),
                    |p| problem.f(side, p),
                );
            }
        }
    }

    // cut elements: clipped volume terms plus interface coupling on chords
    for cut in &geom.cuts {
        let t = cut.element;
        let pts = mesh.triangle_points(t);
        let grads = p1_gradients(&pts);
        let dofs1 = dofmap
            .element_dofs(t, Side::One)
            .ok_or(AssembleError::MissingDofs(t, Side::One))?;
        let dofs2 = dofmap
            .element_dofs(t, Side::Two)
            .ok_or(AssembleError::MissingDofs(t, Side::Two))?;
        for (side, poly, dofs) in [
            (Side::One, &cut.poly1, dofs1),
            (Side::Two, &cut.poly2, dofs2),
        ] {
            let quad = polygon_rule(poly, 2)?;
            accumulate_volume(
                &mut triplets,
                &mut rhs,
                &quad,
                &pts,
                &grads,
                dofs,
                |p| problem.beta(side, p),
                |p| problem.f(side, p),
            );
        }
        let all_dofs = [
            dofs1[0], dofs1[1], dofs1[2], dofs2[0], dofs2[1], dofs2[2],
        ];
        let chord = segment_rule(cut.entry, cut.exit, 2)?;
        for qp in &chord {
            let lam = barycentric(&pts, qp.p);
            let b1 = problem.beta(Side::One, qp.p);
            let b2 = problem.beta(Side::Two, qp.p);
            let dn: [f64; 3] = std::array::from_fn(|k| grads[k].dot(cut.normal));
            // jump, weighted flux average, and conjugate average over the
            // six local dofs (side 1 then side 2)
            let mut jump = [0.0; 6];
            let mut flux = [0.0; 6];
            let mut star = [0.0; 6];
            for k in 0..3 {
                jump[k] = lam[k];
                jump[k + 3] = -lam[k];
                flux[k] = cut.kappa1 * b1 * dn[k];
                flux[k + 3] = cut.kappa2 * b2 * dn[k];
                star[k] = cut.kappa2 * lam[k];
                star[k + 3] = cut.kappa1 * lam[k];
            }
            let pen = cut.gamma / cut.h;
            for a in 0..6 {
                for b in 0..6 {
                    let v = -jump[a] * flux[b] - jump[b] * flux[a] + pen * jump[a] * jump[b];
                    triplets.push((all_dofs[a], all_dofs[b], qp.w * v));
                }
            }
            let qv = problem.q(qp.p);
            let gv = problem.g(qp.p);
            let qpen = match options.q_penalty {
                QPenaltyScaling::WithHInv => pen * qv,
                QPenaltyScaling::PaperLiteral => cut.gamma * qv,
            };
            for a in 0..6 {
                rhs[all_dofs[a] as usize] +=
                    qp.w * (-qv * flux[a] + qpen * jump[a] + gv * star[a]);
            }
        }
    }

    // interface segments that coincide with mesh edges couple the two
    // interior neighbors directly
    for ae in &class.aligned_edges {
        let pts1 = mesh.triangle_points(ae.tri1);
        let pts2 = mesh.triangle_points(ae.tri2);
        let g1 = p1_gradients(&pts1);
        let g2 = p1_gradients(&pts2);
        let dofs1 = dofmap
            .element_dofs(ae.tri1, Side::One)
            .ok_or(AssembleError::MissingDofs(ae.tri1, Side::One))?;
        let dofs2 = dofmap
            .element_dofs(ae.tri2, Side::Two)
            .ok_or(AssembleError::MissingDofs(ae.tri2, Side::Two))?;
        let all_dofs = [
            dofs1[0], dofs1[1], dofs1[2], dofs2[0], dofs2[1], dofs2[2],
        ];
        let h1 = element_geometry(mesh, ae.tri1).map(|g| g.h).unwrap_or(1.0);
        let h2 = element_geometry(mesh, ae.tri2).map(|g| g.h).unwrap_or(1.0);
        let area1 = 0.5 * (pts1[1] - pts1[0]).cross(pts1[2] - pts1[0]);
        let area2 = 0.5 * (pts2[1] - pts2[0]).cross(pts2[2] - pts2[0]);
        let h = h1.max(h2);
        let mid = (ae.a + ae.b) * 0.5;
        let b1m = problem.beta(Side::One, mid);
        let b2m = problem.beta(Side::Two, mid);
        let kappa1 = b2m * area1 / (b2m * area1 + b1m * area2);
        let kappa2 = 1.0 - kappa1;
        let len = ae.a.dist(ae.b);
        let gamma = 2.0 * h * len / (area1 / b1m + area2 / b2m);
        let mut normal = (ae.b - ae.a).perp().normalized();
        if normal.dot(mesh.centroid(ae.tri2) - mesh.centroid(ae.tri1)) < 0.0 {
            normal = -normal;
        }
        let chord = segment_rule(ae.a, ae.b, 2)?;
        for qp in &chord {
            let lam1 = barycentric(&pts1, qp.p);
            let lam2 = barycentric(&pts2, qp.p);
            let b1 = problem.beta(Side::One, qp.p);
            let b2 = problem.beta(Side::Two, qp.p);
            let mut jump = [0.0; 6];
            let mut flux = [0.0; 6];
            let mut star = [0.0; 6];
            for k in 0..3 {
                jump[k] = lam1[k];
                jump[k + 3] = -lam2[k];
                flux[k] = kappa1 * b1 * g1[k].dot(normal);
                flux[k + 3] = kappa2 * b2 * g2[k].dot(normal);
                star[k] = kappa2 * lam1[k];
                star[k + 3] = kappa1 * lam2[k];
            }
            let pen = gamma / h;
            for a in 0..6 {
                for b in 0..6 {
                    let v = -jump[a] * flux[b] - jump[b] * flux[a] + pen * jump[a] * jump[b];
                    triplets.push((all_dofs[a], all_dofs[b], qp.w * v));
                }
            }
            let qv = problem.q(qp.p);
            let gv = problem.g(qp.p);
            let qpen = match options.q_penalty {
                QPenaltyScaling::WithHInv => pen * qv,
                QPenaltyScaling::PaperLiteral => gamma * qv,
            };
            for a in 0..6 {
                rhs[all_dofs[a] as usize] +=
                    qp.w * (-qv * flux[a] + qpen * jump[a] + gv * star[a]);
            }
        }
    }

    for &(r, _, v) in &triplets {
        if !v.is_finite() {
            return Err(AssembleError::NonFinite(r as usize));
        }
    }
    if let Some(i) = rhs.iter().position(|v| !v.is_finite()) {
        return Err(AssembleError::NonFinite(i));
    }
    Ok(SparseSystem::from_triplets(n, triplets, rhs))
}

#[allow(clippy::too_many_arguments)]
fn accumulate_volume(
    triplets: &mut Vec<(u32, u32, f64)>,
    rhs: &mut [f64],
    quad: &[crate::geometry::QuadPoint],
    pts: &[Vec2; 3],
    grads: &[Vec2; 3],
    dofs: [u32; 3],
    beta: impl Fn(Vec2) -> f64,
    f: impl Fn(Vec2) -> f64,
) {
    let mut k_local = [[0.0f64; 3]; 3];
    for qp in quad {
        let b = beta(qp.p);
        let fv = f(qp.p);
        let lam = barycentric(pts, qp.p);
        for a in 0..3 {
            for c in 0..3 {
                k_local[a][c] += qp.w * b * grads[a].dot(grads[c]);
            }
            rhs[dofs[a] as usize] += qp.w * fv * lam[a];
        }
    }
    for a in 0..3 {
        for c in 0..3 {
            triplets.push((dofs[a], dofs[c], k_local[a][c]));
        }
    }
}

/// Symmetric elimination of Dirichlet DOFs: eliminated rows/columns are
/// replaced by the identity, and the right-hand side absorbs the lift.
pub fn apply_dirichlet(system: &SparseSystem, dofmap: &DofMap, values: &[f64]) -> SparseSystem {
    let n = system.n;
    let mut fixed = vec![false; n];
    for &d in &dofmap.dirichlet_dofs {
        fixed[d as usize] = true;
    }
    let mut triplets = Vec::with_capacity(system.nnz());
    let mut rhs = system.rhs.clone();
    for i in 0..n {
        if fixed[i] {
            rhs[i] = values[i];
            triplets.push((i as u32, i as u32, 1.0));
            continue;
        }
        for k in system.row_ptr[i]..system.row_ptr[i + 1] {
            let j = system.col_idx[k] as usize;
            if fixed[j] {
                rhs[i] -= system.values[k] * values[j];
            } else {
                triplets.push((i as u32, j as u32, system.values[k]));
            }
        }
    }
    SparseSystem::from_triplets(n, triplets, rhs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csr_from_triplets_merges_duplicates() {
        let t = vec![
            (0u32, 0u32, 1.0),
            (1, 1, 2.0),
            (0, 0, 3.0),
            (0, 1, 0.5),
            (1, 0, 0.5),
        ];
        let s = SparseSystem::from_triplets(2, t, vec![0.0, 0.0]);
        assert_eq!(s.get(0, 0), 4.0);
        assert_eq!(s.get(0, 1), 0.5);
        assert_eq!(s.get(1, 0), 0.5);
        assert_eq!(s.get(1, 1), 2.0);
        assert_eq!(s.nnz(), 4);
        let mut y = vec![0.0; 2];
        s.matvec(&[1.0, 2.0], &mut y);
        assert_eq!(y, vec![5.0, 4.5]);
    }

    #[test]
    fn csr_handles_empty_rows() {
        let t = vec![(2u32, 2u32, 5.0)];
        let s = SparseSystem::from_triplets(4, t, vec![0.0; 4]);
        assert_eq!(s.get(2, 2), 5.0);
        assert_eq!(s.get(0, 0), 0.0);
        let mut y = vec![0.0; 4];
        s.matvec(&[1.0, 1.0, 1.0, 1.0], &mut y);
        assert_eq!(y, vec![0.0, 0.0, 5.0, 0.0]);
    }
}
