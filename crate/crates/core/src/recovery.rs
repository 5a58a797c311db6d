//! Gradient recovery on the fictitious domains and the derived estimator.
//!
//! At every node of a fictitious domain, a quadratic polynomial is fitted by
//! least squares to the nodal values over a patch of surrounding elements of
//! that same domain; the recovered gradient at the node is the gradient of
//! the fit. Applied side by side, this yields a two-sided recovered gradient
//! that is superconvergent to the exact gradient, which in turn makes
//! `eta_T = ||beta^1/2 (recovered - discrete gradient)||_T` an asymptotically
//! exact error estimator.

use crate::assembly::ProblemSpec;
use crate::geometry::quadrature::{polygon_rule, segment_rule, triangle_rule};
use crate::geometry::{Classification, CutGeometry, Side};
use crate::mesh::{element_geometry, Mesh};
use crate::space::{barycentric, p1_gradients, DofMap, PairedField};
use crate::vec2::Vec2;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RecoveryError {
    #[error("patch around vertex {vertex} (side {side}) stays rank-deficient at {rings} rings")]
    PatchFailure {
        vertex: usize,
        side: Side,
        rings: usize,
    },
    #[error("field does not cover side {0}")]
    MissingSide(Side),
}

/// Least-squares quadratic fit over a node patch.
#[derive(Clone, Debug)]
pub struct PatchFit {
    pub center: usize,
    pub sample_nodes: Vec<usize>,
    pub ring_count: usize,
    /// Coefficients of {1, x, y, x^2, xy, y^2} in patch-scaled coordinates.
    pub coeffs: [f64; 6],
    /// Condition estimate of the scaled least-squares matrix.
    pub condition_estimate: f64,
    scale: f64,
}

impl PatchFit {
    /// Gradient of the fitted quadratic at the patch center, in physical
    /// coordinates.
    pub fn gradient_at_center(&self) -> Vec2 {
        Vec2::new(self.coeffs[1] / self.scale, self.coeffs[2] / self.scale)
    }
}

/// Recovered gradient: one 2-vector per DOF, interpreted as a nodal field of
/// the same paired space (evaluate by per-side linear interpolation).
#[derive(Clone, Debug)]
pub struct RecoveredGradient {
    pub values: Vec<Vec2>,
}

impl RecoveredGradient {
    pub fn eval(
        &self,
        mesh: &Mesh,
        dofmap: &DofMap,
        element: usize,
        side: Side,
        x: Vec2,
    ) -> Option<Vec2> {
        let dofs = dofmap.element_dofs(element, side)?;
        let pts = mesh.triangle_points(element);
        let lam = barycentric(&pts, x);
        let mut v = Vec2::ZERO;
        for k in 0..3 {
            v += self.values[dofs[k] as usize] * lam[k];
        }
        Some(v)
    }
}

/// Vertex -> covering elements adjacency restricted to one side.
fn side_adjacency(mesh: &Mesh, class: &Classification, side: Side) -> Vec<Vec<u32>> {
    let mut adj = vec![Vec::new(); mesh.n_vertices()];
    for &t in class.covers(side) {
        for &v in &mesh.triangles[t] {
            adj[v].push(t as u32);
        }
    }
    adj
}

const MAX_RINGS: usize = 4;
const MIN_SAMPLES: usize = 6;
/// Smallest acceptable ratio of scaled singular values.
const RANK_TOL: f64 = 1e-8;

/// Fits the patch quadratic around `vertex` on `side`, expanding element
/// rings until the fit is well posed.
pub fn fit_patch(
    mesh: &Mesh,
    dofmap: &DofMap,
    field: &PairedField,
    side: Side,
    vertex: usize,
    adj: &[Vec<u32>],
) -> Result<PatchFit, RecoveryError> {
    let mut nodes: Vec<usize> = vec![vertex];
    for ring in 1..=MAX_RINGS {
        // expand by one ring: all side-covered elements touching the
        // current node set, then their vertices
        let mut grown = nodes.clone();
        for &v in &nodes {
            for &t in &adj[v] {
                grown.extend_from_slice(&mesh.triangles[t as usize]);
            }
        }
        grown.sort_unstable();
        grown.dedup();
        nodes = grown;
        if nodes.len() < MIN_SAMPLES {
            continue;
        }
        if let Some(fit) = try_fit(mesh, dofmap, field, side, vertex, &nodes, ring) {
            return Ok(fit);
        }
    }
    Err(RecoveryError::PatchFailure {
        vertex,
        side,
        rings: MAX_RINGS,
    })
}

fn try_fit(
    mesh: &Mesh,
    dofmap: &DofMap,
    field: &PairedField,
    side: Side,
    vertex: usize,
    nodes: &[usize],
    ring: usize,
) -> Option<PatchFit> {
    let z = mesh.vertices[vertex];
    let mut scale = 0.0f64;
    for &v in nodes {
        scale = scale.max(mesh.vertices[v].dist(z));
    }
    if scale == 0.0 {
        return None;
    }
    // normal equations M = A'A, b = A'u over monomials {1,x,y,x^2,xy,y^2}
    let mut m = [[0.0f64; 6]; 6];
    let mut b = [0.0f64; 6];
    for &v in nodes {
        let d = (mesh.vertices[v] - z) / scale;
        let row = [1.0, d.x, d.y, d.x * d.x, d.x * d.y, d.y * d.y];
        let u = field.coefficients[dofmap.dof(side, v)? as usize];
        for i in 0..6 {
            for j in 0..6 {
                m[i][j] += row[i] * row[j];
            }
            b[i] += row[i] * u;
        }
    }
    // column scaling
    let mut d = [0.0f64; 6];
    for i in 0..6 {
        if m[i][i] <= 0.0 {
            return None;
        }
        d[i] = 1.0 / m[i][i].sqrt();
    }
    let mut ms = [[0.0f64; 6]; 6];
    for i in 0..6 {
        for j in 0..6 {
            ms[i][j] = m[i][j] * d[i] * d[j];
        }
    }
    let (eigvals, eigvecs) = jacobi_eigen(ms);
    let lmax = eigvals.iter().cloned().fold(f64::MIN, f64::max);
    let lmin = eigvals.iter().cloned().fold(f64::MAX, f64::min);
    if lmin <= 0.0 || (lmin / lmax).sqrt() < RANK_TOL {
        return None;
    }
    let condition_estimate = (lmax / lmin).sqrt();
    // solve Ms y = D b through the eigendecomposition
    let rhs: [f64; 6] = std::array::from_fn(|i| d[i] * b[i]);
    let mut y = [0.0f64; 6];
    for k in 0..6 {
        let mut proj = 0.0;
        for i in 0..6 {
            proj += eigvecs[i][k] * rhs[i];
        }
        proj /= eigvals[k];
        for i in 0..6 {
            y[i] += eigvecs[i][k] * proj;
        }
    }
    let coeffs: [f64; 6] = std::array::from_fn(|i| y[i] * d[i]);
    Some(PatchFit {
        center: vertex,
        sample_nodes: nodes.to_vec(),
        ring_count: ring,
        coeffs,
        condition_estimate,
        scale,
    })
}

/// Cyclic Jacobi eigendecomposition of a symmetric 6x6 matrix.
/// Returns (eigenvalues, eigenvectors-as-columns).
fn jacobi_eigen(mut a: [[f64; 6]; 6]) -> ([f64; 6], [[f64; 6]; 6]) {
    let mut v = [[0.0f64; 6]; 6];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for _sweep in 0..30 {
        let mut off = 0.0;
        for i in 0..6 {
            for j in (i + 1)..6 {
                off += a[i][j] * a[i][j];
            }
        }
        if off < 1e-30 {
            break;
        }
        for p in 0..6 {
            for q in (p + 1)..6 {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..6 {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..6 {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for k in 0..6 {
                    let vkp = v[k][p];
                    let vkq = v[k][q];
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }
    (std::array::from_fn(|i| a[i][i]), v)
}

/// Nodal gradient recovery on one side; output indexed by global DOF (only
/// this side's entries are written).
pub fn ppr_recover(
    mesh: &Mesh,
    class: &Classification,
    dofmap: &DofMap,
    field: &PairedField,
    side: Side,
    out: &mut [Vec2],
) -> Result<(), RecoveryError> {
    if class.covers(side).is_empty() {
        return Ok(());
    }
    let adj = side_adjacency(mesh, class, side);
    for dof in dofmap.side_dofs(side) {
        let (_, v) = dofmap.node(dof);
        let fit = fit_patch(mesh, dofmap, field, side, v as usize, &adj)?;
        out[dof as usize] = fit.gradient_at_center();
    }
    Ok(())
}

/// Two-sided recovered gradient: side-wise recovery over both fictitious
/// domains. Linear in the field coefficients.
pub fn uppr(
    mesh: &Mesh,
    class: &Classification,
    dofmap: &DofMap,
    field: &PairedField,
) -> Result<RecoveredGradient, RecoveryError> {
    let mut values = vec![Vec2::ZERO; dofmap.n_dofs];
    for side in Side::BOTH {
        ppr_recover(mesh, class, dofmap, field, side, &mut values)?;
    }
    Ok(RecoveredGradient { values })
}

/// Per-element estimator `eta_T = ||beta^1/2 (R u - grad u_h)||_{0,T}` and
/// its global l2 aggregate. Cut elements accumulate both sides over their
/// chord sub-polygons.
pub fn estimate(
    mesh: &Mesh,
    geom: &CutGeometry,
    dofmap: &DofMap,
    field: &PairedField,
    recovered: &RecoveredGradient,
    problem: &ProblemSpec,
) -> (Vec<f64>, f64) {
    let class = &geom.classification;
    let mut eta_sq = vec![0.0f64; mesh.n_triangles()];
    let order = 4;
    let mut add = |t: usize, side: Side, quad: &[crate::geometry::QuadPoint]| {
        let dofs = dofmap.element_dofs(t, side).unwrap();
        let pts = mesh.triangle_points(t);
        let grads = p1_gradients(&pts);
        let mut gh = Vec2::ZERO;
        for k in 0..3 {
            gh += grads[k] * field.coefficients[dofs[k] as usize];
        }
        let mut acc = 0.0;
        for qp in quad {
            let lam = barycentric(&pts, qp.p);
            let mut rec = Vec2::ZERO;
            for k in 0..3 {
                rec += recovered.values[dofs[k] as usize] * lam[k];
            }
            acc += qp.w * problem.beta(side, qp.p) * (rec - gh).norm_sq();
        }
        eta_sq[t] += acc;
    };
    for t in 0..mesh.n_triangles() {
        if let Some(side) = class.element_kind[t].interior_side() {
            let quad = triangle_rule(&mesh.triangle_points(t), order).unwrap();
            add(t, side, &quad);
        }
    }
    for cut in &geom.cuts {
        let q1 = polygon_rule(&cut.poly1, order).unwrap();
        let q2 = polygon_rule(&cut.poly2, order).unwrap();
        add(cut.element, Side::One, &q1);
        add(cut.element, Side::Two, &q2);
    }
    let total = eta_sq.iter().sum::<f64>().max(0.0).sqrt();
    let eta: Vec<f64> = eta_sq.iter().map(|&e| e.max(0.0).sqrt()).collect();
    (eta, total)
}

/// Mesh-dependent norm
/// `|||v|||^2 = ||grad v||^2 + sum h_T ||{dn v}||^2 + sum h_T^-1 ||[v]||^2`
/// with the weighted average `{.}` on chords of cut elements (and aligned
/// interface edges, where present).
pub fn mesh_norm(
    mesh: &Mesh,
    geom: &CutGeometry,
    dofmap: &DofMap,
    field: &PairedField,
) -> f64 {
    let class = &geom.classification;
    let mut total = 0.0f64;
    let grad_of = |t: usize, side: Side| -> Vec2 {
        let dofs = dofmap.element_dofs(t, side).unwrap();
        let pts = mesh.triangle_points(t);
        let grads = p1_gradients(&pts);
        let mut g = Vec2::ZERO;
        for k in 0..3 {
            g += grads[k] * field.coefficients[dofs[k] as usize];
        }
        g
    };
    let value_of = |t: usize, side: Side, x: Vec2| -> f64 {
        let dofs = dofmap.element_dofs(t, side).unwrap();
        let pts = mesh.triangle_points(t);
        let lam = barycentric(&pts, x);
        (0..3)
            .map(|k| lam[k] * field.coefficients[dofs[k] as usize])
            .sum()
    };
    // broken gradient seminorm over the two physical subdomains
    for t in 0..mesh.n_triangles() {
        if let Some(side) = class.element_kind[t].interior_side() {
            let area = element_geometry(mesh, t).unwrap().area;
            total += area * grad_of(t, side).norm_sq();
        }
    }
    for cut in &geom.cuts {
        total += cut.area1 * grad_of(cut.element, Side::One).norm_sq();
        total += cut.area2 * grad_of(cut.element, Side::Two).norm_sq();
    }
    // interface terms on chords
    for cut in &geom.cuts {
        let t = cut.element;
        let g1 = grad_of(t, Side::One);
        let g2 = grad_of(t, Side::Two);
        let avg_flux = cut.kappa1 * g1.dot(cut.normal) + cut.kappa2 * g2.dot(cut.normal);
        let quad = segment_rule(cut.entry, cut.exit, 4).unwrap();
        for qp in &quad {
            let jump = value_of(t, Side::One, qp.p) - value_of(t, Side::Two, qp.p);
            total += qp.w * (cut.h * avg_flux * avg_flux + jump * jump / cut.h);
        }
    }
    for ae in &class.aligned_edges {
        let h1 = element_geometry(mesh, ae.tri1).unwrap().h;
        let h2 = element_geometry(mesh, ae.tri2).unwrap().h;
        let h = h1.max(h2);
        let mut normal = (ae.b - ae.a).perp().normalized();
        if normal.dot(mesh.centroid(ae.tri2) - mesh.centroid(ae.tri1)) < 0.0 {
            normal = -normal;
        }
        let g1 = grad_of(ae.tri1, Side::One);
        let g2 = grad_of(ae.tri2, Side::Two);
        // equal-area edge neighbors: plain average weights
        let a1 = element_geometry(mesh, ae.tri1).unwrap().area;
        let a2 = element_geometry(mesh, ae.tri2).unwrap().area;
        let k1 = a1 / (a1 + a2);
        let avg_flux = k1 * g1.dot(normal) + (1.0 - k1) * g2.dot(normal);
        let quad = segment_rule(ae.a, ae.b, 4).unwrap();
        for qp in &quad {
            let jump = value_of(ae.tri1, Side::One, qp.p) - value_of(ae.tri2, Side::Two, qp.p);
            total += qp.w * (h * avg_flux * avg_flux + jump * jump / h);
        }
    }
    total.max(0.0).sqrt()
}

/// CSV dump of a recovered gradient: `side,node_x,node_y,gx,gy`.
pub fn write_recovered_csv<W: std::io::Write>(
    mesh: &Mesh,
    dofmap: &DofMap,
    recovered: &RecoveredGradient,
    mut w: W,
) -> std::io::Result<()> {
    writeln!(w, "side,node_x,node_y,gx,gy")?;
    for d in 0..dofmap.n_dofs as u32 {
        let (side, v) = dofmap.node(d);
        let p = mesh.vertices[v as usize];
        let g = recovered.values[d as usize];
        writeln!(w, "{},{},{},{},{}", side, p.x, p.y, g.x, g.y)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{classify_and_cut, interface};
    use crate::mesh::uniform_mesh;
    use crate::space::build_dofmap;

    fn setup(n: usize) -> (Mesh, CutGeometry, DofMap) {
        let mesh = uniform_mesh(n).unwrap();
        let iface = interface::circle(0.5);
        let geom = classify_and_cut(&mesh, &iface, &|_| 1.0, &|_| 1.0, true).unwrap();
        let dofmap = build_dofmap(&mesh, &geom.classification);
        (mesh, geom, dofmap)
    }

    fn nodal_field(mesh: &Mesh, dofmap: &DofMap, f: impl Fn(Vec2) -> f64) -> PairedField {
        let mut u = PairedField::zeros(dofmap);
        for d in 0..dofmap.n_dofs as u32 {
            let (_, v) = dofmap.node(d);
            u.coefficients[d as usize] = f(mesh.vertices[v as usize]);
        }
        u
    }

    #[test]
    fn quadratic_preservation() {
        let (mesh, geom, dofmap) = setup(8);
        let q = |p: Vec2| p.x * p.x - 3.0 * p.x * p.y + p.y;
        let grad_q = |p: Vec2| Vec2::new(2.0 * p.x - 3.0 * p.y, -3.0 * p.x + 1.0);
        let field = nodal_field(&mesh, &dofmap, q);
        let rec = uppr(&mesh, &geom.classification, &dofmap, &field).unwrap();
        for d in 0..dofmap.n_dofs as u32 {
            let (_, v) = dofmap.node(d);
            let p = mesh.vertices[v as usize];
            let err = (rec.values[d as usize] - grad_q(p)).norm();
            assert!(err < 1e-10, "node ({}, {}): err {err:.2e}", p.x, p.y);
        }
    }

    #[test]
    fn affine_recovered_everywhere() {
        let (mesh, geom, dofmap) = setup(6);
        let field = nodal_field(&mesh, &dofmap, |p| p.x + 2.0 * p.y);
        let rec = uppr(&mesh, &geom.classification, &dofmap, &field).unwrap();
        for v in &rec.values {
            assert!((*v - Vec2::new(1.0, 2.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn linearity_of_uppr() {
        let (mesh, geom, dofmap) = setup(8);
        let fa = nodal_field(&mesh, &dofmap, |p| (p.x * 3.0).sin() + p.y);
        let fb = nodal_field(&mesh, &dofmap, |p| p.x * p.y - 0.3 * p.y * p.y);
        let (a, b) = (0.7, -1.3);
        let mut combo = PairedField::zeros(&dofmap);
        for k in 0..dofmap.n_dofs {
            combo.coefficients[k] = a * fa.coefficients[k] + b * fb.coefficients[k];
        }
        let ra = uppr(&mesh, &geom.classification, &dofmap, &fa).unwrap();
        let rb = uppr(&mesh, &geom.classification, &dofmap, &fb).unwrap();
        let rc = uppr(&mesh, &geom.classification, &dofmap, &combo).unwrap();
        for k in 0..dofmap.n_dofs {
            let lin = ra.values[k] * a + rb.values[k] * b;
            assert!((rc.values[k] - lin).norm() < 1e-12);
        }
    }

    #[test]
    fn recovery_matches_dense_least_squares_oracle() {
        // independent dense solve of the same normal equations via nalgebra
        let (mesh, geom, dofmap) = setup(8);
        let field = nodal_field(&mesh, &dofmap, |p| p.x.sin());
        let adj = super::side_adjacency(&mesh, &geom.classification, Side::One);
        // pick an interior node of side 1: vertex near the origin
        let vertex = mesh
            .vertices
            .iter()
            .position(|p| p.norm() < 1e-12)
            .unwrap();
        let fit = fit_patch(&mesh, &dofmap, &field, Side::One, vertex, &adj).unwrap();
        let z = mesh.vertices[vertex];
        let scale = fit
            .sample_nodes
            .iter()
            .map(|&v| mesh.vertices[v].dist(z))
            .fold(0.0f64, f64::max);
        let rows = fit.sample_nodes.len();
        let mut a = nalgebra::DMatrix::zeros(rows, 6);
        let mut b = nalgebra::DVector::zeros(rows);
        for (r, &v) in fit.sample_nodes.iter().enumerate() {
            let d = (mesh.vertices[v] - z) / scale;
            for (c, val) in [1.0, d.x, d.y, d.x * d.x, d.x * d.y, d.y * d.y]
                .into_iter()
                .enumerate()
            {
                a[(r, c)] = val;
            }
            b[r] = field.coefficients[dofmap.dof(Side::One, v).unwrap() as usize];
        }
        let sol = a.svd(true, true).solve(&b, 1e-14).unwrap();
        let oracle = Vec2::new(sol[1] / scale, sol[2] / scale);
        assert!((fit.gradient_at_center() - oracle).norm() < 1e-12);
    }

    #[test]
    fn estimator_zero_for_affine_and_pythagorean() {
        let (mesh, geom, dofmap) = setup(8);
        let problem = crate::problems::affine_patch(1.0, 1.0, Vec2::new(1.0, 2.0), 0.5);
        let field = nodal_field(&mesh, &dofmap, |p| p.x + 2.0 * p.y + 0.5);
        let rec = uppr(&mesh, &geom.classification, &dofmap, &field).unwrap();
        let (eta, eta_h) = estimate(&mesh, &geom, &dofmap, &field, &rec, &problem);
        assert!(eta_h < 1e-12);
        // eta_h^2 = sum eta_T^2 by construction
        let sum_sq: f64 = eta.iter().map(|e| e * e).sum();
        assert!((eta_h * eta_h - sum_sq).abs() <= 1e-14 * sum_sq.max(1e-30));
    }

    #[test]
    fn mesh_norm_zero_and_jump_free() {
        let (mesh, geom, dofmap) = setup(8);
        let zero = PairedField::zeros(&dofmap);
        assert_eq!(mesh_norm(&mesh, &geom, &dofmap, &zero), 0.0);
        // a globally linear field embedded in both sides has no jumps
        let field = nodal_field(&mesh, &dofmap, |p| 3.0 * p.x - p.y);
        let norm = mesh_norm(&mesh, &geom, &dofmap, &field);
        // norm^2 = |grad|^2 * |Omega| + flux-average terms (no jump part);
        // check the jump part vanishes by comparing against direct sums
        let grad_part = 10.0 * 4.0; // |grad|^2 = 10 over area 4
        let mut flux_part = 0.0;
        for cut in &geom.cuts {
            let flux = Vec2::new(3.0, -1.0).dot(cut.normal);
            flux_part += cut.h * cut.chord_len * flux * flux;
        }
        assert!((norm * norm - grad_part - flux_part).abs() < 1e-10);
    }
}
