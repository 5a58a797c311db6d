//! Interface geometry: element classification, cut-element quantities, and
//! quadrature.
//!
//! All operations are pure functions of immutable inputs and deterministic.
//! Snapping and tiny-cut handling follow one set of rules shared by every
//! caller: a vertex with |phi| below `1e-10 * h_T` counts as lying on the
//! side of the element centroid, and a cut whose smaller part is below
//! `1e-12 * |T|` is reclassified as an interior element of the majority
//! side.

pub mod interface;
pub mod quadrature;

pub use interface::Interface;
pub use quadrature::QuadPoint;

use crate::mesh::{element_geometry, Mesh};
use crate::vec2::Vec2;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("interface resolution assumption violated on {0} element(s), first at {1:?}")]
    AssumptionViolation(usize, Vec<usize>),
    #[error("edge root finding did not converge within {0} iterations")]
    NoConvergence(usize),
    #[error("edge is not bracketed: phi does not change sign")]
    NoBracket,
    #[error("degenerate cut on element {element}: min side fraction {fraction:.3e}")]
    DegenerateCut { element: usize, fraction: f64 },
    #[error("unsupported quadrature order {0} (use 2, 4 or 6)")]
    UnsupportedOrder(usize),
    #[error("polygon with {0} vertices cannot be integrated")]
    DegeneratePolygon(usize),
    #[error("element {0} is not a cut element")]
    NotCut(usize),
}

/// Which side of the interface: 1 is `phi < 0` (inside), 2 is `phi > 0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Side {
    One,
    Two,
}

impl Side {
    pub const BOTH: [Side; 2] = [Side::One, Side::Two];

    #[inline]
    pub fn index(self) -> usize {
        match self {
            Side::One => 0,
            Side::Two => 1,
        }
    }

    pub fn other(self) -> Side {
        match self {
            Side::One => Side::Two,
            Side::Two => Side::One,
        }
    }
}

impl std::fmt::Display for Side {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.index() + 1)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ElementKind {
    Interior1,
    Interior2,
    Cut,
}

impl ElementKind {
    pub fn interior_side(self) -> Option<Side> {
        match self {
            ElementKind::Interior1 => Some(Side::One),
            ElementKind::Interior2 => Some(Side::Two),
            ElementKind::Cut => None,
        }
    }
}

/// An interface segment that coincides with a mesh edge (the interface runs
/// along the mesh skeleton there, so no element is geometrically cut and the
/// Nitsche coupling is assembled on the edge between the two interior
/// neighbors instead).
#[derive(Clone, Copy, Debug)]
pub struct AlignedEdge {
    pub edge: usize,
    /// Incident element on side 1 / side 2.
    pub tri1: usize,
    pub tri2: usize,
    pub a: Vec2,
    pub b: Vec2,
}

/// Element tags against an interface plus the derived index lists.
#[derive(Clone, Debug)]
pub struct Classification {
    pub element_kind: Vec<ElementKind>,
    /// Snapped vertex signs per element (+1 / -1).
    pub signs: Vec<[i8; 3]>,
    pub cut_elements: Vec<usize>,
    pub covers1: Vec<usize>,
    pub covers2: Vec<usize>,
    pub strict1: Vec<usize>,
    pub strict2: Vec<usize>,
    pub aligned_edges: Vec<AlignedEdge>,
}

impl Classification {
    pub fn covers(&self, side: Side) -> &[usize] {
        match side {
            Side::One => &self.covers1,
            Side::Two => &self.covers2,
        }
    }

    pub fn strict(&self, side: Side) -> &[usize] {
        match side {
            Side::One => &self.strict1,
            Side::Two => &self.strict2,
        }
    }

    /// Sides on which element `t` carries basis functions.
    pub fn sides_of(&self, t: usize) -> &'static [Side] {
        match self.element_kind[t] {
            ElementKind::Interior1 => &[Side::One],
            ElementKind::Interior2 => &[Side::Two],
            ElementKind::Cut => &Side::BOTH,
        }
    }

    fn rebuild_lists(&mut self) {
        self.cut_elements.clear();
        self.covers1.clear();
        self.covers2.clear();
        self.strict1.clear();
        self.strict2.clear();
        for (t, k) in self.element_kind.iter().enumerate() {
            match k {
                ElementKind::Interior1 => {
                    self.strict1.push(t);
                    self.covers1.push(t);
                }
                ElementKind::Interior2 => {
                    self.strict2.push(t);
                    self.covers2.push(t);
                }
                ElementKind::Cut => {
                    self.cut_elements.push(t);
                    self.covers1.push(t);
                    self.covers2.push(t);
                }
            }
        }
    }
}

/// Per-cut-element geometry and Nitsche weights.
#[derive(Clone, Debug)]
pub struct CutInfo {
    pub element: usize,
    pub entry: Vec2,
    pub exit: Vec2,
    /// Sub-polygon on side 1 / side 2 (triangle or quadrilateral), in
    /// counterclockwise boundary order.
    pub poly1: Vec<Vec2>,
    pub poly2: Vec<Vec2>,
    pub area1: f64,
    pub area2: f64,
    pub chord_len: f64,
    /// Unit normal of the chord pointing from side 1 into side 2.
    pub normal: Vec2,
    pub kappa1: f64,
    pub kappa2: f64,
    pub gamma: f64,
    /// Element diameter, used as the local length in the penalty.
    pub h: f64,
}

/// Snapped vertex signs of one element: +1/-1 per vertex; a vertex within
/// `1e-10 * h_T` of the zero set counts as lying on the centroid's side.
pub fn snapped_signs(mesh: &Mesh, t: usize, interface: &Interface) -> [i8; 3] {
    let p = mesh.triangle_points(t);
    let h = p[0].dist(p[1]).max(p[1].dist(p[2])).max(p[2].dist(p[0]));
    let tol = 1e-10 * h;
    let mut centroid_sign = 0i8;
    let mut signs = [0i8; 3];
    for k in 0..3 {
        let f = interface.phi(p[k]);
        signs[k] = if f.abs() < tol {
            if centroid_sign == 0 {
                let c = (p[0] + p[1] + p[2]) / 3.0;
                centroid_sign = if interface.phi(c) >= 0.0 { 1 } else { -1 };
            }
            centroid_sign
        } else if f > 0.0 {
            1
        } else {
            -1
        };
    }
    signs
}

/// A resolution violation found by the interface audit.
#[derive(Clone, Copy, Debug)]
pub struct Violation {
    pub element: usize,
    /// Crossings counted on the element boundary (a resolved mixed element
    /// has exactly 2, each edge at most 1).
    pub boundary_crossings: usize,
}

/// Counts interface crossings per edge by sampling phi at the endpoints and
/// 64 interior points, then checks every element: any edge crossed more than
/// once, or a mixed-sign element whose boundary is not crossed exactly
/// twice, is reported. Edges provably away from the zero set (via the
/// interface's Lipschitz bound) are skipped.
pub fn audit_resolution(mesh: &Mesh, interface: &Interface) -> Vec<Violation> {
    let lip = interface.lipschitz_bound().max(1e-6);
    let phi_v: Vec<f64> = mesh.vertices.iter().map(|&p| interface.phi(p)).collect();
    // values within root tolerance of the zero set count as positive, so a
    // crossing through a vertex is attributed to exactly one of its edges
    let sign_of = |f: f64, tol: f64| if f < -tol { -1i8 } else { 1i8 };
    let mut edge_crossings = vec![0usize; mesh.edges.len()];
    for (e, edge) in mesh.edges.iter().enumerate() {
        let a = mesh.vertices[edge.v[0]];
        let b = mesh.vertices[edge.v[1]];
        let len = a.dist(b);
        let fa = phi_v[edge.v[0]];
        let fb = phi_v[edge.v[1]];
        if fa.abs() > lip * len || fb.abs() > lip * len {
            // cannot reach zero anywhere on this edge
            continue;
        }
        let tol = 1e-12 * len;
        let mut crossings = 0usize;
        let mut last_sign = sign_of(fa, tol);
        const SAMPLES: usize = 64;
        for j in 1..=(SAMPLES + 1) {
            let t = j as f64 / (SAMPLES + 1) as f64;
            let f = if j == SAMPLES + 1 {
                fb
            } else {
                interface.phi(a + (b - a) * t)
            };
            let s = sign_of(f, tol);
            if s != last_sign {
                crossings += 1;
                last_sign = s;
            }
        }
        edge_crossings[e] = crossings;
    }
    let mut violations = Vec::new();
    for t in 0..mesh.n_triangles() {
        let total: usize = mesh.triangle_edges[t]
            .iter()
            .map(|&e| edge_crossings[e])
            .sum();
        let max_per_edge = mesh.triangle_edges[t]
            .iter()
            .map(|&e| edge_crossings[e])
            .max()
            .unwrap_or(0);
        let tri = mesh.triangles[t];
        let p = mesh.triangle_points(t);
        let h = p[0].dist(p[1]).max(p[1].dist(p[2])).max(p[2].dist(p[0]));
        let tol = 1e-12 * h;
        let vsigns: [i8; 3] = std::array::from_fn(|k| sign_of(phi_v[tri[k]], tol));
        let mixed = vsigns.iter().any(|&s| s > 0) && vsigns.iter().any(|&s| s < 0);
        if max_per_edge > 1 || (mixed && total != 2) {
            violations.push(Violation {
                element: t,
                boundary_crossings: total,
            });
        }
    }
    violations
}

/// Tags every element by its snapped vertex signs without auditing. Used by
/// mesh adaptation, where violations are marks rather than errors.
pub fn tag_elements(mesh: &Mesh, interface: &Interface) -> (Vec<ElementKind>, Vec<[i8; 3]>) {
    let n = mesh.n_triangles();
    let mut kinds = Vec::with_capacity(n);
    let mut signs = Vec::with_capacity(n);
    for t in 0..n {
        let s = snapped_signs(mesh, t, interface);
        let kind = if s.iter().all(|&x| x < 0) {
            ElementKind::Interior1
        } else if s.iter().all(|&x| x > 0) {
            ElementKind::Interior2
        } else {
            ElementKind::Cut
        };
        kinds.push(kind);
        signs.push(s);
    }
    (kinds, signs)
}

/// Classifies all elements against the interface and audits the resolution
/// assumption (each cut element boundary crossed exactly twice, each edge at
/// most once).
pub fn classify_elements(mesh: &Mesh, interface: &Interface) -> Result<Classification, GeometryError> {
    let violations = audit_resolution(mesh, interface);
    if !violations.is_empty() {
        let ids: Vec<usize> = violations.iter().take(8).map(|v| v.element).collect();
        return Err(GeometryError::AssumptionViolation(violations.len(), ids));
    }
    Ok(classify_unchecked(mesh, interface))
}

/// Classification without the resolution audit.
pub fn classify_unchecked(mesh: &Mesh, interface: &Interface) -> Classification {
    let (element_kind, signs) = tag_elements(mesh, interface);
    let mut class = Classification {
        element_kind,
        signs,
        cut_elements: Vec::new(),
        covers1: Vec::new(),
        covers2: Vec::new(),
        strict1: Vec::new(),
        strict2: Vec::new(),
        aligned_edges: Vec::new(),
    };
    class.rebuild_lists();
    class.aligned_edges = find_aligned_edges(mesh, interface, &class.element_kind);
    class
}

/// Detects mesh edges lying inside the zero level set (both endpoints and
/// the midpoint within snapping distance) that separate interior elements of
/// opposite sides.
fn find_aligned_edges(
    mesh: &Mesh,
    interface: &Interface,
    kinds: &[ElementKind],
) -> Vec<AlignedEdge> {
    let mut out = Vec::new();
    for (e, edge) in mesh.edges.iter().enumerate() {
        let (Some(ta), Some(tb)) = (edge.tris[0], edge.tris[1]) else {
            continue;
        };
        let pair = (kinds[ta], kinds[tb]);
        let (tri1, tri2) = match pair {
            (ElementKind::Interior1, ElementKind::Interior2) => (ta, tb),
            (ElementKind::Interior2, ElementKind::Interior1) => (tb, ta),
            _ => continue,
        };
        let a = mesh.vertices[edge.v[0]];
        let b = mesh.vertices[edge.v[1]];
        let tol = 1e-10 * a.dist(b);
        if interface.phi(a).abs() < tol
            && interface.phi(b).abs() < tol
            && interface.phi((a + b) * 0.5).abs() < tol
        {
            out.push(AlignedEdge {
                edge: e,
                tri1,
                tri2,
                a,
                b,
            });
        }
    }
    out
}

/// Root of phi on the segment [p0, p1]. Requires a sign change of the
/// snapped signs; endpoint roots are returned directly.
pub fn edge_intersection(p0: Vec2, p1: Vec2, interface: &Interface) -> Result<Vec2, GeometryError> {
    let len = p0.dist(p1);
    let tol = 1e-12 * len;
    let f0 = interface.phi(p0);
    let f1 = interface.phi(p1);
    if f0.abs() <= tol {
        return Ok(p0);
    }
    if f1.abs() <= tol {
        return Ok(p1);
    }
    if f0 * f1 > 0.0 {
        // snapped signs disagreed with the raw values; the nearer endpoint
        // is within snapping distance of the zero set
        let snap = 1e-9 * len.max(1e-9);
        if f0.abs() < snap || f1.abs() < snap {
            return Ok(if f0.abs() < f1.abs() { p0 } else { p1 });
        }
        return Err(GeometryError::NoBracket);
    }
    let (mut a, mut b, mut fa) = (p0, p1, f0);
    const MAXIT: usize = 200;
    for _ in 0..MAXIT {
        let m = (a + b) * 0.5;
        let fm = interface.phi(m);
        if fm.abs() <= tol || a.dist(b) <= 1e-15 * len.max(1.0) {
            return Ok(m);
        }
        if fa * fm <= 0.0 {
            b = m;
        } else {
            a = m;
            fa = fm;
        }
    }
    Err(GeometryError::NoConvergence(MAXIT))
}

/// Shoelace area in coordinates local to the first vertex, so the relative
/// accuracy does not degrade for tiny polygons far from the origin.
fn polygon_area(pts: &[Vec2]) -> f64 {
    let o = pts[0];
    0.5 * (1..pts.len() - 1)
        .map(|k| (pts[k] - o).cross(pts[k + 1] - o))
        .sum::<f64>()
}

/// Cut-element quantities: sub-polygons, areas, chord, robust weights and
/// the stability parameter. `beta1`/`beta2` are evaluated at the chord
/// midpoint.
pub fn cut_info(
    mesh: &Mesh,
    t: usize,
    interface: &Interface,
    beta1: &dyn Fn(Vec2) -> f64,
    beta2: &dyn Fn(Vec2) -> f64,
) -> Result<CutInfo, GeometryError> {
    let signs = snapped_signs(mesh, t, interface);
    if signs.iter().all(|&s| s > 0) || signs.iter().all(|&s| s < 0) {
        return Err(GeometryError::NotCut(t));
    }
    let p = mesh.triangle_points(t);
    let mut poly1: Vec<Vec2> = Vec::with_capacity(4);
    let mut poly2: Vec<Vec2> = Vec::with_capacity(4);
    let mut crossings: Vec<Vec2> = Vec::with_capacity(2);
    for k in 0..3 {
        if signs[k] < 0 {
            poly1.push(p[k]);
        } else {
            poly2.push(p[k]);
        }
        if signs[k] * signs[(k + 1) % 3] < 0 {
            let x = edge_intersection(p[k], p[(k + 1) % 3], interface)?;
            poly1.push(x);
            poly2.push(x);
            crossings.push(x);
        }
    }
    debug_assert_eq!(crossings.len(), 2);
    let (entry, exit) = (crossings[0], crossings[1]);
    let area1 = polygon_area(&poly1);
    let area2 = polygon_area(&poly2);
    let total = 0.5 * (p[1] - p[0]).cross(p[2] - p[0]);
    let fraction = area1.min(area2) / total;
    if fraction < 1e-12 {
        return Err(GeometryError::DegenerateCut {
            element: t,
            fraction,
        });
    }
    let geo = element_geometry(mesh, t).map_err(|_| GeometryError::NotCut(t))?;
    let chord_len = entry.dist(exit);
    let mid = (entry + exit) * 0.5;
    let mut normal = (exit - entry).perp().normalized();
    if normal.dot(interface.grad_phi(mid)) < 0.0 {
        normal = -normal;
    }
    let b1 = beta1(mid);
    let b2 = beta2(mid);
    let kappa1 = b2 * area1 / (b2 * area1 + b1 * area2);
    let kappa2 = 1.0 - kappa1;
    let gamma = 2.0 * geo.h * chord_len / (area1 / b1 + area2 / b2);
    Ok(CutInfo {
        element: t,
        entry,
        exit,
        poly1,
        poly2,
        area1,
        area2,
        chord_len,
        normal,
        kappa1,
        kappa2,
        gamma,
        h: geo.h,
    })
}

/// Replaces the straight chord of a cut element by a polyline of
/// `subdivisions` sub-chords whose interior knots are projected onto the
/// interface, then integrates each side with a signed fan rule. Converges to
/// the true integrals over the curved sub-regions as subdivisions grow.
pub fn curved_error_quadrature(
    cut: &CutInfo,
    interface: &Interface,
    subdivisions: usize,
    order: usize,
) -> Result<(Vec<QuadPoint>, Vec<QuadPoint>), GeometryError> {
    let m = subdivisions.max(1);
    let mut knots = Vec::with_capacity(m + 1);
    knots.push(cut.entry);
    for k in 1..m {
        let q = cut.entry + (cut.exit - cut.entry) * (k as f64 / m as f64);
        knots.push(project_to_interface(q, cut.normal, cut.chord_len, interface));
    }
    knots.push(cut.exit);
    let q1 = quadrature::polygon_rule(&insert_chord_polyline(&cut.poly1, cut.entry, cut.exit, &knots), order)?;
    let q2 = quadrature::polygon_rule(&insert_chord_polyline(&cut.poly2, cut.entry, cut.exit, &knots), order)?;
    Ok((q1, q2))
}

/// 1D root find for phi along the normal direction through `q`. Falls back
/// to the unprojected point when no bracket is found nearby.
fn project_to_interface(q: Vec2, normal: Vec2, scale: f64, interface: &Interface) -> Vec2 {
    let f0 = interface.phi(q);
    if f0 == 0.0 {
        return q;
    }
    let mut bracket = None;
    for r in [0.25 * scale, 0.5 * scale, scale] {
        let lo = q - normal * r;
        let hi = q + normal * r;
        if interface.phi(lo) * interface.phi(hi) < 0.0 {
            bracket = Some((lo, hi));
            break;
        }
    }
    let Some((mut a, mut b)) = bracket else {
        log::warn!("interface projection failed near ({:.6}, {:.6})", q.x, q.y);
        return q;
    };
    let mut fa = interface.phi(a);
    for _ in 0..60 {
        let mid = (a + b) * 0.5;
        let fm = interface.phi(mid);
        if fm.abs() < 1e-14 * scale.max(1e-3) {
            return mid;
        }
        if fa * fm <= 0.0 {
            b = mid;
        } else {
            a = mid;
            fa = fm;
        }
    }
    (a + b) * 0.5
}

/// Rebuilds a cut polygon with the chord edge (entry->exit or exit->entry)
/// replaced by the projected polyline.
fn insert_chord_polyline(poly: &[Vec2], entry: Vec2, exit: Vec2, knots: &[Vec2]) -> Vec<Vec2> {
    let n = poly.len();
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        let fwd = a == entry && b == exit;
        let rev = a == exit && b == entry;
        if fwd || rev {
            let mut out = Vec::with_capacity(n + knots.len() - 2);
            out.extend_from_slice(&poly[..=i]);
            if fwd {
                out.extend_from_slice(&knots[1..knots.len() - 1]);
            } else {
                out.extend(knots[1..knots.len() - 1].iter().rev());
            }
            out.extend_from_slice(&poly[i + 1..]);
            return out;
        }
    }
    poly.to_vec()
}

/// Bundled interface geometry for one mesh/interface/coefficient triple:
/// classification with degenerate cuts resolved, cut data per cut element,
/// and any skeleton-aligned interface edges.
#[derive(Clone, Debug)]
pub struct CutGeometry {
    pub classification: Classification,
    /// Aligned with `classification.cut_elements`.
    pub cuts: Vec<CutInfo>,
}

/// Full geometric pipeline: classify, audit (optional), resolve degenerate
/// cuts by reclassification, and compute cut data.
pub fn classify_and_cut(
    mesh: &Mesh,
    interface: &Interface,
    beta1: &dyn Fn(Vec2) -> f64,
    beta2: &dyn Fn(Vec2) -> f64,
    audit: bool,
) -> Result<CutGeometry, GeometryError> {
    if audit {
        let violations = audit_resolution(mesh, interface);
        if !violations.is_empty() {
            let ids: Vec<usize> = violations.iter().take(8).map(|v| v.element).collect();
            return Err(GeometryError::AssumptionViolation(violations.len(), ids));
        }
    }
    let mut classification = classify_unchecked(mesh, interface);
    let mut cuts = Vec::with_capacity(classification.cut_elements.len());
    let mut changed = false;
    for &t in &classification.cut_elements.clone() {
        match cut_info(mesh, t, interface, beta1, beta2) {
            Ok(ci) => cuts.push(ci),
            Err(GeometryError::DegenerateCut { .. }) => {
                // reclassify to the majority side; the sliver is below any
                // tolerance used downstream
                let p = mesh.triangle_points(t);
                let c = (p[0] + p[1] + p[2]) / 3.0;
                classification.element_kind[t] = if interface.phi(c) < 0.0 {
                    ElementKind::Interior1
                } else {
                    ElementKind::Interior2
                };
                changed = true;
            }
            Err(e) => return Err(e),
        }
    }
    if changed {
        classification.rebuild_lists();
        classification.aligned_edges =
            find_aligned_edges(mesh, interface, &classification.element_kind);
    }
    Ok(CutGeometry {
        classification,
        cuts,
    })
}
