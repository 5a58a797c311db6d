//! Quadrature on triangles, small convex polygons, and segments.
//!
//! Triangle rules are symmetric Dunavant-type rules exact for polynomials of
//! the stated order. Polygons (the 3- or 4-gons produced by chord cuts, plus
//! the polyline-bounded regions used for error integration) are handled by
//! fan triangulation from the centroid with *signed* sub-triangle areas, so
//! mildly non-convex fans still integrate exactly.

use super::GeometryError;
use crate::vec2::Vec2;

/// A quadrature node with its weight. Weights carry the measure of the
/// integration domain (they sum to area or length).
#[derive(Clone, Copy, Debug)]
pub struct QuadPoint {
    pub p: Vec2,
    pub w: f64,
}

/// Barycentric triangle rule: (weight, l1, l2); l3 = 1 - l1 - l2.
/// Weights sum to 1 and are scaled by the triangle area on use.
fn tri_rule(order: usize) -> Result<&'static [(f64, f64, f64)], GeometryError> {
    const ORDER2: [(f64, f64, f64); 3] = [
        (1.0 / 3.0, 2.0 / 3.0, 1.0 / 6.0),
        (1.0 / 3.0, 1.0 / 6.0, 2.0 / 3.0),
        (1.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0),
    ];
    const A1: f64 = 0.445948490915965;
    const W1: f64 = 0.223381589678011;
    const A2: f64 = 0.091576213509771;
    const W2: f64 = 0.109951743655322;
    const ORDER4: [(f64, f64, f64); 6] = [
        (W1, A1, A1),
        (W1, A1, 1.0 - 2.0 * A1),
        (W1, 1.0 - 2.0 * A1, A1),
        (W2, A2, A2),
        (W2, A2, 1.0 - 2.0 * A2),
        (W2, 1.0 - 2.0 * A2, A2),
    ];
    const B1: f64 = 0.249286745170910;
    const V1: f64 = 0.116786275726379;
    const B2: f64 = 0.063089014491502;
    const V2: f64 = 0.050844906370207;
    const C1: f64 = 0.310352451033785;
    const C2: f64 = 0.053145049844816;
    const C3: f64 = 1.0 - C1 - C2;
    const V3: f64 = 0.082851075618374;
    const ORDER6: [(f64, f64, f64); 12] = [
        (V1, B1, B1),
        (V1, B1, 1.0 - 2.0 * B1),
        (V1, 1.0 - 2.0 * B1, B1),
        (V2, B2, B2),
        (V2, B2, 1.0 - 2.0 * B2),
        (V2, 1.0 - 2.0 * B2, B2),
        (V3, C1, C2),
        (V3, C2, C1),
        (V3, C1, C3),
        (V3, C3, C1),
        (V3, C2, C3),
        (V3, C3, C2),
    ];
    match order {
        2 => Ok(&ORDER2),
        4 => Ok(&ORDER4),
        6 => Ok(&ORDER6),
        _ => Err(GeometryError::UnsupportedOrder(order)),
    }
}

/// Gauss-Legendre nodes/weights on [-1,1] with ceil((order+1)/2) points.
fn gauss_rule(order: usize) -> Result<&'static [(f64, f64)], GeometryError> {
    const G2: [(f64, f64); 2] = [(-0.5773502691896258, 1.0), (0.5773502691896258, 1.0)];
    const G3: [(f64, f64); 3] = [
        (-0.7745966692414834, 5.0 / 9.0),
        (0.0, 8.0 / 9.0),
        (0.7745966692414834, 5.0 / 9.0),
    ];
    const G4: [(f64, f64); 4] = [
        (-0.8611363115940526, 0.34785484513745385),
        (-0.3399810435848563, 0.6521451548625461),
        (0.3399810435848563, 0.6521451548625461),
        (0.8611363115940526, 0.34785484513745385),
    ];
    match order {
        2 => Ok(&G2),
        4 => Ok(&G3),
        6 => Ok(&G4),
        _ => Err(GeometryError::UnsupportedOrder(order)),
    }
}

pub fn triangle_rule(v: &[Vec2; 3], order: usize) -> Result<Vec<QuadPoint>, GeometryError> {
    let rule = tri_rule(order)?;
    let area = 0.5 * (v[1] - v[0]).cross(v[2] - v[0]);
    Ok(rule
        .iter()
        .map(|&(w, l1, l2)| QuadPoint {
            p: v[0] * l1 + v[1] * l2 + v[2] * (1.0 - l1 - l2),
            w: w * area,
        })
        .collect())
}

/// Signed fan quadrature over a polygon given by its boundary vertices.
/// Sliver or inverted fan triangles contribute signed weights that cancel,
/// so the sum is the exact polygon integral for simple polygons.
pub fn polygon_rule(pts: &[Vec2], order: usize) -> Result<Vec<QuadPoint>, GeometryError> {
    if pts.len() < 3 {
        return Err(GeometryError::DegeneratePolygon(pts.len()));
    }
    let rule = tri_rule(order)?;
    let mut c = Vec2::ZERO;
    for &p in pts {
        c += p;
    }
    let c = c / pts.len() as f64;
    let mut out = Vec::with_capacity(rule.len() * pts.len());
    for k in 0..pts.len() {
        let a = pts[k];
        let b = pts[(k + 1) % pts.len()];
        let signed_area = 0.5 * (b - a).cross(c - a);
        for &(w, l1, l2) in rule {
            out.push(QuadPoint {
                p: a * l1 + b * l2 + c * (1.0 - l1 - l2),
                w: w * signed_area,
            });
        }
    }
    Ok(out)
}

pub fn segment_rule(a: Vec2, b: Vec2, order: usize) -> Result<Vec<QuadPoint>, GeometryError> {
    let rule = gauss_rule(order)?;
    let mid = (a + b) * 0.5;
    let half = (b - a) * 0.5;
    let hlen = half.norm();
    Ok(rule
        .iter()
        .map(|&(t, w)| QuadPoint {
            p: mid + half * t,
            w: w * hlen,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn integrate(q: &[QuadPoint], f: impl Fn(Vec2) -> f64) -> f64 {
        q.iter().map(|qp| qp.w * f(qp.p)).sum()
    }

    #[test]
    fn triangle_rule_normalizes() {
        let v = [Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)];
        for order in [2, 4, 6] {
            let q = triangle_rule(&v, order).unwrap();
            assert!((integrate(&q, |_| 1.0) - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn triangle_rule_exactness() {
        let v = [Vec2::new(0.2, 0.1), Vec2::new(1.3, 0.4), Vec2::new(0.5, 1.7)];
        // x^2 y^2 is degree 4: analytic value via order-6 rule as reference
        let hi = triangle_rule(&v, 6).unwrap();
        let mid = triangle_rule(&v, 4).unwrap();
        let f = |p: Vec2| p.x * p.x * p.y * p.y;
        assert!((integrate(&hi, f) - integrate(&mid, f)).abs() < 1e-13);
    }

    #[test]
    fn unsupported_order_rejected() {
        let v = [Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)];
        assert!(triangle_rule(&v, 3).is_err());
        assert!(segment_rule(v[0], v[1], 5).is_err());
    }

    #[test]
    fn polygon_rule_quadrilateral() {
        // integral of x+y over the quad (0,0),(0.5,0),(0.5,0.5),(0,1):
        // the region is {0<=x<=0.5, 0<=y<=1-x}, giving 11/48
        let pts = [
            Vec2::new(0.0, 0.0),
            Vec2::new(0.5, 0.0),
            Vec2::new(0.5, 0.5),
            Vec2::new(0.0, 1.0),
        ];
        let q = polygon_rule(&pts, 2).unwrap();
        let val = integrate(&q, |p| p.x + p.y);
        assert!((val - 11.0 / 48.0).abs() < 1e-14, "got {val}");
        assert!((integrate(&q, |_| 1.0) - 0.375).abs() < 1e-14);
    }

    #[test]
    fn segment_rule_gauss_exactness() {
        let q = segment_rule(Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), 4).unwrap();
        assert!((integrate(&q, |p| p.x * p.x * p.x) - 0.25).abs() < 1e-14);
        let q = segment_rule(Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), 2).unwrap();
        assert!((integrate(&q, |p| p.x * p.x * p.x) - 0.25).abs() < 1e-14);
    }

    #[test]
    fn weights_sum_to_measure() {
        let pts = [
            Vec2::new(-0.3, 0.2),
            Vec2::new(0.9, 0.1),
            Vec2::new(0.8, 0.9),
            Vec2::new(-0.2, 0.7),
        ];
        let q = polygon_rule(&pts, 6).unwrap();
        let area: f64 = 0.5
            * (0..4)
                .map(|k| pts[k].cross(pts[(k + 1) % 4]))
                .sum::<f64>();
        let total = integrate(&q, |_| 1.0);
        assert!((total - area).abs() < 1e-13 * area.abs());
    }
}
