//! Exact-solution interpolation, error norms, convergence orders, the
//! interface-resolution audit, and curvature-adapted initial meshes.

use crate::assembly::ProblemSpec;
use crate::geometry::quadrature::triangle_rule;
use crate::geometry::{
    audit_resolution, curved_error_quadrature, edge_intersection, tag_elements, CutGeometry,
    ElementKind, Interface, Side, Violation,
};
use crate::mesh::{bisect, element_geometry, uniform_mesh, Mesh, MeshError};
use crate::recovery::RecoveredGradient;
use crate::space::{barycentric, p1_gradients, DofMap, PairedField};
use crate::vec2::Vec2;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("problem has no exact solution branches")]
    MissingExact,
    #[error("adaptive refinement hit the level budget ({levels}) with {violations} resolution violations left")]
    BudgetExceeded { levels: usize, violations: usize },
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Geometry(#[from] crate::geometry::GeometryError),
}

/// The three gradient errors of one run plus its size labels.
#[derive(Clone, Copy, Debug)]
pub struct ErrorTriple {
    /// `|| grad u - grad u_h ||` over the two subdomains.
    pub de: f64,
    /// `|| grad I*u - grad u_h ||` (supercloseness quantity).
    pub die: f64,
    /// `|| grad u - R u_h ||` (recovered-gradient error).
    pub dre: f64,
    pub ndofs: usize,
    pub h: f64,
}

/// Interpolation of the exact branches: the side-`i` DOF at a vertex takes
/// the value of branch `i` there, including vertices outside subdomain `i`
/// (the branches are globally evaluable extensions).
pub fn interpolate_exact(
    mesh: &Mesh,
    dofmap: &DofMap,
    problem: &ProblemSpec,
) -> Result<PairedField, AnalysisError> {
    let exact = problem.exact.as_ref().ok_or(AnalysisError::MissingExact)?;
    let mut field = PairedField::zeros(dofmap);
    for d in 0..dofmap.n_dofs as u32 {
        let (side, v) = dofmap.node(d);
        field.coefficients[d as usize] = exact.u(side, mesh.vertices[v as usize]);
    }
    Ok(field)
}

#[derive(Clone, Copy, Debug)]
pub struct ErrorOptions {
    /// Quadrature order for the volume integrals.
    pub order: usize,
    /// Sub-chords used to resolve the curved interface inside cut elements.
    pub curved_subdivisions: usize,
}

impl Default for ErrorOptions {
    fn default() -> Self {
        ErrorOptions {
            order: 6,
            curved_subdivisions: 8,
        }
    }
}

/// Integrand accumulator over the two physical subdomains: interior elements
/// integrate with the owning side, cut elements with curved per-side
/// quadrature.
fn integrate_subdomains(
    mesh: &Mesh,
    geom: &CutGeometry,
    problem: &ProblemSpec,
    opts: ErrorOptions,
    mut f: impl FnMut(usize, Side, Vec2) -> f64,
) -> f64 {
    let mut total = 0.0;
    for t in 0..mesh.n_triangles() {
        if let Some(side) = geom.classification.element_kind[t].interior_side() {
            let quad = triangle_rule(&mesh.triangle_points(t), opts.order).unwrap();
            for qp in &quad {
                total += qp.w * f(t, side, qp.p);
            }
        }
    }
    for cut in &geom.cuts {
        let (q1, q2) =
            curved_error_quadrature(cut, &problem.interface, opts.curved_subdivisions, opts.order)
                .unwrap();
        for qp in &q1 {
            total += qp.w * f(cut.element, Side::One, qp.p);
        }
        for qp in &q2 {
            total += qp.w * f(cut.element, Side::Two, qp.p);
        }
    }
    total
}

/// Computes the three error norms against the exact branches.
#[allow(clippy::too_many_arguments)]
pub fn error_norms(
    mesh: &Mesh,
    geom: &CutGeometry,
    dofmap: &DofMap,
    problem: &ProblemSpec,
    u_h: &PairedField,
    recovered: &RecoveredGradient,
    opts: ErrorOptions,
    h_label: f64,
) -> Result<ErrorTriple, AnalysisError> {
    let exact = problem.exact.as_ref().ok_or(AnalysisError::MissingExact)?;
    let interp = interpolate_exact(mesh, dofmap, problem)?;
    let grad_of = |field: &PairedField, t: usize, side: Side| -> Vec2 {
        let dofs = dofmap.element_dofs(t, side).unwrap();
        let grads = p1_gradients(&mesh.triangle_points(t));
        let mut g = Vec2::ZERO;
        for k in 0..3 {
            g += grads[k] * field.coefficients[dofs[k] as usize];
        }
        g
    };
    let de2 = integrate_subdomains(mesh, geom, problem, opts, |t, side, p| {
        (exact.grad(side, p) - grad_of(u_h, t, side)).norm_sq()
    });
    let die2 = integrate_subdomains(mesh, geom, problem, opts, |t, side, _| {
        (grad_of(&interp, t, side) - grad_of(u_h, t, side)).norm_sq()
    });
    let dre2 = integrate_subdomains(mesh, geom, problem, opts, |t, side, p| {
        let dofs = dofmap.element_dofs(t, side).unwrap();
        let lam = barycentric(&mesh.triangle_points(t), p);
        let mut rec = Vec2::ZERO;
        for k in 0..3 {
            rec += recovered.values[dofs[k] as usize] * lam[k];
        }
        (exact.grad(side, p) - rec).norm_sq()
    });
    Ok(ErrorTriple {
        de: de2.max(0.0).sqrt(),
        die: die2.max(0.0).sqrt(),
        dre: dre2.max(0.0).sqrt(),
        ndofs: dofmap.n_dofs,
        h: h_label,
    })
}

/// `|| beta^1/2 (grad u - grad u_h) ||` over the two subdomains; the
/// reference quantity for the estimator's effectivity index.
pub fn weighted_gradient_error(
    mesh: &Mesh,
    geom: &CutGeometry,
    dofmap: &DofMap,
    problem: &ProblemSpec,
    u_h: &PairedField,
    opts: ErrorOptions,
) -> Result<f64, AnalysisError> {
    let exact = problem.exact.as_ref().ok_or(AnalysisError::MissingExact)?;
    let val = integrate_subdomains(mesh, geom, problem, opts, |t, side, p| {
        let dofs = dofmap.element_dofs(t, side).unwrap();
        let grads = p1_gradients(&mesh.triangle_points(t));
        let mut gh = Vec2::ZERO;
        for k in 0..3 {
            gh += grads[k] * u_h.coefficients[dofs[k] as usize];
        }
        problem.beta(side, p) * (exact.grad(side, p) - gh).norm_sq()
    });
    Ok(val.max(0.0).sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EocMode {
    ByH,
    ByDof,
}

/// Estimated orders of convergence between consecutive rows. Zero or
/// non-finite errors yield `None` (printed as a sentinel).
pub fn eoc(rows: &[ErrorTriple], pick: impl Fn(&ErrorTriple) -> f64, mode: EocMode) -> Vec<Option<f64>> {
    let mut orders = Vec::new();
    for w in rows.windows(2) {
        let (e0, e1) = (pick(&w[0]), pick(&w[1]));
        let ratio = match mode {
            EocMode::ByH => w[0].h / w[1].h,
            EocMode::ByDof => w[1].ndofs as f64 / w[0].ndofs as f64,
        };
        if e0 > 0.0 && e1 > 0.0 && e0.is_finite() && e1.is_finite() && ratio > 1.0 {
            orders.push(Some((e0 / e1).ln() / ratio.ln()));
        } else {
            orders.push(None);
        }
    }
    orders
}

/// Convergence study results with per-column orders.
#[derive(Clone, Debug)]
pub struct ConvergenceReport {
    pub rows: Vec<ErrorTriple>,
    pub mode: EocMode,
}

impl ConvergenceReport {
    pub fn orders_de(&self) -> Vec<Option<f64>> {
        eoc(&self.rows, |r| r.de, self.mode)
    }

    pub fn orders_die(&self) -> Vec<Option<f64>> {
        eoc(&self.rows, |r| r.die, self.mode)
    }

    pub fn orders_dre(&self) -> Vec<Option<f64>> {
        eoc(&self.rows, |r| r.dre, self.mode)
    }

    fn order_str(o: Option<&Option<f64>>) -> String {
        match o {
            Some(Some(v)) => format!("{v:.2}"),
            _ => "--".to_string(),
        }
    }

    /// CSV: `level,h_or_dof,De,order,Die,order,Dre,order`.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "level,h_or_dof,De,order,Die,order,Dre,order")?;
        let (ode, odi, odr) = (self.orders_de(), self.orders_die(), self.orders_dre());
        for (k, row) in self.rows.iter().enumerate() {
            let o = |v: &Vec<Option<f64>>| {
                if k == 0 {
                    "--".to_string()
                } else {
                    Self::order_str(v.get(k - 1))
                }
            };
            let size = match self.mode {
                EocMode::ByH => format!("{:.6e}", row.h),
                EocMode::ByDof => format!("{}", row.ndofs),
            };
            writeln!(
                w,
                "{},{},{:.6e},{},{:.6e},{},{:.6e},{}",
                k,
                size,
                row.de,
                o(&ode),
                row.die,
                o(&odi),
                row.dre,
                o(&odr)
            )?;
        }
        Ok(())
    }

    /// Aligned plain-text table in the usual publication layout.
    pub fn write_table<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        let head = match self.mode {
            EocMode::ByH => "h",
            EocMode::ByDof => "DOF",
        };
        writeln!(
            w,
            "{:>12} {:>12} {:>6} {:>12} {:>6} {:>12} {:>6}",
            head, "De", "order", "Die", "order", "Dre", "order"
        )?;
        let (ode, odi, odr) = (self.orders_de(), self.orders_die(), self.orders_dre());
        for (k, row) in self.rows.iter().enumerate() {
            let o = |v: &Vec<Option<f64>>| {
                if k == 0 {
                    "--".to_string()
                } else {
                    Self::order_str(v.get(k - 1))
                }
            };
            let size = match self.mode {
                EocMode::ByH => {
                    let inv = 1.0 / row.h;
                    if (inv - inv.round()).abs() < 1e-9 {
                        format!("1/{}", inv.round() as i64)
                    } else {
                        format!("{:.4e}", row.h)
                    }
                }
                EocMode::ByDof => format!("{}", row.ndofs),
            };
            writeln!(
                w,
                "{:>12} {:>12.4e} {:>6} {:>12.4e} {:>6} {:>12.4e} {:>6}",
                size,
                row.de,
                o(&ode),
                row.die,
                o(&odi),
                row.dre,
                o(&odr)
            )?;
        }
        Ok(())
    }
}

/// Resolution audit report (diagnostic; never fails).
#[derive(Clone, Debug)]
pub struct Assumption2Report {
    pub violations: Vec<Violation>,
}

impl Assumption2Report {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks that the interface crosses each mixed element boundary exactly
/// twice and each edge at most once (sampled).
pub fn check_assumption2(mesh: &Mesh, interface: &Interface) -> Assumption2Report {
    Assumption2Report {
        violations: audit_resolution(mesh, interface),
    }
}

/// Curvature-driven generation of an unfitted initial mesh: starting from a
/// uniform grid, bisect every cut element whose size-curvature product
/// exceeds `theta`, plus every element flagged by the resolution audit,
/// until no marks remain or the level budget runs out.
pub fn adaptive_initial_mesh(
    interface: &Interface,
    theta: f64,
    n0: usize,
    max_levels: usize,
) -> Result<Mesh, AnalysisError> {
    let mut mesh = uniform_mesh(n0)?;
    for _level in 0..max_levels {
        let marks = adaptive_marks(&mesh, interface, theta);
        if marks.is_empty() {
            return Ok(mesh);
        }
        mesh = bisect(&mesh, &marks)?;
    }
    let leftover = audit_resolution(&mesh, interface);
    if leftover.is_empty() {
        Ok(mesh)
    } else {
        Err(AnalysisError::BudgetExceeded {
            levels: max_levels,
            violations: leftover.len(),
        })
    }
}

fn adaptive_marks(mesh: &Mesh, interface: &Interface, theta: f64) -> Vec<usize> {
    let mut marks: Vec<usize> = audit_resolution(mesh, interface)
        .iter()
        .map(|v| v.element)
        .collect();
    let (kinds, signs) = tag_elements(mesh, interface);
    for t in 0..mesh.n_triangles() {
        if kinds[t] != ElementKind::Cut {
            continue;
        }
        let p = mesh.triangle_points(t);
        let mut crossings = Vec::with_capacity(2);
        for k in 0..3 {
            if signs[t][k] * signs[t][(k + 1) % 3] < 0 {
                match edge_intersection(p[k], p[(k + 1) % 3], interface) {
                    Ok(x) => crossings.push(x),
                    Err(_) => {
                        marks.push(t);
                        crossings.clear();
                        break;
                    }
                }
            }
        }
        if crossings.len() == 2 {
            let h = element_geometry(mesh, t).map(|g| g.h).unwrap_or(0.0);
            // sampled chord curvature plus the neighborhood maximum; a
            // needle tip can sit inside the element while every chord
            // sample sees only its gentle flanks
            let mut max_curv = 0.0f64;
            for j in 0..8 {
                let s = (j as f64 + 0.5) / 8.0;
                let q = crossings[0] + (crossings[1] - crossings[0]) * s;
                max_curv = max_curv.max(interface.curvature(q).abs());
            }
            let c = mesh.centroid(t);
            max_curv = max_curv.max(interface.max_curvature_near(c, h).abs());
            if h * max_curv > theta {
                marks.push(t);
            }
        }
    }
    marks.sort_unstable();
    marks.dedup();
    marks
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{classify_and_cut, interface};
    use crate::problems;
    use crate::space::build_dofmap;

    #[test]
    fn interpolation_of_shared_affine() {
        let mesh = uniform_mesh(8).unwrap();
        let problem = problems::affine_patch(1.0, 1.0, Vec2::new(1.0, 1.0), 0.0);
        let geom = classify_and_cut(
            &mesh,
            &problem.interface,
            &|p| problem.beta(Side::One, p),
            &|p| problem.beta(Side::Two, p),
            true,
        )
        .unwrap();
        let dofmap = build_dofmap(&mesh, &geom.classification);
        let f = interpolate_exact(&mesh, &dofmap, &problem).unwrap();
        for d in 0..dofmap.n_dofs as u32 {
            let (_, v) = dofmap.node(d);
            let p = mesh.vertices[v as usize];
            assert!((f.coefficients[d as usize] - (p.x + p.y)).abs() < 1e-14);
        }
    }

    #[test]
    fn extension_values_outside_subdomain() {
        // side-1 nodal values are r^3/beta1 even at nodes with r > 0.5
        let mesh = uniform_mesh(16).unwrap();
        let problem = problems::ex51(1.0, 10.0);
        let geom = classify_and_cut(&mesh, &problem.interface, &|_| 1.0, &|_| 10.0, true).unwrap();
        let dofmap = build_dofmap(&mesh, &geom.classification);
        let f = interpolate_exact(&mesh, &dofmap, &problem).unwrap();
        let mut checked_outside = false;
        for d in dofmap.side_dofs(Side::One) {
            let (_, v) = dofmap.node(d);
            let p = mesh.vertices[v as usize];
            let expect = p.norm().powi(3) / 1.0;
            assert!((f.coefficients[d as usize] - expect).abs() < 1e-14);
            if p.norm() > 0.5 {
                checked_outside = true;
            }
        }
        assert!(checked_outside);
    }

    #[test]
    fn interpolation_error_bound() {
        // |I_h u - u| = O(h^2 |D2 u|) at interior points, h = 1/64
        let mesh = uniform_mesh(128).unwrap();
        let problem = problems::ex51(1.0, 10.0);
        let geom = classify_and_cut(&mesh, &problem.interface, &|_| 1.0, &|_| 10.0, true).unwrap();
        let dofmap = build_dofmap(&mesh, &geom.classification);
        let f = interpolate_exact(&mesh, &dofmap, &problem).unwrap();
        let exact = problem.exact.as_ref().unwrap();
        // |D^2 (r^3)| ~ 6 r <= 6 sqrt 2; bound 10 h^2 max|D2u|
        let h: f64 = 2.0 / 128.0;
        let bound = 10.0 * h * h * 6.0 * 2f64.sqrt();
        for &t in geom.classification.strict(Side::One) {
            let c = mesh.centroid(t);
            let (val, _) =
                crate::space::eval(&mesh, &dofmap, &f, t, Side::One, c).unwrap();
            assert!((val - exact.u(Side::One, c)).abs() < bound);
        }
    }

    #[test]
    fn eoc_by_h_and_by_dof() {
        let rows = vec![
            ErrorTriple { de: 4e-2, die: 1.0, dre: 1.0, ndofs: 100, h: 1.0 / 16.0 },
            ErrorTriple { de: 2e-2, die: 1.0, dre: 1.0, ndofs: 400, h: 1.0 / 32.0 },
        ];
        let o = eoc(&rows, |r| r.de, EocMode::ByH);
        assert!((o[0].unwrap() - 1.0).abs() < 1e-12);
        // DOF quadrupling with error halving gives order 1/2
        let o = eoc(&rows, |r| r.de, EocMode::ByDof);
        assert!((o[0].unwrap() - 0.5).abs() < 1e-12);
        // published pair: 2.37e-2 -> 9.34e-3 at halved h is order 1.34
        let rows = vec![
            ErrorTriple { de: 2.37e-2, die: 1.0, dre: 1.0, ndofs: 1, h: 1.0 / 16.0 },
            ErrorTriple { de: 9.34e-3, die: 1.0, dre: 1.0, ndofs: 2, h: 1.0 / 32.0 },
        ];
        let o = eoc(&rows, |r| r.de, EocMode::ByH);
        assert!((o[0].unwrap() - 1.343).abs() < 5e-3);
        // zero errors give the sentinel
        let rows = vec![
            ErrorTriple { de: 0.0, die: 0.0, dre: 0.0, ndofs: 1, h: 0.5 },
            ErrorTriple { de: 0.0, die: 0.0, dre: 0.0, ndofs: 2, h: 0.25 },
        ];
        assert!(eoc(&rows, |r| r.de, EocMode::ByH)[0].is_none());
    }

    #[test]
    fn assumption_checker_circle_and_sharp() {
        let mesh = uniform_mesh(16).unwrap();
        assert!(check_assumption2(&mesh, &interface::circle(0.5)).ok());
        let mesh8 = uniform_mesh(8).unwrap();
        assert!(!check_assumption2(&mesh8, &interface::sharp20(16384)).ok());
        // no mixed elements: vacuously ok
        assert!(check_assumption2(&mesh8, &interface::circle(50.0)).ok());
    }

    #[test]
    fn adaptive_mesh_circle_needs_no_refinement() {
        // h_T = sqrt(2)/8 ~ 0.177, curvature 2: h*k = 0.354 < 1
        let mesh = adaptive_initial_mesh(&interface::circle(0.5), 1.0, 16, 5).unwrap();
        assert_eq!(mesh.n_triangles(), 512);
    }

    #[test]
    fn adaptive_mesh_tiny_theta_exhausts_budget_or_refines_fully() {
        // theta -> 0 forces refinement every level; with a clean interface
        // the audit stays ok so the budget exit returns the refined mesh
        let mesh = adaptive_initial_mesh(&interface::circle(0.5), 1e-9, 4, 3).unwrap();
        assert!(mesh.n_triangles() > 32);
    }

    #[test]
    fn csv_layout() {
        let report = ConvergenceReport {
            rows: vec![
                ErrorTriple { de: 1e-1, die: 2e-2, dre: 1e-2, ndofs: 10, h: 0.5 },
                ErrorTriple { de: 5e-2, die: 7e-3, dre: 3.5e-3, ndofs: 40, h: 0.25 },
            ],
            mode: EocMode::ByH,
        };
        let mut buf = Vec::new();
        report.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "level,h_or_dof,De,order,Die,order,Dre,order");
        assert!(lines.next().unwrap().starts_with("0,5.000000e-1,1.000000e-1,--,"));
        let mut table = Vec::new();
        report.write_table(&mut table).unwrap();
        assert!(String::from_utf8(table).unwrap().contains("1/4"));
    }
}
