use cutfem::geometry::audit_resolution;
use cutfem::problems;
use std::time::Instant;

fn main() {
    let t0 = Instant::now();
    let problem = problems::ex53();
    println!("problem build: {:?}", t0.elapsed());
    let iface = &problem.interface;
    let mut mesh = cutfem::mesh::uniform_mesh(16).unwrap();
    for level in 0..32 {
        let t = Instant::now();
        let viol = audit_resolution(&mesh, iface);
        let t_audit = t.elapsed();
        // replicate the marking logic cost profile
        let t = Instant::now();
        let (kinds, _) = cutfem::geometry::tag_elements(&mesh, iface);
        let t_tag = t.elapsed();
        let t = Instant::now();
        let mut marks: Vec<usize> = viol.iter().map(|v| v.element).collect();
        let mut hmin: f64 = 1.0;
        for t_el in 0..mesh.n_triangles() {
            if kinds[t_el] == cutfem::geometry::ElementKind::Cut {
                let g = cutfem::mesh::element_geometry(&mesh, t_el).unwrap();
                let c = mesh.centroid(t_el);
                let k = iface.max_curvature_near(c, g.h);
                hmin = hmin.min(g.h);
                if g.h * k > 0.8 {
                    marks.push(t_el);
                }
            }
        }
        let t_curv = t.elapsed();
        marks.sort_unstable();
        marks.dedup();
        println!(
            "level {level}: {} tris, {} viol, {} marks, hmin_cut {:.2e} | audit {:?} tag {:?} curv {:?}",
            mesh.n_triangles(), viol.len(), marks.len(), hmin, t_audit, t_tag, t_curv
        );
        if marks.is_empty() {
            break;
        }
        let t = Instant::now();
        mesh = cutfem::mesh::bisect(&mesh, &marks).unwrap();
        println!("   bisect {:?}", t.elapsed());
    }
}
