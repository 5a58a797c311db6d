//! One-call pipeline: classify, assemble, solve, recover, measure.

use crate::analysis::{
    error_norms, interpolate_exact, AnalysisError, ConvergenceReport, EocMode, ErrorOptions,
    ErrorTriple,
};
use crate::assembly::{
    apply_dirichlet, assemble, AssembleError, AssemblyOptions, ProblemSpec, SparseSystem,
};
use crate::geometry::{classify_and_cut, CutGeometry, GeometryError, Side};
use crate::mesh::{bisect, Mesh, MeshError};
use crate::recovery::{uppr, RecoveredGradient, RecoveryError};
use crate::solver::{default_maxit, solve, SolveError, SolveReport};
use crate::space::{build_dofmap, DofMap, PairedField};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DriverError {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Assemble(#[from] AssembleError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Recovery(#[from] RecoveryError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
}

#[derive(Clone, Copy, Debug)]
pub struct SolveOptions {
    pub assembly: AssemblyOptions,
    pub solver_tol: f64,
    /// Iteration cap; `None` uses `20 sqrt(n)`.
    pub solver_maxit: Option<usize>,
    /// Audit the interface resolution before solving.
    pub audit: bool,
    pub errors: ErrorOptions,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            assembly: AssemblyOptions::default(),
            solver_tol: 1e-10,
            solver_maxit: None,
            audit: true,
            errors: ErrorOptions::default(),
        }
    }
}

/// Everything produced by one solve on one mesh.
pub struct SolveState {
    pub mesh: Mesh,
    pub geom: CutGeometry,
    pub dofmap: DofMap,
    pub system: SparseSystem,
    pub u_h: PairedField,
    pub recovered: RecoveredGradient,
    pub report: SolveReport,
}

/// Runs the full pipeline on one mesh. Cut invariants (weight and area
/// partitions) are asserted on every cut element.
pub fn solve_problem(
    problem: &ProblemSpec,
    mesh: Mesh,
    opts: &SolveOptions,
) -> Result<SolveState, DriverError> {
    let b1 = |p| problem.beta(Side::One, p);
    let b2 = |p| problem.beta(Side::Two, p);
    let geom = classify_and_cut(&mesh, &problem.interface, &b1, &b2, opts.audit)?;
    for cut in &geom.cuts {
        let total = cut.area1 + cut.area2;
        assert!(
            (cut.kappa1 + cut.kappa2 - 1.0).abs() < 1e-15,
            "weights must partition unity"
        );
        assert!(cut.gamma > 0.0);
        let p = mesh.triangle_points(cut.element);
        let tri_area = 0.5 * (p[1] - p[0]).cross(p[2] - p[0]);
        assert!(
            (total - tri_area).abs() <= 1e-12 * tri_area,
            "cut areas must partition the element"
        );
    }
    let dofmap = build_dofmap(&mesh, &geom.classification);
    let raw = assemble(&mesh, &geom, &dofmap, problem, opts.assembly)?;
    let mut dirichlet = vec![0.0; dofmap.n_dofs];
    for &d in &dofmap.dirichlet_dofs {
        let (side, v) = dofmap.node(d);
        dirichlet[d as usize] = problem.dirichlet(side, mesh.vertices[v as usize]);
    }
    let system = apply_dirichlet(&raw, &dofmap, &dirichlet);
    let maxit = opts.solver_maxit.unwrap_or_else(|| default_maxit(system.n));
    let (x, report) = solve(&system, opts.solver_tol, maxit)?;
    let u_h = PairedField { coefficients: x };
    let recovered = uppr(&mesh, &geom.classification, &dofmap, &u_h)?;
    Ok(SolveState {
        mesh,
        geom,
        dofmap,
        system,
        u_h,
        recovered,
        report,
    })
}

/// Errors of a solved state against the exact branches.
pub fn measure(state: &SolveState, problem: &ProblemSpec, opts: &SolveOptions, h_label: f64)
    -> Result<ErrorTriple, DriverError>
{
    Ok(error_norms(
        &state.mesh,
        &state.geom,
        &state.dofmap,
        problem,
        &state.u_h,
        &state.recovered,
        opts.errors,
        h_label,
    )?)
}

/// Supercloseness diagnostic `||| u_h - I* u |||` in the mesh-dependent norm.
pub fn supercloseness_norm(
    state: &SolveState,
    problem: &ProblemSpec,
) -> Result<f64, DriverError> {
    let interp = interpolate_exact(&state.mesh, &state.dofmap, problem)?;
    let mut diff = PairedField::zeros(&state.dofmap);
    for k in 0..state.dofmap.n_dofs {
        diff.coefficients[k] = state.u_h.coefficients[k] - interp.coefficients[k];
    }
    Ok(crate::recovery::mesh_norm(
        &state.mesh,
        &state.geom,
        &state.dofmap,
        &diff,
    ))
}

/// A sequence of meshes for a convergence study.
pub enum MeshSequence {
    /// Uniform meshes `n0 * 2^k`, labelled by `h = 2/n`.
    Uniform { n0: usize, levels: usize },
    /// A start mesh refined by pairs of full bisection sweeps (each pair is
    /// a red refinement, which preserves the mesh structure and quadruples
    /// the element count), labelled by DOF count.
    BisectionSweeps { start: Mesh, levels: usize },
}

/// Runs a convergence study over the mesh sequence.
pub fn study(
    problem: &ProblemSpec,
    seq: MeshSequence,
    opts: &SolveOptions,
) -> Result<(ConvergenceReport, Vec<SolveState>), DriverError> {
    let mut rows = Vec::new();
    let mut states = Vec::new();
    match seq {
        MeshSequence::Uniform { n0, levels } => {
            for k in 0..levels {
                let n = n0 << k;
                let mesh = crate::mesh::uniform_mesh(n)?;
                let state = solve_problem(problem, mesh, opts)?;
                rows.push(measure(&state, problem, opts, 2.0 / n as f64)?);
                states.push(state);
            }
            Ok((
                ConvergenceReport {
                    rows,
                    mode: EocMode::ByH,
                },
                states,
            ))
        }
        MeshSequence::BisectionSweeps { start, levels } => {
            let mut mesh = start;
            for k in 0..levels {
                if k > 0 {
                    // two sweeps: every triangle is bisected twice
                    for _ in 0..2 {
                        let all: Vec<usize> = (0..mesh.n_triangles()).collect();
                        mesh = bisect(&mesh, &all)?;
                    }
                }
                let state = solve_problem(problem, mesh.clone(), opts)?;
                let h = state
                    .geom
                    .cuts
                    .iter()
                    .map(|c| c.h)
                    .fold(0.0f64, f64::max);
                rows.push(measure(&state, problem, opts, h.max(1e-12))?);
                states.push(state);
            }
            Ok((
                ConvergenceReport {
                    rows,
                    mode: EocMode::ByDof,
                },
                states,
            ))
        }
    }
}
