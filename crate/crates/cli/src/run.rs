//! Experiment execution: builds the problem, runs the study, writes outputs.

use crate::config::{ExperimentConfig, QPenaltyMode};
use cutfem::analysis::{adaptive_initial_mesh, ConvergenceReport, ErrorOptions};
use cutfem::assembly::{scalar_field, vector_field, AssemblyOptions, ProblemSpec, QPenaltyScaling};
use cutfem::driver::{study, MeshSequence, SolveOptions, SolveState};
use cutfem::geometry::{Interface, Side};
use cutfem::mesh::uniform_mesh;
use cutfem::problems;
use cutfem::vtk::write_side_vtk;
use cutfem::Vec2;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

#[derive(Debug)]
pub enum RunError {
    Config(String),
    Assumption(String),
    Solver(String),
    Io(std::io::Error),
    Other(String),
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Config(m) => write!(f, "config error: {m}"),
            RunError::Assumption(m) => write!(f, "interface resolution violated: {m}"),
            RunError::Solver(m) => write!(f, "solver failure: {m}"),
            RunError::Io(e) => write!(f, "io error: {e}"),
            RunError::Other(m) => write!(f, "{m}"),
        }
    }
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 4,
            RunError::Assumption(_) => 2,
            RunError::Solver(_) => 3,
            RunError::Io(_) | RunError::Other(_) => 1,
        }
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Io(e)
    }
}

fn classify_driver_error(e: cutfem::driver::DriverError) -> RunError {
    use cutfem::driver::DriverError;
    match e {
        DriverError::Geometry(g) => match g {
            cutfem::geometry::GeometryError::AssumptionViolation(..) => {
                RunError::Assumption(g.to_string())
            }
            other => RunError::Other(other.to_string()),
        },
        DriverError::Solve(s) => RunError::Solver(s.to_string()),
        other => RunError::Other(other.to_string()),
    }
}

pub fn build_problem(config: &ExperimentConfig) -> Result<ProblemSpec, RunError> {
    if config.example == "custom" {
        let (b1, b2) = config.custom_beta;
        let iface = Interface::by_name(&config.custom_interface).ok_or_else(|| {
            RunError::Config(format!(
                "unknown custom_interface '{}'",
                config.custom_interface
            ))
        })?;
        let (c0, c1, c2) = config.custom_affine;
        let u = scalar_field(move |p: Vec2| c0 + c1 * p.x + c2 * p.y);
        let gu = vector_field(move |_| Vec2::new(c1, c2));
        return Ok(ProblemSpec::from_exact(
            "custom",
            iface,
            scalar_field(move |_| b1),
            scalar_field(move |_| b2),
            u.clone(),
            u,
            gu.clone(),
            gu,
            scalar_field(|_| 0.0),
            scalar_field(|_| 0.0),
        ));
    }
    let problem = match (config.example.as_str(), config.interface_samples) {
        ("ex53", s) if s > 0 => Some(problems::ex53_with_samples(s)),
        ("ex54", s) if s > 0 => Some(problems::ex54_with_samples(s)),
        ("ex55", s) if s > 0 => Some(problems::ex55_with_samples(s)),
        (name, _) => problems::by_name(name),
    };
    problem.ok_or_else(|| RunError::Config(format!("unknown example '{}'", config.example)))
}

pub fn solve_options(config: &ExperimentConfig) -> SolveOptions {
    SolveOptions {
        assembly: AssemblyOptions {
            q_penalty: match config.q_penalty_scaling {
                QPenaltyMode::WithHinv => QPenaltyScaling::WithHInv,
                QPenaltyMode::PaperLiteral => QPenaltyScaling::PaperLiteral,
            },
        },
        solver_tol: config.solver_tol,
        solver_maxit: (config.solver_maxit > 0).then_some(config.solver_maxit),
        audit: !config.allow_unresolved,
        errors: ErrorOptions {
            order: 6,
            curved_subdivisions: config.curved_subdivisions.max(1),
        },
    }
}

/// Builds the mesh sequence for the configured example.
fn mesh_sequence(config: &ExperimentConfig, problem: &ProblemSpec) -> Result<MeshSequence, RunError> {
    if config.is_adaptive() {
        let start = adaptive_initial_mesh(
            &problem.interface,
            config.theta,
            config.n0,
            config.max_levels,
        )
        .map_err(|e| match e {
            cutfem::analysis::AnalysisError::BudgetExceeded { .. } => {
                RunError::Assumption(e.to_string())
            }
            other => RunError::Other(other.to_string()),
        })?;
        Ok(MeshSequence::BisectionSweeps {
            start,
            levels: config.levels,
        })
    } else {
        Ok(MeshSequence::Uniform {
            n0: config.n0,
            levels: config.levels,
        })
    }
}

/// Runs the configured study, writes the CSV and aligned table, and
/// optionally dumps the per-level nodal fields.
pub fn run(config: &ExperimentConfig) -> Result<ConvergenceReport, RunError> {
    let problem = build_problem(config)?;
    let opts = solve_options(config);
    let seq = mesh_sequence(config, &problem)?;
    let (report, states) = study(&problem, seq, &opts).map_err(classify_driver_error)?;
    fs::create_dir_all(&config.output_dir)?;
    let base = config.output_dir.join(format!("{}_table", config.example));
    let csv = fs::File::create(base.with_extension("csv"))?;
    report.write_csv(csv)?;
    let txt = fs::File::create(base.with_extension("txt"))?;
    report.write_table(txt)?;
    if config.emit_fields {
        for (level, state) in states.iter().enumerate() {
            let dir = config
                .output_dir
                .join(format!("{}_level{level}", config.example));
            emit_fields(state, &dir)?;
        }
    }
    Ok(report)
}

/// Writes per-side nodal solution and recovered-gradient components as CSV
/// and legacy VTK.
pub fn emit_fields(state: &SolveState, dir: &Path) -> Result<Vec<PathBuf>, RunError> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for side in Side::BOTH {
        let covers = state.geom.classification.covers(side);
        let s = side.index() + 1;
        let path = dir.join(format!("solution_s{s}.vtk"));
        let f = fs::File::create(&path)?;
        let u = &state.u_h;
        write_side_vtk(
            f,
            &state.mesh,
            &state.dofmap,
            covers,
            side,
            &[("u", &|d: u32| u.coefficients[d as usize])],
            "solution",
        )?;
        written.push(path);
        let path = dir.join(format!("recovered_s{s}.vtk"));
        let f = fs::File::create(&path)?;
        let rec = &state.recovered;
        write_side_vtk(
            f,
            &state.mesh,
            &state.dofmap,
            covers,
            side,
            &[
                ("gx", &|d: u32| rec.values[d as usize].x),
                ("gy", &|d: u32| rec.values[d as usize].y),
            ],
            "recovered gradient",
        )?;
        written.push(path);
        let path = dir.join(format!("solution_s{s}.csv"));
        let mut f = fs::File::create(&path)?;
        writeln!(f, "node_x,node_y,u")?;
        for d in state.dofmap.side_dofs(side) {
            let (_, v) = state.dofmap.node(d);
            let p = state.mesh.vertices[v as usize];
            writeln!(f, "{},{},{}", p.x, p.y, state.u_h.coefficients[d as usize])?;
        }
        written.push(path);
    }
    let path = dir.join("recovered.csv");
    let f = fs::File::create(&path)?;
    cutfem::recovery::write_recovered_csv(&state.mesh, &state.dofmap, &state.recovered, f)?;
    written.push(path);
    Ok(written)
}

/// Single solve at the configured coarsest level; prints errors and the
/// solver report.
pub fn solve_once(config: &ExperimentConfig) -> Result<(), RunError> {
    let problem = build_problem(config)?;
    let opts = solve_options(config);
    let mesh = if config.is_adaptive() {
        adaptive_initial_mesh(
            &problem.interface,
            config.theta,
            config.n0,
            config.max_levels,
        )
        .map_err(|e| RunError::Other(e.to_string()))?
    } else {
        uniform_mesh(config.n0).map_err(|e| RunError::Other(e.to_string()))?
    };
    let h = 2.0 / config.n0 as f64;
    let state =
        cutfem::driver::solve_problem(&problem, mesh, &opts).map_err(classify_driver_error)?;
    let errs = cutfem::driver::measure(&state, &problem, &opts, h)
        .map_err(classify_driver_error)?;
    println!(
        "{}: dofs {}  iters {}  residual {:.2e}",
        config.example, state.dofmap.n_dofs, state.report.iterations, state.report.residual
    );
    println!(
        "De {:.6e}  Die {:.6e}  Dre {:.6e}",
        errs.de, errs.die, errs.dre
    );
    if config.emit_fields {
        let dir = config
            .output_dir
            .join(format!("{}_level0", config.example));
        emit_fields(&state, &dir)?;
        println!("fields written to {}", dir.display());
    }
    Ok(())
}

/// Emits the adaptive initial mesh as a plain-text dump.
pub fn emit_mesh(config: &ExperimentConfig) -> Result<PathBuf, RunError> {
    let problem = build_problem(config)?;
    let mesh = adaptive_initial_mesh(
        &problem.interface,
        config.theta,
        config.n0,
        config.max_levels,
    )
    .map_err(|e| match e {
        cutfem::analysis::AnalysisError::BudgetExceeded { .. } => {
            RunError::Assumption(e.to_string())
        }
        other => RunError::Other(other.to_string()),
    })?;
    fs::create_dir_all(&config.output_dir)?;
    let path = config
        .output_dir
        .join(format!("{}_initial_mesh.txt", config.example));
    let f = fs::File::create(&path)?;
    mesh.write_dump(f)?;
    println!(
        "{}: {} vertices, {} triangles -> {}",
        config.example,
        mesh.n_vertices(),
        mesh.n_triangles(),
        path.display()
    );
    Ok(path)
}

/// Audits the interface resolution on a uniform mesh.
pub fn check(config: &ExperimentConfig) -> Result<(), RunError> {
    let problem = build_problem(config)?;
    let mesh = uniform_mesh(config.n0).map_err(|e| RunError::Other(e.to_string()))?;
    let report = cutfem::analysis::check_assumption2(&mesh, &problem.interface);
    if report.ok() {
        println!(
            "{} on n={}: interface resolution ok",
            config.example, config.n0
        );
        Ok(())
    } else {
        for v in report.violations.iter().take(10) {
            println!(
                "element {}: {} boundary crossings",
                v.element, v.boundary_crossings
            );
        }
        Err(RunError::Assumption(format!(
            "{} element(s) violate the resolution assumption on n={}",
            report.violations.len(),
            config.n0
        )))
    }
}
