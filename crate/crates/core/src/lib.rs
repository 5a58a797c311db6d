//! Unfitted finite elements for 2D elliptic interface problems.
//!
//! Solves `-div(beta grad u) = f` on the square `(-1,1)^2` where the
//! diffusion coefficient `beta` jumps across a closed interface curve that is
//! *not* aligned with the triangulation. Elements crossed by the interface
//! carry degrees of freedom from both sides, coupled weakly by Nitsche's
//! method with robust (beta- and cut-area-weighted) averages. On top of the
//! solver, [`recovery`] provides a superconvergent recovered gradient built
//! from independent polynomial-preserving recovery on the two fictitious
//! domains, together with the induced a posteriori error estimator.
//!
//! Module map:
//! - [`mesh`]: conforming right-isoceles triangulations, longest-edge bisection
//! - [`geometry`]: interface representation, cut-element classification and
//!   clipping, quadrature rules
//! - [`space`]: the doubled P1 space on the two fictitious domains
//! - [`assembly`]: the Nitsche bilinear form and right-hand side
//! - [`solver`]: Jacobi-preconditioned conjugate gradients
//! - [`recovery`]: gradient recovery, error estimator, mesh-dependent norm
//! - [`analysis`]: exact-solution interpolation, error norms, convergence
//!   orders, interface-resolution audit, curvature-adapted initial meshes
//! - [`problems`]: built-in benchmark problems on circle/flower/petal/spiral
//!   interfaces
//! - [`driver`]: one-call pipeline used by the CLI and the test suites

pub mod analysis;
pub mod assembly;
pub mod driver;
pub mod geometry;
pub mod mesh;
pub mod problems;
pub mod recovery;
pub mod solver;
pub mod space;
pub mod vec2;
pub mod vtk;

pub use vec2::Vec2;
