//! Stabilized P1 finite elements for the time-harmonic Maxwell system
//! `s^2 eps E - lap E - grad div((eps - 1) E) = F` on the unit square.

pub mod adapt;
pub mod assembly;
pub mod convergence;
pub mod error;
pub mod estimator;
pub mod fe_space;
pub mod io;
pub mod jet;
pub mod mesh;
pub mod norms;
pub mod problem;
pub mod quadrature;
pub mod solver;
pub mod sparse;

pub use adapt::{adaptive_loop, AdaptHistory, AdaptStep, StopReason};
pub use assembly::{assemble, solve_problem, AssemblyVariant, Solve, SparseSystem};
pub use convergence::{run_convergence, ConvergenceConfig, ConvergenceReport, LevelStats};
pub use error::{Error, Result};
pub use estimator::{EstimatorConfig, IndicatorField};
pub use fe_space::{interpolate, DofMap, FeFunction, Mat2, MeshField, Vec2};
pub use mesh::{build_structured, refine_marked, refine_uniform, Mesh, Region, Segment};
pub use norms::{rate, relative_errors, triple_norm, ErrorRecord};
pub use problem::{BcMode, BoundaryConditions, ManufacturedSolution, PermittivityField, ProblemSpec};
pub use solver::{solve_cg, CgOptions};
