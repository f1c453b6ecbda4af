//! Adaptive solve-estimate-mark-refine loop.

use crate::assembly::solve_problem;
use crate::error::Error;
use crate::estimator::{effectivity, estimate, mark, EstimatorConfig};
use crate::fe_space::{Difference, FeFunction};
use crate::mesh::{refine_marked, Mesh};
use crate::norms::triple_norm;
use crate::problem::{PermittivityField, ProblemSpec};
use crate::solver::CgOptions;

#[derive(Clone, Debug, PartialEq)]
pub struct AdaptStep {
    pub iteration: usize,
    pub nel: usize,
    pub nno: usize,
    pub ndof: usize,
    pub cg_iterations: usize,
    pub eta_interior: f64,
    pub eta_boundary: f64,
    pub data_term: f64,
    pub estimate: f64,
    /// Energy-norm error, when an exact solution is known.
    pub true_error: Option<f64>,
    pub effectivity: Option<f64>,
    /// Elements whose centroid lies in `Omega1`.
    pub omega1_elements: usize,
    pub marked: usize,
}

impl AdaptStep {
    /// Elements in `Omega1` per element outside it.
    pub fn omega_ratio(&self) -> f64 {
        self.omega1_elements as f64 / (self.nel - self.omega1_elements).max(1) as f64
    }
}

#[derive(Debug)]
pub enum StopReason {
    Tolerance,
    MaxIterations,
    DofBudget,
    Solver(Error),
}

#[derive(Debug)]
pub struct AdaptHistory {
    pub steps: Vec<AdaptStep>,
    pub stop: StopReason,
    pub final_mesh: Mesh,
}

impl AdaptHistory {
    pub fn refinements(&self) -> usize {
        self.steps.iter().filter(|s| s.marked > 0).count()
    }
}

/// Run the adaptive loop from `initial`. `observe` is called once per
/// solved iterate. A solver failure ends the loop and is reported in
/// [`AdaptHistory::stop`] alongside the completed steps.
pub fn adaptive_loop(
    initial: Mesh,
    spec: &ProblemSpec,
    cfg: &EstimatorConfig,
    cg: CgOptions,
    mut observe: impl FnMut(&AdaptStep, &FeFunction<'_>),
) -> AdaptHistory {
    let mut mesh = initial;
    let mut steps = Vec::new();
    let stop = loop {
        let iteration = steps.len();
        let solved = match solve_problem(&mesh, spec, cg) {
            Ok(s) => s,
            Err(e) => break StopReason::Solver(e),
        };
        let uh = &solved.field;
        let ind = estimate(uh, spec, cfg);
        let est = ind.global_estimate();
        let true_error = match &spec.exact {
            Some(exact) => match triple_norm(&mesh, &Difference(exact, uh), spec) {
                Ok(e) => Some(e),
                Err(e) => break StopReason::Solver(e),
            },
            None => None,
        };
        let mut step = AdaptStep {
            iteration,
            nel: mesh.num_triangles(),
            nno: mesh.num_nodes(),
            ndof: 2 * mesh.num_nodes(),
            cg_iterations: solved.iterations,
            eta_interior: ind.eta_interior(),
            eta_boundary: ind.eta_boundary(),
            data_term: ind.data_term,
            estimate: est,
            true_error,
            effectivity: true_error.and_then(|t| effectivity(est, t).ok()),
            omega1_elements: (0..mesh.num_triangles())
                .filter(|&k| {
                    let c = mesh.centroid(k);
                    PermittivityField::contains(c.x, c.y)
                })
                .count(),
            marked: 0,
        };

        let reason = if est <= cfg.tol {
            Some(StopReason::Tolerance)
        } else if iteration >= cfg.max_iterations {
            Some(StopReason::MaxIterations)
        } else if step.ndof >= cfg.max_dofs {
            Some(StopReason::DofBudget)
        } else {
            None
        };
        let marks = if reason.is_none() { mark(&ind.element_totals(&mesh), cfg.theta) } else { Default::default() };
        step.marked = marks.len();
        observe(&step, uh);
        steps.push(step);
        if let Some(r) = reason {
            break r;
        }
        if marks.is_empty() {
            break StopReason::Tolerance;
        }
        mesh = refine_marked(&mesh, &marks);
    };
    AdaptHistory { steps, stop, final_mesh: mesh }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::AssemblyVariant;
    use crate::mesh::build_structured;
    use crate::problem::BoundaryConditions;

    fn spec() -> ProblemSpec {
        ProblemSpec::manufactured(
            PermittivityField::new(2).unwrap(),
            1.0,
            BoundaryConditions::dirichlet(),
            AssemblyVariant::SymmetricStabilized,
        )
        .unwrap()
    }

    #[test]
    fn infinite_tolerance_solves_once() {
        let cfg = EstimatorConfig { tol: f64::INFINITY, ..Default::default() };
        let mut calls = 0;
        let h = adaptive_loop(build_structured(2).unwrap(), &spec(), &cfg, CgOptions::default(), |_, _| calls += 1);
        assert_eq!(h.steps.len(), 1);
        assert_eq!(calls, 1);
        assert!(matches!(h.stop, StopReason::Tolerance));
        assert_eq!(h.refinements(), 0);
    }

    #[test]
    fn zero_tolerance_runs_to_iteration_cap() {
        let cfg = EstimatorConfig { tol: 0.0, max_iterations: 3, ..Default::default() };
        let h = adaptive_loop(build_structured(2).unwrap(), &spec(), &cfg, CgOptions::default(), |_, _| {});
        assert_eq!(h.refinements(), 3);
        assert_eq!(h.steps.len(), 4);
        assert!(matches!(h.stop, StopReason::MaxIterations));
        for w in h.steps.windows(2) {
            assert!(w[1].nel > w[0].nel);
        }
        assert_eq!(h.final_mesh.num_triangles(), h.steps[3].nel);
    }

    #[test]
    fn dof_budget_stops_loop() {
        let cfg = EstimatorConfig { tol: 0.0, max_iterations: 50, max_dofs: 200, ..Default::default() };
        let h = adaptive_loop(build_structured(2).unwrap(), &spec(), &cfg, CgOptions::default(), |_, _| {});
        assert!(matches!(h.stop, StopReason::DofBudget));
        assert!(h.steps.last().unwrap().ndof >= 200);
        assert!(h.steps[h.steps.len() - 2].ndof < 200);
    }

    #[test]
    fn solver_failure_keeps_history() {
        let cfg = EstimatorConfig { tol: 0.0, max_iterations: 5, ..Default::default() };
        let cg = CgOptions { rel_tol: 1e-12, max_iter: 30 };
        let h = adaptive_loop(build_structured(2).unwrap(), &spec(), &cfg, cg, |_, _| {});
        assert!(matches!(h.stop, StopReason::Solver(Error::NotConverged { .. })));
        assert!(!h.steps.is_empty());
    }
}
