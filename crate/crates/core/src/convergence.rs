//! Uniform-refinement convergence studies against the manufactured solution.

use std::ops::RangeInclusive;

use rayon::prelude::*;

use crate::assembly::{solve_problem, AssemblyVariant};
use crate::error::{Error, Result};
use crate::fe_space::Difference;
use crate::mesh::build_structured;
use crate::norms::{divergence_constraint_omega1, rate, relative_errors, triple_norm, ErrorRecord};
use crate::problem::{BoundaryConditions, PermittivityField, ProblemSpec};
use crate::solver::CgOptions;

#[derive(Clone, Debug)]
pub struct ConvergenceConfig {
    pub m: u32,
    pub levels: RangeInclusive<u32>,
    pub s: f64,
    pub bc: BoundaryConditions,
    pub variant: AssemblyVariant,
    pub cg: CgOptions,
}

impl ConvergenceConfig {
    pub fn new(m: u32, levels: RangeInclusive<u32>) -> Self {
        ConvergenceConfig {
            m,
            levels,
            s: 1.0,
            bc: BoundaryConditions::dirichlet(),
            variant: AssemblyVariant::SymmetricStabilized,
            cg: CgOptions::default(),
        }
    }
}

/// Per-level solver statistics kept alongside the error table.
#[derive(Clone, Debug, PartialEq)]
pub struct LevelStats {
    pub level: u32,
    pub cg_iterations: usize,
    pub residual: f64,
    /// `|| div(eps E_h) ||` over `Omega1`.
    pub divergence: f64,
}

#[derive(Debug)]
pub struct ConvergenceReport {
    pub m: u32,
    pub records: Vec<ErrorRecord>,
    pub stats: Vec<LevelStats>,
    /// First level that failed, if any. Records before it are kept.
    pub failure: Option<(u32, Error)>,
}

fn run_level(cfg: &ConvergenceConfig, spec: &ProblemSpec, level: u32) -> Result<(ErrorRecord, LevelStats)> {
    let mesh = build_structured(level)?;
    let solved = solve_problem(&mesh, spec, cfg.cg)?;
    let exact = spec.exact.as_ref().expect("manufactured problem");
    let (e1, e2) = relative_errors(exact, &solved.field)?;
    let energy = triple_norm(&mesh, &Difference(exact, &solved.field), spec)?;
    Ok((
        ErrorRecord {
            level,
            nel: mesh.num_triangles(),
            nno: mesh.num_nodes(),
            e1,
            e2,
            q1: None,
            q2: None,
            triple_norm_error: energy,
        },
        LevelStats {
            level,
            cg_iterations: solved.iterations,
            residual: solved.residual,
            divergence: divergence_constraint_omega1(&solved.field, &spec.eps),
        },
    ))
}

/// Solve the manufactured problem on each level and compute observed rates
/// between consecutive levels.
pub fn run_convergence(cfg: &ConvergenceConfig) -> Result<ConvergenceReport> {
    let eps = PermittivityField::new(cfg.m)?;
    let spec = ProblemSpec::manufactured(eps, cfg.s, cfg.bc, cfg.variant)?;
    let levels: Vec<u32> = cfg.levels.clone().collect();
    let results: Vec<Result<(ErrorRecord, LevelStats)>> =
        levels.par_iter().map(|&l| run_level(cfg, &spec, l)).collect();

    let mut records: Vec<ErrorRecord> = Vec::new();
    let mut stats = Vec::new();
    let mut failure = None;
    for (l, res) in levels.into_iter().zip(results) {
        match res {
            Ok((mut rec, st)) => {
                if let Some(prev) = records.last() {
                    if prev.level + 1 == rec.level {
                        rec.q1 = rate(rec.e1, prev.e1).ok();
                        rec.q2 = rate(rec.e2, prev.e2).ok();
                    }
                }
                records.push(rec);
                stats.push(st);
            }
            Err(e) => {
                failure = Some((l, e));
                break;
            }
        }
    }
    Ok(ConvergenceReport { m: cfg.m, records, stats, failure })
}
