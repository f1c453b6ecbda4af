use std::io::Write;
use std::path::Path;

use anyhow::{anyhow, Context, Result};
use hmaxwell::adapt::{adaptive_loop, StopReason};
use hmaxwell::estimator::estimate;
use hmaxwell::fe_space::Difference;
use hmaxwell::io::{self, write_file};
use hmaxwell::{
    assemble, build_structured, relative_errors, run_convergence, triple_norm, CgOptions, ConvergenceConfig, Mesh,
    PermittivityField, ProblemSpec, Segment, Vec2,
};

use crate::config::{Format, RunConfig};

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| hmaxwell::Error::io(dir, e))?;
    Ok(())
}

fn spec_for(cfg: &RunConfig, m: u32) -> Result<ProblemSpec> {
    Ok(ProblemSpec::manufactured(PermittivityField::new(m)?, cfg.s, cfg.bc, cfg.variant)?)
}

pub fn converge(cfg: &RunConfig) -> Result<()> {
    ensure_dir(&cfg.out)?;
    let mut failed = Vec::new();
    for &m in &cfg.m {
        let study = ConvergenceConfig {
            s: cfg.s,
            bc: cfg.bc,
            variant: cfg.variant,
            ..ConvergenceConfig::new(m, cfg.levels.0..=cfg.levels.1)
        };
        let report = run_convergence(&study)?;
        let stem = cfg.out.join(format!("converge_m{m}"));
        if cfg.wants(Format::Csv) {
            write_file(&stem.with_extension("csv"), |w| io::write_convergence_csv(w, &report.records))?;
            write_file(&stem.with_extension("raw.csv"), |w| io::write_convergence_raw_csv(w, &report.records))?;
        }
        if cfg.wants(Format::Markdown) {
            write_file(&stem.with_extension("md"), |w| io::write_convergence_markdown(w, m, &report.records))?;
        }
        let mut stdout = std::io::stdout().lock();
        io::write_convergence_markdown(&mut stdout, m, &report.records)?;
        writeln!(stdout)?;
        if let Some((level, e)) = report.failure {
            eprintln!("m = {m}: level {level} failed: {e}");
            failed.push(m);
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(anyhow!("convergence study incomplete for m = {failed:?}; partial tables written"))
    }
}

fn write_field_vtk(path: &Path, mesh: &Mesh, title: &str, fields: &[(&str, &[Vec2])]) -> Result<()> {
    write_file(path, |w| io::write_vtk(w, mesh, title, fields))?;
    Ok(())
}

pub fn adapt(cfg: &RunConfig, max_iterations: usize, max_dofs: usize, edge_jumps: bool) -> Result<()> {
    ensure_dir(&cfg.out)?;
    let m = cfg.m[0];
    let spec = spec_for(cfg, m)?;
    let est_cfg =
        hmaxwell::EstimatorConfig { max_iterations, max_dofs, include_edge_jumps: edge_jumps, ..cfg.estimator };
    let mut io_error = None;
    let history = adaptive_loop(build_structured(cfg.levels.0)?, &spec, &est_cfg, CgOptions::default(), |step, uh| {
        println!(
            "iter {:>2}  nel {:>6}  ndof {:>6}  estimate {:.4e}  error {}  marked {}",
            step.iteration,
            step.nel,
            step.ndof,
            step.estimate,
            step.true_error.map(|e| format!("{e:.4e}")).unwrap_or_default(),
            step.marked
        );
        if cfg.wants(Format::Vtk) && io_error.is_none() {
            let vals = io::nodal_values(uh);
            let path = cfg.out.join(format!("adapt_iter{:03}.vtk", step.iteration));
            if let Err(e) =
                write_field_vtk(&path, uh.mesh(), &format!("adaptive iterate {}", step.iteration), &[("E_h", &vals)])
            {
                io_error = Some(e);
            }
        }
    });
    if let Some(e) = io_error {
        return Err(e);
    }
    if cfg.wants(Format::Csv) {
        write_file(&cfg.out.join("history.csv"), |w| io::write_history_csv(w, &history.steps))?;
    }
    let (first, last) = (history.steps.first(), history.steps.last());
    if let (Some(a), Some(b)) = (first, last) {
        println!("omega1/omega2 element ratio: {:.3} -> {:.3}", a.omega_ratio(), b.omega_ratio());
    }
    match history.stop {
        StopReason::Tolerance => println!("stopped: estimate below tolerance {}", est_cfg.tol),
        StopReason::MaxIterations => println!("stopped: iteration limit {max_iterations}"),
        StopReason::DofBudget => println!("stopped: dof budget {max_dofs}"),
        StopReason::Solver(e) => return Err(anyhow!(e).context("adaptive loop aborted; partial history written")),
    }
    Ok(())
}

pub fn solve(cfg: &RunConfig) -> Result<()> {
    ensure_dir(&cfg.out)?;
    let level = cfg.levels.0;
    for &m in &cfg.m {
        let spec = spec_for(cfg, m)?;
        let mesh = build_structured(level)?;
        let system = assemble(&mesh, &spec)?;
        let stem = cfg.out.join(format!("solve_l{level}_m{m}"));
        if cfg.wants(Format::Matrixmarket) {
            write_file(&stem.with_extension("mtx"), |w| io::write_matrix_market(w, &system.matrix))?;
        }
        let solved = system.solve(&mesh, CgOptions::default()).with_context(|| format!("solve failed for m = {m}"))?;
        let uh = &solved.field;
        let exact = spec.exact.as_ref().expect("manufactured problem");
        let (e1, e2) = relative_errors(exact, uh)?;
        let energy = triple_norm(&mesh, &Difference(exact, uh), &spec)?;
        let est = estimate(uh, &spec, &cfg.estimator).global_estimate();

        if cfg.wants(Format::Vtk) {
            let computed = io::nodal_values(uh);
            let reference: Vec<Vec2> = mesh.nodes().iter().map(|p| exact.value(p.x, p.y)).collect();
            write_field_vtk(
                &stem.with_extension("vtk"),
                &mesh,
                &format!("level {level} m {m} s {}", cfg.s),
                &[("E_h", &computed), ("E", &reference)],
            )?;
        }
        if cfg.wants(Format::Csv) {
            write_file(&stem.with_extension("csv"), |w| io::write_field_csv(w, uh))?;
        }
        let diagnostics = format!(
            "level {level}\nm {m}\ns {}\nbc {}\nvariant {}\ndofs {}\ncg_iterations {}\ncg_residual {:e}\ne1 {:e}\ne2 {:e}\ntriple_norm_error {:e}\nestimate {:e}\n",
            cfg.s,
            Segment::ALL.iter().map(|&g| format!("{g:?}={}", cfg.bc.mode(g))).collect::<Vec<_>>().join(" "),
            cfg.variant,
            system.dim(),
            solved.iterations,
            solved.residual,
            e1,
            e2,
            energy,
            est
        );
        print!("{diagnostics}");
        write_file(&stem.with_extension("txt"), |w| w.write_all(diagnostics.as_bytes()))?;
    }
    Ok(())
}
