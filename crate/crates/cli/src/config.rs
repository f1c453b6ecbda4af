//! Command-line flags merged over an optional config file and defaults.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use hmaxwell::io::{parse_bc, parse_levels, parse_m_list, parse_variant, read_config, ConfigFile};
use hmaxwell::{AssemblyVariant, BoundaryConditions, EstimatorConfig};

#[derive(Args, Debug, Clone, Default)]
pub struct CommonArgs {
    /// key=value file; flags given on the command line take precedence
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Permittivity exponents, comma separated
    #[arg(long, value_parser = parse_m_list)]
    pub m: Option<::std::vec::Vec<u32>>,
    /// Mesh levels as A:B (or a single level)
    #[arg(long, value_parser = parse_levels)]
    pub levels: Option<(u32, u32)>,
    /// Laplace frequency
    #[arg(long)]
    pub s: Option<f64>,
    /// dirichlet0 | neumann0 | robin | robin-clamped
    #[arg(long, value_parser = parse_bc)]
    pub bc: Option<BoundaryConditions>,
    /// sym | literal
    #[arg(long, value_parser = parse_variant)]
    pub variant: Option<AssemblyVariant>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    /// Bulk marking fraction
    #[arg(long)]
    pub theta: Option<f64>,
    /// Adaptive stopping tolerance (`inf` accepted)
    #[arg(long)]
    pub tol: Option<f64>,
    /// Output directory
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Comma separated subset of csv, markdown, vtk, matrixmarket
    #[arg(long, value_delimiter = ',')]
    pub formats: Option<Vec<Format>>,
}

#[derive(clap::ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Markdown,
    Vtk,
    Matrixmarket,
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub m: Vec<u32>,
    pub levels: (u32, u32),
    pub s: f64,
    pub bc: BoundaryConditions,
    pub variant: AssemblyVariant,
    pub estimator: EstimatorConfig,
    pub tol: Option<f64>,
    pub out: PathBuf,
    pub formats: Vec<Format>,
}

impl RunConfig {
    pub fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }
}

pub struct Defaults {
    pub levels: (u32, u32),
    pub formats: &'static [Format],
}

pub fn resolve(args: &CommonArgs, defaults: Defaults) -> Result<RunConfig> {
    let file = match &args.config {
        Some(p) => read_config(p).with_context(|| format!("reading config {}", p.display()))?,
        None => ConfigFile::default(),
    };
    let base = EstimatorConfig::default();
    let cfg = RunConfig {
        m: args.m.clone().or(file.m).unwrap_or_else(|| vec![2]),
        levels: args.levels.or(file.levels).unwrap_or(defaults.levels),
        s: args.s.or(file.s).unwrap_or(1.0),
        bc: args.bc.or(file.bc).unwrap_or_default(),
        variant: args.variant.or(file.variant).unwrap_or_default(),
        estimator: EstimatorConfig {
            alpha: args.alpha.or(file.alpha).unwrap_or(base.alpha),
            beta: args.beta.or(file.beta).unwrap_or(base.beta),
            theta: args.theta.or(file.theta).unwrap_or(base.theta),
            tol: args.tol.or(file.tol).unwrap_or(base.tol),
            ..base
        },
        tol: args.tol.or(file.tol),
        out: args.out.clone(),
        formats: args.formats.clone().unwrap_or_else(|| defaults.formats.to_vec()),
    };
    if cfg.m.is_empty() {
        bail!("no m values given");
    }
    if let Some(&m) = cfg.m.iter().find(|&&m| m < 2) {
        bail!("invalid m = {m}: the exponent must be at least 2");
    }
    let (a, b) = cfg.levels;
    if a < 1 || b > 12 {
        bail!("level range {a}:{b} outside 1:12");
    }
    if !(cfg.s.is_finite() && cfg.s > 0.0) {
        bail!("invalid s = {}", cfg.s);
    }
    cfg.estimator.validate()?;
    Ok(cfg)
}
