//! Shared fixtures for the benchmarks in `benches/`.

use hmaxwell::{build_structured, AssemblyVariant, BoundaryConditions, Mesh, PermittivityField, ProblemSpec};

/// Structured mesh and manufactured problem with `s = 1`.
pub fn fixture(level: u32, m: u32, bc: BoundaryConditions) -> (Mesh, ProblemSpec) {
    let mesh = build_structured(level).expect("valid level");
    let spec = ProblemSpec::manufactured(
        PermittivityField::new(m).expect("valid m"),
        1.0,
        bc,
        AssemblyVariant::SymmetricStabilized,
    )
    .expect("valid problem");
    (mesh, spec)
}
