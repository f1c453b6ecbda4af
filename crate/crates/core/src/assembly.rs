//! Assembly of the stabilized bilinear form and load functional.
//!
//! The volume part is
//! `s^2 (eps u, v) + (grad u, grad v) + D(u, v)` with the divergence
//! coupling `D` chosen by [`AssemblyVariant`], plus `s <u, v>` on absorbing
//! segments. Homogeneous Dirichlet segments are eliminated symmetrically.

use std::fmt;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fe_space::{dof, DofMap, ElementGeometry, FeFunction};
use crate::mesh::Mesh;
use crate::problem::{BcMode, ProblemSpec};
use crate::quadrature::{EdgeRule, TriangleRule};
use crate::solver::{solve_cg, CgOptions};
use crate::sparse::{dot, CsrMatrix};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum AssemblyVariant {
    /// `((eps - 1) div u, div v)`: symmetric, equal to the triple norm on the diagonal.
    #[default]
    SymmetricStabilized,
    /// `(div(eps u), div v) - (div u, div v)`, keeping the `grad eps . u` coupling.
    PaperLiteral,
}

impl fmt::Display for AssemblyVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AssemblyVariant::SymmetricStabilized => "sym",
            AssemblyVariant::PaperLiteral => "literal",
        })
    }
}

#[derive(Clone, Debug)]
pub struct SparseSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    pub dofs: DofMap,
}

type ElementBlock = ([[f64; 6]; 6], [f64; 6]);

/// Node-to-node adjacency expanded to interleaved dof rows.
fn sparsity(mesh: &Mesh) -> Vec<Vec<usize>> {
    let mut nbrs: Vec<Vec<usize>> = vec![Vec::new(); mesh.num_nodes()];
    for t in mesh.triangles() {
        for &a in &t.nodes {
            nbrs[a].extend_from_slice(&t.nodes);
        }
    }
    let mut rows = Vec::with_capacity(2 * mesh.num_nodes());
    for mut n in nbrs {
        n.sort_unstable();
        n.dedup();
        let cols: Vec<usize> = n.iter().flat_map(|&j| [dof(j, 0), dof(j, 1)]).collect();
        rows.push(cols.clone());
        rows.push(cols);
    }
    rows
}

fn element_block(geo: &ElementGeometry, spec: &ProblemSpec, rule: &TriangleRule) -> ElementBlock {
    let mut ke = [[0.0; 6]; 6];
    let mut fe = [0.0; 6];
    let gl = &geo.grad_lambda;
    let s2 = spec.s * spec.s;

    // stiffness: constant gradients
    for a in 0..3 {
        for b in 0..3 {
            let g = geo.area * (gl[a][0] * gl[b][0] + gl[a][1] * gl[b][1]);
            for c in 0..2 {
                ke[2 * a + c][2 * b + c] += g;
            }
        }
    }

    for (bary, w) in rule.scaled(geo.area) {
        let p = geo.point(bary);
        let eps = spec.eps.jet(p.x, p.y);
        let f = (spec.source)(p.x, p.y);
        for a in 0..3 {
            for c in 0..2 {
                let row = 2 * a + c;
                fe[row] += w * f[c] * bary[a];
                for b in 0..3 {
                    let m = w * s2 * eps.v * bary[a] * bary[b];
                    ke[row][2 * b + c] += m;
                    for d in 0..2 {
                        // test (a, c) has div = d_c lambda_a; trial (b, d) has div = d_d lambda_b
                        let trial = match spec.variant {
                            AssemblyVariant::SymmetricStabilized => (eps.v - 1.0) * gl[b][d],
                            AssemblyVariant::PaperLiteral => (eps.v - 1.0) * gl[b][d] + eps.g[d] * bary[b],
                        };
                        ke[row][2 * b + d] += w * trial * gl[a][c];
                    }
                }
            }
        }
    }
    (ke, fe)
}

/// Assemble the system for `spec` on `mesh`.
#[allow(clippy::needless_range_loop)]
pub fn assemble(mesh: &Mesh, spec: &ProblemSpec) -> Result<SparseSystem> {
    if mesh.num_triangles() == 0 {
        return Err(Error::EmptyMesh);
    }
    let rule = TriangleRule::degree4();
    let geometry = ElementGeometry::all(mesh);
    let blocks: Vec<ElementBlock> = geometry.par_iter().map(|geo| element_block(geo, spec, &rule)).collect();

    let n = 2 * mesh.num_nodes();
    let mut matrix = CsrMatrix::from_pattern(sparsity(mesh));
    let mut rhs = vec![0.0; n];
    for (k, (ke, fe)) in blocks.iter().enumerate() {
        if ke.iter().flatten().chain(fe.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteAssembly { element: k });
        }
        let t = &mesh.triangles()[k];
        for a in 0..3 {
            for c in 0..2 {
                let i = dof(t.nodes[a], c);
                rhs[i] += fe[2 * a + c];
                for b in 0..3 {
                    for d in 0..2 {
                        matrix.add(i, dof(t.nodes[b], d), ke[2 * a + c][2 * b + d]);
                    }
                }
            }
        }
    }

    // absorbing boundary: s <u, v> and <g, v>
    let edge_rule = EdgeRule::gauss3();
    for e in mesh.boundary_edges() {
        if spec.bc.mode(e.segment) != BcMode::RobinAbsorbing {
            continue;
        }
        let (p, q) = (mesh.nodes()[e.nodes[0]], mesh.nodes()[e.nodes[1]]);
        let mut me = [[0.0; 2]; 2];
        let mut ge = [[0.0; 2]; 2];
        for (t, w) in edge_rule.scaled(e.length) {
            let phi = [1.0 - t, t];
            let (x, y) = (p.x + t * (q.x - p.x), p.y + t * (q.y - p.y));
            let g = (spec.robin_data)(e.segment, x, y);
            for a in 0..2 {
                for c in 0..2 {
                    ge[a][c] += w * g[c] * phi[a];
                }
                for b in 0..2 {
                    me[a][b] += w * spec.s * phi[a] * phi[b];
                }
            }
        }
        for a in 0..2 {
            for c in 0..2 {
                let i = dof(e.nodes[a], c);
                rhs[i] += ge[a][c];
                for b in 0..2 {
                    matrix.add(i, dof(e.nodes[b], c), me[a][b]);
                }
            }
        }
        if rhs.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteAssembly { element: e.element });
        }
    }

    let dirichlet_nodes =
        mesh.boundary_edges().iter().filter(|e| spec.bc.mode(e.segment) == BcMode::Dirichlet0).flat_map(|e| e.nodes);
    let dofs = DofMap::new(mesh).with_constrained_nodes(dirichlet_nodes);
    eliminate(&mut matrix, &mut rhs, &dofs, |_| 0.0);

    Ok(SparseSystem { matrix, rhs, dofs })
}

/// Symmetric elimination of prescribed dofs: move known columns to the
/// right-hand side, then replace row and column by the identity.
fn eliminate(matrix: &mut CsrMatrix, rhs: &mut [f64], dofs: &DofMap, value: impl Fn(usize) -> f64) {
    if dofs.constrained.is_empty() {
        return;
    }
    let prescribed: Vec<f64> = (0..rhs.len()).map(|i| if dofs.is_constrained(i) { value(i) } else { 0.0 }).collect();
    for i in 0..rhs.len() {
        let constrained_row = dofs.is_constrained(i);
        let (cols, vals) = matrix.row_values_mut(i);
        for (&j, v) in cols.iter().zip(vals.iter_mut()) {
            if constrained_row {
                *v = if i == j { 1.0 } else { 0.0 };
            } else if dofs.is_constrained(j) {
                rhs[i] -= *v * prescribed[j];
                *v = 0.0;
            }
        }
        if constrained_row {
            rhs[i] = prescribed[i];
        }
    }
}

impl SparseSystem {
    pub fn dim(&self) -> usize {
        self.rhs.len()
    }

    /// `u^T A u`.
    pub fn quadratic_form(&self, u: &[f64]) -> Result<f64> {
        if u.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: u.len() });
        }
        Ok(dot(u, &self.matrix.mul_vec(u)))
    }

    /// Solve with preconditioned CG and wrap the result as a finite element field.
    pub fn solve<'m>(&self, mesh: &'m Mesh, opts: CgOptions) -> Result<Solve<'m>> {
        let out = solve_cg(&self.matrix, &self.rhs, opts)?;
        Ok(Solve { field: FeFunction::new(mesh, out.x)?, iterations: out.iterations, residual: out.residual })
    }
}

#[derive(Clone, Debug)]
pub struct Solve<'m> {
    pub field: FeFunction<'m>,
    pub iterations: usize,
    pub residual: f64,
}

/// Assemble and solve in one step.
pub fn solve_problem<'m>(mesh: &'m Mesh, spec: &ProblemSpec, opts: CgOptions) -> Result<Solve<'m>> {
    assemble(mesh, spec)?.solve(mesh, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fe_space::interpolate;
    use crate::mesh::build_structured;
    use crate::problem::{BoundaryConditions, PermittivityField};
    use std::sync::Arc;

    fn unit_source_spec(eps: PermittivityField, bc: BoundaryConditions, variant: AssemblyVariant) -> ProblemSpec {
        ProblemSpec::with_source(eps, 1.0, bc, variant, Arc::new(|_, _| [1.0, 0.0])).unwrap()
    }

    #[test]
    fn element_mass_block_matches_analytic_p1_integrals() {
        let m = build_structured(1).unwrap();
        let spec = unit_source_spec(
            PermittivityField::uniform(),
            BoundaryConditions::neumann(),
            AssemblyVariant::SymmetricStabilized,
        );
        let geo = ElementGeometry::new(&m, 0);
        let (ke, _) = element_block(&geo, &spec, &TriangleRule::degree4());
        let area = geo.area;
        for a in 0..3 {
            for b in 0..3 {
                let stiff = area
                    * (geo.grad_lambda[a][0] * geo.grad_lambda[b][0] + geo.grad_lambda[a][1] * geo.grad_lambda[b][1]);
                let mass = if a == b { area / 6.0 } else { area / 12.0 };
                for c in 0..2 {
                    assert!((ke[2 * a + c][2 * b + c] - stiff - mass).abs() < 1e-15);
                    // no cross-component coupling when eps = 1
                    assert_eq!(ke[2 * a + c][2 * b + 1 - c], 0.0);
                }
            }
        }
    }

    #[test]
    fn boundary_mass_block() {
        let m = build_structured(2).unwrap();
        let mut spec = unit_source_spec(
            PermittivityField::uniform(),
            BoundaryConditions::absorbing(),
            AssemblyVariant::SymmetricStabilized,
        );
        spec.s = 3.0;
        let with = assemble(&m, &spec).unwrap();
        spec.bc = BoundaryConditions::neumann();
        let without = assemble(&m, &spec).unwrap();
        // nodes 1 and 2 are consecutive on the bottom side, edge length 1/4
        let h = 0.25;
        let (i, j) = (dof(1, 0), dof(2, 0));
        let diff = |a: usize, b: usize| with.matrix.get(a, b) - without.matrix.get(a, b);
        assert!((diff(i, j) - 3.0 * h / 6.0).abs() < 1e-14);
        // interior bottom node touches two boundary edges
        assert!((diff(i, i) - 2.0 * 3.0 * h / 3.0).abs() < 1e-14);
        assert!((diff(dof(0, 1), dof(0, 1)) - 3.0 * h / 3.0).abs() < 1e-14);
        assert_eq!(diff(i, dof(2, 1)), 0.0);
    }

    #[test]
    fn variants_coincide_for_uniform_permittivity() {
        let m = build_structured(3).unwrap();
        let bc = BoundaryConditions::absorbing();
        let a = assemble(&m, &unit_source_spec(PermittivityField::uniform(), bc, AssemblyVariant::SymmetricStabilized))
            .unwrap();
        let b =
            assemble(&m, &unit_source_spec(PermittivityField::uniform(), bc, AssemblyVariant::PaperLiteral)).unwrap();
        assert_eq!(a.matrix, b.matrix);
        assert_eq!(a.rhs, b.rhs);
    }

    #[test]
    fn literal_variant_is_not_symmetric_with_varying_permittivity() {
        let m = build_structured(3).unwrap();
        let eps = PermittivityField::new(2).unwrap();
        let sym =
            assemble(&m, &unit_source_spec(eps, BoundaryConditions::dirichlet(), AssemblyVariant::SymmetricStabilized))
                .unwrap();
        let lit = assemble(&m, &unit_source_spec(eps, BoundaryConditions::dirichlet(), AssemblyVariant::PaperLiteral))
            .unwrap();
        assert!(sym.matrix.symmetry_defect() <= 1e-12 * sym.matrix.max_abs());
        assert!(lit.matrix.symmetry_defect() > 1e-6);
    }

    #[test]
    fn constants_see_only_the_mass() {
        let m = build_structured(3).unwrap();
        let spec = unit_source_spec(
            PermittivityField::uniform(),
            BoundaryConditions::neumann(),
            AssemblyVariant::SymmetricStabilized,
        );
        let sys = assemble(&m, &spec).unwrap();
        let u = interpolate(&m, |_, _| [1.0, 1.0]).unwrap();
        assert!((sys.quadratic_form(u.values()).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(sys.quadratic_form(&vec![0.0; sys.dim()]).unwrap(), 0.0);
        assert!(matches!(sys.quadratic_form(&[1.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn dirichlet_rows_are_identity() {
        let m = build_structured(2).unwrap();
        let spec = unit_source_spec(
            PermittivityField::new(2).unwrap(),
            BoundaryConditions::dirichlet(),
            AssemblyVariant::SymmetricStabilized,
        );
        let sys = assemble(&m, &spec).unwrap();
        assert_eq!(sys.dofs.num_free(), 18);
        for &d in &sys.dofs.constrained {
            assert_eq!(sys.rhs[d], 0.0);
            for (j, v) in sys.matrix.row(d) {
                assert_eq!(v, if j == d { 1.0 } else { 0.0 });
                assert_eq!(sys.matrix.get(j, d), if j == d { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn non_finite_source_is_reported() {
        let m = build_structured(1).unwrap();
        let spec = ProblemSpec::with_source(
            PermittivityField::uniform(),
            1.0,
            BoundaryConditions::neumann(),
            AssemblyVariant::SymmetricStabilized,
            Arc::new(|_, _| [f64::NAN, 0.0]),
        )
        .unwrap();
        assert!(matches!(assemble(&m, &spec), Err(Error::NonFiniteAssembly { element: 0 })));
    }

    mod properties {
        use super::*;
        use crate::fe_space::FeFunction;
        use crate::mesh::refine_marked;
        use crate::norms::triple_norm;
        use rand::{Rng, SeedableRng};
        use rand_chacha::ChaCha8Rng;

        fn random_vector(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
            (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
        }

        fn robin(m: u32, s: f64) -> ProblemSpec {
            ProblemSpec::manufactured(
                PermittivityField::new(m).unwrap(),
                s,
                BoundaryConditions::absorbing(),
                AssemblyVariant::SymmetricStabilized,
            )
            .unwrap()
        }

        #[test]
        fn quadratic_form_is_triple_norm_squared() {
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            for (l, samples) in [(1, 10), (2, 10), (3, 50), (4, 10), (5, 5)] {
                let mesh = build_structured(l).unwrap();
                let spec = robin(2, 1.5);
                let sys = assemble(&mesh, &spec).unwrap();
                assert_eq!(sys.quadratic_form(&vec![0.0; sys.dim()]).unwrap(), 0.0);
                for _ in 0..samples {
                    let u = random_vector(&mut rng, sys.dim());
                    let q = sys.quadratic_form(&u).unwrap();
                    let t = triple_norm(&mesh, &FeFunction::new(&mesh, u).unwrap(), &spec).unwrap().powi(2);
                    assert!(q > 0.0);
                    assert!((q - t).abs() <= 1e-9 * t, "l={l}: {q} vs {t}");
                }
            }
        }

        #[test]
        fn symmetric_on_every_test_mesh() {
            let mut meshes: Vec<Mesh> = (1..=5).map(|l| build_structured(l).unwrap()).collect();
            let refined = refine_marked(&meshes[1], &[0, 5, 17].into_iter().collect());
            meshes.push(refined);
            for mesh in &meshes {
                for m in [2, 5, 9] {
                    for bc in [BoundaryConditions::dirichlet(), BoundaryConditions::absorbing()] {
                        let spec = ProblemSpec::manufactured(
                            PermittivityField::new(m).unwrap(),
                            1.0,
                            bc,
                            AssemblyVariant::SymmetricStabilized,
                        )
                        .unwrap();
                        let a = assemble(mesh, &spec).unwrap().matrix;
                        assert!(a.symmetry_defect() <= 1e-12 * a.max_abs());
                    }
                }
            }
        }

        #[test]
        fn cg_budget_on_level_four() {
            let mesh = build_structured(4).unwrap();
            let spec = ProblemSpec::manufactured(
                PermittivityField::new(2).unwrap(),
                1.0,
                BoundaryConditions::dirichlet(),
                AssemblyVariant::SymmetricStabilized,
            )
            .unwrap();
            let out = solve_problem(&mesh, &spec, CgOptions::default()).unwrap();
            assert!(out.residual <= 1e-12);
            assert!(out.iterations < 2000, "{}", out.iterations);
        }

        #[test]
        fn galerkin_orthogonality() {
            let mut rng = ChaCha8Rng::seed_from_u64(11);
            for bc in [BoundaryConditions::dirichlet(), BoundaryConditions::absorbing_clamped()] {
                let mesh = build_structured(4).unwrap();
                let spec = ProblemSpec::manufactured(
                    PermittivityField::new(5).unwrap(),
                    1.0,
                    bc,
                    AssemblyVariant::SymmetricStabilized,
                )
                .unwrap();
                let sys = assemble(&mesh, &spec).unwrap();
                let x = sys.solve(&mesh, CgOptions::default()).unwrap().field.into_values();
                let ax = sys.matrix.mul_vec(&x);
                let r: Vec<f64> = sys.rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
                let b_norm = crate::sparse::norm2(&sys.rhs);
                for _ in 0..20 {
                    let v = random_vector(&mut rng, sys.dim());
                    assert!(dot(&v, &r).abs() <= 1e-10 * b_norm);
                }
            }
        }
    }
}
