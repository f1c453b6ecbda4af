//! Weighted norms, the energy (triple) norm, relative errors and rates.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fe_space::{ElementGeometry, FeFunction, Mat2, MeshField, Vec2};
use crate::mesh::{Mesh, Node, Segment};
use crate::problem::{BcMode, ManufacturedSolution, PermittivityField, ProblemSpec};
use crate::quadrature::{EdgeRule, TriangleRule};

impl MeshField for ManufacturedSolution {
    fn value(&self, _k: usize, _bary: [f64; 3], p: Node) -> Vec2 {
        ManufacturedSolution::value(self, p.x, p.y)
    }

    fn grad(&self, _k: usize, _bary: [f64; 3], p: Node) -> Mat2 {
        ManufacturedSolution::grad(self, p.x, p.y)
    }
}

/// What is integrated at each volume quadrature point.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Quantity {
    Value,
    Gradient,
    Divergence,
}

/// Volume weight `omega(x) >= 0` and boundary weight on a set of segments.
pub struct WeightedNormSpec<'a> {
    pub volume: &'a (dyn Fn(f64, f64) -> f64 + Sync),
    pub boundary: f64,
    pub segments: &'a [Segment],
}

fn pointwise(field: &(impl MeshField + ?Sized), what: Quantity, k: usize, bary: [f64; 3], p: Node) -> f64 {
    match what {
        Quantity::Value => {
            let v = field.value(k, bary, p);
            v[0] * v[0] + v[1] * v[1]
        }
        Quantity::Gradient => field.grad(k, bary, p).iter().flatten().map(|g| g * g).sum(),
        Quantity::Divergence => {
            let g = field.grad(k, bary, p);
            (g[0][0] + g[1][1]).powi(2)
        }
    }
}

/// Squared weighted volume integral of `|q(u)|^2 omega`, restricted to
/// elements accepted by `filter`.
pub fn weighted_volume_sq(
    mesh: &Mesh,
    field: &(impl MeshField + ?Sized),
    what: Quantity,
    weight: &(dyn Fn(f64, f64) -> f64 + Sync),
    filter: &(dyn Fn(usize) -> bool + Sync),
) -> Result<f64> {
    let rule = TriangleRule::degree4();
    let parts: Vec<Result<f64>> = (0..mesh.num_triangles())
        .into_par_iter()
        .map(|k| {
            if !filter(k) {
                return Ok(0.0);
            }
            let geo = ElementGeometry::new(mesh, k);
            let mut acc = 0.0;
            for (bary, w) in rule.scaled(geo.area) {
                let p = geo.point(bary);
                let om = weight(p.x, p.y);
                if om < 0.0 {
                    return Err(Error::NegativeWeight(om));
                }
                acc += w * om * pointwise(field, what, k, bary, p);
            }
            Ok(acc)
        })
        .collect();
    parts.into_iter().sum()
}

/// Squared weighted boundary integral of `|u|^2` over the given segments.
pub fn weighted_boundary_sq(
    mesh: &Mesh,
    field: &(impl MeshField + ?Sized),
    weight: f64,
    segments: &[Segment],
) -> Result<f64> {
    if weight < 0.0 {
        return Err(Error::NegativeWeight(weight));
    }
    let rule = EdgeRule::gauss3();
    let mut total = 0.0;
    for e in mesh.boundary_edges() {
        if !segments.contains(&e.segment) {
            continue;
        }
        for (_, w, k, bary, p) in edge_points(mesh, e, &rule) {
            let v = field.value(k, bary, p);
            total += w * weight * (v[0] * v[0] + v[1] * v[1]);
        }
    }
    Ok(total)
}

/// Quadrature points on a boundary edge expressed in its incident element:
/// `(t, weight, element, barycentric, point)`.
pub(crate) fn edge_points<'r>(
    mesh: &Mesh,
    e: &crate::mesh::BoundaryEdge,
    rule: &'r EdgeRule,
) -> impl Iterator<Item = (f64, f64, usize, [f64; 3], Node)> + 'r {
    let tri = mesh.triangles()[e.element].nodes;
    let la = tri.iter().position(|&n| n == e.nodes[0]).expect("edge node in element");
    let lb = tri.iter().position(|&n| n == e.nodes[1]).expect("edge node in element");
    let (p, q) = (mesh.nodes()[e.nodes[0]], mesh.nodes()[e.nodes[1]]);
    let k = e.element;
    rule.scaled(e.length).map(move |(t, w)| {
        let mut bary = [0.0; 3];
        bary[la] = 1.0 - t;
        bary[lb] = t;
        let pt = Node { x: p.x + t * (q.x - p.x), y: p.y + t * (q.y - p.y) };
        (t, w, k, bary, pt)
    })
}

/// `sqrt( int |u|^2 omega + boundary * int_segments |u|^2 )`.
pub fn weighted_l2(mesh: &Mesh, field: &(impl MeshField + ?Sized), spec: &WeightedNormSpec<'_>) -> Result<f64> {
    let vol = weighted_volume_sq(mesh, field, Quantity::Value, spec.volume, &|_| true)?;
    let bnd =
        if spec.segments.is_empty() { 0.0 } else { weighted_boundary_sq(mesh, field, spec.boundary, spec.segments)? };
    Ok((vol + bnd).sqrt())
}

/// Segments carrying the absorbing condition.
pub fn robin_segments(spec: &ProblemSpec) -> Vec<Segment> {
    Segment::ALL.into_iter().filter(|&s| spec.bc.mode(s) == BcMode::RobinAbsorbing).collect()
}

/// The four terms of the squared triple norm:
/// `|u|^2_{s^2 eps}`, `|grad u|^2`, `|div u|^2_{eps - 1}` and `s |u|^2` on absorbing segments.
pub fn triple_norm_terms(mesh: &Mesh, field: &(impl MeshField + ?Sized), spec: &ProblemSpec) -> Result<[f64; 4]> {
    let eps = spec.eps;
    let s2 = spec.s * spec.s;
    let all = |_: usize| true;
    Ok([
        weighted_volume_sq(mesh, field, Quantity::Value, &|x, y| s2 * eps.eval(x, y), &all)?,
        weighted_volume_sq(mesh, field, Quantity::Gradient, &|_, _| 1.0, &all)?,
        weighted_volume_sq(mesh, field, Quantity::Divergence, &|x, y| eps.eval(x, y) - 1.0, &all)?,
        weighted_boundary_sq(mesh, field, spec.s, &robin_segments(spec))?,
    ])
}

pub fn triple_norm(mesh: &Mesh, field: &(impl MeshField + ?Sized), spec: &ProblemSpec) -> Result<f64> {
    Ok(triple_norm_terms(mesh, field, spec)?.iter().sum::<f64>().sqrt())
}

/// Relative L2 and H1-seminorm errors `(e1, e2)` of `uh` against the exact field.
pub fn relative_errors(exact: &ManufacturedSolution, uh: &FeFunction<'_>) -> Result<(f64, f64)> {
    let mesh = uh.mesh();
    let diff = crate::fe_space::Difference(exact, uh);
    let one = |_: f64, _: f64| 1.0;
    let all = |_: usize| true;
    let ref_l2 = weighted_volume_sq(mesh, exact, Quantity::Value, &one, &all)?.sqrt();
    let ref_h1 = weighted_volume_sq(mesh, exact, Quantity::Gradient, &one, &all)?.sqrt();
    if ref_l2 == 0.0 || ref_h1 == 0.0 {
        return Err(Error::ZeroNorm);
    }
    let e1 = weighted_volume_sq(mesh, &diff, Quantity::Value, &one, &all)?.sqrt() / ref_l2;
    let e2 = weighted_volume_sq(mesh, &diff, Quantity::Gradient, &one, &all)?.sqrt() / ref_h1;
    Ok((e1, e2))
}

/// Observed order `log(err_h / err_2h) / log(1/2)`.
pub fn rate(err_h: f64, err_2h: f64) -> Result<f64> {
    if !(err_h > 0.0 && err_2h > 0.0) {
        return Err(Error::InvalidRateInput { fine: err_h, coarse: err_2h });
    }
    Ok((err_h / err_2h).ln() / 0.5f64.ln())
}

/// Weight of the a priori bound: `max(h s^2 eps, sqrt(h) (eps - 1), sqrt(h) s)`.
pub fn apriori_weight(eps: &PermittivityField, x: f64, y: f64, h: f64, s: f64) -> f64 {
    let e = eps.eval(x, y);
    (h * s * s * e).max(h.sqrt() * (e - 1.0)).max(h.sqrt() * s)
}

/// `|| div(eps u_h) ||_{L2(Omega1)}` with the analytic coefficient gradient.
pub fn divergence_constraint_omega1(uh: &FeFunction<'_>, eps: &PermittivityField) -> f64 {
    let mesh = uh.mesh();
    let rule = TriangleRule::degree4();
    (0..mesh.num_triangles())
        .map(|k| {
            let geo = &uh.geometry()[k];
            let g = uh.grad(k, [1.0 / 3.0; 3], geo.vertices[0]);
            let div = g[0][0] + g[1][1];
            rule.scaled(geo.area)
                .filter_map(|(bary, w)| {
                    let p = geo.point(bary);
                    if !PermittivityField::contains(p.x, p.y) {
                        return None;
                    }
                    let j = eps.jet(p.x, p.y);
                    let u = uh.value(k, bary, p);
                    let d = j.v * div + j.g[0] * u[0] + j.g[1] * u[1];
                    Some(w * d * d)
                })
                .sum::<f64>()
        })
        .sum::<f64>()
        .sqrt()
}

/// One row of a convergence table.
#[derive(Clone, Debug, PartialEq)]
pub struct ErrorRecord {
    pub level: u32,
    pub nel: usize,
    pub nno: usize,
    pub e1: f64,
    pub e2: f64,
    pub q1: Option<f64>,
    pub q2: Option<f64>,
    pub triple_norm_error: f64,
}
