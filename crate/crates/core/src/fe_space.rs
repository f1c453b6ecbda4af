//! Vector-valued continuous P1 space on a triangulation.
//!
//! Degrees of freedom are interleaved per node: node `i` owns dofs `2i`
//! (first component) and `2i + 1` (second component).

use crate::error::{Error, Result};
use crate::mesh::{Mesh, Node};

pub type Vec2 = [f64; 2];
/// `g[i][j] = d u_i / d x_j`.
pub type Mat2 = [[f64; 2]; 2];

#[inline]
pub fn dof(node: usize, component: usize) -> usize {
    2 * node + component
}

/// Affine element data: vertices, area and barycentric gradients.
#[derive(Clone, Debug)]
pub struct ElementGeometry {
    pub vertices: [Node; 3],
    pub area: f64,
    pub h: f64,
    pub grad_lambda: [Vec2; 3],
}

impl ElementGeometry {
    pub fn new(mesh: &Mesh, k: usize) -> Self {
        let t = &mesh.triangles()[k];
        let v = mesh.vertices(k);
        let two_a = 2.0 * t.area;
        let grad_lambda = [
            [(v[1].y - v[2].y) / two_a, (v[2].x - v[1].x) / two_a],
            [(v[2].y - v[0].y) / two_a, (v[0].x - v[2].x) / two_a],
            [(v[0].y - v[1].y) / two_a, (v[1].x - v[0].x) / two_a],
        ];
        ElementGeometry { vertices: v, area: t.area, h: t.h, grad_lambda }
    }

    pub fn all(mesh: &Mesh) -> Vec<ElementGeometry> {
        (0..mesh.num_triangles()).map(|k| ElementGeometry::new(mesh, k)).collect()
    }

    pub fn point(&self, bary: [f64; 3]) -> Node {
        let v = &self.vertices;
        Node {
            x: bary[0] * v[0].x + bary[1] * v[1].x + bary[2] * v[2].x,
            y: bary[0] * v[0].y + bary[1] * v[1].y + bary[2] * v[2].y,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DofMap {
    pub total_dofs: usize,
    /// Sorted list of constrained dofs.
    pub constrained: Vec<usize>,
}

impl DofMap {
    pub fn new(mesh: &Mesh) -> Self {
        DofMap { total_dofs: 2 * mesh.num_nodes(), constrained: Vec::new() }
    }

    /// Constrain both components at every node of the given boundary edges.
    pub fn with_constrained_nodes(mut self, nodes: impl IntoIterator<Item = usize>) -> Self {
        let mut c: Vec<usize> = nodes.into_iter().flat_map(|n| [dof(n, 0), dof(n, 1)]).collect();
        c.sort_unstable();
        c.dedup();
        self.constrained = c;
        self
    }

    pub fn is_constrained(&self, d: usize) -> bool {
        self.constrained.binary_search(&d).is_ok()
    }

    pub fn num_free(&self) -> usize {
        self.total_dofs - self.constrained.len()
    }
}

/// Anything that can be evaluated at a point of a given element.
pub trait MeshField: Sync {
    fn value(&self, k: usize, bary: [f64; 3], p: Node) -> Vec2;
    fn grad(&self, k: usize, bary: [f64; 3], p: Node) -> Mat2;
}

/// Pointwise difference `a - b` of two fields.
pub struct Difference<'a, A: ?Sized, B: ?Sized>(pub &'a A, pub &'a B);

impl<A: MeshField + ?Sized, B: MeshField + ?Sized> MeshField for Difference<'_, A, B> {
    fn value(&self, k: usize, bary: [f64; 3], p: Node) -> Vec2 {
        let (a, b) = (self.0.value(k, bary, p), self.1.value(k, bary, p));
        [a[0] - b[0], a[1] - b[1]]
    }

    fn grad(&self, k: usize, bary: [f64; 3], p: Node) -> Mat2 {
        let (a, b) = (self.0.grad(k, bary, p), self.1.grad(k, bary, p));
        [[a[0][0] - b[0][0], a[0][1] - b[0][1]], [a[1][0] - b[1][0], a[1][1] - b[1][1]]]
    }
}

#[derive(Clone, Debug)]
pub struct FeFunction<'m> {
    mesh: &'m Mesh,
    geometry: Vec<ElementGeometry>,
    values: Vec<f64>,
}

impl<'m> FeFunction<'m> {
    pub fn new(mesh: &'m Mesh, values: Vec<f64>) -> Result<Self> {
        let expected = 2 * mesh.num_nodes();
        if values.len() != expected {
            return Err(Error::DimensionMismatch { expected, got: values.len() });
        }
        Ok(FeFunction { mesh, geometry: ElementGeometry::all(mesh), values })
    }

    pub fn zero(mesh: &'m Mesh) -> Self {
        FeFunction::new(mesh, vec![0.0; 2 * mesh.num_nodes()]).expect("sized by construction")
    }

    pub fn mesh(&self) -> &'m Mesh {
        self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn geometry(&self) -> &[ElementGeometry] {
        &self.geometry
    }

    pub fn nodal(&self, node: usize) -> Vec2 {
        [self.values[dof(node, 0)], self.values[dof(node, 1)]]
    }

    fn check(&self, k: usize) -> Result<()> {
        if k >= self.geometry.len() {
            return Err(Error::TriangleOutOfRange { id: k, len: self.geometry.len() });
        }
        Ok(())
    }

    pub fn eval(&self, k: usize, bary: [f64; 3]) -> Result<Vec2> {
        self.check(k)?;
        Ok(self.value_unchecked(k, bary))
    }

    pub fn grad_eval(&self, k: usize) -> Result<Mat2> {
        self.check(k)?;
        Ok(self.grad_unchecked(k))
    }

    pub fn div_eval(&self, k: usize) -> Result<f64> {
        let g = self.grad_eval(k)?;
        Ok(g[0][0] + g[1][1])
    }

    fn value_unchecked(&self, k: usize, bary: [f64; 3]) -> Vec2 {
        let t = &self.mesh.triangles()[k];
        let mut u = [0.0; 2];
        for (a, &n) in t.nodes.iter().enumerate() {
            u[0] += bary[a] * self.values[dof(n, 0)];
            u[1] += bary[a] * self.values[dof(n, 1)];
        }
        u
    }

    pub(crate) fn grad_unchecked(&self, k: usize) -> Mat2 {
        let t = &self.mesh.triangles()[k];
        let gl = &self.geometry[k].grad_lambda;
        let mut g = [[0.0; 2]; 2];
        for (a, &n) in t.nodes.iter().enumerate() {
            for (c, row) in g.iter_mut().enumerate() {
                let v = self.values[dof(n, c)];
                row[0] += v * gl[a][0];
                row[1] += v * gl[a][1];
            }
        }
        g
    }
}

impl MeshField for FeFunction<'_> {
    fn value(&self, k: usize, bary: [f64; 3], _p: Node) -> Vec2 {
        self.value_unchecked(k, bary)
    }

    fn grad(&self, k: usize, _bary: [f64; 3], _p: Node) -> Mat2 {
        self.grad_unchecked(k)
    }
}

/// Nodal interpolant of an analytic vector field.
pub fn interpolate<'m>(mesh: &'m Mesh, f: impl Fn(f64, f64) -> Vec2) -> Result<FeFunction<'m>> {
    let mut values = Vec::with_capacity(2 * mesh.num_nodes());
    for (i, p) in mesh.nodes().iter().enumerate() {
        let v = f(p.x, p.y);
        for c in v {
            if !c.is_finite() {
                return Err(Error::NonFiniteField { node: i, value: c });
            }
        }
        values.extend_from_slice(&v);
    }
    FeFunction::new(mesh, values)
}
