//! Conforming triangulations of the unit square.
//!
//! Every triangle stores its vertices counterclockwise with the refinement
//! edge first: `nodes[0]`-`nodes[1]` is the edge bisected by newest-vertex
//! bisection and `nodes[2]` is the newest vertex. Structured meshes label the
//! cell diagonal (the hypotenuse) as refinement edge, so neighbours across a
//! diagonal share it and bisection closure stays local.

use std::collections::{BTreeSet, HashMap};

use crate::error::{Error, Result};

/// Lower-left and upper-right corner of the inclusion `Omega1`.
pub const OMEGA1_MIN: f64 = 0.25;
pub const OMEGA1_MAX: f64 = 0.75;

const GEOM_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Node {
    pub x: f64,
    pub y: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Region {
    Omega1,
    Omega2,
    /// Vertices on both sides of the `Omega1` boundary. Informational only:
    /// coefficients are always evaluated pointwise.
    Cut,
}

/// Boundary segments: `Gamma1` top (y = 1), `Gamma2` bottom (y = 0),
/// `Gamma3` the lateral sides (x = 0 and x = 1).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Segment {
    Gamma1,
    Gamma2,
    Gamma3,
}

impl Segment {
    pub const ALL: [Segment; 3] = [Segment::Gamma1, Segment::Gamma2, Segment::Gamma3];

    /// Outward unit normal.
    pub fn normal(self, x: f64) -> [f64; 2] {
        match self {
            Segment::Gamma1 => [0.0, 1.0],
            Segment::Gamma2 => [0.0, -1.0],
            Segment::Gamma3 => {
                if x < 0.5 {
                    [-1.0, 0.0]
                } else {
                    [1.0, 0.0]
                }
            }
        }
    }

    /// Distance from `(x, y)` to the segment's supporting side(s).
    pub fn distance(self, x: f64, y: f64) -> f64 {
        match self {
            Segment::Gamma1 => (y - 1.0).abs(),
            Segment::Gamma2 => y.abs(),
            Segment::Gamma3 => x.abs().min((x - 1.0).abs()),
        }
    }

    fn classify(x: f64, y: f64) -> Option<Segment> {
        if (y - 1.0).abs() < GEOM_TOL {
            Some(Segment::Gamma1)
        } else if y.abs() < GEOM_TOL {
            Some(Segment::Gamma2)
        } else if x.abs() < GEOM_TOL || (x - 1.0).abs() < GEOM_TOL {
            Some(Segment::Gamma3)
        } else {
            None
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Triangle {
    pub nodes: [usize; 3],
    pub region: Region,
    /// Longest edge length.
    pub h: f64,
    pub area: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryEdge {
    pub nodes: [usize; 2],
    pub segment: Segment,
    pub length: f64,
    /// The single incident triangle.
    pub element: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InteriorEdge {
    pub nodes: [usize; 2],
    pub elements: [usize; 2],
    pub length: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LevelInfo {
    /// Set while the mesh is a member of the structured family.
    pub structured_level: Option<u32>,
    /// Number of refinement passes since construction.
    pub generation: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mesh {
    nodes: Vec<Node>,
    triangles: Vec<Triangle>,
    boundary_edges: Vec<BoundaryEdge>,
    interior_edges: Vec<InteriorEdge>,
    pub level: LevelInfo,
}

fn dist(a: Node, b: Node) -> f64 {
    (a.x - b.x).hypot(a.y - b.y)
}

fn signed_area(a: Node, b: Node, c: Node) -> f64 {
    0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y))
}

fn strictly_inside_omega1(p: Node) -> bool {
    p.x > OMEGA1_MIN + GEOM_TOL
        && p.x < OMEGA1_MAX - GEOM_TOL
        && p.y > OMEGA1_MIN + GEOM_TOL
        && p.y < OMEGA1_MAX - GEOM_TOL
}

fn strictly_outside_omega1(p: Node) -> bool {
    p.x < OMEGA1_MIN - GEOM_TOL
        || p.x > OMEGA1_MAX + GEOM_TOL
        || p.y < OMEGA1_MIN - GEOM_TOL
        || p.y > OMEGA1_MAX + GEOM_TOL
}

fn region_of(pts: [Node; 3]) -> Region {
    let inside = pts.iter().any(|&p| strictly_inside_omega1(p));
    let outside = pts.iter().any(|&p| strictly_outside_omega1(p));
    if inside && outside {
        return Region::Cut;
    }
    let cx = (pts[0].x + pts[1].x + pts[2].x) / 3.0;
    let cy = (pts[0].y + pts[1].y + pts[2].y) / 3.0;
    if (OMEGA1_MIN..=OMEGA1_MAX).contains(&cx) && (OMEGA1_MIN..=OMEGA1_MAX).contains(&cy) {
        Region::Omega1
    } else {
        Region::Omega2
    }
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

impl Mesh {
    /// Assemble a mesh from raw connectivity; computes geometry, tags and
    /// edge topology. Triangles are reoriented counterclockwise if needed.
    fn from_parts(nodes: Vec<Node>, raw: Vec<[usize; 3]>, level: LevelInfo) -> Mesh {
        let triangles: Vec<Triangle> = raw
            .into_iter()
            .map(|mut t| {
                let p = t.map(|i| nodes[i]);
                let mut area = signed_area(p[0], p[1], p[2]);
                if area < 0.0 {
                    // keep the refinement edge first, flip orientation
                    t.swap(0, 1);
                    area = -area;
                }
                let p = t.map(|i| nodes[i]);
                let h = dist(p[0], p[1]).max(dist(p[1], p[2])).max(dist(p[2], p[0]));
                Triangle { nodes: t, region: region_of(p), h, area }
            })
            .collect();

        let mut incidence: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
        for (k, t) in triangles.iter().enumerate() {
            for e in 0..3 {
                let key = edge_key(t.nodes[e], t.nodes[(e + 1) % 3]);
                incidence.entry(key).or_default().push(k);
            }
        }
        let mut keys: Vec<_> = incidence.keys().copied().collect();
        keys.sort_unstable();

        let mut boundary_edges = Vec::new();
        let mut interior_edges = Vec::new();
        for key in keys {
            let elems = &incidence[&key];
            let (a, b) = (nodes[key.0], nodes[key.1]);
            let length = dist(a, b);
            match elems.as_slice() {
                [k] => {
                    let (mx, my) = (0.5 * (a.x + b.x), 0.5 * (a.y + b.y));
                    // an unclassifiable edge means a hanging node; audit() reports it
                    let segment = Segment::classify(mx, my).unwrap_or(Segment::Gamma3);
                    boundary_edges.push(BoundaryEdge { nodes: [key.0, key.1], segment, length, element: *k });
                }
                [k0, k1] => interior_edges.push(InteriorEdge { nodes: [key.0, key.1], elements: [*k0, *k1], length }),
                _ => interior_edges.push(InteriorEdge {
                    // non-manifold; kept so audit() can flag it
                    nodes: [key.0, key.1],
                    elements: [elems[0], usize::MAX],
                    length,
                }),
            }
        }

        Mesh { nodes, triangles, boundary_edges, interior_edges, level }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn triangles(&self) -> &[Triangle] {
        &self.triangles
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary_edges
    }

    pub fn interior_edges(&self) -> &[InteriorEdge] {
        &self.interior_edges
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn vertices(&self, k: usize) -> [Node; 3] {
        self.triangles[k].nodes.map(|i| self.nodes[i])
    }

    pub fn centroid(&self, k: usize) -> Node {
        let p = self.vertices(k);
        Node { x: (p[0].x + p[1].x + p[2].x) / 3.0, y: (p[0].y + p[1].y + p[2].y) / 3.0 }
    }

    /// Global mesh size and per-element longest edge.
    pub fn mesh_size(&self) -> (f64, Vec<f64>) {
        let hk: Vec<f64> = self.triangles.iter().map(|t| t.h).collect();
        let h = hk.iter().copied().fold(0.0, f64::max);
        (h, hk)
    }

    pub fn total_area(&self) -> f64 {
        self.triangles.iter().map(|t| t.area).sum()
    }

    pub fn boundary_length(&self) -> f64 {
        self.boundary_edges.iter().map(|e| e.length).sum()
    }

    /// Smallest interior angle over all triangles, in degrees.
    pub fn min_angle_degrees(&self) -> f64 {
        (0..self.triangles.len())
            .map(|k| {
                let p = self.vertices(k);
                (0..3)
                    .map(|i| {
                        let (a, b, c) = (p[i], p[(i + 1) % 3], p[(i + 2) % 3]);
                        let (ux, uy) = (b.x - a.x, b.y - a.y);
                        let (vx, vy) = (c.x - a.x, c.y - a.y);
                        let cos = (ux * vx + uy * vy) / (ux.hypot(uy) * vx.hypot(vy));
                        cos.clamp(-1.0, 1.0).acos().to_degrees()
                    })
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Check conformity: every edge with a single incident triangle lies on
    /// the boundary of the square and every other edge has exactly two.
    pub fn audit(&self) -> std::result::Result<(), String> {
        for e in &self.interior_edges {
            if e.elements[1] == usize::MAX {
                return Err(format!("edge {:?} has more than two triangles", e.nodes));
            }
        }
        for e in &self.boundary_edges {
            let (a, b) = (self.nodes[e.nodes[0]], self.nodes[e.nodes[1]]);
            let on = |p: Node| e.segment.distance(p.x, p.y) < GEOM_TOL;
            if !on(a) || !on(b) {
                return Err(format!(
                    "edge {:?} has a single triangle but is not on the boundary (hanging node)",
                    e.nodes
                ));
            }
        }
        for (k, t) in self.triangles.iter().enumerate() {
            if t.area <= 0.0 {
                return Err(format!("triangle {k} has non-positive area {}", t.area));
            }
        }
        Ok(())
    }
}

/// Structured mesh with `2^level` cells per side, each cell split along the
/// diagonal from `(i, j)` to `(i+1, j+1)`.
pub fn build_structured(level: u32) -> Result<Mesh> {
    if !(1..=12).contains(&level) {
        return Err(Error::LevelOutOfRange(level));
    }
    let n = 1usize << level;
    let h = 1.0 / n as f64;
    let mut nodes = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            nodes.push(Node { x: i as f64 * h, y: j as f64 * h });
        }
    }
    let id = |i: usize, j: usize| j * (n + 1) + i;
    let mut raw = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            let (sw, se, nw, ne) = (id(i, j), id(i + 1, j), id(i, j + 1), id(i + 1, j + 1));
            // diagonal first, newest vertex at the right angle
            raw.push([ne, sw, se]);
            raw.push([sw, ne, nw]);
        }
    }
    Ok(Mesh::from_parts(nodes, raw, LevelInfo { structured_level: Some(level), generation: 0 }))
}

struct MidpointCache {
    map: HashMap<(usize, usize), usize>,
}

impl MidpointCache {
    fn new() -> Self {
        MidpointCache { map: HashMap::new() }
    }

    fn get(&mut self, nodes: &mut Vec<Node>, a: usize, b: usize) -> usize {
        *self.map.entry(edge_key(a, b)).or_insert_with(|| {
            let (p, q) = (nodes[a], nodes[b]);
            nodes.push(Node { x: 0.5 * (p.x + q.x), y: 0.5 * (p.y + q.y) });
            nodes.len() - 1
        })
    }
}

/// Rotate so that the longest edge comes first (ties keep the earliest).
fn longest_edge_first(t: [usize; 3], nodes: &[Node]) -> [usize; 3] {
    let len = |e: usize| dist(nodes[t[e]], nodes[t[(e + 1) % 3]]);
    let mut best = 0;
    for e in 1..3 {
        if len(e) > len(best) * (1.0 + 1e-12) {
            best = e;
        }
    }
    [t[best], t[(best + 1) % 3], t[(best + 2) % 3]]
}

/// Red refinement: every triangle split into four at its edge midpoints.
pub fn refine_uniform(mesh: &Mesh) -> Mesh {
    let mut nodes = mesh.nodes.clone();
    let mut mids = MidpointCache::new();
    let mut raw = Vec::with_capacity(4 * mesh.triangles.len());
    for t in &mesh.triangles {
        let [a, b, c] = t.nodes;
        let mab = mids.get(&mut nodes, a, b);
        let mbc = mids.get(&mut nodes, b, c);
        let mca = mids.get(&mut nodes, c, a);
        for child in [[a, mab, mca], [mab, b, mbc], [mca, mbc, c], [mbc, mca, mab]] {
            raw.push(longest_edge_first(child, &nodes));
        }
    }
    Mesh::from_parts(
        nodes,
        raw,
        LevelInfo {
            structured_level: mesh.level.structured_level.map(|l| l + 1),
            generation: mesh.level.generation + 1,
        },
    )
}

/// Newest-vertex bisection of the marked triangles plus the closure needed
/// to keep the mesh conforming.
pub fn refine_marked(mesh: &Mesh, marks: &BTreeSet<usize>) -> Mesh {
    if marks.is_empty() {
        return mesh.clone();
    }
    let ref_edge = |t: &Triangle| edge_key(t.nodes[0], t.nodes[1]);

    let mut marked: std::collections::HashSet<(usize, usize)> =
        marks.iter().filter_map(|&k| mesh.triangles.get(k)).map(ref_edge).collect();

    // Closure: a triangle with any marked edge must have its refinement edge marked.
    loop {
        let mut changed = false;
        for t in &mesh.triangles {
            let re = ref_edge(t);
            if marked.contains(&re) {
                continue;
            }
            let has_marked = (0..3).any(|e| marked.contains(&edge_key(t.nodes[e], t.nodes[(e + 1) % 3])));
            if has_marked {
                marked.insert(re);
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    let mut nodes = mesh.nodes.clone();
    let mut mids = MidpointCache::new();
    let mut raw = Vec::with_capacity(mesh.triangles.len() + 2 * marked.len());

    fn bisect(
        t: [usize; 3],
        marked: &std::collections::HashSet<(usize, usize)>,
        nodes: &mut Vec<Node>,
        mids: &mut MidpointCache,
        out: &mut Vec<[usize; 3]>,
    ) {
        let [a, b, c] = t;
        if !marked.contains(&edge_key(a, b)) {
            out.push(t);
            return;
        }
        let m = mids.get(nodes, a, b);
        bisect([c, a, m], marked, nodes, mids, out);
        bisect([b, c, m], marked, nodes, mids, out);
    }

    for t in &mesh.triangles {
        bisect(t.nodes, &marked, &mut nodes, &mut mids, &mut raw);
    }

    Mesh::from_parts(nodes, raw, LevelInfo { structured_level: None, generation: mesh.level.generation + 1 })
}
