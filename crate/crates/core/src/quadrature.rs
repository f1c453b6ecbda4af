//! Quadrature on triangles (barycentric) and on edges.

/// Symmetric rule on the reference triangle; weights sum to its area, 1/2.
#[derive(Clone, Debug)]
pub struct TriangleRule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

/// Rule on the unit interval; weights sum to 1.
#[derive(Clone, Debug)]
pub struct EdgeRule {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

impl TriangleRule {
    /// Six-point rule exact for polynomials of total degree 4.
    pub fn degree4() -> Self {
        const A: f64 = 0.445_948_490_915_964_9;
        const WA: f64 = 0.223_381_589_678_011_47;
        const B: f64 = 0.091_576_213_509_770_74;
        const WB: f64 = 0.109_951_743_655_321_87;
        let points = vec![
            [1.0 - 2.0 * A, A, A],
            [A, 1.0 - 2.0 * A, A],
            [A, A, 1.0 - 2.0 * A],
            [1.0 - 2.0 * B, B, B],
            [B, 1.0 - 2.0 * B, B],
            [B, B, 1.0 - 2.0 * B],
        ];
        let weights = [WA, WA, WA, WB, WB, WB].iter().map(|w| 0.5 * w).collect();
        TriangleRule { points, weights }
    }

    pub fn centroid() -> Self {
        TriangleRule { points: vec![[1.0 / 3.0; 3]], weights: vec![0.5] }
    }

    /// Iterate `(barycentric point, weight scaled to a triangle of the given area)`.
    pub fn scaled(&self, area: f64) -> impl Iterator<Item = ([f64; 3], f64)> + '_ {
        self.points.iter().zip(&self.weights).map(move |(&p, &w)| (p, 2.0 * area * w))
    }
}

impl EdgeRule {
    /// Three-point Gauss-Legendre, exact for degree 5.
    pub fn gauss3() -> Self {
        let d = 0.5 * (0.6f64).sqrt();
        EdgeRule { points: vec![0.5 - d, 0.5, 0.5 + d], weights: vec![5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0] }
    }

    pub fn scaled(&self, length: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.points.iter().zip(&self.weights).map(move |(&t, &w)| (t, length * w))
    }
}
