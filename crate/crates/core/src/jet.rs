//! Second-order jets of scalar functions of two variables: value, gradient
//! and Hessian carried through products and reciprocals.

use std::ops::{Add, Mul, Sub};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet {
    pub v: f64,
    pub g: [f64; 2],
    pub h: [[f64; 2]; 2],
}

impl Jet {
    pub fn constant(v: f64) -> Self {
        Jet { v, g: [0.0; 2], h: [[0.0; 2]; 2] }
    }

    /// Lift a function of `x` alone given `(f, f', f'')`.
    pub fn of_x(f: f64, df: f64, d2f: f64) -> Self {
        Jet { v: f, g: [df, 0.0], h: [[d2f, 0.0], [0.0, 0.0]] }
    }

    pub fn of_y(f: f64, df: f64, d2f: f64) -> Self {
        Jet { v: f, g: [0.0, df], h: [[0.0, 0.0], [0.0, d2f]] }
    }

    pub fn scale(self, a: f64) -> Self {
        Jet { v: a * self.v, g: self.g.map(|x| a * x), h: self.h.map(|r| r.map(|x| a * x)) }
    }

    pub fn recip(self) -> Self {
        let inv = 1.0 / self.v;
        let inv2 = inv * inv;
        let inv3 = inv2 * inv;
        let mut h = [[0.0; 2]; 2];
        for (i, row) in h.iter_mut().enumerate() {
            for (j, hij) in row.iter_mut().enumerate() {
                *hij = -self.h[i][j] * inv2 + 2.0 * self.g[i] * self.g[j] * inv3;
            }
        }
        Jet { v: inv, g: self.g.map(|x| -x * inv2), h }
    }

    pub fn laplacian(&self) -> f64 {
        self.h[0][0] + self.h[1][1]
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, o: Jet) -> Jet {
        Jet {
            v: self.v + o.v,
            g: [self.g[0] + o.g[0], self.g[1] + o.g[1]],
            h: [
                [self.h[0][0] + o.h[0][0], self.h[0][1] + o.h[0][1]],
                [self.h[1][0] + o.h[1][0], self.h[1][1] + o.h[1][1]],
            ],
        }
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        self + o.scale(-1.0)
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        let mut h = [[0.0; 2]; 2];
        for (i, row) in h.iter_mut().enumerate() {
            for (j, hij) in row.iter_mut().enumerate() {
                *hij = self.v * o.h[i][j] + o.v * self.h[i][j] + self.g[i] * o.g[j] + o.g[i] * self.g[j];
            }
        }
        Jet { v: self.v * o.v, g: [self.v * o.g[0] + o.v * self.g[0], self.v * o.g[1] + o.v * self.g[1]], h }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // f(x, y) = x^2 y / (1 + x y) at (0.3, 0.7), derivatives by hand
    #[test]
    fn product_and_reciprocal_match_closed_form() {
        let (x, y) = (0.3, 0.7);
        let xx = Jet::of_x(x * x, 2.0 * x, 2.0);
        let yy = Jet::of_y(y, 1.0, 0.0);
        let xj = Jet::of_x(x, 1.0, 0.0);
        let d = (Jet::constant(1.0) + xj * yy).recip();
        let f = xx * yy * d;

        let q = 1.0 + x * y;
        let fx = (2.0 * x * y * q - x * x * y * y) / (q * q);
        let fy = x * x / (q * q);
        let fyy = -2.0 * x * x * x / (q * q * q);
        assert!((f.v - x * x * y / q).abs() < 1e-15);
        assert!((f.g[0] - fx).abs() < 1e-14);
        assert!((f.g[1] - fy).abs() < 1e-14);
        assert!((f.h[1][1] - fyy).abs() < 1e-14);
        assert!((f.h[0][1] - f.h[1][0]).abs() < 1e-15);
    }
}
