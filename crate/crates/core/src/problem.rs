//! Coefficients, manufactured solution and boundary data.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::assembly::AssemblyVariant;
use crate::error::{Error, Result};
use crate::fe_space::{Mat2, Vec2};
use crate::jet::Jet;
use crate::mesh::{Segment, OMEGA1_MAX, OMEGA1_MIN};

const SEGMENT_TOL: f64 = 1e-12;

/// `eps = 1 + sin^m(pi(2x - 1/2)) sin^m(pi(2y - 1/2))` inside
/// `[0.25, 0.75]^2`, and `1` elsewhere.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PermittivityField {
    m: u32,
    /// Peak of `eps - 1`; zero gives the homogeneous medium.
    contrast: f64,
}

impl PermittivityField {
    pub fn new(m: u32) -> Result<Self> {
        if m < 2 {
            return Err(Error::InvalidExponent(m));
        }
        Ok(PermittivityField { m, contrast: 1.0 })
    }

    /// `eps = 1` everywhere.
    pub fn uniform() -> Self {
        PermittivityField { m: 2, contrast: 0.0 }
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn is_uniform(&self) -> bool {
        self.contrast == 0.0
    }

    /// Upper bound of the coefficient.
    pub fn d1(&self) -> f64 {
        1.0 + self.contrast
    }

    /// Open inclusion; on its boundary second derivatives take the outer limit.
    pub fn contains(x: f64, y: f64) -> bool {
        x > OMEGA1_MIN && x < OMEGA1_MAX && y > OMEGA1_MIN && y < OMEGA1_MAX
    }

    fn factor(&self, t: f64) -> (f64, f64, f64) {
        let m = self.m as i32;
        let mf = f64::from(self.m);
        let arg = PI * (2.0 * t - 0.5);
        let (a, da, d2a) = (arg.sin(), 2.0 * PI * arg.cos(), -4.0 * PI * PI * arg.sin());
        let p = a.powi(m);
        let dp = mf * a.powi(m - 1) * da;
        let d2p = mf * (mf - 1.0) * a.powi(m - 2) * da * da + mf * a.powi(m - 1) * d2a;
        (p, dp, d2p)
    }

    pub fn jet(&self, x: f64, y: f64) -> Jet {
        if self.contrast == 0.0 || !Self::contains(x, y) {
            return Jet::constant(1.0);
        }
        let (px, dpx, d2px) = self.factor(x);
        let (py, dpy, d2py) = self.factor(y);
        Jet::constant(1.0) + (Jet::of_x(px, dpx, d2px) * Jet::of_y(py, dpy, d2py)).scale(self.contrast)
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.jet(x, y).v
    }

    pub fn grad(&self, x: f64, y: f64) -> Vec2 {
        self.jet(x, y).g
    }

    pub fn hessian(&self, x: f64, y: f64) -> Mat2 {
        self.jet(x, y).h
    }
}

pub fn eps_eval(x: f64, y: f64, m: u32) -> Result<f64> {
    Ok(PermittivityField::new(m)?.eval(x, y))
}

pub fn eps_grad(x: f64, y: f64, m: u32) -> Result<Vec2> {
    Ok(PermittivityField::new(m)?.grad(x, y))
}

/// `E = (2 pi / (s^3 eps)) (sin^2(pi x) cos(pi y) sin(pi y), -sin^2(pi y) cos(pi x) sin(pi x))`.
///
/// `eps E` is a rotated gradient, so `div(eps E) = 0` holds exactly, and `E`
/// vanishes on the boundary of the square.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ManufacturedSolution {
    pub eps: PermittivityField,
    pub s: f64,
}

impl ManufacturedSolution {
    pub fn new(eps: PermittivityField, s: f64) -> Result<Self> {
        check_frequency(s)?;
        Ok(ManufacturedSolution { eps, s })
    }

    /// Second-order jets of both components.
    pub fn jets(&self, x: f64, y: f64) -> [Jet; 2] {
        let c = 2.0 * PI / self.s.powi(3);
        let (s2x, c2x) = ((2.0 * PI * x).sin(), (2.0 * PI * x).cos());
        let (s2y, c2y) = ((2.0 * PI * y).sin(), (2.0 * PI * y).cos());
        let sx = (PI * x).sin();
        let sy = (PI * y).sin();
        // sin^2(pi t) and sin(pi t) cos(pi t) = sin(2 pi t) / 2
        let sq_x = Jet::of_x(sx * sx, PI * s2x, 2.0 * PI * PI * c2x);
        let sq_y = Jet::of_y(sy * sy, PI * s2y, 2.0 * PI * PI * c2y);
        let half_x = Jet::of_x(0.5 * s2x, PI * c2x, -2.0 * PI * PI * s2x);
        let half_y = Jet::of_y(0.5 * s2y, PI * c2y, -2.0 * PI * PI * s2y);
        let inv_eps = self.eps.jet(x, y).recip();
        [(sq_x * half_y * inv_eps).scale(c), (sq_y * half_x * inv_eps).scale(-c)]
    }

    pub fn value(&self, x: f64, y: f64) -> Vec2 {
        let [e1, e2] = self.jets(x, y);
        [e1.v, e2.v]
    }

    pub fn grad(&self, x: f64, y: f64) -> Mat2 {
        let [e1, e2] = self.jets(x, y);
        [e1.g, e2.g]
    }

    /// Strong-form right-hand side for the given divergence treatment.
    ///
    /// `PaperLiteral` applies `s^2 eps E - lap E - grad div((eps - 1) E)`.
    /// `SymmetricStabilized` applies `s^2 eps E - lap E - grad((eps - 1) div E)`,
    /// the operator whose weak form is the symmetric bilinear form.
    pub fn source(&self, x: f64, y: f64, variant: AssemblyVariant) -> Vec2 {
        let e = self.jets(x, y);
        let eps = self.eps.jet(x, y);
        let s2 = self.s * self.s;
        let mut f = [0.0; 2];
        match variant {
            AssemblyVariant::PaperLiteral => {
                let w = [(eps - Jet::constant(1.0)) * e[0], (eps - Jet::constant(1.0)) * e[1]];
                for (i, fi) in f.iter_mut().enumerate() {
                    let grad_div = w[0].h[i][0] + w[1].h[i][1];
                    *fi = s2 * eps.v * e[i].v - e[i].laplacian() - grad_div;
                }
            }
            AssemblyVariant::SymmetricStabilized => {
                let div = e[0].g[0] + e[1].g[1];
                for (i, fi) in f.iter_mut().enumerate() {
                    let grad_div = e[0].h[i][0] + e[1].h[i][1];
                    let term = eps.g[i] * div + (eps.v - 1.0) * grad_div;
                    *fi = s2 * eps.v * e[i].v - e[i].laplacian() - term;
                }
            }
        }
        f
    }

    /// Absorbing-boundary data `d_nu E + s E` on the given side.
    pub fn robin_data(&self, segment: Segment, x: f64, y: f64) -> Vec2 {
        let g = self.grad(x, y);
        let v = self.value(x, y);
        let n = segment.normal(x);
        [g[0][0] * n[0] + g[0][1] * n[1] + self.s * v[0], g[1][0] * n[0] + g[1][1] * n[1] + self.s * v[1]]
    }
}

pub fn exact_solution(x: f64, y: f64, s: f64, m: u32) -> Result<Vec2> {
    Ok(ManufacturedSolution::new(PermittivityField::new(m)?, s)?.value(x, y))
}

/// Model-problem right-hand side `s^2 eps E - lap E - grad div((eps - 1) E)`.
pub fn manufactured_source(x: f64, y: f64, s: f64, m: u32) -> Result<Vec2> {
    Ok(ManufacturedSolution::new(PermittivityField::new(m)?, s)?.source(x, y, AssemblyVariant::PaperLiteral))
}

fn check_frequency(s: f64) -> Result<()> {
    if s > 0.0 && s.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidFrequency(s))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BcMode {
    Dirichlet0,
    Neumann0,
    RobinAbsorbing,
}

impl fmt::Display for BcMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BcMode::Dirichlet0 => "dirichlet0",
            BcMode::Neumann0 => "neumann0",
            BcMode::RobinAbsorbing => "robin",
        })
    }
}

/// Condition per boundary segment.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BoundaryConditions {
    pub gamma1: BcMode,
    pub gamma2: BcMode,
    pub gamma3: BcMode,
}

impl BoundaryConditions {
    pub fn dirichlet() -> Self {
        BoundaryConditions { gamma1: BcMode::Dirichlet0, gamma2: BcMode::Dirichlet0, gamma3: BcMode::Dirichlet0 }
    }

    /// Absorbing top and bottom, homogeneous Neumann on the lateral sides.
    pub fn absorbing() -> Self {
        BoundaryConditions { gamma1: BcMode::RobinAbsorbing, gamma2: BcMode::RobinAbsorbing, gamma3: BcMode::Neumann0 }
    }

    /// Absorbing top and bottom, homogeneous Dirichlet on the lateral sides.
    /// Consistent with the manufactured solution, which vanishes there.
    pub fn absorbing_clamped() -> Self {
        BoundaryConditions {
            gamma1: BcMode::RobinAbsorbing,
            gamma2: BcMode::RobinAbsorbing,
            gamma3: BcMode::Dirichlet0,
        }
    }

    pub fn neumann() -> Self {
        BoundaryConditions { gamma1: BcMode::Neumann0, gamma2: BcMode::Neumann0, gamma3: BcMode::Neumann0 }
    }

    pub fn mode(&self, segment: Segment) -> BcMode {
        match segment {
            Segment::Gamma1 => self.gamma1,
            Segment::Gamma2 => self.gamma2,
            Segment::Gamma3 => self.gamma3,
        }
    }

    pub fn any(&self, mode: BcMode) -> bool {
        Segment::ALL.iter().any(|&s| self.mode(s) == mode)
    }
}

impl Default for BoundaryConditions {
    fn default() -> Self {
        Self::dirichlet()
    }
}

pub type VectorField = Arc<dyn Fn(f64, f64) -> Vec2 + Send + Sync>;
pub type BoundaryField = Arc<dyn Fn(Segment, f64, f64) -> Vec2 + Send + Sync>;

#[derive(Clone)]
pub struct ProblemSpec {
    pub eps: PermittivityField,
    pub s: f64,
    pub bc: BoundaryConditions,
    pub variant: AssemblyVariant,
    /// Volume right-hand side `F`.
    pub source: VectorField,
    /// Data `g` of the absorbing condition `d_nu E + s E = g`.
    pub robin_data: BoundaryField,
    /// Initial field `f0` when the source has the form `s eps f0`.
    pub initial_field: Option<VectorField>,
    pub exact: Option<ManufacturedSolution>,
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("eps", &self.eps)
            .field("s", &self.s)
            .field("bc", &self.bc)
            .field("variant", &self.variant)
            .field("exact", &self.exact.is_some())
            .finish_non_exhaustive()
    }
}

impl ProblemSpec {
    /// Source and boundary data chosen so that [`ManufacturedSolution`] is exact
    /// for the selected discretization variant.
    pub fn manufactured(
        eps: PermittivityField,
        s: f64,
        bc: BoundaryConditions,
        variant: AssemblyVariant,
    ) -> Result<Self> {
        let exact = ManufacturedSolution::new(eps, s)?;
        Ok(ProblemSpec {
            eps,
            s,
            bc,
            variant,
            source: Arc::new(move |x, y| exact.source(x, y, variant)),
            robin_data: Arc::new(move |seg, x, y| exact.robin_data(seg, x, y)),
            initial_field: None,
            exact: Some(exact),
        })
    }

    /// Model problem driven by an initial field: `F = s eps f0`, `g = f0`.
    pub fn from_initial_field(
        eps: PermittivityField,
        s: f64,
        bc: BoundaryConditions,
        variant: AssemblyVariant,
        f0: VectorField,
    ) -> Result<Self> {
        check_frequency(s)?;
        let (src, bnd) = (f0.clone(), f0.clone());
        Ok(ProblemSpec {
            eps,
            s,
            bc,
            variant,
            source: Arc::new(move |x, y| {
                let v = src(x, y);
                let w = s * eps.eval(x, y);
                [w * v[0], w * v[1]]
            }),
            robin_data: Arc::new(move |_, x, y| bnd(x, y)),
            initial_field: Some(f0),
            exact: None,
        })
    }

    /// Arbitrary source with zero boundary data.
    pub fn with_source(
        eps: PermittivityField,
        s: f64,
        bc: BoundaryConditions,
        variant: AssemblyVariant,
        source: VectorField,
    ) -> Result<Self> {
        check_frequency(s)?;
        Ok(ProblemSpec {
            eps,
            s,
            bc,
            variant,
            source,
            robin_data: Arc::new(|_, _, _| [0.0; 2]),
            initial_field: None,
            exact: None,
        })
    }

    /// Boundary data for the segment's mode; zero unless absorbing.
    pub fn boundary_data(&self, segment: Segment, x: f64, y: f64) -> Result<Vec2> {
        if segment.distance(x, y) > SEGMENT_TOL
            || !(-SEGMENT_TOL..=1.0 + SEGMENT_TOL).contains(&x)
            || !(-SEGMENT_TOL..=1.0 + SEGMENT_TOL).contains(&y)
        {
            return Err(Error::NotOnSegment { segment, x, y });
        }
        Ok(match self.bc.mode(segment) {
            BcMode::RobinAbsorbing => (self.robin_data)(segment, x, y),
            BcMode::Dirichlet0 | BcMode::Neumann0 => [0.0; 2],
        })
    }

    /// The field `f0` entering the data-approximation term: the supplied
    /// initial field, or `F / (s eps)` otherwise.
    pub fn data_field(&self, x: f64, y: f64) -> Vec2 {
        match &self.initial_field {
            Some(f0) => f0(x, y),
            None => {
                let f = (self.source)(x, y);
                let w = self.s * self.eps.eval(x, y);
                [f[0] / w, f[1] / w]
            }
        }
    }
}
