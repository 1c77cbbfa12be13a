//! Geometry-agnostic vocabulary: points, anchored tangent vectors and the
//! [`Manifold`] trait that the losses and the engine program against.
//!
//! Points are stored in ambient (sphere) or representative (Grassmann)
//! coordinates as dense column-major matrices. A [`Tangent`] always carries
//! the point it is attached to, and every operation that combines two tangent
//! vectors checks that they share a base.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::RngCore;

use crate::error::{IleaError, Result};
use crate::quadrature::GaussLegendre;

/// Node count for retraction-curve lengths.
pub const RETRACTION_QUADRATURE_NODES: usize = 64;
/// Central-difference step for the curve velocity inside the quadrature.
pub const CURVE_VELOCITY_STEP: f64 = 1e-6;

/// A point on a manifold. Cloning is cheap; the coordinates are shared.
#[derive(Clone)]
pub struct Point {
    coords: Arc<DMatrix<f64>>,
}

impl Point {
    /// Wraps coordinates without any membership check. Use
    /// [`Manifold::point`] for validated construction.
    pub fn from_matrix(coords: DMatrix<f64>) -> Self {
        Self {
            coords: Arc::new(coords),
        }
    }

    pub fn from_column(values: &[f64]) -> Self {
        Self::from_matrix(DMatrix::from_column_slice(values.len(), 1, values))
    }

    pub fn coords(&self) -> &DMatrix<f64> {
        &self.coords
    }

    pub fn shape(&self) -> (usize, usize) {
        self.coords.shape()
    }

    pub fn as_slice(&self) -> &[f64] {
        self.coords.as_slice()
    }

    /// True when both handles share storage or hold bit-identical values.
    pub fn same_as(&self, other: &Point) -> bool {
        Arc::ptr_eq(&self.coords, &other.coords)
            || (self.shape() == other.shape()
                && self
                    .as_slice()
                    .iter()
                    .zip(other.as_slice())
                    .all(|(a, b)| a.to_bits() == b.to_bits()))
    }
}

impl PartialEq for Point {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.coords, &other.coords) || *self.coords == *other.coords
    }
}

impl fmt::Debug for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (rows, cols) = self.shape();
        f.debug_struct("Point")
            .field("shape", &(rows, cols))
            .field("coords", &self.as_slice())
            .finish()
    }
}

/// A tangent vector anchored at `base`.
#[derive(Clone, Debug, PartialEq)]
pub struct Tangent {
    base: Point,
    vec: DMatrix<f64>,
}

impl Tangent {
    /// Pairs a base with a vector. Tangency is not checked here; use
    /// [`Manifold::tangent`] for validated construction.
    pub fn new_unchecked(base: Point, vec: DMatrix<f64>) -> Self {
        Self { base, vec }
    }

    pub fn zero(base: &Point) -> Self {
        let (r, c) = base.shape();
        Self {
            base: base.clone(),
            vec: DMatrix::zeros(r, c),
        }
    }

    pub fn base(&self) -> &Point {
        &self.base
    }

    pub fn vec(&self) -> &DMatrix<f64> {
        &self.vec
    }

    pub fn into_vec(self) -> DMatrix<f64> {
        self.vec
    }

    pub fn norm(&self) -> f64 {
        self.vec.norm()
    }

    pub fn scaled(&self, factor: f64) -> Tangent {
        Tangent {
            base: self.base.clone(),
            vec: &self.vec * factor,
        }
    }

    /// Frobenius inner product. Both vectors must share a base point.
    pub fn dot(&self, other: &Tangent) -> Result<f64> {
        self.ensure_same_base(other)?;
        Ok(self.vec.dot(&other.vec))
    }

    pub fn add(&self, other: &Tangent) -> Result<Tangent> {
        self.ensure_same_base(other)?;
        Ok(Tangent {
            base: self.base.clone(),
            vec: &self.vec + &other.vec,
        })
    }

    pub fn sub(&self, other: &Tangent) -> Result<Tangent> {
        self.ensure_same_base(other)?;
        Ok(Tangent {
            base: self.base.clone(),
            vec: &self.vec - &other.vec,
        })
    }

    pub fn ensure_same_base(&self, other: &Tangent) -> Result<()> {
        if self.base.same_as(&other.base) {
            Ok(())
        } else {
            Err(IleaError::BaseMismatch)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GeometryKind {
    /// The unit sphere S^d in R^{d+1}.
    Sphere { d: usize },
    /// Gr(M, r): r-dimensional subspaces of R^M.
    Grassmann { m: usize, r: usize },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeometryDescriptor {
    pub kind: GeometryKind,
    pub membership_eps: f64,
    pub tangency_eps: f64,
}

impl GeometryDescriptor {
    pub const DEFAULT_EPS: f64 = 1e-10;

    pub fn new(kind: GeometryKind) -> Result<Self> {
        match kind {
            GeometryKind::Sphere { d } if d < 1 => {
                return Err(IleaError::Config("sphere dimension must be >= 1".into()))
            }
            GeometryKind::Grassmann { m, r } if r < 1 || r >= m => {
                return Err(IleaError::Config(format!(
                    "Grassmann Gr({m}, {r}) needs 1 <= r < M"
                )))
            }
            _ => {}
        }
        Ok(Self {
            kind,
            membership_eps: Self::DEFAULT_EPS,
            tangency_eps: Self::DEFAULT_EPS,
        })
    }

    /// Shape of point coordinates.
    pub fn shape(&self) -> (usize, usize) {
        match self.kind {
            GeometryKind::Sphere { d } => (d + 1, 1),
            GeometryKind::Grassmann { m, r } => (m, r),
        }
    }
}

/// Operations every geometry provides.
///
/// Implementations are immutable values; all methods are pure.
pub trait Manifold: Send + Sync + fmt::Debug {
    fn descriptor(&self) -> &GeometryDescriptor;

    /// Residual of the membership predicate (0 on the manifold).
    fn membership_residual(&self, coords: &DMatrix<f64>) -> f64;

    /// Residual of the tangency predicate for `vec` at `base`.
    fn tangency_residual(&self, base: &Point, vec: &DMatrix<f64>) -> f64;

    fn retract(&self, p: &Point, v: &Tangent) -> Result<Point>;

    /// Inverse of [`Manifold::retract`]: `retract(p, lift(p, q)) == q`.
    fn lift(&self, p: &Point, q: &Point) -> Result<Tangent>;

    fn geodesic_distance(&self, p: &Point, q: &Point) -> Result<f64>;

    /// Orthogonal projection of an ambient array onto `T_p M`.
    fn project_to_tangent(&self, p: &Point, w: &DMatrix<f64>) -> Result<Tangent>;

    /// Length of the retraction curve `t -> R_p(t lift(p, q))`, `t in [0, 1]`.
    fn retraction_distance(&self, p: &Point, q: &Point) -> Result<f64> {
        retraction_curve_length(self, p, q, RETRACTION_QUADRATURE_NODES)
    }

    /// The tangent-space chart used inside the anchored surrogate. Defaults
    /// to [`Manifold::lift`].
    fn surrogate_lift(&self, anchor: &Point, theta: &Point) -> Result<Tangent> {
        self.lift(anchor, theta)
    }

    /// Riemannian gradient at `theta` of `theta -> <correction, surrogate_lift(anchor, theta)>`.
    fn surrogate_lift_adjoint(
        &self,
        anchor: &Point,
        theta: &Point,
        correction: &Tangent,
    ) -> Result<Tangent>;

    fn random_point(&self, rng: &mut dyn RngCore) -> Point;

    fn shape(&self) -> (usize, usize) {
        self.descriptor().shape()
    }

    fn check_shape(&self, m: &DMatrix<f64>) -> Result<()> {
        let expected = self.shape();
        if m.shape() != expected {
            return Err(IleaError::DimensionError {
                expected,
                got: m.shape(),
            });
        }
        Ok(())
    }

    fn check_point(&self, p: &Point) -> Result<()> {
        self.check_shape(p.coords())?;
        let residual = self.membership_residual(p.coords());
        let tolerance = self.descriptor().membership_eps;
        if !(residual <= tolerance) {
            return Err(IleaError::MembershipViolation {
                residual,
                tolerance,
            });
        }
        Ok(())
    }

    /// Tangency is tested relative to `max(1, |v|)`.
    fn check_tangent(&self, v: &Tangent) -> Result<()> {
        self.check_shape(v.vec())?;
        let residual = self.tangency_residual(v.base(), v.vec());
        let tolerance = self.descriptor().tangency_eps * v.norm().max(1.0);
        if !(residual <= tolerance) {
            return Err(IleaError::TangencyViolation {
                residual,
                tolerance,
            });
        }
        Ok(())
    }

    /// Validated point constructor.
    fn point(&self, coords: DMatrix<f64>) -> Result<Point> {
        let p = Point::from_matrix(coords);
        self.check_point(&p)?;
        Ok(p)
    }

    /// Validated tangent constructor.
    fn tangent(&self, base: &Point, vec: DMatrix<f64>) -> Result<Tangent> {
        let v = Tangent::new_unchecked(base.clone(), vec);
        self.check_tangent(&v)?;
        Ok(v)
    }

    fn random_tangent(&self, p: &Point, rng: &mut dyn RngCore) -> Tangent {
        let (r, c) = self.shape();
        let w = DMatrix::from_fn(r, c, |_, _| crate::rng::standard_normal(rng));
        self.project_to_tangent(p, &w)
            .expect("shape matches by construction")
    }
}

/// Length of `t -> R_p(t lift(p, q))` by Gauss–Legendre quadrature of the
/// horizontal speed, with the velocity taken by central differences.
pub fn retraction_curve_length<M: Manifold + ?Sized>(
    manifold: &M,
    p: &Point,
    q: &Point,
    nodes: usize,
) -> Result<f64> {
    let xi = manifold.lift(p, q)?;
    if xi.norm() == 0.0 {
        return Ok(0.0);
    }
    let rule = GaussLegendre::new(nodes);
    let h = CURVE_VELOCITY_STEP;
    let curve = |t: f64| manifold.retract(p, &xi.scaled(t));
    rule.integrate_unit(|t| {
        let at = curve(t)?;
        let fwd = curve(t + h)?;
        let bwd = curve(t - h)?;
        let velocity = (fwd.coords() - bwd.coords()) / (2.0 * h);
        Ok(manifold.project_to_tangent(&at, &velocity)?.norm())
    })
}
