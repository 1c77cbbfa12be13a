//! The unit sphere S^d embedded in R^{d+1}, with the exponential map as its
//! retraction and the logarithm map as the lift.

use nalgebra::DMatrix;
use rand::RngCore;

use crate::error::{IleaError, Result};
use crate::manifold::{GeometryDescriptor, GeometryKind, Manifold, Point, Tangent};

/// Tangent vectors shorter than this take the zero branch of `exp_map`.
pub const ZERO_TANGENT_NORM: f64 = 1e-12;
/// `log_map` refuses pairs with `<p, q>` at or below `-1 + CUT_LOCUS_MARGIN`.
pub const CUT_LOCUS_MARGIN: f64 = 1e-10;
/// Step of the five-point stencil used for the surrogate adjoint term.
pub const ADJOINT_FD_STEP: f64 = 1e-3;

#[derive(Clone, Debug)]
pub struct Sphere {
    descriptor: GeometryDescriptor,
}

impl Sphere {
    /// S^d, living in R^{d+1}.
    pub fn new(d: usize) -> Result<Self> {
        Ok(Self {
            descriptor: GeometryDescriptor::new(GeometryKind::Sphere { d })?,
        })
    }

    pub fn with_descriptor(descriptor: GeometryDescriptor) -> Result<Self> {
        match descriptor.kind {
            GeometryKind::Sphere { .. } => Ok(Self { descriptor }),
            _ => Err(IleaError::Config("descriptor is not a sphere".into())),
        }
    }

    pub fn ambient_dim(&self) -> usize {
        self.shape().0
    }

    /// Point from ambient coordinates, normalized first. Fails on the zero vector.
    pub fn normalized(&self, values: &[f64]) -> Result<Point> {
        let v = DMatrix::from_column_slice(values.len(), 1, values);
        self.check_shape(&v)?;
        let n = v.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(IleaError::DegenerateMean);
        }
        Ok(Point::from_matrix(v / n))
    }

    /// `cos(|v|) p + sin(|v|) v / |v|`.
    pub fn exp_map(&self, p: &Point, v: &Tangent) -> Result<Point> {
        self.check_tangent(v)?;
        if !p.same_as(v.base()) {
            return Err(IleaError::BaseMismatch);
        }
        Ok(exp_unchecked(p, v.vec()))
    }

    /// Inverse of [`Sphere::exp_map`]; `|log_p(q)| = d_g(p, q)`.
    pub fn log_map(&self, p: &Point, q: &Point) -> Result<Tangent> {
        self.check_shape(p.coords())?;
        self.check_shape(q.coords())?;
        Ok(Tangent::new_unchecked(p.clone(), log_unchecked(p, q)?))
    }

    /// Chordal distance `|p - q|`.
    pub fn extrinsic_distance(&self, p: &Point, q: &Point) -> Result<f64> {
        self.check_shape(p.coords())?;
        self.check_shape(q.coords())?;
        Ok((p.coords() - q.coords()).norm())
    }
}

fn exp_unchecked(p: &Point, v: &DMatrix<f64>) -> Point {
    let n = v.norm();
    if n < ZERO_TANGENT_NORM {
        return p.clone();
    }
    let x = p.coords() * n.cos() + v * (n.sin() / n);
    let norm = x.norm();
    Point::from_matrix(x / norm)
}

fn log_unchecked(p: &Point, q: &Point) -> Result<DMatrix<f64>> {
    let c = p.coords().dot(q.coords());
    if c <= -1.0 + CUT_LOCUS_MARGIN {
        return Err(IleaError::CutLocus);
    }
    let w = q.coords() - p.coords() * c;
    let wn = w.norm();
    if wn == 0.0 {
        return Ok(DMatrix::zeros(p.shape().0, 1));
    }
    Ok(w * (arc_length(p.coords(), q.coords()) / wn))
}

/// `arccos(<p, q>)`, evaluated as `2 atan2(|p - q|, |p + q|)` which stays
/// accurate near 0 and pi.
fn arc_length(p: &DMatrix<f64>, q: &DMatrix<f64>) -> f64 {
    let diff = (p - q).norm();
    let sum = (p + q).norm();
    2.0 * diff.atan2(sum)
}

impl Manifold for Sphere {
    fn descriptor(&self) -> &GeometryDescriptor {
        &self.descriptor
    }

    fn membership_residual(&self, coords: &DMatrix<f64>) -> f64 {
        (coords.norm() - 1.0).abs()
    }

    fn tangency_residual(&self, base: &Point, vec: &DMatrix<f64>) -> f64 {
        base.coords().dot(vec).abs()
    }

    fn retract(&self, p: &Point, v: &Tangent) -> Result<Point> {
        self.exp_map(p, v)
    }

    fn lift(&self, p: &Point, q: &Point) -> Result<Tangent> {
        self.log_map(p, q)
    }

    fn geodesic_distance(&self, p: &Point, q: &Point) -> Result<f64> {
        self.check_point(p)?;
        self.check_point(q)?;
        Ok(arc_length(p.coords(), q.coords()))
    }

    /// The retraction is the exponential map, so the curve is the geodesic.
    fn retraction_distance(&self, p: &Point, q: &Point) -> Result<f64> {
        let _ = log_unchecked(p, q)?;
        self.geodesic_distance(p, q)
    }

    fn project_to_tangent(&self, p: &Point, w: &DMatrix<f64>) -> Result<Tangent> {
        self.check_shape(w)?;
        let c = p.coords().dot(w);
        Ok(Tangent::new_unchecked(p.clone(), w - p.coords() * c))
    }

    /// Five-point central differences of `<c, log_anchor(exp_theta(t e_k))>`
    /// along the projected coordinate directions `e_k`.
    fn surrogate_lift_adjoint(
        &self,
        anchor: &Point,
        theta: &Point,
        correction: &Tangent,
    ) -> Result<Tangent> {
        if !correction.base().same_as(anchor) {
            return Err(IleaError::BaseMismatch);
        }
        let n = self.ambient_dim();
        if correction.vec().iter().all(|&x| x == 0.0) {
            return Ok(Tangent::zero(theta));
        }
        let c = correction.vec();
        let h = ADJOINT_FD_STEP;
        let g = |dir: &DMatrix<f64>, t: f64| -> Result<f64> {
            let moved = exp_unchecked(theta, &(dir * t));
            Ok(c.dot(&log_unchecked(anchor, &moved)?))
        };
        let mut grad = DMatrix::zeros(n, 1);
        let th = theta.coords();
        for k in 0..n {
            let mut dir = th * -th[k];
            dir[k] += 1.0;
            let d = (-g(&dir, 2.0 * h)? + 8.0 * g(&dir, h)? - 8.0 * g(&dir, -h)? + g(&dir, -2.0 * h)?)
                / (12.0 * h);
            grad[k] = d;
        }
        self.project_to_tangent(theta, &grad)
    }

    fn random_point(&self, rng: &mut dyn RngCore) -> Point {
        loop {
            let v: Vec<f64> = (0..self.ambient_dim())
                .map(|_| crate::rng::standard_normal(rng))
                .collect();
            if let Ok(p) = self.normalized(&v) {
                return p;
            }
        }
    }
}
