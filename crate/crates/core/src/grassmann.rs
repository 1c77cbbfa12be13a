//! Gr(M, r) with orthonormal M x r representatives.
//!
//! The retraction is the Q factor (positive-diagonal convention) of `U + xi`.
//! Two inverse maps are provided:
//!
//! * [`Manifold::lift`] is the exact inverse of that retraction,
//!   `V (U^T V)^{-1} - U`, which is independent of the representative of `V`.
//! * [`grassmann_lift`] is the projection form `V - U (U^T U)^{-1} U^T V` used
//!   to build the matrix-completion surrogate. It agrees with the exact inverse
//!   to first order around `U` and has a closed-form adjoint.

use nalgebra::{DMatrix, SVD};
use rand::RngCore;

use crate::error::{IleaError, Result};
use crate::manifold::{GeometryDescriptor, GeometryKind, Manifold, Point, Tangent};

/// Smallest singular value of `U^T V` accepted by the lifts.
pub const CUT_LOCUS_SIGMA: f64 = 1e-10;
/// Relative size of an R diagonal entry below which `U + xi` is rank deficient.
pub const RANK_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct Grassmann {
    descriptor: GeometryDescriptor,
    m: usize,
    r: usize,
}

impl Grassmann {
    pub fn new(m: usize, r: usize) -> Result<Self> {
        Ok(Self {
            descriptor: GeometryDescriptor::new(GeometryKind::Grassmann { m, r })?,
            m,
            r,
        })
    }

    pub fn with_descriptor(descriptor: GeometryDescriptor) -> Result<Self> {
        match descriptor.kind {
            GeometryKind::Grassmann { m, r } => Ok(Self { descriptor, m, r }),
            _ => Err(IleaError::Config("descriptor is not a Grassmannian".into())),
        }
    }

    pub fn ambient_rows(&self) -> usize {
        self.m
    }

    pub fn rank(&self) -> usize {
        self.r
    }

    /// Orthonormal representative of the column space of `a`.
    pub fn orthonormalize(&self, a: &DMatrix<f64>) -> Result<Point> {
        self.check_shape(a)?;
        Ok(Point::from_matrix(thin_q(a)?))
    }

    /// Re-orthonormalizes `p` when `|U^T U - I|_F` has drifted past the
    /// membership tolerance.
    pub fn renormalize(&self, p: &Point) -> Result<Point> {
        if self.membership_residual(p.coords()) > self.descriptor.membership_eps {
            self.orthonormalize(p.coords())
        } else {
            Ok(p.clone())
        }
    }

    /// Principal angles between `col(U)` and `col(V)`, ascending.
    ///
    /// Cosines come from the singular values of `U^T V`, sines from those of
    /// `(I - U U^T) V`; small angles are taken from the sines and large ones
    /// from the cosines so both ends stay accurate.
    pub fn principal_angles(&self, u: &Point, v: &Point) -> Result<Vec<f64>> {
        self.check_point(u)?;
        self.check_point(v)?;
        let utv = u.coords().transpose() * v.coords();
        let mut cos = singular_values(&utv);
        cos.sort_by(|a, b| b.total_cmp(a));
        let resid = v.coords() - u.coords() * &utv;
        let mut sin = singular_values(&resid);
        sin.sort_by(|a, b| a.total_cmp(b));
        Ok(cos
            .iter()
            .zip(&sin)
            .map(|(&c, &s)| {
                let from_cos = c.clamp(0.0, 1.0).acos();
                if from_cos < std::f64::consts::FRAC_PI_4 {
                    s.clamp(0.0, 1.0).asin()
                } else {
                    from_cos
                }
            })
            .collect())
    }

    /// Two-norm of the principal angles.
    pub fn principal_angle_distance(&self, u: &Point, v: &Point) -> Result<f64> {
        Ok(self
            .principal_angles(u, v)?
            .iter()
            .map(|t| t * t)
            .sum::<f64>()
            .sqrt())
    }

    fn ensure_liftable(&self, u: &DMatrix<f64>, v: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let utv = u.transpose() * v;
        let smallest = singular_values(&utv)
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        if !(smallest >= CUT_LOCUS_SIGMA) {
            return Err(IleaError::CutLocus);
        }
        Ok(utv)
    }
}

/// `V - U (U^T U)^{-1} U^T V`, the projection-form inverse retraction.
///
/// Written for a general full-rank `U`; with an orthonormal representative it
/// reduces to `(I - U U^T) V`.
pub fn grassmann_lift(gr: &Grassmann, u: &Point, v: &Point) -> Result<Tangent> {
    gr.check_shape(u.coords())?;
    gr.check_shape(v.coords())?;
    let (uc, vc) = (u.coords(), v.coords());
    let utv = gr.ensure_liftable(uc, vc)?;
    let gram = uc.transpose() * uc;
    let coef = gram.lu().solve(&utv).ok_or(IleaError::RankDeficient)?;
    Ok(Tangent::new_unchecked(u.clone(), vc - uc * coef))
}

/// Thin Q factor with a non-negative R diagonal.
fn thin_q(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let qr = a.clone().qr();
    let r = qr.r();
    let mut q = qr.q();
    let scale = (0..r.ncols()).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    for i in 0..r.ncols() {
        let d = r[(i, i)];
        if !(d.abs() > RANK_TOLERANCE * scale.max(1.0)) {
            return Err(IleaError::RankDeficient);
        }
        if d < 0.0 {
            q.column_mut(i).neg_mut();
        }
    }
    Ok(q)
}

fn singular_values(a: &DMatrix<f64>) -> Vec<f64> {
    SVD::new(a.clone(), false, false)
        .singular_values
        .iter()
        .copied()
        .collect()
}

impl Manifold for Grassmann {
    fn descriptor(&self) -> &GeometryDescriptor {
        &self.descriptor
    }

    fn membership_residual(&self, coords: &DMatrix<f64>) -> f64 {
        let gram = coords.transpose() * coords;
        (gram - DMatrix::identity(self.r, self.r)).norm()
    }

    fn tangency_residual(&self, base: &Point, vec: &DMatrix<f64>) -> f64 {
        (base.coords().transpose() * vec).norm()
    }

    /// `qf(U + xi)`; the zero vector returns `U` unchanged.
    fn retract(&self, p: &Point, v: &Tangent) -> Result<Point> {
        self.check_tangent(v)?;
        if !p.same_as(v.base()) {
            return Err(IleaError::BaseMismatch);
        }
        if v.vec().iter().all(|&x| x == 0.0) {
            return Ok(p.clone());
        }
        Ok(Point::from_matrix(thin_q(&(p.coords() + v.vec()))?))
    }

    fn lift(&self, p: &Point, q: &Point) -> Result<Tangent> {
        self.check_shape(p.coords())?;
        self.check_shape(q.coords())?;
        let (u, v) = (p.coords(), q.coords());
        let utv = self.ensure_liftable(u, v)?;
        // X = V (U^T V)^{-1}  <=>  (U^T V)^T X^T = V^T
        let xt = utv
            .transpose()
            .lu()
            .solve(&v.transpose())
            .ok_or(IleaError::CutLocus)?;
        let x = xt.transpose();
        let xi = &x - u * (u.transpose() * &x);
        Ok(Tangent::new_unchecked(p.clone(), xi))
    }

    fn geodesic_distance(&self, p: &Point, q: &Point) -> Result<f64> {
        self.principal_angle_distance(p, q)
    }

    fn project_to_tangent(&self, p: &Point, w: &DMatrix<f64>) -> Result<Tangent> {
        self.check_shape(w)?;
        let u = p.coords();
        Ok(Tangent::new_unchecked(p.clone(), w - u * (u.transpose() * w)))
    }

    fn surrogate_lift(&self, anchor: &Point, theta: &Point) -> Result<Tangent> {
        grassmann_lift(self, anchor, theta)
    }

    /// `(I - V (V^T V)^{-1} V^T) correction`.
    fn surrogate_lift_adjoint(
        &self,
        anchor: &Point,
        theta: &Point,
        correction: &Tangent,
    ) -> Result<Tangent> {
        if !correction.base().same_as(anchor) {
            return Err(IleaError::BaseMismatch);
        }
        let v = theta.coords();
        let c = correction.vec();
        let gram = v.transpose() * v;
        let coef = gram
            .lu()
            .solve(&(v.transpose() * c))
            .ok_or(IleaError::RankDeficient)?;
        Ok(Tangent::new_unchecked(theta.clone(), c - v * coef))
    }

    fn random_point(&self, rng: &mut dyn RngCore) -> Point {
        loop {
            let a = DMatrix::from_fn(self.m, self.r, |_, _| crate::rng::standard_normal(rng));
            if let Ok(q) = thin_q(&a) {
                return Point::from_matrix(q);
            }
        }
    }
}
