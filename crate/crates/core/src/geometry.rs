//! Points, conics, pinhole intrinsics and plane homographies.
//!
//! Conics are point-conics: a homogeneous point `x` lies on `C` when
//! `xᵀ C x = 0`. Every [`Conic`] is kept in a canonical representative
//! (unit Frobenius norm, largest-magnitude diagonal entry positive) so two
//! conics describing the same curve compare equal up to rounding.

use nalgebra::{Matrix3, Point2, Unit, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// World-space vector (millimetres in the synthetic harness).
pub type Vec3 = Vector3<f64>;
/// Unit-length direction.
pub type UnitVec3 = Unit<Vector3<f64>>;
/// Image or scene-plane point.
pub type Point = Point2<f64>;

/// Homogeneous coordinates below this magnitude are treated as points at infinity.
pub const DEHOMOGENIZE_EPS: f64 = 1e-12;

/// Shape class of a conic, from the sign of `b² − 4ac`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConicKind {
    Ellipse,
    Other,
}

/// Symmetric 3×3 point-conic in canonical scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Conic {
    mat: Matrix3<f64>,
}

/// Centre, semi-axes and orientation of a real ellipse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EllipseGeometry {
    pub center: [f64; 2],
    pub semi_major: f64,
    pub semi_minor: f64,
    /// Angle of the major axis from the x-axis, radians in `(-π/2, π/2]`.
    pub angle: f64,
}

impl EllipseGeometry {
    pub fn eccentricity(&self) -> f64 {
        let r = self.semi_minor / self.semi_major;
        (1.0 - r * r).max(0.0).sqrt()
    }

    /// Point at parameter `s` (radians) along the ellipse.
    pub fn point_at(&self, s: f64) -> Point {
        let (sa, ca) = self.angle.sin_cos();
        let (u, v) = (self.semi_major * s.cos(), self.semi_minor * s.sin());
        Point::new(
            self.center[0] + ca * u - sa * v,
            self.center[1] + sa * u + ca * v,
        )
    }
}

impl Conic {
    /// Conic `ax² + bxy + cy² + dx + ey + f = 0`.
    pub fn from_coeffs(a: f64, b: f64, c: f64, d: f64, e: f64, f: f64) -> Result<Self> {
        #[rustfmt::skip]
        let mat = Matrix3::new(
            a,       b / 2.0, d / 2.0,
            b / 2.0, c,       e / 2.0,
            d / 2.0, e / 2.0, f,
        );
        Self::from_matrix(&mat)
    }

    /// Builds a conic from any 3×3 matrix; the symmetric part is used.
    pub fn from_matrix(m: &Matrix3<f64>) -> Result<Self> {
        let sym = (m + m.transpose()) * 0.5;
        let norm = sym.norm();
        if !norm.is_finite() || norm == 0.0 {
            return Err(Error::InvalidConic);
        }
        let mut mat = sym / norm;
        let lead = (0..3)
            .map(|i| mat[(i, i)])
            .fold(0.0_f64, |acc, v| if v.abs() > acc.abs() { v } else { acc });
        if lead < 0.0 {
            mat = -mat;
        }
        Ok(Self { mat })
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.mat
    }

    /// Coefficients `(a, b, c, d, e, f)` of the canonical representative.
    pub fn coeffs(&self) -> [f64; 6] {
        let m = &self.mat;
        [
            m[(0, 0)],
            2.0 * m[(0, 1)],
            m[(1, 1)],
            2.0 * m[(0, 2)],
            2.0 * m[(1, 2)],
            m[(2, 2)],
        ]
    }

    /// `b² − 4ac` of the canonical coefficients.
    pub fn discriminant(&self) -> f64 {
        let [a, b, c, ..] = self.coeffs();
        b * b - 4.0 * a * c
    }

    pub fn kind(&self) -> ConicKind {
        if self.discriminant() < 0.0 {
            ConicKind::Ellipse
        } else {
            ConicKind::Other
        }
    }

    pub fn is_ellipse(&self) -> bool {
        self.kind() == ConicKind::Ellipse
    }

    /// Algebraic value `xᵀ C x` at the inhomogeneous point `p`.
    pub fn eval(&self, p: &Point) -> f64 {
        let x = p.to_homogeneous();
        x.dot(&(self.mat * x))
    }

    /// Frobenius distance between canonical representatives.
    pub fn distance(&self, other: &Conic) -> f64 {
        (self.mat - other.mat).norm()
    }

    /// Conic `MᵀCM`: a point `p` lies on `self` iff `M⁻¹p` lies on the result.
    pub fn transform(&self, m: &Matrix3<f64>) -> Result<Conic> {
        if is_singular(m) {
            return Err(Error::SingularTransform);
        }
        Conic::from_matrix(&(m.transpose() * self.mat * m))
    }

    /// Centre, axes and orientation; `None` unless the conic is a real ellipse.
    pub fn ellipse_geometry(&self) -> Option<EllipseGeometry> {
        if !self.is_ellipse() {
            return None;
        }
        let m = &self.mat;
        let a2 = nalgebra::Matrix2::new(m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
        let rhs = nalgebra::Vector2::new(-m[(0, 2)], -m[(1, 2)]);
        let center = a2.lu().solve(&rhs)?;
        let f0 = m[(2, 2)] + m[(0, 2)] * center.x + m[(1, 2)] * center.y;
        let eig = a2.symmetric_eigen();
        let (l0, l1) = (eig.eigenvalues[0], eig.eigenvalues[1]);
        let s0 = -f0 / l0;
        let s1 = -f0 / l1;
        if !(s0 > 0.0 && s1 > 0.0) {
            return None;
        }
        let (r0, r1) = (s0.sqrt(), s1.sqrt());
        let (major, minor, axis) = if r0 >= r1 {
            (r0, r1, eig.eigenvectors.column(0).into_owned())
        } else {
            (r1, r0, eig.eigenvectors.column(1).into_owned())
        };
        let mut angle = axis.y.atan2(axis.x);
        if angle <= -std::f64::consts::FRAC_PI_2 {
            angle += std::f64::consts::PI;
        } else if angle > std::f64::consts::FRAC_PI_2 {
            angle -= std::f64::consts::PI;
        }
        Some(EllipseGeometry {
            center: [center.x, center.y],
            semi_major: major,
            semi_minor: minor,
            angle,
        })
    }

    /// Conic of a circle with the given centre and radius.
    pub fn circle(center: Point, radius: f64) -> Result<Conic> {
        let (x0, y0) = (center.x, center.y);
        Conic::from_coeffs(
            1.0,
            0.0,
            1.0,
            -2.0 * x0,
            -2.0 * y0,
            x0 * x0 + y0 * y0 - radius * radius,
        )
    }
}

/// Free-function form of [`Conic::from_coeffs`].
pub fn conic_from_coeffs(a: f64, b: f64, c: f64, d: f64, e: f64, f: f64) -> Result<Conic> {
    Conic::from_coeffs(a, b, c, d, e, f)
}

/// Free-function form of [`Conic::transform`].
pub fn transform_conic(c: &Conic, m: &Matrix3<f64>) -> Result<Conic> {
    c.transform(m)
}

fn is_singular(m: &Matrix3<f64>) -> bool {
    let scale = m.norm();
    let det = m.determinant();
    !det.is_finite() || scale == 0.0 || det.abs() <= 1e-14 * scale * scale * scale
}

/// Zero-skew pinhole intrinsics in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl Intrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64) -> Result<Self> {
        let k = Self { fx, fy, cx, cy };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.fx, self.fy, self.cx, self.cy].iter().all(|v| v.is_finite());
        if !finite || self.fx <= 0.0 || self.fy <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "intrinsics need finite values and positive focal lengths, got {self:?}"
            )));
        }
        Ok(())
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        #[rustfmt::skip]
        let k = Matrix3::new(
            self.fx, 0.0,     self.cx,
            0.0,     self.fy, self.cy,
            0.0,     0.0,     1.0,
        );
        k
    }

    /// Reads the fields back from an upper-triangular zero-skew matrix.
    pub fn from_matrix(k: &Matrix3<f64>) -> Result<Self> {
        let w = k[(2, 2)];
        if w == 0.0 {
            return Err(Error::InvalidParameter("K[2,2] is zero".into()));
        }
        if k[(0, 1)] != 0.0 || k[(1, 0)] != 0.0 || k[(2, 0)] != 0.0 || k[(2, 1)] != 0.0 {
            return Err(Error::InvalidParameter("K must be upper-triangular with zero skew".into()));
        }
        Self::new(k[(0, 0)] / w, k[(1, 1)] / w, k[(0, 2)] / w, k[(1, 2)] / w)
    }

    /// Pixel to normalized camera coordinates.
    pub fn normalize(&self, p: &Point) -> Point {
        Point::new((p.x - self.cx) / self.fx, (p.y - self.cy) / self.fy)
    }

    /// Normalized camera coordinates to pixels.
    pub fn denormalize(&self, p: &Point) -> Point {
        Point::new(p.x * self.fx + self.cx, p.y * self.fy + self.cy)
    }

    /// Pixel position of a camera-frame 3D point.
    pub fn project(&self, x: &Vec3) -> Option<Point> {
        (x.z.abs() >= DEHOMOGENIZE_EPS)
            .then(|| self.denormalize(&Point::new(x.x / x.z, x.y / x.z)))
    }
}

pub fn intrinsics_matrix(k: &Intrinsics) -> Matrix3<f64> {
    k.matrix()
}

/// Invertible 3×3 projective map between planes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Homography {
    mat: Matrix3<f64>,
}

impl Homography {
    pub fn new(mat: Matrix3<f64>) -> Result<Self> {
        if mat.iter().any(|v| !v.is_finite()) || is_singular(&mat) {
            return Err(Error::SingularTransform);
        }
        Ok(Self { mat })
    }

    pub fn identity() -> Self {
        Self { mat: Matrix3::identity() }
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.mat
    }

    pub fn inverse(&self) -> Result<Homography> {
        let inv = self.mat.try_inverse().ok_or(Error::SingularTransform)?;
        Homography::new(inv)
    }

    pub fn apply(&self, p: &Point) -> Result<Point> {
        let x = self.mat * p.to_homogeneous();
        let w = x.z;
        if w.abs() < DEHOMOGENIZE_EPS {
            return Err(Error::PointAtInfinity);
        }
        Ok(Point::new(x.x / w, x.y / w))
    }

    pub fn compose(&self, other: &Homography) -> Result<Homography> {
        Homography::new(self.mat * other.mat)
    }
}

pub fn apply_homography_point(h: &Homography, p: &Point) -> Result<Point> {
    h.apply(p)
}

/// Angle between two directions, radians.
pub fn angle_between(a: &Vec3, b: &Vec3) -> f64 {
    // atan2 form stays accurate for nearly parallel vectors
    a.cross(b).norm().atan2(a.dot(b))
}
