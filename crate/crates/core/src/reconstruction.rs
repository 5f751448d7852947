//! Ellipse fitting, transfer to the normalized camera plane, circle
//! backprojection and the angular error metric.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{angle_between, Conic, Intrinsics, Point, UnitVec3, Vec3};

/// Relative eigenvalue gap below which the view is treated as fronto-parallel.
pub const FRONTO_PARALLEL_GAP: f64 = 1e-12;

/// Quality indicators of an ellipse fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    /// RMS of `xᵀCx` over the conditioned points, with `‖C‖_F = 1`.
    pub rms_algebraic: f64,
    /// RMS first-order (Sampson) point-to-conic distance in input units.
    pub rms_distance: f64,
    pub point_count: usize,
    pub eccentricity: f64,
    /// Condition number of the linear-term scatter block.
    pub condition: f64,
}

/// Direct least-squares ellipse fit with the constraint `4ac − b² = 1`.
///
/// Points are centred and scaled to RMS radius √2, the scatter matrix is
/// split into quadratic and linear blocks, and the linear block is
/// eliminated so only a 3×3 eigenproblem remains.
pub fn fit_ellipse(points: &[Point]) -> Result<(Conic, FitDiagnostics)> {
    let n = points.len();
    if n < 6 {
        return Err(Error::InsufficientPoints(n));
    }
    if points.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
        return Err(Error::DegenerateConfiguration);
    }
    let nf = n as f64;
    let mean = points.iter().fold(Vector3::zeros(), |acc, p| acc + p.to_homogeneous()) / nf;
    let (mx, my) = (mean.x, mean.y);
    let rms = (points.iter().map(|p| (p.x - mx).powi(2) + (p.y - my).powi(2)).sum::<f64>() / nf).sqrt();
    if !(rms > 0.0) {
        return Err(Error::DegenerateConfiguration);
    }
    let k = std::f64::consts::SQRT_2 / rms;
    let cond_pts: Vec<(f64, f64)> = points.iter().map(|p| ((p.x - mx) * k, (p.y - my) * k)).collect();

    let mut s1 = Matrix3::zeros();
    let mut s2 = Matrix3::zeros();
    let mut s3 = Matrix3::zeros();
    for &(x, y) in &cond_pts {
        let q = Vector3::new(x * x, x * y, y * y);
        let l = Vector3::new(x, y, 1.0);
        s1 += q * q.transpose();
        s2 += q * l.transpose();
        s3 += l * l.transpose();
    }
    let s3_sv = s3.singular_values();
    let condition = s3_sv.max() / s3_sv.min();
    if !(condition < 1e12) {
        return Err(Error::DegenerateConfiguration);
    }
    let s3_inv = s3.try_inverse().ok_or(Error::DegenerateConfiguration)?;
    let t = -s3_inv * s2.transpose();
    let reduced = s1 + s2 * t;
    // premultiply by the inverse of the constraint matrix [[0,0,2],[0,−1,0],[2,0,0]]
    let mut constrained = Matrix3::zeros();
    constrained.set_row(0, &(reduced.row(2) / 2.0));
    constrained.set_row(1, &(-reduced.row(1)));
    constrained.set_row(2, &(reduced.row(0) / 2.0));

    let quad = ellipse_eigenvector(&constrained, &reduced).ok_or(Error::DegenerateConfiguration)?;
    let lin = t * quad;
    let conditioned = Conic::from_coeffs(quad[0], quad[1], quad[2], lin[0], lin[1], lin[2])?;

    #[rustfmt::skip]
    let denorm = Matrix3::new(
        k,   0.0, -k * mx,
        0.0, k,   -k * my,
        0.0, 0.0, 1.0,
    );
    let conic = Conic::from_matrix(&(denorm.transpose() * conditioned.matrix() * denorm))?;
    if !conic.is_ellipse() {
        return Err(Error::DegenerateConfiguration);
    }

    let rms_algebraic = (cond_pts
        .iter()
        .map(|&(x, y)| conditioned.eval(&Point::new(x, y)).powi(2))
        .sum::<f64>()
        / nf)
        .sqrt();
    let eccentricity = conic.ellipse_geometry().map(|g| g.eccentricity()).unwrap_or(f64::NAN);
    Ok((
        conic,
        FitDiagnostics {
            rms_algebraic,
            rms_distance: rms_sampson_distance(&conic, points),
            point_count: n,
            eccentricity,
            condition,
        },
    ))
}

/// Eigenvector of the constrained system with `4ac − b² > 0` and the
/// smallest cost `vᵀ·reduced·v / (4ac − b²)`. Ranking by cost rather than
/// by the sign test alone survives repeated eigenvalues, whose null
/// vectors are poorly determined.
fn ellipse_eigenvector(m: &Matrix3<f64>, reduced: &Matrix3<f64>) -> Option<Vector3<f64>> {
    let scale = m.norm();
    if !(scale > 0.0) || !scale.is_finite() {
        return None;
    }
    let eigen = m.complex_eigenvalues();
    let mut best: Option<(f64, f64, Vector3<f64>)> = None;
    for lambda in eigen.iter() {
        if lambda.im.abs() > 1e-8 * scale {
            continue;
        }
        let shifted = m - Matrix3::identity() * lambda.re;
        let Some(v) = null_vector(&shifted) else { continue };
        let constraint = 4.0 * v[0] * v[2] - v[1] * v[1];
        if !(constraint > 0.0) {
            continue;
        }
        let cost = v.dot(&(reduced * v)) / constraint;
        if best.as_ref().is_none_or(|(c, _, _)| cost < *c) {
            best = Some((cost, lambda.re, v));
        }
    }
    best.map(|(_, _, v)| v)
}

/// Unit null vector of a rank-2 matrix via the largest row cross product.
fn null_vector(a: &Matrix3<f64>) -> Option<Vector3<f64>> {
    let rows = [a.row(0).transpose(), a.row(1).transpose(), a.row(2).transpose()];
    let best = [(0, 1), (0, 2), (1, 2)]
        .iter()
        .map(|&(i, j)| rows[i].cross(&rows[j]))
        .max_by(|u, v| u.norm_squared().partial_cmp(&v.norm_squared()).unwrap_or(std::cmp::Ordering::Equal))?;
    let norm = best.norm();
    (norm > 0.0 && norm.is_finite()).then(|| best / norm)
}

/// RMS of `|f(p)| / ‖∇f(p)‖` over the points.
pub fn rms_sampson_distance(conic: &Conic, points: &[Point]) -> f64 {
    if points.is_empty() {
        return 0.0;
    }
    let c = conic.matrix();
    let sum: f64 = points
        .iter()
        .map(|p| {
            let x = p.to_homogeneous();
            let cx = c * x;
            let f = x.dot(&cx);
            let grad = 2.0 * (cx.x * cx.x + cx.y * cx.y).sqrt();
            if grad > 0.0 { (f / grad).powi(2) } else { 0.0 }
        })
        .sum();
    (sum / points.len() as f64).sqrt()
}

/// Pixel conic to the normalized camera plane: `KᵀCK`.
pub fn normalize_to_camera(conic: &Conic, k: &Intrinsics) -> Conic {
    conic
        .transform(&k.matrix())
        .expect("intrinsics with positive focal lengths are invertible")
}

/// The two candidate plane normals, camera frame, positive z.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalPair {
    pub n_plus: UnitVec3,
    pub n_minus: UnitVec3,
}

impl NormalPair {
    pub fn iter(&self) -> impl Iterator<Item = &UnitVec3> {
        [&self.n_plus, &self.n_minus].into_iter()
    }
}

fn camera_facing(v: Vec3) -> UnitVec3 {
    let v = if v.z < 0.0 { -v } else { v };
    UnitVec3::new_normalize(v)
}

/// Normals of the planes whose sections of the viewing cone `xᵀCx = 0`
/// are circles.
///
/// With eigenvalues `λ₁ ≥ λ₂ > 0 > λ₃` and eigenvectors `e₁, e₂, e₃`, the
/// normals are `√((λ₁−λ₂)/(λ₁−λ₃))·e₁ ± √((λ₂−λ₃)/(λ₁−λ₃))·e₃`.
pub fn backproject_circle(normalized: &Conic) -> Result<NormalPair> {
    let mut m = *normalized.matrix();
    let eig = m.symmetric_eigen();
    let positives = eig.eigenvalues.iter().filter(|&&l| l > 0.0).count();
    let negatives = eig.eigenvalues.iter().filter(|&&l| l < 0.0).count();
    let flip = match (positives, negatives) {
        (2, 1) => false,
        (1, 2) => true,
        _ => return Err(Error::NotAnEllipse),
    };
    if flip {
        m = -m;
    }
    let eig = m.symmetric_eigen();
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap_or(std::cmp::Ordering::Equal));
    let [i1, i2, i3] = order;
    let (l1, l2, l3) = (eig.eigenvalues[i1], eig.eigenvalues[i2], eig.eigenvalues[i3]);
    let spread = l1 - l3;
    if spread < 1e-12 * m.norm() {
        return Err(Error::NumericallyDegenerate);
    }
    let e1: Vec3 = eig.eigenvectors.column(i1).into_owned();
    let e3: Vec3 = eig.eigenvectors.column(i3).into_owned();
    let gap = ((l1 - l2) / spread).max(0.0);
    if gap < FRONTO_PARALLEL_GAP {
        let n = camera_facing(e3);
        return Ok(NormalPair { n_plus: n, n_minus: n });
    }
    let a = gap.sqrt();
    let b = ((l2 - l3) / spread).max(0.0).sqrt();
    Ok(NormalPair {
        n_plus: camera_facing(a * e1 + b * e3),
        n_minus: camera_facing(a * e1 - b * e3),
    })
}

/// How the two-fold ambiguity is resolved when scoring against ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScoreMode {
    /// Smaller of the two angles.
    #[default]
    Min,
    /// The candidate whose tilt direction (x/y part) agrees in sign with
    /// the truth; falls back to `Min` when the truth has no tilt.
    OracleSign,
}

impl std::str::FromStr for ScoreMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "min" => Ok(ScoreMode::Min),
            "oracle-sign" => Ok(ScoreMode::OracleSign),
            other => Err(Error::InvalidParameter(format!("unknown score mode {other:?}"))),
        }
    }
}

/// Smaller angle, degrees, between the truth and either candidate.
pub fn angular_error(pair: &NormalPair, truth: &Vec3) -> f64 {
    pair.iter()
        .map(|n| angle_between(n, truth).to_degrees())
        .fold(f64::INFINITY, f64::min)
}

/// Angular error under the chosen [`ScoreMode`], degrees.
pub fn score(pair: &NormalPair, truth: &Vec3, mode: ScoreMode) -> f64 {
    match mode {
        ScoreMode::Min => angular_error(pair, truth),
        ScoreMode::OracleSign => {
            let tilt = truth.xy();
            if tilt.norm() == 0.0 {
                return angular_error(pair, truth);
            }
            let chosen = if pair.n_plus.xy().dot(&tilt) >= pair.n_minus.xy().dot(&tilt) {
                pair.n_plus
            } else {
                pair.n_minus
            };
            angle_between(&chosen, truth).to_degrees()
        }
    }
}
