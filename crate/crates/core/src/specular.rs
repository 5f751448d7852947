//! Phong specular forward model on the scene plane `z = 0`.
//!
//! With the light co-located with the viewpoint the quartic isocurve
//! factors into two circles centred under the viewpoint; the observable
//! isophote is the inner one.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point, Vec3};

/// Viewpoint, light, roughness and intensity scale of the specular model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneConfig {
    pub viewpoint: Vec3,
    pub light: Vec3,
    /// Phong exponent `n`.
    pub roughness: f64,
    /// Combined albedo, light power and camera response `c`.
    pub scale: f64,
}

impl SceneConfig {
    pub fn new(viewpoint: Vec3, light: Vec3, roughness: f64, scale: f64) -> Result<Self> {
        let cfg = Self { viewpoint, light, roughness, scale };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Light co-located with the viewpoint.
    pub fn endoscopic(viewpoint: Vec3, roughness: f64, scale: f64) -> Result<Self> {
        Self::new(viewpoint, viewpoint, roughness, scale)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = self.viewpoint.iter().chain(self.light.iter()).all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidParameter("non-finite viewpoint or light".into()));
        }
        if self.viewpoint.z <= 0.0 {
            return Err(Error::InvalidParameter("viewpoint must lie above the plane (V_Z > 0)".into()));
        }
        if !(self.roughness > 0.0) || !(self.scale > 0.0) {
            return Err(Error::InvalidParameter("roughness and scale must be positive".into()));
        }
        Ok(())
    }

    /// Mirror image of the light through the scene plane.
    pub fn mirrored_light(&self) -> Vec3 {
        Vec3::new(self.light.x, self.light.y, -self.light.z)
    }

    /// Plane point of perfect reflection, where the segment from the
    /// viewpoint to the mirrored light crosses `z = 0`.
    pub fn brightest_point(&self) -> Result<Point> {
        let v = self.viewpoint;
        let r = self.mirrored_light();
        let dz = v.z - r.z;
        if dz.abs() < f64::EPSILON * v.z.abs().max(1.0) {
            return Err(Error::DegenerateGeometry("light lies in the scene plane"));
        }
        let s = v.z / dz;
        Ok(Point::new(v.x + s * (r.x - v.x), v.y + s * (r.y - v.y)))
    }
}

/// An isovalue `t` together with `τ = (t/c)^(1/n)` and `κ = 1 − τ²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IsoLevel {
    t: f64,
    tau: f64,
    kappa: f64,
}

impl IsoLevel {
    /// Level for isovalue `t` under scale `c` and roughness `n`; requires `0 < t ≤ c`.
    pub fn new(t: f64, scale: f64, roughness: f64) -> Result<Self> {
        if !(scale > 0.0) || !(roughness > 0.0) {
            return Err(Error::InvalidParameter("scale and roughness must be positive".into()));
        }
        if !(t > 0.0) {
            return Err(Error::IsovalueOutOfDomain(t));
        }
        if t > scale {
            return Err(Error::EmptyIsophote);
        }
        let log_tau = (t / scale).ln() / roughness;
        Ok(Self {
            t,
            tau: log_tau.exp(),
            // 1 − τ² without cancellation when τ → 1
            kappa: -(2.0 * log_tau).exp_m1(),
        })
    }

    pub fn for_scene(t: f64, cfg: &SceneConfig) -> Result<Self> {
        Self::new(t, cfg.scale, cfg.roughness)
    }

    /// Level whose `κ` is given; requires `0 ≤ κ < 1`.
    pub fn from_kappa(kappa: f64, scale: f64, roughness: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&kappa) {
            return Err(Error::KappaOutOfDomain(kappa));
        }
        let tau = (1.0 - kappa).sqrt();
        Ok(Self { t: scale * tau.powf(roughness), tau, kappa })
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }
}

/// Radii of the two circles making up the co-located isocurve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum CircleRadii {
    /// `0 < κ < 1`: two distinct circles with `r_minus < |V_Z| < r_plus`.
    Distinct { r_minus: f64, r_plus: f64 },
    /// `κ = 1`: both circles merge into the outer ring of radius `|V_Z|`.
    Double(f64),
}

impl CircleRadii {
    pub fn r_minus(&self) -> f64 {
        match *self {
            CircleRadii::Distinct { r_minus, .. } => r_minus,
            CircleRadii::Double(r) => r,
        }
    }

    pub fn r_plus(&self) -> f64 {
        match *self {
            CircleRadii::Distinct { r_plus, .. } => r_plus,
            CircleRadii::Double(r) => r,
        }
    }
}

/// Concentric circle pair centred under the viewpoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CirclePair {
    pub center: Point,
    pub r_minus: f64,
    pub r_plus: f64,
}

impl CirclePair {
    pub fn new(viewpoint: &Vec3, kappa: f64) -> Result<Self> {
        let radii = circle_radii(kappa, viewpoint.z)?;
        Ok(Self {
            center: Point::new(viewpoint.x, viewpoint.y),
            r_minus: radii.r_minus(),
            r_plus: radii.r_plus(),
        })
    }
}

/// A circle on the scene plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Circle {
    pub center: Point,
    pub radius: f64,
}

/// Phong specular intensity `c·max(0, cos β)ⁿ` at plane point `p`.
pub fn phong_intensity(p: &Point, cfg: &SceneConfig) -> Result<f64> {
    let pp = Vec3::new(p.x, p.y, 0.0);
    let to_view = cfg.viewpoint - pp;
    let to_mirror = cfg.mirrored_light() - pp;
    let (nv, nr) = (to_view.norm(), to_mirror.norm());
    if nv == 0.0 || nr == 0.0 {
        return Err(Error::DegenerateGeometry("plane point coincides with viewpoint or mirrored light"));
    }
    let cos_beta = -to_mirror.dot(&to_view) / (nv * nr);
    Ok(cfg.scale * cos_beta.max(0.0).powf(cfg.roughness))
}

/// General specular isocurve `((R−P)ᵀ(V−P))² − τ²‖R−P‖²‖V−P‖²`.
pub fn general_isocurve_eval(p: &Point, cfg: &SceneConfig, level: &IsoLevel) -> f64 {
    let pp = Vec3::new(p.x, p.y, 0.0);
    let to_view = cfg.viewpoint - pp;
    let to_mirror = cfg.mirrored_light() - pp;
    let dot = to_mirror.dot(&to_view);
    dot * dot - level.tau * level.tau * to_mirror.norm_squared() * to_view.norm_squared()
}

/// Co-located specular isocurve quartic in the squared distance to `(V_X, V_Y)`.
pub fn endoscopic_isocurve_eval(p: &Point, viewpoint: &Vec3, kappa: f64) -> f64 {
    let dx = p.x - viewpoint.x;
    let dy = p.y - viewpoint.y;
    let d2 = dx * dx + dy * dy;
    let vz2 = viewpoint.z * viewpoint.z;
    kappa * d2 * d2 + 2.0 * vz2 * (kappa - 2.0) * d2 + kappa * vz2 * vz2
}

/// Radii `r±` of the co-located isocurve circles.
///
/// Uses the closed form `r∓ = |V_Z|·√((1 ∓ τ)/(1 ± τ))` with `τ = √(1 − κ)`,
/// which equals the nested-radical expression but avoids its cancellation
/// for small `κ`.
pub fn circle_radii(kappa: f64, v_z: f64) -> Result<CircleRadii> {
    if !(v_z != 0.0 && v_z.is_finite()) {
        return Err(Error::InvalidParameter("V_Z must be finite and nonzero".into()));
    }
    let vz = v_z.abs();
    if kappa == 1.0 {
        return Ok(CircleRadii::Double(vz));
    }
    if !(kappa > 0.0 && kappa < 1.0) {
        return Err(Error::KappaOutOfDomain(kappa));
    }
    let tau = (1.0 - kappa).sqrt();
    let root = kappa.sqrt();
    Ok(CircleRadii::Distinct {
        r_minus: vz * root / (1.0 + tau),
        r_plus: vz * (1.0 + tau) / root,
    })
}

/// The observable isophote: the inner isocurve circle.
pub fn isophote_circle(level: &IsoLevel, viewpoint: &Vec3) -> Result<Circle> {
    if level.kappa <= 0.0 {
        return Err(Error::EmptyIsophote);
    }
    let radii = circle_radii(level.kappa, viewpoint.z)?;
    Ok(Circle {
        center: Point::new(viewpoint.x, viewpoint.y),
        radius: radii.r_minus(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn endo(vz: f64, n: f64) -> SceneConfig {
        SceneConfig::endoscopic(Vec3::new(0.0, 0.0, vz), n, 1.0).unwrap()
    }

    /// Independent root finder: bisection on E along the +x ray from the centre.
    fn bisect_root(kappa: f64, vz: f64, mut lo: f64, mut hi: f64) -> f64 {
        let v = Vec3::new(0.0, 0.0, vz);
        let f = |r: f64| endoscopic_isocurve_eval(&Point::new(r, 0.0), &v, kappa);
        let flo = f(lo);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if (f(mid) > 0.0) == (flo > 0.0) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn radii_for_kappa_055() {
        let radii = circle_radii(0.55, 1.0).unwrap();
        // nested-radical evaluation: √(a ∓ √(a²−1)), a = (2−κ)/κ
        assert_relative_eq!(radii.r_minus(), 0.443_865_691_193_193_2, max_relative = 1e-12);
        assert_relative_eq!(radii.r_plus(), 2.252_933_758_659_775, max_relative = 1e-12);
        assert_relative_eq!(radii.r_minus(), bisect_root(0.55, 1.0, 0.0, 1.0), max_relative = 1e-12);
        assert_relative_eq!(radii.r_plus(), bisect_root(0.55, 1.0, 1.0, 10.0), max_relative = 1e-12);
    }

    #[test]
    fn radii_boundaries() {
        assert_eq!(circle_radii(1.0, 1.0).unwrap(), CircleRadii::Double(1.0));
        let near = circle_radii(1.0 - 1e-12, 1.0).unwrap();
        assert_relative_eq!(near.r_minus(), 1.0, epsilon = 1e-5);
        assert_relative_eq!(near.r_plus(), 1.0, epsilon = 1e-5);
        assert_eq!(circle_radii(0.0, 1.0), Err(Error::KappaOutOfDomain(0.0)));
        assert_eq!(circle_radii(1.5, 1.0), Err(Error::KappaOutOfDomain(1.5)));
        assert!(circle_radii(-0.1, 1.0).is_err());
    }

    #[test]
    fn brightest_point_has_full_intensity() {
        let cfg = SceneConfig::endoscopic(Vec3::new(12.0, -7.0, 300.0), 50.0, 2.5).unwrap();
        assert_eq!(phong_intensity(&Point::new(12.0, -7.0), &cfg).unwrap(), 2.5);
        assert_eq!(cfg.brightest_point().unwrap(), Point::new(12.0, -7.0));
    }

    #[test]
    fn intensity_on_inner_circle() {
        let cfg = endo(1000.0, 50.0);
        let r = circle_radii(0.55, 1000.0).unwrap().r_minus();
        let i = phong_intensity(&Point::new(r, 0.0), &cfg).unwrap();
        assert_relative_eq!(i, 0.45_f64.powi(25), max_relative = 1e-9);
        assert_relative_eq!(i, 2.139_502_727_067_032_5e-9, max_relative = 1e-9);
    }

    #[test]
    fn intensity_clamped_beyond_outer_ring() {
        let cfg = endo(100.0, 5.0);
        assert_eq!(phong_intensity(&Point::new(150.0, 0.0), &cfg).unwrap(), 0.0);
    }

    #[test]
    fn degenerate_geometry() {
        let cfg = SceneConfig::new(Vec3::new(0.0, 0.0, 1.0), Vec3::new(3.0, 0.0, 0.0), 5.0, 1.0).unwrap();
        assert!(phong_intensity(&Point::new(3.0, 0.0), &cfg).is_err());
    }

    #[test]
    fn scene_validation() {
        assert!(SceneConfig::endoscopic(Vec3::new(0.0, 0.0, -1.0), 5.0, 1.0).is_err());
        assert!(SceneConfig::endoscopic(Vec3::new(0.0, 0.0, 1.0), 0.0, 1.0).is_err());
        assert!(SceneConfig::endoscopic(Vec3::new(0.0, 0.0, 1.0), 1.0, -1.0).is_err());
    }

    #[test]
    fn iso_level_consistency() {
        let l = IsoLevel::new(0.1, 1.0, 50.0).unwrap();
        assert_relative_eq!(l.tau(), 0.1_f64.powf(1.0 / 50.0), max_relative = 1e-14);
        assert_relative_eq!(l.kappa(), 1.0 - l.tau() * l.tau(), max_relative = 1e-12);
        let k = IsoLevel::from_kappa(l.kappa(), 1.0, 50.0).unwrap();
        assert_relative_eq!(k.t(), 0.1, max_relative = 1e-10);
        assert_eq!(IsoLevel::new(1.0, 1.0, 50.0).unwrap().kappa(), 0.0);
        assert_eq!(IsoLevel::new(1.5, 1.0, 50.0), Err(Error::EmptyIsophote));
        assert_eq!(IsoLevel::new(0.0, 1.0, 50.0), Err(Error::IsovalueOutOfDomain(0.0)));
    }

    #[test]
    fn isophote_circle_cases() {
        let level = IsoLevel::from_kappa(0.55, 1.0, 50.0).unwrap();
        let c = isophote_circle(&level, &Vec3::new(0.0, 0.0, 1000.0)).unwrap();
        assert_eq!(c.center, Point::origin());
        assert_relative_eq!(c.radius, 443.865_691_193_193_2, max_relative = 1e-12);

        let peak = IsoLevel::new(1.0, 1.0, 50.0).unwrap();
        assert_eq!(isophote_circle(&peak, &Vec3::new(0.0, 0.0, 1000.0)), Err(Error::EmptyIsophote));
        let almost = IsoLevel::new(1.0 - 1e-9, 1.0, 50.0).unwrap();
        let tiny = isophote_circle(&almost, &Vec3::new(0.0, 0.0, 1000.0)).unwrap();
        assert!(tiny.radius < 0.01);
    }

    #[test]
    fn quartic_roots_at_radii() {
        let v = Vec3::new(3.0, -4.0, 250.0);
        let pair = CirclePair::new(&v, 0.3).unwrap();
        let tol = 1e-9 * v.z.powi(4);
        for r in [pair.r_minus, pair.r_plus] {
            let p = Point::new(v.x + r * 0.6, v.y - r * 0.8);
            assert!(endoscopic_isocurve_eval(&p, &v, 0.3).abs() < tol);
        }
        let c = endoscopic_isocurve_eval(&Point::new(3.0, -4.0), &v, 0.3);
        assert_relative_eq!(c, 0.3 * v.z.powi(4), max_relative = 1e-14);
    }

    #[test]
    fn general_quartic_at_peak_level() {
        // τ = 1: Cauchy–Schwarz makes Q ≤ 0, zero only at perfect reflection
        let cfg = SceneConfig::new(Vec3::new(10.0, 0.0, 500.0), Vec3::new(-40.0, 30.0, 450.0), 20.0, 1.0).unwrap();
        let level = IsoLevel::new(1.0, 1.0, 20.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let p = Point::new(rng.random_range(-800.0..800.0), rng.random_range(-800.0..800.0));
            assert!(general_isocurve_eval(&p, &cfg, &level) <= 1e-6);
        }
        let bp = cfg.brightest_point().unwrap();
        let scale = 500.0_f64.powi(4);
        assert!(general_isocurve_eval(&bp, &cfg, &level).abs() < 1e-12 * scale);
    }

    #[test]
    fn rendered_level_lies_on_general_quartic() {
        let cfg = SceneConfig::new(Vec3::new(0.0, 0.0, 800.0), Vec3::new(90.0, -60.0, 880.0), 35.0, 1.7).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut checked = 0;
        while checked < 500 {
            let p = Point::new(rng.random_range(-600.0..600.0), rng.random_range(-600.0..600.0));
            let t = phong_intensity(&p, &cfg).unwrap();
            if t <= 1e-200 {
                continue;
            }
            let level = IsoLevel::for_scene(t, &cfg).unwrap();
            let pp = Vec3::new(p.x, p.y, 0.0);
            let mag = (cfg.mirrored_light() - pp).norm_squared() * (cfg.viewpoint - pp).norm_squared();
            assert!(general_isocurve_eval(&p, &cfg, &level).abs() < 1e-6 * mag);
            checked += 1;
        }
    }

    #[test]
    fn radial_symmetry_under_colocation() {
        let cfg = SceneConfig::endoscopic(Vec3::new(5.0, 9.0, 400.0), 40.0, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let r = rng.random_range(0.0..600.0);
            let (a, b) = (rng.random_range(0.0..6.3_f64), rng.random_range(0.0..6.3_f64));
            let p = Point::new(5.0 + r * a.cos(), 9.0 + r * a.sin());
            let q = Point::new(5.0 + r * b.cos(), 9.0 + r * b.sin());
            let (ip, iq) = (phong_intensity(&p, &cfg).unwrap(), phong_intensity(&q, &cfg).unwrap());
            assert!((ip - iq).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn colocated_specialisation(kappa in 0.001..0.999f64, vz in 1.0..3000.0f64,
                                    vx in -100.0..100.0f64, x in -5000.0..5000.0f64, y in -5000.0..5000.0f64) {
            let v = Vec3::new(vx, 0.5 * vx, vz);
            let cfg = SceneConfig::endoscopic(v, 30.0, 1.0).unwrap();
            let level = IsoLevel::from_kappa(kappa, 1.0, 30.0).unwrap();
            let p = Point::new(x, y);
            let q = general_isocurve_eval(&p, &cfg, &level);
            let e = endoscopic_isocurve_eval(&p, &v, level.kappa());
            let dx = x - vx; let dy = y - 0.5 * vx;
            let mag = (dx * dx + dy * dy + vz * vz).powi(2);
            prop_assert!((q - e).abs() <= 1e-9 * mag.max(e.abs()));
        }

        #[test]
        fn quartic_factorises(kappa in 0.001..0.999f64, vz in 1.0..3000.0f64,
                              x in -5000.0..5000.0f64, y in -5000.0..5000.0f64) {
            let v = Vec3::new(7.0, -2.0, vz);
            let pair = CirclePair::new(&v, kappa).unwrap();
            let p = Point::new(x, y);
            let d2 = (x - 7.0).powi(2) + (y + 2.0).powi(2);
            let prod = kappa * (d2 - pair.r_plus.powi(2)) * (d2 - pair.r_minus.powi(2));
            let e = endoscopic_isocurve_eval(&p, &v, kappa);
            let mag = kappa * d2 * d2 + 2.0 * vz * vz * (2.0 - kappa) * d2 + kappa * vz.powi(4);
            prop_assert!((prod - e).abs() <= 1e-9 * mag);
        }

        #[test]
        fn radii_product_and_order(kappa in 0.0001..0.9999f64, vz in 0.1..5000.0f64) {
            let r = circle_radii(kappa, vz).unwrap();
            prop_assert!(r.r_minus() <= vz && vz <= r.r_plus());
            prop_assert!((r.r_minus() * r.r_plus() / (vz * vz) - 1.0).abs() < 1e-9);
        }

        #[test]
        fn isophotes_nest(k1 in 0.001..0.998f64, dk in 0.0005..0.5f64) {
            let k2 = (k1 + dk).min(0.999);
            prop_assume!(k2 > k1);
            let (a, b) = (circle_radii(k1, 1.0).unwrap(), circle_radii(k2, 1.0).unwrap());
            prop_assert!(a.r_minus() < b.r_minus());
            prop_assert!(a.r_plus() > b.r_plus());
        }
    }
}
