//! Synthetic specular images: scene-plane texture, slanted perspective
//! view, light misplacement and sensor noise.
//!
//! Conventions:
//! * texture pixel `(x, y)` is centred at integer coordinates and the
//!   brightest point sits at `(M/2, M/2)`;
//! * the texture spans a square window of side `4·r₋` on the plane, where
//!   `r₋` is the isophote radius at `t = 0.1` for the reference roughness;
//! * the viewing camera has `f = M`, principal point `(M/2, M/2)`, looks at
//!   the brightest point along its optical axis, and sits at distance
//!   `V_Z` from it;
//! * the slant rotates the plane about the camera x-axis, giving the
//!   ground-truth normal `(0, −sin θ, cos θ)`.

use nalgebra::Matrix3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Homography, Intrinsics, Point, Vec3};
use crate::image::{ScalarImage, DEFAULT_MAX};
use crate::specular::{circle_radii, phong_intensity, IsoLevel, SceneConfig};

/// Roughness used to size the texture window, independent of the rendered roughness.
pub const REFERENCE_ROUGHNESS: f64 = 50.0;
/// Isovalue used to size the texture window.
pub const REFERENCE_ISOVALUE: f64 = 0.1;
/// Window side as a multiple of the reference isophote radius.
pub const WINDOW_RADII: f64 = 4.0;

/// Portable seeded generator used throughout the harness.
pub type SimRng = ChaCha12Rng;

/// Parameters of one synthetic acquisition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimParams {
    /// Texture and image side `M`, pixels.
    pub size: usize,
    /// Camera to plane distance `V_Z`, mm.
    pub camera_distance: f64,
    /// Phong exponent `n`.
    pub roughness: f64,
    /// Plane slant `θ`, radians; serialized in degrees as `slant_deg`.
    #[serde(rename = "slant_deg", with = "degrees")]
    pub slant: f64,
    /// Noise standard deviation as a fraction of the intensity range.
    pub noise: f64,
    /// Light offset magnitude `ε`, mm.
    pub light_offset: f64,
    /// Isovalue `t` on the BP-normalized image.
    pub isovalue: f64,
    pub seed: u64,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            size: 406,
            camera_distance: 1000.0,
            roughness: 50.0,
            slant: 58f64.to_radians(),
            noise: 0.05,
            light_offset: 0.0,
            isovalue: 0.1,
            seed: 0,
        }
    }
}

impl SimParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        if self.size < 32 {
            return bad("size must be at least 32");
        }
        if !(self.camera_distance > 0.0 && self.camera_distance.is_finite()) {
            return bad("camera distance must be positive");
        }
        if !(self.roughness > 0.0 && self.roughness.is_finite()) {
            return bad("roughness must be positive");
        }
        if !(0.0..std::f64::consts::FRAC_PI_2).contains(&self.slant) {
            return bad("slant must lie in [0, π/2)");
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return bad("noise must be non-negative");
        }
        if !(self.light_offset >= 0.0 && self.light_offset.is_finite()) {
            return bad("light offset must be non-negative");
        }
        if !(self.isovalue > 0.0 && self.isovalue.is_finite()) {
            return bad("isovalue must be positive");
        }
        Ok(())
    }

    pub fn viewpoint(&self) -> Vec3 {
        Vec3::new(0.0, 0.0, self.camera_distance)
    }

    pub fn intrinsics(&self) -> Intrinsics {
        let m = self.size as f64;
        Intrinsics { fx: m, fy: m, cx: m / 2.0, cy: m / 2.0 }
    }

    /// Physical side of the texture window, mm.
    pub fn window_side(&self) -> f64 {
        let level = IsoLevel::new(REFERENCE_ISOVALUE, 1.0, REFERENCE_ROUGHNESS)
            .expect("reference level is valid");
        let r = circle_radii(level.kappa(), self.camera_distance)
            .expect("reference kappa lies in (0, 1)")
            .r_minus();
        WINDOW_RADII * r
    }

    /// Millimetres per texture pixel.
    pub fn pixel_size(&self) -> f64 {
        self.window_side() / self.size as f64
    }

    /// Distance of the viewing camera to the brightest point, mm. The
    /// camera sits at the viewpoint distance, as the light and camera are
    /// co-located.
    pub fn viewing_distance(&self) -> f64 {
        self.camera_distance
    }
}

mod degrees {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(rad: &f64, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(rad.to_degrees())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        f64::deserialize(d).map(f64::to_radians)
    }
}

/// Reference data for scoring a reconstruction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    /// Plane normal in the camera frame, positive z.
    pub normal: [f64; 3],
    /// Texture pixel to image pixel.
    pub homography: Matrix3<f64>,
    pub intrinsics: Intrinsics,
    /// Brightest point in image pixels.
    pub bp_image: [f64; 2],
}

impl GroundTruth {
    pub fn normal_vec(&self) -> Vec3 {
        Vec3::from(self.normal)
    }
}

/// Generator for substream `(key, index)` of a master seed.
///
/// `key` identifies a group of trials (the swept value's bit pattern) and
/// `index` the trial inside it; the ChaCha stream id carries `index`.
pub fn substream(master: u64, key: u64, index: u64) -> SimRng {
    let mut rng = SimRng::seed_from_u64(splitmix64(master ^ splitmix64(key)));
    rng.set_stream(index);
    rng
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `L = V + ε(cos α, sin α, β)` with `α ~ U[0, 2π)`, `β ~ U[−½, ½)`.
pub fn perturb_light<R: Rng + ?Sized>(viewpoint: &Vec3, epsilon: f64, rng: &mut R) -> Vec3 {
    let alpha: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let beta: f64 = rng.random_range(-0.5..0.5);
    if epsilon == 0.0 {
        return *viewpoint;
    }
    viewpoint + epsilon * Vec3::new(alpha.cos(), alpha.sin(), beta)
}

/// Scene-plane texture `M×M` centred at the brightest point, peak mapped to 255.
pub fn render_texture(params: &SimParams, light: &Vec3) -> Result<ScalarImage> {
    params.validate()?;
    let cfg = SceneConfig::new(params.viewpoint(), *light, params.roughness, 1.0)?;
    let bp = cfg.brightest_point()?;
    let m = params.size;
    let s = params.pixel_size();
    let half = m as f64 / 2.0;
    let mut img = ScalarImage::new(m, m, DEFAULT_MAX);
    for y in 0..m {
        for x in 0..m {
            let p = Point::new(bp.x + (x as f64 - half) * s, bp.y + (y as f64 - half) * s);
            img.set(x, y, DEFAULT_MAX * phong_intensity(&p, &cfg)?);
        }
    }
    Ok(img)
}

/// Texture-to-image homography of the slanted view and its ground truth.
pub fn build_view_homography(params: &SimParams) -> Result<(Homography, GroundTruth)> {
    params.validate()?;
    let k = params.intrinsics();
    let s = params.pixel_size();
    let d = params.viewing_distance();
    let half = params.size as f64 / 2.0;
    let (st, ct) = params.slant.sin_cos();
    let ex = Vec3::new(1.0, 0.0, 0.0);
    let ey = Vec3::new(0.0, ct, st);
    let origin = Vec3::new(0.0, 0.0, d) - half * s * (ex + ey);
    let plane_to_camera = Matrix3::from_columns(&[ex * s, ey * s, origin]);
    let h = Homography::new(k.matrix() * plane_to_camera)?;
    let bp = h.apply(&Point::new(half, half))?;
    let normal = ex.cross(&ey).normalize();
    Ok((
        h,
        GroundTruth {
            normal: [normal.x, normal.y, normal.z],
            homography: *h.matrix(),
            intrinsics: k,
            bp_image: [bp.x, bp.y],
        },
    ))
}

/// Inverse warp: destination pixel `q` samples `src` at `H⁻¹q` bilinearly,
/// zero outside the source.
pub fn warp_image(src: &ScalarImage, h: &Homography, width: usize, height: usize) -> Result<ScalarImage> {
    let inv = h.inverse()?;
    Ok(ScalarImage::from_fn(width, height, src.max_value(), |x, y| {
        inv.apply(&Point::new(x as f64, y as f64))
            .ok()
            .and_then(|p| src.bilinear(&p))
            .unwrap_or(0.0)
    }))
}

/// Adds i.i.d. `N(0, (σ·m)²)` noise and clamps to `[0, m]`.
pub fn add_noise<R: Rng + ?Sized>(img: &ScalarImage, sigma: f64, rng: &mut R) -> Result<ScalarImage> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidParameter("noise must be non-negative".into()));
    }
    if sigma == 0.0 {
        return Ok(img.clone());
    }
    let m = img.max_value();
    let normal = Normal::new(0.0, sigma * m).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let mut out = img.clone();
    for v in out.data_mut() {
        *v = (*v + normal.sample(rng)).clamp(0.0, m);
    }
    Ok(out)
}

/// Output of the simulated acquisition.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub light: Vec3,
    pub texture: ScalarImage,
    pub image: ScalarImage,
    pub truth: GroundTruth,
}

/// Runs light perturbation, texture rendering, warping and noise with one generator.
pub fn simulate<R: Rng + ?Sized>(params: &SimParams, rng: &mut R) -> Result<Simulation> {
    params.validate()?;
    let light = perturb_light(&params.viewpoint(), params.light_offset, rng);
    let texture = render_texture(params, &light)?;
    let (h, truth) = build_view_homography(params)?;
    let warped = warp_image(&texture, &h, params.size, params.size)?;
    let image = add_noise(&warped, params.noise, rng)?;
    Ok(Simulation { light, texture, image, truth })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{angle_between, Conic};
    use crate::specular::isophote_circle;
    use approx::assert_relative_eq;

    fn noiseless() -> SimParams {
        SimParams { noise: 0.0, ..SimParams::default() }
    }

    #[test]
    fn defaults_match_reference_setup() {
        let p = SimParams::default();
        assert_eq!(p.size, 406);
        assert_eq!(p.camera_distance, 1000.0);
        assert_eq!(p.roughness, 50.0);
        assert_eq!(p.noise, 0.05);
        assert_eq!(p.light_offset, 0.0);
        assert_eq!(p.isovalue, 0.1);
        assert_relative_eq!(p.slant.to_degrees(), 58.0, epsilon = 1e-12);
        assert!(p.validate().is_ok());
        assert!(SimParams { size: 16, ..p }.validate().is_err());
        assert!(SimParams { isovalue: 0.0, ..p }.validate().is_err());
        assert!(SimParams { slant: std::f64::consts::FRAC_PI_2, ..p }.validate().is_err());
    }

    #[test]
    fn zero_offset_keeps_light_on_viewpoint() {
        let v = Vec3::new(0.0, 0.0, 1000.0);
        let mut rng = substream(1, 2, 3);
        assert_eq!(perturb_light(&v, 0.0, &mut rng), v);
    }

    #[test]
    fn offset_light_geometry() {
        let v = Vec3::new(0.0, 0.0, 1000.0);
        let mut rng = substream(9, 0, 0);
        for _ in 0..1000 {
            let d = perturb_light(&v, 200.0, &mut rng) - v;
            assert_relative_eq!(d.xy().norm(), 200.0, max_relative = 1e-12);
            assert!((-100.0..=100.0).contains(&d.z));
        }
        let a = perturb_light(&v, 200.0, &mut substream(4, 5, 6));
        let b = perturb_light(&v, 200.0, &mut substream(4, 5, 6));
        assert_eq!(a, b);
        assert_ne!(a, perturb_light(&v, 200.0, &mut substream(4, 5, 7)));
    }

    #[test]
    fn texture_peak_and_symmetry() {
        let p = noiseless();
        let tex = render_texture(&p, &p.viewpoint()).unwrap();
        let c = p.size / 2;
        assert_eq!(tex.get(c, c), 255.0);
        let max = tex.data().iter().cloned().fold(f64::MIN, f64::max);
        assert_eq!(max, 255.0);
        for k in 1..c {
            let base = tex.get(c + k, c);
            for v in [tex.get(c - k, c), tex.get(c, c + k), tex.get(c, c - k)] {
                assert!((v - base).abs() <= 1e-12 * 255.0);
            }
        }
    }

    #[test]
    fn texture_level_set_is_inner_circle() {
        let p = noiseless();
        let tex = render_texture(&p, &p.viewpoint()).unwrap();
        let level = IsoLevel::new(0.1, 1.0, p.roughness).unwrap();
        let r = isophote_circle(&level, &p.viewpoint()).unwrap().radius / p.pixel_size();
        let c = (p.size / 2) as f64;
        // level crossing along the +x row, located by linear interpolation
        let row = c as usize;
        let mut found = None;
        for x in row..p.size - 1 {
            let (a, b) = (tex.get(x, row) / 255.0, tex.get(x + 1, row) / 255.0);
            if a >= 0.1 && b < 0.1 {
                found = Some(x as f64 + (a - 0.1) / (a - b));
                break;
            }
        }
        let crossing = found.unwrap() - c;
        assert!((crossing - r).abs() < 0.05, "crossing {crossing} vs radius {r}");
    }

    #[test]
    fn fronto_parallel_view_is_similarity() {
        let p = SimParams { slant: 0.0, ..noiseless() };
        let (h, truth) = build_view_homography(&p).unwrap();
        let hm = h.matrix() / h.matrix()[(2, 2)];
        let scale = p.pixel_size() * p.intrinsics().fx / p.viewing_distance();
        let c = p.size as f64 / 2.0 * (1.0 - scale);
        #[rustfmt::skip]
        let expected = Matrix3::new(
            scale, 0.0, c,
            0.0, scale, c,
            0.0, 0.0, 1.0,
        );
        assert!((hm - expected).norm() < 1e-12);
        assert_eq!(truth.normal, [0.0, 0.0, 1.0]);
        assert_relative_eq!(truth.bp_image[0], 203.0, epsilon = 1e-9);
    }

    #[test]
    fn slanted_view_ground_truth() {
        let p = noiseless();
        let (_, truth) = build_view_homography(&p).unwrap();
        let t = 58f64.to_radians();
        let expected = Vec3::new(0.0, -t.sin(), t.cos());
        assert!(angle_between(&truth.normal_vec(), &expected) < 1e-12);
        assert_relative_eq!(truth.bp_image[0], 203.0, epsilon = 1e-9);
        assert_relative_eq!(truth.bp_image[1], 203.0, epsilon = 1e-9);
    }

    #[test]
    fn projected_circle_matches_transferred_conic() {
        let p = noiseless();
        let (h, _) = build_view_homography(&p).unwrap();
        let level = IsoLevel::new(0.1, 1.0, p.roughness).unwrap();
        let r = isophote_circle(&level, &p.viewpoint()).unwrap().radius / p.pixel_size();
        let c = p.size as f64 / 2.0;
        let circle = Conic::circle(Point::new(c, c), r).unwrap();
        let image_conic = circle.transform(&h.inverse().unwrap().matrix().clone()).unwrap();
        for k in 0..36 {
            let s = k as f64 * 10f64.to_radians();
            let q = h.apply(&Point::new(c + r * s.cos(), c + r * s.sin())).unwrap();
            let g = image_conic.matrix();
            let x = q.to_homogeneous();
            let scale = x.norm_squared() * g.norm();
            assert!(image_conic.eval(&q).abs() < 1e-12 * scale);
        }
        assert!(image_conic.is_ellipse());
    }

    #[test]
    fn warp_identity_and_quarter_turn() {
        let src = ScalarImage::from_fn(9, 9, 255.0, |x, y| (x * 13 + y * 7) as f64);
        let same = warp_image(&src, &Homography::identity(), 9, 9).unwrap();
        assert_eq!(same, src);
        // (x, y) -> (8 − y, x): quarter turn about the centre (4, 4)
        #[rustfmt::skip]
        let rot = Homography::new(Matrix3::new(
            0.0, -1.0, 8.0,
            1.0,  0.0, 0.0,
            0.0,  0.0, 1.0,
        )).unwrap();
        let turned = warp_image(&src, &rot, 9, 9).unwrap();
        for y in 0..9 {
            for x in 0..9 {
                assert_eq!(turned.get(8 - y, x), src.get(x, y));
            }
        }
    }

    #[test]
    fn warp_outside_is_zero() {
        let src = ScalarImage::from_fn(4, 4, 255.0, |_, _| 100.0);
        #[rustfmt::skip]
        let shift = Homography::new(Matrix3::new(
            1.0, 0.0, 10.0,
            0.0, 1.0, 0.0,
            0.0, 0.0, 1.0,
        )).unwrap();
        let out = warp_image(&src, &shift, 4, 4).unwrap();
        assert!(out.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn noise_statistics() {
        let clean = ScalarImage::from_fn(400, 400, 255.0, |_, _| 127.5);
        assert_eq!(add_noise(&clean, 0.0, &mut substream(0, 0, 0)).unwrap(), clean);
        let noisy = add_noise(&clean, 0.05, &mut substream(7, 0, 0)).unwrap();
        let diffs: Vec<f64> = noisy.data().iter().zip(clean.data()).map(|(a, b)| a - b).collect();
        let n = diffs.len() as f64;
        let mean = diffs.iter().sum::<f64>() / n;
        let std = (diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!((std / 12.75 - 1.0).abs() < 0.02, "std {std}");
        let again = add_noise(&clean, 0.05, &mut substream(7, 0, 0)).unwrap();
        assert_eq!(noisy, again);
    }

    #[test]
    fn simulation_is_deterministic() {
        let p = SimParams { size: 64, ..SimParams::default() };
        let a = simulate(&p, &mut substream(3, 1, 2)).unwrap();
        let b = simulate(&p, &mut substream(3, 1, 2)).unwrap();
        assert_eq!(a.image, b.image);
    }

    #[test]
    fn higher_roughness_shrinks_isophote() {
        let v = Vec3::new(0.0, 0.0, 1000.0);
        let mut last = f64::INFINITY;
        for n in [10.0, 30.0, 50.0, 90.0, 120.0] {
            let level = IsoLevel::new(0.1, 1.0, n).unwrap();
            let r = isophote_circle(&level, &v).unwrap().radius;
            assert!(r < last);
            last = r;
        }
    }
}
