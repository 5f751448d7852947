//! Quick analytic checks of the model and the reconstruction chain.

use rand::Rng;

use crate::geometry::{angle_between, Point, Vec3};
use crate::harness::{run_sweep, run_trial, write_records_csv, PipelineOptions, SweepParam, SweepSpec};
use crate::reconstruction::{backproject_circle, fit_ellipse};
use crate::simulator::{substream, SimParams};
use crate::specular::{circle_radii, endoscopic_isocurve_eval, general_isocurve_eval, IsoLevel, SceneConfig};

/// Outcome of one check.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &'static str, passed: bool, detail: String) -> Self {
        Self { name, passed, detail }
    }
}

/// Radii of random configurations solve the quartic and multiply to `V_Z²`.
pub fn check_circle_identity(seed: u64, samples: usize) -> Check {
    let mut rng = substream(seed, 1, 0);
    let mut worst_root = 0.0f64;
    let mut worst_product = 0.0f64;
    for _ in 0..samples {
        let kappa = rng.random_range(0.01..0.99);
        let vz = rng.random_range(10.0..=5000.0);
        let v = Vec3::new(0.0, 0.0, vz);
        let Ok(radii) = circle_radii(kappa, vz) else {
            return Check::new("circle identity", false, format!("no radii for kappa {kappa}"));
        };
        let tol = kappa * vz.powi(4);
        for r in [radii.r_minus(), radii.r_plus()] {
            worst_root = worst_root.max(endoscopic_isocurve_eval(&Point::new(r, 0.0), &v, kappa).abs() / tol);
        }
        worst_product = worst_product.max((radii.r_minus() * radii.r_plus() / (vz * vz) - 1.0).abs());
    }
    Check::new(
        "circle identity",
        worst_root <= 1e-9 && worst_product <= 1e-9,
        format!("max |E(r)|/(κV_Z⁴) = {worst_root:.2e}, max rel. product error = {worst_product:.2e}"),
    )
}

/// General and co-located isocurves agree when the light is at the viewpoint.
pub fn check_specialization(seed: u64, configs: usize, points: usize) -> Check {
    let mut rng = substream(seed, 2, 0);
    let mut worst = 0.0f64;
    for _ in 0..configs {
        let v = Vec3::new(rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0), rng.random_range(10.0..5000.0));
        let n = rng.random_range(1.0..200.0);
        let cfg = SceneConfig::endoscopic(v, n, 1.0).expect("valid scene");
        let level = IsoLevel::new(rng.random_range(0.01..0.99), 1.0, n).expect("valid level");
        for _ in 0..points {
            let p = Point::new(v.x + rng.random_range(-3.0..3.0) * v.z, v.y + rng.random_range(-3.0..3.0) * v.z);
            let q = general_isocurve_eval(&p, &cfg, &level);
            let e = endoscopic_isocurve_eval(&p, &v, level.kappa());
            let d2 = (p.x - v.x).powi(2) + (p.y - v.y).powi(2);
            let scale = (d2 + v.z * v.z).powi(2);
            worst = worst.max((q - e).abs() / scale);
        }
    }
    Check::new("specialization", worst <= 1e-9, format!("max relative difference = {worst:.2e}"))
}

/// Exact projected circles, viewed at most 80° off their normal,
/// backproject to their plane normal (up to orientation), and the same
/// circle scaled 10x about the camera centre (radius and distance) gives
/// the same pair.
pub fn check_backprojection(seed: u64, poses: usize) -> Check {
    let mut rng = substream(seed, 3, 0);
    let mut worst = 0.0f64;
    let mut worst_scale = 0.0f64;
    for _ in 0..poses {
        let slant = rng.random_range(0.0..80f64.to_radians());
        let azimuth = rng.random_range(0.0..std::f64::consts::TAU);
        let centre = Vec3::new(rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3), 1.0) * rng.random_range(2.0..10.0);
        let n = tilted_normal(&centre, slant, azimuth);
        let radius = rng.random_range(0.05..0.5);
        let solve = |scale: f64| {
            let (c, _) = fit_ellipse(&circle_image(&(centre * scale), &n, radius * scale, 48)).ok()?;
            backproject_circle(&c).ok()
        };
        let (Some(pair), Some(pair10)) = (solve(1.0), solve(10.0)) else {
            return Check::new("backprojection", false, "fit or backprojection failed".into());
        };
        let err = pair.iter().map(|m| angle_between(m, &n).min(angle_between(m, &-n))).fold(f64::INFINITY, f64::min);
        worst = worst.max(err);
        let drift = angle_between(&pair.n_plus, &pair10.n_plus).max(angle_between(&pair.n_minus, &pair10.n_minus));
        worst_scale = worst_scale.max(drift);
    }
    Check::new(
        "backprojection",
        worst < 1e-6 && worst_scale < 1e-9,
        format!("max error = {worst:.2e} rad, max change under 10x scaling = {worst_scale:.2e} rad"),
    )
}

/// Unit normal at angle `slant` from the line of sight through `centre`.
pub fn tilted_normal(centre: &Vec3, slant: f64, azimuth: f64) -> Vec3 {
    let axis = centre.normalize();
    let helper = if axis.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    let u = axis.cross(&helper).normalize();
    let w = axis.cross(&u);
    slant.cos() * axis + slant.sin() * (azimuth.cos() * u + azimuth.sin() * w)
}

/// Normalized image of a 3D circle, camera at the origin.
pub fn circle_image(centre: &Vec3, normal: &Vec3, radius: f64, count: usize) -> Vec<Point> {
    let n = normal.normalize();
    let helper = if n.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    let u = n.cross(&helper).normalize();
    let v = n.cross(&u);
    (0..count)
        .map(|i| {
            let s = i as f64 * std::f64::consts::TAU / count as f64;
            let x = centre + radius * (s.cos() * u + s.sin() * v);
            Point::new(x.x / x.z, x.y / x.z)
        })
        .collect()
}

/// Noiseless default acquisition reconstructs the plane within 0.1°.
pub fn check_noiseless(seed: u64) -> Check {
    let params = SimParams { noise: 0.0, ..SimParams::default() };
    let record = run_trial(&params, &mut substream(seed, 4, 0), &PipelineOptions::default());
    match record.error_deg {
        Some(e) => Check::new("noiseless trial", e < 0.1, format!("error = {e:.4}°")),
        None => Check::new("noiseless trial", false, format!("failed: {}", record.reason.unwrap_or_default())),
    }
}

/// Two identical small sweeps give byte-identical CSV.
pub fn check_determinism(seed: u64) -> Check {
    let mut spec = SweepSpec::new(SweepParam::Sigma, 2, seed);
    spec.values = vec![0.05, 0.1];
    spec.base.size = 128;
    let csv = || -> Option<Vec<u8>> {
        let mut buf = Vec::new();
        write_records_csv(&run_sweep(&spec).ok()?, &mut buf).ok()?;
        Some(buf)
    };
    match (csv(), csv()) {
        (Some(a), Some(b)) => Check::new("determinism", a == b, format!("{} bytes", a.len())),
        _ => Check::new("determinism", false, "sweep failed".into()),
    }
}

/// Runs every check.
pub fn run_all(seed: u64) -> Vec<Check> {
    vec![
        check_circle_identity(seed, 10_000),
        check_specialization(seed, 20, 1000),
        check_backprojection(seed, 1000),
        check_noiseless(seed),
        check_determinism(seed),
    ]
}
