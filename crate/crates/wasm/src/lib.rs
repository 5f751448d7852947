//! Browser bindings: render a synthetic specularity, reconstruct the plane
//! normal from 8-bit pixels, and tabulate the isophote radii against κ.
//!
//! Results cross the boundary as JSON strings so the page needs no glue
//! beyond `JSON.parse`.

use serde::Serialize;
use serde_json::json;
use specnorm::extraction::RegionOfInterest;
use specnorm::geometry::{angle_between, Intrinsics, Vec3};
use specnorm::harness::reconstruct_image;
use specnorm::image::{BitDepth, ScalarImage};
use specnorm::simulator::{simulate, substream, SimParams};
use specnorm::specular::circle_radii;
use wasm_bindgen::prelude::*;

/// A rendered acquisition: 8-bit pixels plus what the page needs to score it.
#[wasm_bindgen]
pub struct Rendered {
    size: usize,
    pixels: Vec<u8>,
    meta: String,
}

#[wasm_bindgen]
impl Rendered {
    #[wasm_bindgen(getter)]
    pub fn size(&self) -> usize {
        self.size
    }

    /// Row-major grayscale.
    #[wasm_bindgen(getter)]
    pub fn pixels(&self) -> Vec<u8> {
        self.pixels.clone()
    }

    /// `{params, truth, light}`.
    #[wasm_bindgen(getter)]
    pub fn meta(&self) -> String {
        self.meta.clone()
    }
}

fn fail(e: impl std::fmt::Display) -> String {
    e.to_string()
}

/// Renders with defaults except for the given parameters. Slant in degrees.
#[wasm_bindgen]
pub fn render(size: usize, slant_deg: f64, roughness: f64, noise: f64, light_offset: f64, seed: u32) -> Result<Rendered, String> {
    let params = SimParams {
        size,
        slant: slant_deg.to_radians(),
        roughness,
        noise,
        light_offset,
        seed: seed.into(),
        ..SimParams::default()
    };
    let sim = simulate(&params, &mut substream(params.seed, 0, 0)).map_err(fail)?;
    let pixels = sim.image.quantized(BitDepth::Eight).data().iter().map(|&v| v as u8).collect();
    let meta = json!({ "params": params, "truth": sim.truth, "light": sim.light.as_slice() }).to_string();
    Ok(Rendered { size, pixels, meta })
}

#[derive(Serialize)]
struct Outcome {
    n_plus: [f64; 3],
    n_minus: [f64; 3],
    bp: [f64; 2],
    /// Closed outline of the fitted ellipse, pixels.
    ellipse: Vec<[f64; 2]>,
    isophote: Vec<[f64; 2]>,
    warnings: Vec<String>,
    /// Angle to `truth` of the closer candidate, degrees, when a truth is given.
    error_deg: Option<f64>,
}

/// Reconstructs the whole 8-bit image. `intrinsics` is `[fx, fy, cx, cy]`,
/// `truth` an optional plane normal to score against, `blur` ≤ 0 picks the
/// smoothing from the image noise.
#[wasm_bindgen]
pub fn reconstruct(
    pixels: &[u8],
    width: usize,
    height: usize,
    intrinsics: &[f64],
    isovalue: f64,
    blur: f64,
    truth: Option<Vec<f64>>,
) -> Result<String, String> {
    let [fx, fy, cx, cy] = intrinsics[..] else { return Err("intrinsics must be [fx, fy, cx, cy]".into()) };
    let k = Intrinsics::new(fx, fy, cx, cy).map_err(fail)?;
    let img = ScalarImage::from_vec(width, height, pixels.iter().map(|&p| f64::from(p)).collect(), 255.0).map_err(fail)?;
    let blur = (blur > 0.0).then_some(blur);
    let (_, result) = reconstruct_image(&img, &k, &[RegionOfInterest::full(&img)], isovalue, blur).map_err(fail)?.remove(0);
    let rec = result.map_err(fail)?;
    let ellipse = rec
        .conic
        .ellipse_geometry()
        .map(|g| (0..=128).map(|i| g.point_at(i as f64 / 128.0 * std::f64::consts::TAU)).map(|p| [p.x, p.y]).collect())
        .unwrap_or_default();
    let error_deg = match truth.as_deref() {
        Some(&[x, y, z]) => {
            let t = Vec3::new(x, y, z);
            Some(rec.normals.iter().map(|n| angle_between(n, &t)).fold(f64::INFINITY, f64::min).to_degrees())
        }
        _ => None,
    };
    let outcome = Outcome {
        n_plus: rec.normals.n_plus.into_inner().into(),
        n_minus: rec.normals.n_minus.into_inner().into(),
        bp: [rec.bp.x, rec.bp.y],
        ellipse,
        isophote: rec.polyline.points.iter().map(|p| [p.x, p.y]).collect(),
        warnings: rec.warnings,
        error_deg,
    };
    serde_json::to_string(&outcome).map_err(fail)
}

/// `{kappa, r_minus, r_plus}` arrays over `samples` values of κ in (0, 1),
/// camera at height `v_z`.
#[wasm_bindgen]
pub fn radii_curve(v_z: f64, samples: usize) -> Result<String, String> {
    if samples < 2 {
        return Err("need at least two samples".into());
    }
    let mut kappa = Vec::with_capacity(samples);
    let (mut r_minus, mut r_plus) = (Vec::with_capacity(samples), Vec::with_capacity(samples));
    for i in 0..samples {
        let k = (i as f64 + 0.5) / samples as f64;
        let r = circle_radii(k, v_z).map_err(fail)?;
        kappa.push(k);
        r_minus.push(r.r_minus());
        r_plus.push(r.r_plus());
    }
    Ok(json!({ "kappa": kappa, "r_minus": r_minus, "r_plus": r_plus }).to_string())
}
