//! Smoothing, brightest-point normalization and marching-squares isophote
//! tracing inside a region of interest.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::image::ScalarImage;

/// Default Gaussian smoothing width, pixels.
pub const DEFAULT_BLUR: f64 = 2.0;
/// Relative noise level under which [`auto_blur`] skips smoothing.
pub const NOISE_FLOOR: f64 = 0.002;
/// Polylines with fewer points are dropped before fitting.
pub const MIN_POLYLINE_POINTS: usize = 12;
/// Minimum side of a region of interest.
pub const MIN_ROI_SIDE: usize = 16;
/// Fraction of saturated pixels in the region that flags a clipped specularity.
pub const SATURATION_FRACTION: f64 = 0.005;

/// Axis-aligned pixel rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionOfInterest {
    pub x0: usize,
    pub y0: usize,
    pub width: usize,
    pub height: usize,
}

impl RegionOfInterest {
    pub fn new(x0: usize, y0: usize, width: usize, height: usize) -> Self {
        Self { x0, y0, width, height }
    }

    pub fn full(img: &ScalarImage) -> Self {
        Self::new(0, 0, img.width(), img.height())
    }

    pub fn validate(&self, img: &ScalarImage) -> Result<()> {
        if self.width < MIN_ROI_SIDE || self.height < MIN_ROI_SIDE {
            return Err(Error::InvalidRoi(format!(
                "{}x{} is smaller than {MIN_ROI_SIDE}x{MIN_ROI_SIDE}",
                self.width, self.height
            )));
        }
        if self.x0 + self.width > img.width() || self.y0 + self.height > img.height() {
            return Err(Error::InvalidRoi(format!(
                "({}, {}, {}, {}) exceeds the {}x{} image",
                self.x0,
                self.y0,
                self.width,
                self.height,
                img.width(),
                img.height()
            )));
        }
        Ok(())
    }

    fn on_border(&self, x: usize, y: usize) -> bool {
        x == self.x0 || y == self.y0 || x + 1 == self.x0 + self.width || y + 1 == self.y0 + self.height
    }
}

/// Ordered sub-pixel level-set points.
#[derive(Debug, Clone, PartialEq)]
pub struct IsophotePolyline {
    pub points: Vec<Point>,
    /// Closed loops do not repeat their first point at the end.
    pub closed: bool,
    pub level: f64,
}

#[derive(Serialize, Deserialize)]
struct PolylineRecord {
    points: Vec<[f64; 2]>,
    closed: bool,
    level: f64,
}

impl Serialize for IsophotePolyline {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        PolylineRecord {
            points: self.points.iter().map(|p| [p.x, p.y]).collect(),
            closed: self.closed,
            level: self.level,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for IsophotePolyline {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = PolylineRecord::deserialize(d)?;
        Ok(Self {
            points: r.points.into_iter().map(|[x, y]| Point::new(x, y)).collect(),
            closed: r.closed,
            level: r.level,
        })
    }
}

impl IsophotePolyline {
    /// Shoelace area; open polylines are closed by their chord.
    pub fn area(&self) -> f64 {
        let n = self.points.len();
        if n < 3 {
            return 0.0;
        }
        let twice: f64 = (0..n)
            .map(|i| {
                let (a, b) = (self.points[i], self.points[(i + 1) % n]);
                a.x * b.y - b.x * a.y
            })
            .sum();
        0.5 * twice.abs()
    }

    /// Even-odd point-in-polygon test.
    pub fn contains(&self, p: &Point) -> bool {
        let n = self.points.len();
        let mut inside = false;
        let mut j = n.wrapping_sub(1);
        for i in 0..n {
            let (a, b) = (self.points[i], self.points[j]);
            if (a.y > p.y) != (b.y > p.y) && p.x < (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x {
                inside = !inside;
            }
            j = i;
        }
        inside
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

/// Separable Gaussian blur truncated at `3σ`, mirrored at the borders.
pub fn gaussian_smooth(img: &ScalarImage, sigma: f64) -> Result<ScalarImage> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidParameter("blur width must be non-negative".into()));
    }
    if sigma == 0.0 {
        return Ok(img.clone());
    }
    let kernel = gaussian_kernel(sigma);
    let radius = (kernel.len() / 2) as isize;
    let (w, h) = (img.width(), img.height());
    let mut tmp = ScalarImage::new(w, h, img.max_value());
    for y in 0..h {
        for x in 0..w {
            let acc: f64 = kernel
                .iter()
                .enumerate()
                .map(|(k, wt)| wt * img.get(reflect(x as isize + k as isize - radius, w), y))
                .sum();
            tmp.set(x, y, acc);
        }
    }
    let mut out = ScalarImage::new(w, h, img.max_value());
    for y in 0..h {
        for x in 0..w {
            let acc: f64 = kernel
                .iter()
                .enumerate()
                .map(|(k, wt)| wt * tmp.get(x, reflect(y as isize + k as isize - radius, h)))
                .sum();
            out.set(x, y, acc);
        }
    }
    Ok(out)
}

/// Normalized sampled Gaussian with `⌈3σ⌉` taps on each side.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as isize;
    let raw: Vec<f64> = (-radius..=radius)
        .map(|k| (-(k * k) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / total).collect()
}

/// Noise standard deviation from the mean absolute response to the
/// difference-of-Laplacians mask `[1 −2 1; −2 4 −2; 1 −2 1]` (Immerkær).
/// Smooth intensity profiles barely excite the mask.
pub fn estimate_noise(img: &ScalarImage) -> f64 {
    let (w, h) = (img.width(), img.height());
    if w < 3 || h < 3 {
        return 0.0;
    }
    let mut sum = 0.0;
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let v = |dx: usize, dy: usize| img.get(x + dx - 1, y + dy - 1);
            let r = v(0, 0) + v(2, 0) + v(0, 2) + v(2, 2) - 2.0 * (v(1, 0) + v(0, 1) + v(2, 1) + v(1, 2))
                + 4.0 * v(1, 1);
            sum += r.abs();
        }
    }
    (std::f64::consts::FRAC_PI_2).sqrt() * sum / (6.0 * ((w - 2) * (h - 2)) as f64)
}

/// Smoothing width for an image: [`DEFAULT_BLUR`] unless the estimated
/// noise is below `NOISE_FLOOR · m`, in which case none.
pub fn auto_blur(img: &ScalarImage) -> f64 {
    if estimate_noise(img) < NOISE_FLOOR * img.max_value() {
        0.0
    } else {
        DEFAULT_BLUR
    }
}

/// Half-sample symmetric reflection (`−1 → 0`, `n → n−1`).
fn reflect(mut i: isize, n: usize) -> usize {
    let n = n as isize;
    loop {
        if i < 0 {
            i = -i - 1;
        } else if i >= n {
            i = 2 * n - i - 1;
        } else {
            return i as usize;
        }
    }
}

/// Normalized image and brightest-point estimate.
#[derive(Debug, Clone)]
pub struct BpNormalization {
    pub image: ScalarImage,
    /// Maximizing pixel inside the region.
    pub bp: Point,
    /// Maximum lies on the region border; the specularity is likely clipped.
    pub bp_on_boundary: bool,
    /// At least 0.5% of the region is at the maximum intensity.
    pub saturated: bool,
}

/// Divides the image by its maximum inside `roi` and returns that pixel.
pub fn normalize_bp(img: &ScalarImage, roi: &RegionOfInterest) -> Result<BpNormalization> {
    roi.validate(img)?;
    let mut best = (f64::NEG_INFINITY, 0usize, 0usize);
    let mut min = f64::INFINITY;
    let mut saturated = 0usize;
    for y in roi.y0..roi.y0 + roi.height {
        for x in roi.x0..roi.x0 + roi.width {
            let v = img.get(x, y);
            if v > best.0 {
                best = (v, x, y);
            }
            min = min.min(v);
            if v >= img.max_value() {
                saturated += 1;
            }
        }
    }
    let (max, bx, by) = best;
    if !(max > min) || max <= 0.0 {
        return Err(Error::NoSpecularity);
    }
    let area = (roi.width * roi.height) as f64;
    Ok(BpNormalization {
        image: img.map(|v| v / max).with_max_value(1.0),
        bp: Point::new(bx as f64, by as f64),
        bp_on_boundary: roi.on_border(bx, by),
        saturated: saturated as f64 >= SATURATION_FRACTION * area,
    })
}

/// Level-set polylines plus the count of fragments dropped as too short.
#[derive(Debug, Clone, Default)]
pub struct Extraction {
    pub polylines: Vec<IsophotePolyline>,
    pub discarded_short: usize,
}

/// Marching squares at level `t` over the pixel-centre lattice of `roi`.
///
/// A vertex is inside when its value is `≥ t`. Crossings are linearly
/// interpolated along cell edges. Saddle cells connect the inside corners
/// when the mean of the four corners is `≥ t`. Polylines come back sorted
/// by decreasing enclosed area.
pub fn extract_isophote(img: &ScalarImage, roi: &RegionOfInterest, t: f64) -> Result<Extraction> {
    roi.validate(img)?;
    if !t.is_finite() {
        return Err(Error::InvalidParameter("isovalue must be finite".into()));
    }
    let (w, h) = (roi.width, roi.height);
    let edge_id = |x: usize, y: usize, vertical: bool| ((y * w + x) << 1) | vertical as usize;
    let value = |x: usize, y: usize| img.get(roi.x0 + x, roi.y0 + y);
    let mut links: Vec<[usize; 2]> = vec![[usize::MAX; 2]; w * h * 2];
    let mut points: Vec<Option<Point>> = vec![None; w * h * 2];

    let mut crossing = |id: usize, (xa, ya): (usize, usize), (xb, yb): (usize, usize)| {
        if points[id].is_none() {
            let (va, vb) = (value(xa, ya), value(xb, yb));
            let f = if va == vb { 0.5 } else { ((t - va) / (vb - va)).clamp(0.0, 1.0) };
            points[id] = Some(Point::new(
                (roi.x0 + xa) as f64 + f * (xb as f64 - xa as f64),
                (roi.y0 + ya) as f64 + f * (yb as f64 - ya as f64),
            ));
        }
        id
    };
    let mut segments: Vec<(usize, usize)> = Vec::new();
    for y in 0..h.saturating_sub(1) {
        for x in 0..w.saturating_sub(1) {
            let (tl, tr, br, bl) = (value(x, y), value(x + 1, y), value(x + 1, y + 1), value(x, y + 1));
            let case = (tl >= t) as u8 * 8 + (tr >= t) as u8 * 4 + (br >= t) as u8 * 2 + (bl >= t) as u8;
            if case == 0 || case == 15 {
                continue;
            }
            let top = crossing(edge_id(x, y, false), (x, y), (x + 1, y));
            let right = crossing(edge_id(x + 1, y, true), (x + 1, y), (x + 1, y + 1));
            let bottom = crossing(edge_id(x, y + 1, false), (x, y + 1), (x + 1, y + 1));
            let left = crossing(edge_id(x, y, true), (x, y), (x, y + 1));
            let center_inside = 0.25 * (tl + tr + br + bl) >= t;
            let pairs: &[(usize, usize)] = match case {
                1 | 14 => &[(left, bottom)],
                2 | 13 => &[(bottom, right)],
                3 | 12 => &[(left, right)],
                4 | 11 => &[(top, right)],
                6 | 9 => &[(top, bottom)],
                7 | 8 => &[(left, top)],
                5 if center_inside => &[(left, top), (bottom, right)],
                5 => &[(top, right), (left, bottom)],
                10 if center_inside => &[(top, right), (left, bottom)],
                10 => &[(left, top), (bottom, right)],
                _ => unreachable!(),
            };
            segments.extend_from_slice(pairs);
        }
    }
    // only edges that were actually crossed carry a point
    for &(a, b) in &segments {
        for (from, to) in [(a, b), (b, a)] {
            let slot = &mut links[from];
            if slot[0] == usize::MAX {
                slot[0] = to;
            } else {
                slot[1] = to;
            }
        }
    }
    let degree = |id: usize, links: &[[usize; 2]]| links[id].iter().filter(|&&v| v != usize::MAX).count();
    let mut visited = vec![false; links.len()];
    let mut chains: Vec<(Vec<usize>, bool)> = Vec::new();
    let walk = |start: usize, visited: &mut Vec<bool>| -> Vec<usize> {
        let mut chain = vec![start];
        visited[start] = true;
        let mut prev = usize::MAX;
        let mut cur = start;
        loop {
            let next = links[cur]
                .iter()
                .copied()
                .find(|&n| n != usize::MAX && n != prev && !visited[n]);
            match next {
                Some(n) => {
                    visited[n] = true;
                    chain.push(n);
                    prev = cur;
                    cur = n;
                }
                None => break,
            }
        }
        chain
    };
    let touched: Vec<usize> = (0..links.len()).filter(|&i| points[i].is_some() && degree(i, &links) > 0).collect();
    for &id in &touched {
        if !visited[id] && degree(id, &links) == 1 {
            chains.push((walk(id, &mut visited), false));
        }
    }
    for &id in &touched {
        if !visited[id] {
            chains.push((walk(id, &mut visited), true));
        }
    }

    let mut out = Extraction::default();
    for (chain, closed) in chains {
        if chain.len() < MIN_POLYLINE_POINTS {
            log::debug!("dropping {}-point isophote fragment at level {t}", chain.len());
            out.discarded_short += 1;
            continue;
        }
        out.polylines.push(IsophotePolyline {
            points: chain.into_iter().map(|id| points[id].expect("linked edges carry points")).collect(),
            closed,
            level: t,
        });
    }
    out.polylines
        .sort_by(|a, b| b.area().partial_cmp(&a.area()).unwrap_or(std::cmp::Ordering::Equal));
    Ok(out)
}

/// Chosen polyline and whether it was clipped by the region.
#[derive(Debug, Clone)]
pub struct Selection {
    pub polyline: IsophotePolyline,
    pub clipped: bool,
}

/// Picks the isophote of the specularity.
///
/// With a brightest-point estimate: the largest closed loop enclosing it,
/// else the largest open (region-clipped) polyline, else failure. Without
/// an estimate: the largest closed loop.
pub fn select_primary_isophote(polylines: &[IsophotePolyline], bp: Option<&Point>) -> Result<Selection> {
    let largest = |pred: &dyn Fn(&IsophotePolyline) -> bool| {
        polylines
            .iter()
            .filter(|p| pred(p))
            .max_by(|a, b| a.area().partial_cmp(&b.area()).unwrap_or(std::cmp::Ordering::Equal))
            .cloned()
    };
    let picked = match bp {
        Some(bp) => largest(&|p| p.closed && p.contains(bp))
            .map(|polyline| Selection { polyline, clipped: false })
            .or_else(|| {
                polylines
                    .iter()
                    .filter(|p| !p.closed)
                    .max_by_key(|p| p.points.len())
                    .cloned()
                    .map(|polyline| Selection { polyline, clipped: true })
            }),
        None => largest(&|p| p.closed).map(|polyline| Selection { polyline, clipped: false }),
    };
    picked.ok_or(Error::SelectionFailed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;

    fn blob(w: usize, h: usize, cx: f64, cy: f64, s: f64) -> ScalarImage {
        ScalarImage::from_fn(w, h, 1.0, |x, y| {
            let d2 = (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2);
            (-d2 / (2.0 * s * s)).exp()
        })
    }

    #[test]
    fn noise_estimate() {
        let clean = blob(200, 200, 99.5, 99.5, 30.0).map(|v| v * 255.0).with_max_value(255.0);
        assert!(estimate_noise(&clean) < 0.01);
        assert_eq!(auto_blur(&clean), 0.0);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let normal = rand_distr::Normal::new(0.0, 12.75).unwrap();
        let mut noisy = clean.clone();
        for v in noisy.data_mut() {
            *v += rand_distr::Distribution::sample(&normal, &mut rng);
        }
        let est = estimate_noise(&noisy);
        assert!((est - 12.75).abs() < 0.05 * 12.75, "{est}");
        assert_eq!(auto_blur(&noisy), DEFAULT_BLUR);
    }

    #[test]
    fn zero_blur_is_identity() {
        let img = blob(20, 20, 9.0, 9.0, 3.0);
        assert_eq!(gaussian_smooth(&img, 0.0).unwrap(), img);
    }

    #[test]
    fn blur_preserves_constants() {
        let img = ScalarImage::from_fn(17, 11, 255.0, |_, _| 42.0);
        let out = gaussian_smooth(&img, 2.0).unwrap();
        assert!(out.data().iter().all(|v| (v - 42.0).abs() < 1e-12));
        assert!((gaussian_kernel(2.0).iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn impulse_response_is_kernel_product() {
        let mut img = ScalarImage::new(31, 31, 1.0);
        img.set(15, 15, 1.0);
        let sigma = 1.5;
        let out = gaussian_smooth(&img, sigma).unwrap();
        // closed form: exp(−k²/2σ²) normalized over k ∈ [−5, 5]
        let z: f64 = (-5..=5).map(|k: i32| (-(k * k) as f64 / (2.0 * sigma * sigma)).exp()).sum();
        for dy in -6i32..=6 {
            for dx in -6i32..=6 {
                let g = |k: i32| {
                    if k.abs() > 5 {
                        0.0
                    } else {
                        (-(k * k) as f64 / (2.0 * sigma * sigma)).exp() / z
                    }
                };
                let v = out.get((15 + dx) as usize, (15 + dy) as usize);
                assert!((v - g(dx) * g(dy)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn reflection_indices() {
        assert_eq!(reflect(-1, 5), 0);
        assert_eq!(reflect(-3, 5), 2);
        assert_eq!(reflect(5, 5), 4);
        assert_eq!(reflect(7, 5), 2);
        assert_eq!(reflect(-4, 1), 0);
    }

    #[test]
    fn bp_normalization() {
        let img = blob(40, 40, 20.0, 18.0, 5.0).map(|v| v * 200.0);
        let roi = RegionOfInterest::full(&img);
        let n = normalize_bp(&img, &roi).unwrap();
        assert_eq!(n.bp, Point::new(20.0, 18.0));
        assert!(!n.bp_on_boundary);
        assert_eq!(n.image.get(20, 18), 1.0);
        let scaled = normalize_bp(&img.map(|v| v * 3.7), &roi).unwrap();
        for (a, b) in scaled.image.data().iter().zip(n.image.data()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn flat_roi_has_no_specularity() {
        let img = ScalarImage::from_fn(20, 20, 255.0, |_, _| 9.0);
        let roi = RegionOfInterest::full(&img);
        assert!(matches!(normalize_bp(&img, &roi), Err(Error::NoSpecularity)));
    }

    #[test]
    fn roi_validation() {
        let img = ScalarImage::new(20, 20, 1.0);
        assert!(RegionOfInterest::new(0, 0, 15, 20).validate(&img).is_err());
        assert!(RegionOfInterest::new(5, 0, 16, 20).validate(&img).is_err());
        assert!(RegionOfInterest::new(4, 4, 16, 16).validate(&img).is_ok());
    }

    #[test]
    fn clipped_peak_flagged() {
        let img = blob(40, 40, 2.0, 20.0, 6.0);
        let n = normalize_bp(&img, &RegionOfInterest::new(2, 0, 38, 40)).unwrap();
        assert!(n.bp_on_boundary);
    }

    #[test]
    fn single_loop_points_on_level() {
        let img = blob(60, 60, 29.3, 30.6, 7.0);
        let roi = RegionOfInterest::full(&img);
        let ex = extract_isophote(&img, &roi, 0.3).unwrap();
        assert_eq!(ex.polylines.len(), 1);
        let pl = &ex.polylines[0];
        assert!(pl.closed);
        assert_ne!(pl.points.first(), pl.points.last());
        for p in &pl.points {
            assert!((img.bilinear(p).unwrap() - 0.3).abs() < 1e-6);
        }
        for pair in pl.points.windows(2) {
            assert!((pair[1] - pair[0]).norm() <= 2.0);
        }
        // radius of a Gaussian level set, up to discretization of the lattice
        let r = 7.0 * (2.0 * (1.0f64 / 0.3).ln()).sqrt();
        for p in &pl.points {
            let d = ((p.x - 29.3).powi(2) + (p.y - 30.6).powi(2)).sqrt();
            assert!((d - r).abs() < 0.2, "{d} vs {r}");
        }
    }

    #[test]
    fn level_above_max_is_empty() {
        let img = blob(30, 30, 15.0, 15.0, 4.0);
        let ex = extract_isophote(&img, &RegionOfInterest::full(&img), 1.0 + 1e-9).unwrap();
        assert!(ex.polylines.is_empty());
    }

    #[test]
    fn saddle_rule() {
        // tl and br of the corner cell are high: a checkerboard saddle
        let mut img = ScalarImage::new(16, 16, 1.0);
        img.set(0, 0, 1.0);
        img.set(1, 1, 1.0);
        let roi = RegionOfInterest::full(&img);
        // mean 0.5 ≥ 0.4: the high corners join into one contour
        let joined = extract_isophote(&img, &roi, 0.4).unwrap();
        // mean 0.5 < 0.6: each high corner gets its own contour
        let split = extract_isophote(&img, &roi, 0.6).unwrap();
        assert!(joined.polylines.is_empty() && split.polylines.is_empty());
        assert_eq!(joined.discarded_short, 1);
        assert_eq!(split.discarded_short, 2);
    }

    #[test]
    fn selection_prefers_loop_around_bp() {
        let img = ScalarImage::from_fn(80, 40, 1.0, |x, y| {
            let a = (-((x as f64 - 20.0).powi(2) + (y as f64 - 20.0).powi(2)) / 50.0).exp();
            let b = (-((x as f64 - 60.0).powi(2) + (y as f64 - 20.0).powi(2)) / 80.0).exp();
            a.max(b)
        });
        let ex = extract_isophote(&img, &RegionOfInterest::full(&img), 0.5).unwrap();
        assert_eq!(ex.polylines.len(), 2);
        let bp = Point::new(20.0, 20.0);
        let sel = select_primary_isophote(&ex.polylines, Some(&bp)).unwrap();
        assert!(sel.polyline.contains(&bp) && !sel.clipped);
        assert!(sel.polyline.area() < ex.polylines[0].area());
        let any = select_primary_isophote(&ex.polylines, None).unwrap();
        assert_eq!(any.polyline, ex.polylines[0]);
    }

    #[test]
    fn nested_loops_pick_outermost() {
        // ring-shaped ridge produces two loops around the centre at level 0.5
        let img = ScalarImage::from_fn(60, 60, 1.0, |x, y| {
            let d = ((x as f64 - 30.0).powi(2) + (y as f64 - 30.0).powi(2)).sqrt();
            (-(d - 12.0).powi(2) / 18.0).exp().max(0.9 * (-d * d / 4.0).exp())
        });
        let ex = extract_isophote(&img, &RegionOfInterest::full(&img), 0.5).unwrap();
        let bp = Point::new(30.0, 30.0);
        let around: Vec<_> = ex.polylines.iter().filter(|p| p.contains(&bp)).collect();
        assert!(around.len() >= 2);
        let sel = select_primary_isophote(&ex.polylines, Some(&bp)).unwrap();
        assert!(around.iter().all(|p| p.area() <= sel.polyline.area()));
    }

    #[test]
    fn clipped_isophote_is_open() {
        let img = blob(60, 60, 5.0, 30.0, 8.0);
        let ex = extract_isophote(&img, &RegionOfInterest::full(&img), 0.3).unwrap();
        assert_eq!(ex.polylines.len(), 1);
        assert!(!ex.polylines[0].closed);
        let sel = select_primary_isophote(&ex.polylines, Some(&Point::new(5.0, 30.0))).unwrap();
        assert!(sel.clipped);
        assert!(matches!(select_primary_isophote(&ex.polylines, None), Err(Error::SelectionFailed)));
    }

    #[test]
    fn polyline_json() {
        let pl = IsophotePolyline { points: vec![Point::new(1.5, 2.0)], closed: true, level: 0.1 };
        let s = pl.to_json().unwrap();
        assert_eq!(s, r#"{"points":[[1.5,2.0]],"closed":true,"level":0.1}"#);
        let back: IsophotePolyline = serde_json::from_str(&s).unwrap();
        assert_eq!(back, pl);
    }

    #[test]
    fn isophotes_nest_with_level() {
        let img = blob(64, 64, 31.4, 32.2, 9.0);
        let roi = RegionOfInterest::full(&img);
        let outer = &extract_isophote(&img, &roi, 0.2).unwrap().polylines[0];
        let inner = &extract_isophote(&img, &roi, 0.6).unwrap().polylines[0];
        assert!(inner.points.iter().all(|p| outer.contains(p)));
    }

    #[test]
    fn smoothing_keeps_single_loop() {
        let img = blob(64, 64, 31.0, 33.0, 6.0);
        let smooth = gaussian_smooth(&img, 2.0).unwrap();
        let n = normalize_bp(&smooth, &RegionOfInterest::full(&smooth)).unwrap();
        let ex = extract_isophote(&n.image, &RegionOfInterest::full(&smooth), 0.1).unwrap();
        assert_eq!(ex.polylines.len(), 1);
    }

    proptest! {
        #[test]
        fn translation_equivariance(dx in 0usize..8, dy in 0usize..8, t in 0.15..0.85f64) {
            let base = blob(48, 48, 20.3, 21.7, 5.5);
            let shifted = ScalarImage::from_fn(56, 56, 1.0, |x, y| {
                if x >= dx && y >= dy && x - dx < 48 && y - dy < 48 { base.get(x - dx, y - dy) } else { 0.0 }
            });
            let a = extract_isophote(&base, &RegionOfInterest::new(0, 0, 48, 48), t).unwrap();
            let b = extract_isophote(&shifted, &RegionOfInterest::new(dx, dy, 48, 48), t).unwrap();
            prop_assert_eq!(a.polylines.len(), b.polylines.len());
            for (pa, pb) in a.polylines.iter().zip(&b.polylines) {
                prop_assert_eq!(pa.points.len(), pb.points.len());
                for (p, q) in pa.points.iter().zip(&pb.points) {
                    prop_assert!((q.x - p.x - dx as f64).abs() < 1e-12);
                    prop_assert!((q.y - p.y - dy as f64).abs() < 1e-12);
                }
            }
        }
    }
}
