//! Annotated RGB rendering of reconstruction results.

use image::{Rgb, RgbImage};

use crate::extraction::RegionOfInterest;
use crate::geometry::{Conic, UnitVec3};
use crate::harness::Reconstruction;
use crate::image::ScalarImage;

const ROI_COLOUR: Rgb<u8> = Rgb([255, 200, 0]);
const ELLIPSE_COLOUR: Rgb<u8> = Rgb([255, 40, 40]);
const PLUS_COLOUR: Rgb<u8> = Rgb([40, 230, 40]);
const MINUS_COLOUR: Rgb<u8> = Rgb([60, 160, 255]);

fn put(img: &mut RgbImage, x: i64, y: i64, c: Rgb<u8>) {
    if x >= 0 && y >= 0 && (x as u32) < img.width() && (y as u32) < img.height() {
        img.put_pixel(x as u32, y as u32, c);
    }
}

/// Straight segment, one sample per pixel step.
pub fn draw_line(img: &mut RgbImage, from: (f64, f64), to: (f64, f64), c: Rgb<u8>) {
    let (dx, dy) = (to.0 - from.0, to.1 - from.1);
    let steps = dx.abs().max(dy.abs()).ceil().max(1.0) as usize;
    for i in 0..=steps {
        let s = i as f64 / steps as f64;
        put(img, (from.0 + s * dx).round() as i64, (from.1 + s * dy).round() as i64, c);
    }
}

fn draw_arrow(img: &mut RgbImage, from: (f64, f64), to: (f64, f64), c: Rgb<u8>) {
    draw_line(img, from, to, c);
    let (dx, dy) = (to.0 - from.0, to.1 - from.1);
    let len = dx.hypot(dy);
    if len < 1.0 {
        return;
    }
    let head = (len * 0.25).min(8.0);
    let (ux, uy) = (dx / len, dy / len);
    for side in [-1.0, 1.0] {
        let (bx, by) = (-ux * 0.8 - side * uy * 0.5, -uy * 0.8 + side * ux * 0.5);
        draw_line(img, to, (to.0 + head * bx, to.1 + head * by), c);
    }
}

fn draw_conic(img: &mut RgbImage, conic: &Conic, c: Rgb<u8>) {
    let Some(g) = conic.ellipse_geometry() else { return };
    let n = ((g.semi_major * std::f64::consts::TAU).ceil() as usize).clamp(32, 20_000);
    let pts: Vec<_> = (0..=n).map(|i| g.point_at(i as f64 / n as f64 * std::f64::consts::TAU)).collect();
    for w in pts.windows(2) {
        draw_line(img, (w[0].x, w[0].y), (w[1].x, w[1].y), c);
    }
}

fn draw_rect(img: &mut RgbImage, roi: &RegionOfInterest, c: Rgb<u8>) {
    let (x0, y0) = (roi.x0 as f64, roi.y0 as f64);
    let (x1, y1) = (x0 + roi.width as f64 - 1.0, y0 + roi.height as f64 - 1.0);
    draw_line(img, (x0, y0), (x1, y0), c);
    draw_line(img, (x1, y0), (x1, y1), c);
    draw_line(img, (x1, y1), (x0, y1), c);
    draw_line(img, (x0, y1), (x0, y0), c);
}

/// Image-plane arrow for a normal: its x/y part scaled to `length` pixels
/// at full tilt.
fn normal_tip(centre: (f64, f64), n: &UnitVec3, length: f64) -> (f64, f64) {
    (centre.0 + length * n.x, centre.1 + length * n.y)
}

/// Grayscale image with each region outlined, its fitted ellipse and both
/// candidate normals drawn from the ellipse centre.
pub fn render_overlay<'a, I>(img: &ScalarImage, regions: I) -> RgbImage
where
    I: IntoIterator<Item = (&'a RegionOfInterest, Option<&'a Reconstruction>)>,
{
    let mut out = img.to_rgb8();
    for (roi, rec) in regions {
        draw_rect(&mut out, roi, ROI_COLOUR);
        let Some(rec) = rec else { continue };
        draw_conic(&mut out, &rec.conic, ELLIPSE_COLOUR);
        if let Some(g) = rec.conic.ellipse_geometry() {
            let centre = (g.center[0], g.center[1]);
            let length = 1.5 * g.semi_major;
            draw_arrow(&mut out, centre, normal_tip(centre, &rec.normals.n_plus, length), PLUS_COLOUR);
            draw_arrow(&mut out, centre, normal_tip(centre, &rec.normals.n_minus, length), MINUS_COLOUR);
        }
    }
    out
}
