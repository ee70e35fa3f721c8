// SPDX-License-Identifier: MIT OR Apache-2.0

//! Flat-shaded scene images with a label legend on the right.

use std::io::Cursor;
use std::path::Path;

use image::{ImageFormat, Rgb, RgbImage};
use spatialcf_core::bench::{TaskInstance, Target};
use spatialcf_core::scene::{project, Mask};
use spatialcf_core::Scene;

use crate::error::{Error, Result};
use crate::fsio;

pub const LEGEND_WIDTH: u32 = 240;

const SKY: Rgb<u8> = Rgb([232, 236, 240]);
const FLOOR: Rgb<u8> = Rgb([196, 190, 180]);
const SURFACE: Rgb<u8> = Rgb([120, 140, 160]);
const PANEL: Rgb<u8> = Rgb([255, 255, 255]);
const INK: Rgb<u8> = Rgb([20, 20, 20]);

/// Distinct color for object `id`: hues stepped by the golden angle.
pub fn object_color(id: usize) -> Rgb<u8> {
    let hue = (id as f64 * 137.507_764) % 360.0;
    let sat = if id % 2 == 0 { 0.75 } else { 0.55 };
    let val = if id % 3 == 2 { 0.65 } else { 0.85 };
    hsv(hue, sat, val)
}

/// Tint of object `id`'s reflection on the surface.
pub fn reflection_color(id: usize) -> Rgb<u8> {
    blend(object_color(id), SURFACE, 0.35)
}

fn hsv(h: f64, s: f64, v: f64) -> Rgb<u8> {
    let c = v * s;
    let x = c * (1.0 - ((h / 60.0) % 2.0 - 1.0).abs());
    let (r, g, b) = match (h / 60.0) as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    let q = |t: f64| ((t + m) * 255.0).round() as u8;
    Rgb([q(r), q(g), q(b)])
}

fn blend(a: Rgb<u8>, b: Rgb<u8>, t: f64) -> Rgb<u8> {
    let mix = |x: u8, y: u8| (x as f64 * (1.0 - t) + y as f64 * t).round() as u8;
    Rgb([mix(a[0], b[0]), mix(a[1], b[1]), mix(a[2], b[2])])
}

fn darken(c: Rgb<u8>) -> Rgb<u8> {
    blend(c, Rgb([0, 0, 0]), 0.45)
}

fn paint(img: &mut RgbImage, mask: &Mask, color: Rgb<u8>) {
    for (row, col) in mask.iter_set() {
        img.put_pixel(col as u32, row as u32, color);
    }
}

/// Mask pixels with a 4-neighbour outside the mask.
fn outline(mask: &Mask) -> Mask {
    let (w, h) = (mask.width(), mask.height());
    let mut out = Mask::new(w, h);
    for (r, c) in mask.iter_set() {
        let edge = r == 0
            || c == 0
            || r + 1 == h
            || c + 1 == w
            || !mask.get(r - 1, c)
            || !mask.get(r + 1, c)
            || !mask.get(r, c - 1)
            || !mask.get(r, c + 1);
        if edge {
            out.set(r, c);
        }
    }
    out
}

/// Ids whose reflection is not drawn: the removal pair of a T4 target.
pub fn hidden_reflections(target: &Target) -> Vec<usize> {
    match target {
        Target::Removal { ids, .. } => ids.to_vec(),
        _ => Vec::new(),
    }
}

/// Renders the scene alone, camera resolution. Objects are painted far to
/// near, each preceded by its reflection when the scene has a surface.
pub fn render_scene(scene: &Scene, hidden: &[usize]) -> Result<RgbImage> {
    let cam = &scene.camera;
    let (w, h) = (cam.image_width, cam.image_height);
    let horizon = cam.principal_point[1].clamp(0.0, h as f64) as u32;
    let mut img = RgbImage::from_fn(w, h, |_, y| if y < horizon { SKY } else { FLOOR });

    let surface_mask = scene.surface.as_ref().map(|s| s.mask(cam));
    if let Some(m) = &surface_mask {
        paint(&mut img, m, SURFACE);
    }
    let mut order: Vec<usize> = (0..scene.objects.len()).collect();
    order.sort_by(|&a, &b| {
        let (oa, ob) = (&scene.objects[a], &scene.objects[b]);
        ob.z_front.total_cmp(&oa.z_front).then(b.cmp(&a))
    });
    for id in order {
        let obj = &scene.objects[id];
        let color = object_color(id);
        if let (Some(surface), Some(sm)) = (&scene.surface, &surface_mask) {
            if !hidden.contains(&id) {
                let mut patch = cam.rasterize(surface.mirrored_face(obj, cam));
                patch.intersect_with(sm);
                paint(&mut img, &patch, reflection_color(id));
            }
        }
        let sil = project(obj, cam).map_err(|e| Error::Data(format!("{}: {e}", obj.label)))?;
        paint(&mut img, &sil, color);
        paint(&mut img, &outline(&sil), darken(color));
    }
    Ok(img)
}

fn draw_text(img: &mut RgbImage, x: u32, y: u32, text: &str, color: Rgb<u8>) {
    for (k, ch) in text.chars().enumerate() {
        let code = if ch.is_ascii() { ch as usize } else { b'?' as usize };
        let glyph = font8x8::legacy::BASIC_LEGACY[code];
        for (gy, bits) in glyph.iter().enumerate() {
            for gx in 0..8 {
                if bits >> gx & 1 == 1 {
                    let (px, py) = (x + 8 * k as u32 + gx, y + gy as u32);
                    if px < img.width() && py < img.height() {
                        img.put_pixel(px, py, color);
                    }
                }
            }
        }
    }
}

/// Scene image with a legend panel listing each object's color and label.
pub fn render_with_legend(scene: &Scene, hidden: &[usize]) -> Result<RgbImage> {
    let body = render_scene(scene, hidden)?;
    let (w, h) = body.dimensions();
    let mut img = RgbImage::from_pixel(w + LEGEND_WIDTH, h, PANEL);
    image::imageops::replace(&mut img, &body, 0, 0);

    let n = scene.objects.len().max(1) as u32;
    let row_h = ((h - 16) / n).clamp(9, 20);
    let max_chars = ((LEGEND_WIDTH - 36) / 8) as usize;
    let mut labelled: Vec<usize> = (0..scene.objects.len()).collect();
    labelled.sort_by(|&a, &b| scene.objects[a].label.cmp(&scene.objects[b].label));
    for (row, id) in labelled.into_iter().enumerate() {
        let y = 8 + row as u32 * row_h;
        if y + 8 > h {
            break;
        }
        let color = object_color(id);
        for dy in 0..8 {
            for dx in 0..16 {
                img.put_pixel(w + 8 + dx, y + dy, color);
            }
        }
        let label: String = scene.objects[id].label.chars().take(max_chars).collect();
        draw_text(&mut img, w + 30, y, &label, INK);
    }
    Ok(img)
}

/// The image shown to a model for `instance`.
pub fn render_instance(instance: &TaskInstance, scene: &Scene) -> Result<RgbImage> {
    render_with_legend(scene, &hidden_reflections(&instance.target))
}

pub fn encode_png(img: &RgbImage) -> Vec<u8> {
    let mut buf = Cursor::new(Vec::new());
    img.write_to(&mut buf, ImageFormat::Png)
        .expect("encoding to memory does not fail");
    buf.into_inner()
}

pub fn write_png(path: &Path, img: &RgbImage) -> Result<()> {
    fsio::write_atomic(path, &encode_png(img))
}
