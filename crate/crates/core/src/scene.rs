// SPDX-License-Identifier: MIT OR Apache-2.0

//! Box scenes seen from a fixed pinhole camera.
//!
//! The camera sits at the origin looking down +z with +y up; image rows grow
//! downwards. Every object is an upright axis-aligned box and its silhouette
//! is the projected front-face rectangle. A pixel belongs to a projected
//! rectangle iff its center lies in the half-open interval `[lo, hi)` on both
//! axes, so rectangles that share an edge never share a pixel.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

pub const IMAGE_WIDTH: usize = 720;
pub const IMAGE_HEIGHT: usize = 480;
/// Depth assigned to pixels not covered by any object, meters.
pub const BACKGROUND_DEPTH: f64 = 10.0;
/// Focal length for which a 0.5 m tall box at 1 m fills half the frame.
pub const DEFAULT_FOCAL_LENGTH: f64 = 480.0;
/// Depth-confidence threshold below which pixels are ignored.
pub const CONFIDENCE_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SceneError {
    #[error("object {0} projects to an empty mask")]
    EmptyMask(usize),
    #[error("object {id}: {reason}")]
    InvalidObject { id: usize, reason: &'static str },
    #[error("camera must be {IMAGE_WIDTH}x{IMAGE_HEIGHT} with positive focal length")]
    InvalidCamera,
    #[error("object ids must be dense 0..n-1 in order (found {found} at position {position})")]
    NonDenseIds { position: usize, found: usize },
    #[error("objects {0} and {1} share the base-type noun `{2}`")]
    DuplicateBaseNoun(usize, usize, String),
    #[error("object {0} footprint leaves the image frame")]
    OutOfFrame(usize),
    #[error("no pixel survives the confidence filter")]
    EmptyAfterFiltering,
    #[error("mask is {0}x{1} but depth map is {2}x{3}")]
    ShapeMismatch(usize, usize, usize, usize),
    #[error("reflective surface is degenerate")]
    InvalidSurface,
}

/// Binary pixel grid, row-major, bit-packed.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Mask {
    width: usize,
    height: usize,
    words: Vec<u64>,
}

impl core::fmt::Debug for Mask {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("Mask")
            .field("width", &self.width)
            .field("height", &self.height)
            .field("count", &self.count())
            .field("bbox", &self.bbox())
            .finish()
    }
}

/// Pixel rectangle `[row0, row1) x [col0, col1)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PixelRect {
    pub row0: usize,
    pub row1: usize,
    pub col0: usize,
    pub col1: usize,
}

impl PixelRect {
    pub fn area(&self) -> usize {
        (self.row1 - self.row0) * (self.col1 - self.col0)
    }

    pub fn contains(&self, row: usize, col: usize) -> bool {
        (self.row0..self.row1).contains(&row) && (self.col0..self.col1).contains(&col)
    }
}

impl Mask {
    pub fn new(width: usize, height: usize) -> Self {
        Mask {
            width,
            height,
            words: vec![0; (width * height).div_ceil(64)],
        }
    }

    /// Empty mask with the 720x480 frame shape.
    pub fn frame() -> Self {
        Mask::new(IMAGE_WIDTH, IMAGE_HEIGHT)
    }

    pub fn from_rect(width: usize, height: usize, rect: PixelRect) -> Self {
        let mut mask = Mask::new(width, height);
        for row in rect.row0..rect.row1.min(height) {
            for col in rect.col0..rect.col1.min(width) {
                mask.set(row, col);
            }
        }
        mask
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        let idx = row * self.width + col;
        self.words[idx / 64] >> (idx % 64) & 1 == 1
    }

    #[inline]
    pub fn get_index(&self, idx: usize) -> bool {
        self.words[idx / 64] >> (idx % 64) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize) {
        let idx = row * self.width + col;
        self.words[idx / 64] |= 1 << (idx % 64);
    }

    pub fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn intersection_count(&self, other: &Mask) -> usize {
        debug_assert_eq!((self.width, self.height), (other.width, other.height));
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones() as usize)
            .sum()
    }

    pub fn intersects(&self, other: &Mask) -> bool {
        self.words.iter().zip(&other.words).any(|(a, b)| a & b != 0)
    }

    pub fn union_with(&mut self, other: &Mask) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= b;
        }
    }

    pub fn intersect_with(&mut self, other: &Mask) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a &= b;
        }
    }

    pub fn subtract(&mut self, other: &Mask) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a &= !b;
        }
    }

    /// Tight bounding box of the set pixels.
    pub fn bbox(&self) -> Option<PixelRect> {
        let mut rect: Option<PixelRect> = None;
        for (row, col) in self.iter_set() {
            let r = rect.get_or_insert(PixelRect {
                row0: row,
                row1: row + 1,
                col0: col,
                col1: col + 1,
            });
            r.row0 = r.row0.min(row);
            r.row1 = r.row1.max(row + 1);
            r.col0 = r.col0.min(col);
            r.col1 = r.col1.max(col + 1);
        }
        rect
    }

    /// Set pixels in row-major order.
    pub fn iter_set(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let width = self.width;
        self.words.iter().enumerate().flat_map(move |(wi, &word)| {
            let mut w = word;
            core::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let bit = w.trailing_zeros() as usize;
                w &= w - 1;
                let idx = wi * 64 + bit;
                Some((idx / width, idx % width))
            })
        })
    }
}

/// Fixed pinhole camera at the origin, optical axis along +z.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub image_width: u32,
    pub image_height: u32,
    /// Pixels.
    pub focal_length: f64,
    /// `[u, v]` in pixels.
    pub principal_point: [f64; 2],
}

impl Default for Camera {
    fn default() -> Self {
        Camera {
            image_width: IMAGE_WIDTH as u32,
            image_height: IMAGE_HEIGHT as u32,
            focal_length: DEFAULT_FOCAL_LENGTH,
            principal_point: [IMAGE_WIDTH as f64 / 2.0, IMAGE_HEIGHT as f64 / 2.0],
        }
    }
}

impl Camera {
    pub fn with_focal_length(focal_length: f64) -> Result<Self, SceneError> {
        let cam = Camera {
            focal_length,
            ..Camera::default()
        };
        cam.validate()?;
        Ok(cam)
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        if self.image_width as usize != IMAGE_WIDTH
            || self.image_height as usize != IMAGE_HEIGHT
            || !(self.focal_length > 0.0)
            || !self.focal_length.is_finite()
        {
            return Err(SceneError::InvalidCamera);
        }
        Ok(())
    }

    pub fn width(&self) -> usize {
        self.image_width as usize
    }

    pub fn height(&self) -> usize {
        self.image_height as usize
    }

    /// Image column coordinate of world point `(x, _, z)`.
    pub fn u(&self, x: f64, z: f64) -> f64 {
        self.principal_point[0] + self.focal_length * x / z
    }

    /// Image row coordinate of world point `(_, y, z)`.
    pub fn v(&self, y: f64, z: f64) -> f64 {
        self.principal_point[1] - self.focal_length * y / z
    }

    /// World x that projects to image column `u` at depth `z`.
    pub fn x_at(&self, u: f64, z: f64) -> f64 {
        (u - self.principal_point[0]) * z / self.focal_length
    }

    /// World length at depth `z` spanning `pixels` pixels.
    pub fn meters_for_pixels(&self, pixels: f64, z: f64) -> f64 {
        pixels * z / self.focal_length
    }

    pub fn rasterize(&self, quad: ImageQuad) -> Mask {
        rasterize_rect(self.width(), self.height(), quad)
    }
}

/// Continuous image-space rectangle `[u0, u1) x [v0, v1)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ImageQuad {
    pub u0: f64,
    pub u1: f64,
    pub v0: f64,
    pub v1: f64,
}

impl ImageQuad {
    pub fn inside_frame(&self, width: usize, height: usize) -> bool {
        self.u0 >= 0.0 && self.v0 >= 0.0 && self.u1 <= width as f64 && self.v1 <= height as f64
    }
}

fn pixel_span(lo: f64, hi: f64, limit: usize) -> (usize, usize) {
    // centers c + 0.5 with lo <= c + 0.5 < hi
    let start = libm::ceil(lo - 0.5).max(0.0);
    let end = libm::ceil(hi - 0.5).max(0.0);
    let start = (start as usize).min(limit);
    let end = (end as usize).min(limit);
    (start, end.max(start))
}

pub fn rasterize_rect(width: usize, height: usize, quad: ImageQuad) -> Mask {
    let (c0, c1) = pixel_span(quad.u0, quad.u1, width);
    let (r0, r1) = pixel_span(quad.v0, quad.v1, height);
    Mask::from_rect(
        width,
        height,
        PixelRect {
            row0: r0,
            row1: r1,
            col0: c0,
            col1: c1,
        },
    )
}

/// Upright box. Lengths are meters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub id: usize,
    pub label: String,
    pub x_center: f64,
    /// Height of the box bottom.
    pub y_base: f64,
    pub width: f64,
    pub height: f64,
    /// Depth of the front face.
    pub z_front: f64,
    /// Front-to-back thickness.
    pub z_extent: f64,
}

impl SceneObject {
    pub fn z_back(&self) -> f64 {
        self.z_front + self.z_extent
    }

    pub fn x_interval(&self) -> [f64; 2] {
        [self.x_center - self.width / 2.0, self.x_center + self.width / 2.0]
    }

    pub fn y_interval(&self) -> [f64; 2] {
        [self.y_base, self.y_base + self.height]
    }

    pub fn z_interval(&self) -> [f64; 2] {
        [self.z_front, self.z_back()]
    }

    /// Last whitespace-separated word of the label.
    pub fn base_noun(&self) -> &str {
        base_noun(&self.label)
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        let bad = |reason| Err(SceneError::InvalidObject { id: self.id, reason });
        let finite = [
            self.x_center,
            self.y_base,
            self.width,
            self.height,
            self.z_front,
            self.z_extent,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return bad("non-finite geometry");
        }
        if !(self.z_front > 0.0) {
            return bad("z_front must be positive");
        }
        if !(self.width > 0.0 && self.height > 0.0 && self.z_extent > 0.0) {
            return bad("width, height and z_extent must be positive");
        }
        if self.label.trim().is_empty() {
            return bad("empty label");
        }
        Ok(())
    }

    /// Front face in image coordinates.
    pub fn front_face(&self, cam: &Camera) -> ImageQuad {
        let [x0, x1] = self.x_interval();
        let [y0, y1] = self.y_interval();
        ImageQuad {
            u0: cam.u(x0, self.z_front),
            u1: cam.u(x1, self.z_front),
            v0: cam.v(y1, self.z_front),
            v1: cam.v(y0, self.z_front),
        }
    }
}

pub fn base_noun(label: &str) -> &str {
    label.split_whitespace().last().unwrap_or("")
}

/// Horizontal planar mirror `y = y0` bounded in x and z.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReflectiveSurface {
    pub y0: f64,
    pub x_range: [f64; 2],
    pub z_range: [f64; 2],
    #[serde(default)]
    pub material: String,
}

impl ReflectiveSurface {
    pub fn validate(&self) -> Result<(), SceneError> {
        let ok = self.y0.is_finite()
            && self.y0 < 0.0
            && self.x_range[0] < self.x_range[1]
            && self.z_range[0] > 0.0
            && self.z_range[0] < self.z_range[1];
        if ok {
            Ok(())
        } else {
            Err(SceneError::InvalidSurface)
        }
    }

    /// Pixels whose camera ray hits the surface rectangle.
    pub fn mask(&self, cam: &Camera) -> Mask {
        let (w, h) = (cam.width(), cam.height());
        let mut mask = Mask::new(w, h);
        let f = cam.focal_length;
        let [cx, cy] = cam.principal_point;
        for row in 0..h {
            let dy = -((row as f64 + 0.5) - cy) / f;
            if dy >= 0.0 {
                continue;
            }
            let t = self.y0 / dy;
            if !(t >= self.z_range[0] && t < self.z_range[1]) {
                continue;
            }
            for col in 0..w {
                let x = t * ((col as f64 + 0.5) - cx) / f;
                if x >= self.x_range[0] && x < self.x_range[1] {
                    mask.set(row, col);
                }
            }
        }
        mask
    }

    /// Image patch of `obj`'s front face mirrored across the plane.
    pub fn mirrored_face(&self, obj: &SceneObject, cam: &Camera) -> ImageQuad {
        let [x0, x1] = obj.x_interval();
        let [ya, yb] = obj.y_interval();
        let (my0, my1) = (2.0 * self.y0 - yb, 2.0 * self.y0 - ya);
        ImageQuad {
            u0: cam.u(x0, obj.z_front),
            u1: cam.u(x1, obj.z_front),
            v0: cam.v(my1, obj.z_front),
            v1: cam.v(my0, obj.z_front),
        }
    }
}

/// Scene generator provenance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateFamily {
    Occlusion,
    Reflection,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TemplateId {
    pub family: TemplateFamily,
    pub index: u8,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub camera: Camera,
    pub objects: Vec<SceneObject>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub surface: Option<ReflectiveSurface>,
    pub template: TemplateId,
    pub seed: u64,
}

impl Scene {
    pub fn validate(&self) -> Result<(), SceneError> {
        self.camera.validate()?;
        for (position, obj) in self.objects.iter().enumerate() {
            if obj.id != position {
                return Err(SceneError::NonDenseIds {
                    position,
                    found: obj.id,
                });
            }
            obj.validate()?;
            let quad = obj.front_face(&self.camera);
            if !quad.inside_frame(self.camera.width(), self.camera.height()) {
                return Err(SceneError::OutOfFrame(obj.id));
            }
        }
        for (i, a) in self.objects.iter().enumerate() {
            for b in &self.objects[i + 1..] {
                if a.base_noun() == b.base_noun() {
                    return Err(SceneError::DuplicateBaseNoun(
                        a.id,
                        b.id,
                        a.base_noun().into(),
                    ));
                }
            }
        }
        if let Some(surface) = &self.surface {
            surface.validate()?;
        }
        Ok(())
    }

    pub fn object(&self, id: usize) -> Option<&SceneObject> {
        self.objects.get(id)
    }

    pub fn find_label(&self, label: &str) -> Option<&SceneObject> {
        self.objects.iter().find(|o| o.label == label)
    }

    pub fn labels(&self) -> Vec<String> {
        self.objects.iter().map(|o| o.label.clone()).collect()
    }

    /// Labels sorted by current x position, left to right (ties by id).
    pub fn left_to_right(&self) -> Vec<String> {
        let mut order: Vec<&SceneObject> = self.objects.iter().collect();
        order.sort_by(|a, b| a.x_center.total_cmp(&b.x_center).then(a.id.cmp(&b.id)));
        order.into_iter().map(|o| o.label.clone()).collect()
    }
}

/// Rasterized front face of `obj`.
pub fn project(obj: &SceneObject, cam: &Camera) -> Result<Mask, SceneError> {
    if !(obj.z_front > 0.0) || !(obj.width > 0.0) || !(obj.height > 0.0) {
        return Err(SceneError::EmptyMask(obj.id));
    }
    let mask = cam.rasterize(obj.front_face(cam));
    if mask.is_empty() {
        return Err(SceneError::EmptyMask(obj.id));
    }
    Ok(mask)
}

/// Per-pixel depth plus confidence.
#[derive(Clone, Debug, PartialEq)]
pub struct DepthMap {
    pub width: usize,
    pub height: usize,
    pub depth: Vec<f64>,
    pub confidence: Vec<f64>,
}

impl DepthMap {
    pub fn filled(width: usize, height: usize, depth: f64) -> Self {
        DepthMap {
            width,
            height,
            depth: vec![depth; width * height],
            confidence: vec![1.0; width * height],
        }
    }

    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.depth[row * self.width + col]
    }
}

/// Z-buffer of front-face depths over the scene. Objects that do not project
/// into the frame are skipped.
pub fn render_depth(scene: &Scene) -> DepthMap {
    let cam = &scene.camera;
    let mut map = DepthMap::filled(cam.width(), cam.height(), BACKGROUND_DEPTH);
    for obj in &scene.objects {
        let Ok(mask) = project(obj, cam) else {
            continue;
        };
        for (row, col) in mask.iter_set() {
            let px = &mut map.depth[row * cam.width() + col];
            if obj.z_front < *px {
                *px = obj.z_front;
            }
        }
    }
    map
}

/// Lower median of the depths under `mask`, ignoring pixels whose confidence
/// is below [`CONFIDENCE_THRESHOLD`].
pub fn median_depth(mask: &Mask, depth: &DepthMap) -> Result<f64, SceneError> {
    if (mask.width(), mask.height()) != (depth.width, depth.height) {
        return Err(SceneError::ShapeMismatch(
            mask.width(),
            mask.height(),
            depth.width,
            depth.height,
        ));
    }
    let mut values: Vec<f64> = mask
        .iter_set()
        .map(|(r, c)| r * depth.width + c)
        .filter(|&i| depth.confidence[i] >= CONFIDENCE_THRESHOLD)
        .map(|i| depth.depth[i])
        .collect();
    if values.is_empty() {
        return Err(SceneError::EmptyAfterFiltering);
    }
    values.sort_by(f64::total_cmp);
    Ok(values[(values.len() - 1) / 2])
}

/// Brute-force painter's rendering: which object owns each pixel.
///
/// Objects are painted in id order and a pixel changes hands only to a
/// strictly nearer front face.
#[derive(Clone, Debug)]
pub struct ZBuffer {
    width: usize,
    owner: Vec<Option<usize>>,
    depth: Vec<f64>,
    mask_sizes: Vec<usize>,
}

impl ZBuffer {
    pub fn render(scene: &Scene, removed: &BTreeSet<usize>) -> Self {
        let cam = &scene.camera;
        let n_px = cam.width() * cam.height();
        let mut zb = ZBuffer {
            width: cam.width(),
            owner: vec![None; n_px],
            depth: vec![BACKGROUND_DEPTH; n_px],
            mask_sizes: vec![0; scene.objects.len()],
        };
        for obj in &scene.objects {
            if removed.contains(&obj.id) {
                continue;
            }
            let Ok(mask) = project(obj, cam) else {
                continue;
            };
            zb.mask_sizes[obj.id] = mask.count();
            for (row, col) in mask.iter_set() {
                let idx = row * cam.width() + col;
                if obj.z_front < zb.depth[idx] {
                    zb.depth[idx] = obj.z_front;
                    zb.owner[idx] = Some(obj.id);
                }
            }
        }
        zb
    }

    pub fn owner(&self, row: usize, col: usize) -> Option<usize> {
        self.owner[row * self.width + col]
    }

    pub fn depth(&self, row: usize, col: usize) -> f64 {
        self.depth[row * self.width + col]
    }

    /// Visible pixel count per object id.
    pub fn visible_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.mask_sizes.len()];
        for id in self.owner.iter().flatten() {
            counts[*id] += 1;
        }
        counts
    }

    /// Ids whose every mask pixel is visible. Removed or unprojectable
    /// objects are never reported.
    pub fn fully_visible(&self) -> BTreeSet<usize> {
        self.visible_counts()
            .iter()
            .zip(&self.mask_sizes)
            .enumerate()
            .filter(|(_, (v, m))| **m > 0 && v == m)
            .map(|(id, _)| id)
            .collect()
    }
}

/// Masks of every object, computed once per scene.
#[derive(Clone, Debug)]
pub struct SceneRaster<'a> {
    scene: &'a Scene,
    masks: Vec<Mask>,
}

impl<'a> SceneRaster<'a> {
    pub fn new(scene: &'a Scene) -> Result<Self, SceneError> {
        let masks = scene
            .objects
            .iter()
            .map(|o| project(o, &scene.camera))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(SceneRaster { scene, masks })
    }

    pub fn scene(&self) -> &'a Scene {
        self.scene
    }

    pub fn mask(&self, id: usize) -> &Mask {
        &self.masks[id]
    }

    pub fn overlaps(&self, i: usize, j: usize) -> bool {
        self.masks[i].intersects(&self.masks[j])
    }

    /// Objects strictly in front of `x` sharing at least one pixel with it.
    pub fn occluders_of(&self, x: usize) -> Vec<usize> {
        let dx = self.scene.objects[x].z_front;
        self.scene
            .objects
            .iter()
            .filter(|o| o.id != x && o.z_front < dx && self.overlaps(o.id, x))
            .map(|o| o.id)
            .collect()
    }
}
