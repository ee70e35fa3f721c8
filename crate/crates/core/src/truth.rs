// SPDX-License-Identifier: MIT OR Apache-2.0

//! Ground truths for the removal, transparency and reflection tasks.
//!
//! Visibility here is pixel-exact: an object is fully visible iff no object
//! with a smaller front-face depth shares a pixel with its silhouette. The
//! `τ_occ`-thresholded graph is not consulted, except by [`graph_t1`] which
//! gives the unique-predecessor reading for comparison.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use crate::occlusion::{fully_visible, OcclusionGraph};
use crate::scene::{Mask, Scene, SceneError, SceneRaster, ZBuffer};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TruthError {
    #[error("object id {0} not in scene")]
    UnknownObject(usize),
    #[error("ground truth is empty")]
    EmptyAnswer,
    #[error("target is already fully visible")]
    AlreadyVisible,
    #[error("minimum removal set has size {0}, below the required 2")]
    SetTooSmall(usize),
    #[error("{0} candidate occluders exceed the exhaustive-search bound")]
    TooManyCandidates(usize),
    #[error("scene has no reflective surface")]
    NoSurface,
    #[error("reflection of `{0}` is not visible")]
    ReflectionHidden(String),
    #[error(transparent)]
    Scene(#[from] SceneError),
}

/// Largest occluder set searched exhaustively by [`derive_t2`].
pub const MAX_T2_CANDIDATES: usize = 20;

fn check_id(scene: &Scene, x: usize) -> Result<(), TruthError> {
    if x < scene.objects.len() {
        Ok(())
    } else {
        Err(TruthError::UnknownObject(x))
    }
}

fn sorted_labels(scene: &Scene, ids: impl IntoIterator<Item = usize>) -> Vec<String> {
    let mut labels: Vec<String> = ids
        .into_iter()
        .map(|i| scene.objects[i].label.clone())
        .collect();
    labels.sort();
    labels
}

/// Objects whose only pixel-level occluder is `x`: removing `x` makes them
/// fully visible.
pub fn derive_t1(raster: &SceneRaster<'_>, x: usize) -> Result<Vec<String>, TruthError> {
    let scene = raster.scene();
    check_id(scene, x)?;
    let revealed = (0..scene.objects.len()).filter(|&j| j != x && raster.occluders_of(j) == [x]);
    let labels = sorted_labels(scene, revealed);
    if labels.is_empty() {
        return Err(TruthError::EmptyAnswer);
    }
    Ok(labels)
}

/// Successors of `x` in the thresholded graph whose unique predecessor is `x`.
pub fn graph_t1(graph: &OcclusionGraph, x: usize) -> Vec<String> {
    let mut labels: Vec<String> = graph
        .successors(x)
        .iter()
        .filter(|&&j| graph.predecessors(j) == [x])
        .map(|&j| graph.nodes()[j].label.clone())
        .collect();
    labels.sort();
    labels
}

/// Smallest removal set that makes `x` fully visible, ordered by depth then
/// label. Among equal-size minima the one with the lexicographically least
/// `(depth, label)` sequence wins. Minima of size 1 are rejected.
pub fn derive_t2(raster: &SceneRaster<'_>, x: usize) -> Result<Vec<String>, TruthError> {
    let set = minimum_removal_set(raster, x)?;
    if set.len() < 2 {
        return Err(TruthError::SetTooSmall(set.len()));
    }
    Ok(set)
}

/// [`derive_t2`] without the size gate.
pub fn minimum_removal_set(raster: &SceneRaster<'_>, x: usize) -> Result<Vec<String>, TruthError> {
    let scene = raster.scene();
    check_id(scene, x)?;
    if fully_visible(raster, x) {
        return Err(TruthError::AlreadyVisible);
    }
    // Objects that never touch x's silhouette can never be required.
    let mut candidates = raster.occluders_of(x);
    if candidates.len() > MAX_T2_CANDIDATES {
        return Err(TruthError::TooManyCandidates(candidates.len()));
    }
    let objs = &scene.objects;
    candidates.sort_by(|&a, &b| {
        objs[a]
            .z_front
            .total_cmp(&objs[b].z_front)
            .then_with(|| objs[a].label.cmp(&objs[b].label))
    });
    let occluders = candidates.clone();
    let reveals = |subset: &[usize]| occluders.iter().all(|o| subset.contains(o));

    let n = candidates.len();
    for k in 1..=n {
        // combinations in lexicographic index order = lexicographic (depth, label) order
        let mut idx: Vec<usize> = (0..k).collect();
        loop {
            let subset: Vec<usize> = idx.iter().map(|&i| candidates[i]).collect();
            if reveals(&subset) {
                return Ok(subset.into_iter().map(|i| objs[i].label.clone()).collect());
            }
            let mut pos = k;
            while pos > 0 && idx[pos - 1] == n - k + pos - 1 {
                pos -= 1;
            }
            if pos == 0 {
                break;
            }
            idx[pos - 1] += 1;
            for p in pos..k {
                idx[p] = idx[p - 1] + 1;
            }
        }
    }
    unreachable!("removing every occluder always reveals the target")
}

/// Objects seen through `x` when it turns transparent: silhouette overlap
/// with `x` and front face beyond `x`'s back face.
pub fn derive_t3(raster: &SceneRaster<'_>, x: usize) -> Result<Vec<String>, TruthError> {
    let scene = raster.scene();
    check_id(scene, x)?;
    let back = scene.objects[x].z_back();
    let behind = scene
        .objects
        .iter()
        .filter(|o| o.id != x && o.z_front > back && raster.overlaps(o.id, x))
        .map(|o| o.id);
    let labels = sorted_labels(scene, behind);
    if labels.is_empty() {
        return Err(TruthError::EmptyAnswer);
    }
    Ok(labels)
}

/// Uncovered reflection pixels per object, in id order.
///
/// A reflection is the object's front face mirrored across the surface
/// plane, clipped to the surface mask and minus the silhouettes of objects
/// nearer to the camera.
pub fn reflection_pixels(scene: &Scene) -> Result<Vec<usize>, TruthError> {
    let surface = scene.surface.as_ref().ok_or(TruthError::NoSurface)?;
    let cam = &scene.camera;
    let surface_mask = surface.mask(cam);
    let silhouettes: Vec<Mask> = scene
        .objects
        .iter()
        .map(|o| crate::scene::project(o, cam))
        .collect::<Result<_, _>>()?;
    Ok(scene
        .objects
        .iter()
        .map(|obj| {
            let mut patch = cam.rasterize(surface.mirrored_face(obj, cam));
            patch.intersect_with(&surface_mask);
            for (other, sil) in scene.objects.iter().zip(&silhouettes) {
                if other.z_front < obj.z_front {
                    patch.subtract(sil);
                }
            }
            patch.count()
        })
        .collect())
}

/// Objects with a visible reflection, minus the removal set.
pub fn derive_t4(
    scene: &Scene,
    removal: &[usize],
    min_pixels: usize,
) -> Result<Vec<String>, TruthError> {
    for &r in removal {
        check_id(scene, r)?;
    }
    let pixels = reflection_pixels(scene)?;
    if let Some(hidden) = pixels.iter().position(|&p| p < min_pixels) {
        return Err(TruthError::ReflectionHidden(scene.objects[hidden].label.clone()));
    }
    let survivors = (0..scene.objects.len()).filter(|i| !removal.contains(i));
    Ok(sorted_labels(scene, survivors))
}

/// Brute-force reveal oracle: re-render without `removed` and return the
/// objects that were not fully visible before and are afterwards.
pub fn oracle_reveal(scene: &Scene, removed: &BTreeSet<usize>) -> Vec<String> {
    let before = ZBuffer::render(scene, &BTreeSet::new()).fully_visible();
    let after = ZBuffer::render(scene, removed).fully_visible();
    sorted_labels(
        scene,
        after
            .into_iter()
            .filter(|id| !removed.contains(id) && !before.contains(id)),
    )
}
