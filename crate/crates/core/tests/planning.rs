// SPDX-License-Identifier: MIT OR Apache-2.0

//! Swap planning checked by exhaustive enumeration.

mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;
use spatialcf_core::bench::{GroundTruth, Target};
use spatialcf_core::scene::{Scene, SceneObject};
use spatialcf_core::swap::{self, SwapPair, VolumetricCheck};
use spatialcf_core::TaskId;

fn overlaps(a: &SceneObject, b: &SceneObject) -> bool {
    let gap = |a: [f64; 2], b: [f64; 2]| a[1].min(b[1]) > a[0].max(b[0]);
    gap(a.x_interval(), b.x_interval())
        && gap(a.y_interval(), b.y_interval())
        && gap(a.z_interval(), b.z_interval())
}

fn collision_free(objs: &[SceneObject]) -> bool {
    (0..objs.len()).all(|i| (i + 1..objs.len()).all(|j| !overlaps(&objs[i], &objs[j])))
}

fn order(objs: &[SceneObject]) -> Vec<String> {
    let mut v: Vec<&SceneObject> = objs.iter().collect();
    v.sort_by(|a, b| a.x_center.partial_cmp(&b.x_center).unwrap());
    v.into_iter().map(|o| o.label.clone()).collect()
}

fn all_pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect()
}

fn swapped(objs: &[SceneObject], (i, j): (usize, usize)) -> Vec<SceneObject> {
    let mut out = objs.to_vec();
    let x = out[i].x_center;
    out[i].x_center = out[j].x_center;
    out[j].x_center = x;
    out
}

fn target_order(target: &Target) -> &[String] {
    match target {
        Target::Order { labels } => labels,
        other => panic!("unexpected target {other:?}"),
    }
}

#[test]
fn t5_has_exactly_one_feasible_correct_swap() {
    for e in common::emitted(TaskId::T5, 60, common::MASTER_SEED) {
        let objs = &e.scene.objects;
        let want = target_order(&e.instance.target);
        assert_eq!(all_pairs(objs.len()).len(), 6);
        let hits: Vec<(usize, usize)> = all_pairs(objs.len())
            .into_iter()
            .filter(|&p| {
                let s = swapped(objs, p);
                collision_free(&s) && order(&s) == want
            })
            .collect();
        assert_eq!(hits.len(), 1, "{}", e.instance.id);
        let (i, j) = hits[0];
        let GroundTruth::Swap { pair } = &e.instance.ground_truth else {
            panic!("T5 ground truth must be a swap");
        };
        assert!(pair.same_as(&SwapPair::new(objs[i].label.clone(), objs[j].label.clone())));
        assert!(collision_free(objs));
    }
}

/// Shortest collision-free sequence length (up to `max_len`) and how many
/// sequences achieve it, by plain enumeration.
fn enumerate_shortest(scene: &Scene, want: &[String], max_len: usize) -> Option<(usize, usize)> {
    let pairs = all_pairs(scene.objects.len());
    let mut frontier = vec![scene.objects.clone()];
    for len in 1..=max_len {
        let next: Vec<Vec<SceneObject>> = frontier
            .iter()
            .flat_map(|objs| {
                pairs
                    .iter()
                    .map(|&p| swapped(objs, p))
                    .filter(|s| collision_free(s))
                    .collect::<Vec<_>>()
            })
            .collect();
        let hits = next.iter().filter(|s| order(s) == want).count();
        if hits > 0 {
            return Some((len, hits));
        }
        frontier = next;
    }
    None
}

/// Every arrangement reachable through collision-free swaps, as orders.
fn reachable_orders(scene: &Scene) -> BTreeSet<Vec<String>> {
    let pairs = all_pairs(scene.objects.len());
    let mut seen: Vec<Vec<SceneObject>> = vec![scene.objects.clone()];
    let mut orders: BTreeSet<Vec<String>> = BTreeSet::from([order(&scene.objects)]);
    let mut k = 0;
    while k < seen.len() {
        let cur = seen[k].clone();
        for &p in &pairs {
            let s = swapped(&cur, p);
            if collision_free(&s) && orders.insert(order(&s)) {
                seen.push(s);
            }
        }
        k += 1;
    }
    orders
}

#[test]
fn t6_plans_are_optimal_and_infeasible_tags_are_exhaustive() {
    let (mut plans, mut infeasible) = (0, 0);
    for e in common::emitted(TaskId::T6, 60, common::MASTER_SEED) {
        let scene = &e.scene;
        let want = target_order(&e.instance.target);
        match &e.instance.ground_truth {
            GroundTruth::Plan { swaps } => {
                plans += 1;
                assert!(swaps.len() >= 2);
                let (len, count) = enumerate_shortest(scene, want, 4)
                    .unwrap_or_else(|| panic!("{}: no plan within 4 swaps", e.instance.id));
                assert_eq!(len, swaps.len(), "{}", e.instance.id);
                assert_eq!(count, 1, "{}: shortest plan not unique", e.instance.id);
                assert_eq!(swap::check_volumetric(scene, swaps).unwrap(), VolumetricCheck::Ok);
                assert_eq!(swap::order_after(scene, swaps).unwrap(), want);
            }
            GroundTruth::Infeasible => {
                infeasible += 1;
                assert!(!reachable_orders(scene).contains(want), "{}", e.instance.id);
            }
            other => panic!("unexpected T6 ground truth {other:?}"),
        }
    }
    assert!(plans > 0 && infeasible > 0, "{plans} plans, {infeasible} infeasible");
}

#[test]
fn planning_scenes_start_collision_free() {
    for task in [TaskId::T5, TaskId::T6] {
        for e in common::emitted(task, 20, common::MASTER_SEED ^ 3) {
            assert!(collision_free(&e.scene.objects));
            assert_eq!(e.scene.objects.len(), 4);
            assert_ne!(e.scene.left_to_right(), target_order(&e.instance.target));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn swap_feasibility_is_symmetric(index in 0usize..400, i in 0usize..4, j in 0usize..4) {
        prop_assume!(i != j);
        let e = &common::emitted(TaskId::T5, 1, index as u64)[0];
        prop_assert_eq!(
            swap::feasible_swap(&e.scene, i, j),
            swap::feasible_swap(&e.scene, j, i)
        );
        let (a, b) = (&e.scene.objects[i].label, &e.scene.objects[j].label);
        let forward = swap::check_volumetric(&e.scene, &[SwapPair::new(a.clone(), b.clone())]).unwrap();
        let backward = swap::check_volumetric(&e.scene, &[SwapPair::new(b.clone(), a.clone())]).unwrap();
        prop_assert_eq!(forward, backward);
    }
}
