// SPDX-License-Identifier: MIT OR Apache-2.0

mod common;

use std::fs;

use spatialcf::bundle_io::{self, decode_f32, encode_f32, BundleManifest};
use spatialcf::evaluate;
use spatialcf::fsio;
use spatialcf_core::mech::{Corruption, FailureMode, Stage};

#[test]
fn f32_encoding_is_little_endian() {
    assert_eq!(encode_f32(&[1.0]), [0x00, 0x00, 0x80, 0x3f]);
    let v = [0.0, -2.5, f32::MIN_POSITIVE, 1e-30];
    assert_eq!(decode_f32(&encode_f32(&v)), v);
}

#[test]
fn bundle_round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let b = common::dispersed_bundles(1, 1).remove(0);
    let path = bundle_io::write_bundle(dir.path(), &b).unwrap();
    let back = bundle_io::read_bundle(&path).unwrap();
    assert_eq!(back, b);
    let m: BundleManifest = fsio::read_json(&path).unwrap();
    assert_eq!(m.arrays["attention"].shape, [7, 4, common::ROWS * common::COLS]);
    assert_eq!(m.arrays["depth"].shape, [480, 720]);
    assert!(m.token_patch.is_none());
}

#[test]
fn offsets_into_a_shared_file_are_honoured() {
    let dir = tempfile::tempdir().unwrap();
    let b = common::dispersed_bundles(1, 2).remove(0);
    let path = bundle_io::write_bundle(dir.path(), &b).unwrap();
    let mut m: BundleManifest = fsio::read_json(&path).unwrap();
    let mut packed = Vec::new();
    for name in bundle_io::ARRAYS {
        let a = m.arrays.get_mut(name).unwrap();
        let bytes = fs::read(dir.path().join(&a.file)).unwrap();
        a.file = "packed.bin".into();
        a.offset = packed.len() as u64;
        packed.extend(bytes);
    }
    fs::write(dir.path().join("packed.bin"), packed).unwrap();
    fsio::write_json(&path, &m).unwrap();
    assert_eq!(bundle_io::read_bundle(&path).unwrap(), b);
}

#[test]
fn malformed_bundles_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let b = common::dispersed_bundles(1, 3).remove(0);
    let path = bundle_io::write_bundle(dir.path(), &b).unwrap();
    let good: BundleManifest = fsio::read_json(&path).unwrap();

    let cases: Vec<Box<dyn Fn(&mut BundleManifest)>> = vec![
        Box::new(|m| m.arrays.get_mut("attention").unwrap().shape[0] = 8),
        Box::new(|m| m.arrays.get_mut("depth").unwrap().offset = 4),
        Box::new(|m| {
            m.arrays.remove("confidence");
        }),
        Box::new(|m| m.version = 9),
        Box::new(|m| m.token_patch = Some(vec![0; 3])),
        Box::new(|m| m.grid.rows = 10),
    ];
    for (k, edit) in cases.iter().enumerate() {
        let mut m = good.clone();
        edit(&mut m);
        fsio::write_json(&path, &m).unwrap();
        let err = bundle_io::read_bundle(&path).unwrap_err();
        assert_eq!(err.exit_code(), 3, "case {k}: {err}");
    }
}

#[test]
fn negative_attention_fails_validation() {
    let dir = tempfile::tempdir().unwrap();
    let mut b = common::dispersed_bundles(1, 4).remove(0);
    b.attention[5] = -0.1;
    let path = bundle_io::write_bundle(dir.path(), &b).unwrap();
    assert!(bundle_io::read_bundle(&path).is_err());
}

#[test]
fn lenient_mech_skips_bad_bundles_and_strict_fails() {
    let dir = tempfile::tempdir().unwrap();
    for b in common::dispersed_bundles(3, 5) {
        bundle_io::write_bundle(dir.path(), &b).unwrap();
    }
    fs::write(dir.path().join("broken.json"), "{\"format\": 1}").unwrap();
    let out = evaluate::mech(Some(dir.path()), None, 0, false).unwrap();
    assert_eq!(out.examples.len(), 3);
    assert_eq!(out.skipped.len(), 1);
    assert_eq!(out.summaries[0].modes, [0, 0, 3]);
    let err = evaluate::mech(Some(dir.path()), None, 0, true).unwrap_err();
    assert_eq!(err.exit_code(), 4);
}

#[test]
fn traces_round_trip_and_feed_curves() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("traces.jsonl");
    let (records, oracle) = common::v_shape_traces(60, 7);
    bundle_io::write_traces(&path, &records).unwrap();
    assert_eq!(bundle_io::read_traces(&path).unwrap(), records);

    let out = evaluate::mech(None, Some(&path), 3, false).unwrap();
    let curve = &out.curves[&Corruption::A];
    for (p, want) in curve.iter().zip(&oracle) {
        let (lo, hi) = p.ci.unwrap();
        assert!((p.mean.unwrap() - want).abs() < 1e-9);
        assert!(lo <= *want && *want <= hi);
        if p.site.stage() == Stage::Merger {
            assert!((0.15..=0.30).contains(&p.mean.unwrap()));
        }
    }
    let rows = &out.groundedness;
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].n, 61);
    assert_eq!(rows[0].grounded + rows[0].marginal + rows[0].ungrounded, rows[0].n);
}

#[test]
fn invalid_trace_lines_are_skipped_leniently() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("traces.jsonl");
    let mut records = common::v_shape_traces(3, 8).0;
    records[1].p_clean = 1.5;
    bundle_io::write_traces(&path, &records).unwrap();
    let (ok, skipped) = bundle_io::read_traces_lenient(&path).unwrap();
    assert_eq!((ok.len(), skipped.len()), (3, 1));
    assert!(bundle_io::read_traces(&path).is_err());
    assert_eq!(evaluate::mech(None, Some(&path), 0, true).unwrap_err().exit_code(), 4);
}

#[test]
fn dispersed_fixture_report_is_all_dispersed() {
    let dir = tempfile::tempdir().unwrap();
    for b in common::dispersed_bundles(10, 9) {
        bundle_io::write_bundle(dir.path(), &b).unwrap();
    }
    let out = evaluate::mech(Some(dir.path()), None, 0, true).unwrap();
    assert_eq!(out.summaries[0].modes, [0, 0, 10]);
    for e in &out.examples {
        let spatialcf_core::mech::ExampleDgar::Scored { mode, means, .. } = e else {
            panic!("{e:?}");
        };
        assert_eq!(*mode, FailureMode::AttentionDispersed);
        assert!(means.dgar < 0.05);
    }
}
