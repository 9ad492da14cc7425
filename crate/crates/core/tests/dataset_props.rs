use std::collections::BTreeSet;
use std::io::Cursor;

use proptest::prelude::*;
use sdlc_core::dataset::{gen_arbitrary, gen_uniform_sphere, split_buckets, ArbitraryFamily, ArbitraryParams, LabeledDataset};
use sdlc_core::geometry::sign_label;
use sdlc_core::RngStream;

fn check_generated(ds: &LabeledDataset) {
    let w = ds.ground_truth().expect("generators record the normal");
    for (x, &y) in ds.points().iter().zip(ds.labels()) {
        assert!((x.norm() - 1.0).abs() <= 1e-9);
        assert_eq!(y, sign_label(w.dot(x)));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sphere_labels_and_norms(seed in any::<u64>(), n in 1usize..300, d in 1usize..12) {
        let ds = gen_uniform_sphere(n, d, &RngStream::new(seed, 0)).unwrap();
        prop_assert_eq!(ds.len(), n);
        check_generated(&ds);
    }

    #[test]
    fn arbitrary_labels_and_norms(seed in any::<u64>(), n in 1usize..300, d in 2usize..9, fam in 0usize..4) {
        let family = ArbitraryFamily::ALL[fam];
        let ds = gen_arbitrary(family, n, d, &ArbitraryParams::default(), &RngStream::new(seed, 0)).unwrap();
        prop_assert_eq!(ds.len(), n);
        check_generated(&ds);
    }

    #[test]
    fn buckets_partition(seed in any::<u64>(), half in 1usize..20, extra in 0usize..200) {
        let k2 = 2 * half;
        let n = k2 + extra;
        let b = split_buckets(n, k2, &mut RngStream::new(seed, 0)).unwrap();
        prop_assert_eq!(b.buckets.len(), k2);
        let sizes = b.sizes();
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        let all: Vec<usize> = b.buckets.iter().flatten().copied().collect();
        let set: BTreeSet<usize> = all.iter().copied().collect();
        prop_assert_eq!(all.len(), n);
        prop_assert_eq!(set, (0..n).collect::<BTreeSet<_>>());
    }

    #[test]
    fn jsonl_round_trip(seed in any::<u64>(), n in 1usize..60, d in 1usize..8) {
        let ds = gen_uniform_sphere(n, d, &RngStream::new(seed, 0)).unwrap();
        let mut buf = Vec::new();
        ds.write_jsonl(&mut buf).unwrap();
        let back = LabeledDataset::read_jsonl(Cursor::new(buf)).unwrap();
        prop_assert_eq!(back, ds);
    }
}

#[test]
fn save_and_load_through_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ds.jsonl");
    let ds = gen_arbitrary(ArbitraryFamily::Clustered, 500, 6, &ArbitraryParams::default(), &RngStream::new(4, 0)).unwrap();
    ds.save(&path).unwrap();
    assert_eq!(LabeledDataset::load(&path).unwrap(), ds);
}

#[test]
fn odd_bucket_counts_and_tiny_n_fail() {
    let mut rng = RngStream::new(0, 0);
    assert!(split_buckets(10, 3, &mut rng).is_err());
    assert!(split_buckets(3, 4, &mut rng).is_err());
    assert!(split_buckets(4, 0, &mut rng).is_err());
    let b = split_buckets(4, 4, &mut rng).unwrap();
    assert_eq!(b.sizes(), vec![1, 1, 1, 1]);
}

#[test]
fn malformed_records_report_their_line() {
    let text = "{\"d\":2,\"n\":2}\n{\"x\":[1.0,0.0],\"y\":1}\n{\"x\":[1.0],\"y\":1}\n";
    let err = LabeledDataset::read_jsonl(Cursor::new(text)).unwrap_err();
    assert!(err.to_string().contains("line 3"), "{err}");
}
