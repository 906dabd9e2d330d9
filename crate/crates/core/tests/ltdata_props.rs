use std::collections::HashSet;
use std::fs;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use propssl::ltdata::{
    labeled_count, load_csv, longtail_counts, make_split, synth_gaussian_mixture, write_split, CsvSchema,
};
use propssl::{Error, Sample, SplitSpec};

fn spec(classes: usize, largest: usize, gamma: f64, beta: f64) -> SplitSpec {
    SplitSpec {
        classes,
        largest_class: largest,
        gamma,
        beta,
        val_per_class: 3,
        test_per_class: 4,
        seed: 11,
    }
}

/// Pools whose first feature is a unique id, so partitions can be checked
/// for overlap.
fn id_pools(classes: usize, per_class: usize) -> Vec<Vec<Sample>> {
    (0..classes)
        .map(|k| {
            (0..per_class)
                .map(|i| Sample::labeled(vec![(k * per_class + i) as f64], k))
                .collect()
        })
        .collect()
}

proptest! {
    #[test]
    fn split_partitions_are_disjoint_and_sized(
        classes in 2usize..6,
        largest in 20usize..120,
        gamma in 1.0f64..20.0,
        beta in 0.01f64..0.5,
        seed in any::<u64>(),
    ) {
        let s = SplitSpec { seed, ..spec(classes, largest, gamma, beta) };
        let pools = id_pools(classes, largest + 7);
        let split = make_split(&pools, &s, &mut s.rng()).unwrap();
        let sizes = longtail_counts(&s).unwrap();

        prop_assert_eq!(&split.class_counts_total, &sizes);
        for k in 0..classes {
            let l = split.class_counts_labeled.get(k);
            prop_assert_eq!(l, labeled_count(sizes.get(k), beta));
            prop_assert!(l >= 1);
            prop_assert_eq!(split.class_counts_unlabeled().get(k), sizes.get(k) - l);
        }
        for w in sizes.as_slice().windows(2) {
            prop_assert!(w[0] >= w[1]);
        }

        let mut seen = HashSet::new();
        let unlabeled = split.unlabeled.as_samples();
        let all = split.labeled.iter().chain(&unlabeled).chain(&split.validation).chain(&split.test);
        let mut n = 0;
        for sample in all {
            prop_assert!(seen.insert(sample.features[0] as u64));
            n += 1;
        }
        prop_assert_eq!(n, sizes.total() + classes * 7);
    }

    #[test]
    fn gamma_one_is_flat(classes in 2usize..10, largest in 1usize..1000) {
        let c = longtail_counts(&spec(classes, largest, 1.0, 0.1)).unwrap();
        prop_assert!(c.as_slice().iter().all(|&x| x == largest));
    }
}

#[test]
fn same_seed_same_split() {
    let s = spec(4, 60, 5.0, 0.1);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let pools = synth_gaussian_mixture(4, 5, 3.0, 67, &mut rng).unwrap();
    let a = make_split(&pools, &s, &mut s.rng()).unwrap();
    let b = make_split(&pools, &s, &mut s.rng()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn short_pool_is_a_config_error_naming_the_class() {
    let s = spec(3, 50, 2.0, 0.1);
    let pools = id_pools(3, 20);
    let e = make_split(&pools, &s, &mut s.rng()).unwrap_err();
    assert_eq!(e.exit_code(), 2, "{e}");
    assert!(e.to_string().contains("class 0"), "{e}");
}

#[test]
fn invalid_spec_is_rejected() {
    assert!(longtail_counts(&spec(3, 50, 0.5, 0.1)).is_err());
    assert!(longtail_counts(&spec(3, 50, 2.0, 0.0)).is_err());
    assert!(longtail_counts(&spec(1, 50, 2.0, 0.1)).is_err());
}

#[test]
fn written_split_loads_back() {
    let s = spec(3, 30, 3.0, 0.2);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let pools = synth_gaussian_mixture(3, 4, 2.0, 37, &mut rng).unwrap();
    let split = make_split(&pools, &s, &mut s.rng()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_split(dir.path(), &split, &s).unwrap();
    let loaded = load_csv(&dir.path().join("test.csv"), &CsvSchema::positional(4, 3)).unwrap();
    let flat: Vec<&Sample> = loaded.pools.iter().flatten().collect();
    assert_eq!(flat.len(), split.test.len());
    for sample in &split.test {
        assert!(flat.contains(&sample), "lost {sample:?}");
    }
    let manifest = fs::read_to_string(dir.path().join("manifest.txt")).unwrap();
    assert!(manifest.contains("counts_total=30,17,10"), "{manifest}");
}

fn ingest_error(text: &str) -> (u64, String) {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("d.csv");
    fs::write(&p, text).unwrap();
    match load_csv(&p, &CsvSchema::positional(2, 3)) {
        Err(Error::Ingest { line, message, .. }) => (line, message),
        other => panic!("expected ingest error, got {other:?}"),
    }
}

#[test]
fn csv_errors_carry_line_numbers() {
    let (line, msg) = ingest_error("label,f0,f1\n0,1,2\n1,x,2\n");
    assert_eq!(line, 3);
    assert!(msg.contains("f0"), "{msg}");

    let (line, msg) = ingest_error("label,f0,f1\n0,1,2\n0,1,2\n7,1,2\n");
    assert_eq!(line, 4);
    assert!(msg.contains("unknown label"), "{msg}");

    let (line, msg) = ingest_error("label,f0\n0,1\n");
    assert_eq!(line, 1);
    assert!(msg.contains("f1"), "{msg}");

    let (line, _) = ingest_error("label,f0,f1\n0,1,2\n0,1\n");
    assert_eq!(line, 3);
}

#[test]
fn empty_csv_warns() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("d.csv");
    fs::write(&p, "label,f0,f1\n").unwrap();
    let loaded = load_csv(&p, &CsvSchema::positional(2, 3)).unwrap();
    assert_eq!(loaded.warnings.len(), 1);
    assert!(loaded.pools.iter().all(Vec::is_empty));
}
