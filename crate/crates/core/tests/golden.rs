//! Frozen fixtures for the seeded instance generator: same seed, same
//! instance, same serialization, across releases.  Regenerate with
//! `UPDATE_GOLDEN=1 cargo test --test golden` and review the diff.

use std::fs;
use std::path::PathBuf;

use exppoly::oracle::{random_exppoly, RandomProfile};
use exppoly::poly::ExpPoly;

fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data")
}

fn check_fixture(name: &str, value: &ExpPoly) {
    let path = data_dir().join(name);
    let text = serde_json::to_string_pretty(value).unwrap() + "\n";
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        fs::create_dir_all(data_dir()).unwrap();
        fs::write(&path, &text).unwrap();
        return;
    }
    let want = fs::read_to_string(&path)
        .unwrap_or_else(|_| panic!("missing fixture {name}; run with UPDATE_GOLDEN=1"));
    assert_eq!(text, want, "fixture {name} drifted");
    let parsed: ExpPoly = serde_json::from_str(&want).unwrap();
    assert!(parsed.eq_exact(value).unwrap(), "fixture {name} does not parse back");
}

#[test]
fn generator_fixtures_are_stable() {
    for seed in 0..10u64 {
        let f1 = random_exppoly(seed, &RandomProfile::default());
        check_fixture(&format!("exppoly_seed{seed}_d1.json"), &f1);
        let profile2 = RandomProfile {
            dim: 2,
            max_terms: 3,
            max_degree: 2,
            exact: true,
            ..RandomProfile::default()
        };
        let f2 = random_exppoly(seed, &profile2);
        check_fixture(&format!("exppoly_seed{seed}_d2.json"), &f2);
    }
}

#[test]
fn generation_is_deterministic_within_a_process() {
    for seed in [0u64, 3, 9] {
        let a = random_exppoly(seed, &RandomProfile::default());
        let b = random_exppoly(seed, &RandomProfile::default());
        assert!(a.eq_exact(&b).unwrap());
    }
}
