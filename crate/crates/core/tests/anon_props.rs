use infoflow::anonbench::{
    column_channel, dp_release, k_anonymity_level, linkage_attack, RoleSidecar, Table,
};
use infoflow::mechanisms::{check_mi_bound, post_process};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn load(name: &str) -> Table {
    let dir = format!("{}/../../fixtures/anon", env!("CARGO_MANIFEST_DIR"));
    let roles: RoleSidecar =
        serde_json::from_str(&std::fs::read_to_string(format!("{dir}/{name}.roles.json")).unwrap())
            .unwrap();
    Table::from_csv(
        std::fs::File::open(format!("{dir}/{name}.csv")).unwrap(),
        &roles,
    )
    .unwrap()
}

fn permuted(t: &Table, seed: u64) -> Table {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = t.rows().to_vec();
    for i in (1..rows.len()).rev() {
        rows.swap(i, rng.random_range(0..=i));
    }
    Table::new(t.columns().to_vec(), rows).unwrap()
}

#[test]
fn fixture_attack_discloses_target_class() {
    let release = load("release");
    let rep = linkage_attack(&release, &load("aux")).unwrap();
    assert_eq!(rep.k_achieved, 2);
    assert_eq!(rep.linked_homogeneity_rate, 1.0);
    let target = rep
        .classes
        .iter()
        .find(|c| c.quasi_identifiers == ["148**", "30-39"])
        .unwrap();
    assert!(target.homogeneous);
    assert!((rep.homogeneity_rate - 1.0 / 3.0).abs() < 1e-12);
    assert_eq!(
        linkage_attack(&release, &load("aux_disjoint"))
            .unwrap()
            .reid_rate,
        0.0
    );
}

proptest! {
    #[test]
    fn k_invariant_under_row_permutation(seed in any::<u64>()) {
        for name in ["release", "survey", "aux"] {
            let t = load(name);
            prop_assert_eq!(k_anonymity_level(&t).unwrap(), k_anonymity_level(&permuted(&t, seed)).unwrap());
        }
    }

    #[test]
    fn post_processed_release_stays_within_bound(seed in any::<u64>(), eps in 0.05f64..3.0) {
        let survey = load("survey");
        let (channel, prior) = column_channel(&survey, "smoker", eps).unwrap();
        let (_, cert) = dp_release(&survey, "smoker", eps, seed).unwrap();
        let bound = cert.bound_sh.finite().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let flips: Vec<bool> = channel.outputs().iter().map(|_| rng.random_bool(0.5)).collect();
        let outputs = channel.outputs().to_vec();
        let merged = post_process(&channel, |y| {
            let i = outputs.iter().position(|o| o == y).unwrap();
            if flips[i] { "kept".to_string() } else { y.to_string() }
        });
        let after = check_mi_bound(&merged, &prior).unwrap();
        prop_assert!(after.mi_sh <= bound + 1e-9);
        prop_assert!(after.mi_sh <= cert.mi_sh + 1e-9);
    }
}

#[test]
fn k_invariant_under_identifier_removal() {
    for name in ["survey", "aux"] {
        let t = load(name);
        assert_eq!(
            k_anonymity_level(&t).unwrap(),
            k_anonymity_level(&t.drop_identifiers()).unwrap()
        );
    }
}

#[test]
fn dp_release_is_seeded() {
    let survey = load("survey");
    let a = dp_release(&survey, "smoker", 1.0, 9).unwrap();
    let b = dp_release(&survey, "smoker", 1.0, 9).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.0.rows().len(), survey.rows().len());
}
