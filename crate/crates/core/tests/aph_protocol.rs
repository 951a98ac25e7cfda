// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;

use encsearch::aph::{
    adversary_link, aph_prepare, build_fetch, link_precision, reconstruct, request_respects_groups, serve_fetch,
    theta1, AdversaryModel, AphConfig, FetchState, Scramble,
};
use encsearch::seal::SealKey;
use num_bigint::BigUint;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

type Corpus = (Vec<(String, Vec<u8>)>, BTreeMap<String, u32>);

fn corpus(sizes: &[usize], rng: &mut ChaCha20Rng) -> Corpus {
    let docs: Vec<(String, Vec<u8>)> = sizes
        .iter()
        .enumerate()
        .map(|(i, n)| (format!("doc{i}"), (0..*n).map(|_| rng.gen()).collect()))
        .collect();
    let aliases = docs.iter().enumerate().map(|(i, (id, _))| (id.clone(), i as u32 * 3 + 1)).collect();
    (docs, aliases)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn fetched_documents_are_byte_exact(
        sizes in proptest::collection::vec(0usize..300, 1..6),
        block_size in 16usize..80,
        versions in 1u32..4,
        scramble in proptest::option::of((0u32..3, 1u32..3)),
        seed in any::<u64>(),
    ) {
        let scramble = scramble.map(|(x, d)| Scramble { x, y: x + d });
        let cfg = AphConfig { block_size, versions, scramble };
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let (docs, aliases) = corpus(&sizes, &mut rng);
        let key = SealKey::generate(&mut rng);
        let (store, tables, corr) = aph_prepare(&docs, &aliases, &cfg, &key, &mut rng).unwrap();
        let mut state = FetchState::default();
        for _ in 0..3 {
            for (id, bytes) in &docs {
                let plan = build_fetch(corr.0[id], &tables, scramble, &mut state, &mut rng).unwrap();
                prop_assert!(request_respects_groups(&plan, &tables));
                let blobs = serve_fetch(&store, &plan.request).unwrap();
                prop_assert_eq!(&reconstruct(&plan.true_versions, &blobs, &key).unwrap(), bytes);
            }
        }
    }
}

#[test]
fn threshold_counts_version_combinations() {
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    let (docs, aliases) = corpus(&[36], &mut rng);
    let cfg = AphConfig { block_size: 16, versions: 3, scramble: None };
    let (_, tables, _) = aph_prepare(&docs, &aliases, &cfg, &SealKey::generate(&mut rng), &mut rng).unwrap();
    // 12 payload bytes per block: 3 blocks of 3 versions.
    assert_eq!(theta1(&tables, 1).unwrap(), BigUint::from(27u32));
}

/// Fetches doc `target` repeatedly, interleaved with other documents, and
/// returns the 1-based position among the target's fetches of the first
/// flagged pair.
fn first_link(seed: u64) -> (usize, f64) {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    // Two blocks (β = 2) for the target, one or two for the others.
    let (docs, aliases) = corpus(&[20, 10, 24, 5], &mut rng);
    let cfg = AphConfig { block_size: 16, versions: 2, scramble: None };
    let (_, tables, corr) = aph_prepare(&docs, &aliases, &cfg, &SealKey::generate(&mut rng), &mut rng).unwrap();
    let target = corr.0["doc0"];
    assert_eq!(tables.block_count(target).unwrap(), 2);
    assert_eq!(theta1(&tables, target).unwrap(), BigUint::from(4u32));
    let model = AdversaryModel { max_beta: 2, scramble: None };
    let mut state = FetchState::default();
    let mut trace = Vec::new();
    let mut plans = Vec::new();
    for round in 1..=8 {
        let plan = build_fetch(target, &tables, None, &mut state, &mut rng).unwrap();
        trace.push(plan.request.clone());
        plans.push(plan);
        let flags = adversary_link(&trace, &model);
        let on_target: Vec<_> =
            flags.iter().filter(|f| plans[f.first].alias == target && plans[f.second].alias == target).collect();
        if !on_target.is_empty() {
            return (round, link_precision(&flags, &plans));
        }
        // Another document in between; it never shares versions with the target.
        let other = corr.0[["doc1", "doc2", "doc3"][rng.gen_range(0..3)]];
        let plan = build_fetch(other, &tables, None, &mut state, &mut rng).unwrap();
        trace.push(plan.request.clone());
        plans.push(plan);
    }
    (usize::MAX, 0.0)
}

#[test]
fn exact_repeats_appear_only_after_the_threshold() {
    for seed in 0..200 {
        let (round, precision) = first_link(seed);
        assert_eq!(round, 5, "seed {seed}");
        assert!(precision > 0.0);
    }
}
