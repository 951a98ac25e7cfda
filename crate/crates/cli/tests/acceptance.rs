// SPDX-License-Identifier: Apache-2.0

//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::time::{Duration, Instant};

use encsearch::aph::{
    adversary_link, aph_prepare, build_fetch, reconstruct, request_respects_groups, serve_fetch, theta1,
    AdversaryModel, AphConfig, FetchRequest, FetchState, Scramble,
};
use encsearch::he::{he_add, he_dec, he_enc, he_enc_with_nonce, he_keygen, he_keygen_from_primes, he_mul_plain};
use encsearch::ontology::{build_onto, OntologyConfig};
use encsearch::oracle::{oracle_concept_search, OracleMode, OracleParams};
use encsearch::parsearch::{batch_search, QueryBatch, Strategy};
use encsearch::seal::SealKey;
use encsearch::siis::{build_indexes, client_sort, siis_search, siis_trapdoor, tabgen, zero_pool_size, SiisConfig};
use encsearch::sknn::{sknn_enc_doc_traced, sknn_enc_query_with, sknn_eval, sknn_keygen, SknnParams};
use encsearch::sse::{
    concept_vectors, encrypt_concept_vectors, encrypt_query_vector, sse_build_index, sse_search, sse_trapdoor,
    IndexSidecar,
};
use encsearch::synth::{fixture, random_access, random_concept_vector, random_sidecar, Fixture, SynthConfig};
use encsearch::textindex::{Document, StopList};
use num_bigint::{BigUint, RandBigInt};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

// Pinned budgets and tolerances.
const PAILLIER_TRIALS: usize = 1000;
const PAILLIER_PRIME_BITS: u64 = 64;
const PAILLIER_BUDGET: Duration = Duration::from_secs(10);
const SKNN_INSTANCES: usize = 500;
const SKNN_REL_TOL: f64 = 1e-6;
const SKNN_ORDER_FIXTURES: usize = 20;
const SSE_QUERIES: usize = 50;
const SSE_K: usize = 10;
const PAR_DOCS: usize = 10_000;
const PAR_QUERIES: usize = 20;
const PAR_TIMING_MIN_CORES: usize = 4;
const SIIS_USERS: usize = 5;
const SIIS_QUERIES_PER_USER: usize = 50;
const SIIS_PRIME_BITS: u64 = 128;
const SIIS_BUDGET: Duration = Duration::from_secs(300);
const APH_SELECTIONS: usize = 100;

type Outcome = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------- 1

fn paillier_suite() -> Outcome {
    let start = Instant::now();
    let (pk, sk) = he_keygen_from_primes(&BigUint::from(5u32), &BigUint::from(7u32)).map_err(|e| e.to_string())?;
    let c = he_enc_with_nonce(&pk, &BigUint::from(3u32), &BigUint::from(2u32)).map_err(|e| e.to_string())?;
    check(c.value == BigUint::from(683u32), || format!("toy ciphertext {} != 683", c.value))?;
    let m = he_dec(&sk, &pk, &c).map_err(|e| e.to_string())?;
    check(m == BigUint::from(3u32), || format!("toy plaintext {m} != 3"))?;

    let mut r = rng(101);
    let (pk, sk) = he_keygen(PAILLIER_PRIME_BITS, &mut r).map_err(|e| e.to_string())?;
    let pk = pk.prepared();
    let n = pk.n.clone();
    let e = |e: encsearch::Error| e.to_string();
    for i in 0..PAILLIER_TRIALS {
        let a = r.gen_biguint_below(&n);
        let b = r.gen_biguint_below(&n);
        let k = r.gen_biguint_below(&n);
        let ca = he_enc(&pk, &a, &mut r).map_err(e)?;
        let cb = he_enc(&pk, &b, &mut r).map_err(e)?;
        check(he_dec(&sk, &pk, &ca).map_err(e)? == a, || format!("roundtrip {i}"))?;
        let sum = he_dec(&sk, &pk, &he_add(&pk, &ca, &cb).map_err(e)?).map_err(e)?;
        check(sum == (&a + &b) % &n, || format!("additive check {i}"))?;
        let prod = he_dec(&sk, &pk, &he_mul_plain(&pk, &ca, &k).map_err(e)?).map_err(e)?;
        check(prod == (&a * &k) % &n, || format!("scalar check {i}"))?;
    }
    let took = start.elapsed();
    check(took < PAILLIER_BUDGET, || format!("took {took:?}, budget {PAILLIER_BUDGET:?}"))?;
    Ok(format!(
        "toy vector c=683 -> 3; {PAILLIER_TRIALS} roundtrips, additive and scalar checks exact at {PAILLIER_PRIME_BITS}-bit primes in {took:.2?}"
    ))
}

// ---------------------------------------------------------------- 2

fn sknn_identity() -> Outcome {
    let mut r = rng(202);
    let params = SknnParams::default();
    let mut worst: f64 = 0.0;
    for i in 0..SKNN_INSTANCES {
        let m = r.gen_range(1..=50);
        let u = r.gen_range(0..=5);
        let key = sknn_keygen(m, u, &mut r).map_err(|e| e.to_string())?;
        let d: Vec<f64> = (0..m).map(|_| r.gen_range(-5.0..5.0)).collect();
        let q: Vec<f64> = (0..m).map(|_| r.gen_range(-5.0..5.0)).collect();
        let (rs, t) = (r.gen_range(1.0..10.0), r.gen_range(-1.0..1.0));
        let (ed, ext_d) = sknn_enc_doc_traced(&key, &d, &params, &mut r).map_err(|e| e.to_string())?;
        let (eq, ext_q) = sknn_enc_query_with(&key, &q, rs, t, &params, &mut r).map_err(|e| e.to_string())?;
        let dq: f64 = d.iter().zip(&q).map(|(a, b)| a * b).sum();
        let noise: f64 = ext_d[m + 1..].iter().zip(&ext_q[m + 1..]).map(|(a, b)| a * b).sum();
        let want = rs * dq + noise + t;
        let got = sknn_eval(&ed, &eq).map_err(|e| e.to_string())?;
        let rel = (got - want).abs() / want.abs().max(1.0);
        worst = worst.max(rel);
        check(rel <= SKNN_REL_TOL, || format!("instance {i}: relative error {rel:e}"))?;
    }

    let noise_free = SknnParams::noise_free();
    for f in 0..SKNN_ORDER_FIXTURES {
        let m = r.gen_range(5..=50);
        let key = sknn_keygen(m, 3, &mut r).map_err(|e| e.to_string())?;
        let q: Vec<f64> = (0..m).map(|_| r.gen_range(0.0..1.0)).collect();
        let (eq, _) = sknn_enc_query_with(&key, &q, r.gen_range(1.0..10.0), r.gen_range(-1.0..1.0), &noise_free, &mut r)
            .map_err(|e| e.to_string())?;
        let mut plain = Vec::new();
        let mut enc = Vec::new();
        for i in 0..100 {
            let d: Vec<f64> = (0..m).map(|_| r.gen_range(0.0..1.0)).collect();
            plain.push((d.iter().zip(&q).map(|(a, b)| a * b).sum::<f64>(), i));
            let (ed, _) = sknn_enc_doc_traced(&key, &d, &noise_free, &mut r).map_err(|e| e.to_string())?;
            enc.push((sknn_eval(&ed, &eq).map_err(|e| e.to_string())?, i));
        }
        let order = |mut v: Vec<(f64, usize)>| {
            v.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
            v.into_iter().map(|(_, i)| i).collect::<Vec<_>>()
        };
        check(order(plain) == order(enc), || format!("argsort differs on fixture {f}"))?;
    }
    Ok(format!(
        "{SKNN_INSTANCES} instances within {SKNN_REL_TOL:e} relative (worst {worst:.1e}); argsort exact on {SKNN_ORDER_FIXTURES} 100-doc fixtures"
    ))
}

// ---------------------------------------------------------------- 3

fn sse_equivalence(fx: &Fixture) -> Outcome {
    let stop = StopList::english();
    let (onto, _) = build_onto(&fx.pages, &stop, &OntologyConfig::default()).map_err(|e| e.to_string())?;
    let mut r = rng(303);
    let key = sknn_keygen(onto.concept_count(), 4, &mut r).map_err(|e| e.to_string())?;
    let params = SknnParams::noise_free();
    let x = 20;
    let (index, _) = sse_build_index(&fx.docs, &stop, &onto, &key, x, &params, &mut r).map_err(|e| e.to_string())?;
    let oracle = OracleParams { x_doc: x, x_query: x, mode: OracleMode::Vector };
    for query in fx.queries(SSE_QUERIES, 31) {
        let (td, _) = sse_trapdoor(&query, &stop, &onto, &key, x, &params, &mut r).map_err(|e| e.to_string())?;
        let got: Vec<String> =
            sse_search(&index, &td, SSE_K).map_err(|e| e.to_string())?.into_iter().map(|h| h.doc_id).collect();
        let want: Vec<String> = oracle_concept_search(&fx.docs, &stop, &onto, &query, &oracle, SSE_K, None)
            .map_err(|e| e.to_string())?
            .into_iter()
            .map(|h| h.doc_id)
            .collect();
        check(got == want, || format!("query {query:?}: {got:?} != {want:?}"))?;
    }
    Ok(format!(
        "{} docs, {} concepts, X={x}, eps=0: top-{SSE_K} lists equal for {SSE_QUERIES} queries",
        fx.docs.len(),
        onto.concept_count()
    ))
}

// ---------------------------------------------------------------- 4

fn parallel_correctness() -> Outcome {
    let mut r = rng(404);
    let n = 50;
    let key = sknn_keygen(n, 4, &mut r).map_err(|e| e.to_string())?;
    let params = SknnParams::default();
    let sidecar = random_sidecar(PAR_DOCS, n, 20, &mut r);
    let index = encrypt_concept_vectors(&sidecar, &key, &params, &mut r).map_err(|e| e.to_string())?;
    let batch = QueryBatch(
        (0..PAR_QUERIES)
            .map(|_| encrypt_query_vector(&random_concept_vector(n, 10, &mut r), n, &key, &params, &mut r))
            .collect::<Result<_, _>>()
            .map_err(|e| e.to_string())?,
    );
    let k = 10;
    let reference = batch_search(&index, &batch, k, Strategy::Shared, 1).map_err(|e| e.to_string())?;
    let mut runs = 0;
    for w in [1, 2, 4, 8] {
        let mut strategies = vec![Strategy::Shared];
        strategies.extend([1, 2, 4, 8].map(Strategy::Partitioned));
        for s in strategies {
            let got = batch_search(&index, &batch, k, s, w).map_err(|e| e.to_string())?;
            check(got == reference, || format!("{s:?} W={w} differs"))?;
            runs += 1;
        }
    }

    let time = |w: usize| -> Result<Duration, String> {
        let mut best = Duration::MAX;
        for _ in 0..3 {
            let start = Instant::now();
            batch_search(&index, &batch, k, Strategy::Shared, w).map_err(|e| e.to_string())?;
            best = best.min(start.elapsed());
        }
        Ok(best)
    };
    let (t1, t4) = (time(1)?, time(4)?);
    let cores = std::thread::available_parallelism().map(|c| c.get()).unwrap_or(1);
    let timing = if cores >= PAR_TIMING_MIN_CORES {
        check(t4 <= t1, || format!("W=4 took {t4:?}, W=1 took {t1:?}"))?;
        format!("W=4 {t4:.2?} <= W=1 {t1:.2?}")
    } else {
        format!(
            "W=1 {t1:.2?}, W=4 {t4:.2?}; timing clause not asserted: {cores} core(s) available, needs >= {PAR_TIMING_MIN_CORES}"
        )
    };
    Ok(format!("{runs} (strategy, W, P) runs identical over {PAR_DOCS} docs x {PAR_QUERIES} queries; {timing}"))
}

// ---------------------------------------------------------------- 5

fn siis_end_to_end(fx: &Fixture) -> Outcome {
    let start = Instant::now();
    let e = |e: encsearch::Error| e.to_string();
    let stop = StopList::english();
    let (onto, _) = build_onto(&fx.pages, &stop, &OntologyConfig::default()).map_err(e)?;
    let mut r = rng(505);
    let (pk, sk) = he_keygen(SIIS_PRIME_BITS, &mut r).map_err(e)?;
    let config = SiisConfig { inv_max: 100, nc: 20, k_security: 10, x_concepts: 20, dummies_enabled: true };
    let (x_query, y_query) = (10, 15);
    let sidecar = concept_vectors(&fx.docs, &stop, &onto, config.x_concepts).map_err(e)?;
    let ids: Vec<String> = fx.docs.iter().map(|d| d.doc_id.clone()).collect();
    let users = random_access(&ids, SIIS_USERS, 0.5, &mut r);
    let (t1, t2) = tabgen(&pk, config.inv_max, config.nc, config.k_security, &mut r).map_err(e)?;
    let built = build_indexes(&sidecar, &users, &t1, &config, &mut r).map_err(e)?;
    let label = |doc: &str| format!("{:08}", built.aliases.0[doc]);
    let relabelled: Vec<Document> = fx.docs.iter().map(|d| Document::new(label(&d.doc_id), d.text.clone())).collect();
    let dummy_postings: usize = built.plain.i1.values().flatten().filter(|p| p.1 == 0).count();

    let (mut results, mut filtered, mut queries) = (0usize, 0usize, 0usize);
    for (user, granted) in &users {
        let allowed: BTreeSet<String> = granted.iter().map(|d| label(d)).collect();
        for query in fx.queries(SIIS_QUERIES_PER_USER, 51) {
            let td = siis_trapdoor(&query, &stop, &onto, config.inv_max, x_query, y_query, &mut r).map_err(e)?;
            let result = siis_search(&built.i1, &built.i2, &t2, &pk, &td, user, fx.docs.len()).map_err(e)?;
            let ranked = client_sort(&result, &sk, &pk).map_err(e)?;
            filtered += result.0.len() - ranked.len();
            let selected: BTreeSet<u32> = td.0.iter().map(|t| t.concept).collect();
            let params = OracleParams {
                x_doc: config.x_concepts,
                x_query: y_query,
                mode: OracleMode::Quantized { inv_max: config.inv_max, selected: Some(selected) },
            };
            let want =
                oracle_concept_search(&relabelled, &stop, &onto, &query, &params, usize::MAX, Some(&allowed)).map_err(e)?;
            let got: Vec<(String, f64, f64)> =
                ranked.iter().map(|x| (format!("{:08}", x.alias), x.x as f64, x.y as f64)).collect();
            let want: Vec<(String, f64, f64)> = want.into_iter().map(|h| (h.doc_id, h.primary, h.secondary)).collect();
            check(got == want, || format!("{user}, {query:?}: client ranking differs from reference"))?;

            for x in &ranked {
                check(allowed.contains(&format!("{:08}", x.alias)), || format!("{user}: inaccessible alias {} survived", x.alias))?;
                let mut plain_x = 0u64;
                let mut real = false;
                for t in &td.0 {
                    if let Some(p) = built.plain.i1.get(&t.concept).and_then(|es| es.iter().find(|p| p.0 == x.alias)) {
                        plain_x += t.cp as u64 * p.1 as u64;
                        real |= p.1 > 0;
                    }
                }
                check(real, || format!("{user}: dummy-only alias {} survived", x.alias))?;
                check(x.x == plain_x, || format!("{user}: decrypted x {} != plaintext {plain_x}", x.x))?;
            }
            results += ranked.len();
            queries += 1;
        }
    }
    let took = start.elapsed();
    check(took < SIIS_BUDGET, || format!("took {took:?}, budget {SIIS_BUDGET:?}"))?;
    Ok(format!(
        "{queries} queries over {SIIS_USERS} users: rankings exact, {results} results with x = sum CP*DP, {filtered} dummy/inaccessible entries filtered ({dummy_postings} dummy postings in I1), {took:.1?}"
    ))
}

// ---------------------------------------------------------------- 6

fn compression_law(fx: &Fixture) -> Outcome {
    let e = |e: encsearch::Error| e.to_string();
    let (nc, inv, k) = (20usize, 100u32, 10u32);
    let ns = inv as usize + 1;
    let nc0 = zero_pool_size(nc, ns, k);
    check(nc0 == 1010, || format!("NC0 = {nc0}, expected 1010"))?;

    let stop = StopList::english();
    let (onto, _) = build_onto(&fx.pages, &stop, &OntologyConfig::default()).map_err(e)?;
    let (pk, _) = he_keygen(64, &mut rng(606)).map_err(e)?;
    let config = SiisConfig { inv_max: inv, nc, k_security: k, x_concepts: 20, dummies_enabled: true };
    let build = |docs: &[Document]| -> Result<(usize, usize, encsearch::siis::I1Size), String> {
        let mut r = rng(607);
        let (t1, t2) = tabgen(&pk, inv, nc, k, &mut r).map_err(e)?;
        let sidecar: IndexSidecar = concept_vectors(docs, &stop, &onto, config.x_concepts).map_err(e)?;
        let users = BTreeMap::from([("u".to_string(), sidecar.0.keys().cloned().collect())]);
        let built = build_indexes(&sidecar, &users, &t1, &config, &mut r).map_err(e)?;
        Ok((t2.len(), t2.byte_size(&pk), built.i1.size()))
    };
    let (len1, bytes1, i1) = build(&fx.docs)?;
    let mut doubled = fx.docs.clone();
    doubled.extend(fx.docs.iter().map(|d| Document::new(format!("{}b", d.doc_id), d.text.clone())));
    let (len2, bytes2, i2) = build(&doubled)?;
    check(len1 == nc0 + nc * (ns - 1) && len1 == 3010, || format!("|T2| = {len1}, expected 3010"))?;
    check(len2 == len1 && bytes2 == bytes1, || format!("T2 changed: {bytes1} -> {bytes2} bytes"))?;
    check(i1.entries == i2.entries, || format!("I1 entries changed: {} -> {}", i1.entries, i2.entries))?;
    check(i2.postings > i1.postings, || "I1 postings did not grow".to_string())?;
    Ok(format!(
        "NC0=1010, |T2|=3010; doubling {} -> {} docs: T2 {bytes1} -> {bytes2} bytes, I1 entries {} -> {}, postings {} -> {}",
        fx.docs.len(),
        doubled.len(),
        i1.entries,
        i2.entries,
        i1.postings,
        i2.postings
    ))
}

// ---------------------------------------------------------------- 7

fn aph_suite() -> Outcome {
    let e = |e: encsearch::Error| e.to_string();
    let mut r = rng(707);
    let docs: Vec<(String, Vec<u8>)> =
        (0..12).map(|i| (format!("d{i}"), (0..r.gen_range(0..600)).map(|_| r.gen()).collect())).collect();
    let aliases: BTreeMap<String, u32> = docs.iter().enumerate().map(|(i, (d, _))| (d.clone(), i as u32)).collect();
    let cfg = AphConfig { block_size: 64, versions: 3, scramble: Some(Scramble { x: 1, y: 3 }) };
    let key = SealKey::generate(&mut r);
    let (store, tables, corr) = aph_prepare(&docs, &aliases, &cfg, &key, &mut r).map_err(e)?;

    // (a) and (d): random selections, byte-exact, grouping respected.
    let mut state = FetchState::default();
    for i in 0..APH_SELECTIONS {
        let (id, bytes) = &docs[r.gen_range(0..docs.len())];
        let plan = build_fetch(corr.0[id], &tables, cfg.scramble, &mut state, &mut r).map_err(e)?;
        check(request_respects_groups(&plan, &tables), || format!("selection {i}: dummy outside the true groups"))?;
        let blobs = serve_fetch(&store, &plan.request).map_err(e)?;
        check(&reconstruct(&plan.true_versions, &blobs, &key).map_err(e)? == bytes, || format!("selection {i}: bytes differ"))?;
    }

    // (b) V = 3, β = 3.
    let three: Vec<(String, Vec<u8>)> = vec![("t".into(), vec![7u8; 36])];
    let cfg3 = AphConfig { block_size: 16, versions: 3, scramble: None };
    let (_, t3, _) = aph_prepare(&three, &BTreeMap::from([("t".to_string(), 0)]), &cfg3, &key, &mut r).map_err(e)?;
    let theta = theta1(&t3, 0).map_err(e)?;
    check(t3.block_count(0).map_err(e)? == 3 && theta == BigUint::from(27u32), || format!("theta1 = {theta}"))?;

    // (c) V = 2, β = 2, scrambling off.
    let pair: Vec<(String, Vec<u8>)> = vec![("p".into(), vec![1u8; 20]), ("q".into(), vec![2u8; 24])];
    let cfg2 = AphConfig { block_size: 16, versions: 2, scramble: None };
    let pair_aliases = BTreeMap::from([("p".to_string(), 0), ("q".to_string(), 1)]);
    let (_, t2, _) = aph_prepare(&pair, &pair_aliases, &cfg2, &key, &mut r).map_err(e)?;
    check(t2.block_count(0).map_err(e)? == 2, || "document p should have 2 blocks".into())?;
    let model = AdversaryModel { max_beta: 2, scramble: None };
    // Every order of the four combinations followed by every fifth request.
    let blocks = t2.blocks(0).map_err(e)?;
    let (v0, v1) = (&t2.tv[&blocks[0].0], &t2.tv[&blocks[1].0]);
    let combos: Vec<FetchRequest> =
        v0.iter().flat_map(|a| v1.iter().map(move |b| FetchRequest(BTreeSet::from([*a, *b])))).collect();
    let mut traces = 0;
    for perm in permutations(4) {
        let first: Vec<FetchRequest> = perm.iter().map(|i| combos[*i].clone()).collect();
        check(adversary_link(&first, &model).is_empty(), || format!("link within the first 4 fetches ({perm:?})"))?;
        for fifth in &combos {
            let mut trace = first.clone();
            trace.push(fifth.clone());
            let flags = adversary_link(&trace, &model);
            check(flags.len() == 1 && flags[0].second == 4, || format!("fetch 5 not linked exactly once ({perm:?})"))?;
            traces += 1;
        }
    }
    // The protocol itself walks through all four combinations first.
    for seed in 0..50 {
        let mut sr = rng(seed);
        let mut st = FetchState::default();
        let trace: Vec<FetchRequest> =
            (0..5).map(|_| build_fetch(0, &t2, None, &mut st, &mut sr).map(|p| p.request)).collect::<Result<_, _>>().map_err(e)?;
        let first = adversary_link(&trace, &model).iter().map(|f| f.second).min();
        check(first == Some(4), || format!("seed {seed}: first link at {first:?}"))?;
    }
    Ok(format!(
        "(a) {APH_SELECTIONS} selections byte-exact; (b) theta1=27; (c) {traces} exhaustive traces and 50 protocol runs link first at fetch 5; (d) grouping held on every request"
    ))
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for i in 0..=p.len() {
            let mut q = p.clone();
            q.insert(i, n - 1);
            out.push(q);
        }
    }
    out
}

// ---------------------------------------------------------------- 8

fn role_hygiene() -> Outcome {
    let env = common::setup(&SynthConfig { concepts: 20, docs: 40, ..SynthConfig::default() }, &common::test_config());
    let passed = |stage: &str| -> Result<(), String> {
        let (code, out) = env.run(&["leak-check"]).map_err(|e| format!("{e:#}"))?;
        check(code == 0, || format!("after {stage}: {out}"))
    };
    passed("init+keygen")?;
    let query = env.fixture.queries(1, 1).remove(0);
    let doc = env.fixture.docs[0].doc_id.clone();
    for scheme in ["sse", "siis"] {
        common::build(&env, scheme);
        passed(&format!("build {scheme}"))?;
        env.run(&["search", "--scheme", scheme, "--user", "user0", "--k", "5", &query]).map_err(|e| format!("{e:#}"))?;
        passed(&format!("search {scheme}"))?;
        env.run(&["fetch", "--doc", &doc]).map_err(|e| format!("{e:#}"))?;
        passed(&format!("fetch after {scheme}"))?;
    }
    let mut names = Vec::new();
    collect_names(&env.root().join("cloud"), &mut names);
    let forbidden = ["t1", "alias", "correspondence", "aph_tables", "he_sk", "sknn_key", ".key", "sealed"];
    let bad: Vec<&String> = names.iter().filter(|n| forbidden.iter().any(|f| n.contains(f))).collect();
    check(bad.is_empty(), || format!("cloud holds {bad:?}"))?;
    Ok(format!("leak check clean after 7 workflow stages; {} cloud files, none secret", names.len()))
}

fn collect_names(dir: &std::path::Path, out: &mut Vec<String>) {
    for entry in fs::read_dir(dir).into_iter().flatten().flatten() {
        let path = entry.path();
        if path.is_dir() {
            collect_names(&path, out);
        } else {
            out.push(path.file_name().unwrap().to_string_lossy().into_owned());
        }
    }
}

fn main() {
    let fx = fixture(&SynthConfig::default());
    let criteria: Vec<Criterion> = vec![
        ("1 Paillier suite", Box::new(paillier_suite)),
        ("2 SkNN identity", Box::new(sknn_identity)),
        ("3 SSE oracle equivalence", Box::new(|| sse_equivalence(&fx))),
        ("4 parallel correctness", Box::new(parallel_correctness)),
        ("5 SIIS end-to-end", Box::new(|| siis_end_to_end(&fx))),
        ("6 compression law", Box::new(|| compression_law(&fx))),
        ("7 APH", Box::new(aph_suite)),
        ("8 role hygiene", Box::new(role_hygiene)),
    ];
    let mut failed = 0;
    for (name, run) in &criteria {
        match run() {
            Ok(detail) => println!("PASS [{name}] {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL [{name}] {why}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
